"""Filippov dynamics on the switching manifold {x = 0}.

Region classification, sliding vector fields, hybrid (event-driven)
integration of the piecewise-smooth flow, and the derived geometric
objects used throughout: equilibria and pseudoequilibria, nullclines,
the one-sided periodic solutions of the forced 1-D family, crossing
and sliding limit cycles of the planar family, and basin membership.

Conventions.  Sliding uses the convex combination lam*F_plus +
(1 - lam)*F_minus with lam = F1_minus / (F1_minus - F1_plus), which
annihilates the normal component on the sliding set.  Region labels
use weak inequalities; ties resolve attracting, then repelling, then
crossing.  Crossing events are located by bracketed root finding on
the integrator's dense output, well below 1e-10 in state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .fields import (
    NonAutonomousParams1D,
    PiecewiseField,
    PiecewiseLinearParams2D,
    TWO_PI,
    replace,
)


class DegenerateSlidingError(ValueError):
    """Raised when F1_minus - F1_plus is too small to define lambda."""


class EventResolutionError(RuntimeError):
    """Raised when event location stalls (step underflow near a tangency)."""

    def __init__(self, message: str, time: float, state: np.ndarray):
        super().__init__(f"{message} at t={time!r}, state={state!r}")
        self.time = time
        self.state = np.asarray(state, dtype=float)


class NotALimitCycleError(ValueError):
    """Raised when a one-sided periodic solution would cross the manifold."""


class RegionLabel(Enum):
    """Phase-space region of a point relative to the switching manifold."""

    S_PLUS = "S+"
    S_MINUS = "S-"
    SIGMA_ATTRACTING = "Sigma_a"
    SIGMA_REPELLING = "Sigma_r"
    SIGMA_CROSSING_PLUS = "Sigma_c+"
    SIGMA_CROSSING_MINUS = "Sigma_c-"


class BasinLabel(Enum):
    B_PLUS = "B+"
    B_MINUS = "B-"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class TrajectorySegment:
    """One smooth or sliding piece of a hybrid trajectory."""

    mode: RegionLabel
    times: np.ndarray
    states: np.ndarray


@dataclass(frozen=True)
class SwitchingEvent:
    time: float
    from_mode: RegionLabel
    to_mode: RegionLabel
    state: np.ndarray


@dataclass(frozen=True)
class HybridTrajectory:
    """Event-segmented solution of the piecewise-smooth system.

    Segments are time-contiguous and state-continuous at events; while
    the mode is a sliding label the first state component is exactly 0.
    """

    segments: list[TrajectorySegment]
    events: list[SwitchingEvent]

    @property
    def final_time(self) -> float:
        return float(self.segments[-1].times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1].copy()

    def concatenated(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """All samples in order: (times, states, mode value per sample).

        Boundary samples are repeated at mode changes, once per segment,
        so the mode column is unambiguous row by row.
        """
        times = np.concatenate([s.times for s in self.segments])
        states = np.vstack([s.states for s in self.segments])
        modes: list[str] = []
        for s in self.segments:
            modes.extend([s.mode.value] * len(s.times))
        return times, states, modes


def _as_field(field) -> PiecewiseField:
    if isinstance(field, PiecewiseField):
        return field
    if hasattr(field, "as_field"):
        return field.as_field()
    raise TypeError(f"expected a PiecewiseField or params object, got {type(field)!r}")


def _sigma_components(field: PiecewiseField, y, t: float) -> tuple[float, float, np.ndarray]:
    """One-sided normal components F1_plus, F1_minus at (0, y, t)."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if y_arr.size != field.dim - 1:
        raise ValueError(
            f"tangential coordinate has size {y_arr.size}, expected {field.dim - 1}"
        )
    f_plus = float(np.asarray(field.plus(0.0, y_arr, t))[0])
    f_minus = float(np.asarray(field.minus(0.0, y_arr, t))[0])
    return f_plus, f_minus, y_arr


def classify_sigma(field, y, t: float = 0.0) -> RegionLabel:
    """Label a manifold point by the signs of the one-sided normal components.

    Weak inequalities; a vanishing one-sided component falls into the
    sliding labels, attracting before repelling.

    Parameters
    ----------
    field : PiecewiseField or params object with ``as_field``
    y : array_like, shape (n-1,)
        Tangential coordinates of the point on {x = 0}.
    t : float
        Evaluation time (ignored by autonomous fields).
    """
    field = _as_field(field)
    f_plus, f_minus, _ = _sigma_components(field, y, t)
    if f_plus <= 0.0 and f_minus >= 0.0:
        return RegionLabel.SIGMA_ATTRACTING
    if f_plus >= 0.0 and f_minus <= 0.0:
        return RegionLabel.SIGMA_REPELLING
    if f_plus > 0.0 and f_minus > 0.0:
        return RegionLabel.SIGMA_CROSSING_PLUS
    return RegionLabel.SIGMA_CROSSING_MINUS


def filippov_lambda(field, y, t: float = 0.0) -> float:
    """Convex weight lam = F1_minus / (F1_minus - F1_plus) on the sliding set.

    Clamped to [0, 1] only against floating-point drift (one ulp); a
    value materially outside indicates the point is not in a sliding
    region and raises ValueError.
    """
    field = _as_field(field)
    f_plus, f_minus, _ = _sigma_components(field, y, t)
    den = f_minus - f_plus
    if abs(den) < 1e-12:
        raise DegenerateSlidingError(
            f"|F1_minus - F1_plus| = {abs(den):.3e} < 1e-12 at y={y!r}, t={t!r}"
        )
    lam = f_minus / den
    ulp = np.spacing(1.0)
    if lam < 0.0:
        if lam >= -ulp:
            return 0.0
        raise ValueError(f"lambda = {lam!r} outside [0, 1]: not a sliding point")
    if lam > 1.0:
        if lam <= 1.0 + ulp:
            return 1.0
        raise ValueError(f"lambda = {lam!r} outside [0, 1]: not a sliding point")
    return lam


def sliding_flow(field, y, t: float = 0.0) -> np.ndarray:
    """Filippov sliding vector lam*F_plus + (1-lam)*F_minus at (0, y, t).

    The first component vanishes to rounding; it is returned as computed
    rather than pinned so the cancellation itself is testable.
    """
    field = _as_field(field)
    lam = filippov_lambda(field, y, t)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    vec_plus = np.asarray(field.plus(0.0, y_arr, t), dtype=float)
    vec_minus = np.asarray(field.minus(0.0, y_arr, t), dtype=float)
    return lam * vec_plus + (1.0 - lam) * vec_minus


# ---------------------------------------------------------------------------
# Hybrid integration
# ---------------------------------------------------------------------------

# Restart offsets: a crossing restart advances along the new field by
# _RESTART_DT; a grazing or tangency restart displaces x into the region
# by _GRAZE_NUDGE.  Both are far below every stated trajectory tolerance.
_RESTART_DT = 1e-10
_GRAZE_NUDGE = 1e-11


def _smooth_rhs(field: PiecewiseField, side: str) -> Callable:
    one_sided = field.plus if side == "+" else field.minus

    def rhs(t, s):
        return np.asarray(one_sided(s[0], s[1:], t), dtype=float)

    return rhs


def _sliding_rhs_and_events(field: PiecewiseField):
    """Reduced sliding ODE (on y, or a dummy scalar when n = 1) plus
    lambda-boundary exit events."""
    n = field.dim

    def lam_of(t, s):
        y = s if n > 1 else np.empty(0)
        f_plus, f_minus, _ = _sigma_components(field, y, t)
        den = f_minus - f_plus
        if abs(den) < 1e-300:
            return 0.5
        return f_minus / den

    def rhs(t, s):
        # clamp the weight: RK stages may probe slightly past a tangency
        y = s if n > 1 else np.empty(0)
        lam = min(1.0, max(0.0, lam_of(t, s)))
        if n == 1:
            return np.zeros(1)
        vec_plus = np.asarray(field.plus(0.0, y, t), dtype=float)
        vec_minus = np.asarray(field.minus(0.0, y, t), dtype=float)
        return (lam * vec_plus + (1.0 - lam) * vec_minus)[1:]

    def exit_plus(t, s):
        return lam_of(t, s) - 1.0

    def exit_minus(t, s):
        return lam_of(t, s)

    exit_plus.terminal = True
    exit_plus.direction = 1.0
    exit_minus.terminal = True
    exit_minus.direction = -1.0
    return rhs, (exit_plus, exit_minus)


def _full_state(x: float, y: np.ndarray) -> np.ndarray:
    return np.concatenate(([x], y))


def integrate_filippov(
    field,
    x0,
    t0: float,
    tf: float,
    tol: float = 1e-9,
    *,
    exit_side: str | None = None,
    graze_tol: float = 1e-9,
    max_step: float = 0.1,
    max_events: int = 10000,
) -> HybridTrajectory:
    """Integrate the piecewise-smooth system with event handling.

    Adaptive Runge-Kutta in the smooth regions; manifold hits are located
    by bracketed root finding on the dense output.  A hit enters sliding
    only when the normal components change sign and the hit point
    classifies as attracting; grazing hits (incoming normal component
    within ``graze_tol`` of zero) continue in the incoming region.  While
    sliding, the reduced tangential ODE is integrated with the convex
    weight pinning x = 0, and sliding ends when the weight reaches 0 or 1.

    Repelling sliding is only entered from an initial condition placed
    exactly on the repelling set.  Forward continuations off that set are
    non-unique; pass ``exit_side`` '+' or '-' to leave immediately into
    the chosen region, or leave it None to follow the sliding flow until
    a tangency.

    Parameters
    ----------
    field : PiecewiseField or params object
    x0 : array_like, shape (n,)
    t0, tf : float
        Time span, tf > t0.
    tol : float
        Relative integration tolerance (absolute tolerance is tol*1e-3).
    exit_side : {'+', '-', None}
        Departure side for a start exactly on the repelling sliding set.
    graze_tol : float
        Normal-component magnitude below which a hit counts as grazing.
    max_step : float
        Step-size cap; keeps event brackets tight for oscillatory forcing.
    max_events : int
        Hard cap on mode switches before giving up.

    Returns
    -------
    HybridTrajectory
    """
    field = _as_field(field)
    if not tf > t0:
        raise ValueError(f"tf must exceed t0, got t0={t0!r}, tf={tf!r}")
    state = np.asarray(x0, dtype=float).copy()
    if state.shape != (field.dim,):
        raise ValueError(f"x0 shape {state.shape} does not match dim {field.dim}")
    if exit_side not in (None, "+", "-"):
        raise ValueError(f"exit_side must be '+', '-', or None, got {exit_side!r}")

    t = float(t0)
    segments: list[TrajectorySegment] = []
    events: list[SwitchingEvent] = []
    rtol = tol
    atol = tol * 1e-3

    # initial mode
    if state[0] > 0.0:
        mode = RegionLabel.S_PLUS
    elif state[0] < 0.0:
        mode = RegionLabel.S_MINUS
    else:
        label = classify_sigma(field, state[1:], t)
        if label is RegionLabel.SIGMA_CROSSING_PLUS:
            mode = RegionLabel.S_PLUS
        elif label is RegionLabel.SIGMA_CROSSING_MINUS:
            mode = RegionLabel.S_MINUS
        elif label is RegionLabel.SIGMA_REPELLING and exit_side is not None:
            mode = RegionLabel.S_PLUS if exit_side == "+" else RegionLabel.S_MINUS
        else:
            mode = label

    stall_count = 0
    last_event_t = -np.inf

    while t < tf - 1e-13 * max(1.0, abs(tf)):
        if len(events) >= max_events:
            raise EventResolutionError("event budget exhausted", t, state)

        if mode in (RegionLabel.S_PLUS, RegionLabel.S_MINUS):
            side = "+" if mode is RegionLabel.S_PLUS else "-"
            rhs = _smooth_rhs(field, side)

            def hit_sigma(tt, ss):
                return ss[0]

            hit_sigma.terminal = True
            hit_sigma.direction = -1.0 if side == "+" else 1.0
            sol = solve_ivp(
                rhs,
                (t, tf),
                state,
                method="RK45",
                rtol=rtol,
                atol=atol,
                dense_output=False,
                events=(hit_sigma,),
                max_step=max_step,
            )
            if not sol.success:
                raise EventResolutionError(f"integrator failure: {sol.message}", t, state)
            seg_states = sol.y.T.copy()
            segments.append(TrajectorySegment(mode, sol.t.copy(), seg_states))
            if sol.status != 1:
                break  # reached tf
            t_hit = float(sol.t_events[0][0])
            hit = sol.y_events[0][0].copy()
            hit[0] = 0.0
            y_hit = hit[1:]
            f_in = float(np.asarray(
                (field.plus if side == "+" else field.minus)(0.0, y_hit, t_hit)
            )[0])
            label = classify_sigma(field, y_hit, t_hit)
            t_next = t_hit
            if abs(f_in) < graze_tol:
                # tangency within tolerance: continue in the incoming region
                new_mode = mode
                state = hit.copy()
                state[0] = _GRAZE_NUDGE if side == "+" else -_GRAZE_NUDGE
            elif label is RegionLabel.SIGMA_ATTRACTING:
                new_mode = RegionLabel.SIGMA_ATTRACTING
                state = hit.copy()
            else:
                # transversal crossing to the other region
                new_mode = RegionLabel.S_MINUS if side == "+" else RegionLabel.S_PLUS
                vel = np.asarray(
                    (field.minus if new_mode is RegionLabel.S_MINUS else field.plus)(
                        0.0, y_hit, t_hit
                    ),
                    dtype=float,
                )
                state = hit + _RESTART_DT * vel
                t_next = t_hit + _RESTART_DT
            events.append(SwitchingEvent(t_hit, mode, new_mode, hit))
            if t_hit - last_event_t < 1e-12 * max(1.0, abs(t_hit)):
                stall_count += 1
                if stall_count >= 3:
                    raise EventResolutionError("event location stalled", t_hit, hit)
            else:
                stall_count = 0
            last_event_t = t_hit
            t = t_next
            mode = new_mode
        else:
            # sliding mode (attracting, or repelling from an on-set start)
            rhs, lam_events = _sliding_rhs_and_events(field)
            y_state = state[1:] if field.dim > 1 else np.zeros(1)
            sol = solve_ivp(
                rhs,
                (t, tf),
                y_state,
                method="RK45",
                rtol=rtol,
                atol=atol,
                events=lam_events,
                max_step=max_step,
            )
            if not sol.success:
                raise EventResolutionError(f"integrator failure: {sol.message}", t, state)
            m = len(sol.t)
            seg_states = np.zeros((m, field.dim))
            if field.dim > 1:
                seg_states[:, 1:] = sol.y.T
            segments.append(TrajectorySegment(mode, sol.t.copy(), seg_states))
            if sol.status != 1:
                break
            hit_plus = len(sol.t_events[0]) > 0
            t_hit = float((sol.t_events[0] if hit_plus else sol.t_events[1])[0])
            y_hit = (sol.y_events[0] if hit_plus else sol.y_events[1])[0]
            y_hit = y_hit.copy() if field.dim > 1 else np.empty(0)
            hit = _full_state(0.0, y_hit)
            # confirm genuine departure: advance a small step along the
            # candidate one-sided field and test its normal component
            cand_side = "+" if hit_plus else "-"
            one_sided = field.plus if hit_plus else field.minus
            vel = np.asarray(one_sided(0.0, y_hit, t_hit), dtype=float)
            probe = hit + 1e-6 * vel
            f_probe = float(np.asarray(one_sided(probe[0], probe[1:], t_hit + 1e-6))[0])
            departs = f_probe > 0.0 if hit_plus else f_probe < 0.0
            if departs:
                new_mode = RegionLabel.S_PLUS if hit_plus else RegionLabel.S_MINUS
                state = hit.copy()
                state[0] = _GRAZE_NUDGE if hit_plus else -_GRAZE_NUDGE
            else:
                new_mode = mode  # weight grazed its boundary; keep sliding
                state = hit.copy()
            events.append(SwitchingEvent(t_hit, mode, new_mode, hit))
            if t_hit - last_event_t < 1e-12 * max(1.0, abs(t_hit)):
                stall_count += 1
                if stall_count >= 3:
                    raise EventResolutionError("event location stalled", t_hit, hit)
            else:
                stall_count = 0
            last_event_t = t_hit
            t = t_hit
            mode = new_mode

    return HybridTrajectory(segments=segments, events=events)


# ---------------------------------------------------------------------------
# Planar family: equilibria, pseudoequilibria, cycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumClass:
    """Linearization class of a one-sided equilibrium."""

    label: str
    trace: float
    det: float
    discriminant: float
    degenerate: bool


def _classify_matrix(J: np.ndarray) -> EquilibriumClass:
    tr = float(np.trace(J))
    det = float(np.linalg.det(J))
    disc = tr * tr - 4.0 * det
    degenerate = False
    if det < 0.0:
        label = "saddle"
    elif det == 0.0:
        degenerate = True
        label = "unstable_node" if tr > 0.0 else "stable_node"
    elif tr == 0.0:
        label = "center_boundary"
        degenerate = True
    else:
        if disc < 0.0:
            label = "stable_spiral" if tr < 0.0 else "unstable_spiral"
        else:
            label = "stable_node" if tr < 0.0 else "unstable_node"
            degenerate = disc == 0.0
    return EquilibriumClass(label, tr, det, disc, degenerate)


def equilibrium_class_2d(
    params: PiecewiseLinearParams2D,
) -> tuple[EquilibriumClass, EquilibriumClass]:
    """Classify the one-sided equilibria of the planar family.

    Returns (plus-side, minus-side) records.  Boundaries a = bc (zero
    determinant), a = -1 (zero trace), and bc = -(a-1)^2/4 (repeated
    eigenvalues) carry the degenerate flag; the zero-trace spiral
    boundary is labelled center_boundary.
    """
    return (
        _classify_matrix(params.jacobian_plus()),
        _classify_matrix(params.jacobian_minus()),
    )


def pseudoequilibria_2d(params: PiecewiseLinearParams2D) -> list[np.ndarray]:
    """Zeros of the sliding flow's tangential component with lam in (0, 1).

    The numerator of the tangential sliding component,
    F1_minus*G_plus - F1_plus*G_minus on {x = 0}, expands to a quadratic
    in y; real roots are kept when the convex weight there is interior.
    """
    a, b, c = params.a, params.b, params.c
    p, q, r = params.p, params.q, params.r
    eta = params.eta
    # f_minus(0,y) = p + q(y+eta), g_plus(0,y) = -c + y - eta
    # f_plus(0,y)  = -a + b(y-eta), g_minus(0,y) = r + y + eta
    A = q - b
    B = p - q * c - b * r + a
    C = -(p + q * eta) * (eta + c) + (b * eta + a) * (eta + r)
    roots = np.roots([A, B, C]) if A != 0.0 else (np.array([-C / B]) if B != 0.0 else np.array([]))
    out: list[np.ndarray] = []
    for root in roots:
        if abs(root.imag) > 1e-9:
            continue
        y_s = float(root.real)
        f_plus = params.f_plus(0.0, y_s)
        f_minus = params.f_minus(0.0, y_s)
        den = f_minus - f_plus
        if abs(den) < 1e-12:
            continue
        lam = f_minus / den
        if 0.0 < lam < 1.0:
            out.append(np.array([0.0, y_s]))
    out.sort(key=lambda v: v[1])
    return out


def fold_points_2d(params: PiecewiseLinearParams2D) -> tuple[float | None, float | None]:
    """Tangency y-values on {x = 0}: zero of f_plus, zero of f_minus.

    None when the corresponding one-sided normal component is constant
    in y (b = 0 or q = 0).
    """
    y_plus = params.eta + params.a / params.b if params.b != 0.0 else None
    y_minus = -params.eta - params.p / params.q if params.q != 0.0 else None
    return y_plus, y_minus


@dataclass(frozen=True)
class CrossingCycleData:
    """Crossing limit cycle: manifold crossings, period, return residual."""

    y_upper: float
    y_lower: float
    period: float
    residual: float


@dataclass(frozen=True)
class SlidingCycleData:
    """Sliding limit cycle: fold point, sliding exit point, arc time."""

    side: str
    y_fold: float
    y_exit: float
    arc_time: float

    @property
    def extent(self) -> tuple[float, float]:
        lo, hi = sorted((self.y_fold, self.y_exit))
        return lo, hi


@dataclass(frozen=True)
class CycleRecord:
    eta: float
    crossing: CrossingCycleData | None
    sliding: tuple[SlidingCycleData, ...]
    seed_note: str

    @property
    def cycle_count(self) -> int:
        return (1 if self.crossing is not None else 0) + len(self.sliding)


def _one_sided_rhs(params: PiecewiseLinearParams2D, side: str, sign: float = 1.0):
    if side == "+":
        def rhs(t, s):
            return sign * np.array(
                [params.f_plus(s[0], s[1]), params.g_plus(s[0], s[1])]
            )
    else:
        def rhs(t, s):
            return sign * np.array(
                [params.f_minus(s[0], s[1]), params.g_minus(s[0], s[1])]
            )
    return rhs


def _arc_to_sigma(
    params: PiecewiseLinearParams2D,
    side: str,
    start: np.ndarray,
    *,
    backward: bool = False,
    t_cap: float = 60.0,
    capture_radius: float = 0.1,
) -> tuple[float, float] | None:
    """Integrate one smooth arc until it returns to {x = 0}.

    Returns (y at the hit, arc duration) or None on focus capture or
    timeout.  ``start`` must lie strictly inside the region.
    """
    rhs = _one_sided_rhs(params, side, -1.0 if backward else 1.0)
    focus = params.x_plus if side == "+" else params.x_minus

    def hit(t, s):
        return s[0]

    hit.terminal = True
    hit.direction = -1.0 if side == "+" else 1.0

    def captured(t, s):
        return math.hypot(s[0] - focus[0], s[1] - focus[1]) - capture_radius

    captured.terminal = True
    captured.direction = -1.0

    sol = solve_ivp(
        rhs,
        (0.0, t_cap),
        np.asarray(start, dtype=float),
        method="RK45",
        rtol=1e-11,
        atol=1e-13,
        events=(hit, captured),
    )
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        return None
    return float(sol.y_events[0][0][1]), float(sol.t_events[0][0])


def _transversal_start(
    params: PiecewiseLinearParams2D, side: str, y0: float, *, backward: bool = False
) -> np.ndarray:
    """Displace (0, y0) strictly into the region along the (possibly
    reversed) one-sided field; falls back to the fold curvature when the
    normal component vanishes."""
    rhs = _one_sided_rhs(params, side, -1.0 if backward else 1.0)
    vel = rhs(0.0, np.array([0.0, y0]))
    if abs(vel[0]) > 1e-9:
        return np.array([0.0, y0]) + 1e-9 * vel
    # fold point: quadratic departure x ~ 0.5*curv*dt^2 (same sign both
    # time directions)
    if side == "+":
        curv = params.a * params.f_plus(0.0, y0) + params.b * params.g_plus(0.0, y0)
    else:
        curv = params.p * params.f_minus(0.0, y0) + params.q * params.g_minus(0.0, y0)
    dt = 1e-5
    return np.array([0.5 * curv * dt * dt, y0 + vel[1] * dt])


def _sliding_segment_ok(
    params: PiecewiseLinearParams2D, y_from: float, y_to: float
) -> bool:
    """True when the sliding flow carries y_from to y_to monotonically
    through interior sliding points."""
    direction = math.copysign(1.0, y_to - y_from)
    for y in np.linspace(y_from, y_to, 24)[1:-1]:
        f_plus = params.f_plus(0.0, y)
        f_minus = params.f_minus(0.0, y)
        den = f_minus - f_plus
        if abs(den) < 1e-12:
            return False
        lam = f_minus / den
        if not 0.0 < lam < 1.0:
            return False
        g_slide = lam * params.g_plus(0.0, y) + (1.0 - lam) * params.g_minus(0.0, y)
        if g_slide * direction <= 0.0:
            return False
    return True


def _interior_sliding_point(params: PiecewiseLinearParams2D, y: float) -> bool:
    f_plus = params.f_plus(0.0, y)
    f_minus = params.f_minus(0.0, y)
    den = f_minus - f_plus
    if abs(den) < 1e-12:
        return False
    lam = f_minus / den
    return 0.0 < lam < 1.0


def _sliding_cycle_probe(
    params: PiecewiseLinearParams2D, side: str
) -> SlidingCycleData | None:
    """Probe one fold point for a sliding cycle.

    Two geometries close a loop through a fold: a forward arc from the
    fold landing transversally on an attracting segment that slides back
    up to the fold, and a backward arc whose manifold hit is the unique
    departure point of a repelling segment sliding down from the fold.
    Both arcs graze the fold, so candidates exist only at visible folds.
    """
    y_fold_plus, y_fold_minus = fold_points_2d(params)
    y_fold = y_fold_plus if side == "+" else y_fold_minus
    if y_fold is None:
        return None
    if side == "+":
        curv = params.b * params.g_plus(0.0, y_fold)
        visible = curv > 0.0
    else:
        curv = params.q * params.g_minus(0.0, y_fold)
        visible = curv < 0.0
    if not visible:
        return None
    fld = params.as_field()
    for backward in (False, True):
        start = _transversal_start(params, side, y_fold, backward=backward)
        res = _arc_to_sigma(params, side, start, backward=backward)
        if res is None:
            continue
        y_exit, arc_time = res
        if abs(y_exit - y_fold) < 1e-7:
            continue
        if not _interior_sliding_point(params, y_exit):
            continue
        label = classify_sigma(fld, y_exit)
        if backward:
            # forward cycle: depart the repelling segment at y_exit, arc
            # to the fold, slide back down to y_exit
            if label is not RegionLabel.SIGMA_REPELLING:
                continue
            if not _sliding_segment_ok(params, y_fold, y_exit):
                continue
        else:
            # forward cycle: arc from the fold, land on the attracting
            # segment, slide back up to the fold
            if label is not RegionLabel.SIGMA_ATTRACTING:
                continue
            if not _sliding_segment_ok(params, y_exit, y_fold):
                continue
        return SlidingCycleData(side, float(y_fold), float(y_exit), arc_time)
    return None


def _crossing_cycle(
    params: PiecewiseLinearParams2D, *, max_iter: int = 80, fp_tol: float = 1e-12
) -> CrossingCycleData | None:
    """Fixed-point iteration of the manifold-to-manifold return map.

    Seeded at the outermost fold point; each composed leg must land as a
    genuine transversal crossing.  Non-convergence, focus capture, or a
    sliding landing all report no cycle.
    """
    y_fold_plus, y_fold_minus = fold_points_2d(params)
    folds = [y for y in (y_fold_plus, y_fold_minus) if y is not None]
    if not folds:
        return None
    y_seed = max(folds, key=abs)
    if len(folds) == 2 and abs(abs(folds[0]) - abs(folds[1])) < 1e-12:
        y_seed = max(folds)

    def leg(side: str, y0: float) -> tuple[float, float] | None:
        start = _transversal_start(params, side, y0)
        if (start[0] > 0) != (side == "+"):
            return None
        return _arc_to_sigma(params, side, start)

    y_up = y_seed
    period = 0.0
    converged = False
    for _ in range(max_iter):
        if params.f_minus(0.0, y_up) > 1e-12:
            return None
        down = leg("-", y_up)
        if down is None:
            return None
        y_low, t_minus = down
        if params.f_plus(0.0, y_low) <= 1e-12:
            return None  # landed where the plus field does not cross
        up = leg("+", y_low)
        if up is None:
            return None
        y_next, t_plus = up
        if params.f_minus(0.0, y_next) >= -1e-12:
            return None
        period = t_minus + t_plus
        if abs(y_next - y_up) < fp_tol:
            y_up = y_next
            converged = True
            break
        y_up = y_next
    if not converged:
        return None
    down = leg("-", y_up)
    if down is None:
        return None
    y_low, t_minus = down
    up = leg("+", y_low)
    if up is None:
        return None
    y_back, t_plus = up
    return CrossingCycleData(
        y_upper=float(y_up),
        y_lower=float(y_low),
        period=float(t_minus + t_plus),
        residual=abs(y_back - y_up),
    )


def cycle_data_2d(params: PiecewiseLinearParams2D, eta_values) -> list[CycleRecord]:
    """Crossing and sliding limit cycles over a grid of offsets eta.

    The return map is seeded from the outermost fold point (a choice the
    source material leaves open; recorded in ``seed_note``), and sliding
    cycles are found by fold-point arc probes.  Absence of a cycle at a
    given eta is a legitimate outcome, not an error.
    """
    records: list[CycleRecord] = []
    for eta in np.atleast_1d(np.asarray(eta_values, dtype=float)):
        p_eta = replace(params, eta=float(eta))
        crossing = _crossing_cycle(p_eta)
        sliding = tuple(
            cyc
            for side in ("+", "-")
            if (cyc := _sliding_cycle_probe(p_eta, side)) is not None
        )
        records.append(
            CycleRecord(
                eta=float(eta),
                crossing=crossing,
                sliding=sliding,
                seed_note="return map seeded at outermost fold point",
            )
        )
    return records


# ---------------------------------------------------------------------------
# Forced 1-D family: nullclines, one-sided cycles, basins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullclineInfo:
    n_plus: float | np.ndarray
    n_minus: float | np.ndarray
    plus_intersects_sigma: bool
    minus_intersects_sigma: bool


def nullclines_1d(params: NonAutonomousParams1D, t) -> NullclineInfo:
    """Instantaneous nullclines of the forced 1-D family.

    n_plus(t) = 1 + (A_plus/r_plus) cos(2 pi t) and the analogous
    delayed, offset expression for n_minus.  The intersection flags are
    parameter-level facts: n_plus meets {x = 0} iff A_plus > r_plus, and
    n_minus iff A_minus > r_minus * |a|.  Positivity of the decay rates
    is enforced when the params object is constructed.
    """
    t = np.asarray(t, dtype=float)
    n_plus = 1.0 + (params.A_plus / params.r_plus) * np.cos(TWO_PI * t)
    n_minus = params.a + (params.A_minus / params.r_minus) * np.cos(
        TWO_PI * (t - params.p)
    )
    return NullclineInfo(
        n_plus=n_plus if n_plus.ndim else float(n_plus),
        n_minus=n_minus if n_minus.ndim else float(n_minus),
        plus_intersects_sigma=params.A_plus > params.r_plus,
        minus_intersects_sigma=params.A_minus > params.r_minus * abs(params.a),
    )


@dataclass(frozen=True)
class PeriodicSolution:
    """Closed-form one-sided periodic solution x(t) = offset + forced response."""

    offset: float
    amplitude: float
    rate: float
    delay: float

    def __call__(self, t):
        theta = TWO_PI * (np.asarray(t, dtype=float) - self.delay)
        den = self.rate**2 + TWO_PI**2
        return self.offset + self.amplitude * (
            self.rate * np.cos(theta) + TWO_PI * np.sin(theta)
        ) / den

    def derivative(self, t):
        theta = TWO_PI * (np.asarray(t, dtype=float) - self.delay)
        den = self.rate**2 + TWO_PI**2
        return (
            self.amplitude
            * TWO_PI
            * (TWO_PI * np.cos(theta) - self.rate * np.sin(theta))
            / den
        )


def stable_cycles_1d(
    params: NonAutonomousParams1D,
) -> tuple[PeriodicSolution, PeriodicSolution]:
    """The two one-sided attracting periodic solutions h_plus, h_minus.

    Valid only while each stays inside its own region (the forcing
    amplitude conditions bundled in ``limit_cycle_condition``); otherwise
    the formulas no longer describe limit cycles of the switched system.
    """
    if not params.limit_cycle_condition:
        raise NotALimitCycleError(
            "forcing amplitude drives a one-sided periodic solution across the "
            "switching manifold; h_plus/h_minus are not limit cycles here"
        )
    h_plus = PeriodicSolution(
        offset=1.0, amplitude=params.A_plus, rate=params.r_plus, delay=0.0
    )
    h_minus = PeriodicSolution(
        offset=params.a, amplitude=params.A_minus, rate=params.r_minus, delay=params.p
    )
    return h_plus, h_minus


def h_minus_peak_time(params: NonAutonomousParams1D) -> float:
    """Time (mod 1) at which h_minus attains its maximum.

    t_max = p + atan(2 pi / r_minus) / (2 pi), the phase where the forced
    response turns over.
    """
    return params.p + math.atan(TWO_PI / params.r_minus) / TWO_PI


def basin_membership(
    params: NonAutonomousParams1D,
    t0: float,
    x0: float,
    horizon: float = 50.0,
    tol: float = 1e-6,
) -> BasinLabel:
    """Attractor reached by the Filippov flow from (t0, x0).

    Integrates for ``horizon`` forcing periods and tests the final period
    pointwise against the two one-sided cycles.  Trajectories settling on
    neither within the horizon are reported Undecided, never guessed.
    """
    h_plus, h_minus = stable_cycles_1d(params)
    traj = integrate_filippov(
        params.as_field(), np.array([float(x0)]), t0, t0 + horizon, tol=1e-9
    )
    t_tail = t0 + horizon - 1.0
    near_plus = True
    near_minus = True
    n_tail = 0
    for seg in traj.segments:
        mask = seg.times >= t_tail
        if not mask.any():
            continue
        n_tail += int(mask.sum())
        xs = seg.states[mask, 0]
        ts = seg.times[mask]
        if np.any(np.abs(xs - h_plus(ts)) > tol):
            near_plus = False
        if np.any(np.abs(xs - h_minus(ts)) > tol):
            near_minus = False
    if n_tail == 0:
        return BasinLabel.UNDECIDED
    if near_plus and not near_minus:
        return BasinLabel.B_PLUS
    if near_minus and not near_plus:
        return BasinLabel.B_MINUS
    return BasinLabel.UNDECIDED
