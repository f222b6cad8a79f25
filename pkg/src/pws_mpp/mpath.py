"""Most probable transition paths of the mollified switched systems.

Three routes to a minimizer, matched to the structure of each problem:

* ``shoot_heteroclinic_case1``: the planar autonomous family has
  heteroclinic Euler-Lagrange (EL) connections between the stable focus
  and the in-band saddle at the origin; these are found by a two-stage
  shooting method on the EL flow written in band coordinates.
* ``gradient_flow_minimize``: generic relaxation of the discrete action
  by explicit descent along its exact adjoint gradient (an artificial
  time, forward-time centered-space iteration); works for any smooth or
  mollified drift and is the fallback whenever no shooting structure or
  closed form applies.
* ``analytic_mpp_case2``: the forced scalar family admits a closed-form
  minimizer up to its manifold crossing, continued by the deterministic
  flow afterwards, together with an exact lower bound
  (``kramers_lower_bound``) and zero-cost tail bookkeeping
  (``extend_with_tails``).

EL phase space: the band coordinate z = x1/eps replaces the first state
coordinate so the mollified layer has unit width.  With momenta
(phi, psi) conjugate to (z, y),

    eps dz/dt = F1 + phi            field terms evaluated at (eps*z, y)
    dy/dt     = G + psi
    dphi/dt   = -phi dF1/dx1 - <psi, dG/dx1>
    dpsi/dt   = -phi grad_y F1 - (grad_y G)^T psi

where every field derivative is taken with respect to the original
(unscaled) state coordinates.  For autonomous fields this flow conserves

    H = F1 phi + <G, psi> + (phi^2 + |psi|^2) / 2,

the accuracy monitor for every trajectory built here; minimizing paths
lie on H = 0.  The H = 0 slice is a quadratic in phi with two roots
phi = -F1 +/- sqrt(F1^2 - 2 <G, psi> - |psi|^2); the sign of the root
equals the sign of eps dz/dt, so leftward motion into the band lives on
the minus root and rightward motion on the plus root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.optimize import brentq
from scipy.spatial.distance import directed_hausdorff

from .action import DiscretePath, _drift_values, gamma_action_1d
from .fields import (
    Drift,
    NonAutonomousParams1D,
    PiecewiseLinearParams2D,
)
from .filippov import (
    BasinLabel,
    PeriodicSolution,
    basin_membership,
    h_minus_peak_time,
    sliding_flow,
    stable_cycles_1d,
)
from .mollifier import MollifierKernel, _bump_tables, as_drift, lambda_profile


class BranchUnavailableError(ValueError):
    """The H = 0 slice has no real momentum at the requested point."""


class ShootingConvergenceError(RuntimeError):
    """Shooting failed within budget; carries the best residual seen."""

    def __init__(self, message: str, best_residual: float, theta: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual
        self.theta = theta


class TheoremInapplicableError(ValueError):
    """Closed-form minimizer hypotheses fail for these parameters."""


class InvalidExtensionError(ValueError):
    """Finite path endpoints do not lie on the zero-cost tail cycles."""


class GradientFlowDivergenceError(RuntimeError):
    """Action increased on consecutive descent steps; carries the history."""

    def __init__(self, message: str, history: np.ndarray, iterations: int):
        super().__init__(message)
        self.history = history
        self.iterations = iterations


class PathNeverCrossesError(ValueError):
    """A crossing-time computation found no manifold crossing."""


# ---------------------------------------------------------------------------
# EL phase space


@dataclass(frozen=True)
class ELState:
    """Point of the rescaled Euler-Lagrange phase space.

    Parameters
    ----------
    z : float
        Band coordinate x1 / eps.
    y : ndarray, shape (n-1,)
        Remaining state coordinates (unscaled).
    phi : float
        Momentum conjugate to the band coordinate.
    psi : ndarray, shape (n-1,)
        Momenta conjugate to y.
    """

    z: float
    y: np.ndarray
    phi: float
    psi: np.ndarray

    def __post_init__(self) -> None:
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        if y.shape != psi.shape or y.ndim != 1:
            raise ValueError(
                f"y and psi must be matching 1-D arrays, got {y.shape} and {psi.shape}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        """Dimension of the underlying state space."""
        return 1 + self.y.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.z], self.y, [self.phi], self.psi))

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> ELState:
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % 2 != 0 or vec.size < 4:
            raise ValueError(f"EL vector must have even length >= 4, got {vec.shape}")
        n = vec.size // 2
        return cls(z=float(vec[0]), y=vec[1:n], phi=float(vec[n]), psi=vec[n + 1 :])


def _el_rhs_vec(drift: Drift, eps: float, t: float, vec: np.ndarray) -> np.ndarray:
    n = vec.size // 2
    xy = np.concatenate(([eps * vec[0]], vec[1:n]))
    F = np.asarray(drift.value(xy, t), dtype=float)
    J = np.asarray(drift.jacobian(xy, t), dtype=float)
    pi = vec[n:]
    out = np.empty_like(vec)
    out[0] = (F[0] + vec[n]) / eps
    out[1:n] = F[1:] + vec[n + 1 :]
    out[n:] = -J.T @ pi
    return out


def el_rhs(field, kernel: MollifierKernel, state: ELState, t: float = 0.0) -> ELState:
    """Right-hand side of the rescaled Euler-Lagrange flow.

    Field partial derivatives come from the drift object: closed forms
    for the planar linear family with the compact bump, central
    differences at step 1e-6 * max(1, |arg|) otherwise.

    Parameters
    ----------
    field : parameter record, PiecewiseField, or Drift
        Passed through ``as_drift``; a Drift is used as-is.
    kernel : MollifierKernel
        Provides the band width eps (and the smoothing when ``field``
        is not already a Drift).
    state : ELState
    t : float

    Returns
    -------
    ELState
        Time derivative, in the same coordinates.
    """
    drift = as_drift(field, kernel)
    dv = _el_rhs_vec(drift, kernel.eps, t, state.as_vector())
    return ELState.from_vector(dv)


def hamiltonian(field, kernel: MollifierKernel, state: ELState, t: float = 0.0) -> float:
    """H = F1 phi + <G, psi> + (phi^2 + |psi|^2) / 2 at the given point."""
    drift = as_drift(field, kernel)
    xy = np.concatenate(([kernel.eps * state.z], state.y))
    F = np.asarray(drift.value(xy, t), dtype=float)
    return float(
        F[0] * state.phi
        + F[1:] @ state.psi
        + 0.5 * (state.phi**2 + state.psi @ state.psi)
    )


def phi_branch(
    field,
    kernel: MollifierKernel,
    z: float,
    y,
    psi,
    t: float = 0.0,
    sign: float = 1.0,
) -> float:
    """Normal momentum solving H = 0 at (z, y) for given tangential psi.

    Returns phi = -F1 + sign * sqrt(F1^2 - 2 <G, psi> - |psi|^2).  The
    default plus root is the branch with eps dz/dt >= 0 and vanishes at
    psi = 0 whenever F1 >= 0; pass sign = -1 for leftward motion into
    the band (the root a descending connection lives on).

    Raises
    ------
    BranchUnavailableError
        If the discriminant is negative, i.e. the H = 0 slice has no
        real normal momentum for this tangential momentum.
    """
    drift = as_drift(field, kernel)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    xy = np.concatenate(([kernel.eps * z], y))
    F = np.asarray(drift.value(xy, t), dtype=float)
    disc = F[0] ** 2 - 2.0 * (F[1:] @ psi) - psi @ psi
    if disc < 0.0:
        raise BranchUnavailableError(
            f"no real H = 0 momentum at z={z!r}: discriminant {disc:.3e} < 0"
        )
    return float(-F[0] + math.copysign(1.0, sign) * math.sqrt(disc))


def _hamiltonian_values(
    drift: Drift, eps: float, times: np.ndarray, states: np.ndarray
) -> np.ndarray:
    """H sample-by-sample on EL states of shape (k, 2n)."""
    n = states.shape[1] // 2
    xy = states[:, :n].copy()
    xy[:, 0] *= eps
    F = _drift_values(drift, xy, np.asarray(times, dtype=float))
    pi = states[:, n:]
    return np.einsum("ij,ij->i", F, pi) + 0.5 * np.einsum("ij,ij->i", pi, pi)


# ---------------------------------------------------------------------------
# Fast scalar EL right-hand side for the symmetric planar family


_HERMITE_N = 4096


@lru_cache(maxsize=1)
def _lambda_hermite_table() -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Uniform nodes, Lambda values, and exact zeta slopes on [-1, 1]."""
    norm = _bump_tables()[0]
    nodes = np.linspace(-1.0, 1.0, _HERMITE_N + 1)
    unit = MollifierKernel("compact_bump", 1.0)
    lam = np.asarray(lambda_profile(unit, nodes), dtype=float)
    zeta = np.zeros_like(nodes)
    inner = (np.abs(nodes) < 1.0)
    zeta[inner] = norm * np.exp(1.0 / (nodes[inner] ** 2 - 1.0))
    return nodes, lam, zeta, norm


def _fast_el_rhs_case1(params: PiecewiseLinearParams2D, eps: float) -> Callable:
    """Scalar-arithmetic EL right-hand side for the symmetric family.

    Avoids array allocation per call: the mollified field and its
    Jacobian are evaluated with a cubic-Hermite table for Lambda (exact
    zeta slopes keep the interpolation error near 1e-13) and the
    constant one-sided jumps of the symmetric field.  Used by the
    shooting solver, where the right-hand side dominates runtime.
    """
    if not params.symmetric:
        raise ValueError("fast EL right-hand side requires the symmetric family")
    _, lam_tab, zeta_tab, norm = _lambda_hermite_table()
    a, b, c, eta = params.a, params.b, params.c, params.eta
    jump_f = -2.0 * (a + b * eta)
    jump_g = -2.0 * (c + eta)
    h = 2.0 / _HERMITE_N
    n_max = _HERMITE_N - 1
    exp = math.exp

    def rhs(t: float, v) -> list[float]:
        z = v[0]
        y = v[1]
        ph = v[2]
        ps = v[3]
        x = eps * z
        fm = a * (x + 1.0) + b * (y + eta)
        gm = c * (x + 1.0) + (y + eta)
        if z <= -1.0:
            lam = 0.0
            zet = 0.0
        elif z >= 1.0:
            lam = 1.0
            zet = 0.0
        else:
            u = (z + 1.0) / h
            k = int(u)
            if k > n_max:
                k = n_max
            s = u - k
            s2 = s * s
            s3 = s2 * s
            lam = (
                (2.0 * s3 - 3.0 * s2 + 1.0) * lam_tab[k]
                + (s3 - 2.0 * s2 + s) * h * zeta_tab[k]
                + (3.0 * s2 - 2.0 * s3) * lam_tab[k + 1]
                + (s3 - s2) * h * zeta_tab[k + 1]
            )
            zet = norm * exp(1.0 / (z * z - 1.0))
        f = fm + lam * jump_f
        g = gm + lam * jump_g
        zeta_eps = zet / eps
        fx = a + zeta_eps * jump_f
        gx = c + zeta_eps * jump_g
        return [
            (f + ph) / eps,
            g + ps,
            -fx * ph - gx * ps,
            -b * ph - ps,
        ]

    return rhs


def _el_rhs_case1_vec(eps: float, drift: Drift) -> Callable:
    """Vectorized EL phase flow for the stage-2 collocation solve.

    Initial-value integration of the descending arc is hopeless in
    either direction: the adjoint equations carry the band rate
    zeta(0) |jump| / eps, so trial orbits amplify momentum errors by
    exp(rate * t) and overflow long before the saddle.  Collocation
    never propagates that dichotomy; it only needs the smooth
    right-hand side, evaluated here for whole column batches of
    (z, y, phi, psi) states in two drift calls, the shape
    ``solve_bvp`` wants.
    """

    def rhs4(u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float).T).T
        xy = np.column_stack((eps * u[0], u[1]))
        zeros = np.zeros(xy.shape[0])
        F = _drift_values(drift, xy, zeros)
        J = np.asarray(drift.jacobian(xy, zeros), dtype=float)
        ph, ps = u[2], u[3]
        return np.vstack((
            (F[:, 0] + ph) / eps,
            F[:, 1] + ps,
            -J[:, 0, 0] * ph - J[:, 1, 0] * ps,
            -J[:, 0, 1] * ph - J[:, 1, 1] * ps,
        ))

    return rhs4


# ---------------------------------------------------------------------------
# Two-stage shooting for the planar heteroclinics


class ShootingStage(Enum):
    UPHILL_TO_SIGMA = "UphillToSigma"
    SIGMA_TO_SADDLE = "SigmaToSaddle"


@dataclass(frozen=True)
class ShootingControls:
    """Budgets and tolerances of the two-stage shooting solver.

    ``radius`` is the start distance from the fixed point on its
    unstable eigenplane; ``theta_samples`` the coarse scan resolution of
    that plane's angle; ``arrival_radius`` how far from the saddle the
    stage-2 collocation orbit is required to stop (along the slow stable
    direction); ``endpoint_tol`` the accepted terminal distance from the
    saddle; ``match_tol`` the accepted position-and-momentum continuity
    defect at the section.
    """

    radius: float = 1e-6
    theta_samples: int = 48
    t1_cap: float = 80.0
    t2_min: float = 0.1
    t2_max: float = 100.0
    arrival_radius: float = 5e-7
    endpoint_tol: float = 1e-6
    match_tol: float = 1e-8
    rtol: float = 1e-11
    atol: float = 1e-13
    bvp_tol: float = 1e-8
    bvp_max_nodes: int = 40000
    escape_radius: float | None = None


@dataclass(frozen=True)
class ELTrajectory:
    """Sampled EL orbit of one shooting stage.

    ``times`` are relative to the section hit (stage 1 ends at 0,
    stage 2 starts at 0); ``states`` columns are (z, y, phi, psi).
    """

    stage: ShootingStage
    times: np.ndarray
    states: np.ndarray
    eps: float
    h_max: float

    def xy(self) -> np.ndarray:
        """Projection to the original state plane, shape (k, 2)."""
        out = self.states[:, :2].copy()
        out[:, 0] *= self.eps
        return out

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class HeteroclinicResult:
    """Matched two-stage heteroclinic connection.

    ``section_state`` is the stage-2 initial condition on the band edge
    z = 1; ``matching_residual`` the phase-space distance from the
    stage-1 hit to that state; ``endpoint_error`` the distance of the
    stage-2 terminal point from the origin saddle.
    """

    eps: float
    theta: float
    stage1: ELTrajectory
    stage2: ELTrajectory
    section_state: np.ndarray
    matching_residual: float
    endpoint_error: float
    h_max: float

    def full_times(self) -> np.ndarray:
        return np.concatenate((self.stage1.times, self.stage2.times[1:]))

    def full_states(self) -> np.ndarray:
        return np.vstack((self.stage1.states, self.stage2.states[1:]))

    def xy_path(self) -> tuple[np.ndarray, np.ndarray]:
        """(times, xy) samples of the concatenated connection."""
        xy = np.vstack((self.stage1.xy(), self.stage2.xy()[1:]))
        return self.full_times(), xy


def _unstable_plane(params: PiecewiseLinearParams2D, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real basis of the EL unstable plane at (z+, eta, 0, 0)."""
    J = params.jacobian_plus()
    Jt = J.astype(float).copy()
    Jt[0, 1] /= eps
    Jt[1, 0] *= eps
    B = np.diag([1.0 / eps, 1.0])
    evals, evecs = np.linalg.eig(-J.T)
    idx = np.flatnonzero(evals.real > 0.0)
    if idx.size != 2:
        raise ValueError(
            "EL linearization at the focus has no two-dimensional unstable plane"
        )
    if abs(evals[idx[0]].imag) > 0.0:
        which = idx[0] if evals[idx[0]].imag > 0 else idx[1]
        lam = evals[which]
        w = evecs[:, which]
        vu = np.linalg.solve(Jt - lam * np.eye(2), -(B @ w))
        v = np.concatenate((vu, w))
        e1, e2 = v.real, v.imag
    else:
        basis = []
        for i in idx:
            lam = evals[i].real
            w = evecs[:, i].real
            vu = np.linalg.solve(Jt - lam * np.eye(2), -(B @ w))
            basis.append(np.concatenate((vu, w)))
        e1, e2 = basis
    e1 = e1 / np.linalg.norm(e1)
    e2 = e2 - (e2 @ e1) * e1
    e2 = e2 / np.linalg.norm(e2)
    return e1, e2


def shoot_heteroclinic_case1(
    params: PiecewiseLinearParams2D,
    kernel: MollifierKernel,
    stage: ShootingStage | None = None,
    controls: ShootingControls | None = None,
) -> HeteroclinicResult | ELTrajectory:
    """Heteroclinic EL connection from the focus x+ to the origin saddle.

    Stage 1 leaves the unstable eigenplane of (z+, eta, 0, 0) at
    distance ``controls.radius`` and runs to the band edge z = 1 as a
    plain initial-value solve (no band stiffness outside the band).
    Stage 2 cannot be an initial-value solve in either direction: the
    descent hugs a slow in-band ridge that is transversally a fast
    saddle, so trial orbits leave it at the band's adjoint rate.  It is
    solved as a boundary-value problem instead: collocation on the full
    EL flow over an unknown duration t2, with z(0) = 1 and
    y(0) = y1(theta) at the section, no terminal component along either
    unstable covector of the saddle, and terminal amplitude
    ``arrival_radius`` along the slow stable eigenvector (the one
    carrying momentum, hence the arrival direction of the connection).
    Those arrival conditions put the arc on the saddle's stable
    subspace, where H vanishes, so H = 0 holds along it without being
    imposed.  For fixed theta the collocation determines the momentum
    (phi, psi)(0) the stable manifold requires; since both that pair
    and the stage-1 hit lie on the same leftward branch of the H = 0
    conic, matching the single component psi suffices, and the
    eigenplane angle is the scalar root of
    psi_required(theta) - psi_stage1(theta), bracketed on the scan grid
    and refined by Brent.  The reported matching residual is the full
    phase-space gap at the section between the stage-1 hit and the
    stage-2 initial state.

    Parameters
    ----------
    params : PiecewiseLinearParams2D
        Must be symmetric, so the saddle of the mollified field sits at
        the origin.
    kernel : MollifierKernel
        Band width eps must satisfy eps < 1, keeping x+ outside the
        band.
    stage : ShootingStage, optional
        When given, return only that stage's trajectory; the full
        matching problem is solved either way, because stage 1 alone
        does not determine the eigenplane angle.
    controls : ShootingControls, optional

    Returns
    -------
    HeteroclinicResult, or ELTrajectory when ``stage`` is given.

    Raises
    ------
    ShootingConvergenceError
        If the scan finds no sign change, collocation fails, the
        arrival time leaves [t2_min, t2_max], the terminal point misses
        ``endpoint_tol``, or the section defect exceeds ``match_tol``.
    """
    if not isinstance(params, PiecewiseLinearParams2D):
        raise TypeError("shooting is defined for the planar linear family")
    if not params.symmetric:
        raise ValueError(
            "shooting targets the origin saddle, which requires symmetric parameters"
        )
    eps = kernel.eps
    if not eps < 1.0:
        raise ValueError(f"need eps < 1 so x+ lies outside the band, got {eps!r}")
    ctl = controls if controls is not None else ShootingControls()

    drift = as_drift(params, kernel)
    if kernel.kind == "compact_bump":
        rhs = _fast_el_rhs_case1(params, eps)
    else:
        rhs = lambda t, v: _el_rhs_vec(drift, eps, t, np.asarray(v, dtype=float))
    rhs4 = _el_rhs_case1_vec(eps, drift)

    z_fp = 1.0 / eps
    fp = np.array([z_fp, params.eta, 0.0, 0.0])
    e1, e2 = _unstable_plane(params, eps)
    esc_r = ctl.escape_radius if ctl.escape_radius is not None else 40.0 + 4.0 * z_fp
    esc_r2 = esc_r * esc_r

    def section(t, v):
        return v[0] - 1.0

    section.terminal = True
    section.direction = -1.0

    def escape(t, v):
        d = v - fp
        return d @ d - esc_r2

    escape.terminal = True
    escape.direction = 1.0

    hit_cache: dict[float, tuple[float, np.ndarray] | None] = {}

    def stage1_hit(theta: float) -> tuple[float, np.ndarray] | None:
        key = float(theta)
        if key in hit_cache:
            return hit_cache[key]
        x0 = fp + ctl.radius * (math.cos(theta) * e1 + math.sin(theta) * e2)
        sol = solve_ivp(
            rhs,
            (0.0, ctl.t1_cap),
            x0,
            method="DOP853",
            rtol=ctl.rtol,
            atol=ctl.atol,
            events=(section, escape),
        )
        if sol.t_events[0].size == 0:
            hit_cache[key] = None
            return None
        out = (float(sol.t_events[0][0]), sol.y_events[0][0].copy())
        hit_cache[key] = out
        return out

    def phi_leftward(zs, ys, pss) -> np.ndarray:
        zs, ys, pss = np.atleast_1d(zs, ys, pss)
        xy = np.column_stack((eps * zs, ys))
        F = _drift_values(drift, xy, np.zeros(zs.size))
        disc = F[:, 0] ** 2 - 2.0 * F[:, 1] * pss - pss * pss
        return -F[:, 0] - np.sqrt(np.maximum(disc, 0.0))

    # Saddle frame at the origin.  In rescaled coordinates the EL
    # linearization is block triangular, [[Jt, B], [0, -A^T]], with Jt
    # similar to the mollified Jacobian A, so the spectrum is the
    # deterministic pair (mu_u, mu_s) plus its negative.  The connection
    # arrives along the slow stable direction (eigenvalue -mu_u, the
    # only stable one with nonzero momentum); the arrival conditions
    # kill the two unstable covectors and pin the amplitude along it.
    A0 = np.asarray(drift.jacobian(np.zeros(2), 0.0), dtype=float).reshape(2, 2)
    Jt = np.array([[A0[0, 0], A0[0, 1] / eps], [A0[1, 0] * eps, A0[1, 1]]])
    Bm = np.array([[1.0 / eps, 0.0], [0.0, 1.0]])
    evals, evecs = np.linalg.eig(A0)
    if np.max(np.abs(np.imag(evals))) > 1e-9 * np.max(np.abs(evals)):
        raise ShootingConvergenceError(
            "the mollified linearization at the origin is not a saddle",
            best_residual=math.inf,
        )
    evals, evecs = np.real(evals), np.real(evecs)
    iu, ist = int(np.argmax(evals)), int(np.argmin(evals))
    mu_u, mu_s = float(evals[iu]), float(evals[ist])
    if not (mu_u > 0.0 > mu_s):
        raise ShootingConvergenceError(
            "the mollified linearization at the origin is not a saddle",
            best_residual=math.inf,
        )
    # left covector of the slow unstable mode (+mu_u, from the Jt block)
    evals_jt, evecs_jt = np.linalg.eig(Jt.T)
    ju = int(np.argmin(np.abs(np.real(evals_jt) - mu_u)))
    w_pos = np.real(evecs_jt[:, ju])
    w_mom = np.linalg.solve(A0 + mu_u * np.eye(2), Bm @ w_pos)
    l_u1 = np.concatenate((w_pos, w_mom))
    l_u1 /= np.linalg.norm(l_u1)
    # left covector of the fast unstable mode (-mu_s, from the adjoint
    # block): its position part vanishes and its momentum part is the
    # stable right eigenvector of A
    l_u2 = np.concatenate((np.zeros(2), evecs[:, ist]))
    l_u2 /= np.linalg.norm(l_u2)
    # slow stable right eigenvector (-mu_u): momentum part is the left
    # eigenvector of A for mu_u
    evals_t, evecs_t = np.linalg.eig(A0.T)
    jm = int(np.argmin(np.abs(np.real(evals_t) - mu_u)))
    v_m = np.real(evecs_t[:, jm])
    v_pos = -np.linalg.solve(Jt + mu_u * np.eye(2), Bm @ v_m)
    v_s4 = np.concatenate((v_pos, v_m))
    v_s4 /= np.linalg.norm(v_s4)

    def crawl_x(yy: np.ndarray) -> np.ndarray:
        """In-band nullcline f_eps(x, y) = 0, bisected per entry of yy."""
        zeros = np.zeros(yy.size)
        lo = np.zeros(yy.size)
        hi = np.full(yy.size, eps)
        flo = _drift_values(drift, np.column_stack((lo, yy)), zeros)[:, 0]
        fhi = _drift_values(drift, np.column_stack((hi, yy)), zeros)[:, 0]
        ok = flo * fhi < 0.0
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            fm = _drift_values(drift, np.column_stack((mid, yy)), zeros)[:, 0]
            same = (fm > 0.0) == (flo > 0.0)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        return np.where(ok, 0.5 * (lo + hi), 0.5 * eps)

    band_rate = abs(float(A0[0, 0]))

    def synthetic_guess(y1: float, r_arr: float):
        """Nullcline-crawl initial guess: mesh, values, duration.

        The descent dives from the band edge onto the in-band nullcline
        in a layer of duration ~3/band_rate, then crawls toward the
        saddle with the near-reversal momentum psi = -2 g_eps, which
        closes the H = 0 discriminant so the transverse speed vanishes
        at leading order.
        """
        y_end = math.copysign(max(r_arr * max(abs(v_s4[1]), 0.3), 1e-12), y1)
        if abs(y_end) > 0.5 * abs(y1):
            y_end = 0.5 * y1
        yy = math.copysign(1.0, y1) * np.geomspace(abs(y1), abs(y_end), 320)
        xs = crawl_x(yy)
        gg = _drift_values(drift, np.column_stack((xs, yy)), np.zeros(yy.size))[:, 1]
        speed = np.maximum(-gg * math.copysign(1.0, -y1), 1e-12)
        dmag = np.abs(np.diff(yy))
        t_crawl = np.concatenate(
            ([0.0], np.cumsum(dmag / (0.5 * (speed[1:] + speed[:-1]))))
        )
        t_layer = 3.0 / band_rate
        n_lay = 28
        t_lay = np.linspace(0.0, t_layer, n_lay)
        z0 = xs[0] / eps
        decay = (np.exp(-band_rate * t_lay) - math.exp(-3.0)) / (1.0 - math.exp(-3.0))
        psis = -2.0 * gg
        t_full = np.concatenate((t_lay, t_layer + t_crawl[1:]))
        z_full = np.concatenate((z0 + (1.0 - z0) * decay, xs[1:] / eps))
        y_full = np.concatenate((np.full(n_lay, y1), yy[1:]))
        p_full = np.concatenate((np.full(n_lay, psis[0]), psis[1:]))
        ph_full = phi_leftward(z_full, y_full, p_full)
        t2 = float(t_full[-1])
        s = t_full / t2
        s[0], s[-1] = 0.0, 1.0
        return s, np.vstack((z_full, y_full, ph_full, p_full)), t2

    # Stage-1 scan: which eigenplane angles reach the band edge at all.
    two_pi = 2.0 * math.pi
    thetas = [float(th) for th in np.linspace(0.0, two_pi, ctl.theta_samples, endpoint=False)]
    hit_thetas = [th for th in thetas if stage1_hit(th) is not None]
    if not hit_thetas:
        raise ShootingConvergenceError(
            "no eigenplane angle reaches the band edge", best_residual=math.inf
        )
    median_y1 = float(np.median([stage1_hit(th)[1][1] for th in hit_thetas]))
    probe = synthetic_guess(median_y1, ctl.arrival_radius)
    if v_s4 @ probe[1][:, -1] < 0.0:
        v_s4 = -v_s4

    # Stage 2 as collocation on the full EL flow over s in [0, 1] with
    # free duration t2: fixed section position on the left; on the
    # right no component along either unstable covector and a pinned
    # amplitude along the slow stable direction, which also forces
    # H = 0 along the arc since H vanishes on the stable subspace.
    y1_cell = np.array([0.0])
    rbar_cell = np.array([ctl.arrival_radius])

    def bvp_fun(s, u, p):
        return p[0] * rhs4(u)

    def bvp_bc(ua, ub, p):
        return np.array(
            [
                ua[0] - 1.0,
                ua[1] - y1_cell[0],
                l_u1 @ ub,
                l_u2 @ ub,
                v_s4 @ ub - rbar_cell[0],
            ]
        )

    warm: list = []

    def try_solve(xs, us, p0):
        return solve_bvp(
            bvp_fun,
            bvp_bc,
            xs,
            us,
            p=np.atleast_1d(np.asarray(p0, dtype=float)),
            tol=ctl.bvp_tol,
            max_nodes=ctl.bvp_max_nodes,
        )

    def remember(sol) -> None:
        # keep warm-start meshes from compounding across the scan
        if sol.x.size > 6000:
            xs_t = np.unique(np.concatenate((sol.x[::2], sol.x[-1:])))
            warm[:] = [xs_t, sol.sol(xs_t), sol.p]
        else:
            warm[:] = [sol.x, sol.y, sol.p]

    def solve_stage2(y1: float):
        """Collocation solve at section height y1; None on failure."""
        y1_cell[0] = float(y1)
        rbar_cell[0] = ctl.arrival_radius
        if warm:
            sol = try_solve(*warm)
            if sol.status == 0:
                remember(sol)
                return sol
        xs, us, t2g = synthetic_guess(y1, ctl.arrival_radius)
        sol = try_solve(xs, us, t2g)
        if sol.status != 0:
            # continuation in the arrival amplitude: solve a loose
            # problem first, then tighten tenfold per step
            r_cur = ctl.arrival_radius * 1e3
            rbar_cell[0] = r_cur
            xs, us, t2g = synthetic_guess(y1, r_cur)
            sol = try_solve(xs, us, t2g)
            while sol.status == 0 and r_cur > ctl.arrival_radius:
                r_cur = max(r_cur / 10.0, ctl.arrival_radius)
                rbar_cell[0] = r_cur
                sol = try_solve(sol.x, sol.y, sol.p)
            if sol.status != 0:
                return None
        remember(sol)
        return sol

    mismatch_cache: dict[float, float] = {}

    def mismatch(theta: float) -> float:
        key = float(theta) % two_pi
        if key in mismatch_cache:
            return mismatch_cache[key]
        hit = stage1_hit(key)
        if hit is None:
            mismatch_cache[key] = math.nan
            return math.nan
        sol = solve_stage2(float(hit[1][1]))
        val = math.nan if sol is None else float(sol.y[3, 0] - hit[1][3])
        mismatch_cache[key] = val
        return val

    # evaluate in section-height order so each solve warm-starts nearby
    for th in sorted(hit_thetas, key=lambda t: float(stage1_hit(t)[1][1])):
        mismatch(th)

    brackets = []
    n_scan = len(thetas)
    for i in range(n_scan):
        ta = thetas[i]
        tb = thetas[(i + 1) % n_scan] + (two_pi if i + 1 == n_scan else 0.0)
        va = mismatch_cache.get(ta % two_pi, math.nan)
        vb = mismatch_cache.get(tb % two_pi, math.nan)
        if math.isfinite(va) and math.isfinite(vb) and va * vb < 0.0:
            brackets.append((ta, tb, min(abs(va), abs(vb))))
    brackets.sort(key=lambda b: b[2])

    best_res, best_theta = math.inf, None
    accepted = None
    for ta, tb, _ in brackets:
        try:
            th_star = brentq(mismatch, ta, tb, xtol=1e-13, rtol=4.0 * np.finfo(float).eps)
        except ValueError:
            continue
        key = float(th_star) % two_pi
        hit = stage1_hit(key)
        if hit is None:
            continue
        hv = hit[1]
        sol2 = solve_stage2(float(hv[1]))
        if sol2 is None:
            continue
        res = float(np.linalg.norm(sol2.y[:, 0] - hv))
        if res < best_res:
            best_res, best_theta = res, key
        if res < ctl.match_tol:
            accepted = (key, hit, sol2, res)
            break
    if accepted is None:
        if brackets:
            raise ShootingConvergenceError(
                f"section defect {best_res:.3e} exceeds match_tol "
                f"{ctl.match_tol:.1e}",
                best_residual=best_res,
                theta=best_theta,
            )
        finite = {k: v for k, v in mismatch_cache.items() if math.isfinite(v)}
        if finite:
            kb = min(finite, key=lambda k: abs(finite[k]))
            raise ShootingConvergenceError(
                "no sign change of the section momentum defect along the "
                f"scan; smallest |defect| {abs(finite[kb]):.3e}",
                best_residual=abs(finite[kb]),
                theta=kb,
            )
        raise ShootingConvergenceError(
            "every stage-2 collocation solve failed along the scan",
            best_residual=math.inf,
        )

    theta_star, (t_hit, hv), sol2, match_res = accepted
    t2_star = float(sol2.p[0])
    if not (ctl.t2_min < t2_star < ctl.t2_max):
        raise ShootingConvergenceError(
            f"matched arc duration t2 = {t2_star:.3e} leaves "
            f"[{ctl.t2_min}, {ctl.t2_max}]",
            best_residual=match_res,
            theta=theta_star,
        )

    # Final trajectories: stage 1 re-solved densely at the matched
    # angle, stage 2 read off the collocation mesh, both timed relative
    # to the section hit.
    x0 = fp + ctl.radius * (math.cos(theta_star) * e1 + math.sin(theta_star) * e2)
    sol1 = solve_ivp(
        rhs,
        (0.0, t_hit),
        x0,
        method="DOP853",
        rtol=ctl.rtol,
        atol=ctl.atol,
        max_step=min(0.05, t_hit),
    )
    states1 = sol1.y.T
    states2 = sol2.y.T.copy()
    endpoint_error = float(np.linalg.norm(states2[-1]))
    if not endpoint_error < ctl.endpoint_tol:
        raise ShootingConvergenceError(
            f"terminal distance {endpoint_error:.3e} from the saddle "
            f"exceeds endpoint_tol {ctl.endpoint_tol:.1e}",
            best_residual=endpoint_error,
            theta=theta_star,
        )
    h1 = _hamiltonian_values(drift, eps, np.zeros(sol1.t.size), states1)
    h2 = _hamiltonian_values(drift, eps, np.zeros(sol2.x.size), states2)
    traj1 = ELTrajectory(
        stage=ShootingStage.UPHILL_TO_SIGMA,
        times=sol1.t - t_hit,
        states=states1,
        eps=eps,
        h_max=float(np.max(np.abs(h1))),
    )
    traj2 = ELTrajectory(
        stage=ShootingStage.SIGMA_TO_SADDLE,
        times=sol2.x * t2_star,
        states=states2,
        eps=eps,
        h_max=float(np.max(np.abs(h2))),
    )
    result = HeteroclinicResult(
        eps=eps,
        theta=theta_star,
        stage1=traj1,
        stage2=traj2,
        section_state=states2[0].copy(),
        matching_residual=match_res,
        endpoint_error=endpoint_error,
        h_max=max(traj1.h_max, traj2.h_max),
    )
    if stage is ShootingStage.UPHILL_TO_SIGMA:
        return result.stage1
    if stage is ShootingStage.SIGMA_TO_SADDLE:
        return result.stage2
    return result


def _resample_polyline(xy: np.ndarray, samples: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    if s[-1] == 0.0:
        return np.repeat(xy[:1], samples, axis=0)
    grid = np.linspace(0.0, s[-1], samples)
    return np.column_stack([np.interp(grid, s, xy[:, d]) for d in range(xy.shape[1])])


def xy_sup_distance(a, b, samples: int = 1500) -> float:
    """Symmetric Hausdorff distance between two xy-projections.

    Accepts HeteroclinicResult objects or raw (k, 2) polylines; both are
    resampled uniformly by arclength, so the value approximates the
    parameterization-free sup-distance between the curves.
    """

    def polyline(obj) -> np.ndarray:
        if isinstance(obj, HeteroclinicResult):
            return obj.xy_path()[1]
        return np.asarray(obj, dtype=float)

    pa = _resample_polyline(polyline(a), samples)
    pb = _resample_polyline(polyline(b), samples)
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])


# ---------------------------------------------------------------------------
# Gradient-flow relaxation of the discrete action


@dataclass(frozen=True)
class GradFlowResult:
    """Outcome of the artificial-time descent.

    ``action_history`` holds the action at every gradient evaluation
    (non-increasing on a healthy run); ``converged`` is True when the
    max-norm gradient dropped below tolerance or the action plateaued.
    """

    path: DiscretePath
    action_history: np.ndarray
    iterations: int
    converged: bool
    final_gradient_norm: float


def gradient_flow_minimize(
    field,
    kernel: MollifierKernel | None,
    bc: tuple[float, np.ndarray, float, np.ndarray],
    m: int,
    ds: float | None = None,
    max_iters: int = 200_000,
    grad_tol: float = 1e-6,
    initial: DiscretePath | None = None,
    plateau_window: int = 100,
    plateau_rtol: float = 1e-12,
) -> GradFlowResult:
    """Relax a path to a stationary point of the discrete action.

    Explicit descent along the exact adjoint gradient of the
    midpoint-rule action: interior nodes move by ds * g per step, where
    perturbing the path by v changes the action by -2 dt sum <g_j, v_j>.
    The leading term of g is the second difference of the path over
    dt^2, so the explicit iteration is stable only for ds <= dt^2 / 2;
    that bound is enforced before the first step.

    Parameters
    ----------
    field : parameter record, PiecewiseField, or Drift
        With ``kernel``, anything ``as_drift`` accepts; a smooth Drift
        may be passed directly with kernel None.
    kernel : MollifierKernel or None
    bc : (t0, x0, tf, xf)
        Boundary conditions; x0, xf are scalars or (n,) arrays.
    m : int
        Number of segments of the uniform grid.
    ds : float, optional
        Artificial-time step; defaults to 0.4 * dt^2.
    max_iters : int
        Gradient-evaluation budget.
    grad_tol : float
        Convergence threshold on the max-norm of the gradient.
    initial : DiscretePath, optional
        Starting guess on the same grid and boundary values; default is
        the straight line between the boundary states.
    plateau_window, plateau_rtol :
        Secondary stop: converged when the action decreased by less
        than plateau_rtol * max(1, |action|) over the last
        plateau_window steps.

    Raises
    ------
    ValueError
        For a stability-violating ds or a mismatched initial path
        (checked before iterating).
    GradientFlowDivergenceError
        If the action increases on two consecutive steps.
    """
    drift = as_drift(field, kernel)
    t0, x0, tf, xf = bc
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xf = np.atleast_1d(np.asarray(xf, dtype=float))
    if not tf > t0:
        raise ValueError(f"need tf > t0 in bc, got {t0!r}, {tf!r}")
    dt = (tf - t0) / m
    if ds is None:
        ds = 0.4 * dt * dt
    if ds > 0.5 * dt * dt * (1.0 + 1e-12):
        raise ValueError(
            f"unstable artificial-time step: ds={ds!r} exceeds dt^2/2={0.5*dt*dt!r}"
        )
    if initial is not None:
        if initial.m != m or abs(initial.t0 - t0) > 1e-12 or abs(initial.tf - tf) > 1e-12:
            raise ValueError("initial path grid does not match bc/m")
        if (
            np.max(np.abs(initial.states[0] - x0)) > 1e-9
            or np.max(np.abs(initial.states[-1] - xf)) > 1e-9
        ):
            raise ValueError("initial path endpoints do not meet the boundary values")
        states = initial.states.copy()
    else:
        states = DiscretePath.straight_line(x0, xf, t0, tf, m).states.copy()
    states[0] = x0
    states[-1] = xf

    t_mid = (np.linspace(t0, tf, m + 1)[:-1] + 0.5 * dt)
    history: list[float] = []
    converged = False
    gmax = math.inf
    for _ in range(max_iters):
        mids = 0.5 * (states[:-1] + states[1:])
        vel = (states[1:] - states[:-1]) / dt
        w = vel - _drift_values(drift, mids, t_mid)
        S = dt * float(np.sum(w * w))
        history.append(S)
        k = len(history) - 1
        # Roundoff guard: true divergence of the explicit iteration grows
        # geometrically, so require increases beyond relative machine noise.
        if k >= 2:
            bump = 1e-14 * max(1.0, abs(history[k - 2]))
            if (
                history[k] > history[k - 1] + bump
                and history[k - 1] > history[k - 2] + bump
            ):
                raise GradientFlowDivergenceError(
                    f"action increased on consecutive steps at iteration {k}",
                    history=np.asarray(history),
                    iterations=k,
                )
        jac = np.asarray(drift.jacobian(mids, t_mid), dtype=float)
        jtw = np.einsum("ikj,ik->ij", jac, w)
        g = (w[1:] - w[:-1]) / dt + 0.5 * (jtw[:-1] + jtw[1:])
        gmax = float(np.max(np.abs(g))) if g.size else 0.0
        if gmax < grad_tol:
            converged = True
            break
        if k >= plateau_window and (
            history[k - plateau_window] - history[k]
            <= plateau_rtol * max(1.0, abs(history[k]))
        ):
            converged = True
            break
        states[1:-1] += ds * g

    return GradFlowResult(
        path=DiscretePath(t0, tf, states),
        action_history=np.asarray(history),
        iterations=len(history),
        converged=converged,
        final_gradient_norm=gmax,
    )


def refine_gradient_flow(
    field,
    kernel: MollifierKernel | None,
    bc: tuple[float, np.ndarray, float, np.ndarray],
    m_levels: Sequence[int],
    initial: DiscretePath | None = None,
    **kwargs,
) -> GradFlowResult:
    """Grid-continuation wrapper around ``gradient_flow_minimize``.

    Relaxes on the coarsest grid first and interpolates each converged
    path onto the next grid as its starting guess; most of the descent
    then happens where steps are cheap and the stability bound on ds is
    loose.  Returns the finest-level result.
    """
    t0, x0, tf, xf = bc
    result: GradFlowResult | None = None
    guess = initial
    for m in m_levels:
        if guess is not None and guess.m != m:
            told = guess.times
            tnew = np.linspace(t0, tf, m + 1)
            states = np.column_stack(
                [np.interp(tnew, told, guess.states[:, d]) for d in range(guess.dim)]
            )
            guess = DiscretePath(t0, tf, states)
        result = gradient_flow_minimize(
            field, kernel, bc, m, initial=guess, **kwargs
        )
        guess = result.path
    if result is None:
        raise ValueError("m_levels is empty")
    return result


# ---------------------------------------------------------------------------
# Closed-form minimizer of the forced scalar family


def _grid_spec(
    params: NonAutonomousParams1D, grid
) -> tuple[float, float, int]:
    """Resolve the grid argument: None, m, or (t_start, t_end, m).

    The default window places the analytic start far enough back that
    the minimizer is within 1e-10 of h- at the first node, and snaps
    the crossing time onto a grid node so the velocity kink there does
    not pollute the midpoint quadrature.
    """
    t_max = h_minus_peak_time(params)
    if grid is None or isinstance(grid, (int, np.integer)):
        m = 8000 if grid is None else int(grid)
        h_star = abs(params.a + params.A_minus / math.hypot(params.r_minus, 2.0 * math.pi))
        t_back = max(8.0, math.log(max(h_star, 1e-8) / 1e-10) / params.r_minus)
        t_fwd = 3.0 * max(1.0, 2.0 / params.r_plus)
        dt = (t_back + t_fwd) / m
        k_left = int(round(t_back / dt))
        t_start = t_max - k_left * dt
        return t_start, t_start + (t_back + t_fwd), m
    t_start, t_end, m = grid
    return float(t_start), float(t_end), int(m)


def analytic_mpp_case2(
    params: NonAutonomousParams1D, grid=None
) -> tuple[DiscretePath, float]:
    """Closed-form most probable path of the forced scalar family.

    The minimizer relaxes backwards from the manifold onto h-,

        alpha*(t) = -h-(t_max) exp(r-(t - t_max)) + h-(t),   t <= t_max,

    crosses at (t_max, 0), and is continued by the one-sided flow on the
    plus side afterwards.  The reported action is the exact crossing
    cost 2 r- h-(t_max)^2.

    Parameters
    ----------
    params : NonAutonomousParams1D
    grid : None, int, or (t_start, t_end, m)
        Sampling grid of the returned path.  None and a bare segment
        count use a default window that starts where |alpha* - h-| has
        decayed below 1e-10 and puts t_max exactly on a node.

    Returns
    -------
    (DiscretePath, float)
        The sampled path and the closed-form action.

    Raises
    ------
    TheoremInapplicableError
        When the one-sided cycles are not limit cycles, or the
        continuation from (t_max, 0) does not relax to h+ (the crossing
        point must lie in the closure of the plus basin); minimize with
        ``gradient_flow_minimize`` instead in that regime.
    """
    if not params.limit_cycle_condition:
        raise TheoremInapplicableError(
            "forcing amplitudes break the one-sided limit cycles; "
            "no closed-form minimizer (use gradient_flow_minimize)"
        )
    t_max = h_minus_peak_time(params)
    membership = basin_membership(params, t_max, 1e-9)
    if membership is not BasinLabel.B_PLUS:
        raise TheoremInapplicableError(
            f"continuation from (t_max, 0+) reaches {membership.value}, not the "
            "plus cycle; the closed form does not apply (use gradient_flow_minimize)"
        )
    _, h_minus = stable_cycles_1d(params)
    h_star = float(h_minus(t_max))
    t_start, t_end, m = _grid_spec(params, grid)
    times = np.linspace(t_start, t_end, m + 1)
    states = np.empty((m + 1, 1))
    left = times <= t_max + 1e-12
    tl = times[left]
    states[left, 0] = h_minus(tl) - h_star * np.exp(params.r_minus * (tl - t_max))
    right = ~left
    if right.any():
        sol = solve_ivp(
            lambda t, x: [params.f_plus(x[0], t)],
            (t_max, times[-1] + 1e-9),
            [0.0],
            method="RK45",
            rtol=1e-12,
            atol=1e-14,
            dense_output=True,
        )
        states[right, 0] = sol.sol(times[right])[0]
    action = 2.0 * params.r_minus * h_star * h_star
    return DiscretePath(t_start, t_end, states), action


def kramers_lower_bound(params: NonAutonomousParams1D, path: DiscretePath) -> float:
    """Exact action lower bound from the path's first manifold crossing.

    For any path started on h- the action down to its first crossing
    time t_c satisfies

        integral |alpha_dot - f-|^2 dt
            = integral (u_dot - r- u)^2 dt + 2 r- u(t_c)^2
            >= 2 r- h-(t_c)^2,

    with u = alpha - h-, so the bound is attained exactly by the
    relaxation profile u_dot = r- u of the analytic minimizer.

    Raises
    ------
    ValueError
        If the path does not start on h- (tolerance 1e-6).
    PathNeverCrossesError
        If no sample reaches the manifold.
    """
    if path.dim != 1:
        raise ValueError(f"scalar family expects a 1-D path, got dim {path.dim}")
    _, h_minus = stable_cycles_1d(params)
    times = path.times
    x = path.states[:, 0]
    start_gap = abs(x[0] - float(h_minus(times[0])))
    if start_gap > 1e-6:
        raise ValueError(
            f"path must start on h- (gap {start_gap:.3e} exceeds 1e-6)"
        )
    above = np.flatnonzero(x >= 0.0)
    if above.size == 0:
        raise PathNeverCrossesError("path never reaches the switching manifold")
    k = int(above[0])
    if k == 0:
        t_c = float(times[0])
    else:
        frac = (0.0 - x[k - 1]) / (x[k] - x[k - 1])
        t_c = float(times[k - 1] + frac * (times[k] - times[k - 1]))
    h_c = float(h_minus(t_c))
    return 2.0 * params.r_minus * h_c * h_c


@dataclass(frozen=True)
class ExtendedPath:
    """Finite path plus zero-cost periodic tails on both sides.

    Calling the object evaluates h- before the core window, the linear
    interpolant of the core inside it, and h+ after it; ``action`` is
    the core's limit-functional action, which the tails do not change.
    """

    core: DiscretePath
    pre_cycle: PeriodicSolution
    post_cycle: PeriodicSolution
    action: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        out = np.empty_like(tt)
        before = tt < self.core.t0
        after = tt > self.core.tf
        inside = ~(before | after)
        out[before] = self.pre_cycle(tt[before])
        out[after] = self.post_cycle(tt[after])
        out[inside] = np.interp(tt[inside], self.core.times, self.core.states[:, 0])
        return float(out[0]) if scalar else out


def extend_with_tails(
    params: NonAutonomousParams1D,
    finite_path: DiscretePath,
    tol: float = 1e-8,
) -> ExtendedPath:
    """Attach the zero-cost cycle tails to a finite transition path.

    The infinite-horizon object is reported as the finite core plus
    tail descriptors: h- for t < t0 and h+ for t > tf.  Because both
    tails track their drift exactly, the total action equals the core's
    action.

    Raises
    ------
    InvalidExtensionError
        If either endpoint is farther than ``tol`` from its cycle; a
        tail glued onto a mismatched endpoint would cost a positive
        boundary-layer action, so the extension would misreport the
        total.
    """
    if finite_path.dim != 1:
        raise ValueError(f"scalar family expects a 1-D path, got dim {finite_path.dim}")
    h_plus, h_minus = stable_cycles_1d(params)
    gap0 = abs(float(finite_path.states[0, 0]) - float(h_minus(finite_path.t0)))
    gap1 = abs(float(finite_path.states[-1, 0]) - float(h_plus(finite_path.tf)))
    if gap0 > tol or gap1 > tol:
        raise InvalidExtensionError(
            f"endpoints off the cycles: |x(t0)-h-(t0)|={gap0:.3e}, "
            f"|x(tf)-h+(tf)|={gap1:.3e}, tolerance {tol:.1e}"
        )
    action = gamma_action_1d(finite_path, params).total
    return ExtendedPath(
        core=finite_path, pre_cycle=h_minus, post_cycle=h_plus, action=action
    )


# ---------------------------------------------------------------------------
# Sliding comparison family for the repelling planar regime


@dataclass(frozen=True)
class SlidingMember:
    """One sliding comparison path: entry point, exit point, and samples."""

    path: DiscretePath
    y_entry: float
    y_exit: float
    t_entry: float
    t_exit: float


def sliding_family_case1(
    params: PiecewiseLinearParams2D,
    crossing,
    exit_fractions: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
) -> list[SlidingMember]:
    """Sliding variants of a converged crossing path, one per exit point.

    Each member copies the crossing path up to its first manifold
    crossing (t_entry, y_entry), then replaces the remainder by the
    literal sliding motion: pinned at x = 0 and moving with the imposed
    convex-combination flow until y reaches y_exit = fraction * y_entry,
    where it leaves on the minus side and follows the deterministic
    flow for the rest of the window.  The members parameterize the
    sliding alternatives to the crossing minimizer; their pinned
    segment is what makes them expensive under the mollified action.

    Parameters
    ----------
    params : PiecewiseLinearParams2D
    crossing : DiscretePath or GradFlowResult
        A path that crosses the manifold transversally (2-D states).
    exit_fractions : sequence of float in (0, 1)
        Exit points as fractions of the entry height.

    Raises
    ------
    PathNeverCrossesError
        If the supplied path never reaches x <= 0.
    ValueError
        If the window ends before the slowest member reaches its exit.
    """
    path = crossing.path if isinstance(crossing, GradFlowResult) else crossing
    if path.dim != 2:
        raise ValueError(f"planar family expects 2-D states, got dim {path.dim}")
    fld = params.as_field()
    times = path.times
    x = path.states[:, 0]
    below = np.flatnonzero(x <= 0.0)
    if below.size == 0:
        raise PathNeverCrossesError("crossing path never reaches the manifold")
    k = int(below[0])
    if k == 0:
        # Path starts on (or past) the manifold: slide from its first node.
        t_entry = float(times[0])
        y_entry = float(path.states[0, 1])
    else:
        frac = x[k - 1] / (x[k - 1] - x[k])
        t_entry = float(times[k - 1] + frac * (times[k] - times[k - 1]))
        y_entry = float(
            path.states[k - 1, 1] + frac * (path.states[k, 1] - path.states[k - 1, 1])
        )

    fractions = sorted(float(f) for f in exit_fractions)
    if not all(0.0 < f < 1.0 for f in fractions):
        raise ValueError(f"exit fractions must lie in (0, 1), got {exit_fractions!r}")
    y_floor = fractions[0] * y_entry

    def slide_rhs(t, s):
        return [float(sliding_flow(fld, np.array([s[0]]), t)[1])]

    def hit_floor(t, s):
        return s[0] - y_floor

    hit_floor.terminal = True
    slide = solve_ivp(
        slide_rhs,
        (t_entry, float(times[-1])),
        [y_entry],
        method="RK45",
        rtol=1e-12,
        atol=1e-12,
        dense_output=True,
        events=(hit_floor,),
    )
    if slide.t_events[0].size == 0:
        raise ValueError(
            "window too short: the slowest sliding member does not reach its exit"
        )

    members = []
    for f in fractions:
        y_exit = f * y_entry

        def gap(t):
            return float(slide.sol(t)[0]) - y_exit

        t_exit = float(brentq(gap, t_entry, float(slide.t_events[0][0]), xtol=1e-13))
        down = solve_ivp(
            lambda t, s: [params.f_minus(s[0], s[1]), params.g_minus(s[0], s[1])],
            (t_exit, float(times[-1]) + 1e-9),
            [0.0, y_exit],
            method="RK45",
            rtol=1e-12,
            atol=1e-12,
            dense_output=True,
        )
        states = path.states.copy()
        for i in range(k, len(times)):
            t = float(times[i])
            if t <= t_exit:
                states[i, 0] = 0.0
                states[i, 1] = float(slide.sol(t)[0])
            else:
                states[i] = down.sol(t)
        members.append(
            SlidingMember(
                path=path.with_states(states),
                y_entry=y_entry,
                y_exit=y_exit,
                t_entry=t_entry,
                t_exit=t_exit,
            )
        )
    return members
