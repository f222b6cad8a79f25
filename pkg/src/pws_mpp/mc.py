"""Direct Monte Carlo tipping statistics by Euler-Maruyama simulation.

Trajectories of ``dX = F(X, t) dt + sigma dW`` are integrated with the
explicit Euler-Maruyama step ``x_{k+1} = x_k + F(x_k, t_k) dt + sigma
sqrt(dt) xi_k`` where the one-sided field rule follows sign(x): the S+
branch is used whenever the switching coordinate satisfies x >= 0.

Every normal increment is drawn from a counter-based stream keyed by
``(master_seed, trajectory_index, step_index, component)``, so a single
trajectory can be reproduced in isolation and ensemble statistics do not
depend on how trajectories are distributed over workers: tip counts and
per-trajectory paths are bit-identical for any worker count, and density
histograms are integer counts merged by addition.  Floating-point mean
accumulators are merged in block order, so they are bit-identical for a
fixed worker count; a single worker is the canonical sequential reduction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from numba import njit

from .action import DiscretePath
from .fields import NonAutonomousParams1D, PiecewiseField, PiecewiseLinearParams2D
from .filippov import stable_cycles_1d

TWO_PI = 2.0 * math.pi

DT_CAP = 1.0e-3

__all__ = [
    "BallTipping1D",
    "BallTipping2D",
    "CycleTipping1D",
    "DoubleWellToy1D",
    "EnsembleConfig",
    "InsufficientDataError",
    "TippingEnsemble",
    "em_trajectory",
    "mean_transition_path",
    "run_ensemble",
    "stream_normal",
    "stream_uniform",
    "tipping_detect_2d",
    "tipping_time_1d",
]


class InsufficientDataError(RuntimeError):
    """Too few tipping events to form the requested statistic."""


# ---------------------------------------------------------------------------
# counter-based random streams
# ---------------------------------------------------------------------------
# A draw is the SplitMix64 finalizer chained over the four key words.  The
# chain is injective enough for simulation use (each word passes through a
# full-avalanche bijection before being folded in), costs a handful of
# integer multiplies, and needs no carried state, so any (trajectory, step)
# pair can be evaluated out of order.

_U64_GOLD = np.uint64(0x9E3779B97F4A7C15)
_U64_M1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.1102230246251565e-16
_TWO_M54 = 5.551115123125783e-17


@njit(cache=True, inline="always")
def _sm64(z):
    z = z + _U64_GOLD
    z = (z ^ (z >> _S30)) * _U64_M1
    z = (z ^ (z >> _S27)) * _U64_M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _stream_u64(seed, traj, step, comp):
    h = _sm64(seed)
    h = _sm64(h ^ _sm64(traj))
    h = _sm64(h ^ _sm64(step))
    h = _sm64(h ^ _sm64(comp))
    return h


@njit(cache=True, inline="always")
def _u64_to_uniform(r):
    # 53-bit mantissa, offset half an ulp so u is strictly inside (0, 1)
    return (r >> _S11) * _TWO_M53 + _TWO_M54


@njit(cache=True)
def _inverse_normal_cdf(u):
    """Inverse standard normal CDF, Wichura's double-precision algorithm."""
    q = u - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (
            (
                (
                    (
                        (
                            (
                                (2.5090809287301226727e3 * r + 3.3430575583588128105e4)
                                * r
                                + 6.7265770927008700853e4
                            )
                            * r
                            + 4.5921953931549871457e4
                        )
                        * r
                        + 1.3731693765509461125e4
                    )
                    * r
                    + 1.9715909503065514427e3
                )
                * r
                + 1.3314166789178437745e2
            )
            * r
            + 3.3871328727963666080e0
        )
        den = (
            (
                (
                    (
                        (
                            (
                                (5.2264952788528545610e3 * r + 2.8729085735721942674e4)
                                * r
                                + 3.9307895800092710610e4
                            )
                            * r
                            + 2.1213794301586595867e4
                        )
                        * r
                        + 5.3941960214247511077e3
                    )
                    * r
                    + 6.8718700749205790830e2
                )
                * r
                + 4.2313330701600911252e1
            )
            * r
            + 1.0
        )
        return q * num / den
    if q < 0.0:
        r = u
    else:
        r = 1.0 - u
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (
            (
                (
                    (
                        (
                            (
                                (7.74545014278341407640e-4 * r + 2.27238449892691845833e-2)
                                * r
                                + 2.41780725177450611770e-1
                            )
                            * r
                            + 1.27045825245236838258e0
                        )
                        * r
                        + 3.64784832476320460504e0
                    )
                    * r
                    + 5.76949722146069140550e0
                )
                * r
                + 4.63033784615654529590e0
            )
            * r
            + 1.42343711074968357734e0
        )
        den = (
            (
                (
                    (
                        (
                            (
                                (1.05075007164441684324e-9 * r + 5.47593808499534494600e-4)
                                * r
                                + 1.51986665636164571966e-2
                            )
                            * r
                            + 1.48103976427480074590e-1
                        )
                        * r
                        + 6.89767334985100004550e-1
                    )
                    * r
                    + 1.67638483018380384940e0
                )
                * r
                + 2.05319162663775882187e0
            )
            * r
            + 1.0
        )
    else:
        r = r - 5.0
        num = (
            (
                (
                    (
                        (
                            (
                                (2.01033439929228813265e-7 * r + 2.71155556874348757815e-5)
                                * r
                                + 1.24266094738807843860e-3
                            )
                            * r
                            + 2.65321895265761230930e-2
                        )
                        * r
                        + 2.96560571828504891230e-1
                    )
                    * r
                    + 1.78482653991729133580e0
                )
                * r
                + 5.46378491116411436990e0
            )
            * r
            + 6.65790464350110377720e0
        )
        den = (
            (
                (
                    (
                        (
                            (
                                (2.04426310338993978564e-15 * r + 1.42151175831644588870e-7)
                                * r
                                + 1.84631831751005468180e-5
                            )
                            * r
                            + 7.86869131145613259100e-4
                        )
                        * r
                        + 1.48753612908506148525e-2
                    )
                    * r
                    + 1.36929880922735805310e-1
                )
                * r
                + 5.99832206555887937690e-1
            )
            * r
            + 1.0
        )
    val = num / den
    if q < 0.0:
        return -val
    return val


@njit(cache=True, inline="always")
def _stream_normal(seed, traj, step, comp):
    return _inverse_normal_cdf(_u64_to_uniform(_stream_u64(seed, traj, step, comp)))


def stream_uniform(master_seed: int, trajectory: int, step: int, component: int) -> float:
    """Uniform(0, 1) draw of the keyed stream; strictly inside the open interval."""
    raw = _stream_u64(
        np.uint64(master_seed),
        np.uint64(trajectory),
        np.uint64(step),
        np.uint64(component),
    )
    return float(_u64_to_uniform(np.uint64(raw)))


def stream_normal(master_seed: int, trajectory: int, step: int, component: int) -> float:
    """Standard normal draw of the keyed stream, by inverse-CDF transform."""
    return float(
        _stream_normal(
            np.uint64(master_seed),
            np.uint64(trajectory),
            np.uint64(step),
            np.uint64(component),
        )
    )


# ---------------------------------------------------------------------------
# configuration records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleTipping1D:
    """Tipping rule for the forced scalar family: cross above the upper cycle.

    A trajectory has tipped at the first sample with x(t) > h_plus(t).  The
    source neighbourhood is the tube of half-width ``source_radius`` around
    the lower cycle h_minus.
    """

    source_radius: float = 0.1


@dataclass(frozen=True)
class BallTipping1D:
    """Scalar tipping rule by interval entry, |x - target| < radius."""

    target: float = 1.0
    source: float = -1.0
    radius: float = 0.1
    source_radius: float = 0.1


@dataclass(frozen=True)
class BallTipping2D:
    """Planar tipping rule by ball entry around a target point."""

    target_center: tuple[float, float]
    source_center: tuple[float, float]
    radius: float = 0.1
    source_radius: float = 0.1


@dataclass(frozen=True)
class DoubleWellToy1D:
    """Smooth scalar double well dx = (x - x^3) dt + sigma dW.

    Both one-sided branches equal x - x^3, so the switching rule is inert;
    the family exists to exercise the ensemble machinery on a field whose
    transition statistics are symmetric under (x, xi) -> (-x, -xi).
    """


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble description: noise, grid, size, seed, and detection rules.

    Parameters
    ----------
    sigma : float
        Noise amplitude, >= 0.  Zero gives the deterministic Euler map.
    dt : float
        Step size.  Must satisfy dt <= 1e-3 unless ``allow_large_dt`` is
        set; the explicit scheme is only trusted in that regime.
    n_trajectories : int
        Ensemble size N >= 1.
    t0, tf : float
        Time window; ``tf - t0`` must be an integer number of steps.
    master_seed : int
        64-bit seed keying every random stream of the ensemble.
    tipping : CycleTipping1D | BallTipping1D | BallTipping2D, optional
        Detection rule.  Defaults to the natural rule of the field family.
    density_grid : tuple, optional
        ``((x_lo, x_hi, nx), (v_lo, v_hi, nv))`` histogram boxes, second
        axis y for planar fields and t mod 1 for scalar ones.
    x0 : float | tuple, optional
        Initial state; defaults to the source attractor of the family.
    mean_bin_width : float, optional
        Width of the crossing-aligned mean-path bins; defaults to dt.
    phase_bins : int
        Number of t mod 1 bins for scalar-field phase statistics.
    allow_large_dt : bool
        Explicit opt-out of the dt <= 1e-3 guard.
    """

    sigma: float
    dt: float
    n_trajectories: int
    t0: float
    tf: float
    master_seed: int
    tipping: object | None = None
    density_grid: tuple | None = None
    x0: object | None = None
    mean_bin_width: float | None = None
    phase_bins: int = 200
    allow_large_dt: bool = False

    def __post_init__(self) -> None:
        if not self.sigma >= 0.0:
            raise ValueError("noise amplitude sigma must be >= 0")
        if not self.dt > 0.0:
            raise ValueError("step size dt must be positive")
        if self.dt > DT_CAP * (1.0 + 1e-12) and not self.allow_large_dt:
            raise ValueError(
                "dt = %g exceeds the trusted cap %g; pass allow_large_dt=True "
                "to override" % (self.dt, DT_CAP)
            )
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not self.tf > self.t0:
            raise ValueError("time window must have tf > t0")
        n = (self.tf - self.t0) / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ValueError("tf - t0 must be an integer number of dt steps")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.phase_bins < 1:
            raise ValueError("phase_bins must be >= 1")
        if self.mean_bin_width is not None and not self.mean_bin_width > 0.0:
            raise ValueError("mean_bin_width must be positive")

    @property
    def n_steps(self) -> int:
        return int(round((self.tf - self.t0) / self.dt))

    def to_json_dict(self) -> dict:
        out = {
            "sigma": self.sigma,
            "dt": self.dt,
            "n_trajectories": self.n_trajectories,
            "t0": self.t0,
            "tf": self.tf,
            "master_seed": int(self.master_seed),
            "phase_bins": self.phase_bins,
            "allow_large_dt": self.allow_large_dt,
        }
        if self.tipping is not None:
            out["tipping"] = {
                "kind": type(self.tipping).__name__,
                **{k: v for k, v in vars(self.tipping).items()},
            }
        if self.density_grid is not None:
            out["density_grid"] = [list(axis) for axis in self.density_grid]
        if self.x0 is not None:
            out["x0"] = np.asarray(self.x0, dtype=float).tolist()
        if self.mean_bin_width is not None:
            out["mean_bin_width"] = self.mean_bin_width
        return out


@dataclass
class TippingEnsemble:
    """Result of a tipping ensemble.

    ``density`` is the normalized visit histogram of transition segments
    (between the last exit from the source neighbourhood and the first
    entry into the target); it sums to 1 whenever any segment sample fell
    inside the grid.  ``rel_*`` accumulate segment samples in bins of time
    relative to the first switching-plane crossing, ``sym_*`` relative to
    the midpoint of the first and last crossings (the alignment invariant
    under time reversal), and ``phase_*`` (scalar fields only) by t mod 1.
    ``warning`` is set instead of raising when the ensemble produced no
    tipping events.
    """

    config: EnsembleConfig
    tipping: object
    dim: int
    n: int
    tip_count: int
    fraction: float
    standard_error: float
    density: np.ndarray
    density_counts: np.ndarray
    density_edges: tuple[np.ndarray, np.ndarray]
    tip_flags: np.ndarray
    tip_steps: np.ndarray
    crossing_steps: np.ndarray
    rel_times: np.ndarray
    rel_sum: np.ndarray
    rel_sumsq: np.ndarray
    rel_cnt: np.ndarray
    sym_sum: np.ndarray
    sym_sumsq: np.ndarray
    sym_cnt: np.ndarray
    phase_centers: np.ndarray | None = None
    phase_sum: np.ndarray | None = None
    phase_sumsq: np.ndarray | None = None
    phase_cnt: np.ndarray | None = None
    warning: str | None = None

    def tip_times(self) -> np.ndarray:
        """Absolute tipping times of the tipped trajectories."""
        steps = self.tip_steps[self.tip_steps >= 0]
        return self.config.t0 + steps * self.config.dt

    def crossing_times(self) -> np.ndarray:
        """Absolute first switching-plane crossing times of the segments."""
        steps = self.crossing_steps[self.crossing_steps >= 0]
        return self.config.t0 + steps * self.config.dt

    def crossing_phases(self) -> np.ndarray:
        """Crossing times modulo the unit forcing period."""
        return self.crossing_times() % 1.0

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "tipping": {
                "kind": type(self.tipping).__name__,
                **{k: v for k, v in vars(self.tipping).items()},
            },
            "dim": self.dim,
            "n": self.n,
            "tip_count": self.tip_count,
            "fraction": self.fraction,
            "standard_error": self.standard_error,
            "warning": self.warning,
        }


# ---------------------------------------------------------------------------
# Euler-Maruyama kernels
# ---------------------------------------------------------------------------
# Field kinds for the scalar kernel: 0 is the forced piecewise-linear
# family (branch by sign of x, S+ at x = 0), 1 is the smooth double well.
# Forcing and cycle values are tabulated per step index, so the inner loop
# is free of transcendentals.


@njit(cache=True, nogil=True)
def _block_1d(
    i0,
    i1,
    seed,
    field_kind,
    rp,
    rm,
    aa,
    forc_p,
    forc_m,
    tip_kind,
    hp_tab,
    hm_tab,
    tgt,
    tgt_r,
    src,
    src_r,
    sigma,
    dt,
    nsteps,
    t0,
    x0,
    dens,
    dxlo,
    dxw,
    dxn,
    dvlo,
    dvw,
    dvn,
    rel_sum,
    rel_sumsq,
    rel_cnt,
    sym_sum,
    sym_sumsq,
    sym_cnt,
    rel_k0,
    ph_sum,
    ph_sumsq,
    ph_cnt,
    nph,
    tip_flags,
    tip_steps,
    cross_steps,
):
    sq = sigma * math.sqrt(dt)
    traj = np.empty(nsteps + 1)
    tips = 0
    h_seed = _sm64(seed)
    for i in range(i0, i1):
        h_traj = _sm64(h_seed ^ _sm64(np.uint64(i)))
        x = x0
        traj[0] = x
        tip_k = -1
        last_exit = 0
        if tip_kind == 0:
            inside = abs(x - hm_tab[0]) < src_r
        else:
            inside = abs(x - src) < src_r
        prev_inside = inside
        for k in range(nsteps):
            if field_kind == 0:
                if x >= 0.0:
                    f = -rp * (x - 1.0) + forc_p[k]
                else:
                    f = -rm * (x - aa) + forc_m[k]
            else:
                f = x - x * x * x
            h_step = _sm64(h_traj ^ _sm64(np.uint64(k)))
            n1 = _inverse_normal_cdf(
                _u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(0))))
            )
            x = x + f * dt + sq * n1
            traj[k + 1] = x
            if tip_kind == 0:
                inside = abs(x - hm_tab[k + 1]) < src_r
                tipped = x > hp_tab[k + 1]
            else:
                inside = abs(x - src) < src_r
                tipped = abs(x - tgt) < tgt_r
            if prev_inside and not inside:
                last_exit = k + 1
            prev_inside = inside
            if tipped:
                tip_k = k + 1
                break
        if tip_k < 0:
            continue
        tips += 1
        tip_flags[i] = 1
        tip_steps[i] = tip_k
        # transition segment: last source exit -> first target entry
        ref = traj[last_exit]
        j_cross = tip_k
        for j in range(last_exit, tip_k + 1):
            if traj[j] * ref <= 0.0:
                j_cross = j
                break
        j_last = j_cross
        for j in range(tip_k, last_exit - 1, -1):
            if traj[j] * ref > 0.0:
                j_last = j + 1
                break
        j_mid = (j_cross + j_last) // 2
        cross_steps[i] = j_cross
        for j in range(last_exit, tip_k + 1):
            xx = traj[j]
            tt = t0 + j * dt
            bx = int(math.floor((xx - dxlo) / dxw))
            ph = tt - math.floor(tt)
            bv = int(math.floor((ph - dvlo) / dvw))
            if 0 <= bx < dxn and 0 <= bv < dvn:
                dens[bx, bv] += 1
            kb = (j - j_cross) + rel_k0
            if 0 <= kb < rel_sum.shape[0]:
                rel_sum[kb, 0] += xx
                rel_sumsq[kb, 0] += xx * xx
                rel_cnt[kb] += 1
            kb = (j - j_mid) + rel_k0
            if 0 <= kb < sym_sum.shape[0]:
                sym_sum[kb, 0] += xx
                sym_sumsq[kb, 0] += xx * xx
                sym_cnt[kb] += 1
            pb = int(ph * nph)
            if pb >= nph:
                pb = nph - 1
            ph_sum[pb] += xx
            ph_sumsq[pb] += xx * xx
            ph_cnt[pb] += 1
    return tips


@njit(cache=True, nogil=True)
def _block_2d(
    i0,
    i1,
    seed,
    a,
    b,
    c,
    p,
    q,
    r,
    eta,
    tgt0,
    tgt1,
    tgt_r2,
    src0,
    src1,
    src_r2,
    sigma,
    dt,
    nsteps,
    t0,
    x00,
    x01,
    dens,
    dxlo,
    dxw,
    dxn,
    dvlo,
    dvw,
    dvn,
    rel_sum,
    rel_sumsq,
    rel_cnt,
    sym_sum,
    sym_sumsq,
    sym_cnt,
    rel_k0,
    tip_flags,
    tip_steps,
    cross_steps,
):
    sq = sigma * math.sqrt(dt)
    tx = np.empty(nsteps + 1)
    ty = np.empty(nsteps + 1)
    tips = 0
    h_seed = _sm64(seed)
    for i in range(i0, i1):
        h_traj = _sm64(h_seed ^ _sm64(np.uint64(i)))
        x = x00
        y = x01
        tx[0] = x
        ty[0] = y
        tip_k = -1
        last_exit = 0
        dx = x - src0
        dy = y - src1
        prev_inside = dx * dx + dy * dy < src_r2
        for k in range(nsteps):
            if x >= 0.0:
                fx = a * (x - 1.0) + b * (y - eta)
                fy = c * (x - 1.0) + (y - eta)
            else:
                fx = p * (x + 1.0) + q * (y + eta)
                fy = r * (x + 1.0) + (y + eta)
            h_step = _sm64(h_traj ^ _sm64(np.uint64(k)))
            n1 = _inverse_normal_cdf(
                _u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(0))))
            )
            n2 = _inverse_normal_cdf(
                _u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(1))))
            )
            x = x + fx * dt + sq * n1
            y = y + fy * dt + sq * n2
            tx[k + 1] = x
            ty[k + 1] = y
            dx = x - src0
            dy = y - src1
            inside = dx * dx + dy * dy < src_r2
            if prev_inside and not inside:
                last_exit = k + 1
            prev_inside = inside
            dx = x - tgt0
            dy = y - tgt1
            if dx * dx + dy * dy < tgt_r2:
                tip_k = k + 1
                break
        if tip_k < 0:
            continue
        tips += 1
        tip_flags[i] = 1
        tip_steps[i] = tip_k
        ref = tx[last_exit]
        j_cross = tip_k
        for j in range(last_exit, tip_k + 1):
            if tx[j] * ref <= 0.0:
                j_cross = j
                break
        j_last = j_cross
        for j in range(tip_k, last_exit - 1, -1):
            if tx[j] * ref > 0.0:
                j_last = j + 1
                break
        j_mid = (j_cross + j_last) // 2
        cross_steps[i] = j_cross
        for j in range(last_exit, tip_k + 1):
            xx = tx[j]
            yy = ty[j]
            bx = int(math.floor((xx - dxlo) / dxw))
            bv = int(math.floor((yy - dvlo) / dvw))
            if 0 <= bx < dxn and 0 <= bv < dvn:
                dens[bx, bv] += 1
            kb = (j - j_cross) + rel_k0
            if 0 <= kb < rel_sum.shape[0]:
                rel_sum[kb, 0] += xx
                rel_sum[kb, 1] += yy
                rel_sumsq[kb, 0] += xx * xx
                rel_sumsq[kb, 1] += yy * yy
                rel_cnt[kb] += 1
            kb = (j - j_mid) + rel_k0
            if 0 <= kb < sym_sum.shape[0]:
                sym_sum[kb, 0] += xx
                sym_sum[kb, 1] += yy
                sym_sumsq[kb, 0] += xx * xx
                sym_sumsq[kb, 1] += yy * yy
                sym_cnt[kb] += 1
    return tips


@njit(cache=True, nogil=True)
def _path_1d(seed, traj_index, field_kind, rp, rm, aa, forc_p, forc_m, sigma, dt, nsteps, x0, out):
    sq = sigma * math.sqrt(dt)
    h_seed = _sm64(seed)
    h_traj = _sm64(h_seed ^ _sm64(traj_index))
    x = x0
    out[0] = x
    for k in range(nsteps):
        if field_kind == 0:
            if x >= 0.0:
                f = -rp * (x - 1.0) + forc_p[k]
            else:
                f = -rm * (x - aa) + forc_m[k]
        else:
            f = x - x * x * x
        h_step = _sm64(h_traj ^ _sm64(np.uint64(k)))
        n1 = _inverse_normal_cdf(_u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(0)))))
        x = x + f * dt + sq * n1
        out[k + 1] = x


@njit(cache=True, nogil=True)
def _path_2d(seed, traj_index, a, b, c, p, q, r, eta, sigma, dt, nsteps, x00, x01, out):
    sq = sigma * math.sqrt(dt)
    h_seed = _sm64(seed)
    h_traj = _sm64(h_seed ^ _sm64(traj_index))
    x = x00
    y = x01
    out[0, 0] = x
    out[0, 1] = y
    for k in range(nsteps):
        if x >= 0.0:
            fx = a * (x - 1.0) + b * (y - eta)
            fy = c * (x - 1.0) + (y - eta)
        else:
            fx = p * (x + 1.0) + q * (y + eta)
            fy = r * (x + 1.0) + (y + eta)
        h_step = _sm64(h_traj ^ _sm64(np.uint64(k)))
        n1 = _inverse_normal_cdf(_u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(0)))))
        n2 = _inverse_normal_cdf(_u64_to_uniform(_sm64(h_step ^ _sm64(np.uint64(1)))))
        x = x + fx * dt + sq * n1
        y = y + fy * dt + sq * n2
        out[k + 1, 0] = x
        out[k + 1, 1] = y


# ---------------------------------------------------------------------------
# field dispatch helpers
# ---------------------------------------------------------------------------


def _forcing_tables(params: NonAutonomousParams1D, t0: float, dt: float, nsteps: int):
    """Per-step forcing and cycle tables for the scalar kernel."""
    t = t0 + dt * np.arange(nsteps + 1)
    forc_p = params.A_plus * np.cos(TWO_PI * t[:-1])
    forc_m = params.A_minus * np.cos(TWO_PI * (t[:-1] - params.p))
    dp = params.A_plus / (params.r_plus**2 + TWO_PI**2)
    dm = params.A_minus / (params.r_minus**2 + TWO_PI**2)
    hp = 1.0 + dp * (params.r_plus * np.cos(TWO_PI * t) + TWO_PI * np.sin(TWO_PI * t))
    sm = TWO_PI * (t - params.p)
    hm = params.a + dm * (params.r_minus * np.cos(sm) + TWO_PI * np.sin(sm))
    return forc_p, forc_m, hp, hm


def _default_tipping(fld):
    if isinstance(fld, NonAutonomousParams1D):
        return CycleTipping1D()
    if isinstance(fld, DoubleWellToy1D):
        return BallTipping1D()
    if isinstance(fld, PiecewiseLinearParams2D):
        return BallTipping2D(
            target_center=tuple(fld.x_minus), source_center=tuple(fld.x_plus)
        )
    raise TypeError("no default tipping rule for field %r" % (fld,))


def _default_x0(fld, tipping, t0):
    if isinstance(fld, NonAutonomousParams1D):
        _, _, _, hm = _forcing_tables(fld, t0, 1.0, 0)
        return float(hm[0])
    if isinstance(fld, DoubleWellToy1D):
        return float(tipping.source) if isinstance(tipping, BallTipping1D) else -1.0
    if isinstance(fld, PiecewiseLinearParams2D):
        return tuple(fld.x_plus)
    raise TypeError("no default initial state for field %r" % (fld,))


def _default_density_grid(fld):
    if isinstance(fld, NonAutonomousParams1D):
        return ((-1.2, 1.6, 140), (0.0, 1.0, 100))
    if isinstance(fld, DoubleWellToy1D):
        return ((-1.6, 1.6, 160), (0.0, 1.0, 1))
    if isinstance(fld, PiecewiseLinearParams2D):
        ylim = abs(fld.eta) + 1.6
        return ((-1.6, 1.6, 160), (-ylim, ylim, 160))
    raise TypeError("no default density grid for field %r" % (fld,))


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("PWS_MPP_THREADS", "")
        workers = int(env) if env.strip() else 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def em_trajectory(fld, config: EnsembleConfig, trajectory_index: int) -> DiscretePath:
    """Single Euler-Maruyama trajectory of the keyed stream.

    The field is one of the parameter families (compiled kernel) or any
    ``PiecewiseField`` / callable ``f(state, t) -> (dim,)`` (Python loop
    drawing from the identical streams).  The same ``trajectory_index``
    always reproduces the same path bit for bit, inside or outside an
    ensemble and for any worker count.

    Parameters
    ----------
    fld : field family, PiecewiseField, or callable
    config : EnsembleConfig
        Supplies sigma, dt, window, seed, and the initial state.
    trajectory_index : int
        Stream key of this trajectory, 0 <= index < 2**64.

    Returns
    -------
    DiscretePath
    """
    if not 0 <= int(trajectory_index) < 2**64:
        raise ValueError("trajectory_index must fit in 64 unsigned bits")
    nsteps = config.n_steps
    seed = np.uint64(config.master_seed)
    ti = np.uint64(trajectory_index)
    tipping = config.tipping
    if isinstance(fld, NonAutonomousParams1D):
        x0 = config.x0
        if x0 is None:
            x0 = _default_x0(fld, tipping, config.t0)
        forc_p, forc_m, _, _ = _forcing_tables(fld, config.t0, config.dt, nsteps)
        out = np.empty(nsteps + 1)
        _path_1d(
            seed, ti, 0, fld.r_plus, fld.r_minus, fld.a, forc_p, forc_m,
            config.sigma, config.dt, nsteps, float(np.asarray(x0).reshape(())), out,
        )
        states = out[:, None]
    elif isinstance(fld, DoubleWellToy1D):
        x0 = config.x0
        if x0 is None:
            x0 = _default_x0(fld, tipping if tipping is not None else BallTipping1D(), config.t0)
        dummy = np.zeros(max(nsteps, 1))
        out = np.empty(nsteps + 1)
        _path_1d(
            seed, ti, 1, 0.0, 0.0, 0.0, dummy, dummy,
            config.sigma, config.dt, nsteps, float(np.asarray(x0).reshape(())), out,
        )
        states = out[:, None]
    elif isinstance(fld, PiecewiseLinearParams2D):
        x0 = config.x0
        if x0 is None:
            x0 = _default_x0(fld, tipping, config.t0)
        x0 = np.asarray(x0, dtype=float)
        out = np.empty((nsteps + 1, 2))
        _path_2d(
            seed, ti, fld.a, fld.b, fld.c, fld.p, fld.q, fld.r, fld.eta,
            config.sigma, config.dt, nsteps, x0[0], x0[1], out,
        )
        states = out
    else:
        if isinstance(fld, PiecewiseField):
            dim = fld.dim
            fun = lambda state, t: fld.one_sided(state, t)
        elif callable(fld):
            if config.x0 is None:
                raise ValueError("callable fields need an explicit x0 in the config")
            dim = np.asarray(config.x0, dtype=float).reshape(-1).shape[0]
            fun = fld
        else:
            raise TypeError("unsupported field %r" % (fld,))
        if config.x0 is None:
            raise ValueError("generic fields need an explicit x0 in the config")
        x = np.asarray(config.x0, dtype=float).reshape(-1).copy()
        states = np.empty((nsteps + 1, dim))
        states[0] = x
        sq = config.sigma * math.sqrt(config.dt)
        for k in range(nsteps):
            t = config.t0 + k * config.dt
            f = np.asarray(fun(x, t), dtype=float).reshape(-1)
            for d in range(dim):
                n1 = _stream_normal(seed, ti, np.uint64(k), np.uint64(d))
                x[d] = x[d] + f[d] * config.dt + sq * n1
            states[k + 1] = x
    return DiscretePath(config.t0, config.t0 + nsteps * config.dt, states)


def tipping_time_1d(path: DiscretePath, params: NonAutonomousParams1D) -> float | None:
    """First sample time at which a scalar path exceeds the upper cycle.

    Returns None when the path never satisfies x(t) > h_plus(t).
    """
    if path.dim != 1:
        raise ValueError("tipping_time_1d expects a scalar path")
    h_plus, _ = stable_cycles_1d(params)
    x = path.states[:, 0]
    above = x > h_plus(path.times)
    idx = np.argmax(above)
    if not above[idx]:
        return None
    return float(path.times[idx])


def tipping_detect_2d(path: DiscretePath, target_center, radius: float = 0.1) -> float | None:
    """First sample time at which a planar path enters the target ball."""
    if path.dim != 2:
        raise ValueError("tipping_detect_2d expects a planar path")
    c = np.asarray(target_center, dtype=float)
    d2 = ((path.states - c[None, :]) ** 2).sum(axis=1)
    inside = d2 < radius * radius
    idx = np.argmax(inside)
    if not inside[idx]:
        return None
    return float(path.times[idx])


def run_ensemble(fld, config: EnsembleConfig, workers: int | None = None) -> TippingEnsemble:
    """Simulate N independent trajectories and collect tipping statistics.

    Trajectory indices are split into ``workers`` contiguous blocks; each
    block runs in a compiled kernel that releases the GIL, and block
    results are merged in block order.  Tip counts, per-trajectory tip
    steps, and density counts are integers, hence identical for every
    worker count; ``workers=1`` (the default when the PWS_MPP_THREADS
    environment variable is unset) is the canonical sequential reduction
    that fixes the floating-point mean accumulators bit for bit.

    Parameters
    ----------
    fld : NonAutonomousParams1D | DoubleWellToy1D | PiecewiseLinearParams2D
    config : EnsembleConfig
    workers : int, optional
        Number of concurrent blocks; defaults to PWS_MPP_THREADS or 1.

    Returns
    -------
    TippingEnsemble
    """
    workers = _resolve_workers(workers)
    n = config.n_trajectories
    nsteps = config.n_steps
    seed = np.uint64(config.master_seed)
    tipping = config.tipping if config.tipping is not None else _default_tipping(fld)
    grid = config.density_grid if config.density_grid is not None else _default_density_grid(fld)
    (dxlo, dxhi, dxn), (dvlo, dvhi, dvn) = grid
    dxn = int(dxn)
    dvn = int(dvn)
    if dxn < 1 or dvn < 1 or not dxhi > dxlo or not dvhi > dvlo:
        raise ValueError("density_grid axes must be increasing with >= 1 bins")
    dxw = (dxhi - dxlo) / dxn
    dvw = (dvhi - dvlo) / dvn
    relw = config.mean_bin_width if config.mean_bin_width is not None else config.dt
    if abs(relw / config.dt - round(relw / config.dt)) > 1e-9:
        raise ValueError("mean_bin_width must be an integer multiple of dt")
    rel_stride = int(round(relw / config.dt))
    # relative bins cover the full window on both sides of the crossing
    rel_k0 = nsteps
    rel_k = 2 * nsteps + 1

    x0 = config.x0 if config.x0 is not None else _default_x0(fld, tipping, config.t0)

    if isinstance(fld, PiecewiseLinearParams2D):
        if not isinstance(tipping, BallTipping2D):
            raise TypeError("planar fields need a BallTipping2D rule")
        dim = 2
        x0 = np.asarray(x0, dtype=float)

        def make_runner(i0, i1, acc):
            return lambda: _block_2d(
                i0, i1, seed,
                fld.a, fld.b, fld.c, fld.p, fld.q, fld.r, fld.eta,
                tipping.target_center[0], tipping.target_center[1],
                tipping.radius**2,
                tipping.source_center[0], tipping.source_center[1],
                tipping.source_radius**2,
                config.sigma, config.dt, nsteps, config.t0, x0[0], x0[1],
                acc["dens"], dxlo, dxw, dxn, dvlo, dvw, dvn,
                acc["rel_sum"], acc["rel_sumsq"], acc["rel_cnt"],
                acc["sym_sum"], acc["sym_sumsq"], acc["sym_cnt"], rel_k0,
                acc["tip_flags"], acc["tip_steps"], acc["cross_steps"],
            )

        has_phase = False
    elif isinstance(fld, (NonAutonomousParams1D, DoubleWellToy1D)):
        dim = 1
        x0 = float(np.asarray(x0).reshape(()))
        if isinstance(fld, NonAutonomousParams1D):
            if not isinstance(tipping, (CycleTipping1D, BallTipping1D)):
                raise TypeError("scalar forced fields need a 1-D tipping rule")
            forc_p, forc_m, hp_tab, hm_tab = _forcing_tables(
                fld, config.t0, config.dt, nsteps
            )
            field_kind = 0
            rp, rm, aa = fld.r_plus, fld.r_minus, fld.a
        else:
            if not isinstance(tipping, BallTipping1D):
                raise TypeError("the double-well toy needs a BallTipping1D rule")
            forc_p = np.zeros(max(nsteps, 1))
            forc_m = forc_p
            hp_tab = np.zeros(nsteps + 1)
            hm_tab = hp_tab
            field_kind = 1
            rp = rm = aa = 0.0
        if isinstance(tipping, CycleTipping1D):
            tip_kind = 0
            tgt = tgt_r = 0.0
            src = 0.0
            src_r = tipping.source_radius
        else:
            tip_kind = 1
            tgt = tipping.target
            tgt_r = tipping.radius
            src = tipping.source
            src_r = tipping.source_radius

        def make_runner(i0, i1, acc):
            return lambda: _block_1d(
                i0, i1, seed,
                field_kind, rp, rm, aa, forc_p, forc_m,
                tip_kind, hp_tab, hm_tab, tgt, tgt_r, src, src_r,
                config.sigma, config.dt, nsteps, config.t0, x0,
                acc["dens"], dxlo, dxw, dxn, dvlo, dvw, dvn,
                acc["rel_sum"], acc["rel_sumsq"], acc["rel_cnt"],
                acc["sym_sum"], acc["sym_sumsq"], acc["sym_cnt"], rel_k0,
                acc["ph_sum"], acc["ph_sumsq"], acc["ph_cnt"], config.phase_bins,
                acc["tip_flags"], acc["tip_steps"], acc["cross_steps"],
            )

        has_phase = True
    else:
        raise TypeError("run_ensemble supports the compiled field families only")

    tip_flags = np.zeros(n, dtype=np.uint8)
    tip_steps = np.full(n, -1, dtype=np.int64)
    cross_steps = np.full(n, -1, dtype=np.int64)

    def new_acc():
        acc = {
            "dens": np.zeros((dxn, dvn), dtype=np.int64),
            "rel_sum": np.zeros((rel_k, dim)),
            "rel_sumsq": np.zeros((rel_k, dim)),
            "rel_cnt": np.zeros(rel_k, dtype=np.int64),
            "sym_sum": np.zeros((rel_k, dim)),
            "sym_sumsq": np.zeros((rel_k, dim)),
            "sym_cnt": np.zeros(rel_k, dtype=np.int64),
            "tip_flags": tip_flags,
            "tip_steps": tip_steps,
            "cross_steps": cross_steps,
        }
        if has_phase:
            acc["ph_sum"] = np.zeros(config.phase_bins)
            acc["ph_sumsq"] = np.zeros(config.phase_bins)
            acc["ph_cnt"] = np.zeros(config.phase_bins, dtype=np.int64)
        return acc

    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    blocks = [(int(bounds[w]), int(bounds[w + 1])) for w in range(len(bounds) - 1)]
    accs = [new_acc() for _ in blocks]
    runners = [make_runner(i0, i1, acc) for (i0, i1), acc in zip(blocks, accs)]
    if len(runners) == 1:
        tip_counts = [runners[0]()]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=len(runners)) as pool:
            futures = [pool.submit(fn) for fn in runners]
            tip_counts = [f.result() for f in futures]

    # merge in block order: integer adds are order-free, float adds are
    # fixed by this order for a given worker count
    dens = np.zeros((dxn, dvn), dtype=np.int64)
    rel_sum = np.zeros((rel_k, dim))
    rel_sumsq = np.zeros((rel_k, dim))
    rel_cnt = np.zeros(rel_k, dtype=np.int64)
    sym_sum = np.zeros((rel_k, dim))
    sym_sumsq = np.zeros((rel_k, dim))
    sym_cnt = np.zeros(rel_k, dtype=np.int64)
    ph_sum = np.zeros(config.phase_bins) if has_phase else None
    ph_sumsq = np.zeros(config.phase_bins) if has_phase else None
    ph_cnt = np.zeros(config.phase_bins, dtype=np.int64) if has_phase else None
    for acc in accs:
        dens += acc["dens"]
        rel_sum += acc["rel_sum"]
        rel_sumsq += acc["rel_sumsq"]
        rel_cnt += acc["rel_cnt"]
        sym_sum += acc["sym_sum"]
        sym_sumsq += acc["sym_sumsq"]
        sym_cnt += acc["sym_cnt"]
        if has_phase:
            ph_sum += acc["ph_sum"]
            ph_sumsq += acc["ph_sumsq"]
            ph_cnt += acc["ph_cnt"]

    tip_count = int(sum(tip_counts))
    frac = tip_count / n
    se = math.sqrt(frac * (1.0 - frac) / n)
    total = int(dens.sum())
    density = dens / total if total > 0 else np.zeros_like(dens, dtype=float)
    edges = (
        dxlo + dxw * np.arange(dxn + 1),
        dvlo + dvw * np.arange(dvn + 1),
    )
    warning = None
    if tip_count == 0:
        warning = "no tipping events observed; statistics are empty"

    rel_times = (np.arange(rel_k) - rel_k0) * config.dt
    if rel_stride > 1:
        # coarsen the dt-resolution bins to the requested width
        nfull = (rel_k // rel_stride) * rel_stride
        shape = (nfull // rel_stride, rel_stride)
        rel_sum = rel_sum[:nfull].reshape(shape + (dim,)).sum(axis=1)
        rel_sumsq = rel_sumsq[:nfull].reshape(shape + (dim,)).sum(axis=1)
        rel_cnt = rel_cnt[:nfull].reshape(shape).sum(axis=1)
        sym_sum = sym_sum[:nfull].reshape(shape + (dim,)).sum(axis=1)
        sym_sumsq = sym_sumsq[:nfull].reshape(shape + (dim,)).sum(axis=1)
        sym_cnt = sym_cnt[:nfull].reshape(shape).sum(axis=1)
        rel_times = rel_times[:nfull].reshape(shape).mean(axis=1)

    phase_centers = (
        (np.arange(config.phase_bins) + 0.5) / config.phase_bins if has_phase else None
    )

    return TippingEnsemble(
        config=config,
        tipping=tipping,
        dim=dim,
        n=n,
        tip_count=tip_count,
        fraction=frac,
        standard_error=se,
        density=density,
        density_counts=dens,
        density_edges=edges,
        tip_flags=tip_flags,
        tip_steps=tip_steps,
        crossing_steps=cross_steps,
        rel_times=rel_times,
        rel_sum=rel_sum,
        rel_sumsq=rel_sumsq,
        rel_cnt=rel_cnt,
        sym_sum=sym_sum,
        sym_sumsq=sym_sumsq,
        sym_cnt=sym_cnt,
        phase_centers=phase_centers,
        phase_sum=ph_sum,
        phase_sumsq=ph_sumsq,
        phase_cnt=ph_cnt,
        warning=warning,
    )


def mean_transition_path(ensemble: TippingEnsemble, alignment: str = "auto"):
    """Per-bin mean of the transition segments of a tipping ensemble.

    ``alignment='crossing'`` bins segment samples by time relative to the
    first switching-plane crossing of each segment and returns the mean
    over the longest contiguous run of bins holding at least 10 samples.
    ``alignment='symmetric'`` aligns at the midpoint of the first and
    last crossings instead, which is the alignment invariant under time
    reversal (the first crossing of a reversed segment is the last
    crossing of the original, so only the midpoint preserves statistical
    symmetries of reversible fields).  ``alignment='phase'`` (scalar
    forced fields) bins by absolute time modulo the forcing period.
    ``'auto'`` picks phase alignment for cycle-crossing rules and
    crossing alignment otherwise.

    Parameters
    ----------
    ensemble : TippingEnsemble
    alignment : {'auto', 'crossing', 'symmetric', 'phase'}

    Returns
    -------
    DiscretePath
        Mean path on the uniform bin grid.

    Raises
    ------
    InsufficientDataError
        Fewer than 100 tipping events, or no bin reached 10 samples.
    """
    if ensemble.tip_count < 100:
        raise InsufficientDataError(
            "mean path needs >= 100 tipping events, got %d" % ensemble.tip_count
        )
    if alignment == "auto":
        alignment = "phase" if isinstance(ensemble.tipping, CycleTipping1D) else "crossing"
    if alignment == "crossing":
        cnt = ensemble.rel_cnt
        sums = ensemble.rel_sum
        times = ensemble.rel_times
    elif alignment == "symmetric":
        cnt = ensemble.sym_cnt
        sums = ensemble.sym_sum
        times = ensemble.rel_times
    elif alignment == "phase":
        if ensemble.phase_cnt is None:
            raise ValueError("phase alignment is only defined for scalar fields")
        cnt = ensemble.phase_cnt
        sums = ensemble.phase_sum[:, None]
        times = ensemble.phase_centers
    else:
        raise ValueError(
            "alignment must be 'auto', 'crossing', 'symmetric', or 'phase'"
        )
    good = cnt >= 10
    if not good.any():
        raise InsufficientDataError("no mean-path bin reached 10 samples")
    # longest contiguous run of well-populated bins
    best_s = best_e = -1
    s = None
    for i, g in enumerate(good):
        if g and s is None:
            s = i
        if (not g or i == len(good) - 1) and s is not None:
            e = i + 1 if g else i
            if e - s > best_e - best_s:
                best_s, best_e = s, e
            s = None
    states = sums[best_s:best_e] / cnt[best_s:best_e, None]
    return DiscretePath(float(times[best_s]), float(times[best_e - 1]), states)
