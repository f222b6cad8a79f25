"""Mollification of piecewise-smooth fields by even kernels.

Two kernels are supported: the classical compactly supported bump

    zeta(x) = C exp(1/(x^2 - 1))   on |x| < 1,   zeta = 0 outside,

with C fixed by unit mass, and a standard Gaussian treated as compactly
supported on |x| <= 9 eps (the tail mass outside is below 1e-16 and is
ignored).  The scaled kernel is zeta_eps(x) = zeta(x/eps)/eps.

Mollifying a piecewise field F across {x = 0} gives

    F_eps(x, y, t) = int zeta_eps(u) F(x - u, y, t) du,

which splits into one-sided convolutions at u = x.  For fields linear in x
the convolution has closed forms in terms of the cumulative profile
Lambda(z) = 1/2 + int_0^z zeta and the first-moment profile
M(z) = int_{-1}^z v zeta(v) dv; both are precomputed once per process on a
dense grid and evaluated through cubic splines (checked against adaptive
quadrature in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import erf, ndtri

from .fields import (
    Drift,
    NonAutonomousParams1D,
    PiecewiseField,
    PiecewiseLinearParams2D,
)

SQRT_TWO = math.sqrt(2.0)
INV_SQRT_TWO_PI = 1.0 / math.sqrt(2.0 * math.pi)
GAUSSIAN_SUPPORT = 9.0

_VALID_KINDS = ("compact_bump", "gaussian")


class KernelError(ValueError):
    """Invalid kernel specification or unsupported kernel/field pairing."""


@dataclass(frozen=True)
class MollifierKernel:
    """Even smoothing kernel of width eps."""

    kind: str
    eps: float

    def __post_init__(self) -> None:
        if self.kind not in _VALID_KINDS:
            raise KernelError(f"kernel kind must be one of {_VALID_KINDS}")
        if not (self.eps > 0.0):
            raise KernelError(f"kernel width must be positive, got {self.eps}")

    @property
    def support_radius(self) -> float:
        if self.kind == "gaussian":
            return GAUSSIAN_SUPPORT * self.eps
        return self.eps


def _bump_unnormalized(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 / (ui * ui - 1.0))
    return out


@lru_cache(maxsize=1)
def _bump_tables() -> tuple[float, CubicSpline, CubicSpline, float]:
    """Normalization C, half-line splines for Lambda and M, half moment mu.

    The cumulative integral of the unnormalized bump is accumulated on
    [0, 1] with composite Gauss-Legendre panels; C is then chosen so that
    Lambda(0) = 1/2 holds exactly, which also pins total mass to 1 up to
    the quadrature error of the panels (~1e-15).
    """
    n_panels = 2048
    nodes, weights = np.polynomial.legendre.leggauss(12)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = _bump_unnormalized(pts)
    panel_mass = half * (vals @ weights)
    panel_moment = half * ((pts * vals) @ weights)

    cum_mass = np.concatenate(([0.0], np.cumsum(panel_mass)))
    cum_moment = np.concatenate(([0.0], np.cumsum(panel_moment)))
    half_mass = cum_mass[-1]
    norm = 0.5 / half_mass

    lam_half = 0.5 + norm * cum_mass
    mu = norm * cum_moment[-1]
    m_half = norm * cum_moment - mu

    lam_spline = CubicSpline(edges, lam_half)
    m_spline = CubicSpline(edges, m_half)
    return norm, lam_spline, m_spline, mu


def kernel_density(kernel: MollifierKernel, u) -> np.ndarray:
    """zeta_eps(u), vectorised."""
    u = np.asarray(u, dtype=float)
    z = u / kernel.eps
    if kernel.kind == "gaussian":
        dens = INV_SQRT_TWO_PI * np.exp(-0.5 * z * z)
        dens = np.where(np.abs(z) <= GAUSSIAN_SUPPORT, dens, 0.0)
    else:
        norm, _, _, _ = _bump_tables()
        dens = norm * _bump_unnormalized(z)
    return dens / kernel.eps


def lambda_profile(kernel: MollifierKernel, z) -> np.ndarray:
    """Cumulative profile Lambda(z) = 1/2 + int_0^z zeta(u) du of the unit kernel.

    Monotone from 0 to 1 with Lambda(-z) = 1 - Lambda(z).  For the compact
    bump the transition is completed on [-1, 1]; for the Gaussian the exact
    normal CDF is returned.
    """
    z = np.asarray(z, dtype=float)
    if kernel.kind == "gaussian":
        return 0.5 * (1.0 + erf(z / SQRT_TWO))
    _, lam_spline, _, _ = _bump_tables()
    w = np.minimum(np.abs(z), 1.0)
    half = lam_spline(w)
    out = np.where(z >= 0.0, half, 1.0 - half)
    if out.ndim == 0:
        return float(out)
    return out


def _unit_first_moment(z) -> np.ndarray:
    """M(z) = int_{-1}^{z} v zeta(v) dv for the unit bump kernel (even in z)."""
    _, _, m_spline, mu = _bump_tables()
    z = np.asarray(z, dtype=float)
    w = np.abs(z)
    out = np.where(w >= 1.0, 0.0, m_spline(np.minimum(w, 1.0)))
    if out.ndim == 0:
        return float(out)
    return out


def phi_moment(kernel: MollifierKernel, x1: float, x2: float) -> float:
    """First-moment integral Phi(x1, x2) = int_{x1}^{x2} u zeta_eps(u) du."""
    if x2 < x1:
        raise ValueError("phi_moment requires x1 <= x2")
    eps = kernel.eps
    if kernel.kind == "gaussian":
        # antiderivative of u zeta_eps(u) is -eps^2 zeta_eps(u)
        z1, z2 = x1 / eps, x2 / eps
        pdf = lambda z: INV_SQRT_TWO_PI * math.exp(-0.5 * min(z * z, 1400.0))
        return eps * (pdf(z1) - pdf(z2))
    return eps * float(_unit_first_moment(x2 / eps) - _unit_first_moment(x1 / eps))


def mollify(
    field: PiecewiseField, kernel: MollifierKernel, x: float, y, t: float
) -> np.ndarray:
    """Convolve the piecewise field with zeta_eps in the switching coordinate.

    Evaluates int zeta_eps(u) F(x - u, y, t) du componentwise with adaptive
    quadrature (absolute tolerance 1e-10), splitting the integral at u = x
    where the one-sided branch changes.  For |x| >= support radius the value
    depends on a single branch only; for fields linear in x it then equals
    that branch exactly because the kernel is even.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    radius = kernel.support_radius
    out = np.empty(field.dim)

    def branch_plus(u: float, i: int) -> float:
        return kernel_density(kernel, u) * float(
            np.atleast_1d(field.plus(x - u, y, t))[i]
        )

    def branch_minus(u: float, i: int) -> float:
        return kernel_density(kernel, u) * float(
            np.atleast_1d(field.minus(x - u, y, t))[i]
        )

    for i in range(field.dim):
        if x >= radius:
            val, _ = integrate.quad(
                branch_plus, -radius, radius, args=(i,), epsabs=1e-10, epsrel=1e-12, limit=200
            )
        elif x <= -radius:
            val, _ = integrate.quad(
                branch_minus, -radius, radius, args=(i,), epsabs=1e-10, epsrel=1e-12, limit=200
            )
        else:
            # F+ is sampled where x - u > 0, i.e. u < x
            val_plus, _ = integrate.quad(
                branch_plus, -radius, x, args=(i,), epsabs=5e-11, epsrel=1e-12, limit=200
            )
            val_minus, _ = integrate.quad(
                branch_minus, x, radius, args=(i,), epsabs=5e-11, epsrel=1e-12, limit=200
            )
            val = val_plus + val_minus
        out[i] = val
    return out


# ---------------------------------------------------------------------------
# closed forms for the two concrete families


def mollified_linear_2d(
    params: PiecewiseLinearParams2D, kernel: MollifierKernel, x, y
) -> np.ndarray:
    """Closed-form mollification of the planar piecewise-linear family.

    Requires the compact bump kernel.  With Lambda and the first-moment
    profile M of the unit kernel,

        f_eps = f+ Lambda(x/e) + f- (1 - Lambda(x/e)) + (p - a) e M(x/e)
        g_eps = g+ Lambda(x/e) + g- (1 - Lambda(x/e)) + (r - c) e M(x/e),

    which reduces to the one-sided fields for |x| >= e.
    """
    if kernel.kind != "compact_bump":
        raise KernelError("mollified_linear_2d requires the compact bump kernel")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = kernel.eps
    lam = lambda_profile(kernel, x / eps)
    moment = eps * _unit_first_moment(x / eps)
    f = (
        params.f_plus(x, y) * lam
        + params.f_minus(x, y) * (1.0 - lam)
        + (params.p - params.a) * moment
    )
    g = (
        params.g_plus(x, y) * lam
        + params.g_minus(x, y) * (1.0 - lam)
        + (params.r - params.c) * moment
    )
    return np.stack(np.broadcast_arrays(f, g), axis=-1)


def mollified_gaussian_1d(
    params: NonAutonomousParams1D, eps: float, x, t
) -> np.ndarray:
    """Closed-form Gaussian mollification of the forced scalar family.

        f_eps(x, t) = e (r_minus - r_plus)/sqrt(2 pi) exp(-x^2/(2 e^2))
                      + (f+(x,t) (1 + erf(x/(e sqrt 2)))
                         + f-(x,t) (1 - erf(x/(e sqrt 2)))) / 2.

    The first term is the first-moment correction e^2 (r_- - r_+) zeta_eps(x);
    it decays with the Gaussian factor away from the interface, so the value
    approaches the one-sided field as |x| grows.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    cdf = 0.5 * (1.0 + erf(x / (eps * SQRT_TWO)))
    bump = (
        eps
        * (params.r_minus - params.r_plus)
        * INV_SQRT_TWO_PI
        * np.exp(-0.5 * (x / eps) ** 2)
    )
    val = params.f_plus(x, t) * cdf + params.f_minus(x, t) * (1.0 - cdf) + bump
    if val.ndim == 0:
        return float(val)
    return val


# ---------------------------------------------------------------------------
# Drift adapters


class MollifiedLinearDrift2D(Drift):
    """Smooth drift for the mollified planar family (compact bump kernel).

    Jacobian entries are closed forms; in particular

        d f_eps / dx = a Lambda + p (1 - Lambda) + zeta_eps(x) (f+ - f-)(0, y)

    and the moment term contributes nothing beyond the jump because the
    field is linear in x.
    """

    dim = 2

    def __init__(self, params: PiecewiseLinearParams2D, kernel: MollifierKernel):
        if kernel.kind != "compact_bump":
            raise KernelError("MollifiedLinearDrift2D requires the compact bump kernel")
        self.params = params
        self.kernel = kernel

    def value(self, state, t=0.0):
        state = np.asarray(state, dtype=float)
        return mollified_linear_2d(
            self.params, self.kernel, state[..., 0], state[..., 1]
        )

    def jacobian(self, state, t=0.0):
        state = np.asarray(state, dtype=float)
        x = state[..., 0]
        y = state[..., 1]
        P = self.params
        lam = lambda_profile(self.kernel, x / self.kernel.eps)
        dens = kernel_density(self.kernel, x)
        jump_f = P.f_plus(0.0, y) - P.f_minus(0.0, y)
        jump_g = P.g_plus(0.0, y) - P.g_minus(0.0, y)
        out = np.empty(state.shape[:-1] + (2, 2))
        out[..., 0, 0] = P.a * lam + P.p * (1.0 - lam) + dens * jump_f
        out[..., 0, 1] = P.b * lam + P.q * (1.0 - lam)
        out[..., 1, 0] = P.c * lam + P.r * (1.0 - lam) + dens * jump_g
        out[..., 1, 1] = 1.0
        return out

    def time_derivative(self, state, t=0.0):
        state = np.asarray(state, dtype=float)
        return np.zeros(state.shape)


class MollifiedGaussianDrift1D(Drift):
    """Smooth drift for the Gaussian-mollified forced scalar family."""

    dim = 1

    def __init__(self, params: NonAutonomousParams1D, eps: float):
        if not eps > 0.0:
            raise KernelError("eps must be positive")
        self.params = params
        self.eps = eps

    def value(self, state, t):
        state = np.asarray(state, dtype=float)
        x = state[..., 0]
        val = mollified_gaussian_1d(self.params, self.eps, x, t)
        return np.asarray(val)[..., None] if np.ndim(val) else np.array([val])

    def jacobian(self, state, t):
        state = np.asarray(state, dtype=float)
        x = state[..., 0]
        t = np.asarray(t, dtype=float)
        P = self.params
        eps = self.eps
        cdf = 0.5 * (1.0 + erf(x / (eps * SQRT_TWO)))
        dens = INV_SQRT_TWO_PI * np.exp(-0.5 * (x / eps) ** 2) / eps
        jump = P.f_plus(0.0, t) - P.f_minus(0.0, t)
        dfdx = -P.r_plus * cdf - P.r_minus * (1.0 - cdf) + dens * jump
        return np.asarray(dfdx)[..., None, None]

    def time_derivative(self, state, t):
        state = np.asarray(state, dtype=float)
        x = state[..., 0]
        t = np.asarray(t, dtype=float)
        cdf = 0.5 * (1.0 + erf(x / (self.eps * SQRT_TWO)))
        dft = self.params.df_plus_dt(t) * cdf + self.params.df_minus_dt(t) * (
            1.0 - cdf
        )
        return np.asarray(dft)[..., None]


class QuadratureMollifiedDrift(Drift):
    """Pointwise-quadrature mollified drift for arbitrary piecewise fields.

    Slow (adaptive quadrature per sample); intended for oracles and
    small-scale cross-checks, not inner loops.
    """

    def __init__(self, field: PiecewiseField, kernel: MollifierKernel):
        self.field = field
        self.kernel = kernel
        self.dim = field.dim

    def value(self, state, t):
        state = np.asarray(state, dtype=float)
        if state.ndim == 1:
            return mollify(self.field, self.kernel, state[0], state[1:], float(t))
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), state.shape[:-1])
        flat_state = state.reshape(-1, state.shape[-1])
        flat_t = np.asarray(t_arr, dtype=float).reshape(-1)
        vals = np.stack(
            [
                mollify(self.field, self.kernel, s[0], s[1:], tt)
                for s, tt in zip(flat_state, flat_t)
            ]
        )
        return vals.reshape(state.shape)


def lambda_inverse(kernel: MollifierKernel, lam: float) -> float:
    """Unit-kernel coordinate z with Lambda(z) = lam.

    Boundary weights map to the edge of the (effective) support.  Used by
    the recovery construction that embeds a manifold-pinned path into the
    mollified band at x = eps*z.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam!r}")
    radius = kernel.support_radius / kernel.eps
    if kernel.kind == "gaussian":
        z = float(ndtri(min(max(lam, 1e-300), 1.0 - 1e-16)))
        return min(max(z, -radius), radius)
    if lam <= 0.0:
        return -1.0
    if lam >= 1.0:
        return 1.0
    return float(brentq(lambda z: float(lambda_profile(kernel, z)) - lam, -1.0, 1.0))


def as_drift(field, kernel: MollifierKernel | None = None) -> Drift:
    """Smooth drift evaluator for (field, kernel), closed form when known.

    Drift instances pass through; the planar linear family with the
    compact bump and the forced scalar family with the Gaussian use their
    closed forms; every other pairing falls back to pointwise quadrature.
    """
    if isinstance(field, Drift):
        return field
    if kernel is None:
        raise KernelError("a kernel is required unless a Drift instance is passed")
    if isinstance(field, PiecewiseLinearParams2D) and kernel.kind == "compact_bump":
        return MollifiedLinearDrift2D(field, kernel)
    if isinstance(field, NonAutonomousParams1D) and kernel.kind == "gaussian":
        return MollifiedGaussianDrift1D(field, kernel.eps)
    if not isinstance(field, PiecewiseField):
        field = field.as_field()
    return QuadratureMollifiedDrift(field, kernel)
