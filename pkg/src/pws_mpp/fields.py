"""Piecewise-smooth vector fields split by the hyperplane x = 0.

A field is given by two smooth one-sided evaluators F+ and F- on the
half-spaces S+ = {x > 0} and S- = {x < 0}.  The first state coordinate is
always the switching coordinate; the remaining n-1 coordinates are grouped
into the vector y.  Two concrete families cover the case studies: a planar
piecewise-linear family with mirrored equilibria, and a scalar periodically
forced family with two stable cycles.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


class FieldDimensionError(ValueError):
    """State passed to a field does not match its dimension."""


@dataclass(frozen=True)
class PiecewiseField:
    """Piecewise-smooth drift with switching manifold {x = 0}.

    Parameters
    ----------
    dim : int
        State dimension n >= 1.
    plus, minus : callable
        One-sided evaluators with signature ``(x, y, t) -> ndarray (n,)``
        where ``x`` is the switching coordinate and ``y`` the remaining
        n-1 coordinates.  Each must be smooth on its closed half-space.
    time_dependent : bool
        Whether the evaluators actually depend on t.
    """

    dim: int
    plus: Callable[[float, np.ndarray, float], np.ndarray]
    minus: Callable[[float, np.ndarray, float], np.ndarray]
    time_dependent: bool = False

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise FieldDimensionError(f"dim must be >= 1, got {self.dim}")

    def split_state(self, state: np.ndarray) -> tuple[float, np.ndarray]:
        state = np.asarray(state, dtype=float)
        if state.shape != (self.dim,):
            raise FieldDimensionError(
                f"state shape {state.shape} does not match dim {self.dim}"
            )
        return float(state[0]), state[1:]

    def one_sided(self, state: np.ndarray, t: float) -> np.ndarray:
        """Evaluate the field on the side selected by sign(x); x = 0 uses F+."""
        x, y = self.split_state(state)
        if x >= 0.0:
            return np.asarray(self.plus(x, y, t), dtype=float)
        return np.asarray(self.minus(x, y, t), dtype=float)


@dataclass(frozen=True)
class PiecewiseLinearParams2D:
    """Planar piecewise-linear family with equilibria at (1, eta), (-1, -eta).

        F+(x, y) = (a (x-1) + b (y-eta),  c (x-1) + (y-eta))   on S+
        F-(x, y) = (p (x+1) + q (y+eta),  r (x+1) + (y+eta))   on S-
    """

    a: float
    b: float
    c: float
    p: float
    q: float
    r: float
    eta: float

    # -- one-sided components, vectorised over numpy inputs ----------------
    def f_plus(self, x, y):
        return self.a * (x - 1.0) + self.b * (y - self.eta)

    def g_plus(self, x, y):
        return self.c * (x - 1.0) + (y - self.eta)

    def f_minus(self, x, y):
        return self.p * (x + 1.0) + self.q * (y + self.eta)

    def g_minus(self, x, y):
        return self.r * (x + 1.0) + (y + self.eta)

    @property
    def x_plus(self) -> np.ndarray:
        return np.array([1.0, self.eta])

    @property
    def x_minus(self) -> np.ndarray:
        return np.array([-1.0, -self.eta])

    def jacobian_plus(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, 1.0]])

    def jacobian_minus(self) -> np.ndarray:
        return np.array([[self.p, self.q], [self.r, 1.0]])

    def as_field(self) -> PiecewiseField:
        def plus(x: float, y: np.ndarray, t: float) -> np.ndarray:
            return np.array([self.f_plus(x, y[0]), self.g_plus(x, y[0])])

        def minus(x: float, y: np.ndarray, t: float) -> np.ndarray:
            return np.array([self.f_minus(x, y[0]), self.g_minus(x, y[0])])

        return PiecewiseField(dim=2, plus=plus, minus=minus, time_dependent=False)

    @property
    def symmetric(self) -> bool:
        """True when the field has the (x, y) -> (-x, -y) mirror symmetry."""
        return self.a == self.p and self.b == self.q and self.c == self.r


@dataclass(frozen=True)
class NonAutonomousParams1D:
    """Scalar periodically forced family with period-1 cosine forcing.

        f+(x, t) = -r_plus (x - 1) + A_plus cos(2 pi t)          on S+
        f-(x, t) = -r_minus (x - a) + A_minus cos(2 pi (t - p))  on S-

    ``a < 0`` is the left rest point offset and ``p`` the forcing phase lag.
    """

    r_plus: float
    r_minus: float
    A_plus: float
    A_minus: float
    p: float
    a: float

    def __post_init__(self) -> None:
        if self.r_plus <= 0.0 or self.r_minus <= 0.0:
            raise ValueError("decay rates r_plus, r_minus must be positive")
        if self.a >= 0.0:
            raise ValueError("left offset a must be negative")

    def f_plus(self, x, t):
        return -self.r_plus * (x - 1.0) + self.A_plus * np.cos(TWO_PI * t)

    def f_minus(self, x, t):
        return -self.r_minus * (x - self.a) + self.A_minus * np.cos(
            TWO_PI * (t - self.p)
        )

    def df_plus_dt(self, t):
        return -TWO_PI * self.A_plus * np.sin(TWO_PI * t)

    def df_minus_dt(self, t):
        return -TWO_PI * self.A_minus * np.sin(TWO_PI * (t - self.p))

    @property
    def limit_cycle_condition(self) -> bool:
        """Forcing weak enough that each one-sided cycle stays in its region."""
        lam_plus = math.hypot(self.r_plus, TWO_PI)
        lam_minus = math.hypot(self.r_minus, TWO_PI)
        return (self.A_plus < lam_plus) and (self.A_minus < -self.a * lam_minus)

    def as_field(self) -> PiecewiseField:
        def plus(x: float, y: np.ndarray, t: float) -> np.ndarray:
            return np.array([self.f_plus(x, t)])

        def minus(x: float, y: np.ndarray, t: float) -> np.ndarray:
            return np.array([self.f_minus(x, t)])

        return PiecewiseField(dim=1, plus=plus, minus=minus, time_dependent=True)


class Drift:
    """Smooth drift interface used by action evaluation and path solvers.

    Subclasses provide ``value``; ``jacobian`` and ``time_derivative`` fall
    back to central finite differences with step 1e-6 * max(1, |arg|).
    All three accept a state array of shape (..., n) with matching t of
    shape (...) or scalar, and return arrays shaped like the input.
    """

    dim: int = 1

    def value(self, state: np.ndarray, t) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, state: np.ndarray, t) -> np.ndarray:
        """d F_i / d x_j, shape (..., n, n)."""
        state = np.asarray(state, dtype=float)
        n = self.dim
        out = np.empty(state.shape[:-1] + (n, n))
        for j in range(n):
            h = 1e-6 * np.maximum(1.0, np.abs(state[..., j]))
            e = np.zeros_like(state)
            e[..., j] = h
            diff = self.value(state + e, t) - self.value(state - e, t)
            out[..., :, j] = diff / (2.0 * h)[..., None]
        return out

    def time_derivative(self, state: np.ndarray, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(t_arr))
        fp = self.value(state, t_arr + h)
        fm = self.value(state, t_arr - h)
        denom = 2.0 * h
        if t_arr.ndim:
            denom = denom[..., None]
        return (fp - fm) / denom


class CallableDrift(Drift):
    """Wrap a plain callable ``f(state, t) -> (..., n)`` as a Drift."""

    def __init__(self, f, dim: int, jac=None, f_t=None):
        self._f = f
        self.dim = dim
        self._jac = jac
        self._f_t = f_t

    def value(self, state, t):
        return np.asarray(self._f(np.asarray(state, dtype=float), t), dtype=float)

    def jacobian(self, state, t):
        if self._jac is not None:
            return np.asarray(self._jac(np.asarray(state, dtype=float), t), dtype=float)
        return super().jacobian(state, t)

    def time_derivative(self, state, t):
        if self._f_t is not None:
            return np.asarray(self._f_t(np.asarray(state, dtype=float), t), dtype=float)
        return super().time_derivative(state, t)


def replace(params, **changes):
    """dataclasses.replace passthrough, re-exported for configuration code."""
    return dataclasses.replace(params, **changes)
