"""Drift model a(x) = atilde(x) + cbar(x)/x and its derived integrals.

The bounded perturbation ``atilde`` is piecewise constant with compact
support, so its antiderivative and the factor A(y) = exp(-2 int_0^y atilde)
are exact closed forms. The singular part cbar(x)/x switches on outside
[-1, 1] with strengths c_plus (x > 1) and c_minus (x < -1).

The natural-scale integral phi(x) = int_0^x exp(-2 int_0^y a) dy is exact on
[-1, 1], quadrature-backed across the remaining perturbation support, and
closed-form (power or log) in the tails where the integrand is
A(+-inf) |y|^(-2c). phi diverges at +-inf unless c > 1/2 there; divergence
is reported as an infinite value, not an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import integrate

__all__ = [
    "PerturbationSpec",
    "Model",
    "ScaledModel",
    "drift_eval",
    "scaled_drift_eval",
    "A_eval",
    "A_limit",
    "phi_eval",
    "phi_n_eval",
    "phi_transform",
]


@dataclass(frozen=True)
class PerturbationSpec:
    """Piecewise-constant compactly supported perturbation.

    ``atilde = values[i]`` on ``[breakpoints[i], breakpoints[i+1])`` and 0
    outside ``[breakpoints[0], breakpoints[-1]]``. Empty breakpoints mean
    ``atilde == 0``.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) == 0:
            if len(vals) != 0:
                raise ValueError("atilde.values must be empty when atilde.breakpoints is empty")
            return
        if len(bp) < 2:
            raise ValueError("atilde.breakpoints needs at least two entries")
        if len(vals) != len(bp) - 1:
            raise ValueError(
                f"atilde.values must have length {len(bp) - 1} "
                f"(one per interval), got {len(vals)}"
            )
        if any(not math.isfinite(b) for b in bp) or any(not math.isfinite(v) for v in vals):
            raise ValueError("atilde.breakpoints and atilde.values must be finite")
        if any(b1 <= b0 for b0, b1 in zip(bp[:-1], bp[1:])):
            raise ValueError("atilde.breakpoints must be strictly increasing")

    def __call__(self, x: float) -> float:
        bp = self.breakpoints
        if not bp or x < bp[0] or x >= bp[-1]:
            return 0.0
        i = int(np.searchsorted(bp, x, side="right")) - 1
        return self.values[i]

    def values_at(self, x: np.ndarray) -> np.ndarray:
        """Vectorized atilde(x)."""
        bp = self.breakpoints
        if not bp:
            return np.zeros_like(x, dtype=float)
        padded = np.concatenate(([0.0], self.values, [0.0]))
        idx = np.searchsorted(bp, x, side="right")
        return padded[idx]

    def integral(self) -> float:
        """int_R atilde(z) dz, exact."""
        return sum(v * (b1 - b0) for v, b0, b1 in
                   zip(self.values, self.breakpoints[:-1], self.breakpoints[1:]))

    def l1_norm(self) -> float:
        return sum(abs(v) * (b1 - b0) for v, b0, b1 in
                   zip(self.values, self.breakpoints[:-1], self.breakpoints[1:]))

    def cumint(self, y: float) -> float:
        """int_0^y atilde(z) dz, exact (signed for y < 0)."""
        if y == 0.0:
            return 0.0
        lo, hi, sign = (0.0, y, 1.0) if y > 0.0 else (y, 0.0, -1.0)
        total = 0.0
        for v, b0, b1 in zip(self.values, self.breakpoints[:-1], self.breakpoints[1:]):
            seg = min(hi, b1) - max(lo, b0)
            if seg > 0.0:
                total += v * seg
        return sign * total


@dataclass(frozen=True)
class Model:
    """Drift specification a(x) = atilde(x) + cbar(x)/x with start point x0."""

    perturbation: PerturbationSpec
    c_minus: float
    c_plus: float
    x0: float

    def __post_init__(self):
        object.__setattr__(self, "c_minus", float(self.c_minus))
        object.__setattr__(self, "c_plus", float(self.c_plus))
        object.__setattr__(self, "x0", float(self.x0))
        if not self.c_minus > -0.5:
            raise ValueError(f"c_minus must be > -0.5, got {self.c_minus}")
        if not self.c_plus > -0.5:
            raise ValueError(f"c_plus must be > -0.5, got {self.c_plus}")
        if not math.isfinite(self.x0):
            raise ValueError(f"x0 must be finite, got {self.x0}")

    def support_radius_pos(self) -> float:
        """Right edge beyond which the drift is exactly c_plus/x."""
        bp = self.perturbation.breakpoints
        return max(1.0, bp[-1]) if bp else 1.0

    def support_radius_neg(self) -> float:
        """Left edge (negative) beyond which the drift is exactly c_minus/x."""
        bp = self.perturbation.breakpoints
        return min(-1.0, bp[0]) if bp else -1.0


@dataclass(frozen=True)
class ScaledModel:
    """The model under the scaling a_n(x) = n a(n x)."""

    model: Model
    n: float

    def __post_init__(self):
        object.__setattr__(self, "n", float(self.n))
        if not self.n >= 1.0:
            raise ValueError(f"scaling index must satisfy n >= 1, got {self.n}")


def _cbar(model: Model, x: float) -> float:
    if x > 1.0:
        return model.c_plus
    if x < -1.0:
        return model.c_minus
    return 0.0


def drift_eval(model: Model, x: float) -> float:
    """a(x) = atilde(x) + cbar(x)/x. Bounded on [-1, 1] where cbar vanishes."""
    c = _cbar(model, x)
    return model.perturbation(x) + (c / x if c != 0.0 else 0.0)


def scaled_drift_eval(scaled: ScaledModel, x: float) -> float:
    """n a(n x)."""
    return scaled.n * drift_eval(scaled.model, scaled.n * x)


def scaled_drift_array(scaled: ScaledModel, x: np.ndarray) -> np.ndarray:
    """Vectorized n a(n x) for the path engines."""
    m = scaled.model
    nx = scaled.n * x
    out = scaled.n * m.perturbation.values_at(nx)
    inv = np.divide(1.0, x, out=np.zeros_like(x), where=x != 0.0)
    out += np.where(nx > 1.0, m.c_plus, 0.0) * inv
    out += np.where(nx < -1.0, m.c_minus, 0.0) * inv
    return out


def A_eval(model: Model, y: float) -> float:
    """A(y) = exp(-2 int_0^y atilde(z) dz), exact."""
    return math.exp(-2.0 * model.perturbation.cumint(y))


def A_limit(model: Model, sign: int) -> float:
    """A(+inf) for sign > 0, A(-inf) for sign < 0."""
    p = model.perturbation
    if not p.breakpoints:
        return 1.0
    y = p.breakpoints[-1] if sign > 0 else p.breakpoints[0]
    return A_eval(model, y)


def _exp_linear_integral(c0: float, v: float, lo: float, hi: float) -> float:
    """int_lo^hi exp(-2 (c0 + v (y - lo))) dy, exact."""
    amp = math.exp(-2.0 * c0)
    if v == 0.0:
        return amp * (hi - lo)
    return amp * -math.expm1(-2.0 * v * (hi - lo)) / (2.0 * v)


def _integral_of_A(model: Model, lo: float, hi: float) -> float:
    """int_lo^hi A(y) dy, exact over the piecewise-exponential pieces."""
    if hi <= lo:
        return 0.0
    p = model.perturbation
    cuts = sorted({lo, hi, *(b for b in p.breakpoints if lo < b < hi)})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += _exp_linear_integral(p.cumint(a), p((a + b) / 2.0), a, b)
    return total


def _power_tail_integral(c: float, lo: float, hi: float) -> float:
    """int_lo^hi y^(-2c) dy for 1 <= lo <= hi (hi may be inf)."""
    if hi == lo:
        return 0.0
    if c == 0.5:
        if math.isinf(hi):
            return math.inf
        return math.log(hi / lo)
    m = 1.0 - 2.0 * c
    if math.isinf(hi):
        return math.inf if m > 0.0 else -(lo ** m) / m
    return (hi ** m - lo ** m) / m


@lru_cache(maxsize=256)
def _phi_half(model: Model, positive: bool) -> tuple[float, float, float]:
    """Fixed ingredients of phi on one half-line.

    Returns (phi at 1, phi increment from 1 to the support edge R, R).
    For the negative half these are magnitudes along -y.
    """
    p = model.perturbation
    if positive:
        R = model.support_radius_pos()
        core = _integral_of_A(model, 0.0, 1.0)
        c = model.c_plus
        if R > 1.0:
            mid, _ = integrate(
                lambda y: math.exp(-2.0 * p.cumint(y)) * y ** (-2.0 * c),
                1.0, R, breakpoints=p.breakpoints, tol=1e-12)
        else:
            mid = 0.0
        return core, mid, R
    R = -model.support_radius_neg()
    core = _integral_of_A(model, -1.0, 0.0)
    c = model.c_minus
    if R > 1.0:
        mid, _ = integrate(
            lambda y: math.exp(-2.0 * p.cumint(-y)) * y ** (-2.0 * c),
            1.0, R, breakpoints=[-b for b in p.breakpoints], tol=1e-12)
    else:
        mid = 0.0
    return core, mid, R


def phi_eval(model: Model, x: float) -> float:
    """phi(x) = int_0^x exp(-2 int_0^y a(z) dz) dy.

    Strictly increasing; phi(0) = 0. For x = +-inf the finite limit exists
    only when the matching c is > 1/2, otherwise +-inf is returned.
    """
    if x == 0.0:
        return 0.0
    positive = x > 0.0
    p = model.perturbation
    if positive:
        if x <= 1.0:
            return _integral_of_A(model, 0.0, x)
        core, mid, R = _phi_half(model, True)
        c = model.c_plus
        if x <= R:
            val, _ = integrate(
                lambda y: math.exp(-2.0 * p.cumint(y)) * y ** (-2.0 * c),
                1.0, x, breakpoints=p.breakpoints, tol=1e-12)
            return core + val
        tail = A_limit(model, +1) * _power_tail_integral(c, R, x)
        return core + mid + tail
    ax = -x
    if ax <= 1.0:
        return -_integral_of_A(model, x, 0.0)
    core, mid, R = _phi_half(model, False)
    c = model.c_minus
    if ax <= R:
        val, _ = integrate(
            lambda y: math.exp(-2.0 * p.cumint(-y)) * y ** (-2.0 * c),
            1.0, ax, breakpoints=[-b for b in p.breakpoints], tol=1e-12)
        return -(core + val)
    tail = A_limit(model, -1) * _power_tail_integral(c, R, ax)
    return -(core + mid + tail)


def phi_n_eval(scaled: ScaledModel, x: float) -> float:
    """phi_n(x) = phi(n x) / n."""
    if math.isinf(x):
        return phi_eval(scaled.model, x)
    return phi_eval(scaled.model, scaled.n * x) / scaled.n


def phi_transform(scaled: ScaledModel, x: float) -> float:
    """Phi_n(x) = int_0^x A(n y) dy = (1/n) int_0^{n x} A(u) du, exact.

    Strictly increasing bijection of the real line with Phi_n(0) = 0.
    """
    n = scaled.n
    if x >= 0.0:
        return _integral_of_A(scaled.model, 0.0, n * x) / n
    return -_integral_of_A(scaled.model, n * x, 0.0) / n
