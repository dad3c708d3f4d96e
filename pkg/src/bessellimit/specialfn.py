"""Special functions and elementary samplers.

Evaluation of the modified Bessel function I_nu for real order nu > -1,
log-gamma, and exact noncentral chi-squared sampling. These back the
transition-density formulas and the exact squared-Bessel transition.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "bessel_i",
    "bessel_i_scaled",
    "log_gamma",
    "sample_noncentral_chisq",
]


def _check_order(nu: float) -> None:
    if not nu > -1.0:
        raise ValueError(f"Bessel order must satisfy nu > -1, got nu={nu}")


def bessel_i(nu: float, x: float) -> float:
    """Modified Bessel function of the first kind I_nu(x), nu > -1, x >= 0.

    Overflows to ``inf`` for x beyond roughly 700; use :func:`bessel_i_scaled`
    there.
    """
    _check_order(nu)
    if x < 0.0:
        raise ValueError(f"bessel_i requires x >= 0, got x={x}")
    if x == 0.0:
        if nu == 0.0:
            return 1.0
        if nu > 0.0:
            return 0.0
        return math.inf
    return float(_sp.iv(nu, x))


def bessel_i_scaled(nu: float, x: float) -> float:
    """Exponentially scaled companion: e^{-x} I_nu(x). Safe for large x."""
    _check_order(nu)
    if x < 0.0:
        raise ValueError(f"bessel_i_scaled requires x >= 0, got x={x}")
    if x == 0.0:
        return bessel_i(nu, 0.0)
    return float(_sp.ive(nu, x))


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got x={x}")
    return math.lgamma(x)


def sample_noncentral_chisq(delta: float, lam: float, rng: np.random.Generator) -> float:
    """One draw from the noncentral chi-squared law chi'^2(delta, lam).

    Realized as Gamma(shape = delta/2 + Poisson(lam/2), scale = 2); the
    Poisson mixing term is dropped when the noncentrality vanishes.
    """
    if not delta > 0.0:
        raise ValueError(f"degrees of freedom must be positive, got delta={delta}")
    if lam < 0.0:
        raise ValueError(f"noncentrality must be nonnegative, got lambda={lam}")
    shape = 0.5 * delta
    if lam > 0.0:
        shape = shape + rng.poisson(0.5 * lam)
    return 2.0 * float(rng.standard_gamma(shape))
