"""Singular-drift SDE simulation and its Bessel-type scaling limits.

Library layout:

- :mod:`bessellimit.specialfn` -- modified Bessel I_nu, log-gamma, noncentral
  chi-squared sampling.
- :mod:`bessellimit.model` -- the drift model, its rescaling, and the
  natural-scale integrals.
- :mod:`bessellimit.analytic` -- case classification, scale functions, exit
  probabilities, transition densities, mixture weight, occupation BVP.
- :mod:`bessellimit.sampler` -- tamed Euler paths for the prelimit SDE, exact
  squared-Bessel transitions, limit-process samplers, parallel Monte Carlo.
- :mod:`bessellimit.stats` -- empirical CDFs, Kolmogorov-Smirnov tests,
  Wilson intervals.
- :mod:`bessellimit.cli` -- experiment runner (classify / simulate / compare /
  exitprob / occupation).
"""

from .model import Model, PerturbationSpec, ScaledModel

__all__ = ["Model", "PerturbationSpec", "ScaledModel"]
__version__ = "0.1.0"
