"""Confidence bands for the averaged field and the fraction of samples outside them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, PreconditionError

__all__ = ["BetaBands", "beta_bands", "band_fraction", "in_band_via_log"]


@dataclass(frozen=True)
class BetaBands:
    """Exponents ``β ≤ β'`` and the log-scale interval ``I_ε``.

    ``(log ε^{-1})^{-β'} ≤ Z ≤ (log ε^{-1})^{-β}`` holds iff
    ``log Z + (1 + α_ε)/2 · loglog ε^{-1}`` lies in ``interval``.
    """

    epsilon: float
    alpha_eps: float
    log_inv_epsilon: float
    loglog: float
    beta: float
    beta_prime: float
    interval: tuple

    @property
    def z_band(self) -> tuple:
        L = self.log_inv_epsilon
        return L ** (-self.beta_prime), L ** (-self.beta)


def beta_bands(epsilon: float | None = None, alpha_eps: float = 0.0, *,
               log_inv_epsilon: float | None = None) -> BetaBands:
    """``β = (1+α)/2 - L^{-1/3}``, ``β' = (1+α)/2 + L^{-1/3}`` and
    ``I = [-L^{2/3}, L^{2/3}]`` with ``L = loglog ε^{-1}``.

    Parameters
    ----------
    epsilon : float, optional
    alpha_eps : float
    log_inv_epsilon : float, optional
        ``log ε^{-1}`` given directly, for ``ε`` below the double range
        (e.g. ``ε = e^{-e^8}``).  Exactly one of the two must be given.

    Raises
    ------
    DomainError
        If ``ε ≥ 1/e`` (then ``L`` is undefined or not positive).
    """
    if (epsilon is None) == (log_inv_epsilon is None):
        raise DomainError("give exactly one of epsilon and log_inv_epsilon")
    if log_inv_epsilon is None:
        if not 0 < epsilon < math.exp(-1):
            raise DomainError("epsilon must lie in (0, 1/e)")
        log_inv_epsilon = -math.log(epsilon)
    else:
        epsilon = math.exp(-log_inv_epsilon)
    if not log_inv_epsilon > 1:
        raise DomainError("loglog(1/epsilon) must be positive")
    L = math.log(log_inv_epsilon)
    half = (1.0 + alpha_eps) / 2
    w = L ** (-1.0 / 3.0)
    return BetaBands(epsilon, alpha_eps, log_inv_epsilon, L, half - w, half + w, (-(L ** (2.0 / 3.0)), L ** (2.0 / 3.0)))


def band_fraction(z_samples, epsilon: float, alpha_eps: float = 0.0, band: tuple | None = None) -> float:
    """Fraction of samples outside ``[(log ε^{-1})^{-β'}, (log ε^{-1})^{-β}]``.

    ``band`` overrides the Z-band (e.g. ``(0, inf)`` to switch it off).
    """
    z = np.asarray(z_samples, dtype=float)
    if z.size < 200:
        raise PreconditionError("need at least 200 samples")
    lo, hi = band if band is not None else beta_bands(epsilon, alpha_eps).z_band
    return float(np.mean((z < lo) | (z > hi)))


def in_band_via_log(z_samples, bands: BetaBands) -> np.ndarray:
    """Band membership evaluated on the log scale through ``I_ε``."""
    h = np.log(np.asarray(z_samples, dtype=float)) + (1.0 + bands.alpha_eps) / 2 * bands.loglog
    a, b = bands.interval
    return (h >= a) & (h <= b)
