"""Block log-sum statistics and normality diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import DomainError, PreconditionError

__all__ = [
    "CltStatistic",
    "standardize_log_sums",
    "synthetic_block_logs",
    "synthetic_clt",
    "normality_diagnostics",
]


@dataclass(frozen=True)
class CltStatistic:
    """Standardized block log-sums.

    Attributes
    ----------
    sigma2 : float
        ``loglog ε^{-1}`` (or its analog).
    alpha_eps : float
        Centering correction; 0 unless fitted.
    samples : ndarray
        ``(Σ log z_i + (1 + f̂)/2 · sigma2) / √((1 + f̂) sigma2)``.
    f_hat : float
        ``Σ_i Var̂(log z_i) / sigma2 - 1``.
    """

    sigma2: float
    alpha_eps: float
    samples: np.ndarray
    f_hat: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")


def standardize_log_sums(logs, sigma2: float) -> dict:
    """Center and scale per-replica sums of block logs.

    Parameters
    ----------
    logs : array_like, shape (replicas, blocks)
        ``log(hk_{i-1} ◁ Z_i ▷ 1)`` per replica and block.
    sigma2 : float
        ``loglog ε^{-1}``.

    Returns
    -------
    dict
        ``center`` (``½ Σ Var̂``), ``f_hat``, ``h_prime`` (scaled by
        ``√sigma2``), ``standardized`` (scaled by ``√(Σ Var̂)``) and the
        ``CltStatistic`` under ``statistic``.
    """
    logs = np.asarray(logs, dtype=float)
    if logs.ndim != 2 or logs.shape[0] < 2:
        raise PreconditionError("need a (replicas, blocks) array with at least two replicas")
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    total_var = float(np.sum(logs.var(axis=0, ddof=1)))
    center = 0.5 * total_var
    sums = logs.sum(axis=1)
    f_hat = total_var / sigma2 - 1.0
    standardized = (sums + center) / math.sqrt(total_var) if total_var > 0 else np.zeros_like(sums)
    return {
        "center": center,
        "f_hat": f_hat,
        "h_prime": (sums + center) / math.sqrt(sigma2),
        "standardized": standardized,
        "statistic": CltStatistic(sigma2, 0.0, standardized, f_hat),
    }


def synthetic_block_logs(N: int, replicas: int, seed: int = 0, ell: int = 1, family: str = "lognormal"):
    """Independent block values with ``Var(z_i) = 1/(N - i)``, ``i = 1..N-ell``.

    ``family="lognormal"`` gives ``z_i = exp(s_i G - s_i²/2)`` with
    ``s_i² = log(1 + 1/(N-i))``; ``family="gamma"`` gives mean-one gamma
    variables with shape ``N - i``.  Returns the logs.
    """
    if not 1 <= ell < N:
        raise DomainError("need 1 <= ell < N")
    rng = np.random.default_rng(seed)
    k = N - np.arange(1, N - ell + 1)
    if family == "lognormal":
        s2 = np.log1p(1.0 / k)
        g = rng.standard_normal((replicas, len(k)))
        return np.sqrt(s2) * g - s2 / 2
    if family == "gamma":
        return np.log(rng.gamma(k, 1.0 / k, size=(replicas, len(k))))
    raise DomainError(f"unknown family {family!r}")


def synthetic_clt(N: int = 200, replicas: int = 10_000, seed: int = 0, ell: int = 1, family: str = "lognormal"):
    """Standardized block log-sums of synthetic blocks and their KS distance to N(0, 1).

    ``sigma2`` is ``Σ 1/(N - i)``, the total variance of the profile.
    """
    logs = synthetic_block_logs(N, replicas, seed, ell, family)
    sigma2 = float(np.sum(1.0 / (N - np.arange(1, N - ell + 1))))
    res = standardize_log_sums(logs, sigma2)
    res["diagnostics"] = normality_diagnostics(res["standardized"])
    return res


def _anderson_darling(x: np.ndarray) -> float:
    """A² of the sample against the standard normal (no parameter estimation)."""
    n = len(x)
    u = np.clip(stats.norm.cdf(np.sort(x)), 1e-300, 1 - 1e-16)
    i = np.arange(1, n + 1)
    return float(-n - np.mean((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))))


def normality_diagnostics(samples, standardize: bool = False, qq_points: int = 101) -> dict:
    """KS and Anderson-Darling statistics against N(0, 1), moments and a QQ series.

    Parameters
    ----------
    samples : array_like
        At least 100 values.
    standardize : bool
        Subtract the sample mean and divide by the sample standard deviation first.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < 100:
        raise PreconditionError("need at least 100 samples")
    if standardize:
        sd = x.std(ddof=1)
        x = (x - x.mean()) / sd if sd > 0 else x - x.mean()
    ks = stats.kstest(x, "norm")
    p = (np.arange(qq_points) + 0.5) / qq_points
    return {
        "ks": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ad": _anderson_darling(x),
        "skewness": float(stats.skew(x)),
        "excess_kurtosis": float(stats.kurtosis(x)),
        "qq": (stats.norm.ppf(p), np.quantile(x, p)),
    }
