"""Scalar kernels: the 2d heat kernel, the pair kernel, the log-correlation
function, the exponential block grid, and the j-function with its integral.

The j-function is

    j^θ(t) = ∫_0^∞ t^(a-1) e^(θ a) / Γ(a) da,

which depends on (θ, t) only through κ = -log t - θ:  j^θ(t) = F(κ) / t with
F(κ) = ∫_0^∞ e^(-a κ) / Γ(a) da.  Its integral from 0 to t is
G(κ) = ∫_0^∞ e^(-a κ) / Γ(a + 1) da, obtained by integrating t^(a-1) in t
under the a-integral.

Two evaluators are provided.  ``j_theta`` and ``j_integral`` are adaptive and
strict about their domain.  ``jfn`` and ``jint`` are vectorized fixed-rule
versions valid for every t > 0, used inside multidimensional quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError, NumericError

__all__ = [
    "Theta",
    "QuadratureSpec",
    "TimeGrid",
    "heat_kernel",
    "pair_kernel",
    "log_corr",
    "j_theta",
    "j_theta_with_error",
    "j_integral",
    "jfn",
    "jint",
    "j_contour",
    "j_laplace",
    "j_sandwich_ratio",
    "time_grid",
    "grid_from_blocks",
]


@dataclass(frozen=True)
class Theta:
    """Coupling constant with its admissible band ``|value| <= c0``."""

    value: float
    c0: float = math.inf

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"theta must be finite, got {self.value}")
        if self.c0 < 0 or abs(self.value) > self.c0:
            raise DomainError(f"|theta|={abs(self.value)} exceeds c0={self.c0}")

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature and the seed for Monte Carlo fallbacks."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ConfigError("max_subdivisions must be >= 1")


DEFAULT_SPEC = QuadratureSpec()


def _theta(theta) -> float:
    return float(theta.value if isinstance(theta, Theta) else theta)


# ---------------------------------------------------------------------------
# Gaussian kernels


def heat_kernel(t, x):
    """Two-dimensional heat kernel ``exp(-|x|^2 / 2t) / (2 pi t)``.

    Parameters
    ----------
    t : float or array_like
        Variance parameter, strictly positive.
    x : array_like
        Point(s) in the plane; the last axis has length 2.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("heat kernel requires t > 0")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    out = np.exp(-r2 / (2.0 * t)) / (2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


def pair_kernel(t, x1, x2):
    """``exp(-|x1 - x2|^2 / 4t)``, equal to ``4 pi t * ∫ hk(t, x1-y) hk(t, x2-y) dy``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("pair kernel requires t > 0")
    d = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    out = np.exp(-np.sum(d * d, axis=-1) / (4.0 * t))
    return float(out) if out.ndim == 0 else out


def log_corr(x1, x2) -> float:
    """``log(max(1/|x1 - x2|, 1))``; returns ``inf`` at coincident points."""
    d = math.dist(tuple(np.ravel(x1)), tuple(np.ravel(x2)))
    if d == 0.0:
        return math.inf
    return max(-math.log(d), 0.0)


# ---------------------------------------------------------------------------
# j-function: adaptive evaluators


def _a_cutoff(kappa: float, log_floor: float) -> float:
    """Upper a-limit beyond which ``a e^{-a kappa}/Gamma(a+1)`` is below ``e^log_floor``
    relative to its peak (Stirling-driven search)."""

    def logf(a):
        return math.log(a) - a * kappa - math.lgamma(a + 1.0)

    peak = max(math.exp(-kappa), 1.0)
    ref = logf(peak)
    a = 2.0 * peak + 8.0
    while logf(a) - ref > log_floor:
        a *= 1.5
    return a


def _quad(f, a, b, spec: QuadratureSpec, points=None):
    val, err, *rest = integrate.quad(
        f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions,
        points=points, full_output=1,
    )
    # QUADPACK appends a message to the output only when it flags a problem
    ier = len(rest) > 1
    tol = max(spec.abs_tol, spec.rel_tol * abs(val))
    if ier and err > 10 * tol:
        raise NumericError("adaptive quadrature did not converge", err)
    return val, err


def _F_adaptive(kappa: float, spec: QuadratureSpec) -> tuple[float, float]:
    if kappa >= 1.0:
        # a = x / kappa;  F = kappa^-2 ∫ x e^{-x} / Gamma(1 + x/kappa) dx
        def f(x):
            return x * math.exp(-x) * special.rgamma(1.0 + x / kappa)

        val, err = _quad(f, 0.0, 80.0, spec, points=[1.0, 5.0])
        return val / kappa**2, err / kappa**2

    def g(a):
        if a == 0.0:
            return 0.0
        return math.exp(math.log(a) - a * kappa - math.lgamma(a + 1.0))

    upper = _a_cutoff(kappa, math.log(spec.abs_tol) - 10.0)
    return _quad(g, 0.0, upper, spec)


def _G_adaptive(kappa: float, spec: QuadratureSpec) -> tuple[float, float]:
    if kappa >= 1.0:
        def f(x):
            return math.exp(-x) * special.rgamma(1.0 + x / kappa)

        val, err = _quad(f, 0.0, 80.0, spec, points=[1.0, 5.0])
        return val / kappa, err / kappa

    def g(a):
        return math.exp(-a * kappa - math.lgamma(a + 1.0))

    upper = _a_cutoff(kappa, math.log(spec.abs_tol) - 10.0)
    return _quad(g, 0.0, upper, spec)


def _check_unit_time(t) -> float:
    t = float(t)
    if not (0.0 < t <= 1.0):
        raise DomainError(f"t must lie in (0, 1], got {t}")
    return t


def j_theta(theta, t, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Evaluate ``j^θ(t)`` by adaptive quadrature of its a-integral.

    Parameters
    ----------
    theta : float or Theta
    t : float
        Time in (0, 1].
    spec : QuadratureSpec, optional

    Returns
    -------
    float
        Strictly positive value.

    Raises
    ------
    DomainError
        If ``t`` is outside (0, 1].
    NumericError
        If the quadrature does not reach the requested tolerance.
    """
    t = _check_unit_time(t)
    kappa = -math.log(t) - _theta(theta)
    val, err = _F_adaptive(kappa, spec)
    if not val > 0:
        raise NumericError("non-positive j value", err)
    return val / t


def j_theta_with_error(theta, t, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, float]:
    """``j^θ(t)`` together with the absolute error estimate of the quadrature."""
    t = _check_unit_time(t)
    kappa = -math.log(t) - _theta(theta)
    val, err = _F_adaptive(kappa, spec)
    if not val > 0:
        raise NumericError("non-positive j value", err)
    return val / t, err / t


def j_integral(theta, t, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``∫_0^t j^θ(s) ds`` for t in (0, 1].

    The s-integral is carried out in closed form under the a-integral, which
    leaves a smooth, rapidly decaying integrand in a.
    """
    t = _check_unit_time(t)
    kappa = -math.log(t) - _theta(theta)
    val, _ = _G_adaptive(kappa, spec)
    return val


# ---------------------------------------------------------------------------
# j-function: vectorized fixed rules

_KAPPA_SPLIT = 2.0
_KAPPA_MIN = -4.0


@lru_cache(maxsize=None)
def _laguerre(n: int, alpha: float):
    x, w = special.roots_genlaguerre(n, alpha)
    return x, w


@lru_cache(maxsize=None)
def _legendre01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _small_kappa(kappa: np.ndarray, power: int) -> np.ndarray:
    """``∫_0^A a^power e^{-a kappa} / Gamma(a+1) da`` by a single high-order
    Gauss-Legendre panel; ``A`` adapts to the location of the peak."""
    out = np.empty_like(kappa)
    pos = kappa >= 0
    if np.any(pos):
        out[pos] = _panel(kappa[pos], power, 96, 36.0)
    if np.any(~pos):
        out[~pos] = _panel(kappa[~pos], power, 400, 40.0)
    return out


def _panel(kappa, power, n, base):
    z, w = _legendre01(n)
    upper = base + 6.0 * np.exp(-kappa)
    a = upper[:, None] * z[None, :]
    logf = -a * kappa[:, None] - special.gammaln(a + 1.0)
    if power:
        logf = logf + power * np.log(a)
    return upper * (np.exp(logf) @ w)


@lru_cache(maxsize=None)
def _tables(power: int):
    """Cubic-spline tables of the fixed rules: ``log F`` on ``[-4, 2]`` and
    ``kappa^(power+1) F`` against ``1/kappa`` on ``(0, 1/2]``."""
    from scipy.interpolate import CubicSpline

    k = np.linspace(_KAPPA_MIN, _KAPPA_SPLIT, 4001)
    low = CubicSpline(k, np.log(_fixed_rule(k, power, tabulate=False)))
    x = np.linspace(0.0, 1.0 / _KAPPA_SPLIT, 4001)
    vals = np.empty_like(x)
    vals[0] = 1.0
    vals[1:] = _fixed_rule(1.0 / x[1:], power, tabulate=False) * (1.0 / x[1:]) ** (power + 1)
    high = CubicSpline(x, vals)
    return low, high


_TABLE_MIN_SIZE = 4096


def _fixed_rule(kappa, power: int, tabulate: bool = True):
    kappa = np.asarray(kappa, dtype=float)
    if tabulate and kappa.size >= _TABLE_MIN_SIZE and np.all(kappa >= _KAPPA_MIN):
        low, high = _tables(power)
        flat = kappa.ravel()
        out = np.empty_like(flat)
        big = flat >= _KAPPA_SPLIT
        out[big] = high(1.0 / flat[big]) / flat[big] ** (power + 1)
        out[~big] = np.exp(low(flat[~big]))
        return out.reshape(kappa.shape)
    flat = kappa.ravel()
    out = np.empty_like(flat)
    big = flat >= _KAPPA_SPLIT
    if np.any(big):
        kb = flat[big]
        x, w = _laguerre(64, float(power))
        vals = special.rgamma(1.0 + x[None, :] / kb[:, None]) @ w
        out[big] = vals / kb ** (power + 1)
    mid = (~big) & (flat >= _KAPPA_MIN)
    if np.any(mid):
        out[mid] = _small_kappa(flat[mid], power)
    low = flat < _KAPPA_MIN
    if np.any(low):
        fn = _F_adaptive if power else _G_adaptive
        out[low] = [fn(float(k), DEFAULT_SPEC)[0] for k in flat[low]]
    return out.reshape(kappa.shape)


def jfn(theta, t):
    """Vectorized ``j^θ(t)`` for any ``t > 0`` (fixed Gauss rules)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("j requires t > 0")
    out = _fixed_rule(-np.log(t) - _theta(theta), 1) / t
    return float(out) if out.ndim == 0 else out


def jint(theta, t):
    """Vectorized ``∫_0^t j^θ(s) ds`` for any ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("j integral requires t >= 0")
    pos = t > 0
    out = np.zeros_like(t)
    if np.any(pos):
        out[pos] = _fixed_rule(-np.log(t[pos]) - _theta(theta), 0)
    return float(out) if out.ndim == 0 else out


def j_sandwich_ratio(theta, t) -> float:
    """``j^θ(t) · t · ((log t + θ)_-^2 + 1)``, which tends to 1 as t -> 0."""
    kappa = max(-math.log(t) - _theta(theta), 0.0)
    return float(jfn(theta, t)) * t * (kappa * kappa + 1.0)


def j_contour(theta, t, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-15)) -> float:
    """Independent evaluation of ``j^θ(t)`` from the inverse Laplace transform.

    The Laplace transform of j is ``1/(log p - θ)``; deforming the Bromwich
    contour around the negative real axis leaves the residue at ``p = e^θ`` and
    a branch-cut integral:

        j^θ(t) = exp(θ + t e^θ) + ∫_0^∞ e^{-x t} / ((log x - θ)^2 + π^2) dx.

    The cut integral is computed with ``x = e^v``.
    """
    theta = _theta(theta)
    if t <= 0:
        raise DomainError("t must be positive")

    def f(v):
        return math.exp(v - t * math.exp(v)) / ((v - theta) ** 2 + math.pi**2)

    split = -math.log(t)
    left, _ = _quad(f, -math.inf, split, spec)
    right, _ = _quad(f, split, split + 8.0, spec)
    return math.exp(theta + t * math.exp(theta)) + left + right


def j_laplace(theta, p: float, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-14)) -> float:
    """Numerical Laplace transform ``∫_0^∞ e^{-p t} j^θ(t) dt`` for ``p > e^θ``.

    Integrates in ``v = log t``.  Near ``t = 0`` the integrand decays only like
    ``1/v^2``; QUADPACK's infinite-interval transform absorbs that tail.
    """
    theta = _theta(theta)
    if p <= math.exp(theta):
        raise DomainError("Laplace transform requires p > e^theta")

    def f(v):
        t = math.exp(v)
        return math.exp(-p * t) * float(_fixed_rule(np.array([-v - theta]), 1)[0])

    vmax = math.log(60.0 / (p - math.exp(theta)) + 1.0)
    left, _ = _quad(f, -math.inf, -3.0, spec)
    right, _ = _quad(f, -3.0, vmax, spec)
    return left + right


# ---------------------------------------------------------------------------
# exponential block grid


@dataclass(frozen=True)
class TimeGrid:
    """Block times ``t_i = ε^2 b^{-2i}`` for ``i = 0..N``.

    ``times`` holds ``t_0 .. t_{N-1}`` (all at most 1); ``t(i)`` also serves
    ``i = N``, where ``t_N = (ε/b^N)^2 <= 1``.
    """

    epsilon: float
    b: float
    N: int
    ell: int
    times: tuple = field(repr=False)

    def t(self, i: int) -> float:
        if i < 0 or i > self.N:
            raise DomainError(f"block index {i} outside [0, {self.N}]")
        if i < len(self.times):
            return self.times[i]
        return self.times[-1] * self.b**-2 if self.times else self.epsilon**2

    @property
    def log_b_inv(self) -> float:
        return -math.log(self.b)

    def log_t_inv(self, i: int) -> float:
        """``log t_i^{-1} = 2 log b^{-1} (log ε^{-1}/log b^{-1} - i)``."""
        return 2.0 * self.log_b_inv * (-math.log(self.epsilon) / self.log_b_inv - i)


def time_grid(epsilon: float, b: float, ell: int = 1) -> TimeGrid:
    """Build the exponential block grid.

    ``N = floor(log ε^{-1} / log b^{-1})`` with a relative guard of 1e-9 so
    that exact powers such as ``ε = b^3`` are not lost to round-off.
    """
    if not (0.0 < b <= 0.5):
        raise DomainError(f"b must lie in (0, 1/2], got {b}")
    if not (0.0 < epsilon <= 0.5):
        raise DomainError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    ratio = math.log(epsilon) / math.log(b)
    N = int(math.floor(ratio * (1.0 + 1e-9)))
    if N < 1:
        raise ConfigError(f"epsilon={epsilon} and b={b} give no blocks")
    if not (1 <= ell <= N):
        raise ConfigError(f"ell={ell} must lie in [1, N={N}]")
    times = [epsilon**2]
    for _ in range(1, N):
        times.append(times[-1] * b**-2)
    return TimeGrid(float(epsilon), float(b), N, int(ell), tuple(times))


def grid_from_blocks(b: float, N: int, ell: int = 1) -> TimeGrid:
    """Grid with exactly ``N`` blocks, taking ``ε = b^N``."""
    return time_grid(b**N, b, ell)
