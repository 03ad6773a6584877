"""Second-moment quantities reduced to one-dimensional integrals.

All spatial Gaussian integrals are carried out in closed form and the inner
time integral is absorbed analytically, which leaves a single integral against
``j`` (or its primitive) for each quantity:

* ``sgg2_one``: the fluctuation kernel tested against constants,
  ``∫_0^t e^{-d^2/4s}/s · J(t-s) ds`` with ``J(w) = ∫_0^w j``;
* ``w_block_second_moment``: ``∫_0^T j(u) log(1 + (T-u)/τ) du``;
* ``z_block_smoothed_second_moment``: mean part plus
  ``∫_0^T j(u) [log(1+(T-u)/τ) + log(1+(T-u)/v)] / (τ+T-u+v) du`` (times
  ``t r^2 / 4π`` with ``t = τ+T`` and ``v = t r^2``).

Each 1d integral is split at the midpoint; the half containing the j
singularity subtracts the value at ``u = 0`` (whose j-mass is known exactly)
and integrates the remainder in ``log u``; the other half resolves the
``u -> T`` edge layer in ``log(T-u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernels import DEFAULT_SPEC, QuadratureSpec, Theta, _fixed_rule, _quad, _theta, jint

__all__ = [
    "BlockQuery",
    "sgg2_one",
    "sg2_one",
    "w_block_second_moment",
    "z_block_smoothed_second_moment",
    "fit_shape_constant",
]

_LOG_FLOOR = -700.0


@dataclass(frozen=True)
class BlockQuery:
    """Arguments of the block second moments.

    ``tau`` is the variance of the incoming heat density (``t_{i-1}``), ``T``
    the block length and ``r`` the optional terminal smoothing scale.
    """

    theta: float | Theta
    tau: float
    T: float
    r: float | None = None
    spec: QuadratureSpec = DEFAULT_SPEC

    def __post_init__(self):
        if not self.tau >= 0:
            raise DomainError("tau must be >= 0")
        if not self.T > 0:
            raise DomainError("T must be > 0")
        if self.r is not None and not self.r > 0:
            raise DomainError("r must be > 0")


def _F(kappa: float) -> float:
    """``t j^θ(t)`` as a function of ``kappa = -log t - θ``."""
    return float(_fixed_rule(np.array([kappa]), 1)[0])


def _j_against(theta: float, g, g0: float, g_tail, spec: QuadratureSpec) -> float:
    """``∫_0^1 j^θ(u) g(u) du`` for g smooth on (0, 1) with edge layers.

    ``g0`` is ``g(0)``; ``g(u) - g0`` must be supplied accurately by
    ``g(u)``-callers through ``g`` itself; ``g_tail(w)`` gives ``g(1 - w)``.
    """
    head = g0 * float(jint(theta, 0.5))

    def f1(x):
        return _F(-x - theta) * g(math.exp(x))

    def f2(x):
        w = math.exp(x)
        return _F(-math.log1p(-w) - theta) * w / (1.0 - w) * g_tail(w)

    a, _ = _quad(f1, _LOG_FLOOR, math.log(0.5), spec)
    b, _ = _quad(f2, _LOG_FLOOR, math.log(0.5), spec)
    return head + a + b


def sgg2_one(theta, t: float, x1, x2, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Fluctuation part of the two-point kernel applied to the constant 1.

    Equals ``∫∫_{0<s<s'<t} 4π j^θ(s'-s) hk(2s, x1-x2) ds ds'``.  At coincident
    points the ``ds/s`` singularity makes it infinite and ``inf`` is returned.

    Parameters
    ----------
    theta : float or Theta
    t : float
        Time in (0, 2].
    x1, x2 : array_like
        Points in the plane.
    """
    if not (0 < t <= 2):
        raise DomainError("t must lie in (0, 2]")
    theta = _theta(theta)
    d2 = float(np.sum((np.asarray(x1, float) - np.asarray(x2, float)) ** 2))
    if d2 == 0.0:
        return math.inf

    def near_zero(x):
        s = math.exp(x)
        return math.exp(-d2 / (4 * s)) * float(jint(theta, t - s))

    def near_t(x):
        w = math.exp(x)
        s = t - w
        return math.exp(-d2 / (4 * s)) / s * float(jint(theta, w)) * w

    lo = max(math.log(d2 / 3000.0), math.log(t) + _LOG_FLOOR)
    mid = math.log(t / 2)
    a = _quad(near_zero, lo, mid, spec)[0] if lo < mid else 0.0
    b, _ = _quad(near_t, math.log(t) + _LOG_FLOOR, mid, spec)
    return a + b


def sg2_one(theta, t: float, x1, x2, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Full two-point kernel applied to 1: ``1 + sgg2_one``."""
    return 1.0 + sgg2_one(theta, t, x1, x2, spec)


def w_block_second_moment(q: BlockQuery) -> float:
    """``E(hk(τ) ◁ W_{0,T} ▷ 1)^2 = ∫∫_{0<s<s'<T} j^θ(s'-s)/(τ+s) ds ds'``.

    Computed in units of ``T`` (``θ`` shifts by ``log T``).  Returns ``inf``
    when ``τ = 0``.
    """
    if q.tau == 0:
        return math.inf
    theta = _theta(q.theta) + math.log(q.T)
    tau = q.tau / q.T
    g0 = math.log1p(1.0 / tau)
    return _j_against(
        theta,
        lambda u: math.log1p(-u / (tau + 1.0)),
        g0,
        lambda w: math.log1p(w / tau),
        q.spec,
    )


def z_block_smoothed_second_moment(q: BlockQuery) -> float:
    """``t r^2 ∫ dy E(hk(τ) ◁ Z_{0,T} ▷ hk(t r^2, · - y))^2`` with ``t = τ + T``.

    Mean part ``t r^2 / (4π(t + v))`` plus the fluctuation part
    ``t r^2 ∫∫ j^θ(s'-s) / (4π (τ+s)(T-s'+v)) ds ds'`` where ``v = t r^2``.
    As ``r -> ∞`` the value tends to ``(1 + w_block_second_moment) / 4π``.
    """
    if q.r is None:
        raise DomainError("z_block_smoothed_second_moment needs r")
    if q.tau == 0:
        return math.inf
    t = q.tau + q.T
    v = t * q.r**2
    theta = _theta(q.theta) + math.log(q.T)
    tau, vv = q.tau / q.T, v / q.T

    def h_tail(w):
        return (math.log1p(w / tau) + math.log1p(w / vv)) / (tau + w + vv)

    h0 = h_tail(1.0)

    def h_head_minus_h0(u):
        return h_tail(1.0 - u) - h0

    fluct = _j_against(theta, h_head_minus_h0, h0, h_tail, q.spec) / q.T
    return t * q.r**2 / (4 * math.pi) * (1.0 / (t + v) + fluct)


def fit_shape_constant(values, shapes) -> float:
    """Smallest constant ``C`` with ``values <= C * shapes`` on the fitting set."""
    values, shapes = np.asarray(values, float), np.asarray(shapes, float)
    return float(np.max(values / shapes))
