"""Fixed quadrature rules shared by the time integrals of several modules.

Time integrals in this package carry a j-weight ``j^θ(s' - s)`` over pairs
``t_lo < s < s' < t_hi``.  The rules here turn such a pair into nodes given by
gap variables (``delta = s - t_lo``, ``u = s' - s``, ``delta' = t_hi - s'``).
Gaps are kept separately so that differences of nearby times never suffer
cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import jfn, jint

__all__ = ["tanh_sinh_unit", "j_gauss_rule", "BlockRule", "block_rule", "gauss_legendre"]


@lru_cache(maxsize=None)
def tanh_sinh_unit(h: float = 0.2, log_floor: float = 32.0):
    """Tanh-sinh nodes on (0, 1).

    Returns ``(xi, one_minus_xi, weights)``.  Both ``xi`` and ``1 - xi`` are
    computed directly so that nodes near either end keep full relative accuracy.
    Nodes stop once ``min(xi, 1 - xi)`` falls below ``exp(-log_floor)``.
    """
    x_max = math.asinh(log_floor / math.pi)
    k = np.arange(-int(x_max / h), int(x_max / h) + 1)
    x = k * h
    s = math.pi * np.sinh(x)
    xi = 1.0 / (1.0 + np.exp(-s))
    xi_c = 1.0 / (1.0 + np.exp(s))
    w = h * 0.25 * math.pi * np.cosh(x) / np.cosh(0.5 * s) ** 2
    return xi, xi_c, w


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=4096)
def _j_gauss_unit(theta: float, K: int):
    """Gauss rule for the measure ``j^θ(z) dz`` on (0, 1).

    The measure is discretized with a lumped atom carrying ``∫_0^{z0} j`` at
    ``z0 = 1e-40`` plus Gauss-Legendre nodes in ``log z``; recurrence
    coefficients come from the discretized Stieltjes (Lanczos) procedure and
    nodes from the Golub-Welsch eigenproblem.
    """
    z0 = 1e-40
    y, wy = gauss_legendre(800)
    lz = math.log(z0) * (1.0 - y)
    z = np.exp(lz)
    wz = wy * (-math.log(z0)) * z * jfn(theta, z)
    nodes = np.concatenate([[z0], z])
    weights = np.concatenate([[jint(theta, z0)], wz])
    mu0 = weights.sum()
    alpha = np.zeros(K)
    beta = np.zeros(K)
    q_prev = np.zeros_like(nodes)
    q = np.full_like(nodes, 1.0 / math.sqrt(mu0))
    basis = [q]
    for k in range(K):
        alpha[k] = np.sum(weights * nodes * q * q)
        r = (nodes - alpha[k]) * q - (beta[k] * q_prev if k else 0.0)
        for b in basis:  # full reorthogonalization keeps the recurrence clean
            r = r - np.sum(weights * r * b) * b
        if k + 1 < K:
            beta[k + 1] = math.sqrt(np.sum(weights * r * r))
            q_prev, q = q, r / beta[k + 1]
            basis.append(q)
    J = np.diag(alpha) + np.diag(beta[1:], 1) + np.diag(beta[1:], -1)
    ev, vec = np.linalg.eigh(J)
    return ev, mu0 * vec[0] ** 2


def j_gauss_rule(theta: float, U: float, K: int):
    """Nodes ``u`` and weights for ``∫_0^U j^θ(u) g(u) du`` (weights include j).

    Uses the scaling ``j^θ(U z) U = j^{θ + log U}(z)``.
    """
    z, w = _j_gauss_unit(float(theta) + math.log(U), int(K))
    return U * z, w.copy()


@dataclass(frozen=True)
class BlockRule:
    """Nodes for ``∫∫_{lo<s<s'<hi} j^θ(s'-s) F(s, s') ds ds'``.

    Attributes hold ``delta = s - lo``, ``u = s' - s``, ``deltap = hi - s'``
    and weights that already include ``j^θ(u)`` and the Jacobian.
    """

    delta: np.ndarray
    u: np.ndarray
    deltap: np.ndarray
    weight: np.ndarray

    def __len__(self) -> int:
        return self.weight.size


def block_rule(theta: float, T: float, K_u: int = 12, h: float = 0.25) -> BlockRule:
    """Product rule on the pair simplex of a block of length ``T``.

    The pair is written as ``u = s' - s`` and a split ``xi`` of the remaining
    length ``T - u`` into ``delta = xi (T-u)`` and ``delta' = (1-xi)(T-u)``.
    For ``u <= T/2`` a j-weighted Gauss rule is used in ``u``; for ``u > T/2``
    a tanh-sinh rule in ``T - u`` resolves the corner where both gaps vanish.
    ``xi`` always uses tanh-sinh, which clusters at both ends.
    """
    xi, xi_c, wxi = tanh_sinh_unit(h)
    ua, wa = j_gauss_rule(theta, 0.5 * T, K_u)
    ya, yc, wy = tanh_sinh_unit(h)
    wb_len = 0.5 * T * ya
    ub = T - wb_len
    wb = 0.5 * T * wy * jfn(theta, ub)
    rest = np.concatenate([T - ua, wb_len])
    u = np.concatenate([ua, ub])
    wu = np.concatenate([wa, wb])
    delta = np.outer(rest, xi).ravel()
    deltap = np.outer(rest, xi_c).ravel()
    weight = np.outer(wu * rest, wxi).ravel()
    uu = np.repeat(u, xi.size)
    return BlockRule(delta, uu, deltap, weight)
