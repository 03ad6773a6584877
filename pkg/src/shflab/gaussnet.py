"""Exact integration of products of isotropic 2d Gaussian factors.

A network has vertices (internal or external), edges ``hk(t_e, v_i - v_j)`` and
anchors ``hk(t_a, v_i - m)``.  Integrating out internal vertices is done per
coordinate (the two coordinates decouple and are identical) by star-mesh
elimination on conductances ``c = 1/t``: removing a vertex ``p`` with total
conductance ``d_p`` adds conductance ``c_pq c_pr / d_p`` between each pair of
its neighbours and turns its anchor into anchors ``c_pq a_p / d_p`` on the
neighbours.  Every update is a sum of positive terms, so the elimination is
stable even when variances span many decades, and exact up to round-off.

Variances may be NumPy arrays sharing one shape (a batch of networks with a
common graph); all results are then arrays of that shape.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, DomainError

__all__ = ["GaussianNetwork", "eliminate", "evaluate_closed", "factor_product"]

_LOG_2PI = math.log(2.0 * math.pi)


def _positive(t, what: str):
    arr = np.asarray(t, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} variance must be positive and finite")
    return arr if arr.ndim else float(arr)


@dataclass
class GaussianNetwork:
    """Factor graph of 2d Gaussian kernels.

    Attributes
    ----------
    internal : list of bool
        ``internal[i]`` tells whether vertex ``i`` is integrated out.
    edges : list of (i, j, variance)
    anchors : list of (i, mean, variance)
    prefactor : float or ndarray
    """

    internal: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    anchors: list = field(default_factory=list)
    prefactor: object = 1.0
    names: list = field(default_factory=list)

    def add_vertex(self, name=None, internal: bool = True) -> int:
        self.internal.append(bool(internal))
        self.names.append(name if name is not None else len(self.internal) - 1)
        return len(self.internal) - 1

    def add_edge(self, i: int, j: int, variance) -> None:
        if i == j:
            raise DomainError("self-loops are not allowed")
        self._check(i), self._check(j)
        self.edges.append((i, j, _positive(variance, "edge")))

    def add_anchor(self, i: int, mean, variance) -> None:
        self._check(i)
        mean = np.asarray(mean, dtype=float)
        if mean.shape[-1:] != (2,):
            raise DomainError("anchor means are points in the plane")
        self.anchors.append((i, mean, _positive(variance, "anchor")))

    def _check(self, i):
        if not 0 <= i < len(self.internal):
            raise DomainError(f"unknown vertex {i}")

    @property
    def n_vertices(self) -> int:
        return len(self.internal)

    def external_vertices(self) -> list:
        return [i for i, inn in enumerate(self.internal) if not inn]


def factor_product(net: GaussianNetwork, positions) -> np.ndarray:
    """Evaluate the product of all factors (times the prefactor) at given points.

    ``positions`` maps each vertex to a point (or an array of points with a
    trailing axis of length 2).
    """
    out = np.asarray(net.prefactor, dtype=float)
    for i, j, t in net.edges:
        d = np.asarray(positions[i]) - np.asarray(positions[j])
        out = out * np.exp(-np.sum(d * d, axis=-1) / (2 * t)) / (2 * np.pi * t)
    for i, m, t in net.anchors:
        d = np.asarray(positions[i]) - m
        out = out * np.exp(-np.sum(d * d, axis=-1) / (2 * t)) / (2 * np.pi * t)
    return out


def _components(nodes, adjacency):
    seen, comps = set(), []
    for v in nodes:
        if v in seen:
            continue
        stack, comp = [v], []
        seen.add(v)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adjacency[x]:
                if y in nodes and y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(comp)
    return comps


def _check_degeneracy(net: GaussianNetwork, cond, anchor_vertices):
    internal = {i for i, inn in enumerate(net.internal) if inn}
    adjacency = defaultdict(set)
    for i, j in cond:
        adjacency[i].add(j)
        adjacency[j].add(i)
    for comp in _components(sorted(internal), adjacency):
        grounded = any(v in anchor_vertices for v in comp) or any(
            w not in internal for v in comp for w in adjacency[v]
        )
        if not grounded:
            raise DegeneracyError(
                "internal vertices with neither anchor nor external neighbour give a divergent integral",
                [net.names[v] for v in comp],
            )


def eliminate(net: GaussianNetwork, order=None):
    """Integrate out all internal vertices.

    Parameters
    ----------
    net : GaussianNetwork
    order : sequence of int, optional
        Elimination order; by default a greedy minimum-degree order.

    Returns
    -------
    scalar : float or ndarray
        Such that the integral of the factor product over internal vertices
        equals ``scalar`` times the factor product of ``residual``.
    residual : GaussianNetwork
        Network on the external vertices only (re-indexed in increasing order
        of the original indices; ``names`` are preserved).

    Raises
    ------
    DegeneracyError
        If some group of internal vertices has no anchor and no edge to an
        external vertex, so the integral diverges.
    """
    cond: dict = {}
    log_scale = np.log(np.abs(np.asarray(net.prefactor, dtype=float)))
    sign = np.sign(np.asarray(net.prefactor, dtype=float))
    for i, j, t in net.edges:
        key = (min(i, j), max(i, j))
        cond[key] = cond.get(key, 0.0) + 1.0 / t
        log_scale = log_scale - (_LOG_2PI + np.log(t))
    anchor: dict = {}
    for i, m, t in net.anchors:
        log_scale = log_scale - (_LOG_2PI + np.log(t))
        a = 1.0 / t
        if i in anchor:
            a0, m0 = anchor[i]
            log_scale = log_scale + _merge_penalty(a0, m0, a, m)
            anchor[i] = (a0 + a, _merge_mean(a0, m0, a, m))
        else:
            anchor[i] = (a, m)
    _check_degeneracy(net, cond, anchor)

    nbrs = defaultdict(dict)
    for (i, j), c in cond.items():
        nbrs[i][j] = c
        nbrs[j][i] = c

    todo = [i for i, inn in enumerate(net.internal) if inn]
    if order is not None:
        order = list(order)
        if sorted(order) != todo:
            raise DomainError("order must list every internal vertex exactly once")
    remaining = set(todo)
    while remaining:
        if order is not None:
            p = order.pop(0)
        else:
            p = min(remaining, key=lambda v: (len(nbrs[v]), v))
        remaining.discard(p)
        links = nbrs.pop(p)
        a_p = anchor.pop(p, None)
        d = sum(links.values()) + (a_p[0] if a_p else 0.0)
        log_scale = log_scale + (_LOG_2PI - np.log(d))
        keys = list(links)
        for q in keys:
            del nbrs[q][p]
        for x, q in enumerate(keys):
            cq = links[q]
            if a_p is not None:
                kappa = cq * a_p[0] / d
                if q in anchor:
                    a0, m0 = anchor[q]
                    log_scale = log_scale + _merge_penalty(a0, m0, kappa, a_p[1])
                    anchor[q] = (a0 + kappa, _merge_mean(a0, m0, kappa, a_p[1]))
                else:
                    anchor[q] = (kappa, a_p[1])
            for r in keys[x + 1:]:
                c = cq * links[r] / d
                nbrs[q][r] = nbrs[q].get(r, 0.0) + c
                nbrs[r][q] = nbrs[r].get(q, 0.0) + c

    ext = net.external_vertices()
    index = {v: k for k, v in enumerate(ext)}
    residual = GaussianNetwork(names=[net.names[v] for v in ext], internal=[False] * len(ext))
    for q in ext:
        for r, c in nbrs.get(q, {}).items():
            if q < r:
                t = 1.0 / c
                residual.edges.append((index[q], index[r], t))
                log_scale = log_scale + (_LOG_2PI + np.log(t))
        if q in anchor:
            a, m = anchor[q]
            t = 1.0 / a
            residual.anchors.append((index[q], m, t))
            log_scale = log_scale + (_LOG_2PI + np.log(t))
    scalar = sign * np.exp(log_scale)
    if np.ndim(scalar) == 0:
        scalar = float(scalar)
    return scalar, residual


def _merge_mean(a0, m0, a1, m1):
    w = a0 / (a0 + a1)
    return np.asarray(w)[..., None] * m0 + (1.0 - np.asarray(w))[..., None] * m1


def _merge_penalty(a0, m0, a1, m1):
    """Log of the constant left when two anchors on one vertex are combined."""
    d = np.asarray(m0) - np.asarray(m1)
    d2 = np.sum(d * d, axis=-1)
    return -0.5 * (a0 * a1 / (a0 + a1)) * d2


def evaluate_closed(net: GaussianNetwork, order=None):
    """Integral over all vertices of a network without external vertices."""
    if net.external_vertices():
        raise DomainError("evaluate_closed needs every vertex to be internal")
    scalar, _ = eliminate(net, order)
    return scalar
