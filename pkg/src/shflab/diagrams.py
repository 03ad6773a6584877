"""Pair-sequence diagrams for the n-point moment kernels.

A diagram is a sequence of pairs ``(α_1, ..., α_m)`` from ``{1..n}`` with
adjacent entries distinct.  Its contribution tested against a product of
Gaussians on the left and the constant 1 on the right is an integral over the
time simplex ``u_{1/2} + u_1 + u_{3/2} + ... + u_m + u_{m+1/2} = t``.  At fixed
times the spatial integral is a Gaussian network:

* free motion for ``u_{k-1/2}``: every particle moves from its current vertex
  to a new one with variance ``u_{k-1/2}``, the two members of ``α_k`` to a
  shared centre vertex;
* interaction for ``u_k``: the centre moves with variance ``u_k / 2``, the
  other particles with variance ``u_k``, with weight ``4π j^θ(u_k)``.

The network is integrated exactly by ``gaussnet``; the time integral is a
deterministic product rule for ``m <= 2`` and stratified importance-sampled
Monte Carlo otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DomainError
from .gaussnet import GaussianNetwork, evaluate_closed
from .kernels import QuadratureSpec, _theta, jfn, jint
from .quadrules import block_rule, j_gauss_rule, tanh_sinh_unit

__all__ = [
    "Diagram",
    "GaussianTest",
    "DiagramContribution",
    "TruncatedMoment",
    "pairs",
    "enumerate_dgm",
    "enumerate_dgm_star",
    "diagram_network",
    "sgsum_eval",
    "moments_truncated",
    "w_moment_scaling_study",
]

MAX_N = 4


def pairs(n: int) -> list:
    """All unordered pairs of ``{1..n}`` in lexicographic order."""
    if not 2 <= n <= 6:
        raise DomainError("pairs(n) is defined for 2 <= n <= 6")
    return list(itertools.combinations(range(1, n + 1), 2))


@dataclass(frozen=True)
class Diagram:
    n: int
    seq: tuple

    def __post_init__(self):
        if self.n < 2 or len(self.seq) < 1:
            raise DomainError("a diagram needs n >= 2 and at least one pair")
        for a, b in zip(self.seq, self.seq[1:]):
            if a == b:
                raise DomainError("adjacent pairs of a diagram must differ")
        for p in self.seq:
            if len(p) != 2 or not (1 <= p[0] < p[1] <= self.n):
                raise DomainError(f"invalid pair {p}")

    def __len__(self) -> int:
        return len(self.seq)

    def covers_all(self) -> bool:
        return set(itertools.chain.from_iterable(self.seq)) == set(range(1, self.n + 1))

    def __str__(self) -> str:
        return "(" + ",".join(f"{a}{b}" for a, b in self.seq) + ")"


def enumerate_dgm(n: int, max_len: int) -> list:
    """All diagrams on ``n`` particles of length at most ``max_len``."""
    if max_len < 1:
        raise DomainError("max_len must be >= 1")
    ps = pairs(n)
    out, layer = [], [(p,) for p in ps]
    for _ in range(max_len):
        out.extend(Diagram(n, s) for s in layer)
        layer = [s + (p,) for s in layer for p in ps if p != s[-1]]
    return out


def enumerate_dgm_star(n: int, max_len: int) -> list:
    """Diagrams whose pairs together cover every particle."""
    return [d for d in enumerate_dgm(n, max_len) if d.covers_all()]


@dataclass(frozen=True)
class GaussianTest:
    """Left test function ``prod_i hk(variances[i], x_i - means[i])``."""

    variances: tuple
    means: tuple

    @classmethod
    def isotropic(cls, n: int, variance: float, means=None):
        means = means if means is not None else [(0.0, 0.0)] * n
        return cls(tuple([float(variance)] * n), tuple(tuple(map(float, m)) for m in means))

    def scaled(self, s: float) -> "GaussianTest":
        r = math.sqrt(s)
        return GaussianTest(
            tuple(s * v for v in self.variances),
            tuple((r * m[0], r * m[1]) for m in self.means),
        )


@dataclass
class DiagramContribution:
    diagram: Diagram
    theta: float
    t: float
    value: float
    stderr: float
    method: str
    samples: int = 0


def diagram_network(diagram: Diagram, test: GaussianTest, half, full) -> GaussianNetwork:
    """Spatial network of a diagram at fixed simplex times.

    Parameters
    ----------
    half : sequence of arrays
        ``u_{1/2}, u_{3/2}, ..., u_{m+1/2}`` (length ``m + 1``).
    full : sequence of arrays
        ``u_1, ..., u_m``.

    The j-weights are not included; the prefactor is ``(4π)^m``.
    """
    n, m = diagram.n, len(diagram)
    net = GaussianNetwork(prefactor=(4 * math.pi) ** m)
    pos = []
    for i in range(n):
        v = net.add_vertex(f"x{i + 1}")
        net.add_anchor(v, test.means[i], test.variances[i])
        pos.append(v)
    for k, (a, b) in enumerate(diagram.seq):
        a, b = a - 1, b - 1
        c = net.add_vertex(f"c{k + 1}")
        for i in range(n):
            if i in (a, b):
                net.add_edge(pos[i], c, half[k])
            else:
                y = net.add_vertex(f"y{k + 1}.{i + 1}")
                net.add_edge(pos[i], y, half[k])
                pos[i] = y
        pos[a] = pos[b] = c
        cp = net.add_vertex(f"c{k + 1}'")
        net.add_edge(c, cp, full[k] / 2)
        for i in range(n):
            if i not in (a, b):
                y = net.add_vertex(f"y{k + 1}'.{i + 1}")
                net.add_edge(pos[i], y, full[k])
                pos[i] = y
        pos[a] = pos[b] = cp
    for i in range(n):
        z = net.add_vertex(f"z{i + 1}")
        net.add_edge(pos[i], z, half[m])
    return net


# ---------------------------------------------------------------------------
# time integration


def _check(diagram, test, t):
    if diagram.n > MAX_N:
        raise CapabilityError(f"diagrams with n > {MAX_N} particles are not supported")
    if not t > 0:
        raise DomainError("t must be positive")
    if len(test.variances) != diagram.n or len(test.means) != diagram.n:
        raise DomainError("test function must have one factor per particle")


def _quadrature(theta, diagram, t, test, level: int):
    m = len(diagram)
    K = 10 + 4 * level
    h = 0.3 / (1 + level)
    if m == 1:
        br = block_rule(theta, t, K, h)
        net = diagram_network(diagram, test, [br.delta, br.deltap], [br.u])
        return float(np.sum(br.weight * evaluate_closed(net)))
    # m == 2: j-coordinates by nested Gauss rules, free times on a 2-simplex
    u1, w1 = j_gauss_rule(theta, t, K)
    u2s, w2s = [], []
    for a, wa in zip(u1, w1):
        b, wb = j_gauss_rule(theta, t - a, K)
        u2s.append(b)
        w2s.append(wa * wb)
    U1 = np.repeat(u1, K)
    U2 = np.concatenate(u2s)
    WU = np.concatenate(w2s)
    R = t - U1 - U2
    x, xc, wx = tanh_sinh_unit(h)
    X, Y = np.meshgrid(np.arange(x.size), np.arange(x.size), indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    p1 = x[X]
    p2 = xc[X] * x[Y]
    p3 = xc[X] * xc[Y]
    wp = wx[X] * wx[Y] * xc[X]
    half = [np.outer(R, p) .ravel() for p in (p1, p2, p3)]
    full = [np.repeat(U1, p1.size), np.repeat(U2, p1.size)]
    weight = np.outer(WU * R * R, wp).ravel()
    net = diagram_network(diagram, test, half, full)
    return float(np.sum(weight * evaluate_closed(net)))


class _JSampler:
    """Exact sampling from ``j^θ(u) du / J(t)`` on (0, t] by piecewise
    log-linear inversion of the primitive, with importance weights
    ``j(u) / q(u)`` for the density ``q`` that is actually sampled.

    Mass below ``u_min = 1e-150 t`` is lumped at ``u_min``; the integrand is
    continuous at ``u = 0`` so the induced bias is of relative order 1e-150.
    """

    def __init__(self, theta: float, t: float, n_grid: int = 4000):
        self.theta = theta
        self.logu = np.linspace(math.log(t) - 150 * math.log(10), math.log(t), n_grid)
        J = jint(theta, np.exp(self.logu))
        self.total = J[-1]
        self.cdf = J / self.total

    def sample(self, P):
        cdf, logu = self.cdf, self.logu
        k = np.clip(np.searchsorted(cdf, P, side="right") - 1, -1, cdf.size - 2)
        low = k < 0
        kk = np.maximum(k, 0)
        dC = cdf[kk + 1] - cdf[kk]
        dl = logu[kk + 1] - logu[kk]
        lu = logu[kk] + (P - cdf[kk]) / dC * dl
        lu = np.where(low, logu[0], lu)
        u = np.exp(lu)
        w = np.where(low, self.total, jfn(self.theta, u) * u * dl / dC)
        return u, w


def _monte_carlo(theta, diagram, t, test, n_samples: int, seed: int, n_strata: int = 16):
    m = len(diagram)
    sampler = _JSampler(theta, t)
    per = max(n_samples // n_strata, 2)
    means, variances = [], []
    for stratum in range(n_strata):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stratum,)))
        P = rng.random((m, per))
        P[0] = (stratum + P[0]) / n_strata
        us, ws = sampler.sample(P)
        R = t - us.sum(axis=0)
        ok = R > 0
        E = rng.exponential(size=(m + 1, per))
        half = E / E.sum(axis=0) * np.where(ok, R, 1.0)
        weight = np.prod(ws, axis=0) * np.where(ok, R, 0.0) ** m / math.factorial(m)
        full = list(np.where(ok, us, t))
        net = diagram_network(diagram, test, list(np.maximum(half, 1e-300)), full)
        y = weight * evaluate_closed(net)
        means.append(y.mean())
        variances.append(y.var(ddof=1) / per)
    value = float(np.mean(means))
    stderr = float(math.sqrt(np.sum(variances)) / n_strata)
    return value, stderr, per * n_strata


def sgsum_eval(
    theta,
    diagram: Diagram,
    t: float,
    test: GaussianTest,
    spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-3),
    method: str = "auto",
    n_samples: int = 100_000,
) -> DiagramContribution:
    """Contribution of one diagram tested against ``test`` on the left and 1 on the right.

    Parameters
    ----------
    method : {"auto", "quadrature", "mc"}
        ``auto`` uses quadrature for diagrams of length at most 2.
    n_samples : int
        Monte Carlo budget when sampling.

    For quadrature the result at two resolutions is compared and the
    difference reported as ``stderr``.
    """
    theta = _theta(theta)
    _check(diagram, test, t)
    m = len(diagram)
    if method == "auto":
        method = "quadrature" if m <= 2 else "mc"
    if method == "quadrature":
        if m > 2:
            raise CapabilityError("simplex quadrature is limited to diagrams of length <= 2")
        fine = _quadrature(theta, diagram, t, test, 2)
        coarse = _quadrature(theta, diagram, t, test, 1)
        return DiagramContribution(diagram, theta, t, fine, abs(fine - coarse), "simplex-quadrature")
    if method != "mc":
        raise DomainError(f"unknown method {method!r}")
    value, stderr, used = _monte_carlo(theta, diagram, t, test, n_samples, spec.seed)
    return DiagramContribution(diagram, theta, t, value, stderr, "simplex-MC", used)


@dataclass
class TruncatedMoment:
    heat_term: float
    series: list
    partial_sums: list
    block_sums: list = field(default_factory=list)
    stderr: float = 0.0
    converging: bool = True


def moments_truncated(
    theta,
    n: int,
    t: float,
    test: GaussianTest,
    max_len: int,
    spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-3),
    centered: bool = False,
    n_samples: int = 20_000,
) -> TruncatedMoment:
    """Partial sums of the diagram series by diagram length.

    With ``centered=False`` the series over all diagrams plus the free heat
    term (equal to 1 for unit-mass tests) is returned; with ``centered=True``
    only diagrams covering every particle contribute and the heat term is 0.
    Summation stops early once a whole length block falls below
    ``spec.rel_tol`` times the running sum.  ``converging`` is False when the
    last block is not smaller than the previous one.
    """
    diagrams = enumerate_dgm_star(n, max_len) if centered else enumerate_dgm(n, max_len)
    heat = 0.0 if centered else 1.0
    series, partial, blocks = [], [], []
    total, var = heat, 0.0
    for length in range(1, max_len + 1):
        block, bvar = 0.0, 0.0
        for d in (d for d in diagrams if len(d) == length):
            c = sgsum_eval(theta, d, t, test, spec, n_samples=n_samples)
            series.append(c)
            block += c.value
            bvar += c.stderr**2
        total += block
        var += bvar
        blocks.append(block)
        partial.append(total)
        if length > 1 and abs(block) < spec.rel_tol * abs(total):
            break
    converging = len(blocks) < 2 or blocks[-1] < blocks[-2]
    return TruncatedMoment(heat, series, partial, blocks, math.sqrt(var), converging)


def w_moment_scaling_study(n: int, L_grid, r_grid, max_len: int = 2, n_samples: int = 20_000):
    """Moments of ``hk(r^2) ◁ W^θ_{0,1} ▷ 1`` with ``θ = -L log(1/r)``.

    Returns ``{"rows": [(r, L, value, stderr)], "slopes": {r: fitted slope of
    log value against log L}}``.  The second moment uses the closed reduction;
    the fourth the covering-diagram series truncated at ``max_len``.
    """
    from .moments2 import BlockQuery, w_block_second_moment

    if n not in (2, 4):
        raise CapabilityError("only n = 2 and n = 4 are supported")
    rows, slopes = [], {}
    for r in r_grid:
        vals = []
        for L in L_grid:
            theta = -L * math.log(1.0 / r)
            if n == 2:
                v, e = w_block_second_moment(BlockQuery(theta, r * r, 1.0)), 0.0
            else:
                res = moments_truncated(
                    theta, 4, 1.0, GaussianTest.isotropic(4, r * r), max_len,
                    centered=True, n_samples=n_samples,
                )
                v, e = res.partial_sums[-1], res.stderr
            rows.append((r, L, v, e))
            vals.append(v)
        slopes[r] = float(np.polyfit(np.log(L_grid), np.log(vals), 1)[0])
    return {"rows": rows, "slopes": slopes}
