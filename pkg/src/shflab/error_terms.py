"""Second moments of products of block error kernels.

For an index interval ``I = [m, n]`` the quantity of interest is
``∫ dy E(hk_{m-1} ◁ D_m • ... • D_{n-1} • Z_n ▷ hk(t_n r^2, · - y))^2``.  It splits
over subsets ``ω ⊂ (m, n]`` of blocks whose kernel is replaced by its mean.  The
surviving indices ``[m, n] \\ ω`` each carry one interaction time pair
``t_{i-1} < s_i < s'_i < t_i`` weighted by ``j(s'_i - s_i)``, and each particle
leaving a surviving block either continues (sign ``+``) or restarts from the
reference heat density (sign ``-``).

Two independent evaluations are provided:

* ``b_omega``: the spatial integrals done in closed form, leaving the
  ``u``/``v`` recursion and a rational integrand in the times;
* ``dz_second_moment_direct``: for every sign choice the spatial integral is
  assembled as a Gaussian network and integrated exactly by ``gaussnet``.

Conventions frozen here (and validated through the agreement of the two
routes): ``i_-`` is the previous surviving index (``s'_{m_-} = 0`` and
``v_{m_-} = 0``), ``i_+`` the next surviving index or ``n + 1``, ``ñ`` the last
surviving index, ``s_{n+1} = t_n (1 + r^2)``.  The sign pair at ``n`` is fixed
to ``(+, +)`` unless ``n ∈ ω``.  The two mixed sign pairs give identical
integrands, so they are evaluated once with multiplicity two.

All time integrals run in units of ``t_n``: with ``λ = t_n`` the quantity
satisfies ``B(λ ·; θ) = λ^{-1} B(·; θ + log λ)``.  Times are carried as gaps
(``s_i - t_{i-1}``, ``s'_i - s_i``, ``t_i - s'_i``) so that short distances between
nearby times are never formed by cancellation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DomainError, PreconditionError
from .gaussnet import GaussianNetwork, evaluate_closed
from .kernels import QuadratureSpec, TimeGrid, _theta
from .quadrules import block_rule

__all__ = [
    "IntervalSpec",
    "OmegaAssignment",
    "surviving",
    "uvw_iterate",
    "b_omega",
    "b_sum",
    "dz_second_moment_direct",
    "g_omega_lambda",
    "g_bound_shape",
    "dz_limit",
    "dz_bound_scaling",
    "Resolution",
    "pointwise_integrands",
    "omega_subsets",
]

SIGN_CLASSES = (((1, 1), 1, 1), ((-1, -1), 1, 1), ((1, -1), -1, 2))
MAX_SURVIVING = 3


@dataclass(frozen=True)
class Resolution:
    """Per-block product rule: ``K_u`` j-Gauss nodes and tanh-sinh step ``h``."""

    K_u: int = 12
    h: float = 0.25


@dataclass(frozen=True)
class IntervalSpec:
    """Index interval ``[m, n]`` on a grid and the terminal smoothing ``r``.

    ``r = inf`` selects the limit ``4π t_n r^2 × (...)`` as ``r -> ∞``, which is
    the unsmoothed second moment ``E(hk_{m-1} ◁ D_m • ... • Z_n ▷ 1)^2``.
    """

    grid: TimeGrid
    m: int
    n: int
    r: float = 1.0

    def __post_init__(self):
        if not (1 <= self.m < self.n <= self.grid.N - self.grid.ell):
            raise DomainError(
                f"need 1 <= m < n <= N - ell = {self.grid.N - self.grid.ell}, got [{self.m}, {self.n}]"
            )
        if not self.r > 0:
            raise DomainError("r must be positive")

    @property
    def length(self) -> int:
        return self.n - self.m + 1

    def tau(self, i: int) -> float:
        """``t_i / t_n``."""
        return self.grid.b ** (2 * (self.n - i))

    @property
    def t_n(self) -> float:
        return self.grid.t(self.n)

    @property
    def finite_r(self) -> bool:
        return math.isfinite(self.r)


def surviving(m: int, n: int, omega) -> list:
    """Indices of ``[m, n]`` not in ``omega``, in increasing order."""
    omega = frozenset(omega)
    if not omega <= set(range(m + 1, n + 1)):
        raise DomainError(f"omega must be a subset of ({m}, {n}]")
    return [i for i in range(m, n + 1) if i not in omega]


@dataclass(frozen=True)
class OmegaAssignment:
    """A subset ``omega`` with one sign pair per surviving index."""

    m: int
    n: int
    omega: frozenset
    beta: dict = field(hash=False)

    def __post_init__(self):
        S = surviving(self.m, self.n, self.omega)
        if set(self.beta) != set(S):
            raise PreconditionError(f"beta must be given exactly on {S}")
        for i, b in self.beta.items():
            if len(b) != 2 or any(x not in (1, -1) for x in b):
                raise PreconditionError(f"beta[{i}] must be a pair of signs")
        if self.n not in self.omega and tuple(self.beta[self.n]) != (1, 1):
            raise PreconditionError("the sign pair at n is (+,+) when n is not in omega")

    @property
    def surviving(self) -> list:
        return surviving(self.m, self.n, self.omega)

    @property
    def n_tilde(self) -> int:
        return self.surviving[-1]

    def prev(self, i: int):
        S = self.surviving
        k = S.index(i)
        return S[k - 1] if k else None

    def next(self, i: int) -> int:
        S = self.surviving
        k = S.index(i)
        return S[k + 1] if k + 1 < len(S) else self.n + 1


def uvw_iterate(assign: OmegaAssignment, times: dict, s_end: float):
    """Run the ``u``/``v`` recursion and the ``w`` map.

    Parameters
    ----------
    assign : OmegaAssignment
    times : dict
        ``i -> (s_i, s'_i)`` for every surviving ``i``.
    s_end : float
        ``s_{n+1}``.

    Returns
    -------
    u, v, w : dict
        Keyed by surviving index.  ``w_i`` is ``s'_i``, ``0`` or ``s'_i / 4``
        according to the sign pair.
    """
    u, v, w = {}, {}, {}
    v_prev = 0.0
    for i in assign.surviving:
        s, sp = times[i]
        nxt = assign.next(i)
        S_next = times[nxt][0] if nxt <= assign.n else s_end
        b = tuple(assign.beta[i])
        if b == (1, 1):
            u[i], v[i], w[i] = sp, v_prev, sp
        elif b == (-1, -1):
            u[i], v[i], w[i] = 0.0 * sp, 0.0 * sp, 0.0 * sp
        else:
            X = sp + v_prev
            u[i] = X / 4
            v[i] = S_next * X / (4 * S_next - X)
            w[i] = sp / 4
        v_prev = v[i]
    return u, v, w


# ---------------------------------------------------------------------------
# integrands in units of t_n


class _Nodes:
    """Broadcastable gap variables of all surviving blocks."""

    def __init__(self, I: IntervalSpec, S, gaps):
        self.I, self.S = I, S
        self.delta = {i: g[0] for i, g in zip(S, gaps)}
        self.lag = {i: g[1] for i, g in zip(S, gaps)}
        self.deltap = {i: g[2] for i, g in zip(S, gaps)}
        self.r2 = I.r**2 if I.finite_r else math.inf

    def s(self, i):
        return self.I.tau(i - 1) + self.delta[i]

    def sp(self, i):
        return self.I.tau(i) - self.deltap[i]

    def s_at(self, k):
        return self.s(k) if k <= self.I.n else 1.0 + self.r2

    def gap(self, i, k):
        """``s_k - s'_i`` for ``k > i`` (``k = n + 1`` allowed)."""
        if k <= self.I.n:
            return self.deltap[i] + (self.I.tau(k - 1) - self.I.tau(i)) + self.delta[k]
        return self.deltap[i] + (1.0 - self.I.tau(i)) + self.r2


def _sign_combos(I: IntervalSpec, S, omega):
    """Sign classes per surviving index, with the combined sign × multiplicity."""
    free = S if I.n in omega else S[:-1]
    for combo in itertools.product(SIGN_CLASSES, repeat=len(free)):
        beta = {i: c[0] for i, c in zip(free, combo)}
        if I.n not in omega:
            beta[I.n] = (1, 1)
        coef = 1
        for c in combo:
            coef *= c[1] * c[2]
        yield beta, coef


def _next_map(I, S):
    return {i: (S[k + 1] if k + 1 < len(S) else I.n + 1) for k, i in enumerate(S)}


def _b_integrand(nodes: _Nodes, omega):
    I, S = nodes.I, nodes.S
    if not I.finite_r and I.n in omega:
        return 0.0
    nxt = _next_map(I, S)
    total = 0.0
    for beta, coef in _sign_combos(I, S, omega):
        val = 1.0 / nodes.s(S[0])
        v_prev = 0.0
        for i in S:
            k = nxt[i]
            b = beta[i]
            if b == (1, 1):
                denom, v = nodes.gap(i, k), v_prev
            elif b == (-1, -1):
                denom, v = nodes.s_at(k), 0.0
            else:
                X = nodes.sp(i) + v_prev
                Sk = nodes.s_at(k)
                denom = Sk - X / 4
                v = Sk * X / (4 * Sk - X) if k <= I.n else 0.0
            if k <= I.n:
                val = val / denom
            elif I.finite_r:
                val = val / (4 * math.pi * denom)
            v_prev = v
        total = total + coef * val
    return total


def _direct_integrand(nodes: _Nodes, omega):
    I, S = nodes.I, nodes.S
    nxt = _next_map(I, S)
    shape = np.broadcast(*[nodes.delta[i] for i in S]).shape
    full = lambda x: np.broadcast_to(np.asarray(x, float), shape)  # noqa: E731
    total = 0.0
    for beta, coef in _sign_combos(I, S, omega):
        if not I.finite_r and I.n in omega:
            # sign pairs at the last index sum to zero when its endpoint is free
            continue
        net = GaussianNetwork(prefactor=coef * (4 * math.pi) ** len(S))
        y = {i: net.add_vertex(f"y{i}") for i in S}
        yp = {i: net.add_vertex(f"y{i}'") for i in S}
        Y = net.add_vertex("Y") if I.finite_r else None
        s_m = full(nodes.s(S[0]))
        net.add_anchor(y[S[0]], (0.0, 0.0), s_m)
        net.add_anchor(y[S[0]], (0.0, 0.0), s_m)
        for i in S:
            net.add_edge(y[i], yp[i], full(nodes.lag[i] / 2))
            k = nxt[i]
            target = y[k] if k <= I.n else Y
            if target is None:
                continue
            for sgn in beta[i]:
                if sgn > 0:
                    net.add_edge(yp[i], target, full(nodes.gap(i, k)))
                else:
                    net.add_anchor(target, (0.0, 0.0), full(nodes.s_at(k)))
        total = total + evaluate_closed(net)
    return total


def _tensor_integrate(theta, I: IntervalSpec, omega, integrand, res: Resolution):
    S = surviving(I.m, I.n, omega)
    if len(S) > MAX_SURVIVING:
        raise CapabilityError(f"{len(S)} surviving blocks exceed the quadrature budget of {MAX_SURVIVING}")
    theta_n = _theta(theta) + math.log(I.t_n)
    rules = [block_rule(theta_n, I.tau(i) - I.tau(i - 1), res.K_u, res.h) for i in S]
    k = len(rules)
    total = 0.0
    first = rules[0]
    chunk = max(1, int(2e6 // max(1, int(np.prod([len(r) for r in rules[1:]])))))
    for start in range(0, len(first), chunk):
        sl = slice(start, start + chunk)
        gaps, weight = [], None
        for pos, rule in enumerate(rules):
            shape = [1] * k
            shape[pos] = -1
            if pos == 0:
                d, l, dp, w = rule.delta[sl], rule.u[sl], rule.deltap[sl], rule.weight[sl]
            else:
                d, l, dp, w = rule.delta, rule.u, rule.deltap, rule.weight
            gaps.append(tuple(a.reshape(shape) for a in (d, l, dp)))
            weight = w.reshape(shape) if weight is None else weight * w.reshape(shape)
        vals = integrand(_Nodes(I, S, gaps), omega)
        total += float(np.sum(weight * vals))
    return total


def _scale(I: IntervalSpec, value_norm: float) -> float:
    return value_norm / I.t_n if I.finite_r else value_norm


def b_omega(theta, I: IntervalSpec, omega=(), res: Resolution = Resolution(), spec: QuadratureSpec | None = None) -> float:
    """Closed-form-in-space term ``B_ω`` of the expansion.

    Parameters
    ----------
    theta : float or Theta
    I : IntervalSpec
        With ``r = inf`` the limit ``4π t_n r^2 B_ω`` is returned.
    omega : iterable of int
        Subset of ``(m, n]``.
    res : Resolution
        Product-rule resolution per surviving block.
    """
    return _scale(I, _tensor_integrate(theta, I, frozenset(omega), _b_integrand, res))


def omega_subsets(I: IntervalSpec):
    """All ``ω ⊂ (m, n]`` by size, then lexicographically."""
    inner = range(I.m + 1, I.n + 1)
    for k in range(len(inner) + 1):
        for om in itertools.combinations(inner, k):
            yield frozenset(om)


def b_sum(theta, I: IntervalSpec, res: Resolution = Resolution()) -> float:
    """``Σ_ω B_ω`` over all ``ω ⊂ (m, n]`` in canonical order."""
    return sum(b_omega(theta, I, om, res) for om in omega_subsets(I))


def dz_second_moment_direct(theta, I: IntervalSpec, res: Resolution = Resolution(10, 0.3),
                            spec: QuadratureSpec | None = None) -> float:
    """``∫ dy E(hk D…Z)_{I,r}(y)^2`` assembled term by term from Gaussian networks.

    Distinct ``ω`` never mix (their cross moments vanish), so the value is a
    sum over ``ω`` of signed network integrals.  The ``y``-integral is the free
    vertex ``Y`` of each network.
    """
    if I.length > MAX_SURVIVING:
        raise CapabilityError(f"|I| = {I.length} exceeds the supported {MAX_SURVIVING}")
    total = sum(_tensor_integrate(theta, I, om, _direct_integrand, res) for om in omega_subsets(I))
    return _scale(I, total)


def pointwise_integrands(I: IntervalSpec, omega, gaps):
    """Both integrands at given gap variables (for testing the exact identity).

    ``gaps`` lists ``(delta, lag, deltap)`` in units of ``t_n`` for each
    surviving block.
    """
    S = surviving(I.m, I.n, frozenset(omega))
    nodes = _Nodes(I, S, [tuple(np.atleast_1d(np.asarray(x, float)) for x in g) for g in gaps])
    return _b_integrand(nodes, frozenset(omega)), _direct_integrand(nodes, frozenset(omega))


# ---------------------------------------------------------------------------
# bound functionals


def _g_integrand_factory(lam, b):
    lam = frozenset(lam)

    def integrand(nodes: _Nodes, omega):
        I, S = nodes.I, nodes.S
        val = 1.0 / nodes.s(S[0])
        for prev, i in zip(S, S[1:]):
            gap = nodes.gap(prev, i)
            if prev in lam:
                val = val * b ** (2 * (i - prev)) / gap
            else:
                val = val * nodes.sp(prev) / (nodes.s(i) * gap)
        last = S[-1]
        gap = nodes.gap(last, I.n + 1)
        if last == I.n:
            val = val / gap
        else:
            val = val * nodes.sp(last) / ((1.0 + nodes.r2) * gap)
        return val

    return integrand


def g_omega_lambda(theta, I: IntervalSpec, omega=(), lam=(), res: Resolution = Resolution()) -> float:
    """The positive majorant integral ``G_{ω,λ}``.

    ``λ`` must be a subset of the surviving indices strictly below the
    second-to-last surviving index.
    """
    if not I.finite_r:
        raise DomainError("G is defined for finite r")
    omega = frozenset(omega)
    S = surviving(I.m, I.n, omega)
    allowed = set(S[:-2]) if len(S) >= 2 else set()
    if not set(lam) <= allowed:
        raise PreconditionError(f"lambda must be a subset of {sorted(allowed)}")
    val = _tensor_integrate(theta, I, omega, _g_integrand_factory(lam, I.grid.b), res)
    return val / I.t_n


def g_bound_shape(I: IntervalSpec, omega=()) -> float:
    """Right-hand side of the G bound without its constant:
    ``Π_{i surviving} 1/log t_i^{-1} · b^{2|ω|} log b^{-1} / (t_n (1+r^2)^{2[n∈ω]})
    · log((1+r^2)/r^2)^{[n∉ω]}``."""
    omega = frozenset(omega)
    S = surviving(I.m, I.n, omega)
    g = I.grid
    val = np.prod([1.0 / g.log_t_inv(i) for i in S])
    val *= g.b ** (2 * len(omega)) * g.log_b_inv / I.t_n
    r2 = I.r**2
    if I.n in omega:
        val /= (1 + r2) ** 2
    else:
        val *= math.log1p(1.0 / r2)
    return float(val)


def dz_limit(theta, I: IntervalSpec, res: Resolution = Resolution()) -> float:
    """``E(hk_{m-1} ◁ D_m • ... • D_{n-1} • Z_n ▷ 1)^2`` via the ``r -> ∞`` limit
    of the expansion (terms with ``n ∈ ω`` vanish there)."""
    J = IntervalSpec(I.grid, I.m, I.n, math.inf)
    return sum(b_omega(theta, J, om, res) for om in omega_subsets(J) if J.n not in om)


def dz_bound_scaling(theta, family, res: Resolution = Resolution()):
    """Evaluate ``dz_limit`` over a family of intervals and fit power laws.

    Parameters
    ----------
    family : iterable of IntervalSpec

    Returns
    -------
    dict
        ``rows``: ``(b, N, m, n, value)``;
        ``slope_N``: per ``(b, |I|)`` the fitted exponent of ``N - n``;
        ``slope_b``: per ``(N - n, |I|)`` the fitted exponent of ``log b^{-1}``.
    """
    rows = []
    for I in family:
        rows.append((I.grid.b, I.grid.N, I.m, I.n, dz_limit(theta, I, res)))
    slope_N, slope_b = {}, {}
    by_b, by_gap = {}, {}
    for b, N, m, n, v in rows:
        by_b.setdefault((b, n - m + 1), []).append((N - n, v))
        by_gap.setdefault((N - n, n - m + 1), []).append((-math.log(b), v))
    for key, pts in by_b.items():
        if len({p[0] for p in pts}) >= 2:
            x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slope_N[key] = float(np.polyfit(x, y, 1)[0])
    for key, pts in by_gap.items():
        if len({p[0] for p in pts}) >= 2:
            x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slope_b[key] = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "slope_N": slope_N, "slope_b": slope_b}
