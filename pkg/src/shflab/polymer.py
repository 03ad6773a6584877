"""Lattice directed polymer in a Gaussian environment, and exact decoupling on
finite kernel chains.

Lattice model
-------------
The walk moves by ``(±1, ±1)`` each step (both coordinates are independent
simple walks), so from the origin the sites reached at step ``n`` are
``x = 2k - n`` with ``k ∈ [0, n]^2``.  Weights evolve by

``w_{n+1}(x) = ¼ Σ_e w_n(x - e) · exp(β ω(n+1, x) - β²/2)``

which keeps ``E Z = 1`` exactly.  The critical coupling is
``β² = π / log N_lat · (1 + θ_lat / log N_lat)`` (the expected overlap of two
walks up to time ``N_lat`` is ``log N_lat / π``).

Sites are kept inside a window ``|x_j| ≤ h_n`` that grows like ``c √n`` and is
capped at ``domain_halfwidth``; mass leaving it is absorbed.  The environment
is drawn only on the window, step by step, from a per-replica SFC64 stream,
so a replica is fully determined by ``(seed, replica)`` and the config.

Continuum times map to steps through ``lattice_grid``: time 1 is ``N_lat``
steps and ``t_i = ε² b^{-2i}``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from scipy import stats

from .errors import DomainError, PreconditionError

__all__ = [
    "PolymerConfig",
    "LatticeGrid",
    "lattice_grid",
    "Environment",
    "sample_environment",
    "walk_kernel",
    "partition_point_to_line",
    "leakage",
    "BlockSample",
    "block_statistics",
    "ReplicaTable",
    "run_replicas",
    "KernelChain",
    "random_chain",
    "interval_families",
    "decoupling_expand",
    "ratio_concentration",
    "markov_upper_check",
    "clt_statistic",
    "AccuracyWarning",
]

WINDOW_C = 5.5
_CHUNK = 64


class AccuracyWarning(UserWarning):
    """Boundary leakage above the accuracy target."""


@dataclass(frozen=True)
class PolymerConfig:
    """Lattice polymer parameters.

    Attributes
    ----------
    horizon : int
        Number of time steps ``N_lat`` (time 1).
    theta_lattice : float
        Offset inside the critical window.
    domain_halfwidth : int, optional
        Largest window halfwidth; defaults to ``ceil(5.5 √N_lat) + 4``.
    disorder : str
        Only ``"gaussian"``.
    seed : int
    averaging_scale : float, optional
        Lattice ``ε``; defaults to ``N_lat^{-1/2}`` (``t_0`` is one step).
    leakage_tol : float
        Leakage above which an ``AccuracyWarning`` is emitted.
    """

    horizon: int
    theta_lattice: float = 0.0
    domain_halfwidth: int | None = None
    disorder: str = "gaussian"
    seed: int = 0
    averaging_scale: float | None = None
    leakage_tol: float = 1e-6

    def __post_init__(self):
        if self.horizon < 4:
            raise DomainError("horizon must be at least 4")
        if self.domain_halfwidth is None:
            object.__setattr__(self, "domain_halfwidth", int(math.ceil(WINDOW_C * math.sqrt(self.horizon))) + 4)
        if self.domain_halfwidth < 3 * math.sqrt(self.horizon):
            raise DomainError("domain_halfwidth must be at least 3 sqrt(horizon)")
        if self.disorder != "gaussian":
            raise DomainError("only Gaussian disorder is supported")
        if self.averaging_scale is None:
            object.__setattr__(self, "averaging_scale", self.horizon ** -0.5)
        if not 0 < self.averaging_scale < 1:
            raise DomainError("averaging_scale must lie in (0, 1)")
        if self.beta2 <= 0:
            raise DomainError("theta_lattice puts beta^2 below zero")

    @property
    def beta2(self) -> float:
        L = math.log(self.horizon)
        return math.pi / L * (1.0 + self.theta_lattice / L)

    @property
    def beta(self) -> float:
        return math.sqrt(self.beta2)

    @cached_property
    def windows(self):
        """``(lo_n, L_n)`` for ``n = 0..horizon``: active ``k``-range per axis."""
        lo = np.zeros(self.horizon + 1, dtype=np.int64)
        L = np.ones(self.horizon + 1, dtype=np.int64)
        for n in range(1, self.horizon + 1):
            h = min(self.domain_halfwidth, n, int(math.ceil(WINDOW_C * math.sqrt(n))) + 2)
            a = -((h - n) // 2)  # ceil((n - h) / 2)
            b = (n + h) // 2
            lo[n], L[n] = a, b - a + 1
        return lo, L


@dataclass(frozen=True)
class LatticeGrid:
    """Block boundaries in steps: ``steps[i] ≈ N_lat ε² b^{-2i}``, ``i < N``."""

    horizon: int
    epsilon: float
    b: float
    N: int
    ell: int
    steps: tuple

    @property
    def n_blocks(self) -> int:
        return self.N - self.ell

    @property
    def log_b_inv(self) -> float:
        return -math.log(self.b)

    @property
    def loglog(self) -> float:
        return math.log(math.log(1.0 / self.epsilon))


def lattice_grid(cfg: PolymerConfig, b: float = 0.5, ell: int = 1) -> LatticeGrid:
    """Map the continuum block grid onto lattice steps.

    ``N = ⌊log ε^{-1} / log b^{-1}⌋`` and ``steps[i] = round(N_lat ε² b^{-2i})``
    for ``i = 0, ..., N - 1``.  This is the single place where the continuum
    parameters ``(ε, b)`` meet the lattice.
    """
    if not 0 < b < 1:
        raise DomainError("b must lie in (0, 1)")
    eps = cfg.averaging_scale
    N = int(math.floor(math.log(1 / eps) / math.log(1 / b) * (1 + 1e-12)))
    if not 1 <= ell < N:
        raise DomainError(f"need 1 <= ell < N = {N}")
    steps = tuple(int(round(cfg.horizon * eps**2 * b ** (-2 * i))) for i in range(N))
    if any(s > cfg.horizon for s in steps):
        raise DomainError("block times exceed the horizon")
    return LatticeGrid(cfg.horizon, eps, b, N, ell, steps)


def _generator(cfg: PolymerConfig, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(cfg.seed, spawn_key=(replica,))))


class Environment:
    """Disorder of one replica, materialized step by step on the window.

    ``field(n)`` is the ``(L_n, L_n)`` array of standard normals at step
    ``n ≥ 1``.
    """

    def __init__(self, cfg: PolymerConfig, replica: int, last_step: int | None = None):
        self.cfg, self.replica = cfg, replica
        last = cfg.horizon if last_step is None else last_step
        lo, L = cfg.windows
        gen = _generator(cfg, replica)
        self._fields = [None] + [gen.standard_normal((L[n], L[n])) for n in range(1, last + 1)]

    def field(self, n: int) -> np.ndarray:
        return self._fields[n]

    @property
    def last_step(self) -> int:
        return len(self._fields) - 1


def sample_environment(cfg: PolymerConfig, replica: int, last_step: int | None = None) -> Environment:
    """iid standard normals for one replica, reproducible from ``(seed, replica)``."""
    return Environment(cfg, replica, last_step)


def walk_kernel(cfg: PolymerConfig, n: int) -> np.ndarray:
    """Law of the walk at step ``n`` from the origin, restricted to the window."""
    lo, L = cfg.windows
    k = np.arange(lo[n], lo[n] + L[n])
    p = stats.binom.pmf(k, n, 0.5)
    return np.outer(p, p)


@numba.njit(cache=True, nogil=True)
def _evolve(w, lo_old, noise, off, los, Ls, first, last, a, c):
    """Advance ``w`` (window at step ``first - 1``) through steps ``first..last``.

    ``noise`` is flat; step ``n`` uses ``noise[off[n] : off[n] + Ls[n]^2]``.
    Returns the new weights; pass ``a = 0`` and ``c = 0`` for no disorder.
    """
    for n in range(first, last + 1):
        L_old = w.shape[0]
        L = Ls[n]
        lo = los[n]
        out = np.empty((L, L))
        base = off[n]
        for i in range(L):
            k1 = lo + i - lo_old
            for j in range(L):
                k2 = lo + j - lo_old
                s = 0.0
                for d1 in range(2):
                    p = k1 - d1
                    if p >= 0 and p < L_old:
                        for d2 in range(2):
                            q = k2 - d2
                            if q >= 0 and q < L_old:
                                s += w[p, q]
                out[i, j] = 0.25 * s * math.exp(a * noise[base + i * L + j] - c)
        w = out
        lo_old = lo
    return w


@numba.njit(cache=True, nogil=True)
def _evolve_draw(w1, w2, two, lo_old, gen, los, Ls, first, last, a, c):
    """Advance one or two weight arrays through steps ``first..last``, drawing
    the environment from ``gen`` in the same order as ``Environment``.

    Window edges move by at most one site per step, so the arrays are held
    with a zero border and the four-neighbour sum needs no bounds checks.
    """
    L0 = w1.shape[0]
    p1 = np.zeros((L0 + 2, L0 + 2))
    p1[1:-1, 1:-1] = w1
    p2 = np.zeros((L0 + 2, L0 + 2))
    if two:
        p2[1:-1, 1:-1] = w2
    for n in range(first, last + 1):
        L, lo = Ls[n], los[n]
        d = lo - lo_old
        q1 = np.zeros((L + 2, L + 2))
        q2 = np.zeros((L + 2, L + 2)) if two else q1
        if two:
            for i in range(L):
                r = i + d
                for j in range(L):
                    s = j + d
                    f = 0.25 * math.exp(a * gen.standard_normal() - c)
                    q1[i + 1, j + 1] = f * (p1[r, s] + p1[r + 1, s] + p1[r, s + 1] + p1[r + 1, s + 1])
                    q2[i + 1, j + 1] = f * (p2[r, s] + p2[r + 1, s] + p2[r, s + 1] + p2[r + 1, s + 1])
        else:
            for i in range(L):
                r = i + d
                for j in range(L):
                    s = j + d
                    f = 0.25 * math.exp(a * gen.standard_normal() - c)
                    q1[i + 1, j + 1] = f * (p1[r, s] + p1[r + 1, s] + p1[r, s + 1] + p1[r + 1, s + 1])
        p1, p2 = q1, q2
        lo_old = lo
    return p1[1:-1, 1:-1].copy(), p2[1:-1, 1:-1].copy()


def _offsets(Ls, first, last):
    off = np.zeros(len(Ls), dtype=np.int64)
    total = 0
    for n in range(first, last + 1):
        off[n] = total
        total += Ls[n] * Ls[n]
    return off, total


def partition_point_to_line(env: Environment, cfg: PolymerConfig, s_step: int, t_step: int, start) -> np.ndarray:
    """Evolve ``start`` (weights on the window of step ``s_step``) to ``t_step``.

    The output is the weight vector at ``t_step``; its sum is the
    point-to-line partition function started from ``start``.
    """
    if not 0 <= s_step < t_step <= env.last_step:
        raise DomainError("need 0 <= s_step < t_step <= last materialized step")
    lo, L = cfg.windows
    start = np.asarray(start, dtype=float)
    if start.shape != (L[s_step], L[s_step]):
        raise DomainError(f"start must have shape {(L[s_step], L[s_step])}")
    off, _ = _offsets(L, s_step + 1, t_step)
    noise = np.concatenate([env.field(n).ravel() for n in range(s_step + 1, t_step + 1)])
    return _evolve(start, lo[s_step], noise, off, lo, L, s_step + 1, t_step, cfg.beta, cfg.beta2 / 2)


def leakage(cfg: PolymerConfig, last_step: int | None = None) -> float:
    """Mass lost through the window boundary by the plain walk (``β = 0``)."""
    last = cfg.horizon if last_step is None else last_step
    lo, L = cfg.windows
    off, total = _offsets(L, 1, last)
    w = _evolve(np.ones((1, 1)), lo[0], np.zeros(total), off, lo, L, 1, last, 0.0, 0.0)
    return float(max(0.0, 1.0 - w.sum()))


def _check_leakage(cfg: PolymerConfig, last_step: int) -> float:
    lk = leakage(cfg, last_step)
    if lk > cfg.leakage_tol:
        warnings.warn(f"boundary leakage {lk:.2e} exceeds {cfg.leakage_tol:.0e}", AccuracyWarning, stacklevel=3)
    return lk


# ---------------------------------------------------------------------------
# block statistics


@dataclass(frozen=True)
class BlockSample:
    """Block functionals of one environment.

    Attributes
    ----------
    block_z : ndarray
        ``hk_{i-1} ◁ Z_i ▷ 1`` for ``i = 1..N-ℓ``.
    block_w : ndarray
        ``block_z - 1``.
    chain : float
        ``hk_0 ◁ Z_{t_0, t_{N-ℓ}} ▷ 1``.
    ratio : float
        ``chain / Π block_z``.
    omega : bool
        All ``|block_w| ≤ 1/2``.
    """

    block_z: np.ndarray
    block_w: np.ndarray
    chain: float
    ratio: float
    omega: bool


def block_statistics(env: Environment, cfg: PolymerConfig, grid: LatticeGrid) -> BlockSample:
    """Reference evaluation of all block functionals from a materialized environment."""
    st = grid.steps
    end = st[grid.n_blocks]
    zs = []
    for i in range(1, grid.n_blocks + 1):
        a, b = st[i - 1], st[i]
        hk = walk_kernel(cfg, a)
        zs.append(partition_point_to_line(env, cfg, a, b, hk).sum() if b > a else hk.sum())
    hk0 = walk_kernel(cfg, st[0])
    chain = partition_point_to_line(env, cfg, st[0], end, hk0).sum() if end > st[0] else hk0.sum()
    z = np.array(zs)
    return BlockSample(z, z - 1.0, float(chain), float(chain / np.prod(z)), bool(np.all(np.abs(z - 1) <= 0.5)))


@dataclass
class ReplicaTable:
    """Per-replica block functionals on a grid.

    ``block_z[r, i-1]`` is block ``i`` (``i = 1..N-1``), ``chain[r, k]`` is
    ``hk_0 ◁ Z_{t_0, t_k} ▷ 1`` (``k = 0..N-1``), and ``full[r]`` is
    ``hk_0 ◁ Z_{t_0, horizon} ▷ 1`` when requested.
    """

    grid: LatticeGrid
    block_z: np.ndarray
    chain: np.ndarray
    full: np.ndarray | None
    leakage: float
    warnings: list = field(default_factory=list)

    def sample(self, r: int, ell: int | None = None) -> BlockSample:
        ell = self.grid.ell if ell is None else ell
        m = self.grid.N - ell
        z = self.block_z[r, :m]
        chain = self.chain[r, m]
        return BlockSample(z, z - 1.0, float(chain), float(chain / np.prod(z)), bool(np.all(np.abs(z - 1) <= 0.5)))

    def ratios(self, ell: int) -> np.ndarray:
        m = self.grid.N - ell
        return self.chain[:, m] / np.prod(self.block_z[:, :m], axis=1)

    def omega(self, ell: int) -> np.ndarray:
        m = self.grid.N - ell
        return np.all(np.abs(self.block_z[:, :m] - 1.0) <= 0.5, axis=1)


def _replica(cfg: PolymerConfig, grid: LatticeGrid, replica: int, last: int):
    lo, L = cfg.windows
    st = grid.steps
    cuts = sorted((set(st) | {last} | set(range(0, last, _CHUNK))) & set(range(last + 1)))
    gen = _generator(cfg, replica)
    a, c = cfg.beta, cfg.beta2 / 2
    nb = grid.N - 1
    block_z, chain = np.ones(nb), np.ones(grid.N)
    state = {"chain": None, "block": None, "i": 0}

    def visit(step):
        if state["chain"] is None and step == st[0]:
            state["chain"] = walk_kernel(cfg, step)
        if state["chain"] is not None:
            for k in range(grid.N):
                if st[k] == step:
                    chain[k] = state["chain"].sum()
        i = state["i"]
        if state["block"] is not None and st[i] == step:
            block_z[i - 1] = state["block"].sum()
            state["block"] = None
        # open the next block; zero-length blocks are closed on the spot
        while state["block"] is None and i < nb and st[i] == step:
            i += 1
            hk = walk_kernel(cfg, step)
            if st[i] == step:
                block_z[i - 1] = hk.sum()
            else:
                state["block"] = hk
        state["i"] = i

    visit(cuts[0])
    for s, e in zip(cuts, cuts[1:]):
        live = [k for k in ("chain", "block") if state[k] is not None]
        if not live:
            gen.standard_normal(_offsets(L, s + 1, e)[1])
        else:
            w1 = state[live[0]]
            w2 = state[live[1]] if len(live) == 2 else w1
            w1, w2 = _evolve_draw(w1, w2, len(live) == 2, lo[s], gen, lo, L, s + 1, e, a, c)
            state[live[0]] = w1
            if len(live) == 2:
                state[live[1]] = w2
        visit(e)
    full = state["chain"].sum() if state["chain"] is not None else 1.0
    return block_z, chain, float(full)


def run_replicas(cfg: PolymerConfig, grid: LatticeGrid, replicas, full: bool = True, threads: int = 1) -> ReplicaTable:
    """Block functionals of many replicas in one sweep per replica.

    Parameters
    ----------
    replicas : int or sequence of int
        Count (replicas ``0..R-1``) or explicit replica indices.
    full : bool
        Also run the chain to the horizon (needed for the Markov check).
    threads : int
        Worker threads; results do not depend on it.
    """
    idx = list(range(replicas)) if isinstance(replicas, (int, np.integer)) else list(replicas)
    last = cfg.horizon if full else grid.steps[-1]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lk = _check_leakage(cfg, last)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)

    def work(r):
        return _replica(cfg, grid, r, last)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, idx))
    else:
        results = [work(r) for r in idx]
    block_z = np.array([r[0] for r in results])
    chain = np.array([r[1] for r in results])
    fulls = np.array([r[2] for r in results]) if full else None
    return ReplicaTable(grid, block_z, chain, fulls, lk, [str(w.message) for w in caught])


# ---------------------------------------------------------------------------
# finite kernel chains


@dataclass(frozen=True)
class KernelChain:
    """Nonnegative ``S × S`` blocks ``Z_1..Z_M`` and probability vectors ``hk_0..hk_M``."""

    blocks: tuple
    refs: tuple

    def __post_init__(self):
        blocks = tuple(np.asarray(z, float) for z in self.blocks)
        refs = tuple(np.asarray(h, float) for h in self.refs)
        if not blocks:
            raise DomainError("need at least one block")
        S = blocks[0].shape[0]
        if any(z.shape != (S, S) or np.any(z < 0) for z in blocks):
            raise DomainError("blocks must be nonnegative S x S matrices")
        if len(refs) != len(blocks) + 1:
            raise DomainError("need one reference vector per block boundary (M + 1)")
        if any(h.shape != (S,) or np.any(h < 0) or abs(h.sum() - 1) > 1e-12 for h in refs):
            raise DomainError("references must be probability vectors")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "refs", refs)

    @property
    def M(self) -> int:
        return len(self.blocks)

    @property
    def state_count(self) -> int:
        return self.blocks[0].shape[0]

    def Z(self, i: int) -> np.ndarray:
        return self.blocks[i - 1]

    def hk(self, i: int) -> np.ndarray:
        return self.refs[i]

    def D(self, i: int) -> np.ndarray:
        """``Z_i - (Z_i 1) ⊗ hk_i``."""
        Z = self.Z(i)
        return Z - np.outer(Z.sum(axis=1), self.hk(i))


def random_chain(rng: np.random.Generator, S: int, M: int) -> KernelChain:
    """Chain with exponential block entries and Dirichlet references."""
    blocks = [rng.exponential(size=(S, S)) for _ in range(M)]
    refs = [rng.dirichlet(np.ones(S)) for _ in range(M + 1)]
    return KernelChain(tuple(blocks), tuple(refs))


def interval_families(K: int):
    """All nonempty sets of disjoint integer intervals in ``[1, K]`` with every
    interval of length at least 2, each as a tuple of ``(i, j)`` pairs."""
    out = []

    def rec(start, acc):
        for i in range(start, K + 1):
            for j in range(i + 1, K + 1):
                fam = acc + [(i, j)]
                out.append(tuple(fam))
                rec(j + 1, fam)

    rec(1, [])
    return out


def decoupling_expand(chain: KernelChain, ell: int):
    """Both sides of the exact decoupling expansion on a finite chain.

    Returns
    -------
    lhs : float
        ``(hk_0 ◁ Z_1 • ... • Z_K ▷ 1) / Π_i (hk_{i-1} ◁ Z_i ▷ 1)`` with ``K = M - ell``.
    rhs : float
        ``1 + Σ_families Π_I (hk ◁ D_{i_I} • ... • D_{j_I - 1} • Z_{j_I} ▷ 1) / Π_{i ∈ I} (hk_{i-1} ◁ Z_i ▷ 1)``.
    terms : dict
        Family -> its summand.
    """
    K = chain.M - ell
    if not 1 <= K <= 12:
        raise PreconditionError("need 1 <= M - ell <= 12")
    one = np.ones(chain.state_count)
    den = np.array([chain.hk(i - 1) @ chain.Z(i) @ one for i in range(1, K + 1)])
    if np.any(den == 0):
        raise PreconditionError("a block denominator vanishes")
    v = chain.hk(0)
    for i in range(1, K + 1):
        v = v @ chain.Z(i)
    lhs = float(v @ one / np.prod(den))
    cache = {}
    for i in range(1, K + 1):
        for j in range(i + 1, K + 1):
            u = chain.hk(i - 1)
            for k in range(i, j):
                u = u @ chain.D(k)
            cache[(i, j)] = float(u @ chain.Z(j) @ one / np.prod(den[i - 1:j]))
    terms = {fam: math.prod(cache[I] for I in fam) for fam in interval_families(K)}
    rhs = 1.0 + math.fsum(terms.values())
    return lhs, rhs, terms


# ---------------------------------------------------------------------------
# empirical checks


def _one_sided_increase(ind_a: np.ndarray, ind_b: np.ndarray, z: float = 1.6448536269514722) -> bool:
    """True when the paired frequency of ``ind_b`` exceeds that of ``ind_a`` significantly."""
    d = ind_b.astype(float) - ind_a.astype(float)
    se = d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else 0.0
    return d.mean() > z * se if se > 0 else d.mean() > 0


def ratio_concentration(cfg: PolymerConfig, b: float, replicas: int, ells=(1, 2, 4), threads: int = 1,
                        table: ReplicaTable | None = None):
    """Ω-failure and ratio-exceedance frequencies across ``ℓ``.

    Returns a dict with ``rows`` (``ell, ell_log_b_inv, omega_fail, omega_fail_se,
    exceed, exceed_se``), the Spearman correlation of the exceedance with
    ``ℓ log b^{-1}`` and ``monotone``: no significant increase (one-sided, 95%)
    between consecutive ``ℓ`` for either frequency.
    """
    ells = sorted(ells)
    if table is None:
        table = run_replicas(cfg, lattice_grid(cfg, b, ells[0]), replicas, full=False, threads=threads)
    R = table.block_z.shape[0]
    rows, fails, exc = [], [], []
    for ell in ells:
        om = table.omega(ell)
        ex = om & (np.abs(table.ratios(ell) - 1.0) > 0.5)
        fails.append(~om)
        exc.append(ex)
        f, e = (~om).mean(), ex.mean()
        rows.append((ell, ell * table.grid.log_b_inv, f, math.sqrt(f * (1 - f) / R), e, math.sqrt(e * (1 - e) / R)))
    monotone = not any(
        _one_sided_increase(a, b_) for seq in (fails, exc) for a, b_ in zip(seq, seq[1:])
    )
    rho = stats.spearmanr([r[1] for r in rows], [r[4] for r in rows]).statistic if len(rows) > 2 else float("nan")
    return {"rows": rows, "spearman": float(rho), "monotone": monotone, "replicas": R}


def markov_upper_check(cfg: PolymerConfig, grid: LatticeGrid, r_grid, replicas: int, threads: int = 1,
                       table: ReplicaTable | None = None):
    """Frequencies of ``Z_full > e^r Z_{t_{N-ℓ}}`` against the Markov bound ``e^{-r}``.

    ``E[Z_full / Z_{t_{N-ℓ}}] = 1`` exactly on the lattice, so the bound is the
    plain Markov inequality.  Each row is ``(r, freq, bound, sigma, ok)`` with
    ``sigma = sqrt(e^{-r}(1-e^{-r})/R)`` and ``ok = freq <= bound + 4 sigma``.
    """
    if replicas < 1000 and table is None:
        raise PreconditionError("need at least 1000 replicas")
    if table is None:
        table = run_replicas(cfg, grid, replicas, full=True, threads=threads)
    R = table.block_z.shape[0]
    q = table.full / table.chain[:, grid.N - grid.ell]
    rows = []
    for r in r_grid:
        freq = float(np.mean(q > math.exp(r)))
        bound = math.exp(-r)
        sig = math.sqrt(bound * (1 - bound) / R)
        rows.append((r, freq, bound, sig, freq <= bound + 4 * sig))
    return rows


def clt_statistic(cfg: PolymerConfig, grid: LatticeGrid, replicas: int, threads: int = 1,
                  table: ReplicaTable | None = None):
    """Standardized block log-sums of polymer replicas.

    The centering ``(1 + f)/2 · loglog ε^{-1}`` is estimated as half the sum of
    the empirical block variances of ``log(hk ◁ Z_i ▷ 1)``.

    Returns
    -------
    dict
        ``h_prime`` (block statistic with the ``√loglog ε^{-1}`` scale),
        ``standardized`` (same, scaled by the estimated total variance),
        ``chain`` (full-chain analog), ``f_hat``, ``ks`` (statistic and p-value
        of ``standardized`` against N(0,1)).
    """
    if table is None:
        table = run_replicas(cfg, grid, replicas, full=False, threads=threads)
    from .harness.clt import standardize_log_sums

    m = grid.N - grid.ell
    logs = np.log(table.block_z[:, :m])
    res = standardize_log_sums(logs, grid.loglog)
    chain = (np.log(table.chain[:, m]) + res["center"]) / math.sqrt(grid.loglog)
    res["chain"] = chain
    return res
