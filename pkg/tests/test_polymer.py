import itertools
import math

import numpy as np
import pytest

from shflab import polymer as P
from shflab.errors import DomainError, PreconditionError


def test_config_validation_and_coupling():
    cfg = P.PolymerConfig(horizon=256, theta_lattice=1.0)
    L = math.log(256)
    assert cfg.beta2 == pytest.approx(math.pi / L * (1 + 1 / L))
    assert cfg.averaging_scale == pytest.approx(1 / 16)
    with pytest.raises(DomainError):
        P.PolymerConfig(horizon=2)
    with pytest.raises(DomainError):
        P.PolymerConfig(horizon=256, domain_halfwidth=10)
    with pytest.raises(DomainError):
        P.PolymerConfig(horizon=256, disorder="stable")
    with pytest.raises(DomainError):
        P.PolymerConfig(horizon=256, theta_lattice=-10.0)


def test_windows_move_by_at_most_one_site():
    lo, L = P.PolymerConfig(horizon=400).windows
    hi = lo + L - 1
    assert np.all(np.diff(lo) >= 0) and np.all(np.diff(lo) <= 1)
    assert np.all(np.diff(hi) >= 0) and np.all(np.diff(hi) <= 1)
    n = np.arange(len(lo))
    assert np.all(lo >= 0) and np.all(hi <= n)


def test_leakage_below_target():
    assert P.leakage(P.PolymerConfig(horizon=512)) < 1e-6


def test_walk_kernel_is_binomial():
    cfg = P.PolymerConfig(horizon=16)
    w = P.walk_kernel(cfg, 6)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert w[3, 3] == pytest.approx((math.comb(6, 3) / 64) ** 2)


def test_environment_is_reproducible_per_replica():
    cfg = P.PolymerConfig(horizon=16, seed=9)
    a, b = P.sample_environment(cfg, 3), P.sample_environment(cfg, 3)
    c = P.sample_environment(cfg, 4)
    assert all(np.array_equal(a.field(n), b.field(n)) for n in range(1, 17))
    assert not np.array_equal(a.field(5), c.field(5))


def test_partition_function_against_path_enumeration():
    cfg = P.PolymerConfig(horizon=5, seed=1)
    env = P.sample_environment(cfg, 0)
    lo, _ = cfg.windows
    a, c = cfg.beta, cfg.beta2 / 2
    total = 0.0
    for steps in itertools.product([(0, 0), (1, 0), (0, 1), (1, 1)], repeat=5):
        k = np.cumsum(steps, axis=0)
        e = sum(a * env.field(n)[k[n - 1][0] - lo[n], k[n - 1][1] - lo[n]] - c for n in range(1, 6))
        total += math.exp(e) / 4**5
    z = P.partition_point_to_line(env, cfg, 0, 5, np.ones((1, 1))).sum()
    assert z == pytest.approx(total, rel=1e-13)


def test_mean_partition_function_is_one():
    cfg = P.PolymerConfig(horizon=16, seed=5)
    grid = P.lattice_grid(cfg, b=0.5, ell=1)
    tab = P.run_replicas(cfg, grid, 4000, full=True)
    z = tab.full
    assert abs(z.mean() - 1) <= 4 * z.std(ddof=1) / math.sqrt(len(z))


def test_engine_matches_reference_and_ignores_threads():
    cfg = P.PolymerConfig(horizon=64, seed=3, averaging_scale=1 / 8)
    grid = P.lattice_grid(cfg, b=0.5, ell=1)
    tab = P.run_replicas(cfg, grid, 3, full=True)
    tab2 = P.run_replicas(cfg, grid, 3, full=True, threads=2)
    assert np.array_equal(tab.block_z, tab2.block_z) and np.array_equal(tab.full, tab2.full)
    for r in range(3):
        ref = P.block_statistics(P.sample_environment(cfg, r), cfg, grid)
        got = tab.sample(r)
        np.testing.assert_allclose(got.block_z, ref.block_z, rtol=1e-12)
        assert got.chain == pytest.approx(ref.chain, rel=1e-12)
        s0 = grid.steps[0]
        full = P.partition_point_to_line(P.sample_environment(cfg, r), cfg, s0, 64, P.walk_kernel(cfg, s0)).sum()
        assert tab.full[r] == pytest.approx(full, rel=1e-12)


def test_lattice_grid():
    cfg = P.PolymerConfig(horizon=1024, averaging_scale=1 / 128)
    g = P.lattice_grid(cfg, b=0.5, ell=2)
    assert g.N == 7 and g.steps == (0, 0, 1, 4, 16, 64, 256) and g.n_blocks == 5
    with pytest.raises(DomainError):
        P.lattice_grid(cfg, b=0.5, ell=7)


def test_interval_families():
    fams = P.interval_families(4)
    assert len(fams) == 7
    assert ((1, 2), (3, 4)) in fams
    assert all(j - i >= 1 for fam in fams for i, j in fam)


def test_decoupling_identity_on_small_chains():
    rng = np.random.default_rng(0)
    for S, M, ell in [(1, 3, 1), (2, 5, 1), (3, 6, 2)]:
        lhs, rhs, terms = P.decoupling_expand(P.random_chain(rng, S, M), ell)
        assert rhs == pytest.approx(lhs, rel=1e-12)
    # a single state makes every D vanish, so only the constant term survives
    lhs, rhs, terms = P.decoupling_expand(P.random_chain(rng, 1, 4), 1)
    assert all(abs(v) < 1e-15 for v in terms.values()) and lhs == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        P.decoupling_expand(P.random_chain(rng, 2, 3), 3)


def test_checks_enforce_sample_sizes_and_shapes():
    cfg = P.PolymerConfig(horizon=64, seed=1, averaging_scale=1 / 8)
    grid = P.lattice_grid(cfg, 0.5, 1)
    with pytest.raises(PreconditionError):
        P.markov_upper_check(cfg, grid, [0, 1], replicas=10)
    out = P.ratio_concentration(cfg, 0.5, 50, ells=(1, 2))
    assert [r[0] for r in out["rows"]] == [1, 2] and out["replicas"] == 50
    clt = P.clt_statistic(cfg, grid, 50)
    assert clt["standardized"].shape == (50,)
