import math

import numpy as np
import pytest

from oracles import raw_sgg2, raw_w_block, raw_z_block, with_error
from shflab import diagrams as D
from shflab.errors import CapabilityError, DomainError
from shflab.gaussnet import evaluate_closed
from shflab.kernels import QuadratureSpec
from shflab.moments2 import (
    BlockQuery,
    fit_shape_constant,
    sg2_one,
    sgg2_one,
    w_block_second_moment,
    z_block_smoothed_second_moment,
)

# --- second-moment reductions ----------------------------------------------------


def test_sgg2_against_raw_network():
    val = sgg2_one(0.0, 1.0, (0, 0), (0.4, 0.1))
    ref, err = with_error(raw_sgg2, 0.0, 1.0, (0, 0), (0.4, 0.1))
    assert abs(val - ref) <= 2 * max(err, 1e-9 * abs(ref))


def test_sgg2_coincident_points_is_infinite():
    assert sgg2_one(0.0, 1.0, (0.2, 0.2), (0.2, 0.2)) == math.inf
    assert sg2_one(0.0, 0.5, (0, 0), (1, 0)) == pytest.approx(1 + sgg2_one(0.0, 0.5, (0, 0), (1, 0)))


def test_sgg2_decreases_with_distance():
    vals = [sgg2_one(0.0, 1.0, (0, 0), (d, 0)) for d in (0.01, 0.1, 1.0, 3.0)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("theta,tau,T", [(0.0, 1e-3, 0.1), (-2.0, 1e-6, 1e-2), (1.0, 0.5, 0.5)])
def test_w_block_against_raw_network(theta, tau, T):
    val = w_block_second_moment(BlockQuery(theta, tau, T))
    ref, err = with_error(raw_w_block, theta, tau, T)
    assert abs(val - ref) <= 2 * max(err, 1e-9 * abs(ref))


def test_z_block_against_raw_network():
    theta, tau, T, r = 0.0, 1e-3, 0.1, 0.3
    val = z_block_smoothed_second_moment(BlockQuery(theta, tau, T, r))
    ref, err = with_error(raw_z_block, theta, tau, T, r)
    assert abs(val - ref) <= 2 * max(err, 1e-9 * abs(ref))


def test_z_block_large_r_limit():
    q = BlockQuery(0.0, 1e-3, 0.1)
    limit = (1 + w_block_second_moment(q)) / (4 * math.pi)
    far = z_block_smoothed_second_moment(BlockQuery(0.0, 1e-3, 0.1, 1e4))
    assert far == pytest.approx(limit, rel=1e-4)


def test_block_query_validation():
    with pytest.raises(DomainError):
        BlockQuery(0.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        BlockQuery(0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        z_block_smoothed_second_moment(BlockQuery(0.0, 1.0, 1.0))
    assert w_block_second_moment(BlockQuery(0.0, 0.0, 1.0)) == math.inf


def test_fit_shape_constant():
    assert fit_shape_constant([1.0, 2.0, 3.0], [1.0, 1.0, 2.0]) == 2.0


# --- diagrams --------------------------------------------------------------------


def test_diagram_enumeration_counts():
    assert len(D.pairs(3)) == 3
    # sequences of pairs with adjacent entries distinct: 3 * 2^(m-1)
    assert len(D.enumerate_dgm(3, 3)) == 3 + 6 + 12
    star = D.enumerate_dgm_star(3, 3)
    assert all(d.covers_all() for d in star)
    # one pair only, so the covering diagram of two particles is unique
    assert len(D.enumerate_dgm_star(2, 4)) == 1
    with pytest.raises(DomainError):
        D.Diagram(2, ((1, 2), (1, 2)))


def _near_point_test(d):
    return D.GaussianTest.isotropic(2, 1e-10, [(0.0, 0.0), (d, 0.0)])


@pytest.mark.parametrize("theta,t,d", [(0.0, 1.0, 0.5), (1.0, 1.0, 1.0)])
def test_single_pair_diagram_reproduces_two_point_kernel(theta, t, d):
    dg = D.enumerate_dgm_star(2, 1)[0]
    c = D.sgsum_eval(theta, dg, t, _near_point_test(d), method="quadrature")
    assert c.value == pytest.approx(sgg2_one(theta, t, (0, 0), (d, 0)), rel=1e-4)


def test_monte_carlo_route_is_unbiased():
    dg = D.enumerate_dgm_star(2, 1)[0]
    ref = sgg2_one(0.0, 1.0, (0, 0), (0.5, 0))
    c = D.sgsum_eval(0.0, dg, 1.0, _near_point_test(0.5), QuadratureSpec(rel_tol=1e-3, seed=3), method="mc",
                     n_samples=100_000)
    assert abs(c.value - ref) <= 4 * c.stderr
    assert c.method == "simplex-MC" and c.samples >= 100_000


def test_length_two_quadrature_agrees_with_monte_carlo():
    dg = D.Diagram(3, ((1, 2), (2, 3)))
    test = D.GaussianTest.isotropic(3, 0.05, [(0, 0), (0.3, 0), (0, 0.3)])
    q = D.sgsum_eval(0.0, dg, 1.0, test, method="quadrature")
    mc = D.sgsum_eval(0.0, dg, 1.0, test, QuadratureSpec(rel_tol=1e-3, seed=5), method="mc", n_samples=200_000)
    assert abs(q.value - mc.value) <= 4 * math.hypot(q.stderr, mc.stderr)


def test_diagram_network_meeting_density():
    # with no interaction time the value is 4π times the density of the two particles meeting
    dg = D.Diagram(2, ((1, 2),))
    test = D.GaussianTest.isotropic(2, 0.2)
    net = D.diagram_network(dg, test, [np.array([0.1]), np.array([0.2])], [np.array([1e-300])])
    assert float(evaluate_closed(net)[0]) == pytest.approx(4 * math.pi / (2 * math.pi * 0.6), rel=1e-10)


def test_capability_and_domain_errors():
    long = D.enumerate_dgm_star(3, 3)[-1]
    test = D.GaussianTest.isotropic(3, 0.1)
    with pytest.raises(CapabilityError):
        D.sgsum_eval(0.0, long, 1.0, test, method="quadrature")
    with pytest.raises(DomainError):
        D.sgsum_eval(0.0, long, 1.0, test, method="bogus")
    with pytest.raises(DomainError):
        D.sgsum_eval(0.0, long, 1.0, D.GaussianTest.isotropic(2, 0.1))


def test_truncated_moments_block_structure():
    test = D.GaussianTest.isotropic(2, 0.1, [(0, 0), (0.5, 0)])
    tm = D.moments_truncated(0.0, 2, 1.0, test, 2, centered=True)
    assert tm.heat_term == 0.0
    assert len(tm.partial_sums) == len(tm.block_sums) >= 1
    assert tm.partial_sums[0] == pytest.approx(tm.block_sums[0])
