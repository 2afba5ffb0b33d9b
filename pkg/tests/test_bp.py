import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain2, cycle4, path3, random_ferro, random_tree, triangle
from isingvi import (DomainError, IsingModel, beliefs_from_messages,
                     bp_error_bound, bp_iterate, bp_step, dual_bethe,
                     dual_bethe_gradient, exact_log_z, generate_topology,
                     local_consistency_check, messages_from_csv,
                     messages_to_csv, mf_objective, model_norms,
                     node_estimates, primal_bethe, product_distribution,
                     region_membership)
from refimpl import fd_gradient, ref_dual_bethe


def test_step_by_hand():
    # path 0-1-2: message 0->1 depends only on h_0; 1->2 sees 0->1
    model = path3(0.5, 0.2)
    theta = math.tanh(0.5)
    nu = np.full(4, 0.3)
    out = bp_step(model, nu)
    d_01 = 0  # edges sorted: (0,1) then (1,2)
    assert out[d_01] == pytest.approx(math.tanh(0.2), abs=1e-15)
    d_12 = 2
    want = math.tanh(0.2 + math.atanh(theta * 0.3))
    assert out[d_12] == pytest.approx(want, abs=1e-15)


def test_dual_value_frozen():
    model = chain2(1.0, 0.0)
    assert dual_bethe(model, np.zeros(2)) == pytest.approx(
        math.log(4.0 * math.cosh(1.0)), abs=1e-12)


def test_dual_matches_reference(rng):
    for model in (chain2(0.7, 0.3), triangle(0.4, 0.1), cycle4(0.6, 0.0),
                  random_ferro(7, 11, rng)):
        for _ in range(8):
            nu = rng.uniform(-0.9, 0.9, size=2 * model.m)
            assert dual_bethe(model, nu) == pytest.approx(
                ref_dual_bethe(model, nu), abs=1e-11)


def test_dual_gradient_frozen():
    model = chain2(1.0, 0.0)
    g = dual_bethe_gradient(model, np.ones(2))
    want = -math.tanh(1.0) / (1.0 + math.tanh(1.0))
    assert np.allclose(g, want, atol=1e-14)


def test_dual_gradient_matches_fd(rng):
    model = cycle4(0.5, 0.2)
    for _ in range(15):
        nu = rng.uniform(0.05, 0.9, size=2 * model.m)
        g = dual_bethe_gradient(model, nu)
        g_fd = fd_gradient(lambda v: ref_dual_bethe(model, v), nu)
        assert np.allclose(g, g_fd, atol=1e-6)
        assert np.abs(g).max() <= 1.0 + 1e-12
    with pytest.raises(DomainError):
        dual_bethe_gradient(model, np.full(8, -0.1))


def test_iterate_tree_is_exact(rng):
    model = random_tree(9, rng)
    nu, trace = bp_iterate(model, max_steps=200, tol=1e-14)
    assert trace.converged
    exact = exact_log_z(model)
    assert trace.objective[-1] == pytest.approx(exact.log_z, abs=1e-9)
    assert np.allclose(node_estimates(model, nu), exact.node_means, atol=1e-9)


def test_iterate_monotone_from_ones():
    model = cycle4(0.7, 0.2)
    nu, trace = bp_iterate(model, init="ones", max_steps=300, tol=0.0)
    cur = np.ones(2 * model.m)
    for _ in range(40):
        nxt = bp_step(model, cur)
        assert np.all(nxt <= cur)
        cur = nxt
    assert np.diff(trace.objective).min() >= -1e-11


def test_iterate_from_zeros_increasing():
    model = cycle4(0.7, 0.2)
    cur = np.zeros(2 * model.m)
    for _ in range(40):
        nxt = bp_step(model, cur)
        assert np.all(nxt >= cur)
        cur = nxt
    nu_ones, t_ones = bp_iterate(model, init="ones", max_steps=2000, tol=1e-13)
    nu_zeros, t_zeros = bp_iterate(model, init="zeros", max_steps=2000, tol=1e-13)
    assert np.allclose(nu_ones, nu_zeros, atol=1e-10)
    assert t_ones.objective[-1] == pytest.approx(t_zeros.objective[-1], abs=1e-10)


def test_region_membership():
    model = cycle4(0.7, 0.2)
    nu1 = bp_step(model, np.ones(2 * model.m))
    r = region_membership(model, nu1)
    assert r.in_s_pre and not r.fixed_point
    assert r.status == "in_S_pre"
    r0 = region_membership(model, bp_step(model, np.zeros(2 * model.m)))
    assert r0.in_s_post
    nu_fix, _ = bp_iterate(model, max_steps=5000, tol=1e-15)
    rf = region_membership(model, nu_fix)
    assert rf.fixed_point and rf.status == "fixed_point"
    assert abs(rf.slack).max() <= 1e-12


def test_node_estimates_and_beliefs_zero_field():
    model = cycle4(0.9, 0.0)
    nu = np.zeros(2 * model.m)
    assert np.all(node_estimates(model, nu) == 0.0)
    dist = beliefs_from_messages(model, nu)
    assert np.allclose(dist.node_means, 0.0, atol=1e-15)
    assert np.allclose(dist.edge_stats[:, 2], math.tanh(0.9), atol=1e-14)


def test_beliefs_marginals_match_estimates_at_fixed_point():
    model = triangle(0.5, 0.3)
    nu, _ = bp_iterate(model, max_steps=5000, tol=1e-15)
    dist = beliefs_from_messages(model, nu)
    est = node_estimates(model, nu)
    assert np.allclose(dist.node_means, est, atol=1e-12)
    assert np.allclose(dist.edge_stats[:, 0], est[model.edges[:, 0]], atol=1e-12)
    assert np.allclose(dist.edge_stats[:, 1], est[model.edges[:, 1]], atol=1e-12)
    assert local_consistency_check(dist) <= 1e-12
    with pytest.raises(DomainError):
        beliefs_from_messages(model, np.ones(2 * model.m))


def test_primal_of_product_distribution_is_mf(rng):
    model = triangle(0.4, 0.2)
    for _ in range(10):
        x = rng.uniform(-0.8, 0.8, size=model.n)
        dist = product_distribution(model, x)
        assert primal_bethe(model, dist) == pytest.approx(
            mf_objective(model, x), abs=1e-12)


def test_primal_equals_dual_at_fixed_point():
    for model in (triangle(0.5, 0.3), cycle4(0.6, 0.1), path3(0.8, 0.4)):
        nu, trace = bp_iterate(model, max_steps=10**4, tol=1e-15)
        dist = beliefs_from_messages(model, nu)
        assert primal_bethe(model, dist) == pytest.approx(
            trace.objective[-1], abs=1e-9)


def test_local_consistency_violation_frozen():
    from isingvi import LocalDistribution
    model = chain2(0.5, 0.0)
    dist = LocalDistribution(node_means=np.array([0.0, 0.5]),
                             edge_stats=np.array([[0.0, 0.5, 1.0]]),
                             edges=model.edges.copy())
    # cell (+,-) = (1 + 0.0 - 0.5 - 1.0)/4 = -0.125 and means agree
    assert local_consistency_check(dist) == pytest.approx(0.125, abs=1e-15)
    with pytest.raises(DomainError):
        primal_bethe(model, dist)


def test_error_bound_values():
    norms = model_norms(cycle4(1.0, 0.0))
    assert norms.m == 4 and norms.n == 4 and norms.j_linf == 1.0
    assert bp_error_bound(norms, 8) == pytest.approx(math.sqrt(32.0), abs=1e-12)
    thm2, l1 = bp_error_bound(norms, 10, h_min=0.5)
    assert thm2 == pytest.approx(math.sqrt(8 * 4 * 4 * 2.0 / 10), abs=1e-12)
    assert l1 == pytest.approx(2 * 4 * 2.0 / (math.tanh(0.5) * 10), abs=1e-12)
    with pytest.raises(DomainError):
        bp_error_bound(norms, 0)
    with pytest.raises(DomainError):
        bp_error_bound(norms, 5, h_min=0.0)


def test_cycle_messages_closed_form():
    model = generate_topology("cycle", 0.55, 0.0, n=6)
    theta = math.tanh(0.55)
    nu = np.ones(2 * model.m)
    for t in range(1, 30):
        nu = bp_step(model, nu)
        assert np.allclose(nu, theta ** t, atol=1e-13, rtol=0)


def test_messages_csv_round_trip(rng):
    model = cycle4(0.5, 0.2)
    nu = rng.uniform(0, 1, size=2 * model.m)
    text = messages_to_csv(model, nu)
    back = messages_from_csv(model, text)
    assert np.array_equal(back, nu)
    with pytest.raises(DomainError):
        messages_from_csv(triangle(0.5, 0.2), text)


def test_custom_init_array():
    model = path3(0.5, 0.2)
    nu0 = np.full(4, 0.25)
    nu, trace = bp_iterate(model, init=nu0, max_steps=60, tol=0.0)
    cur = nu0.copy()
    for _ in range(60):
        cur = bp_step(model, cur)
    assert np.allclose(cur, nu, atol=1e-13, rtol=0)
    assert trace.steps == 60
    with pytest.raises(DomainError):
        bp_iterate(model, init=np.full(4, 1.5))


def test_single_node_and_empty_graph():
    lonely = IsingModel(1, None, None, np.array([0.8]))
    nu, trace = bp_iterate(lonely, max_steps=5, tol=1e-12)
    assert nu.shape == (0,)
    assert trace.objective[-1] == pytest.approx(
        math.log(2 * math.cosh(0.8)), abs=1e-14)
    assert node_estimates(lonely, nu)[0] == pytest.approx(math.tanh(0.8), abs=1e-15)


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10**6))
def test_step_is_monotone_map_on_box(seed):
    r = np.random.default_rng(seed)
    model = random_ferro(5, 7, r)
    lo = r.uniform(0, 1, size=2 * model.m)
    hi = np.minimum(lo + r.uniform(0, 0.5, size=2 * model.m), 1.0)
    assert np.all(bp_step(model, lo) <= bp_step(model, hi))
