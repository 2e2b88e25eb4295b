import math

import numpy as np
import pytest

from stspbo import theory
from stspbo.errors import DomainError, ResourceError
from stspbo.rng import derive

import oracles


@pytest.fixture
def env():
    f = np.array([[0.0, 2.0, 1.0, 3.0],
                  [1.0, 2.0, 4.0, 0.0],
                  [3.0, 0.0, 1.0, 1.0]])
    return theory.FiniteEnv(f, np.array([0.5, 0.3, 0.2]))


def test_posterior_empty_history(env):
    assert np.array_equal(theory.exact_posterior(env, []), env.prior)


def test_posterior_pinning(env):
    assert theory.exact_posterior(env, [(0, 3.0)]).tolist() == [0.0, 0.0, 1.0]


def test_posterior_partial_matches_enumeration(env):
    post = theory.exact_posterior(env, [(1, 2.0)])
    manual = np.array([0.5, 0.3, 0.0]) / 0.8
    assert np.allclose(post, manual, atol=1e-15)


def test_posterior_inconsistent(env):
    with pytest.raises(DomainError):
        theory.exact_posterior(env, [(0, 7.0)])


def test_invalid_env():
    with pytest.raises(DomainError):
        theory.FiniteEnv([[1.0, 2.0]], [0.5])
    with pytest.raises(DomainError):
        theory.FiniteEnv([[np.nan, 2.0]], [1.0])


def test_ba_target_limits(env):
    point = np.array([0.0, 1.0, 0.0])
    tgt = theory.exact_ba_target(env, point, 1e6)
    assert tgt.conditional[1, 2] >= 0.999
    assert np.allclose(theory.exact_ba_target(env, env.prior, 0.0).conditional, 0.25, atol=1e-15)


def test_ba_target_two_members_matches_loop_oracle():
    f = np.array([[0.0, 1.0, 2.0], [2.0, 0.5, 0.0]])
    w = np.array([0.6, 0.4])
    env = theory.FiniteEnv(f, w)
    d = env.distortion
    p = np.full((2, 3), 1 / 3)
    for _ in range(40):
        p, _ = oracles.ba_step(d, 0.7, p, w)
    tgt = theory.exact_ba_target(env, w, 0.7, k_max=40, tol=0.0)
    assert np.max(np.abs(tgt.conditional - p)) <= 1e-12
    assert np.allclose(tgt.marginal, w @ p, atol=1e-14)


def test_mutual_info_closed_forms():
    same = theory.ExactTarget(np.tile([0.2, 0.8], (2, 1)), np.array([0.2, 0.8]), 1.0)
    assert theory.exact_mutual_info(same, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    disjoint = theory.ExactTarget(np.eye(2), np.array([0.5, 0.5]), 1.0)
    assert theory.exact_mutual_info(disjoint, [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_mutual_info_random_against_definition():
    rng = np.random.default_rng(4)
    for _ in range(10):
        cond = rng.dirichlet(np.ones(5), size=3)
        w = rng.dirichlet(np.ones(3))
        q = w @ cond
        ref = sum(w[i] * cond[i, x] * math.log(cond[i, x] / q[x])
                  for i in range(3) for x in range(5))
        got = theory.exact_mutual_info(theory.ExactTarget(cond, q, 1.0), w)
        assert got == pytest.approx(ref, abs=1e-12)


def test_identity_point_mass_residual_zero(env):
    post = np.array([1.0, 0.0, 0.0])
    r = theory.check_fixed_target_identity(env, 1.0, np.full(4, 0.25), posterior=post)
    assert r <= 1e-15
    tgt = theory.exact_ba_target(env, post, 1.0)
    assert theory.outcome_mutual_info(env, tgt.conditional, post, np.full(4, 0.25)) == 0.0


def test_identity_async_against_joint_table(env):
    s = np.full(4, 0.25)
    tgt = theory.exact_ba_target(env, env.prior, 1.0)
    info = oracles.joint_outcome_info(env.functions, env.prior, tgt.conditional, s)
    assert theory.outcome_mutual_info(env, tgt.conditional, env.prior, s) == pytest.approx(info, abs=1e-12)
    lhs = oracles.expected_loss_after_query(env.functions, env.prior, tgt.conditional, s, 1.0)
    rhs = oracles.lagrangian(env.distortion, 1.0, tgt.conditional, env.prior) - info
    assert abs(lhs - rhs) < 1e-9
    assert theory.check_fixed_target_identity(env, 1.0, s, "async") < 1e-9


def test_identity_sync_batch(env):
    assert theory.check_fixed_target_identity(env, 1.0, np.full(4, 0.25), "sync", 2) < 1e-9


def test_identity_perturbation_detected(env):
    r = theory.check_fixed_target_identity(env, 1.0, np.full(4, 0.25), perturb=1e-3)
    assert r > 1e-6


def test_bad_selection_and_mode(env):
    with pytest.raises(DomainError):
        theory.check_fixed_target_identity(env, 1.0, np.full(3, 1 / 3))
    with pytest.raises(DomainError):
        theory.check_fixed_target_identity(env, 1.0, np.full(4, 0.25), mode="batch")


def test_randomized_identities_and_decrease():
    for e in range(15):
        rng = derive(99, "test-env", e)
        env = theory.random_env(rng, int(rng.integers(2, 5)), int(rng.integers(2, 4)))
        sel = rng.dirichlet(np.ones(env.n_points))
        for beta in (0.1, 1.0, 10.0):
            assert theory.check_fixed_target_identity(env, beta, sel, "async") < 1e-9
            assert theory.check_fixed_target_identity(env, beta, sel, "sync", 2) < 1e-9
            assert theory.single_step_decrease(env, beta, "async") >= -1e-9
            assert theory.single_step_decrease(env, beta, "sync", 2) >= -1e-9


def test_ba_beats_ts_and_uniform(env):
    for beta in (0.1, 1.0, 10.0):
        ba = theory.exact_ba_target(env, env.prior, beta)
        l_ba = theory.exact_loss(env, ba.conditional, env.prior, beta)
        assert l_ba <= theory.exact_loss(env, theory.ts_conditional(env), env.prior, beta) + 1e-9
        assert l_ba <= theory.exact_loss(env, theory.uniform_conditional(env), env.prior, beta) + 1e-9


def test_telescoping_base_case(env):
    res = theory.check_telescoping(env, 1.0, 1, "async")
    tgt = theory.exact_ba_target(env, env.prior, 1.0)
    one = theory.outcome_mutual_info(env, tgt.conditional, env.prior, tgt.marginal)
    assert res.cumulative_mi == pytest.approx(one, abs=1e-15)
    assert res.satisfied


def test_telescoping_async_and_sync():
    env = theory.informative_env(0, 1.0)
    a = theory.check_telescoping(env, 1.0, 5, "async")
    assert a.satisfied and a.slack >= 0 and a.cumulative_mi > 0
    s = theory.check_telescoping(env, 1.0, 3, "sync", 2)
    assert s.satisfied and s.slack >= 0
    assert s.bound == pytest.approx(2 * a.bound)


def test_telescoping_guards(env):
    with pytest.raises(DomainError):
        theory.check_telescoping(env, 1.0, 0)
    with pytest.raises(ResourceError):
        theory.check_telescoping(env, 1.0, 9, "sync", 3)


def test_suite_small_and_deterministic():
    a = theory.run_suite(n_envs=5, seed=7)
    b = theory.run_suite(n_envs=5, seed=7)
    assert a["passed"]
    assert theory.report_json(a) == theory.report_json(b)
    assert not theory.run_suite(n_envs=3, seed=7, perturb=1e-3)["passed"]
