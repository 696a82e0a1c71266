import numpy as np
import pytest

import scheme_analyzing as sa
import throughput_optimizing as to
from conftest import constant_env
from scheme_analyzing import AccessPolicy, NetworkEnv
from util import DomainError


def test_rates_conventional(baseline_env):
    rates = sa.rates_conventional(baseline_env, 0.0, 0.0)
    assert rates.mu_p == pytest.approx(0.63)
    assert rates.mu_s == pytest.approx(0.64)
    assert rates.feasible

    pinched = sa.rates_conventional(baseline_env, 0.0, rates.mu_p)
    assert pinched.mu_s == 0.0
    assert pinched.feasible

    overloaded = sa.rates_conventional(baseline_env, 0.0, 0.7)
    assert overloaded.mu_s == 0.0
    assert not overloaded.feasible


def test_rates_conventional_dead_primary_link():
    env = constant_env(p_ppd=0.0)
    rates = sa.rates_conventional(env, 0.0, 0.1)
    assert rates.mu_p == 0.0
    assert not rates.feasible


@pytest.mark.parametrize("lambda_p", [0.0, 0.1, 0.3, 0.6, 0.63, 0.8])
def test_s1_full_access_is_conventional(baseline_env, lambda_p):
    s1 = sa.rates_s1(baseline_env, 0.0, 1.0, lambda_p)
    sc = sa.rates_conventional(baseline_env, 0.0, lambda_p)
    assert s1.mu_p == pytest.approx(sc.mu_p, abs=1e-12)
    assert s1.mu_s == pytest.approx(sc.mu_s, abs=1e-12)
    assert s1.feasible == sc.feasible


def test_rates_s1(baseline_env):
    silent = sa.rates_s1(baseline_env, 0.0, 0.0, 0.2)
    assert silent.mu_p == pytest.approx(0.9)
    assert silent.mu_s == 0.0

    rates = sa.rates_s1(baseline_env, 0.0, 0.5, 0.2)
    assert rates.mu_p == pytest.approx(0.765)
    assert rates.mu_s == pytest.approx(0.5 * 0.8 * 0.8 * (1.0 - 0.2 / 0.765))
    assert rates.mu_s == pytest.approx(0.2364, abs=1e-4)
    assert rates.mu_s_idle == pytest.approx(0.32)


@pytest.mark.parametrize("a_s", [0.0, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("lambda_p", [0.0, 0.2, 0.5])
def test_s2_without_busy_access_is_s1(baseline_env, a_s, lambda_p):
    s2 = sa.rates_s2(baseline_env, 0.0, a_s, 0.0, lambda_p)
    s1 = sa.rates_s1(baseline_env, 0.0, a_s, lambda_p)
    assert s2.mu_p == pytest.approx(s1.mu_p, abs=1e-12)
    assert s2.mu_s == pytest.approx(s1.mu_s, abs=1e-12)


def test_s2_conventional_policy_matches_conventional(baseline_env):
    for lambda_p in np.linspace(0.0, 0.63, 8):
        s2 = sa.rates_s2(baseline_env, 0.0, 1.0, 0.0, lambda_p)
        sc = sa.rates_conventional(baseline_env, 0.0, lambda_p)
        assert abs(s2.mu_s - sc.mu_s) <= 1e-12


def test_rates_s2_extremes(baseline_env):
    silent = sa.rates_s2(baseline_env, 0.0, 0.0, 0.0, 0.3)
    assert silent.mu_p == pytest.approx(0.9)
    assert silent.mu_s == 0.0

    always = sa.rates_s2(baseline_env, 0.0, 1.0, 1.0, 0.0)
    assert always.mu_p == pytest.approx(0.0, abs=1e-15)
    assert always.mu_s == pytest.approx(0.8)


def test_rates_random(baseline_env):
    silent = sa.rates_random(baseline_env, 0.0, 0.2)
    assert silent.mu_p == pytest.approx(0.9)
    assert silent.mu_s == 0.0

    assert not sa.rates_random(baseline_env, 1.0, 0.1).feasible

    rates = sa.rates_random(baseline_env, 0.5, 0.225)
    assert rates.mu_p == pytest.approx(0.45)
    assert rates.mu_s == pytest.approx(0.2)


def test_rates_random_uses_whole_slot(crossover_env):
    assert crossover_env.secondary_success(0.0) > crossover_env.secondary_success(5e-4)
    rates = sa.rates_random(crossover_env, 1.0, 0.0)
    assert rates.mu_s == pytest.approx(np.exp(-1.0 / 5.0))


def test_boundary_random(baseline_env):
    assert sa.boundary_random(baseline_env, 0.0).mu_s == pytest.approx(0.8)
    assert sa.boundary_random(baseline_env, 0.225).mu_s == pytest.approx(0.2)
    pinch = sa.boundary_random(baseline_env, 0.9)
    assert pinch.mu_s == pytest.approx(0.0, abs=1e-15)
    assert pinch.feasible
    beyond = sa.boundary_random(baseline_env, 0.95)
    assert beyond.mu_s == 0.0
    assert not beyond.feasible


@pytest.mark.parametrize("lambda_p", [0.0, 0.05, 0.225, 0.5, 0.85])
def test_boundary_random_is_max_over_access(baseline_env, lambda_p):
    curve = to.secondary_rate_curve("So", baseline_env, 0.0, lambda_p)
    a_best, value = to.grid_oracle(curve, 0.0, 1.0, 100_001, vectorized=True)
    boundary = sa.boundary_random(baseline_env, lambda_p).mu_s
    assert boundary == pytest.approx(value, rel=1e-6, abs=1e-12)
    assert sa.optimal_a_random(baseline_env, lambda_p) == pytest.approx(a_best, abs=1e-3)


def test_rates_for_policy_dispatch(baseline_env):
    policy = AccessPolicy("S2", tau=0.0, a_s=0.4, b_s=0.3)
    assert sa.rates_for_policy(baseline_env, policy, 0.1) == sa.rates_s2(
        baseline_env, 0.0, 0.4, 0.3, 0.1
    )
    assert sa.rates_for_policy(baseline_env, AccessPolicy("So", a_s=0.3), 0.1) == (
        sa.rates_random(baseline_env, 0.3, 0.1)
    )


def test_access_policy_pins_scheme_knobs():
    conventional = AccessPolicy("Sc", tau=1e-4, a_s=0.3, b_s=0.5)
    assert (conventional.a_s, conventional.b_s) == (1.0, 0.0)
    assert AccessPolicy("S1", a_s=0.3, b_s=0.5).b_s == 0.0
    random_access = AccessPolicy("So", tau=1e-4, a_s=0.3, b_s=0.5)
    assert (random_access.tau, random_access.b_s) == (0.0, 0.0)

    with pytest.raises(DomainError, match="scheme"):
        AccessPolicy("S3")
    with pytest.raises(DomainError, match="a_s"):
        AccessPolicy("S2", a_s=1.2)
    with pytest.raises(DomainError):
        AccessPolicy("S1", tau=-1e-4)


def test_network_env_validation(baseline_env):
    with pytest.raises(DomainError, match="p_ppd"):
        NetworkEnv(
            primary_link=baseline_env.primary_link,
            secondary_link=baseline_env.secondary_link,
            success_mode="constant",
            constant_success_s=0.8,
        )
    with pytest.raises(DomainError):
        baseline_env.check_tau(baseline_env.slot_duration)
    assert baseline_env.digest() == constant_env().digest()
    assert baseline_env.digest() != constant_env(p_md=0.2).digest()


def test_secondary_rate_zero_only_when_silent_or_pinched(baseline_env):
    rng = np.random.default_rng(5)
    for _ in range(200):
        a_s, b_s = rng.uniform(0.05, 1.0, 2)
        lambda_p = rng.uniform(0.0, 0.2)
        rates = sa.rates_s2(baseline_env, 0.0, a_s, b_s * 0.5, lambda_p)
        if rates.feasible and lambda_p < rates.mu_p:
            assert rates.mu_s > 0.0
    assert sa.rates_s1(baseline_env, 0.0, 0.0, 0.1).mu_s == 0.0


def test_empty_queue_factor_within_unit_interval(sensing_env):
    rng = np.random.default_rng(8)
    for _ in range(500):
        tau = rng.uniform(0.0, 0.5) * sensing_env.slot_duration
        a_s, b_s, lambda_p = rng.uniform(0.0, 1.0, 3)
        rates = sa.rates_s2(sensing_env, tau, a_s, b_s, lambda_p)
        assert 0.0 <= rates.mu_p <= 1.0
        assert 0.0 <= rates.mu_s <= 1.0
        if rates.feasible and rates.mu_s_idle > 0.0:
            assert 0.0 <= rates.mu_s / rates.mu_s_idle <= 1.0 + 1e-12


def test_region_nesting_at_fixed_tau(sensing_env):
    """Boundaries of S_c, S_1 and S_2 are nested at every (lambda_p, tau)."""
    taus = np.linspace(0.0, 0.5 * sensing_env.slot_duration, 50)
    lambda_ps = np.linspace(0.0, sensing_env.primary_success(), 50)
    for tau in taus:
        for lambda_p in lambda_ps:
            sc = to.maximize_at_tau("Sc", sensing_env, lambda_p, tau)
            s1 = to.maximize_at_tau("S1", sensing_env, lambda_p, tau)
            s2 = to.maximize_at_tau("S2", sensing_env, lambda_p, tau, b_points=21)
            assert sc.lambda_s_max <= s1.lambda_s_max + 1e-12
            assert s1.lambda_s_max <= s2.lambda_s_max + 1e-12
