import numpy as np
import pytest

import scheme_analyzing as sa
import throughput_optimizing as to
from conftest import constant_env, physical_env, roc_env
from scheme_analyzing import AccessPolicy, link_state
from throughput_optimizing import FractionalProgram, RegionCurve, RegionRow, SweepGrid
from util import DomainError, InfeasibleError


def _fractional_oracle(p: FractionalProgram, step: float):
    hi = min((p.d - p.w) / p.c, 1.0)
    steps = max(int(round(hi / step)) + 1, 2)
    return to.grid_oracle(p.objective, 0.0, hi, steps, vectorized=True)


def test_solve_fractional_examples():
    program = FractionalProgram(a=1.0, f=1.0, c=1.0, d=2.0, K=1.0, w=0.5)
    assert to.solve_fractional(program) == pytest.approx(2.0 - np.sqrt(3.0))
    x_best, _ = _fractional_oracle(program, 1e-6)
    assert to.solve_fractional(program) == pytest.approx(x_best, abs=1e-5)

    collapsed = FractionalProgram(a=1.0, f=1.0, c=1.0, d=2.0, K=1.0, w=2.0)
    assert to.solve_fractional(collapsed) == 0.0

    clipped = FractionalProgram(a=1.0, f=1.0, c=1.0, d=10.0, K=1.0, w=9.5)
    assert to.solve_fractional(clipped) == pytest.approx(0.5)
    x_best, _ = _fractional_oracle(clipped, 1e-6)
    assert x_best == pytest.approx(0.5, abs=1e-6)


def test_solve_fractional_errors():
    with pytest.raises(InfeasibleError):
        to.solve_fractional(FractionalProgram(a=1.0, f=1.0, c=1.0, d=1.0, K=1.0, w=2.0))
    with pytest.raises(DomainError, match="K"):
        FractionalProgram(a=1.0, f=1.0, c=1.0, d=1.0, K=0.0, w=0.5)


def test_solve_fractional_matches_oracle():
    """Closed form against exhaustive search on 1000 random feasible programs."""
    rng = np.random.default_rng(17)
    for _ in range(1000):
        a, f, c, K = rng.uniform(0.1, 2.0, 4)
        d = rng.uniform(0.2, 3.0)
        w = d * rng.uniform(0.01, 1.0)
        program = FractionalProgram(a=a, f=f, c=c, d=d, K=K, w=w)
        x = to.solve_fractional(program)
        x_best, value = _fractional_oracle(program, 1e-5)
        assert abs(x - x_best) <= 1e-3
        assert program.objective(x) >= value - 1e-9 * max(1.0, abs(value))
        # the discarded stationary point lies beyond the feasible bound
        assert (d + np.sqrt((a * d + c * f) / K)) / c > (d - w) / c


def test_optimal_a_s1_examples(baseline_env):
    assert to.optimal_a_s1(baseline_env, 0.0, 0.4) == 1.0
    assert to.optimal_a_s1(baseline_env, 0.0, 0.72) == pytest.approx(
        (1.0 - np.sqrt(0.8)) / 0.3
    )
    assert to.optimal_a_s1(baseline_env, 0.0, 0.72) == pytest.approx(0.35191, abs=1e-5)
    assert to.optimal_a_s1(baseline_env, 0.0, 0.0) == 1.0
    with pytest.raises(InfeasibleError):
        to.optimal_a_s1(baseline_env, 0.0, 0.95)


def test_optimal_a_s1_matches_oracle():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        p_ppd = rng.uniform(0.1, 1.0)
        env = constant_env(
            p_ppd=p_ppd,
            p_ssd=rng.uniform(0.1, 1.0),
            p_md=rng.uniform(0.01, 1.0),
            p_fa=rng.uniform(0.0, 0.9),
        )
        lambda_p = rng.uniform(0.0, p_ppd)
        a_s = to.optimal_a_s1(env, 0.0, lambda_p)
        curve = to.secondary_rate_curve("S1", env, 0.0, lambda_p)
        a_best, value = to.grid_oracle(curve, 0.0, 1.0, 100_001, vectorized=True)
        achieved = sa.rates_s1(env, 0.0, a_s, lambda_p).mu_s
        assert abs(a_s - a_best) <= 1e-3
        assert achieved == pytest.approx(value, rel=1e-6, abs=1e-9)


def test_optimal_a_s2_examples(baseline_env):
    for lambda_p in (0.0, 0.2, 0.4, 0.72, 0.9):
        assert to.optimal_a_s2(baseline_env, 0.0, 0.0, lambda_p) == pytest.approx(
            to.optimal_a_s1(baseline_env, 0.0, lambda_p), abs=1e-12
        )
    assert to.optimal_a_s2(baseline_env, 0.0, 0.5, 0.0) == 1.0

    a_s = to.optimal_a_s2(baseline_env, 0.0, 0.5, 0.3)
    curve = to.secondary_rate_curve("S2", baseline_env, 0.0, 0.3, b_s=0.5)
    a_best, _ = to.grid_oracle(curve, 0.0, 1.0, 100_001, vectorized=True)
    assert a_s == pytest.approx(a_best, abs=1e-3)
    assert a_s == pytest.approx(0.570955, abs=1e-5)


def test_optimal_a_s2_infeasible(baseline_env):
    # P_MD + (1 - P_MD)(1 - b_s) = 0.3 < lambda_p / P_ppd with b_s = 1
    with pytest.raises(InfeasibleError):
        to.optimal_a_s2(baseline_env, 0.0, 1.0, 0.5)


@pytest.mark.xfail(strict=True, reason="radicand without the b_s factor is not the maximizer")
def test_printed_radicand_variant_matches_oracle(baseline_env):
    lambda_p, b_s = 0.3, 0.5
    state = link_state(baseline_env, 0.0)
    w = lambda_p / state.p_ppd
    a = w * (1.0 - state.p_fa)
    f = w * state.p_fa
    c = state.p_md
    d = state.p_md + (1.0 - state.p_md) * (1.0 - b_s)
    K = 1.0 - state.p_fa
    printed = max(min((d - np.sqrt((a * d + c * f) / K)) / c, (d - w) / c, 1.0), 0.0)
    curve = to.secondary_rate_curve("S2", baseline_env, 0.0, lambda_p, b_s=b_s)
    a_best, _ = to.grid_oracle(curve, 0.0, 1.0, 100_001, vectorized=True)
    assert abs(printed - a_best) <= 1e-3


def test_optimal_a_s2_matches_oracle():
    rng = np.random.default_rng(29)
    checked = 0
    while checked < 1000:
        p_ppd = rng.uniform(0.5, 1.0)
        p_md = rng.uniform(0.05, 0.95)
        p_fa = rng.uniform(0.0, 0.5)
        b_s = rng.uniform(0.0, 1.0)
        d = p_md + (1.0 - p_md) * (1.0 - b_s)
        lambda_p = rng.uniform(0.0, p_ppd * d)
        env = constant_env(p_ppd=p_ppd, p_ssd=rng.uniform(0.1, 1.0), p_md=p_md, p_fa=p_fa)
        a_s = to.optimal_a_s2(env, 0.0, b_s, lambda_p)
        curve = to.secondary_rate_curve("S2", env, 0.0, lambda_p, b_s=b_s)
        a_best, value = to.grid_oracle(curve, 0.0, 1.0, 100_001, vectorized=True)
        achieved = sa.rates_s2(env, 0.0, a_s, b_s, lambda_p).mu_s
        assert abs(a_s - a_best) <= 1e-3
        assert achieved == pytest.approx(value, rel=1e-6, abs=1e-9)
        checked += 1


def test_s2_objective_is_unimodal():
    rng = np.random.default_rng(31)
    for _ in range(50):
        p_md = rng.uniform(0.05, 0.95)
        b_s = rng.uniform(0.0, 1.0)
        d = p_md + (1.0 - p_md) * (1.0 - b_s)
        lambda_p = rng.uniform(0.0, 0.9 * d)
        env = constant_env(p_md=p_md, p_fa=rng.uniform(0.0, 0.5), p_ppd=0.9)
        hi = min((d - lambda_p / 0.9) / p_md, 1.0)
        xs = np.linspace(0.0, hi, int(hi / 1e-4) + 2)
        values = to.secondary_rate_curve("S2", env, 0.0, lambda_p, b_s=b_s)(xs)
        rising = np.diff(values) > 0.0
        # once the objective starts falling it never rises again
        if not rising.all():
            first_fall = int(np.argmin(rising))
            assert not rising[first_fall:].any()


def test_maximize_scheme_random_access(baseline_env):
    optimum = to.maximize_scheme("So", baseline_env, 0.225)
    assert optimum.lambda_s_max == pytest.approx(0.2)
    assert optimum.policy.a_s == pytest.approx(0.5)
    assert optimum.feasible


def test_maximize_scheme_infeasible(baseline_env):
    optimum = to.maximize_scheme("Sc", baseline_env, 0.7, SweepGrid(tau_points=3, b_points=3))
    assert optimum.lambda_s_max == 0.0
    assert not optimum.feasible
    assert optimum.policy == AccessPolicy.silent("Sc")
    with pytest.raises(DomainError):
        to.maximize_scheme("S9", baseline_env, 0.1)


def test_maximize_scheme_s1_without_primary_traffic(baseline_env):
    optimum = to.maximize_scheme("S1", baseline_env, 0.0, SweepGrid(tau_points=11, b_points=3))
    assert optimum.lambda_s_max == pytest.approx(0.8 * 0.8)
    assert optimum.policy.tau == 0.0


def test_perfect_sensing_collapse(perfect_env):
    grid = SweepGrid(tau_points=1, b_points=101)
    for lambda_p in np.linspace(0.0, 0.9, 19):
        sc = to.maximize_scheme("Sc", perfect_env, lambda_p, grid).lambda_s_max
        s1 = to.maximize_scheme("S1", perfect_env, lambda_p, grid).lambda_s_max
        s2 = to.maximize_scheme("S2", perfect_env, lambda_p, grid).lambda_s_max
        assert abs(s1 - sc) <= 1e-12
        assert abs(s2 - sc) <= 1e-12


def test_best_scheme_tie_goes_to_random_access(perfect_env):
    best = to.best_scheme(perfect_env, 0.0, SweepGrid(tau_points=1, b_points=11))
    assert best.scheme == "So"
    assert best.lambda_s_max == pytest.approx(0.8)


def test_best_scheme_uninformative_sensing():
    # P_MD = 1 - P_FA: the sensing outcome carries no information
    env = physical_env(p_md=0.8, p_fa=0.2)
    grid = SweepGrid(tau_points=11, b_points=21)
    for lambda_p in (0.05, 0.2, 0.5):
        values = {s: to.maximize_scheme(s, env, lambda_p, grid).lambda_s_max for s in ("So", "Sc", "S2")}
        best = to.best_scheme(env, lambda_p, grid)
        assert best.scheme == "So"
        assert best.lambda_s_max == pytest.approx(max(values.values()), rel=1e-9)


def test_best_scheme_poor_roc_sensing():
    # weak sensing SNR keeps the detection probability near P_FA
    env = roc_env(p_fa=0.01, sensing_snr=1e-5)
    grid = SweepGrid(tau_points=11, b_points=21)
    for tau in grid.tau_values(env):
        assert env.p_md(float(tau)) == pytest.approx(0.99, abs=1e-3)
    for lambda_p in (0.05, 0.2, 0.4):
        values = {s: to.maximize_scheme(s, env, lambda_p, grid).lambda_s_max for s in ("So", "Sc", "S2")}
        best = to.best_scheme(env, lambda_p, grid)
        assert best.scheme != "Sc"
        assert best.lambda_s_max == pytest.approx(max(values.values()), rel=1e-9)
        assert best.lambda_s_max == pytest.approx(values["So"], rel=1e-4)
        assert values["So"] > 0.0



def test_best_scheme_sensing_wins_at_light_primary_load(baseline_env):
    grid = SweepGrid(tau_points=3, b_points=101)
    best = to.best_scheme(baseline_env, 0.05, grid)
    assert best.scheme == "S2"
    assert best.lambda_s_max > to.maximize_scheme("So", baseline_env, 0.05, grid).lambda_s_max
    assert best.lambda_s_max > to.maximize_scheme("Sc", baseline_env, 0.05, grid).lambda_s_max


def test_region_curve_endpoints(baseline_env):
    grid = SweepGrid(tau_points=3, b_points=51)
    for scheme in sa.SCHEMES:
        curve = to.region_curve(scheme, baseline_env, 12, grid)
        assert curve.rows[0].lambda_p == 0.0
        assert curve.rows[0].lambda_s_max == pytest.approx(
            to.maximize_scheme(scheme, baseline_env, 0.0, grid).lambda_s_max
        )
        assert curve.rows[-1].lambda_s_max == pytest.approx(0.0, abs=1e-9)
        assert curve.env_digest == baseline_env.digest()
    assert to.region_curve("Sc", baseline_env, 5, grid).lambda_p[-1] == pytest.approx(0.63)


def test_region_curve_random_access_matches_closed_form(baseline_env):
    curve = to.region_curve("So", baseline_env, 40)
    for row in curve.rows:
        assert row.lambda_s_max == pytest.approx(
            sa.boundary_random(baseline_env, row.lambda_p).mu_s, abs=1e-9
        )


def test_region_curves_nonincreasing():
    rng = np.random.default_rng(37)
    grid = SweepGrid(tau_points=6, b_points=11)
    for _ in range(20):
        env = roc_env(
            p_fa=rng.uniform(0.05, 0.5),
            sampling_freq=rng.uniform(1e5, 1e7),
            sensing_snr=rng.uniform(0.05, 0.5),
            snr_p=rng.uniform(2.0, 20.0),
            snr_s=rng.uniform(2.0, 20.0),
        )
        for scheme in sa.SCHEMES:
            values = to.region_curve(scheme, env, 15, grid).lambda_s_max
            assert np.all(np.diff(values) <= 1e-12)


def test_region_curve_validation(baseline_env):
    with pytest.raises(DomainError):
        to.region_curve("S2", baseline_env, 1)
    with pytest.raises(InfeasibleError):
        to.region_curve("So", constant_env(p_ppd=0.0), 5)
    policy = AccessPolicy("So")
    with pytest.raises(DomainError, match="sorted"):
        RegionCurve("So", "x", [RegionRow(0.2, 0.1, policy, True), RegionRow(0.1, 0.2, policy, True)])


def test_scheme_dominance_on_shared_grid(sensing_env):
    grid = SweepGrid(tau_points=21, b_points=21)
    for lambda_p in np.linspace(0.0, sensing_env.primary_success(), 25):
        sc = to.maximize_scheme("Sc", sensing_env, lambda_p, grid).lambda_s_max
        s1 = to.maximize_scheme("S1", sensing_env, lambda_p, grid).lambda_s_max
        s2 = to.maximize_scheme("S2", sensing_env, lambda_p, grid).lambda_s_max
        assert sc <= s1 + 1e-12
        assert s1 <= s2 + 1e-12


@pytest.mark.slow
def test_region_nesting_full_grids(baseline_env):
    grid = SweepGrid(tau_points=101, b_points=101)
    strict = 0
    for lambda_p in np.linspace(0.0, 0.9, 50):
        sc = to.maximize_scheme("Sc", baseline_env, lambda_p, grid).lambda_s_max
        s1 = to.maximize_scheme("S1", baseline_env, lambda_p, grid).lambda_s_max
        s2 = to.maximize_scheme("S2", baseline_env, lambda_p, grid).lambda_s_max
        assert sc <= s1 + 1e-12
        assert s1 <= s2 + 1e-12
        strict += s2 > sc + 1e-9
    assert strict >= 1


def test_crossover_existence(crossover_env):
    """Sensing pays off only when it is short."""
    slot = crossover_env.slot_duration
    flags = to.crossover_flags(crossover_env, 0.05, 0.0, 0.5 * slot, b_points=101)
    assert flags.so_value == pytest.approx(0.479, abs=1e-3)
    assert flags.so_beats_s2_long
    assert flags.s2_short_beats_so
    assert flags.s2_short_beats_long
    assert flags.s2_long_value < flags.so_value < flags.s2_short_value


def test_fixed_tau_curve(crossover_env):
    slot = crossover_env.slot_duration
    short = to.tau_sweep_curve(crossover_env, 0.01 * slot, 10, b_points=21)
    long = to.tau_sweep_curve(crossover_env, 0.3 * slot, 10, b_points=21)
    assert short.scheme == "S2"
    assert short.rows[0].lambda_s_max > long.rows[0].lambda_s_max
    assert all(row.policy.tau == pytest.approx(0.3 * slot) for row in long.rows if row.feasible)
    with pytest.raises(DomainError):
        to.crossover_flags(crossover_env, 0.05, 0.3 * slot, 0.1 * slot)


def test_grid_oracle():
    assert to.grid_oracle(lambda x: 1.0, 0.2, 0.8, 7) == (0.2, 1.0)
    x_best, value = to.grid_oracle(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1_000_000, vectorized=True)
    assert x_best == pytest.approx(0.3, abs=1e-6)
    assert value == pytest.approx(0.0, abs=1e-12)
    x_best, _ = to.grid_oracle(lambda x: np.nan if x < 0.5 else -x, 0.0, 1.0, 11)
    assert x_best == pytest.approx(0.5)
    with pytest.raises(DomainError):
        to.grid_oracle(lambda x: x, 0.0, 1.0, 1)
