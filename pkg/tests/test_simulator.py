import numpy as np
import pytest

from relayblock.classes import ClassDistribution, HoppedDemand
from relayblock.erlang import AnalysisInputs, LossClass, LossSystem, TrafficSpec, analyze, erlang_b
from relayblock.erlang import per_class_blocking_enumerated
from relayblock.errors import InvalidParameterError
from relayblock.simulator import STREAMS, SimConfig, compare_modes, draw_arrivals, run

ONE = ClassDistribution.from_pmf({1: 1.0})


def within(est, value, k=3.3):
    """``value`` lies within ``k`` standard errors of the replication mean."""
    se = est.half_width / 2.09  # t quantile for 20 replications
    return abs(est.mean - value) <= k * se + 1e-12


def mmkk(K, rho):
    return AnalysisInputs(TrafficSpec(rho, direct_fraction=1.0), K, 1, ONE, ONE, ONE)


@pytest.mark.parametrize("K,rho", [(4, 2.0), (10, 8.0), (40, 35.0)])
def test_single_class_matches_erlang_b_within_3_3_se(K, rho):
    est = run(mmkk(K, rho), SimConfig(horizon=2000, warmup=50, replications=20, base_seed=7))
    assert within(est["direct"], erlang_b(K, rho))


def test_time_average_full_fraction_matches_arrival_blocking():
    est = run(mmkk(4, 2.0), SimConfig(horizon=2000, replications=20, base_seed=3))
    full = est.bs_occupancy()[-1]
    assert full == pytest.approx(erlang_b(4, 2.0), rel=0.05)
    assert within(est["direct"], full)


def test_zero_load_flags_empty_streams():
    est = run(mmkk(4, 0.0), SimConfig(replications=3))
    for s in STREAMS:
        assert est[s].empty and est[s].mean == 0.0 and est[s].offered == 0


def test_counts_are_consistent():
    d = ClassDistribution(ONE.scheme, np.array([0.97]), tail_mass=0.03)
    inputs = AnalysisInputs(TrafficSpec(6.0, direct_fraction=0.4), 5, 2, d, d, d)
    est = run(inputs, SimConfig(horizon=300, replications=4))
    for _, stream, off, blk, frac in est.rows():
        assert 0 <= blk <= off
        assert 0.0 <= frac <= 1.0
    for s in STREAMS:
        assert est[s].carried + est[s].blocked == est[s].offered
    assert est["overall"].offered == est["direct"].offered + est["hopped"].offered


def test_deterministic_and_worker_independent():
    inputs = AnalysisInputs(TrafficSpec(5.0), 6, 2, ONE, ONE, ClassDistribution.from_pmf({1: 0.5, 2: 0.5}))
    sim = SimConfig(horizon=200, replications=4, base_seed=11)
    a, b = run(inputs, sim), run(inputs, sim)
    c = run(inputs, sim, workers=2)
    assert list(a.rows()) == list(b.rows()) == list(c.rows())
    assert {k: v for k, v in a.streams.items()} == c.streams


def test_common_random_numbers_across_modes():
    inputs = AnalysisInputs(TrafficSpec(5.0), 6, 2, ONE, ONE, ONE)
    da = draw_arrivals(inputs, SimConfig(mode="coupled"), 3)
    db = draw_arrivals(inputs, SimConfig(mode="decoupled"), 3)
    np.testing.assert_array_equal(da.times, db.times)
    np.testing.assert_array_equal(da.bs_demand, db.bs_demand)


@pytest.mark.parametrize("mode,holding", [("coupled", "single"), ("decoupled", "split")])
def test_pool_audit_over_a_million_events(mode, holding):
    p = ClassDistribution.from_pmf({1: 0.5, 2: 0.5})
    inputs = AnalysisInputs(TrafficSpec(10.0), 20, 8, p, p, p)
    sim = SimConfig(mode=mode, horizon=56_000, warmup=0, replications=1, audit=True, holding_model=holding)
    est = run(inputs, sim)  # raises PoolAuditError on any leak
    assert est.replications[0].events >= 1_000_000


def test_example2_standalone_relay():
    p_rs = ClassDistribution.from_pmf({1: 0.6, 2: 0.4})
    lam = 3.0
    inputs = AnalysisInputs(TrafficSpec(lam, direct_fraction=0.0, relay_count=1), 100, 4, ONE, ONE, p_rs)
    ref = per_class_blocking_enumerated(LossSystem(4, [LossClass(1, 0.6 * lam), LossClass(2, 0.4 * lam)]))
    est = run(inputs, SimConfig(horizon=2000, replications=20, base_seed=5))
    assert within(est["rs_ms:1"], ref.per_class[0])
    assert within(est["rs_ms:2"], ref.per_class[1])


def test_decoupled_matches_analysis_when_relays_never_block():
    # with no relay blocking the BS sees plain Poisson traffic
    p = ClassDistribution.from_pmf({1: 0.5, 2: 0.3, 4: 0.2})
    inputs = AnalysisInputs(TrafficSpec(12.0, direct_fraction=0.5, relay_count=2), 14, 1000, p, p, p)
    rep = analyze(inputs)
    est = run(inputs, SimConfig(horizon=2000, replications=20, base_seed=2))
    assert within(est["direct"], rep.p_b_d)
    assert within(est["hopped_bs_rs"], rep.p_b_hbr)
    assert within(est["overall"], rep.p_b_overall)


def test_coupled_never_exceeds_decoupled_rs_usage():
    joint = HoppedDemand({(1, 2): 0.5, (2, 1): 0.5})
    p = ClassDistribution.from_pmf({1: 0.5, 2: 0.5})
    inputs = AnalysisInputs(TrafficSpec(20.0, direct_fraction=0.0, relay_count=1), 10, 6, p, p, p, joint=joint)
    seen = []
    run(inputs, SimConfig(mode="coupled", horizon=100, replications=1), trace=lambda *a: seen.append(a))
    assert max(a[4] for a in seen) <= 5
    assert min(min(a[3]) for a in seen) >= 0


def test_compare_modes_zero_load():
    inputs = mmkk(4, 0.0)
    cmp = compare_modes(inputs, SimConfig(replications=2, horizon=50, warmup=0))
    for row in cmp.table():
        assert row[1] == 0.0 and row[2] == 0.0 and row[4] == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mode": "x"},
        {"holding_model": "y"},
        {"horizon": 10, "warmup": 10},
        {"warmup": -1},
        {"replications": 0},
    ],
)
def test_sim_config_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        SimConfig(**kwargs)
