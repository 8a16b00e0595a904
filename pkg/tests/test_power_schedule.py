import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehswitch.errors import EmptySchedule, InfeasibleTarget, InvalidArgument, OutOfRange
from ehswitch.power_schedule import (
    PowerSchedule,
    RateModel,
    bits_by,
    completion_time,
    cumulative_energy,
    optimal_powers,
    write_schedule,
)

from conftest import DEFAULT_TX, trace
from oracles import discretized_best_bits, few_deposit_traces

# gain 1e-10 with 1 MHz and 1e-19 W/Hz gives SNR = P in mW
UNIT = RateModel(1.0, 1e-19, (1e-10, 1e-10))
G = 1e-10


def test_rate_model_snr_equals_power_at_minus_100_db():
    rm = RateModel.from_transmitters(DEFAULT_TX)
    assert rm.noise_mw == pytest.approx(1e-10)
    assert float(rm.snr(11.2082, rm.gain(1))) == pytest.approx(11.2082, rel=1e-12)
    assert float(rm.snr(10.0, rm.gain(2))) == pytest.approx(10 ** 0.9, rel=1e-12)
    assert rm.rate_of(11.2082, 1) == pytest.approx(math.log2(12.2082), rel=1e-12)


def test_reference_gain_choices():
    rm = RateModel.from_transmitters(DEFAULT_TX)
    assert rm.reference_gain("best") == rm.gain(1)
    assert rm.reference_gain("tx3") == rm.gain(3)
    assert rm.reference_gain(2e-10) == 2e-10
    hw = rm.reference_gain("harvest-weighted", DEFAULT_TX)
    assert rm.gain(4) < hw < rm.gain(1)
    # defining identity: the rate at the mean harvest power is the share-weighted rate
    p_bar = 11.1
    r_bar = sum(tx.mean_power * rm.rate_of(p_bar, tx.id) for tx in DEFAULT_TX) / p_bar
    assert float(rm.rate(p_bar, hw)) == pytest.approx(r_bar, rel=1e-12)
    with pytest.raises(InvalidArgument):
        rm.reference_gain("harvest-weighted")
    with pytest.raises(InvalidArgument):
        rm.reference_gain("median")


def test_cumulative_energy_examples():
    assert cumulative_energy([trace(1)], 0.0) == 0.0
    tr = [trace(1, [5.0], [10.0])]
    assert cumulative_energy(tr, 4.9) == 0.0
    assert cumulative_energy(tr, 5.0) == 10.0


def test_cumulative_energy_conservation(rng):
    from ehswitch.energy_model import sample_trace

    traces = [sample_trace(tx, 500.0, rng) for tx in DEFAULT_TX]
    total = sum(tr.total_energy for tr in traces)
    assert cumulative_energy(traces, 500.0) == pytest.approx(total, rel=1e-12)


def test_single_deposit_constant_power():
    s = optimal_powers([trace(1, initial=100.0), trace(2)], 10.0)
    assert len(s) == 1
    assert s.powers[0] == pytest.approx(10.0)
    assert s.end == 10.0


def test_two_deposit_hand_schedule():
    s = optimal_powers([trace(1, initial=10.0), trace(2, [5.0], [90.0])], 10.0)
    np.testing.assert_allclose(s.epochs, [0, 5, 10])
    np.testing.assert_allclose(s.powers, [2, 18])


def test_two_deposit_matches_brute_force():
    # every feasible two-slot split: p1 * 5 <= 10, rest spent on [5, 10]
    p1 = np.linspace(0, 2, 200_001)
    p2 = (100 - 5 * p1) / 5
    bits = 5 * np.log2(1 + p1) + 5 * np.log2(1 + p2)
    best = bits.max()
    s = optimal_powers([trace(1, initial=10.0), trace(2, [5.0], [90.0])], 10.0)
    assert bits_by(s, UNIT, G, 10.0) == pytest.approx(best, rel=1e-12)
    assert p1[bits.argmax()] == pytest.approx(2.0)


def test_empty_schedule_error():
    with pytest.raises(EmptySchedule):
        optimal_powers([trace(1), trace(2, [5.0], [1.0])], 4.0)
    with pytest.raises(InvalidArgument):
        optimal_powers([trace(1, initial=1.0)], 0.0)


def test_arrival_at_horizon_is_unusable():
    s = optimal_powers([trace(1, initial=10.0), trace(2, [5.0], [90.0])], 5.0)
    np.testing.assert_allclose(s.powers, [2.0])


def test_collinear_corners_merge():
    # equal slopes on both slots: a single segment, not two
    s = optimal_powers([trace(1, initial=10.0), trace(2, [5.0], [10.0])], 10.0)
    assert len(s) == 1
    assert s.powers[0] == pytest.approx(2.0)


def test_bits_by_examples():
    s = PowerSchedule(np.array([0.0, 1.0]), np.array([11.2082]))
    assert bits_by(s, UNIT, G, 0.0) == 0.0
    assert bits_by(s, UNIT, G, 1.0) == pytest.approx(math.log2(12.2082), rel=1e-12)
    assert bits_by(s, UNIT, G, 1.0) == pytest.approx(3.6098, abs=5e-5)
    with pytest.raises(OutOfRange):
        bits_by(s, UNIT, G, 1.5)
    with pytest.raises(OutOfRange):
        bits_by(s, UNIT, G, -0.1)


def test_bits_by_monotone():
    s = PowerSchedule(np.array([0.0, 2.0, 5.0]), np.array([1.0, 3.0]))
    grid = np.linspace(0, 5, 101)
    vals = [bits_by(s, UNIT, G, t) for t in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_schedule_validation():
    with pytest.raises(InvalidArgument):
        PowerSchedule(np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(InvalidArgument):
        PowerSchedule(np.array([0.0, 2.0, 2.0]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidArgument):
        PowerSchedule(np.array([0.0, 1.0]), np.array([-1.0]))


def test_time_to_use_and_energy_used():
    s = PowerSchedule(np.array([0.0, 5.0, 10.0]), np.array([2.0, 18.0]))
    assert s.energy_used(5.0) == pytest.approx(10.0)
    assert s.energy_used(10.0) == pytest.approx(100.0)
    assert s.energy_used(11.0) == pytest.approx(118.0)  # last power continues
    assert s.time_to_use(0.0, 10.0) == pytest.approx(5.0)
    assert s.time_to_use(4.0, 20.0) == pytest.approx(5.0 + 18.0 / 18.0)
    assert s.time_to_use(12.0, 36.0) == pytest.approx(14.0)
    z = PowerSchedule(np.array([0.0, 1.0]), np.array([0.0]))
    assert math.isinf(z.time_to_use(0.0, 1.0))


def test_completion_single_deposit():
    target = 10 * math.log2(11)
    t_e, s = completion_time([trace(1, initial=100.0), trace(2)], UNIT, G, target)
    assert t_e == pytest.approx(10.0, abs=1e-6)
    assert s.powers[0] == pytest.approx(10.0, rel=1e-6)


def test_completion_two_deposit():
    target = 5 * math.log2(3) + 5 * math.log2(19)
    t_e, s = completion_time([trace(1, initial=10.0), trace(2, [5.0], [90.0])], UNIT, G, target)
    assert t_e == pytest.approx(10.0, abs=1e-6)
    np.testing.assert_allclose(s.powers, [2, 18], rtol=1e-6)


def test_completion_infeasible():
    # 1 mJ can never carry 1e6 Mbit
    with pytest.raises(InfeasibleTarget) as info:
        completion_time([trace(1, initial=1.0), trace(2)], UNIT, G, 1e6)
    assert info.value.energy_mj == pytest.approx(1.0)
    with pytest.raises(InfeasibleTarget):
        completion_time([trace(1), trace(2)], UNIT, G, 1.0)
    with pytest.raises(InfeasibleTarget):
        completion_time([trace(1, initial=1.0, horizon=2.0)], UNIT, G, 1e3)


def test_write_schedule_format():
    buf = io.StringIO()
    write_schedule(PowerSchedule(np.array([0.0, 5.0, 10.0]), np.array([2.0, 18.0])), buf)
    assert buf.getvalue() == (
        "0.000000000,5.000000000,2.000000000\n5.000000000,10.000000000,18.000000000\n"
    )


deposits = st.lists(
    st.tuples(st.floats(0.01, 100.0), st.floats(0.01, 50.0)), min_size=0, max_size=12
)


def _traces_from(initial, deps):
    times = sorted({round(t, 6) for t, _ in deps})
    amounts = [a for _, a in deps][: len(times)]
    return [trace(1, times, amounts, initial), trace(2)]


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 50.0), deposits, st.floats(1.0, 150.0))
def test_schedule_invariants(initial, deps, horizon):
    traces = _traces_from(initial, deps)
    s = optimal_powers(traces, horizon)
    assert np.all(np.diff(s.powers) >= -1e-12 * s.powers.max())
    # causality just before every arrival and at the horizon
    for t in list(traces[0].times[traces[0].times < horizon]) + [horizon]:
        before = initial + float(traces[0].amounts[traces[0].times < t].sum())
        assert s.energy_used(t) <= before + 1e-9
    # all energy arriving before the horizon is spent by it
    usable = initial + float(traces[0].amounts[traces[0].times < horizon].sum())
    assert s.energy_used(horizon) == pytest.approx(usable, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 50.0), deposits, st.floats(0.05, 0.95))
def test_completion_inverts_bits_by(initial, deps, frac):
    traces = _traces_from(initial, deps)
    reachable = bits_by(optimal_powers(traces, 400.0), UNIT, G, 400.0)
    target = frac * reachable
    t_e, s = completion_time(traces, UNIT, G, target)
    assert bits_by(s, UNIT, G, t_e) == pytest.approx(target, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_taut_string_beats_discretized_profiles(seed):
    rng = np.random.default_rng(seed)
    traces = few_deposit_traces(rng)
    horizon = float(rng.uniform(5, 40))
    try:
        s = optimal_powers(traces, horizon)
    except EmptySchedule:
        return
    ours = bits_by(s, UNIT, G, horizon)
    best = discretized_best_bits(traces, horizon, UNIT, G, n=200)
    assert ours >= best * (1 - 1e-6)


def test_completion_with_late_first_arrival():
    # no energy at t = 0; bisection probes horizons before the first arrival
    target = 2.0 * math.log2(1 + 5.0)
    t_e, s = completion_time([trace(1, [3.0], [10.0]), trace(2)], UNIT, G, target)
    assert t_e == pytest.approx(5.0, abs=1e-6)
    assert s.powers[0] == pytest.approx(0.0)
    assert s.powers[-1] == pytest.approx(5.0, rel=1e-6)
