import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emg_reservoir.errors import UndefinedMeasureError
from emg_reservoir.neuron import NeuronParams, draw_population
from emg_reservoir.plasticity import (
    BranchingLedger,
    CriticalParams,
    branching_credits,
    measure_global_branching,
)
from emg_reservoir.reservoir import Raster, ReservoirEngine, SimulationConfig, poisson_events
from emg_reservoir.topology import ReservoirSpec, build_wiring

from helpers import events, tiny_wiring

FROZEN = SimulationConfig(freeze_weights=True)


def engine_for(w, cfg=FROZEN, **crit):
    e = ReservoirEngine(w, NeuronParams(), CriticalParams(**crit), cfg)
    e.ledger.record_history = True
    return e


def test_params_validation():
    for bad in ({"learning_rate": 0.0}, {"learning_rate": 1.5}, {"target_branching": 0.0},
                {"w_min": 0.5, "w_max": 0.1}, {"window_ms": 0.0}):
        with pytest.raises(ValueError):
            CriticalParams(**bad)


@pytest.mark.parametrize("b, expected", [(1.0, 0.20), (0.0, 0.22), (3.0, 0.16)])
def test_update_arithmetic(b, expected):
    w = tiny_wiring(2, [(0, 1, 0.2)], [])
    led = BranchingLedger(w, CriticalParams(learning_rate=0.1, target_branching=1.0))
    led.last_spike[0] = 0.0
    led.accumulator[0] = b
    out = led.estimate_and_update(0, np.array([0.2]))
    assert out[0] == pytest.approx(expected, abs=1e-15)
    assert led.estimate[0] == b


def test_inhibitory_weights_never_change():
    w = tiny_wiring(3, [(0, 1, 0.2), (2, 1, 0.2)], [], exc=[True, True, False])
    led = BranchingLedger(w)
    led.last_spike[:] = 0.0
    out = led.estimate_and_update(np.array([0, 2]), np.array([0.2, 0.2]))
    assert out[0] > 0.2 and out[1] == 0.2


def test_no_update_before_first_generation():
    w = tiny_wiring(2, [(0, 1, 0.2)], [])
    led = BranchingLedger(w)
    assert led.estimate_and_update(0, np.array([0.2]))[0] == 0.2


def test_pre_spike_without_outgoing_only_stamps_time():
    w = tiny_wiring(2, [(0, 1, 0.2)], [])
    led = BranchingLedger(w)
    led.on_pre_spike(1, 5.0, np.array([0.2]))
    assert not led.open.any() and led.last_spike[1] == 5.0


def test_two_outgoing_open_two_windows():
    w = tiny_wiring(3, [(0, 1, 0.2), (0, 2, 0.3)], [])
    led = BranchingLedger(w)
    led.on_pre_spike(0, 1.0, w.rec_weight.copy())
    assert led.open.sum() == 2
    np.testing.assert_array_equal(led.delivered, [0.2, 0.3])


def test_relay_chain_credits_one():
    w = tiny_wiring(2, [(0, 1, 1.2)], [(0, 0, 1.2)])
    e = engine_for(w)
    r = e.run_trial(events(2, 0.3, ch0=[10, 50, 90]))
    assert r.n_spikes == 6
    m = branching_credits(r, w, input_events=events(2, 0.3, ch0=[10, 50, 90]))
    np.testing.assert_allclose(m.credit[m.neuron == 0], 1.0)
    assert m.mean == 1.0
    assert [b for i, _, b in e.ledger.history if i == 0] == [1.0, 1.0]


def test_shared_credit_from_two_inputs():
    w = tiny_wiring(3, [(0, 2, 0.6), (1, 2, 0.6)], [(0, 0, 1.2), (1, 1, 1.2)])
    ev = events(2, 0.1, ch0=[10], ch1=[10])
    r = engine_for(w).run_trial(ev)
    m = branching_credits(r, w, input_events=ev)
    np.testing.assert_allclose(m.credit[m.neuron != 2], [0.5, 0.5])


def test_expired_window_gives_zero():
    w = tiny_wiring(2, [(0, 1, 0.3)], [(0, 0, 1.2), (1, 1, 1.2)])
    ev = events(2, 0.1, ch0=[10], ch1=[40])
    r = engine_for(w).run_trial(ev)
    m = branching_credits(r, w, input_events=ev)
    assert r.n_spikes == 2 and m.credit[m.neuron == 0][0] == 0.0
    # inside the window the same layout credits a fraction
    ev = events(2, 0.1, ch0=[10], ch1=[20])
    m = branching_credits(engine_for(w).run_trial(ev), w, input_events=ev)
    assert m.credit[m.neuron == 0][0] == pytest.approx(0.3 / 1.5)


def test_restarted_window_discards_credit():
    # B fires only after A's second spike; the first spike's window is gone
    w = tiny_wiring(2, [(0, 1, 0.5)], [(0, 0, 1.2), (1, 1, 0.7)])
    ev = events(2, 0.1, ch0=[10, 15], ch1=[16])
    r = engine_for(w).run_trial(ev)
    m = branching_credits(r, w, input_events=ev)
    a = m.credit[m.neuron == 0]
    assert a.size == 2 and a[0] == 0.0 and a[1] > 0


def test_silent_consequences_measure_zero():
    w = tiny_wiring(2, [(0, 1, 0.1)], [(0, 0, 1.2)])
    ev = events(2, 0.1, ch0=[10])
    r = engine_for(w).run_trial(ev)
    assert r.n_spikes == 1
    assert measure_global_branching(r, w, input_events=ev) == 0.0


def test_empty_raster_is_undefined():
    w = tiny_wiring(2, [(0, 1, 0.1)], [])
    with pytest.raises(UndefinedMeasureError):
        measure_global_branching(Raster(np.empty(0, int), np.empty(0), 2, 1.0), w)


def test_online_offline_agree_on_reference_network():
    w = build_wiring(ReservoirSpec(seed=4))
    e = ReservoirEngine(w, draw_population(320, seed=4), cfg=FROZEN)
    e.ledger.record_history = True
    ev = poisson_events(50.0, 16, 3.0, seed=8)
    r = e.run_trial(ev)
    off = branching_credits(r, w, input_events=ev)
    lookup = {(int(i), round(t * 1000)): c for i, t, c in zip(off.neuron, off.time_s, off.credit)}
    assert len(e.ledger.history) > 1000
    for i, t, b in e.ledger.history:
        assert b == pytest.approx(lookup[(i, round(t))], abs=1e-12)


def test_offline_accepts_event_stream_raster():
    w = tiny_wiring(2, [(0, 1, 1.2)], [(0, 0, 1.2)])
    ev = events(2, 0.3, ch0=[10, 50])
    r = engine_for(w).run_trial(ev)
    assert measure_global_branching(r.to_event_stream(), w, input_events=ev) == \
        measure_global_branching(r, w, input_events=ev)


weights = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))


@given(st.lists(weights, min_size=3, max_size=3), st.one_of(st.just(1.0), st.floats(0.0, 5.0)),
       st.floats(0.01, 1.0), st.floats(0.05, 1.0))
def test_update_bounds_and_direction(w0, b, lr, w_max):
    w = tiny_wiring(4, [(0, 1, 0.1), (0, 2, 0.1), (0, 3, 0.1)], [])
    p = CriticalParams(learning_rate=lr, w_max=w_max)
    led = BranchingLedger(w, p)
    led.last_spike[0] = 0.0
    led.accumulator[0] = b
    before = np.minimum(np.array(w0), w_max)
    after = led.estimate_and_update(0, before.copy())
    assert np.all((after >= p.w_min) & (after <= p.w_max))
    pos = before > 0
    step = lr * (1.0 - b)
    if step < -1e-9:
        assert np.all(after[pos] < before[pos])
    elif step > 1e-9:
        assert np.all((after[pos] > before[pos]) | (after[pos] == w_max))
        assert np.all(after[pos] > 0)
    elif b == 1.0:
        np.testing.assert_array_equal(after, before)


def test_weights_stay_in_bounds_during_simulation():
    w = build_wiring(ReservoirSpec(seed=1))
    e = ReservoirEngine(w, draw_population(320, seed=1), CriticalParams(w_max=0.5),
                        SimulationConfig(weight_trace_every_ms=100.0))
    e.run_trial(poisson_events(50.0, 16, 2.0, seed=1))
    plastic = w.is_excitatory[w.rec_pre]
    for _, weights in e.weight_trace:
        assert np.all((weights[plastic] >= 0) & (weights[plastic] <= 0.5))
        np.testing.assert_array_equal(weights[~plastic], w.rec_weight[~plastic])
