import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis

from emg_reservoir.dataio import (
    INDEX_FILE,
    Trial,
    TrialSet,
    import_raw,
    load_trials,
    save_trials,
    session_folds,
    synth_trials,
    trim_set,
    trim_trial,
    write_manifest,
)
from emg_reservoir.errors import FoldError, LoadError, SchemaError

from helpers import raw_layout


def make_trial(n=400, session=0, gesture=0, trial="t0", fill=None):
    x = np.arange(n * 8, dtype=float).reshape(n, 8) / (n * 8) if fill is None else fill
    return Trial(x, 200.0, gesture, "01", session, trial)


def test_trim_removes_rounded_sample_counts():
    t = make_trial(400)
    out = trim_trial(t, 600, 600)
    assert out.n_samples == 160
    np.testing.assert_array_equal(out.samples, t.samples[120:280])
    assert out.key == t.key and out.gesture == t.gesture


def test_trim_zero_is_identity():
    t = make_trial(50)
    assert trim_trial(t, 0, 0) is t


def test_trim_longer_than_trial_is_rejected():
    with pytest.raises(ValueError):
        trim_trial(make_trial(200), 600, 600)


def test_trim_set_uses_dataset_default():
    ts = TrialSet([make_trial(400)], ("rock", "paper", "scissor"), "roshambo")
    assert trim_set(ts).trials[0].n_samples == 160
    assert trim_set(ts, 0, 0).trials[0].n_samples == 400


def test_trial_validation():
    with pytest.raises(SchemaError):
        Trial(np.zeros((10, 7)), 200.0, 0, "a", 0, "x")
    with pytest.raises(SchemaError):
        Trial(np.full((10, 8), np.nan), 200.0, 0, "a", 0, "x")
    with pytest.raises(SchemaError):
        Trial(np.zeros((1, 8)), 200.0, 0, "a", 0, "x")


def test_trialset_checks_class_count_and_labels():
    with pytest.raises(SchemaError):
        TrialSet([make_trial()], ("a", "b"), "roshambo")
    with pytest.raises(SchemaError):
        TrialSet([make_trial(gesture=3)], ("rock", "paper", "scissor"), "roshambo")


def test_session_folds_forced_layout():
    ts = TrialSet([make_trial(session=s, trial=f"t{s}") for s in (2, 0, 1)], ("a", "b"), "synthetic")
    plan = session_folds(ts)
    assert list(plan) == [
        (frozenset({1, 2}), 0),
        (frozenset({0, 2}), 1),
        (frozenset({0, 1}), 2),
    ]


def test_session_folds_need_three_sessions():
    ts = TrialSet([make_trial(session=s, trial=f"t{s}") for s in (0, 1)], ("a", "b"), "synthetic")
    with pytest.raises(FoldError):
        session_folds(ts)


def test_folds_partition_sessions(synth_set):
    plan = session_folds(synth_set)
    tests = [s for _, s in plan]
    assert sorted(tests) == synth_set.sessions
    for train, test in plan:
        assert test not in train
        assert train | {test} == set(synth_set.sessions)


def test_synth_counts_and_determinism(synth_set):
    assert len(synth_set) == 45
    assert synth_set.sessions == [0, 1, 2]
    again = synth_trials(3, 3, 5, seed=7)
    for a, b in zip(synth_set.trials, again.trials):
        assert a.key == b.key
        np.testing.assert_array_equal(a.samples, b.samples)
    t = synth_set.trials[0]
    assert t.samples.shape == (400, 8) and t.sample_rate_hz == 200.0


def test_synth_seed_changes_data():
    a = synth_trials(2, 3, 1, seed=1).trials[0].samples
    b = synth_trials(2, 3, 1, seed=2).trials[0].samples
    assert not np.array_equal(a, b)


def test_synth_rms_linearly_separable():
    ts = synth_trials(5, 3, 6, seed=11)
    X = np.array([np.sqrt((t.samples ** 2).mean(axis=0)) for t in ts])
    y = np.array([t.gesture for t in ts])
    s = np.array([t.session_id for t in ts])
    accs = []
    for test in range(3):
        lda = LinearDiscriminantAnalysis().fit(X[s != test], y[s != test])
        accs.append(lda.score(X[s == test], y[s == test]))
    assert np.mean(accs) >= 0.99


def test_save_load_round_trip_exact(tmp_path, synth_set):
    save_trials(synth_set, tmp_path)
    back = load_trials(tmp_path, "synthetic")
    assert back.class_names == synth_set.class_names
    assert [t.key for t in back] == [t.key for t in synth_set]
    for a, b in zip(synth_set, back):
        np.testing.assert_array_equal(a.samples, b.samples)
        assert (a.gesture, a.sample_rate_hz) == (b.gesture, b.sample_rate_hz)


def test_load_trim_load_round_trip(tmp_path, synth_set):
    trimmed = trim_set(synth_set, 100, 50)
    save_trials(trimmed, tmp_path)
    for a, b in zip(trimmed, load_trials(tmp_path)):
        np.testing.assert_array_equal(a.samples, b.samples)


def test_load_order_is_lexicographic(tmp_path):
    trials = [make_trial(session=s, trial=t) for s, t in [(2, "b"), (0, "b"), (0, "a"), (1, "a")]]
    save_trials(TrialSet(trials, ("a", "b"), "synthetic"), tmp_path)
    keys = [t.key for t in load_trials(tmp_path)]
    assert keys == sorted(keys)


def test_load_errors(tmp_path, synth_set):
    with pytest.raises(LoadError):
        load_trials(tmp_path)
    with pytest.raises(LoadError):
        load_trials(tmp_path / "missing")
    save_trials(synth_set, tmp_path)
    with pytest.raises(SchemaError):
        load_trials(tmp_path, "roshambo")
    index = json.loads((tmp_path / INDEX_FILE).read_text())
    victim = tmp_path / index["trials"][0]["file"]
    victim.write_text("ch0,ch1,ch2\n1,2,3\n")
    with pytest.raises(SchemaError, match=index["trials"][0]["file"]):
        load_trials(tmp_path)
    victim.unlink()
    with pytest.raises(LoadError, match=index["trials"][0]["file"]):
        load_trials(tmp_path)


def test_import_raw_counts_and_scaling(tmp_path):
    raw = tmp_path / "raw"
    raw_layout(raw, ["rock", "paper", "scissors"])
    ts = import_raw(raw, "roshambo")
    assert len(ts) == 2 * 3 * 3 * 2
    assert ts.sessions == [0, 1, 2]
    assert ts.class_names == ("rock", "paper", "scissor")
    src = np.loadtxt(raw / "subject01_session1_rock_0.csv", delimiter=",")
    t = next(t for t in ts if t.key == ("01", 0, "rock00"))
    np.testing.assert_array_equal(t.samples, src / 128.0)
    assert np.abs(np.concatenate([t.samples for t in ts])).max() <= 1.0


def test_import_wrong_tag_is_schema_error(tmp_path):
    raw = tmp_path / "raw"
    raw_layout(raw, ["rock", "paper", "scissors"])
    with pytest.raises(SchemaError):
        import_raw(raw, "sensorfusion")


def test_import_channel_mismatch(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    np.savetxt(raw / "subject1_session1_rock_0.csv", np.zeros((20, 6)), delimiter=",")
    with pytest.raises(SchemaError):
        import_raw(raw, "roshambo")


def test_manifest_is_stable(tmp_path, synth_set):
    save_trials(synth_set, tmp_path)
    m1 = write_manifest(tmp_path)
    save_trials(synth_set, tmp_path)
    m2 = write_manifest(tmp_path)
    assert m1 == m2 and len(m1["files"]) == len(synth_set) + 1


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=16, max_size=80))
def test_csv_round_trip_any_values(tmp_path_factory, values):
    n = len(values) // 8
    x = np.array(values[: n * 8]).reshape(n, 8)
    d = tmp_path_factory.mktemp("rt")
    save_trials(TrialSet([Trial(x, 200.0, 0, "s", 0, "t")], ("a", "b"), "synthetic"), d)
    np.testing.assert_array_equal(load_trials(d).trials[0].samples, x)
