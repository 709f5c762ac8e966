"""End-to-end evaluations: encoding baseline and encoder + reservoir."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import TrialSet, session_folds
from .encoding import EncoderParams, EventStream, encode_trial
from .neuron import TAU_RANGE_MS, NeuronParams, draw_population
from .plasticity import CriticalParams
from .readout import DEFAULT_WINDOW_MS, EvalReport, FeatureMatrix, build_feature_matrix, cross_validate
from .readout.cv import evaluate_splits
from .reservoir import ReservoirEngine, SimulationConfig
from .topology import ReservoirSpec, build_wiring


@dataclass(frozen=True)
class ReservoirSetup:
    spec: ReservoirSpec = field(default_factory=ReservoirSpec)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    critical: CriticalParams = field(default_factory=CriticalParams)
    sim: SimulationConfig = field(default_factory=SimulationConfig)
    tau_range_ms: tuple[float, float] = TAU_RANGE_MS

    def build_engine(self) -> ReservoirEngine:
        wiring = build_wiring(self.spec)
        params = draw_population(wiring.n_neurons, self.neuron, self.sim.seed, self.tau_range_ms)
        return ReservoirEngine(wiring, params, self.critical, self.sim)


def encode_set(ts: TrialSet, p: EncoderParams) -> list[EventStream]:
    return [encode_trial(t, p) for t in ts.trials]


def _meta(ts: TrialSet):
    labels = [t.gesture for t in ts.trials]
    sessions = [t.session_id for t in ts.trials]
    keys = [t.key for t in ts.trials]
    return labels, sessions, keys


def baseline_features(ts: TrialSet, p: EncoderParams, window_ms: float = DEFAULT_WINDOW_MS) -> FeatureMatrix:
    labels, sessions, keys = _meta(ts)
    return build_feature_matrix(encode_set(ts, p), labels, sessions, keys, window_ms)


def evaluate_baseline(ts: TrialSet, p: EncoderParams, classifier_kind: str = "svm",
                      window_ms: float = DEFAULT_WINDOW_MS, majority_vote: bool = False,
                      scale: bool = True, fm: FeatureMatrix | None = None, **svm_kw) -> EvalReport:
    """Encode, take 16-channel rate vectors and cross-validate over sessions."""
    fm = baseline_features(ts, p, window_ms) if fm is None else fm
    return cross_validate(fm, session_folds(ts), classifier_kind, len(ts.class_names),
                          majority_vote, scale, **svm_kw)


@dataclass
class FoldFeatures:
    train: FeatureMatrix
    test: FeatureMatrix
    final_weights: np.ndarray
    spike_counts: np.ndarray
    simulated_s: float


def reservoir_fold_features(ts: TrialSet, p: EncoderParams, setup: ReservoirSetup,
                            window_ms: float = DEFAULT_WINDOW_MS,
                            streams: list[EventStream] | None = None,
                            dump_dir: str | Path | None = None) -> list[FoldFeatures]:
    """Per fold: a fresh reservoir sees the training trials, then the test trials.

    Plastic weights carry over from trial to trial within a fold (including into the
    test trials, unless plasticity is off or frozen); membrane state resets per trial.
    With ``dump_dir`` each trial's raster (if recorded) and each fold's weight trace
    (if enabled) are written there.
    """
    dump = Path(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    streams = encode_set(ts, p) if streams is None else streams
    labels, sessions, keys = _meta(ts)
    out = []
    for f, (train_s, test_s) in enumerate(session_folds(ts)):
        engine = setup.build_engine()
        parts = []
        counts = np.zeros(engine.n, dtype=np.int64)
        simulated = 0.0
        for wanted in (lambda s: s in train_s, lambda s: s == test_s):
            idx = [i for i, s in enumerate(sessions) if wanted(s)]
            rasters = [engine.run_trial(streams[i]) for i in idx]
            for i, r in zip(idx, rasters):
                counts += np.bincount(r.spike_neuron, minlength=engine.n)
                simulated += r.duration_s
                if dump is not None and setup.sim.record_raster:
                    subject, session, trial = keys[i]
                    r.write_csv(dump / f"fold{f}_raster_{subject}_s{session}_{trial}.csv")
            fm = build_feature_matrix(rasters, [labels[i] for i in idx], [sessions[i] for i in idx],
                                      [keys[i] for i in idx], window_ms)
            # keep trial ids global so trial-level votes stay unambiguous
            fm = replace(fm, trial=np.asarray(idx)[fm.trial])
            parts.append(fm)
        if dump is not None and engine.weight_trace:
            engine.write_weight_trace(dump / f"fold{f}_weights.csv")
        out.append(FoldFeatures(parts[0], parts[1], engine.weights.copy(), counts, simulated))
    return out


def evaluate_reservoir(ts: TrialSet, p: EncoderParams, setup: ReservoirSetup,
                       classifier_kind: str = "svm", window_ms: float = DEFAULT_WINDOW_MS,
                       majority_vote: bool = False, scale: bool = True,
                       fold_features: list[FoldFeatures] | None = None, **svm_kw) -> EvalReport:
    folds = fold_features or reservoir_fold_features(ts, p, setup, window_ms)
    report = evaluate_splits([(f.train, f.test) for f in folds], classifier_kind,
                             len(ts.class_names), majority_vote, scale, **svm_kw)
    report.meta = {
        "n_neurons": int(setup.spec.n_neurons),
        "plasticity": bool(setup.sim.plasticity_enabled and not setup.sim.freeze_weights),
        "mean_rate_hz": [float(f.spike_counts.mean() / f.simulated_s) for f in folds],
    }
    return report
