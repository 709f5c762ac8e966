"""Quick in-process checks against independently derived values.

Each check returns ``(name, ok, detail)``; ``run_all`` runs them in order.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .encoding import EncoderParams, encode_channel, reconstruct
from .neuron import NeuronParams, NeuronState, draw_population, step
from .plasticity import branching_credits
from .readout import binary_auc, predict_lda, predict_svm, train_lda, train_svm
from .reservoir import ReservoirEngine, SimulationConfig, poisson_events
from .topology import ReservoirSpec, build_wiring

Check = tuple[str, bool, str]


def check_membrane_decay() -> Check:
    p = NeuronParams(tau_ms=20.0, tau_vth_ms=50.0)
    s = NeuronState(np.array([0.9]), np.array([1.1]), np.array([-np.inf]))
    for k in range(50):
        s, _ = step(s, 0.0, p)
        if k == 19:
            v20 = s.v[0]
    err_v = abs(v20 / (0.9 * math.exp(-1.0)) - 1.0)
    err_th = abs(s.vth[0] / (1.0 + 0.1 * math.exp(-1.0)) - 1.0)
    ok = err_v < 1e-9 and err_th < 1e-9
    return "neuron leak closed form", ok, f"rel err v={err_v:.2e}, vth={err_th:.2e}"


def check_staircase() -> Check:
    rng = np.random.default_rng(0)
    p = EncoderParams(0.25, -0.25)
    # steps of exactly one threshold are reproduced exactly by the staircase
    x = np.concatenate([[0.0], np.cumsum(rng.choice([-0.25, 0.0, 0.25], size=399))])
    up, dn = encode_channel(x, 200.0, p)
    rec = reconstruct(up, dn, p, 2.0, 200.0, initial=x[0])
    ok = bool(np.array_equal(rec, x))
    return "encoder staircase reconstruction", ok, f"max err {np.max(np.abs(rec - x)):.2e}"


def check_topology_counts() -> Check:
    w = build_wiring(ReservoirSpec(seed=3))
    n_exc = int(w.is_excitatory.sum())
    ok = w.n_neurons == 320 and n_exc == 256 and w.in_post.size == 174
    return "reference wiring counts", ok, (
        f"neurons={w.n_neurons}, excitatory={n_exc}, input edges={w.in_post.size}, "
        f"recurrent edges={w.n_recurrent}"
    )


def _blobs(seed: int, n: int = 60):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    y = np.repeat(np.arange(3), n)
    return centers[y] + 0.5 * rng.standard_normal((y.size, 2)), y


def check_classifiers() -> Check:
    X, y = _blobs(1)
    Xt, yt = _blobs(2)
    svm_acc = float(np.mean(predict_svm(train_svm(X, y), Xt)[0] == yt))
    lda_acc = float(np.mean(predict_lda(train_lda(X, y), Xt)[0] == yt))
    ok = svm_acc == 1.0 and lda_acc == 1.0
    return "separable blobs", ok, f"svm={svm_acc:.3f}, lda={lda_acc:.3f}"


def check_auc() -> Check:
    # 3 of 4 positive/negative pairs ordered correctly
    auc = binary_auc(np.array([0.1, 0.4, 0.35, 0.8]), np.array([False, False, True, True]))
    return "Mann-Whitney AUC", abs(auc - 0.75) < 1e-12, f"auc={auc}"


def check_branching_replay() -> Check:
    """Online ledger estimates must equal the offline replay spike by spike."""
    w = build_wiring(ReservoirSpec(seed=1))
    engine = ReservoirEngine(w, draw_population(w.n_neurons, seed=1),
                             cfg=SimulationConfig(freeze_weights=True))
    engine.ledger.record_history = True
    ev = poisson_events(50.0, 16, 2.0, seed=1)
    raster = engine.run_trial(ev)
    offline = branching_credits(raster, w, input_events=ev)
    by_spike = {(int(i), round(t * 1000.0)): c
                for i, t, c in zip(offline.neuron, offline.time_s, offline.credit)}
    hist = engine.ledger.history
    worst = max((abs(by_spike[(i, round(t))] - b) for i, t, b in hist), default=np.inf)
    ok = raster.n_spikes > 0 and len(hist) > 0 and worst < 1e-9
    return "online vs offline branching", bool(ok), (
        f"spikes={raster.n_spikes}, generations={len(hist)}, max diff={worst:.2e}"
    )


CHECKS: tuple[Callable[[], Check], ...] = (
    check_membrane_decay,
    check_staircase,
    check_topology_counts,
    check_classifiers,
    check_auc,
    check_branching_replay,
)


def run_all() -> list[Check]:
    return [c() for c in CHECKS]
