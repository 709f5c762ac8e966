"""Branching-factor regulation of excitatory recurrent weights.

Credit rule: when neuron j fires, every presynaptic excitatory neuron i whose spike
opened a still-valid window on synapse i->j receives ``w_ij / S_j``, where ``S_j`` is
the total excitatory increment j received since its own previous spike. The credits
gathered by one spike of i form its branching factor ``b_i``; it is resolved when i
fires again, and all of i's outgoing excitatory weights are scaled by
``1 + lr * (target - b_i)`` and clipped to ``[w_min, w_max]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMeasureError
from .topology import Wiring


@dataclass(frozen=True)
class CriticalParams:
    learning_rate: float = 0.1
    target_branching: float = 1.0
    w_min: float = 0.0
    w_max: float = 1.0
    window_ms: float = 25.0

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not self.target_branching > 0:
            raise ValueError("target_branching must be positive")
        if self.w_max < self.w_min or self.w_min < 0:
            raise ValueError("need 0 <= w_min <= w_max")
        if not self.window_ms > 0:
            raise ValueError("window_ms must be positive")


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return order, ptr


def _gather(order: np.ndarray, ptr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Concatenate the CSR segments of ``rows``."""
    starts, stops = ptr[rows], ptr[rows + 1]
    lengths = stops - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return order[offsets + np.arange(total)]


class BranchingLedger:
    """Online per-synapse attribution state for one network.

    The ledger never owns weights; callers pass the current weight magnitudes in and
    receive the updated array back.
    """

    def __init__(self, wiring: Wiring, params: CriticalParams | None = None,
                 record_history: bool = False):
        self.params = params or CriticalParams()
        self.n = wiring.n_neurons
        self.pre = wiring.rec_pre
        self.post = wiring.rec_post
        exc_syn = wiring.is_excitatory[self.pre]
        self.plastic = np.flatnonzero(exc_syn)
        self._out_order, self._out_ptr = _csr(self.pre[self.plastic], self.n)
        self._in_order, self._in_ptr = _csr(self.post[self.plastic], self.n)
        self.record_history = record_history
        self.reset()

    def reset(self) -> None:
        """Forget all transient state (windows, received drive, open generations)."""
        e = self.pre.size
        self.open = np.zeros(e, dtype=bool)
        self.open_time = np.full(e, -np.inf)
        self.delivered = np.zeros(e)
        self.received = np.zeros(self.n)
        self.accumulator = np.zeros(self.n)
        self.last_spike = np.full(self.n, -np.inf)
        self.estimate = np.full(self.n, np.nan)
        self.history: list[tuple[int, float, float]] = []

    def outgoing(self, i) -> np.ndarray:
        """Indices (into the recurrent arrays) of the plastic synapses leaving ``i``."""
        return self.plastic[_gather(self._out_order, self._out_ptr, np.atleast_1d(i))]

    def incoming(self, j) -> np.ndarray:
        return self.plastic[_gather(self._in_order, self._in_ptr, np.atleast_1d(j))]

    def receive(self, excitatory_increment: np.ndarray) -> None:
        """Add this step's excitatory drive to each neuron's running total."""
        self.received += excitatory_increment

    def on_pre_spike(self, neurons, t: float, weights: np.ndarray) -> None:
        neurons = np.atleast_1d(neurons)
        syn = self.outgoing(neurons)
        # a restarted window discards any unresolved credit
        self.open[syn] = True
        self.open_time[syn] = t
        self.delivered[syn] = weights[syn]
        self.last_spike[neurons] = t

    def on_post_spike(self, neurons, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Resolve windows into ``neurons``; returns (synapse ids, contributions)."""
        neurons = np.atleast_1d(neurons)
        syn = self.incoming(neurons)
        syn = syn[self.open[syn]]
        valid = syn[t - self.open_time[syn] <= self.params.window_ms]
        s = self.received[self.post[valid]]
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(s > 0, self.delivered[valid] / s, 0.0)
        np.add.at(self.accumulator, self.pre[valid], contrib)
        self.open[syn] = False
        self.received[neurons] = 0.0
        return valid, contrib

    def estimate_and_update(self, neurons, weights: np.ndarray, t: float = np.nan,
                            frozen: bool = False) -> np.ndarray:
        """Close the previous generation of each neuron and rescale its outgoing weights."""
        neurons = np.atleast_1d(neurons)
        neurons = neurons[np.isfinite(self.last_spike[neurons])]
        if neurons.size == 0:
            return weights
        b = self.accumulator[neurons].copy()
        self.estimate[neurons] = b
        if self.record_history:
            self.history.extend(zip(neurons.tolist(), self.last_spike[neurons].tolist(), b.tolist()))
        self.accumulator[neurons] = 0.0
        if frozen:
            return weights
        p = self.params
        factor = np.zeros(self.n)
        factor[neurons] = 1.0 + p.learning_rate * (p.target_branching - b)
        syn = self.outgoing(neurons)
        weights[syn] = np.clip(weights[syn] * factor[self.pre[syn]], p.w_min, p.w_max)
        return weights

    def process(self, spiked: np.ndarray, t: float, weights: np.ndarray,
                frozen: bool = False) -> np.ndarray:
        """Handle all spikes of one step: resolve, update, then open new windows."""
        if spiked.size == 0:
            return weights
        self.on_post_spike(spiked, t)
        weights = self.estimate_and_update(spiked, weights, t, frozen)
        self.on_pre_spike(spiked, t, weights)
        return weights


@dataclass(frozen=True)
class BranchingMeasure:
    mean: float
    neuron: np.ndarray
    time_s: np.ndarray
    credit: np.ndarray


def branching_credits(raster, wiring: Wiring, window_ms: float = 25.0, input_events=None,
                      dt_ms: float = 1.0, weights: np.ndarray | None = None) -> BranchingMeasure:
    """Offline replay of the credit rule over a recorded raster.

    Written as a plain event loop, separate from BranchingLedger, so the two can check
    each other. Recurrent spikes land one step after emission; input events land in
    step ``floor(t / dt)``. The mean is taken over spikes of neurons with at least one
    outgoing excitatory synapse.
    """
    w = wiring.rec_weight if weights is None else np.asarray(weights)
    exc = wiring.is_excitatory
    out: dict[int, list[tuple[int, float]]] = {}
    for e, (i, j) in enumerate(zip(wiring.rec_pre.tolist(), wiring.rec_post.tolist())):
        if exc[i]:
            out.setdefault(i, []).append((j, float(w[e])))

    neurons, steps = _raster_steps(raster, dt_ms)
    if neurons.size == 0:
        raise UndefinedMeasureError("branching is undefined for an empty raster")

    # events keyed by step: deliveries first, then spikes
    deliveries: dict[int, list[tuple[int, float]]] = {}
    if input_events is not None:
        for c, times in enumerate(input_events.channels):
            sel = wiring.in_channel == c
            targets = list(zip(wiring.in_post[sel].tolist(), wiring.in_weight[sel].tolist()))
            for t in times:
                k = int(np.floor(t * 1000.0 / dt_ms + 1e-9))
                deliveries.setdefault(k, []).extend(targets)
    spikes_at: dict[int, list[int]] = {}
    for i, k in zip(neurons.tolist(), steps.tolist()):
        spikes_at.setdefault(k, []).append(i)
        deliveries.setdefault(k + 1, []).extend(out.get(i, []))

    received = np.zeros(wiring.n_neurons)
    open_windows: dict[int, dict[int, tuple[float, float, int]]] = {}
    credit = np.zeros(neurons.size)
    spike_ids = {}
    order = np.lexsort((neurons, steps))
    for idx in order:
        spike_ids[(int(neurons[idx]), int(steps[idx]))] = int(idx)

    for k in sorted(set(deliveries) | set(spikes_at)):
        t = k * dt_ms
        for j, wij in deliveries.get(k, ()):
            received[j] += wij
        fired = spikes_at.get(k, [])
        for j in fired:
            for i, (t_open, wij, sid) in open_windows.pop(j, {}).items():
                if t - t_open <= window_ms and received[j] > 0:
                    credit[sid] += wij / received[j]
            received[j] = 0.0
        for i in fired:
            sid = spike_ids[(i, k)]
            for j, wij in out.get(i, []):
                open_windows.setdefault(j, {})[i] = (t, wij, sid)

    regulated = np.array([i in out for i in neurons.tolist()], dtype=bool)
    mean = float(credit[regulated].mean()) if regulated.any() else 0.0
    return BranchingMeasure(mean, neurons, steps * dt_ms / 1000.0, credit)


def measure_global_branching(raster, wiring: Wiring, window_ms: float = 25.0, input_events=None,
                             dt_ms: float = 1.0, weights: np.ndarray | None = None) -> float:
    """Mean credited branching factor per spike (see ``branching_credits``)."""
    return branching_credits(raster, wiring, window_ms, input_events, dt_ms, weights).mean


def _raster_steps(raster, dt_ms: float) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(raster, "spike_neuron"):
        neurons = np.asarray(raster.spike_neuron, dtype=np.int64)
        times = np.asarray(raster.spike_time_s, dtype=np.float64)
    else:
        neurons = np.concatenate([np.full(c.size, i) for i, c in enumerate(raster.channels)] or [[]])
        times = np.concatenate(list(raster.channels) or [[]])
    steps = np.floor(times * 1000.0 / dt_ms + 1e-9).astype(np.int64)
    return neurons.astype(np.int64), steps
