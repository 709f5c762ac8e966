"""Clock-driven engine tying input events, the neuron population, wiring and plasticity."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoding import EventStream
from .errors import WiringError
from .neuron import NeuronParams, Population
from .plasticity import BranchingLedger, CriticalParams
from .topology import Wiring


@dataclass(frozen=True)
class SimulationConfig:
    dt_ms: float = 1.0
    record_raster: bool = True
    plasticity_enabled: bool = True
    reset_between_trials: bool = True
    freeze_weights: bool = False
    weight_trace_every_ms: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dt_ms > 0:
            raise ValueError("dt_ms must be positive")


@dataclass(frozen=True, eq=False)
class Raster:
    """Reservoir spikes as parallel (neuron, time) arrays sorted by time then neuron."""

    spike_neuron: np.ndarray
    spike_time_s: np.ndarray
    n_neurons: int
    duration_s: float

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.n_neurons == other.n_neurons
            and self.duration_s == other.duration_s
            and np.array_equal(self.spike_neuron, other.spike_neuron)
            and np.array_equal(self.spike_time_s, other.spike_time_s)
        )

    @property
    def n_spikes(self) -> int:
        return int(self.spike_neuron.size)

    def per_neuron(self) -> list[np.ndarray]:
        order = np.argsort(self.spike_neuron, kind="stable")
        counts = np.bincount(self.spike_neuron, minlength=self.n_neurons)
        return np.split(self.spike_time_s[order], np.cumsum(counts)[:-1])

    def to_event_stream(self) -> EventStream:
        return EventStream(tuple(self.per_neuron()), self.duration_s)

    def window(self, start_s: float, stop_s: float) -> "Raster":
        sel = (self.spike_time_s >= start_s) & (self.spike_time_s < stop_s)
        return Raster(self.spike_neuron[sel], self.spike_time_s[sel] - start_s, self.n_neurons,
                      stop_s - start_s)

    def mean_rate_hz(self) -> np.ndarray:
        return np.bincount(self.spike_neuron, minlength=self.n_neurons) / self.duration_s

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["neuron_id", "spike_time_s"])
            for i, t in zip(self.spike_neuron.tolist(), self.spike_time_s.tolist()):
                w.writerow([i, repr(t)])


def bin_events(events: EventStream, n_steps: int, dt_ms: float) -> np.ndarray:
    """Event counts per (step, channel); an event at t lands in step floor(t / dt)."""
    counts = np.zeros((n_steps, events.n_channels), dtype=np.int32)
    for c, times in enumerate(events.channels):
        if times.size:
            k = np.floor(times * 1000.0 / dt_ms + 1e-9).astype(np.int64)
            np.add.at(counts[:, c], k[k < n_steps], 1)
    return counts


class ReservoirEngine:
    """One reservoir with mutable recurrent weights.

    Per step: input and previous-step recurrent increments are summed, the population
    advances, and the step's spikes go to the plasticity ledger.
    """

    def __init__(self, wiring: Wiring, neuron_params: NeuronParams,
                 critical: CriticalParams | None = None, cfg: SimulationConfig | None = None):
        self.wiring = wiring
        self.cfg = cfg or SimulationConfig()
        self.critical = critical or CriticalParams()
        n = wiring.n_neurons
        self.n = n
        self.population = Population(n, neuron_params, self.cfg.dt_ms)
        self.weights = wiring.rec_weight.astype(np.float64).copy()
        self.ledger = BranchingLedger(wiring, self.critical) if self.cfg.plasticity_enabled else None
        self._is_exc = wiring.is_excitatory
        self._w_in = np.zeros((wiring.n_channels, n))
        np.add.at(self._w_in, (wiring.in_channel, wiring.in_post), wiring.in_weight)
        self._w_rec = np.zeros((n, n))
        self._refresh(np.arange(wiring.n_recurrent))
        self.weight_trace: list[tuple[float, np.ndarray]] = []
        self._clock_ms = 0.0

    def _refresh(self, syn: np.ndarray) -> None:
        pre, post = self.wiring.rec_pre[syn], self.wiring.rec_post[syn]
        w = self.weights[syn]
        self._w_rec[pre, post] = np.where(self._is_exc[pre], w, -w)

    def current_wiring(self) -> Wiring:
        return self.wiring.with_rec_weights(self.weights.copy())

    def reset_state(self) -> None:
        self.population.reset()
        if self.ledger is not None:
            self.ledger.reset()

    def run_trial(self, events: EventStream, duration_s: float | None = None) -> Raster:
        if events.n_channels != self.wiring.n_channels:
            raise WiringError(
                f"event stream has {events.n_channels} channels, wiring expects {self.wiring.n_channels}"
            )
        if self.cfg.reset_between_trials:
            self.reset_state()
        dt = self.cfg.dt_ms
        duration_s = events.duration_s if duration_s is None else duration_s
        n_steps = int(round(duration_s * 1000.0 / dt))
        counts = bin_events(events, n_steps, dt)
        has_input = counts.any(axis=1)

        pop, ledger = self.population, self.ledger
        frozen = self.cfg.freeze_weights
        plastic = ledger is not None
        trace_every = self.cfg.weight_trace_every_ms
        zeros = np.zeros(self.n)
        rec_exc = rec_inh = zeros
        rec_neurons, rec_steps = [], []
        for k in range(n_steps):
            t_ms = k * dt
            drive = counts[k] @ self._w_in if has_input[k] else zeros
            if plastic:
                ledger.receive(drive + rec_exc)
            spiked = pop.step(drive + rec_exc + rec_inh)
            idx = np.flatnonzero(spiked)
            if idx.size:
                rec_neurons.append(idx)
                rec_steps.append(np.full(idx.size, k))
                if plastic:
                    self.weights = ledger.process(idx, t_ms, self.weights, frozen)
                    if not frozen:
                        self._refresh(ledger.outgoing(idx))
                exc = idx[self._is_exc[idx]]
                inh = idx[~self._is_exc[idx]]
                rec_exc = self._w_rec[exc].sum(axis=0) if exc.size else zeros
                rec_inh = self._w_rec[inh].sum(axis=0) if inh.size else zeros
            else:
                rec_exc = rec_inh = zeros
            if trace_every > 0 and (self._clock_ms + t_ms) % trace_every < dt / 2:
                self.weight_trace.append((self._clock_ms + t_ms, self.weights.copy()))
        self._clock_ms += n_steps * dt
        if rec_neurons:
            neurons = np.concatenate(rec_neurons)
            steps = np.concatenate(rec_steps)
        else:
            neurons = np.empty(0, dtype=np.int64)
            steps = np.empty(0, dtype=np.int64)
        return Raster(neurons.astype(np.int64), steps * dt / 1000.0, self.n, duration_s)

    def write_weight_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_ms", "synapse_id", "weight"])
            for t, weights in self.weight_trace:
                for s, v in enumerate(weights.tolist()):
                    w.writerow([repr(t), s, repr(v)])


@dataclass
class TrialResult:
    raster: Raster
    label: int
    session: int
    trial_key: tuple = field(default=())


def run_dataset(engine: ReservoirEngine, streams: Sequence[EventStream],
                labels: Sequence[int], sessions: Sequence[int],
                keys: Iterable[tuple] | None = None) -> list[TrialResult]:
    """Run trials in the given order through one engine; weights carry over."""
    keys = list(keys) if keys is not None else [()] * len(streams)
    return [TrialResult(engine.run_trial(s), int(y), int(g), k)
            for s, y, g, k in zip(streams, labels, sessions, keys)]


def poisson_events(rate_hz: float, n_channels: int, duration_s: float, seed=None,
                   dt_ms: float = 1.0) -> EventStream:
    """Independent Poisson trains on a dt grid (at most one event per step and channel)."""
    rng = np.random.default_rng(seed)
    n_steps = int(round(duration_s * 1000.0 / dt_ms))
    p = rate_hz * dt_ms / 1000.0
    hits = rng.random((n_steps, n_channels)) < p
    chans = tuple(np.flatnonzero(hits[:, c]) * dt_ms / 1000.0 for c in range(n_channels))
    return EventStream(chans, duration_s)
