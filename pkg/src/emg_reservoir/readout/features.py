"""Windowed firing-rate vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EmptyFeatureError

DEFAULT_WINDOW_MS = 200.0


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rate vectors (Hz) with a label, trial index and session per row."""

    rows: np.ndarray
    labels: np.ndarray
    trial: np.ndarray
    session: np.ndarray
    trial_keys: tuple = field(default=())

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be 2-D")
        n = rows.shape[0]
        for name in ("labels", "trial", "session"):
            a = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            if a.size != n:
                raise ValueError(f"{name} has {a.size} entries for {n} rows")
            object.__setattr__(self, name, a)
        if np.any(rows < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "rows", rows)

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.rows[mask], self.labels[mask], self.trial[mask],
                             self.session[mask], self.trial_keys)


def _spike_arrays(stream) -> tuple[np.ndarray, np.ndarray, int, float]:
    if hasattr(stream, "spike_neuron"):
        return stream.spike_neuron, stream.spike_time_s, stream.n_neurons, stream.duration_s
    chans = stream.channels
    ids = np.concatenate([np.full(c.size, i, dtype=np.int64) for i, c in enumerate(chans)] or [[]])
    times = np.concatenate(list(chans) or [[]])
    return ids.astype(np.int64), times, len(chans), stream.duration_s


def extract_rate_vectors(stream, window_ms: float = DEFAULT_WINDOW_MS) -> np.ndarray:
    """Spike rate (Hz) per channel in consecutive non-overlapping windows.

    Accepts an EventStream or a Raster. A trailing partial window is dropped.
    """
    if not window_ms > 0:
        raise ValueError("window_ms must be positive")
    ids, times, n_ch, duration_s = _spike_arrays(stream)
    n_win = int(np.floor(duration_s * 1000.0 / window_ms + 1e-9))
    if n_win < 1:
        raise EmptyFeatureError(f"a {duration_s * 1000:.1f} ms stream holds no {window_ms} ms window")
    w = np.floor(times * 1000.0 / window_ms + 1e-9).astype(np.int64)
    keep = w < n_win
    counts = np.zeros((n_win, n_ch))
    np.add.at(counts, (w[keep], ids[keep]), 1.0)
    return counts / (window_ms / 1000.0)


def build_feature_matrix(streams: Sequence, labels: Sequence[int], sessions: Sequence[int],
                         trial_keys: Sequence = (), window_ms: float = DEFAULT_WINDOW_MS) -> FeatureMatrix:
    rows, ys, trials, sess = [], [], [], []
    for i, (s, y, g) in enumerate(zip(streams, labels, sessions)):
        r = extract_rate_vectors(s, window_ms)
        rows.append(r)
        ys.append(np.full(len(r), y))
        trials.append(np.full(len(r), i))
        sess.append(np.full(len(r), g))
    return FeatureMatrix(np.vstack(rows), np.concatenate(ys), np.concatenate(trials),
                         np.concatenate(sess), tuple(trial_keys))
