"""Temporal-contrast (UP/DN) spike encoding of analog channels.

Each channel is linearly interpolated, then every difference between successive
interpolated samples is compared against a positive and a negative threshold. A bin
emits at most one spike per polarity, and each polarity has its own refractory clock.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import Trial, TrialSet

DEFAULT_VTHP = 0.5
DEFAULT_VTHN = -0.5
DEFAULT_GRID_P = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_GRID_N = tuple(round(-0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class EncoderParams:
    vthp: float = DEFAULT_VTHP
    vthn: float = DEFAULT_VTHN
    interp_factor: int = 1
    refractory_ms: float = 0.0

    def __post_init__(self) -> None:
        if not self.vthp > 0:
            raise ValueError(f"vthp must be positive, got {self.vthp}")
        if not self.vthn < 0:
            raise ValueError(f"vthn must be negative, got {self.vthn}")
        if int(self.interp_factor) != self.interp_factor or self.interp_factor < 1:
            raise ValueError(f"interp_factor must be an integer >= 1, got {self.interp_factor}")
        if self.refractory_ms < 0:
            raise ValueError("refractory_ms must be nonnegative")


@dataclass(frozen=True, eq=False)
class EventStream:
    """Spike times per channel, in seconds.

    For encoded trials the channel layout is ``[UP0..UP7, DN0..DN7]``; reservoir
    rasters reuse the type with one channel per neuron.
    """

    channels: tuple[np.ndarray, ...]
    duration_s: float

    def __post_init__(self) -> None:
        chans = []
        for i, ch in enumerate(self.channels):
            a = np.asarray(ch, dtype=np.float64).reshape(-1)
            if a.size:
                if a[0] < 0 or a[-1] >= self.duration_s:
                    raise ValueError(f"channel {i} has spike times outside [0, {self.duration_s})")
                if np.any(np.diff(a) <= 0):
                    raise ValueError(f"channel {i} spike times are not strictly increasing")
            a.setflags(write=False)
            chans.append(a)
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def count(self) -> int:
        return int(sum(c.size for c in self.channels))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.duration_s == other.duration_s
            and self.n_channels == other.n_channels
            and all(np.array_equal(a, b) for a, b in zip(self.channels, other.channels))
        )

    def window(self, start_s: float, stop_s: float) -> "EventStream":
        """Events in [start_s, stop_s), re-referenced to start at 0."""
        chans = [c[(c >= start_s) & (c < stop_s)] - start_s for c in self.channels]
        return EventStream(tuple(chans), stop_s - start_s)


def interpolate(signal: np.ndarray, factor: int) -> np.ndarray:
    """Insert ``factor - 1`` evenly spaced linear points between neighbouring samples."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    s = np.asarray(signal, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("signal must be 1-D with at least 2 samples")
    if factor == 1:
        return s.copy()
    n = s.size
    grid = np.arange((n - 1) * factor + 1) / factor
    out = np.interp(grid, np.arange(n), s)
    # keep original samples bit-exact
    out[::factor] = s
    return out


def _gate(candidates: np.ndarray, min_gap: float) -> np.ndarray:
    if min_gap <= 0 or candidates.size < 2:
        return candidates
    kept = []
    last = -np.inf
    for k in candidates:
        if k - last >= min_gap:
            kept.append(k)
            last = k
    return np.asarray(kept, dtype=candidates.dtype)


def encode_channel(signal: np.ndarray, fs_hz: float, p: EncoderParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (up_times, dn_times) in seconds for one analog channel."""
    if not fs_hz > 0:
        raise ValueError("fs_hz must be positive")
    s = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("signal contains non-finite values")
    x = interpolate(s, p.interp_factor)
    rate = fs_hz * p.interp_factor
    d = np.diff(x)
    up = np.flatnonzero(d >= p.vthp) + 1
    dn = np.flatnonzero(d <= p.vthn) + 1
    gap = p.refractory_ms * rate / 1000.0
    up, dn = _gate(up, gap), _gate(dn, gap)
    return up / rate, dn / rate


def encode_trial(t: Trial, p: EncoderParams) -> EventStream:
    ups, dns = [], []
    for c in range(t.n_channels):
        u, d = encode_channel(t.samples[:, c], t.sample_rate_hz, p)
        ups.append(u)
        dns.append(d)
    return EventStream(tuple(ups + dns), t.duration_s)


def reconstruct(
    up_times: np.ndarray,
    dn_times: np.ndarray,
    p: EncoderParams,
    duration_s: float,
    fs_hz: float,
    initial: float = 0.0,
) -> np.ndarray:
    """Staircase reconstruction sampled at ``fs_hz``: +vthp per UP, +vthn per DN."""
    n = int(round(duration_s * fs_hz))
    inc = np.zeros(n)
    for times, step in ((up_times, p.vthp), (dn_times, p.vthn)):
        bins = np.rint(np.asarray(times, dtype=np.float64) * fs_hz).astype(int)
        np.add.at(inc, bins[(bins >= 0) & (bins < n)], step)
    return initial + np.cumsum(inc)


def write_events_csv(stream: EventStream, path: str | Path) -> None:
    """Rows of (channel_index, spike_time_s), ordered by time then channel."""
    rows = [(t, c) for c, ch in enumerate(stream.channels) for t in ch]
    rows.sort()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel_index", "spike_time_s"])
        for t, c in rows:
            w.writerow([c, repr(float(t))])


def read_events_csv(path: str | Path, n_channels: int, duration_s: float) -> EventStream:
    chans: list[list[float]] = [[] for _ in range(n_channels)]
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for c, t in r:
            chans[int(c)].append(float(t))
    return EventStream(tuple(np.array(sorted(c)) for c in chans), duration_s)


def grid_search_thresholds(
    ts: TrialSet,
    grid_p: Sequence[float] = DEFAULT_GRID_P,
    grid_n: Sequence[float] = DEFAULT_GRID_N,
    interp_factor: int = 1,
    refractory_ms: float = 0.0,
    classifier_kind: str = "svm",
    window_ms: float = 200.0,
    scale: bool = True,
) -> tuple[EncoderParams, list[dict]]:
    """Score every (vthp, vthn) pair with the encoding baseline.

    Returns the best parameters and one row per grid cell. Ties go to the larger
    vthp, then the larger |vthn|.
    """
    from .pipeline import evaluate_baseline

    if not grid_p or not grid_n:
        raise ValueError("threshold grids must be nonempty")
    surface = []
    best_key, best = None, None
    for vp in grid_p:
        for vn in grid_n:
            p = EncoderParams(vp, vn, interp_factor, refractory_ms)
            report = evaluate_baseline(ts, p, classifier_kind, window_ms=window_ms, scale=scale)
            surface.append(
                {"vthp": vp, "vthn": vn, "mean": report.mean_accuracy, "std": report.std_accuracy}
            )
            key = (report.mean_accuracy, vp, -vn)
            if best_key is None or key > best_key:
                best_key, best = key, p
    return best, surface
