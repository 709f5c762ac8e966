"""Trial containers, the canonical on-disk format, session folds and a synthetic generator.

Canonical layout (one directory per dataset)::

    index.json          {"dataset_tag", "class_names", "trials": [{file, subject, session,
                         trial, gesture, sample_rate_hz, scale}, ...]}
    <file>.csv          header ``ch0,...,ch7``, one row per sample, values in volts

``scale`` records the full-scale divisor the importer applied, so the CSV values are
already in [-1, 1].
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FoldError, LoadError, SchemaError

N_CHANNELS = 8
DATASET_SAMPLE_RATE_HZ = 200.0
INDEX_FILE = "index.json"
MANIFEST_FILE = "manifest.json"

DATASET_CLASSES = {
    "roshambo": ("rock", "paper", "scissor"),
    "sensorfusion": ("pinky", "elle", "yo", "index", "thumb"),
}
# Myo armband raw EMG is signed 8-bit.
DATASET_FULL_SCALE = {"roshambo": 128.0, "sensorfusion": 128.0}
# Only Roshambo trials are trimmed by default.
DEFAULT_TRIM_MS = {"roshambo": (600.0, 600.0), "sensorfusion": (0.0, 0.0), "synthetic": (0.0, 0.0)}
DATASET_TAGS = ("roshambo", "sensorfusion", "synthetic")


@dataclass(frozen=True, eq=False)
class Trial:
    """One multichannel recording.

    Attributes:
        samples: Array of shape (n_samples, n_channels), volts.
        sample_rate_hz: Sampling rate of ``samples``.
        gesture: Class index into the owning set's ``class_names``.
        subject_id: Subject identifier.
        session_id: Recording session, one of 0, 1, 2 for the supported datasets.
        trial_id: Identifier unique within (subject, session).
    """

    samples: np.ndarray
    sample_rate_hz: float
    gesture: int
    subject_id: str
    session_id: int
    trial_id: str

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise SchemaError(f"samples must be 2-D (n_samples, n_channels), got shape {samples.shape}")
        if samples.shape[1] != N_CHANNELS:
            raise SchemaError(f"expected {N_CHANNELS} channels, got {samples.shape[1]}")
        if samples.shape[0] < 2:
            raise SchemaError("a trial needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise SchemaError("samples contain non-finite values")
        if not self.sample_rate_hz > 0:
            raise SchemaError("sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.subject_id, self.session_id, self.trial_id)


@dataclass(frozen=True)
class TrialSet:
    trials: tuple[Trial, ...]
    class_names: tuple[str, ...]
    dataset_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.dataset_tag not in DATASET_TAGS:
            raise SchemaError(f"unknown dataset tag {self.dataset_tag!r}")
        expected = DATASET_CLASSES.get(self.dataset_tag)
        if expected is not None and len(self.class_names) != len(expected):
            raise SchemaError(
                f"{self.dataset_tag} has {len(expected)} classes, got {len(self.class_names)}"
            )
        for t in self.trials:
            if not 0 <= t.gesture < len(self.class_names):
                raise SchemaError(f"trial {t.key} has gesture {t.gesture} outside class range")

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def sessions(self) -> list[int]:
        return sorted({t.session_id for t in self.trials})

    def map(self, fn) -> "TrialSet":
        return replace(self, trials=tuple(fn(t) for t in self.trials))


@dataclass(frozen=True)
class FoldPlan:
    """Leave-one-session-out folds as (train_sessions, test_session) pairs."""

    folds: tuple[tuple[frozenset[int], int], ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


# -- canonical format ---------------------------------------------------------


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_trial_csv(path: Path, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"ch{i}" for i in range(samples.shape[1])])
        # repr() of a float64 round-trips exactly
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])


def _read_trial_csv(path: Path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise LoadError(f"cannot read trial file {path}: {exc}") from exc
    if not rows:
        raise LoadError(f"empty trial file {path}")
    header, body = rows[0], rows[1:]
    if len(header) != N_CHANNELS:
        raise SchemaError(f"{path}: expected {N_CHANNELS} channel columns, found {len(header)}")
    try:
        samples = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise LoadError(f"corrupt trial file {path}: {exc}") from exc
    if samples.ndim != 2 or samples.shape[1] != N_CHANNELS:
        raise SchemaError(f"{path}: ragged or mis-sized rows")
    return samples


def save_trials(ts: TrialSet, path: str | Path, scale: float | Sequence[float] = 1.0) -> Path:
    """Write ``ts`` in the canonical layout and return the index path."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    scales = [scale] * len(ts) if np.isscalar(scale) else list(scale)
    entries = []
    for t, s in zip(ts.trials, scales):
        name = f"{t.subject_id}_s{t.session_id}_{t.trial_id}.csv"
        _write_trial_csv(out / name, t.samples)
        entries.append(
            {
                "file": name,
                "subject": t.subject_id,
                "session": t.session_id,
                "trial": t.trial_id,
                "gesture": t.gesture,
                "sample_rate_hz": t.sample_rate_hz,
                "scale": float(s),
            }
        )
    index = {"dataset_tag": ts.dataset_tag, "class_names": list(ts.class_names), "trials": entries}
    index_path = out / INDEX_FILE
    index_path.write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    return index_path


def load_trials(path: str | Path, dataset_tag: str | None = None) -> TrialSet:
    """Load a canonical dataset directory.

    Trials come back sorted by (subject, session, trial). Raises LoadError for a
    missing/empty directory or unreadable file and SchemaError for layout problems.
    """
    root = Path(path)
    if not root.is_dir():
        raise LoadError(f"dataset directory {root} does not exist")
    index_path = root / INDEX_FILE
    if not index_path.exists():
        raise LoadError(f"no {INDEX_FILE} in {root}")
    try:
        index = json.loads(index_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"corrupt index {index_path}: {exc}") from exc
    tag = index.get("dataset_tag")
    if dataset_tag is not None and tag != dataset_tag:
        raise SchemaError(f"{root} holds dataset {tag!r}, expected {dataset_tag!r}")
    entries = index.get("trials") or []
    if not entries:
        raise LoadError(f"{index_path} lists no trials")
    trials = []
    for e in entries:
        try:
            samples = _read_trial_csv(root / e["file"])
            trials.append(
                Trial(
                    samples=samples,
                    sample_rate_hz=float(e["sample_rate_hz"]),
                    gesture=int(e["gesture"]),
                    subject_id=str(e["subject"]),
                    session_id=int(e["session"]),
                    trial_id=str(e["trial"]),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"index entry {e} is missing field {exc}") from exc
        except SchemaError as exc:
            raise SchemaError(f"{e.get('file')}: {exc}") from exc
    trials.sort(key=lambda t: t.key)
    return TrialSet(trials=tuple(trials), class_names=tuple(index["class_names"]), dataset_tag=tag)


def trim_trial(t: Trial, head_ms: float, tail_ms: float) -> Trial:
    """Drop ``head_ms`` from the start and ``tail_ms`` from the end of a trial."""
    if head_ms < 0 or tail_ms < 0:
        raise ValueError("trim lengths must be nonnegative")
    head = int(round(head_ms * t.sample_rate_hz / 1000.0))
    tail = int(round(tail_ms * t.sample_rate_hz / 1000.0))
    if head + tail > t.n_samples - 2:
        raise ValueError(
            f"trimming {head}+{tail} samples leaves fewer than 2 of {t.n_samples}"
        )
    if head == 0 and tail == 0:
        return t
    return replace(t, samples=t.samples[head : t.n_samples - tail])


def trim_set(ts: TrialSet, head_ms: float | None = None, tail_ms: float | None = None) -> TrialSet:
    """Trim every trial, defaulting to the per-dataset convention."""
    dh, dt = DEFAULT_TRIM_MS.get(ts.dataset_tag, (0.0, 0.0))
    head = dh if head_ms is None else head_ms
    tail = dt if tail_ms is None else tail_ms
    return ts.map(lambda t: trim_trial(t, head, tail))


def session_folds(ts: TrialSet) -> FoldPlan:
    sessions = ts.sessions
    if len(sessions) != 3:
        raise FoldError(f"session-wise folds need exactly 3 sessions, found {sessions}")
    all_s = frozenset(sessions)
    return FoldPlan(tuple((all_s - {s}, s) for s in sessions))


# -- synthetic data -----------------------------------------------------------


def class_channels(n_classes: int) -> list[tuple[int, ...]]:
    """Distinct channel pairs driven by each synthetic class.

    Pairs are disjoint for the first four classes and reuse channels afterwards; since
    all pairs have equal size, their indicator vectors stay linearly separable.
    """
    disjoint = [(0, 1), (2, 3), (4, 5), (6, 7)]
    rest = [c for c in combinations(range(N_CHANNELS), 2) if c not in disjoint]
    pool = disjoint + rest
    if n_classes > len(pool):
        raise ValueError(f"at most {len(pool)} synthetic classes are supported")
    return pool[:n_classes]


def _band_noise(rng: np.random.Generator, n: int, fs: float, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    return x / (x.std() + 1e-12)


def _burst_envelope(rng: np.random.Generator, n: int, fs: float) -> np.ndarray:
    # Bursts of 120-300 ms separated by gaps shorter than 40 ms, so every
    # 200 ms window overlaps activity.
    env = np.zeros(n)
    i = int(rng.integers(0, int(0.03 * fs) + 1))
    while i < n:
        length = int(rng.uniform(0.12, 0.30) * fs)
        ramp = np.sin(np.linspace(0.0, np.pi, max(length, 2)))
        seg = 0.5 + 0.5 * ramp
        end = min(n, i + length)
        env[i:end] = seg[: end - i] * rng.uniform(0.8, 1.2)
        i = end + int(rng.uniform(0.0, 0.04) * fs)
    return env


def synth_trials(
    n_classes: int,
    n_sessions: int,
    trials_per_class_per_session: int,
    seed: int,
    duration_s: float = 2.0,
    sample_rate_hz: float = DATASET_SAMPLE_RATE_HZ,
) -> TrialSet:
    """Labeled 8-channel trials where class k drives its own channel pair.

    Active channels carry 20-90 Hz band-limited bursts (std ~0.45 V), idle channels
    carry 0.02 V background noise; per-session and per-trial gains vary by up to 25%.
    Channel RMS alone linearly separates the classes.
    """
    if n_classes < 2:
        raise ValueError("n_classes must be at least 2")
    if n_sessions < 1 or trials_per_class_per_session < 1:
        raise ValueError("n_sessions and trials_per_class_per_session must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    chans = class_channels(n_classes)
    session_gain = rng.uniform(0.85, 1.15, size=(n_sessions, N_CHANNELS))
    trials = []
    for s in range(n_sessions):
        for k in range(n_classes):
            for r in range(trials_per_class_per_session):
                x = 0.02 * rng.standard_normal((n, N_CHANNELS))
                for c in chans[k]:
                    gain = 0.45 * session_gain[s, c] * rng.uniform(0.85, 1.15)
                    burst = _band_noise(rng, n, sample_rate_hz, 20.0, 90.0)
                    x[:, c] += gain * _burst_envelope(rng, n, sample_rate_hz) * burst
                trials.append(
                    Trial(
                        samples=np.clip(x, -1.0, 1.0),
                        sample_rate_hz=sample_rate_hz,
                        gesture=k,
                        subject_id="synth",
                        session_id=s,
                        trial_id=f"g{k}_r{r:02d}",
                    )
                )
    trials.sort(key=lambda t: t.key)
    return TrialSet(
        trials=tuple(trials),
        class_names=tuple(f"class{k}" for k in range(n_classes)),
        dataset_tag="synthetic",
    )


# -- importers ----------------------------------------------------------------

# Raw trial files are matched by name; gesture names are checked against the tag.
DEFAULT_RAW_PATTERN = (
    r"(?i)subject[_-]?(?P<subject>\d+).*?session[_-]?(?P<session>\d+)"
    r".*?(?P<gesture>[a-z]+)[_-]?(?P<trial>\d+)\.(?:csv|npy|txt)$"
)


def _read_raw(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        try:
            arr = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError:
            arr = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise SchemaError(f"{path}: expected a 2-D array")
    if arr.shape[1] != N_CHANNELS and arr.shape[0] == N_CHANNELS:
        arr = arr.T
    if arr.shape[1] != N_CHANNELS:
        raise SchemaError(f"{path}: expected {N_CHANNELS} channels, got shape {arr.shape}")
    return arr


def _match_gesture(name: str, classes: Sequence[str]) -> int | None:
    name = name.lower()
    for i, c in enumerate(classes):
        # tolerate plurals such as "scissors"
        if name == c or name.rstrip("s") == c.rstrip("s"):
            return i
    return None


def import_raw(
    raw_path: str | Path,
    dataset_tag: str,
    pattern: str = DEFAULT_RAW_PATTERN,
    full_scale: float | None = None,
) -> TrialSet:
    """Convert a directory of raw per-trial files into a TrialSet.

    Each file (``.csv``/``.txt`` with 8 comma-separated columns, or ``.npy``) is one
    trial; its name must match ``pattern`` with named groups ``subject``, ``session``,
    ``gesture`` and ``trial``. Values are divided by the dataset's full-scale value.
    Session numbers are mapped onto 0..2 in sorted order.
    """
    if dataset_tag not in DATASET_CLASSES:
        raise SchemaError(f"no importer for dataset tag {dataset_tag!r}")
    classes = DATASET_CLASSES[dataset_tag]
    scale = DATASET_FULL_SCALE[dataset_tag] if full_scale is None else float(full_scale)
    root = Path(raw_path)
    if not root.is_dir():
        raise LoadError(f"raw dataset directory {root} does not exist")
    rx = re.compile(pattern)
    records = []
    for f in sorted(p for p in root.rglob("*") if p.is_file()):
        m = rx.search(f.name)
        if m is None:
            continue
        g = _match_gesture(m.group("gesture"), classes)
        if g is None:
            raise SchemaError(f"{f.name}: gesture {m.group('gesture')!r} is not a {dataset_tag} class")
        records.append((m.group("subject"), int(m.group("session")), m.group("trial"), g, f))
    if not records:
        raise LoadError(f"no files in {root} match the {dataset_tag} layout")
    session_map = {s: i for i, s in enumerate(sorted({r[1] for r in records}))}
    trials = []
    for subject, session, trial, g, f in records:
        samples = np.clip(_read_raw(f) / scale, -1.0, 1.0)
        trials.append(
            Trial(
                samples=samples,
                sample_rate_hz=DATASET_SAMPLE_RATE_HZ,
                gesture=g,
                subject_id=f"{int(subject):02d}",
                session_id=session_map[session],
                trial_id=f"{classes[g]}{int(trial):02d}",
            )
        )
    trials.sort(key=lambda t: t.key)
    return TrialSet(trials=tuple(trials), class_names=classes, dataset_tag=dataset_tag)


def write_manifest(root: str | Path, extra: dict | None = None) -> dict:
    """Write sha256 checksums of every file in a canonical directory."""
    root = Path(root)
    files = sorted(p for p in root.iterdir() if p.is_file() and p.name != MANIFEST_FILE)
    manifest = {"files": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}}
    if extra:
        manifest.update(extra)
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def iter_labels(trials: Iterable[Trial]) -> np.ndarray:
    return np.array([t.gesture for t in trials], dtype=int)
