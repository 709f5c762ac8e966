"""Minicolumn/macrocolumn lattice, distance-dependent recurrent wiring and input wiring."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import SchemaError

N_INPUT_CHANNELS = 16
REFERENCE_NEURONS = 320
REFERENCE_RECURRENT = 1161


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ReservoirSpec:
    macro_shape: tuple[int, int, int] = (2, 5, 1)
    mini_shape: tuple[int, int, int] = (4, 4, 2)
    exc_fraction: float = 0.8
    target_recurrent: int = REFERENCE_RECURRENT
    input_fraction: float = 0.15
    seed: int = 0
    length_scale: float = 2.0
    recurrent_weight_max: float = 0.25
    input_weight_max: float = 1.0
    n_channels: int = N_INPUT_CHANNELS

    def __post_init__(self) -> None:
        object.__setattr__(self, "macro_shape", tuple(int(x) for x in self.macro_shape))
        object.__setattr__(self, "mini_shape", tuple(int(x) for x in self.mini_shape))
        if len(self.macro_shape) != 3 or len(self.mini_shape) != 3:
            raise ValueError("macro_shape and mini_shape need three dimensions")
        if min(self.macro_shape + self.mini_shape) < 1:
            raise ValueError("shape dimensions must be positive")
        if not 0 < self.exc_fraction <= 1:
            raise ValueError("exc_fraction must lie in (0, 1]")
        if self.input_fraction < 0:
            raise ValueError("input_fraction must be nonnegative")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")

    @property
    def n_neurons(self) -> int:
        return math.prod(self.macro_shape) * math.prod(self.mini_shape)


@dataclass(frozen=True, eq=False)
class Wiring:
    """Immutable network description.

    Weights are stored as nonnegative magnitudes; an inhibitory presynaptic neuron
    delivers ``-w``. Input synapses are always excitatory.
    """

    positions: np.ndarray
    is_excitatory: np.ndarray
    rec_pre: np.ndarray
    rec_post: np.ndarray
    rec_weight: np.ndarray
    in_channel: np.ndarray
    in_post: np.ndarray
    in_weight: np.ndarray
    n_channels: int = N_INPUT_CHANNELS
    minicolumn: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        for name in ("positions", "is_excitatory", "rec_pre", "rec_post", "rec_weight",
                     "in_channel", "in_post", "in_weight", "minicolumn"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.array(a)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        n = self.n_neurons
        if np.any(self.rec_pre == self.rec_post):
            raise SchemaError("self-connections are not allowed")
        if self.rec_pre.size and (self.rec_pre.max() >= n or self.rec_post.max() >= n):
            raise SchemaError("recurrent synapse refers to a missing neuron")
        if len(set(zip(self.rec_pre.tolist(), self.rec_post.tolist()))) != self.rec_pre.size:
            raise SchemaError("duplicate recurrent synapses")
        if np.any(self.rec_weight < 0) or np.any(self.in_weight < 0):
            raise SchemaError("weight magnitudes must be nonnegative")
        if self.in_channel.size and self.in_channel.max() >= self.n_channels:
            raise SchemaError("input synapse refers to a missing channel")

    @property
    def n_neurons(self) -> int:
        return int(self.is_excitatory.size)

    @property
    def n_recurrent(self) -> int:
        return int(self.rec_pre.size)

    @property
    def n_input(self) -> int:
        return int(self.in_channel.size)

    def signed_rec_weight(self, weights: np.ndarray | None = None) -> np.ndarray:
        w = self.rec_weight if weights is None else weights
        return np.where(self.is_excitatory[self.rec_pre], w, -w)

    def with_rec_weights(self, weights: np.ndarray) -> "Wiring":
        return replace(self, rec_weight=np.asarray(weights, dtype=np.float64))

    def to_json(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "positions": self.positions.tolist(),
            "is_excitatory": self.is_excitatory.astype(bool).tolist(),
            "minicolumn": None if self.minicolumn is None else self.minicolumn.tolist(),
            "recurrent": {"pre": self.rec_pre.tolist(), "post": self.rec_post.tolist(),
                          "weight": self.rec_weight.tolist()},
            "input": {"channel": self.in_channel.tolist(), "post": self.in_post.tolist(),
                      "weight": self.in_weight.tolist()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Wiring":
        try:
            return cls(
                positions=np.asarray(doc["positions"], dtype=np.float64).reshape(-1, 3),
                is_excitatory=np.asarray(doc["is_excitatory"], dtype=bool),
                rec_pre=np.asarray(doc["recurrent"]["pre"], dtype=np.int64),
                rec_post=np.asarray(doc["recurrent"]["post"], dtype=np.int64),
                rec_weight=np.asarray(doc["recurrent"]["weight"], dtype=np.float64),
                in_channel=np.asarray(doc["input"]["channel"], dtype=np.int64),
                in_post=np.asarray(doc["input"]["post"], dtype=np.int64),
                in_weight=np.asarray(doc["input"]["weight"], dtype=np.float64),
                n_channels=int(doc.get("n_channels", N_INPUT_CHANNELS)),
                minicolumn=None if doc.get("minicolumn") is None
                else np.asarray(doc["minicolumn"], dtype=np.int64),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed wiring document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "Wiring":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_layout(spec: ReservoirSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer lattice positions and minicolumn ids, macrocolumn-major order."""
    mini = np.array(spec.mini_shape)
    local = np.array(list(np.ndindex(*spec.mini_shape)))
    positions, column = [], []
    for m, macro in enumerate(np.ndindex(*spec.macro_shape)):
        positions.append(local + np.array(macro) * mini)
        column.append(np.full(len(local), m))
    return np.concatenate(positions).astype(np.float64), np.concatenate(column)


def connection_kernel(positions: np.ndarray, length_scale: float) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    k = np.exp(-d2 / length_scale**2)
    np.fill_diagonal(k, 0.0)
    return k


def calibrate_scale(kernel: np.ndarray, target: float, iters: int = 200) -> float:
    """Smallest-bracket C with sum(min(1, C*kernel)) >= target, found by bisection."""
    n_pairs = np.count_nonzero(kernel)
    if target > n_pairs:
        raise ValueError(f"target of {target} connections exceeds the {n_pairs} available pairs")
    if target <= 0:
        return 0.0

    def expected(c: float) -> float:
        return float(np.minimum(1.0, c * kernel).sum())

    lo, hi = 0.0, 1.0
    while expected(hi) < target:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if expected(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def connect_recurrent(positions: np.ndarray, spec: ReservoirSpec, seed=None):
    """Sample directed edges with p(d) = C exp(-(d/lambda)^2), C matched to the target count.

    Returns (pre, post, weight) arrays sorted by (pre, post).
    """
    n = positions.shape[0]
    if n < 2:
        raise ValueError("recurrent wiring needs at least two neurons")
    if spec.target_recurrent > n * (n - 1):
        raise ValueError(f"target_recurrent {spec.target_recurrent} exceeds n(n-1) = {n * (n - 1)}")
    rng = np.random.default_rng(seed)
    kernel = connection_kernel(positions, spec.length_scale)
    c = calibrate_scale(kernel, spec.target_recurrent)
    prob = np.minimum(1.0, c * kernel)
    pre, post = np.nonzero(rng.random((n, n)) < prob)
    weight = rng.uniform(0.0, spec.recurrent_weight_max, size=pre.size)
    return pre.astype(np.int64), post.astype(np.int64), weight


def assign_types(n: int, exc_fraction: float, seed=None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    n_exc = round_half_up(n * exc_fraction)
    rng = np.random.default_rng(seed)
    is_exc = np.zeros(n, dtype=bool)
    is_exc[rng.permutation(n)[:n_exc]] = True
    return is_exc


def wire_inputs(n_channels: int, n_neurons: int, n_recurrent: int, input_fraction: float,
                seed=None, weight_max: float = 1.0):
    """Distinct (channel, neuron) input synapses, ``round(input_fraction * n_recurrent)`` of them."""
    if n_recurrent < 1:
        raise ValueError("n_recurrent must be at least 1")
    count = round_half_up(input_fraction * n_recurrent)
    if count > n_channels * n_neurons:
        raise ValueError(f"{count} input synapses requested but only {n_channels * n_neurons} pairs exist")
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(n_channels * n_neurons, size=count, replace=False))
    channel, post = np.divmod(flat, n_neurons)
    weight = rng.uniform(0.0, weight_max, size=count)
    return channel.astype(np.int64), post.astype(np.int64), weight


def build_wiring(spec: ReservoirSpec) -> Wiring:
    seeds = np.random.SeedSequence(spec.seed).spawn(3)
    positions, column = build_layout(spec)
    n = positions.shape[0]
    is_exc = assign_types(n, spec.exc_fraction, seeds[0])
    pre, post, w = connect_recurrent(positions, spec, seeds[1])
    # input count follows the target edge count so it does not vary with the draw
    ch, ipost, iw = wire_inputs(spec.n_channels, n, spec.target_recurrent, spec.input_fraction,
                                seeds[2], spec.input_weight_max)
    return Wiring(positions, is_exc, pre, post, w, ch, ipost, iw, spec.n_channels, column)


def macro_shape_for(n_neurons: int, mini_shape=(4, 4, 2)) -> tuple[int, int, int]:
    """Macrocolumn grid holding ``n_neurons`` (a multiple of the minicolumn size).

    One layer up to 10 minicolumns, two layers beyond; the layer is split into the
    most nearly square factor pair (320 -> [2,5,1], 1280 -> [4,5,2]).
    """
    size = math.prod(mini_shape)
    if n_neurons % size:
        raise ValueError(f"neuron count must be a multiple of the minicolumn size {size}")
    m = n_neurons // size
    depth = 2 if m > 10 and m % 2 == 0 else 1
    per_layer = m // depth
    a = max(f for f in range(1, int(math.isqrt(per_layer)) + 1) if per_layer % f == 0)
    return (a, per_layer // a, depth)


def scaled_spec(n_neurons: int, base: ReservoirSpec | None = None) -> ReservoirSpec:
    """Spec for a differently sized reservoir at the reference connection density."""
    base = base or ReservoirSpec()
    macro = macro_shape_for(n_neurons, base.mini_shape)
    ref_density = REFERENCE_RECURRENT / (REFERENCE_NEURONS * (REFERENCE_NEURONS - 1))
    target = round_half_up(ref_density * n_neurons * (n_neurons - 1))
    return replace(base, macro_shape=macro, target_recurrent=target)
