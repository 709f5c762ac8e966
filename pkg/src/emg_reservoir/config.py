"""Experiment configuration: a YAML tree with dotted-key overrides.

Schema (every key optional, defaults shown)::

    dataset:
      path: null            # canonical dataset directory; null means synthetic data
      tag: null             # roshambo | sensorfusion | synthetic; null accepts the stored tag
      trim_ms: null         # [head, tail]; null uses the per-dataset default
    synthetic:
      n_classes: 3
      n_sessions: 3
      trials_per_class: 5
      seed: 7
      duration_s: 2.0
    encoder:
      vthp: 0.5
      vthn: -0.5
      interp_factor: 1
      refractory_ms: 0.0
    reservoir:
      n_neurons: 320        # reshapes the macrocolumn grid at constant density
      seed: 0               # wiring seed
      length_scale: 2.0
      exc_fraction: 0.8
      input_fraction: 0.15
    neuron:    {v0, refractory_ms, vth0, vthi, tau_vth_ms, tau_min_ms, tau_max_ms}
    plasticity:
      enabled: true
      freeze: false
      learning_rate: 0.1
      target_branching: 1.0
      w_min: 0.0
      w_max: 1.0
      window_ms: 25.0
    simulation: {dt_ms: 1.0, seed: 0}   # seed draws the membrane time constants
    readout:
      classifier: svm       # svm | lda
      window_ms: 200.0
      majority_vote: false
      scale: true           # z-score features with training-fold statistics
      C: 1.0
      gamma: null           # null means 1 / n_features
    sweep:
      neurons: [320]
      classifiers: [svm]
      plasticity: [true]
      grid_p: [0.1, ..., 0.9]
      grid_n: [-0.1, ..., -0.9]
    output:
      dir: out
      raster: false         # dump per-trial reservoir rasters
      weight_trace_ms: 0.0  # >0 dumps recurrent weights at this period
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dataio import DATASET_TAGS, TrialSet, load_trials, synth_trials, trim_set
from .encoding import DEFAULT_GRID_N, DEFAULT_GRID_P, EncoderParams
from .errors import ConfigError
from .neuron import TAU_RANGE_MS, NeuronParams
from .pipeline import ReservoirSetup
from .plasticity import CriticalParams
from .readout import CLASSIFIERS
from .reservoir import SimulationConfig
from .topology import scaled_spec

DEFAULTS: dict[str, dict[str, Any]] = {
    "dataset": {"path": None, "tag": None, "trim_ms": None},
    "synthetic": {"n_classes": 3, "n_sessions": 3, "trials_per_class": 5, "seed": 7,
                  "duration_s": 2.0},
    "encoder": {"vthp": 0.5, "vthn": -0.5, "interp_factor": 1, "refractory_ms": 0.0},
    "reservoir": {"n_neurons": 320, "seed": 0, "length_scale": 2.0, "exc_fraction": 0.8,
                  "input_fraction": 0.15},
    "neuron": {"v0": 0.0, "refractory_ms": 1.0, "vth0": 1.0, "vthi": 0.1, "tau_vth_ms": 50.0,
               "tau_min_ms": TAU_RANGE_MS[0], "tau_max_ms": TAU_RANGE_MS[1]},
    "plasticity": {"enabled": True, "freeze": False, "learning_rate": 0.1,
                   "target_branching": 1.0, "w_min": 0.0, "w_max": 1.0, "window_ms": 25.0},
    "simulation": {"dt_ms": 1.0, "seed": 0},
    "readout": {"classifier": "svm", "window_ms": 200.0, "majority_vote": False, "scale": True,
                "C": 1.0, "gamma": None},
    "sweep": {"neurons": [320], "classifiers": ["svm"], "plasticity": [True],
              "grid_p": list(DEFAULT_GRID_P), "grid_n": list(DEFAULT_GRID_N)},
    "output": {"dir": "out", "raster": False, "weight_trace_ms": 0.0},
}


def _merge(base: dict, update: Mapping, where: str = "") -> dict:
    for key, value in update.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {path!r} must be a mapping")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value
    return base


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment tree; build module parameter objects from it."""

    tree: dict

    @classmethod
    def from_mapping(cls, data: Mapping | None = None) -> "ExperimentConfig":
        tree = _merge(copy.deepcopy(DEFAULTS), data or {})
        cfg = cls(tree)
        cfg.validate()
        return cfg

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Apply ``{"section.key": value}`` overrides; ``None`` values are skipped."""
        tree = copy.deepcopy(self.tree)
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.partition(".")
            if section not in tree or key not in tree[section]:
                raise ConfigError(f"unknown config key {dotted!r}")
            tree[section][key] = value
        return ExperimentConfig.from_mapping(tree)

    def __getitem__(self, section: str) -> dict:
        return self.tree[section]

    # -- module parameters ----------------------------------------------------

    def encoder(self) -> EncoderParams:
        e = self.tree["encoder"]
        return EncoderParams(float(e["vthp"]), float(e["vthn"]), int(e["interp_factor"]),
                             float(e["refractory_ms"]))

    def neuron_template(self) -> NeuronParams:
        n = self.tree["neuron"]
        return NeuronParams(v0=float(n["v0"]), refractory_ms=float(n["refractory_ms"]),
                            vth0=float(n["vth0"]), vthi=float(n["vthi"]),
                            tau_vth_ms=float(n["tau_vth_ms"]))

    def critical(self) -> CriticalParams:
        p = self.tree["plasticity"]
        return CriticalParams(float(p["learning_rate"]), float(p["target_branching"]),
                              float(p["w_min"]), float(p["w_max"]), float(p["window_ms"]))

    def reservoir_setup(self, n_neurons: int | None = None, plasticity: bool | None = None
                        ) -> ReservoirSetup:
        r, p, s = self.tree["reservoir"], self.tree["plasticity"], self.tree["simulation"]
        n = int(r["n_neurons"] if n_neurons is None else n_neurons)
        spec = replace(scaled_spec(n), seed=int(r["seed"]), length_scale=float(r["length_scale"]),
                       exc_fraction=float(r["exc_fraction"]),
                       input_fraction=float(r["input_fraction"]))
        enabled = bool(p["enabled"] if plasticity is None else plasticity)
        sim = SimulationConfig(dt_ms=float(s["dt_ms"]), plasticity_enabled=enabled,
                               freeze_weights=bool(p["freeze"]),
                               weight_trace_every_ms=float(self.tree["output"]["weight_trace_ms"]),
                               seed=int(s["seed"]))
        tau = (float(self.tree["neuron"]["tau_min_ms"]), float(self.tree["neuron"]["tau_max_ms"]))
        return ReservoirSetup(spec, self.neuron_template(), self.critical(), sim, tau)

    def svm_kwargs(self) -> dict:
        r = self.tree["readout"]
        return {"C": float(r["C"]), "gamma": None if r["gamma"] is None else float(r["gamma"])}

    def load_dataset(self) -> TrialSet:
        d = self.tree["dataset"]
        if d["path"] is None:
            s = self.tree["synthetic"]
            ts = synth_trials(int(s["n_classes"]), int(s["n_sessions"]), int(s["trials_per_class"]),
                              int(s["seed"]), float(s["duration_s"]))
        else:
            ts = load_trials(d["path"], d["tag"])
        trim = d["trim_ms"]
        if trim is None:
            return trim_set(ts)
        return trim_set(ts, float(trim[0]), float(trim[1]))

    # -- checks and identity ----------------------------------------------------

    def validate(self) -> None:
        t = self.tree
        try:
            if t["dataset"]["tag"] not in (None, *DATASET_TAGS):
                raise ValueError(f"dataset.tag must be one of {DATASET_TAGS}")
            trim = t["dataset"]["trim_ms"]
            if trim is not None and (len(trim) != 2 or min(trim) < 0):
                raise ValueError("dataset.trim_ms must be two nonnegative numbers")
            self.encoder()
            self.critical()
            n = t["neuron"]
            if not TAU_RANGE_MS[0] <= n["tau_min_ms"] <= n["tau_max_ms"] <= TAU_RANGE_MS[1]:
                raise ValueError(f"neuron tau range must lie within {TAU_RANGE_MS}")
            neurons = list(t["sweep"]["neurons"]) + [t["reservoir"]["n_neurons"]]
            for n_neurons in neurons:
                self.reservoir_setup(int(n_neurons))
            r = t["readout"]
            for kind in [r["classifier"], *t["sweep"]["classifiers"]]:
                if kind not in CLASSIFIERS:
                    raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {kind!r}")
            if not float(r["window_ms"]) > 0:
                raise ValueError("readout.window_ms must be positive")
            if not float(r["C"]) > 0:
                raise ValueError("readout.C must be positive")
            if r["gamma"] is not None and not float(r["gamma"]) > 0:
                raise ValueError("readout.gamma must be positive")
            for key in ("neurons", "classifiers", "plasticity", "grid_p", "grid_n"):
                if not t["sweep"][key]:
                    raise ValueError(f"sweep.{key} must be nonempty")
            if float(t["output"]["weight_trace_ms"]) < 0:
                raise ValueError("output.weight_trace_ms must be nonnegative")
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def portable_tree(self) -> dict:
        """The tree without the output directory, which does not affect results."""
        tree = copy.deepcopy(self.tree)
        del tree["output"]["dir"]
        return tree

    def canonical_json(self) -> str:
        return json.dumps(self.portable_tree(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=True)


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig.from_mapping()
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError(f"config {path} must hold a mapping at the top level")
    return ExperimentConfig.from_mapping(data)
