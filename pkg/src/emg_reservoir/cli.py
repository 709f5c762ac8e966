"""Command line entry point: ``emg-reservoir <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, load_config
from .dataio import (
    DATASET_CLASSES,
    DEFAULT_RAW_PATTERN,
    MANIFEST_FILE,
    atomic_write_text,
    import_raw,
    save_trials,
    write_manifest,
)
from .encoding import encode_trial, grid_search_thresholds, write_events_csv
from .errors import ArtifactError
from .pipeline import encode_set, evaluate_baseline, evaluate_reservoir, reservoir_fold_features

log = logging.getLogger("emg_reservoir")

RUN_MANIFEST = "run_manifest.json"


def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__, "pyyaml": yaml.__version__}
    try:
        out["artifact"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["artifact"] = __version__
    return out


def write_run_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, outputs: list[Path]) -> dict:
    """Everything needed to rerun: the full config, its hash, seeds, versions and output hashes."""
    manifest = {
        "command": command,
        "config": cfg.portable_tree(),
        "config_sha256": cfg.digest(),
        "seeds": {
            "wiring": cfg["reservoir"]["seed"],
            "simulation": cfg["simulation"]["seed"],
            "synthetic": cfg["synthetic"]["seed"] if cfg["dataset"]["path"] is None else None,
        },
        "versions": _versions(),
        "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(outputs)},
    }
    atomic_write_text(out_dir / RUN_MANIFEST, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- argument handling --------------------------------------------------------


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--config", type=Path, help="YAML experiment config")
    g.add_argument("--out", type=Path, help="output directory (output.dir)")
    g.add_argument("--data", type=Path, help="canonical dataset directory (dataset.path)")
    g.add_argument("--tag", choices=sorted(DATASET_CLASSES) + ["synthetic"], help="dataset tag")
    g.add_argument("--synthetic", action="store_true", help="use generated trials instead of --data")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. readout.C=2.0")
    e = p.add_argument_group("encoder")
    e.add_argument("--vthp", type=float)
    e.add_argument("--vthn", type=float)
    e.add_argument("--interp", type=int, help="interpolation factor")
    e.add_argument("--refractory-ms", type=float)
    r = p.add_argument_group("readout")
    r.add_argument("--classifier", choices=["svm", "lda"])
    r.add_argument("--window-ms", type=float)
    r.add_argument("--majority-vote", action="store_true", default=None,
                   help="score trials by majority vote over their windows")


def _add_reservoir(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("reservoir")
    g.add_argument("--neurons", type=int, help="reservoir size (multiple of 32)")
    g.add_argument("--seed", type=int, help="wiring and simulation seed")
    g.add_argument("--no-plasticity", action="store_true", help="keep initial weights fixed")
    g.add_argument("--freeze", action="store_true", help="measure branching but never update")
    g.add_argument("--raster", action="store_true", default=None, help="dump per-trial rasters")
    g.add_argument("--weight-trace-ms", type=float, help="dump recurrent weights at this period")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emg-reservoir", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="convert a raw dataset into the canonical layout")
    p.add_argument("raw_path", type=Path)
    p.add_argument("--tag", required=True, choices=sorted(DATASET_CLASSES))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pattern", default=DEFAULT_RAW_PATTERN, help="file-name regex")
    p.add_argument("--full-scale", type=float, help="raw value mapped to 1.0")

    p = sub.add_parser("baseline", help="encoder + rate vectors + cross-validation")
    _add_common(p)

    p = sub.add_parser("reservoir", help="encoder + spiking reservoir + cross-validation")
    _add_common(p)
    _add_reservoir(p)

    p = sub.add_parser("sweep", help="reservoir accuracy against neuron count")
    _add_common(p)
    _add_reservoir(p)
    p.add_argument("--sizes", type=int, nargs="+", help="neuron counts (sweep.neurons)")
    p.add_argument("--classifiers", nargs="+", choices=["svm", "lda"])
    p.add_argument("--plasticity", choices=["on", "off", "both"])

    p = sub.add_parser("gridsearch", help="encoder threshold grid search on the baseline")
    _add_common(p)
    p.add_argument("--grid-p", type=float, nargs="+")
    p.add_argument("--grid-n", type=float, nargs="+")

    p = sub.add_parser("encode", help="dump per-trial event CSVs")
    _add_common(p)

    sub.add_parser("selftest", help="run built-in oracle checks")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(getattr(args, "config", None))
    ov: dict = {
        "output.dir": str(args.out) if getattr(args, "out", None) else None,
        "dataset.path": str(args.data) if getattr(args, "data", None) else None,
        "dataset.tag": getattr(args, "tag", None),
        "encoder.vthp": getattr(args, "vthp", None),
        "encoder.vthn": getattr(args, "vthn", None),
        "encoder.interp_factor": getattr(args, "interp", None),
        "encoder.refractory_ms": getattr(args, "refractory_ms", None),
        "readout.classifier": getattr(args, "classifier", None),
        "readout.window_ms": getattr(args, "window_ms", None),
        "readout.majority_vote": getattr(args, "majority_vote", None),
        "reservoir.n_neurons": getattr(args, "neurons", None),
        "reservoir.seed": getattr(args, "seed", None),
        "simulation.seed": getattr(args, "seed", None),
        "output.raster": getattr(args, "raster", None),
        "output.weight_trace_ms": getattr(args, "weight_trace_ms", None),
        "sweep.neurons": getattr(args, "sizes", None),
        "sweep.classifiers": getattr(args, "classifiers", None),
        "sweep.grid_p": getattr(args, "grid_p", None),
        "sweep.grid_n": getattr(args, "grid_n", None),
    }
    if getattr(args, "no_plasticity", False):
        ov["plasticity.enabled"] = False
    if getattr(args, "freeze", False):
        ov["plasticity.freeze"] = True
    plast = getattr(args, "plasticity", None)
    if plast is not None:
        ov["sweep.plasticity"] = {"on": [True], "off": [False], "both": [False, True]}[plast]
    cfg = cfg.with_overrides(ov).with_overrides(_parse_set(getattr(args, "set", [])))
    if getattr(args, "synthetic", False):
        tree = cfg.tree
        tree["dataset"].update(path=None, tag="synthetic")
        cfg = ExperimentConfig.from_mapping(tree)
    return cfg


# -- subcommands ----------------------------------------------------------------


def cmd_import(args: argparse.Namespace) -> int:
    ts = import_raw(args.raw_path, args.tag, args.pattern, args.full_scale)
    save_trials(ts, args.out)
    manifest = write_manifest(args.out, {"dataset_tag": args.tag, "n_trials": len(ts)})
    log.info("imported %d trials into %s (%d files)", len(ts), args.out, len(manifest["files"]))
    print(f"{len(ts)} trials -> {args.out / MANIFEST_FILE}")
    return 0


def _summary(name: str, report) -> str:
    return (f"{name}: {100 * report.mean_accuracy:.2f} +/- {100 * report.std_accuracy:.2f}% "
            f"(folds {', '.join(f'{100 * a:.2f}' for a in report.fold_accuracy)})")


def cmd_baseline(cfg: ExperimentConfig) -> int:
    out = Path(cfg["output"]["dir"])
    r = cfg["readout"]
    ts = cfg.load_dataset()
    report = evaluate_baseline(ts, cfg.encoder(), r["classifier"], float(r["window_ms"]),
                               bool(r["majority_vote"]), bool(r["scale"]), **cfg.svm_kwargs())
    stem = f"baseline_{r['classifier']}"
    files = report.write(out, stem)
    write_run_manifest(out, "baseline", cfg, files)
    print(_summary(stem, report))
    return 0


def _reservoir_stem(n: int, kind: str, plastic: bool) -> str:
    return f"reservoir_n{n}_{kind}_{'critical' if plastic else 'fixed'}"


def _run_reservoir(cfg: ExperimentConfig, ts, streams, n: int, plastic: bool, kinds, out: Path):
    setup = cfg.reservoir_setup(n, plastic)
    o = cfg["output"]
    dump = None
    if o["raster"] or float(o["weight_trace_ms"]) > 0:
        dump = out / f"dump_n{n}_{'critical' if plastic else 'fixed'}"
    r = cfg["readout"]
    folds = reservoir_fold_features(ts, cfg.encoder(), setup, float(r["window_ms"]), streams, dump)
    reports = {}
    for kind in kinds:
        reports[kind] = evaluate_reservoir(ts, cfg.encoder(), setup, kind, float(r["window_ms"]),
                                           bool(r["majority_vote"]), bool(r["scale"]), folds,
                                           **cfg.svm_kwargs())
    if dump is not None:
        dumped = sorted(p for p in dump.iterdir() if p.is_file())
        write_run_manifest(dump, "reservoir-dump", cfg, dumped)
    return reports


def cmd_reservoir(cfg: ExperimentConfig) -> int:
    out = Path(cfg["output"]["dir"])
    ts = cfg.load_dataset()
    streams = encode_set(ts, cfg.encoder())
    n = int(cfg["reservoir"]["n_neurons"])
    plastic = bool(cfg["plasticity"]["enabled"]) and not bool(cfg["plasticity"]["freeze"])
    kind = cfg["readout"]["classifier"]
    report = _run_reservoir(cfg, ts, streams, n, bool(cfg["plasticity"]["enabled"]), [kind], out)[kind]
    stem = _reservoir_stem(n, kind, plastic)
    files = report.write(out, stem)
    write_run_manifest(out, "reservoir", cfg, files)
    print(_summary(stem, report))
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    out = Path(cfg["output"]["dir"])
    sw = cfg["sweep"]
    ts = cfg.load_dataset()
    streams = encode_set(ts, cfg.encoder())
    rows, files = [], []
    for n in sorted({int(x) for x in sw["neurons"]}):
        for plastic in sorted({bool(x) for x in sw["plasticity"]}):
            reports = _run_reservoir(cfg, ts, streams, n, plastic, sorted(set(sw["classifiers"])), out)
            for kind, report in reports.items():
                effective = plastic and not bool(cfg["plasticity"]["freeze"])
                files += report.write(out, _reservoir_stem(n, kind, effective))
                rows.append((n, kind, effective, report.mean_accuracy, report.std_accuracy))
                print(_summary(_reservoir_stem(n, kind, effective), report))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    table = _csv_text(["n_neurons", "classifier", "plasticity", "mean", "std"],
                      [(n, k, str(p).lower(), repr(float(m)), repr(float(s))) for n, k, p, m, s in rows])
    atomic_write_text(out / "sweep.csv", table)
    write_run_manifest(out, "sweep", cfg, files + [out / "sweep.csv"])
    return 0


def cmd_gridsearch(cfg: ExperimentConfig) -> int:
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    e, r, sw = cfg["encoder"], cfg["readout"], cfg["sweep"]
    ts = cfg.load_dataset()
    best, surface = grid_search_thresholds(ts, [float(x) for x in sw["grid_p"]],
                                           [float(x) for x in sw["grid_n"]], int(e["interp_factor"]),
                                           float(e["refractory_ms"]), r["classifier"],
                                           float(r["window_ms"]), bool(r["scale"]))
    atomic_write_text(out / "gridsearch.csv", _csv_text(
        ["vthp", "vthn", "mean", "std"],
        [(repr(c["vthp"]), repr(c["vthn"]), repr(float(c["mean"])), repr(float(c["std"])))
         for c in surface]))
    fragment = {"encoder": {"vthp": best.vthp, "vthn": best.vthn,
                            "interp_factor": best.interp_factor, "refractory_ms": best.refractory_ms}}
    atomic_write_text(out / "best_encoder.yaml", yaml.safe_dump(fragment, sort_keys=True))
    write_run_manifest(out, "gridsearch", cfg, [out / "gridsearch.csv", out / "best_encoder.yaml"])
    print(f"best vthp={best.vthp} vthn={best.vthn} over {len(surface)} cells")
    return 0


def cmd_encode(cfg: ExperimentConfig) -> int:
    out = Path(cfg["output"]["dir"]) / "events"
    out.mkdir(parents=True, exist_ok=True)
    ts = cfg.load_dataset()
    p = cfg.encoder()
    files = []
    for t in ts.trials:
        path = out / f"{t.subject_id}_s{t.session_id}_{t.trial_id}.csv"
        write_events_csv(encode_trial(t, p), path)
        files.append(path)
    write_run_manifest(out, "encode", cfg, files)
    print(f"{len(files)} event files -> {out}")
    return 0


def cmd_selftest() -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 4


COMMANDS = {
    "baseline": cmd_baseline,
    "reservoir": cmd_reservoir,
    "sweep": cmd_sweep,
    "gridsearch": cmd_gridsearch,
    "encode": cmd_encode,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "import":
            return cmd_import(args)
        if args.command == "selftest":
            return cmd_selftest()
        return COMMANDS[args.command](config_from_args(args))
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
