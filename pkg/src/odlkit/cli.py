"""``odlkit`` command line.

Exit codes: 0 success, 1 usage/configuration, 2 I/O or file format,
3 numerical failure.  Flags override ``--config`` file values, which
override built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint
from .datasets import TASKS, SyntheticFanSource, build_task, load_cooling_fan
from .energymodel import CASES, PowerProfile, load_profile, workload_sweep, write_sweep_csv
from .ensemble import MovingAverageDriftDetector, OdlEnsemble
from .errors import (
    ConfigurationError,
    DatasetIOError,
    FormatError,
    InvalidInputError,
    ModeError,
    NumericalFailureError,
    StateError,
)
from .evaluate import METHODS, evaluate
from .oselm import DEFAULT_DELTA
from .preprocess import PreprocessConfig, RawWindowReader, pipeline, write_spectra
from .runner import RunSummary, replay, write_detections
from .streams import StreamRecord, read_stream, write_stream

log = logging.getLogger("odlkit")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2), which is our I/O code
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> _Parser:
    p = _Parser(prog="odlkit", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="JSON file with default flag values")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    model = _Parser(add_help=False)
    model.add_argument("--seed", type=int, default=0)
    model.add_argument("--n", type=int, default=256, help="input width (spectrum bins)")
    model.add_argument("--hidden", type=int, default=32, help="hidden nodes N")
    model.add_argument("--instances", type=int, default=4, help="ensemble size K")
    model.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="P0 = I/delta")

    pre = sub.add_parser("preprocess", help="windows -> spectra (JSONL)")
    pre.add_argument("raw", type=Path, help="CSV (one value per line) or JSONL windows")
    pre.add_argument("out", type=Path)
    pre.add_argument("--sample-rate", type=float, default=1024.0)
    pre.add_argument("--window-len", type=int, default=None, help="split a flat CSV into windows")
    pre.add_argument("--factor", type=int, default=2)
    pre.add_argument("--scale", type=float, default=None, help="divide every bin by this")
    pre.add_argument("--reduce", choices=("mean", "max"), default="mean")

    run = sub.add_parser("run", parents=[model], help="replay an annotated stream")
    run.add_argument("stream", type=Path)
    run.add_argument("--detections", type=Path, required=True, help="JSONL detections output")
    run.add_argument("--payload", type=Path, help="binary file of 20-byte detection records")
    run.add_argument("--checkpoint-in", type=Path)
    run.add_argument("--checkpoint-out", type=Path)
    run.add_argument("--strict-init", action="store_true", help="refuse clusters with fewer than N samples")
    run.add_argument("--float32", action="store_true")
    run.add_argument("--device-id", type=int, default=0)
    run.add_argument("--epoch-start", type=int, default=0)
    run.add_argument("--drift-window", type=int, default=None)
    run.add_argument("--drift-tau", type=float, default=3.0)

    ev = sub.add_parser("eval", parents=[model], help="evaluate a method on a task")
    ev.add_argument("--task", required=True, choices=TASKS)
    ev.add_argument("--method", required=True, choices=METHODS)
    ev.add_argument("--source", default="synthetic", help="'synthetic' or a cooling-fan dataset directory")
    ev.add_argument("--environment", choices=("noisy", "silent"), default="noisy")
    ev.add_argument("--scenarios", type=int, default=1)
    ev.add_argument("--parallel", action="store_true")
    ev.add_argument("--out", type=Path)

    en = sub.add_parser("energy", help="energy/time sweep as CSV")
    en.add_argument("--profile", type=Path)
    en.add_argument("--ops", type=_int_list, default=[1, 6, 60, 600, 3600])
    en.add_argument("--cases", type=_int_list, default=[1, 2, 3, 4])
    en.add_argument("--out", type=Path)

    sy = sub.add_parser("synth", help="write a synthetic task as an annotated stream")
    sy.add_argument("out", type=Path)
    sy.add_argument("--task", choices=TASKS, default="2500rpm")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--environment", choices=("noisy", "silent"), default="noisy")

    ck = sub.add_parser("checkpoint", help="inspect a checkpoint")
    ck.add_argument("path", type=Path)
    return p


def _apply_config(parser: _Parser, argv: Sequence[str]) -> argparse.Namespace:
    first, _ = parser.parse_known_args(argv)
    if first.config is not None:
        try:
            cfg = json.loads(first.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{first.config}: malformed config JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise FormatError(f"{first.config}: config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for sp in sub_action.choices.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    return parser.parse_args(argv)


# -- commands ------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = PreprocessConfig(args.factor, args.scale, args.reduce)
    reader = RawWindowReader(args.raw, args.sample_rate, args.window_len)
    spectra = [pipeline(w, cfg) for w in reader]
    write_spectra(args.out, spectra)
    print(f"wrote {len(spectra)} spectra to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    dtype = np.float32 if args.float32 else np.float64
    records = read_stream(args.stream)
    if not records:
        raise FormatError(f"{args.stream}: stream is empty")
    width = records[0].spectrum.size
    if args.checkpoint_in:
        ens = checkpoint.load(args.checkpoint_in)
        if not isinstance(ens, OdlEnsemble):
            raise ConfigurationError(f"{args.checkpoint_in} is not an ensemble checkpoint")
        if ens.n != width:
            raise ConfigurationError(f"checkpoint expects n={ens.n}, stream has {width}-bin spectra")
    else:
        if args.n != width:
            raise ConfigurationError(f"--n {args.n} does not match {width}-bin spectra in {args.stream}")
        ens = OdlEnsemble.create(args.n, args.hidden, args.instances, seed=args.seed, delta=args.delta, dtype=dtype)
    detector = None
    if args.drift_window is not None:
        detector = MovingAverageDriftDetector(args.drift_window, args.drift_tau)
    summary = RunSummary()
    emitted = replay(ens, records, strict_init=args.strict_init, detector=detector, summary=summary)
    bin_fh = open(args.payload, "wb") if args.payload else None
    try:
        with open(args.detections, "w", encoding="utf-8") as fh:
            write_detections(emitted, fh, bin_fh, device_id=args.device_id, epoch_start=args.epoch_start)
    finally:
        if bin_fh is not None:
            bin_fh.close()
    if args.checkpoint_out:
        checkpoint.save(ens, args.checkpoint_out)
    print(json.dumps(summary.as_dict()), file=sys.stderr)
    return EXIT_OK


def _source(spec: str):
    if spec == "synthetic":
        return SyntheticFanSource()
    return load_cooling_fan(spec)


def _scenario(job: tuple) -> dict:
    task, method, source_spec, seed, env, K, N, delta = job
    return evaluate(task, method, _source(source_spec), seed, environment=env, K=K, N=N, delta=delta)


def scenario_seeds(seed: int, count: int) -> list[int]:
    if count == 1:
        return [seed]
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def cmd_eval(args) -> int:
    if args.scenarios < 1:
        raise InvalidInputError("--scenarios must be >= 1")
    jobs = [
        (args.task, args.method, args.source, s, args.environment, args.instances, args.hidden, args.delta)
        for s in scenario_seeds(args.seed, args.scenarios)
    ]
    if args.source != "synthetic":
        _source(args.source)  # fail fast on a bad dataset path
    if args.parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            reports = list(pool.map(_scenario, jobs))
    else:
        reports = [_scenario(j) for j in jobs]
    lines = "".join(json.dumps(r) + "\n" for r in reports)
    if args.out:
        args.out.write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    key = "auc" if "auc" in reports[0] else "accuracy"
    vals = [r[key] for r in reports]
    spread = statistics.pstdev(vals) if len(vals) > 1 else 0.0
    print(f"{args.task} {args.method}: mean {key} {statistics.fmean(vals):.4f} (sd {spread:.4f}, {len(vals)} scenarios)", file=sys.stderr)
    return EXIT_OK


def cmd_energy(args) -> int:
    profile = load_profile(args.profile) if args.profile else PowerProfile()
    cases = []
    for c in args.cases:
        if int(c) not in CASES:
            raise InvalidInputError(f"unknown case {c}; choose from 1-4")
        cases.append(int(c))
    rows = workload_sweep(cases, profile, args.ops)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_synth(args) -> int:
    task = build_task(args.task, SyntheticFanSource(), train_env=args.environment, eval_env=args.environment, seed=args.seed)
    records = [StreamRecord(r.spectrum, r.label, "init") for r in task.train]
    records += [StreamRecord(r.spectrum, r.label if task.kind == "accuracy" else t, "predict") for r, t in zip(task.eval, task.truth)]
    write_stream(args.out, records)
    print(f"wrote {len(records)} records ({len(task.train)} init, {len(task.eval)} predict) to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_checkpoint(args) -> int:
    obj = checkpoint.load(args.path)
    if isinstance(obj, OdlEnsemble):
        info = {
            "model_kind": "odl-ensemble",
            "n": obj.n,
            "N": obj.N,
            "m": obj.m,
            "K": obj.K,
            "dtype": str(obj.projection.dtype),
            "mode": obj.mode.value,
            "trained_count": [i.trained_count for i in obj.instances],
            "centroid_counts": obj.centroid_counts.tolist(),
        }
    else:
        info = {"model_kind": f"mlp-{obj.kind}", "layer_sizes": obj.layer_sizes, "n_params": obj.n_params}
    print(json.dumps(info, indent=2))
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "run": cmd_run,
    "eval": cmd_eval,
    "energy": cmd_energy,
    "synth": cmd_synth,
    "checkpoint": cmd_checkpoint,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, ConfigurationError, ModeError, StateError) as exc:
        print(f"odlkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailureError as exc:
        print(f"odlkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, DatasetIOError, OSError) as exc:
        print(f"odlkit: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
