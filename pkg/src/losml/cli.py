"""Command line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import CleanReport, DatasetError, clean, drop_columns, load_csv, profile, write_csv, write_profile
from .evaluation import EvaluationError, write_metrics_json, write_metrics_table
from .models import DISPLAY_NAMES, FAMILIES, ModelError
from .pipeline import ConfigError, PipelineError, combine_metrics, evaluate_run, load_config, run_pipeline
from .synth import SynthError, SynthSpec, synthesize_dataset
from .tuning import SearchError

logger = logging.getLogger("losml")

# input that breaks a documented precondition, as opposed to a runtime fault
VALIDATION_ERRORS = (ConfigError, DatasetError, EvaluationError, ModelError, SynthError, SearchError)


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="losml", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic discharge table")
    p.add_argument("--rows", type=int, default=5000)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--null-effects", action="store_true", help="make the target independent of the features")

    p = sub.add_parser("ingest", parents=[common], help="load, drop columns, clean")
    p.add_argument("--input")

    p = sub.add_parser("profile", parents=[common], help="descriptive tables of a cleaned input")
    p.add_argument("--input")

    for name, text in (("train", "fit with a preset or fixed params"), ("tune", "random search then fit")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--input")
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--pca", action="store_true", default=None)
        if name == "tune":
            p.add_argument("--trials", type=int)
            p.add_argument("--objective")

    p = sub.add_parser("evaluate", parents=[common], help="score a saved run on an input table")
    p.add_argument("--run", required=True, help="directory written by train or tune")
    p.add_argument("--input")

    p = sub.add_parser("report", parents=[common], help="combine runs into one metrics table")
    p.add_argument("runs", nargs="+")
    return parser


def _abs(p):
    return None if p is None else str(Path(p).resolve())


def _overrides(args) -> dict:
    o = {
        "seed": getattr(args, "seed", None),
        "output.dir": _abs(getattr(args, "out", None)),
        "input.path": _abs(getattr(args, "input", None)),
        "model.family": getattr(args, "family", None),
        "pca.enabled": getattr(args, "pca", None),
    }
    if args.command == "tune":
        o["search.n_trials"] = args.trials
        o["search.objective"] = args.objective
    return o


def _out_dir(args, config) -> Path:
    out = config.output_dir or Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run(args) -> int:
    if args.command == "synth":
        spec = SynthSpec(n_rows=args.rows, seed=getattr(args, "seed", 0), missing_rate=args.missing_rate)
        if args.null_effects:
            spec = spec.without_effects()
        out = Path(getattr(args, "out", "."))
        out.mkdir(parents=True, exist_ok=True)
        path = write_csv(synthesize_dataset(spec), out / "synthetic.csv")
        print(path)
        return 0

    overrides = _overrides(args)
    if args.command == "tune":
        config = load_config(
            getattr(args, "config", None), overrides,
            defaults={"model.search": "default"}, clear=("model.preset", "model.params"),
        )
    else:
        config = load_config(getattr(args, "config", None), overrides)

    if args.command == "ingest":
        if config.input_path is None:
            raise ConfigError("input.path is required")
        out = _out_dir(args, config)
        ds = load_csv(config.input_path, config.schema, config.mapping)
        report = CleanReport()
        ds, report = clean(drop_columns(ds, config.drop, report), report=report)
        write_csv(ds, out / "cleaned.csv")
        (out / "clean_report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        print(f"{ds.n_rows} rows kept, {report.rows_dropped} dropped")
        return 0

    if args.command == "profile":
        if config.input_path is None:
            raise ConfigError("input.path is required")
        out = _out_dir(args, config)
        ds = load_csv(config.input_path, config.schema, config.mapping)
        ds, _ = clean(drop_columns(ds, config.drop))
        for path in write_profile(profile(ds), out).values():
            print(path)
        return 0

    if args.command in ("train", "tune"):
        if config.output_dir is None:
            raise ConfigError("an output directory is required (--out or output.dir)")
        art = run_pipeline(config)
        h = art.report.headline()
        print(f"{DISPLAY_NAMES[art.family]}: " + " ".join(f"{k}={v:.4f}" for k, v in h.items()))
        return 0

    if args.command == "evaluate":
        out = _out_dir(args, config)
        cm, report = evaluate_run(args.run, config)
        write_metrics_json(report, cm, out / "metrics.json", run=str(args.run))
        write_metrics_table([(Path(args.run).name, report)], out / "metrics.csv")
        print(" ".join(f"{k}={v:.4f}" for k, v in report.headline().items()))
        return 0

    if args.command == "report":
        out = Path(getattr(args, "out", "."))
        out.mkdir(parents=True, exist_ok=True)
        print(combine_metrics(args.runs, out / "metrics_table.csv"))
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        code = 1 if isinstance(exc.cause, VALIDATION_ERRORS) else 2
        print(f"error: {exc}", file=sys.stderr)
        return code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
