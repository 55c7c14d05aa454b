"""Command-line entry point: ``isbench run|compare|synth|validate-config``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 when an
enabled model failed in every learning period.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .exceptions import ConfigError, DataError
from .experiment import all_models_failed, compare_models, load_data, run_experiment
from .report import emit_report, load_report
from .synth import ScenarioSpec, write_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MODEL = 4

logger = logging.getLogger("isbench")


def _models(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [m.strip() for m in text.split(",") if m.strip()]


def cmd_run(args) -> int:
    cfg = load_config(args.config).with_overrides(args.seed, args.out, _models(args.models))
    data = load_data(cfg)
    report = run_experiment(cfg, jobs=args.jobs, data=data)
    paths = emit_report(report, cfg.output)
    logger.info("wrote %d files to %s", len(paths), cfg.output)
    failed = all_models_failed(report)
    if failed:
        logger.error("model error in all periods: %s", ", ".join(failed))
        return EXIT_MODEL
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.report is not None:
        src = Path(args.report)
    elif args.config is not None:
        src = load_config(args.config).output
    else:
        raise ConfigError("compare needs --report or --config")
    try:
        report = load_report(src)
    except FileNotFoundError:
        raise ConfigError(f"no report found at {src}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{src}: invalid report JSON: {exc}") from None
    names = _models(args.models) or report["models"]
    if len(names) != 2:
        raise ConfigError("compare needs exactly two models (--models A,B)")
    a, b = names
    try:
        comparison = compare_models(report, a, b, seed=args.seed)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    report.setdefault("comparisons", {})[f"{a}_vs_{b}"] = comparison
    out = Path(args.out) if args.out is not None else (src if src.is_dir() else src.parent)
    emit_report(report, out)
    return EXIT_OK


def cmd_synth(args) -> int:
    data = {}
    if args.spec is not None:
        try:
            data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario spec {args.spec}: {exc}") from None
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        spec = ScenarioSpec.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"invalid scenario spec: {exc}") from None
    paths = write_scenario(spec, args.out or "scenario")
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    load_data(cfg)
    print(f"ok: {', '.join(cfg.model_names)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a pseudo-prospective experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--models", help="comma-separated subset, e.g. sass,hysei")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two models of an existing report")
    cmp_.add_argument("--report", help="report directory or report.json")
    cmp_.add_argument("--config", help="locate the report via the config output directory")
    cmp_.add_argument("--models", help="A,B")
    cmp_.add_argument("--seed", type=int, help="bootstrap seed (default: the report seed)")
    cmp_.add_argument("--out")
    cmp_.set_defaults(func=cmd_compare)

    syn = sub.add_parser("synth", help="write a synthetic scenario")
    syn.add_argument("--spec", help="scenario JSON (ScenarioSpec fields)")
    syn.add_argument("--seed", type=int)
    syn.add_argument("--out")
    syn.set_defaults(func=cmd_synth)

    val = sub.add_parser("validate-config", help="check a configuration and its data files")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
