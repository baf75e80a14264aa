"""命令行入口

    orbitlab run <file> [--out DIR] [--seed N]
    orbitlab diagnose <spec> [--depth D] [--max-m M] [--cells K]
    orbitlab presets list

Exit codes: 0 all verdicts passed, 1 input error or a scenario that raised, 2 a verdict failed.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from app import __version__
from app.core.config import settings
from app.core.errors import EXIT_INPUT_ERROR, EXIT_OK, EXIT_VERDICT_FAILURE, OrbitLabError, exit_code_for
from app.core.log_setup import setup_logging
from app.schemas import WeightSpec
from app.services import weights
from app.services.scenarios import load_scenarios, run_batch, scenario_weight

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitlab", description="Operator-orbit frame and A2 weight laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="override ORBITLAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("file", type=Path)
    run.add_argument("--out", type=Path, default=None, help=f"artifact directory (default: {settings.output_dir})")
    run.add_argument("--seed", type=int, default=None, help="override every scenario's seed")

    diagnose = sub.add_parser("diagnose", help="classify a weight: preset name, .csv values or .json weight spec")
    diagnose.add_argument("spec")
    diagnose.add_argument("--depth", type=int, default=settings.default_depth)
    diagnose.add_argument("--max-m", type=int, default=128, dest="max_m")
    diagnose.add_argument("--cells", type=int, default=None)
    diagnose.add_argument("--out", type=Path, default=None, help="also write the report to this JSON file")

    presets = sub.add_parser("presets", help="weight presets")
    presets.add_argument("action", choices=["list"])
    return parser


def _weight_from_spec(spec: str, cells: int | None) -> tuple[weights.Weight, int | None]:
    if spec in weights.PRESETS:
        return weights.Weight.preset(spec), cells or settings.default_cells
    path = Path(spec)
    if path.suffix.lower() == ".json":
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise OrbitLabError(f"cannot read weight spec {path}: {e}") from e
        w, resolved = scenario_weight(WeightSpec.model_validate(document))
        return w, cells or resolved
    w = weights.Weight.from_csv(path)
    return w, cells


def _cmd_run(args: argparse.Namespace) -> int:
    scenarios = load_scenarios(args.file)
    summary = asyncio.run(run_batch(scenarios, args.out, args.seed))
    for result in summary.results:
        if result.error is not None:
            print(f"ERROR {result.name} ({result.kind}) [{result.error['code']}]: {result.error['message']}")
            continue
        status = "PASS" if result.passed else "FAIL"
        print(f"{status}  {result.name} ({result.kind}) seed={result.seed}")
    print(f"{len(summary.results)} scenario(s), {summary.errored} error(s), {summary.wall_clock_seconds:.2f}s")
    if summary.errored:
        return EXIT_INPUT_ERROR
    return EXIT_OK if summary.passed else EXIT_VERDICT_FAILURE


def _cmd_diagnose(args: argparse.Namespace) -> int:
    w, cells = _weight_from_spec(args.spec, args.cells)
    report = weights.diagnose(w, args.depth, args.max_m, cells)
    text = report.model_dump_json(indent=2)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def _cmd_presets(args: argparse.Namespace) -> int:
    for name, description in weights.PRESET_DESCRIPTIONS.items():
        print(f"{name:16s} {description}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "diagnose": _cmd_diagnose, "presets": _cmd_presets}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        code = exit_code_for(e)
        if isinstance(e, OrbitLabError):
            print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        else:
            logger.exception("命令执行失败")
            print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
