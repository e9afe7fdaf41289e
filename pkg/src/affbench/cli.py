"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 ok, 2 configuration error, 3 data error (including stale
artifacts), 4 training divergence, 1 anything unexpected. Errors are printed
to stderr as a single JSON line.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .config import ROSTER, load_config
from .errors import AffbenchError, ConfigError
from .pipeline import (
    Workspace,
    replay,
    run_all,
    stage_audit,
    stage_evaluate,
    stage_featurize,
    stage_prepare,
    stage_report,
    stage_similarity,
    stage_split,
    stage_train,
)


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}", hint=f"see `{self.prog} --help`")


STAGE_HELP = {
    "prepare": "parse and prepare every indexed structure",
    "similarity": "ligand fingerprints and the protein similarity table",
    "split": "case-study selection, Other-Proteins filtering and split plans",
    "audit": "UniProt overlap and similarity-threshold audit of the split",
    "featurize": "fingerprints, descriptors and contact features per structure",
    "train": "fit one model on every split plan and write test predictions",
    "evaluate": "overall and per-protein metrics from the predictions",
    "report": "metrics CSVs and plot data",
}
STAGE_FUNCS = {"prepare": stage_prepare, "similarity": stage_similarity, "split": stage_split,
               "audit": stage_audit, "featurize": stage_featurize, "evaluate": stage_evaluate,
               "report": stage_report}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="affbench", description="Low-similarity protein-ligand affinity benchmark.")
    parser.add_argument("--version", action="version", version=f"affbench {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", required=True, type=Path, help="run config (TOML, or JSON with .json suffix)")
        p.add_argument("--output", type=Path, default=None, help="override paths.output")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (default from config; capped by AFFBENCH_THREADS)")
        return p

    for name in ("prepare", "similarity", "split", "audit", "featurize"):
        with_config(sub.add_parser(name, help=STAGE_HELP[name], description=STAGE_HELP[name]))
    train = with_config(sub.add_parser("train", help=STAGE_HELP["train"], description=STAGE_HELP["train"]))
    train.add_argument("--model", required=True, help=f"one of: {', '.join(ROSTER)}")
    train.add_argument("--fraction", type=float, default=None,
                       help="only this train fraction (default: every planned fraction)")
    for name in ("evaluate", "report"):
        with_config(sub.add_parser(name, help=STAGE_HELP[name], description=STAGE_HELP[name]))
    with_config(sub.add_parser("run", help="all stages and every model in the roster",
                               description="Run all stages and every model in the roster."))
    rp = sub.add_parser("replay", help="rerun a recorded pipeline and verify identical reports",
                        description="Rerun the pipeline recorded in a report manifest and compare outputs.")
    rp.add_argument("--manifest", required=True, type=Path, help="manifests/report.json of a previous run")
    rp.add_argument("--output", type=Path, default=None, help="directory for the rerun (default: the original)")
    rp.add_argument("--workers", type=int, default=None)
    mf = sub.add_parser("make-fixtures", help="write the bundled synthetic 40-complex data set",
                        description="Write the synthetic fixture set (structures, index, similarity, config).")
    mf.add_argument("--output", required=True, type=Path)
    mf.add_argument("--seed", type=int, default=0)
    return parser


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def _workspace(args) -> Workspace:
    cfg = load_config(args.config)
    if args.output is not None:
        cfg.output = args.output.resolve()
    return Workspace(cfg, args.workers)


def dispatch(args) -> int:
    cmd = args.command
    if cmd is None:
        raise ConfigError("no command given", hint="see `affbench --help`")
    if cmd == "make-fixtures":
        from .fixtures import write_fixture_set

        path = write_fixture_set(args.output, args.seed)
        _emit({"config": str(path)})
        return 0
    if cmd == "replay":
        _emit(replay(args.manifest, args.output, args.workers, log=lambda m: print(m, file=sys.stderr)))
        return 0
    if cmd == "train" and args.model not in ROSTER:
        raise ConfigError(f"unknown model {args.model!r}; the roster is {', '.join(ROSTER)}")
    ws = _workspace(args)
    if cmd == "run":
        run_all(ws, log=lambda m: print(m, file=sys.stderr))
        _emit({"report": str(ws.path("reports/metrics.csv"))})
    elif cmd == "train":
        _emit(stage_train(ws, args.model, args.fraction))
    else:
        _emit(STAGE_FUNCS[cmd](ws))
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        # Non-finite losses are reported as DivergenceError; keep numpy's
        # overflow chatter off stderr so the error line stays parseable.
        with np.errstate(over="ignore", invalid="ignore"):
            return dispatch(args)
    except AffbenchError as exc:
        err = {"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
        if getattr(exc, "hint", None):
            err["hint"] = exc.hint
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort JSON error line
        err = {"error": "internal_error", "message": f"{type(exc).__name__}: {exc}", "exit_code": 1}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
