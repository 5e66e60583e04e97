"""Command-line surface: pipeline stages, the review service, KB emission.

Every subcommand takes --config pointing at the YAML pipeline config; a few
accept stage-specific overrides.  See README for the config schema.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import PipelineConfig
from .pipeline import RunPaths, STAGES, run_pipeline
from .review import ReviewStore, load_queue_items
from .riskdb import emit_kb


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_yaml(args.config)
    if getattr(args, "run_id", None):
        config.run_id = args.run_id
    if getattr(args, "workdir", None):
        config.workdir = args.workdir
    return config


def _add_common(parser):
    parser.add_argument("--config", required=True, help="pipeline config YAML")
    parser.add_argument("--run-id", help="override the run identifier")
    parser.add_argument("--workdir", help="override the artifact directory")


def _stage_command(stage):
    def handler(args):
        config = _load_config(args)
        artifacts = run_pipeline(config, [stage])
        print(json.dumps(artifacts, indent=2, sort_keys=True))
        return 0

    return handler


def _cmd_run(args):
    config = _load_config(args)
    stages = [s.strip().replace("-", "_") for s in args.stages.split(",") if s.strip()]
    artifacts = run_pipeline(config, stages)
    print(json.dumps(artifacts, indent=2, sort_keys=True))
    return 0


def _cmd_serve(args):
    from .service import serve

    config = _load_config(args)
    if args.host:
        config.service.host = args.host
    if args.port:
        config.service.port = args.port
    if args.frontend_dir:
        config.service.frontend_dir = args.frontend_dir
    serve(config)
    return 0


def _cmd_emit_kb(args):
    config = _load_config(args)
    paths = RunPaths(config.run_dir())
    if not paths.queue.exists():
        print("predict stage has not produced a review queue yet", file=sys.stderr)
        return 2
    store = ReviewStore(load_queue_items(paths.queue), paths.decisions_log)
    rows, problems = store.kb_rows(model_version=config.resolved_run_id())
    out = args.out or paths.kb_csv
    emit_kb(rows, out)
    for problem in problems:
        print(f"[skip] {problem}", file=sys.stderr)
    print(str(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penkb",
        description="Semi-automated KB construction for penetrance literature")
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in STAGES:
        name = stage.replace("_", "-")
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p)
        p.set_defaults(handler=_stage_command(stage))

    p = sub.add_parser("run", help="run several stages in order")
    _add_common(p)
    p.add_argument("--stages", required=True,
                   help="comma-separated subset of: " + ",".join(STAGES))
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("serve", help="start the review service")
    _add_common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--frontend-dir", help="static frontend build to mount at /")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("emit-kb", help="write the KB CSV from review decisions")
    _add_common(p)
    p.add_argument("--out", help="output CSV path (default: run dir kb.csv)")
    p.set_defaults(handler=_cmd_emit_kb)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
