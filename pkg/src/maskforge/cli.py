"""Command-line entry point: reproducible stage runs from one config file.

Thin layer over the package: each subcommand parses flags, loads the config
(with dot-path overrides like ``--train.lambda 0.5``), and calls the matching
stage runner. Failures exit nonzero with a machine-readable JSON error on
stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from maskforge.config import PipelineConfig, parse_override_value
from maskforge.errors import ConfigError, MaskforgeError

SUBCOMMANDS = (
    "fixture-gen",
    "segment",
    "embed",
    "filter",
    "augment",
    "emit",
    "deploy-set",
    "train",
    "eval",
    "study",
    "serve",
    "verify",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskforge",
        description="Weak-supervision dataset curation for clipping detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the root seed")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=str, default=None,
                       help="run directory (default $MASKFORGE_OUT or ./runs)")
        if name == "filter":
            p.add_argument("--dry-run", action="store_true",
                           help="report only; write no mask list")
        if name == "train":
            p.add_argument("--protocol", choices=(
                "supervised_only", "ssl_only", "multi_task", "pretrain_finetune"),
                default="pretrain_finetune")
            p.add_argument("--lambda-grid", type=str, default=None,
                           help="comma-separated lambda sweep, e.g. 0,0.25,0.5,1")
        if name == "eval":
            p.add_argument("--model", type=str, default=None)
        if name == "serve":
            p.add_argument("--host", type=str, default="127.0.0.1")
            p.add_argument("--port", type=int, default=8321)
            p.add_argument("--sessions-dir", type=str, default=None)
    return parser


def _parse_overrides(extra: list[str]) -> dict:
    overrides = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            raise ConfigError("args", f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(key, "override is missing a value")
            raw = extra[i + 1]
            i += 2
        if "." not in key:
            raise ConfigError(key, "unknown flag (overrides use dot paths like train.lambda)")
        overrides[key] = parse_override_value(raw)
    return overrides


def _out_dir(args, cfg: PipelineConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.doc.get("out_dir"):
        return Path(cfg.doc["out_dir"])
    return Path(os.environ.get("MASKFORGE_OUT", "runs"))


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _parse_overrides(extra)
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = PipelineConfig.load(args.config, overrides)
        return _dispatch(args, cfg)
    except ConfigError as exc:
        _emit_error("config", str(exc), path=exc.path)
        return 2
    except MaskforgeError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


def _emit_error(code: str, message: str, path: str | None = None) -> None:
    doc = {"error": {"code": code, "message": message}}
    if path is not None:
        doc["error"]["path"] = path
    print(json.dumps(doc), file=sys.stderr)


def _dispatch(args, cfg: PipelineConfig) -> int:
    from maskforge import pipeline

    out = _out_dir(args, cfg)
    command = args.command
    if command == "fixture-gen":
        path = pipeline.stage_fixture_gen(cfg, out, args.workers)
    elif command == "segment":
        path = pipeline.stage_segment(cfg, out, args.workers)
    elif command == "embed":
        path = pipeline.stage_embed(cfg, out, args.workers)
    elif command == "filter":
        path = pipeline.stage_filter(cfg, out, dry_run=args.dry_run)
    elif command == "augment":
        path = pipeline.stage_augment(cfg, out, args.workers)
    elif command == "emit":
        path = pipeline.stage_emit(cfg, out, args.workers)
    elif command == "deploy-set":
        path, _, _ = pipeline.stage_deploy(cfg, out, args.workers)
    elif command == "train":
        grid = None
        if args.lambda_grid:
            grid = [float(v) for v in args.lambda_grid.split(",") if v.strip()]
        path = pipeline.stage_train(cfg, out, protocol=args.protocol,
                                    lam_grid=grid, workers=args.workers)
    elif command == "eval":
        model = Path(args.model) if args.model else None
        path = pipeline.stage_eval(cfg, out, model_path=model, workers=args.workers)
    elif command == "study":
        path = pipeline.run_study(cfg, out, args.workers)
    elif command == "verify":
        ok, findings = pipeline.verify_run(out)
        print(json.dumps({"ok": ok, "artifacts": findings}, indent=2))
        return 0 if ok else 1
    elif command == "serve":
        return _serve(args, cfg)
    else:  # pragma: no cover
        raise MaskforgeError(f"unknown subcommand {command}")
    print(json.dumps({"ok": True, "artifact": str(path)}))
    return 0


def _serve(args, cfg: PipelineConfig) -> int:
    import uvicorn

    from maskforge.service.app import create_app

    sessions_dir = Path(args.sessions_dir) if args.sessions_dir else _out_dir(args, cfg) / "sessions"
    app = create_app(sessions_dir=sessions_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
