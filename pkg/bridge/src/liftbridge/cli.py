"""Command line for the model bridge.

Exit codes mirror the stopping engine's CLI: 0 success, 1 usage error,
2 configuration error, 3 data or model error, 4 internal error. Errors
are a single JSON object on stderr.
"""

import argparse
import dataclasses
import json
import sys

from .extract import (
    BridgeConfig,
    ConfigError,
    SKELETON_KINDS,
    extract_stream,
    verify_manifest,
    write_manifest,
)
from .model import BridgeError
from .prompts import DEFAULT_TEMPLATE, PromptFields, TemplateError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="liftbridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="generate and score one stream")
    ex.add_argument("--model", default="tiny-random")
    ex.add_argument("--skeleton", choices=SKELETON_KINDS, default="flatten")
    ex.add_argument("--tau", type=float, default=1.0)
    ex.add_argument("--gamma", type=float, default=0.0)
    ex.add_argument("--template", default=DEFAULT_TEMPLATE)
    ex.add_argument("--submodel", default="tiny-random-small")
    ex.add_argument("--instruction", default="")
    ex.add_argument("--example", action="append", default=[], dest="examples")
    ex.add_argument("--context", default="")
    ex.add_argument("--query", required=True)
    ex.add_argument("--max-tokens", type=int, default=50)
    ex.add_argument("--boundary-chars", default=".!?;")
    ex.add_argument("--verifier-cmd", default=None)
    ex.add_argument("--sample", action="store_true")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--out", required=True, help="stream JSONL path")
    ex.add_argument("--manifest", default=None, help="default: <out>.manifest.json")
    ex.add_argument("--emit-dist", default=None, help="paired-distribution JSONL path")

    ver = sub.add_parser("verify", help="recheck a manifest against its stream")
    ver.add_argument("--manifest", required=True)
    return parser


def _emit_error(code: int, kind: str, message: str) -> None:
    sys.stderr.write(
        json.dumps({"error": {"code": code, "kind": kind, "message": message}})
        + "\n"
    )


def _cmd_extract(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        model=args.model,
        skeleton=args.skeleton,
        tau=args.tau,
        gamma=args.gamma,
        template=args.template,
        submodel=args.submodel,
        max_tokens=args.max_tokens,
        boundary_chars=args.boundary_chars,
        verifier_cmd=args.verifier_cmd,
        sample=args.sample,
        seed=args.seed,
    )
    fields = PromptFields(
        instruction=args.instruction,
        examples=tuple(args.examples),
        context=args.context,
        query=args.query,
    )
    manifest = extract_stream(config, fields, args.out, dist_path=args.emit_dist)
    manifest_path = args.manifest or args.out + ".manifest.json"
    write_manifest(manifest, manifest_path)
    sys.stdout.write(
        json.dumps(dataclasses.asdict(manifest), sort_keys=True) + "\n"
    )
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    problems = verify_manifest(args.manifest)
    sys.stdout.write(json.dumps({"ok": not problems, "problems": problems}) + "\n")
    return EXIT_OK if not problems else EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "extract":
            return _cmd_extract(args)
        return _cmd_verify(args)
    except _UsageError as exc:
        _emit_error(EXIT_USAGE, "usage", str(exc))
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, TemplateError) as exc:
        _emit_error(EXIT_CONFIG, "config", str(exc))
        return EXIT_CONFIG
    except (BridgeError, OSError, json.JSONDecodeError, KeyError) as exc:
        _emit_error(EXIT_DATA, "data", str(exc))
        return EXIT_DATA
    except Exception as exc:
        _emit_error(EXIT_INTERNAL, "internal", f"{type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
