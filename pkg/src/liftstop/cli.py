"""Command line interface.

Subcommands: run, simulate, calibrate, sweep, diagnose. Every output
is valid JSON (one object per line) or CSV. Failures print a single
machine-readable JSON object to stderr and exit with a distinct code:

    0  success
    1  usage error (unknown flag, bad subcommand, unparsable value)
    2  configuration error (values that fail validation)
    3  data error (unreadable input, malformed stream lines)
    4  internal error (numeric overflow, unexpected failure)
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .controller import (
    ConfigError,
    EngineConfig,
    LifecycleError,
    SequencingError,
    run,
)
from .eprocess import GridBoundError, NumericalOverflowError
from .io import (
    StreamFormatError,
    certificate_to_dict,
    diagnostics_to_dict,
    dump_json_line,
    parse_dist_stream,
    parse_stream,
    record_to_dict,
    trace_row_to_dict,
    write_risk_csv,
    write_stream,
    write_sweep_csv,
)
from .lift import LiftConfig, MalformedRecordError
from .simlab import (
    BetaScaled,
    ClippedGaussian,
    EntropySpec,
    SpecError,
    StreamSpec,
    TwoPoint,
    generate_stream,
    monte_carlo_risk,
    sensitivity_sweep,
)
from .skeleton import DiagnosticsConfig, diagnose

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_EXIT_DOC = """exit codes:
  0  success
  1  usage error
  2  configuration error
  3  data error
  4  internal error
"""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits the process on bad flags; surface a typed error instead
    def error(self, message: str):
        raise _UsageError(message)


def _emit_error(code: int, kind: str, message: str) -> None:
    sys.stderr.write(
        dump_json_line({"error": {"code": code, "kind": kind, "message": message}}) + "\n"
    )


# ---------------------------------------------------------------------------
# flag groups


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("engine", "engine configuration (flags beat --config)")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--delta", type=float, help="total error budget in (0, 1)")
    g.add_argument("--clip-bound", type=float, help="increment clip bound in nats")
    g.add_argument("--increment-bound", type=float, help="envelope constant for the grid")
    g.add_argument("--grid-size", type=int, help="number of bet sizes")
    g.add_argument("--lambda-min", type=float)
    g.add_argument("--lambda-max", type=float)
    g.add_argument("--alpha", type=float, help="EMA rate")
    g.add_argument("--eta", type=float, help="additive variance slack")
    g.add_argument("--v-factor", type=float, help="variance inflation factor")
    g.add_argument("--eta-factor", type=float, help="slack inflation factor")
    g.add_argument("--penalty", choices=["gaussian", "bernstein", "hoeffding"])
    g.add_argument("--skip", dest="skip", action="store_true", default=None)
    g.add_argument("--no-skip", dest="skip", action="store_false", default=None)
    g.add_argument("--skip-threshold", type=float)
    g.add_argument("--skip-mode", choices=["bypass", "zero_update"])
    g.add_argument("--drift", dest="drift", action="store_true", default=None)
    g.add_argument("--no-drift", dest="drift", action="store_false", default=None)
    g.add_argument("--tau-d", type=float, help="drift gap threshold")
    g.add_argument("--drift-window", type=int)
    g.add_argument("--max-segments", type=int)
    g.add_argument("--forced-reset-every", type=int)
    g.add_argument("--gate", dest="gate", action="store_true", default=None)
    g.add_argument("--no-gate", dest="gate", action="store_false", default=None)
    g.add_argument("--tau-c", type=float, help="verifier gate threshold")
    g.add_argument("--max-steps", type=int)
    g.add_argument("--strict-predictable", action="store_true", default=None)
    g.add_argument("--oracle-mean", type=float, help="freeze centering at this mean")
    g.add_argument("--seed", type=int, help="seed recorded in config and used by streams")


def _build_config(args: argparse.Namespace) -> EngineConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")

    def setd(path: tuple[str, ...], value):
        if value is None:
            return
        node = data
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config key {key!r} must be an object")
        node[path[-1]] = value

    setd(("delta",), args.delta)
    setd(("clip_bound",), args.clip_bound)
    setd(("increment_bound",), args.increment_bound)
    setd(("grid", "size"), args.grid_size)
    setd(("grid", "lambda_min"), args.lambda_min)
    setd(("grid", "lambda_max"), args.lambda_max)
    setd(("alpha",), args.alpha)
    setd(("eta",), args.eta)
    setd(("v_factor",), args.v_factor)
    setd(("eta_factor",), args.eta_factor)
    setd(("penalty",), args.penalty)
    setd(("skip", "enabled"), args.skip)
    setd(("skip", "threshold"), args.skip_threshold)
    setd(("skip", "mode"), args.skip_mode)
    setd(("drift", "enabled"), args.drift)
    setd(("drift", "tau_d"), args.tau_d)
    setd(("drift", "window"), args.drift_window)
    setd(("drift", "max_segments"), args.max_segments)
    setd(("drift", "forced_reset_every"), args.forced_reset_every)
    setd(("gate", "enabled"), args.gate)
    setd(("gate", "tau_c"), args.tau_c)
    setd(("max_steps",), args.max_steps)
    setd(("strict_predictable",), args.strict_predictable)
    setd(("oracle_mean",), args.oracle_mean)
    setd(("seed",), args.seed)
    return EngineConfig.from_dict(data)


def _add_spec_flags(p: argparse.ArgumentParser, with_null: bool = False) -> None:
    g = p.add_argument_group("stream spec", "synthetic stream recipe")
    if with_null:
        g.add_argument(
            "--null",
            action="store_true",
            help="stationary two-point null on {0, clip_bound} with mean clip_bound/2",
        )
    g.add_argument("--length", type=int, default=150)
    g.add_argument("--mean", type=float, default=0.0, help="pre-clip target mean in nats")
    g.add_argument(
        "--noise", choices=["gaussian", "beta", "two-point"], default="gaussian"
    )
    g.add_argument("--sigma", type=float, default=0.2, help="gaussian noise scale")
    g.add_argument("--beta-a", type=float, default=2.0)
    g.add_argument("--beta-b", type=float, default=5.0)
    g.add_argument("--tp-p", type=float, default=0.5, help="two-point hit probability")
    g.add_argument("--tp-hi", type=float, default=0.0)
    g.add_argument("--tp-lo", type=float, default=0.0)
    g.add_argument(
        "--drift-schedule",
        default="",
        help="comma-separated step:mean jumps, e.g. 100:0.4,130:0.1",
    )
    g.add_argument("--entropy", action="store_true", help="emit synthetic entropies")
    g.add_argument("--entropy-base", type=float, default=2.5)
    g.add_argument("--entropy-slope", type=float, default=0.5)
    g.add_argument("--entropy-noise", type=float, default=0.3)
    g.add_argument("--boundary-every", type=int, default=0)
    g.add_argument("--verifier-pass-rate", type=float, default=None)
    g.add_argument("--stream-index", type=int, default=0)


def _parse_drift_schedule(text: str) -> tuple[tuple[int, float], ...]:
    if not text:
        return ()
    jumps = []
    for part in text.split(","):
        try:
            step_s, mean_s = part.split(":")
            jumps.append((int(step_s), float(mean_s)))
        except ValueError as exc:
            raise SpecError(f"bad drift schedule entry {part!r}: {exc}") from exc
    return tuple(jumps)


def _build_spec(args: argparse.Namespace, clip_bound: float, seed: int) -> StreamSpec:
    if getattr(args, "null", False):
        return StreamSpec(
            length=args.length,
            base_mean=clip_bound / 2.0,
            noise=TwoPoint(p=0.5, hi=clip_bound, lo=0.0),
            clip_bound=clip_bound,
            seed=seed,
        )
    if args.noise == "gaussian":
        noise = ClippedGaussian(sigma=args.sigma)
    elif args.noise == "beta":
        noise = BetaScaled(a=args.beta_a, b=args.beta_b)
    else:
        noise = TwoPoint(p=args.tp_p, hi=args.tp_hi, lo=args.tp_lo)
    entropy = None
    if args.entropy:
        entropy = EntropySpec(
            base=args.entropy_base, slope=args.entropy_slope, noise=args.entropy_noise
        )
    spec = StreamSpec(
        length=args.length,
        base_mean=args.mean,
        noise=noise,
        drift=_parse_drift_schedule(args.drift_schedule),
        entropy=entropy,
        boundary_every=args.boundary_every,
        verifier_pass_rate=args.verifier_pass_rate,
        clip_bound=clip_bound,
        seed=seed,
    )
    spec.validate()
    return spec


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if args.input == "-":
        records = parse_stream(sys.stdin)
        cert = run(records, config, collect_trace=args.trace)
    else:
        with open(args.input, "r", encoding="utf-8") as fh:
            cert = run(parse_stream(fh), config, collect_trace=args.trace)
    if args.trace and cert.trace is not None:
        for row in cert.trace:
            sys.stdout.write(dump_json_line(trace_row_to_dict(row)) + "\n")
    sys.stdout.write(dump_json_line({"certificate": certificate_to_dict(cert)}) + "\n")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    clip = args.clip_bound if args.clip_bound is not None else 8.0
    spec = _build_spec(args, clip_bound=clip, seed=args.seed or 0)
    records = generate_stream(spec, args.stream_index)
    fh, close = _open_out(args.out)
    try:
        write_stream(records, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    spec = _build_spec(args, clip_bound=config.clip_bound, seed=config.seed)
    if args.oracle_centering:
        config = replace(config, oracle_mean=spec.true_mean())
    report = monte_carlo_risk(spec, config, args.n)
    fh, close = _open_out(args.out)
    try:
        write_risk_csv(report, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _parse_factor_grid(text: str) -> list[tuple[float, float]]:
    cells = []
    for part in text.split(","):
        try:
            v_s, e_s = part.split(":")
            cells.append((float(v_s), float(e_s)))
        except ValueError as exc:
            raise ConfigError(f"bad factor grid entry {part!r}: {exc}") from exc
    if not cells:
        raise ConfigError("factor grid must not be empty")
    return cells


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    spec = _build_spec(args, clip_bound=config.clip_bound, seed=config.seed)
    if args.oracle_centering:
        config = replace(config, oracle_mean=spec.true_mean())
    cells = sensitivity_sweep(spec, config, _parse_factor_grid(args.factor_grid), args.n)
    fh, close = _open_out(args.out)
    try:
        write_sweep_csv(cells, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    cfg = DiagnosticsConfig(
        kl_low=args.kl_low,
        kl_high=args.kl_high,
        rho_max=args.rho_max,
        saturation_max=args.saturation_max,
        min_steps=args.min_steps,
        correlation=args.correlation,
        lift=LiftConfig(clip_bound=args.clip_bound),
    )
    if args.input == "-":
        report = diagnose(parse_dist_stream(sys.stdin), cfg)
    else:
        with open(args.input, "r", encoding="utf-8") as fh:
            report = diagnose(parse_dist_stream(fh), cfg)
    sys.stdout.write(dump_json_line(diagnostics_to_dict(report)) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(
        prog="liftstop",
        description="Anytime-valid sequential stopping over token streams.",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run",
        help="decide stop/continue over a recorded stream",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_run.add_argument("--input", required=True, help="stream JSONL file, or - for stdin")
    p_run.add_argument("--trace", action="store_true", help="emit per-step trace lines")
    _add_engine_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sim = sub.add_parser(
        "simulate",
        help="emit a synthetic stream as JSONL",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_spec_flags(p_sim)
    p_sim.add_argument("--clip-bound", type=float, default=None)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None, help="output path, default stdout")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_cal = sub.add_parser(
        "calibrate",
        help="Monte Carlo crossing-rate curve as CSV",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_cal.add_argument("--n", type=int, default=1000, help="number of streams")
    p_cal.add_argument(
        "--oracle-centering",
        action="store_true",
        help="freeze centering at the stream recipe's exact stationary mean",
    )
    p_cal.add_argument("--out", default=None, help="output path, default stdout")
    _add_spec_flags(p_cal, with_null=True)
    _add_engine_flags(p_cal)
    p_cal.set_defaults(fn=_cmd_calibrate)

    p_sweep = sub.add_parser(
        "sweep",
        help="inflation-factor sensitivity sweep as CSV",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_sweep.add_argument(
        "--factor-grid",
        default="1.0:1.0,1.3:1.5,1.5:2.0",
        help="comma-separated v:eta factor pairs",
    )
    p_sweep.add_argument("--n", type=int, default=1000)
    p_sweep.add_argument("--oracle-centering", action="store_true")
    p_sweep.add_argument("--out", default=None)
    _add_spec_flags(p_sweep, with_null=True)
    _add_engine_flags(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_diag = sub.add_parser(
        "diagnose",
        help="health-check a paired-distribution stream",
        epilog=_EXIT_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_diag.add_argument("--input", required=True, help="dist JSONL file, or - for stdin")
    p_diag.add_argument("--kl-low", type=float, default=2.0)
    p_diag.add_argument("--kl-high", type=float, default=10.0)
    p_diag.add_argument("--rho-max", type=float, default=-0.5)
    p_diag.add_argument("--saturation-max", type=float, default=0.05)
    p_diag.add_argument("--min-steps", type=int, default=30)
    p_diag.add_argument("--correlation", choices=["pearson", "spearman"], default="pearson")
    p_diag.add_argument("--clip-bound", type=float, default=8.0)
    p_diag.set_defaults(fn=_cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _emit_error(EXIT_USAGE, "usage", str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help exits 0 through here
        return int(exc.code or 0)

    try:
        return args.fn(args)
    except (ConfigError, GridBoundError, SpecError) as exc:
        _emit_error(EXIT_CONFIG, "config", str(exc))
        return EXIT_CONFIG
    except (StreamFormatError, MalformedRecordError, SequencingError) as exc:
        _emit_error(EXIT_DATA, "data", str(exc))
        return EXIT_DATA
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(EXIT_DATA, "data", str(exc))
        return EXIT_DATA
    except Exception as exc:  # NumericalOverflowError, LifecycleError, bugs
        _emit_error(EXIT_INTERNAL, "internal", f"{type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
