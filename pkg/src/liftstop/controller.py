"""Sequential stop/continue decisions over a token stream.

One controller owns one stream. Per step it runs, in order: the
entropy-slope skip rule, the lift computation, the EMA estimate
update, the e-process update, the mixture threshold test against the
current segment budget, the boundary/verifier gate (which can only
delay a stop, never cause one), and drift detection (which resets the
e-process into a fresh segment with a smaller error budget).

Error budgets across segments follow delta_j = 6*delta/(pi^2 * j^2),
so the total over infinitely many segments telescopes to delta.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Iterator

from .eprocess import (
    EProcessState,
    EstimatorState,
    GridBoundError,
    build_grid,
    mixture_log_value,
    new_eprocess,
    update_eprocess,
    update_estimates,
)
from .lift import (
    LiftConfig,
    LiftIncrement,
    MalformedRecordError,
    TokenRecord,
    compute_lift,
    entropy_slope,
)

__all__ = [
    "ConfigError",
    "SequencingError",
    "LifecycleError",
    "SkipConfig",
    "DriftConfig",
    "GateConfig",
    "GridConfig",
    "EngineConfig",
    "BudgetSchedule",
    "DriftDetector",
    "StepVerdict",
    "TraceRow",
    "Certificate",
    "VERDICT_KINDS",
    "SKIP_MODES",
    "segment_budget",
    "should_skip",
    "gate_check",
    "StreamController",
    "run",
]

VERDICT_KINDS = ("continue", "skipped", "gate_delayed", "stopped", "reset")
SKIP_MODES = ("bypass", "zero_update")

_PI2 = math.pi * math.pi


class ConfigError(ValueError):
    """Engine configuration failed validation."""


class SequencingError(ValueError):
    """Record indices are not strictly increasing."""


class LifecycleError(RuntimeError):
    """step() called on a finished controller."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SkipConfig:
    enabled: bool = True
    threshold: float = 0.0
    mode: str = "bypass"


@dataclass(frozen=True)
class DriftConfig:
    enabled: bool = True
    tau_d: float = 0.10
    window: int = 50
    max_segments: int = 32
    # fixed-schedule resets, independent of detection; used to stress
    # the per-segment budget arithmetic under predictable reset times
    forced_reset_every: int | None = None


@dataclass(frozen=True)
class GateConfig:
    enabled: bool = False
    tau_c: float = 0.7


@dataclass(frozen=True)
class GridConfig:
    size: int = 12
    lambda_min: float = 0.02
    lambda_max: float = 0.6


@dataclass(frozen=True)
class EngineConfig:
    """Every knob of the engine, hashable into a stable digest."""

    delta: float = 0.1
    clip_bound: float = 8.0
    increment_bound: float = 0.18
    grid: GridConfig = field(default_factory=GridConfig)
    alpha: float = 0.2
    eta: float = 0.20
    v_factor: float = 1.3
    eta_factor: float = 1.5
    penalty: str = "gaussian"
    skip: SkipConfig = field(default_factory=SkipConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    max_steps: int = 150
    strict_predictable: bool = False
    # fixes the centering mean instead of tracking it; pairs with the
    # hoeffding penalty for exact validity checks on known nulls
    oracle_mean: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must be in (0, 1), got {self.delta}")
        if not (self.clip_bound > 0 and math.isfinite(self.clip_bound)):
            raise ConfigError(f"clip_bound must be finite and > 0, got {self.clip_bound}")
        if not (self.increment_bound > 0 and math.isfinite(self.increment_bound)):
            raise ConfigError(
                f"increment_bound must be finite and > 0, got {self.increment_bound}"
            )
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.eta < 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if self.v_factor < 0 or self.eta_factor < 0:
            raise ConfigError("inflation factors must be >= 0")
        if self.penalty not in ("gaussian", "bernstein", "hoeffding"):
            raise ConfigError(f"unknown penalty {self.penalty!r}")
        if self.skip.mode not in SKIP_MODES:
            raise ConfigError(f"unknown skip mode {self.skip.mode!r}")
        if not math.isfinite(self.skip.threshold):
            raise ConfigError("skip threshold must be finite")
        if not (self.drift.tau_d > 0):
            raise ConfigError(f"tau_d must be > 0, got {self.drift.tau_d}")
        if self.drift.window < 1:
            raise ConfigError(f"drift window must be >= 1, got {self.drift.window}")
        if self.drift.max_segments < 1:
            raise ConfigError("max_segments must be >= 1")
        if self.drift.forced_reset_every is not None and self.drift.forced_reset_every < 1:
            raise ConfigError("forced_reset_every must be >= 1 when set")
        if not (0.0 <= self.gate.tau_c <= 1.0):
            raise ConfigError(f"tau_c must be in [0, 1], got {self.gate.tau_c}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.oracle_mean is not None and not math.isfinite(self.oracle_mean):
            raise ConfigError("oracle_mean must be finite when set")
        # grid bounds are validated by construction
        try:
            build_grid(
                self.grid.size,
                self.grid.lambda_min,
                self.grid.lambda_max,
                self.increment_bound,
            )
        except GridBoundError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """sha256 over the canonical JSON of all parameters.

        Memoized per instance; the config is frozen so the digest
        cannot go stale, and Monte Carlo runs ask for it per stream.
        """
        return _config_digest(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        """Build from nested dicts, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigError(f"config must be an object, got {type(data).__name__}")
        nested = {"grid": GridConfig, "skip": SkipConfig, "drift": DriftConfig, "gate": GateConfig}
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                sub_cls = nested[key]
                if not isinstance(value, dict):
                    raise ConfigError(f"config key {key!r} must be an object")
                sub_known = set(sub_cls.__dataclass_fields__)
                extra = set(value) - sub_known
                if extra:
                    raise ConfigError(f"unknown config key {key!r}.{sorted(extra)[0]!r}")
                kwargs[key] = sub_cls(**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def lift_config(self) -> LiftConfig:
        return LiftConfig(clip_bound=self.clip_bound, increment_bound=self.increment_bound)


@lru_cache(maxsize=None)
def _config_digest(config: EngineConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# budgets


def segment_budget(delta_total: float, segment: int) -> tuple[float, float]:
    """Per-segment error budget and threshold.

    delta_j = 6 * delta_total / (pi^2 * j^2) and u_j = 1 / delta_j.
    The budgets sum to delta_total over all segments.
    """
    if not (0.0 < delta_total < 1.0):
        raise ConfigError(f"delta_total must be in (0, 1), got {delta_total}")
    if segment < 1:
        raise ConfigError(f"segment must be >= 1, got {segment}")
    delta_j = 6.0 * delta_total / (_PI2 * segment * segment)
    return delta_j, 1.0 / delta_j


@dataclass(frozen=True)
class BudgetSchedule:
    """Current segment budget plus the history of reset times."""

    delta_total: float
    segment: int = 1
    reset_times: tuple[int, ...] = ()

    @property
    def delta_j(self) -> float:
        return segment_budget(self.delta_total, self.segment)[0]

    @property
    def u_j(self) -> float:
        return segment_budget(self.delta_total, self.segment)[1]

    def advanced(self, reset_step: int) -> "BudgetSchedule":
        return replace(
            self,
            segment=self.segment + 1,
            reset_times=self.reset_times + (reset_step,),
        )


# ---------------------------------------------------------------------------
# drift detection


class DriftDetector:
    """Gap between the recent and the overall mean of accepted increments.

    Inert until `window` increments have been seen since the last
    reset. Cleared on every segment reset so a fired detector does not
    re-fire forever on the same gap.
    """

    def __init__(self, window: int, tau_d: float):
        self.window = window
        self.tau_d = tau_d
        self._recent: deque[float] = deque(maxlen=window)
        self._recent_sum = 0.0
        self._total_sum = 0.0
        self._total_n = 0

    def push(self, x: float) -> None:
        if len(self._recent) == self.window:
            self._recent_sum -= self._recent[0]
        self._recent.append(x)
        self._recent_sum += x
        self._total_sum += x
        self._total_n += 1

    @property
    def ready(self) -> bool:
        return self._total_n >= self.window

    def gap(self) -> float:
        if not self.ready:
            return 0.0
        recent = self._recent_sum / len(self._recent)
        overall = self._total_sum / self._total_n
        return abs(recent - overall)

    def fired(self) -> bool:
        return self.ready and self.gap() > self.tau_d

    def clear(self) -> None:
        self._recent.clear()
        self._recent_sum = 0.0
        self._total_sum = 0.0
        self._total_n = 0


def should_skip(slope: float, threshold: float = 0.0) -> bool:
    """Skip rule: entropy slope at or above the threshold means skip."""
    return slope >= threshold


def gate_check(record: TokenRecord, tau_c: float) -> bool:
    """Boundary-and-verifier gate for a pending stop.

    Raises MalformedRecordError when the record carries no verifier
    score, since an enabled gate cannot be evaluated without one.
    """
    if record.verifier_score is None:
        raise MalformedRecordError(
            "verifier_score", f"required by the enabled gate at step {record.index}"
        )
    return bool(record.is_boundary) and record.verifier_score >= tau_c


# ---------------------------------------------------------------------------
# verdicts and certificates


@dataclass
class StepVerdict:
    """Outcome of one processed record. Treat instances as immutable."""

    t: int
    kind: str
    x: float
    log_mixture: float
    mu_hat: float
    v_hat: float
    segment: int
    threshold_log: float


@dataclass(frozen=True)
class TraceRow:
    t: int
    kind: str
    x: float
    cum_lift: float
    log_mixture: float
    mu_hat: float
    v_hat: float
    segment: int


@dataclass(frozen=True)
class Certificate:
    """Terminal summary of one stream run.

    outcome is "stopped" or "timeout". crossing_step is the first step
    whose mixture met the then-current threshold; with a gate enabled
    the stop step can trail it, and gate_delay_tokens is that lag.
    """

    outcome: str
    delta_total: float
    stop_step: int | None
    crossing_step: int | None
    gate_delay_tokens: int | None
    segments_used: int
    reset_times: tuple[int, ...]
    steps_processed: int
    final_log_mixture: float
    total_lift: float
    config_digest: str
    trace: tuple[TraceRow, ...] | None = None


# ---------------------------------------------------------------------------
# the controller


class StreamController:
    """Stateful per-stream decision loop.

    Each call to step() consumes the next TokenRecord and returns a
    StepVerdict. Once a verdict of kind "stopped" has been returned,
    or the step budget is exhausted, further calls raise
    LifecycleError.
    """

    def __init__(self, config: EngineConfig):
        config.validate()
        self.config = config
        self._lift_cfg = config.lift_config()
        grid = build_grid(
            config.grid.size,
            config.grid.lambda_min,
            config.grid.lambda_max,
            config.increment_bound,
        )
        estimator = EstimatorState(
            mu_hat=config.oracle_mean if config.oracle_mean is not None else 0.0,
            v_hat=0.0,
            alpha=config.alpha,
            eta=config.eta,
            v_factor=config.v_factor,
            eta_factor=config.eta_factor,
        )
        self._eps = new_eprocess(
            grid,
            penalty_kind=config.penalty,
            estimator=estimator,
            clip_bound=config.clip_bound,
            increment_bound=config.increment_bound,
        )
        self.budget = BudgetSchedule(delta_total=config.delta)
        self._log_u = math.log(self.budget.u_j)
        self._detector = DriftDetector(config.drift.window, config.drift.tau_d)
        # flat copies of config flags; step() runs once per token
        self._oracle = config.oracle_mean is not None
        self._strict = config.strict_predictable
        self._skip_enabled = config.skip.enabled
        self._skip_bypass = config.skip.mode == "bypass"
        self._skip_threshold = config.skip.threshold
        self._gate_enabled = config.gate.enabled
        self._tau_c = config.gate.tau_c
        self._drift_enabled = config.drift.enabled
        self._forced = config.drift.forced_reset_every
        self._max_steps = config.max_steps
        self._last_index: int | None = None
        self._h_prev1: float | None = None  # entropy at t-1
        self._h_prev2: float | None = None  # entropy at t-2
        self.steps_processed = 0
        self.cum_lift = 0.0
        self.crossing_step: int | None = None
        self.stop_step: int | None = None
        self.finished: str | None = None  # None, "stopped" or "timeout"
        self._log_mix = 0.0

    # -- read-only views ---------------------------------------------------

    @property
    def log_mixture(self) -> float:
        return self._log_mix

    @property
    def segment(self) -> int:
        return self.budget.segment

    @property
    def log_threshold(self) -> float:
        return self._log_u

    @property
    def estimator(self) -> EstimatorState:
        return self._eps.estimator

    @property
    def eprocess(self) -> EProcessState:
        return self._eps

    # -- internals ----------------------------------------------------------

    def _check_sequence(self, record: TokenRecord) -> None:
        if record.index < 1:
            raise SequencingError(f"record index must be >= 1, got {record.index}")
        if self._last_index is not None and record.index <= self._last_index:
            raise SequencingError(
                f"record index {record.index} does not increase past {self._last_index}"
            )
        self._last_index = record.index

    def _push_entropy(self, record: TokenRecord) -> None:
        self._h_prev2 = self._h_prev1
        self._h_prev1 = record.entropy

    def _skip_fires(self) -> bool:
        if not self._skip_enabled:
            return False
        if self._h_prev1 is None or self._h_prev2 is None:
            # missing entropy history disables the rule at this step
            return False
        return should_skip(
            entropy_slope(self._h_prev2, self._h_prev1), self._skip_threshold
        )

    def _advance_eprocess(self, x: float) -> None:
        if self._oracle:
            # frozen centering, estimator deliberately not advanced
            self._eps = update_eprocess(self._eps, x)
        elif self._strict:
            advanced = update_eprocess(self._eps, x)  # centered on t-1 state
            self._eps = replace(
                advanced, estimator=update_estimates(self._eps.estimator, x)
            )
        else:
            est = update_estimates(self._eps.estimator, x)
            self._eps = update_eprocess(self._eps, x, estimator=est)
        self._log_mix = mixture_log_value(self._eps)

    def _reset_segment(self, step: int) -> bool:
        """Advance to the next segment. False when the cap forbids it."""
        if self.budget.segment >= self.config.drift.max_segments:
            self.finished = "timeout"
            return False
        self.budget = self.budget.advanced(step)
        self._log_u = math.log(self.budget.u_j)
        self._eps = replace(self._eps, log_m=(0.0,) * self._eps.grid.size)
        self._log_mix = 0.0
        self._detector.clear()
        return True

    def _verdict(self, t: int, kind: str, x: float, log_mix: float) -> StepVerdict:
        est = self._eps.estimator
        return StepVerdict(
            t=t,
            kind=kind,
            x=x,
            log_mixture=log_mix,
            mu_hat=est.mu_hat,
            v_hat=est.v_hat,
            segment=self.budget.segment,
            threshold_log=self._log_u,
        )

    # -- the step ------------------------------------------------------------

    def step(self, record: TokenRecord) -> StepVerdict:
        if self.finished is not None:
            raise LifecycleError(f"controller already finished ({self.finished})")
        self._check_sequence(record)
        t = record.index

        skipping = self._skip_fires()
        self._push_entropy(record)
        self.steps_processed += 1

        if skipping and self._skip_bypass:
            # nothing updates; the skipped token is still stream history,
            # but fixed-schedule resets must not slip past a skipped step
            forced = self._forced
            if (
                self.crossing_step is None
                and forced is not None
                and self.steps_processed % forced == 0
            ):
                pre_reset_mix = self._log_mix
                self._reset_segment(t)
                kind = "reset" if self.finished is None else "continue"
                verdict = self._verdict(t, kind, 0.0, pre_reset_mix)
                self._finish_if_exhausted()
                return verdict
            verdict = self._verdict(t, "skipped", 0.0, self._log_mix)
            self._finish_if_exhausted()
            return verdict

        if skipping:  # zero_update: an ordinary step with a zeroed increment
            inc = LiftIncrement(0.0, was_skipped=True)
        else:
            inc = compute_lift(record, self._lift_cfg)
        x = inc.value
        self.cum_lift += x

        self._advance_eprocess(x)
        self._detector.push(x)

        crossed_now = self._log_mix >= self._log_u
        if crossed_now and self.crossing_step is None:
            self.crossing_step = t

        kind = "skipped" if skipping else "continue"
        if self.crossing_step is not None:
            # a pending stop is only ever delayed by the gate; it survives
            # later dips of the mixture below the threshold
            if not self._gate_enabled:
                return self._stop(t, x)
            if not skipping and gate_check(record, self._tau_c):
                return self._stop(t, x)
            verdict = self._verdict(
                t, "gate_delayed" if not skipping else "skipped", x, self._log_mix
            )
            self._finish_if_exhausted()
            return verdict

        # drift handling only while no stop is pending
        forced = self._forced
        fire_forced = forced is not None and self.steps_processed % forced == 0
        fire_drift = self._drift_enabled and self._detector.fired()
        if fire_forced or fire_drift:
            pre_reset_mix = self._log_mix
            if self._reset_segment(t):
                verdict = self._verdict(t, "reset", x, pre_reset_mix)
                self._finish_if_exhausted()
                return verdict
            # segment cap reached, run ends as timeout
            return self._verdict(t, "continue", x, pre_reset_mix)

        verdict = self._verdict(t, kind, x, self._log_mix)
        self._finish_if_exhausted()
        return verdict

    def _stop(self, t: int, x: float) -> StepVerdict:
        self.stop_step = t
        self.finished = "stopped"
        return self._verdict(t, "stopped", x, self._log_mix)

    def _finish_if_exhausted(self) -> None:
        if self.finished is None and self.steps_processed >= self._max_steps:
            self.finished = "timeout"

    # -- terminal summary -----------------------------------------------------

    def certificate(self, trace: tuple[TraceRow, ...] | None = None) -> Certificate:
        outcome = "stopped" if self.finished == "stopped" else "timeout"
        delay = None
        if self.stop_step is not None and self.crossing_step is not None:
            delay = self.stop_step - self.crossing_step
        return Certificate(
            outcome=outcome,
            delta_total=self.config.delta,
            stop_step=self.stop_step,
            crossing_step=self.crossing_step,
            gate_delay_tokens=delay,
            segments_used=self.budget.segment,
            reset_times=self.budget.reset_times,
            steps_processed=self.steps_processed,
            final_log_mixture=self._log_mix,
            total_lift=self.cum_lift,
            config_digest=self.config.digest(),
            trace=trace,
        )


def run(
    records: Iterable[TokenRecord],
    config: EngineConfig,
    collect_trace: bool = False,
) -> Certificate:
    """Fold a whole stream through a fresh controller.

    Consumes at most config.max_steps records. An empty stream yields
    a timeout certificate at step zero.
    """
    ctl = StreamController(config)
    rows: list[TraceRow] | None = [] if collect_trace else None
    it: Iterator[TokenRecord] = iter(records)
    for record in it:
        verdict = ctl.step(record)
        if rows is not None:
            rows.append(
                TraceRow(
                    t=verdict.t,
                    kind=verdict.kind,
                    x=verdict.x,
                    cum_lift=ctl.cum_lift,
                    log_mixture=verdict.log_mixture,
                    mu_hat=verdict.mu_hat,
                    v_hat=verdict.v_hat,
                    segment=verdict.segment,
                )
            )
        if ctl.finished is not None:
            break
    if ctl.finished is None:
        ctl.finished = "timeout"  # stream exhausted below max_steps
    return ctl.certificate(trace=tuple(rows) if rows is not None else None)
