"""Per-token information lift.

The lift of a token is the log-ratio between the probability the full
model assigned to it and the probability a deliberately weakened
skeleton assigned to it, clamped to [0, clip_bound]:

    x = min(max(ln(p / s), 0), clip_bound)

A skeleton probability of exactly zero yields x = 0 by convention
rather than an infinite increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MalformedRecordError",
    "TokenRecord",
    "LiftConfig",
    "LiftIncrement",
    "compute_lift",
    "entropy_slope",
]


class MalformedRecordError(ValueError):
    """A token record carries an out-of-range or missing field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass
class TokenRecord:
    """One observed token of a stream. Treat instances as immutable.

    index is 1-based and must be strictly increasing within a stream.
    entropy is the full-model next-token entropy in nats when known;
    records without it simply disable the entropy-slope skip rule at
    the steps that would need it.
    """

    index: int
    full_prob: float
    skeleton_prob: float
    entropy: float | None = None
    is_boundary: bool = False
    verifier_score: float | None = None
    token_text: str | None = None


@dataclass(frozen=True)
class LiftConfig:
    """Bounds for the increment computation.

    clip_bound caps each increment in nats. increment_bound is the
    smaller envelope constant the e-process grid must respect; it is
    carried here so both knobs live in one place and cannot be
    conflated.
    """

    clip_bound: float = 8.0
    increment_bound: float = 0.18

    def validate(self) -> None:
        if not (self.clip_bound > 0 and math.isfinite(self.clip_bound)):
            raise MalformedRecordError("clip_bound", "must be finite and > 0")
        if not (self.increment_bound > 0 and math.isfinite(self.increment_bound)):
            raise MalformedRecordError("increment_bound", "must be finite and > 0")


@dataclass
class LiftIncrement:
    """A clipped increment plus flags recording what the clamp did.

    was_zeroed marks a strictly negative raw log-ratio or a zero
    skeleton probability. was_clipped_high marks a raw log-ratio
    strictly above the clip bound. was_skipped is set by the
    controller for increments it zeroed because of the skip rule,
    never by compute_lift.
    """

    value: float
    was_zeroed: bool = False
    was_clipped_high: bool = False
    was_skipped: bool = False


def compute_lift(record: TokenRecord, cfg: LiftConfig) -> LiftIncrement:
    """Clamp ln(p/s) into [0, clip_bound] for one record.

    Deterministic and pure. Raises MalformedRecordError when
    full_prob is outside (0, 1] or skeleton_prob outside [0, 1].
    """
    p = record.full_prob
    s = record.skeleton_prob
    if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 < p <= 1.0):
        raise MalformedRecordError("full_prob", f"must be in (0, 1], got {p!r}")
    if not (isinstance(s, (int, float)) and math.isfinite(s) and 0.0 <= s <= 1.0):
        raise MalformedRecordError("skeleton_prob", f"must be in [0, 1], got {s!r}")

    if s == 0.0:
        return LiftIncrement(0.0, was_zeroed=True)

    raw = math.log(p / s)
    if raw < 0.0:
        return LiftIncrement(0.0, was_zeroed=True)
    if raw > cfg.clip_bound:
        return LiftIncrement(cfg.clip_bound, was_clipped_high=True)
    return LiftIncrement(raw)


def entropy_slope(prev2_entropy: float, prev1_entropy: float) -> float:
    """Difference of the two most recent entropies, prev1 - prev2.

    A nonnegative slope means uncertainty is not falling, which is
    the condition the skip rule reacts to.
    """
    return prev1_entropy - prev2_entropy
