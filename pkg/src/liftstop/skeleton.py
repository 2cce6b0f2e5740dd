"""Skeleton construction and health diagnostics.

A skeleton is a deliberately weakened next-token distribution used as
the denominator of the lift ratio. Two reference constructions
operate directly on distributions:

    temperature   softmax(logits / tau) with tau >= 1
    flatten       (1 - gamma) * p + gamma / V

diagnose() scores a paired stream of (full, skeleton) distributions
against three health checks: the mean KL divergence from full to
skeleton must land in a target band, per-token lift must correlate
negatively with full-model entropy, and the clip bound must rarely
saturate. Failures map to remediation hints rather than a bare false.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lift import LiftConfig, MalformedRecordError, TokenRecord, compute_lift

__all__ = [
    "DistStep",
    "DiagnosticsConfig",
    "DiagnosticsReport",
    "validate_prob_vector",
    "apply_temperature",
    "apply_flatten",
    "kl_divergence",
    "dist_entropy",
    "diagnose",
]

_SUM_TOL = 1e-9


def validate_prob_vector(values, name: str = "prob_vector") -> np.ndarray:
    """Coerce to a 1-D float array and enforce the simplex constraints.

    Entries must be finite and nonnegative and sum to 1 within 1e-9.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise MalformedRecordError(name, "must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise MalformedRecordError(name, "entries must be finite")
    if np.any(arr < 0):
        raise MalformedRecordError(name, "entries must be >= 0")
    total = float(arr.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise MalformedRecordError(name, f"entries must sum to 1, got {total!r}")
    return arr


def apply_temperature(logits, tau: float) -> np.ndarray:
    """Temperature-softened softmax, stabilized by max subtraction.

    Parameters
    ----------
    logits : array_like
        Finite unnormalized scores.
    tau : float
        Softening temperature, must be >= 1 so the output is never
        sharper than the source distribution.

    Returns
    -------
    numpy.ndarray
        A probability vector of the same length.
    """
    if not (math.isfinite(tau) and tau >= 1.0):
        raise MalformedRecordError("tau", f"must be finite and >= 1, got {tau!r}")
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise MalformedRecordError("logits", "must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise MalformedRecordError("logits", "entries must be finite")
    z = arr / tau
    z -= z.max()
    ez = np.exp(z)
    return ez / ez.sum()


def apply_flatten(probs, gamma: float) -> np.ndarray:
    """Mix a distribution with the uniform one in probability space.

    Returns (1 - gamma) * p + gamma / V for gamma in [0, 1]. gamma=0
    returns the input unchanged, gamma=1 the uniform distribution.
    """
    if not (0.0 <= gamma <= 1.0):
        raise MalformedRecordError("gamma", f"must be in [0, 1], got {gamma!r}")
    p = validate_prob_vector(probs, "probs")
    return (1.0 - gamma) * p + gamma / p.size


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats with the 0 * log(0/q) = 0 convention.

    Returns math.inf when p puts mass where q has none. Both inputs
    must be valid probability vectors of equal length.
    """
    pv = validate_prob_vector(p, "p")
    qv = validate_prob_vector(q, "q")
    if pv.size != qv.size:
        raise MalformedRecordError("q", "length mismatch with p")
    mask = pv > 0
    if np.any(qv[mask] == 0):
        return math.inf
    val = float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])))
    # tiny negative values are pure rounding; the divergence is >= 0
    return max(val, 0.0)


def dist_entropy(probs) -> float:
    """Shannon entropy in nats with the 0 * log 0 = 0 convention."""
    p = validate_prob_vector(probs, "probs")
    mask = p > 0
    return float(-np.sum(p[mask] * np.log(p[mask])))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class DistStep:
    """One step of a paired-distribution stream.

    full and skeleton are same-length probability vectors, token is
    the index of the emitted symbol, entropy overrides the full-model
    entropy when the producer had a better estimate than recomputing
    it from the vector.
    """

    full: np.ndarray
    skeleton: np.ndarray
    token: int
    entropy: float | None = None


@dataclass(frozen=True)
class DiagnosticsConfig:
    kl_low: float = 2.0
    kl_high: float = 10.0
    rho_max: float = -0.5
    saturation_max: float = 0.05
    min_steps: int = 30
    correlation: str = "pearson"  # or "spearman"
    lift: LiftConfig = field(default_factory=LiftConfig)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Aggregate health report over a paired stream.

    accepted is true only when every check passed on at least
    min_steps steps. rejection_reasons holds remediation hints:
    "strengthen-S" (separation too small), "weaken-S" (separation too
    large), "switch-families" (lift does not anticipate entropy),
    "raise-clip-bound" (clip saturates), "insufficient-data",
    "rho-undefined".
    """

    n_steps: int
    kl_full_skeleton: float
    kl_skeleton_full: float
    rho: float | None
    saturation_rate: float
    mean_lift: float
    accepted: bool
    rejection_reasons: tuple[str, ...]


def _correlation(xs: np.ndarray, hs: np.ndarray, method: str) -> float | None:
    if xs.std() == 0.0 or hs.std() == 0.0:
        return None
    if method == "spearman":
        from scipy.stats import spearmanr

        rho = spearmanr(xs, hs).statistic
        return None if not math.isfinite(rho) else float(rho)
    xc = xs - xs.mean()
    hc = hs - hs.mean()
    denom = math.sqrt(float(xc @ xc) * float(hc @ hc))
    if denom == 0.0:
        return None
    return float(xc @ hc) / denom


def diagnose(steps, cfg: DiagnosticsConfig | None = None) -> DiagnosticsReport:
    """Score a paired-distribution stream against the health checks.

    steps is an iterable of DistStep. Permutation invariant: every
    statistic is an unordered aggregate.
    """
    if cfg is None:
        cfg = DiagnosticsConfig()
    if cfg.correlation not in ("pearson", "spearman"):
        raise MalformedRecordError("correlation", f"unknown method {cfg.correlation!r}")

    kl_ps: list[float] = []
    kl_sp: list[float] = []
    lifts: list[float] = []
    entropies: list[float] = []
    saturated = 0
    for step in steps:
        full = validate_prob_vector(step.full, "full")
        skel = validate_prob_vector(step.skeleton, "skeleton")
        if full.size != skel.size:
            raise MalformedRecordError("skeleton", "length mismatch with full")
        if not (0 <= step.token < full.size):
            raise MalformedRecordError("token", f"index {step.token} out of range")
        kl_ps.append(kl_divergence(full, skel))
        kl_sp.append(kl_divergence(skel, full))
        inc = compute_lift(
            TokenRecord(
                index=len(lifts) + 1,
                full_prob=float(full[step.token]),
                skeleton_prob=float(skel[step.token]),
            ),
            cfg.lift,
        )
        lifts.append(inc.value)
        if inc.was_clipped_high or inc.value >= cfg.lift.clip_bound:
            saturated += 1
        entropies.append(
            float(step.entropy) if step.entropy is not None else dist_entropy(full)
        )

    n = len(lifts)
    if n == 0:
        return DiagnosticsReport(
            n_steps=0,
            kl_full_skeleton=math.nan,
            kl_skeleton_full=math.nan,
            rho=None,
            saturation_rate=math.nan,
            mean_lift=math.nan,
            accepted=False,
            rejection_reasons=("insufficient-data",),
        )

    xs = np.asarray(lifts)
    hs = np.asarray(entropies)
    mean_kl_ps = math.inf if math.inf in kl_ps else float(np.mean(kl_ps))
    mean_kl_sp = math.inf if math.inf in kl_sp else float(np.mean(kl_sp))
    sat_rate = saturated / n
    rho = _correlation(xs, hs, cfg.correlation)

    reasons: list[str] = []
    if n < cfg.min_steps:
        reasons.append("insufficient-data")
    # the band check reads the full-to-skeleton direction only
    if mean_kl_ps < cfg.kl_low:
        reasons.append("strengthen-S")
    elif mean_kl_ps > cfg.kl_high:
        reasons.append("weaken-S")
    if rho is None:
        reasons.append("rho-undefined")
    elif not (rho < cfg.rho_max):
        reasons.append("switch-families")
    if not (sat_rate < cfg.saturation_max):
        reasons.append("raise-clip-bound")

    return DiagnosticsReport(
        n_steps=n,
        kl_full_skeleton=mean_kl_ps,
        kl_skeleton_full=mean_kl_sp,
        rho=rho,
        saturation_rate=sat_rate,
        mean_lift=float(xs.mean()),
        accepted=not reasons,
        rejection_reasons=tuple(reasons),
    )
