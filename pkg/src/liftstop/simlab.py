"""Synthetic streams and Monte Carlo validity checks.

Streams are defined by a target increment process: per step the
pre-clip target is mean_t + centered noise, clamped into [0, B]. The
generator then back-solves a (full_prob, skeleton_prob) pair whose
log-ratio reproduces the target, so the whole engine path from raw
records onward is exercised, not just the arithmetic core.

Per-stream randomness derives from the master seed through numpy's
SeedSequence spawn keys, SeedSequence(seed, spawn_key=(i,)), so
stream i is identical no matter how many streams run or in what
order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from .controller import Certificate, EngineConfig, run
from .lift import TokenRecord

__all__ = [
    "SpecError",
    "ClippedGaussian",
    "BetaScaled",
    "TwoPoint",
    "EntropySpec",
    "StreamSpec",
    "generate_stream",
    "CalibrationReport",
    "monte_carlo_risk",
    "SweepCell",
    "sensitivity_sweep",
    "clopper_pearson",
]


class SpecError(ValueError):
    """Stream spec is internally inconsistent or infeasible."""


# ---------------------------------------------------------------------------
# noise families (all centered before the mean shift)


@dataclass(frozen=True)
class ClippedGaussian:
    sigma: float = 0.2
    kind: str = "clipped_gaussian"


@dataclass(frozen=True)
class BetaScaled:
    a: float = 2.0
    b: float = 5.0
    kind: str = "beta_scaled"


@dataclass(frozen=True)
class TwoPoint:
    """Emit hi with probability p, else lo, recentered to the target mean."""

    p: float = 0.5
    hi: float = 0.0
    lo: float = 0.0
    kind: str = "two_point"

    @property
    def nominal_mean(self) -> float:
        return self.p * self.hi + (1.0 - self.p) * self.lo


Noise = ClippedGaussian | BetaScaled | TwoPoint


@dataclass(frozen=True)
class EntropySpec:
    """Synthetic full-model entropy coupled to the increment.

    H_t = max(0, base - slope * x_t + noise * Z_t), which yields the
    negative lift/entropy correlation the skip rule and diagnostics
    assume, with strength set by slope against noise.
    """

    base: float = 2.5
    slope: float = 0.5
    noise: float = 0.3


@dataclass(frozen=True)
class StreamSpec:
    """Recipe for one family of synthetic streams."""

    length: int = 150
    base_mean: float = 0.0
    noise: Noise = field(default_factory=ClippedGaussian)
    # (step, new_mean) jumps, applied from that 1-based step onward
    drift: tuple[tuple[int, float], ...] = ()
    entropy: EntropySpec | None = None
    boundary_every: int = 0
    verifier_pass_rate: float | None = None
    clip_bound: float = 8.0
    seed: int = 0

    def validate(self) -> None:
        b = self.clip_bound
        if self.length < 0:
            raise SpecError(f"length must be >= 0, got {self.length}")
        if not (b > 0 and math.isfinite(b)):
            raise SpecError(f"clip_bound must be finite and > 0, got {b}")
        if not (0.0 <= self.base_mean <= b):
            raise SpecError(f"base_mean {self.base_mean} outside [0, {b}]")
        last_step = 0
        for step, mean in self.drift:
            if step <= last_step:
                raise SpecError("drift schedule steps must be increasing and >= 1")
            if not (0.0 <= mean <= b):
                raise SpecError(f"drift mean {mean} outside [0, {b}]")
            last_step = step
        if isinstance(self.noise, TwoPoint):
            if not (0.0 <= self.noise.p <= 1.0):
                raise SpecError(f"two-point p must be in [0, 1], got {self.noise.p}")
            # recentred support must stay at or below the clip bound for
            # every mean the schedule can reach, else the target is infeasible
            top = max(self.noise.hi, self.noise.lo) - self.noise.nominal_mean
            for mean in self._all_means():
                if mean + top > b + 1e-12:
                    raise SpecError(
                        f"two-point target {mean + top:.6g} exceeds clip bound {b}"
                    )
        elif isinstance(self.noise, ClippedGaussian):
            if not (self.noise.sigma >= 0):
                raise SpecError(f"sigma must be >= 0, got {self.noise.sigma}")
        elif isinstance(self.noise, BetaScaled):
            if not (self.noise.a > 0 and self.noise.b > 0):
                raise SpecError("beta shape parameters must be > 0")
        else:
            raise SpecError(f"unknown noise family {self.noise!r}")
        if self.boundary_every < 0:
            raise SpecError("boundary_every must be >= 0")
        if self.verifier_pass_rate is not None and not (
            0.0 <= self.verifier_pass_rate <= 1.0
        ):
            raise SpecError("verifier_pass_rate must be in [0, 1]")
        if self.entropy is not None and self.entropy.noise < 0:
            raise SpecError("entropy noise must be >= 0")

    def _all_means(self) -> list[float]:
        return [self.base_mean] + [m for _, m in self.drift]

    def mean_schedule(self) -> np.ndarray:
        """Per-step pre-clip target mean, 0-indexed over length steps."""
        means = np.full(self.length, self.base_mean)
        for step, mean in self.drift:
            if step <= self.length:
                means[step - 1 :] = mean
        return means

    def true_mean(self) -> float:
        """Exact stationary post-clip mean, defined for driftless specs.

        Used as the oracle centering value; for the gaussian family the
        two-sided clipping correction is evaluated in closed form.
        """
        if self.drift:
            raise SpecError("true_mean is defined for stationary specs only")
        m, b = self.base_mean, self.clip_bound
        n = self.noise
        if isinstance(n, TwoPoint):
            c = n.nominal_mean
            vhi = min(max(m + (n.hi - c), 0.0), b)
            vlo = min(max(m + (n.lo - c), 0.0), b)
            return n.p * vhi + (1.0 - n.p) * vlo
        if isinstance(n, ClippedGaussian):
            if n.sigma == 0.0:
                return min(max(m, 0.0), b)
            from scipy.stats import norm

            a = (0.0 - m) / n.sigma
            z = (b - m) / n.sigma
            return float(
                m * (norm.cdf(z) - norm.cdf(a))
                + n.sigma * (norm.pdf(a) - norm.pdf(z))
                + b * (1.0 - norm.cdf(z))
            )
        # beta family: integrate the clipped, recentered density
        from scipy.integrate import quad
        from scipy.stats import beta as beta_dist

        center = self.clip_bound * n.a / (n.a + n.b)

        def integrand(w: float) -> float:
            val = m + (self.clip_bound * w - center)
            return min(max(val, 0.0), b) * beta_dist.pdf(w, n.a, n.b)

        return float(quad(integrand, 0.0, 1.0, limit=200)[0])

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _draw_noise(spec: StreamSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.noise
    if isinstance(n, ClippedGaussian):
        return n.sigma * rng.standard_normal(spec.length)
    if isinstance(n, BetaScaled):
        w = rng.beta(n.a, n.b, spec.length)
        return spec.clip_bound * (w - n.a / (n.a + n.b))
    hits = rng.random(spec.length) < n.p
    vals = np.where(hits, n.hi, n.lo)
    return vals - n.nominal_mean


def generate_stream(spec: StreamSpec, stream_index: int = 0) -> list[TokenRecord]:
    """Materialize one deterministic stream of TokenRecords.

    Draw order is fixed (increments, probability anchors, entropy
    noise, verifier draws) so outputs are stable per (seed, index).
    """
    spec.validate()
    ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(stream_index,))
    rng = np.random.default_rng(ss)

    x = spec.mean_schedule() + _draw_noise(spec, rng)
    np.clip(x, 0.0, spec.clip_bound, out=x)

    # back-solve probabilities: p = u, s = u * exp(-x) reproduces x exactly
    # up to rounding, and a zero target reproduces exactly zero
    u = 0.25 + 0.7 * rng.random(spec.length)
    p = u
    s = u * np.exp(-x)

    if spec.entropy is not None:
        e = spec.entropy
        h = np.maximum(0.0, e.base - e.slope * x + e.noise * rng.standard_normal(spec.length))
    else:
        h = None

    if spec.verifier_pass_rate is not None:
        passing = rng.random(spec.length) < spec.verifier_pass_rate
        v = np.where(
            passing,
            0.7 + 0.3 * rng.random(spec.length),
            0.7 * rng.random(spec.length),
        )
    else:
        v = None

    every = spec.boundary_every
    # tolist() converts to Python floats in one pass, which is much
    # cheaper than 150 scalar float() casts when this runs 20k times
    p_list = p.tolist()
    s_list = s.tolist()
    h_list = h.tolist() if h is not None else None
    v_list = v.tolist() if v is not None else None
    records = []
    append = records.append
    for i in range(spec.length):
        t = i + 1
        append(
            TokenRecord(
                index=t,
                full_prob=p_list[i],
                skeleton_prob=s_list[i],
                entropy=h_list[i] if h_list is not None else None,
                is_boundary=bool(every) and t % every == 0,
                verifier_score=v_list[i] if v_list is not None else None,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Monte Carlo calibration


def clopper_pearson(k: int, n: int, coverage: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for k successes out of n."""
    if not (0 <= k <= n) or n <= 0:
        raise SpecError(f"need 0 <= k <= n with n > 0, got k={k}, n={n}")
    from scipy.stats import beta as beta_dist

    tail = (1.0 - coverage) / 2.0
    lo = 0.0 if k == 0 else float(beta_dist.ppf(tail, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1.0 - tail, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class CalibrationReport:
    """Crossing-rate curve over a family of independent streams.

    risk_curve[t-1] is the fraction of streams whose first threshold
    crossing happened at or before step t. ci bands are per-step
    Clopper-Pearson 95% intervals.
    """

    n_streams: int
    length: int
    risk_curve: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    final_rate: float
    final_ci_low: float
    final_ci_high: float
    mean_stop: float
    crossed: int
    config_digest: str
    spec_digest: str


def _run_streams(
    spec: StreamSpec, config: EngineConfig, n_streams: int
) -> list[Certificate]:
    certs = []
    for i in range(n_streams):
        records = generate_stream(spec, i)
        certs.append(run(records, config))
    return certs


def monte_carlo_risk(
    spec: StreamSpec, config: EngineConfig, n_streams: int
) -> CalibrationReport:
    """Empirical crossing-rate curve of the full controller.

    Runs the real per-record controller on n_streams independent
    streams; no shortcut re-implementation of the update rule is
    involved, so a regression anywhere in the engine shows up here.
    """
    if n_streams < 1:
        raise SpecError(f"n_streams must be >= 1, got {n_streams}")
    config.validate()
    spec.validate()
    horizon = min(spec.length, config.max_steps)
    certs = _run_streams(spec, config, n_streams)

    crossings = np.array(
        [c.crossing_step for c in certs if c.crossing_step is not None], dtype=int
    )
    per_step = np.bincount(crossings, minlength=horizon + 1)[1 : horizon + 1]
    counts = np.cumsum(per_step)
    curve = counts / n_streams

    from scipy.stats import beta as beta_dist

    k = counts.astype(float)
    n = float(n_streams)
    with np.errstate(invalid="ignore"):
        lo = np.where(k == 0, 0.0, beta_dist.ppf(0.025, k, n - k + 1))
        hi = np.where(k == n, 1.0, beta_dist.ppf(0.975, k + 1, n - k))

    stops = [c.stop_step if c.stop_step is not None else c.steps_processed for c in certs]
    final_k = int(counts[-1]) if horizon > 0 else 0
    final_lo, final_hi = clopper_pearson(final_k, n_streams)
    return CalibrationReport(
        n_streams=n_streams,
        length=horizon,
        risk_curve=tuple(float(r) for r in curve),
        ci_low=tuple(float(v) for v in lo),
        ci_high=tuple(float(v) for v in hi),
        final_rate=final_k / n_streams,
        final_ci_low=final_lo,
        final_ci_high=final_hi,
        mean_stop=float(np.mean(stops)) if stops else 0.0,
        crossed=final_k,
        config_digest=config.digest(),
        spec_digest=spec.digest(),
    )


@dataclass(frozen=True)
class SweepCell:
    v_factor: float
    eta_factor: float
    risk: float
    mean_stop: float


def sensitivity_sweep(
    spec: StreamSpec,
    config: EngineConfig,
    grid: Iterable[tuple[float, float]],
    n_streams: int,
) -> tuple[SweepCell, ...]:
    """One monte_carlo_risk run per inflation pair on shared streams.

    Because every cell replays the identical streams, raising the
    factors can only shrink the crossing set, which makes the
    conservatism ordering a per-seed fact rather than a statistical
    one.
    """
    cells = []
    for v_factor, eta_factor in grid:
        cfg = replace(config, v_factor=v_factor, eta_factor=eta_factor)
        report = monte_carlo_risk(spec, cfg, n_streams)
        cells.append(
            SweepCell(
                v_factor=v_factor,
                eta_factor=eta_factor,
                risk=report.final_rate,
                mean_stop=report.mean_stop,
            )
        )
    return tuple(cells)
