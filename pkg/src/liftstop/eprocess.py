"""Self-normalized e-processes over a grid of bet sizes.

Each grid point lambda_k carries a log e-value updated per step as

    log_m[k] += lambda_k * (x - mu_hat) - psi_k

where mu_hat is an exponential moving average of past increments and
psi_k is a variance penalty. Three penalty shapes are supported:

    gaussian    lambda^2 * (v_factor * v_hat) / 2
    bernstein   lambda^2 * (v_factor * v_hat + eta_factor * eta)
                    / (2 * (1 - increment_bound * lambda))
    hoeffding   lambda^2 * clip_bound^2 / 8

The uniform mixture over the grid is the tracked statistic; it is a
nonnegative supermartingale under the null whenever the penalty
dominates the centered moment generating function, which is what the
validity suite checks empirically.

State objects here are plain dataclasses updated by pure functions
that return new instances; treat them as immutable values. The update
runs once per token of every stream, so construction stays direct and
the per-kind penalty coefficients are precomputed on the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "GridBoundError",
    "NumericalOverflowError",
    "EstimatorState",
    "LambdaGrid",
    "EProcessState",
    "PENALTY_KINDS",
    "update_estimates",
    "build_grid",
    "new_eprocess",
    "update_eprocess",
    "mixture_log_value",
]

PENALTY_KINDS = ("gaussian", "bernstein", "hoeffding")

_INF = math.inf


class GridBoundError(ValueError):
    """Grid parameters violate 0 < lambda_min <= lambda_max < 1/increment_bound."""


class NumericalOverflowError(ArithmeticError):
    """An e-process log value became non-finite."""


@dataclass
class EstimatorState:
    """EMA mean and variance of the increment stream.

    v_factor and eta_factor are conservatism multipliers. They scale
    the estimate where it is consumed, in the exponent penalty, so the
    stored v_hat stays a plain moving average; folding v_factor into
    the stored recursion would compound it geometrically across steps.
    eta is an additive slack applied at every variance update.
    """

    mu_hat: float = 0.0
    v_hat: float = 0.0
    alpha: float = 0.2
    eta: float = 0.20
    v_factor: float = 1.3
    eta_factor: float = 1.5
    count: int = 0


def update_estimates(state: EstimatorState, x: float) -> EstimatorState:
    """Fold one increment into the EMA estimates.

    The variance update centers on the post-update mean:

        mu' = (1 - alpha) * mu + alpha * x
        v'  = (1 - alpha) * v + alpha * (x - mu')^2 + eta_factor * eta

    Returns a new state; the input is untouched.
    """
    a = state.alpha
    mu = (1.0 - a) * state.mu_hat + a * x
    d = x - mu
    return EstimatorState(
        mu_hat=mu,
        v_hat=(1.0 - a) * state.v_hat + a * d * d + state.eta_factor * state.eta,
        alpha=a,
        eta=state.eta,
        v_factor=state.v_factor,
        eta_factor=state.eta_factor,
        count=state.count + 1,
    )


@dataclass(frozen=True)
class LambdaGrid:
    """Geometrically spaced bet sizes."""

    values: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.values)


def build_grid(
    size: int = 12,
    lambda_min: float = 0.02,
    lambda_max: float = 0.6,
    increment_bound: float = 0.18,
) -> LambdaGrid:
    """Construct a geometric grid of bet sizes.

    Spacing is geometric: adjacent values share the ratio
    (lambda_max / lambda_min)^(1 / (size - 1)). A single-point grid
    requires lambda_min == lambda_max.

    Raises GridBoundError unless
    0 < lambda_min <= lambda_max < 1 / increment_bound.
    """
    if size < 1:
        raise GridBoundError(f"grid size must be >= 1, got {size}")
    if not (0.0 < lambda_min <= lambda_max):
        raise GridBoundError(
            f"need 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]"
        )
    if lambda_max >= 1.0 / increment_bound:
        raise GridBoundError(
            f"lambda_max {lambda_max} must stay below 1/increment_bound "
            f"= {1.0 / increment_bound:.6g}"
        )
    if size == 1:
        if lambda_min != lambda_max:
            raise GridBoundError("size-1 grid requires lambda_min == lambda_max")
        return LambdaGrid((lambda_min,))
    ratio = (lambda_max / lambda_min) ** (1.0 / (size - 1))
    vals = [lambda_min * ratio**k for k in range(size)]
    vals[-1] = lambda_max  # close the interval exactly despite rounding
    return LambdaGrid(tuple(vals))


def _penalty_coefficients(
    grid: LambdaGrid, penalty_kind: str, increment_bound: float
) -> tuple[float, ...]:
    if penalty_kind == "gaussian":
        return tuple(lam * lam * 0.5 for lam in grid.values)
    if penalty_kind == "bernstein":
        return tuple(
            lam * lam / (2.0 * (1.0 - increment_bound * lam)) for lam in grid.values
        )
    if penalty_kind == "hoeffding":
        return tuple(lam * lam * 0.125 for lam in grid.values)
    raise GridBoundError(f"unknown penalty kind {penalty_kind!r}")


@dataclass
class EProcessState:
    """Log e-values per grid point plus everything the update needs.

    pen_coef holds the per-lambda penalty coefficient for the chosen
    kind, so the per-step penalty is pen_coef[k] times a scalar scale
    derived from the estimator (or from the clip bound for the
    hoeffding kind).
    """

    grid: LambdaGrid
    penalty_kind: str
    estimator: EstimatorState
    clip_bound: float
    increment_bound: float
    log_m: tuple[float, ...]
    pen_coef: tuple[float, ...]


def new_eprocess(
    grid: LambdaGrid,
    penalty_kind: str = "gaussian",
    estimator: EstimatorState | None = None,
    clip_bound: float = 8.0,
    increment_bound: float = 0.18,
) -> EProcessState:
    """Fresh state with every e-value at 1 (log value 0)."""
    if estimator is None:
        estimator = EstimatorState()
    return EProcessState(
        grid=grid,
        penalty_kind=penalty_kind,
        estimator=estimator,
        clip_bound=clip_bound,
        increment_bound=increment_bound,
        log_m=(0.0,) * grid.size,
        pen_coef=_penalty_coefficients(grid, penalty_kind, increment_bound),
    )


def update_eprocess(
    state: EProcessState, x: float, estimator: EstimatorState | None = None
) -> EProcessState:
    """Advance every grid point by one centered, penalized increment.

    Centering and the variance penalty read the passed estimator, or
    state.estimator when none is given; the caller decides whether
    that estimator already folded in x (the default ordering) or is
    the previous step's (the strictly predictable ordering). The
    returned state carries the estimator that was used.

    Raises NumericalOverflowError if any updated log value is
    non-finite.
    """
    est = estimator if estimator is not None else state.estimator
    centered = x - est.mu_hat
    kind = state.penalty_kind
    if kind == "gaussian":
        scale = est.v_factor * est.v_hat
    elif kind == "bernstein":
        scale = est.v_factor * est.v_hat + est.eta_factor * est.eta
    else:  # hoeffding
        scale = state.clip_bound * state.clip_bound

    new = []
    append = new.append
    for lam, coef, m in zip(state.grid.values, state.pen_coef, state.log_m):
        v = m + lam * centered - coef * scale
        if not (-_INF < v < _INF):  # catches inf and nan in one compare pair
            raise NumericalOverflowError(
                f"non-finite log e-value after increment x={x!r}"
            )
        append(v)
    return EProcessState(
        grid=state.grid,
        penalty_kind=kind,
        estimator=est,
        clip_bound=state.clip_bound,
        increment_bound=state.increment_bound,
        log_m=tuple(new),
        pen_coef=state.pen_coef,
    )


def mixture_log_value(state: EProcessState) -> float:
    """Log of the uniform mixture of e-values.

    Computed as logsumexp(log_m) - ln(size) with max subtraction, so
    the exact lower bound max(log_m) - ln(size) holds for every state.
    """
    logs = state.log_m
    hi = max(logs)
    acc = 0.0
    exp = math.exp
    for m in logs:
        acc += exp(m - hi)
    # grouping the two logs first lets them cancel exactly when all
    # components are equal, so the mixture is then bitwise the max
    return hi + (math.log(acc) - math.log(len(logs)))
