"""Online policy state machines for budget-constrained uniform sampling.

Both policies keep a running guess of the unknown risk-time count,
initialized to a log-uniform draw alpha in [b, b*e] and multiplied by e at
each stage transition, so the emitted probabilities are stage-wise constant
and non-increasing. Stage boundaries come from randomized rounding of the
guess, drawn once per stage and cached; set ``resample_boundary=True`` to get
the literal variant that redraws the rounding at every arrival (kept for
comparison, the cached form is what the feasibility analysis assumes).

The interval-augmented policy additionally receives a bracket [L, U] for the
count and dispatches on how U compares to b*e and b*e^2 and on the bracket
width; wide mid-range brackets fall back to the non-augmented mid-range
machinery and ignore the bracket entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

from .core import (
    E,
    PredictionInterval,
    ProbabilityAssignment,
    ProblemSpec,
    RngStream,
    randomized_round,
    sample_alpha,
)


class Regime(Enum):
    """Which pricing rule a policy instance runs under."""

    SHORT = "short"  # horizon at most b*e: prices capped by the horizon
    MID = "mid"  # horizon in (b*e, b*e^2]
    LONG = "long"  # horizon beyond b*e^2: working budget decays per stage
    NEAR = "near"  # bracket top at most b*e, or narrow bracket below b*e^2
    FAR = "far"  # bracket top beyond b*e^2, width at most b*(e+1)
    WIDE = "wide"  # bracket top beyond b*e^2, wider bracket: offset + decay


_OFFSET_REGIMES = frozenset({Regime.NEAR, Regime.FAR, Regime.WIDE})


@dataclass
class PolicyState:
    """Mutable online state of one policy over one decision period.

    ``tilde_tau`` equals alpha * e**(stage_j - 1) at all times;
    ``stage_boundary`` caches the randomized rounding of the current guess
    (plus the bracket offset L where the regime uses one). ``working_budget``
    starts at b and only decays in the LONG and WIDE regimes.
    """

    regime: Regime
    alpha: float
    tilde_tau: float
    stage_j: int
    working_budget: float
    stage_boundary: int
    horizon_T: int
    budget_b: float
    rng: RngStream
    interval: PredictionInterval | None = None
    next_i: int = 1
    resample_boundary: bool = False

    @property
    def offset(self) -> int:
        if self.regime in _OFFSET_REGIMES:
            assert self.interval is not None
            return self.interval.lower_L
        return 0


def randomized_init(
    spec: ProblemSpec, rng: RngStream, resample_boundary: bool = False
) -> PolicyState:
    """Start a non-augmented policy: draw alpha, pick the horizon regime."""
    b = spec.budget_b
    alpha = sample_alpha(b, rng)
    if spec.horizon_T <= b * E:
        regime = Regime.SHORT
    elif spec.horizon_T <= b * E * E:
        regime = Regime.MID
    else:
        regime = Regime.LONG
    return PolicyState(
        regime=regime,
        alpha=alpha,
        tilde_tau=alpha,
        stage_j=1,
        working_budget=b,
        stage_boundary=randomized_round(alpha, rng),
        horizon_T=spec.horizon_T,
        budget_b=b,
        rng=rng,
        resample_boundary=resample_boundary,
    )


def augmented_init(
    spec: ProblemSpec,
    interval: PredictionInterval,
    rng: RngStream,
    resample_boundary: bool = False,
) -> PolicyState:
    """Start an interval-augmented policy: draw alpha, dispatch on [L, U]."""
    b = spec.budget_b
    L, U = interval.lower_L, interval.upper_U
    if U > spec.horizon_T:
        raise ValueError(f"upper_U {U} exceeds horizon_T {spec.horizon_T}")
    if U < b:
        raise ValueError(
            f"upper_U {U} below budget {b}: probabilities would exceed 1"
        )
    if U <= b * E:
        regime = Regime.NEAR
    elif U <= b * E * E:
        regime = Regime.NEAR if U - L <= b * (E - 1.0) else Regime.MID
    else:
        regime = Regime.FAR if U - L <= b * (E + 1.0) else Regime.WIDE
    offset = L if regime in _OFFSET_REGIMES else 0
    alpha = sample_alpha(b, rng)
    return PolicyState(
        regime=regime,
        alpha=alpha,
        tilde_tau=alpha,
        stage_j=1,
        working_budget=b,
        stage_boundary=randomized_round(alpha, rng) + offset,
        horizon_T=spec.horizon_T,
        budget_b=b,
        rng=rng,
        interval=interval,
        resample_boundary=resample_boundary,
    )


def _advance_stage(state: PolicyState) -> None:
    state.stage_j += 1
    if state.regime is Regime.WIDE:
        # Budget update uses the pre-scale guess, then the guess scales.
        assert state.interval is not None
        L = state.interval.lower_L
        tt = state.tilde_tau
        if state.stage_j == 2:
            state.working_budget *= 1.0 - (tt + L - state.budget_b) / (
                tt * (E - 1.0) + L
            )
        else:
            state.working_budget *= 1.0 - 1.0 / E
        state.tilde_tau *= E
        return
    state.tilde_tau *= E
    if state.regime is Regime.LONG and state.stage_j >= 3:
        state.working_budget *= 1.0 - 1.0 / E


def _emission(state: PolicyState) -> float:
    b = state.budget_b
    tt = state.tilde_tau
    regime = state.regime
    if regime is Regime.SHORT:
        return b / min(state.horizon_T, tt * (E - 1.0))
    if regime is Regime.MID:
        if state.stage_j <= 2:
            return b / (tt * (E - 1.0))
        return b / (tt * E)
    if regime is Regime.LONG:
        return state.working_budget / (tt * E)
    assert state.interval is not None
    L = state.interval.lower_L
    U = state.interval.upper_U
    if regime is Regime.NEAR:
        return b / min(U, tt + L)
    if regime is Regime.FAR:
        return b / min(U, tt * E + L)
    # WIDE
    if state.stage_j == 1:
        return state.working_budget / (tt * (E - 1.0) + L)
    return state.working_budget / (tt * E)


def _step(state: PolicyState, i: int) -> float:
    if i != state.next_i:
        raise ValueError(
            f"out-of-order arrival: expected i={state.next_i}, got i={i}"
        )
    if state.resample_boundary:
        boundary = randomized_round(state.tilde_tau, state.rng) + state.offset
        state.stage_boundary = boundary
    else:
        boundary = state.stage_boundary
    if i > boundary:
        _advance_stage(state)
        if not state.resample_boundary:
            state.stage_boundary = (
                randomized_round(state.tilde_tau, state.rng) + state.offset
            )
    state.next_i += 1
    return _emission(state)


def randomized_next(state: PolicyState, i: int) -> float:
    """Probability for arrival i under the non-augmented policy."""
    return _step(state, i)


def augmented_next(state: PolicyState, i: int) -> float:
    """Probability for arrival i under the interval-augmented policy."""
    return _step(state, i)


class OnlinePolicy(Protocol):
    """Anything that prices arrivals 1, 2, ... sequentially."""

    def next_probability(self, i: int) -> float: ...


class RandomizedPolicy:
    """Stagewise guess-doubling sampler without prediction information."""

    def __init__(
        self, spec: ProblemSpec, rng: RngStream, resample_boundary: bool = False
    ):
        self.spec = spec
        self.state = randomized_init(spec, rng, resample_boundary)

    def next_probability(self, i: int) -> float:
        return randomized_next(self.state, i)


class IntervalPolicy:
    """Sampler augmented with a prediction bracket for the risk-time count."""

    def __init__(
        self,
        spec: ProblemSpec,
        interval: PredictionInterval,
        rng: RngStream,
        resample_boundary: bool = False,
    ):
        self.spec = spec
        self.interval = interval
        self.state = augmented_init(spec, interval, rng, resample_boundary)

    def next_probability(self, i: int) -> float:
        return augmented_next(self.state, i)


def run_policy(policy: OnlinePolicy, tau_star: int) -> ProbabilityAssignment:
    """Drive a policy over arrivals 1..tau_star and collect its sequence."""
    if tau_star < 1:
        raise ValueError(f"tau_star must be >= 1, got {tau_star}")
    return ProbabilityAssignment(
        tuple(policy.next_probability(i) for i in range(1, tau_star + 1))
    )


def run_multi_level(
    levels: Sequence[tuple[ProblemSpec, PredictionInterval | None]],
    taus: Sequence[int],
    rng: RngStream,
) -> list[ProbabilityAssignment]:
    """Run one independent policy per risk level.

    Level k uses substream rng.derive(k), so per-level output is identical to
    running that level alone with the same substream.
    """
    if len(levels) != len(taus):
        raise ValueError(
            f"got {len(levels)} levels but {len(taus)} risk-time counts"
        )
    if not levels:
        raise ValueError("need at least one level")
    out = []
    for k, ((spec, interval), tau) in enumerate(zip(levels, taus)):
        sub = rng.derive(k)
        if interval is None:
            policy: OnlinePolicy = RandomizedPolicy(spec, sub)
        else:
            policy = IntervalPolicy(spec, interval, sub)
        out.append(run_policy(policy, tau))
    return out
