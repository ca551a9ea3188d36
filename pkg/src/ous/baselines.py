"""Comparison policies: constant rates and the point-estimate heuristic."""

from __future__ import annotations

from dataclasses import dataclass

from .core import PredictionInterval, ProblemSpec, RngStream


class ConstantPolicy:
    """Assigns the same probability to every arrival."""

    def __init__(self, rate: float):
        if not 0.0 < rate < 1.0:
            raise ValueError(f"rate must be in (0, 1), got {rate}")
        self.rate = rate

    def next_probability(self, i: int) -> float:
        return self.rate


def constant_policy(rate: float) -> ConstantPolicy:
    return ConstantPolicy(rate)


@dataclass(frozen=True)
class SeqRTSConfig:
    """Settings for the point-estimate heuristic.

    ``min_probability`` is what leftover risk times receive once the estimate
    is exhausted; 0 is allowed and makes the objective collapse to minus
    infinity under sentinel scoring.
    """

    interval: PredictionInterval
    min_probability: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_probability < 1.0:
            raise ValueError(
                f"min_probability must be in [0, 1), got {self.min_probability}"
            )


class SeqRTSPolicy:
    """Spends b/tau_hat against a point estimate tau_hat drawn from [L, U].

    The estimate is drawn once per decision period. Arrivals past the
    estimate get min_probability. The estimate must exceed the budget
    (L > b) so the constant phase stays below 1.
    """

    def __init__(self, spec: ProblemSpec, cfg: SeqRTSConfig, rng: RngStream):
        L, U = cfg.interval.lower_L, cfg.interval.upper_U
        if not L > spec.budget_b:
            raise ValueError(
                f"lower_L must exceed the budget ({L} <= {spec.budget_b})"
            )
        if cfg.min_probability >= spec.budget_b / U:
            raise ValueError(
                f"min_probability {cfg.min_probability} not below b/U = "
                f"{spec.budget_b / U}"
            )
        self.cfg = cfg
        self.tau_hat = rng.randint(L, U)
        self.rate = spec.budget_b / self.tau_hat

    def next_probability(self, i: int) -> float:
        if i <= self.tau_hat:
            return self.rate
        return self.cfg.min_probability


def seqrts_policy(
    spec: ProblemSpec, cfg: SeqRTSConfig, rng: RngStream
) -> SeqRTSPolicy:
    return SeqRTSPolicy(spec, cfg, rng)
