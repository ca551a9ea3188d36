import math

import pytest

from ous.algorithms import run_policy
from ous.baselines import ConstantPolicy, SeqRTSConfig, SeqRTSPolicy, constant_policy
from ous.core import (
    PredictionInterval,
    ProblemSpec,
    RngStream,
    evaluate_objective,
    score_with_sentinel,
)


class TestConstantPolicy:
    def test_benchmark_rates(self):
        assert constant_policy(3.0 / 8.0).next_probability(1) == 0.375
        assert constant_policy(3.0 / 22.0).next_probability(5) == pytest.approx(
            3.0 / 22.0
        )

    def test_full_horizon_attains_budget(self):
        spec = ProblemSpec(8, 3.0)
        seq = run_policy(constant_policy(3.0 / 8.0), 8)
        rep = evaluate_objective(seq, 8, spec)
        assert rep.sol == pytest.approx(3.0, abs=1e-12)
        assert rep.competitive_ratio == pytest.approx(1.0, abs=1e-12)
        assert rep.penalty == 0.0

    def test_sum_scales_with_tau(self):
        seq = run_policy(constant_policy(0.3), 5)
        assert tuple(seq) == (0.3,) * 5

    @pytest.mark.parametrize("rate", [0.0, 1.0, -0.2, 1.5])
    def test_invalid_rate(self, rate):
        with pytest.raises(ValueError):
            constant_policy(rate)


class TestSeqRTS:
    def test_perfect_estimate(self):
        spec = ProblemSpec(144, 1.5)
        cfg = SeqRTSConfig(PredictionInterval(10, 10))
        policy = SeqRTSPolicy(spec, cfg, RngStream(1))
        seq = run_policy(policy, 10)
        assert tuple(seq) == (0.15,) * 10
        assert evaluate_objective(seq, 10, spec).sol == pytest.approx(1.5, abs=1e-12)

    def test_depleted_estimate_scores_with_penalty(self):
        spec = ProblemSpec(144, 1.5)
        cfg = SeqRTSConfig(PredictionInterval(5, 5), min_probability=1e-6)
        policy = SeqRTSPolicy(spec, cfg, RngStream(1))
        probs = [policy.next_probability(i) for i in range(1, 11)]
        assert probs == [0.3] * 5 + [1e-6] * 5
        rep = score_with_sentinel(probs, 10, spec)
        assert rep.penalty == pytest.approx((1 / 10) * math.log(0.3 / 1e-6), abs=1e-12)
        assert rep.sol == pytest.approx(
            1.5 + 5e-6 - (1 / 10) * math.log(0.3 / 1e-6), abs=1e-12
        )

    def test_zero_floor_gives_sentinel(self):
        spec = ProblemSpec(144, 1.5)
        cfg = SeqRTSConfig(PredictionInterval(5, 5), min_probability=0.0)
        policy = SeqRTSPolicy(spec, cfg, RngStream(1))
        probs = [policy.next_probability(i) for i in range(1, 11)]
        rep = score_with_sentinel(probs, 10, spec)
        assert rep.sol == -math.inf
        assert rep.entropy_change == math.inf

    def test_estimate_drawn_once_per_period(self):
        spec = ProblemSpec(144, 1.5)
        cfg = SeqRTSConfig(PredictionInterval(4, 20))
        policy = SeqRTSPolicy(spec, cfg, RngStream(9))
        assert 4 <= policy.tau_hat <= 20
        first = [policy.next_probability(i) for i in range(1, policy.tau_hat + 1)]
        assert len(set(first)) == 1

    def test_sum_bounded_by_budget_plus_floor(self):
        spec = ProblemSpec(144, 1.5)
        for seed in range(50):
            cfg = SeqRTSConfig(PredictionInterval(2, 40), min_probability=1e-6)
            policy = SeqRTSPolicy(spec, cfg, RngStream(seed))
            tau = 60
            probs = [policy.next_probability(i) for i in range(1, tau + 1)]
            assert all(0.0 < p < 1.0 for p in probs)
            assert math.fsum(probs) <= 1.5 + 1e-6 * tau + 1e-12

    def test_entropy_floor_when_depleted(self):
        spec = ProblemSpec(144, 1.5)
        eps = 1e-6
        for seed in range(30):
            cfg = SeqRTSConfig(PredictionInterval(2, 30), min_probability=eps)
            policy = SeqRTSPolicy(spec, cfg, RngStream(seed))
            tau = 40
            probs = [policy.next_probability(i) for i in range(1, tau + 1)]
            rep = score_with_sentinel(probs, tau, spec)
            if policy.tau_hat < tau:
                floor = (1 / tau) * math.log((1.5 / 30) / eps)
                assert rep.entropy_change >= floor - 1e-12

    def test_rejects_estimate_at_or_below_budget(self):
        spec = ProblemSpec(144, 3.0)
        with pytest.raises(ValueError):
            SeqRTSPolicy(spec, SeqRTSConfig(PredictionInterval(3, 10)), RngStream(0))

    def test_rejects_floor_at_or_above_rate(self):
        spec = ProblemSpec(144, 1.5)
        cfg = SeqRTSConfig(PredictionInterval(10, 15), min_probability=0.2)
        with pytest.raises(ValueError):
            SeqRTSPolicy(spec, cfg, RngStream(0))
