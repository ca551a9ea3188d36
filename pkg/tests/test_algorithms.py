import math

import numpy as np
import pytest

from ous.algorithms import (
    IntervalPolicy,
    PolicyState,
    RandomizedPolicy,
    Regime,
    augmented_init,
    augmented_next,
    randomized_init,
    randomized_next,
    run_multi_level,
    run_policy,
)
from ous.core import E, PredictionInterval, ProblemSpec, RngStream


def make_state(regime, alpha, b, T, boundary, interval=None, seed=0):
    """State with a pinned guess, for deterministic stage traces."""
    return PolicyState(
        regime=regime,
        alpha=alpha,
        tilde_tau=alpha,
        stage_j=1,
        working_budget=b,
        stage_boundary=boundary,
        horizon_T=T,
        budget_b=b,
        rng=RngStream(seed),
        interval=interval,
    )


class TestRegimeDispatch:
    def test_randomized_regimes(self):
        rng = RngStream(0)
        assert randomized_init(ProblemSpec(8, 3.0), rng).regime is Regime.SHORT
        assert randomized_init(ProblemSpec(22, 3.0), rng).regime is Regime.MID
        assert randomized_init(ProblemSpec(100, 3.0), rng).regime is Regime.LONG

    def test_augmented_regimes(self):
        rng = RngStream(0)
        spec = ProblemSpec(144, 3.0)
        cases = [
            ((3, 8), Regime.NEAR),  # U <= be
            ((10, 14), Regime.NEAR),  # be < U <= be^2, width 4 <= b(e-1)
            ((2, 22), Regime.MID),  # width 20 > b(e-1): bracket ignored
            ((90, 100), Regime.FAR),  # U > be^2, width 10 <= b(e+1)
            ((20, 100), Regime.WIDE),  # U > be^2, width 80 > b(e+1)
        ]
        for (L, U), expected in cases:
            st = augmented_init(spec, PredictionInterval(L, U), rng)
            assert st.regime is expected, (L, U)

    def test_augmented_boundary_offsets(self):
        rng = RngStream(4)
        spec = ProblemSpec(144, 3.0)
        near = augmented_init(spec, PredictionInterval(10, 14), rng)
        assert near.stage_boundary >= 10 + math.floor(near.alpha)
        mid = augmented_init(spec, PredictionInterval(2, 22), rng)
        # the wide mid-range branch ignores the bracket: no +L offset
        assert mid.stage_boundary <= math.ceil(mid.alpha)

    def test_augmented_rejects_bad_intervals(self):
        rng = RngStream(0)
        spec = ProblemSpec(22, 3.0)
        with pytest.raises(ValueError):
            augmented_init(spec, PredictionInterval(2, 23), rng)  # U > T
        with pytest.raises(ValueError):
            augmented_init(spec, PredictionInterval(1, 2), rng)  # U < b


class TestGoldenTraces:
    def test_mid_range_stage_prices(self):
        # b=3, T=22, alpha=4: integral guess, so the first boundary is 4
        st = make_state(Regime.MID, 4.0, 3.0, 22, boundary=4, seed=101)
        probs = [randomized_next(st, i) for i in range(1, 21)]
        assert probs[:4] == [probs[0]] * 4
        assert probs[0] == pytest.approx(3.0 / (4.0 * (E - 1)), abs=1e-12)
        levels = sorted(set(probs), reverse=True)
        assert len(levels) == 3
        assert levels[1] == pytest.approx(3.0 / (4.0 * E * (E - 1)), abs=1e-12)
        assert levels[2] == pytest.approx(3.0 / (4.0 * E**3), abs=1e-12)

    def test_short_horizon_first_price(self):
        st = make_state(Regime.SHORT, 4.0, 3.0, 8, boundary=4)
        p = randomized_next(st, 1)
        assert p == pytest.approx(3.0 / min(8.0, 4.0 * (E - 1)), abs=1e-12)

    def test_long_horizon_budget_decay(self):
        # b=3, alpha=3: stages price at b/(3e), b/(3e^2), then the working
        # budget decays by (1 - 1/e) entering stage 3
        st = make_state(Regime.LONG, 3.0, 3.0, 100, boundary=3, seed=7)
        probs = [randomized_next(st, i) for i in range(1, 16)]
        assert probs[:3] == [probs[0]] * 3
        levels = sorted(set(probs), reverse=True)
        assert len(levels) == 3
        assert levels[0] == pytest.approx(1.0 / E, abs=1e-12)
        assert levels[1] == pytest.approx(1.0 / E**2, abs=1e-12)
        assert levels[2] == pytest.approx((1.0 - 1.0 / E) / E**3, abs=1e-12)

    def test_near_bracket_trace(self):
        # b=3, L=10, U=14, alpha=3.5 rounded up to 4: boundary 14
        iv = PredictionInterval(10, 14)
        st = make_state(Regime.NEAR, 3.5, 3.0, 144, boundary=14, interval=iv, seed=3)
        probs = [augmented_next(st, i) for i in range(1, 16)]
        assert probs[:14] == [pytest.approx(3.0 / 13.5, abs=1e-12)] * 14
        assert probs[14] == pytest.approx(3.0 / 14.0, abs=1e-12)
        assert st.tilde_tau == pytest.approx(3.5 * E, abs=1e-12)

    def test_wide_bracket_budget_update(self):
        # b=3, L=100, alpha=3: the first transition rescales the working
        # budget by 1 - (alpha + L - b) / (alpha(e-1) + L), pre-scale guess
        iv = PredictionInterval(100, 144)
        st = make_state(Regime.WIDE, 3.0, 3.0, 200, boundary=103, interval=iv, seed=9)
        p1 = augmented_next(st, 1)
        denom = 3.0 * (E - 1) + 100.0
        assert p1 == pytest.approx(3.0 / denom, abs=1e-12)
        for i in range(2, 104):
            assert augmented_next(st, i) == pytest.approx(p1, abs=1e-15)
        p_next = augmented_next(st, 104)
        wb = 3.0 * (1.0 - (3.0 + 100.0 - 3.0) / denom)
        assert st.working_budget == pytest.approx(wb, abs=1e-12)
        assert p_next == pytest.approx(wb / (3.0 * E * E), abs=1e-12)

    def test_perfect_prediction_is_uniform_budget_split(self):
        spec = ProblemSpec(144, 3.0)
        policy = IntervalPolicy(spec, PredictionInterval(12, 12), RngStream(2))
        seq = run_policy(policy, 12)
        assert all(p == 0.25 for p in seq)
        assert math.fsum(seq) == pytest.approx(3.0, abs=1e-12)


def random_setup(rng: np.random.Generator):
    b = float(rng.choice([1.5, 2.0, 3.0, 4.5]))
    T = int(rng.integers(max(4, int(b) + 2), 150))
    tau = int(rng.integers(math.ceil(b), T + 1))
    return b, T, tau


class TestPolicyProperties:
    N_DRAWS = 400

    def test_randomized_sequences_valid(self):
        gen = np.random.default_rng(2024)
        for k in range(self.N_DRAWS):
            b, T, tau = random_setup(gen)
            policy = RandomizedPolicy(ProblemSpec(T, b), RngStream(k))
            seq = list(run_policy(policy, tau))
            assert all(0.0 < p < 1.0 for p in seq)
            assert all(a >= t for a, t in zip(seq, seq[1:]))

    def test_augmented_sequences_valid(self):
        gen = np.random.default_rng(2025)
        for k in range(self.N_DRAWS):
            b, T, tau = random_setup(gen)
            w = int(gen.integers(0, T - math.ceil(b) + 1))
            lo = max(1, tau - w)
            hi = min(tau, T - w)
            if lo > hi:
                continue
            L = int(gen.integers(lo, hi + 1))
            U = L + w
            if U <= b:  # price 1.0 edge handled in the consistency tests
                continue
            policy = IntervalPolicy(
                ProblemSpec(T, b), PredictionInterval(L, U), RngStream(k)
            )
            seq = list(run_policy(policy, tau))
            assert all(0.0 < p < 1.0 for p in seq), (b, T, tau, L, U)
            assert all(a >= t for a, t in zip(seq, seq[1:]))

    def test_prefix_consistency(self):
        gen = np.random.default_rng(7)
        for k in range(150):
            b, T, tau = random_setup(gen)
            if tau < 2:
                continue
            short = run_policy(RandomizedPolicy(ProblemSpec(T, b), RngStream(k)), tau - 1)
            full = run_policy(RandomizedPolicy(ProblemSpec(T, b), RngStream(k)), tau)
            assert tuple(short) == tuple(full)[: tau - 1]

    def test_determinism(self):
        spec = ProblemSpec(100, 3.0)
        a = run_policy(RandomizedPolicy(spec, RngStream(55)), 60)
        b = run_policy(RandomizedPolicy(spec, RngStream(55)), 60)
        assert tuple(a) == tuple(b)

    def test_guess_tracks_stage_count(self):
        spec = ProblemSpec(100, 3.0)
        policy = RandomizedPolicy(spec, RngStream(8))
        st = policy.state
        for i in range(1, 90):
            policy.next_probability(i)
            expected = st.alpha * E ** (st.stage_j - 1)
            assert st.tilde_tau == pytest.approx(expected, rel=1e-12)
            assert st.working_budget <= st.budget_b

    def test_out_of_order_arrival_rejected(self):
        policy = RandomizedPolicy(ProblemSpec(22, 3.0), RngStream(1))
        policy.next_probability(1)
        with pytest.raises(ValueError):
            policy.next_probability(3)

    def test_no_stage_cap_for_pathological_tau(self):
        spec = ProblemSpec(100, 3.0)
        seq = run_policy(RandomizedPolicy(spec, RngStream(3)), 2000)
        assert len(seq) == 2000
        assert all(0.0 < p < 1.0 for p in seq)

    def test_per_arrival_resampling_variant(self):
        # literal variant redraws the stage boundary every arrival; the
        # emitted sequence stays valid and monotone
        gen = np.random.default_rng(11)
        for k in range(100):
            b, T, tau = random_setup(gen)
            policy = RandomizedPolicy(
                ProblemSpec(T, b), RngStream(k), resample_boundary=True
            )
            seq = list(run_policy(policy, tau))
            assert all(0.0 < p < 1.0 for p in seq)
            assert all(a >= t for a, t in zip(seq, seq[1:]))

    def test_resampling_changes_draws_but_not_support(self):
        spec = ProblemSpec(22, 3.0)
        cached = run_policy(RandomizedPolicy(spec, RngStream(42)), 20)
        literal = run_policy(
            RandomizedPolicy(spec, RngStream(42), resample_boundary=True), 20
        )
        assert cached[0] == literal[0]  # same alpha, same first stage price
        assert len(set(cached)) <= 4 and len(set(literal)) <= 4


class TestMultiLevel:
    def test_single_level_matches_run_policy(self):
        spec = ProblemSpec(22, 3.0)
        rng = RngStream(77)
        out = run_multi_level([(spec, None)], [10], rng)
        direct = run_policy(RandomizedPolicy(spec, RngStream(77).derive(0)), 10)
        assert tuple(out[0]) == tuple(direct)

    def test_levels_are_independent(self):
        spec = ProblemSpec(22, 3.0)
        iv = PredictionInterval(8, 12)
        levels = [(spec, None), (spec, iv)]
        out = run_multi_level(levels, [10, 10], RngStream(5))
        alone0 = run_multi_level([levels[0]], [10], RngStream(5))[0]
        assert tuple(out[0]) == tuple(alone0)
        alone1 = run_policy(
            IntervalPolicy(spec, iv, RngStream(5).derive(1)), 10
        )
        assert tuple(out[1]) == tuple(alone1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            run_multi_level([(ProblemSpec(22, 3.0), None)], [5, 6], RngStream(0))
        with pytest.raises(ValueError):
            run_multi_level([], [], RngStream(0))

    def test_per_level_budgets(self):
        # three levels with distinct budgets; rough budget audit per level
        rng_master = 909
        budgets = (1.5, 2.0, 3.0)
        T = 22
        n = 4000
        for k, bk in enumerate(budgets):
            sums = []
            for r in range(n):
                rng = RngStream(rng_master).derive(r)
                out = run_multi_level(
                    [(ProblemSpec(T, b), None) for b in budgets], [20, 20, 20], rng
                )
                sums.append(math.fsum(out[k]))
            mean = float(np.mean(sums))
            stderr = float(np.std(sums, ddof=1) / math.sqrt(n))
            assert mean <= 1.05 * bk + 3 * stderr, (k, mean)
