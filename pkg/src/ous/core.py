"""Core types and primitives for online uniform sampling.

A decision period has at most ``horizon_T`` decision times and a soft budget
``budget_b`` of expected interventions. An unknown number ``tau_star`` of risk
times arrives online; policies emit one sampling probability per risk time.
This module holds the shared value types, the seeded randomness contract, the
log-uniform guess sampler, randomized rounding, objective scoring, and the
closed-form worst-case competitive-ratio constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

E = math.e

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of one decision period.

    ``sigma`` overrides the penalty strength; when None the evaluator uses
    1/tau_star, which is only known at scoring time.
    """

    horizon_T: int
    budget_b: float
    sigma: float | None = None

    def __post_init__(self) -> None:
        if self.horizon_T < 2:
            raise ValueError(f"horizon_T must be >= 2, got {self.horizon_T}")
        if not self.budget_b > 0:
            raise ValueError(f"budget_b must be > 0, got {self.budget_b}")
        if not self.budget_b < self.horizon_T:
            raise ValueError(
                f"budget_b must be < horizon_T ({self.budget_b} >= {self.horizon_T})"
            )
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"sigma must be > 0 when set, got {self.sigma}")


@dataclass(frozen=True)
class PredictionInterval:
    """Integer bracket [lower_L, upper_U] known to contain tau_star."""

    lower_L: int
    upper_U: int

    def __post_init__(self) -> None:
        if self.lower_L < 0:
            raise ValueError(f"lower_L must be >= 0, got {self.lower_L}")
        if self.upper_U < 1:
            raise ValueError(f"upper_U must be >= 1, got {self.upper_U}")
        if self.lower_L > self.upper_U:
            raise ValueError(
                f"interval is empty: [{self.lower_L}, {self.upper_U}]"
            )

    @property
    def width(self) -> int:
        return self.upper_U - self.lower_L


class RngStream:
    """Deterministic uniform(0,1) source with reproducible substreams.

    A stream is identified by a 64-bit master seed plus an integer derivation
    path. ``derive(i, j, ...)`` returns an independent stream for that path,
    regardless of how many draws the parent has already made, so replications
    and levels can be seeded structurally (e.g. derive(scenario, rep)).
    Instances are single-owner: share seeds, not streams.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed) & _SEED_MASK
        self.path = tuple(int(p) for p in _path)
        if any(p < 0 for p in self.path):
            raise ValueError(f"derivation indices must be >= 0, got {self.path}")
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *self.path]))
        )

    def derive(self, *indices: int) -> "RngStream":
        """Independent, reproducible substream for the given index path."""
        return RngStream(self.seed, self.path + tuple(int(i) for i in indices))

    def uniform(self) -> float:
        """Next double in [0, 1)."""
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        return int(self._gen.integers(lo, hi + 1))

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for bulk vector draws."""
        return self._gen

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


@dataclass(frozen=True)
class ProbabilityAssignment:
    """The emitted sequence p_1..p_tau of per-risk-time probabilities.

    Every element must be in (0, 1]. The value 1.0 only occurs in the
    degenerate perfect-prediction case tau_star == budget; anything outside
    (0, 1] signals a policy bug and is rejected.
    """

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.probs:
            raise ValueError("probability sequence is empty")
        for i, p in enumerate(self.probs):
            if not 0.0 < p <= 1.0:
                raise ValueError(f"p_{i + 1} = {p} outside (0, 1]")

    def __len__(self) -> int:
        return len(self.probs)

    def __iter__(self) -> Iterator[float]:
        return iter(self.probs)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


@dataclass(frozen=True)
class ObjectiveReport:
    """Scored objective for one emitted sequence.

    ``sol = sum_probs - penalty`` and ``competitive_ratio = sol / opt`` with
    ``opt = budget_b``. ``entropy_change`` is the spread term with the default
    1/tau_star weight, regardless of any sigma override, matching the metric
    reported for replay experiments.
    """

    sum_probs: float
    penalty: float
    sol: float
    opt: float
    competitive_ratio: float
    entropy_change: float

    @property
    def is_sentinel(self) -> bool:
        return math.isinf(self.sol)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    n_reps: int

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MonteCarloEstimate":
        """Mean and standard error of the mean from one sample vector.

        A constant sample yields stderr exactly 0.0 (no float residue), so
        deterministic policies report zero error by construction.
        """
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            raise ValueError("empty sample")
        if np.min(x) == np.max(x):
            return cls(mean=float(x[0]), stderr=0.0, n_reps=n)
        mean = float(np.mean(x))
        if n == 1:
            return cls(mean=mean, stderr=0.0, n_reps=1)
        var = float(np.var(x, ddof=1))
        return cls(mean=mean, stderr=math.sqrt(var / n), n_reps=n)


def sample_alpha(b: float, rng: RngStream) -> float:
    """Draw the initial guess alpha from [b, b*e] with density 1/alpha.

    Inverse-CDF form: the CDF on [b, b*e] is ln(alpha/b), so alpha = b*exp(u)
    with u uniform on [0, 1).
    """
    if not b > 0:
        raise ValueError(f"budget must be > 0, got {b}")
    return b * math.exp(rng.uniform())


def randomized_round(x: float, rng: RngStream) -> int:
    """Round x down with probability ceil(x) - x, otherwise up.

    Unbiased: E[randomized_round(x)] = x. Integral x is returned unchanged
    without consuming a draw.
    """
    if not x > 0:
        raise ValueError(f"expected positive value, got {x}")
    lo = math.floor(x)
    frac = x - lo
    if frac == 0.0:
        return int(lo)
    return int(lo) + (1 if rng.uniform() < frac else 0)


def _check_sequence(probs, tau_star: int, zero_ok: bool) -> tuple[float, ...]:
    if isinstance(probs, ProbabilityAssignment):
        seq = probs.probs
    else:
        seq = tuple(float(p) for p in probs)
    if tau_star < 1:
        raise ValueError(f"tau_star must be >= 1, got {tau_star}")
    if len(seq) != tau_star:
        raise ValueError(f"length {len(seq)} does not match tau_star {tau_star}")
    low = 0.0 if zero_ok else None
    for i, p in enumerate(seq):
        if p > 1.0 or (low is None and p <= 0.0) or (low == 0.0 and p < 0.0):
            raise ValueError(f"p_{i + 1} = {p} outside the valid range")
    return seq


def evaluate_objective(
    probs: ProbabilityAssignment | Sequence[float],
    tau_star: int,
    spec: ProblemSpec,
) -> ObjectiveReport:
    """Score a sequence: budget spent minus the uniformity penalty.

    The penalty is sigma_eff * ln(max p / min p) with sigma_eff = spec.sigma
    when set, else 1/tau_star. For non-increasing sequences this equals
    sigma_eff * ln(p_1 / p_tau). The penalty is exactly 0 iff the sequence is
    uniform. Probabilities outside (0, 1] are a hard error, never clamped.
    """
    seq = _check_sequence(probs, tau_star, zero_ok=False)
    total = math.fsum(seq)
    spread = math.log(max(seq) / min(seq))
    sigma_eff = spec.sigma if spec.sigma is not None else 1.0 / tau_star
    penalty = sigma_eff * spread
    sol = total - penalty
    return ObjectiveReport(
        sum_probs=total,
        penalty=penalty,
        sol=sol,
        opt=spec.budget_b,
        competitive_ratio=sol / spec.budget_b,
        entropy_change=spread / tau_star,
    )


def score_with_sentinel(
    probs: Sequence[float], tau_star: int, spec: ProblemSpec
) -> ObjectiveReport:
    """Like evaluate_objective, but a zero probability yields the sentinel.

    Heuristics that deplete their budget may assign exactly 0 to leftover risk
    times; the objective is then minus infinity and the entropy change plus
    infinity. Policies under test here never produce zeros, so only baseline
    scoring paths call this.
    """
    seq = _check_sequence(probs, tau_star, zero_ok=True)
    if min(seq) == 0.0:
        return ObjectiveReport(
            sum_probs=math.fsum(seq),
            penalty=math.inf,
            sol=-math.inf,
            opt=spec.budget_b,
            competitive_ratio=-math.inf,
            entropy_change=math.inf,
        )
    return evaluate_objective(seq, tau_star, spec)


def theoretical_cr_rand(T: float, b: float) -> float:
    """Worst-case competitive ratio of the non-augmented policy.

    Piecewise constant in the horizon-to-budget ratio; regime comparisons use
    non-strict <= with double precision e.
    """
    if not b > 0:
        raise ValueError(f"budget must be > 0, got {b}")
    if not b < T:
        raise ValueError(f"requires b < T, got b={b}, T={T}")
    if T <= b * E:
        return (1.0 / E) * (math.log(E - 1.0) + 1.0 / (E - 1.0))
    if T <= b * E * E:
        return 1.0 / E
    return 1.0 / E - 1.0 / (E * E)


def theoretical_cr_learn(U: float, b: float) -> float:
    """Worst-case (robustness) competitive ratio of the augmented policy."""
    if not b > 0:
        raise ValueError(f"budget must be > 0, got {b}")
    if U < 1:
        raise ValueError(f"requires U >= 1, got {U}")
    if U <= b * E:
        return math.log(2.0) + ((E - 1.0) / E) * math.log((E - 1.0) / E)
    if U <= b * E * E:
        return 1.0 / E
    return 2.0 - math.log(E * E - E + 1.0)


def rand_regime_label(T: float, b: float) -> str:
    """Human-readable regime of the horizon relative to the budget."""
    if T <= b * E:
        return "T <= be"
    if T <= b * E * E:
        return "be < T <= be^2"
    return "T > be^2"


def learn_regime_label(U: float, b: float) -> str:
    if U <= b * E:
        return "U <= be"
    if U <= b * E * E:
        return "be < U <= be^2"
    return "U > be^2"


def iter_pairs(x: Iterable[float]) -> Iterator[tuple[float, float]]:
    """Adjacent pairs of a sequence, for monotonicity checks."""
    it = iter(x)
    try:
        prev = next(it)
    except StopIteration:
        return
    for cur in it:
        yield prev, cur
        prev = cur
