"""Monte Carlo experiment engine: scenario sweeps, budget audits, CSV export.

Replications are vectorized with numpy: each (policy, grid point) gets one
derived substream whose draws are laid out one row per replication, so output
is deterministic for a fixed master seed and invariant to execution order and
thread count. Policies are stage-wise constant, which lets a replication be
simulated in O(stages) vector steps instead of O(tau_star); a scalar
cross-check against the per-arrival state machines lives in the test suite.
The vector engine requires b >= 1 (stage boundaries then strictly increase);
drive the policies directly for smaller budgets.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import E, MonteCarloEstimate, ProblemSpec, RngStream, randomized_round

logger = logging.getLogger(__name__)

_EM1 = E - 1.0
_MAX_STAGES = 200

EXPERIMENTS = ("tau_sweep", "width_sweep", "budget_audit", "no_penalty_sweep")
POLICIES = ("alg1", "alg2", "const_bT", "const_bU", "seqrts")
INTERVAL_POLICIES = frozenset({"alg2", "const_bU", "seqrts"})

_POLICY_IDX = {name: i for i, name in enumerate(POLICIES)}
_EXP_IDX = {name: i + 1 for i, name in enumerate(EXPERIMENTS)}
_META_IDX = 99  # reserved derivation index for scenario-level draws

CSV_COLUMNS = (
    "scenario_id",
    "policy",
    "T",
    "b",
    "tau_star",
    "width",
    "n_reps",
    "mean_cr",
    "stderr_cr",
    "mean_sol",
    "mean_budget",
    "mean_penalty",
    "sentinel",
)


@dataclass(frozen=True)
class TauRule:
    """How the sweep picks tau_star: the full integer grid, or a fixed
    fraction of (T + b) resolved by randomized rounding once per scenario."""

    kind: str  # "grid" | "fixed"
    fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("grid", "fixed"):
            raise ValueError(f"tau_rule.kind must be grid or fixed, got {self.kind}")
        if self.kind == "fixed" and not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"tau_rule.fraction must be in (0, 1], got {self.fraction}")


@dataclass(frozen=True)
class ScenarioConfig:
    spec: ProblemSpec
    experiment: str
    policies: tuple[str, ...]
    tau_rule: TauRule = TauRule("grid")
    widths: tuple[int, ...] | None = None
    n_reps: int = 20_000
    master_seed: int = 0
    seqrts_eps: float = 1e-6
    scenario_id: str = ""

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if not self.policies:
            raise ValueError("policies must be non-empty")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}; known: {POLICIES}")
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.experiment == "width_sweep":
            if self.widths is None:
                raise ValueError("width_sweep requires widths")
            if self.tau_rule.kind != "fixed":
                raise ValueError("width_sweep requires a fixed tau_rule")
        if self.widths is not None and any(w < 0 for w in self.widths):
            raise ValueError("widths must be >= 0")
        if self.experiment == "tau_sweep":
            bad = [p for p in self.policies if p in INTERVAL_POLICIES]
            if bad:
                raise ValueError(
                    f"tau_sweep cannot run interval policies {bad}; "
                    "use width_sweep or an audit with widths"
                )
        if not self.scenario_id:
            object.__setattr__(
                self,
                "scenario_id",
                f"{self.experiment}-T{self.spec.horizon_T}-b{self.spec.budget_b:g}",
            )


@dataclass(frozen=True)
class SweepRow:
    scenario_id: str
    policy: str
    T: int
    b: float
    tau_star: float
    width: int | None
    n_reps: int
    mean_cr: float
    stderr_cr: float
    mean_sol: float
    mean_budget: float
    mean_penalty: float
    sentinel: int = 0


@dataclass(frozen=True)
class _RepBatch:
    """Per-replication sample vectors for one (policy, grid point)."""

    cr: np.ndarray
    sol: np.ndarray
    budget: np.ndarray
    penalty: np.ndarray


# ---------------------------------------------------------------------------
# Vectorized replication kernels
# ---------------------------------------------------------------------------


def _require_unit_budget(b: float) -> None:
    if b < 1.0:
        raise ValueError(
            f"vector engine requires b >= 1, got {b}; run policies directly"
        )


def _rround_vec(x: np.ndarray, g: np.random.Generator) -> np.ndarray:
    """Randomized rounding, one uniform per element (integral x never moves)."""
    lo = np.floor(x)
    up = g.random(x.shape[0]) < (x - lo)
    return lo.astype(np.int64) + up


def _finish(
    sums: np.ndarray, p_first: np.ndarray, p_last: np.ndarray, b: float,
    sigma: float | None, tau: int,
) -> _RepBatch:
    sig = sigma if sigma is not None else 1.0 / tau
    penalty = sig * np.log(p_first / p_last)
    sol = sums - penalty
    return _RepBatch(cr=sol / b, sol=sol, budget=sums, penalty=penalty)


def sim_rand(
    spec: ProblemSpec, tau: int, n: int, g: np.random.Generator
) -> _RepBatch:
    """n replications of the non-augmented policy over tau arrivals."""
    T, b = spec.horizon_T, spec.budget_b
    _require_unit_budget(b)
    short = T <= b * E
    mid = not short and T <= b * E * E
    alpha = b * np.exp(g.random(n))
    tilde = alpha.copy()
    wb = np.full(n, float(b))
    bound = _rround_vec(tilde, g)
    prev = np.zeros(n, dtype=np.int64)
    sums = np.zeros(n)
    p_first = np.empty(n)
    p_last = np.empty(n)
    for j in range(1, _MAX_STAGES + 1):
        if short:
            p = b / np.minimum(T, tilde * _EM1)
        elif mid:
            p = b / (tilde * _EM1) if j <= 2 else b / (tilde * E)
        else:
            p = wb / (tilde * E)
        if j == 1:
            p_first = p
        end = np.minimum(bound, tau)
        covered = end > prev
        sums += p * np.maximum(end - prev, 0)
        p_last = np.where(covered, p, p_last)
        np.maximum(prev, end, out=prev)
        if np.all(bound >= tau):
            return _finish(sums, p_first, p_last, b, spec.sigma, tau)
        tilde *= E
        if not short and not mid and j + 1 >= 3:
            wb *= 1.0 - 1.0 / E
        bound = _rround_vec(tilde, g)
    raise RuntimeError("stage limit exceeded")


def sim_aug(
    spec: ProblemSpec,
    tau: int,
    L: np.ndarray,
    U: np.ndarray,
    n: int,
    g: np.random.Generator,
) -> _RepBatch:
    """n replications of the interval-augmented policy, intervals per row."""
    b = spec.budget_b
    _require_unit_budget(b)
    L = np.asarray(L, dtype=np.int64)
    U = np.asarray(U, dtype=np.int64)
    if np.any(U < b):
        raise ValueError("interval upper ends below the budget")
    delta = U - L
    near = (U <= b * E) | ((U <= b * E * E) & (delta <= b * _EM1))
    mid = (U > b * E) & (U <= b * E * E) & (delta > b * _EM1)
    far = (U > b * E * E) & (delta <= b * (E + 1.0))
    wide = (U > b * E * E) & (delta > b * (E + 1.0))
    offset = np.where(mid, 0, L)

    alpha = b * np.exp(g.random(n))
    tilde = alpha.copy()
    wb = np.full(n, float(b))
    bound = _rround_vec(tilde, g) + offset
    prev = np.zeros(n, dtype=np.int64)
    sums = np.zeros(n)
    p_first = np.empty(n)
    p_last = np.empty(n)
    for j in range(1, _MAX_STAGES + 1):
        p_mid = b / (tilde * _EM1) if j <= 2 else b / (tilde * E)
        p_near = b / np.minimum(U, tilde + L)
        p_far = b / np.minimum(U, tilde * E + L)
        p_wide = wb / (tilde * _EM1 + L) if j == 1 else wb / (tilde * E)
        p = np.select([near, mid, far], [p_near, p_mid, p_far], default=p_wide)
        if j == 1:
            p_first = p
        end = np.minimum(bound, tau)
        covered = end > prev
        sums += p * np.maximum(end - prev, 0)
        p_last = np.where(covered, p, p_last)
        np.maximum(prev, end, out=prev)
        if np.all(bound >= tau):
            return _finish(sums, p_first, p_last, b, spec.sigma, tau)
        # Wide-bracket budget update uses the pre-scale guess.
        if j + 1 == 2:
            wb = np.where(
                wide, wb * (1.0 - (tilde + L - b) / (tilde * _EM1 + L)), wb
            )
        else:
            wb = np.where(wide, wb * (1.0 - 1.0 / E), wb)
        tilde *= E
        bound = _rround_vec(tilde, g) + offset
    raise RuntimeError("stage limit exceeded")


def sim_const(spec: ProblemSpec, tau: int, rate: float) -> _RepBatch:
    """Closed form for a deterministic constant-rate policy (one sample)."""
    sums = np.array([rate * tau])
    zero = np.zeros(1)
    return _RepBatch(cr=sums / spec.budget_b, sol=sums, budget=sums, penalty=zero)


def sim_const_bu(
    spec: ProblemSpec, tau: int, U: np.ndarray
) -> _RepBatch:
    """Constant b/U policy with the interval (hence rate) drawn per row."""
    rate = spec.budget_b / U
    sums = rate * tau
    zero = np.zeros(U.shape[0])
    return _RepBatch(cr=sums / spec.budget_b, sol=sums, budget=sums, penalty=zero)


def sim_seqrts(
    spec: ProblemSpec,
    tau: int,
    L: np.ndarray,
    U: np.ndarray,
    eps: float,
    g: np.random.Generator,
) -> _RepBatch:
    """Point-estimate heuristic: b/tau_hat until depleted, then eps."""
    b = spec.budget_b
    if np.any(L <= b):
        raise ValueError("seqrts requires interval lower ends above the budget")
    tau_hat = g.integers(L, U + 1)
    rate = b / tau_hat
    used = np.minimum(tau_hat, tau)
    sums = rate * used + eps * (tau - used)
    depleted = tau_hat < tau
    sig = spec.sigma if spec.sigma is not None else 1.0 / tau
    if eps > 0.0:
        penalty = np.where(depleted, sig * np.log(rate / eps), 0.0)
        sol = sums - penalty
        return _RepBatch(cr=sol / b, sol=sol, budget=sums, penalty=penalty)
    penalty = np.where(depleted, np.inf, 0.0)
    sol = np.where(depleted, -np.inf, sums)
    return _RepBatch(cr=sol / b, sol=sol, budget=sums, penalty=penalty)


# ---------------------------------------------------------------------------
# Interval placement
# ---------------------------------------------------------------------------


def interval_bounds(tau: int, width: int, T: int, floor: int = 1) -> tuple[int, int]:
    """Valid range for the interval's lower end: contains tau, fits in
    [floor, T]. Returns (lo, hi); empty when lo > hi."""
    return max(floor, tau - width), min(tau, T - width)


def draw_intervals(
    tau: int, width: int, T: int, n: int, g: np.random.Generator, floor: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n intervals of the given width containing tau, uniformly over the
    valid placements (equivalent to rejection sampling of U <= T)."""
    lo, hi = interval_bounds(tau, width, T, floor)
    if lo > hi:
        raise ValueError(
            f"no interval of width {width} contains tau={tau} within [{floor}, {T}]"
        )
    L = g.integers(lo, hi + 1, size=n)
    return L, L + width


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _aggregate(
    cfg: ScenarioConfig, policy: str, tau: float, width: int | None, batch: _RepBatch
) -> SweepRow:
    no_penalty = cfg.experiment == "no_penalty_sweep"
    cr = batch.budget / cfg.spec.budget_b if no_penalty else batch.cr
    sol = batch.budget if no_penalty else batch.sol
    sentinel = 0
    if not np.all(np.isfinite(cr)):
        sentinel = 1
        est = MonteCarloEstimate(mean=-math.inf, stderr=math.nan, n_reps=cr.size)
        mean_sol = -math.inf
        mean_penalty = math.inf
    else:
        est = MonteCarloEstimate.from_samples(cr)
        mean_sol = float(np.mean(sol))
        mean_penalty = float(np.mean(batch.penalty))
    return SweepRow(
        scenario_id=cfg.scenario_id,
        policy=policy,
        T=cfg.spec.horizon_T,
        b=cfg.spec.budget_b,
        tau_star=tau,
        width=width,
        n_reps=est.n_reps,
        mean_cr=est.mean,
        stderr_cr=est.stderr,
        mean_sol=mean_sol,
        mean_budget=float(np.mean(batch.budget)),
        mean_penalty=mean_penalty,
        sentinel=sentinel,
    )


def _point_stream(cfg: ScenarioConfig, policy: str, a: int, c: int = 0) -> RngStream:
    root = RngStream(cfg.master_seed)
    return root.derive(_EXP_IDX[cfg.experiment], _POLICY_IDX[policy], a, c)


def _run_point(
    cfg: ScenarioConfig, policy: str, tau: int, width: int | None
) -> SweepRow:
    spec = cfg.spec
    n = cfg.n_reps
    stream = _point_stream(cfg, policy, tau, width or 0)
    g = stream.generator
    if policy == "alg1":
        batch = sim_rand(spec, tau, n, g)
    elif policy == "const_bT":
        batch = sim_const(spec, tau, spec.budget_b / spec.horizon_T)
    elif policy == "alg2":
        L, U = draw_intervals(tau, width or 0, spec.horizon_T, n, g)
        batch = sim_aug(spec, tau, L, U, n, g)
    elif policy == "const_bU":
        _, U = draw_intervals(tau, width or 0, spec.horizon_T, n, g)
        batch = sim_const_bu(spec, tau, U)
    elif policy == "seqrts":
        L, U = draw_intervals(tau, width or 0, spec.horizon_T, n, g)
        batch = sim_seqrts(spec, tau, L, U, cfg.seqrts_eps, g)
    else:  # pragma: no cover
        raise ValueError(f"unknown policy {policy!r}")
    return _aggregate(cfg, policy, tau, width, batch)


def _map_tasks(
    tasks: Sequence[Callable[[], SweepRow]], threads: int
) -> list[SweepRow]:
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def tau_grid(spec: ProblemSpec, include_T: bool = False) -> range:
    """Integer tau_star grid [ceil(b), T-1], or through T for audits."""
    start = math.ceil(spec.budget_b)
    return range(start, spec.horizon_T + (1 if include_T else 0))


def resolve_fixed_tau(cfg: ScenarioConfig) -> int:
    """tau_star = Int[f*(T+b)], the rounding fixed by the scenario seed."""
    x = cfg.tau_rule.fraction * (cfg.spec.horizon_T + cfg.spec.budget_b)
    meta = RngStream(cfg.master_seed).derive(_EXP_IDX[cfg.experiment], _META_IDX)
    return randomized_round(x, meta)


def run_tau_sweep(cfg: ScenarioConfig, threads: int = 1) -> list[SweepRow]:
    """Mean competitive ratio per (policy, tau_star) over the integer grid."""
    if cfg.experiment != "tau_sweep":
        raise ValueError(f"expected tau_sweep config, got {cfg.experiment}")
    tasks = [
        (lambda p=p, t=t: _run_point(cfg, p, t, None))
        for p in sorted(cfg.policies)
        for t in tau_grid(cfg.spec)
    ]
    return _map_tasks(tasks, threads)


def run_width_sweep(cfg: ScenarioConfig, threads: int = 1) -> list[SweepRow]:
    """Mean competitive ratio per (policy, interval width) at fixed tau_star."""
    if cfg.experiment != "width_sweep":
        raise ValueError(f"expected width_sweep config, got {cfg.experiment}")
    tau = resolve_fixed_tau(cfg)
    assert cfg.widths is not None
    rows: list[SweepRow] = []
    tasks = []
    for p in sorted(cfg.policies):
        for w in cfg.widths:
            lo, hi = interval_bounds(tau, w, cfg.spec.horizon_T)
            if p in INTERVAL_POLICIES and lo > hi:
                logger.warning(
                    "width %d admits no interval containing tau=%d; skipped", w, tau
                )
                rows.append(
                    SweepRow(
                        scenario_id=cfg.scenario_id,
                        policy=p,
                        T=cfg.spec.horizon_T,
                        b=cfg.spec.budget_b,
                        tau_star=tau,
                        width=w,
                        n_reps=0,
                        mean_cr=math.nan,
                        stderr_cr=math.nan,
                        mean_sol=math.nan,
                        mean_budget=math.nan,
                        mean_penalty=math.nan,
                    )
                )
                continue
            tasks.append(lambda p=p, w=w: _run_point(cfg, p, tau, w))
    rows.extend(_map_tasks(tasks, threads))
    rows.sort(key=lambda r: (r.policy, r.width if r.width is not None else -1))
    return rows


def run_budget_audit(cfg: ScenarioConfig, threads: int = 1) -> list[SweepRow]:
    """Mean budget spent per (policy, tau_star); the no-penalty variant also
    reports the objective with the uniformity term removed."""
    if cfg.experiment not in ("budget_audit", "no_penalty_sweep"):
        raise ValueError(f"expected an audit config, got {cfg.experiment}")
    widths = cfg.widths if cfg.widths is not None else (0,)
    tasks = []
    for p in sorted(cfg.policies):
        for t in tau_grid(cfg.spec, include_T=True):
            if p in INTERVAL_POLICIES:
                for w in widths:
                    lo, hi = interval_bounds(t, w, cfg.spec.horizon_T)
                    if lo > hi:
                        continue
                    tasks.append(lambda p=p, t=t, w=w: _run_point(cfg, p, t, w))
            else:
                tasks.append(lambda p=p, t=t: _run_point(cfg, p, t, None))
    return _map_tasks(tasks, threads)


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> list[SweepRow]:
    if cfg.experiment == "tau_sweep":
        return run_tau_sweep(cfg, threads)
    if cfg.experiment == "width_sweep":
        return run_width_sweep(cfg, threads)
    return run_budget_audit(cfg, threads)


# ---------------------------------------------------------------------------
# Config file handling and CSV export
# ---------------------------------------------------------------------------


def config_from_dict(raw: dict, seed_default: int | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from the JSON object schema, naming bad fields."""
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    known = {
        "T", "b", "experiment", "policies", "tau_rule", "widths",
        "n_reps", "master_seed", "sigma", "seqrts_eps", "scenario_id",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("T", "b", "experiment", "policies"):
        if key not in raw:
            raise ValueError(f"config missing required key {key!r}")
    try:
        spec = ProblemSpec(
            horizon_T=int(raw["T"]),
            budget_b=float(raw["b"]),
            sigma=float(raw["sigma"]) if raw.get("sigma") is not None else None,
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad T/b/sigma: {exc}") from exc
    tau_rule = raw.get("tau_rule")
    if tau_rule is None:
        default_fixed = raw.get("experiment") == "width_sweep"
        rule = TauRule("fixed", 0.5) if default_fixed else TauRule("grid")
    elif isinstance(tau_rule, str):
        rule = TauRule(tau_rule)
    elif isinstance(tau_rule, dict) and "fixed" in tau_rule:
        rule = TauRule("fixed", float(tau_rule["fixed"]))
    else:
        raise ValueError(f"tau_rule must be 'grid' or {{'fixed': f}}, got {tau_rule!r}")
    widths = raw.get("widths")
    seed = raw.get("master_seed", seed_default)
    if seed is None:
        seed = 0
    return ScenarioConfig(
        spec=spec,
        experiment=str(raw["experiment"]),
        policies=tuple(str(p) for p in raw["policies"]),
        tau_rule=rule,
        widths=tuple(int(w) for w in widths) if widths is not None else None,
        n_reps=int(raw.get("n_reps", 20_000)),
        master_seed=int(seed),
        seqrts_eps=float(raw.get("seqrts_eps", 1e-6)),
        scenario_id=str(raw.get("scenario_id", "")),
    )


def load_config(path: str | Path, seed_default: int | None = None) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw, seed_default)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def export_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    """Write rows in the published column order; deterministic bytes."""
    if not rows:
        raise ValueError("no rows to export")
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                (
                    r.scenario_id,
                    r.policy,
                    str(r.T),
                    _fmt(r.b),
                    _fmt(r.tau_star),
                    _fmt(r.width),
                    str(r.n_reps),
                    _fmt(r.mean_cr),
                    _fmt(r.stderr_cr),
                    _fmt(r.mean_sol),
                    _fmt(r.mean_budget),
                    _fmt(r.mean_penalty),
                    str(r.sentinel),
                )
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing CSV to {path}: {exc}") from exc
