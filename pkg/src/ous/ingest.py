"""Minute-level step logs to per-day risk sequences, and policy replay.

A user-day is discretized to 144 five-minute decision times from 9am to 9pm.
A decision time is at risk when the 40 minutes strictly before it carry fewer
than 150 steps, and available when no message was sent in the 60 minutes
strictly before it (windows are left-closed, right-open: the decision minute
itself never counts). Missing minutes count as zero steps. tau_star is the
number of at-risk, available decision times; replay drives each policy over
exactly those arrivals and scores the result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algorithms import IntervalPolicy, RandomizedPolicy
from .baselines import ConstantPolicy, SeqRTSConfig, SeqRTSPolicy
from .core import (
    MonteCarloEstimate,
    PredictionInterval,
    ProblemSpec,
    RngStream,
    score_with_sentinel,
)
from .harness import POLICIES, SweepRow, interval_bounds

logger = logging.getLogger(__name__)

N_DECISIONS = 144
FIRST_DECISION_MINUTE = 9 * 60  # 9:00
DECISION_STEP = 5
STEP_WINDOW = 40
STEP_THRESHOLD = 150
MESSAGE_WINDOW = 60
INTERVAL_FLOOR = 2  # replay brackets are drawn from [2, 144]

_DECISION_MINUTES = tuple(
    FIRST_DECISION_MINUTE + DECISION_STEP * k for k in range(N_DECISIONS)
)
# minutes that can influence any window: [8:20, 20:55)
_LOG_START_MINUTE = FIRST_DECISION_MINUTE - STEP_WINDOW - 20
_LOG_END_MINUTE = _DECISION_MINUTES[-1]


@dataclass(frozen=True)
class StepLogRow:
    user_id: str
    timestamp: datetime
    steps: int
    message_flag: bool = False

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")


@dataclass(frozen=True)
class UserDay:
    """One participant-day: risk/availability flags and their joint count."""

    user_id: str
    day: date
    tau_star: int
    decision_flags: tuple[tuple[bool, bool], ...] | None = None

    def __post_init__(self) -> None:
        if self.decision_flags is not None:
            if len(self.decision_flags) != N_DECISIONS:
                raise ValueError(
                    f"expected {N_DECISIONS} decision flags, got "
                    f"{len(self.decision_flags)}"
                )
            count = sum(1 for r, a in self.decision_flags if r and a)
            if count != self.tau_star:
                raise ValueError(
                    f"tau_star {self.tau_star} does not match flags ({count})"
                )
        if not 0 <= self.tau_star <= N_DECISIONS:
            raise ValueError(f"tau_star out of range: {self.tau_star}")


def _day_flags(steps: np.ndarray, messages: np.ndarray) -> list[tuple[bool, bool]]:
    cum_steps = np.concatenate(([0], np.cumsum(steps)))
    cum_msgs = np.concatenate(([0], np.cumsum(messages)))
    flags = []
    for t in _DECISION_MINUTES:
        window = cum_steps[t] - cum_steps[max(0, t - STEP_WINDOW)]
        risk = window < STEP_THRESHOLD
        recent = cum_msgs[t] - cum_msgs[max(0, t - MESSAGE_WINDOW)]
        flags.append((bool(risk), recent == 0))
    return flags


def extract_user_days(rows: Iterable[StepLogRow]) -> list[UserDay]:
    """Fold a per-user, time-sorted log into UserDay records.

    Rows must be grouped by user with strictly increasing timestamps inside
    each user; days with no rows simply do not appear.
    """
    days: dict[tuple[str, date], tuple[np.ndarray, np.ndarray]] = {}
    finished_users: set[str] = set()
    current_user: str | None = None
    last_ts: datetime | None = None
    for idx, row in enumerate(rows):
        if row.user_id != current_user:
            if row.user_id in finished_users:
                raise ValueError(
                    f"row {idx}: rows for user {row.user_id!r} are not contiguous"
                )
            if current_user is not None:
                finished_users.add(current_user)
            current_user = row.user_id
            last_ts = None
        if last_ts is not None and row.timestamp <= last_ts:
            raise ValueError(
                f"row {idx}: timestamps not strictly increasing for user "
                f"{row.user_id!r} ({row.timestamp} after {last_ts})"
            )
        last_ts = row.timestamp
        key = (row.user_id, row.timestamp.date())
        if key not in days:
            days[key] = (np.zeros(1440, dtype=np.int64), np.zeros(1440, dtype=np.int64))
        steps, messages = days[key]
        minute = row.timestamp.hour * 60 + row.timestamp.minute
        steps[minute] += row.steps
        if row.message_flag:
            messages[minute] += 1
    out = []
    for (user_id, day), (steps, messages) in days.items():
        flags = _day_flags(steps, messages)
        tau = sum(1 for r, a in flags if r and a)
        out.append(
            UserDay(user_id=user_id, day=day, tau_star=tau, decision_flags=tuple(flags))
        )
    return out


def generate_synthetic_log(
    n_users: int,
    n_days: int,
    sedentary_fraction: float,
    rng: RngStream,
    start: date = date(2021, 1, 4),
) -> list[StepLogRow]:
    """Minute rows whose induced risk counts average sedentary_fraction * 144.

    Heavy minutes (>= 150 steps) arrive as a Bernoulli process with rate
    1 - f**(1/40), so each 40-minute look-back is clear of them with
    probability f; quiet minutes carry at most 3 steps and can never sum past
    the threshold. No messages are generated. Deterministic per seed.
    """
    if not 0.0 <= sedentary_fraction <= 1.0:
        raise ValueError(
            f"sedentary_fraction must be in [0, 1], got {sedentary_fraction}"
        )
    lam = 1.0 - sedentary_fraction ** (1.0 / STEP_WINDOW)
    minutes = np.arange(_LOG_START_MINUTE, _LOG_END_MINUTE)
    rows = []
    for u in range(n_users):
        for d in range(n_days):
            g = rng.derive(u, d).generator
            active = g.random(minutes.size) < lam
            heavy = g.integers(STEP_THRESHOLD, 401, size=minutes.size)
            quiet = g.integers(0, 4, size=minutes.size)
            steps = np.where(active, heavy, quiet)
            day = start + timedelta(days=d)
            midnight = datetime(day.year, day.month, day.day)
            rows.extend(
                StepLogRow(
                    user_id=f"u{u:03d}",
                    timestamp=midnight + timedelta(minutes=int(m)),
                    steps=int(s),
                )
                for m, s in zip(minutes, steps)
            )
    return rows


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def _replay_policy(name, spec, interval, rng, min_probability):
    if name == "alg1":
        return RandomizedPolicy(spec, rng)
    if name == "alg2":
        return IntervalPolicy(spec, interval, rng)
    if name == "const_bT":
        return ConstantPolicy(spec.budget_b / spec.horizon_T)
    if name == "const_bU":
        return ConstantPolicy(spec.budget_b / interval.upper_U)
    if name == "seqrts":
        cfg = SeqRTSConfig(interval, min_probability=min_probability)
        return SeqRTSPolicy(spec, cfg, rng)
    raise ValueError(f"unknown policy {name!r}; known: {POLICIES}")


def replay(
    user_days: Sequence[UserDay],
    policies: Sequence[str],
    interval_width: int,
    b: float = 1.5,
    rng: RngStream | None = None,
    sigma: float | None = None,
    min_probability: float = 1e-6,
) -> list[SweepRow]:
    """Score each policy over every user-day at one bracket width.

    Per day, one bracket of the given width containing tau_star is drawn from
    [2, 144] and shared across policies; means and standard errors aggregate
    across user-days. Days with tau_star < 2 cannot be bracketed and are
    skipped (count logged).
    """
    if rng is None:
        rng = RngStream(0)
    if not 0 <= interval_width <= N_DECISIONS - INTERVAL_FLOOR:
        raise ValueError(f"interval_width out of range: {interval_width}")
    for name in policies:
        if name not in POLICIES:
            raise ValueError(f"unknown policy {name!r}; known: {POLICIES}")
    spec = ProblemSpec(horizon_T=N_DECISIONS, budget_b=b, sigma=sigma)
    scored_days = []
    skipped = 0
    for d, day in enumerate(user_days):
        if day.tau_star < INTERVAL_FLOOR:
            skipped += 1
            continue
        lo, hi = interval_bounds(
            day.tau_star, interval_width, N_DECISIONS, floor=INTERVAL_FLOOR
        )
        L = rng.derive(d, 0).randint(lo, hi)
        interval = PredictionInterval(L, L + interval_width)
        scored_days.append((d, day, interval))
    if skipped:
        logger.info("skipped %d user-days with tau_star < %d", skipped, INTERVAL_FLOOR)
    if not scored_days:
        raise ValueError("no user-days with enough risk times to replay")
    rows = []
    for p_idx, name in enumerate(sorted(policies)):
        crs, sols, budgets, penalties = [], [], [], []
        for d, day, interval in scored_days:
            policy = _replay_policy(
                name, spec, interval, rng.derive(d, 1 + p_idx), min_probability
            )
            probs = [policy.next_probability(i) for i in range(1, day.tau_star + 1)]
            rep = score_with_sentinel(probs, day.tau_star, spec)
            crs.append(rep.competitive_ratio)
            sols.append(rep.sol)
            budgets.append(rep.sum_probs)
            penalties.append(rep.penalty)
        cr_arr = np.array(crs)
        mean_tau = float(np.mean([day.tau_star for _, day, _ in scored_days]))
        if np.all(np.isfinite(cr_arr)):
            est = MonteCarloEstimate.from_samples(cr_arr)
            sentinel = 0
            mean_sol = float(np.mean(sols))
            mean_penalty = float(np.mean(penalties))
        else:
            est = MonteCarloEstimate(-math.inf, math.nan, cr_arr.size)
            sentinel = 1
            mean_sol = -math.inf
            mean_penalty = math.inf
        rows.append(
            SweepRow(
                scenario_id=f"replay-w{interval_width}",
                policy=name,
                T=N_DECISIONS,
                b=b,
                tau_star=mean_tau,
                width=interval_width,
                n_reps=len(scored_days),
                mean_cr=est.mean,
                stderr_cr=est.stderr,
                mean_sol=mean_sol,
                mean_budget=float(np.mean(budgets)),
                mean_penalty=mean_penalty,
                sentinel=sentinel,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV input/output
# ---------------------------------------------------------------------------

STEP_LOG_HEADER = "user_id,timestamp,steps,message_flag"
USER_DAY_HEADER = "user_id,date,tau_star"


def read_step_log(path: str | Path) -> list[StepLogRow]:
    """Parse a step-log CSV; malformed rows are reported with line numbers."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != STEP_LOG_HEADER:
        raise ValueError(f"{path}: expected header {STEP_LOG_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        user_id, ts, steps, flag = parts
        try:
            timestamp = datetime.fromisoformat(ts.strip())
            row = StepLogRow(
                user_id=user_id.strip(),
                timestamp=timestamp,
                steps=int(steps),
                message_flag=bool(int(flag)),
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        rows.append(row)
    return rows


def write_step_log(rows: Sequence[StepLogRow], path: str | Path) -> None:
    lines = [STEP_LOG_HEADER]
    lines.extend(
        f"{r.user_id},{r.timestamp.isoformat(timespec='minutes')},"
        f"{r.steps},{int(r.message_flag)}"
        for r in rows
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_user_days(
    days: Sequence[UserDay], path: str | Path, flags: bool = False
) -> None:
    """User-day CSV; with flags, 144 extra columns encode risk + 2*available."""
    header = USER_DAY_HEADER
    if flags:
        header += "," + ",".join(f"t{k:03d}" for k in range(N_DECISIONS))
    lines = [header]
    for d in days:
        line = f"{d.user_id},{d.day.isoformat()},{d.tau_star}"
        if flags:
            if d.decision_flags is None:
                raise ValueError(f"user-day {d.user_id}/{d.day} has no flags to dump")
            line += "," + ",".join(
                str(int(r) + 2 * int(a)) for r, a in d.decision_flags
            )
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_user_days(path: str | Path) -> list[UserDay]:
    """Read back a user-day CSV (flag columns, if present, are ignored)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(USER_DAY_HEADER):
        raise ValueError(f"{path}: expected header starting {USER_DAY_HEADER!r}")
    days = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) < 3:
            raise ValueError(f"{path}:{lineno}: expected at least 3 fields")
        try:
            days.append(
                UserDay(
                    user_id=parts[0],
                    day=date.fromisoformat(parts[1]),
                    tau_star=int(parts[2]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return days
