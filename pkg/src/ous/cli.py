"""Command-line front end: theory tables, sweeps, audits, ingestion, replay.

Exit codes: 0 success, 2 configuration error, 3 I/O error. The OUS_SEED
environment variable supplies a default master seed wherever one is not given
explicitly. Every subcommand is deterministic given its full flag set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import (
    RngStream,
    learn_regime_label,
    rand_regime_label,
    theoretical_cr_learn,
    theoretical_cr_rand,
)
from .harness import (
    EXPERIMENTS,
    POLICIES,
    config_from_dict,
    export_csv,
    run_scenario,
)
from .ingest import (
    extract_user_days,
    generate_synthetic_log,
    read_step_log,
    read_user_days,
    replay,
    write_step_log,
    write_user_days,
)


def _env_seed() -> int | None:
    raw = os.environ.get("OUS_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"OUS_SEED must be an integer, got {raw!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {exc}")


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def cmd_theory(args) -> int:
    if not args.t and not args.u:
        raise ValueError("theory needs --t and/or --u values")
    rows = []
    for t in args.t or []:
        rows.append(("T", t, rand_regime_label(t, args.b), theoretical_cr_rand(t, args.b)))
    for u in args.u or []:
        rows.append(("U", u, learn_regime_label(u, args.b), theoretical_cr_learn(u, args.b)))
    if args.csv:
        print("kind,value,regime,bound")
        for kind, v, regime, bound in rows:
            print(f"{kind},{v},{regime},{bound!r}")
    else:
        print(f"{'kind':<5} {'value':>6}  {'regime':<16} {'bound':>10}")
        for kind, v, regime, bound in rows:
            print(f"{kind:<5} {v:>6}  {regime:<16} {bound:>10.6f}")
    return 0


def _load_scenario(args, allowed_experiments):
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    overrides = {
        "T": args.t,
        "b": args.b,
        "n_reps": args.n_reps,
        "master_seed": args.seed,
        "sigma": args.sigma,
        "experiment": args.experiment,
    }
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    if args.policies is not None:
        raw["policies"] = args.policies
    if args.widths is not None:
        raw["widths"] = args.widths
    cfg = config_from_dict(raw, seed_default=_env_seed())
    if cfg.experiment not in allowed_experiments:
        raise ValueError(
            f"this command accepts experiments {allowed_experiments}, "
            f"config says {cfg.experiment!r}"
        )
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_scenario(args, ("tau_sweep", "width_sweep"))
    rows = run_scenario(cfg, threads=args.threads)
    export_csv(rows, args.out)
    print(f"{cfg.scenario_id}: wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_audit(args) -> int:
    cfg = _load_scenario(args, ("budget_audit", "no_penalty_sweep"))
    rows = run_scenario(cfg, threads=args.threads)
    export_csv(rows, args.out)
    print(f"{cfg.scenario_id}: wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    if args.synthetic:
        seed = args.seed if args.seed is not None else (_env_seed() or 0)
        log = generate_synthetic_log(
            args.users, args.days, args.sedentary_fraction, RngStream(seed)
        )
        if args.save_log:
            write_step_log(log, args.save_log)
    elif args.input:
        log = read_step_log(args.input)
    else:
        raise ValueError("ingest needs --input or --synthetic")
    days = extract_user_days(log)
    write_user_days(days, args.output, flags=args.flags)
    print(f"wrote {len(days)} user-days to {args.output}")
    return 0


def cmd_replay(args) -> int:
    days = read_user_days(args.userdays)
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    rows = []
    for w in args.width:
        rows.extend(
            replay(
                days,
                args.policies,
                interval_width=w,
                b=args.b,
                rng=RngStream(seed).derive(w),
                sigma=args.sigma,
                min_probability=args.min_probability,
            )
        )
    export_csv(rows, args.out)
    scored = rows[0].n_reps if rows else 0
    print(
        f"replayed {scored} of {len(days)} user-days at widths "
        f"{','.join(str(w) for w in args.width)}; wrote {len(rows)} rows to {args.out}"
    )
    return 0


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="scenario JSON path")
    p.add_argument("--out", default="sweep.csv", help="output CSV path")
    p.add_argument("--t", type=int, help="override horizon T")
    p.add_argument("--b", type=float, help="override budget b")
    p.add_argument("--n-reps", type=int, help="override replication count")
    p.add_argument("--seed", type=int, help="override master seed")
    p.add_argument("--sigma", type=float, help="override penalty strength")
    p.add_argument("--experiment", choices=EXPERIMENTS, help="override experiment")
    p.add_argument("--policies", type=_str_list, help="override policy list")
    p.add_argument("--widths", type=_int_list, help="override width list")
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads (output is identical for any value)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ous",
        description="Online uniform sampling policies and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    theory = sub.add_parser("theory", help="closed-form competitive-ratio bounds")
    theory.add_argument("--b", type=float, required=True, help="budget")
    theory.add_argument("--t", type=_int_list, help="horizon values, comma separated")
    theory.add_argument("--u", type=_int_list, help="bracket tops, comma separated")
    theory.add_argument("--csv", action="store_true", help="machine-readable output")
    theory.set_defaults(func=cmd_theory)

    simulate = sub.add_parser("simulate", help="run a tau or width sweep to CSV")
    _add_scenario_flags(simulate)
    simulate.set_defaults(func=cmd_simulate)

    audit = sub.add_parser("audit", help="run a budget audit to CSV")
    _add_scenario_flags(audit)
    audit.set_defaults(func=cmd_audit)

    ingest = sub.add_parser("ingest", help="step-count log to user-day CSV")
    ingest.add_argument("--input", help="step log CSV (user_id,timestamp,steps,message_flag)")
    ingest.add_argument("--output", required=True, help="user-day CSV path")
    ingest.add_argument("--flags", action="store_true",
                        help="dump 144 per-decision-time flags, encoded risk+2*available")
    ingest.add_argument("--synthetic", action="store_true",
                        help="generate a synthetic log instead of reading --input")
    ingest.add_argument("--users", type=int, default=5, help="synthetic user count")
    ingest.add_argument("--days", type=int, default=10, help="synthetic days per user")
    ingest.add_argument("--sedentary-fraction", type=float, default=0.6,
                        help="target fraction of at-risk decision times")
    ingest.add_argument("--seed", type=int, help="synthetic generator seed")
    ingest.add_argument("--save-log", help="also write the synthetic step log here")
    ingest.set_defaults(func=cmd_ingest)

    rep = sub.add_parser("replay", help="replay policies over user-days to CSV")
    rep.add_argument("--userdays", required=True, help="user-day CSV from ingest")
    rep.add_argument("--width", type=_int_list, default=[0],
                     help="bracket width(s), comma separated")
    rep.add_argument("--b", type=float, default=1.5, help="daily budget")
    rep.add_argument("--policies", type=_str_list,
                     default=["alg1", "alg2", "const_bU", "seqrts"],
                     help=f"policies to replay, from {POLICIES}")
    rep.add_argument("--seed", type=int, help="master seed")
    rep.add_argument("--sigma", type=float, help="penalty strength override")
    rep.add_argument("--min-probability", type=float, default=1e-6,
                     help="floor assigned by seqrts once depleted")
    rep.add_argument("--out", default="replay.csv", help="output CSV path")
    rep.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
