"""Command-line entry point: ``superstate <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .belief import contraction_audit
from .bounds import theoretical_sample_size
from .errors import ParameterError, SuperstateError
from .estimation import count_windows, estimation_error, to_model
from .exact import build_exact, lemma1_gap
from .experiment import ExperimentConfig, figure1_sweep, fmt, summarize, read_results_csv
from .planning import (
    greedy,
    mc_pomdp_value,
    optimal_superstate_value,
    policy_to_csv,
    pomdp_policy_value,
    superstate_policy_value,
    value_iteration,
)
from .pomdp import load_pomdp, make_rng, sample_trajectory, validate
from .windows import WindowIndex, WindowPolicy

log = logging.getLogger("superstate")


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--pomdp", default="probe", help="built-in name or JSON file (default: probe)")
    p.add_argument("--m", type=_int_list, default=None, help="window length(s), comma-separated")
    p.add_argument("--T", type=_int_list, default=None, help="trajectory length(s), comma-separated")
    p.add_argument("--K", type=int, default=50, help="value-iteration steps (default: 50)")
    p.add_argument("--gamma", type=float, default=None, help="discount (default: the POMDP's)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", choices=("emitted", "previous"), default=None,
                   help="override the POMDP's reward timing")
    p.add_argument("--mode", choices=("suffix", "position"), default="suffix",
                   help="window counting mode for estimation")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="superstate",
        description="Learn finite-window policies in tabular POMDPs via superstate MDPs.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.add_parser("validate", parents=[common], help="print alpha, beta, rho")
    sub.add_parser("exact", parents=[common], help="dump the exact superstate model")
    sub.add_parser("estimate", parents=[common], help="sample a trajectory and dump counts/model")
    p = sub.add_parser("plan", parents=[common], help="value iteration and greedy policy dump")
    p.add_argument("--exact", action="store_true", help="plan on the exact model")
    p = sub.add_parser("evaluate", parents=[common], help="exact and Monte-Carlo policy values")
    p.add_argument("--policy", default=None, help="policy CSV (window, chosen_action)")
    p.add_argument("--episodes", type=int, default=100_000)
    p = sub.add_parser("audit", parents=[common], help="filter-stability and window-gap audits")
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--histories", type=int, default=100)
    sub.add_parser("bound", parents=[common], help="sample-size calculator")
    p = sub.add_parser("experiment", parents=[common], help="learning-curve sweep over (m, T, run)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-svg", action="store_true")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_json(obj: Any, out: str | None) -> None:
    _emit(json.dumps(obj, indent=2, default=float) + "\n", out)


def _single(values: list[int] | None, default: int, name: str) -> int:
    if not values:
        return default
    if len(values) != 1:
        raise ParameterError(f"--{name} takes a single value for this command")
    return values[0]


def _pomdp(args):
    pomdp = load_pomdp(args.pomdp, discount=args.gamma)
    if args.timing:
        pomdp = pomdp.with_timing(args.timing)
    return pomdp


def _learn(args, pomdp):
    m = _single(args.m, 1, "m")
    T = _single(args.T, 10_000, "T")
    traj = sample_trajectory(pomdp, None, T, args.seed)
    counts = count_windows(traj, WindowIndex(pomdp.n_actions, pomdp.n_obs, m), mode=args.mode)
    return m, T, counts, to_model(counts)


def cmd_validate(args) -> int:
    rep = validate(_pomdp(args))
    if args.format == "json":
        _emit_json(rep.to_dict(), args.out)
    else:
        _emit(
            f"alpha={fmt(rep.alpha)} beta={fmt(rep.beta)} rho={fmt(rep.rho)} "
            f"assumption1={'ok' if rep.assumption1_ok else 'violated'} "
            f"assumption2={'ok' if rep.assumption2_ok else 'violated'}\n",
            args.out,
        )
    return 0


def cmd_exact(args) -> int:
    pomdp = _pomdp(args)
    model = build_exact(pomdp, _single(args.m, 1, "m"))
    if args.format == "json":
        v_star, _ = optimal_superstate_value(model, pomdp.discount)
        _emit_json(
            {
                "windows": model.idx.size,
                "reachable": int(model.reachable.sum()),
                "v_m_star": v_star,
            },
            args.out,
        )
    else:
        _emit(model.to_csv(), args.out)
    return 0


def cmd_estimate(args) -> int:
    pomdp = _pomdp(args)
    m, T, counts, est = _learn(args, pomdp)
    if args.format == "json":
        err = estimation_error(est, build_exact(pomdp, m))
        _emit_json({"m": m, "T": T, "seed": args.seed, **err.to_dict()}, args.out)
    elif args.out and Path(args.out).is_dir():
        Path(args.out, "counts.csv").write_text(counts.to_csv(), encoding="utf-8")
        Path(args.out, "model.csv").write_text(est.to_csv(), encoding="utf-8")
    else:
        _emit(counts.to_csv(), args.out)
    return 0


def _plan(args, pomdp) -> tuple[WindowPolicy, Any]:
    if getattr(args, "exact", False):
        model = build_exact(pomdp, _single(args.m, 1, "m"))
    else:
        _, _, _, model = _learn(args, pomdp)
    q = value_iteration(model, pomdp.discount, args.K)
    return greedy(q), q


def cmd_plan(args) -> int:
    pomdp = _pomdp(args)
    pi, q = _plan(args, pomdp)
    if args.format == "json":
        _emit_json({pi.index.text(w): int(a) for w, a in enumerate(pi.actions)}, args.out)
    else:
        _emit(policy_to_csv(pi), args.out)
    return 0


def _read_policy(path: str, idx: WindowIndex) -> WindowPolicy:
    import csv

    actions = np.zeros(idx.size, dtype=np.int64)
    seen = np.zeros(idx.size, dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            w = idx.parse(row["window"])
            actions[w] = int(row["chosen_action"])
            seen[w] = True
    if not seen.all():
        raise ParameterError(f"policy file covers {int(seen.sum())} of {idx.size} windows")
    return WindowPolicy(idx, actions)


def cmd_evaluate(args) -> int:
    pomdp = _pomdp(args)
    m = _single(args.m, 1, "m")
    if args.policy:
        pi = _read_policy(args.policy, WindowIndex(pomdp.n_actions, pomdp.n_obs, m))
    else:
        pi, _ = _plan(args, pomdp)
    exact = build_exact(pomdp, pi.m)
    gamma = pomdp.discount
    mc_mean, mc_se = mc_pomdp_value(pomdp, pi, gamma, args.episodes, args.seed)
    v_star, _ = optimal_superstate_value(exact, gamma)
    result = {
        "m": pi.m,
        "v_m_policy": superstate_policy_value(exact, pi, gamma),
        "v_pomdp_policy": pomdp_policy_value(pomdp, pi, gamma),
        "v_m_star": v_star,
        "mc_mean": mc_mean,
        "mc_stderr": mc_se,
        "episodes": args.episodes,
    }
    if args.format == "json":
        _emit_json(result, args.out)
    else:
        keys = list(result)
        _emit(",".join(keys) + "\n" + ",".join(fmt(result[k]) for k in keys) + "\n", args.out)
    return 0


def cmd_audit(args) -> int:
    pomdp = _pomdp(args)
    audit = contraction_audit(pomdp, args.pairs, args.max_len, args.seed)
    gaps = []
    rng = make_rng(args.seed, 1)
    A, O = pomdp.n_actions, pomdp.n_obs
    for m in args.m or [1, 2, 3]:
        worst, passed = 0.0, True
        for _ in range(args.histories):
            h = [(int(rng.integers(A)), int(rng.integers(O))) for _ in range(m + 5)]
            rep = lemma1_gap(pomdp, m, h)
            worst = max(worst, rep.gap)
            passed &= rep.passed
        gaps.append({"m": m, "histories": args.histories, "max_gap": worst,
                     "bound": rep.bound, "pass": passed})
    _emit_json({"contraction": audit.to_dict(), "window_gap": gaps}, args.out)
    return 0 if audit.passed and all(g["pass"] for g in gaps) else 1


def cmd_bound(args) -> int:
    pomdp = _pomdp(args)
    rep = validate(pomdp)
    m = _single(args.m, 1, "m")
    res = theoretical_sample_size(
        args.eps, args.delta, m, pomdp.n_states, pomdp.n_actions, pomdp.n_obs,
        rep.alpha, rep.beta, pomdp.discount,
    )
    if args.format == "json":
        _emit_json({"T": res.T_bound, "K": res.K_bound, "m": m, "eps": args.eps, "delta": args.delta}, args.out)
    else:
        _emit(f"T={res.T_bound} K={res.K_bound}\n", args.out)
    return 0


def cmd_experiment(args) -> int:
    pomdp = _pomdp(args)
    kwargs = dict(
        pomdp=args.pomdp,
        K=args.K,
        gamma=pomdp.discount,
        runs=args.runs,
        master_seed=args.seed,
        eps=args.eps,
        delta=args.delta,
        out=args.out or "results",
        workers=args.workers,
        mode=args.mode,
        svg=not args.no_svg,
    )
    if args.m:
        kwargs["m_list"] = args.m
    if args.T:
        kwargs["T_list"] = args.T
    config = ExperimentConfig(**kwargs)
    path = figure1_sweep(config, pomdp)
    summary = summarize(read_results_csv(path.read_text(encoding="utf-8")))
    if args.format == "json":
        (path.parent / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    for m, e in summary.items():
        log.info("m=%d V*=%.6f final mean=%.6f gap=%.6f", m, e["v_m_star"], e["mean"][-1], e["gap"][-1])
    print(path)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "plan": cmd_plan,
    "evaluate": cmd_evaluate,
    "audit": cmd_audit,
    "bound": cmd_bound,
    "experiment": cmd_experiment,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except SuperstateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 9


if __name__ == "__main__":
    sys.exit(main())
