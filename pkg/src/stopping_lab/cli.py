"""Command-line front end.

Every subcommand prints a plain-text summary by default, or one JSON object
(``--json``) or CSV table (``--csv``).  Exit codes: 0 on success, 1 on a
usage or configuration error, 2 when a checked claim fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, last_success, policies, ranks, simulation
from .model import ArrivalTimes, GoogolInstance, Orientation, RandomnessSpec
from .schedule import DEFAULT_CONSTANTS, ThresholdSchedule
from .stats import CSV_FIELDS, round_sig

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
BOUND_FLOOR = 0.5007
GAMMA_RANGE = (0.5014, 0.5034)
MAX_VERIFY_WINDOW = 13


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Result:
    """Command output: a JSON payload, CSV rows and a text rendering."""

    def __init__(self, payload, rows=None, text=None, code=EXIT_OK):
        self.payload = payload
        self.rows = rows if rows is not None else [_flatten(payload)]
        self.text = text
        self.code = code


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def _render(result, fmt):
    if fmt == "json":
        return json.dumps(result.payload, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        fields = list(dict.fromkeys(k for row in result.rows for k in row))
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(result.rows)
        return buf.getvalue()
    if result.text is not None:
        return result.text.rstrip("\n") + "\n"
    return "\n".join(f"{k}: {v}" for k, v in _flatten(result.payload).items()) + "\n"


def _load_instance(text):
    """An instance from a JSON file path or an inline ``{"cards": ...}`` / ``[[a, b], ...]``."""
    path = Path(text)
    raw = path.read_text() if path.is_file() else text
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse instance: {exc}") from exc
    if isinstance(data, list):
        data = {"cards": data}
    return GoogolInstance.from_dict(data)


# --- subcommands ------------------------------------------------------------------


def cmd_bound(args):
    if args.grid_search:
        grid = np.linspace(0.05, 1.0, args.grid_points)
        c1, c2, c3, _ = bounds.grid_search_constants(grid, grid, grid)
    else:
        c1, c2, c3 = args.c1, args.c2, args.c3
    try:
        br = bounds.paper_bound(c1, c2, c3)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    g = bounds.gamma(60)
    bound_ok = br.total >= BOUND_FLOOR
    gamma_ok = GAMMA_RANGE[0] <= g.value <= GAMMA_RANGE[1]
    payload = {
        "constants": {"c1": round_sig(c1), "c2": round_sig(c2), "c3": round_sig(c3)},
        "pieces": {"tail": round_sig(br.tail), **{f"block{j}": round_sig(b) for j, b in enumerate(br.blocks)}},
        "total": round_sig(br.total),
        "gamma": round_sig(g.value),
        "gamma_tail_bound": round_sig(g.tail_bound),
        "checks": {"total_at_least": BOUND_FLOOR, "total_ok": bound_ok,
                   "gamma_range": list(GAMMA_RANGE), "gamma_ok": gamma_ok},
    }
    text = "\n".join([
        f"constants  c1={c1:.6f} c2={c2:.6f} c3={c3:.6f}",
        *(f"block {j}    {b:.6f}" for j, b in enumerate(br.blocks)),
        f"tail       {br.tail:.6f}",
        f"total      {br.total:.6f}  ({'ok' if bound_ok else 'FAIL'}: >= {BOUND_FLOOR})",
        f"gamma(60)  {g.value:.10f}  ({'ok' if gamma_ok else 'FAIL'}: in {list(GAMMA_RANGE)})",
    ])
    code = EXIT_OK if args.no_assert or (bound_ok and gamma_ok) else EXIT_FAIL
    return Result(payload, text=text, code=code)


def cmd_gamma(args):
    g = bounds.gamma(args.j_max)
    payload = g.to_dict()
    if args.truncated:
        payload["truncated"] = [{"k": k, "gamma_k": round_sig(bounds.truncated_gamma(k))} for k in args.truncated]
    rows = [{"j": j, "c_j": round_sig(c), "block": round_sig(b)}
            for j, (c, b) in enumerate(zip(g.thresholds, g.blocks))]
    text = f"gamma({args.j_max}) = {g.value:.12f}  (tail bound {g.tail_bound:.3e})"
    for t in payload.get("truncated", []):
        text += f"\ngamma_{t['k']} = {t['gamma_k']:.12f}"
    return Result(payload, rows=rows, text=text)


def cmd_thresholds(args):
    rows = []
    for j in range(args.j_max + 1):
        root = bounds.solve_optimal_threshold(j)
        rows.append({"j": j, "root": round_sig(root), "c_j": round_sig(min(1.0, 2 * root)),
                     "j_times_root": round_sig(j * root)})
    text = "\n".join(f"j={r['j']:3d}  root={r['root']:.10f}  c_j={r['c_j']:.10f}" for r in rows)
    return Result({"j_max": args.j_max, "thresholds": rows}, rows=rows, text=text)


def cmd_verify(args):
    if not 1 <= args.max_window <= MAX_VERIFY_WINDOW:
        raise UsageError(f"--max-window must lie in [1, {MAX_VERIFY_WINDOW}]")
    reports = [
        ranks.verify_rank_dominance(args.max_window),
        ranks.verify_pair_position_independence(args.max_window),
        ranks.verify_second_order_inequality(),
    ]
    summary = [{"name": r.name, "passed": r.passed, "checked": r.checked, "failures": len(r.failures)}
               for r in reports]
    payload = {"max_window": args.max_window, "passed": all(r.passed for r in reports), "verifiers": summary}
    lines = [f"{s['name']:<28} {'pass' if s['passed'] else 'FAIL'}  ({s['checked']} checks)" for s in summary]
    failing = next((r for r in reports if not r.passed), None)
    if failing is not None:
        bad = failing.failures[0]
        payload["counterexample"] = {
            "verifier": failing.name, "i": bad["i"], "j": bad["j"], "pairing": bad["pairing"],
            "lhs": ranks._frac_str(bad["lhs"]), "rhs": ranks._frac_str(bad["rhs"])}
        lines.append(f"counterexample: {payload['counterexample']}")
    return Result(payload, rows=summary, text="\n".join(lines),
                  code=EXIT_OK if failing is None else EXIT_FAIL)


def _family(args):
    instance = _load_instance(args.instance) if args.instance else None
    name = args.family or ("instance" if instance is not None else "uniform")
    if name not in ("file", "instance") and args.n is None:
        raise UsageError(f"--n is required for the {name} family")
    return simulation.family_from_config(name, n=args.n, path=args.file, p=args.p, instance=instance)


def _policy(args):
    if args.policy == "block-rank":
        return simulation.BlockRankPolicy(ThresholdSchedule.from_constants(args.c1, args.c2, args.c3))
    return simulation.AdversarialThresholdPolicy(args.order)


def _traces(policy, dist, count, seed):
    spec = RandomnessSpec(seed, 3)
    out = []
    for t in range(count):
        gen = spec.generator(t)
        inst, down, up = dist.sample(gen)
        ori = Orientation((False,) * inst.n)
        if isinstance(policy, simulation.BlockRankPolicy):
            times = ArrivalTimes(tuple(1.0 - gen.random(inst.n)))
            tr = policies.block_rank_run(inst, ori, times, policy.schedule)
        else:
            key = np.maximum(down, up)
            perm = {"ascending": np.argsort(key, kind="stable"),
                    "descending": np.argsort(-key, kind="stable"),
                    "index": np.arange(inst.n)}[policy.order]
            game = policies.AdversarialGame(inst, policies.AdversarialOrder(tuple(int(k) for k in perm)), ori)
            tr = policies.adversarial_threshold_run(game)
        d = tr.to_dict()
        d["special_events"] = [{k: (round_sig(v) if isinstance(v, float) else v) for k, v in e.items()}
                               for e in d["special_events"]]
        out.append({"trial": t, **d})
    return out


def cmd_simulate(args):
    if args.exact:
        if args.policy != "adversarial" or not args.instance:
            raise UsageError("--exact needs --policy adversarial and --instance")
        return _adversarial_exact(_load_instance(args.instance), args)
    if args.trials is None:
        raise UsageError("--trials is required")
    dist = _family(args)
    policy = _policy(args)
    report, diag = simulation.run_monte_carlo(policy, dist, args.trials, seed=args.seed,
                                              threads=args.threads, return_diagnostics=True)
    payload = {**policy.to_dict(), "family": dist.tag, "n": dist.n, **report.to_dict(),
               "diagnostics": diag.to_dict()}
    if args.trace:
        payload["traces"] = _traces(policy, dist, args.trace, args.seed)
    row = report.csv_row(policy.name, dist.tag, dist.n)
    lo, hi = report.wilson95
    text = (f"{policy.name} on {dist.tag}(n={dist.n}): {report.estimate:.6f} "
            f"[{lo:.6f}, {hi:.6f}] over {report.trials} trials (seed {report.seed})")
    if isinstance(policy, simulation.BlockRankPolicy):
        text += f"\ninvariant violations: {diag.invariant_violations}"
    return Result(payload, rows=[{k: row[k] for k in CSV_FIELDS}], text=text,
                  code=EXIT_FAIL if diag.invariant_violations else EXIT_OK)


def _adversarial_exact(inst, args):
    try:
        value, order = policies.adversarial_exact_success(inst, return_order=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payload = {"policy": "adversarial", "n": inst.n, "exact": f"{value.numerator}/{value.denominator}",
               "value": round_sig(float(value)), "worst_order": list(order.order),
               "at_least_quarter": value >= policies.Fraction(1, 4)}
    text = f"worst-case success {payload['exact']} = {float(value):.6f} with order {list(order.order)}"
    return Result(payload, text=text, code=EXIT_OK if payload["at_least_quarter"] else EXIT_FAIL)


def cmd_adversarial_exact(args):
    return _adversarial_exact(_load_instance(args.instance), args)


def cmd_last_success(args):
    n = args.n
    p = n ** (-2.0 / 3.0) if args.p is None else args.p
    try:
        S = last_success.conditioned_s_distribution(n, p)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    A = last_success.optimal_accept_set(S)
    value = last_success.monotone_rule_success(A, S)
    bound = last_success.success_upper_bound(S)
    payload = {"n": n, "p": round_sig(p), "optimal_value": round_sig(value),
               "upper_bound": round_sig(bound), "max_pmf": round_sig(S.max_prob())}
    text = f"n={n} p={p:.6g}: optimal {value:.8f}, bound {bound:.8f}"
    if args.trials:
        rep = last_success.simulate_last_success(A, n, p, args.trials, seed=args.seed)
        payload.update(simulated=round_sig(rep.estimate), ci=[round_sig(v) for v in rep.wilson95],
                       trials=rep.trials, seed=rep.seed)
        text += f"\nsimulated {rep.estimate:.6f} [{rep.wilson95[0]:.6f}, {rep.wilson95[1]:.6f}] over {rep.trials} trials"
    else:
        payload.update(simulated=None, ci=None)
    code = EXIT_OK if value <= bound else EXIT_FAIL
    return Result(payload, text=text, code=code)


def cmd_superstars(args):
    dist = _family(args)
    eps = simulation.superstar_level(dist, args.trials, seed=args.seed)
    reps = [simulation.top_pair_collision_estimate(dist, k, args.trials, seed=args.seed, epsilon=eps)
            for k in args.k]
    rows = [{"family": dist.tag, "n": dist.n, **r.to_dict()} for r in reps]
    for row in rows:
        row["wilson95"] = json.dumps(row["wilson95"])
    payload = {"family": dist.tag, "n": dist.n, "trials": args.trials, "seed": args.seed,
               "epsilon": round_sig(eps), "collisions": [r.to_dict() for r in reps]}
    text = "\n".join([f"superstar level {eps:.6f}"] + [
        f"k={r.k}: collision {r.report.estimate:.6f} vs bound {r.bound:.6f} ({'ok' if r.holds() else 'FAIL'})"
        for r in reps])
    return Result(payload, rows=rows, text=text, code=EXIT_OK if all(r.holds() for r in reps) else EXIT_FAIL)


# --- parser -----------------------------------------------------------------------


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed, unsigned 64-bit (default 0)")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", help="emit JSON")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv", help="emit CSV")
    p.add_argument("--out", type=Path, help="write output here instead of stdout")
    p.set_defaults(fmt="text")
    return p


def _constants(p):
    c1, c2, c3 = DEFAULT_CONSTANTS
    p.add_argument("--c1", type=float, default=c1, help=f"default {c1}")
    p.add_argument("--c2", type=float, default=c2, help=f"default {c2}")
    p.add_argument("--c3", type=float, default=c3, help=f"default {c3}")


def _family_flags(p):
    p.add_argument("--family", choices=["uniform", "scaled-exp", "bernoulli-hard", "file", "instance"])
    p.add_argument("--n", type=int, help="number of cards")
    p.add_argument("--p", type=float, help="bernoulli-hard probability (default n^(-2/3))")
    p.add_argument("--file", help="JSON file of per-card discrete tables for the file family")
    p.add_argument("--instance", help="instance JSON (path or inline) for the instance family")


def build_parser():
    common = _common()
    parser = _Parser(prog="stopping-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", parents=[common], help="block-rank lower bound and gamma(60)")
    _constants(p)
    p.add_argument("--no-assert", action="store_true", help="exit 0 even when a check fails")
    p.add_argument("--grid-search", action="store_true", help="maximise the bound over a grid of constants")
    p.add_argument("--grid-points", type=int, default=20, help="grid points per constant (default 20)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gamma", parents=[common], help="optimal block-rank success on i.i.d. cards")
    p.add_argument("--j-max", type=int, default=60, help="last integrated block (default 60)")
    p.add_argument("--truncated", type=int, nargs="*", help="also report gamma_k for these k")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("thresholds", parents=[common], help="optimal threshold times")
    p.add_argument("--j-max", type=int, default=30, help="default 30")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("verify", parents=[common], help="exhaustive rank-combinatorics checks")
    p.add_argument("--max-window", type=int, default=11, help=f"largest window, at most {MAX_VERIFY_WINDOW} (default 11)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo success estimate")
    p.add_argument("--policy", choices=["block-rank", "adversarial"], default="block-rank")
    _family_flags(p)
    _constants(p)
    p.add_argument("--order", choices=["ascending", "descending", "index"], default="ascending",
                   help="card order for the adversarial policy (default ascending)")
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int, help=f"worker threads (capped by {simulation.THREADS_ENV})")
    p.add_argument("--exact", action="store_true", help="exact worst-case value for --instance")
    p.add_argument("--trace", type=int, default=0, metavar="K", help="include K per-trial traces")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("adversarial-exact", parents=[common], help="exact worst-order success")
    p.add_argument("--instance", required=True, help="instance JSON (path or inline)")
    p.set_defaults(func=cmd_adversarial_exact)

    p = sub.add_parser("last-success", parents=[common], help="single-sample last success problem")
    p.add_argument("--n", type=int, default=10_000, help="default 10000")
    p.add_argument("--p", type=float, help="default n^(-2/3)")
    p.add_argument("--trials", type=int, default=0, help="simulated trials (default 0: skip)")
    p.set_defaults(func=cmd_last_success)

    p = sub.add_parser("superstars", parents=[common], help="superstar level and top-k collisions")
    _family_flags(p)
    p.add_argument("--k", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=cmd_superstars)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"stopping-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = _render(result, args.fmt)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
