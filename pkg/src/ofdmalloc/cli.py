"""Command-line front end.

Rates cross this boundary in bits/s/Hz (internally everything runs in
nats); an SNR of X dB means a power budget of K * sigma2 * 10^(X/10).
Exit codes: 0 success/feasible, 1 usage or I/O error, 2 infeasible,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import capacity, channel, minpower, minrates, oracle, wsr
from .errors import ConvergenceError, InfeasibleError, OfdmAllocError
from .report import LN2, write_report, write_trace_csv

__all__ = ["main", "build_parser"]


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from exc


def _budget_from_args(args, gains) -> float:
    if getattr(args, "snr_db", None) is not None:
        return gains.K * gains.sigma2 * 10.0 ** (args.snr_db / 10.0)
    return args.power


def _nats(bits_list, M) -> np.ndarray:
    vec = np.asarray(bits_list, dtype=np.float64)
    if vec.size != M:
        raise ValueError(f"expected {M} values, got {vec.size}")
    return vec * LN2


def _order_string(order_1based) -> str:
    return ">".join(str(u) for u in order_1based)


def _finish_solver(args, report) -> int:
    write_report(report, args.out, include_timing=getattr(args, "timing", False))
    if getattr(args, "trace_csv", None):
        write_trace_csv(report, args.trace_csv)
    doc = report.to_dict()
    print(
        f"{report.problem}: converged={report.converged} iterations={report.iterations} "
        f"objective={report.objective!r} sum_power={report.sum_power!r} "
        f"order={_order_string(doc['order'])}"
    )
    return 0 if report.converged else 3


def _cmd_gen(args) -> int:
    taps = channel.generate_random_channel(args.users, args.carriers, args.taps, args.seed)
    channel.save_taps(taps, args.out)
    print(f"wrote {args.out}: M={args.users} K={args.carriers} L={args.taps} seed={args.seed}")
    return 0


def _cmd_solve_wsr(args) -> int:
    gains = channel.load_instance(args.instance)
    mu = wsr.check_weights(args.weights, gains.M)
    report = wsr.solve_wsr(gains, mu, _budget_from_args(args, gains))
    return _finish_solver(args, report)


def _cmd_solve_minpower(args) -> int:
    gains = channel.load_instance(args.instance)
    targets = _nats(args.rates, gains.M)
    report = minpower.solve_minpower(gains, targets)
    return _finish_solver(args, report)


def _cmd_solve_minrates(args) -> int:
    gains = channel.load_instance(args.instance)
    problem = minrates.MinRatesProblem(
        gains=gains,
        mu=np.asarray(args.weights, dtype=np.float64),
        targets=_nats(args.rates, gains.M),
        p_budget=_budget_from_args(args, gains),
    )
    if args.algorithm == "weights":
        report = minrates.solve_minrates_weights(problem)
    elif args.algorithm == "waterfill":
        report = minrates.solve_minrates_waterfill(problem)
    else:
        report = minrates.solve_minrates_weights(problem)
        other = minrates.solve_minrates_waterfill(problem)
        scale = max(abs(report.objective), abs(other.objective), 1e-300)
        report.details["cross_check"] = {
            "algorithm": "waterfill",
            "objective": other.objective,
            "rate_totals_nats": other.rate_totals,
            "objective_rel_diff": abs(report.objective - other.objective) / scale,
            "max_rate_diff_nats": float(
                np.max(np.abs(report.rate_totals - other.rate_totals))
            ),
        }
        if not other.converged:
            report.converged = False
    return _finish_solver(args, report)


def _cmd_check(args) -> int:
    gains = channel.load_instance(args.instance)
    targets = _nats(args.rates, gains.M)
    result = minrates.check_feasibility(gains, targets, _budget_from_args(args, gains))
    verdict = "boundary" if result["boundary"] else ("feasible" if result["feasible"] else "infeasible")
    print(f"{verdict} P_min={result['p_min']!r}")
    return 0 if result["feasible"] else 2


def _cmd_sweep_snr(args) -> int:
    gains = channel.load_instance(args.instance)
    mu = wsr.check_weights(args.weights, gains.M)
    targets = _nats(args.rates, gains.M)
    if args.steps < 1:
        raise ValueError("steps must be >= 1")
    snrs = np.linspace(args.from_db, args.to_db, args.steps)
    M = gains.M
    header = (
        ["snr_db"]
        + [f"R_{m + 1}" for m in range(M)]
        + [f"mustar_{m + 1}" for m in range(M)]
        + ["lambda", "order", "status"]
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for snr in snrs:
            p_budget = gains.K * gains.sigma2 * 10.0 ** (snr / 10.0)
            try:
                problem = minrates.MinRatesProblem(
                    gains=gains, mu=mu, targets=targets, p_budget=p_budget
                )
                report = minrates.solve_minrates_waterfill(problem)
            except InfeasibleError:
                writer.writerow(
                    [repr(float(snr))] + [""] * (2 * M) + ["", "", "infeasible"]
                )
                continue
            doc = report.to_dict()
            row = (
                [repr(float(snr))]
                + [repr(v) for v in doc["rate_totals_bits"]]
                + [repr(v) for v in doc["duals"]["mu_star"]]
                + [repr(doc["duals"]["lambda"]), _order_string(doc["order"]), "ok"]
            )
            writer.writerow(row)
    print(f"wrote {args.out}: {args.steps} step(s)")
    return 0


def _load_allocation(path, gains):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    side = doc.get("side")
    if side not in ("MAC", "BC"):
        raise ValueError("allocation file needs side: MAC or BC")
    if "orders" in doc:
        order = capacity.DecodingOrder.per_carrier(np.asarray(doc["orders"]) - 1)
    elif "order" in doc:
        order = capacity.DecodingOrder.global_order(np.asarray(doc["order"]) - 1)
    else:
        order = capacity.DecodingOrder.identity(gains.M)
    if "powers" in doc:
        alloc = capacity.PowerAllocation(powers=np.asarray(doc["powers"]), side=side)
    elif "rates" in doc:
        rates = capacity.RateAllocation(rates=np.asarray(doc["rates"]))
        alloc = capacity.rates_to_powers(gains, rates, order)
    else:
        raise ValueError("allocation file needs a 'powers' or 'rates' matrix")
    return alloc, order


def _cmd_transform(args) -> int:
    gains = channel.load_instance(args.instance)
    alloc, order = _load_allocation(args.allocation, gains)
    target = args.to.upper()
    if target == alloc.side:
        out = alloc
    elif target == "MAC":
        out = capacity.bc_to_mac_powers(gains, alloc, order)
    else:
        out = capacity.mac_to_bc_powers(gains, alloc, order)
    doc = {
        "side": out.side,
        "powers": [[float(v) for v in row] for row in out.powers],
        "orders": (np.asarray(order.matrix(gains.K)) + 1).tolist(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"wrote {args.out}: side={out.side} sum_power={out.sum_power()!r}")
    return 0


def _cmd_oracle(args) -> int:
    gains = channel.load_instance(args.instance)
    if args.mode == "minpower":
        result = oracle.grid_minpower(gains, _nats(args.rates, gains.M), args.resolution)
        doc = {"p_min": result["p_min"], "gap": result["gap"], "n_points": result["n_points"]}
    else:
        mu = wsr.check_weights(args.weights, gains.M)
        result = oracle.grid_wsr(gains, mu, _budget_from_args(args, gains), args.resolution)
        doc = {
            "objective": result["objective"],
            "gap": result["gap"],
            "n_points": result["n_points"],
        }
    json.dump(doc, sys.stdout, indent=1)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmalloc",
        description="Optimal rate and power allocation for multiuser OFDM channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random problem instance")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--carriers", type=int, required=True)
    p.add_argument("--taps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    def add_budget(p, required=True):
        group = p.add_mutually_exclusive_group(required=required)
        group.add_argument("--power", type=float, help="total power budget (linear)")
        group.add_argument(
            "--snr-db", type=float, help="budget as SNR: P = K * sigma2 * 10^(X/10)"
        )

    def add_report_outputs(p):
        p.add_argument("--out", required=True, help="report file (JSON)")
        p.add_argument("--trace-csv", help="also export the iteration trace as CSV")
        p.add_argument("--timing", action="store_true", help="include wall time in the report")

    p = sub.add_parser("solve-wsr", help="maximize the weighted sum rate under a power budget")
    p.add_argument("--instance", required=True)
    p.add_argument("--weights", type=_float_list, required=True)
    add_budget(p)
    add_report_outputs(p)
    p.set_defaults(func=_cmd_solve_wsr)

    p = sub.add_parser("solve-minpower", help="minimize sum power under rate requirements")
    p.add_argument("--instance", required=True)
    p.add_argument("--rates", type=_float_list, required=True, help="bits/s/Hz per user")
    add_report_outputs(p)
    p.set_defaults(func=_cmd_solve_minpower)

    p = sub.add_parser(
        "solve-minrates",
        help="maximize the weighted sum rate under rate floors and a power budget",
    )
    p.add_argument("--instance", required=True)
    p.add_argument("--weights", type=_float_list, required=True)
    p.add_argument("--rates", type=_float_list, required=True, help="bits/s/Hz per user")
    add_budget(p)
    p.add_argument(
        "--algorithm", choices=["weights", "waterfill", "both"], default="waterfill"
    )
    add_report_outputs(p)
    p.set_defaults(func=_cmd_solve_minrates)

    p = sub.add_parser("check", help="feasibility of rate requirements within a budget")
    p.add_argument("--instance", required=True)
    p.add_argument("--rates", type=_float_list, required=True, help="bits/s/Hz per user")
    add_budget(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sweep-snr", help="solve minrates across an SNR grid, CSV output")
    p.add_argument("--instance", required=True)
    p.add_argument("--weights", type=_float_list, required=True)
    p.add_argument("--rates", type=_float_list, required=True, help="bits/s/Hz per user")
    p.add_argument("--from", dest="from_db", type=float, required=True)
    p.add_argument("--to", dest="to_db", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV file")
    p.set_defaults(func=_cmd_sweep_snr)

    p = sub.add_parser("transform", help="uplink/downlink duality transform of an allocation")
    p.add_argument("--instance", required=True)
    p.add_argument("--allocation", required=True, help="allocation file (JSON)")
    p.add_argument("--to", choices=["mac", "bc"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transform)

    # fixture regeneration helper; deliberately undocumented in the README
    p = sub.add_parser("oracle")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=["wsr", "minpower"], required=True)
    p.add_argument("--weights", type=_float_list)
    p.add_argument("--rates", type=_float_list)
    p.add_argument("--resolution", type=int, default=101)
    add_budget(p, required=False)
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible P_min={exc.p_min!r}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 3
    except (OfdmAllocError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
