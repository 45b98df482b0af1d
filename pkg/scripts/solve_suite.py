"""Solve every builtin problem and tabulate the result against its known optimum.

    python scripts/solve_suite.py [--linear-mode conforming] [--no-search]
"""
import argparse
import time

from logds import bank
from logds.audit import check_trace
from logds.solver import SolverConfig, run


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--linear-mode", default="penalty", choices=["penalty", "conforming"])
    ap.add_argument("--no-search", action="store_false", dest="search")
    args = ap.parse_args()
    cfg = SolverConfig(linear_mode=args.linear_mode, search_enabled=args.search)

    print(f"{'problem':<12} {'status':<9} {'evals':>5} {'f':>14} {'f*':>12} "
          f"{'|f-f*|':>9} {'viol':>8} {'audit':>5} {'sec':>5}")
    for problem, f_star in bank.builtin_suite():
        t0 = time.perf_counter()
        res = run(problem, cfg)
        dt = time.perf_counter() - t0
        bf = res.best_feasible
        f = float("nan") if bf is None else bf.f
        viol = float("nan") if bf is None else bf.violation
        issues = len(check_trace(res))
        print(f"{problem.name:<12} {res.status:<9} {res.evals:>5} {f:>14.8g} {f_star:>12.6g} "
              f"{abs(f - f_star):>9.1e} {viol:>8.1e} {issues:>5} {dt:>5.2f}")


if __name__ == "__main__":
    main()
