"""Penalty vs conforming treatment of linear constraints on the builtin suite.

Runs both linear modes through the CLI pipeline, then prints the profile
values at a few abscissae for each accuracy level.

    python scripts/run_ablation.py [--out ablation]
"""
import argparse
from pathlib import Path

from logds.cli import history_dims, main as cli
from logds.profiles import DEFAULT_TAUS, build_table, data_profile, performance_profile, read_histories


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="ablation")
    args = ap.parse_args()
    out = Path(args.out)
    if cli(["bench", "--out", str(out)]) != 0:
        raise SystemExit("bench failed")
    hist_dir = out / "histories"
    if cli(["profile", "--histories", str(hist_dir), "--out", str(out)]) != 0:
        raise SystemExit("profile failed")

    paths = sorted(hist_dir.glob("*.jsonl"))
    histories, dims = read_histories(paths), history_dims(paths)
    for tau in DEFAULT_TAUS:
        table = build_table(histories, tau, dims)
        perf, data = performance_profile(table), data_profile(table)
        print(f"\ntau = {tau:g}  ({len(table.problems)} problems)")
        print(f"  {'solver':<18} rho(1)  rho(2)  rho(4)  d(25)  d(100)  d(500)")
        for s in table.solvers:
            print(f"  {s:<18} {perf[s](1):.2f}    {perf[s](2):.2f}    {perf[s](4):.2f}    "
                  f"{data[s](25):.2f}   {data[s](100):.2f}    {data[s](500):.2f}")
    print(f"\nprofiles written to {out / 'profiles.csv'}")


if __name__ == "__main__":
    main()
