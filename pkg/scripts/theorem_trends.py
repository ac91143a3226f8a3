"""KS distance between scaled CTRW marginals and their limits across a scale ladder.

    python3 scripts/theorem_trends.py --theorems T1 T4 --scales 1e2 1e3 1e4 --m 20000

Writes one JSON and one CSV report per theorem into --out.
"""

import argparse
import os
import time

from corrctrw.convergence_lab import run_theorem_experiment
from corrctrw.ctrw_engine import CtrwConfig, Innovation, WeightScheme
from corrctrw.stable_rng import WaitingTimeLaw

PRESETS = {
    "T1": lambda beta: CtrwConfig(WeightScheme("finite", explicit_weights=(0.5, 0.3, 0.2)),
                                  Innovation.pareto_symmetric(1.7), WaitingTimeLaw.pareto(beta),
                                  "T1", 1.0),
    "T2": lambda beta: CtrwConfig(WeightScheme("power_law", H=0.8, alpha=1.5),
                                  Innovation.pareto_symmetric(1.5), WaitingTimeLaw.pareto(beta),
                                  "T2", 1.0),
    "T3": lambda beta: CtrwConfig(WeightScheme("zero_sum", H=0.4, alpha=1.25),
                                  Innovation.pareto_symmetric(1.25), WaitingTimeLaw.pareto(beta),
                                  "T3", 1.0),
    "T4": lambda beta: CtrwConfig(WeightScheme("power_law", H=0.75, alpha=2.0),
                                  Innovation.gaussian(), WaitingTimeLaw.pareto(beta), "T4", 1.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--theorems", nargs="+", default=sorted(PRESETS), choices=sorted(PRESETS))
    ap.add_argument("--scales", nargs="+", type=float, default=[1e2, 1e3, 1e4])
    ap.add_argument("--t-points", nargs="+", type=float, default=[1.0])
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--m", type=int, default=10_000)
    ap.add_argument("--ks-tol", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="trend_reports")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    print(f"{'theorem':8s} {'c':>10s} {'t':>5s} {'ks':>8s} {'se':>8s}")
    for th in args.theorems:
        t0 = time.time()
        rep = run_theorem_experiment(th, PRESETS[th](args.beta), args.scales, args.m,
                                     args.t_points, master_seed=args.seed, workers=args.workers,
                                     ks_tol=args.ks_tol)
        for r in rep.rows:
            print(f"{th:8s} {r['c']:10.0f} {r['t']:5.2f} {r['ks']:8.4f} {r['se']:8.4f}")
        print(f"{th}: trend={rep.trend} final_ks={'pass' if rep.final_pass else 'fail'} "
              f"({time.time() - t0:.0f}s)")
        rep.to_json(os.path.join(args.out, f"{th}.json"))
        rep.to_csv(os.path.join(args.out, f"{th}.csv"))


if __name__ == "__main__":
    main()
