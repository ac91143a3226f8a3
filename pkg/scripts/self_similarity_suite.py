"""Two-scale KS checks for E_t, A(E_t), W_H(E_t) and L_{alpha,H}(E_t).

    python3 scripts/self_similarity_suite.py --m 100000 --c 3
"""

import argparse
import time

from corrctrw.convergence_lab import self_similarity_check
from corrctrw.process_gen import (
    lfsm_marginal,
    sample_fbm_of_inverse,
    sample_inverse_subordinator,
    sample_levy_of_inverse,
)
from corrctrw.stable_rng import RngStream, StableParams


def cases():
    def inverse(beta):
        return lambda t, n, g: sample_inverse_subordinator(beta, t, n, g)[:, 0]

    def levy(p, beta):
        def f(t, n, g):
            return sample_levy_of_inverse(p, beta, t, n, g, E=inverse(beta)(t, n, g))
        return f

    def fbm(H, beta):
        def f(t, n, g):
            return sample_fbm_of_inverse(H, beta, t, n, g, E=inverse(beta)(t, n, g))
        return f

    def lfsm(p, H, beta):
        return lambda t, n, g: lfsm_marginal(p, H, inverse(beta)(t, n, g), n, g)

    return [
        ("E_t, beta=0.7", inverse(0.7), 0.7),
        ("A(E_t), alpha=1.7, beta=0.68", levy(StableParams(1.7), 0.68), 0.4),
        ("W_H(E_t), H=0.6, beta=0.5", fbm(0.6, 0.5), 0.3),
        ("L(E_t), alpha=1.5, H=0.75, beta=0.8", lfsm(StableParams(1.5), 0.75, 0.8), 0.6),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=100_000)
    ap.add_argument("--c", type=float, default=3.0)
    ap.add_argument("--tol", type=float, default=0.03)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    for i, (name, sampler, h) in enumerate(cases()):
        t0 = time.time()
        row = self_similarity_check(sampler, h, args.c, args.m, RngStream(args.seed, i),
                                    tol=args.tol)
        print(f"{name:38s} h={h:.3f} KS={row['ks']:.4f} (se {row['se']:.4f}) "
              f"{'pass' if row['pass'] else 'fail'} [{time.time() - t0:.0f}s]")


if __name__ == "__main__":
    main()
