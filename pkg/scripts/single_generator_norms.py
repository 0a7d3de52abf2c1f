"""Weighted L1 and L2 norms of the single-site matrix model generator across n."""

import argparse

import numpy as np

from qchaos import matrixmodel as mm
from qchaos import qfock as qf


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lam", type=float, default=1.0)
    parser.add_argument("--mu", type=float, default=1.0)
    parser.add_argument("--max-n", type=int, default=4)
    args = parser.parse_args()
    weights = qf.WeightProfile(np.array([args.lam]), np.array([args.mu]))
    print(f"{'q':>3} {'n':>2}  {'L1':>8}  {'L2':>8}")
    for q in (-1, 1):
        for n in range(1, args.max_n + 1):
            ctx = mm.MatrixModelContext(q, 1, n, weights)
            u = mm.u_n(ctx, mm.build_generator_symbol(ctx, 1))
            print(f"{q:>3} {n:>2}  {mm.weighted_lp_norm(u, 1):8.5f}  {mm.weighted_lp_norm(u, 2):8.5f}")


if __name__ == "__main__":
    main()
