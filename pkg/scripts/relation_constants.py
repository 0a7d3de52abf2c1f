"""Vacuum constant c(q) of g* g - q g g* for one generalized circular element.

The vacuum constant is compared with lam^2 + mu^2 and lam^2 - q mu^2; the
residual column shows how far the operator is from any multiple of Id.
"""

import argparse

import numpy as np

from qchaos import qfock as qf


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lam", type=float, default=1.0)
    parser.add_argument("--mu", type=float, default=0.6)
    parser.add_argument("--cutoff", type=int, default=4)
    args = parser.parse_args()
    weights = qf.WeightProfile(np.array([args.lam]), np.array([args.mu]))
    print(f"{'q':>5}  {'vacuum c':>9}  {'lam2+mu2':>9}  {'lam2-q mu2':>10}  {'residual':>9}")
    for q in (-1.0, -0.9, -0.5, 0.0, 0.5, 0.9, 1.0):
        space = qf.TruncatedFockSpace(1, args.cutoff, q)
        g, gs = qf.gaussian_op(space, weights, 1), qf.gaussian_adjoint(space, weights, 1)
        vac = qf.vacuum_expectation([gs, g]) - q * qf.vacuum_expectation([g, gs])
        rel = gs @ g - q * (g @ gs)
        resid = qf.operator_difference(rel, complex(vac) * qf.GradedOperator.identity(space), args.cutoff - 2)
        print(
            f"{q:5.1f}  {vac.real:9.4f}  {args.lam**2 + args.mu**2:9.4f}  {args.lam**2 - q * args.mu**2:10.4f}  {resid:9.2e}"
        )


if __name__ == "__main__":
    main()
