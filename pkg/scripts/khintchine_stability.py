"""Free Khintchine ratio windows at p = 4 under a doubled trial count."""

import argparse
from dataclasses import replace

from qchaos import verify


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--factor", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = replace(verify.default_config("free-khintchine"), trials=args.trials, seed=args.seed)
    print(f"{'d':>2} {'m':>2}  {'window (small)':>20}  {'window (large)':>20}  change")
    for e in verify.khintchine_window_stability(cfg, p=4.0, factor=args.factor):
        (a0, a1), (b0, b1) = e["windows"]
        par = e["parameters"]
        print(f"{par['d']:>2} {par['m']:>2}  [{a0:.4f}, {a1:.4f}]  [{b0:.4f}, {b1:.4f}]  {e['relative_change']:.3f}")


if __name__ == "__main__":
    main()
