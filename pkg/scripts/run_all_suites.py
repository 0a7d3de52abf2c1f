"""Run every verification suite with its config from ``configs/`` and write JSON reports.

    python scripts/run_all_suites.py --out-dir results --seed 0
"""

import argparse
import sys
import time
from pathlib import Path

from qchaos import verify

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--suites", nargs="*", default=list(verify.SUITES), choices=verify.SUITES)
    args = parser.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for suite in args.suites:
        cfg = verify.load_config(str(CONFIGS / f"{suite}.yaml"), suite)
        if args.seed is not None:
            cfg = verify.replace(cfg, seed=args.seed)
        start = time.perf_counter()
        report = verify.run_suite(suite, cfg)
        elapsed = time.perf_counter() - start
        (out_dir / f"{suite}.json").write_text(verify.to_json(report))
        failed = sorted({e["name"] for e in report["entries"] if not e["passed"]})
        print(f"{suite:16s} {'PASS' if report['passed'] else 'FAIL'}  {elapsed:6.1f}s  {', '.join(failed)}")
        status |= not report["passed"]
    return status


if __name__ == "__main__":
    sys.exit(main())
