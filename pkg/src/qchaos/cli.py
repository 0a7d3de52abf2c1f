"""Command line entry point: ``qchaos verify <suite> ...``.

Exit status 0 means every check passed, 1 means at least one assertion
failed and 2 means the configuration (or the command line) was invalid.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import yaml

from . import verify

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from exc
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in 0..2**64-1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qchaos", description="q-Gaussian chaos verification laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("verify", help="run a verification suite and write its report")
    run.add_argument("suite", choices=verify.SUITES + ("all",))
    run.add_argument("--config", help="YAML config; for 'all' a mapping from suite name to its section")
    run.add_argument("--seed", type=_u64, default=None, help="unsigned 64-bit seed (overrides the config)")
    run.add_argument("--out", help="report path (stdout when omitted)")
    fmt = run.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", help="JSON report (default)")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv", help="CSV table of entries")
    run.set_defaults(fmt="json")
    return parser


def _read_yaml(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, UnicodeDecodeError, yaml.YAMLError) as exc:
        raise verify.ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise verify.ConfigError("config file must hold a key-value mapping")
    return data


def resolve_configs(suite: str, path: str | None, seed: int | None) -> dict[str, verify.ExperimentConfig]:
    data = _read_yaml(path)
    if suite == "all":
        unknown = sorted(set(data) - set(verify.SUITES))
        if unknown:
            raise verify.ConfigError(f"unknown suite sections: {', '.join(map(str, unknown))}")
        sections = {s: data.get(s) or {} for s in verify.SUITES}
    else:
        sections = {suite: data}
    out = {}
    for name, section in sections.items():
        cfg = verify.config_from_mapping(name, section)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        out[name] = cfg
    return out


def run_verify(suite: str, config: str | None, seed: int | None, out: str | None, fmt: str) -> int:
    try:
        configs = resolve_configs(suite, config, seed)
        if suite == "all":
            report = verify.run_all(configs, seed if seed is not None else 0)
        else:
            report = verify.run_suite(suite, configs[suite])
    except verify.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = verify.to_csv(report) if fmt == "csv" else verify.to_json(report)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{suite}: {status}", file=sys.stderr)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run_verify(args.suite, args.config, args.seed, args.out, args.fmt)


if __name__ == "__main__":
    sys.exit(main())
