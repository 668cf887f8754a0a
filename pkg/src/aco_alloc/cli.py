"""Command-line entry point: ``aco-alloc run`` and ``aco-alloc validate-waveform``."""

from __future__ import annotations

import argparse
import sys

from .errors import AcoError
from .experiment import emit_csv, load_config, run_sweep, waveform_suite, with_seed


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aco-alloc", description="ACO-OFDM power allocation sweeps")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the sweep described by a config file and write CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="CSV path (overrides [output] path)")
    run.add_argument("--seed", type=_u64, help="overrides [run] seed")
    val = sub.add_parser("validate-waveform", help="Monte Carlo checks of the time-domain identities")
    val.add_argument("--config", required=True)
    val.add_argument("--seed", type=_u64)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
        if args.command == "run":
            out = args.out or cfg.output_path
            if not out:
                print("aco-alloc: no output path (use --out or [output] path)", file=sys.stderr)
                return 2
            records = run_sweep(cfg)
            emit_csv(records, out)
            failed = [r for r in records if not r.ok]
            for r in failed:
                print(f"aco-alloc: {r.model} at {r.sweep_var}={r.sweep_value:g}: {r.status}: {r.message}", file=sys.stderr)
            print(f"wrote {len(records)} rows to {out}")
            return 1 if failed else 0
        checks = waveform_suite(cfg)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (limit {c.limit:g})")
        return 0 if all(c.passed for c in checks) else 1
    except AcoError as exc:
        print(f"aco-alloc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
