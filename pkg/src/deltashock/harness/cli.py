"""Command line: ``deltashock <mode> --config <path> [--out PATH] [--format csv|json] [--sweep v1,v2,...]``.

Exit status: 0 on success, 2 for invalid input, 3 when a solver fails,
4 for I/O problems.
"""

from __future__ import annotations

import argparse
import logging
import sys

from deltashock.errors import DeltaShockError, IoError, ValidationError
from deltashock.harness.config import FORMATS, MODES, parse_config, with_overrides
from deltashock.harness.experiments import run_experiment
from deltashock.harness.report import write_report

log = logging.getLogger("deltashock")


def _sweep(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deltashock", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="JSON experiment configuration")
    ap.add_argument("--out", help="report path ('-' for stdout); overrides output_path")
    ap.add_argument("--format", choices=FORMATS, help="overrides output_format")
    ap.add_argument("--sweep", type=_sweep, help="comma-separated sweep values; overrides sweep")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
        cfg = with_overrides(
            parse_config(text),
            mode=args.mode,
            output_path=args.out,
            output_format=args.format,
            sweep=args.sweep,
        )
        log.info("running %s", cfg.mode)
        report = run_experiment(cfg)
        write_report(report, cfg.output_path, cfg.output_format)
        for name, ok in report.flags.items():
            log.info("%s: %s", name, "pass" if ok else "FAIL")
        for err in report.errors:
            log.warning("sample failed: %s", err)
    except ValidationError as exc:
        print(f"deltashock: invalid input: {exc}", file=sys.stderr)
        return exc.exit_code
    except DeltaShockError as exc:
        print(f"deltashock: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
