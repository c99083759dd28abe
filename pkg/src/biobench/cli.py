"""Command line entry point: ``biobench {enhance,metrics,synth,report}``.

Exit codes: 0 success, 1 usage error, 2 partial failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .enhance import MabeConfig
from .pipeline import (
    KNOWN_METRICS,
    RunConfig,
    UsageError,
    cmd_enhance,
    cmd_metrics,
    cmd_report,
    cmd_synth,
)

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3
SEED_ENV = "BIOBENCH_SEED"

log = logging.getLogger("biobench")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config; flags override its values")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="biobench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", parents=[common], help="enhance a directory of WAV clips")
    p.add_argument("--input-dir", type=Path)
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--method", choices=["MABE", "SpecSub", "MmseStsa", "MmseLsa", "All"])
    p.add_argument("--metrics", help=f"comma-separated subset of {','.join(KNOWN_METRICS)}")
    p.add_argument("--figures", action="store_true", help="write a spectrogram PNG per output")

    p = sub.add_parser("metrics", parents=[common], help="compare a real and a generated corpus")
    p.add_argument("--real-dir", type=Path, required=True)
    p.add_argument("--gen-dir", type=Path, required=True)
    p.add_argument("--real-embeddings", type=Path)
    p.add_argument("--gen-embeddings", type=Path)
    p.add_argument("--frechet", action="store_true", help="require the Frechet distance")
    p.add_argument("--no-isd", action="store_true", help="skip the paired ISD")
    p.add_argument("--ndb-k", type=int, default=20)
    p.add_argument("--ndb-alpha", type=float, default=0.05)
    p.add_argument("--bins", type=int, default=50, help="histogram bins per feature for JSD")
    p.add_argument("--features-dir", type=Path, help="also write feature CSVs here")
    p.add_argument("--out", type=Path, help="write JSON here instead of stdout")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic ground-truth corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--snr-list", type=float, nargs="+", default=[-5.0])

    p = sub.add_parser("report", parents=[common], help="merge enhancement reports into a table")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--out", type=Path, required=True, help="output prefix (.md/.csv/.png added)")
    p.add_argument("--no-figure", action="store_true")
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _resolve_seed(flag, conf) -> int:
    if flag is not None:
        return flag
    if "seed" in conf:
        return int(conf["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def run_config_from_args(args, conf: dict) -> RunConfig:
    def pick(flag, key, default=None):
        return flag if flag is not None else conf.get(key, default)

    metrics = args.metrics.split(",") if args.metrics else conf.get("metrics", list(KNOWN_METRICS))
    input_dir = pick(args.input_dir, "input_dir")
    output_dir = pick(args.output_dir, "output_dir")
    if input_dir is None or output_dir is None:
        raise UsageError("--input-dir and --output-dir are required (flag or config)")
    try:
        mabe = MabeConfig.from_dict(conf.get("mabe", {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid mabe config: {exc}") from exc
    return RunConfig(
        input_dir=input_dir,
        output_dir=output_dir,
        method=pick(args.method, "method", "All"),
        mabe=mabe,
        metrics=tuple(m.strip() for m in metrics if m.strip()),
        seed=_resolve_seed(args.seed, conf),
        jobs=int(pick(args.jobs, "jobs", 1)),
        figures=bool(args.figures or conf.get("figures", False)),
    )


def _run(args) -> int:
    conf = _load_config(args.config)
    if args.command == "enhance":
        cfg = run_config_from_args(args, conf)
        report, code = cmd_enhance(cfg)
        n = len(report["per_file"])
        log.info("wrote %d enhanced clips to %s", n, cfg.output_dir)
        return code
    if args.command == "metrics":
        result = cmd_metrics(
            args.real_dir, args.gen_dir,
            with_isd=not args.no_isd, frechet=args.frechet,
            real_embeddings=args.real_embeddings, gen_embeddings=args.gen_embeddings,
            ndb_k=args.ndb_k, ndb_alpha=args.ndb_alpha, bins=args.bins,
            seed=_resolve_seed(args.seed, conf), features_dir=args.features_dir,
        )
        text = json.dumps(result, indent=2, sort_keys=True) + "\n"
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.command == "synth":
        jobs = args.jobs if args.jobs is not None else int(conf.get("jobs", 1))
        if jobs < 1:
            raise UsageError("jobs must be >= 1")
        rows = cmd_synth(args.count, args.out_dir, _resolve_seed(args.seed, conf),
                         args.snr_list, jobs)
        log.info("wrote %d clips to %s", len(rows), args.out_dir)
        return EXIT_OK
    rows = cmd_report(args.reports, args.out, figure=not args.no_figure)
    sys.stdout.write(args.out.with_suffix(".md").read_text())
    log.info("merged %d methods", len(rows))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
