"""Command-line laboratory around the pipeline.

Subcommands run the pipeline through increasingly late stages; `all` (and its
alias `report`) runs everything.  Values resolve as defaults < config file <
flags, and FRAMELAB_OUT overrides the output directory.  The exit code is 0
only when every certificate produced by the run passed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig, apply_overrides, config_from_file
from .errors import FrameLabError
from .pipeline import run_pipeline

_SUBCOMMAND_STAGE = {
    "domain": "domain",
    "eigs": "eigs",
    "frame": "frame",
    "verify": "verify",
    "reconstruct": "reconstruct",
    "besov": "besov",
    "report": "weyl",
    "all": "weyl",
}


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--kind", help="domain kind (interval|rectangle|disk|annulus|ellipse)")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--delta", type=float, help="frame tightness parameter in (0,1)")
    p.add_argument("--a0", help="spacing constant, a number or 'calibrate'")
    p.add_argument("--eta", type=float, help="reliability cutoff factor eta (lambda <= eta/h^2)")
    p.add_argument("--tol", type=float, help="eigensolver residual tolerance")
    p.add_argument("--m", help="eigenpair count or 'auto'")
    p.add_argument("--max-level", type=int, dest="max_level", help="dyadic ladder override")
    p.add_argument("--seed", type=int, help="base seed for all randomized checks")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="generic config override, e.g. --set domain.radius=2.0",
    )


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    flag_map = {
        "out": "output.dir",
        "kind": "domain.kind",
        "h": "domain.h",
        "delta": "frame.delta",
        "a0": "frame.a0",
        "eta": "solver.eta",
        "tol": "solver.tol",
        "m": "solver.m",
        "max_level": "frame.max_level",
        "seed": "test.seed",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    for item in args.set:
        if "=" not in item:
            raise FrameLabError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = _parse_literal(raw.strip())
    return overrides


def _parse_literal(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _numeric_overrides(overrides: dict) -> dict:
    # flags arrive as strings for a0/m; keep 'auto'/'calibrate' as-is
    for key in ("frame.a0", "solver.m"):
        if key in overrides and isinstance(overrides[key], str):
            try:
                overrides[key] = float(overrides[key]) if key == "frame.a0" else int(overrides[key])
            except ValueError:
                pass
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framelab",
        description="Bandlimited localized frames on discretized domains: build, verify, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "domain": "build the grid domain and assemble the operator",
        "eigs": "additionally solve (or load) the eigenbasis",
        "frame": "additionally calibrate and build the frame",
        "verify": "additionally run the frame certificates",
        "reconstruct": "additionally run the frame-algorithm reconstruction",
        "besov": "additionally compute Besov tables and the inequality suite",
        "report": "run the full pipeline and write all outputs",
        "all": "run the full pipeline and write all outputs",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common_flags(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_file(args.config) if args.config else RunConfig().validate()
        overrides = _numeric_overrides(_collect_overrides(args))
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        env_out = os.environ.get("FRAMELAB_OUT")
        if env_out:
            cfg.out_dir = env_out
        report = run_pipeline(cfg, upto=_SUBCOMMAND_STAGE[args.command])
    except FrameLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    certs = report.get("certificates", [])
    for cert in certs:
        status = "PASS" if cert["passed"] else "FAIL"
        print(f"[{status}] {cert['name']}: value={cert['value']:.6g} threshold={cert['threshold']:.6g}")
    summary = {
        "stage": args.command,
        "out_dir": cfg.out_dir,
        "certificates": len(certs),
        "all_passed": report.get("all_passed", True),
    }
    print(json.dumps(summary))
    return 0 if report.get("all_passed", True) else 1


if __name__ == "__main__":
    sys.exit(main())
