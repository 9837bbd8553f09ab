"""Command-line entry point.

Exit codes: 0 success, 2 usage errors, 3 config/schema problems,
1 runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, SchemaError

__all__ = ["build_parser", "run_cli", "main"]

log = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="logbandit",
        description="Logistic-bandit experimentation toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("--out", help="override the output directory")

    descriptions = {
        "table1": "warmup sample-count comparison across methods and S",
        "warmup-bench": "simulated warmups with the planning check at theta*",
        "regret": "regret curves for the bandit policies (built-in default instance)",
        "bias": "exact 1-d estimator bias over the doubling N grid",
        "design": "solve and contrast the g and h optimal designs",
    }
    for name in ("table1", "warmup-bench", "regret", "bias"):
        common(sub.add_parser(name, help=descriptions[name]))
    sp_design = sub.add_parser("design", help=descriptions["design"])
    common(sp_design)
    sp_design.add_argument("--arms",
                           help="arm spec: circleN, gridN, or a vector file path")
    sp_design.add_argument("--theta", help="comma-separated parameter vector")
    return parser


def _parse_arm_flag(text):
    for prefix in ("circle", "grid"):
        if text.startswith(prefix) and text[len(prefix):].isdigit():
            return {"kind": prefix, "k": int(text[len(prefix):])}
    return {"kind": "file", "path": text}


def _config_data(ns):
    if ns.config:
        return json.loads(Path(ns.config).read_text())
    if ns.command == "design":
        if not (ns.arms and ns.theta):
            raise ConfigError("design needs --config or both --arms and --theta",
                              field="arms")
        return {
            "experiment": "design",
            "arms": _parse_arm_flag(ns.arms),
            "theta": [float(v) for v in ns.theta.split(",")],
        }
    if ns.command == "regret":
        return harness.standard_regret_config()
    raise ConfigError("missing --config", field="config")


def run_cli(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        data = _config_data(ns)
        if ns.seed is not None:
            data["seed"] = ns.seed
        if ns.out is not None:
            data["out"] = ns.out
        cfg = harness.config_from_dict(data)
    except (ConfigError, SchemaError, OSError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 3
    try:
        written = harness.run_experiment(cfg, command=ns.command)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        log.exception("run failed")
        print("error: %s" % exc, file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
