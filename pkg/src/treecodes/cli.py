"""Command-line entry point: ``treecodes <exponents|anytime|complexity|control>``."""
from __future__ import annotations

import argparse
import sys

from . import harness


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecodes",
                                     description="Tree-code and networked-control campaigns.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("exponents", "error-exponent curves over a rate grid"),
                       ("anytime", "first-error-event profile and fitted exponent"),
                       ("complexity", "tail of the sequential-decoding work"),
                       ("control", "closed-loop cart-stick campaign")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=0, help="64-bit master seed")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
    return parser


def load_config(kind: str, path: str | None) -> harness.CampaignConfig:
    if path is None:
        return harness.CampaignConfig(kind)
    with open(path) as fh:
        raw = harness.parse_keyvalue(fh.read())
    if raw.setdefault("kind", kind) != kind:
        raise SystemExit(f"config is for {raw['kind']!r}, not {kind!r}")
    return harness.CampaignConfig.from_mapping(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.command, args.config)
    if args.command == "exponents":
        tables = {"main": harness.cmd_exponents(cfg, args.seed)}
        note = f"{len(tables['main'].rows)} rates"
    elif args.command == "anytime":
        table, profile = harness.cmd_anytime(cfg, args.seed, args.workers)
        tables = {"main": table}
        note = f"beta_hat = {profile.beta_hat:.4f} over d in [{cfg.d0}, {cfg.d_max}]"
    elif args.command == "complexity":
        table, summary = harness.cmd_complexity(cfg, args.seed, args.workers)
        tables = {"main": table}
        note = (f"mean W = {summary['mean_w']:.3f}, rho_hat = {summary['rho_hat']:.3f}, "
                f"rho = {summary['rho_theory']:.3f}")
    else:
        trials, trace, table = harness.cmd_control(cfg, args.seed, args.workers)
        tables = {"main": table, "trials": trials, "trace": trace}
        note = "; ".join(f"k={r[0]} mean LQR {float(r[4]):.1f}" for r in table.rows)
    for path in harness.write_outputs(args.out, tables):
        print(f"wrote {path}")
    print(note)
    return 0


if __name__ == "__main__":
    sys.exit(main())
