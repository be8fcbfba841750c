"""Command-line front end.

Subcommands::

    mpmp run CONFIG         Monte Carlo campaign -> results.csv, results.json
    mpmp trace CONFIG       one run, per-round trace -> trace.json, trace.csv
    mpmp gamma-bar M        SINR target of the energy-efficient power response
    mpmp gen-scenario CONFIG  scenario JSON -> scenario.json
    mpmp table1             outer iterations of Algorithm 2 -> table1.csv, table1.json

Output goes to ``--out``, else ``$MPMP_OUT_DIR``, else ``./out``. All
randomness comes from the config seeds or ``--seed``.

Exit status: 0 on success, 2 on invalid arguments or configuration, 1 on
runtime or I/O failure.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config
from .dynamics import Game, run_game
from .exceptions import MpmpError, ValidationError
from .experiments import run_campaign, table1_replica
from .games import gamma_bar
from .model import GameState, generate_scenario, initial_codes

log = logging.getLogger("mpmp")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be in [0, 2**64)")
    return value


def _common(p, config=True):
    if config:
        p.add_argument("config", help="TOML configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override one config value, e.g. --set campaign.trials=10 (repeatable)")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (default: $MPMP_OUT_DIR or ./out)")


def build_parser():
    parser = _Parser(prog="mpmp", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a Monte Carlo campaign")
    _common(p)
    p.add_argument("--seed", type=_seed, default=None, help="campaign base seed (overrides campaign.base_seed)")
    p.add_argument("--trials", type=_positive_int, default=None, help="trials per K (overrides campaign.trials)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (default 1)")

    p = sub.add_parser("trace", help="trace one run round by round")
    _common(p)
    p.add_argument("--game", choices=[g.value for g in Game], default=None,
                   help="game to run (default: dynamics.game)")
    p.add_argument("--seed", type=_seed, default=None, help="scenario seed (overrides scenario.seed)")
    p.add_argument("--K", type=_positive_int, default=None, help="number of users (overrides scenario.K)")

    p = sub.add_parser("gamma-bar", help="print the energy-efficient SINR target for packet length M")
    p.add_argument("M", type=int, help="bits per packet, M >= 2")

    p = sub.add_parser("gen-scenario", help="write one random scenario as JSON")
    _common(p)
    p.add_argument("--seed", type=_seed, default=None, help="scenario seed (overrides scenario.seed)")
    p.add_argument("--K", type=_positive_int, default=None, help="number of users (overrides scenario.K)")

    p = sub.add_parser("table1", help="Algorithm 2 outer iterations to E(n) < power_tol per K")
    _common(p, config=False)
    p.add_argument("--K-list", type=_positive_int, nargs="+", default=[3, 10, 25, 30],
                   help="user counts (default: 3 10 25 30)")
    p.add_argument("--trials", type=_positive_int, default=100, help="trials per K (default 100)")
    p.add_argument("--seed", type=_seed, default=0, help="base seed (default 0)")
    return parser


def _out_dir(args):
    out = args.out if args.out is not None else Path(os.environ.get("MPMP_OUT_DIR") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _scenario_config(cfg, args):
    sc_cfg = cfg.scenario
    if args.K is not None:
        sc_cfg = sc_cfg.with_users(args.K)
    if args.seed is not None:
        sc_cfg = replace(sc_cfg, seed=args.seed)
    return sc_cfg


def cmd_run(args):
    cfg = load_config(args.config, args.overrides)
    campaign = cfg.campaign(seed=args.seed, trials=args.trials)
    out = _out_dir(args)
    result = run_campaign(campaign, jobs=args.jobs)
    _write(out / "results.csv", result.to_csv())
    _write(out / "results.json", result.to_json())

    print(f"{'K':>4} {'game':<16} {'SINR dB':>9} {'bit/J':>11} {'power W':>10} {'rounds':>8} {'conv':>5} {'fail':>5}")
    for K in campaign.K_list:
        for g in campaign.games:
            row = [result.mean(K, g.game, m) for m in
                   ("sinr_db", "energy_efficiency", "power", "rounds", "converged")]
            fails = result.failures[(K, g.game.value)]
            print(f"{K:>4} {g.game.value:<16} {row[0]:>9.3f} {row[1]:>11.4g} {row[2]:>10.4g} "
                  f"{row[3]:>8.1f} {row[4]:>5.2f} {fails:>5}")
    return EXIT_OK


def cmd_trace(args):
    cfg = load_config(args.config, args.overrides)
    sc_cfg = _scenario_config(cfg, args)
    game = Game(args.game) if args.game else cfg.dynamics.game
    dyn = replace(cfg.dynamics, game=game)
    out = _out_dir(args)

    sc = generate_scenario(sc_cfg)
    st0 = GameState.initial(initial_codes(sc_cfg), cfg.efficiency.P_max)
    record = run_game(sc, st0, dyn, cfg.efficiency)
    doc = record.to_dict()
    doc["scenario_config"] = sc_cfg.to_dict()
    _write(out / "trace.json", json.dumps(doc, indent=2))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "potential", "E", "mean_sinr", "mean_power", "inner_rounds"])
    for t in record.trace:
        writer.writerow([t.round, "" if t.potential is None else repr(t.potential), repr(t.E),
                         repr(float(np.mean(t.sinr))), repr(float(np.mean(t.power))),
                         "" if t.inner_rounds is None else t.inner_rounds])
    _write(out / "trace.csv", buf.getvalue())
    print(f"{game.value}: rounds_used={record.rounds_used} converged={str(record.converged).lower()}")
    return EXIT_OK


def cmd_gamma_bar(args):
    # 10 significant digits, trailing zeros kept
    print(np.format_float_positional(gamma_bar(args.M), precision=10, unique=False,
                                     fractional=False, trim="k"))
    return EXIT_OK


def cmd_gen_scenario(args):
    cfg = load_config(args.config, args.overrides)
    sc = generate_scenario(_scenario_config(cfg, args))
    out = _out_dir(args)
    _write(out / "scenario.json", sc.to_json())
    return EXIT_OK


def cmd_table1(args):
    out = _out_dir(args)
    table = table1_replica(args.K_list, args.trials, args.seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["K", "median_iterations", "converged", "trials"])
    for K, row in table.items():
        writer.writerow([K, repr(row["median"]), row["converged"], args.trials])
        print(f"K={K:>3}  median outer iterations {row['median']:g}  converged {row['converged']}/{args.trials}")
    _write(out / "table1.csv", buf.getvalue())
    _write(out / "table1.json", json.dumps({str(K): row for K, row in table.items()}, indent=2))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "trace": cmd_trace,
    "gamma-bar": cmd_gamma_bar,
    "gen-scenario": cmd_gen_scenario,
    "table1": cmd_table1,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"mpmp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MpmpError, OSError, ArithmeticError) as exc:
        print(f"mpmp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
