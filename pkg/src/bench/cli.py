"""
cli.py
------
Command-line entry point `ee`:

    ee sweep --scenario F --var {antennas|pdbm|pilots} --range a:b:s --mode {cf|mc|opt} --out F.csv
    ee validate --scenario F --trials T --seed S
    ee figures --out DIR
    ee optimize --scenario F [--trace F.csv]

Exit codes: 0 success, 1 solver failure or failed validation, 2 bad input.
"""

import argparse
import logging
import sys

import pandas as pd

from common.config import EE_DEFAULT_SCENARIO, summary
from common.errors import ChannelError, ScenarioError, SolverError
from common.logging_conf import setup_logging
from common.storage import write_csv
from model.closed_form import EnergyModel
from model.scenario import db_to_watts, load_scenario
from optimize.joint import joint_optimize_with_traces
from optimize.states import trace_frame
from bench.figures import reproduce_figures
from bench.sweep import SweepSpec, parse_range, run_sweep
from bench.validation import run_validation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2

VARIABLE_ALIASES = {"antennas": "antennas", "pdbm": "transmit_power_dbm", "pilots": "pilot_length"}
MODE_ALIASES = {"cf": "closed-form", "mc": "monte-carlo", "opt": "optimize"}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the bad-input code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ee", description="Energy efficiency of the massive MIMO downlink.")
    parser.add_argument("--log-level", default=None, help="Override EE_LOG_LEVEL.")
    parser.add_argument("--threads", type=int, default=None, help="Override EE_THREADS.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sweep = commands.add_parser("sweep", help="Sweep EE over one variable.")
    sweep.add_argument("--scenario", default=str(EE_DEFAULT_SCENARIO))
    sweep.add_argument("--var", required=True, choices=sorted(VARIABLE_ALIASES))
    sweep.add_argument("--range", required=True, dest="grid", help="start:stop:step")
    sweep.add_argument("--mode", default="cf", choices=sorted(MODE_ALIASES))
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--trials", type=int, default=1000)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--antennas", type=int, default=None, help="Fixed N.")
    sweep.add_argument("--pdbm", type=float, default=None, help="Fixed P_d, dB relative to the noise power.")
    sweep.add_argument("--pilots", type=int, default=None, help="Fixed pilot length.")
    sweep.add_argument("--absolute-watts", action="store_true", help="Read transmit powers as watts.")

    validate = commands.add_parser("validate", help="Run the oracle suite.")
    validate.add_argument("--scenario", default=str(EE_DEFAULT_SCENARIO))
    validate.add_argument("--trials", type=int, default=10_000)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--out", default=None, help="Optional CSV report.")

    figures = commands.add_parser("figures", help="Reproduce the EE curves.")
    figures.add_argument("--out", required=True)
    figures.add_argument("--scenario", default=None)

    optimize = commands.add_parser("optimize", help="Joint antenna / power optimisation.")
    optimize.add_argument("--scenario", default=str(EE_DEFAULT_SCENARIO))
    optimize.add_argument("--trace", default=None, help="CSV of the solver iterations.")
    optimize.add_argument("--pdbm", type=float, default=None, help="Fix P_d (dB relative to noise) and select antennas only.")
    optimize.add_argument("--absolute-watts", action="store_true")
    return parser


def _sweep(args) -> int:
    model = EnergyModel(load_scenario(args.scenario))
    fixed = {}
    if args.antennas is not None:
        fixed["n_antennas"] = args.antennas
    if args.pdbm is not None:
        fixed["transmit_power_w" if args.absolute_watts else "transmit_power_db"] = args.pdbm
    if args.pilots is not None:
        fixed["pilot_length"] = args.pilots
    start, stop, step = parse_range(args.grid)
    spec = SweepSpec(
        variable=VARIABLE_ALIASES[args.var],
        start=start,
        stop=stop,
        step=step,
        mode=MODE_ALIASES[args.mode],
        fixed=fixed,
        absolute_watts=args.absolute_watts,
        trials=args.trials,
        seed=args.seed,
    )
    run_sweep(spec, model, out=args.out, threads=args.threads)
    return EXIT_OK


def _validate(args) -> int:
    model = EnergyModel(load_scenario(args.scenario))
    report = run_validation(model, args.trials, seed=args.seed, out=args.out, threads=args.threads)
    with pd.option_context("display.width", 120):
        print(report.to_string(index=False))
    return EXIT_OK if bool(report["passed"].all()) else EXIT_SOLVER


def _figures(args) -> int:
    written = reproduce_figures(args.out, scenario_path=args.scenario, threads=args.threads)
    print(written["summary"].read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _optimize(args) -> int:
    model = EnergyModel(load_scenario(args.scenario))
    transmit_power = None
    if args.pdbm is not None:
        transmit_power = args.pdbm if args.absolute_watts else db_to_watts(args.pdbm, model.config.noise_power)
    point, antenna_trace, power_trace = joint_optimize_with_traces(model, transmit_power=transmit_power)
    for key, value in point.to_dict().items():
        print(f"{key} = {value!r}")
    if args.trace:
        antenna = trace_frame(antenna_trace)
        antenna.insert(0, "solver", "antenna")
        power = trace_frame(power_trace)
        power.insert(0, "solver", "power")
        write_csv(pd.concat([antenna, power], ignore_index=True), args.trace)
    return EXIT_OK


COMMANDS = {"sweep": _sweep, "validate": _validate, "figures": _figures, "optimize": _optimize}


def main(argv=None) -> int:
    """Parse arguments, run the command and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
    except ValueError as e:
        print(f"ee: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    summary()
    try:
        return COMMANDS[args.command](args)
    except SolverError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_SOLVER
    except (ScenarioError, ChannelError, ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INPUT
    except Exception:
        logger.exception(f"Command '{args.command}' failed")
        raise


if __name__ == "__main__":
    sys.exit(main())
