"""
Command-line front end.

    python -m app.cli compute --state rho.json --measures cr,cmin [--format table|json]
    python -m app.cli sweep --family plus-mix --nu-steps 101 --out plus_mix.csv
    python -m app.cli bloch --beta-steps 51 --gamma-steps 51 --out bloch.csv

Exit codes: 0 success, 2 state-file parse error, 3 validation error,
4 solver failure.
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError as PydanticValidationError

from app.api.schemas import SweepSpec
from app.config import RESULTS_DIR, SWEEP_SETTINGS
from app.exceptions import SolverFailureError, StateParseError, ValidationError
from app.models.coherence import CoherenceReport, parse_measures
from app.utils.processor import CoherenceProcessor
from app.utils.state_io import format_value, load_state_file

# Set up logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4


def _split(value: str) -> List[str]:
    return [v for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="SDP duality-gap tolerance (default 1e-8)")
    common.add_argument("--seed", type=int, default=0, help="seed of the convex-roof search")
    common.add_argument("--allow-heuristic", action="store_true",
                        help="allow convex-roof upper bounds (cf, c0) for d > 2")
    common.add_argument("--workers", type=int, default=None, help="threads for sweep rows")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="coherence", description="Coherence measures of density matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser("compute", parents=[common], help="measures of one state file")
    compute.add_argument("--state", required=True, help="JSON state file")
    compute.add_argument("--measures", type=_split, default=None, help="comma list of cr,cg,cmin,cmax,cf,c0")
    compute.add_argument("--format", choices=["table", "json"], default="table")

    sweep = sub.add_parser("sweep", parents=[common], help="noisy-mixture sweep over nu")
    sweep.add_argument("--family", choices=["plus-mix", "plus3-mix", "custom-file"], required=True)
    sweep.add_argument("--nu-steps", type=int, default=SWEEP_SETTINGS["nu_steps"])
    sweep.add_argument("--state", default=None, help="state file for the custom-file family")
    sweep.add_argument("--measures", type=_split, default=[], help="extra measures: cf,c0")
    sweep.add_argument("--out", default=None, help="output CSV path")

    bloch = sub.add_parser("bloch", parents=[common], help="qubit grid over (beta, gamma)")
    bloch.add_argument("--beta-steps", type=int, default=SWEEP_SETTINGS["beta_steps"])
    bloch.add_argument("--gamma-steps", type=int, default=SWEEP_SETTINGS["gamma_steps"])
    bloch.add_argument("--out", default=None, help="output CSV path")
    return parser


def format_table(report: CoherenceReport) -> str:
    lines = [f"dimension           {report.dim}"]
    names = [("cr", "C_r", report.c_r), ("cg", "C_g", report.c_g),
             ("cmin", "C_min", report.c_min), ("cmax", "C_max", report.c_max)]
    for key, label, value in names:
        if key in report.measures:
            lines.append(f"{label:<20}{format_value(value)}")
    for key, label, roof in (("cf", "C_f", report.c_f), ("c0", "C_0", report.c_0)):
        if key in report.measures:
            tag = "exact" if roof.exact else "upper bound"
            lines.append(f"{label:<20}{format_value(roof.value)}  ({tag})")
    lines.append(f"{'route disagreement':<20}{report.route_disagreement:.3e}" + ("  FLAGGED" if report.flagged else ""))
    return "\n".join(lines)


def cmd_compute(args, processor: CoherenceProcessor) -> int:
    rho = load_state_file(args.state)
    report = processor.compute(rho, parse_measures(args.measures) if args.measures else None)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(format_table(report))
    return EXIT_OK


def _sweep_spec(**kwargs) -> SweepSpec:
    try:
        return SweepSpec(**kwargs)
    except PydanticValidationError as e:
        raise ValidationError(f"Invalid sweep specification: {e}") from e


def cmd_sweep(args, processor: CoherenceProcessor) -> int:
    spec = _sweep_spec(family=args.family, nu_steps=args.nu_steps, state_path=args.state,
                       measures=args.measures, allow_heuristic=args.allow_heuristic, seed=args.seed)
    out = args.out or os.path.join(RESULTS_DIR, f"{args.family}.csv")
    result = processor.sweep_to_csv(spec, out)
    print(f"Wrote {len(result.rows)} rows to {out}")
    return EXIT_OK


def cmd_bloch(args, processor: CoherenceProcessor) -> int:
    spec = _sweep_spec(family="bloch-grid", beta_steps=args.beta_steps, gamma_steps=args.gamma_steps,
                       allow_heuristic=args.allow_heuristic, seed=args.seed)
    out = args.out or os.path.join(RESULTS_DIR, "bloch.csv")
    result = processor.sweep_to_csv(spec, out)
    print(f"Wrote {len(result.rows)} rows to {out}")
    return EXIT_OK


COMMANDS = {"compute": cmd_compute, "sweep": cmd_sweep, "bloch": cmd_bloch}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    processor = CoherenceProcessor(tol=args.tol, allow_heuristic=args.allow_heuristic,
                                   seed=args.seed, max_workers=args.workers)
    try:
        return COMMANDS[args.command](args, processor)
    except StateParseError as e:
        logger.error(f"Parse error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as e:
        logger.error(f"Validation error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailureError as e:
        logger.error(f"Solver failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
