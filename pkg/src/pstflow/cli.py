"""Command-line front end.

Exit status: 0 on success, 1 when an analysis fails (e.g. the power flow does
not converge), 2 on usage errors or unreadable/invalid case files.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import reports
from .ac_powerflow import PowerFlowError, SolveOptions, solve
from .dc_atc import DcSolveError, TransferDefinition, compute_atc
from .grid_model import CaseError, Network, load_case, strip_corrections
from .network_matrix import assemble_ybus
from .studies import angle_sweep, contingency_scan, in_service_branches, scan_violations


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("case", help="case file (JSON)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--no-correction", action="store_true",
                        help="ignore every impedance correction table in the case")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=1e-8, help="mismatch tolerance in p.u.")
    solver.add_argument("--max-iter", type=int, default=50)

    parser = _Parser(prog="pstflow", description="Power flow studies with PST impedance correction.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("solve", parents=[common, solver], help="AC power flow")
    sub.add_parser("scan", parents=[common, solver], help="AC power flow plus limit violations")

    p = sub.add_parser("sweep", parents=[common, solver], help="PST phase-angle sweep")
    p.add_argument("--pst", type=int, required=True, help="transformer branch id to sweep")
    p.add_argument("--from", dest="from_deg", type=float, required=True)
    p.add_argument("--to", dest="to_deg", type=float, required=True)
    p.add_argument("--step", dest="step_deg", type=float, default=1.0)
    p.add_argument("--track-branch", type=int)
    p.add_argument("--track-bus", type=int, nargs="+", default=[])

    p = sub.add_parser("atc", parents=[common], help="DC available transfer capability")
    p.add_argument("--seller", required=True, help="seller area label")
    p.add_argument("--buyer", required=True, help="buyer area label")

    p = sub.add_parser("contingency", parents=[common, solver], help="N-1 branch outages")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--all", action="store_true", help="every in-service branch (default)")
    group.add_argument("--branch", type=int, nargs="+", default=None)

    sub.add_parser("ybus", parents=[common], help="admittance matrix dump")
    return parser


def _options(args) -> SolveOptions:
    return SolveOptions(tolerance_pu=args.tol, max_iterations=args.max_iter)


def _report(args, net: Network) -> str:
    as_json = args.format == "json"
    cmd = args.command
    if cmd in ("solve", "scan"):
        sol = solve(net, _options(args))
        if cmd == "solve":
            return reports.dumps_json(reports.solution_dict(sol)) if as_json else reports.solution_csv(sol)
        rep = scan_violations(net, sol)
        return reports.dumps_json(reports.violations_dict(rep)) if as_json else reports.violations_csv(rep)
    if cmd == "sweep":
        res = angle_sweep(net, args.pst, args.from_deg, args.to_deg, args.step_deg,
                          track_branch=args.track_branch, track_buses=args.track_bus,
                          opts=_options(args))
        return reports.dumps_json(reports.sweep_dict(res)) if as_json else reports.sweep_csv(res)
    if cmd == "atc":
        transfer = TransferDefinition.pro_rata(net, args.seller, args.buyer)
        results = [compute_atc(net, transfer, uc) for uc in (False, True)]
        return reports.dumps_json(reports.atc_dict(results)) if as_json else reports.atc_csv(results)
    if cmd == "contingency":
        outages = args.branch if args.branch else in_service_branches(net)
        recs = contingency_scan(net, outages, _options(args))
        return reports.dumps_json(reports.contingency_dict(recs)) if as_json else reports.contingency_csv(recs)
    if cmd == "ybus":
        y = assemble_ybus(net)
        return reports.dumps_json(reports.ybus_dict(y)) if as_json else y.dump()
    raise UsageError(f"unknown command {cmd}")


def run_cli(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    try:
        net = load_case(args.case)
    except FileNotFoundError:
        print(f"pstflow: case file not found: {args.case}", file=stderr)
        return 2
    except (OSError, CaseError) as exc:
        print(f"pstflow: cannot load {args.case}: {exc}", file=stderr)
        return 2
    if args.no_correction:
        net = strip_corrections(net)

    try:
        text = _report(args, net)
    except (KeyError, ValueError) as exc:
        # bad ids or parameters named on the command line
        print(f"pstflow: {exc}", file=stderr)
        return 2
    except (PowerFlowError, DcSolveError) as exc:
        print(f"pstflow: analysis failed: {exc}", file=stderr)
        return 1

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run_cli())
