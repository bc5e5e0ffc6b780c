"""Command-line front end: ``fogcache {eval,bound,sweep,compare,optimality,simulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import analysis, bounds, formulas
from .core import ConfigError, DemandVector, SystemConfig, validate_config, worst_case_demands
from .delivery import DecodeError, DeliveryInvariantError, latency_from_report, run_delivery
from .placement import partition_files, place_caches

log = logging.getLogger("fogcache")

CONFIG_FIELDS = ("kt", "kr", "n_files", "mu_t", "mu_r", "r", "file_bits", "seed")
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _shared_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("system")
    g.add_argument("--config", help="JSON file with SystemConfig field names; flags override")
    g.add_argument("--kt", type=int)
    g.add_argument("--kr", type=int)
    g.add_argument("--files", dest="n_files", type=int)
    g.add_argument("--mu-t", dest="mu_t", type=float)
    g.add_argument("--mu-r", dest="mu_r", type=float)
    g.add_argument("--r", type=float)
    g.add_argument("--bits", dest="file_bits", type=int)
    g.add_argument("--seed", type=int)
    o = p.add_argument_group("output")
    o.add_argument("--step", type=float, default=0.01)
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("-o", "--output", default="-")
    o.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_parser()
    parser = argparse.ArgumentParser(prog="fogcache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[shared], help="per-stage and aggregate achievable NDTs")
    sub.add_parser("bound", parents=[shared], help="cut-set lower bounds")
    sub.add_parser("sweep", parents=[shared], help="gap sweep over the (mu_t, mu_r) grid")
    sub.add_parser("compare", parents=[shared], help="two- vs single-antenna baseline")
    opt = sub.add_parser("optimality", parents=[shared], help="optimality-region checks (mu_r=0)")
    opt.add_argument("--mu-t-points", type=int, default=101)
    opt.add_argument("--r-points", type=int, default=50)
    sim = sub.add_parser("simulate", parents=[shared], help="bit-level placement + delivery")
    sim.add_argument("--stage5", choices=("a", "b"), default="a")
    sim.add_argument("--demands", help="comma-separated 1-based file indices (default: distinct)")
    return parser


def config_from_args(args) -> SystemConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(CONFIG_FIELDS)
        if unknown:
            raise ConfigError("config", f"unknown config fields: {sorted(unknown)}")
        values.update(raw)
    for name in CONFIG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return validate_config(SystemConfig(**values))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(text: str, destination: str) -> None:
    if destination == "-":
        sys.stdout.write(text)
    else:
        with open(destination, "w", newline="") as fh:
            fh.write(text)


def cmd_eval(args) -> int:
    cfg = validate_config(config_from_args(args), delivery=True)
    bd = formulas.ndt_breakdown(cfg)
    if args.format == "json":
        _write(_dump(bd.to_dict()), args.output)
        return EXIT_OK
    lines = [f"{'stage':>6} {'fronthaul':>20} {'edge':>20}"]
    for s in bd.per_stage:
        lines.append(f"{s.stage:>6} {s.fronthaul:>20.12g} {s.edge:>20.12g}")
    lines.append(f"{'a':>6} {bd.scheme_a[0]:>20.12g} {bd.scheme_a[1]:>20.12g}")
    lines.append(f"{'b':>6} {bd.scheme_b[0]:>20.12g} {bd.scheme_b[1]:>20.12g}")
    lines.append(f"serial {bd.serial:.12g}")
    lines.append(f"pipelined {bd.pipelined:.12g}")
    _write("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = config_from_args(args)
    lb = bounds.serial_lower_bound(cfg)
    pipe = bounds.pipelined_lower_bound(cfg)
    argmax = bounds.pipelined_bound_argmax(cfg)
    if args.format == "json":
        out = {"serial": lb.to_dict(), "pipelined": pipe,
               "pipelined_argmax_s": argmax}
        _write(_dump(out), args.output)
        return EXIT_OK
    active = ",".join(str(s) for s in sorted(lb.active_constraints)) or "-"
    lines = [
        f"serial delta_lb {lb.delta_lb:.12g} (delta_f {lb.delta_f:.12g}, delta_e {lb.delta_e:.12g})",
        f"active s: {active}" + ("; edge floor 1-mu_r active" if lb.edge_floor_active else ""),
        f"pipelined {pipe:.12g} (argmax s: {'1-mu_r floor' if argmax is None else argmax})",
    ]
    _write("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    result = analysis.gap_sweep(cfg.kr, cfg.r, args.step)
    analysis.emit_table(result.rows, args.format or "csv", args.output)
    log.info("max gap_s %.12g at %s, max gap_p %.12g at %s",
             result.max_gap_s, result.argmax_s, result.max_gap_p, result.argmax_p)
    sys.stderr.write(
        f"max gap_s {result.max_gap_s:.12g} at (mu_t, mu_r)={result.argmax_s}; "
        f"max gap_p {result.max_gap_p:.12g} at {result.argmax_p}\n")
    breach = min(min(r.gap_s, r.gap_p) for r in result.rows) < -analysis.GAP_TOL
    return EXIT_FAILURE if breach else EXIT_OK


def cmd_compare(args) -> int:
    cfg = config_from_args(args)
    rows = analysis.compare_baseline(cfg.kr, args.step)
    analysis.emit_table(rows, args.format or "csv", args.output)
    return EXIT_OK


def cmd_optimality(args) -> int:
    cfg = config_from_args(args)
    report = analysis.optimality_check(cfg.kr, args.mu_t_points, args.r_points)
    _write(report.summary() + "\n", args.output)
    return EXIT_OK if report.p1_passed and report.p2_passed else EXIT_FAILURE


def cmd_simulate(args) -> int:
    cfg = validate_config(config_from_args(args), delivery=True)
    if args.demands:
        demands = DemandVector(tuple(int(x) - 1 for x in args.demands.split(",")))
    else:
        demands = worst_case_demands(cfg)
    demands.validate(cfg)
    state = place_caches(cfg)
    part = partition_files(state)
    report = run_delivery(state, part, demands, args.stage5)
    empirical = latency_from_report(report, cfg)
    analytical = formulas.ndt_breakdown(cfg)
    out = report.to_dict(cfg)
    out["analytical"] = analytical.to_dict()
    out["delta"] = {
        s.stage: {"fronthaul": s.fronthaul - analytical.stage(s.stage).fronthaul,
                  "edge": s.edge - analytical.stage(s.stage).edge}
        for s in empirical.per_stage
    }
    _write(_dump(out), args.output)
    return EXIT_OK if report.all_decoded else EXIT_FAILURE


COMMANDS = {
    "eval": cmd_eval, "bound": cmd_bound, "sweep": cmd_sweep,
    "compare": cmd_compare, "optimality": cmd_optimality, "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DecodeError, DeliveryInvariantError) as exc:
        sys.stderr.write(f"delivery failure: {exc}\n")
        return EXIT_FAILURE
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
