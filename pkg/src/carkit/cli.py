"""``carkit`` command-line interface.

Exit codes: 0 when the analysis ran (whatever its verdict), 2 for invalid
input, 3 when the requested operation is undefined for the given data.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from carkit import car, cargen
from carkit import serialize as io
from carkit.errors import InfeasibleGamma, InfeasibleOperation, InvalidInput
from carkit.scenarios import (
    ALIASES,
    ANALYSES,
    BUILTINS,
    Report,
    Scenario,
    builtin,
    car_check_report,
    feasibility_report,
    jeffrey_report,
    mre_report,
    run_report,
)
from carkit.space import NaiveDistribution

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3


def _scenario(path: str) -> Scenario:
    doc = io.load_file(path)
    if not isinstance(doc, dict):
        raise InvalidInput("a scenario file must hold a JSON object")
    return Scenario.from_json(io.dumps(doc))


def _cmd_check(args) -> Report:
    return car_check_report(_scenario(args.file).joint())


def _cmd_feasibility(args) -> Report:
    s = _scenario(args.file)
    prior = s.prior() if ("prior" in s.payload or "joint" in s.payload) else None
    return feasibility_report(s.space(), s.observations(), prior)


def _cmd_synthesize(args) -> Report:
    s = _scenario(args.file)
    space, obs = s.space(), s.observations()
    if args.prior:
        mass = {}
        for item in args.prior.split(","):
            w, _, p = item.partition(":")
            mass[w.strip()] = io.rational(p, "prior")
        prior = NaiveDistribution(space, mass)
    else:
        prior = s.prior()
    matrix = car.caracterizing_matrix(space, obs)
    rows = [i for i, a in enumerate(matrix.atoms) if sum(prior[w] for w in a.members) > 0]
    if args.gamma:
        gamma = [io.rational(g, "gamma") for g in args.gamma.split(",")]
    else:
        sol = car.solve_gamma(matrix, rows)
        if sol.gamma is None:
            raise InfeasibleGamma(f"no nonnegative γ exists on this support ({sol.status})")
        gamma = list(sol.gamma)
    d = car.construct_car_distribution(matrix, rows, gamma, prior)
    doc = {"analysis": "synthesize", "gamma": gamma, "joint": io.dump_joint(d)}
    lines = [f"CAR joint for γ=({','.join(str(g) for g in gamma)}):"]
    lines += [f"  ({w}, {o}): {p}" for (w, o), p in d.items()]
    return Report(doc, tuple(lines))


def _cmd_cargen(args) -> Report:
    params = io.parse_cargen_params(io.load_file(args.params))
    problems = cargen.validate_params(params)
    doc = {"analysis": "cargen", "valid": not problems, "violations": problems}
    if problems:
        return Report(doc, tuple(["parameters are invalid:"] + [f"  {p}" for p in problems]))
    d = cargen.closed_form_distribution(params)
    check = car.check_car(d)
    doc["joint"] = io.dump_joint(d)
    doc["car"] = check.overall
    lines = [f"valid CARgen* parameters, q={params.q}; output satisfies CAR: {check.overall}"]
    lines += [f"  ({w}, {o}): {p}" for (w, o), p in d.items()]
    if args.samples:
        sim = cargen.simulate(params, args.samples, args.seed)
        tv = cargen.total_variation(sim.frequencies(), d)
        doc["simulation"] = {"samples": args.samples, "seed": args.seed,
                             "total_variation": round(tv, 12),
                             "mean_iterations": round(sim.mean_iterations, 12),
                             "counts": [{"world": w, "obs": o, "count": c}
                                        for (w, o), c in sorted(sim.counts.items())]}
        lines.append(f"simulation n={args.samples} seed={args.seed}: TV={tv:.6f}, "
                     f"mean iterations={sim.mean_iterations:.4f}")
    return Report(doc, tuple(lines))


def _cmd_jeffrey(args) -> Report:
    s = _scenario(args.file)
    c = io.parse_partition_constraint(s.space(), io.load_file(args.constraint))
    return jeffrey_report(s.prior(), c)


def _cmd_mre(args) -> Report:
    s = _scenario(args.file)
    constraints = io.parse_linear_constraints(s.space(), io.load_file(args.constraint))
    return mre_report(s.prior(), constraints, s.payload.get("queries"))


def _cmd_puzzle(args) -> Report:
    s = builtin(args.name, args.param)
    return run_report(s, args.analysis, samples=args.samples, seed=args.seed)


def _cmd_analyze(args) -> Report:
    return run_report(_scenario(args.file), args.analysis, samples=args.samples, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS,
                        help="output format (default: text)")

    parser = argparse.ArgumentParser(prog="carkit", parents=[common],
                                     description="Check when naive updating agrees with conditioning on runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="evaluate the CAR conditions on a joint")
    p.add_argument("file")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("feasibility", parents=[common], help="atoms, γ system and blockers of a structure")
    p.add_argument("file")
    p.set_defaults(func=_cmd_feasibility)

    p = sub.add_parser("synthesize", parents=[common], help="build a CAR joint from γ and a prior")
    p.add_argument("file")
    p.add_argument("--gamma", help="comma-separated γ values, e.g. 1/2,1/2,1/2")
    p.add_argument("--prior", help="comma-separated world:p pairs")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("cargen", parents=[common], help="validate CARgen* parameters and compute the output")
    p.add_argument("params")
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_cargen)

    p = sub.add_parser("jeffrey", parents=[common], help="Jeffrey update of the scenario prior")
    p.add_argument("file")
    p.add_argument("--constraint", required=True)
    p.set_defaults(func=_cmd_jeffrey)

    p = sub.add_parser("mre", parents=[common], help="minimum relative entropy update")
    p.add_argument("file")
    p.add_argument("--constraint", required=True)
    p.set_defaults(func=_cmd_mre)

    p = sub.add_parser("analyze", parents=[common], help="run any analysis on a scenario file")
    p.add_argument("file")
    p.add_argument("--analysis", choices=ANALYSES, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("puzzle", parents=[common], help="run an analysis on a built-in scenario")
    p.add_argument("name", choices=sorted(BUILTINS) + sorted(ALIASES))
    p.add_argument("--param", help="tie-break probability p (default 1/2)")
    p.add_argument("--analysis", choices=ANALYSES, default="car-check")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_puzzle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    fmt = getattr(args, "format", "text")
    try:
        report = args.func(args)
    except InvalidInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleOperation as exc:
        print(f"cannot perform the operation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    sys.stdout.write(report.json() if fmt == "json" else report.text())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
