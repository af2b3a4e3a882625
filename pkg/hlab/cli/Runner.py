"""
Command-line front end. Each subcommand builds its harness from the merged
configuration, runs it, and writes one JSON (or CSV) document.

Exit codes: 0 every check passed, 1 usage error, 2 a hypothesis was violated,
3 a check failed (with --expect-fail: 0 on failure, 3 on an unexpected pass).
"""

import argparse
import logging
import os
import sys
from json import load
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hlab.checks import Abp, AxiomSuite, Barrier, ConeSuite, Counterexample, Viscosity
from hlab.models import Cone, Field, Operator, Radial
from hlab.models.Errors import HessianLabError, HypothesisViolated, UsageError
from hlab.models.Grid import GridDomain
from hlab.models.Hermitian import diagonal_weight_form, hermitian
from hlab.models.LabCfg import LabConfig
from hlab.models.Report import CheckReport, Status, dump_csv, dump_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_FAILED = 3

SUMMARY_COLUMNS = ["check", "subject", "max_violation", "tolerance", "status"]
RADIAL_TOLERANCE = 1e-8


class LabArgumentParser(argparse.ArgumentParser):
    """argparse that reports bad usage as UsageError instead of exiting with 2."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (see config_dist.json)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="report path; standard output when omitted")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--expect-fail", action="store_true",
                        help="the requested checks are expected to fail")
    common.add_argument("--log-level")

    parser = LabArgumentParser(prog="hessian-lab", description="Numerical checks for Hessian-type operators.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=LabArgumentParser)

    op = sub.add_parser("verify-operator", parents=[common], help="operator axiom suite")
    _operator_flags(op)
    op.add_argument("--samples", type=int)
    op.add_argument("--background", choices=["identity", "diagonal_weight"], default="identity")
    op.add_argument("--weight", type=float, default=1.0)

    cones = sub.add_parser("cones", parents=[common], help="cone invariance, convexity and inclusion")
    cones.add_argument("--cone", choices=["positive", "gamma_m", "m_monge", "interp"], default="gamma_m")
    cones.add_argument("--n", type=int)
    cones.add_argument("--m", type=int)
    cones.add_argument("--a", type=float)
    cones.add_argument("--samples", type=int, default=500)

    ce = sub.add_parser("counterexample", parents=[common], help="singular Pogorelov-type example")
    ce.add_argument("--check", choices=["ma-identity", "nonstrict-max", "linearized-gap", "all"], default="all")
    ce.add_argument("--n", type=int, default=3)
    ce.add_argument("--R", type=float, default=0.5)
    ce.add_argument("--points", type=int)
    ce.add_argument("--fd", action="store_true", help="also check the identity with finite differences")

    radial = sub.add_parser("radial-ma", parents=[common], help="radial Monge-Ampere barrier solve")
    radial.add_argument("--density", default="constant:1")
    radial.add_argument("--n", type=int)
    radial.add_argument("--M", type=int)
    radial.add_argument("--q", type=float, default=2.0)

    abp = sub.add_parser("abp", parents=[common], help="one ABP instance")
    abp.add_argument("--instance", default="ma-n2-quadratic",
                     help="id from the default corpus, or 'zero-rhs' for the g = 0 case")
    abp.add_argument("--points", type=int)
    _exponent_flags(abp)

    sweep = sub.add_parser("abp-sweep", parents=[common], help="realized ABP constants over a family")
    sweep.add_argument("--family", choices=["corpus", "radius", "scaling", "exponent"], default="corpus")
    sweep.add_argument("--points", type=int)
    _operator_flags(sweep)
    _exponent_flags(sweep)

    mp = sub.add_parser("max-principle", parents=[common], help="strong-form maximum principle corpus")
    mp.add_argument("--control", action="store_true", help="add the u = -|z|^2 control")
    mp.add_argument("--per-axis", type=int)

    visc = sub.add_parser("viscosity", parents=[common], help="viscosity subsolution checks over a test corpus")
    visc.add_argument("--check", choices=["subsolution", "additivity", "all"], default="all")
    visc.add_argument("--field", choices=sorted(Field.FIELDS), default="quadratic")
    visc.add_argument("--scale", type=float, default=1.0, help="check scale * field")
    visc.add_argument("--rhs", default="self", help="'self' for f = G(D^2u), or a constant")
    visc.add_argument("--R", type=float, default=0.5, help="radius of the lattice ball")
    visc.add_argument("--per-axis", type=int)
    _operator_flags(visc)
    return parser


def _operator_flags(p: argparse.ArgumentParser):
    p.add_argument("--op", choices=[k.value for k in Operator.OperatorKind if k != Operator.OperatorKind.COMBINATION])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--a", type=float)


def _exponent_flags(p: argparse.ArgumentParser):
    p.add_argument("--r", dest="r_exp", type=float)
    p.add_argument("--p", dest="p_exp", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--corollary", action="store_true")


def load_config(args: argparse.Namespace, environ: Dict[str, str]) -> LabConfig:
    """Defaults < config file < flags < HESSIANLAB_SEED."""
    document = {}
    if args.config:
        try:
            with open(args.config) as f:
                document = load(f)
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from e
    cfg = LabConfig(document)
    overrides = [
        (cfg.lab, "seed", args.seed), (cfg.lab, "workers", args.workers), (cfg.lab, "log_level", args.log_level),
        (cfg.output, "format", args.format), (cfg.output, "path", args.out),
    ]
    for name in ("op", "n", "m", "l", "a", "samples"):
        overrides.append((cfg.operator, "id" if name == "op" else name, getattr(args, name, None)))
    for name in ("r_exp", "p_exp", "k", "M"):
        overrides.append((cfg.abp, name, getattr(args, name, None)))
    overrides.append((cfg.grid, "points", getattr(args, "points", None)))
    overrides.append((cfg.grid, "per_axis", getattr(args, "per_axis", None)))
    for section, name, value in overrides:
        if value is not None:
            setattr(section, name, value)
    if getattr(args, "corollary", False):
        cfg.abp.corollary = True
    return cfg.apply_environment(environ)


def _operator(cfg: LabConfig, background=None) -> Operator.Operator:
    o = cfg.operator
    try:
        return Operator.build(o.id, o.n, m=o.m, l=o.l, a=o.a, background=background)
    except ValueError as e:
        raise UsageError(str(e)) from e


def cmd_verify_operator(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    n = cfg.operator.n
    background = diagonal_weight_form(n, args.weight) if args.background == "diagonal_weight" else None
    op = _operator(cfg, background)
    witnesses = None
    if op.kind == Operator.OperatorKind.HESSIAN_QUOTIENT and n == 3:
        witnesses = [hermitian(np.diag([64.0, 1.0, 1.0]))]
    suite = AxiomSuite.run_suite(op, cfg.operator.samples, seed=cfg.lab.seed, workers=cfg.lab.workers,
                                 witnesses=witnesses)
    return list(suite.values()), None


def cmd_cones(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    n = args.n or cfg.operator.n
    m = args.m or cfg.operator.m
    a = cfg.operator.a if args.a is None else args.a
    try:
        if args.cone == "positive":
            cone = Cone.positive_cone(n)
        elif args.cone == "gamma_m":
            cone = Cone.gamma_m(n, m)
        elif args.cone == "m_monge":
            cone = Cone.m_monge(n, m)
        else:
            cone = Cone.interp(a, n)
    except (ValueError, HessianLabError) as e:
        raise UsageError(str(e)) from e
    seed, workers = cfg.lab.seed, cfg.lab.workers
    return [
        ConeSuite.check_unitary_invariance(cone, args.samples, seed, workers),
        ConeSuite.check_convexity(cone, args.samples, seed + 1, workers),
        ConeSuite.check_contains_positive(cone, args.samples, seed + 2),
    ], None


def cmd_counterexample(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    if args.R <= 0:
        raise UsageError(f"--R must be positive, got {args.R}")
    reports, csv = [], None
    points, seed = cfg.grid.points, cfg.lab.seed
    if args.check in ("ma-identity", "all"):
        grid = GridDomain.sampled(args.n, radius=cfg.grid.radius, count=points, seed=seed)
        reports.append(Counterexample.verify_ma_identity(args.n, grid))
        if args.fd:
            reports.append(Counterexample.verify_ma_identity(args.n, grid, use_fd=True))
    if args.check in ("nonstrict-max", "all"):
        grid = GridDomain.sampled(args.n, radius=args.R, count=points, seed=seed)
        reports.append(Counterexample.verify_nonstrict_max(args.n, args.R, grid))
    if args.check in ("linearized-gap", "all"):
        if args.n != 3:
            raise UsageError("the linearized gap is defined for n = 3")
        grid = GridDomain.sampled(3, radius=args.R, count=points, seed=seed)
        report, csv = Counterexample.verify_linearized_gap(args.R, grid, with_csv=True)
        reports.append(report)
    return reports, csv if args.check == "linearized-gap" else None


def cmd_radial_ma(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    n = args.n or cfg.operator.n
    M = cfg.abp.M
    try:
        density = Radial.from_tag(args.density)
    except ValueError as e:
        raise UsageError(str(e)) from e
    profile = Barrier.radial_ma_solve(density, n, M)
    tangential, radial = profile.branches(profile.r[1:-1])
    convexity = float(-min(np.min(tangential), np.min(radial)))
    deficit = profile.sup_deficit()
    extra = {"density": density.tag, "n": n, "M": M, "sup_neg_rho": deficit}
    violation = convexity
    if args.density.startswith("constant:"):
        expected = (float(args.density.split(":")[1]) / Radial.ma_normalization(n)) ** (1.0 / n)
        extra["expected_sup_neg_rho"] = expected
        violation = max(violation, abs(deficit - expected))
    try:
        extra["kolodziej_ratio"] = Barrier.kolodziej_ratio(density, args.q, n, M)
        extra["q"] = args.q
    except HessianLabError as e:
        logger.warning("No Kolodziej ratio: %s", e)
    report = CheckReport(name="radial_ma", grid_size=len(profile.r), max_violation=violation, tolerance=RADIAL_TOLERANCE,
                         margin=-convexity, anchor="(dd^c rho)^n = g dV, rho = 0 on the sphere", extra=extra)
    return [report], profile.to_csv()


def _abp_config(cfg: LabConfig, n: int) -> Abp.AbpConfig:
    return Abp.AbpConfig(n=n, r_exp=cfg.abp.r_exp, p_exp=cfg.abp.p_exp, k=cfg.abp.k, M=cfg.abp.M,
                         seed=cfg.lab.seed, corollary=cfg.abp.corollary, points=min(cfg.grid.points, 4000))


def cmd_abp(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    if args.instance == "zero-rhs":
        n = cfg.operator.n
        abp_cfg = _abp_config(cfg, n)
        grid = abp_cfg.grid_for(None, 1.0)
        inst = Abp.zero_rhs_instance(Operator.monge_ampere(n), Field.pluriharmonic(n, "linear"), grid)
        return [Abp.abp_estimate_check(inst, abp_cfg)], None
    corpus = {member.instance_id: member for member in Abp.default_abp_corpus()}
    if args.instance not in corpus:
        raise UsageError(f"unknown instance {args.instance!r}; known: {', '.join(corpus)}, zero-rhs")
    member = corpus[args.instance]
    abp_cfg = Abp.member_config(member, _abp_config(cfg, member.op.n))
    abp_cfg.validate()
    return [Abp.run_member(member, abp_cfg)], None


def cmd_abp_sweep(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    if args.family == "corpus":
        family = Abp.default_abp_corpus()
    else:
        op = _operator(cfg)
        if args.family == "radius":
            family = Abp.radius_family(op)
        elif args.family == "scaling":
            family = Abp.scaling_family(op, Field.perturbed_quadratic(op.n))
        else:
            family = Abp.exponent_family(op, Field.quadratic(op.n))
    table = Abp.constant_sweep(family, _abp_config(cfg, family[0].op.n), cfg.lab.workers)
    summary = Abp.corpus_summary(table)
    summary["running_max"] = table.running_max
    guard = CheckReport(name="corpus_regression", grid_size=len(family), max_violation=float(summary["outliers"]),
                        tolerance=0.0, anchor="no realized constant above 10x the median", extra=summary)
    return table.reports + [guard], table.to_csv()


def cmd_max_principle(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    cases = Abp.default_max_principle_corpus(cfg.grid.per_axis)
    if args.control:
        cases.append(Abp.negative_control_case(cfg.grid.per_axis))
    return [Abp.run_max_principle(case) for case in cases], None


def cmd_viscosity(args, cfg: LabConfig) -> Tuple[List[Any], Optional[str]]:
    if args.R <= 0:
        raise UsageError(f"--R must be positive, got {args.R}")
    op = _operator(cfg)
    n = op.n
    params = {"R": args.R} if args.field == "phi_R" else {}
    try:
        u = Field.build_field(args.field, n, **params)
        rhs = None if args.rhs == "self" else float(args.rhs)
        grid = GridDomain.tensor(n, radius=args.R, per_axis=cfg.grid.per_axis)
    except ValueError as e:
        raise UsageError(str(e)) from e
    if args.scale != 1.0:
        u = u.scaled(args.scale)
    tests = Viscosity.default_test_corpus(n, args.R)
    reports = []
    if args.check in ("subsolution", "all"):
        reports.append(Viscosity.subsolution_check(op.evaluate, u, tests, grid, rhs=rhs, label=op.name))
    if args.check in ("additivity", "all"):
        u2 = Field.perturbed_quadratic(n)
        coeffs = Operator.linearize(op, u2.hessian)
        reports.append(Viscosity.additivity_check(coeffs, u, u2, tests, grid))
    return reports, None


COMMANDS = {
    "verify-operator": cmd_verify_operator,
    "cones": cmd_cones,
    "counterexample": cmd_counterexample,
    "radial-ma": cmd_radial_ma,
    "abp": cmd_abp,
    "abp-sweep": cmd_abp_sweep,
    "max-principle": cmd_max_principle,
    "viscosity": cmd_viscosity,
}


def _status(report: Any) -> Status:
    if isinstance(report, CheckReport):
        return report.status
    return Status.PASS if report.passed else Status.FAIL


def exit_code(reports: Sequence[Any], expect_fail: bool) -> int:
    statuses = [_status(r) for r in reports]
    if Status.HYPOTHESIS_VIOLATED in statuses:
        return EXIT_HYPOTHESIS
    failed = Status.FAIL in statuses
    if expect_fail:
        return EXIT_OK if failed else EXIT_FAILED
    return EXIT_FAILED if failed else EXIT_OK


def render(command: str, cfg: LabConfig, reports: Sequence[Any], csv: Optional[str]) -> str:
    if cfg.output.format == "csv":
        if csv is not None:
            return csv
        rows = [[d["check"], d.get("operator", d.get("field", "")), d["max_violation"], d.get("tolerance", ""),
                 d.get("status", "pass" if d["pass"] else "fail")] for d in (r.to_dict() for r in reports)]
        return dump_csv(SUMMARY_COLUMNS, rows)
    document = {
        "command": command,
        "config": cfg.to_dict(),
        "pass": all(_status(r) == Status.PASS for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    return dump_json(document)


def write(text: str, path: Optional[str], stdout) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        stdout.write(text)


def run(argv: Optional[Sequence[str]] = None, environ: Optional[Dict[str, str]] = None, stdout=None, stderr=None) -> int:
    environ = os.environ if environ is None else environ
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args, environ)
        logging.getLogger("hlab").setLevel(cfg.lab.log_level.upper())
        logger.info("Running %s with seed %d", args.command, cfg.lab.seed)
        reports, csv = COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"hessian-lab: error: {e}", file=stderr)
        return EXIT_USAGE
    except HypothesisViolated as e:
        print(f"hessian-lab: {e}", file=stderr)
        report = CheckReport.hypothesis_violated(args.command, 0, e)
        write(render(args.command, cfg, [report], None), cfg.output.path, stdout)
        return EXIT_HYPOTHESIS
    except HessianLabError as e:
        print(f"hessian-lab: error: {e}", file=stderr)
        return EXIT_USAGE

    write(render(args.command, cfg, reports, csv), cfg.output.path, stdout)
    code = exit_code(reports, args.expect_fail)
    logger.info("Finished %s: exit %d", args.command, code)
    return code
