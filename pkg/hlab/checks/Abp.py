"""
Harnesses for the maximum principle of linear operators with trace-bounded
coefficients, and for the ABP-type bound sup(-u) <= C ||g_+||_{L^p} through a
Monge-Ampere barrier on the rescaled ball.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from hlab.checks.Barrier import radial_ma_solve
from hlab.checks.Sweep import SamplePool
from hlab.models import Operator as ops
from hlab.models.Errors import HypothesisViolated, OffCone, ZeroRightHandSide
from hlab.models.Field import (EXCLUSION_FACTOR, DEFAULT_STEP, ScalarField, fd_gradient_norm,
                               perturbed_quadratic, pluriharmonic, pogorelov_u, quadratic)
from hlab.models.Grid import GridDomain, angular_sample
from hlab.models.Hermitian import pairing
from hlab.models.Operator import CoefficientField, Operator
from hlab.models.Radial import ma_normalization, tabulated
from hlab.models.Report import CheckReport, dump_csv

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-10
SUPERSOLUTION_TOLERANCE = 1e-8
BOUNDARY_TOLERANCE = 1e-12
DOMINATION_TOLERANCE = 1e-6
DEGENERATE_TOLERANCE = 1e-9
MAJORANT_SAFETY = 1.01
MAJORANT_NODES = 65
GEOMETRIC_FACTOR = 4.0
BOUNDARY_RANDOM_DIRECTIONS = 256
BOUNDARY_REFINE_STARTS = 4

SWEEP_COLUMNS = ["instance_id", "n", "p", "r", "k", "delta", "sup_neg_u", "lp_norm", "realized_C", "pass"]


@dataclass
class AbpConfig:
    """
    Exponents and discretization for one ABP run; q = p/n feeds the barrier.
    Unset r, p default to n + 1, unset k and delta to the operator's own.
    """
    n: int
    r_exp: Optional[float] = None
    p_exp: Optional[float] = None
    k: Optional[float] = None
    delta: Optional[float] = None
    grid_kind: str = "sampled"
    per_axis: int = 9
    points: int = 4000
    seed: int = 0
    corollary: bool = False
    M: int = 256

    @property
    def q_exp(self) -> float:
        return self.p_exp / self.n

    def resolved(self, op: Optional[Operator] = None) -> "AbpConfig":
        return replace(
            self,
            r_exp=float(self.n + 1) if self.r_exp is None else float(self.r_exp),
            p_exp=float(self.n + 1) if self.p_exp is None else float(self.p_exp),
            k=float(op.degree_k if op is not None else self.n) if self.k is None else float(self.k),
            delta=float(op.delta if op is not None else 1.0) if self.delta is None else float(self.delta),
        )

    def validate(self):
        if self.corollary:
            if not (self.p_exp >= 1.0 and self.p_exp > self.n / self.k):
                raise HypothesisViolated(f"p >= 1 and p > n/k (p={self.p_exp}, n={self.n}, k={self.k})")
        else:
            if not self.r_exp > self.n:
                raise HypothesisViolated(f"r > n (r={self.r_exp}, n={self.n})")
            if not self.p_exp > self.n:
                raise HypothesisViolated(f"p > n (p={self.p_exp}, n={self.n})")
            if not self.q_exp > 1.0:
                raise HypothesisViolated(f"q = p/n > 1 (q={self.q_exp})")

    def grid_for(self, center, radius: float, u: Optional[ScalarField] = None) -> GridDomain:
        if self.grid_kind == "tensor":
            grid = GridDomain.tensor(self.n, center, radius, self.per_axis)
        else:
            grid = GridDomain.sampled(self.n, center, radius, self.points, self.seed)
        if u is not None and u.singular_distance is not None:
            grid = grid.excluding(u.singular_distance, EXCLUSION_FACTOR * DEFAULT_STEP)
        return grid


@dataclass
class SupersolutionInstance:
    """u with G(z, D^2u) = g on the grid and u >= 0 on the sampled boundary."""
    instance_id: str
    u: ScalarField
    op: Operator
    grid: GridDomain
    g: np.ndarray
    hessian: np.ndarray
    boundary_min: float

    @property
    def center(self) -> np.ndarray:
        return self.grid.center

    @property
    def radius(self) -> float:
        return self.grid.radius


def boundary_minimum(u: ScalarField, grid: GridDomain, seed: int = 0) -> Tuple[float, np.ndarray]:
    """
    Minimum of u on the sphere bounding the grid: the angular sample plus random
    directions, then a few Nelder-Mead refinements from the best of them.
    """
    n = grid.n
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((BOUNDARY_RANDOM_DIRECTIONS, 2 * n))
    extra = x[:, :n] + 1j * x[:, n:]
    directions = np.concatenate([angular_sample(n), extra / np.linalg.norm(extra, axis=-1, keepdims=True)])
    points = grid.center + grid.radius * directions
    values = u.value(points)

    def on_sphere(v: np.ndarray) -> np.ndarray:
        w = v[:n] + 1j * v[n:]
        return grid.center + grid.radius * w / np.linalg.norm(w)

    best_value = float(np.min(values))
    best_point = points[int(np.argmin(values))]
    for index in np.argsort(values)[:BOUNDARY_REFINE_STARTS]:
        d = directions[index]
        start = np.concatenate([d.real, d.imag])
        result = minimize(lambda v: float(u.value(on_sphere(v))), start, method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 20000})
        if result.fun < best_value:
            best_value, best_point = float(result.fun), on_sphere(result.x)
    return best_value, best_point


def make_supersolution(op: Operator, u: ScalarField, grid: GridDomain, shift: bool = True,
                       instance_id: str = "") -> SupersolutionInstance:
    """g := G(z, D^2u) on the grid; with `shift`, u is moved so its boundary minimum is 0."""
    hess = u.hessian(grid.points)
    g = np.asarray(op.evaluate(grid.points, hess))
    if not np.all(np.isfinite(g)):
        bad = int(np.argmax(~np.isfinite(g)))
        raise OffCone(f"D^2 {u.field_id} leaves the cone of {op.name}", grid.points[bad])
    low, _ = boundary_minimum(u, grid)
    if shift:
        u = u.plus(-low)
        low = 0.0
    return SupersolutionInstance(instance_id or f"{op.name}:{u.field_id}", u, op, grid, g, hess, low)


def zero_rhs_instance(op: Operator, u: ScalarField, grid: GridDomain, instance_id: str = "") -> SupersolutionInstance:
    """g = 0 for a u whose Hessian sits on the closed cone's edge (G(z, D^2u) <= 0 holds trivially)."""
    low, _ = boundary_minimum(u, grid)
    u = u.plus(-low)
    hess = u.hessian(grid.points)
    return SupersolutionInstance(instance_id or f"{op.name}:{u.field_id}:zero", u, op, grid,
                                 np.zeros(grid.size), hess, 0.0)


def rhs_norm(grid: GridDomain, g_plus: np.ndarray, p: float) -> float:
    norm = grid.lp_norm(g_plus, p)
    if norm <= 0.0:
        raise ZeroRightHandSide("g_+ vanishes on the grid")
    return norm


def radial_majorant(
inst: SupersolutionInstance, scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Node values of g_hat >= g_+ on the rescaled ball: each node takes the largest
    sampled value in its two neighbouring radial bins, times the safety factor.
    """
    c, d = inst.center, inst.radius
    radii = np.linspace(0.0, 1.0, MAJORANT_NODES)
    rays = (c + d * radii[:, None, None] * angular_sample(inst.grid.n)[None, :, :]).reshape(-1, inst.grid.n)
    clear = inst.u.distance_to_singular(rays) >= inst.grid.exclusion
    rays = rays[clear]
    ray_g = np.asarray(inst.op.evaluate(rays, inst.u.hessian(rays)))

    sample_r = np.concatenate([np.linalg.norm(inst.grid.points - c, axis=-1) / d,
                               np.linalg.norm(rays - c, axis=-1) / d])
    sample_g = np.concatenate([inst.g, ray_g])
    sample_g = scale * np.where(np.isfinite(sample_g), np.maximum(sample_g, 0.0), 0.0)

    bins = np.clip((sample_r * (MAJORANT_NODES - 1)).astype(int), 0, MAJORANT_NODES - 2)
    bin_max = np.zeros(MAJORANT_NODES - 1)
    np.maximum.at(bin_max, bins, sample_g)
    nodes = np.maximum(np.concatenate([bin_max, [0.0]]), np.concatenate([[0.0], bin_max]))
    return radii, MAJORANT_SAFETY * nodes


def abp_estimate_check(inst: SupersolutionInstance, cfg: AbpConfig) -> CheckReport:
    """
    Barrier pipeline on B_1 = (Omega - c)/d: rho solves 4^n n! det D^2 rho = g_hat^n
    for a radial majorant g_hat of d^2 g_+; then rho <= u and sup(-u) <= sup(-rho).
    Reports the realized constant sup(-u) / ||g_+||_{L^p(Omega)}.
    """
    grid, n = inst.grid, inst.grid.n
    cfg = replace(cfg, n=n).resolved(inst.op)
    cfg.validate()
    if inst.boundary_min < -BOUNDARY_TOLERANCE:
        raise HypothesisViolated("u >= 0 on the boundary", None, inst.boundary_min)

    u_vals = inst.u.value(grid.points)
    sup_neg_u = float(np.max(-u_vals))
    g_plus = np.maximum(inst.g, 0.0)
    try:
        lp = rhs_norm(grid, g_plus, cfg.p_exp)
    except ZeroRightHandSide:
        lp = 0.0
    base = {"instance_id": inst.instance_id, "n": n, "p": cfg.p_exp, "r": cfg.r_exp, "k": cfg.k,
            "delta": cfg.delta, "operator": inst.op.name, "field": inst.u.field_id,
            "corollary": cfg.corollary, "sup_neg_u": sup_neg_u, "lp_norm": lp}

    if lp == 0.0:
        worst = int(np.argmax(-u_vals))
        return CheckReport(name="abp_estimate", grid_size=grid.size, max_violation=sup_neg_u,
                           tolerance=DEGENERATE_TOLERANCE, witness=grid.points[worst], margin=-sup_neg_u,
                           anchor="sup(-u) <= C ||g_+||_{L^p}",
                           extra={**base, "degenerate": True, "realized_C": math.nan})

    radii, nodes = radial_majorant(inst, scale=inst.radius ** 2)
    density = tabulated(radii, nodes, tag=f"majorant[{inst.instance_id}]")
    profile = radial_ma_solve(density.power(n, factor=ma_normalization(n)), n, cfg.M)

    rho = profile.at((grid.points - inst.center) / inst.radius)
    domination = u_vals - rho
    sup_neg_rho = profile.sup_deficit()
    worst = int(np.argmin(domination))
    violation = max(float(-domination[worst]), sup_neg_u - sup_neg_rho)

    if cfg.corollary:
        f = np.asarray(inst.op.f_value(grid.points, inst.hessian))
        denominator = grid.lp_norm(f, cfg.p_exp) ** (1.0 / cfg.k)
    else:
        denominator = lp

    report = CheckReport(
        name="abp_estimate",
        grid_size=grid.size,
        max_violation=violation,
        tolerance=DOMINATION_TOLERANCE,
        witness=grid.points[worst],
        margin=float(domination[worst]),
        epsilon=float(np.min(domination)),
        anchor="sup(-u) <= C(n, diam, r, p) ||g_+||_{L^p}; rho - u <= 0",
        extra={**base, "realized_C": sup_neg_u / denominator, "sup_neg_rho": sup_neg_rho,
               "barrier_C": sup_neg_rho / denominator, "majorant_max": float(np.max(nodes)),
               "majorant": "radial, sampled"},
    )
    logger.info("ABP %s: sup(-u)=%.6g sup(-rho)=%.6g realized C=%.6g (%s)", inst.instance_id, sup_neg_u,
                sup_neg_rho, report.extra["realized_C"], "pass" if report.passed else "FAIL")
    return report


def check_mp_hypotheses(coeffs: CoefficientField, grid: GridDomain, a: Optional[np.ndarray] = None) -> Dict[str, Any]:
    """Smallest trace and smallest eigenvalue of a(z) over the grid, with the points attaining them."""
    z = grid.points
    a = coeffs.at(z) if a is None else a
    trace = np.real(np.trace(a, axis1=-2, axis2=-1))
    low = np.linalg.eigvalsh(a)[..., 0]
    i, j = int(np.argmin(trace)), int(np.argmin(low))
    return {"min_trace": float(trace[i]), "trace_at": z[i],
            "min_eigenvalue": float(low[j]), "eigenvalue_at": z[j]}


def max_principle_check(coeffs: CoefficientField, u: ScalarField, grid: GridDomain, M_bound: float) -> CheckReport:
    """
    With a(z) >= 0, tr a(z) >= M and a^{i jbar} u_{i jbar} >= 0 on the grid,
    max over the grid <= max over the boundary + tol_geom.
    """
    z = grid.points
    a = coeffs.at(z)
    bounds = check_mp_hypotheses(coeffs, grid, a)
    if bounds["min_eigenvalue"] < -PSD_TOLERANCE:
        raise HypothesisViolated("a(z) positive semidefinite", bounds["eigenvalue_at"], bounds["min_eigenvalue"])
    if bounds["min_trace"] < M_bound - TRACE_TOLERANCE:
        raise HypothesisViolated(f"sum a^{{i ibar}} >= M = {M_bound}", bounds["trace_at"], bounds["min_trace"])
    lu = pairing(a, u.hessian(z))
    if np.any(lu < -SUPERSOLUTION_TOLERANCE):
        i = int(np.argmin(lu))
        raise HypothesisViolated("sum a^{i jbar} u_{i jbar} >= 0", z[i], float(lu[i]))

    values = u.value(z)
    boundary = grid.boundary_points()
    boundary_max = float(np.max(u.value(boundary)))
    tol_geom = grid.spacing * float(np.max(fd_gradient_norm(u, z))) * GEOMETRIC_FACTOR
    worst = int(np.argmax(values))
    return CheckReport(
        name="max_principle",
        grid_size=grid.size,
        max_violation=float(values[worst]) - boundary_max,
        tolerance=tol_geom,
        witness=z[worst],
        margin=boundary_max - float(values[worst]),
        anchor="max over closure = max over boundary",
        extra={"field": u.field_id, "coefficients": coeffs.name, "M": M_bound,
               "min_trace": bounds["min_trace"], "min_eigenvalue": bounds["min_eigenvalue"],
               "tol_geom": tol_geom, "boundary_max": boundary_max},
    )


@dataclass
class FamilyMember:
    instance_id: str
    op: Operator
    u: ScalarField
    center: Optional[Sequence[complex]] = None
    radius: float = 1.0
    p: Optional[float] = None


@dataclass
class SweepTable:
    rows: List[List[Any]] = field(default_factory=list)
    reports: List[CheckReport] = field(default_factory=list)
    running_max: List[float] = field(default_factory=list)

    def to_csv(self) -> str:
        return dump_csv(SWEEP_COLUMNS, self.rows)


def member_config(member: FamilyMember, cfg: AbpConfig) -> AbpConfig:
    """cfg at the member's dimension, with its operator's defaults and its own p."""
    p = cfg.p_exp if member.p is None else member.p
    return replace(cfg, n=member.op.n, p_exp=p).resolved(member.op)


def run_member(member: FamilyMember, cfg: AbpConfig) -> CheckReport:
    cfg = member_config(member, cfg)
    grid = cfg.grid_for(member.center, member.radius, member.u)
    try:
        inst = make_supersolution(member.op, member.u, grid, instance_id=member.instance_id)
        return abp_estimate_check(inst, cfg)
    except OffCone as e:
        return _violated(member, grid, HypothesisViolated(f"D^2u in the closed cone ({e})", e.point))
    except HypothesisViolated as e:
        return _violated(member, grid, e)


def _violated(member: FamilyMember, grid: GridDomain, e: HypothesisViolated) -> CheckReport:
    logger.warning("Instance %s: %s", member.instance_id, e)
    report = CheckReport.hypothesis_violated("abp_estimate", grid.size, e,
                                             anchor="sup(-u) <= C(n, diam, r, p) ||g_+||_{L^p}")
    report.extra["instance_id"] = member.instance_id
    return report


def constant_sweep(family: Sequence[FamilyMember], cfg: AbpConfig, workers: int = 1) -> SweepTable:
    """Realized constants over a family; rows come back in family order."""
    if not family:
        raise ValueError("constant sweep needs a nonempty family")
    table = SweepTable()
    pool = SamplePool(workers, "ABP sweep")
    pool.add_observer(lambda index, report: logger.info("Finished %s", family[index].instance_id))
    reports = pool.map(lambda index, rng: run_member(family[index], cfg), len(family), cfg.seed)

    best = -math.inf
    for member, report in zip(family, reports):
        used = member_config(member, cfg)
        realized = report.extra.get("realized_C", math.nan)
        if np.isfinite(realized):
            best = max(best, realized)
        table.reports.append(report)
        table.running_max.append(best)
        table.rows.append([member.instance_id, used.n, used.p_exp, used.r_exp, used.k, used.delta,
                           report.extra.get("sup_neg_u", math.nan), report.extra.get("lp_norm", math.nan),
                           realized, report.passed])
    return table


def corpus_summary(table: SweepTable) -> Dict[str, float]:
    """Largest and median realized constant; flags any instance above 10x the median."""
    realized = np.array([r[8] for r in table.rows], dtype=float)
    realized = realized[np.isfinite(realized)]
    if not len(realized):
        return {"max_realized_C": math.nan, "median_realized_C": math.nan, "outliers": 0}
    median = float(np.median(realized))
    return {"max_realized_C": float(np.max(realized)), "median_realized_C": median,
            "outliers": int(np.sum(realized > 10.0 * median))}


def radius_family(op: Operator, radii: Sequence[float] = (0.25, 0.5, 1.0)) -> List[FamilyMember]:
    """|z|^2 - d^2 on B_d(0)."""
    return [FamilyMember(f"radius:{d}", op, quadratic(op.n), radius=d) for d in radii]


def scaling_family(op: Operator, u: ScalarField, scales: Sequence[float] = (0.5, 1.0, 2.0, 4.0)) -> List[FamilyMember]:
    return [FamilyMember(f"scale:{t}", op, u.scaled(t)) for t in scales]


def exponent_family(op: Operator, u: ScalarField, exponents: Sequence[float] = (2.5, 3.0, 4.0)) -> List[FamilyMember]:
    return [FamilyMember(f"p:{p}", op, u, p=p) for p in exponents]


def default_abp_corpus() -> List[FamilyMember]:
    """Quadratics, perturbed quadratics and off-axis Pogorelov restrictions for MA and sigma_2, n = 2, 3."""
    corpus = []
    for n in (2, 3):
        ma = ops.monge_ampere(n)
        sigma2 = ops.sigma_m(n, 2)
        corpus += [
            FamilyMember(f"ma-n{n}-quadratic", ma, quadratic(n)),
            FamilyMember(f"sigma2-n{n}-quadratic", sigma2, quadratic(n)),
            FamilyMember(f"ma-n{n}-perturbed", ma, perturbed_quadratic(n)),
            FamilyMember(f"sigma2-n{n}-perturbed", sigma2, perturbed_quadratic(n)),
        ]
    corpus += [
        FamilyMember("ma-n3-scaled-quadratic", ops.monge_ampere(3), quadratic(3).scaled(2.5)),
        FamilyMember("sigma2-n3-half-ball", ops.sigma_m(3, 2), quadratic(3), radius=0.5),
        FamilyMember("ma-n2-pogorelov", ops.monge_ampere(2), pogorelov_u(2), center=(0.2, 0.5), radius=0.25),
        FamilyMember("ma-n3-pogorelov", ops.monge_ampere(3), pogorelov_u(3), center=(0.2, 0.5, 0.0), radius=0.25),
    ]
    return corpus


@dataclass
class MaxPrincipleCase:
    case_id: str
    coeffs: CoefficientField
    u: ScalarField
    grid: GridDomain
    M: float


def _weighted_coefficients(n: int) -> CoefficientField:
    """a(z) = diag(1 + |z_1|^2, 1, ..., 1)."""
    def sampler(z: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(np.eye(n, dtype=np.complex128), z.shape[:-1] + (n, n)).copy()
        out[..., 0, 0] += np.abs(z[..., 0]) ** 2
        return out
    return CoefficientField(n=n, sampler=sampler, name="diagonal_weight")


def default_max_principle_corpus(per_axis: int = 9) -> List[MaxPrincipleCase]:
    grid2 = GridDomain.tensor(2, per_axis=per_axis)
    grid3 = GridDomain.sampled(3, count=4000)
    identity2 = ops.constant_coefficients(np.eye(2), "identity")
    identity3 = ops.constant_coefficients(np.eye(3), "identity")
    skewed = ops.constant_coefficients(np.diag([2.0, 1.0]), "diag(2,1)")
    sigma2 = ops.linearize(ops.sigma_m(3, 2), perturbed_quadratic(3).hessian)
    return [
        MaxPrincipleCase("quadratic-n2", identity2, quadratic(2), grid2, 2.0),
        MaxPrincipleCase("quadratic-n3", identity3, quadratic(3), grid3, 3.0),
        MaxPrincipleCase("re-z1", identity2, pluriharmonic(2, "linear"), grid2, 2.0),
        MaxPrincipleCase("re-z1-squared", skewed, pluriharmonic(2, "square"), grid2, 3.0),
        MaxPrincipleCase("sigma2-linearized", sigma2, perturbed_quadratic(3), grid3, 1.0),
        MaxPrincipleCase("weighted-quadratic", _weighted_coefficients(2), quadratic(2), grid2, 2.0),
    ]


def negative_control_case(per_axis: int = 9) -> MaxPrincipleCase:
    """u = -|z|^2 with a = Id: L u = -n < 0, so the hypothesis fails."""
    return MaxPrincipleCase("negative-quadratic", ops.constant_coefficients(np.eye(2), "identity"),
                            quadratic(2, scale=-1.0), GridDomain.tensor(2, per_axis=per_axis), 2.0)


def run_max_principle(case: MaxPrincipleCase) -> CheckReport:
    try:
        report = max_principle_check(case.coeffs, case.u, case.grid, case.M)
    except HypothesisViolated as e:
        logger.warning("Max principle %s: %s", case.case_id, e)
        report = CheckReport.hypothesis_violated("max_principle", case.grid.size, e,
                                                 anchor="max over closure = max over boundary")
    report.extra["case"] = case.case_id
    return report
