"""
Numerical reproduction of the singular Pogorelov-type example: u solves
det D^2u = f strongly, phi touches u from above along {z' = 0} without a strict
maximum of u - phi, and the linearization L_u phi stays below 3f by a margin
that closes at R = 1/sqrt(2).
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from hlab.models.Errors import BadRadius
from hlab.models.Field import DEFAULT_STEP, EXCLUSION_FACTOR, fd_hessian, phi_R, pogorelov_f, pogorelov_u
from hlab.models.Grid import GridDomain
from hlab.models.Hermitian import grad_det, pairing
from hlab.models.Report import CheckReport, dump_csv

logger = logging.getLogger(__name__)

MA_IDENTITY_TOLERANCE = 1e-9
FD_IDENTITY_TOLERANCE = 1e-4
NONSTRICT_TOLERANCE = 1e-12
ROUTE_AGREEMENT = 1e-8
CRITICAL_RADIUS = 1.0 / math.sqrt(2.0)
APPROACH_COUNT = 12


def singular_margin(h: float = DEFAULT_STEP) -> float:
    return EXCLUSION_FACTOR * h


def _off_singular(grid: GridDomain, h: float = DEFAULT_STEP) -> GridDomain:
    return grid.excluding(lambda z: np.sqrt(np.sum(np.abs(z[..., 1:]) ** 2, axis=-1)), singular_margin(h))


def verify_ma_identity(n: int, grid: GridDomain, use_fd: bool = False, h: Optional[float] = None) -> CheckReport:
    """max |det D^2u - f| / f over the grid, with the exact or the finite-difference Hessian."""
    u, f = pogorelov_u(n), pogorelov_f(n)
    grid = _off_singular(grid, DEFAULT_STEP if h is None else h)
    z = grid.points
    hess = fd_hessian(u, z, h) if use_fd else u.exact_hessian(z)
    det = np.real(np.linalg.det(hess))
    target = f.value(z)
    rel = np.abs(det - target) / np.abs(target)
    worst = int(np.argmax(rel))
    return CheckReport(
        name="ma_identity_fd" if use_fd else "ma_identity",
        grid_size=grid.size,
        max_violation=float(rel[worst]),
        tolerance=FD_IDENTITY_TOLERANCE if use_fd else MA_IDENTITY_TOLERANCE,
        witness=z[worst],
        margin=float(np.min(np.linalg.eigvalsh(hess))),
        anchor="det(D^2 u) = f in C^n",
        extra={"n": n, "sobolev_range": list(u.sobolev_range)},
    )


def verify_nonstrict_max(n: int, R: float, grid: Optional[GridDomain] = None) -> CheckReport:
    """u - phi <= 0 on B_R(0) with equality exactly on {z' = 0}."""
    if R <= 0:
        raise BadRadius(f"R must be positive, got {R}")
    grid = grid or GridDomain.sampled(n, radius=R, count=10_000)
    u, phi = pogorelov_u(n), phi_R(n, R)
    z = grid.points
    diff = u.value(z) - phi.value(z)

    on_set = z.copy()
    on_set[:, 1:] = 0.0
    touching = u.value(on_set) - phi.value(on_set)

    tail = np.sqrt(np.sum(np.abs(z[:, 1:]) ** 2, axis=-1))
    off = tail > 0.0
    sup_off = float(np.max(diff[off])) if np.any(off) else -math.inf
    worst = int(np.argmax(diff))
    violation = max(float(diff[worst]), float(np.max(np.abs(touching))))
    return CheckReport(
        name="nonstrict_max",
        grid_size=grid.size,
        max_violation=violation,
        tolerance=NONSTRICT_TOLERANCE,
        witness=z[worst],
        margin=sup_off,
        epsilon=0.0,
        anchor="u - phi <= 0 = (u - phi)|{z'=0}",
        extra={"n": n, "R": R, "sup_off_singular": sup_off,
               "max_touching_defect": float(np.max(np.abs(touching)))},
    )


def closed_form_gap(z: np.ndarray, R: float) -> Tuple[np.ndarray, np.ndarray]:
    """(L_u phi, 3f) from the hand-computed n = 3 formulas."""
    t = np.abs(z[..., 0]) ** 2
    s = np.sum(np.abs(z[..., 1:]) ** 2, axis=-1)
    c = 1.0 + R * R
    lu_phi = -(70.0 / 27.0 + 50.0 / 27.0 * t) * s + 16.0 / 27.0 * c + 8.0 / 27.0 * c * t
    three_f = 24.0 / 27.0 + 24.0 / 27.0 * t
    return lu_phi, three_f


def origin_approach(R: float, count: int = APPROACH_COUNT) -> np.ndarray:
    """Points (0, (r, 0)) closing in on the origin along the singular set's normal."""
    r = np.geomspace(singular_margin(), 0.5 * R, count)
    z = np.zeros((count, 3), dtype=np.complex128)
    z[:, 1] = r
    return z


def verify_linearized_gap(R: float, grid: Optional[GridDomain] = None, strict: bool = False,
                          with_csv: bool = False):
    """
    n = 3. L_u phi = G^{i jbar}(D^2u) phi_{i jbar} with G the cofactor gradient
    of det, computed from the closed form and from exact Hessians; the gap
    3f - L_u phi must stay positive. Returns the report, or (report, csv) with
    `with_csv`.
    """
    if R <= 0 or (strict and R >= CRITICAL_RADIUS):
        raise BadRadius(f"linearized gap needs 0 < R < 1/sqrt(2), got {R}")
    if R >= CRITICAL_RADIUS:
        logger.warning("R=%.4g is past 1/sqrt(2); the gap check is expected to fail", R)

    n = 3
    grid = _off_singular(grid or GridDomain.sampled(n, radius=R, count=10_000))
    z = np.concatenate([grid.points, origin_approach(R)])
    u, phi = pogorelov_u(n), phi_R(n, R)

    closed, three_f = closed_form_gap(z, R)
    traced = pairing(grad_det(u.exact_hessian(z)), phi.exact_hessian(z))
    disagreement = float(np.max(np.abs(closed - traced)))
    gap = three_f - traced

    worst = int(np.argmin(gap))
    report = CheckReport(
        name="linearized_gap",
        grid_size=len(z),
        max_violation=max(float(-gap[worst]), disagreement - ROUTE_AGREEMENT),
        tolerance=0.0,
        witness=z[worst],
        margin=float(gap[worst]),
        epsilon=float(gap[worst]),
        anchor="L_u phi <= n f - epsilon for R < 1/sqrt(2)",
        extra={"R": R, "route_disagreement": disagreement, "critical_radius": CRITICAL_RADIUS},
    )
    logger.info("Linearized gap R=%.4g: epsilon=%.6g, route disagreement %.2e", R, report.epsilon, disagreement)
    if not with_csv:
        return report
    rows = [[p.real[0], p.imag[0], p.real[1], p.imag[1], p.real[2], p.imag[2], lu, tf, g]
            for p, lu, tf, g in zip(z, traced, three_f, gap)]
    columns = ["re_z1", "im_z1", "re_z2", "im_z2", "re_z3", "im_z3", "L_u_phi", "three_f", "gap"]
    return report, dump_csv(columns, rows)
