import logging
import math

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from hlab.models.Errors import BadRadius, ZeroDensity
from hlab.models.Field import ScalarField
from hlab.models.Grid import GridDomain
from hlab.models.Hermitian import pairing
from hlab.models.Operator import Operator
from hlab.models.Radial import RadialDensity, RadialProfile, ma_normalization, node_grid
from hlab.models.Report import CheckReport

logger = logging.getLogger(__name__)

MIN_NODES = 64
BARRIER_TOLERANCE = 1e-6


def radial_ma_solve(density: RadialDensity, n: int, M: int = 256) -> RadialProfile:
    """
    Radial solution of (dd^c rho)^n = g dV on B_1 with rho = 0 on the sphere:
    (r v')^n = K int_0^r g s^{2n-1} ds and v(r) = -int_r^1 v'.
    """
    if M < MIN_NODES:
        raise ValueError(f"radial solve needs at least {MIN_NODES} nodes, got {M}")
    density.check_nonnegative()
    r = node_grid(density, M)
    profile = RadialProfile(n=n, density=density, r=r, v=np.zeros_like(r), vprime=np.zeros_like(r))
    vprime = profile.derivative(r)
    # cumulative integral from 0, then shift so that v(1) = 0
    prefix = cumulative_simpson(vprime, x=r, initial=0.0)
    profile.v = prefix - prefix[-1]
    profile.vprime = vprime
    logger.debug("Solved radial profile for %s: n=%d nodes=%d sup(-rho)=%.6g",
                 density.tag, n, len(r), profile.sup_deficit())
    return profile


def sup_deficit(profile: RadialProfile) -> float:
    return profile.sup_deficit()


def lq_norm(density: RadialDensity, q: float, n: int, radius: float = 1.0, M: int = 1024) -> float:
    """
    ||g||_{L^q} over the ball: (|S^{2n-1}| int_0^1 |g|^q r^{2n-1} dr)^{1/q}, with
    |S^{2n-1}| = 2 pi^n / (n-1)!. `radius` = d reads g as living on B_d.
    """
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    sphere = 2.0 * math.pi ** n / math.factorial(n - 1)
    total = 0.0
    edges = density.breakpoints()
    for a, b in zip(edges[:-1], edges[1:]):
        r = np.linspace(a, b, max(2 * int(M * (b - a)) + 1, 5))
        inside = np.clip(r, a + 1e-12 * (b - a), b - 1e-12 * (b - a))
        total += simpson(np.abs(density(inside)) ** q * r ** (2 * n - 1), x=r)
    return float((sphere * radius ** (2 * n) * total) ** (1.0 / q))


def kolodziej_ratio(density: RadialDensity, q: float, n: int, M: int = 256) -> float:
    """sup(-rho) / ||g||_{L^q}^{1/n}."""
    norm = lq_norm(density, q, n)
    if norm <= 0.0:
        raise ZeroDensity(f"density {density.tag} vanishes identically")
    return sup_deficit(radial_ma_solve(density, n, M)) / norm ** (1.0 / n)


def barrier_inequality_check(op: Operator, u: ScalarField, density: RadialDensity, grid: GridDomain,
                             M: int = 256) -> CheckReport:
    """
    With rho solving 4^n n! det D^2 rho = g_+^n, check L_u rho >= g_+ on the
    grid, where L_u h = G^{i jbar}(z, D^2u) h_{i jbar}.
    """
    n = op.n
    if not np.allclose(grid.center, 0.0) or grid.radius > 1.0:
        raise BadRadius("barrier grid must lie in the unit ball")
    profile = radial_ma_solve(density.power(n, factor=ma_normalization(n)), n, M)

    r = np.linalg.norm(grid.points, axis=-1)
    # rho is only differentiated away from the origin
    keep = r >= 1.0 / M
    z = grid.points[keep]
    coeffs = op.gradient(z, u.hessian(z))
    lhs = pairing(coeffs, profile.hessian(z))
    g_plus = np.maximum(density(r[keep]), 0.0)
    slack = lhs - g_plus

    worst = int(np.argmin(slack)) if len(slack) else 0
    return CheckReport(
        name="barrier_inequality",
        grid_size=int(len(z)),
        max_violation=float(-slack[worst]) if len(slack) else 0.0,
        tolerance=BARRIER_TOLERANCE,
        witness=z[worst] if len(slack) else None,
        margin=float(slack[worst]) if len(slack) else 0.0,
        epsilon=float(np.min(slack)) if len(slack) else None,
        anchor="L_u rho >= g_+",
        extra={"operator": op.name, "field": u.field_id, "density": density.tag,
               "sup_neg_rho": profile.sup_deficit()},
    )
