"""
Viscosity subsolution checks over a finite corpus of test functions on a
tensor lattice: a test phi qualifies when G(D^2 phi) <= f - epsilon at every
usable lattice point, and a subsolution u must then leave u - phi without a
strict lattice maximum. The additivity check compares u1 + u2 against the
tests with u2 subtracted, for linear G.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from hlab.models.Field import (DEFAULT_STEP, EXCLUSION_FACTOR, ScalarField, phi_R, pluriharmonic,
                               quadratic)
from hlab.models.Grid import GridDomain
from hlab.models.Operator import CoefficientField
from hlab.models.Report import CheckReport

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
STRICT_TOLERANCE = 1e-12
ADDITIVITY_TOLERANCE = 1e-9

Evaluate = Callable[[np.ndarray, np.ndarray], np.ndarray]
RightHandSide = Union[None, float, Callable[[np.ndarray], np.ndarray]]


def default_test_corpus(n: int, R: float = 1.0) -> List[ScalarField]:
    """Pluriharmonic, quadratic and (n >= 3) singular test functions for the ball B_R."""
    tests = [
        pluriharmonic(n, "linear").scaled(R),
        pluriharmonic(n, "square"),
        quadratic(n, 0.25),
        quadratic(n, -1.0),
    ]
    if n >= 3:
        tests.append(phi_R(n, R))
    return tests


def usable_points(z: np.ndarray, fields: Sequence[ScalarField]) -> np.ndarray:
    """Points far enough from every field's singular set for a Hessian."""
    margin = EXCLUSION_FACTOR * DEFAULT_STEP
    return np.min([f.distance_to_singular(z) for f in fields], axis=0) > margin


def strict_maximum(values: np.ndarray, neighbours: np.ndarray) -> Tuple[float, Optional[int]]:
    """
    Largest gap min_q (v(p) - v(q)) over interior lattice points p, less a
    rounding tolerance; positive exactly when some p is a strict lattice maximum.
    """
    interior = np.flatnonzero(np.all(neighbours >= 0, axis=1))
    if len(interior) == 0:
        return -math.inf, None
    gap = np.min(values[interior, None] - values[neighbours[interior]], axis=1)
    gap = np.where(np.isnan(gap), -np.inf, gap)
    i = int(np.argmax(gap))
    scale = STRICT_TOLERANCE * (1.0 + float(np.max(np.abs(values[np.isfinite(values)]), initial=0.0)))
    return float(gap[i]) - scale, int(interior[i])


def _rhs_values(evaluate: Evaluate, u: ScalarField, rhs: RightHandSide, z: np.ndarray) -> np.ndarray:
    if rhs is None:
        return np.asarray(evaluate(z, u.hessian(z)), dtype=float)
    if callable(rhs):
        return np.asarray(rhs(z), dtype=float)
    return np.full(len(z), float(rhs))


def _test_outcome(evaluate: Evaluate, u: ScalarField, phi: ScalarField, grid: GridDomain, neighbours: np.ndarray,
                  f: np.ndarray, u_usable: np.ndarray, epsilon: float) -> Dict[str, Any]:
    z = grid.points
    mask = u_usable & usable_points(z, [phi])
    g = np.asarray(evaluate(z[mask], phi.hessian(z[mask])), dtype=float) if np.any(mask) else np.empty(0)
    rhs = f[mask]
    # -inf <= -inf - epsilon counts as below
    below = np.where(np.isneginf(g), -np.inf, g - rhs)
    slack = float(np.max(below)) if len(below) else math.inf
    excess, at = strict_maximum(u.value(z) - phi.value(z), neighbours)
    return {
        "test": phi.field_id,
        "qualifies": bool(len(below)) and slack <= -epsilon,
        "slack": slack,
        "strict_max": excess > 0.0,
        "excess": excess,
        "at": None if at is None else z[at],
    }


def subsolution_check(evaluate: Evaluate, u: ScalarField, tests: Sequence[ScalarField], grid: GridDomain,
                      rhs: RightHandSide = None, epsilon: float = DEFAULT_EPSILON, label: str = "") -> CheckReport:
    """
    u is a subsolution of G(D^2u) >= f against the corpus when no qualifying test
    leaves u - phi with a strict lattice maximum. rhs None takes f = G(D^2u).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    neighbours = grid.lattice_neighbours()
    z = grid.points
    u_usable = usable_points(z, [u])
    f = np.full(len(z), np.nan)
    if np.any(u_usable):
        f[u_usable] = _rhs_values(evaluate, u, rhs, z[u_usable])

    outcomes = [_test_outcome(evaluate, u, phi, grid, neighbours, f, u_usable, epsilon) for phi in tests]
    qualifying = [o for o in outcomes if o["qualifies"]]
    worst = max(qualifying, key=lambda o: o["excess"], default=None)
    violation = -math.inf if worst is None else worst["excess"]
    for o in outcomes:
        logger.debug("Test %s on %s: qualifies=%s slack=%.3e excess=%.3e",
                     o["test"], u.field_id, o["qualifies"], o["slack"], o["excess"])
    report = CheckReport(
        name="viscosity_subsolution",
        grid_size=grid.size,
        max_violation=violation,
        tolerance=0.0,
        witness=None if worst is None else worst["at"],
        margin=-violation,
        epsilon=epsilon,
        anchor="no strict maximum of u - phi where G(D^2 phi) <= f - epsilon",
        extra={"field": u.field_id, "operator": label, "qualifying": len(qualifying),
               "rhs": "G(D^2u)" if rhs is None else ("callable" if callable(rhs) else float(rhs)),
               "tests": outcomes},
    )
    logger.info("Viscosity subsolution %s for %s: %d/%d tests qualify (%s)", u.field_id, label or "G",
                len(qualifying), len(tests), "pass" if report.passed else "FAIL")
    return report


def additivity_check(coeffs: CoefficientField, u1: ScalarField, u2: ScalarField, tests: Sequence[ScalarField],
                     grid: GridDomain, epsilon: float = DEFAULT_EPSILON) -> CheckReport:
    """
    For L = coeffs and a strong u2, compare u1 + u2 against the corpus for
    L >= L u1 + L u2 with u1 against phi - u2 for L >= L u1: the qualifying
    tests and the strict maxima must coincide, so u1 passing implies u1 + u2 passes.
    """
    apply = coeffs.apply

    def g1(z):
        return apply(z, u1.hessian(z))

    def g12(z):
        return g1(z) + apply(z, u2.hessian(z))

    total = subsolution_check(apply, u1.add(u2), tests, grid, rhs=g12, epsilon=epsilon, label=coeffs.name)
    shifted_tests = [phi.add(u2, -1.0) for phi in tests]
    base = subsolution_check(apply, u1, shifted_tests, grid, rhs=g1, epsilon=epsilon, label=coeffs.name)

    z = grid.points
    residual = 0.0
    for phi, shifted in zip(tests, shifted_tests):
        mask = usable_points(z, [u1, u2, phi])
        if np.any(mask):
            zz = z[mask]
            gap = apply(zz, shifted.hessian(zz)) - (apply(zz, phi.hessian(zz)) - apply(zz, u2.hessian(zz)))
            residual = max(residual, float(np.max(np.abs(gap))))

    mismatches = 0
    excess_gap = 0.0
    for a, b in zip(total.extra["tests"], base.extra["tests"]):
        if a["qualifies"] != b["qualifies"] or a["strict_max"] != b["strict_max"]:
            mismatches += 1
        if math.isfinite(a["excess"]) and math.isfinite(b["excess"]):
            excess_gap = max(excess_gap, abs(a["excess"] - b["excess"]))
        elif a["excess"] != b["excess"]:
            mismatches += 1
    implication = float(base.passed and not total.passed)
    violation = max(residual, float(mismatches), excess_gap, implication)
    report = CheckReport(
        name="viscosity_additivity",
        grid_size=grid.size,
        max_violation=violation,
        tolerance=ADDITIVITY_TOLERANCE,
        witness=total.witness,
        margin=ADDITIVITY_TOLERANCE - violation,
        epsilon=epsilon,
        anchor="u1 subsolution, u2 strong => u1 + u2 subsolution of L >= g1 + g2",
        extra={"u1": u1.field_id, "u2": u2.field_id, "coefficients": coeffs.name,
               "linearity_residual": residual, "mismatches": mismatches, "excess_gap": excess_gap,
               "u1_passes": base.passed, "sum_passes": total.passed},
    )
    logger.info("Viscosity additivity %s + %s: residual=%.3e mismatches=%d (%s)", u1.field_id, u2.field_id,
                residual, mismatches, "pass" if report.passed else "FAIL")
    return report
