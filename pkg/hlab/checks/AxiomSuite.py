"""
Sampled checks of the operator axioms: homogeneity, concavity, the linearized
inequality G^{i jbar}(A) B_{i jbar} >= G(B), comparison with det^{1/n} and its
shifted form, plus the Euler identity, ellipticity, G(Id) >= 1 and agreement of
the closed-form gradient with difference quotients.

Samples are drawn up front from one generator seeded with `seed`, then pushed
through the operator as stacks in fixed chunks on the sample pool.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from hlab.checks.ConeSuite import chunked, in_background, sample_in_cone, sample_points
from hlab.models.Hermitian import identity, pairing, random_positive
from hlab.models.Operator import CoefficientField, Operator, OperatorKind
from hlab.models.Report import Report

logger = logging.getLogger(__name__)

HOMOGENEITY_TOLERANCE = 1e-9
CONCAVITY_TOLERANCE = 1e-9
LINEARIZED_TOLERANCE = 1e-7
COMPARISON_TOLERANCE = 1e-9
EULER_TOLERANCE = 1e-7
GRADIENT_TOLERANCE = 1e-5
# gradient samples stay this far inside the cone (normalized margin)
GRADIENT_SAMPLE_MARGIN = 0.05
GRADIENT_CHECK_MARGIN = 0.2
DEFAULT_SCALES = (0.1, 3.0, 10.0)


def _points(op: Operator, rng: np.random.Generator, count: int) -> np.ndarray:
    """The origin for constant backgrounds, points of B_1 otherwise."""
    if op.background.constant:
        return np.zeros((count, op.n), dtype=np.complex128)
    return sample_points(op.n, rng, count)


def _positive(op: Operator, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return in_background(op.cone, z, random_positive(op.n, rng, count=len(z)))


def _det_root(op: Operator, z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """det(P)^{1/n}, with det taken relative to the background form."""
    ratio = np.real(np.linalg.det(p)) / np.real(np.linalg.det(op.background.at(z)))
    return np.maximum(ratio, 0.0) ** (1.0 / op.n)


def check_homogeneity(op: Operator, samples: int = 1000, scales: Sequence[float] = DEFAULT_SCALES,
                      seed: int = 0, workers: int = 1) -> Report:
    """|G(tA) - t G(A)| <= 1e-9 t |G(A)|."""
    report = Report("homogeneity", op.name, op.n, samples, anchor="positively homogeneous of degree 1")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples)

    def work(s: slice):
        g = op.evaluate(z[s], a[s])
        rel = np.stack([np.abs(op.evaluate(z[s], t * a[s]) - t * g) / (t * np.abs(g)) for t in scales], axis=-1)
        return np.max(rel, axis=-1), np.argmax(rel, axis=-1)

    worst, at = chunked("homogeneity", workers, samples, work)
    for i in range(samples):
        report.record(worst[i], HOMOGENEITY_TOLERANCE, z=z[i], a=a[i], t=scales[at[i]])
    return report


def check_concavity(op: Operator, samples: int = 2000, seed: int = 0, workers: int = 1) -> Report:
    """G((A + B)/2) >= (G(A) + G(B))/2 - 1e-9."""
    report = Report("concavity", op.name, op.n, samples, anchor="A -> G(z, A) is concave")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples)
    b = sample_in_cone(op.cone, z, rng, samples)

    def work(s: slice):
        mid = op.evaluate(z[s], 0.5 * (a[s] + b[s]))
        return (0.5 * (op.evaluate(z[s], a[s]) + op.evaluate(z[s], b[s])) - mid,)

    violation, = chunked("concavity", workers, samples, work)
    for i in range(samples):
        report.record(violation[i], CONCAVITY_TOLERANCE, z=z[i], a=a[i], b=b[i])
    return report


def check_linearized_inequality(op: Operator, samples: int = 2000, seed: int = 0, workers: int = 1) -> Report:
    """G^{i jbar}(z, A) B_{i jbar} >= G(z, B) - 1e-7 for in-cone A and B."""
    report = Report("linearized_inequality", op.name, op.n, samples,
                    anchor="G^{i jbar}(z,A) B_{i jbar} >= G(z,B)")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples, min_margin=GRADIENT_SAMPLE_MARGIN)
    b = sample_in_cone(op.cone, z, rng, samples)

    def work(s: slice):
        return pairing(op.gradient(z[s], a[s]), b[s]), op.evaluate(z[s], b[s])

    lhs, rhs = chunked("linearized inequality", workers, samples, work)
    for i in range(samples):
        report.record(rhs[i] - lhs[i], LINEARIZED_TOLERANCE, z=z[i], a=a[i], b=b[i], lhs=lhs[i], rhs=rhs[i])
    report.extra["min_margin"] = float(np.min(lhs - rhs))
    return report


def check_euler_identity(op: Operator, samples: int = 500, seed: int = 0, workers: int = 1) -> Report:
    """G^{i jbar}(z, A) A_{i jbar} = G(z, A) to 1e-7 relative."""
    report = Report("euler_identity", op.name, op.n, samples, anchor="DG(A) A = G(z, A)")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples, min_margin=GRADIENT_SAMPLE_MARGIN)

    def work(s: slice):
        g = op.evaluate(z[s], a[s])
        return (np.abs(pairing(op.gradient(z[s], a[s]), a[s]) - g) / np.maximum(np.abs(g), 1.0),)

    rel, = chunked("Euler identity", workers, samples, work)
    for i in range(samples):
        report.record(rel[i], EULER_TOLERANCE, z=z[i], a=a[i])
    return report


def check_gradient(op: Operator, samples: int = 100, seed: int = 0, workers: int = 1) -> Report:
    """The closed-form gradient matches Richardson difference quotients to 1e-5."""
    report = Report("gradient", op.name, op.n, samples, anchor="G^{i jbar} = dG / da_{i jbar}")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples, min_margin=GRADIENT_CHECK_MARGIN)

    def work(s: slice):
        exact = op.gradient(z[s], a[s])
        numeric = op.numeric_gradient(z[s], a[s])
        size = np.maximum(np.max(np.abs(exact), axis=(-2, -1)), 1.0)
        return (np.max(np.abs(exact - numeric), axis=(-2, -1)) / size,)

    error, = chunked("gradient", workers, samples, work)
    for i in range(samples):
        report.record(error[i], GRADIENT_TOLERANCE, z=z[i], a=a[i])
    return report


def check_comparison(op: Operator, samples: int = 2000, seed: int = 0, workers: int = 1,
                     witnesses: Optional[List[np.ndarray]] = None) -> Report:
    """
    G(z, P) >= det(P)^{1/n} and G(z, A + P) >= G(z, A) + det(P)^{1/n} for
    positive definite P and in-cone A. Explicit `witnesses` P are tried first.
    """
    report = Report("comparison", op.name, op.n, samples,
                    anchor="G(z,P) >= det(P)^(1/n); G(z,A+P) >= G(z,A) + det(P)^(1/n)")
    z0 = np.zeros((1, op.n), dtype=np.complex128)
    for p in witnesses or []:
        root = float(_det_root(op, z0, p[None])[0])
        value = float(op.evaluate(z0[0], p))
        report.record(root - value, COMPARISON_TOLERANCE, form="d", z=z0[0], p=p, g=value, det_root=root)
    if op.kind == OperatorKind.LINEAR:
        report.extra["linear_criterion"] = linear_comparison_value(op.coeffs, z0[0])
    report.extra["shifted_max_violation"] = 0.0
    if samples < 1:
        return report

    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    p = _positive(op, z, rng)
    a = sample_in_cone(op.cone, z, rng, samples)

    def work(s: slice):
        root = _det_root(op, z[s], p[s])
        plain = root - op.evaluate(z[s], p[s])
        shifted = op.evaluate(z[s], a[s]) + root - op.evaluate(z[s], a[s] + p[s])
        return plain, shifted

    plain, shifted = chunked("comparison", workers, samples, work)
    for i in range(samples):
        report.record(plain[i], COMPARISON_TOLERANCE, form="d", z=z[i], p=p[i])
        report.record(shifted[i], COMPARISON_TOLERANCE, form="d'", z=z[i], p=p[i], a=a[i])
    report.extra["shifted_max_violation"] = max(0.0, float(np.max(shifted)))
    return report


def linear_comparison_value(coeffs: CoefficientField, z: np.ndarray) -> float:
    """n det(a)^{1/n}; a linear operator meets the det comparison iff this is >= 1."""
    a = coeffs.at(z)
    return float(coeffs.n * max(np.real(np.linalg.det(a)), 0.0) ** (1.0 / coeffs.n))


def check_ellipticity(op: Operator, samples: int = 1000, seed: int = 0, workers: int = 1) -> Report:
    """G(z, A + P) >= G(z, A) - 1e-9 for in-cone A and positive definite P."""
    report = Report("ellipticity", op.name, op.n, samples, anchor="G is degenerate elliptic")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = _points(op, rng, samples)
    a = sample_in_cone(op.cone, z, rng, samples)
    p = _positive(op, z, rng)

    def work(s: slice):
        return (op.evaluate(z[s], a[s]) - op.evaluate(z[s], a[s] + p[s]),)

    violation, = chunked("ellipticity", workers, samples, work)
    for i in range(samples):
        report.record(violation[i], COMPARISON_TOLERANCE, z=z[i], a=a[i], p=p[i])
    return report


def check_unit_value(op: Operator, samples: int = 16, seed: int = 0) -> Report:
    """G(z, Id) >= 1 at the origin and at sampled z."""
    report = Report("unit_value", op.name, op.n, samples, anchor="G(z, Id) >= 1")
    z = sample_points(op.n, np.random.default_rng(seed), max(samples, 1))
    z[0] = 0.0
    values = np.asarray(op.evaluate(z, in_background(op.cone, z, np.broadcast_to(identity(op.n), z.shape + (op.n,)))))
    for i in range(len(z)):
        report.record(1.0 - values[i], COMPARISON_TOLERANCE, z=z[i], g=values[i])
    report.extra["min_value"] = float(np.min(values))
    return report


def run_suite(op: Operator, samples: int = 2000, seed: int = 0, workers: int = 1,
              witnesses: Optional[List[np.ndarray]] = None) -> Dict[str, Report]:
    """Every axiom check on one operator; keys are the check names."""
    logger.info("Verifying %s (n=%d) with %d samples", op.name, op.n, samples)
    reports = [
        check_homogeneity(op, samples, seed=seed, workers=workers),
        check_concavity(op, samples, seed=seed + 1, workers=workers),
        check_linearized_inequality(op, samples, seed=seed + 2, workers=workers),
        check_comparison(op, samples, seed=seed + 3, workers=workers, witnesses=witnesses),
        check_euler_identity(op, max(samples // 4, 1), seed=seed + 4, workers=workers),
        check_ellipticity(op, samples, seed=seed + 5, workers=workers),
        check_unit_value(op, seed=seed + 6),
        check_gradient(op, max(samples // 20, 1), seed=seed + 7, workers=workers),
    ]
    for report in reports:
        logger.info("%s %s: max violation %.3e (%s)", op.name, report.check, report.max_violation,
                    "pass" if report.passed else "FAIL")
    return {report.check: report for report in reports}
