import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from hlab.checks.Sweep import SamplePool
from hlab.models.Cone import BOUNDARY_TOLERANCE, ConeFamily, Membership
from hlab.models.Hermitian import (conjugate, congruence_factor, from_spectrum, random_positive,
                                   random_unitary, symmetrize)
from hlab.models.Report import Report

logger = logging.getLogger(__name__)

CONVEX_WEIGHTS = (0.25, 0.5, 0.75)
MAX_REJECTION_ROUNDS = 200
# stacks are evaluated in chunks of this many samples, one chunk per pool item
CHUNK = 1024


def sample_points(n: int, rng: np.random.Generator, count: int, radius: float = 1.0) -> np.ndarray:
    """Uniform points of the ball B_radius(0) in C^n, shape (count, n)."""
    x = rng.standard_normal((count, 2 * n))
    x *= (radius * rng.uniform(size=count) ** (1.0 / (2 * n)))[:, None] / np.linalg.norm(x, axis=-1, keepdims=True)
    return x[:, :n] + 1j * x[:, n:]


def sample_point(n: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    return sample_points(n, rng, 1, radius)[0]


def sample_spectra(n: int, rng: np.random.Generator, count: int, low: float = -1.0, high: float = 3.0) -> np.ndarray:
    """Spectra uniform in [low, high], each rescaled by e^u with u uniform in [-1, 1]."""
    return rng.uniform(low, high, size=(count, n)) * np.exp(rng.uniform(-1.0, 1.0, size=(count, 1)))


def sample_hermitian(n: int, rng: np.random.Generator, count: Optional[int] = None,
                     low: float = -1.0, high: float = 3.0) -> np.ndarray:
    lam = sample_spectra(n, rng, 1 if count is None else count, low, high)
    a = from_spectrum(lam, random_unitary(n, rng, len(lam)))
    return a[0] if count is None else a


def in_background(cone: ConeFamily, z: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Map C to L C L^* with B(z) = L L^*, so eigenvalues w.r.t. B(z) equal those of C."""
    if cone.background.is_identity():
        return c
    low = congruence_factor(cone.background.at(np.asarray(z, dtype=np.complex128)))
    return symmetrize(low @ c @ np.conj(np.swapaxes(low, -1, -2)))


def sample_in_cone(cone: ConeFamily, z: np.ndarray, rng: np.random.Generator, count: Optional[int] = None,
                   min_margin: float = 0.0) -> np.ndarray:
    """
    Matrices strictly inside Gamma(z), one per point of z when count is given.

    Spectra are rejection-sampled against the defining inequalities directly,
    then rotated by a random unitary and carried into the background at z.
    """
    wanted = 1 if count is None else count
    floor = max(BOUNDARY_TOLERANCE, min_margin)
    kept: List[np.ndarray] = []
    have = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        if have >= wanted:
            break
        lam = np.sort(sample_spectra(cone.n, rng, 2 * (wanted - have) + 8), axis=-1)
        lam = lam[cone.spectrum_margin(lam) > floor]
        kept.append(lam)
        have += len(lam)
    if have < wanted:
        raise RuntimeError(f"could not sample inside {cone.name} after {MAX_REJECTION_ROUNDS} rounds")
    lam = np.concatenate(kept)[:wanted]
    a = in_background(cone, z, from_spectrum(lam, random_unitary(cone.n, rng, wanted)))
    return a[0] if count is None else a


def chunked(label: str, workers: int, count: int, fn: Callable[[slice], Sequence[np.ndarray]]) -> List[np.ndarray]:
    """
    Run fn over fixed slices of a sample stack on the pool and concatenate the
    columns it returns; chunking never depends on the worker count.
    """
    chunks = [slice(start, min(start + CHUNK, count)) for start in range(0, count, CHUNK)]
    parts = SamplePool(workers, label).map(lambda index, rng: fn(chunks[index]), len(chunks))
    return [np.concatenate(column) for column in zip(*parts)]


def check_unitary_invariance(cone: ConeFamily, samples: int = 500, seed: int = 0, workers: int = 1) -> Report:
    """contains(z, A) == contains(z, U^* A U) for sampled A and unitary U (B = Id)."""
    cone.requires_identity_background()
    report = Report("unitary_invariance", cone.name, cone.n, samples,
                    anchor="O^*AO in Gamma(z) (spherical transitivity)")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    a = sample_hermitian(cone.n, rng, samples)
    u = random_unitary(cone.n, rng, samples)
    z = np.zeros((samples, cone.n), dtype=np.complex128)
    before, after = chunked("unitary invariance", workers, samples, lambda s: (
        cone.membership(z[s], a[s]), cone.membership(z[s], conjugate(a[s], u[s]))))
    for i in range(samples):
        if Membership.INDETERMINATE in (before[i], after[i]):
            continue
        report.record(float(before[i] != after[i]), 0.0, a=a[i], u=u[i], before=int(before[i]), after=int(after[i]))
    return report


def check_convexity(cone: ConeFamily, samples: int = 500, seed: int = 0, workers: int = 1) -> Report:
    """t A + (1 - t) A~ stays in the cone for sampled in-cone pairs."""
    report = Report("convexity", cone.name, cone.n, samples, anchor="family of open convex cones")
    if samples < 1:
        return report
    rng = np.random.default_rng(seed)
    z = np.zeros((samples, cone.n), dtype=np.complex128)
    a = sample_in_cone(cone, z, rng, samples)
    b = sample_in_cone(cone, z, rng, samples)
    margins = chunked("convexity", workers, samples, lambda s: [
        cone.margin(z[s], t * a[s] + (1.0 - t) * b[s]) for t in CONVEX_WEIGHTS])
    margins = np.stack(margins, axis=-1)
    for i in range(samples):
        worst = int(np.argmin(margins[i]))
        report.record(-margins[i, worst], BOUNDARY_TOLERANCE, a=a[i], b=b[i], t=CONVEX_WEIGHTS[worst])
    return report


def check_contains_positive(cone: ConeFamily, samples: int = 500, seed: int = 0, z: Optional[np.ndarray] = None) -> Report:
    """Every positive definite matrix lies in Gamma(z) (C_n is a subset of every cone)."""
    report = Report("contains_positive", cone.name, cone.n, samples, anchor="C_n subset of Gamma(z)")
    if samples < 1:
        return report
    z = np.zeros(cone.n, dtype=np.complex128) if z is None else np.asarray(z, dtype=np.complex128)
    zs = np.broadcast_to(z, (samples, cone.n))
    p = in_background(cone, zs, random_positive(cone.n, np.random.default_rng(seed), 1e-3, 1e3, samples))
    margins = cone.margin(zs, p)
    for i in range(samples):
        report.record(-margins[i], BOUNDARY_TOLERANCE, p=p[i])
    return report
