"""
Complex Hermitian arithmetic for the lab.

Matrices are plain numpy complex arrays of shape (..., n, n); every function
here accepts a single matrix or a stack of them, so grid checks can hand in
one array per grid and stay vectorised.

Eigenvalues are taken with respect to a background form B: the roots of
det(A - lambda B) = 0. B is reduced away by a Cholesky congruence and the
remaining Hermitian problem is diagonalised by a cyclic complex Jacobi sweep.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import comb

from hlab.models.Errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite

MIN_DIM = 2
MAX_DIM = 8
PIVOT_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 60
JACOBI_TOLERANCE = 1e-14

HermitianMatrix = np.ndarray
SpectrumVector = np.ndarray


def hermitian(entries) -> HermitianMatrix:
    """
    Build a Hermitian matrix (or stack) from the upper triangle of `entries`.

    The lower triangle is written as the conjugate of the upper one, and the
    diagonal keeps only its real part, so the result is exactly Hermitian.
    """
    m = np.asarray(entries, dtype=np.complex128)
    check_square(m)
    upper = np.triu(m, 1)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    out = upper + np.conj(np.swapaxes(upper, -1, -2))
    idx = np.arange(m.shape[-1])
    out[..., idx, idx] = diag
    return out


def symmetrize(m: np.ndarray) -> HermitianMatrix:
    """Average a nearly Hermitian matrix with its conjugate transpose."""
    m = np.asarray(m, dtype=np.complex128)
    return hermitian(0.5 * (m + np.conj(np.swapaxes(m, -1, -2))))


def check_square(m: np.ndarray) -> int:
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionMismatch(m.shape[-1] if m.ndim else 0, m.shape[-2] if m.ndim > 1 else 0)
    return m.shape[-1]


def check_dimension(n: int) -> int:
    if not MIN_DIM <= n <= MAX_DIM:
        raise DimensionMismatch(MAX_DIM if n > MAX_DIM else MIN_DIM, n)
    return n


def identity(n: int) -> HermitianMatrix:
    return np.eye(n, dtype=np.complex128)


def pairing(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """
    The coefficient pairing sum_{i,j} a^{i jbar} h_{i jbar}.

    For a gradient a of an operator at A this is the directional derivative in
    the direction h; for Hermitian a and h it is real.
    """
    return np.real(np.einsum("...ij,...ij->...", a, h))


@dataclass(frozen=True)
class BackgroundForm:
    """A smooth positive Hermitian (1,1)-form, sampled as z -> B(z)."""
    n: int
    sampler: Callable[[np.ndarray], np.ndarray]
    constant: bool = False
    name: str = "custom"

    def at(self, z: np.ndarray) -> HermitianMatrix:
        z = np.asarray(z, dtype=np.complex128)
        b = np.asarray(self.sampler(z), dtype=np.complex128)
        if b.shape[-1] != self.n:
            raise DimensionMismatch(self.n, b.shape[-1])
        return b

    def is_identity(self) -> bool:
        return self.constant and self.name == "identity"


def identity_form(n: int) -> BackgroundForm:
    check_dimension(n)

    def sampler(z: np.ndarray) -> np.ndarray:
        return np.broadcast_to(identity(n), z.shape[:-1] + (n, n)).copy()

    return BackgroundForm(n=n, sampler=sampler, constant=True, name="identity")


def diagonal_weight_form(n: int, weight: float) -> BackgroundForm:
    """B(z) = diag(1 + weight * |z_k|^2), a z-dependent Kahler-type background."""
    check_dimension(n)

    def sampler(z: np.ndarray) -> np.ndarray:
        d = 1.0 + weight * np.abs(z) ** 2
        out = np.zeros(z.shape[:-1] + (n, n), dtype=np.complex128)
        idx = np.arange(n)
        out[..., idx, idx] = d
        return out

    return BackgroundForm(n=n, sampler=sampler, constant=False, name=f"diagonal_weight:{weight}")


def congruence_factor(b: np.ndarray) -> np.ndarray:
    """Cholesky factor L with B = L L^*, rejecting pivots at or below 1e-12."""
    try:
        low = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"background form is not positive definite: {e}") from e
    pivots = np.real(np.diagonal(low, axis1=-2, axis2=-1)) ** 2
    if not np.all(pivots > PIVOT_TOLERANCE):
        raise NotPositiveDefinite(f"factorization pivot {np.min(pivots):.3e} <= {PIVOT_TOLERANCE}")
    return low


def _jacobi_rotate(a: np.ndarray, v: Optional[np.ndarray], p: int, q: int) -> None:
    app = np.real(a[..., p, p])
    aqq = np.real(a[..., q, q])
    apq = a[..., p, q]
    mag = np.abs(apq)
    active = mag > JACOBI_TOLERANCE * 1e-3 * (np.abs(app) + np.abs(aqq)) + np.finfo(float).tiny
    safe = np.where(active, mag, 1.0)
    phase = np.where(active, apq / safe, 1.0)
    tau = (aqq - app) / (2.0 * safe)
    sign = np.where(tau >= 0.0, 1.0, -1.0)
    t = np.where(active, sign / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
    g = np.empty(a.shape[:-2] + (2, 2), dtype=np.complex128)
    g[..., 0, 0] = c
    g[..., 0, 1] = s
    g[..., 1, 0] = -s * np.conj(phase)
    g[..., 1, 1] = c * np.conj(phase)

    pair = [p, q]
    a[..., :, pair] = a[..., :, pair] @ g
    a[..., pair, :] = np.conj(np.swapaxes(g, -1, -2)) @ a[..., pair, :]
    a[..., q, p] = 0.0
    a[..., p, q] = 0.0
    if v is not None:
        v[..., :, pair] = v[..., :, pair] @ g


def jacobi_eigh(c: np.ndarray, vectors: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Cyclic two-sided Jacobi diagonalisation of a Hermitian matrix or stack.

    Returns ascending eigenvalues and, when asked, unitary eigenvectors as
    columns.
    """
    a = np.array(c, dtype=np.complex128, copy=True)
    n = check_square(a)
    v = np.broadcast_to(identity(n), a.shape).copy() if vectors else None
    total = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    off_mask = ~np.eye(n, dtype=bool)

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sum(np.abs(a[..., off_mask]) ** 2, axis=-1)
        if np.all(off <= (JACOBI_TOLERANCE ** 2) * total):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                _jacobi_rotate(a, v, p, q)

    values = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    order = np.argsort(values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    if v is not None:
        v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return values, v


def _reduce(a: np.ndarray, b: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    a = np.asarray(a, dtype=np.complex128)
    n = check_square(a)
    if b is None:
        return a, None
    b = np.asarray(b, dtype=np.complex128)
    if check_square(b) != n:
        raise DimensionMismatch(n, b.shape[-1])
    low_inv = np.linalg.inv(congruence_factor(b))
    reduced = low_inv @ a @ np.conj(np.swapaxes(low_inv, -1, -2))
    return symmetrize(reduced), low_inv


def eigenvalues(a: HermitianMatrix, b: Optional[HermitianMatrix] = None) -> SpectrumVector:
    """Generalized eigenvalues of A with respect to B (identity when omitted), ascending."""
    reduced, _ = _reduce(a, b)
    values, _ = jacobi_eigh(reduced)
    return values


def eigenpairs(a: HermitianMatrix, b: Optional[HermitianMatrix] = None) -> Tuple[SpectrumVector, np.ndarray]:
    """Eigenvalues with B-orthonormal eigenvectors (columns): A v = lambda B v."""
    reduced, low_inv = _reduce(a, b)
    values, w = jacobi_eigh(reduced, vectors=True)
    if low_inv is not None:
        w = np.conj(np.swapaxes(low_inv, -1, -2)) @ w
    return values, w


def elementary_symmetric_all(lam: np.ndarray) -> np.ndarray:
    """
    All elementary symmetric polynomials sigma_0..sigma_n of the last axis,
    by expanding prod_i (1 + lambda_i t) one factor at a time.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i, None]
        # right-hand side is evaluated before assignment, so sigma_{q-1} is the old one
        e[..., 1:i + 2] = e[..., 1:i + 2] + li * e[..., 0:i + 1]
    return e


def elementary_symmetric(lam: np.ndarray, q: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 0 <= q <= n:
        raise IndexOutOfRange(f"sigma_{q} undefined for {n} eigenvalues")
    return elementary_symmetric_all(lam)[..., q]


def binomial(n: int, m: int) -> int:
    return int(comb(n, m, exact=True))


def grad_det(a: HermitianMatrix) -> HermitianMatrix:
    """
    Exact gradient of det at A: entry (i, j) is the cofactor C_ij, which is
    d det / d a_{i jbar}. Built from minors, so singular A is fine.
    """
    a = np.asarray(a, dtype=np.complex128)
    n = check_square(a)
    out = np.empty_like(a)
    rows = np.arange(n)
    for i in range(n):
        keep_r = rows[rows != i]
        for j in range(n):
            keep_c = rows[rows != j]
            minor = a[..., keep_r[:, None], keep_c[None, :]]
            out[..., i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return out


def random_unitary(n: int, rng: np.random.Generator, count: Optional[int] = None) -> np.ndarray:
    """
    Haar-like unitary from the QR factorization of a complex Gaussian matrix;
    a stack of `count` of them when count is given.
    """
    shape = (1 if count is None else count, n, n)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    return q[0] if count is None else q


def conjugate(a: np.ndarray, u: np.ndarray) -> HermitianMatrix:
    """U^* A U, re-hermitized."""
    return symmetrize(np.conj(np.swapaxes(u, -1, -2)) @ a @ u)


def from_spectrum(lam: np.ndarray, u: np.ndarray) -> HermitianMatrix:
    """U^* diag(lambda) U for a spectrum (or stack of spectra) and matching unitaries."""
    lam = np.asarray(lam, dtype=float)
    d = np.zeros(lam.shape + (lam.shape[-1],), dtype=np.complex128)
    idx = np.arange(lam.shape[-1])
    d[..., idx, idx] = lam
    return conjugate(d, u)


def random_hermitian(n: int, seed, spectrum_range: Tuple[float, float] = (-1.0, 1.0)) -> HermitianMatrix:
    """Deterministic U^* diag(lambda) U with lambda uniform in spectrum_range."""
    check_dimension(n)
    rng = np.random.default_rng(seed)
    lo, hi = spectrum_range
    lam = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, float(lo))
    return from_spectrum(lam, random_unitary(n, rng))


def random_positive(n: int, rng: np.random.Generator, low: float = 0.1, high: float = 4.0,
                    count: Optional[int] = None) -> HermitianMatrix:
    """Positive definite matrices with log-uniform eigenvalues in [low, high]."""
    shape = (n,) if count is None else (count, n)
    lam = np.exp(rng.uniform(np.log(low), np.log(high), size=shape))
    return from_spectrum(lam, random_unitary(n, rng, count))


def frobenius(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
