import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from hlab.models.Errors import DimensionMismatch, UnsupportedBackground
from hlab.models.Hermitian import (BackgroundForm, check_dimension, eigenpairs, eigenvalues,
                                   elementary_symmetric_all, identity_form)

logger = logging.getLogger(__name__)

# Boundary band for the defining inequalities. Each inequality is homogeneous of
# some degree q in the eigenvalues, so it is compared against
# BOUNDARY_TOLERANCE * (max |lambda|)^q; membership is then exactly scale invariant.
BOUNDARY_TOLERANCE = 1e-12


class ConeKind(str, Enum):
    POSITIVE = "positive"
    GAMMA_M = "gamma_m"
    M_MONGE = "m_monge"
    INTERP = "interp"
    INTERSECTION = "intersection"


class Membership(int, Enum):
    OUTSIDE = 0
    INSIDE = 1
    INDETERMINATE = 2


@dataclass(frozen=True)
class ConeFamily:
    """
    A family z -> Gamma(z) of open convex cones of Hermitian matrices, defined
    through the eigenvalues of A with respect to the background form.
    """
    kind: ConeKind
    n: int
    background: BackgroundForm
    m: int = 0
    a: float = 0.0
    members: Tuple["ConeFamily", ...] = field(default_factory=tuple)

    @property
    def name(self) -> str:
        if self.kind == ConeKind.POSITIVE:
            return "positive"
        if self.kind == ConeKind.GAMMA_M:
            return f"gamma_{self.m}"
        if self.kind == ConeKind.M_MONGE:
            return f"m_monge_{self.m}"
        if self.kind == ConeKind.INTERP:
            return f"interp_{self.a}"
        return "(" + " & ".join(c.name for c in self.members) + ")"

    def _background_matrix(self, z, a: np.ndarray) -> Optional[np.ndarray]:
        a = np.asarray(a, dtype=np.complex128)
        if a.shape[-1] != self.n:
            raise DimensionMismatch(self.n, a.shape[-1])
        if self.background.is_identity():
            return None
        z = _points_for(z, a, self.n)
        return self.background.at(z)

    def spectrum(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        return eigenvalues(a, self._background_matrix(z, a))

    def eigenpairs(self, z: np.ndarray, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Spectrum with B(z)-orthonormal eigenvectors as columns."""
        return eigenpairs(a, self._background_matrix(z, a))

    def defining_values(self, lam: np.ndarray) -> np.ndarray:
        """
        Scale-normalized values of the defining strict inequalities for an
        ascending spectrum; the cone is where all of them are positive.
        """
        lam = np.asarray(lam, dtype=float)
        if self.kind == ConeKind.INTERSECTION:
            return np.concatenate([c.defining_values(lam) for c in self.members], axis=-1)
        scale = np.max(np.abs(lam), axis=-1, keepdims=True)
        scale = np.where(scale > 0.0, scale, 1.0)
        if self.kind == ConeKind.POSITIVE:
            return lam / scale
        if self.kind == ConeKind.GAMMA_M:
            sig = elementary_symmetric_all(lam)[..., 1:self.m + 1]
            degrees = np.arange(1, self.m + 1)
            return sig / scale ** degrees
        if self.kind == ConeKind.M_MONGE:
            # lam is ascending, so the m smallest give the smallest m-fold sum
            return np.sum(lam[..., :self.m], axis=-1, keepdims=True) / scale
        l1, l2 = lam[..., 0], lam[..., 1]
        return np.stack([l1 + self.a * l2, l2 + self.a * l1], axis=-1) / scale

    def classify(self, lam: np.ndarray) -> np.ndarray:
        """Membership codes for ascending spectra."""
        values = self.defining_values(lam)
        outside = np.any(values < -BOUNDARY_TOLERANCE, axis=-1)
        inside = np.all(values > BOUNDARY_TOLERANCE, axis=-1)
        return np.where(outside, int(Membership.OUTSIDE),
                        np.where(inside, int(Membership.INSIDE), int(Membership.INDETERMINATE)))

    def membership(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Membership of A in Gamma(z) as Membership codes (array for stacks)."""
        return self.classify(self.spectrum(z, a))

    def contains(self, z: np.ndarray, a: np.ndarray):
        """True where A lies strictly inside Gamma(z); boundary cases count as outside."""
        codes = np.asarray(self.membership(z, a))
        undecided = codes == Membership.INDETERMINATE
        if np.any(undecided):
            logger.warning("Indeterminate cone membership for %s on %d matrices", self.name, int(np.sum(undecided)))
        inside = codes == Membership.INSIDE
        return bool(inside) if inside.ndim == 0 else inside

    def spectrum_margin(self, lam: np.ndarray) -> np.ndarray:
        return np.min(self.defining_values(lam), axis=-1)

    def margin(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Smallest normalized defining value; positive inside the cone."""
        return self.spectrum_margin(self.spectrum(z, a))

    def requires_identity_background(self):
        if not (self.background.constant and self.background.is_identity()):
            raise UnsupportedBackground(f"unitary invariance is stated for B = Id, not {self.background.name}")


def _points_for(z, a: np.ndarray, n: int) -> np.ndarray:
    z = np.zeros(n, dtype=np.complex128) if z is None else np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != n:
        raise DimensionMismatch(n, z.shape[-1])
    return np.broadcast_to(z, a.shape[:-2] + (n,))


def positive_cone(n: int, background: Optional[BackgroundForm] = None) -> ConeFamily:
    return ConeFamily(ConeKind.POSITIVE, check_dimension(n), background or identity_form(n))


def gamma_m(n: int, m: int, background: Optional[BackgroundForm] = None) -> ConeFamily:
    if not 1 <= m <= n:
        raise ValueError(f"Gamma_m needs 1 <= m <= n, got m={m}, n={n}")
    return ConeFamily(ConeKind.GAMMA_M, check_dimension(n), background or identity_form(n), m=m)


def m_monge(n: int, m: int, background: Optional[BackgroundForm] = None) -> ConeFamily:
    if not 1 <= m <= n:
        raise ValueError(f"m-Monge-Ampere cone needs 1 <= m <= n, got m={m}, n={n}")
    return ConeFamily(ConeKind.M_MONGE, check_dimension(n), background or identity_form(n), m=m)


def interp(a: float, n: int = 2) -> ConeFamily:
    """Gamma_{2-a} = {lambda_1 + a lambda_2 > 0, lambda_2 + a lambda_1 > 0}, only for n = 2."""
    if n != 2:
        raise DimensionMismatch(2, n)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"Gamma_(2-a) needs a in [0, 1], got {a}")
    return ConeFamily(ConeKind.INTERP, 2, identity_form(2), a=float(a))


def intersection(*cones: ConeFamily) -> ConeFamily:
    """Gamma_1(z) & ... & Gamma_k(z); the members share one background form."""
    if not cones:
        raise ValueError("intersection needs at least one cone")
    n = cones[0].n
    for c in cones:
        if c.n != n:
            raise DimensionMismatch(n, c.n)
        if c.background.name != cones[0].background.name:
            raise ValueError(f"cannot intersect cones over {cones[0].background.name} and {c.background.name}")
    return ConeFamily(ConeKind.INTERSECTION, n, cones[0].background, members=tuple(cones))
