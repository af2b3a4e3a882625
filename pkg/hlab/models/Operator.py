"""
The operator class G(z, A).

Every built-in is a Hessian operator: F(z, A) = F^(lambda(z, A)) with lambda the
eigenvalues of A with respect to the background form, normalized to degree one
as G = F^(1/k) / delta. Off the cone G is -inf, never an exception, so callers
can compare against it the way the viscosity definition does.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from hlab.models import Cone
from hlab.models.Cone import ConeFamily, Membership
from hlab.models.Errors import DimensionMismatch, OnConeBoundary
from hlab.models.Hermitian import (BackgroundForm, binomial, check_dimension, frobenius,
                                   elementary_symmetric_all, grad_det, hermitian, identity,
                                   pairing)

logger = logging.getLogger(__name__)

GRADIENT_MARGIN = 1e-10
BASE_STEP = 1e-4
# near the boundary the stencil shrinks to this fraction of the normalized margin
STEP_MARGIN_FRACTION = 0.05


class OperatorKind(str, Enum):
    MONGE_AMPERE = "monge_ampere"
    SIGMA_M = "sigma_m"
    M_MONGE_AMPERE = "m_monge_ampere"
    INTERP = "interp"
    HESSIAN_QUOTIENT = "hessian_quotient"
    LINEAR = "linear"
    COMBINATION = "combination"


@dataclass(frozen=True)
class CoefficientField:
    """z -> a(z) = (a^{i jbar}(z)), the coefficients of a linear operator."""
    n: int
    sampler: Callable[[np.ndarray], np.ndarray]
    name: str = "coefficients"

    def at(self, z: np.ndarray) -> np.ndarray:
        a = np.asarray(self.sampler(np.asarray(z, dtype=np.complex128)), dtype=np.complex128)
        if a.shape[-1] != self.n:
            raise DimensionMismatch(self.n, a.shape[-1])
        return a

    def apply(self, z: np.ndarray, h: np.ndarray) -> np.ndarray:
        """L h = sum a^{i jbar}(z) h_{i jbar}."""
        return pairing(self.at(z), h)


def constant_coefficients(a, name: str = "constant") -> CoefficientField:
    a = hermitian(a)
    n = a.shape[-1]

    def sampler(z: np.ndarray) -> np.ndarray:
        return np.broadcast_to(a, z.shape[:-1] + (n, n)).copy()

    return CoefficientField(n=n, sampler=sampler, name=name)


@dataclass(frozen=True)
class Operator:
    kind: OperatorKind
    n: int
    cone: ConeFamily
    degree_k: float
    delta: float
    m: int = 0
    l: int = 0
    a: float = 0.0
    coeffs: Optional[CoefficientField] = None
    members: Tuple["Operator", ...] = field(default_factory=tuple)
    weights: Tuple[Callable[[np.ndarray], np.ndarray], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.degree_k > 0 and self.delta > 0):
            raise ValueError(f"degree k and delta must be positive, got k={self.degree_k}, delta={self.delta}")

    @property
    def background(self) -> BackgroundForm:
        return self.cone.background

    @property
    def name(self) -> str:
        if self.kind == OperatorKind.MONGE_AMPERE:
            return "monge_ampere"
        if self.kind == OperatorKind.SIGMA_M:
            return f"sigma_{self.m}"
        if self.kind == OperatorKind.M_MONGE_AMPERE:
            return f"m_monge_ampere_{self.m}"
        if self.kind == OperatorKind.INTERP:
            return f"interp_{self.a}"
        if self.kind == OperatorKind.HESSIAN_QUOTIENT:
            return f"hessian_quotient_{self.m}_{self.l}"
        if self.kind == OperatorKind.LINEAR:
            return f"linear[{self.coeffs.name}]"
        return "combination(" + ", ".join(op.name for op in self.members) + ")"

    @property
    def is_spectral(self) -> bool:
        return self.kind not in (OperatorKind.LINEAR, OperatorKind.COMBINATION)

    def spectral_value(self, lam: np.ndarray) -> np.ndarray:
        """F^(lambda), the un-normalized Hessian function; meaningful inside the cone."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == OperatorKind.MONGE_AMPERE:
            return np.prod(lam, axis=-1)
        if self.kind == OperatorKind.SIGMA_M:
            return elementary_symmetric_all(lam)[..., self.m]
        if self.kind == OperatorKind.M_MONGE_AMPERE:
            return np.prod(_m_sums(lam, self.m), axis=-1)
        if self.kind == OperatorKind.INTERP:
            l1, l2 = lam[..., 0], lam[..., 1]
            return (1.0 - self.a) ** 2 * l1 * l2 + self.a * (l1 + l2) ** 2
        if self.kind == OperatorKind.HESSIAN_QUOTIENT:
            sig = elementary_symmetric_all(lam)
            return sig[..., self.m] / sig[..., self.l]
        raise ValueError(f"{self.kind} is not a Hessian operator")

    def spectral_derivative(self, lam: np.ndarray) -> np.ndarray:
        """dF^/dlambda_i in closed form."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == OperatorKind.MONGE_AMPERE:
            return _sigma_without(lam, self.n - 1)
        if self.kind == OperatorKind.SIGMA_M:
            return _sigma_without(lam, self.m - 1)
        if self.kind == OperatorKind.INTERP:
            l1, l2 = lam[..., 0], lam[..., 1]
            both = 2.0 * self.a * (l1 + l2)
            return np.stack([(1.0 - self.a) ** 2 * l2 + both, (1.0 - self.a) ** 2 * l1 + both], axis=-1)
        if self.kind == OperatorKind.HESSIAN_QUOTIENT:
            sig = elementary_symmetric_all(lam)
            top, bottom = sig[..., self.m, None], sig[..., self.l, None]
            return (_sigma_without(lam, self.m - 1) * bottom - top * _sigma_without(lam, self.l - 1)) / bottom ** 2
        raise ValueError(f"{self.kind} has no spectral derivative")

    def _normalized(self, lam: np.ndarray) -> np.ndarray:
        if self.kind == OperatorKind.M_MONGE_AMPERE:
            # geometric mean of the m-fold sums, to stay away from overflow
            sums = _m_sums(lam, self.m)
            return np.exp(np.mean(np.log(np.maximum(sums, np.finfo(float).tiny)), axis=-1)) / self.delta
        raw = np.maximum(self.spectral_value(lam), 0.0)
        return raw ** (1.0 / self.degree_k) / self.delta

    def normalized_derivative(self, lam: np.ndarray) -> np.ndarray:
        """dG/dlambda_i for G = F^(1/k) / delta, inside the cone."""
        lam = np.asarray(lam, dtype=float)
        g = self._normalized(lam)
        if self.kind == OperatorKind.M_MONGE_AMPERE:
            combos = _m_subsets(self.n, self.m)
            member = np.zeros((len(combos), self.n))
            member[np.arange(len(combos))[:, None], combos] = 1.0
            return g[..., None] * ((1.0 / _m_sums(lam, self.m)) @ member) / len(combos)
        f = self.spectral_value(lam)
        return (g / (self.degree_k * f))[..., None] * self.spectral_derivative(lam)

    def evaluate(self, z: np.ndarray, a: np.ndarray):
        """Normalized G(z, A); -inf wherever A is not strictly inside Gamma(z)."""
        a = np.asarray(a, dtype=np.complex128)
        if a.shape[-1] != self.n:
            raise DimensionMismatch(self.n, a.shape[-1])
        z = _points(z, a, self.n)
        if self.kind == OperatorKind.LINEAR:
            value = self.coeffs.apply(z, a)
            inside = self.cone.membership(z, a) == Membership.INSIDE
        elif self.kind == OperatorKind.COMBINATION:
            value = np.zeros(a.shape[:-2])
            for op, weight in zip(self.members, self.weights):
                value = value + np.asarray(weight(z), dtype=float) * op.evaluate(z, a)
            inside = np.isfinite(value)
        else:
            lam = self.cone.spectrum(z, a)
            inside = self.cone.classify(lam) == Membership.INSIDE
            value = self._normalized(lam)
        out = np.where(inside, value, -np.inf)
        return float(out) if np.ndim(out) == 0 else out

    def f_value(self, z: np.ndarray, a: np.ndarray):
        """F = (delta * G)^k, the operator before normalization (0 off the cone)."""
        g = np.asarray(self.evaluate(z, a), dtype=float)
        out = np.where(np.isfinite(g), (self.delta * np.maximum(g, 0.0)) ** self.degree_k, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def _require_margin(self, z: np.ndarray, margin: np.ndarray):
        margin = np.asarray(margin)
        if np.any(margin <= GRADIENT_MARGIN):
            bad = np.unravel_index(int(np.argmin(margin)), margin.shape) if margin.ndim else ()
            raise OnConeBoundary(f"cannot linearize {self.name}: cone margin {float(np.min(margin)):.3e}", z[bad])

    def gradient(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """
        G^{i jbar}(z, A) = dG / da_{i jbar}, in closed form. Monge-Ampere goes
        through the cofactor matrix; the other Hessian operators through
        conj(W diag(dG/dlambda) W^*) with W the B(z)-orthonormal eigenvectors.
        """
        a = np.asarray(a, dtype=np.complex128)
        if a.shape[-1] != self.n:
            raise DimensionMismatch(self.n, a.shape[-1])
        z = _points(z, a, self.n)
        if self.kind == OperatorKind.COMBINATION:
            grad = np.zeros(a.shape, dtype=np.complex128)
            for op, weight in zip(self.members, self.weights):
                grad = grad + np.asarray(weight(z), dtype=float)[..., None, None] * op.gradient(z, a)
            return grad
        if self.kind == OperatorKind.LINEAR:
            self._require_margin(z, self.cone.margin(z, a))
            return self.coeffs.at(z)

        lam, w = self.cone.eigenpairs(z, a)
        self._require_margin(z, self.cone.spectrum_margin(lam))
        if self.kind == OperatorKind.MONGE_AMPERE:
            g = self._normalized(lam)
            det = np.real(np.linalg.det(a))
            return (g / (self.n * det))[..., None, None] * grad_det(a)
        d = self.normalized_derivative(lam)
        return np.conj((w * d[..., None, :]) @ np.conj(np.swapaxes(w, -1, -2)))

    def numeric_gradient(self, z: np.ndarray, a: np.ndarray, step=None, richardson: bool = True) -> np.ndarray:
        """
        Hermitian central differences of G along hermitian_basis(n), with one
        Richardson level unless richardson=False. The default step shrinks with
        the cone margin so the stencil stays inside the cone.
        """
        a = np.asarray(a, dtype=np.complex128)
        if a.shape[-1] != self.n:
            raise DimensionMismatch(self.n, a.shape[-1])
        z = _points(z, a, self.n)
        lam = self.cone.spectrum(z, a)
        margin = self.cone.spectrum_margin(lam)
        self._require_margin(z, margin)
        if step is None:
            scale = np.max(np.abs(lam), axis=-1)
            step = np.minimum(BASE_STEP * (1.0 + frobenius(a)), STEP_MARGIN_FRACTION * margin * scale)
        step = np.broadcast_to(np.asarray(step, dtype=float), margin.shape)[..., None, None, None]

        basis = hermitian_basis(self.n)
        zs = np.broadcast_to(z[..., None, :], z.shape[:-1] + (len(basis), self.n))

        def central(h):
            plus = np.asarray(self.evaluate(zs, a[..., None, :, :] + h * basis))
            minus = np.asarray(self.evaluate(zs, a[..., None, :, :] - h * basis))
            if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
                raise OnConeBoundary(f"difference stencil of {self.name} leaves the cone")
            return (plus - minus) / (2.0 * h[..., 0, 0])

        d_h = central(step)
        if not richardson:
            return assemble_gradient(d_h, self.n)
        d_half = central(0.5 * step)
        return assemble_gradient((4.0 * d_half - d_h) / 3.0, self.n)


def hermitian_basis(n: int) -> np.ndarray:
    """
    Directions E_ii, then E_ij + E_ji and i E_ij - i E_ji for i < j; n^2 in all.
    """
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[i, i] = 1.0
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = e[j, i] = 1.0
            out.append(e)
            f = np.zeros((n, n), dtype=np.complex128)
            f[i, j] = 1j
            f[j, i] = -1j
            out.append(f)
    return np.array(out)


def assemble_gradient(derivative: np.ndarray, n: int) -> np.ndarray:
    """Rebuild G^{i jbar} from directional derivatives along hermitian_basis(n)."""
    grad = np.zeros(derivative.shape[:-1] + (n, n), dtype=np.complex128)
    k = 0
    for i in range(n):
        grad[..., i, i] = derivative[..., k]
        k += 1
    for i in range(n):
        for j in range(i + 1, n):
            # along E_ij + E_ji: 2 Re G^{ij}; along i E_ij - i E_ji: -2 Im G^{ij}
            value = 0.5 * (derivative[..., k] - 1j * derivative[..., k + 1])
            grad[..., i, j] = value
            grad[..., j, i] = np.conj(value)
            k += 2
    return grad


def _m_subsets(n: int, m: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), m)))


def _m_sums(lam: np.ndarray, m: int) -> np.ndarray:
    return np.sum(lam[..., _m_subsets(lam.shape[-1], m)], axis=-1)


def _sigma_without(lam: np.ndarray, q: int) -> np.ndarray:
    """sigma_q of lambda with lambda_i removed, for each i along the last axis."""
    n = lam.shape[-1]
    return np.stack([elementary_symmetric_all(np.delete(lam, i, axis=-1))[..., q] for i in range(n)], axis=-1)


def _points(z, a: np.ndarray, n: int) -> np.ndarray:
    z = np.zeros(n, dtype=np.complex128) if z is None else np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != n:
        raise DimensionMismatch(n, z.shape[-1])
    return np.broadcast_to(z, a.shape[:-2] + (n,))


def monge_ampere(n: int, background: Optional[BackgroundForm] = None) -> Operator:
    return Operator(OperatorKind.MONGE_AMPERE, check_dimension(n), Cone.positive_cone(n, background),
                    degree_k=n, delta=1.0)


def sigma_m(n: int, m: int, background: Optional[BackgroundForm] = None) -> Operator:
    """Complex m-Hessian; delta = C(n, m)^(1/m) so that Maclaurin gives (d)."""
    return Operator(OperatorKind.SIGMA_M, check_dimension(n), Cone.gamma_m(n, m, background),
                    degree_k=m, delta=binomial(n, m) ** (1.0 / m), m=m)


def m_monge_ampere(n: int, m: int, background: Optional[BackgroundForm] = None) -> Operator:
    """Product of all m-fold eigenvalue sums; degree C(n, m), delta = m."""
    return Operator(OperatorKind.M_MONGE_AMPERE, check_dimension(n), Cone.m_monge(n, m, background),
                    degree_k=binomial(n, m), delta=float(m), m=m)


def interp(a: float) -> Operator:
    """(1-a)^2 l1 l2 + a (l1 + l2)^2 on Gamma_{2-a}, n = 2; delta = 1 + a."""
    return Operator(OperatorKind.INTERP, 2, Cone.interp(a), degree_k=2, delta=1.0 + a, a=float(a))


def hessian_quotient(n: int, m: int, l: int, background: Optional[BackgroundForm] = None) -> Operator:
    """sigma_m / sigma_l on Gamma_m; concave and homogeneous but fails the det comparison."""
    if not 1 <= l < m <= n:
        raise ValueError(f"Hessian quotient needs 1 <= l < m <= n, got m={m}, l={l}, n={n}")
    return Operator(OperatorKind.HESSIAN_QUOTIENT, check_dimension(n), Cone.gamma_m(n, m, background),
                    degree_k=m - l, delta=1.0, m=m, l=l)


def linear(coeffs: CoefficientField) -> Operator:
    """L A = sum a^{i jbar}(z) A_{i jbar} on the positive cone."""
    return Operator(OperatorKind.LINEAR, check_dimension(coeffs.n), Cone.positive_cone(coeffs.n),
                    degree_k=1, delta=1.0, coeffs=coeffs)


def combination(ops: Sequence[Operator], weights: Sequence[Callable[[np.ndarray], np.ndarray]]) -> Operator:
    """
    sum alpha_i(z) G_i(z, A) with alpha_i >= 0 summing to one; the cone is the
    intersection of the members' cones.
    """
    if len(ops) != len(weights) or not ops:
        raise ValueError("combination needs one weight field per operator")
    n = ops[0].n
    cone = Cone.intersection(*[op.cone for op in ops])
    return Operator(OperatorKind.COMBINATION, n, cone, degree_k=1, delta=1.0,
                    members=tuple(ops), weights=tuple(weights))


def constant_weight(value: float) -> Callable[[np.ndarray], np.ndarray]:
    def weight(z: np.ndarray) -> np.ndarray:
        return np.full(np.shape(z)[:-1], float(value))
    return weight


def linearize(op: Operator, hessian_field: Callable[[np.ndarray], np.ndarray], normalized: bool = True) -> CoefficientField:
    """
    z -> G^{i jbar}(z, D^2u(z)), the linearization L_u of G about u.
    With normalized=False and Monge-Ampere, the coefficients are those of det
    itself (the cofactor matrix), as in the classical linearized example.
    """
    if not normalized and op.kind != OperatorKind.MONGE_AMPERE:
        raise ValueError("only the Monge-Ampere operator has an un-normalized linearization")

    def sampler(z: np.ndarray) -> np.ndarray:
        hess = np.asarray(hessian_field(z), dtype=np.complex128)
        if not normalized:
            return grad_det(hess)
        return op.gradient(z, hess)

    label = op.name if normalized else "det"
    return CoefficientField(n=op.n, sampler=sampler, name=f"L[{label}]")


def unit_value(op: Operator) -> float:
    """G(z, Id) at z = 0; at least one for every operator meeting (d)."""
    return float(op.evaluate(np.zeros(op.n, dtype=np.complex128), identity(op.n)))


def build(kind: str, n: int, m: int = 0, l: int = 0, a: float = 0.0,
          background: Optional[BackgroundForm] = None) -> Operator:
    """Built-in operator by string id, as used by the command line."""
    if kind == OperatorKind.INTERP:
        if background is not None and not background.is_identity():
            raise ValueError("the interpolated operator is defined for B = Id only")
        return interp(a)
    if kind == OperatorKind.LINEAR:
        return linear(constant_coefficients(identity(n), "identity"))
    if kind == OperatorKind.MONGE_AMPERE:
        return monge_ampere(n, background)
    if kind == OperatorKind.SIGMA_M:
        return sigma_m(n, m, background)
    if kind == OperatorKind.M_MONGE_AMPERE:
        return m_monge_ampere(n, m, background)
    if kind == OperatorKind.HESSIAN_QUOTIENT:
        return hessian_quotient(n, m, l, background)
    raise ValueError(f"unknown operator id {kind!r}")
