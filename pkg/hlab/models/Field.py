"""
Analytic test functions with exact complex Hessians, and the finite-difference
complex Hessian used to cross-check them.

Hessians follow the Wirtinger convention u_{i jbar} = d^2 u / dz_i dzbar_j, so
|z|^2 has Hessian Id. For a function of s = |w|^2 in a block of variables w,
the block Hessian is psi'(s) Id + psi''(s) conj(w) w^T.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from hlab.models.Errors import SingularPoint, TooCloseToSingularity
from hlab.models.Hermitian import check_dimension, symmetrize

DEFAULT_STEP = 1e-4
EXCLUSION_FACTOR = 10.0

Points = np.ndarray


@dataclass(frozen=True)
class ScalarField:
    """A real function on a ball in C^n, optionally with a closed-form Hessian."""
    field_id: str
    n: int
    value_fn: Callable[[Points], np.ndarray]
    hessian_fn: Optional[Callable[[Points], np.ndarray]] = None
    center: Tuple[complex, ...] = ()
    radius: float = 1.0
    singular_set: str = ""
    singular_distance: Optional[Callable[[Points], np.ndarray]] = None
    sobolev_range: Optional[Tuple[float, float]] = None
    params: Dict[str, float] = field(default_factory=dict)

    def value(self, z: Points) -> np.ndarray:
        return np.asarray(self.value_fn(np.asarray(z, dtype=np.complex128)), dtype=float)

    def distance_to_singular(self, z: Points) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        if self.singular_distance is None:
            return np.full(z.shape[:-1], np.inf)
        return np.asarray(self.singular_distance(z), dtype=float)

    @property
    def has_exact_hessian(self) -> bool:
        return self.hessian_fn is not None

    def exact_hessian(self, z: Points) -> np.ndarray:
        if self.hessian_fn is None:
            raise ValueError(f"{self.field_id} has no closed-form Hessian")
        z = np.asarray(z, dtype=np.complex128)
        dist = self.distance_to_singular(z)
        if np.any(dist <= 0.0):
            bad = np.unravel_index(int(np.argmin(dist)), dist.shape) if dist.ndim else ()
            raise SingularPoint(f"{self.field_id} has no Hessian on {self.singular_set}", z[bad])
        return self.hessian_fn(z)

    def hessian(self, z: Points) -> np.ndarray:
        """Closed form when there is one, otherwise the finite-difference oracle."""
        if self.has_exact_hessian:
            return self.exact_hessian(z)
        return fd_hessian(self, z)

    def plus(self, constant: float) -> "ScalarField":
        value_fn = self.value_fn
        return replace(self, value_fn=lambda z: value_fn(z) + constant,
                       params={**self.params, "shift": self.params.get("shift", 0.0) + constant})

    def scaled(self, t: float) -> "ScalarField":
        value_fn, hessian_fn = self.value_fn, self.hessian_fn
        return replace(self, field_id=f"{t}*{self.field_id}",
                       value_fn=lambda z: t * value_fn(z),
                       hessian_fn=None if hessian_fn is None else (lambda z: t * hessian_fn(z)))

    def add(self, other: "ScalarField", t: float = 1.0) -> "ScalarField":
        """u + t v; singular where either is."""
        if other.n != self.n:
            raise ValueError(f"cannot add fields on C^{self.n} and C^{other.n}")
        v1, v2 = self.value_fn, other.value_fn
        h1, h2 = self.hessian_fn, other.hessian_fn
        d1, d2 = self.singular_distance, other.singular_distance
        if d1 is None or d2 is None:
            distance = d1 or d2
        else:
            distance = lambda z: np.minimum(d1(z), d2(z))
        sign = "+" if t >= 0 else "-"
        return replace(
            self,
            field_id=f"{self.field_id}{sign}{abs(t)}*{other.field_id}",
            value_fn=lambda z: v1(z) + t * v2(z),
            hessian_fn=None if h1 is None or h2 is None else (lambda z: h1(z) + t * h2(z)),
            singular_set=" & ".join(s for s in (self.singular_set, other.singular_set) if s),
            singular_distance=distance,
            sobolev_range=None,
            params={},
        )


def real_directions(n: int) -> np.ndarray:
    """The 2n real unit directions: e_k (x_k) then i e_k (y_k)."""
    eye = np.eye(n, dtype=np.complex128)
    return np.concatenate([eye, 1j * eye])


def default_step(z: Points) -> np.ndarray:
    return DEFAULT_STEP * (1.0 + np.linalg.norm(z, axis=-1))


def _check_clearance(u: ScalarField, z: Points, h: np.ndarray):
    dist = u.distance_to_singular(z)
    too_close = dist < 2.0 * h
    if np.any(too_close):
        index = np.unravel_index(int(np.argmax(too_close)), too_close.shape) if too_close.ndim else ()
        raise TooCloseToSingularity(f"stencil of {u.field_id} reaches {u.singular_set}", z[index])


def fd_hessian(u: ScalarField, z: Points, h=None) -> np.ndarray:
    """
    u_{i jbar} = 1/4 [(u_{x_i x_j} + u_{y_i y_j}) + i (u_{x_i y_j} - u_{y_i x_j})],
    real second derivatives by central differences of step h.
    """
    z = np.asarray(z, dtype=np.complex128)
    n = z.shape[-1]
    h = default_step(z) if h is None else np.broadcast_to(np.asarray(h, dtype=float), z.shape[:-1])
    _check_clearance(u, z, h)

    dirs = real_directions(n)
    hh = np.asarray(h)[..., None, None, None]
    # offsets (+a+b, +a-b, -a+b, -a-b) for every pair of real directions
    da = dirs[:, None, :]
    db = dirs[None, :, :]
    zz = z[..., None, None, :]
    pp = u.value(zz + hh * (da + db))
    pm = u.value(zz + hh * (da - db))
    mp = u.value(zz + hh * (-da + db))
    mm = u.value(zz + hh * (-da - db))
    d2 = (pp - pm - mp + mm) / (4.0 * np.asarray(h)[..., None, None] ** 2)

    xx = d2[..., :n, :n]
    yy = d2[..., n:, n:]
    xy = d2[..., :n, n:]
    yx = d2[..., n:, :n]
    return symmetrize(0.25 * ((xx + yy) + 1j * (xy - yx)))


def fd_gradient_norm(u: ScalarField, z: Points, h=None) -> np.ndarray:
    """Euclidean norm of the real gradient in R^{2n}, by central differences."""
    z = np.asarray(z, dtype=np.complex128)
    h = default_step(z) if h is None else np.broadcast_to(np.asarray(h, dtype=float), z.shape[:-1])
    dirs = real_directions(z.shape[-1])
    hh = np.asarray(h)[..., None, None]
    plus = u.value(z[..., None, :] + hh * dirs)
    minus = u.value(z[..., None, :] - hh * dirs)
    grad = (plus - minus) / (2.0 * np.asarray(h)[..., None])
    return np.linalg.norm(grad, axis=-1)


def _tail_sq(z: Points) -> np.ndarray:
    return np.sum(np.abs(z[..., 1:]) ** 2, axis=-1)


def _tail_distance(z: Points) -> np.ndarray:
    return np.sqrt(_tail_sq(z))


def _radial_block(w: Points, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """d1 Id + d2 conj(w) w^T for the block of variables w."""
    k = w.shape[-1]
    return d1[..., None, None] * np.eye(k) + d2[..., None, None] * (np.conj(w)[..., :, None] * w[..., None, :])


def quadratic(n: int, scale: float = 1.0, offset: float = 0.0) -> ScalarField:
    """scale * |z|^2 + offset."""
    check_dimension(n)

    def value(z):
        return scale * np.sum(np.abs(z) ** 2, axis=-1) + offset

    def hessian(z):
        return np.broadcast_to(scale * np.eye(n, dtype=np.complex128), z.shape[:-1] + (n, n)).copy()

    name = "quadratic" if scale == 1.0 else f"quadratic:{scale}"
    return ScalarField(name, n, value, hessian, center=tuple(np.zeros(n, dtype=complex)),
                       params={"scale": scale, "shift": offset})


def pluriharmonic(n: int, kind: str = "square") -> ScalarField:
    """Re(z_1^2) or Re(z_1); both have vanishing complex Hessian."""
    check_dimension(n)
    if kind == "square":
        def value(z):
            return np.real(z[..., 0] ** 2)
    elif kind == "linear":
        def value(z):
            return np.real(z[..., 0])
    else:
        raise ValueError(f"unknown pluriharmonic kind {kind!r}")

    def hessian(z):
        return np.zeros(z.shape[:-1] + (n, n), dtype=np.complex128)

    return ScalarField(f"pluriharmonic:{kind}", n, value, hessian, center=tuple(np.zeros(n, dtype=complex)))


def perturbed_quadratic(n: int, a: float = 0.3, b: float = 0.1) -> ScalarField:
    """|z|^2 + a Re(z_1^2) + b |z_1|^4, Hessian diag(1 + 4b|z_1|^2, 1, ..., 1)."""
    check_dimension(n)

    def value(z):
        t = np.abs(z[..., 0]) ** 2
        return np.sum(np.abs(z) ** 2, axis=-1) + a * np.real(z[..., 0] ** 2) + b * t * t

    def hessian(z):
        out = np.broadcast_to(np.eye(n, dtype=np.complex128), z.shape[:-1] + (n, n)).copy()
        out[..., 0, 0] += 4.0 * b * np.abs(z[..., 0]) ** 2
        return out

    return ScalarField("perturbed_quadratic", n, value, hessian, center=tuple(np.zeros(n, dtype=complex)),
                       params={"a": a, "b": b})


def pogorelov_u(n: int) -> ScalarField:
    """
    |z'|^{2(1-1/n)} (1 + |z_1|^2), z = (z_1, z'). A strong solution of
    det D^2u = pogorelov_f off {z' = 0}, in W^{2,r}_loc for r < n(n-1) only.
    """
    check_dimension(n)
    alpha = 1.0 - 1.0 / n

    def value(z):
        s = _tail_sq(z)
        return s ** alpha * (1.0 + np.abs(z[..., 0]) ** 2)

    def hessian(z):
        s = _tail_sq(z)
        z1 = z[..., 0]
        w = z[..., 1:]
        m = 1.0 + np.abs(z1) ** 2
        d1 = alpha * s ** (alpha - 1.0)
        d2 = alpha * (alpha - 1.0) * s ** (alpha - 2.0)
        out = np.empty(z.shape[:-1] + (n, n), dtype=np.complex128)
        out[..., 0, 0] = s ** alpha
        out[..., 0, 1:] = d1[..., None] * np.conj(z1)[..., None] * w
        out[..., 1:, 0] = d1[..., None] * z1[..., None] * np.conj(w)
        out[..., 1:, 1:] = m[..., None, None] * _radial_block(w, d1, d2)
        return out

    return ScalarField("pogorelov_u", n, value, hessian, center=tuple(np.zeros(n, dtype=complex)),
                       singular_set="{z' = 0}", singular_distance=_tail_distance,
                       sobolev_range=(1.0, float(n * (n - 1))))


def pogorelov_f(n: int) -> ScalarField:
    """(1 - 1/n)^n (1 + |z_1|^2)^{n-2}."""
    check_dimension(n)

    def value(z):
        return (1.0 - 1.0 / n) ** n * (1.0 + np.abs(z[..., 0]) ** 2) ** (n - 2)

    return ScalarField("pogorelov_f", n, value, center=tuple(np.zeros(n, dtype=complex)))


def phi_R(n: int, R: float) -> ScalarField:
    """
    |z'|^{2(1-1/n)} (1 + R^2 - |z'|^2) on B_R(0). Independent of z_1, so its
    Hessian has a zero row and det D^2 phi = 0.
    """
    if n < 3:
        raise ValueError(f"phi_R needs n >= 3, got {n}")
    check_dimension(n)
    if R <= 0:
        raise ValueError(f"phi_R needs R > 0, got {R}")
    alpha = 1.0 - 1.0 / n
    c = 1.0 + R * R

    def value(z):
        s = _tail_sq(z)
        return s ** alpha * (c - s)

    def hessian(z):
        s = _tail_sq(z)
        d1 = alpha * c * s ** (alpha - 1.0) - (alpha + 1.0) * s ** alpha
        d2 = alpha * (alpha - 1.0) * c * s ** (alpha - 2.0) - (alpha + 1.0) * alpha * s ** (alpha - 1.0)
        out = np.zeros(z.shape[:-1] + (n, n), dtype=np.complex128)
        out[..., 1:, 1:] = _radial_block(z[..., 1:], d1, d2)
        return out

    return ScalarField("phi_R", n, value, hessian, center=tuple(np.zeros(n, dtype=complex)), radius=R,
                       singular_set="{z' = 0}", singular_distance=_tail_distance,
                       sobolev_range=(float(n), float(n * (n - 1))), params={"R": R})


FIELDS: Dict[str, Callable[..., ScalarField]] = {
    "quadratic": quadratic,
    "pluriharmonic": pluriharmonic,
    "perturbed_quadratic": perturbed_quadratic,
    "pogorelov_u": pogorelov_u,
    "pogorelov_f": pogorelov_f,
    "phi_R": phi_R,
}


def build_field(field_id: str, n: int, **params) -> ScalarField:
    """Corpus field by string id, e.g. build_field("phi_R", 3, R=0.5)."""
    try:
        factory = FIELDS[field_id]
    except KeyError:
        raise ValueError(f"unknown field {field_id!r}; known: {', '.join(sorted(FIELDS))}") from None
    return factory(n, **params)
