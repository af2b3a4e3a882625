"""
Radial densities and radial plurisubharmonic profiles on the unit ball.

A profile stores v on nodes 0 = r_0 < ... < r_M = 1 for rho(z) = v(|z|). Its
complex Hessian has the radial eigenvalue (v'' + v'/r)/4 once and the
tangential eigenvalue v'/(2r) with multiplicity n - 1.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from hlab.models.Errors import NegativeDensity
from hlab.models.Report import dump_csv

GAUSS_NODES = 48


def ma_normalization(n: int) -> float:
    """4^n n!: (dd^c rho)^n = 4^n n! det(D^2 rho) dV."""
    return 4.0 ** n * math.factorial(n)


def reduction_constant(n: int) -> float:
    """K in (r v')^n = K * int_0^r g s^{2n-1} ds."""
    return n / (math.factorial(n) * 2.0 ** (n - 1))


@dataclass(frozen=True)
class RadialDensity:
    """A nonnegative, piecewise continuous g(r) on [0, 1]; `jumps` lists its discontinuities."""
    g: Callable[[np.ndarray], np.ndarray]
    tag: str
    jumps: Tuple[float, ...] = field(default_factory=tuple)

    def __call__(self, r) -> np.ndarray:
        return np.asarray(self.g(np.asarray(r, dtype=float)), dtype=float)

    def scaled(self, t: float) -> "RadialDensity":
        g = self.g
        return RadialDensity(lambda r: t * g(r), f"{t}*{self.tag}", self.jumps)

    def power(self, k: float, factor: float = 1.0) -> "RadialDensity":
        """r -> factor * g(r)^k."""
        g = self.g
        return RadialDensity(lambda r: factor * np.maximum(g(r), 0.0) ** k, f"{factor}*({self.tag})^{k}", self.jumps)

    def breakpoints(self) -> np.ndarray:
        inner = sorted(s for s in self.jumps if 0.0 < s < 1.0)
        return np.array([0.0] + inner + [1.0])

    def check_nonnegative(self, samples: int = 1025):
        r = np.linspace(0.0, 1.0, samples)
        values = self(r)
        if np.any(values < 0.0):
            raise NegativeDensity(f"density {self.tag} is negative at r={r[int(np.argmin(values))]:.6g}")


def constant(c: float) -> RadialDensity:
    return RadialDensity(lambda r: np.full(np.shape(r), float(c)), f"constant:{c}")


def indicator(c: float, s: float) -> RadialDensity:
    """c on r < s, zero beyond."""
    return RadialDensity(lambda r: np.where(r < s, float(c), 0.0), f"indicator:{c}:{s}", (float(s),))


def poly(coeffs: Sequence[float]) -> RadialDensity:
    """sum_i coeffs[i] r^i."""
    coeffs = [float(c) for c in coeffs]
    return RadialDensity(lambda r: np.polynomial.polynomial.polyval(r, coeffs),
                         "poly:" + ",".join(repr(c) for c in coeffs))


def tabulated(radii: np.ndarray, values: np.ndarray, tag: str = "tabulated") -> RadialDensity:
    """Piecewise-linear interpolation through (radii, values)."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    return RadialDensity(lambda r: np.interp(r, radii, values), tag)


def from_tag(tag: str) -> RadialDensity:
    """Parse constant:c, indicator:c:s or poly:a0,a1,... ."""
    kind, _, rest = tag.partition(":")
    try:
        if kind == "constant":
            density = constant(float(rest))
        elif kind == "indicator":
            c, s = rest.split(":")
            density = indicator(float(c), float(s))
        elif kind == "poly":
            density = poly([float(x) for x in rest.split(",")])
        else:
            raise ValueError(f"unknown density kind {kind!r}")
    except ValueError as e:
        raise ValueError(f"bad density tag {tag!r}: {e}") from e
    density.check_nonnegative()
    return density


def node_grid(density: RadialDensity, count: int) -> np.ndarray:
    """About `count` intervals on [0, 1], split so every jump of the density is a node."""
    edges = density.breakpoints()
    lengths = np.diff(edges)
    per_segment = np.maximum(2, np.round(count * lengths).astype(int))
    per_segment += per_segment % 2
    pieces = [np.linspace(a, b, m + 1)[:-1] for a, b, m in zip(edges[:-1], edges[1:], per_segment)]
    return np.concatenate(pieces + [np.array([1.0])])


def scaled_moment(density: RadialDensity, r: np.ndarray, n: int) -> np.ndarray:
    """
    J(r) = r^{-2n} int_0^r g(s) s^{2n-1} ds = int_0^1 g(r t) t^{2n-1} dt, by
    Gauss-Legendre panels split at the density's jumps. J(0) = g(0+)/(2n).
    """
    r = np.asarray(r, dtype=float)
    x, w = leggauss(GAUSS_NODES)
    cuts = [np.zeros_like(r)]
    safe = np.where(r > 0.0, r, 1.0)
    for s in density.breakpoints()[1:-1]:
        cuts.append(np.where(r > s, s / safe, 1.0))
    cuts.append(np.ones_like(r))
    cuts = np.sort(np.stack(cuts, axis=-1), axis=-1)

    total = np.zeros_like(r)
    for lo, hi in zip(np.moveaxis(cuts[..., :-1], -1, 0), np.moveaxis(cuts[..., 1:], -1, 0)):
        half = 0.5 * (hi - lo)
        t = lo[..., None] + half[..., None] * (x + 1.0)
        total += half * np.sum(w * density(r[..., None] * t) * t ** (2 * n - 1), axis=-1)
    return total


@dataclass
class RadialProfile:
    """The solved barrier rho(z) = v(|z|) on B_1 for a radial density."""
    n: int
    density: RadialDensity
    r: np.ndarray
    v: np.ndarray
    vprime: np.ndarray

    @property
    def normalization(self) -> float:
        return ma_normalization(self.n)

    def _root(self, r: np.ndarray) -> np.ndarray:
        """(K J(r))^{1/n}, so v'(r) = r * root."""
        return (reduction_constant(self.n) * scaled_moment(self.density, r, self.n)) ** (1.0 / self.n)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return r * self._root(r)

    def value(self, r) -> np.ndarray:
        """v(r) off the nodes: v at the node below plus a Gauss integral of v'."""
        r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.r, r, side="right") - 1, 0, len(self.r) - 1)
        a = self.r[i]
        x, w = leggauss(16)
        half = 0.5 * (r - a)
        s = a[..., None] + half[..., None] * (x + 1.0)
        return self.v[i] + half * np.sum(w * self.derivative(s), axis=-1)

    def branches(self, r) -> Tuple[np.ndarray, np.ndarray]:
        """(tangential v'/(2r), radial (v'' + v'/r)/4), from the closed forms in J."""
        r = np.asarray(r, dtype=float)
        kj = reduction_constant(self.n) * scaled_moment(self.density, r, self.n)
        root = kj ** (1.0 / self.n)
        tangential = 0.5 * root
        g = self.density(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(kj > 0.0,
                              reduction_constant(self.n) * g * root / np.where(kj > 0.0, kj, 1.0) / (4.0 * self.n),
                              0.0)
        return tangential, radial

    def hessian(self, z: np.ndarray) -> np.ndarray:
        """D^2 rho(z) = t Id + (rad - t) conj(z) z^T / |z|^2."""
        z = np.asarray(z, dtype=np.complex128)
        r = np.linalg.norm(z, axis=-1)
        tangential, radial = self.branches(r)
        safe = np.where(r > 0.0, r, 1.0)
        u = z / safe[..., None]
        proj = np.conj(u)[..., :, None] * u[..., None, :]
        eye = np.eye(self.n, dtype=np.complex128)
        return tangential[..., None, None] * eye + (radial - tangential)[..., None, None] * proj

    def at(self, z: np.ndarray) -> np.ndarray:
        return self.value(np.linalg.norm(np.asarray(z, dtype=np.complex128), axis=-1))

    def sup_deficit(self) -> float:
        """sup(-rho) = -v(0); v' >= 0 puts the minimum at the origin."""
        return float(-self.v[0])

    def to_csv(self) -> str:
        tangential, radial = self.branches(self.r)
        rows = zip(self.r, self.v, self.vprime, tangential, radial)
        return dump_csv(["r", "v", "vprime", "tangential", "radial"], rows)
