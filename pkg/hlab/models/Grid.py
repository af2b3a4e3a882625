import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from hlab.models.Hermitian import check_dimension

logger = logging.getLogger(__name__)

MAX_TENSOR_POINTS = 2_000_000
OPEN_BALL_MARGIN = 1e-12


def ball_volume(n: int, radius: float = 1.0) -> float:
    """Lebesgue measure of a ball of C^n = R^{2n}: pi^n r^{2n} / n!."""
    return math.pi ** n * radius ** (2 * n) / math.factorial(n)


def angular_sample(n: int) -> np.ndarray:
    """
    Unit directions of C^n used for boundary sampling and radial majorants:
    the 2^{2n-1} sign-diagonal directions (one per +-pair) and the 4n signed
    real and imaginary coordinate axes.
    """
    diagonals = []
    for signs in itertools.product((1.0, -1.0), repeat=2 * n - 1):
        x = np.array((1.0,) + signs) / math.sqrt(2 * n)
        diagonals.append(x[:n] + 1j * x[n:])
    eye = np.eye(n, dtype=np.complex128)
    axes = np.concatenate([eye, -eye, 1j * eye, -1j * eye])
    return np.concatenate([np.array(diagonals), axes])


@dataclass(frozen=True)
class GridDomain:
    """
    Quadrature points of a ball B_radius(center) in C^n. Weights are uniform and
    sum to the exact ball volume, so sums against them are Lebesgue integrals.
    """
    n: int
    center: np.ndarray
    radius: float
    points: np.ndarray
    weights: np.ndarray
    spacing: float
    exclusion: float = 0.0
    kind: str = "tensor"

    @classmethod
    def tensor(cls, n: int, center: Optional[Sequence[complex]] = None, radius: float = 1.0,
               per_axis: int = 9) -> "GridDomain":
        """Tensor grid over the 2n real coordinates, cropped to the open ball."""
        check_dimension(n)
        c = _center(n, center)
        if per_axis < 3:
            raise ValueError(f"per_axis must be at least 3, got {per_axis}")
        if per_axis ** (2 * n) > MAX_TENSOR_POINTS:
            raise ValueError(f"{per_axis}^{2 * n} tensor points is too many; use a sampled grid")
        axis = np.linspace(-radius, radius, per_axis)
        mesh = np.stack(np.meshgrid(*([axis] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, 2 * n)
        points = c + mesh[:, :n] + 1j * mesh[:, n:]
        # lattice points on the sphere itself are dropped, rounding included
        points = points[np.sum(np.abs(points - c) ** 2, axis=-1) < radius ** 2 * (1.0 - OPEN_BALL_MARGIN)]
        spacing = 2.0 * radius / (per_axis - 1)
        logger.debug("Built tensor grid: n=%d per_axis=%d points=%d", n, per_axis, len(points))
        return cls._with_volume(n, c, radius, points, spacing, "tensor")

    @classmethod
    def sampled(cls, n: int, center: Optional[Sequence[complex]] = None, radius: float = 1.0,
                count: int = 10_000, seed: int = 0) -> "GridDomain":
        """`count` points uniform in the ball."""
        check_dimension(n)
        c = _center(n, center)
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((count, 2 * n))
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        x *= radius * rng.uniform(size=(count, 1)) ** (1.0 / (2 * n))
        points = c + x[:, :n] + 1j * x[:, n:]
        spacing = (ball_volume(n, radius) / count) ** (1.0 / (2 * n))
        return cls._with_volume(n, c, radius, points, spacing, "sampled")

    @classmethod
    def _with_volume(cls, n, c, radius, points, spacing, kind) -> "GridDomain":
        weights = np.full(len(points), ball_volume(n, radius) / max(len(points), 1))
        return cls(n=n, center=c, radius=float(radius), points=points, weights=weights,
                   spacing=float(spacing), kind=kind)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def volume(self) -> float:
        return ball_volume(self.n, self.radius)

    def excluding(self, distance: Callable[[np.ndarray], np.ndarray], margin: float) -> "GridDomain":
        """Drop points within `margin` of a singular set; weights are spread back over the rest."""
        keep = np.asarray(distance(self.points)) >= margin
        dropped = int(np.sum(~keep))
        if dropped:
            logger.debug("Excluded %d grid points within %.2e of the singular set", dropped, margin)
        points = self.points[keep]
        weights = np.full(len(points), self.volume / max(len(points), 1))
        return replace(self, points=points, weights=weights, exclusion=float(margin))

    def lattice_neighbours(self) -> np.ndarray:
        """
        Indices of the 4n axis neighbours (+h and -h along each real coordinate)
        of every tensor grid point, -1 where the neighbour is not in the grid.
        """
        if self.kind != "tensor":
            raise ValueError(f"lattice neighbours need a tensor grid, got {self.kind}")
        per_axis = int(round(2.0 * self.radius / self.spacing)) + 1
        offset = self.points - self.center
        coords = np.concatenate([offset.real, offset.imag], axis=-1)
        index = np.rint((coords + self.radius) / self.spacing).astype(np.int64)
        lookup = np.full((per_axis,) * (2 * self.n), -1, dtype=np.int64)
        lookup[tuple(index.T)] = np.arange(self.size)
        neighbours = np.full((self.size, 4 * self.n), -1, dtype=np.int64)
        for axis in range(2 * self.n):
            for side, step in enumerate((1, -1)):
                moved = index.copy()
                moved[:, axis] += step
                inside = (moved[:, axis] >= 0) & (moved[:, axis] < per_axis)
                neighbours[inside, 2 * axis + side] = lookup[tuple(moved[inside].T)]
        return neighbours

    def boundary_points(self) -> np.ndarray:
        return self.center + self.radius * angular_sample(self.n)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def lp_norm(self, values: np.ndarray, p: float) -> float:
        return self.integrate(np.abs(values) ** p) ** (1.0 / p)


def _center(n: int, center) -> np.ndarray:
    if center is None:
        return np.zeros(n, dtype=np.complex128)
    c = np.asarray(center, dtype=np.complex128)
    if c.shape != (n,):
        raise ValueError(f"center must have {n} coordinates, got shape {c.shape}")
    return c
