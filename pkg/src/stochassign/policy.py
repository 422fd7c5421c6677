"""Linear eligibility rules as unit vectors, plus sphere geometry helpers.

A rule is a point on the unit sphere S^{m-1}: an individual with augmented
covariates x (intercept first, remaining entries in the unit box) is treated
iff x'beta >= 0.  Ties count as treated.  The module also provides the
spherical-coordinate convention used in reports and heatmaps, quasi-uniform
sphere grids for exhaustive search, and great-circle distances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

__all__ = [
    "normalize_direction",
    "les_assign",
    "to_spherical",
    "from_spherical",
    "great_circle_distance",
    "SphereGrid",
    "build_grid",
    "write_grid_csv",
]

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def normalize_direction(v) -> np.ndarray:
    """Project a nonzero vector onto the unit sphere."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot normalise a zero or non-finite vector")
    return v / norm


def les_assign(beta, x_aug) -> np.ndarray:
    """Treatment indicator 1{x'beta >= 0} for one or many covariate rows.

    Invariant under positive rescaling of beta; a zero score is treated.
    """
    beta = np.asarray(beta, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x_aug, dtype=np.float64))
    if x.shape[1] != beta.shape[0]:
        raise ValueError(f"dimension mismatch: rule has {beta.shape[0]} coordinates, rows have {x.shape[1]}")
    out = (x @ beta >= 0.0).astype(np.int8)
    if np.asarray(x_aug).ndim == 1:
        return out[0]
    return out


def to_spherical(beta) -> tuple[float, float]:
    """(azimuth, inclination) in degrees for a unit vector on S^2.

    Convention: beta = (cos(theta) sin(phi), sin(theta) sin(phi), cos(phi))
    with azimuth theta in [-180, 180) and inclination phi in [0, 180].
    At the poles the azimuth is reported as 0.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape[0] != 3:
        raise ValueError("spherical coordinates are defined for 3-dimensional rules only")
    phi = math.degrees(math.acos(min(1.0, max(-1.0, float(beta[2])))))
    if abs(beta[0]) < 1e-300 and abs(beta[1]) < 1e-300:
        return 0.0, phi
    theta = math.degrees(math.atan2(float(beta[1]), float(beta[0])))
    if theta >= 180.0:
        theta -= 360.0
    return theta, phi


def from_spherical(theta_deg: float, phi_deg: float) -> np.ndarray:
    """Inverse of to_spherical."""
    theta = math.radians(theta_deg)
    phi = math.radians(phi_deg)
    return np.array(
        [math.cos(theta) * math.sin(phi), math.sin(theta) * math.sin(phi), math.cos(phi)]
    )


def great_circle_distance(a, b) -> float:
    """Angle in [0, pi] between two unit vectors; dot product clamped."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("rules live on spheres of different dimension")
    return math.acos(min(1.0, max(-1.0, float(a @ b))))


def _max_nearest_neighbour_spacing(points: np.ndarray) -> float:
    """Largest great-circle distance from any point to its nearest neighbour."""
    dots = np.clip(points @ points.T, -1.0, 1.0)
    np.fill_diagonal(dots, -1.0)
    return float(np.arccos(dots.max(axis=1)).max())


@dataclass(frozen=True)
class SphereGrid:
    """Quasi-uniform set of unit vectors used for exhaustive rule search."""

    points: np.ndarray
    nominal_spacing: float
    realized_spacing: float = field(default=math.nan)

    def __post_init__(self):
        norms = np.linalg.norm(self.points, axis=1)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("grid points must be unit vectors")
        if self.dimension == 3 and math.isfinite(self.realized_spacing):
            if self.realized_spacing > self.nominal_spacing + 1e-12:
                raise ValueError(
                    f"realised spacing {self.realized_spacing:.4g} exceeds the "
                    f"nominal target {self.nominal_spacing:.4g}"
                )

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def density(self) -> float:
        """Surface area of S^2 per grid point (meaningful for m = 3)."""
        return 4.0 * math.pi / self.count


def _fibonacci_lattice(count: int) -> np.ndarray:
    """Fibonacci spiral lattice on S^2; endpoints sit at the poles."""
    if count == 2:
        return np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    z = np.linspace(1.0, -1.0, count)
    azimuth = _GOLDEN_ANGLE * np.arange(count)
    radial = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([radial * np.cos(azimuth), radial * np.sin(azimuth), z])


def _low_discrepancy_directions(m: int, count: int) -> np.ndarray:
    """Quasi-random directions: Sobol points through the Gaussian inverse CDF."""
    sampler = qmc.Sobol(d=m, scramble=False)
    n_pow2 = 1 << max(4, int(count + 8).bit_length())
    u = sampler.random_base2(int(math.log2(n_pow2)))[1:]  # drop the all-zero first point
    gauss = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(gauss, axis=1)
    gauss = gauss[norms > 1e-12][:count]  # the centre point maps to the origin
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def build_grid(m: int, count: int, nominal_spacing: float | None = None) -> SphereGrid:
    """Quasi-uniform grid of `count` directions on S^{m-1}.

    m = 3 uses a Fibonacci spiral lattice (reproducible, near-optimal
    nearest-neighbour spacing); higher dimensions fall back to normalised
    low-discrepancy Gaussian directions.
    """
    if count < 2:
        raise ValueError("a grid needs at least two points")
    if m < 2:
        raise ValueError("sphere dimension must be >= 2")
    if m == 3:
        points = _fibonacci_lattice(count)
        realized = _max_nearest_neighbour_spacing(points)
        if nominal_spacing is None:
            nominal_spacing = realized
        return SphereGrid(points=points, nominal_spacing=nominal_spacing, realized_spacing=realized)
    points = _low_discrepancy_directions(m, count)
    if nominal_spacing is None:
        nominal_spacing = math.pi
    return SphereGrid(points=points, nominal_spacing=nominal_spacing)


def write_grid_csv(grid: SphereGrid, path) -> None:
    """Export a grid as CSV: azimuth, inclination (m = 3 only) and components."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["theta_deg", "phi_deg"] if grid.dimension == 3 else []
        header += [f"beta{i}" for i in range(grid.dimension)]
        writer.writerow(header)
        for row in grid.points:
            cells = []
            if grid.dimension == 3:
                theta, phi = to_spherical(row)
                cells += [f"{theta:.17g}", f"{phi:.17g}"]
            cells += [f"{v:.17g}" for v in row]
            writer.writerow(cells)
