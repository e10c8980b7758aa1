"""Analytic projection of Gaussian-blurred atoms onto 1D detectors.

Each atom is a delta peak in the unit square.  Its projection at angle
``theta`` is a Gaussian ``exp(-(z - z0)**2 / width**2)`` on the detector,
centred at ``z0 = x1*cos(theta) + x2*sin(theta)``.  Projecting first and
blurring on the detector is equivalent to blurring in 2D and projecting,
and much cheaper.

Configurations are plain ``(n, 2)`` float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DetectorGeometry",
    "Sinogram",
    "SystemMatrix",
    "as_config",
    "project_atom",
    "project_config",
    "atom_profiles",
    "build_system_matrix",
    "add_noise",
]


def as_config(points, check_domain: bool = True) -> np.ndarray:
    """Coerce ``points`` to an ``(n, 2)`` float array of atom positions."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError("atom positions must be finite")
    if check_domain and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("atom positions must lie inside the unit square")
    return arr


@dataclass(frozen=True)
class DetectorGeometry:
    """Parallel-beam detector description.

    Bin ``k`` of the detector at angle ``theta`` sits at
    ``offset + k*pixel_size`` in coordinates measured relative to the
    projection of the domain centre, shifted so that the domain centre maps
    to 0.5.  For 0 and 90 degrees this is the plain detector coordinate.
    """

    angles: tuple[float, ...]
    pixel_size: float = 0.01
    bin_count: int = 0
    gaussian_width: float = 0.01
    offset: float = math.nan

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if not self.angles:
            raise ValueError("at least one projection angle is required")
        if self.pixel_size <= 0 or self.gaussian_width <= 0:
            raise ValueError("pixel_size and gaussian_width must be positive")
        if self.bin_count <= 0:
            object.__setattr__(self, "bin_count", math.ceil(math.sqrt(2.0) / self.pixel_size - 1e-9))
        if math.isnan(self.offset):
            object.__setattr__(self, "offset", 0.5 - self.bin_count * self.pixel_size / 2)
        if self.bin_count * self.pixel_size < math.sqrt(2.0) - 1e-9:
            raise ValueError("detector does not cover the domain diagonal")

    @property
    def n_angles(self) -> int:
        return len(self.angles)

    @property
    def theta(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.angles))

    def bin_positions(self) -> np.ndarray:
        return self.offset + self.pixel_size * np.arange(self.bin_count)

    def detector_coordinates(self, points: np.ndarray) -> np.ndarray:
        """Detector coordinate of every point at every angle, shape ``(n, n_angles)``."""
        th = self.theta
        c, s = np.cos(th), np.sin(th)
        centre = 0.5 * (c + s)
        return points[:, :1] * c + points[:, 1:2] * s - centre + 0.5


@dataclass
class Sinogram:
    values: np.ndarray
    geometry: DetectorGeometry

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.geometry.n_angles, self.geometry.bin_count)
        if self.values.shape != expected:
            raise ValueError(f"sinogram shape {self.values.shape} does not match geometry {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sinogram values must be finite")

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


@dataclass
class SystemMatrix:
    """Dense matrix whose column ``j`` is the projection of an atom at node ``j``."""

    entries: np.ndarray
    nodes: np.ndarray
    geometry: DetectorGeometry
    nodes_per_side: int | None = None
    _col_sq: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, w):
        return self.entries @ w

    @property
    def column_norms_sq(self) -> np.ndarray:
        if self._col_sq is None:
            self._col_sq = np.einsum("ij,ij->j", self.entries, self.entries)
        return self._col_sq


def atom_profiles(points, geometry: DetectorGeometry) -> np.ndarray:
    """Per-atom projections, shape ``(n, n_angles, bin_count)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    z0 = geometry.detector_coordinates(pts)
    r = geometry.bin_positions()
    u = (r[None, None, :] - z0[:, :, None]) / geometry.gaussian_width
    return np.exp(-u * u)


def project_atom(x, geometry: DetectorGeometry, angle_index: int) -> np.ndarray:
    """Detector profile of one atom at one angle."""
    if not -geometry.n_angles <= angle_index < geometry.n_angles:
        raise IndexError(f"angle index {angle_index} out of range")
    pt = as_config(x)
    return atom_profiles(pt, geometry)[0, angle_index]


def project_config(config, geometry: DetectorGeometry) -> Sinogram:
    pts = as_config(config)
    if len(pts) == 0:
        return Sinogram(np.zeros((geometry.n_angles, geometry.bin_count)), geometry)
    return Sinogram(atom_profiles(pts, geometry).sum(axis=0), geometry)


def build_system_matrix(grid, geometry: DetectorGeometry) -> SystemMatrix:
    """Assemble the projection matrix for the nodes of ``grid``.

    ``grid`` is a :class:`~atomtomo.grid_recon.GridSpec` or an ``(n, 2)``
    array of node coordinates.
    """
    nodes_per_side = getattr(grid, "nodes_per_side", None)
    nodes = grid.nodes() if hasattr(grid, "nodes") else as_config(grid)
    if len(nodes) == 0:
        raise ValueError("cannot build a system matrix for an empty grid")
    cols = []
    # chunked to keep the temporary (chunk, angles, bins) block small
    for start in range(0, len(nodes), 2048):
        block = atom_profiles(nodes[start:start + 2048], geometry)
        cols.append(block.reshape(len(block), -1))
    entries = np.ascontiguousarray(np.concatenate(cols, axis=0).T)
    return SystemMatrix(entries, nodes, geometry, nodes_per_side)


def add_noise(sinogram: Sinogram, noise_level: float, seed: int) -> Sinogram:
    if noise_level < 0:
        raise ValueError("noise_level must be non-negative")
    if noise_level == 0:
        return Sinogram(sinogram.values.copy(), sinogram.geometry)
    rng = np.random.default_rng(seed)
    noisy = sinogram.values + rng.normal(0.0, noise_level, size=sinogram.values.shape)
    return Sinogram(noisy, sinogram.geometry)
