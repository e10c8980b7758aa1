"""Lennard-Jones pair energy and minimum-distance constraints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LJParams",
    "ConstraintSpec",
    "LJ_TABLE",
    "vlj",
    "vlj_derivative",
    "vtot",
    "vtot_gradient",
    "pair_energy",
    "pairwise_distances",
    "satisfies_min_distance",
]

# closer than this and the r**-12 term is meaningless in double precision
_SINGULAR = 1e-9


@dataclass(frozen=True)
class LJParams:
    epsilon: float
    sigma: float
    r_cut: float

    def __post_init__(self):
        if self.epsilon <= 0 or self.sigma <= 0 or self.r_cut <= 0:
            raise ValueError("epsilon, sigma and r_cut must all be positive")

    @property
    def r_m(self) -> float:
        """Separation of the potential minimum."""
        return 2.0 ** (1.0 / 6.0) * self.sigma


# Lennard-Jones parameters used to generate each defect type.
LJ_TABLE = {
    "interstitial": LJParams(0.4, 0.15, 0.4),
    "vacancy": LJParams(0.4, 0.14, 0.4),
    "edge": LJParams(0.4, 0.13, 0.17),
}


@dataclass(frozen=True)
class ConstraintSpec:
    r_min: float

    def check(self, params: LJParams) -> None:
        if not 0 < self.r_min < params.r_m:
            raise ValueError(f"r_min must lie in (0, r_m={params.r_m:.6g})")


def vlj(r, params: LJParams):
    """Truncated (unshifted) Lennard-Jones potential at separation ``r``.

    Returns exactly zero for ``r >= r_cut``; there is a jump at the cutoff.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("separation must be positive")
    sr6 = (params.sigma / r) ** 6
    v = np.where(r < params.r_cut, 4.0 * params.epsilon * (sr6 * sr6 - sr6), 0.0)
    return float(v) if v.ndim == 0 else v


def vlj_derivative(r, params: LJParams):
    """dV/dr, zero beyond the cutoff."""
    r = np.asarray(r, dtype=float)
    sr6 = (params.sigma / r) ** 6
    dv = np.where(r < params.r_cut, 4.0 * params.epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r, 0.0)
    return float(dv) if dv.ndim == 0 else dv


def _pairs(config: np.ndarray):
    n = len(config)
    i, j = np.triu_indices(n, k=1)
    # i > j ordering: swap so the first index is the larger one
    return j, i


def pairwise_distances(config) -> np.ndarray:
    """Condensed distances over unordered pairs, in ``np.triu_indices`` order."""
    pts = np.asarray(config, dtype=float).reshape(-1, 2)
    j, i = _pairs(pts)
    return np.hypot(*(pts[i] - pts[j]).T)


def vtot(config, params: LJParams, shifted: bool = False) -> float:
    """Total pair energy over unordered pairs.

    With ``shifted=True`` every interacting pair is offset by ``-vlj(r_cut)``,
    which makes the energy continuous at the cutoff while leaving the forces
    unchanged.
    """
    pts = np.asarray(config, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    d = pairwise_distances(pts)
    if d.min() < _SINGULAR:
        raise ValueError("coincident atoms: Lennard-Jones energy is singular")
    v = vlj(d, params)
    if shifted:
        sr6 = (params.sigma / params.r_cut) ** 6
        v = v - np.where(d < params.r_cut, 4.0 * params.epsilon * (sr6 * sr6 - sr6), 0.0)
    return float(np.sum(v))


def vtot_gradient(config, params: LJParams) -> np.ndarray:
    """Forces (negative gradient of :func:`vtot`), shape ``(n, 2)``."""
    pts = np.asarray(config, dtype=float).reshape(-1, 2)
    forces = np.zeros_like(pts)
    if len(pts) < 2:
        return forces
    j, i = _pairs(pts)
    diff = pts[i] - pts[j]
    d = np.hypot(diff[:, 0], diff[:, 1])
    if d.min() < _SINGULAR:
        raise ValueError("coincident atoms: Lennard-Jones energy is singular")
    f = -(vlj_derivative(d, params) / d)[:, None] * diff
    np.add.at(forces, i, f)
    np.add.at(forces, j, -f)
    return forces


def pair_energy(point, others, params: LJParams) -> float:
    """Interaction energy of one atom at ``point`` with every atom in ``others``."""
    others = np.asarray(others, dtype=float).reshape(-1, 2)
    if len(others) == 0:
        return 0.0
    d = np.hypot(others[:, 0] - point[0], others[:, 1] - point[1])
    if d.min() < _SINGULAR:
        raise ValueError("coincident atoms: Lennard-Jones energy is singular")
    d = d[d < params.r_cut]
    sr6 = (params.sigma / d) ** 6
    return float(4.0 * params.epsilon * np.sum(sr6 * sr6 - sr6))


def satisfies_min_distance(config, spec: ConstraintSpec | float) -> bool:
    r_min = spec.r_min if isinstance(spec, ConstraintSpec) else float(spec)
    pts = np.asarray(config, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return True
    return bool(pairwise_distances(pts).min() > r_min)
