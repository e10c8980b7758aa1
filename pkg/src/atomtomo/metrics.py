"""Reconstruction quality: optimal atom matching, peak picking, data misfit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .forward import Sinogram, project_config
from .grid_recon import GridImage

__all__ = ["MatchReport", "PeakDetectOptions", "match_atoms", "detect_peaks", "data_discrepancy"]


@dataclass
class MatchReport:
    pairing: list[tuple[int, int]]
    distances: np.ndarray
    count_reconstructed: int
    count_truth: int
    unmatched_reconstructed: list[int] = field(default_factory=list)
    unmatched_truth: list[int] = field(default_factory=list)

    @property
    def counts_match(self) -> bool:
        return self.count_reconstructed == self.count_truth

    @property
    def total_distance(self) -> float:
        return float(np.sum(self.distances))

    @property
    def mean_distance(self) -> float:
        """Mean paired distance; NaN when the atom counts differ."""
        if not self.counts_match:
            return math.nan
        if self.count_truth == 0:
            return 0.0
        return float(np.mean(self.distances))

    def to_text(self) -> str:
        mean = "undefined" if math.isnan(self.mean_distance) else f"{self.mean_distance:.12g}"
        lines = [
            f"count_reconstructed: {self.count_reconstructed}",
            f"count_truth: {self.count_truth}",
            f"mean_distance: {mean}",
            "# ri,ti,distance",
        ]
        lines += [f"{ri},{ti},{d:.12g}" for (ri, ti), d in zip(self.pairing, self.distances)]
        return "\n".join(lines) + "\n"


def match_atoms(recon, truth) -> MatchReport:
    """Minimum-total-distance one-to-one pairing of reconstructed and true atoms."""
    rec = np.asarray(recon, dtype=float).reshape(-1, 2)
    tru = np.asarray(truth, dtype=float).reshape(-1, 2)
    if len(rec) == 0 or len(tru) == 0:
        return MatchReport([], np.zeros(0), len(rec), len(tru), list(range(len(rec))), list(range(len(tru))))
    cost = cdist(rec, tru)
    ri, ti = linear_sum_assignment(cost)
    pairing = [(int(a), int(b)) for a, b in zip(ri, ti)]
    return MatchReport(
        pairing,
        cost[ri, ti],
        len(rec),
        len(tru),
        sorted(set(range(len(rec))) - set(ri.tolist())),
        sorted(set(range(len(tru))) - set(ti.tolist())),
    )


@dataclass(frozen=True)
class PeakDetectOptions:
    threshold: float = 0.2
    min_separation: float = 0.08

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.min_separation <= 0:
            raise ValueError("min_separation must be positive")


def detect_peaks(image: GridImage, opts: PeakDetectOptions = PeakDetectOptions()) -> np.ndarray:
    """Atom positions from a pixel image by thresholded non-maximum suppression.

    Candidates are pixels that are >= all 8 neighbours and exceed
    ``threshold * max``.  They are accepted strongest first (ties by node
    index); a candidate within ``min_separation`` of an accepted peak is
    dropped.
    """
    img = image.as_array()
    if img.size == 0:
        raise ValueError("empty image")
    top = img.max()
    if top <= 0:
        return np.zeros((0, 2))
    padded = np.pad(img, 1, constant_values=-np.inf)
    n = img.shape[0]
    is_max = np.ones_like(img, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                is_max &= img >= padded[1 + dr:1 + dr + n, 1 + dc:1 + dc + n]
    is_max &= img > opts.threshold * top
    idx = np.flatnonzero(is_max.ravel())
    # strongest first; stable sort keeps lower node index first among ties
    idx = idx[np.argsort(-img.ravel()[idx], kind="stable")]
    nodes = image.grid.nodes()
    accepted: list[int] = []
    for j in idx:
        if accepted:
            d = np.hypot(*(nodes[accepted] - nodes[j]).T)
            if d.min() < opts.min_separation:
                continue
        accepted.append(int(j))
    return nodes[accepted]


def data_discrepancy(config, y: Sinogram) -> float:
    """Squared l2 misfit between the projection of ``config`` and ``y``."""
    pred = project_config(config, y.geometry)
    r = pred.values - y.values
    return float(np.sum(r * r))
