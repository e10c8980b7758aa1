"""Pixel-grid reconstructions: SIRT and non-negative FISTA."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .forward import Sinogram, SystemMatrix

__all__ = [
    "GridSpec",
    "GridImage",
    "sirt",
    "projected_gradient",
    "fista",
    "prox_nonneg_soft",
    "operator_norm_sq",
    "lasso_objective",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """``n x n`` cell-centred grid over the unit square.

    Node ``(row, col)`` sits at ``((col + 0.5)/n, (row + 0.5)/n)`` and has flat
    index ``row*n + col``.
    """

    nodes_per_side: int

    def __post_init__(self):
        if self.nodes_per_side < 1:
            raise ValueError("nodes_per_side must be at least 1")

    @property
    def size(self) -> int:
        return self.nodes_per_side ** 2

    @property
    def spacing(self) -> float:
        return 1.0 / self.nodes_per_side

    def nodes(self) -> np.ndarray:
        n = self.nodes_per_side
        row, col = np.divmod(np.arange(n * n), n)
        return np.column_stack([(col + 0.5) / n, (row + 0.5) / n])

    def node_index(self, point) -> int:
        """Flat index of the node nearest to ``point``."""
        n = self.nodes_per_side
        col = min(max(int(np.floor(point[0] * n)), 0), n - 1)
        row = min(max(int(np.floor(point[1] * n)), 0), n - 1)
        return row * n + col


@dataclass
class GridImage:
    weights: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != self.grid.size:
            raise ValueError("weights do not match the grid size")

    def as_array(self) -> np.ndarray:
        n = self.grid.nodes_per_side
        return self.weights.reshape(n, n)


def _grid_of(matrix: SystemMatrix) -> GridSpec:
    n = matrix.nodes_per_side
    if n is None:
        n = int(round(np.sqrt(matrix.shape[1])))
        if n * n != matrix.shape[1]:
            raise ValueError("system matrix columns do not form a square grid")
    return GridSpec(n)


def _data(matrix: SystemMatrix, y) -> np.ndarray:
    data = y.flat if isinstance(y, Sinogram) else np.asarray(y, dtype=float).ravel()
    if data.size != matrix.shape[0]:
        raise ValueError(f"sinogram has {data.size} entries, system matrix has {matrix.shape[0]} rows")
    return data


def _inverse(sums: np.ndarray, what: str) -> np.ndarray:
    # sums this far below the largest only see Gaussian tails; inverting them
    # overflows or amplifies noise, so they count as dead
    out = np.zeros_like(sums)
    live = sums > 1e-12 * sums.max() if sums.size else sums > 0
    if not live.all():
        log.info("%d %s with zero sum get zero weight", int((~live).sum()), what)
    out[live] = 1.0 / sums[live]
    return out


def sirt(matrix: SystemMatrix, y, iterations: int, callback=None) -> GridImage:
    """Non-negative SIRT starting from zero.

    ``w <- max(0, w - C A^T R (A w - y))`` with ``C`` and ``R`` the inverse
    column and row sums of the system matrix (zero for negligible sums).
    ``callback(k, w, residual)`` is called after every iteration when given.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    A = matrix.entries
    data = _data(matrix, y)
    R = _inverse(A.sum(axis=1), "rays")
    C = _inverse(A.sum(axis=0), "pixels")
    w = np.zeros(A.shape[1])
    for k in range(iterations):
        res = A @ w - data
        w = np.maximum(w - C * (A.T @ (R * res)), 0.0)
        if callback is not None:
            callback(k, w, A @ w - data)
    return GridImage(w, _grid_of(matrix))


def projected_gradient(matrix: SystemMatrix, y, iterations: int, step: float | None = None) -> GridImage:
    """Plain projected gradient for non-negative least squares, fixed step."""
    A = matrix.entries
    data = _data(matrix, y)
    if step is None:
        step = 1.0 / (2.0 * operator_norm_sq(matrix))
    w = np.zeros(A.shape[1])
    for _ in range(iterations):
        w = np.maximum(w - step * 2.0 * (A.T @ (A @ w - data)), 0.0)
    return GridImage(w, _grid_of(matrix))


def prox_nonneg_soft(v, tau: float):
    """Prox of ``tau*|u|_1`` restricted to ``u >= 0``: ``max(v - tau, 0)``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return np.maximum(np.asarray(v, dtype=float) - tau, 0.0)


def operator_norm_sq(matrix: SystemMatrix, iterations: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of ``A^T A`` by power iteration."""
    A = matrix.entries
    x = np.random.default_rng(seed).random(A.shape[1]) + 0.5
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iterations):
        z = A.T @ (A @ x)
        lam = float(np.linalg.norm(z))
        if lam == 0:
            return 0.0
        x = z / lam
    return lam


def lasso_objective(matrix: SystemMatrix, y, w, lam: float) -> float:
    r = matrix.entries @ w - _data(matrix, y)
    return float(r @ r + lam * np.sum(np.abs(w)))


def fista(matrix: SystemMatrix, y, lam: float, iterations: int = 2000) -> GridImage:
    """FISTA for ``min_{w >= 0} |A w - y|^2 + lam*|w|_1``.

    Constant step ``1/L`` with ``L = 2 |A^T A|`` (power-iteration estimate,
    padded by 1% because power iteration approaches the norm from below).
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    A = matrix.entries
    data = _data(matrix, y)
    L = 2.0 * operator_norm_sq(matrix) * 1.01
    if L == 0:
        return GridImage(np.zeros(A.shape[1]), _grid_of(matrix))
    step = 1.0 / L
    w = np.zeros(A.shape[1])
    z = w.copy()
    t = 1.0
    for _ in range(iterations):
        grad = 2.0 * (A.T @ (A @ z - data))
        w_next = prox_nonneg_soft(z - step * grad, lam * step)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_next + ((t - 1.0) / t_next) * (w_next - w)
        w, t = w_next, t_next
    return GridImage(w, _grid_of(matrix))
