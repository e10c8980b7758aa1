"""Discrete simulated annealing over binary occupancies of a pixel grid.

Each temperature level makes two Metropolis decisions at the same inverse
temperature ``beta``: add one atom at the best-correlated free node, then
move one random atom to a random 4-neighbour.  Nodes closer than ``r_min``
to an occupied node are never occupied.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .forward import Sinogram, SystemMatrix
from .grid_recon import GridSpec

__all__ = [
    "SAOptions",
    "BinaryGridState",
    "SAResult",
    "Saturated",
    "anneal",
    "propose_site",
    "metropolis_accept",
    "random_move",
]

log = logging.getLogger(__name__)

# (row, col) offsets of the 4-neighbourhood
_MOVES = ((0, 1), (0, -1), (1, 0), (-1, 0))


class Saturated(Exception):
    """No grid node is compatible with the minimum-distance constraint."""


@dataclass(frozen=True)
class SAOptions:
    beta_initial: float = 1.0
    beta_max: float = 1e6
    beta_growth: float = 1.02
    r_min: float = 0.1
    max_outer_iterations: int = 100_000
    moves_per_level: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.beta_initial < self.beta_max:
            raise ValueError("need 0 < beta_initial < beta_max")
        if self.beta_growth <= 1:
            raise ValueError("beta_growth must exceed 1")
        if self.moves_per_level < 1:
            raise ValueError("moves_per_level must be >= 1")


class BinaryGridState:
    """Set of occupied nodes plus bookkeeping for the exclusion zone.

    ``blocked[j]`` counts occupied nodes within ``r_min`` of node ``j``
    (including ``j`` itself when occupied).
    """

    def __init__(self, grid: GridSpec, r_min: float, occupied=()):
        self.grid = grid
        self.r_min = float(r_min)
        n = grid.nodes_per_side
        reach = int(math.floor(r_min * n))
        dr, dc = np.mgrid[-reach:reach + 1, -reach:reach + 1]
        close = np.hypot(dr, dc) / n <= r_min
        self._offsets = np.column_stack([dr[close], dc[close]])
        self.blocked = np.zeros(grid.size, dtype=np.int32)
        self.occupied: list[int] = []
        for j in occupied:
            self.add(int(j))

    def copy(self) -> "BinaryGridState":
        new = BinaryGridState.__new__(BinaryGridState)
        new.grid, new.r_min, new._offsets = self.grid, self.r_min, self._offsets
        new.blocked = self.blocked.copy()
        new.occupied = list(self.occupied)
        return new

    def _zone(self, j: int) -> np.ndarray:
        n = self.grid.nodes_per_side
        r, c = divmod(j, n)
        rr = r + self._offsets[:, 0]
        cc = c + self._offsets[:, 1]
        ok = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n)
        return rr[ok] * n + cc[ok]

    def add(self, j: int) -> None:
        if self.blocked[j]:
            raise ValueError(f"node {j} violates the minimum distance")
        self.occupied.append(j)
        self.blocked[self._zone(j)] += 1

    def remove(self, j: int) -> None:
        self.occupied.remove(j)
        self.blocked[self._zone(j)] -= 1

    def allowed_mask(self) -> np.ndarray:
        return self.blocked == 0

    def positions(self) -> np.ndarray:
        return self.grid.nodes()[sorted(self.occupied)] if self.occupied else np.zeros((0, 2))

    def __len__(self):
        return len(self.occupied)


def propose_site(state: BinaryGridState, residual, matrix: SystemMatrix) -> int:
    """Free node whose column best correlates with ``y - A w``.

    ``residual`` is ``A w - y``.  Ties go to the lowest node index.  Raises
    :class:`Saturated` when every node is excluded.
    """
    allowed = state.allowed_mask()
    if not allowed.any():
        raise Saturated
    corr = -(matrix.entries.T @ residual)
    corr[~allowed] = -np.inf
    return int(np.argmax(corr))


def metropolis_accept(delta: float, beta: float, rng) -> bool:
    """Accept an increase ``delta`` in misfit with probability ``exp(-beta*delta)``."""
    if delta <= 0:
        return True
    return bool(rng.random() < math.exp(-beta * delta))


def random_move(state: BinaryGridState, rng) -> tuple[int, int] | None:
    """Propose moving a random atom to a random 4-neighbour.

    Returns ``(old_node, new_node)``, or ``None`` when the proposal leaves
    the grid or violates the minimum distance (the state is unchanged).
    Randomness is always drawn twice so the stream does not depend on the
    outcome.
    """
    if not state.occupied:
        raise ValueError("cannot move an atom in an empty state")
    k = int(rng.integers(len(state.occupied)))
    dr, dc = _MOVES[int(rng.integers(4))]
    old = state.occupied[k]
    n = state.grid.nodes_per_side
    r, c = divmod(old, n)
    r2, c2 = r + dr, c + dc
    if not (0 <= r2 < n and 0 <= c2 < n):
        return None
    new = r2 * n + c2
    # the moving atom blocks its own neighbourhood; discount it
    state.blocked[state._zone(old)] -= 1
    ok = state.blocked[new] == 0
    state.blocked[state._zone(old)] += 1
    return (old, new) if ok else None


@dataclass
class SAResult:
    state: BinaryGridState
    discrepancy: float
    log: list[tuple] = field(default_factory=list, repr=False)

    def positions(self) -> np.ndarray:
        return self.state.positions()


def anneal(matrix: SystemMatrix, y, opts: SAOptions = SAOptions(), grid: GridSpec | None = None) -> SAResult:
    """Run the annealing schedule and return the lowest-misfit state seen.

    Every accepted add or move is a candidate for the best state, not only
    the state at the end of a temperature level.

    The run log holds ``(iter, beta, discrepancy, accepted_add, accepted_move)``
    per temperature level.
    """
    A = matrix.entries
    data = y.flat if isinstance(y, Sinogram) else np.asarray(y, dtype=float).ravel()
    if data.size != A.shape[0]:
        raise ValueError("sinogram does not match the system matrix")
    if grid is None:
        grid = GridSpec(matrix.nodes_per_side or int(round(math.sqrt(A.shape[1]))))
    col_sq = matrix.column_norms_sq
    rng = np.random.default_rng(opts.seed)

    state = BinaryGridState(grid, opts.r_min)
    residual = -data.copy()
    misfit = float(residual @ residual)
    best_state, best_misfit = state.copy(), misfit
    run_log = []
    beta = opts.beta_initial
    it = 0
    while beta < opts.beta_max and it < opts.max_outer_iterations:
        it += 1
        added = False
        try:
            j = propose_site(state, residual, matrix)
        except Saturated:
            j = None
        if j is not None:
            delta = 2.0 * float(A[:, j] @ residual) + col_sq[j]
            if metropolis_accept(delta, beta, rng):
                state.add(j)
                residual += A[:, j]
                misfit += delta
                added = True
                if misfit < best_misfit:
                    best_state, best_misfit = state.copy(), misfit
        moved = False
        for _ in range(opts.moves_per_level):
            if not state.occupied:
                break
            prop = random_move(state, rng)
            if prop is None:
                continue
            old, new = prop
            step = A[:, new] - A[:, old]
            delta = 2.0 * float(step @ residual) + float(step @ step)
            if metropolis_accept(delta, beta, rng):
                state.remove(old)
                state.add(new)
                residual += step
                misfit += delta
                moved = True
                if misfit < best_misfit:
                    best_state, best_misfit = state.copy(), misfit
        if it % 256 == 0:
            # re-sync the running misfit against accumulated rounding
            misfit = float(residual @ residual)
        run_log.append((it, beta, misfit, added, moved))
        beta *= opts.beta_growth
    return SAResult(best_state, best_misfit, run_log)
