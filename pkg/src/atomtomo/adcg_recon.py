"""Grid-free reconstruction: ADCG with a Lennard-Jones energy term.

The unknown is a list of atom positions.  Each outer step inserts the
coarse-grid node that lowers the objective

    |sum_i psi(x_i) - y|^2 + alpha * V_tot(x)

the most, then polishes every atom in turn with a 2D Nelder-Mead search
while the others stay fixed.  The loop stops as soon as an insertion fails
to lower the objective.  Continuation in ``alpha`` reruns the loop from the
previous result for an increasing schedule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import LJParams, pair_energy, vlj, vtot
from .forward import Sinogram, build_system_matrix, project_config
from .grid_recon import GridSpec
from .sa_recon import Saturated
from .simplex import NelderMeadOptions, nelder_mead

__all__ = [
    "ADCGOptions",
    "ContinuationSchedule",
    "ContinuationResult",
    "DEFAULT_ALPHAS",
    "objective",
    "candidate_search",
    "local_descent",
    "adcg",
    "continuation",
]

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)


@dataclass(frozen=True)
class ADCGOptions:
    coarse_nodes_per_side: int = 33
    fine_nodes_per_side: int = 100
    k_max: int = 200
    r_min: float | None = None
    local_opt: NelderMeadOptions = NelderMeadOptions()
    sweeps: int = 3
    # random perturbation of candidate scores, as a fraction of a typical
    # single-atom |psi|^2; 0 keeps the lowest-index tie rule exact
    tie_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.tie_noise < 0:
            raise ValueError("tie_noise must be non-negative")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.coarse_nodes_per_side < 1 or self.sweeps < 1:
            raise ValueError("coarse grid and sweep count must be positive")
        if 9 * self.coarse_nodes_per_side ** 2 >= self.fine_nodes_per_side ** 2:
            raise ValueError("the coarse grid must have fewer than 1/9 of the fine-grid nodes")

    def min_distance(self, params: LJParams) -> float:
        return 0.7 * params.r_m if self.r_min is None else self.r_min


@dataclass(frozen=True)
class ContinuationSchedule:
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    jump_factor: float = 5.0

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("continuation schedule is empty")
        if alphas[0] != 0.0:
            raise ValueError("continuation schedule must start at alpha = 0")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("continuation schedule must be strictly increasing")
        if self.jump_factor <= 1:
            raise ValueError("jump_factor must exceed 1")


def objective(config, y: Sinogram, params: LJParams, alpha: float) -> float:
    r = project_config(config, y.geometry).values - y.values
    data = float(np.sum(r * r))
    if alpha == 0:
        return data
    return data + alpha * vtot(config, params)


class _Model:
    """Shared state for one (data, parameters, alpha) problem."""

    _coarse_cache: dict = {}

    def __init__(self, y: Sinogram, params: LJParams, alpha: float, opts: ADCGOptions):
        self.y = y
        self.geometry = y.geometry
        self.data = y.values
        self.params = params
        self.alpha = float(alpha)
        self.opts = opts
        self.r_min = opts.min_distance(params)
        g = self.geometry
        th = g.theta
        self._cos = np.cos(th)[:, None]
        self._sin = np.sin(th)[:, None]
        self._shift = (0.5 - 0.5 * (np.cos(th) + np.sin(th)))[:, None]
        self._bins = g.bin_positions()[None, :]
        self._inv_w = 1.0 / g.gaussian_width

    def psi(self, p) -> np.ndarray:
        z0 = p[0] * self._cos + p[1] * self._sin + self._shift
        u = (self._bins - z0) * self._inv_w
        return np.exp(-u * u)

    def coarse(self):
        key = (self.geometry, self.opts.coarse_nodes_per_side)
        if key not in self._coarse_cache:
            grid = GridSpec(self.opts.coarse_nodes_per_side)
            A = build_system_matrix(grid, self.geometry)
            self._coarse_cache[key] = (A.entries, A.nodes, A.column_norms_sq)
        return self._coarse_cache[key]

    def prediction(self, config) -> np.ndarray:
        return project_config(config, self.geometry).values if len(config) else np.zeros_like(self.data)


def candidate_search(config, y: Sinogram, params: LJParams, alpha: float, opts: ADCGOptions = ADCGOptions(),
                     rng=None, _model: _Model | None = None) -> np.ndarray:
    """Coarse-grid node whose insertion gives the lowest objective.

    Nodes within ``r_min`` of an existing atom are excluded; ties go to the
    lowest node index.  Raises :class:`~atomtomo.sa_recon.Saturated` if no
    node is admissible.  With ``opts.tie_noise > 0`` and an ``rng``, the
    scores are jittered before the argmin.
    """
    model = _model or _Model(y, params, alpha, opts)
    config = np.asarray(config, dtype=float).reshape(-1, 2)
    A, nodes, col_sq = model.coarse()
    residual = (model.prediction(config) - model.data).ravel()
    score = 2.0 * (A.T @ residual) + col_sq
    allowed = np.ones(len(nodes), dtype=bool)
    if len(config):
        diff = nodes[:, None, :] - config[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        allowed = dist.min(axis=1) > model.r_min
        if model.alpha != 0 and allowed.any():
            d = dist[allowed]
            score[allowed] += model.alpha * np.sum(vlj(d, params), axis=1)
    if not allowed.any():
        raise Saturated
    if opts.tie_noise > 0 and rng is not None:
        score = score + opts.tie_noise * float(np.median(col_sq)) * rng.random(len(score))
    score[~allowed] = np.inf
    return nodes[int(np.argmin(score))].copy()


def local_descent(config, y: Sinogram, params: LJParams, alpha: float, opts: ADCGOptions = ADCGOptions(),
                  _model: _Model | None = None) -> np.ndarray:
    """Cyclic per-atom Nelder-Mead; no atom move ever raises the objective."""
    model = _model or _Model(y, params, alpha, opts)
    x = np.array(config, dtype=float).reshape(-1, 2)
    n = len(x)
    if n == 0:
        return x
    psis = [model.psi(p) for p in x]
    residual = sum(psis) - model.data
    r_min_sq = model.r_min ** 2
    for _ in range(opts.sweeps):
        largest_move = 0.0
        for i in range(n):
            others = np.delete(x, i, axis=0)
            base = residual - psis[i]

            def f(p, others=others, base=base):
                if not (0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0):
                    return math.inf
                if len(others):
                    dx = others[:, 0] - p[0]
                    dy = others[:, 1] - p[1]
                    if np.min(dx * dx + dy * dy) <= r_min_sq:
                        return math.inf
                r = base + model.psi(p)
                val = float(np.sum(r * r))
                if model.alpha != 0:
                    val += model.alpha * pair_energy(p, others, params)
                return val

            if not np.isfinite(f(x[i])):
                continue
            p_new, _, _ = nelder_mead(f, x[i], opts.local_opt)
            if np.any(p_new != x[i]):
                largest_move = max(largest_move, float(np.max(np.abs(p_new - x[i]))))
                x[i] = p_new
                psis[i] = model.psi(p_new)
                residual = base + psis[i]
        if largest_move < opts.local_opt.x_tolerance:
            break
    return x


@dataclass
class ADCGTrace:
    objectives: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)


def adcg(y: Sinogram, params: LJParams, alpha: float = 0.0, opts: ADCGOptions = ADCGOptions(),
         init=None, trace: ADCGTrace | None = None) -> np.ndarray:
    """Reconstruct atom positions from ``y``; ``init`` warm-starts the support."""
    model = _Model(y, params, alpha, opts)
    rng = np.random.default_rng(opts.seed) if opts.tie_noise > 0 else None
    config = np.zeros((0, 2)) if init is None else np.array(init, dtype=float).reshape(-1, 2)
    if len(config):
        config = local_descent(config, y, params, alpha, opts, _model=model)
    obj = objective(config, y, params, alpha)
    if trace is not None:
        trace.objectives.append(obj)
        trace.counts.append(len(config))
    for _ in range(opts.k_max):
        try:
            x_new = candidate_search(config, y, params, alpha, opts, rng, _model=model)
        except Saturated:
            break
        cand = local_descent(np.vstack([x_new, config]), y, params, alpha, opts, _model=model)
        cand_obj = objective(cand, y, params, alpha)
        if cand_obj > obj:
            break
        config, obj = cand, cand_obj
        if trace is not None:
            trace.objectives.append(obj)
            trace.counts.append(len(config))
    return config


@dataclass
class ContinuationResult:
    alphas: list[float]
    configs: list[np.ndarray]
    discrepancies: list[float]
    energies: list[float]
    counts: list[int]
    selected_index: int

    @property
    def selected_alpha(self) -> float:
        return self.alphas[self.selected_index]

    @property
    def selected(self) -> np.ndarray:
        return self.configs[self.selected_index]

    def to_csv(self) -> str:
        lines = ["alpha,discrepancy,energy,n_atoms,selected"]
        for i, a in enumerate(self.alphas):
            lines.append(
                f"{a:.12g},{self.discrepancies[i]:.12g},{self.energies[i]:.12g},{self.counts[i]},"
                f"{int(i == self.selected_index)}"
            )
        return "\n".join(lines) + "\n"


def select_alpha(discrepancies, counts, jump_factor: float, floor: float) -> int:
    """Index of the last alpha before the misfit jumps or atoms get added.

    A jump means the next misfit exceeds ``jump_factor`` times
    ``max(current misfit, floor)``.  Without any jump the last entry wins.
    """
    for i in range(len(discrepancies) - 1):
        grew = counts[i + 1] > counts[i]
        jumped = discrepancies[i + 1] > jump_factor * max(discrepancies[i], floor)
        if grew or jumped:
            return i
    return len(discrepancies) - 1


def continuation(y: Sinogram, params: LJParams, schedule: ContinuationSchedule = ContinuationSchedule(),
                 opts: ADCGOptions = ADCGOptions(), floor_fraction: float = 1e-3) -> ContinuationResult:
    """Run :func:`adcg` along the alpha schedule, each run warm-started by the last.

    Misfits below ``floor_fraction * |y|^2`` count as noise when looking for
    the discrepancy jump.
    """
    configs, disc, energies, counts = [], [], [], []
    config = None
    for alpha in schedule.alphas:
        config = adcg(y, params, alpha, opts, init=config)
        r = project_config(config, y.geometry).values - y.values
        configs.append(config)
        disc.append(float(np.sum(r * r)))
        energies.append(vtot(config, params))
        counts.append(len(config))
        log.info("alpha=%g atoms=%d discrepancy=%.4g energy=%.4g", alpha, len(config), disc[-1], energies[-1])
    floor = floor_fraction * float(np.sum(y.values ** 2))
    selected = select_alpha(disc, counts, schedule.jump_factor, floor)
    return ContinuationResult(list(schedule.alphas), configs, disc, energies, counts, selected)
