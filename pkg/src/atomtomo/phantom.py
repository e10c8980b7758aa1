"""Ground-truth crystal phantoms: square lattices, point/line defects, FIRE relaxation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .energy import LJParams, vtot, vtot_gradient

__all__ = [
    "LatticeSpec",
    "DefectKind",
    "FireOptions",
    "FireResult",
    "fit_lattice",
    "make_lattice",
    "apply_defect",
    "fire_relax",
    "make_phantom",
    "DEFAULT_LATTICES",
]

log = logging.getLogger(__name__)

MARGIN_LO, MARGIN_HI = 0.1, 0.9


@dataclass(frozen=True)
class LatticeSpec:
    """A ``rows x cols`` square lattice; column index runs along x1."""

    rows: int
    cols: int
    spacing: float
    origin: tuple[float, float]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("lattice needs at least one row and one column")
        if self.spacing <= 0:
            raise ValueError("lattice spacing must be positive")
        x0, y0 = self.origin
        x1 = x0 + (self.cols - 1) * self.spacing
        y1 = y0 + (self.rows - 1) * self.spacing
        tol = 1e-12
        if min(x0, y0) < MARGIN_LO - tol or max(x1, y1) > MARGIN_HI + tol:
            raise ValueError(
                f"lattice [{x0:.4f}, {x1:.4f}] x [{y0:.4f}, {y1:.4f}] exceeds the margin box "
                f"[{MARGIN_LO}, {MARGIN_HI}]^2"
            )


def fit_lattice(rows: int, cols: int, params: LJParams) -> LatticeSpec:
    """Lattice with spacing r_m, shrunk uniformly if needed, centred in the unit square."""
    span = MARGIN_HI - MARGIN_LO
    longest = max(rows, cols) - 1
    spacing = params.r_m if longest == 0 else min(params.r_m, span / longest)
    origin = (0.5 - 0.5 * (cols - 1) * spacing, 0.5 - 0.5 * (rows - 1) * spacing)
    return LatticeSpec(rows, cols, spacing, origin)


def make_lattice(spec: LatticeSpec) -> np.ndarray:
    """Atoms at ``origin + (col*spacing, row*spacing)``, row-major."""
    row, col = np.divmod(np.arange(spec.rows * spec.cols), spec.cols)
    return np.column_stack([spec.origin[0] + col * spec.spacing, spec.origin[1] + row * spec.spacing])


@dataclass(frozen=True)
class DefectKind:
    """Defect to insert into a lattice built by :func:`make_lattice`.

    ``site`` is a ``(row, col)`` pair.  For an interstitial it names the
    plaquette whose lower-left corner is that lattice site; for a vacancy the
    removed atom.  Edge dislocations ignore it.  ``None`` picks the most
    central choice.
    """

    kind: str
    site: tuple[int, int] | None = None

    KINDS = ("interstitial", "vacancy", "edge")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown defect kind {self.kind!r}; expected one of {self.KINDS}")


def apply_defect(config: np.ndarray, kind: DefectKind, lattice: LatticeSpec) -> np.ndarray:
    """Insert a defect into the lattice configuration ``config``.

    The edge dislocation removes a half-line of atoms running from the lower
    boundary to the middle of the lattice and spreads the remaining atoms of
    each cut row evenly over the original row width, so the upper rows keep
    ``cols`` atoms and the lower ``rows // 2`` rows have ``cols - 1``.
    """
    pts = np.array(config, dtype=float).reshape(-1, 2)
    rows, cols, a = lattice.rows, lattice.cols, lattice.spacing
    if len(pts) != rows * cols:
        raise ValueError("config does not match the lattice size")
    grid = pts.reshape(rows, cols, 2)

    if kind.kind == "interstitial":
        r, c = kind.site if kind.site is not None else ((rows - 2) // 2, (cols - 2) // 2)
        if not (0 <= r < rows - 1 and 0 <= c < cols - 1):
            raise ValueError(f"plaquette {(r, c)} outside a {rows}x{cols} lattice")
        centre = grid[r, c] + 0.5 * a
        return np.vstack([pts, centre])

    if kind.kind == "vacancy":
        r, c = kind.site if kind.site is not None else (rows // 2, cols // 2)
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"site {(r, c)} outside a {rows}x{cols} lattice")
        return np.delete(pts, r * cols + c, axis=0)

    if rows < 2 or cols < 3:
        raise ValueError(f"a {rows}x{cols} lattice is too small for an edge dislocation")
    cut = rows // 2
    out = []
    x_lo, x_hi = grid[0, 0, 0], grid[0, -1, 0]
    for r in range(rows):
        if r < cut:
            xs = np.linspace(x_lo, x_hi, cols - 1)
            out.append(np.column_stack([xs, np.full(cols - 1, grid[r, 0, 1])]))
        else:
            out.append(grid[r])
    return np.vstack(out)


@dataclass(frozen=True)
class FireOptions:
    dt_initial: float = 0.002
    dt_max: float = 0.01
    alpha_start: float = 0.1
    f_alpha: float = 0.99
    f_inc: float = 1.1
    f_dec: float = 0.5
    n_min: int = 5
    force_tolerance: float = 1e-6
    max_steps: int = 100_000

    def __post_init__(self):
        if not 0 < self.f_dec < 1 < self.f_inc:
            raise ValueError("need 0 < f_dec < 1 < f_inc")
        if not 0 < self.alpha_start < 1:
            raise ValueError("need 0 < alpha_start < 1")
        if self.dt_initial <= 0 or self.dt_max <= 0:
            raise ValueError("time steps must be positive")


@dataclass
class FireResult:
    positions: np.ndarray
    energy: float
    max_force: float
    steps: int
    converged: bool
    energies: list[float] = field(default_factory=list, repr=False)


def _max_force(forces: np.ndarray) -> float:
    return float(np.max(np.hypot(forces[:, 0], forces[:, 1]))) if len(forces) else 0.0


def fire_relax(config, params: LJParams, opts: FireOptions = FireOptions(), full_output: bool = False,
               fixed=None):
    """Relax ``config`` to a local minimum of the total Lennard-Jones energy.

    FIRE with unit masses and velocity-Verlet steps.  An MD step that would
    raise the energy is rejected: velocities are zeroed and the time step is
    cut, so accepted iterates never go uphill.  The uphill test uses the
    cutoff-shifted energy, the one the forces actually derive from; the
    unshifted total can still rise by the cutoff jump when a pair separates
    past ``r_cut``.

    ``fixed`` is an optional boolean mask of atoms held in place; their
    forces are ignored.
    """
    x = np.array(config, dtype=float).reshape(-1, 2)
    mobile = np.ones(len(x), dtype=bool) if fixed is None else ~np.asarray(fixed, dtype=bool)
    if mobile.shape != (len(x),):
        raise ValueError("fixed mask does not match the configuration")
    mobile = mobile[:, None]
    energy = vtot(x, params, shifted=True)
    forces = vtot_gradient(x, params) * mobile
    energies = [energy]
    e0 = abs(energy) + 1.0
    v = np.zeros_like(x)
    dt, alpha, n_pos = opts.dt_initial, opts.alpha_start, 0
    step = 0
    fmax = _max_force(forces)
    while fmax > opts.force_tolerance and step < opts.max_steps:
        step += 1
        power = float(np.sum(forces * v))
        if power > 0 or not v.any():
            if power > 0:
                v = (1 - alpha) * v + alpha * np.linalg.norm(v) * forces / np.linalg.norm(forces)
            if n_pos > opts.n_min:
                dt = min(dt * opts.f_inc, opts.dt_max)
                alpha *= opts.f_alpha
            n_pos += 1
        else:
            v[:] = 0.0
            dt *= opts.f_dec
            alpha = opts.alpha_start
            n_pos = 0

        v_half = v + 0.5 * dt * forces
        x_new = x + dt * v_half
        f_new = vtot_gradient(x_new, params) * mobile
        e_new = vtot(x_new, params, shifted=True)
        if not np.isfinite(e_new) or e_new > 10 * e0:
            raise RuntimeError(f"FIRE diverged at step {step} (energy {e_new:.3g})")
        if e_new > energy + 1e-13 * e0:
            v[:] = 0.0
            dt *= opts.f_dec
            alpha = opts.alpha_start
            n_pos = 0
            if dt < 1e-14:
                break
            continue
        v = v_half + 0.5 * dt * f_new
        x, forces, energy = x_new, f_new, e_new
        energies.append(energy)
        fmax = _max_force(forces)

    converged = fmax <= opts.force_tolerance
    if not converged:
        log.warning("FIRE stopped after %d steps with max force %.3g", step, fmax)
    if full_output:
        return FireResult(x, vtot(x, params), fmax, step, converged, energies)
    return x


# Lattice sizes giving 37 / 48 / 39 atoms after the defect is inserted.
DEFAULT_LATTICES = {
    "interstitial": (6, 6),
    "vacancy": (7, 7),
    "edge": (6, 7),
}


def boundary_mask(config) -> np.ndarray:
    """Atoms lying on the edges of the configuration's bounding box."""
    x = np.asarray(config, dtype=float).reshape(-1, 2)
    lo, hi = x.min(axis=0), x.max(axis=0)
    tol = 1e-9 * max(1.0, float(np.max(hi - lo)))
    return np.any((x - lo <= tol) | (hi - x <= tol), axis=1)


def make_phantom(defect: str, params: LJParams | None = None, rows: int | None = None,
                 cols: int | None = None, site=None, fire: FireOptions = FireOptions(),
                 clamp_boundary: bool = True) -> np.ndarray:
    """Lattice + defect + relaxation, the full ground-truth pipeline.

    With ``clamp_boundary`` the outer ring of the seed stays put during
    relaxation, standing in for the surrounding crystal.  A free finite
    square patch is not a Lennard-Jones minimum and reorganises globally.
    """
    from .energy import LJ_TABLE

    params = params or LJ_TABLE[defect]
    d_rows, d_cols = DEFAULT_LATTICES[defect]
    spec = fit_lattice(rows or d_rows, cols or d_cols, params)
    seed = apply_defect(make_lattice(spec), DefectKind(defect, site), spec)
    fixed = boundary_mask(seed) if clamp_boundary else None
    relaxed = fire_relax(seed, params, fire, fixed=fixed)
    # rigid shift, energy-neutral: centre the bounding box
    relaxed = relaxed + (0.5 - 0.5 * (relaxed.min(axis=0) + relaxed.max(axis=0)))
    if relaxed.min() < 0.0 or relaxed.max() > 1.0:
        raise ValueError("relaxed phantom left the unit square")
    return relaxed
