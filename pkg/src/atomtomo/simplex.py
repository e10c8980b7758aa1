"""Nelder-Mead downhill simplex for small unconstrained problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NelderMeadOptions", "nelder_mead"]


@dataclass(frozen=True)
class NelderMeadOptions:
    initial_simplex_scale: float = 0.005
    x_tolerance: float = 1e-6
    f_tolerance: float = 1e-12
    max_evaluations: int = 400

    def __post_init__(self):
        if min(self.initial_simplex_scale, self.x_tolerance, self.f_tolerance) <= 0:
            raise ValueError("simplex scale and tolerances must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")


def nelder_mead(f, x0, opts: NelderMeadOptions = NelderMeadOptions()):
    """Minimise ``f`` from ``x0``; returns ``(x_best, f_best, n_evaluations)``.

    Standard coefficients (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2).  Stops when the simplex diameter drops below
    ``x_tolerance``, the spread of vertex values below ``f_tolerance``, or
    the evaluation budget is spent.  ``f`` may return ``inf`` to mark
    infeasible points; those vertices are never accepted over finite ones.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    simplex = np.vstack([x0, x0 + opts.initial_simplex_scale * np.eye(n)])
    values = np.empty(n + 1)
    values[0] = f0
    for i in range(1, n + 1):
        values[i] = f(simplex[i])
    evals = n + 1

    while evals < opts.max_evaluations:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        if diameter < opts.x_tolerance or values[-1] - values[0] < opts.f_tolerance:
            break

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        evals += 1
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            evals += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        # contraction, outside if the reflection beat the worst vertex
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
        else:
            xc = centroid + 0.5 * (worst - centroid)
        fc = f(xc)
        evals += 1
        if fc < min(fr, values[-1]):
            simplex[-1], values[-1] = xc, fc
            continue
        # shrink toward the best vertex
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            values[i] = f(simplex[i])
        evals += n

    best = int(np.argmin(values))
    if values[best] > f0:
        return x0, f0, evals
    return simplex[best].copy(), float(values[best]), evals
