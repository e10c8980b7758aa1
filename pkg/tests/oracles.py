"""Independent reference computations used by the tests."""

import itertools

import numpy as np

from atomtomo.forward import project_config

RASTER = 2000


def raster_projection(point, angle_deg, bins, width, raster=RASTER):
    """Rasterize a 2D Gaussian blob and line-sum it onto the detector.

    The blob ``exp(-|p-x|^2/w^2) / (sqrt(pi) w)`` has unit line integrals,
    so its projection is a unit-peak Gaussian.  The raster (``raster`` cells
    per unit length, sampled at cell vertices) is laid out along the
    detector axis ``u`` and the beam axis ``v``; the line sum is the plain
    sum over ``v`` times the cell size.  The detector axis is measured from
    the projection of the domain centre, shifted to 0.5.
    """
    h = 1.0 / raster
    th = np.deg2rad(angle_deg)
    e_u = np.array([np.cos(th), np.sin(th)])
    e_v = np.array([-np.sin(th), np.cos(th)])
    rel = np.asarray(point, dtype=float) - 0.5
    u0 = rel @ e_u + 0.5
    v0 = rel @ e_v
    # vertices along u coincide with bin centres when bins sit on multiples of h
    us = np.arange(int(np.floor((bins.min() - 0.01) / h)), int(np.ceil((bins.max() + 0.01) / h)) + 1) * h
    vs = np.arange(-raster, raster + 1) * h
    vs = vs[np.abs(vs - v0) < 8 * width]
    U, V = np.meshgrid(us, vs)
    blob = np.exp(-((U - u0) ** 2 + (V - v0) ** 2) / width ** 2) / (np.sqrt(np.pi) * width)
    profile = blob.sum(axis=0) * h
    return np.interp(bins, us, profile, left=0.0, right=0.0)


def brute_force_matching(a, b):
    """Minimum total distance over all injections of the smaller set."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if len(a) > len(b):
        return brute_force_matching(b, a)
    best = np.inf
    for perm in itertools.permutations(range(len(b)), len(a)):
        total = sum(np.hypot(*(a[i] - b[j])) for i, j in enumerate(perm))
        best = min(best, total)
    return best


def lj_direct(r, eps, sigma, r_cut):
    if r >= r_cut:
        return 0.0
    return 4 * eps * ((sigma / r) ** 12 - (sigma / r) ** 6)


def central_difference(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def zero_misfit_subsets(truth, y, max_size):
    """All subsets of the row/column crossings of ``truth`` that fit ``y`` exactly.

    Returns the smallest misfit over every subset of at most ``max_size``
    crossings, and the exact-fit subsets as frozensets of points.
    """
    xs, ys = np.unique(truth[:, 0]), np.unique(truth[:, 1])
    cands = np.array([(a, b) for a in xs for b in ys])
    cols = np.array([project_config([c], y.geometry).flat for c in cands])
    best, found = np.inf, []
    for k in range(1, max_size + 1):
        for sub in itertools.combinations(range(len(cands)), k):
            r = cols[list(sub)].sum(axis=0) - y.flat
            m = float(r @ r)
            best = min(best, m)
            if m < 1e-20:
                found.append(frozenset(map(tuple, cands[list(sub)])))
    return best, found
