import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomtomo.energy import LJ_TABLE, satisfies_min_distance, vtot, vtot_gradient
from atomtomo.phantom import (
    DefectKind,
    FireOptions,
    LatticeSpec,
    apply_defect,
    boundary_mask,
    fire_relax,
    fit_lattice,
    make_lattice,
    make_phantom,
)

P = LJ_TABLE["interstitial"]


def test_single_atom_lattice():
    x = make_lattice(LatticeSpec(1, 1, 0.1, (0.3, 0.4)))
    np.testing.assert_array_equal(x, [[0.3, 0.4]])


def test_two_by_two_distances():
    s = 0.12
    x = make_lattice(LatticeSpec(2, 2, s, (0.3, 0.3)))
    d = np.sort([np.hypot(*(a - b)) for a, b in itertools.combinations(x, 2)])
    np.testing.assert_allclose(d, [s] * 4 + [s * np.sqrt(2)] * 2, rtol=1e-14)


def test_margin_violation_rejected():
    with pytest.raises(ValueError):
        LatticeSpec(7, 7, 2 ** (1 / 6) * 0.14, (0.05, 0.05))


def test_seven_by_seven_spacing_is_shrunk():
    params = LJ_TABLE["vacancy"]
    assert 6 * params.r_m == pytest.approx(0.943, abs=1e-3)
    spec = fit_lattice(7, 7, params)
    assert spec.spacing == pytest.approx(0.8 / 6)
    x = make_lattice(spec)
    assert len(x) == 49
    assert x.min() == pytest.approx(0.1) and x.max() == pytest.approx(0.9)


def test_small_lattice_keeps_r_m():
    spec = fit_lattice(3, 3, P)
    assert spec.spacing == P.r_m
    x = make_lattice(spec)
    np.testing.assert_allclose(x.mean(axis=0), [0.5, 0.5])


@pytest.mark.parametrize("defect,shape,count", [("interstitial", (6, 6), 37), ("vacancy", (7, 7), 48),
                                                ("edge", (6, 7), 39)])
def test_defect_atom_counts(defect, shape, count):
    spec = fit_lattice(*shape, LJ_TABLE[defect])
    x = apply_defect(make_lattice(spec), DefectKind(defect), spec)
    assert len(x) == count


def test_interstitial_sits_at_plaquette_centre():
    spec = fit_lattice(6, 6, P)
    base = make_lattice(spec)
    x = apply_defect(base, DefectKind("interstitial", (1, 3)), spec)
    np.testing.assert_allclose(x[-1], base[1 * 6 + 3] + spec.spacing / 2)


def test_vacancy_removes_named_site():
    spec = fit_lattice(7, 7, LJ_TABLE["vacancy"])
    base = make_lattice(spec)
    x = apply_defect(base, DefectKind("vacancy", (2, 5)), spec)
    gone = base[2 * 7 + 5]
    assert not np.any(np.all(np.isclose(x, gone), axis=1))


@pytest.mark.parametrize("kind,site", [("interstitial", (5, 0)), ("vacancy", (7, 0)), ("vacancy", (-1, 2))])
def test_out_of_bounds_site(kind, site):
    spec = fit_lattice(6, 6, P) if kind == "interstitial" else fit_lattice(7, 7, LJ_TABLE["vacancy"])
    with pytest.raises(ValueError):
        apply_defect(make_lattice(spec), DefectKind(kind, site), spec)


def test_unknown_defect_kind():
    with pytest.raises(ValueError):
        DefectKind("grain")


@pytest.mark.parametrize("kw", [{"f_dec": 1.2}, {"f_inc": 0.9}, {"alpha_start": 1.0}, {"dt_max": 0}])
def test_fire_options_validation(kw):
    with pytest.raises(ValueError):
        FireOptions(**kw)


def test_pair_at_minimum_stays_put():
    x = np.array([[0.4, 0.5], [0.4 + P.r_m, 0.5]])
    out = fire_relax(x, P)
    assert np.abs(out - x).max() < 1e-8


def test_pair_relaxes_to_r_m():
    x = np.array([[0.4, 0.5], [0.4 + 1.05 * P.r_m, 0.5]])
    out = fire_relax(x, P)
    assert np.hypot(*(out[1] - out[0])) == pytest.approx(P.r_m, abs=1e-6)


def test_fire_interstitial_seed():
    spec = fit_lattice(6, 6, P)
    seed = apply_defect(make_lattice(spec), DefectKind("interstitial"), spec)
    res = fire_relax(seed, P, full_output=True, fixed=boundary_mask(seed))
    assert res.converged
    assert res.energy < vtot(seed, P)
    assert res.max_force <= 1e-6
    assert len(res.positions) == 37


def test_fire_accepted_steps_never_go_uphill():
    spec = fit_lattice(6, 6, P)
    seed = apply_defect(make_lattice(spec), DefectKind("interstitial"), spec)
    res = fire_relax(seed, P, full_output=True, fixed=boundary_mask(seed))
    e = np.array(res.energies)
    assert len(e) > 10
    assert np.all(np.diff(e) <= 1e-13 * (abs(e[0]) + 1))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_fire_monotone_and_count_preserving_random(seed):
    rng = np.random.default_rng(seed)
    base = make_lattice(LatticeSpec(3, 3, P.r_m, (0.35, 0.35)))
    x = base + rng.uniform(-0.02, 0.02, base.shape)
    res = fire_relax(x, P, full_output=True)
    assert len(res.positions) == 9
    e = np.array(res.energies)
    assert np.all(np.diff(e) <= 1e-13 * (abs(e[0]) + 1))
    assert res.energy <= vtot(x, P) + 1e-12


def test_fixed_atoms_do_not_move():
    x = np.array([[0.3, 0.5], [0.3 + 1.1 * P.r_m, 0.5], [0.3 + 2.0 * P.r_m, 0.55]])
    fixed = np.array([True, False, False])
    out = fire_relax(x, P, fixed=fixed)
    np.testing.assert_array_equal(out[0], x[0])
    f = vtot_gradient(out, P)
    assert np.hypot(*f[1:].T).max() <= 1e-6


def test_fixed_mask_shape_checked():
    with pytest.raises(ValueError):
        fire_relax(np.array([[0.3, 0.5], [0.5, 0.5]]), P, fixed=[True])


def test_boundary_mask_on_lattice():
    m = boundary_mask(make_lattice(LatticeSpec(4, 5, 0.1, (0.2, 0.2))))
    assert m.sum() == 4 * 5 - 2 * 3


@pytest.mark.parametrize("defect,count", [("interstitial", 37), ("vacancy", 48), ("edge", 39)])
def test_phantoms(defect, count, phantoms):
    x = phantoms[defect]
    params = LJ_TABLE[defect]
    assert len(x) == count
    assert x.min() >= 0.1 - 1e-9 and x.max() <= 0.9 + 1e-9
    assert satisfies_min_distance(x, 0.7 * params.r_m)


def test_phantom_is_deterministic(phantoms):
    np.testing.assert_array_equal(make_phantom("interstitial"), phantoms["interstitial"])


def test_free_boundary_phantom_has_low_forces():
    x = make_phantom("vacancy", rows=3, cols=3, clamp_boundary=False)
    assert len(x) == 8
    f = vtot_gradient(x, LJ_TABLE["vacancy"])
    assert np.hypot(*f.T).max() <= 1e-6
