import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomtomo.energy import (
    LJ_TABLE,
    ConstraintSpec,
    LJParams,
    pair_energy,
    pairwise_distances,
    satisfies_min_distance,
    vlj,
    vtot,
    vtot_gradient,
)

from oracles import central_difference, lj_direct

P = LJ_TABLE["interstitial"]


def random_config(rng, n, params, lo=0.8, hi=None):
    """Rejection-sample n atoms whose pair distances lie in [lo*r_m, r_cut) for
    the neighbours that interact (others are further than r_cut)."""
    hi = params.r_cut if hi is None else hi
    pts = [rng.uniform(0.3, 0.7, 2)]
    while len(pts) < n:
        cand = pts[rng.integers(len(pts))] + rng.uniform(-1, 1, 2) * hi
        d = np.hypot(*(np.array(pts) - cand).T)
        if d.min() >= lo * params.r_m and np.all((d < hi * 0.999) | (d > params.r_cut * 1.001)):
            pts.append(cand)
    return np.array(pts)


def test_table_values():
    assert (P.epsilon, P.sigma, P.r_cut) == (0.4, 0.15, 0.4)
    assert (LJ_TABLE["vacancy"].sigma, LJ_TABLE["vacancy"].r_cut) == (0.14, 0.4)
    assert (LJ_TABLE["edge"].sigma, LJ_TABLE["edge"].r_cut) == (0.13, 0.17)


def test_zero_at_sigma():
    assert vlj(P.sigma, P) == 0.0


def test_minus_epsilon_at_r_m():
    assert vlj(P.r_m, P) == pytest.approx(-P.epsilon, rel=1e-15, abs=1e-15)


def test_zero_at_cutoff():
    assert vlj(0.4, P) == 0.0
    assert vlj(0.5, P) == 0.0


def test_cutoff_jump_equals_left_limit():
    left = vlj(np.nextafter(P.r_cut, 0), P)
    assert left == pytest.approx(lj_direct(P.r_cut, P.epsilon, P.sigma, np.inf), rel=1e-12)
    assert left < 0 and vlj(P.r_cut, P) == 0.0


@pytest.mark.parametrize("r", [0.0, -0.1])
def test_nonpositive_separation_rejected(r):
    with pytest.raises(ValueError):
        vlj(r, P)


def test_invalid_params():
    with pytest.raises(ValueError):
        LJParams(0.0, 0.1, 0.3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.6))
def test_vlj_matches_direct_formula(r):
    assert vlj(r, P) == pytest.approx(lj_direct(r, P.epsilon, P.sigma, P.r_cut), rel=1e-13, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.399))
def test_sign_pattern(r):
    v = vlj(r, P)
    if r < P.sigma * (1 - 1e-12):
        assert v > 0
    elif r > P.sigma * (1 + 1e-12):
        assert v < 0


def test_vtot_single_atom():
    assert vtot([(0.5, 0.5)], P) == 0.0


def test_vtot_pair_at_minimum():
    assert vtot([(0.2, 0.5), (0.2 + P.r_m, 0.5)], P) == pytest.approx(-P.epsilon, rel=1e-14)


def test_three_collinear():
    rm = P.r_m
    x = [(0.1, 0.5), (0.1 + rm, 0.5), (0.1 + 2 * rm, 0.5)]
    assert 2 * rm < P.r_cut
    expected = 2 * lj_direct(rm, 0.4, 0.15, 0.4) + lj_direct(2 * rm, 0.4, 0.15, 0.4)
    assert vtot(x, P) == pytest.approx(expected, rel=1e-13)
    assert lj_direct(2 * rm, 0.4, 0.15, 0.4) != 0


def test_coincident_atoms_rejected():
    with pytest.raises(ValueError):
        vtot([(0.3, 0.3), (0.3, 0.3)], P)
    with pytest.raises(ValueError):
        vtot_gradient([(0.3, 0.3), (0.3, 0.3)], P)


def test_pairwise_distance_count(rng):
    x = rng.random((6, 2))
    d = pairwise_distances(x)
    assert len(d) == 15
    assert d.min() > 0


def test_zero_force_at_minimum():
    f = vtot_gradient([(0.2, 0.5), (0.2 + P.r_m, 0.5)], P)
    np.testing.assert_allclose(f, 0.0, atol=1e-12)


def test_gradient_matches_finite_differences_five_atoms(rng):
    params = LJ_TABLE["vacancy"]
    x = random_config(rng, 5, params)
    num = -central_difference(lambda z: vtot(z, params), x, h=1e-6)
    ana = vtot_gradient(x, params)
    scale = np.abs(ana).max()
    np.testing.assert_allclose(ana, num, rtol=1e-5, atol=1e-5 * scale)


@pytest.mark.parametrize("name", ["interstitial", "vacancy", "edge"])
def test_gradient_random_configs(name, rng):
    params = LJ_TABLE[name]
    for _ in range(5):
        x = random_config(rng, 8, params)
        num = -central_difference(lambda z: vtot(z, params), x, h=1e-6)
        ana = vtot_gradient(x, params)
        err = np.abs(ana - num).max() / np.abs(ana).max()
        assert err < 1e-5


def test_far_pairs_exert_no_force():
    f = vtot_gradient([(0.05, 0.5), (0.05 + P.r_cut + 1e-3, 0.5)], P)
    assert not f.any()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_net_force_vanishes(seed):
    rng = np.random.default_rng(seed)
    x = random_config(rng, 7, P, lo=0.8)
    f = vtot_gradient(x, P)
    assert np.abs(f.sum(axis=0)).max() < 1e-12 * max(1.0, np.abs(f).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-np.pi, np.pi), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_vtot_invariant_under_rigid_motion(seed, angle, dx, dy):
    rng = np.random.default_rng(seed)
    x = random_config(rng, 6, P)
    c, s = np.cos(angle), np.sin(angle)
    moved = x @ np.array([[c, s], [-s, c]]) + [dx, dy]
    e = vtot(x, P)
    assert vtot(moved, P) == pytest.approx(e, rel=1e-10, abs=1e-12)


def test_pair_energy_sums_to_total(rng):
    x = random_config(rng, 6, P)
    total = sum(pair_energy(x[i], x[:i], P) for i in range(len(x)))
    assert total == pytest.approx(vtot(x, P), rel=1e-12)


def test_min_distance_edge_cases():
    assert satisfies_min_distance(np.zeros((0, 2)), 0.1)
    assert satisfies_min_distance([(0.5, 0.5)], 0.1)
    assert not satisfies_min_distance([(0.0, 0.0), (0.25, 0.0)], ConstraintSpec(0.25))
    assert satisfies_min_distance([(0.0, 0.0), (0.25, 0.0)], ConstraintSpec(0.2499))


def test_vacancy_phantom_respects_min_distance(phantoms):
    x = phantoms["vacancy"]
    assert len(x) == 48
    assert satisfies_min_distance(x, ConstraintSpec(0.7 * LJ_TABLE["vacancy"].r_m))


def test_constraint_spec_range():
    ConstraintSpec(0.1).check(P)
    with pytest.raises(ValueError):
        ConstraintSpec(P.r_m).check(P)
