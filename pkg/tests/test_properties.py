"""Randomised invariants checked with hypothesis."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fppbrw.coarsen import is_lattice_path, is_simple, l_coarsening, loop_erase
from fppbrw.field import FieldKind, GaussianSource, coeff_vector, exact_cov, sample_field
from fppbrw.geodesic import WeightGrid, crossing_bruteforce, crossing_distance, path_weight
from fppbrw.rtv import rtv_bruteforce, rtv_dp, rtv_signs

weights = st.integers(1, 4).flatmap(
    lambda h: st.integers(1, 4).flatmap(
        lambda w: arrays(np.float64, (h, w), elements=st.floats(0.01, 10.0, allow_nan=False))))

STEPS = [(1, 0), (-1, 0), (0, 1), (0, -1)]
walks = st.lists(st.integers(0, 3), min_size=0, max_size=60).map(
    lambda moves: np.cumsum([(0, 0)] + [STEPS[m] for m in moves], axis=0))


@settings(max_examples=200, deadline=None)
@given(weights, st.sampled_from(["lr", "td"]))
def test_geodesic_equals_exhaustive(w, direction):
    r = crossing_distance(WeightGrid(w), direction=direction)
    assert np.isclose(r.weight, crossing_bruteforce(w, direction), rtol=1e-12)
    assert np.isclose(path_weight(WeightGrid(w), r.path), r.weight, rtol=1e-12)
    assert is_lattice_path(r.path)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=11), st.sampled_from([0.1, 0.5, 2.0]))
def test_rtv_dp_equals_bruteforce(values, lam):
    a, b = rtv_dp(values, lam), rtv_bruteforce(values, lam)
    assert abs(a.value - b.value) <= 1e-9 * (1 + abs(b.value))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=60), st.floats(0.01, 3.0))
def test_rtv_optimum_structure(values, lam):
    p = rtv_dp(values, lam)
    inc = p.increments
    nz = inc[inc != 0]
    assert np.all(np.sign(nz[1:]) != np.sign(nz[:-1]))
    assert np.all(np.abs(inc[1:-1]) >= lam - 1e-9)
    assert p.value >= abs(values[-1] - values[0]) - 1e-9
    assert len(rtv_signs(p)) == len(values) - 1


@settings(max_examples=200, deadline=None)
@given(walks, st.sampled_from([1, 2, 4, 8]))
def test_coarsening_properties(path, side):
    c = l_coarsening(path, side)
    assert len(c) <= len(path)
    assert np.all(np.any(np.diff(c.centers, axis=0) != 0, axis=1))
    steps = np.abs(np.diff(c.centers, axis=0)).sum(axis=1)
    assert np.all(steps == side)


@settings(max_examples=200, deadline=None)
@given(walks)
def test_loop_erasure(path):
    e = loop_erase(path)
    assert is_lattice_path(e)
    assert is_simple(l_coarsening(e, 0.5))
    assert e[0].tolist() == path[0].tolist() and e[-1].tolist() == path[-1].tolist()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 62), st.sampled_from([FieldKind.BRW, FieldKind.CHI, FieldKind.TILDE_CHI]),
       st.integers(0, 3), st.data())
def test_field_reconstruction(seed, kind, n, data):
    gc = 1 if kind is FieldKind.BRW else 3
    src = GaussianSource(seed)
    s = sample_field(kind, n, gc, src)
    x = data.draw(st.integers(0, gc * 2 ** n - 1))
    y = data.draw(st.integers(0, 2 ** n - 1))
    v = sum(c * src(k) for k, c in coeff_vector(kind, n, gc, (x, y)).items())
    assert abs(v - s.at(x, y)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 3), st.data())
def test_tilde_chi_matches_concat_brw(n, data):
    side = 1 << n
    pt = st.tuples(st.integers(0, 3 * side - 1), st.integers(0, side - 1))
    a, b = data.draw(pt), data.draw(pt)
    assert abs(exact_cov(FieldKind.TILDE_CHI, n, 3, a, b) - exact_cov(FieldKind.CONCAT_BRW, n, 3, a, b)) < 1e-12
    assert exact_cov(FieldKind.TILDE_CHI, n, 3, a, b) == exact_cov(FieldKind.TILDE_CHI, n, 3, b, a)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.data())
def test_brw_cov_counts_shared_boxes(n, data):
    side = 1 << n
    pt = st.tuples(st.integers(0, side - 1), st.integers(0, side - 1))
    a, b = data.draw(pt), data.draw(pt)
    shared = sum((a[0] >> k, a[1] >> k) == (b[0] >> k, b[1] >> k) for k in range(n))
    assert exact_cov(FieldKind.BRW, n, 1, a, b) == shared
