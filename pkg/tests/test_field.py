import math

import numpy as np
import pytest

from fppbrw.field import (
    DyadicKey, FieldKind, GaussianSource, KeyKind, chi_step_increment, coeff_vector, cov_matrix,
    derive_array, derive_gaussian, dump_field, exact_cov, level_coeffs, load_field, sample_field,
    tilde_r_lookup,
)


# -- keys and the Gaussian source -----------------------------------------------

def test_key_alignment_checked():
    DyadicKey(KeyKind.BOX, 2, 4, 8)
    with pytest.raises(ValueError):
        DyadicKey(KeyKind.BOX, 2, 3, 0)
    with pytest.raises(ValueError):
        DyadicKey(KeyKind.STACKED_RECT, 1, 0, 1)


def test_key_equality_is_fieldwise():
    assert DyadicKey(KeyKind.BOX, 1, 2, 2) == DyadicKey(KeyKind.BOX, 1, 2, 2)
    assert DyadicKey(KeyKind.BOX, 1, 2, 2) != DyadicKey(KeyKind.STACKED_RECT, 1, 2, 2)
    assert DyadicKey(KeyKind.BM_INCREMENT, 1, 2, 2, 1) != DyadicKey(KeyKind.BM_INCREMENT, 1, 2, 2, 2)


def test_derive_is_pure():
    key = DyadicKey(KeyKind.STACKED_RECT, 2, 4, 8)
    assert derive_gaussian(12345, key) == derive_gaussian(12345, key)
    assert GaussianSource(12345)(key) == derive_gaussian(12345, key)


def test_derive_golden_values():
    # frozen outputs of the counter-based generator; any change breaks reproducibility
    assert derive_gaussian(0, DyadicKey(KeyKind.BOX, 0, 0, 0)) == 0.8281092182856774
    assert derive_gaussian(12345, DyadicKey(KeyKind.STACKED_RECT, 2, 4, 8)) == -0.1487870060559328
    assert derive_gaussian(7, DyadicKey(KeyKind.BM_INCREMENT, 1, 6, 0, 3)) == -0.06662440546046323


def test_derive_array_matches_scalar():
    xs = np.arange(0, 40, 4)
    arr = derive_array(3, int(KeyKind.BOX), 2, xs, 8)
    assert [derive_gaussian(3, DyadicKey(KeyKind.BOX, 2, int(x), 8)) for x in xs] == arr.tolist()


def test_million_keys_are_standard_normal():
    z = derive_array(1, int(KeyKind.BOX), 0, np.arange(1_000_000), 0)
    assert abs(z.mean()) < 4 / math.sqrt(1e6)
    assert abs(z.var() - 1) < 0.01


def test_streams_uncorrelated():
    idx = np.arange(100_000)
    a = derive_array(5, int(KeyKind.BM_INCREMENT), 3, idx * 8, 0, 1)
    b = derive_array(5, int(KeyKind.BM_INCREMENT), 3, idx * 8, 0, 2)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


# -- coefficients and lookup ------------------------------------------------------

def test_level_coeffs():
    b, c = level_coeffs(1)
    assert b == pytest.approx(0.5, abs=1e-15)
    assert c == pytest.approx(math.sqrt(0.5), abs=1e-15)
    for lvl in (1, 2, 5, 20):
        b, c = level_coeffs(lvl)
        assert b * b + c * c == pytest.approx(1 - 4.0 ** -lvl, abs=1e-15)
        assert c * c == pytest.approx(2 * b * b)
    with pytest.raises(ValueError):
        level_coeffs(0)


def test_tilde_r_lookup_table():
    # odd position: the column's own rectangle; even: the one to its left
    assert tilde_r_lookup(1, 1, 3) == DyadicKey(KeyKind.STACKED_RECT, 0, 0, 0)
    assert tilde_r_lookup(1, 2, 3) == DyadicKey(KeyKind.STACKED_RECT, 0, 0, 0)
    # k=2, j=1 is position 4 (even) and wraps back to (k-1, Gamma)
    assert tilde_r_lookup(2, 1, 3) == tilde_r_lookup(1, 3, 3)
    assert tilde_r_lookup(2, 1, 3) == DyadicKey(KeyKind.STACKED_RECT, 0, 2, 0)


# -- sampler -----------------------------------------------------------------------

def test_chi_level_zero_vanishes():
    s = sample_field(FieldKind.CHI, 0, 3, GaussianSource(1))
    assert s.values.shape == (1, 3)
    assert np.all(s.values == 0)


@pytest.mark.parametrize("kind,n,gc", [(FieldKind.BRW, 3, 1), (FieldKind.CONCAT_BRW, 2, 3),
                                       (FieldKind.CHI, 3, 3), (FieldKind.TILDE_CHI, 2, 5)])
def test_value_count_and_shape(kind, n, gc):
    s = sample_field(kind, n, gc, GaussianSource(0))
    assert s.values.size == gc * 4 ** n
    assert s.shape == (2 ** n, gc * 2 ** n)


def test_sampler_rejects_bad_params():
    src = GaussianSource(0)
    with pytest.raises(ValueError):
        sample_field(FieldKind.CHI, 2, 2, src)
    with pytest.raises(ValueError):
        sample_field(FieldKind.BRW, 2, 3, src)
    with pytest.raises(ValueError):
        sample_field(FieldKind.CHI, 2, 3, src, origin=(1, 0))
    with pytest.raises(ValueError):
        sample_field(FieldKind.CHI, 3, 3, src, max_level=2)


def test_sampler_golden_checksum():
    s = sample_field(FieldKind.TILDE_CHI, 3, 3, GaussianSource(11))
    assert float(s.values.sum()) == pytest.approx(71.63027245727656, abs=1e-10)


@pytest.mark.parametrize("kind,n,gc,origin", [
    (FieldKind.BRW, 3, 1, (8, 16)), (FieldKind.CONCAT_BRW, 2, 3, (0, 0)),
    (FieldKind.CHI, 3, 3, (24, 8)), (FieldKind.TILDE_CHI, 3, 3, (0, 0)),
])
def test_reconstruction_from_coefficients(kind, n, gc, origin):
    rng = np.random.default_rng(0)
    for seed in rng.integers(0, 2 ** 40, size=10):
        src = GaussianSource(int(seed))
        s = sample_field(kind, n, gc, src, origin)
        for _ in range(10):
            x = origin[0] + int(rng.integers(0, gc * 2 ** n))
            y = origin[1] + int(rng.integers(0, 2 ** n))
            v = sum(c * src(k) for k, c in coeff_vector(kind, n, gc, (x, y), origin).items())
            assert v == pytest.approx(s.at(x, y), abs=1e-12)


def test_chi_increments_sum_to_field():
    src = GaussianSource(4)
    total = sum(chi_step_increment(m, 3, 3, src) for m in range(1, 4))
    assert np.allclose(total, sample_field(FieldKind.CHI, 3, 3, src).values, atol=1e-14)


def test_brw_coefficients():
    c = coeff_vector(FieldKind.BRW, 3, 1, (0, 0))
    assert len(c) == 3 and all(v == 1.0 for v in c.values())


def test_chi_one_step_coefficients():
    c = coeff_vector(FieldKind.CHI, 1, 3, (0, 0))
    by_kind = {k.kind: v for k, v in c.items()}
    assert len(c) == 2
    assert abs(by_kind[KeyKind.STACKED_RECT]) == pytest.approx(0.5)
    assert abs(by_kind[KeyKind.BM_INCREMENT]) == pytest.approx(math.sqrt(0.5))


def _mc_var(kind, n, gc, z, seeds):
    coeff = coeff_vector(kind, n, gc, z)
    vals = np.array([sum(c * derive_gaussian(s, k) for k, c in coeff.items()) for s in range(seeds)])
    return vals.var(ddof=1), vals.var(ddof=1) * math.sqrt(2 / (seeds - 1))


@pytest.mark.parametrize("kind,n,gc,z", [(FieldKind.BRW, 3, 1, (5, 2)), (FieldKind.TILDE_CHI, 2, 3, (7, 1))])
def test_variance_over_seeds(kind, n, gc, z):
    var, se = _mc_var(kind, n, gc, z, 100_000)
    assert abs(var - n) < 3 * se


# -- covariance oracle -------------------------------------------------------------

def test_exact_cov_brw_examples():
    assert exact_cov(FieldKind.BRW, 3, 1, (2, 2), (2, 2)) == 3.0
    assert exact_cov(FieldKind.BRW, 3, 1, (0, 0), (1, 0)) == 2.0
    assert exact_cov(FieldKind.BRW, 3, 1, (0, 0), (7, 7)) == 0.0


def test_cov_matrix_matches_pairwise():
    pts = [(0, 0), (1, 3), (5, 2), (11, 3)]
    m = cov_matrix(FieldKind.TILDE_CHI, 2, 3, pts)
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            assert m[i, j] == pytest.approx(exact_cov(FieldKind.TILDE_CHI, 2, 3, a, b), abs=1e-14)


def test_tilde_chi_variance_is_n():
    for n in (1, 2, 3):
        assert exact_cov(FieldKind.TILDE_CHI, n, 3, (1, 0), (1, 0)) == pytest.approx(n, abs=1e-12)


# -- binary dump -------------------------------------------------------------------

def test_dump_roundtrip(tmp_path):
    s = sample_field(FieldKind.CHI, 3, 3, GaussianSource(2), origin=(48, 8))
    p = tmp_path / "f.bin"
    dump_field(s, p)
    raw = p.read_bytes()
    assert raw[:4] == b"FPBW" and len(raw) == 32 + 8 * s.values.size
    back = load_field(p)
    assert back.kind is FieldKind.CHI and back.n == 3 and back.gamma_cells == 3 and back.origin == (48, 8)
    assert np.array_equal(back.values, s.values)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        load_field(p)
    p.write_bytes(b"FPB")
    with pytest.raises(ValueError):
        load_field(p)
