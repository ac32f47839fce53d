import numpy as np
import pytest

from fppbrw.rtv import brownian_path, rtv_bruteforce, rtv_dp, rtv_scaling, rtv_signs


def test_single_interval():
    p = rtv_dp([0.0, 1.0], 0.3)
    assert p.value == 1.0 and p.k == 0
    assert rtv_bruteforce([0.0, 1.0], 0.3).breakpoints.tolist() == [0, 1]


def test_zigzag_examples():
    p = rtv_dp([0, 1, 0], 0.5)
    assert p.value == pytest.approx(1.5) and p.k == 1
    assert rtv_signs(p).tolist() == [-1, 1]
    p = rtv_dp([0, 1, 0], 3)
    assert p.value == 0 and p.k == 0


def test_constant_path():
    p = rtv_dp(np.zeros(10), 0.2)
    assert p.value == 0 and p.k == 0
    b = rtv_bruteforce(np.zeros(10), 0.2)
    assert b.value == 0 and b.k == 0


def test_rising_path_signs():
    p = rtv_dp(np.arange(6.0), 1.0)
    assert p.k == 0
    assert np.all(rtv_signs(p) == -1)


def test_bad_inputs():
    with pytest.raises(ValueError):
        rtv_dp([0, 1], 0)
    with pytest.raises(ValueError):
        rtv_dp([1.0], 1)
    with pytest.raises(ValueError):
        rtv_bruteforce(np.zeros(20), 1)


def test_dp_matches_bruteforce_sample():
    rng = np.random.default_rng(0)
    for _ in range(500):
        m = int(rng.integers(1, 11))
        v = np.concatenate([[0.0], np.cumsum(rng.normal(size=m))])
        lam = float(rng.choice([0.1, 0.5, 2.0]))
        a, b = rtv_dp(v, lam), rtv_bruteforce(v, lam)
        assert a.value == pytest.approx(b.value, abs=1e-9)
        assert a.breakpoints.tolist() == b.breakpoints.tolist()


def test_optimum_structure():
    for seed in range(50):
        lam = 0.3
        p = rtv_dp(brownian_path(500, seed), lam)
        inc = p.increments
        assert p.value == pytest.approx(np.abs(inc).sum() - lam * p.k)
        assert np.all(np.sign(inc[1:]) == -np.sign(inc[:-1]))
        assert np.all(np.abs(inc[1:-1]) >= lam)
        signs = rtv_signs(p)
        assert len(signs) == 500


def test_brownian_path_is_reproducible():
    a = brownian_path(1000, 3, 2)
    assert a[0] == 0 and np.array_equal(a, brownian_path(1000, 3, 2))
    assert not np.array_equal(a, brownian_path(1000, 3, 1))


def test_refinement_does_not_lower_phi():
    # the coarse grid is a subset of the fine one, so the optimum can only grow
    for seed in range(10):
        fine = brownian_path(2000, seed)
        coarse = fine[::4]
        assert rtv_dp(fine, 0.2).value >= rtv_dp(coarse, 0.2).value - 1e-12


def test_scaling_rows_and_workers():
    rows = rtv_scaling([0.1, 2.0], 5000, 16, 1)
    assert [r["lambda"] for r in rows] == [0.1, 2.0]
    assert rows[0]["mean_phi"] > rows[1]["mean_phi"]
    assert rows[1]["mean_k"] < 1
    assert rtv_scaling([0.1, 2.0], 5000, 16, 1, workers=4) == rows
