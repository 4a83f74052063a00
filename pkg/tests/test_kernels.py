import numpy as np
import pytest

from taplab import kernels
from taplab.priors import three_point


@pytest.fixture(scope="module")
def batch():
    tp = three_point()
    rng = np.random.default_rng(0)
    lam = rng.uniform(-6, 6, 500)
    gam = rng.uniform(-6, 6, 500)
    return tp.locations, tp.log_weights, lam, gam


def test_tilted_stats_reference_values(batch):
    locs, logw, _, _ = batch
    m, s, logZ, c11, c12, c22 = kernels.tilted_stats(
        locs, logw, np.array([0.0]), np.array([0.0]))
    assert m[0] == pytest.approx(0.0, abs=1e-15)
    assert s[0] == pytest.approx(2.0 / 3.0)
    assert logZ[0] == pytest.approx(0.0, abs=1e-15)
    # cov of (beta, beta^2) under uniform{-1,0,1}: var(beta)=2/3,
    # cov(beta,beta^2)=0, var(beta^2)=2/3-4/9=2/9
    assert c11[0] == pytest.approx(2.0 / 3.0)
    assert c12[0] == pytest.approx(0.0, abs=1e-15)
    assert c22[0] == pytest.approx(2.0 / 9.0)


@pytest.mark.skipif(not kernels.USE_NUMBA, reason="numba backend not active")
def test_backends_agree_tilted_stats(batch):
    locs, logw, lam, gam = batch
    ref = kernels.tilted_stats_np(locs, logw, lam, gam)
    jit = kernels._tilted_stats_nb(locs, logw, lam, gam)
    for a, b in zip(ref, jit):
        assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.skipif(not kernels.USE_NUMBA, reason="numba backend not active")
def test_backends_agree_dual_newton(batch):
    locs, logw, lam, gam = batch
    m, s, *_ = kernels.tilted_stats_np(locs, logw, lam, gam)
    z = np.zeros_like(m)
    ref = kernels.dual_newton_np(locs, logw, m, s, z, z, 1e-10, 200, 1e6)
    jit = kernels._dual_newton_nb(locs, logw, m, s, z, z, 1e-10, 200, 1e6)
    assert np.all(ref[2]) and np.all(jit[2])
    assert np.max(np.abs(ref[0] - jit[0])) < 1e-7
    assert np.max(np.abs(ref[1] - jit[1])) < 1e-7


def test_dual_newton_roundtrip_flags(batch):
    locs, logw, lam, gam = batch
    m, s, *_ = kernels.tilted_stats(locs, logw, lam, gam)
    lam2, gam2, conv, res = kernels.dual_newton(locs, logw, m, s, 0.0, 0.0,
                                                tol=1e-14)
    assert np.all(conv)
    assert np.max(res) < 1e-14
    assert np.max(np.abs(lam2 - lam)) < 1e-8
