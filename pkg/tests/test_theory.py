import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fragilefp.core import (BLOCK, QuantTable, apply_mask, block_dct, block_idct, build_mask, full_mask,
                           jpeg_roundtrip, quant_table_for_quality)
from fragilefp.errors import DegenerateError, ParameterError
from fragilefp.fingerprint import ncc
from fragilefp.sensor import SceneSpec, capture, make_rng, new_camera, render_scene
from fragilefp.theory import (LaplaceSubbandModel, dct_domain_correlation, fit_subband_models, laplace_fit,
                              population_rho, quant_moments, sample_r)


def bin_oracle(lam, q):
    """Exact moments of V = q*round(U/q) by summing closed-form Laplace integrals over the quantizer bins."""
    k = np.arange(1, int(60 / (lam * q)) + 2)
    lo, hi = (k - 0.5) * q, (k + 0.5) * q
    # positive half: P(bin) and E[U; bin] for density (lam/2) exp(-lam u)
    p = 0.5 * (np.exp(-lam * lo) - np.exp(-lam * hi))
    m1 = 0.5 * ((lo + 1 / lam) * np.exp(-lam * lo) - (hi + 1 / lam) * np.exp(-lam * hi))
    var_v = 2 * np.sum((k * q) ** 2 * p)
    cov = 2 * np.sum(k * q * m1)
    return 2 / lam**2, var_v, cov


def test_dct_correlation_self(rng):
    u = rng.normal(size=(32, 32))
    assert dct_domain_correlation(u, u, build_mask(1)) == pytest.approx(1.0)


@pytest.mark.parametrize("c", [1, 2, 3, 4, 5])
def test_dct_correlation_matches_spatial(rng, c):
    u, v = rng.normal(size=(2, 64, 64))
    v = u + 2 * v
    m = build_mask(c)
    assert dct_domain_correlation(u, v, m) == pytest.approx(ncc(apply_mask(u, m), apply_mask(v, m)), abs=1e-9)


def test_dct_correlation_sign_flip(rng):
    u = rng.normal(size=(32, 32))
    y = block_dct(u)
    y[7::8, 7::8] *= -1  # subband (8, 8) lies in every H_c with c < 7
    v = block_idct(y)
    m = build_mask(1)
    r = dct_domain_correlation(u, v, m)
    assert r < 1
    assert r == pytest.approx(ncc(apply_mask(u, m), apply_mask(v, m)), abs=1e-9)


def test_dct_correlation_rejects_dc():
    with pytest.raises(ParameterError):
        dct_domain_correlation(np.ones((8, 8)), np.ones((8, 8)), full_mask())


def test_laplace_fit():
    assert laplace_fit([-1.0, 1.0]) == pytest.approx(1.0)
    x = make_rng(0).laplace(0, 2.0, size=10**6)
    assert laplace_fit(x) == pytest.approx(0.5, rel=0.01)
    with pytest.raises(DegenerateError):
        laplace_fit(np.zeros(10))


def test_fit_subband_models_marks_degenerate():
    models = fit_subband_models([np.full((16, 16), 128.0)])
    assert np.isnan(models.scales).all()


def test_quant_moments_vanishing_step():
    lam = 0.7
    var_u, var_p, cov_p = quant_moments(lam, 1e-6 / lam)
    assert cov_p == pytest.approx(var_u, rel=1e-6)
    assert var_p == pytest.approx(var_u, rel=1e-6)


@pytest.mark.parametrize("lam", [0.05, 0.2, 1.0, 3.0])
@pytest.mark.parametrize("q", [1.0, 4.0, 16.0])
def test_quant_moments_bin_oracle(lam, q):
    var_u, var_p, cov_p = quant_moments(lam, q)
    ou, ov, oc = bin_oracle(lam, q)
    assert var_u == pytest.approx(ou, rel=1e-12)
    # series truncation is controlled relative to Var(U)
    assert var_p == pytest.approx(ov, rel=1e-9, abs=1e-11 * ou)
    assert cov_p == pytest.approx(oc, rel=1e-9, abs=1e-11 * ou)


def test_quant_moments_monte_carlo():
    u = make_rng(11).laplace(0, 1.0, size=10**7)
    v = np.floor(u / 4 + 0.5) * 4
    _, var_p, cov_p = quant_moments(1.0, 4.0)
    assert cov_p == pytest.approx(np.mean(u * v) - u.mean() * v.mean(), rel=5e-3)
    assert var_p == pytest.approx(v.var(), rel=5e-3)


def test_quant_moments_coarse_step():
    # q = 100 with unit scale: only |U| > 50 escapes zero (probability exp(-50)),
    # so the moments are zero up to the series tolerance
    var_u, var_p, cov_p = quant_moments(1.0, 100.0)
    _, ov, oc = bin_oracle(1.0, 100.0)
    assert abs(cov_p - oc) < 1e-11 * var_u
    assert abs(var_p - ov) < 1e-11 * var_u


@given(st.floats(0.01, 5), st.floats(0.05, 50))
def test_quant_moments_cauchy_schwarz(lam, q):
    var_u, var_p, cov_p = quant_moments(lam, q)
    assert cov_p >= -1e-12 * var_u
    assert var_p >= 0
    assert cov_p <= np.sqrt(var_u * var_p) * (1 + 1e-9) + 1e-11 * var_u


def test_quant_moments_broadcast():
    out = quant_moments(np.array([0.5, 1.0]), 4.0)
    assert out[1].shape == (2,)
    assert out[2][1] == pytest.approx(quant_moments(1.0, 4.0)[2])
    with pytest.raises(ParameterError):
        quant_moments(-1.0, 1.0)


def _laplacian_images(n, size=64):
    spec = SceneSpec("laplacian_synthetic", height=size, width=size)
    return [render_scene(spec, s) for s in range(n)]


def test_population_rho_lossless_limit():
    # lam is a rate: 0.01 means scale 100, against which a unit step is negligible
    lam = np.full((3, BLOCK, BLOCK), 0.01)
    lam[:, 0, 0] = np.nan
    rho = population_rho(LaplaceSubbandModel(lam), QuantTable(np.ones((8, 8))), 1)
    assert rho == pytest.approx(1.0, abs=0.01)


def test_population_rho_monotone():
    # natural-looking spectra decay with frequency; the last anti-diagonals hold only a
    # handful of subbands whose table steps are not ordered, hence the small slack in c
    cam = new_camera(height=64, width=64)
    spec = SceneSpec("textured", height=64, width=64)
    models = fit_subband_models([capture(cam, render_scene(spec, s), s) for s in range(10)])
    for q in (100, 95, 85, 70):
        rhos = [population_rho(models, quant_table_for_quality(q), c) for c in range(1, 6)]
        assert all(b <= a + 2e-3 for a, b in zip(rhos, rhos[1:]))
    for c in (None, 1, 3):
        rhos = [population_rho(models, quant_table_for_quality(q), c) for q in (100, 95, 90, 80, 70)]
        assert all(b <= a + 1e-12 for a, b in zip(rhos, rhos[1:]))


def test_sample_r_identities(rng):
    imgs = _laplacian_images(3)
    assert sample_r(imgs, imgs, 1) == pytest.approx(1.0)
    assert sample_r(imgs[:1], imgs[1:2], 2) == pytest.approx(
        dct_domain_correlation(imgs[0], imgs[1], build_mask(2)), abs=1e-12)
    comp = [jpeg_roundtrip(x, 100) for x in imgs]
    assert sample_r(imgs, comp, None) > 0.99
    with pytest.raises(ParameterError):
        sample_r([], [], 1)
