"""Defenses: HSIC independence testing of fingerprints and the triangle test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.ndimage import uniform_filter
from scipy.spatial.distance import pdist, squareform

from .core import BLOCK, apply_mask, build_mask, check_same_shape
from .errors import DegenerateError, NumericalError, ParameterError
from .fingerprint import Fingerprint, ncc, noise_residual
from .sensor import make_rng

MIN_HSIC_SAMPLES = 20
SCENARIOS = ("high_vs_high", "high_vs_full")


# --------------------------------------------------------------------------
# HSIC


def _as_samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ParameterError("samples must be a vector or an (n, d) matrix")
    return x


def _centered_gram(x: np.ndarray) -> np.ndarray:
    """Doubly centred Gaussian Gram matrix with the median pairwise distance as bandwidth."""
    d = pdist(x)
    if d.size == 0 or not d.any():
        raise DegenerateError("all samples are identical")
    width = np.median(d)
    if width == 0:
        width = np.median(d[d > 0])
    k = np.exp(-squareform(d) ** 2 / (2.0 * width**2))
    k -= k.mean(axis=0, keepdims=True)
    k -= k.mean(axis=1, keepdims=True)
    return k


def hsic_statistic(x, y) -> float:
    """Biased HSIC V-statistic ``trace(Kc Lc) / n^2``."""
    x, y = _as_samples(x), _as_samples(y)
    if len(x) != len(y):
        raise ParameterError("x and y need the same number of samples")
    kc, lc = _centered_gram(x), _centered_gram(y)
    return float(max(np.sum(kc * lc), 0.0) / len(x) ** 2)


@dataclass(frozen=True)
class HsicOutcome:
    statistic: float
    threshold: float
    reject: bool
    n: int
    alpha: float


def hsic_test(x, y, alpha: float = 0.05, n_perm: int = 200, seed: int = 0, rng=None) -> HsicOutcome:
    """Permutation test of independence; the null permutes the rows of ``y``."""
    x, y = _as_samples(x), _as_samples(y)
    n = len(x)
    if n != len(y):
        raise ParameterError("x and y need the same number of samples")
    if n < MIN_HSIC_SAMPLES:
        raise ParameterError(f"need at least {MIN_HSIC_SAMPLES} samples, got {n}")
    if not 0 < alpha < 1 or n_perm < 1:
        raise ParameterError("alpha must lie in (0, 1) and n_perm be positive")
    rng = make_rng(seed) if rng is None else rng
    kc, lc = _centered_gram(x), _centered_gram(y)
    stat = max(float(np.sum(kc * lc)), 0.0) / n**2
    null = np.empty(n_perm)
    for b in range(n_perm):
        p = rng.permutation(n)
        # Lc re-centres exactly under a permutation, so reindexing it is the permuted statistic.
        null[b] = np.sum(kc * lc[np.ix_(p, p)]) / n**2
    thr = float(np.quantile(null, 1.0 - alpha))
    return HsicOutcome(stat, thr, stat > thr, n, float(alpha))


def tile_origins(shape, block: int, offsets=None):
    """Top-left corners of non-overlapping ``block`` tiles, one block-aligned grid per offset."""
    h, w = shape
    if block <= 0 or block > min(h, w):
        raise ParameterError(f"tile size {block} does not fit a {h}x{w} plane")
    if block % BLOCK:
        raise ParameterError(f"tile size must be a multiple of {BLOCK}, got {block}")
    offsets = (0, block // 2 // BLOCK * BLOCK) if offsets is None else offsets
    if any(off % BLOCK for off in offsets):
        raise ParameterError("tile offsets must lie on the 8x8 block grid")
    out = []
    for off in offsets:
        for r in range(off, h - block + 1, block):
            for c in range(off, w - block + 1, block):
                out.append((off, r, c))
    return out


def _blocks(tile: np.ndarray) -> np.ndarray:
    h, w = tile.shape
    return tile.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2).reshape(-1, BLOCK * BLOCK)


@dataclass(frozen=True)
class TileOutcome:
    offset: int
    row: int
    col: int
    outcome: HsicOutcome


def fingerprint_tiles(fp_alice: Fingerprint, fp_mallory: Fingerprint, c, scenario: str = "high_vs_high",
                      block: int = 64, alpha: float = 0.05, seed: int = 0, n_perm: int = 200,
                      max_samples: int = 500, offsets=None) -> list[TileOutcome]:
    """Per-tile HSIC outcomes; each tile draws its permutations and subsample from its own stream.

    A sample is one 8x8 block of the tile, flattened to a 64-vector. Pixels
    of a masked plane are not exchangeable: their variance depends on the
    position inside the block and they span only the retained subbands, so
    pixel-level samples reject independence between unrelated cameras. Blocks
    of an i.i.d. fingerprint are independent, and because the block DCT is
    orthonormal the kernel distances equal those of the retained coefficients.
    ``max_samples`` caps the number of blocks per tile.
    """
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario {scenario!r}")
    a, m = fp_alice.plane, fp_mallory.plane
    check_same_shape(a, m)
    mask = build_mask(c)
    x = apply_mask(a, mask)
    y = apply_mask(m, mask) if scenario == "high_vs_high" else m
    out = []
    for idx, (off, r, col) in enumerate(tile_origins(a.shape, block, offsets)):
        rng = make_rng(seed, idx)
        xs, ys = _blocks(x[r : r + block, col : col + block]), _blocks(y[r : r + block, col : col + block])
        if len(xs) > max_samples:
            pick = rng.choice(len(xs), max_samples, replace=False)
            xs, ys = xs[pick], ys[pick]
        out.append(TileOutcome(off, r, col, hsic_test(xs, ys, alpha, n_perm, rng=rng)))
    return out


def fingerprint_independence(fp_alice: Fingerprint, fp_mallory: Fingerprint, c, scenario: str = "high_vs_high",
                             block: int = 64, alpha: float = 0.05, seed: int = 0, **kwargs) -> float:
    """Fraction of tiles on which independence is accepted."""
    tiles = fingerprint_tiles(fp_alice, fp_mallory, c, scenario, block, alpha, seed, **kwargs)
    return float(np.mean([not t.outcome.reject for t in tiles]))


# --------------------------------------------------------------------------
# triangle test


@dataclass(frozen=True)
class TriangleModel:
    theta: float
    mu: float
    t: float
    fitted_on: int
    resid_std: float = 0.0
    p_fa: float = 1e-3
    whiten: bool = True


def flatten_spectrum(w, window: int = 5) -> np.ndarray:
    """Divide the residual's spectrum by its locally averaged magnitude.

    Scene content leaves spatially correlated structure in noise residuals,
    which inflates the spread of residual-to-residual correlations; a flat
    spectrum restores close to one degree of freedom per pixel.
    """
    w = np.asarray(w, dtype=np.float64)
    f = np.fft.fft2(w - w.mean())
    mag = np.sqrt(uniform_filter(np.abs(f) ** 2, window, mode="wrap"))
    return np.real(np.fft.ifft2(f / np.maximum(mag, np.finfo(float).tiny)))


def _residual(img, residual, sigma0, whiten=False):
    w = noise_residual(img, sigma0) if residual is None else np.asarray(residual, dtype=np.float64)
    return flatten_spectrum(w) if whiten else w


def triangle_terms(image, attacked, fp_alice: Fingerprint, sigma0: float = 5.0, w_image=None, w_attacked=None,
                   whiten: bool = True):
    """Predictor feature ``ncc(W_I, I K) * ncc(W_J', J' K)`` and response ``ncc(W_I, W_J')``.

    With ``whiten`` both residuals are spectrally flattened first; pass
    ``whiten=False`` when the supplied residuals are already flattened.
    """
    image = np.asarray(image, dtype=np.float64)
    attacked = np.asarray(attacked, dtype=np.float64)
    check_same_shape(image, attacked, fp_alice.plane)
    wi = _residual(image, w_image, sigma0, whiten)
    wj = _residual(attacked, w_attacked, sigma0, whiten)
    feature = ncc(wi, image * fp_alice.plane) * ncc(wj, attacked * fp_alice.plane)
    return feature, ncc(wi, wj)


def correlation_predictor_fit(safe_images, fp_alice: Fingerprint, attacked, p_fa: float = 1e-3,
                              sigma0: float = 5.0, safe_residuals=None, attacked_residual=None,
                              whiten: bool = True) -> TriangleModel:
    """Least-squares fit of ``nu = theta * f + mu`` on images known not to feed the attack.

    The decision threshold is the upper ``p_fa`` quantile of the Student-t predictive
    distribution for a new image, so the residual scale estimated from few safe
    images does not inflate the false-alarm rate.
    """
    n = len(safe_images)
    if n < 10:
        raise ParameterError(f"need at least 10 safe images, got {n}")
    if not 0 < p_fa < 1:
        raise ParameterError("p_fa must lie in (0, 1)")
    safe_residuals = [None] * n if safe_residuals is None else safe_residuals
    wj = _residual(attacked, attacked_residual, sigma0, whiten)
    terms = np.array([triangle_terms(im, attacked, fp_alice, sigma0, _residual(im, w, sigma0, whiten), wj,
                                     whiten=False)
                      for im, w in zip(safe_images, safe_residuals)])
    f, nu = terms[:, 0], terms[:, 1]
    design = np.column_stack([f, np.ones(n)])
    if np.linalg.matrix_rank(design) < 2:
        raise NumericalError("predictor fit is rank deficient (constant feature)")
    (theta, mu), *_ = np.linalg.lstsq(design, nu, rcond=None)
    resid = nu - design @ np.array([theta, mu])
    s = float(np.sqrt(resid @ resid / (n - 2))) if n > 2 else 0.0
    t = float(stats.t.isf(p_fa, n - 2) * s * np.sqrt(1.0 + 1.0 / n))
    return TriangleModel(float(theta), float(mu), t, n, s, float(p_fa), whiten)


def triangle_statistic(image, attacked, fp_alice: Fingerprint, model: TriangleModel, sigma0: float = 5.0,
                       w_image=None, w_attacked=None) -> float:
    f, nu = triangle_terms(image, attacked, fp_alice, sigma0, w_image, w_attacked, model.whiten)
    return float(nu - model.theta * f - model.mu)


def triangle_test(image, attacked, fp_alice: Fingerprint, model: TriangleModel, sigma0: float = 5.0,
                  w_image=None, w_attacked=None):
    """Return ``(statistic, flagged)``; an image is flagged when it explains too much of ``W_J'``."""
    s = triangle_statistic(image, attacked, fp_alice, model, sigma0, w_image, w_attacked)
    return s, bool(s > model.t)
