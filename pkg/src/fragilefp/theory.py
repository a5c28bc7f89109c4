"""Analytical correlation between uncompressed and JPEG-quantized DCT data.

Laplace convention: the scale ``lam`` used throughout is the parameter of the
characteristic function ``Phi(x) = lam**2 / (x**2 + lam**2)``, i.e. the density
``(lam / 2) * exp(-lam * |x|)`` with variance ``2 / lam**2``. A Laplace scale
``b`` in the ``exp(-|x| / b)`` convention corresponds to ``lam = 1 / b``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import BLOCK, QuantTable, SubbandMask, ac_mask, block_dct, build_mask, check_same_shape, to_blocks
from .errors import DegenerateError, NumericalError, ParameterError

log = logging.getLogger(__name__)

MAX_TERMS = 10**6
# subbands whose mean |coefficient| is below this are transform round-off, not signal
DEGENERATE_MEAN_ABS = 1e-9
_CHUNK = 512


def _uncentered_corr(a: np.ndarray, b: np.ndarray) -> float:
    den = np.sqrt((a @ a) * (b @ b))
    if den == 0:
        raise DegenerateError("all retained coefficients are zero")
    return float(np.clip(a @ b / den, -1.0, 1.0))


def _check_ac(mask: SubbandMask) -> None:
    if mask.includes_dc:
        raise ParameterError("mask must exclude the DC subband")


def dct_domain_correlation(u, v, mask: SubbandMask) -> float:
    """Correlation of ``apply_mask(u, mask)`` and ``apply_mask(v, mask)`` from DCT coefficients.

    With DC removed every filtered block is zero-mean, so Pearson's coefficient
    reduces to ``sum(U V) / sqrt(sum U^2 sum V^2)`` over the retained AC terms.
    """
    _check_ac(mask)
    yu, yv = block_dct(u), block_dct(v)
    check_same_shape(yu, yv)
    sel = mask.tile(yu.shape)
    return _uncentered_corr(yu[sel], yv[sel])


def _cutoff_mask(c) -> SubbandMask:
    return ac_mask() if c is None else build_mask(c)


def sample_r(uncompressed, compressed, c) -> float:
    """Sample correlation between the summed H_c-filtered image sets, evaluated on DCT coefficients.

    ``c=None`` selects all AC subbands.
    """
    if len(uncompressed) == 0 or len(uncompressed) != len(compressed):
        raise ParameterError("need equally long, non-empty image lists")
    mask = _cutoff_mask(c)
    _check_ac(mask)
    su = sum(block_dct(x) for x in uncompressed)
    sv = sum(block_dct(x) for x in compressed)
    check_same_shape(su, sv)
    sel = mask.tile(su.shape)
    return _uncentered_corr(su[sel], sv[sel])


# --------------------------------------------------------------------------
# Laplace subband models


def laplace_fit(coeffs) -> float:
    """ML Laplace scale for zero-median samples, returned as ``lam = 1 / mean(|x|)``."""
    x = np.asarray(coeffs, dtype=np.float64).ravel()
    if x.size < 2:
        raise ParameterError("need at least two samples")
    b = np.mean(np.abs(x))
    if b == 0:
        raise DegenerateError("all samples are zero")
    return float(1.0 / b)


@dataclass(frozen=True)
class LaplaceSubbandModel:
    """Per-image, per-subband ``lam`` values, shape ``(n_images, 8, 8)``; NaN marks DC or degenerate subbands."""

    scales: np.ndarray = field(repr=False)

    @property
    def n_images(self) -> int:
        return self.scales.shape[0]


def fit_subband_models(images) -> LaplaceSubbandModel:
    out = np.full((len(images), BLOCK, BLOCK), np.nan)
    for n, img in enumerate(images):
        blocks = to_blocks(block_dct(img)).reshape(-1, BLOCK, BLOCK)
        mean_abs = np.abs(blocks).mean(axis=0)
        with np.errstate(divide="ignore"):
            lam = np.where(mean_abs > DEGENERATE_MEAN_ABS, 1.0 / mean_abs, np.nan)
        lam[0, 0] = np.nan
        out[n] = lam
    return LaplaceSubbandModel(out)


# --------------------------------------------------------------------------
# quantization moments


def quant_moments(lam, q, tol: float = 1e-12, max_terms: int = MAX_TERMS):
    """Variance of U, variance of its quantized version V, and Cov(U, V).

    ``V = floor(U/q + 0.5) * q`` with U zero-mean Laplace(``lam``). Broadcasts over
    array inputs. Alternating series are summed in consecutive (odd, even) pairs
    until the estimated remaining tail falls below ``tol * Var(U)``. Pair sums
    decay polynomially, so the tail is bounded by the last pair times its index.
    """
    lam, q = np.broadcast_arrays(np.asarray(lam, dtype=np.float64), np.asarray(q, dtype=np.float64))
    if np.any(lam <= 0) or np.any(q <= 0):
        raise ParameterError("lam and q must be positive")
    scalar = lam.ndim == 0
    lam, q = lam.ravel(), q.ravel()
    var_u = 2.0 / lam**2
    lam2 = lam**2
    s_phi = np.zeros_like(lam)
    s_dphi = np.zeros_like(lam)
    active = np.ones(lam.shape, dtype=bool)
    k0 = 1
    while active.any():
        if k0 > max_terms:
            raise NumericalError(f"quantization series did not converge within {max_terms} terms")
        k = np.arange(k0, k0 + _CHUNK, dtype=np.float64)[None, :]
        la, qa = lam2[active][:, None], q[active][:, None]
        x = 2.0 * np.pi * k / qa
        den = x * x + la
        phi = la / den
        dphi = -2.0 * x * la / (den * den)
        sign = np.where(k % 2 == 1, -1.0, 1.0)  # (-1)^k
        t_phi = phi * sign / (k * k)
        t_dphi = -dphi * sign / k  # (-1)^(k+1) / k
        s_phi[active] += t_phi.sum(axis=1)
        s_dphi[active] += t_dphi.sum(axis=1)
        # magnitude of the last (odd, even) pair of each series, in Var(U)-relative units
        pair = np.maximum(
            np.abs(qa[:, 0] ** 2 / np.pi**2 * (t_phi[:, -2] + t_phi[:, -1])),
            np.abs(2 * qa[:, 0] / np.pi * (t_dphi[:, -2] + t_dphi[:, -1])),
        )
        done = pair * (k0 + _CHUNK) < tol * var_u[active]
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        k0 += _CHUNK
    var_plus = var_u + q**2 / 12.0 + q**2 / np.pi**2 * s_phi + 2.0 * q / np.pi * s_dphi
    cov_plus = var_u + q / np.pi * s_dphi
    # both are non-negative (a monotone quantizer is positively associated); clear round-off
    var_plus, cov_plus = np.maximum(var_plus, 0.0), np.maximum(cov_plus, 0.0)
    if scalar:
        return float(var_u[0]), float(var_plus[0]), float(cov_plus[0])
    return var_u, var_plus, cov_plus


@dataclass(frozen=True)
class BoundReport:
    c: int | None
    quality: int | None
    rho: float
    r: float
    n_images: int = 0


def population_rho(models: LaplaceSubbandModel, table: QuantTable, c, tol: float = 1e-12) -> float:
    """Population correlation between summed uncompressed and quantized subbands.

    Sums ``Cov+`` over (image, subband in S_c) and normalises by the square roots
    of the summed ``Var`` and ``Var+``. DC and degenerate subbands are skipped.
    """
    mask = _cutoff_mask(c)
    _check_ac(mask)
    lam = models.scales[:, mask.bits]
    q = np.broadcast_to(table.q[mask.bits].astype(np.float64), lam.shape)
    valid = np.isfinite(lam)
    if not valid.any():
        raise DegenerateError("no retained subband has a model")
    dropped = int((~valid).sum())
    if dropped:
        log.info("population_rho: dropped %d degenerate (image, subband) pairs", dropped)
    var_u, var_plus, cov_plus = quant_moments(lam[valid], q[valid], tol)
    return float(cov_plus.sum() / (np.sqrt(var_u.sum()) * np.sqrt(var_plus.sum())))


def write_bound_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_images", "quality", "c", "rho", "r"])
        for rep in reports:
            w.writerow([rep.n_images, rep.quality, "full" if rep.c is None else rep.c, repr(rep.rho), repr(rep.r)])
