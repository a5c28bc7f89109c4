"""Noise residuals, PRNU fingerprint estimators and similarity scoring."""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pywt
from scipy import stats
from scipy.ndimage import uniform_filter
from scipy.optimize import brentq

from .core import SubbandMask, apply_mask, as_plane, check_same_shape
from .errors import DegenerateError, ParameterError, ShapeError

MIN_DENOISE_SIZE = 64
WIENER_WINDOWS = (3, 5, 7, 9)
PCE_EXCLUDE = 11


def _wiener(coef: np.ndarray, noise_var: float) -> np.ndarray:
    energy = coef * coef
    local = np.stack([uniform_filter(energy, w, mode="mirror") for w in WIENER_WINDOWS])
    est = np.maximum(local - noise_var, 0.0).min(axis=0)
    return coef * est / (est + noise_var)


def denoise(img, sigma0: float = 5.0, levels: int = 4, wavelet: str = "db4") -> np.ndarray:
    """Wavelet-domain locally adaptive Wiener denoiser.

    Detail subbands of a ``levels``-deep orthogonal decomposition (8-tap
    Daubechies by default) are attenuated by ``v / (v + sigma0**2)`` where ``v``
    is the smallest local signal-variance estimate over 3..9 square windows.
    """
    x = as_plane(img)
    if sigma0 <= 0:
        raise ParameterError("sigma0 must be positive")
    if min(x.shape) < MIN_DENOISE_SIZE:
        raise ShapeError(f"denoising needs at least {MIN_DENOISE_SIZE}x{MIN_DENOISE_SIZE} pixels, got {x.shape}")
    noise_var = float(sigma0) ** 2
    with warnings.catch_warnings():
        # periodization is exact on small planes; pywt still warns about the filter length
        warnings.filterwarnings("ignore", message="Level value", category=UserWarning)
        coeffs = pywt.wavedec2(x, wavelet, mode="periodization", level=levels)
    out = [coeffs[0]]
    for detail in coeffs[1:]:
        out.append(tuple(_wiener(d, noise_var) for d in detail))
    return pywt.waverec2(out, wavelet, mode="periodization")[: x.shape[0], : x.shape[1]]


def noise_residual(img, sigma0: float = 5.0) -> np.ndarray:
    x = as_plane(img)
    return x - denoise(x, sigma0)


@dataclass(frozen=True)
class NoiseResidual:
    plane: np.ndarray = field(repr=False)
    source_id: str = ""


@dataclass(frozen=True)
class Fingerprint:
    plane: np.ndarray = field(repr=False)
    estimator: str = "ml"
    n_images: int = 0
    cleaned: bool = False
    degenerate: bool = False

    @property
    def shape(self):
        return self.plane.shape


class FingerprintAccumulator:
    """Order-insensitive running sums for the ML estimator, mergeable across workers."""

    def __init__(self, shape):
        self.num = np.zeros(shape)
        self.den = np.zeros(shape)
        self.n = 0

    def add(self, image, residual) -> None:
        image = np.asarray(image, dtype=np.float64)
        residual = np.asarray(residual, dtype=np.float64)
        check_same_shape(image, residual, self.num)
        self.num += residual * image
        self.den += image * image
        self.n += 1

    def merge(self, other: "FingerprintAccumulator") -> "FingerprintAccumulator":
        check_same_shape(self.num, other.num)
        self.num += other.num
        self.den += other.den
        self.n += other.n
        return self

    def finalize(self, clean: bool = False) -> Fingerprint:
        if self.n == 0:
            raise ParameterError("no images accumulated")
        zero = self.den == 0
        k = np.divide(self.num, self.den, out=np.zeros_like(self.num), where=~zero)
        fp = Fingerprint(k, "ml", self.n, False, bool(zero.all()))
        return clean_fingerprint(fp) if clean else fp


def estimate_fingerprint_ml(images, sigma0: float = 5.0, residuals=None, clean: bool = False) -> Fingerprint:
    """Maximum-likelihood PRNU estimate ``sum(W_k I_k) / sum(I_k^2)``.

    Pixels with a zero denominator get 0; an all-dark input is flagged ``degenerate``.
    """
    images = [as_plane(im) for im in images]
    if not images:
        raise ParameterError("need at least one image")
    if residuals is None:
        residuals = [noise_residual(im, sigma0) for im in images]
    if len(residuals) != len(images):
        raise ParameterError("images and residuals differ in length")
    acc = FingerprintAccumulator(images[0].shape)
    for im, w in zip(images, residuals):
        acc.add(im, w.plane if isinstance(w, NoiseResidual) else w)
    return acc.finalize(clean)


def estimate_fingerprint_mean(residuals) -> Fingerprint:
    planes = [np.asarray(r.plane if isinstance(r, NoiseResidual) else r, dtype=np.float64) for r in residuals]
    if not planes:
        raise ParameterError("need at least one residual")
    check_same_shape(*planes)
    return Fingerprint(np.mean(planes, axis=0), "mean", len(planes), False)


def clean_fingerprint(fp: Fingerprint) -> Fingerprint:
    """Zero-mean rows, then columns (removes constant and row/column-periodic artifacts)."""
    k = fp.plane - fp.plane.mean(axis=1, keepdims=True)
    k = k - k.mean(axis=0, keepdims=True)
    return replace(fp, plane=k, cleaned=True)


# --------------------------------------------------------------------------
# similarity


def ncc(a, b) -> float:
    """Pearson correlation of two equally shaped planes."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise DegenerateError("correlation undefined for constant input")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cross_correlation(a, b) -> np.ndarray:
    """Circular normalized cross-correlation; entry ``s`` correlates ``a`` with ``b`` shifted by ``s``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    a = a - a.mean()
    b = b - b.mean()
    norm = np.sqrt((a * a).sum() * (b * b).sum())
    if norm == 0:
        raise DegenerateError("cross-correlation undefined for constant input")
    cc = np.fft.irfft2(np.fft.rfft2(a) * np.conj(np.fft.rfft2(b)), s=a.shape)
    return cc / norm


def _exclusion_mask(shape, size: int = PCE_EXCLUDE) -> np.ndarray:
    r = size // 2
    keep = np.ones(shape, dtype=bool)
    rows = np.arange(-r, r + 1) % shape[0]
    cols = np.arange(-r, r + 1) % shape[1]
    keep[np.ix_(rows, cols)] = False
    return keep


def pce_from_cc(cc: np.ndarray, exclude: int = PCE_EXCLUDE) -> float:
    peak = cc[0, 0]
    energy = np.mean(cc[_exclusion_mask(cc.shape, exclude)] ** 2)
    if energy == 0:
        raise DegenerateError("zero off-peak correlation energy")
    return float(np.sign(peak) * peak * peak / energy)


def pce(residual, template, exclude: int = PCE_EXCLUDE) -> float:
    """Signed peak-to-correlation energy with the peak taken at zero shift."""
    return pce_from_cc(cross_correlation(residual, template), exclude)


MEASURES = {"ncc": ncc, "pce": pce}


@dataclass(frozen=True)
class SimilarityReport:
    measure: str
    value: float
    threshold: float
    decision: bool
    cutoff_c: int | None = None


def score(residual, query, fp: Fingerprint, mask: SubbandMask | None = None, measure: str = "pce") -> float:
    """Similarity between a query residual and ``query * K``, optionally restricted by ``mask``."""
    if measure not in MEASURES:
        raise ParameterError(f"unknown similarity measure {measure!r}")
    query = np.asarray(query, dtype=np.float64)
    check_same_shape(residual, query, fp.plane)
    template = query * fp.plane
    if mask is not None:
        residual = apply_mask(residual, mask)
        template = apply_mask(template, mask)
    return MEASURES[measure](residual, template)


def identify(query, fp: Fingerprint, mask: SubbandMask | None = None, measure: str = "pce",
             threshold: float = 0.0, sigma0: float = 5.0, residual=None) -> SimilarityReport:
    query = as_plane(query)
    if residual is None:
        residual = noise_residual(query, sigma0)
    value = score(residual, query, fp, mask, measure)
    cutoff = mask.cutoff if mask is not None else None
    return SimilarityReport(measure, value, float(threshold), bool(value > threshold), cutoff)


# --------------------------------------------------------------------------
# threshold calibration


def kde_threshold(negatives, fpr: float = 1e-3) -> float:
    """Threshold whose upper-tail mass under a Gaussian KDE of ``negatives`` equals ``fpr``."""
    neg = np.asarray(negatives, dtype=np.float64).ravel()
    if neg.size < 2 or np.ptp(neg) == 0:
        raise DegenerateError("need at least two distinct negative scores")
    if not 0 < fpr < 1:
        raise ParameterError("fpr must lie in (0, 1)")
    kde = stats.gaussian_kde(neg)
    bw = float(np.sqrt(kde.covariance[0, 0]))

    def tail(t):
        return float(np.mean(stats.norm.sf((t - neg) / bw))) - fpr

    lo, hi = neg.min() - 10 * bw, neg.max() + 10 * bw
    while tail(hi) > 0:
        hi += 10 * bw
    return float(brentq(tail, lo, hi, xtol=1e-10 * max(1.0, abs(hi))))


# --------------------------------------------------------------------------
# serialization

_MAGIC = b"KFP1"
_ESTIMATOR_CODES = {"ml": 0, "mean": 1}
_CLEANED_FLAG = 0x100


def save_fingerprint(fp: Fingerprint, path) -> None:
    """16-byte header (magic, height, width, estimator code) + little-endian float64 row-major."""
    h, w = fp.shape
    code = _ESTIMATOR_CODES[fp.estimator] | (_CLEANED_FLAG if fp.cleaned else 0)
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<III", h, w, code))
        fh.write(np.ascontiguousarray(fp.plane, dtype="<f8").tobytes())


def load_fingerprint(path) -> Fingerprint:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != _MAGIC:
        raise ParameterError(f"{path}: not a fingerprint file")
    h, w, code = struct.unpack("<III", data[4:16])
    if len(data) != 16 + 8 * h * w:
        raise ParameterError(f"{path}: truncated fingerprint payload")
    names = {v: k for k, v in _ESTIMATOR_CODES.items()}
    plane = np.frombuffer(data, dtype="<f8", offset=16).reshape(h, w).astype(np.float64)
    return Fingerprint(plane, names[code & 0xFF], 0, bool(code & _CLEANED_FLAG))
