"""Blockwise 8x8 DCT, subband masks and JPEG quantization simulation.

Images, residuals and fingerprints are plain 2-D float64 numpy arrays whose
sides are multiples of 8. DCT planes have the same layout: block ``(r, c)``
of the plane holds the 64 coefficients of pixel block ``(r, c)``, with the
DC term at the block's top-left corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

BLOCK = 8
CUTOFF_MIN, CUTOFF_MAX = -6, 7

# JPEG Annex K luminance table (ITU-T T.81, Table K.1).
ANNEX_K_LUMINANCE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal type-II DCT matrix ``D`` so that ``Y = D @ X @ D.T``."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * m + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    d[0, :] = np.sqrt(1.0 / n)
    return d


DCT8 = dct_matrix()


def as_plane(img, name: str = "image") -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    h, w = a.shape
    if h == 0 or w == 0 or h % BLOCK or w % BLOCK:
        raise ShapeError(f"{name} dimensions {a.shape} must be positive multiples of {BLOCK}")
    return a


def check_same_shape(*planes: np.ndarray) -> None:
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise ShapeError(f"shape mismatch: {sorted(shapes)}")


def center_crop(img: np.ndarray, multiple: int = BLOCK) -> np.ndarray:
    h, w = img.shape[:2]
    nh, nw = h - h % multiple, w - w % multiple
    if nh == 0 or nw == 0:
        raise ShapeError(f"image {img.shape} smaller than one {multiple}x{multiple} block")
    top, left = (h - nh) // 2, (w - nw) // 2
    return img[top : top + nh, left : left + nw]


def to_blocks(plane: np.ndarray) -> np.ndarray:
    """View a ``(H, W)`` plane as ``(H/8, W/8, 8, 8)`` blocks."""
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    nr, nc = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(nr * BLOCK, nc * BLOCK)


def block_dct(img) -> np.ndarray:
    x = as_plane(img)
    return from_blocks(DCT8 @ to_blocks(x) @ DCT8.T)


def block_idct(coeffs) -> np.ndarray:
    y = as_plane(coeffs, "coefficients")
    return from_blocks(DCT8.T @ to_blocks(y) @ DCT8)


# --------------------------------------------------------------------------
# subband masks


@dataclass(frozen=True)
class SubbandMask:
    """Binary 8x8 selector over DCT subbands; ``bits[i-1, j-1]`` is ``h_{i,j}``."""

    bits: np.ndarray = field(repr=False)
    cutoff: int | None = None
    kind: str = "high"

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != (BLOCK, BLOCK):
            raise ShapeError(f"mask must be 8x8, got {b.shape}")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def includes_dc(self) -> bool:
        return bool(self.bits[0, 0])

    def complement(self) -> "SubbandMask":
        kind = {"high": "low", "low": "high"}.get(self.kind, self.kind)
        return SubbandMask(~self.bits, self.cutoff, kind)

    def tile(self, shape) -> np.ndarray:
        """Boolean plane of ``shape`` marking retained coefficient positions."""
        h, w = shape
        return np.tile(self.bits, (h // BLOCK, w // BLOCK))

    def __eq__(self, other):
        return isinstance(other, SubbandMask) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


def _check_cutoff(c) -> int:
    if isinstance(c, bool) or int(c) != c or not CUTOFF_MIN <= c <= CUTOFF_MAX:
        raise ParameterError(f"cutoff must be an integer in [{CUTOFF_MIN}, {CUTOFF_MAX}], got {c!r}")
    return int(c)


def build_mask(c: int) -> SubbandMask:
    """High-frequency mask H_c: keep subband (i, j) iff i + j - 8 - c > 0 (1-based)."""
    c = _check_cutoff(c)
    i = np.arange(1, BLOCK + 1)[:, None]
    j = np.arange(1, BLOCK + 1)[None, :]
    return SubbandMask((i + j - 8 - c) > 0, c, "high")


def build_low_mask(c: int) -> SubbandMask:
    return build_mask(c).complement()


def full_mask() -> SubbandMask:
    return SubbandMask(np.ones((BLOCK, BLOCK), dtype=bool), None, "full")


def ac_mask() -> SubbandMask:
    bits = np.ones((BLOCK, BLOCK), dtype=bool)
    bits[0, 0] = False
    return SubbandMask(bits, None, "ac")


def mask_for_cutoff(c) -> SubbandMask:
    """``None`` (full band) maps to the all-ones mask, integers to H_c."""
    return full_mask() if c is None else build_mask(c)


def retained_count(c: int) -> int:
    """Closed-form size of H_c: anti-diagonal k = i + j holds min(k-1, 17-k) subbands."""
    c = _check_cutoff(c)
    return sum(min(k - 1, 17 - k) for k in range(max(2, 9 + c), 17))


def apply_mask(plane, mask: SubbandMask) -> np.ndarray:
    """Blockwise projection IDCT(mask * DCT(plane))."""
    y = block_dct(plane)
    return block_idct(y * mask.tile(y.shape))


# --------------------------------------------------------------------------
# JPEG quantization


@dataclass(frozen=True)
class QuantTable:
    q: np.ndarray = field(repr=False)
    quality: int | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.int64)
        if q.shape != (BLOCK, BLOCK):
            raise ShapeError(f"quantization table must be 8x8, got {q.shape}")
        if q.min() < 1 or q.max() > 255:
            raise ParameterError("quantization factors must lie in [1, 255]")
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    def tile(self, shape) -> np.ndarray:
        h, w = shape
        return np.tile(self.q.astype(np.float64), (h // BLOCK, w // BLOCK))


def check_quality(quality) -> int:
    if isinstance(quality, bool) or int(quality) != quality or not 1 <= quality <= 100:
        raise ParameterError(f"JPEG quality must be an integer in [1, 100], got {quality!r}")
    return int(quality)


def quant_table_for_quality(quality: int) -> QuantTable:
    """Annex K luminance table under the conventional IJG quality scaling."""
    quality = check_quality(quality)
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    q = (ANNEX_K_LUMINANCE * scale + 50) // 100
    return QuantTable(np.clip(q, 1, 255), quality)


def quantize(u, q):
    """Round-half-up quantizer ``floor(u/q + 0.5) * q``; also for negative ``u``."""
    return np.floor(np.asarray(u) / q + 0.5) * q


def _table(quality_or_table) -> QuantTable:
    if isinstance(quality_or_table, QuantTable):
        return quality_or_table
    return quant_table_for_quality(quality_or_table)


def jpeg_compress(img, quality) -> np.ndarray:
    """Dequantized DCT coefficients of the level-shifted image (what a decoder sees)."""
    x = as_plane(img)
    table = _table(quality)
    y = block_dct(x - 128.0)
    return quantize(y, table.tile(y.shape))


def jpeg_decompress(coeffs) -> np.ndarray:
    return np.clip(block_idct(coeffs) + 128.0, 0.0, 255.0)


def jpeg_roundtrip(img, quality) -> np.ndarray:
    return jpeg_decompress(jpeg_compress(img, quality))
