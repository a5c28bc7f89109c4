"""Fingerprint-copy attack and LP recovery of zero-quantized DCT coefficients."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import (BLOCK, DCT8, SubbandMask, apply_mask, as_plane, block_idct, build_low_mask, build_mask,
                   check_same_shape, jpeg_compress, jpeg_decompress)
from .errors import InfeasibleError, ParameterError
from .fingerprint import Fingerprint, estimate_fingerprint_ml, ncc
from .simplex import solve_bounded_lp

# --------------------------------------------------------------------------
# fingerprint-copy attack


@dataclass(frozen=True)
class CopyAttackConfig:
    alpha: float = 1.0
    clamp: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError("alpha must be non-negative")


def copy_attack(j, fp_e: Fingerprint, cfg: CopyAttackConfig) -> np.ndarray:
    """Plant ``fp_e`` into ``j``: ``J' = J * (1 + alpha * K_E)``."""
    j = np.asarray(j, dtype=np.float64)
    check_same_shape(j, fp_e.plane)
    out = j * (1.0 + cfg.alpha * fp_e.plane)
    return np.clip(out, 0.0, 255.0) if cfg.clamp else out


def alpha_grid(n: int = 40, lo: float = 1e-3, hi: float = 1e2) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


# --------------------------------------------------------------------------
# DCT recovery

X_BOUNDS = (-128.0, 127.0)
Y_BOUNDS = (-1024.0, 1024.0)


@dataclass(frozen=True)
class RecoveryProblem:
    """One target block plus its direct neighbours (a window of up to 3x3 blocks).

    ``coeffs`` holds the known (dequantized, level-shifted) DCT coefficients of
    the window; entries flagged in ``free`` are unknowns to recover.
    """

    coeffs: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)
    target: tuple[int, int] = (1, 1)
    origin: tuple[int, int] = (0, 0)
    x_bounds: tuple[float, float] = X_BOUNDS
    y_bounds: tuple[float, float] = Y_BOUNDS

    def __post_init__(self):
        check_same_shape(self.coeffs, self.free)
        if self.coeffs.shape[0] % BLOCK or self.coeffs.shape[1] % BLOCK:
            raise ParameterError("window must consist of whole 8x8 blocks")

    @property
    def fixed(self) -> np.ndarray:
        return ~self.free


@dataclass
class RecoveryResult:
    coeffs: np.ndarray  # full window with free entries replaced
    pixels: np.ndarray  # level-shifted spatial window
    objective: float
    iterations: int
    lp_x: np.ndarray = field(repr=False, default=None)
    n_pairs: int = 0

    def block(self, target) -> np.ndarray:
        r, c = target
        return self.coeffs[r * BLOCK : (r + 1) * BLOCK, c * BLOCK : (c + 1) * BLOCK]


def recovery_problem(coeffs, free, block: tuple[int, int], **bounds) -> RecoveryProblem:
    """Cut the window around ``block`` (block-row, block-col) out of full coefficient/free planes."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    free = np.asarray(free, dtype=bool)
    check_same_shape(coeffs, free)
    nr, nc = coeffs.shape[0] // BLOCK, coeffs.shape[1] // BLOCK
    br, bc = block
    r0, r1 = max(br - 1, 0), min(br + 2, nr)
    c0, c1 = max(bc - 1, 0), min(bc + 2, nc)
    sl = np.s_[r0 * BLOCK : r1 * BLOCK, c0 * BLOCK : c1 * BLOCK]
    return RecoveryProblem(coeffs[sl].copy(), free[sl].copy(), (br - r0, bc - c0), (r0, c0), **bounds)


def neighbor_pairs(shape) -> np.ndarray:
    """Flat-index pairs of 4-connected horizontal and vertical neighbours."""
    idx = np.arange(shape[0] * shape[1]).reshape(shape)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([horiz, vert])


def _pixel_basis(p: RecoveryProblem):
    """Fixed-part pixels ``a`` and the pixel response ``B`` (n_pixels x n_free) of each free coefficient."""
    h, w = p.coeffs.shape
    fixed_part = np.where(p.free, 0.0, p.coeffs)
    a = block_idct(fixed_part).ravel()
    rows, cols = np.nonzero(p.free)
    B = np.zeros((h * w, rows.size))
    for k, (r, c) in enumerate(zip(rows, cols)):
        br, bc = r // BLOCK, c // BLOCK
        u, v = r % BLOCK, c % BLOCK
        patch = np.outer(DCT8[u], DCT8[v])
        pix = np.zeros((h, w))
        pix[br * BLOCK : (br + 1) * BLOCK, bc * BLOCK : (bc + 1) * BLOCK] = patch
        B[:, k] = pix.ravel()
    return a, B, rows, cols


def recovery_objective(p: RecoveryProblem, coeffs=None) -> float:
    """Sum of absolute 4-neighbour differences of the window's pixels."""
    y = p.coeffs if coeffs is None else coeffs
    x = block_idct(y).ravel()
    pairs = neighbor_pairs(p.coeffs.shape)
    return float(np.abs(x[pairs[:, 0]] - x[pairs[:, 1]]).sum())


def _dual_recovery(G, g0, max_iter):
    """Solve min_y sum|G y + g0| through its dual  max g0@u  s.t.  G.T u = 0, |u| <= 1.

    The simplex multipliers of the dual's equality rows are the primal ``y``.
    """
    res = solve_bounded_lp(-g0, G.T, np.zeros(G.shape[1]), -1.0, 1.0, x0=np.zeros(G.shape[0]),
                           max_iter=max_iter)
    return res.duals, res.iterations


def _primal_recovery(G, g0, B, a, bound_pix, p: RecoveryProblem, max_iter):
    ylo, yhi = p.y_bounds
    xlo, xhi = p.x_bounds
    P, nf = G.shape
    nb = len(bound_pix)
    m = P + nb
    n = nf + 2 * P + nb
    A = np.zeros((m, n))
    A[:P, :nf] = G
    A[np.arange(P), nf + np.arange(P)] = -1.0
    A[np.arange(P), nf + P + np.arange(P)] = 1.0
    b = np.zeros(m)
    b[:P] = -g0
    lo = np.concatenate([np.full(nf, ylo), np.zeros(2 * P), np.empty(nb)])
    hi = np.concatenate([np.full(nf, yhi), np.full(2 * P, np.inf), np.empty(nb)])
    x0 = np.zeros(n)
    x0[:nf] = np.clip(0.0, ylo, yhi)
    if nb:
        bp = np.asarray(bound_pix)
        A[P:, :nf] = B[bp]
        A[P + np.arange(nb), nf + 2 * P + np.arange(nb)] = -1.0
        lo[nf + 2 * P :] = xlo - a[bp]
        hi[nf + 2 * P :] = xhi - a[bp]
        x0[nf + 2 * P :] = np.clip(0.0, lo[nf + 2 * P :], hi[nf + 2 * P :])
    cost = np.concatenate([np.zeros(nf), np.ones(2 * P), np.zeros(nb)])
    res = solve_bounded_lp(cost, A, b, lo, hi, x0=x0, max_iter=max_iter)
    return res.x[:nf], res.iterations, res.x


def solve_recovery(p: RecoveryProblem, method: str = "dual", max_iter: int = 100_000,
                   max_rounds: int = 20) -> RecoveryResult:
    """Minimise the window's total 4-neighbour variation over the free coefficients.

    ``method="dual"`` solves the small dual LP and falls back to the primal
    formulation only if the unconstrained optimum leaves the pixel or
    coefficient box. The primal path adds pixel-bound rows lazily for every
    pixel the previous solution pushed out of range; its final point satisfies
    all bounds and is therefore optimal for the fully constrained problem.
    """
    if method not in ("dual", "primal"):
        raise ParameterError(f"unknown recovery method {method!r}")
    ylo, yhi = p.y_bounds
    xlo, xhi = p.x_bounds
    fixed_vals = p.coeffs[p.fixed]
    if fixed_vals.size and (fixed_vals.min() < ylo or fixed_vals.max() > yhi):
        raise InfeasibleError("fixed coefficients violate the coefficient bounds")
    h, w = p.coeffs.shape
    a, B, rows, cols = _pixel_basis(p)
    nf = rows.size
    if nf == 0:
        x = a.reshape(h, w)
        if x.min() < xlo - 1e-9 or x.max() > xhi + 1e-9:
            raise InfeasibleError("fixed coefficients produce out-of-range pixels")
        return RecoveryResult(p.coeffs.copy(), x, recovery_objective(p), 0, np.zeros(0), 0)

    pairs = neighbor_pairs((h, w))
    active_pix = np.abs(B).sum(axis=1) > 0
    pairs = pairs[active_pix[pairs[:, 0]] | active_pix[pairs[:, 1]]]
    G = B[pairs[:, 0]] - B[pairs[:, 1]]
    g0 = a[pairs[:, 0]] - a[pairs[:, 1]]

    def violations(y):
        pix = a + B @ y
        bad = active_pix & ((pix < xlo - 1e-7) | (pix > xhi + 1e-7))
        return pix, np.flatnonzero(bad)

    iterations = 0
    lp_x = None
    y = None
    if method == "dual":
        y, iterations = _dual_recovery(G, g0, max_iter)
        pix, viol = violations(y)
        if viol.size or y.min() < ylo - 1e-7 or y.max() > yhi + 1e-7:
            y = None
    if y is None:
        bound_pix: list[int] = []
        for _ in range(max_rounds):
            y, its, lp_x = _primal_recovery(G, g0, B, a, bound_pix, p, max_iter)
            iterations += its
            pix, viol = violations(y)
            viol = np.setdiff1d(viol, bound_pix)
            if viol.size == 0:
                break
            bound_pix.extend(int(v) for v in viol)
        else:
            raise InfeasibleError("pixel-bound refinement did not settle")
    out = p.coeffs.copy()
    out[rows, cols] = y
    return RecoveryResult(out, pix.reshape(h, w), recovery_objective(p, out), iterations, lp_x, len(pairs))


def recover_block(p: RecoveryProblem, **kwargs) -> np.ndarray:
    """Recovered 8x8 coefficient block for the problem's target block."""
    return solve_recovery(p, **kwargs).block(p.target)


def free_positions(coeffs, mask: SubbandMask) -> np.ndarray:
    """Zero-valued coefficients inside ``mask``: the unknowns of a recovery run."""
    coeffs = np.asarray(coeffs)
    return mask.tile(coeffs.shape) & (coeffs == 0)


def recover_image(coeffs, mask: SubbandMask, **kwargs) -> np.ndarray:
    """Recover every block of a JPEG coefficient plane; each block is solved with its own window."""
    coeffs = as_plane(coeffs, "coefficients")
    free = free_positions(coeffs, mask)
    out = coeffs.copy()
    nr, nc = coeffs.shape[0] // BLOCK, coeffs.shape[1] // BLOCK
    for br in range(nr):
        for bc in range(nc):
            sl = np.s_[br * BLOCK : (br + 1) * BLOCK, bc * BLOCK : (bc + 1) * BLOCK]
            if not free[sl].any():
                continue
            out[sl] = recover_block(recovery_problem(coeffs, free, (br, bc)), **kwargs)
    return out


def recovery_mask(c: int, scope: str = "high") -> SubbandMask:
    if scope == "high":
        return build_mask(c)
    if scope == "low":
        return build_low_mask(c)
    raise ParameterError(f"unknown recovery scope {scope!r}")


# --------------------------------------------------------------------------
# sign contingency

SIGN_LABELS = ("neg", "zero", "pos")


@dataclass(frozen=True)
class SignContingency:
    """Joint fractions; rows index the true (uncompressed) sign, columns the predicted sign."""

    table: np.ndarray
    n: int = 0

    @property
    def diagonal(self) -> float:
        return float(np.trace(self.table))


def sign_class(x, zero_band: float = 0.25) -> np.ndarray:
    x = np.asarray(x)
    return np.where(x < -zero_band, 0, np.where(x > zero_band, 2, 1))


def sign_contingency(recovered, original, mask: SubbandMask | None = None, zero_band: float = 0.25,
                     select=None) -> SignContingency:
    """Tabulate sign agreement over coefficients picked by ``select`` (default: all ``mask`` positions)."""
    recovered = np.asarray(recovered, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    check_same_shape(recovered, original)
    if select is None:
        select = mask.tile(recovered.shape) if mask is not None else np.ones(recovered.shape, bool)
    tc = sign_class(original[select], zero_band)
    pc = sign_class(recovered[select], zero_band)
    counts = np.zeros((3, 3))
    np.add.at(counts, (tc, pc), 1)
    n = int(counts.sum())
    return SignContingency(counts / n if n else counts, n)


def merge_contingencies(tables) -> SignContingency:
    counts = sum(t.table * t.n for t in tables)
    n = sum(t.n for t in tables)
    return SignContingency(counts / n if n else counts, n)


def write_contingency(path, table: SignContingency, extra: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list((extra or {}).keys()) + ["true_sign", "pred_sign", "fraction"])
        for i, t in enumerate(SIGN_LABELS):
            for j, s in enumerate(SIGN_LABELS):
                w.writerow(list((extra or {}).values()) + [t, s, repr(float(table.table[i, j]))])


# --------------------------------------------------------------------------


def recovery_fingerprint_delta(images, fp_alice_fragile: Fingerprint, c: int, quality: int,
                               scope: str = "high", sigma0: float = 5.0, **kwargs):
    """Correlation of Mallory's H_c-filtered fingerprint with Alice's, before and after recovery."""
    if len(images) == 0:
        raise ParameterError("need at least one image")
    mask = recovery_mask(c, scope)
    coeffs = [jpeg_compress(im, quality) for im in images]
    before = [jpeg_decompress(y) for y in coeffs]
    after = [jpeg_decompress(recover_image(y, mask, **kwargs)) for y in coeffs]
    hc = build_mask(c)
    ref = apply_mask(fp_alice_fragile.plane, hc)
    fp_b = estimate_fingerprint_ml(before, sigma0)
    fp_a = fp_b if all(np.array_equal(x, y) for x, y in zip(before, after)) else estimate_fingerprint_ml(after, sigma0)
    return ncc(ref, apply_mask(fp_b.plane, hc)), ncc(ref, apply_mask(fp_a.plane, hc))
