"""Dense bounded-variable primal simplex.

Solves ``min c@x  s.t.  A@x = b,  lo <= x <= hi`` on a full tableau. Nonbasic
variables may rest anywhere inside their bounds (a variable without finite
bounds starts at 0), which lets callers warm-start free variables at a known
feasible value. A slack crash picks singleton columns for the initial basis and
only rows it cannot cover get phase-1 artificials.

Pricing is Dantzig's largest reduced cost; after ``bland_after`` consecutive
degenerate pivots it switches to Bland's smallest-index rule until the objective
moves again, which rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .errors import InfeasibleError, NumericalError, SolverTimeout


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int
    basis: np.ndarray
    duals: np.ndarray
    status: str = "optimal"


class _Tableau:
    def __init__(self, A, b, lo, hi, x0, tol):
        m, n = A.shape
        self.tol = tol
        x = np.clip(x0, lo, hi)
        resid = b - A @ x
        nz = A != 0
        counts = nz.sum(axis=0)
        basis = np.full(m, -1)
        for j in np.flatnonzero(counts == 1):
            i = int(np.flatnonzero(nz[:, j])[0])
            if basis[i] >= 0:
                continue
            v = x[j] + resid[i] / A[i, j]
            if lo[j] - tol <= v <= hi[j] + tol:
                basis[i] = j
                x[j] = v
        art_rows = np.flatnonzero(basis < 0)
        n_art = len(art_rows)
        # artificial columns: +-e_i so that the artificial starts non-negative
        art = np.zeros((m, n_art))
        for k, i in enumerate(art_rows):
            art[i, k] = 1.0 if resid[i] >= 0 else -1.0
            basis[i] = n + k
        self.A = np.hstack([A, art])
        self.lo = np.concatenate([lo, np.zeros(n_art)])
        self.hi = np.concatenate([hi, np.full(n_art, np.inf)])
        self.x = np.concatenate([x, np.abs(resid[art_rows])])
        self.n, self.n_art = n, n_art
        self.basis = basis
        diag = self.A[np.arange(m), basis]
        self.T = np.ascontiguousarray(self.A / diag[:, None])
        self.is_basic = np.zeros(n + n_art, dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0

    def objective_row(self, cost):
        self.cost = cost
        self.d = cost - cost[self.basis] @ self.T

    def run(self, max_iter, bland_after):
        tol = self.tol
        T, x, lo, hi = self.T, self.x, self.lo, self.hi
        degenerate = 0
        while True:
            d = self.d
            up = (d < -tol) & (x < hi - tol) & ~self.is_basic
            down = (d > tol) & (x > lo + tol) & ~self.is_basic
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return
            if self.iterations >= max_iter:
                raise SolverTimeout(f"simplex iteration cap {max_iter} reached")
            self.iterations += 1
            bland = degenerate >= bland_after
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if up[j] else -1.0
            alpha = T[:, j] * direction
            xb = x[self.basis]
            lob, hib = lo[self.basis], hi[self.basis]
            ratios = np.full(alpha.shape, np.inf)
            pos, neg = alpha > tol, alpha < -tol
            ratios[pos] = (xb[pos] - lob[pos]) / alpha[pos]
            ratios[neg] = (hib[neg] - xb[neg]) / -alpha[neg]
            np.maximum(ratios, 0.0, out=ratios)
            own = hi[j] - x[j] if direction > 0 else x[j] - lo[j]
            t_row = ratios.min() if ratios.size else np.inf
            t = min(own, t_row)
            if not np.isfinite(t):
                raise NumericalError("linear program is unbounded")
            degenerate = degenerate + 1 if t <= tol else 0
            x[self.basis] = xb - t * alpha
            x[j] += direction * t
            if own <= t_row:
                continue
            ties = np.flatnonzero(ratios <= t_row + tol)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            x[leaving] = lob[r] if alpha[r] > 0 else hib[r]
            self._pivot(r, j)
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[r] = j

    def _pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        # in-place rank-1 update through BLAS; T.T is the Fortran view of the C-ordered tableau
        dger(-1.0, T[r].copy(), col, a=T.T, overwrite_a=1)
        self.d -= self.d[j] * T[r]
        self.d[j] = 0.0

    def refresh(self, b):
        """Recompute basic values from the original data to shed accumulated round-off."""
        nb = ~self.is_basic
        rhs = b - self.A[:, nb] @ self.x[nb]
        B = self.A[:, self.basis]
        self.x[self.basis] = np.linalg.solve(B, rhs)


def solve_bounded_lp(c, A, b, lo, hi, x0=None, max_iter: int = 100_000, tol: float = 1e-9,
                     bland_after: int = 50) -> LPResult:
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = A.shape
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (n,)).copy()
    if np.any(lo > hi):
        raise InfeasibleError("variable with lower bound above upper bound")
    if x0 is None:
        x0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    tab = _Tableau(A, b, lo, hi, np.asarray(x0, dtype=np.float64), tol)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    if tab.n_art and tab.x[n:].sum() <= tol * scale:
        # zero-valued artificials: fix them at 0 and let phase 2 pivot them out
        tab.hi[n:] = 0.0
        tab.x[n:] = 0.0
    elif tab.n_art:
        cost1 = np.zeros(n + tab.n_art)
        cost1[n:] = 1.0
        tab.objective_row(cost1)
        tab.run(max_iter, bland_after)
        infeas = tab.x[n:].sum()
        if infeas > 1e-7 * scale:
            raise InfeasibleError(f"no feasible point (residual infeasibility {infeas:.3g})")
        tab.hi[n:] = 0.0
        tab.x[n:] = np.where(tab.is_basic[n:], tab.x[n:], 0.0)

    cost = np.concatenate([c, np.zeros(tab.n_art)])
    tab.objective_row(cost)
    tab.run(max_iter, bland_after)
    tab.refresh(b)
    x = tab.x[:n].copy()
    duals = np.linalg.solve(tab.A[:, tab.basis].T, cost[tab.basis])
    return LPResult(x, float(c @ x), tab.iterations, tab.basis.copy(), duals)
