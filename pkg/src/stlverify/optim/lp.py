"""Linear programming.

Two backends sit behind :func:`lp_solve`: the HiGHS solver shipped with scipy
(default, fast) and a small two-phase tableau simplex written here, which is
used for cross-checking and when scipy is unwanted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-8


class LpError(RuntimeError):
    """Raised when a solver fails numerically (as opposed to infeasible/unbounded)."""


@dataclass
class LinearProgram:
    """``min c @ x`` s.t. ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``, ``lb <= x <= ub``.

    Missing bounds default to free variables. ``None`` constraint blocks mean
    no constraints of that kind.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _block(self.A_ub, self.b_ub, n, "ub")
        self.A_eq, self.b_eq = _block(self.A_eq, self.b_eq, n, "eq")
        self.lb = np.full(n, -np.inf) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()

    @property
    def n(self) -> int:
        return self.c.size


def _block(A, b, n, tag):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[1] != n or A.shape[0] != b.size:
            raise ValueError(f"A_{tag} has shape {A.shape}, expected ({b.size}, {n})")
        return A, b
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.size == 0:
        A = A.reshape(0, n)
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"A_{tag} has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def lp_solve(lp: LinearProgram, method: str = "highs") -> LpResult:
    """Solve ``lp``; ``method`` is ``"highs"`` or ``"simplex"`` (in-house)."""
    if method == "highs":
        return _solve_highs(lp)
    if method == "simplex":
        return simplex_solve(lp)
    raise ValueError(f"unknown LP method {method!r}")


def _solve_highs(lp: LinearProgram) -> LpResult:
    bounds = np.column_stack([lp.lb, lp.ub])
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in bounds]
    res = linprog(
        lp.c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        return LpResult("optimal", np.asarray(res.x), float(res.fun))
    if res.status == 2:
        return LpResult("infeasible")
    if res.status == 3:
        return LpResult("unbounded")
    raise LpError(f"HiGHS failed: {res.message}")


# ---------------------------------------------------------------------------
# in-house two-phase tableau simplex


def simplex_solve(lp: LinearProgram, max_iter: int = 50_000) -> LpResult:
    """Two-phase dense tableau simplex.

    Dantzig pricing, switching to Bland's rule after a degenerate pivot so the
    method cannot cycle.
    """
    n = lp.n
    A_ub_in = lp.A_ub.toarray() if sp.issparse(lp.A_ub) else lp.A_ub
    A_eq_in = lp.A_eq.toarray() if sp.issparse(lp.A_eq) else lp.A_eq
    # x = shift + S @ y with y >= 0; free variables are split in two.
    cols, shift = [], np.zeros(n)
    extra_ub = []  # (column index in y, upper bound on y)
    for i in range(n):
        lo, hi = lp.lb[i], lp.ub[i]
        if np.isfinite(lo):
            shift[i] = lo
            cols.append((i, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[i] = hi
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    ny = len(cols)
    S = np.zeros((n, ny))
    for k, (i, s) in enumerate(cols):
        S[i, k] = s

    if any(hi < -FEAS_TOL for _, hi in extra_ub):
        return LpResult("infeasible")

    A_ub = A_ub_in @ S
    b_ub = lp.b_ub - A_ub_in @ shift
    if extra_ub:
        E = np.zeros((len(extra_ub), ny))
        for r, (k, hi) in enumerate(extra_ub):
            E[r, k] = 1.0
        A_ub = np.vstack([A_ub, E])
        b_ub = np.concatenate([b_ub, [hi for _, hi in extra_ub]])
    A_eq = A_eq_in @ S
    b_eq = lp.b_eq - A_eq_in @ shift
    cy = S.T @ lp.c
    const = float(lp.c @ shift)

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    # standard form: [A_ub I; A_eq 0] [y; s] = b
    A = np.zeros((m_ub + m_eq, ny + m_ub))
    A[:m_ub, :ny] = A_ub
    A[:m_ub, ny:] = np.eye(m_ub)
    A[m_ub:, :ny] = A_eq
    b = np.concatenate([b_ub, b_eq])
    c_std = np.concatenate([cy, np.zeros(m_ub)])

    status, z = _two_phase(A, b, c_std, max_iter)
    if status != "optimal":
        return LpResult(status)
    x = shift + S @ z[:ny]
    return LpResult("optimal", x, float(cy @ z[:ny]) + const)


def _two_phase(A, b, c, max_iter):
    m, nv = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1 with one artificial per row
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = A
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(nv, nv + m))
    cost1 = np.concatenate([np.zeros(nv), np.ones(m)])
    _set_objective(T, cost1, basis)
    if _pivot_loop(T, basis, max_iter) == "unbounded":
        raise LpError("phase 1 unbounded; should be impossible")
    if -T[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return "infeasible", None

    # drive artificials out of the basis
    for r, bv in enumerate(basis):
        if bv >= nv:
            row = T[r, :nv]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _pivot(T, basis, r, int(cand[0]))
    keep = [r for r, bv in enumerate(basis) if bv < nv]
    T = np.vstack([T[keep][:, list(range(nv)) + [T.shape[1] - 1]], np.zeros((1, nv + 1))])
    basis = [basis[r] for r in keep]

    _set_objective(T, c, basis)
    if _pivot_loop(T, basis, max_iter) == "unbounded":
        return "unbounded", None
    z = np.zeros(nv)
    for r, bv in enumerate(basis):
        z[bv] = T[r, -1]
    return "optimal", z


def _set_objective(T, cost, basis):
    T[-1, :] = 0.0
    T[-1, : cost.size] = cost
    for r, bv in enumerate(basis):
        T[-1] -= T[-1, bv] * T[r]


def _pivot(T, basis, r, col):
    T[r] /= T[r, col]
    for i in range(T.shape[0]):
        if i != r and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[r]
    basis[r] = col


def _pivot_loop(T, basis, max_iter):
    bland = False
    for _ in range(max_iter):
        red = T[-1, :-1]
        if bland:
            cand = np.flatnonzero(red < -1e-10)
            if cand.size == 0:
                return "optimal"
            col = int(cand[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -1e-10:
                return "optimal"
        colv = T[:-1, col]
        pos = colv > 1e-10
        if not pos.any():
            return "unbounded"
        ratios = np.full(colv.size, np.inf)
        ratios[pos] = T[:-1, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12)
        # Bland: leaving variable with smallest index among ties
        r = int(min(ties, key=lambda i: basis[i]))
        if best <= 1e-12:
            bland = True
        _pivot(T, basis, r, col)
    raise LpError("simplex iteration limit reached (cycling guard)")
