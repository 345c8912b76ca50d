"""Binary branch and bound, and the counterexample MILP built on it.

The counterexample problem: find a factor vector in ``[-1, 1]^p`` that lies
outside every polytope of a list, with minimal 1-norm. Leaving polytope ``j``
means violating one of its rows; a binary per row selects which one.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from stlverify.optim.lp import LinearProgram, LpError, lp_solve

INT_TOL = 1e-6


class NodeLimitExceeded(RuntimeError):
    pass


@dataclass
class MilpResult:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None = None
    value: float | None = None
    nodes: int = 0
    alpha: np.ndarray | None = None


def milp_branch_and_bound(
    lp: LinearProgram,
    groups: Sequence[Sequence[int]],
    score: Callable[[np.ndarray, int], np.ndarray] | None = None,
    node_limit: int = 20_000,
    dive_nodes: int = 200,
) -> MilpResult:
    """Minimise ``lp`` with the variables in ``groups`` binary.

    Each group is a list of binary variable indices whose sum is fixed to one
    by ``lp`` itself. Branching takes the first group (in list order) with a
    fractional member and picks the member with the highest ``score(x, g)``
    (default: its relaxation value); the child fixing it to one is explored
    first. Search is depth-first until an incumbent exists or ``dive_nodes``
    nodes were spent, then best-bound.
    """
    binaries = np.array(sorted({i for g in groups for i in g}), dtype=int)
    base_lb, base_ub = lp.lb.copy(), lp.ub.copy()
    base_lb[binaries] = np.maximum(base_lb[binaries], 0.0)
    base_ub[binaries] = np.minimum(base_ub[binaries], 1.0)

    def relax(lb, ub):
        sub = LinearProgram(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lb, ub)
        return lp_solve(sub)

    incumbent: MilpResult | None = None
    counter = itertools.count()
    stack = [(base_lb, base_ub)]
    heap: list = []
    nodes = 0
    best_bound_mode = False

    while stack or heap:
        if best_bound_mode:
            bound, _, lb, ub = heapq.heappop(heap)
            if incumbent is not None and bound >= incumbent.value - 1e-9:
                continue
        else:
            lb, ub = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise NodeLimitExceeded(f"branch and bound exceeded {node_limit} nodes")
        res = relax(lb, ub)
        if res.status == "unbounded":
            raise LpError("MILP relaxation unbounded")
        if not res.optimal:
            continue
        if incumbent is not None and res.value >= incumbent.value - 1e-9:
            continue
        x = res.x
        branch = None
        for gi, g in enumerate(groups):
            vals = x[list(g)]
            if np.any((vals > INT_TOL) & (vals < 1 - INT_TOL)):
                branch = gi
                break
        if branch is None:
            xr = x.copy()
            xr[binaries] = np.round(xr[binaries])
            incumbent = MilpResult("optimal", xr, res.value)
            continue
        g = list(groups[branch])
        free = [i for i in g if ub[i] > lb[i]]
        s = score(x, branch) if score is not None else x[g]
        s = np.asarray(s, dtype=float)
        order = sorted(range(len(g)), key=lambda k: -s[k])
        pick = next(g[k] for k in order if g[k] in free)
        one_lb, one_ub = lb.copy(), ub.copy()
        one_lb[pick] = 1.0
        for i in g:
            if i != pick:
                one_ub[i] = 0.0
        zero_lb, zero_ub = lb.copy(), ub.copy()
        zero_ub[pick] = 0.0
        children = [(zero_lb, zero_ub), (one_lb, one_ub)]
        if best_bound_mode:
            for c in children:
                heapq.heappush(heap, (res.value, next(counter), *c))
        else:
            stack.extend(children)
            if incumbent is not None or nodes >= dive_nodes:
                best_bound_mode = True
                for c in stack:
                    heapq.heappush(heap, (res.value, next(counter), *c))
                stack = []

    if incumbent is None:
        return MilpResult("infeasible", nodes=nodes)
    incumbent.nodes = nodes
    return incumbent


@dataclass
class CounterexampleMilp:
    """Assembled counterexample MILP (see :func:`build_counterexample_milp`)."""

    p: int
    polys: list  # (C_j, d_j) with only violable rows kept
    eps: float
    formulation: str
    lp: LinearProgram = field(repr=False)
    groups: list = field(repr=False)
    alpha_slice: tuple = (0, 0)

    def alpha(self, x: np.ndarray) -> np.ndarray:
        p = self.p
        return x[:p] - x[p:2 * p]


def build_counterexample_milp(polys, p: int, eps: float = 1e-6, formulation: str = "auto") -> CounterexampleMilp | None:
    """Build the MILP; returns ``None`` if some polytope has no row violable inside the box."""
    kept = []
    for P in polys:
        C, d = np.atleast_2d(P.C), P.d
        # a row can only be violated in the box if max |C_k| a exceeds d_k + eps
        ok = np.abs(C).sum(axis=1) >= d + eps
        if not ok.any():
            return None
        kept.append((C[ok], d[ok]))
    total_rows = sum(len(d) for _, d in kept)
    if formulation == "auto":
        formulation = "disaggregated" if p * total_rows <= 20_000 else "bigm"
    if formulation == "disaggregated":
        lp, groups = _disaggregated(kept, p, eps)
    elif formulation == "bigm":
        lp, groups = _bigm(kept, p, eps)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    return CounterexampleMilp(p, kept, eps, formulation, lp, groups)


def _disaggregated(kept, p, eps):
    # variables: a+ (p), a- (p), then per (j, k): ahat_jk (p) and lam_jk (1)
    nvar = 2 * p + sum(len(d) * (p + 1) for _, d in kept)
    c = np.zeros(nvar)
    c[: 2 * p] = 1.0
    lb = np.zeros(nvar)
    ub = np.ones(nvar)
    ub[: 2 * p] = 1.0
    ub_rows, ub_cols, ub_vals, b_ub = [], [], [], []
    eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
    groups = []
    r_ub = r_eq = 0
    col = 2 * p
    eye = np.arange(p)
    for C, d in kept:
        group = []
        # sum_k ahat_jk - a+ + a- = 0
        sum_rows = r_eq + eye
        eq_rows += [sum_rows, sum_rows]
        eq_cols += [eye, p + eye]
        eq_vals += [-np.ones(p), np.ones(p)]
        b_eq += [np.zeros(p)]
        r_eq += p
        for k in range(len(d)):
            ah = col + eye
            lam = col + p
            lb[ah] = -1.0
            ub[ah] = 1.0
            eq_rows.append(sum_rows)
            eq_cols.append(ah)
            eq_vals.append(np.ones(p))
            # -C_k ahat + lam (d_k + eps) <= 0
            nz = np.flatnonzero(C[k])
            ub_rows += [np.full(nz.size + 1, r_ub)]
            ub_cols += [np.concatenate([ah[nz], [lam]])]
            ub_vals += [np.concatenate([-C[k, nz], [d[k] + eps]])]
            b_ub.append(np.zeros(1))
            r_ub += 1
            # ahat - lam <= 0 and -ahat - lam <= 0
            for sgn in (1.0, -1.0):
                rows = r_ub + eye
                ub_rows += [rows, rows]
                ub_cols += [ah, np.full(p, lam)]
                ub_vals += [np.full(p, sgn), -np.ones(p)]
                b_ub.append(np.zeros(p))
                r_ub += p
            group.append(lam)
            col += p + 1
        # sum_k lam_jk = 1
        eq_rows.append(np.full(len(group), r_eq))
        eq_cols.append(np.array(group))
        eq_vals.append(np.ones(len(group)))
        b_eq.append(np.ones(1))
        r_eq += 1
        groups.append(group)
    A_ub = sp.csr_matrix((np.concatenate(ub_vals), (np.concatenate(ub_rows), np.concatenate(ub_cols))), shape=(r_ub, nvar))
    A_eq = sp.csr_matrix((np.concatenate(eq_vals), (np.concatenate(eq_rows), np.concatenate(eq_cols))), shape=(r_eq, nvar))
    lp = LinearProgram(c, A_ub, np.concatenate(b_ub), A_eq, np.concatenate(b_eq), lb, ub)
    return lp, groups


def _bigm(kept, p, eps):
    # variables: a+ (p), a- (p), lam per row
    nrow = sum(len(d) for _, d in kept)
    nvar = 2 * p + nrow
    c = np.zeros(nvar)
    c[: 2 * p] = 1.0
    lb = np.zeros(nvar)
    ub = np.ones(nvar)
    A_ub = np.zeros((nrow, nvar))
    b_ub = np.zeros(nrow)
    A_eq = np.zeros((len(kept), nvar))
    groups = []
    r = 0
    for j, (C, d) in enumerate(kept):
        group = []
        for k in range(len(d)):
            # lam = 1  =>  C_k a >= d_k + eps ; M_k makes the row vacuous otherwise
            big = d[k] + eps + np.abs(C[k]).sum()
            A_ub[r, :p] = -C[k]
            A_ub[r, p:2 * p] = C[k]
            A_ub[r, 2 * p + r] = big
            b_ub[r] = big - d[k] - eps
            A_eq[j, 2 * p + r] = 1.0
            group.append(2 * p + r)
            r += 1
        groups.append(group)
    lp = LinearProgram(c, sp.csr_matrix(A_ub), b_ub, sp.csr_matrix(A_eq), np.ones(len(kept)), lb, ub)
    return lp, groups


def find_counterexample(polys, p: int, eps: float = 1e-6, node_limit: int = 20_000, formulation: str = "auto") -> MilpResult:
    """Minimal 1-norm ``alpha`` in ``[-1, 1]^p`` outside every polytope in ``polys``.

    Outside means some row ``k`` of each polytope holds with
    ``C_k @ alpha >= d_k + eps``. Returns status ``"infeasible"`` when no such
    point exists; raises :class:`NodeLimitExceeded` if the search is cut off.
    """
    polys = list(polys)
    if not polys:
        return MilpResult("optimal", None, 0.0, 0, np.zeros(p))
    milp = build_counterexample_milp(polys, p, eps, formulation)
    if milp is None:
        return MilpResult("infeasible")

    def score(x, gi):
        C, d = milp.polys[gi]
        a = milp.alpha(x)
        return (C @ a - d) / np.maximum(np.linalg.norm(C, axis=1), 1e-12)

    res = milp_branch_and_bound(milp.lp, milp.groups, score=score, node_limit=node_limit)
    if res.status != "optimal":
        return res
    alpha = np.clip(milp.alpha(res.x), -1.0, 1.0)
    res.alpha = alpha
    return res
