"""Model checking in factor space.

Each intersection check "the set at half-step j avoids polytope P" is turned
into a polytope ``K`` over the factor box ``[-1, 1]^p``: factor vectors
outside ``K`` are guaranteed to produce trajectories avoiding ``P``. The
checks are then combined along the checklist tree: a conjunction of checks
is violated where any of them is (union of lists), a disjunction where all
of them are (pairwise intersections).

The factor box itself is kept implicit: every polytope is understood
intersected with ``[-1, 1]^p``, and a polytope without rows stands for the
whole box.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from stlverify.optim.lp import LinearProgram, LpError, lp_solve
from stlverify.reach import FactorIndexTuples, LinearSystem, ReachParams, ReachSequence, reach_sequence
from stlverify.setops import Polytope, Zonotope, poly_remove_redundant, zono_poly_intersects
from stlverify.stl.ast import FALSE, TRUE, And, Atom, Finally, Formula, Globally, Next, Not, Or, Release, Until
from stlverify.stl.rtl import AllOf, Check, RtlChecklist, compile_formula
from stlverify.stl.transform import formula_horizon

log = logging.getLogger(__name__)

_SLACK = 1e-9


class PolytopeLimitExceeded(RuntimeError):
    pass


@dataclass
class ModelCheckResult:
    unsafe: list
    seq: ReachSequence
    tuples: FactorIndexTuples
    checklist: RtlChecklist
    formula: Formula
    stats: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return not self.unsafe

    @property
    def n_factors(self) -> int:
        return self.seq.n_factors


def _split(seq: ReachSequence, tuples: FactorIndexTuples, j: int):
    i = j // 2
    if j % 2 == 0:
        return seq.Rt[i], tuples.H[i], tuples.K[i]
    return seq.Rtau[i], tuples.N[i], tuples.M[i]


def unsafe_factor_polytope(
    R: Zonotope,
    tuples: FactorIndexTuples,
    kind: str,
    i: int,
    P: Polytope,
    p: int | None = None,
) -> Polytope:
    """Factors that may map into ``P`` at ``R = R(t_i)`` (``kind="point"``) or ``R(tau_i)``.

    ``K = {a | C G_dep a <= d - C c + sum_err |C G_err|}``, padded with zero
    columns up to the factor dimension ``p`` (default: all factors of the
    sequence).
    """
    if kind == "point":
        dep, err = tuples.H[i], tuples.K[i]
    elif kind == "interval":
        dep, err = tuples.N[i], tuples.M[i]
    else:
        raise ValueError(f"kind must be 'point' or 'interval', not {kind!r}")
    if p is None:
        p = len(tuples.H[-1])
    return _factor_polytope(R, dep, err, P, p)


def _factor_polytope(R: Zonotope, dep, err, P: Polytope, p: int) -> Polytope:
    if P.dim != R.dim:
        raise ValueError(f"polytope dimension {P.dim} does not match set dimension {R.dim}")
    if len(dep) > p:
        raise ValueError(f"{len(dep)} dependent generators but only {p} factors")
    C = P.C
    rhs = P.d - C @ R.c
    if len(err):
        rhs = rhs + np.abs(C @ R.G[:, err]).sum(axis=1)
    M = np.zeros((C.shape[0], p))
    M[:, : len(dep)] = C @ R.G[:, dep]
    return Polytope(M, rhs)


# ---------------------------------------------------------------------------
# polytope lists over the factor box


class _FactorLists:
    def __init__(self, p: int, cap: int):
        self.p = p
        self.cap = cap
        self.full = Polytope.full(p)
        self.lp_calls = 0

    def tidy(self, K: Polytope) -> Polytope | None:
        """Drop rows implied by the box; ``None`` if ``K`` misses the box."""
        if K.n_constraints == 0:
            return K
        l1 = np.abs(K.C).sum(axis=1)
        if np.any(-l1 > K.d + _SLACK):
            return None
        keep = l1 > K.d
        if not keep.any():
            return self.full
        return Polytope(K.C[keep], K.d[keep])

    def empty(self, K: Polytope) -> bool:
        if K.n_constraints == 0:
            return False
        if K.n_constraints == 1:
            return bool(-np.abs(K.C).sum() > K.d[0] + _SLACK)
        self.lp_calls += 1
        lp = LinearProgram(np.zeros(self.p), A_ub=K.C, b_ub=K.d + _SLACK, lb=-1.0, ub=1.0)
        res = lp_solve(lp)
        if res.status == "unbounded":
            raise LpError("feasibility LP reported unbounded")
        return not res.optimal

    def contains(self, outer: Polytope, inner: Polytope) -> bool:
        """Whether ``inner`` (within the box) lies in ``outer``."""
        if outer.n_constraints == 0:
            return True
        for r in range(outer.n_constraints):
            c = outer.C[r]
            if inner.n_constraints == 0:
                val = np.abs(c).sum()
            else:
                self.lp_calls += 1
                res = lp_solve(LinearProgram(-c, A_ub=inner.C, b_ub=inner.d, lb=-1.0, ub=1.0))
                if not res.optimal:
                    return True
                val = -res.value
            if val > outer.d[r] + 1e-9:
                return False
        return True

    def intersect(self, A: Polytope, B: Polytope) -> Polytope | None:
        if A.n_constraints == 0:
            return B
        if B.n_constraints == 0:
            return A
        K = Polytope(np.vstack([A.C, B.C]), np.concatenate([A.d, B.d]))
        if self.empty(K):
            return None
        if K.n_constraints > 12:
            K = poly_remove_redundant(K, lb=-np.ones(self.p), ub=np.ones(self.p))
        return K

    def normalise(self, items: list) -> list:
        out = []
        seen = set()
        for K in items:
            if K.n_constraints == 0:
                return [self.full]
            if K not in seen:
                seen.add(K)
                out.append(K)
        if len(out) > 8:
            out = self.drop_subsumed(out)
        if len(out) > self.cap:
            raise PolytopeLimitExceeded(f"more than {self.cap} factor polytopes")
        return out

    def drop_subsumed(self, items: list) -> list:
        items = sorted(items, key=lambda K: K.n_constraints)
        kept: list = []
        for K in items:
            if any(self.contains(O, K) for O in kept):
                continue
            kept.append(K)
        return kept


class _Evaluator:
    def __init__(self, seq, tuples, lists: _FactorLists, pre_evaluate: bool):
        self.seq = seq
        self.tuples = tuples
        self.lists = lists
        self.pre = pre_evaluate
        self.cache: dict = {}
        self.checks = 0

    def check(self, c: Check) -> list:
        key = (c.j, c.polys)
        if key in self.cache:
            return self.cache[key]
        self.checks += 1
        R, dep, err = _split(self.seq, self.tuples, c.j)
        out = []
        for P in c.polys:
            if self.pre and _misses(R, P):
                continue
            K = self.lists.tidy(_factor_polytope(R, dep, err, P, self.lists.p))
            if K is None or self.lists.empty(K):
                continue
            out.append(K)
        out = self.lists.normalise(out)
        self.cache[key] = out
        return out

    def node(self, node) -> list:
        if isinstance(node, Check):
            return self.check(node)
        if isinstance(node, AllOf):
            acc: list = []
            for child in node.items:
                acc.extend(self.node(child))
                if any(K.n_constraints == 0 for K in acc):
                    return [self.lists.full]
            return self.lists.normalise(acc)
        # disjunction: violated only where every alternative is violated
        parts = []
        for child in node.items:
            lst = self.node(child)
            if not lst:
                return []
            if lst == [self.lists.full]:
                continue
            parts.append(lst)
        if not parts:
            return [self.lists.full]
        parts.sort(key=len)
        acc = parts[0]
        for lst in parts[1:]:
            nxt = []
            for A in acc:
                for B in lst:
                    K = self.lists.intersect(A, B)
                    if K is not None:
                        nxt.append(K)
            acc = self.lists.normalise(nxt)
            if not acc:
                return []
        return acc


def _misses(R: Zonotope, P: Polytope) -> bool:
    """Cheap sufficient test that ``R`` and ``P`` are disjoint (one separating row)."""
    if P.n_constraints == 0:
        return False
    lo = P.C @ R.c - np.abs(P.C @ R.G).sum(axis=1)
    return bool(np.any(lo > P.d + _SLACK))


def check_reach_sequence(
    seq: ReachSequence,
    tuples: FactorIndexTuples,
    checklist: RtlChecklist,
    pre_evaluate: bool = True,
    max_polytopes: int = 10_000,
) -> tuple[list, dict]:
    """Unsafe factor polytopes of ``checklist`` on an existing reach sequence."""
    if checklist.max_j > 2 * seq.steps:
        raise ValueError("checklist refers to times beyond the reach sequence")
    lists = _FactorLists(seq.n_factors, max_polytopes)
    ev = _Evaluator(seq, tuples, lists, pre_evaluate)
    unsafe = ev.node(checklist.root)
    if unsafe and unsafe != [lists.full]:
        box = np.ones(lists.p)
        unsafe = [poly_remove_redundant(K, lb=-box, ub=box) for K in unsafe]
    return unsafe, {"checks": ev.checks, "lp_calls": lists.lp_calls}


def reach_horizon(checklist: RtlChecklist, phi_horizon: float, dt: float) -> float:
    """Reach-sequence end time covering both the formula and every checklist leaf."""
    steps = max(int(np.ceil(phi_horizon / dt - 1e-9)), (checklist.max_j + 1) // 2, 1)
    return steps * dt


def model_check(
    sys: LinearSystem,
    X0: Zonotope,
    U,
    phi: Formula,
    dt: float,
    kappa: int,
    *,
    pre_evaluate: bool = True,
    cnf: bool = True,
    max_polytopes: int = 10_000,
    seq: tuple | None = None,
) -> ModelCheckResult:
    """Factor polytopes on which ``phi`` may be violated (empty list: satisfied).

    ``seq`` may pass a precomputed ``(ReachSequence, FactorIndexTuples)``
    that covers the needed horizon. ``U`` may also be a per-step list.
    """
    checklist = compile_formula(phi, dt, sys.n, cnf=cnf)
    t_end = reach_horizon(checklist, formula_horizon(phi), dt)
    if seq is None:
        seq = reach_sequence(sys, X0, U, ReachParams(dt, t_end, kappa))
    reach, tuples = seq
    if pre_evaluate:
        phi = pre_evaluate_predicates(reach, phi)
        checklist = compile_formula(phi, dt, sys.n, cnf=cnf)
    unsafe, stats = check_reach_sequence(reach, tuples, checklist, pre_evaluate, max_polytopes)
    return ModelCheckResult(unsafe, reach, tuples, checklist, phi, stats)


def rtl_entailment_wholeset(reach: ReachSequence, checklist: RtlChecklist) -> bool:
    """Classic whole-set evaluation: a check passes iff the set meets none of its polytopes."""
    memo: dict = {}

    def passes(c: Check) -> bool:
        key = (c.j, c.polys)
        if key not in memo:
            R = reach.set_at_half_step(c.j)
            memo[key] = not any(zono_poly_intersects(R, P) for P in c.polys)
        return memo[key]

    return checklist.evaluate(passes)


def pre_evaluate_predicates(reach: ReachSequence, phi: Formula) -> Formula:
    """Replace atoms that are true (or false) on every reachable set by literals."""
    sets = list(reach.Rt) + list(reach.Rtau)
    memo: dict = {}

    def atom_value(a: Atom):
        if a in memo:
            return memo[a]
        row = a.row(reach.Rt[0].dim)
        hi = max(s.support(row) for s in sets)
        lo = min(-s.support(-row) for s in sets)
        val = None
        if a.rel == "<=":
            val = True if hi <= a.b else (False if lo > a.b else None)
        elif a.rel == "<":
            val = True if hi < a.b else (False if lo >= a.b else None)
        elif a.rel == ">=":
            val = True if lo >= a.b else (False if hi < a.b else None)
        else:
            val = True if lo > a.b else (False if hi <= a.b else None)
        memo[a] = val
        return val

    def walk(f):
        if isinstance(f, Atom):
            v = atom_value(f)
            return f if v is None else (TRUE if v else FALSE)
        if isinstance(f, Not):
            return Not(walk(f.arg))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(walk(a) for a in f.args))
        if isinstance(f, (Until, Release)):
            return type(f)(f.a, f.b, walk(f.lhs), walk(f.rhs))
        if isinstance(f, (Finally, Globally)):
            return type(f)(f.a, f.b, walk(f.arg))
        if isinstance(f, Next):
            return Next(f.a, walk(f.arg))
        return f

    return walk(phi)
