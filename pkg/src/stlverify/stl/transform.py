"""Formula rewriting: desugaring, negation normal form, sampled time, CNF.

Sampled-time formulas are ordinary formulas whose temporal structure is
restricted to *leaves*:

* ``N[i*dt] psi`` asks for ``psi`` at the grid point ``t_i``;
* ``G[0,dt] psi`` / ``N[i*dt] G[0,dt] psi`` ask for ``psi`` on the whole
  cell ``[t_i, t_{i+1}]``;

where ``psi`` contains no temporal operator. Leaves are combined with
``&`` and ``|`` only. Satisfying the sampled formula implies satisfying the
original one on every continuous trace.
"""

from __future__ import annotations

import itertools
import math

from stlverify.stl.ast import (
    FALSE,
    TRUE,
    And,
    Atom,
    FalseF,
    Finally,
    Formula,
    Globally,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    is_temporal_free,
)

_TOL = 1e-9


def formula_horizon(phi: Formula) -> float:
    """Latest time (relative to 0) the formula can look at."""
    if isinstance(phi, (Atom, TrueF, FalseF)):
        return 0.0
    if isinstance(phi, Not):
        return formula_horizon(phi.arg)
    if isinstance(phi, (And, Or)):
        return max((formula_horizon(a) for a in phi.args), default=0.0)
    if isinstance(phi, (Until, Release)):
        return phi.b + max(formula_horizon(phi.lhs), formula_horizon(phi.rhs))
    if isinstance(phi, (Finally, Globally)):
        return phi.b + formula_horizon(phi.arg)
    if isinstance(phi, Next):
        return phi.a + formula_horizon(phi.arg)
    raise TypeError(f"unknown formula node {type(phi).__name__}")


def negate(phi: Formula) -> Formula:
    if isinstance(phi, TrueF):
        return FALSE
    if isinstance(phi, FalseF):
        return TRUE
    if isinstance(phi, Not):
        return phi.arg
    return Not(phi)


def desugar(phi: Formula) -> Formula:
    """Rewrite into atoms, literals, ``!``, ``&``, ``|`` and ``U`` only."""
    if isinstance(phi, (Atom, TrueF, FalseF)):
        return phi
    if isinstance(phi, Not):
        return Not(desugar(phi.arg))
    if isinstance(phi, And):
        return And(tuple(desugar(a) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(desugar(a) for a in phi.args))
    if isinstance(phi, Until):
        return Until(phi.a, phi.b, desugar(phi.lhs), desugar(phi.rhs))
    if isinstance(phi, Release):
        return Not(Until(phi.a, phi.b, Not(desugar(phi.lhs)), Not(desugar(phi.rhs))))
    if isinstance(phi, Finally):
        return Until(phi.a, phi.b, TRUE, desugar(phi.arg))
    if isinstance(phi, Globally):
        return Not(Until(phi.a, phi.b, TRUE, Not(desugar(phi.arg))))
    if isinstance(phi, Next):
        return Until(phi.a, phi.a, TRUE, desugar(phi.arg))
    raise TypeError(f"unknown formula node {type(phi).__name__}")


def negation_normal_form(phi: Formula) -> Formula:
    """Push negations down to the atoms and absorb them into the relation."""
    return _nnf(phi, False)


def _nnf(phi: Formula, neg: bool) -> Formula:
    if isinstance(phi, Atom):
        return phi.negated() if neg else phi
    if isinstance(phi, TrueF):
        return FALSE if neg else TRUE
    if isinstance(phi, FalseF):
        return TRUE if neg else FALSE
    if isinstance(phi, Not):
        return _nnf(phi.arg, not neg)
    if isinstance(phi, (And, Or)):
        args = tuple(_nnf(a, neg) for a in phi.args)
        flip = isinstance(phi, And) == neg
        return Or(args) if flip else And(args)
    if isinstance(phi, Until):
        if neg:
            return Release(phi.a, phi.b, _nnf(phi.lhs, True), _nnf(phi.rhs, True))
        return Until(phi.a, phi.b, _nnf(phi.lhs, False), _nnf(phi.rhs, False))
    if isinstance(phi, Release):
        if neg:
            return Until(phi.a, phi.b, _nnf(phi.lhs, True), _nnf(phi.rhs, True))
        return Release(phi.a, phi.b, _nnf(phi.lhs, False), _nnf(phi.rhs, False))
    if isinstance(phi, Finally):
        cls = Globally if neg else Finally
        return cls(phi.a, phi.b, _nnf(phi.arg, neg))
    if isinstance(phi, Globally):
        cls = Finally if neg else Globally
        return cls(phi.a, phi.b, _nnf(phi.arg, neg))
    if isinstance(phi, Next):
        return Next(phi.a, _nnf(phi.arg, neg))
    raise TypeError(f"unknown formula node {type(phi).__name__}")


# ---------------------------------------------------------------------------
# boolean builders with constant folding


def conj(items) -> Formula:
    out = []
    for f in items:
        if isinstance(f, FalseF):
            return FALSE
        if isinstance(f, TrueF):
            continue
        out.extend(f.args if isinstance(f, And) else (f,))
    out = list(dict.fromkeys(out))
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(items) -> Formula:
    out = []
    for f in items:
        if isinstance(f, TrueF):
            return TRUE
        if isinstance(f, FalseF):
            continue
        out.extend(f.args if isinstance(f, Or) else (f,))
    out = list(dict.fromkeys(out))
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


# ---------------------------------------------------------------------------
# sampled time


def _floor(x: float) -> int:
    return int(math.floor(x + _TOL))


def _ceil(x: float) -> int:
    return int(math.ceil(x - _TOL))


def point_leaf(psi: Formula, i: int, dt: float) -> Formula:
    if isinstance(psi, (TrueF, FalseF)):
        return psi
    return Next(i * dt, psi)


def interval_leaf(psi: Formula, i: int, dt: float) -> Formula:
    if isinstance(psi, (TrueF, FalseF)):
        return psi
    g = Globally(0.0, dt, psi)
    return g if i == 0 else Next(i * dt, g)


def leaf_info(f: Formula):
    """``(kind, time, width, psi)`` if ``f`` is a sampled-time leaf, else ``None``.

    ``kind`` is ``"point"`` or ``"interval"``; ``width`` is the cell length
    (``0`` for points).
    """
    t = 0.0
    if isinstance(f, Next):
        t, f = f.a, f.arg
        if is_temporal_free(f):
            return "point", t, 0.0, f
    if isinstance(f, Globally) and f.a == 0.0 and f.b > 0.0 and is_temporal_free(f.arg):
        return "interval", t, f.b, f.arg
    return None


class _Sampler:
    def __init__(self, dt: float):
        self.dt = dt
        self.memo: dict = {}

    def steps(self, t: float) -> float:
        return t / self.dt

    def always_on(self, f, lo: float, hi: float) -> Formula:
        if lo > hi + _TOL:
            return TRUE
        lo_i, hi_i = _floor(lo), _ceil(hi)
        if lo_i == hi_i:
            return self.pt(f, lo_i)
        items = []
        for i in range(lo_i, hi_i + 1):
            items.append(self.pt(f, i))
            if i < hi_i:
                items.append(self.iv(f, i))
        return conj(items)

    def eventually_in(self, f, lo: float, hi: float) -> Formula:
        pts = range(_ceil(lo), _floor(hi) + 1)
        if len(pts):
            return disj(self.pt(f, i) for i in pts)
        # no grid point in the window: ask for the whole enclosing cell
        return self.iv(f, _floor(lo))

    def pt(self, f: Formula, k: int) -> Formula:
        key = ("pt", id(f), k)
        if key not in self.memo:
            self.memo[key] = (self._pt(f, k), f)
        return self.memo[key][0]

    def iv(self, f: Formula, k: int) -> Formula:
        key = ("iv", id(f), k)
        if key not in self.memo:
            self.memo[key] = (self._iv(f, k), f)
        return self.memo[key][0]

    def _pt(self, f: Formula, k: int) -> Formula:
        if is_temporal_free(f):
            return point_leaf(f, k, self.dt)
        if isinstance(f, And):
            return conj(self.pt(a, k) for a in f.args)
        if isinstance(f, Or):
            return disj(self.pt(a, k) for a in f.args)
        if isinstance(f, Next):
            a = k + self.steps(f.a)
            return self.eventually_in(f.arg, a, a)
        a, b = k + self.steps(f.a), k + self.steps(f.b)
        if isinstance(f, Globally):
            return self.always_on(f.arg, a, b)
        if isinstance(f, Finally):
            return self.eventually_in(f.arg, a, b)
        if isinstance(f, Until):
            pts = range(_ceil(a), _floor(b) + 1)
            if len(pts):
                return disj(
                    conj([self.pt(f.rhs, i)] + [self.iv(f.lhs, j) for j in range(k, i)])
                    for i in pts
                )
            c = _floor(a)
            return conj([self.iv(f.rhs, c)] + [self.iv(f.lhs, j) for j in range(k, c + 1)])
        if isinstance(f, Release):
            alts = [self.always_on(f.rhs, a, b)]
            for i in range(k, _ceil(b)):
                alts.append(conj([self.pt(f.lhs, i), self.always_on(f.rhs, a, i)]))
            return disj(alts)
        raise ValueError(f"formula is not in negation normal form: {f}")

    def _iv(self, f: Formula, k: int) -> Formula:
        if is_temporal_free(f):
            return interval_leaf(f, k, self.dt)
        if isinstance(f, And):
            return conj(self.iv(a, k) for a in f.args)
        if isinstance(f, Or):
            return disj(self.iv(a, k) for a in f.args)
        if isinstance(f, Next):
            a = k + self.steps(f.a)
            return self.always_on(f.arg, a, a + 1)
        a, b = k + self.steps(f.a), k + self.steps(f.b)
        wide = b - a >= 1 - _TOL
        if isinstance(f, Globally):
            return self.always_on(f.arg, a, b + 1)
        if isinstance(f, Finally):
            if wide:
                return self.eventually_in(f.arg, a + 1, b)
            return self.always_on(f.arg, a, a + 1)
        if isinstance(f, Until):
            if wide:
                pts = range(_ceil(a + 1), _floor(b) + 1)
                return disj(
                    conj([self.pt(f.rhs, i)] + [self.iv(f.lhs, j) for j in range(k, i)])
                    for i in pts
                )
            need_lhs = [] if a - k <= _TOL else [self.iv(f.lhs, j) for j in range(k, _ceil(a + 1))]
            return conj([self.always_on(f.rhs, a, a + 1)] + need_lhs)
        if isinstance(f, Release):
            alts = [self.always_on(f.rhs, a, b + 1)]
            for i in range(k + 1, _ceil(b + 1)):
                alts.append(conj([self.pt(f.lhs, i), self.always_on(f.rhs, a, i)]))
            return disj(alts)
        raise ValueError(f"formula is not in negation normal form: {f}")


def to_sampled_time(phi: Formula, dt: float) -> Formula:
    """Sound sampled-time version of ``phi`` on the grid ``k * dt``.

    Intervals of "always" operators are widened to grid cells and intervals
    of "eventually" operators narrowed to grid points. An "eventually"
    window without grid points asks for the enclosing cell instead.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _Sampler(dt).pt(negation_normal_form(phi), 0)


def leaf_times(phi: Formula) -> list:
    """``(kind, time, width)`` of every sampled-time leaf in ``phi``."""
    out = []

    def walk(f):
        info = leaf_info(f)
        if info is not None:
            out.append(info[:3])
        elif isinstance(f, (And, Or)):
            for a in f.args:
                walk(a)
        elif not isinstance(f, (TrueF, FalseF)):
            raise ValueError(f"not a sampled-time formula: {f}")

    walk(phi)
    return out


def sampled_horizon(phi: Formula) -> float:
    """Latest time referenced by a sampled-time formula."""
    return max((t + w for _, t, w in leaf_times(phi)), default=0.0)


# ---------------------------------------------------------------------------
# conjunctive normal form


def _clause_count(f: Formula) -> float:
    if isinstance(f, TrueF):
        return 0
    if isinstance(f, FalseF):
        return 1
    if isinstance(f, And):
        return sum(_clause_count(a) for a in f.args)
    if isinstance(f, Or):
        return math.prod(_clause_count(a) for a in f.args)
    return 1


def _clauses(f: Formula) -> list:
    if isinstance(f, TrueF):
        return []
    if isinstance(f, FalseF):
        return [[]]
    if isinstance(f, And):
        return [c for a in f.args for c in _clauses(a)]
    if isinstance(f, Or):
        acc = [[]]
        for a in f.args:
            acc = [x + y for x, y in itertools.product(acc, _clauses(a))]
        return acc
    return [[f]]


def _merge_points(clause: list) -> Formula:
    """Merge point leaves at equal times into one leaf over a disjunction."""
    order, groups = [], {}
    for leaf in clause:
        info = leaf_info(leaf)
        if info is not None and info[0] == "point":
            key = ("point", round(info[1], 9))
            if key not in groups:
                groups[key] = (info[1], [])
                order.append(key)
            groups[key][1].append(info[3])
        else:
            order.append(leaf)
    items = []
    for key in order:
        if isinstance(key, tuple) and key in groups:
            t, psis = groups[key]
            items.append(Next(t, disj(psis)))
        else:
            items.append(key)
    return disj(items)


def to_cnf(phi: Formula, max_clauses: int = 256) -> Formula:
    """Conjunctive normal form of a sampled-time formula.

    Point leaves at the same time inside a clause are merged. Disjunctions
    whose expansion would exceed ``max_clauses`` clauses are left as they
    are (their conjunctive children are still normalised).
    """
    if isinstance(phi, And):
        return conj(to_cnf(a, max_clauses) for a in phi.args)
    if isinstance(phi, Or) and _clause_count(phi) > max_clauses:
        return disj(to_cnf(a, max_clauses) for a in phi.args)
    if isinstance(phi, (TrueF, FalseF)):
        return phi
    if leaf_info(phi) is None and not isinstance(phi, Or):
        raise ValueError(f"not a sampled-time formula: {phi}")
    return conj(_merge_points(c) for c in _clauses(phi))
