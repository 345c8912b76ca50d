"""Intersection-check form of a sampled-time formula.

Every leaf "psi holds on the set at half-step j" becomes a :class:`Check`:
the set must not meet any polytope of the union that describes ``not psi``.
Checks are combined by :class:`AllOf` (conjunction) and :class:`AnyOf`
(disjunction). For a formula in CNF the tree is an ``AllOf`` of ``AnyOf``
clauses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from stlverify.setops import Polytope
from stlverify.stl.ast import And, Atom, FalseF, Formula, Or, TrueF
from stlverify.stl.transform import leaf_info, negation_normal_form, to_cnf, to_sampled_time
from stlverify.stl.ast import Not


@dataclass(frozen=True)
class Check:
    """Half-step ``j`` must avoid every polytope in ``polys``."""

    j: int
    polys: tuple
    label: str = ""

    @property
    def kind(self) -> str:
        return "point" if self.j % 2 == 0 else "interval"

    @property
    def time(self) -> float:
        return self.j / 2


@dataclass(frozen=True)
class AllOf:
    items: tuple


@dataclass(frozen=True)
class AnyOf:
    items: tuple


@dataclass
class RtlChecklist:
    root: object
    dt: float
    n: int

    def checks(self):
        """All checks in depth-first order."""
        stack = [self.root]
        out = []
        while stack:
            node = stack.pop()
            if isinstance(node, Check):
                out.append(node)
            else:
                stack.extend(reversed(node.items))
        return out

    @property
    def max_j(self) -> int:
        return max((c.j for c in self.checks()), default=0)

    @property
    def is_cnf(self) -> bool:
        root = self.root
        if not isinstance(root, AllOf):
            return False
        return all(isinstance(c, Check) or (isinstance(c, AnyOf) and all(isinstance(x, Check) for x in c.items))
                   for c in root.items)

    @property
    def clauses(self) -> list:
        """CNF clauses as lists of checks; raises if the tree is not in CNF."""
        if isinstance(self.root, Check):
            return [[self.root]]
        if isinstance(self.root, AnyOf) and all(isinstance(x, Check) for x in self.root.items):
            return [list(self.root.items)]
        if not self.is_cnf:
            raise ValueError("checklist is not in conjunctive normal form")
        return [[c] if isinstance(c, Check) else list(c.items) for c in self.root.items]

    def evaluate(self, passes: Callable[[Check], bool]) -> bool:
        """Truth value given a predicate telling whether a single check passes."""
        return _eval(self.root, passes)


def _eval(node, passes) -> bool:
    if isinstance(node, Check):
        return passes(node)
    if isinstance(node, AllOf):
        return all(_eval(c, passes) for c in node.items)
    return any(_eval(c, passes) for c in node.items)


def _dnf(f: Formula) -> list:
    """Disjunctive normal form of a temporal-free NNF formula as lists of atoms."""
    if isinstance(f, Atom):
        return [[f]]
    if isinstance(f, TrueF):
        return [[]]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, Or):
        return [c for a in f.args for c in _dnf(a)]
    if isinstance(f, And):
        acc = [[]]
        for a in f.args:
            acc = [x + y for x, y in itertools.product(acc, _dnf(a))]
        return acc
    raise ValueError(f"unexpected node in predicate: {f}")


def violation_polytopes(psi: Formula, n: int) -> tuple:
    """Closed polytopes whose union contains every state violating ``psi``."""
    out = []
    for term in _dnf(negation_normal_form(Not(psi))):
        rows = [a.as_leq(n) for a in dict.fromkeys(term)]
        C = np.array([r for r, _ in rows]).reshape(len(rows), n)
        d = np.array([b for _, b in rows])
        P = Polytope(C, d)
        if P not in out:
            out.append(P)
    return tuple(out)


def to_rtl_checklist(phi: Formula, dt: float, n: int) -> RtlChecklist:
    """Checklist for a sampled-time formula (typically the output of ``to_cnf``)."""

    def build(f):
        if isinstance(f, TrueF):
            return AllOf(())
        if isinstance(f, FalseF):
            return AnyOf(())
        info = leaf_info(f)
        if info is not None:
            kind, t, _, psi = info
            i = int(round(t / dt))
            if abs(i * dt - t) > 1e-9 * max(1.0, abs(t)):
                raise ValueError(f"leaf time {t} is not on the grid of step {dt}")
            j = 2 * i + (1 if kind == "interval" else 0)
            return Check(j, violation_polytopes(psi, n), str(psi))
        if isinstance(f, And):
            return AllOf(tuple(build(a) for a in f.args))
        if isinstance(f, Or):
            return AnyOf(tuple(build(a) for a in f.args))
        raise ValueError(f"unsupported structure in sampled-time formula: {f}")

    return RtlChecklist(build(phi), dt, n)


def compile_formula(phi: Formula, dt: float, n: int, cnf: bool = True, max_clauses: int = 256) -> RtlChecklist:
    """Full pipeline: negation normal form, sampled time, CNF, checklist."""
    sampled = to_sampled_time(negation_normal_form(phi), dt)
    if cnf:
        sampled = to_cnf(sampled, max_clauses)
    return to_rtl_checklist(sampled, dt, n)
