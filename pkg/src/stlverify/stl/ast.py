"""Formula syntax tree.

Nodes are frozen dataclasses, so formulas hash and compare structurally.
Times are in seconds. Derived operators (release, finally, globally, next)
are kept as node kinds of their own; :func:`stlverify.stl.desugar` removes
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RELATIONS = ("<=", "<", ">=", ">")
_NEGATED = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class TrueF(Formula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF(Formula):
    def __str__(self):
        return "false"


TRUE = TrueF()
FALSE = FalseF()


def _fmt(v: float) -> str:
    return repr(float(v)).rstrip("0").rstrip(".") if float(v) != int(v) else str(int(v))


@dataclass(frozen=True)
class Atom(Formula):
    """Linear predicate ``a @ x  rel  b`` (``a[i]`` multiplies state ``x_{i+1}``)."""

    a: tuple
    b: float
    rel: str = "<="

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")
        a = tuple(float(v) for v in self.a)
        # trailing zeros carry no information; dropping them keeps equality structural
        while a and a[-1] == 0.0:
            a = a[:-1]
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def strict(self) -> bool:
        return self.rel in ("<", ">")

    def row(self, n: int) -> np.ndarray:
        if len(self.a) > n:
            raise ValueError(f"predicate references x{len(self.a)} but the system has {n} states")
        r = np.zeros(n)
        r[: len(self.a)] = self.a
        return r

    def as_leq(self, n: int) -> tuple[np.ndarray, float]:
        """Closed halfspace ``c @ x <= d`` equal to the closure of the atom."""
        r = self.row(n)
        if self.rel in ("<=", "<"):
            return r, self.b
        return -r, -self.b

    def negated(self) -> "Atom":
        return Atom(self.a, self.b, _NEGATED[self.rel])

    def holds(self, X) -> np.ndarray | bool:
        """Truth value for a state (1-D) or for each row of a state matrix."""
        X = np.asarray(X, dtype=float)
        k = len(self.a)
        if k > X.shape[-1]:
            raise ValueError(f"predicate references x{k} but states have dimension {X.shape[-1]}")
        v = X[..., :k] @ np.asarray(self.a) if k else np.zeros(X.shape[:-1])
        if self.rel == "<=":
            return v <= self.b
        if self.rel == "<":
            return v < self.b
        if self.rel == ">=":
            return v >= self.b
        return v > self.b

    def __str__(self):
        terms = []
        for i, c in enumerate(self.a):
            if c == 0.0:
                continue
            mag = abs(c)
            body = f"x{i + 1}" if mag == 1.0 else f"{_fmt(mag)}*x{i + 1}"
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            lhs = "0"
        else:
            lhs = ("-" if terms[0][0] == "-" else "") + terms[0][1]
            for sign, body in terms[1:]:
                lhs += f" {sign} {body}"
        return f"{lhs} {self.rel} {_fmt(self.b)}"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return " & ".join(_wrap(a, (Or,)) for a in self.args)


@dataclass(frozen=True)
class Or(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return " | ".join(_wrap(a, (And,)) for a in self.args)


def _check_interval(a, b):
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("temporal operators must be bounded")
    if a < 0 or b < a:
        raise ValueError(f"malformed interval [{a}, {b}]")


@dataclass(frozen=True)
class Until(Formula):
    a: float
    b: float
    lhs: Formula
    rhs: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"{_wrap(self.lhs)} U[{_fmt(self.a)},{_fmt(self.b)}] {_wrap(self.rhs)}"


@dataclass(frozen=True)
class Release(Formula):
    a: float
    b: float
    lhs: Formula
    rhs: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"{_wrap(self.lhs)} R[{_fmt(self.a)},{_fmt(self.b)}] {_wrap(self.rhs)}"


@dataclass(frozen=True)
class Finally(Formula):
    a: float
    b: float
    arg: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"F[{_fmt(self.a)},{_fmt(self.b)}] {_wrap(self.arg)}"


@dataclass(frozen=True)
class Globally(Formula):
    a: float
    b: float
    arg: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"G[{_fmt(self.a)},{_fmt(self.b)}] {_wrap(self.arg)}"


@dataclass(frozen=True)
class Next(Formula):
    a: float
    arg: Formula

    def __post_init__(self):
        _check_interval(self.a, self.a)

    def __str__(self):
        return f"N[{_fmt(self.a)}] {_wrap(self.arg)}"


def _wrap(f: Formula, extra=()) -> str:
    simple = isinstance(f, (TrueF, FalseF, Not, Next, Finally, Globally))
    if isinstance(f, Atom):
        return f"({f})"
    if simple and not isinstance(f, extra):
        return str(f)
    return f"({f})"


def is_temporal_free(f: Formula) -> bool:
    if isinstance(f, (Atom, TrueF, FalseF)):
        return True
    if isinstance(f, Not):
        return is_temporal_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_temporal_free(a) for a in f.args)
    return False


def atoms(f: Formula) -> set:
    """All atoms occurring in ``f``."""
    if isinstance(f, Atom):
        return {f}
    if isinstance(f, (TrueF, FalseF)):
        return set()
    out = set()
    for child in children(f):
        out |= atoms(child)
    return out


def children(f: Formula) -> tuple:
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, (Not, Finally, Globally, Next)):
        return (f.arg,)
    if isinstance(f, (Until, Release)):
        return (f.lhs, f.rhs)
    return ()


def n_states(f: Formula) -> int:
    """Smallest state dimension the formula can be evaluated on."""
    return max((len(a.a) for a in atoms(f)), default=0)
