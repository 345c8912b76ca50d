"""Zonotopes, halfspace polytopes, intervals and interval matrices.

All arithmetic is plain double precision without directed rounding, so
"enclosure" here means enclosure up to floating-point error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stlverify.optim.lp import LinearProgram, LpError, lp_solve

# slack allowed when deciding membership of sampled points
MEMBER_TOL = 1e-9


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


class Zonotope:
    """The set ``{c + G @ a | a in [-1, 1]^gamma}``.

    ``G`` has one column per generator; zero columns are allowed and a
    zonotope without generators is a single point.
    """

    __slots__ = ("c", "G")

    def __init__(self, c, G=None):
        c = _vec(c)
        if G is None:
            G = np.zeros((c.size, 0))
        G = np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = G.reshape(c.size, -1) if c.size else G.reshape(0, -1)
        if G.shape[0] != c.size:
            raise ValueError(f"generator matrix has {G.shape[0]} rows, center has {c.size} entries")
        self.c = c
        self.G = G

    @classmethod
    def from_interval(cls, lo, hi) -> "Zonotope":
        lo, hi = _vec(lo), _vec(hi)
        return cls(0.5 * (lo + hi), np.diag(0.5 * (hi - lo)))

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def n_gens(self) -> int:
        return self.G.shape[1]

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, gens={self.n_gens})"

    def point(self, alpha) -> np.ndarray:
        return self.c + self.G @ _vec(alpha)

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        """Point membership via an LP over the factors."""
        x = _vec(x)
        if self.n_gens == 0:
            return bool(np.all(np.abs(x - self.c) <= tol))
        lp = LinearProgram(
            np.zeros(self.n_gens),
            A_eq=self.G,
            b_eq=x - self.c,
            lb=-1.0 - tol,
            ub=1.0 + tol,
        )
        return lp_solve(lp).optimal

    def support(self, direction) -> float:
        """``max_{x in Z} direction @ x``."""
        d = _vec(direction)
        return float(d @ self.c + np.abs(d @ self.G).sum())

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """``k`` random members (rows); half uniform in factor space, half at vertices."""
        a = rng.uniform(-1, 1, (k, self.n_gens))
        a[: k // 2] = np.sign(a[: k // 2])
        return self.c + a @ self.G.T


@dataclass(frozen=True)
class Interval:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if lo.shape != hi.shape:
            raise ValueError("interval bounds differ in shape")
        if np.any(lo > hi):
            raise ValueError("interval lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        x = _vec(x)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def to_zonotope(self) -> Zonotope:
        return Zonotope(self.center, np.diag(self.radius))


class IntervalMatrix:
    """Elementwise bounded matrix ``[lo, hi]``."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = lo.copy() if hi is None else np.atleast_2d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("interval matrix bounds differ in shape")
        if np.any(lo > hi):
            raise ValueError("interval matrix lower bound exceeds upper bound")
        self.lo = lo
        self.hi = hi

    @classmethod
    def symmetric(cls, E) -> "IntervalMatrix":
        E = np.atleast_2d(np.asarray(E, dtype=float))
        return cls(-E, E)

    @classmethod
    def zeros(cls, shape) -> "IntervalMatrix":
        return cls(np.zeros(shape))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def __add__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        return IntervalMatrix(self.lo + other.lo, self.hi + other.hi)

    def scale(self, s: float) -> "IntervalMatrix":
        a, b = s * self.lo, s * self.hi
        return IntervalMatrix(np.minimum(a, b), np.maximum(a, b))

    def matmul_real(self, M) -> "IntervalMatrix":
        """``[lo, hi] @ M`` for a real matrix ``M`` (midpoint-radius form)."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        mid = self.mid @ M
        rad = self.rad @ np.abs(M)
        return IntervalMatrix(mid - rad, mid + rad)

    def contains(self, M, tol: float = MEMBER_TOL) -> bool:
        M = np.asarray(M, dtype=float)
        return bool(np.all(M >= self.lo - tol) and np.all(M <= self.hi + tol))


class Polytope:
    """Halfspace representation ``{x | C @ x <= d}``; zero rows means the full space."""

    __slots__ = ("C", "d")

    def __init__(self, C, d):
        d = _vec(d)
        C = np.asarray(C, dtype=float)
        if C.ndim == 1:
            C = C.reshape(d.size, -1) if d.size else C.reshape(0, C.size)
        if C.shape[0] != d.size:
            raise ValueError(f"constraint matrix has {C.shape[0]} rows, offset has {d.size}")
        self.C = C
        self.d = d

    @classmethod
    def full(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo, hi = _vec(lo), _vec(hi)
        n = lo.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo]))

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.d.size

    def __repr__(self):
        return f"Polytope(dim={self.dim}, constraints={self.n_constraints})"

    def __eq__(self, other):
        if not isinstance(other, Polytope):
            return NotImplemented
        return self.C.shape == other.C.shape and np.array_equal(self.C, other.C) and np.array_equal(self.d, other.d)

    def __hash__(self):
        return hash((self.C.tobytes(), self.d.tobytes()))

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        return bool(np.all(self.C @ _vec(x) <= self.d + tol))

    def contains_points(self, X, tol: float = MEMBER_TOL) -> np.ndarray:
        """Vectorised membership for the rows of ``X``."""
        X = np.atleast_2d(X)
        if self.n_constraints == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.C.T <= self.d + tol, axis=1)


# ---------------------------------------------------------------------------
# zonotope operations


def _check_dims(a: int, b: int, what: str):
    if a != b:
        raise ValueError(f"dimension mismatch in {what}: {a} vs {b}")


def zono_linear_map(M, Z: Zonotope) -> Zonotope:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _check_dims(M.shape[1], Z.dim, "linear map")
    return Zonotope(M @ Z.c, M @ Z.G)


def zono_minkowski_sum(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    _check_dims(Z1.dim, Z2.dim, "Minkowski sum")
    return Zonotope(Z1.c + Z2.c, np.hstack([Z1.G, Z2.G]))


def zono_convex_hull_enclosure(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    """Zonotope enclosing ``conv(Z1, Z2)``.

    Generator layout is ``[0.5(G1 + G2a), 0.5(G1 - G2a), 0.5(c1 - c2), G2b]``
    where ``G2a`` are the first ``gamma1`` columns of the operand with more
    generators and ``G2b`` the rest. Callers index into this layout, so it
    must not change.
    """
    _check_dims(Z1.dim, Z2.dim, "convex hull")
    if Z1.n_gens > Z2.n_gens:
        Z1, Z2 = Z2, Z1
    g1 = Z1.n_gens
    G2a, G2b = Z2.G[:, :g1], Z2.G[:, g1:]
    G = np.hstack([
        0.5 * (Z1.G + G2a),
        0.5 * (Z1.G - G2a),
        (0.5 * (Z1.c - Z2.c))[:, None],
        G2b,
    ])
    return Zonotope(0.5 * (Z1.c + Z2.c), G)


def zono_interval_enclosure(Z: Zonotope) -> Interval:
    r = np.abs(Z.G).sum(axis=1)
    return Interval(Z.c - r, Z.c + r)


def zono_box(Z: Zonotope) -> Zonotope:
    """Interval enclosure returned as a zonotope with ``dim`` axis-aligned generators."""
    return Zonotope(Z.c, np.diag(np.abs(Z.G).sum(axis=1)))


def zono_reduce(Z: Zonotope, max_gens: int) -> Zonotope:
    """Enclosure with at most ``max_gens`` generators (Girard's method).

    The generators with the smallest ``||g||_1 - ||g||_inf`` are replaced by
    their interval hull, which adds ``dim`` axis-aligned generators.
    """
    n = Z.dim
    if Z.n_gens <= max_gens:
        return Z
    if max_gens < n:
        raise ValueError(f"cannot reduce below {n} generators")
    G = Z.G
    G = G[:, np.abs(G).sum(axis=0) > 0]
    if G.shape[1] <= max_gens:
        return Zonotope(Z.c, G)
    keep = max_gens - n
    score = np.abs(G).sum(axis=0) - np.abs(G).max(axis=0)
    order = np.argsort(score, kind="stable")
    boxed, kept = order[: G.shape[1] - keep], np.sort(order[G.shape[1] - keep:])
    box = np.diag(np.abs(G[:, boxed]).sum(axis=1))
    return Zonotope(Z.c, np.hstack([G[:, kept], box]))


def imat_zono_product_enclosure(M: IntervalMatrix, Z: Zonotope) -> Zonotope:
    """Enclosure of ``{M x | M in [lo, hi], x in Z}``.

    Midpoint-radius split: ``mid @ Z`` plus a box of radius
    ``rad @ (|c| + sum_i |G_i|)``.
    """
    _check_dims(M.shape[1], Z.dim, "interval matrix product")
    mid, rad = M.mid, M.rad
    bound = np.abs(Z.c) + np.abs(Z.G).sum(axis=1)
    return Zonotope(mid @ Z.c, np.hstack([mid @ Z.G, np.diag(rad @ bound)]))


def imat_frobenius_norm(M: IntervalMatrix) -> float:
    return float(np.sqrt((np.maximum(np.abs(M.lo), np.abs(M.hi)) ** 2).sum()))


# ---------------------------------------------------------------------------
# polytope operations


def poly_intersection(P1: Polytope, P2: Polytope) -> Polytope:
    _check_dims(P1.dim, P2.dim, "polytope intersection")
    return Polytope(np.vstack([P1.C, P2.C]), np.concatenate([P1.d, P2.d]))


def poly_is_empty(P: Polytope, lb=None, ub=None) -> bool:
    """Emptiness of ``P`` (optionally intersected with the box ``[lb, ub]``) by one LP.

    Raises :class:`LpError` if the solver fails; that is never reported as
    emptiness.
    """
    if P.n_constraints == 0 and lb is None:
        return False
    lp = LinearProgram(np.zeros(P.dim), A_ub=P.C, b_ub=P.d, lb=lb, ub=ub)
    res = lp_solve(lp)
    if res.status == "unbounded":
        raise LpError("feasibility LP reported unbounded")
    return not res.optimal


def poly_remove_redundant(P: Polytope, lb=None, ub=None, tol: float = 1e-9) -> Polytope:
    """Drop constraints implied by the others (and the optional box ``[lb, ub]``).

    A row is kept only if maximising it over the remaining constraints
    exceeds its offset, i.e. dropping it would enlarge the set.
    """
    if P.n_constraints <= 1:
        return P
    # normalise and remove duplicate rows first
    norms = np.linalg.norm(P.C, axis=1)
    zero = norms < 1e-14
    if np.any(zero & (P.d < -tol)):
        # a violated 0 <= d row: the set is empty; keep that row only
        i = int(np.flatnonzero(zero & (P.d < -tol))[0])
        return Polytope(P.C[i:i + 1], P.d[i:i + 1])
    C = P.C[~zero] / norms[~zero, None]
    d = P.d[~zero] / norms[~zero]
    order = np.lexsort(np.round(np.column_stack([d, C]), 12).T[::-1])
    C, d = C[order], d[order]
    keep_u = [0] if len(d) else []
    for i in range(1, len(d)):
        if not (np.allclose(C[i], C[keep_u[-1]], atol=1e-12) and abs(d[i] - d[keep_u[-1]]) <= 1e-12):
            keep_u.append(i)
    C, d = C[keep_u], d[keep_u]

    keep = np.ones(len(d), dtype=bool)
    for i in range(len(d)):
        others = keep.copy()
        others[i] = False
        if not others.any() and lb is None:
            continue
        lp = LinearProgram(-C[i], A_ub=C[others], b_ub=d[others], lb=lb, ub=ub)
        res = lp_solve(lp)
        if res.status == "unbounded":
            continue
        if res.status == "infeasible":
            # others already empty; this row is irrelevant
            keep[i] = False
            continue
        if -res.value <= d[i] + tol:
            keep[i] = False
    if not keep.any():
        return Polytope.full(P.dim) if lb is None else Polytope(C[:0], d[:0])
    return Polytope(C[keep], d[keep])


def zono_poly_intersects(Z: Zonotope, P: Polytope) -> bool:
    """Whether ``Z`` and ``P`` share a point (LP over the factors)."""
    _check_dims(Z.dim, P.dim, "zonotope/polytope intersection")
    if P.n_constraints == 0:
        return True
    CG = P.C @ Z.G
    rhs = P.d - P.C @ Z.c
    # a single row separates iff its minimum over Z exceeds the offset
    if np.any(-np.abs(CG).sum(axis=1) > rhs + MEMBER_TOL):
        return False
    if P.n_constraints == 1 or Z.n_gens == 0:
        return True
    lp = LinearProgram(np.zeros(Z.n_gens), A_ub=CG, b_ub=rhs, lb=-1.0, ub=1.0)
    res = lp_solve(lp)
    if res.status == "unbounded":
        raise LpError("intersection LP reported unbounded")
    return res.optimal
