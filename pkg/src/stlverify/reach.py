"""Dependency-preserving reachability for linear time-invariant systems.

The reachable sets keep one generator per initial-set factor and one per
input factor and time step, so a factor vector ``alpha`` (initial state plus
piecewise-constant input sequence) maps linearly to a point of every set.
Generators that only carry approximation error are boxed and kept apart.

Factor vector layout: ``[alpha_x; alpha_u1; ...; alpha_uN]`` where
``alpha_uj`` drives the input on ``[(j-1) dt, j dt]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from stlverify.setops import (
    IntervalMatrix,
    Zonotope,
    imat_zono_product_enclosure,
    zono_box,
    zono_convex_hull_enclosure,
    zono_linear_map,
    zono_minkowski_sum,
    zono_reduce,
)

# generator budget of the accumulated input-difference set, in multiples of n
D_ORDER = 20


@dataclass(frozen=True)
class LinearSystem:
    """``x' = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class ReachParams:
    dt: float
    t_end: float
    kappa: int = 4

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kappa < 2:
            raise ValueError("truncation order kappa must be at least 2")
        steps = self.t_end / self.dt
        if steps < 1 - 1e-9 or abs(steps - round(steps)) > 1e-6:
            raise ValueError(f"t_end={self.t_end} is not a positive multiple of dt={self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class FactorIndexTuples:
    """Column indices (0-based) of the factor-driven generators of each set.

    ``H[i]`` / ``K[i]`` split the generators of ``R(t_i)``; ``N[i]`` /
    ``M[i]`` split those of ``R(tau_i)``. Column ``N[i][k]`` multiplies
    entry ``k`` of the factor vector.
    """

    H: list = field(default_factory=list)
    K: list = field(default_factory=list)
    N: list = field(default_factory=list)
    M: list = field(default_factory=list)


@dataclass
class ReachSequence:
    Rt: list
    Rtau: list
    gamma_x: int
    gamma_u: int
    dt: float
    t_end: float
    kappa: int
    layout: str = "sound"
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def steps(self) -> int:
        return len(self.Rtau)

    @property
    def n_factors(self) -> int:
        return self.gamma_x + self.gamma_u * self.steps

    def set_at_half_step(self, j: int) -> Zonotope:
        """``R(t_{j/2})`` for even ``j``, ``R(tau_{(j-1)/2})`` for odd ``j``."""
        return self.Rt[j // 2] if j % 2 == 0 else self.Rtau[j // 2]


# ---------------------------------------------------------------------------
# matrix helpers


def exp_remainder(A, dt: float, kappa: int) -> IntervalMatrix:
    """Taylor remainder ``[-E, E]`` of ``e^{A dt}`` after ``kappa`` terms."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.abs(A) * dt
    norm = np.linalg.norm(M, np.inf)
    if not np.isfinite(norm):
        raise OverflowError("non-finite system matrix")
    if norm < 1.0:
        # sum the tail directly; subtracting partial sums would cancel
        E = np.zeros_like(M)
        term = np.eye(A.shape[0])
        for j in range(1, kappa + 1):
            term = term @ M / j
        j = kappa
        while True:
            j += 1
            term = term @ M / j
            E += term
            if np.abs(term).max(initial=0.0) <= 1e-17 * max(np.abs(E).max(initial=0.0), 1e-300) or j > kappa + 200:
                break
    else:
        with np.errstate(over="raise", invalid="raise"):
            try:
                full = expm(M)
            except FloatingPointError as exc:
                raise OverflowError("remainder overflows; reduce dt") from exc
        if not np.all(np.isfinite(full)):
            raise OverflowError("remainder overflows; reduce dt")
        partial = np.eye(A.shape[0])
        term = np.eye(A.shape[0])
        for j in range(1, kappa + 1):
            term = term @ M / j
            partial += term
        E = np.maximum(full - partial, 0.0)
    return IntervalMatrix.symmetric(E)


def propagation_matrix(A, dt: float) -> np.ndarray:
    """``T = A^{-1}(e^{A dt} - I)``, the input map for constant inputs.

    Uses the inverse when ``A`` is well conditioned, otherwise the series
    ``sum_j A^j dt^{j+1} / (j+1)!`` (or an augmented exponential when the
    series would converge slowly).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n and np.linalg.cond(A) < 1e8:
        return np.linalg.solve(A, expm(A * dt) - np.eye(n))
    if np.linalg.norm(A, np.inf) * dt <= 1.0:
        return _propagation_series(A, dt)
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return expm(aug * dt)[:n, n:]


def _propagation_series(A, dt):
    n = A.shape[0]
    term = np.eye(n) * dt
    T = term.copy()
    for j in range(1, 200):
        term = term @ A * dt / (j + 1)
        T += term
        if np.abs(term).max(initial=0.0) <= 1e-17 * max(np.abs(T).max(initial=0.0), 1e-300):
            break
    return T


def curvature_term(A, dt: float, order: int) -> IntervalMatrix:
    """Interval matrix ``T^(o) = sum_{j=2}^{o} [(j^{-j/(j-1)} - j^{-1/(j-1)}) dt^j, 0] A^{j-1} / j!``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    lo = np.zeros((n, n))
    hi = np.zeros((n, n))
    Apow = np.eye(n)
    for j in range(2, order + 1):
        Apow = Apow @ A
        coef = (j ** (-j / (j - 1)) - j ** (-1.0 / (j - 1))) * dt**j / math.factorial(j)
        # coef <= 0, so [coef, 0] * M spans [coef*M, 0] or [0, coef*M] per entry
        P = coef * Apow
        lo += np.minimum(P, 0.0)
        hi += np.maximum(P, 0.0)
    return IntervalMatrix(lo, hi)


def curvature_matrices(A, dt: float, kappa: int) -> tuple[IntervalMatrix, IntervalMatrix]:
    """``F = T^(kappa) A + E`` and ``G = T^(kappa+1) + E dt``."""
    if kappa < 2:
        raise ValueError("truncation order kappa must be at least 2")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    E = exp_remainder(A, dt, kappa)
    F = curvature_term(A, dt, kappa).matmul_real(A) + E
    G = curvature_term(A, dt, kappa + 1) + E.scale(dt)
    return F, G


def input_difference_D(A, dt: float, kappa: int, U0: Zonotope) -> Zonotope:
    """Bloating that covers time-varying instead of constant inputs over one step."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    terms = []
    Apow = np.eye(n)
    for j in range(1, kappa + 1):
        Apow = Apow @ A
        terms.append(Apow * dt ** (j + 1) / math.factorial(j + 1))
    total = sum(terms, np.zeros((n, n)))
    D = zono_linear_map(total, U0)
    for M in terms:
        D = zono_minkowski_sum(D, zono_linear_map(M, U0))
    E = exp_remainder(A, dt, kappa)
    D = zono_minkowski_sum(D, imat_zono_product_enclosure(E.scale(2.0 * dt), U0))
    return D


# ---------------------------------------------------------------------------
# reachable sets


def _input_schedule(U, steps: int) -> list:
    if isinstance(U, Zonotope):
        return [U] * steps
    U = list(U)
    if len(U) != steps:
        raise ValueError(f"input schedule has {len(U)} sets, expected {steps}")
    gam = {u.n_gens for u in U}
    if len(gam) != 1:
        raise ValueError("all input sets of a schedule need the same generator count")
    return U


def reach_sequence(
    sys: LinearSystem,
    X0: Zonotope,
    U: Zonotope | Sequence[Zonotope],
    params: ReachParams,
    layout: str = "sound",
    d_order: int | None = D_ORDER,
) -> tuple[ReachSequence, FactorIndexTuples]:
    """Time-point and time-interval reachable sets with factor bookkeeping.

    ``U`` is a single input zonotope or one zonotope per step. With
    ``layout="sound"`` (default) the time-interval set is the hull of the
    two adjacent time-point sets (including the input generators) and the
    step's own input generators count as error. ``layout="classic"`` follows
    the classic scheme that adds the end-of-step input set to the hull of
    the homogeneous parts; it is kept for comparison only, because its
    factor map is not dependency preserving for the interior of a step.

    The accumulated input-difference set is propagated as a zonotope with
    at most ``d_order * n`` generators and boxed only where it enters a
    reachable set; ``d_order=None`` boxes it after every step instead,
    which wraps badly for lightly damped or coupled dynamics.
    """
    if layout not in ("sound", "classic"):
        raise ValueError(f"unknown layout {layout!r}")
    A, B = sys.A, sys.B
    n = sys.n
    if X0.dim != n:
        raise ValueError(f"X0 has dimension {X0.dim}, system has {n}")
    N = params.steps
    dt, kappa = params.dt, params.kappa
    Us = _input_schedule(U, N)
    for u in Us:
        if u.dim != sys.m:
            raise ValueError(f"input set has dimension {u.dim}, system has {sys.m} inputs")
    constant_U = isinstance(U, Zonotope)
    gx, gu = X0.n_gens, Us[0].n_gens

    Phi = expm(A * dt)
    T = propagation_matrix(A, dt)
    F, Gc = curvature_matrices(A, dt, kappa)
    u_tilde = [B @ u.c for u in Us]
    U0 = [Zonotope(np.zeros(n), B @ u.G) for u in Us]
    if constant_U:
        Dstep = [input_difference_D(A, dt, kappa, U0[0])] * N
    else:
        Dstep = [input_difference_D(A, dt, kappa, u) for u in U0]

    zero = Zonotope(np.zeros(n))
    H = [X0]
    Pc = [zero]
    Dsets = [zero]
    Csets = []
    Rt = [X0]
    Rtau = []
    tup = FactorIndexTuples()
    tup.H.append(list(range(gx)))
    tup.K.append([])

    C = zono_box(zono_minkowski_sum(imat_zono_product_enclosure(F, X0), imat_zono_product_enclosure(Gc, Zonotope(u_tilde[0]))))
    for i in range(N):
        if constant_U:
            Ci = C
            C = zono_linear_map(Phi, C)
        else:
            Ci = zono_box(zono_minkowski_sum(
                imat_zono_product_enclosure(F, H[i]),
                imat_zono_product_enclosure(Gc, Zonotope(u_tilde[i])),
            ))
        Csets.append(Ci)
        H_next = zono_linear_map(Phi, H[i])
        H_next = Zonotope(H_next.c + T @ u_tilde[i], H_next.G)
        TU = zono_linear_map(T, U0[i])
        P_next = zono_minkowski_sum(zono_linear_map(Phi, Pc[i]), TU)
        D_next = zono_minkowski_sum(zono_linear_map(Phi, Dsets[i]), Dstep[i])
        D_next = zono_box(D_next) if d_order is None else zono_reduce(D_next, d_order * n)
        H.append(H_next)
        Pc.append(P_next)
        Dsets.append(D_next)

        D_box = zono_box(D_next)
        R_next = zono_minkowski_sum(zono_minkowski_sum(H_next, P_next), D_box)
        Rt.append(R_next)
        nf = gx + gu * (i + 1)
        tup.H.append(list(range(nf)))
        tup.K.append(list(range(nf, R_next.n_gens)))

        if layout == "sound":
            Z1 = zono_minkowski_sum(H[i], Pc[i])
            Z2 = zono_minkowski_sum(H_next, P_next)
            hull = zono_convex_hull_enclosure(Z1, Z2)
            Cu = imat_zono_product_enclosure(F, Pc[i])
            Cu = zono_minkowski_sum(Cu, imat_zono_product_enclosure(Gc, U0[i]))
            bloat = zono_box(zono_minkowski_sum(zono_minkowski_sum(D_box, Ci), Cu))
            R_tau = zono_minkowski_sum(hull, bloat)
            dep = list(range(gx + gu * i))
        else:
            hull = zono_convex_hull_enclosure(H[i], H_next)
            R_tau = zono_minkowski_sum(zono_minkowski_sum(zono_minkowski_sum(hull, P_next), D_box), Ci)
            dep = list(range(gx)) + list(range(2 * gx + 1, 2 * gx + 1 + gu * (i + 1)))
        Rtau.append(R_tau)
        tup.N.append(dep)
        dep_set = set(dep)
        tup.M.append([k for k in range(R_tau.n_gens) if k not in dep_set])

    seq = ReachSequence(
        Rt, Rtau, gx, gu, dt, params.t_end, kappa, layout,
        diagnostics={"H": H, "Pc": Pc, "D": Dsets, "C": Csets, "Phi": Phi, "T": T, "u_tilde": u_tilde, "U0": U0},
    )
    return seq, tup


@dataclass
class DependencyMap:
    """Maps a factor vector to an approximate state plus an error zonotope."""

    seq: ReachSequence
    tuples: FactorIndexTuples

    def _pick(self, t: float):
        dt = self.seq.dt
        q = t / dt
        i = int(round(q))
        if abs(q - i) <= 1e-9 and 0 <= i <= self.seq.steps:
            return self.seq.Rt[i], self.tuples.H[i], self.tuples.K[i]
        i = int(math.floor(q))
        if not 0 <= i < self.seq.steps:
            raise ValueError(f"time {t} outside [0, {self.seq.t_end}]")
        return self.seq.Rtau[i], self.tuples.N[i], self.tuples.M[i]

    def mu(self, t: float, alpha) -> np.ndarray:
        """Approximate solution (without the center; see :meth:`error`)."""
        Z, dep, _ = self._pick(t)
        a = np.asarray(alpha, dtype=float)
        return Z.G[:, dep] @ a[: len(dep)]

    def error(self, t: float) -> Zonotope:
        Z, _, err = self._pick(t)
        return Zonotope(Z.c, Z.G[:, err])


def dependency_eval(seq: ReachSequence, tuples: FactorIndexTuples, t: float, alpha) -> tuple[np.ndarray, Zonotope]:
    dm = DependencyMap(seq, tuples)
    return dm.mu(t, alpha), dm.error(t)


# ---------------------------------------------------------------------------
# simulation


def factors_to_signal(X0: Zonotope, U, alpha, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Initial state and per-step inputs (``steps x m``) for a factor vector."""
    Us = _input_schedule(U, steps)
    a = np.asarray(alpha, dtype=float)
    gx, gu = X0.n_gens, Us[0].n_gens
    x0 = X0.point(a[:gx])
    u = np.array([Us[j].point(a[gx + gu * j: gx + gu * (j + 1)]) for j in range(steps)])
    return x0, u.reshape(steps, -1)


def simulate(sys: LinearSystem, x0, inputs, dt: float, substeps: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exact solution for a piecewise-constant input.

    ``inputs[j]`` holds on ``[j dt, (j+1) dt]``. Returns ``(times, states)``
    sampled ``substeps`` times per step.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != sys.m and inputs.shape[0] == sys.m:
        inputs = inputs.T
    h = dt / substeps
    Phi = expm(sys.A * h)
    TB = propagation_matrix(sys.A, h) @ sys.B
    x = np.asarray(x0, dtype=float).copy()
    states = [x.copy()]
    for u in inputs:
        for _ in range(substeps):
            x = Phi @ x + TB @ u
            states.append(x.copy())
    times = np.arange(len(states)) * h
    return times, np.array(states)
