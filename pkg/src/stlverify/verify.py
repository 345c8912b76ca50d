"""The automated verify-or-falsify loop with time-step refinement."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from stlverify.modelcheck import (
    PolytopeLimitExceeded,
    check_reach_sequence,
    pre_evaluate_predicates,
    reach_horizon,
    rtl_entailment_wholeset,
)
from stlverify.optim.lp import LpError
from stlverify.optim.milp import NodeLimitExceeded, find_counterexample
from stlverify.reach import LinearSystem, ReachParams, curvature_term, factors_to_signal, reach_sequence, simulate
from stlverify.setops import Zonotope, imat_frobenius_norm
from stlverify.stl.ast import Formula
from stlverify.stl.monitor import SampledTrace, monitor_trace
from stlverify.stl.rtl import compile_formula
from stlverify.stl.transform import formula_horizon, negate

log = logging.getLogger(__name__)


@dataclass
class PiecewiseInput:
    """Input set that changes over time: ``sets[k]`` applies from ``breaks[k]`` on.

    ``breaks`` starts at 0 and is increasing; the last set holds forever.
    """

    breaks: Sequence[float]
    sets: Sequence[Zonotope]

    def __post_init__(self):
        self.breaks = [float(b) for b in self.breaks]
        self.sets = list(self.sets)
        if not self.sets or len(self.breaks) != len(self.sets):
            raise ValueError("need one break time per input set")
        if self.breaks[0] != 0.0 or any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise ValueError("break times must start at 0 and increase")
        if len({s.n_gens for s in self.sets}) != 1 or len({s.dim for s in self.sets}) != 1:
            raise ValueError("all input sets need the same dimension and generator count")

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    def per_step(self, dt: float, steps: int) -> list | None:
        """One set per step, or ``None`` if a break falls strictly inside a step."""
        for b in self.breaks[1:]:
            q = b / dt
            if abs(q - round(q)) > 1e-9 and b < steps * dt:
                return None
        out = []
        for i in range(steps):
            t = (i + 0.5) * dt
            k = max(idx for idx, b in enumerate(self.breaks) if b <= t)
            out.append(self.sets[k])
        return out


def _inputs_for(U, dt: float, steps: int):
    if isinstance(U, Zonotope):
        return U
    if isinstance(U, PiecewiseInput):
        return U.per_step(dt, steps)
    U = list(U)
    if len(U) != steps:
        raise ValueError("an explicit per-step input list must match the step count")
    return U


@dataclass
class VerifierConfig:
    max_iterations: int = 12
    milp_node_limit: int = 20_000
    max_polytopes: int = 10_000
    epsilon: float = 1e-6
    dt_init: float | None = None
    kappa: int | None = None
    kappa_cap: int = 100
    substeps: int = 8
    baseline_wholeset: bool = False
    pre_evaluate: bool = True
    cnf: bool = True
    falsify_only: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class Verdict:
    result: str  # "safe" | "unsafe" | "unknown"
    iterations: int
    dt_final: float
    kappa: int
    counterexample: SampledTrace | None = None
    counterexample_inputs: np.ndarray | None = None
    alpha: np.ndarray | None = None
    unsafe_factors: list | None = None
    wholeset: list = field(default_factory=list)
    history: list = field(default_factory=list)
    wall_time_ms: float = 0.0
    reach: object = None

    def to_json(self) -> dict:
        out = {
            "result": self.result,
            "iterations": self.iterations,
            "dt_final": self.dt_final,
            "kappa": self.kappa,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }
        if self.wholeset:
            out["wholeset"] = [{"dt": dt, "result": "safe" if ok else "unsafe"} for dt, ok in self.wholeset]
        return out


def tune_truncation_order(A, dt: float, tol: float = 1e-10, cap: int = 100) -> int:
    """Smallest ``kappa >= 2`` whose curvature term has converged in Frobenius norm."""
    kappa = 2
    cur = imat_frobenius_norm(curvature_term(A, dt, kappa))
    while True:
        nxt = imat_frobenius_norm(curvature_term(A, dt, kappa + 1))
        if nxt == 0.0 or 1.0 - cur / nxt <= tol:
            return kappa
        kappa += 1
        if kappa > cap:
            raise RuntimeError(f"truncation order exceeds {cap}")
        cur = nxt


def counterexample_trajectory(
    sys: LinearSystem,
    X0: Zonotope,
    U,
    alpha,
    dt: float,
    t_end: float,
    substeps: int = 1,
) -> tuple[SampledTrace, np.ndarray]:
    """Exact trajectory for the factor vector ``alpha``.

    Returns the trace (``substeps`` samples per step) and the input active
    from each sample time on.
    """
    steps = int(round(t_end / dt))
    Us = _inputs_for(U, dt, steps)
    if Us is None:
        raise ValueError("input schedule is not aligned with the time step")
    gx = X0.n_gens
    gu = (Us if isinstance(Us, Zonotope) else Us[0]).n_gens
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != gx + gu * steps:
        raise ValueError(f"factor vector has {alpha.size} entries, expected {gx + gu * steps}")
    x0, u = factors_to_signal(X0, Us, alpha, steps)
    times, states = simulate(sys, x0, u, dt, substeps)
    per_sample = np.repeat(u, substeps, axis=0)
    per_sample = np.vstack([per_sample, per_sample[-1:]])
    return SampledTrace(times, states), per_sample


def predict_safe_behaviors(sys, X0, U, phi: Formula, dt: float, kappa: int, t_end: float | None = None,
                           max_polytopes: int = 10_000):
    """Factor polytopes that may satisfy ``phi`` (from checking ``not phi``), with the reach sequence."""
    neg = negate(phi)
    checklist = compile_formula(neg, dt, sys.n)
    horizon = reach_horizon(checklist, formula_horizon(phi), dt)
    if t_end is not None:
        horizon = max(horizon, t_end)
    steps = int(round(horizon / dt))
    Us = _inputs_for(U, dt, steps)
    reach, tuples = reach_sequence(sys, X0, Us, ReachParams(dt, horizon, kappa))
    legal, _ = check_reach_sequence(reach, tuples, checklist, True, max_polytopes)
    return legal, reach, tuples


def verify(sys: LinearSystem, X0: Zonotope, U, phi: Formula, cfg: VerifierConfig | None = None) -> Verdict:
    """Decide whether every trajectory satisfies ``phi``, refining the time step as needed.

    ``U`` is an input zonotope or a :class:`PiecewiseInput`.
    """
    cfg = cfg or VerifierConfig()
    start = time.perf_counter()
    neg = negate(phi)
    horizon = formula_horizon(phi)
    dt = cfg.dt_init or (horizon if horizon > 0 else 1.0)
    verdict = Verdict("unknown", 0, dt, 0)

    for it in range(1, cfg.max_iterations + 1):
        verdict.iterations = it
        verdict.dt_final = dt
        entry = {"dt": dt}
        try:
            kappa = cfg.kappa or tune_truncation_order(sys.A, dt, cap=cfg.kappa_cap)
            verdict.kappa = kappa
            entry["kappa"] = kappa
            cl_phi = compile_formula(phi, dt, sys.n, cnf=cfg.cnf)
            cl_neg = compile_formula(neg, dt, sys.n, cnf=cfg.cnf)
            t_end = max(reach_horizon(cl_phi, horizon, dt), reach_horizon(cl_neg, horizon, dt))
            steps = int(round(t_end / dt))
            Us = _inputs_for(U, dt, steps)
            if Us is None:
                entry["skipped"] = "input schedule not aligned"
                verdict.history.append(entry)
                dt /= 2
                continue
            reach, tuples = reach_sequence(sys, X0, Us, ReachParams(dt, t_end, kappa))
            verdict.reach = (reach, tuples)
            if cfg.baseline_wholeset:
                ok = rtl_entailment_wholeset(reach, cl_phi)
                verdict.wholeset.append((dt, ok))
                entry["wholeset"] = "safe" if ok else "unsafe"

            if not cfg.falsify_only:
                f = pre_evaluate_predicates(reach, phi) if cfg.pre_evaluate else phi
                cl = compile_formula(f, dt, sys.n, cnf=cfg.cnf) if cfg.pre_evaluate else cl_phi
                unsafe, stats = check_reach_sequence(reach, tuples, cl, cfg.pre_evaluate, cfg.max_polytopes)
                entry["unsafe_polytopes"] = len(unsafe)
                if not unsafe:
                    verdict.result = "safe"
                    verdict.unsafe_factors = []
                    verdict.history.append(entry)
                    log.info("iteration %d (dt=%g): safe", it, dt)
                    break
                verdict.unsafe_factors = unsafe

            g = pre_evaluate_predicates(reach, neg) if cfg.pre_evaluate else neg
            cl = compile_formula(g, dt, sys.n, cnf=cfg.cnf) if cfg.pre_evaluate else cl_neg
            legal, _ = check_reach_sequence(reach, tuples, cl, cfg.pre_evaluate, cfg.max_polytopes)
            entry["legal_polytopes"] = len(legal)
            res = find_counterexample(legal, reach.n_factors, cfg.epsilon, cfg.milp_node_limit)
            if res.status == "optimal":
                trace, inputs = counterexample_trajectory(sys, X0, Us, res.alpha, dt, t_end, cfg.substeps)
                if not monitor_trace(phi, trace):
                    verdict.result = "unsafe"
                    verdict.counterexample = trace
                    verdict.counterexample_inputs = inputs
                    verdict.alpha = res.alpha
                    verdict.history.append(entry)
                    log.info("iteration %d (dt=%g): unsafe", it, dt)
                    break
                entry["rejected_counterexample"] = True
                log.info("iteration %d: candidate counterexample failed validation", it)
        except (OverflowError, NodeLimitExceeded, PolytopeLimitExceeded, LpError, RuntimeError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            log.warning("iteration %d (dt=%g) failed: %s", it, dt, exc)
        verdict.history.append(entry)
        log.info("iteration %d (dt=%g): undecided", it, dt)
        dt /= 2

    verdict.wall_time_ms = 1000.0 * (time.perf_counter() - start)
    return verdict


def monte_carlo_check(sys, X0, U, phi, n: int, dt: float, seed: int = 0, substeps: int = 4) -> int:
    """Number of violations of ``phi`` among ``n`` random piecewise-constant trajectories."""
    rng = np.random.default_rng(seed)
    horizon = max(formula_horizon(phi), dt)
    steps = int(math.ceil(horizon / dt - 1e-9))
    Us = _inputs_for(U, dt, steps)
    if Us is None:
        raise ValueError("input schedule is not aligned with the Monte-Carlo step")
    gu = (Us if isinstance(Us, Zonotope) else Us[0]).n_gens
    p = X0.n_gens + gu * steps
    bad = 0
    for k in range(n):
        a = rng.uniform(-1, 1, p)
        if k % 2 == 0:
            a = np.sign(a)
        x0, u = factors_to_signal(X0, Us, a, steps)
        t, X = simulate(sys, x0, u, dt, substeps)
        if not monitor_trace(phi, SampledTrace(t, X)):
            bad += 1
    return bad
