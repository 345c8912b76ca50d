"""Boolean monitor for sampled traces.

The trace is interpolated piecewise linearly. Quantifiers over a time window
are evaluated on the trace samples inside the window plus the window end
points; for a linear predicate directly under a quantifier this is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stlverify.stl.ast import (
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
)
from stlverify.stl.transform import formula_horizon

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class SampledTrace:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        X = np.asarray(self.states, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] != t.size:
            raise ValueError(f"{t.size} times but {X.shape[0]} states")
        if t.size == 0:
            raise ValueError("empty trace")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", X)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """Interpolated state(s) at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.dim))
        for k in range(self.dim):
            out[:, k] = np.interp(t, self.times, self.states[:, k])
        return out


class _Monitor:
    def __init__(self, trace: SampledTrace):
        self.tr = trace
        self.memo: dict = {}

    def grid(self, lo: float, hi: float) -> np.ndarray:
        t = self.tr.times
        inner = t[(t > lo + _TIME_TOL) & (t < hi - _TIME_TOL)]
        return np.concatenate([[lo], inner, [hi]]) if hi > lo + _TIME_TOL else np.array([lo])

    def atom_values(self, f: Atom, ts: np.ndarray) -> np.ndarray:
        return np.asarray(f.holds(self.tr.at(ts)), dtype=bool)

    def sat_many(self, f: Formula, ts: np.ndarray) -> np.ndarray:
        if isinstance(f, Atom):
            return self.atom_values(f, ts)
        if isinstance(f, TrueF):
            return np.ones(ts.size, dtype=bool)
        if isinstance(f, FalseF):
            return np.zeros(ts.size, dtype=bool)
        if isinstance(f, Not):
            return ~self.sat_many(f.arg, ts)
        if isinstance(f, And):
            out = np.ones(ts.size, dtype=bool)
            for a in f.args:
                out &= self.sat_many(a, ts)
            return out
        if isinstance(f, Or):
            out = np.zeros(ts.size, dtype=bool)
            for a in f.args:
                out |= self.sat_many(a, ts)
            return out
        return np.array([self.sat(f, float(t)) for t in ts], dtype=bool)

    def sat(self, f: Formula, t: float) -> bool:
        key = (id(f), round(t, 9))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if isinstance(f, (Atom, TrueF, FalseF, Not, And, Or)):
            v = bool(self.sat_many(f, np.array([t]))[0])
        elif isinstance(f, Next):
            v = self.sat(f.arg, t + f.a)
        elif isinstance(f, Globally):
            v = bool(self.sat_many(f.arg, self.grid(t + f.a, t + f.b)).all())
        elif isinstance(f, Finally):
            v = bool(self.sat_many(f.arg, self.grid(t + f.a, t + f.b)).any())
        elif isinstance(f, Until):
            v = self._until(f.lhs, f.rhs, t, t + f.a, t + f.b)
        elif isinstance(f, Release):
            v = self._release(f.lhs, f.rhs, t, t + f.a, t + f.b)
        else:
            raise TypeError(f"cannot monitor {type(f).__name__}")
        self.memo[key] = v
        return v

    def _until(self, lhs, rhs, t0, lo, hi) -> bool:
        # exists t in [lo, hi]: rhs(t) and lhs holds on [t0, t)
        cand = self.grid(lo, hi)
        ok2 = self.sat_many(rhs, cand)
        if not ok2.any():
            return False
        before = self.grid(t0, hi)
        ok1 = self.sat_many(lhs, before)
        bad = before[~ok1]
        first_bad = bad.min() if bad.size else np.inf
        # lhs must hold strictly before t: any failure at time < t rules it out
        return bool(np.any(ok2 & (cand <= first_bad + _TIME_TOL)))

    def _release(self, lhs, rhs, t0, lo, hi) -> bool:
        # every t in [lo, hi] has rhs(t) or lhs somewhere in [t0, t)
        cand = self.grid(lo, hi)
        ok2 = self.sat_many(rhs, cand)
        if ok2.all():
            return True
        before = self.grid(t0, hi)
        good = before[self.sat_many(lhs, before)]
        first_good = good.min() if good.size else np.inf
        return bool(np.all(ok2 | (cand > first_good + _TIME_TOL)))


def monitor_trace(phi: Formula, trace: SampledTrace) -> bool:
    """Satisfaction of ``phi`` at time 0 by ``trace``."""
    need = formula_horizon(phi)
    if trace.end < need - 1e-9:
        raise ValueError(f"trace ends at {trace.end:g} but the formula needs {need:g}")
    return _Monitor(trace).sat(phi, float(trace.times[0]))
