"""Verdict, trajectory, reach-set and occupancy emission."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stlverify.optim.lp import LinearProgram, lp_solve
from stlverify.reach import FactorIndexTuples, ReachSequence
from stlverify.setops import Polytope, Zonotope, zono_interval_enclosure


def zono_polygon(Z: Zonotope, dims=(0, 1)) -> np.ndarray:
    """Vertices (counter-clockwise) of the projection of ``Z`` onto two coordinates."""
    c = Z.c[list(dims)]
    G = Z.G[list(dims)]
    G = G[:, np.abs(G).sum(axis=0) > 1e-15]
    if G.shape[1] == 0:
        return c[None, :]
    # orient every generator into the upper half plane, then walk by angle
    flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
    G = np.where(flip, -G, G)
    G = G[:, np.argsort(np.arctan2(G[1], G[0]), kind="stable")]
    start = c - G.sum(axis=1)
    half = np.cumsum(np.hstack([np.zeros((2, 1)), 2 * G]), axis=1)[:, :-1]
    lower = start[:, None] + half
    upper = 2 * c[:, None] - lower
    return np.hstack([lower, upper]).T


def write_counterexample_csv(path, trace, inputs) -> None:
    n = trace.states.shape[1]
    m = inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k + 1}" for k in range(n)] + [f"u{k + 1}" for k in range(m)])
        for t, x, u in zip(trace.times, trace.states, inputs):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in u])


def reach_to_json(seq: ReachSequence, dims=(0, 1)) -> dict:
    """Interval hulls of every set plus 2-D polygon shadows on ``dims``."""

    def entry(Z, t0, t1):
        box = zono_interval_enclosure(Z)
        out = {"t": [t0, t1], "lo": box.lo.tolist(), "hi": box.hi.tolist()}
        if Z.dim >= 2:
            out["polygon"] = zono_polygon(Z, dims).tolist()
        return out

    dt = seq.dt
    return {
        "dt": dt,
        "kappa": seq.kappa,
        "dims": list(dims),
        "time_points": [entry(Z, i * dt, i * dt) for i, Z in enumerate(seq.Rt)],
        "time_intervals": [entry(Z, i * dt, (i + 1) * dt) for i, Z in enumerate(seq.Rtau)],
    }


@dataclass
class Occupancy:
    """Union over legal factor polytopes of the time-interval reachable sets.

    Step ``i`` covers ``{c_i + G_i a + E_i b | a in some P, |a|, |b| <= 1}``
    where ``G_i`` has one column per factor.
    """

    dt: float
    centers: list
    factor_gens: list
    error_gens: list
    polytopes: list

    @classmethod
    def from_reach(cls, seq: ReachSequence, tuples: FactorIndexTuples, legal: list) -> "Occupancy":
        p = seq.n_factors
        cs, Gs, Es = [], [], []
        for Z, dep, err in zip(seq.Rtau, tuples.N, tuples.M):
            G = np.zeros((Z.dim, p))
            G[:, : len(dep)] = Z.G[:, dep]
            cs.append(Z.c)
            Gs.append(G)
            Es.append(Z.G[:, err])
        return cls(seq.dt, cs, Gs, Es, list(legal))

    @property
    def steps(self) -> int:
        return len(self.centers)

    def _lp(self, i: int, P: Polytope, dims, objective=None, target=None):
        d = list(dims)
        G, E = self.factor_gens[i][d], self.error_gens[i][d]
        p, e = G.shape[1], E.shape[1]
        rows = P.C if P.n_constraints else np.zeros((0, p))
        A_ub = np.hstack([rows, np.zeros((rows.shape[0], e))])
        kw = {}
        if target is not None:
            kw = {"A_eq": np.hstack([G, E]), "b_eq": np.asarray(target, float) - self.centers[i][d]}
        c = np.zeros(p + e) if objective is None else -np.concatenate([G.T @ objective, E.T @ objective])
        return lp_solve(LinearProgram(c, A_ub=A_ub, b_ub=P.d, lb=-1.0, ub=1.0, **kw))

    def contains(self, i: int, y, dims=(0, 1)) -> bool:
        return any(self._lp(i, P, dims, target=y).status == "optimal" for P in self.polytopes)

    def support(self, i: int, direction, dims=(0, 1)) -> float:
        """Largest ``direction . y`` over the occupancy at step ``i``; ``-inf`` if empty."""
        direction = np.asarray(direction, dtype=float)
        best = -np.inf
        for P in self.polytopes:
            res = self._lp(i, P, dims, objective=direction)
            if res.status == "optimal":
                best = max(best, -res.value + float(direction @ self.centers[i][list(dims)]))
        return best

    def to_json(self) -> dict:
        return {
            "dt": self.dt,
            "factor_polytopes": [{"C": P.C.tolist(), "d": P.d.tolist()} for P in self.polytopes],
            "steps": [
                {"t": [i * self.dt, (i + 1) * self.dt], "c": c.tolist(), "G": G.tolist(), "G_err": E.tolist()}
                for i, (c, G, E) in enumerate(zip(self.centers, self.factor_gens, self.error_gens))
            ],
        }


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
