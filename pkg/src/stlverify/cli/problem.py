"""Problem files: JSON description of a system, its uncertain sets and a formula."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stlverify.reach import LinearSystem
from stlverify.setops import Zonotope
from stlverify.stl.ast import Formula
from stlverify.stl.parser import StlSyntaxError, parse_stl
from stlverify.verify import PiecewiseInput


class ProblemError(ValueError):
    """Invalid problem file; the message starts with the offending JSON path."""


@dataclass
class ClosedLoopSpec:
    """Plant ``(A, B)`` tracking a reference under the feedback gain ``K``.

    The assembled state is ``[x; x_ref]`` and the input ``[u_ref; w]`` with
    ``w`` a disturbance on the plant.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        n, m = self.B.shape
        if self.A.shape != (n, n):
            raise ProblemError(f"closed_loop.A: expected {n}x{n}, got {self.A.shape[0]}x{self.A.shape[1]}")
        if self.K.shape != (m, n):
            raise ProblemError(f"closed_loop.K: expected {m}x{n}, got {self.K.shape[0]}x{self.K.shape[1]}")

    def system(self) -> LinearSystem:
        A, B, K = self.A, self.B, self.K
        n, m = B.shape
        Acl = np.block([[A + B @ K, -B @ K], [np.zeros((n, n)), A]])
        Bcl = np.block([[B, B], [B, np.zeros((n, m))]])
        return LinearSystem(Acl, Bcl)


@dataclass
class ProblemFile:
    system: LinearSystem
    X0: Zonotope
    U: Zonotope | PiecewiseInput
    spec: str
    closed_loop: ClosedLoopSpec | None = None
    benchmark: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def formula(self) -> Formula:
        return parse_stl(self.spec, self.system.n)

    def to_dict(self) -> dict:
        out: dict = {}
        if self.closed_loop is not None:
            cl = self.closed_loop
            out["closed_loop"] = {"A": cl.A.tolist(), "B": cl.B.tolist(), "K": cl.K.tolist()}
        else:
            out["A"] = self.system.A.tolist()
            out["B"] = self.system.B.tolist()
        out["X0"] = _zono_dict(self.X0)
        if isinstance(self.U, PiecewiseInput):
            out["U_schedule"] = {"breaks": list(self.U.breaks), "sets": [_zono_dict(s) for s in self.U.sets]}
        else:
            out["U"] = _zono_dict(self.U)
        out["spec"] = self.spec
        if self.benchmark is not None:
            out["benchmark"] = self.benchmark
        out.update(self.extra)
        return out


def _zono_dict(Z: Zonotope) -> dict:
    return {"c": Z.c.tolist(), "G": Z.G.tolist()}


def _matrix(value, path: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"{path}: not a numeric matrix ({exc})") from None
    if M.ndim != 2:
        raise ProblemError(f"{path}: expected a 2-D array, got {M.ndim} dimension(s)")
    if not np.all(np.isfinite(M)):
        raise ProblemError(f"{path}: entries must be finite")
    return M


def _zono(value, n: int, path: str) -> Zonotope:
    if not isinstance(value, dict) or "c" not in value:
        raise ProblemError(f"{path}: expected an object with fields 'c' and 'G'")
    try:
        c = np.array(value["c"], dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ProblemError(f"{path}.c: not a numeric vector") from None
    if c.size != n:
        raise ProblemError(f"{path}.c: expected length {n}, got {c.size}")
    G = value.get("G", [[] for _ in range(n)])
    G = np.array(G, dtype=float)
    if G.size == 0:
        G = np.zeros((n, 0))
    if G.ndim != 2 or G.shape[0] != n:
        raise ProblemError(f"{path}.G: expected {n} rows, got shape {G.shape}")
    return Zonotope(c, G)


_KNOWN = {"A", "B", "closed_loop", "X0", "U", "U_schedule", "spec", "benchmark"}


def problem_from_dict(data: dict) -> ProblemFile:
    """Validate a decoded problem file."""
    if not isinstance(data, dict):
        raise ProblemError("$: expected a JSON object")
    closed = None
    if "closed_loop" in data:
        cl = data["closed_loop"]
        if not isinstance(cl, dict) or not {"A", "B", "K"} <= set(cl):
            raise ProblemError("closed_loop: expected fields 'A', 'B' and 'K'")
        closed = ClosedLoopSpec(_matrix(cl["A"], "closed_loop.A"), _matrix(cl["B"], "closed_loop.B"),
                                _matrix(cl["K"], "closed_loop.K"))
        sys = closed.system()
    else:
        for key in ("A", "B"):
            if key not in data:
                raise ProblemError(f"{key}: missing")
        A = _matrix(data["A"], "A")
        B = _matrix(data["B"], "B")
        if A.shape[0] != A.shape[1]:
            raise ProblemError(f"A: must be square, got {A.shape[0]}x{A.shape[1]}")
        if B.shape[0] != A.shape[0]:
            raise ProblemError(f"B: expected {A.shape[0]} rows, got {B.shape[0]}")
        sys = LinearSystem(A, B)

    if "X0" not in data:
        raise ProblemError("X0: missing")
    X0 = _zono(data["X0"], sys.n, "X0")
    if ("U" in data) == ("U_schedule" in data):
        raise ProblemError("U: give exactly one of 'U' and 'U_schedule'")
    if "U" in data:
        U = _zono(data["U"], sys.m, "U")
    else:
        sch = data["U_schedule"]
        if not isinstance(sch, dict) or "breaks" not in sch or "sets" not in sch:
            raise ProblemError("U_schedule: expected fields 'breaks' and 'sets'")
        sets = [_zono(s, sys.m, f"U_schedule.sets[{k}]") for k, s in enumerate(sch["sets"])]
        try:
            U = PiecewiseInput(sch["breaks"], sets)
        except ValueError as exc:
            raise ProblemError(f"U_schedule: {exc}") from None

    spec = data.get("spec")
    if not isinstance(spec, str):
        raise ProblemError("spec: expected an STL string")
    try:
        parse_stl(spec, sys.n)
    except StlSyntaxError as exc:
        raise ProblemError(f"spec: {exc}") from None
    extra = {k: v for k, v in data.items() if k not in _KNOWN}
    return ProblemFile(sys, X0, U, spec, closed, data.get("benchmark"), extra)


def load_problem(path) -> ProblemFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProblemError(f"$: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return problem_from_dict(data)


def dumps_problem(problem: ProblemFile) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(problem.to_dict(), indent=2, sort_keys=True) + "\n"


def save_problem(problem: ProblemFile, path) -> None:
    Path(path).write_text(dumps_problem(problem))
