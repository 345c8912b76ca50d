"""Desk-scale benchmark generators."""

from __future__ import annotations

import numpy as np

from stlverify.cli.problem import ClosedLoopSpec, ProblemFile
from stlverify.reach import LinearSystem
from stlverify.setops import Zonotope
from stlverify.verify import PiecewiseInput

# LQR gain for the planar double integrator with Q = I4, R = 0.1 I2,
# computed offline from the continuous algebraic Riccati equation.
ROBOT_K = np.array([
    [-3.1622776601683835, 0.0, -4.040365740912177, 0.0],
    [0.0, -3.1622776601683835, 0.0, -4.040365740912177],
])

ROBOT_SPEC = (
    "F[0,4]((x1 >= 0.25 & x1 <= 0.35 & x2 >= -0.3 & x2 <= 0.3) & N[6] (x1 >= 3.1 & x1 <= 3.5))"
    " & G[0,10] !(x1 >= 2 & x1 <= 3 & x2 >= 0.4 & x2 <= 1)"
)

TRAFFIC_SPEC = "G[0,1] (x1 < 22 | x2 < 2) & G[0,1] x2 > -2 & G[0,1] x2 < 6"

CORRIDOR_SPEC = "G[0,2.5] x2 < 0.5 | G[0,2.5] x2 > -0.5"


def double_integrator_matrices(dim: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """``A = [0 I; 0 0]``, ``B = [0; I]`` for ``dim`` positions."""
    Z, I = np.zeros((dim, dim)), np.eye(dim)
    return np.block([[Z, I], [Z, Z]]), np.vstack([Z, I])


def double_integrator(spec: str = "G[0,2] x1 < 3.4", x0=(0.0, 1.0), x0_radius: float = 0.1,
                      u_radius: float = 0.5) -> ProblemFile:
    """One-dimensional double integrator with a box of initial states."""
    A, B = double_integrator_matrices(1)
    X0 = Zonotope(np.asarray(x0, dtype=float), x0_radius * np.eye(2))
    U = Zonotope([0.0], [[u_radius]])
    params = {"spec": spec, "x0": list(x0), "x0_radius": x0_radius, "u_radius": u_radius}
    return ProblemFile(LinearSystem(A, B), X0, U, spec,
                       benchmark={"name": "double_integrator", "params": params})


def rotation(spec: str = CORRIDOR_SPEC, damping: float = 0.1, u_radius: float = 0.02) -> ProblemFile:
    """Damped rotation whose initial set is a segment on the first axis."""
    A = np.array([[-damping, -1.0], [1.0, -damping]])
    X0 = Zonotope([0.0, 0.0], [[1.0], [0.0]])
    U = Zonotope([0.0, 0.0], u_radius * np.eye(2))
    params = {"spec": spec, "damping": damping, "u_radius": u_radius}
    return ProblemFile(LinearSystem(A, np.eye(2)), X0, U, spec, benchmark={"name": "rotation", "params": params})


def corridor() -> ProblemFile:
    """Every trajectory stays on one side of a corridor, but no time step separates the sides.

    The initial segment spans both half-corridors, so the whole reachable set
    always meets both violation regions while each single trajectory only
    meets one.
    """
    p = rotation(CORRIDOR_SPEC)
    p.benchmark = {"name": "corridor", "params": {}}
    return p


def heat_matrix(N: int, diffusion: float = 1.0, cooling: float = 0.4) -> np.ndarray:
    """Second-difference Laplacian with zero boundary values plus uniform cooling."""
    L = np.diag(-2.0 * np.ones(N)) + np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1)
    return diffusion * L - cooling * np.eye(N)


def heat_spec(threshold: float = 0.25, window_end: float = 6.0, cell: int = 2) -> str:
    return f"G[3,4] x{cell} > {threshold:g} | F[4,{window_end:g}] x{cell} < {threshold:g}"


def heat1d(N: int = 25, tight: bool = False, threshold: float = 0.25, diffusion: float = 1.0,
           cooling: float = 0.4, heater: float = 1.0, heater_radius: float = 0.1,
           switch_off: float = 5.25, x0_radius: float = 0.01) -> ProblemFile:
    """Rod of ``N`` cells heated at the left end until ``switch_off``.

    The watched cell ``x2`` warms up during ``[3, 5]`` and cools before
    ``t = 6``. The safe formula lets it dip below the threshold anywhere in
    ``[4, 6]``; the tight one (``tight=True``) only in ``[4, 5]``, which
    trajectories with a weak heater violate.
    """
    if N < 3:
        raise ValueError("heat1d needs at least 3 cells")
    A = heat_matrix(N, diffusion, cooling)
    B = np.zeros((N, 1))
    B[0, 0] = 1.0
    X0 = Zonotope(np.full(N, x0_radius), x0_radius * np.ones((N, 1)))
    on = Zonotope([heater], [[heater_radius]])
    off = Zonotope([0.0], [[0.01 * heater_radius]])
    U = PiecewiseInput([0.0, switch_off], [on, off])
    spec = heat_spec(threshold, 5.0 if tight else 6.0)
    params = {"N": N, "tight": tight, "threshold": threshold, "diffusion": diffusion, "cooling": cooling,
              "heater": heater, "heater_radius": heater_radius, "switch_off": switch_off, "x0_radius": x0_radius}
    return ProblemFile(LinearSystem(A, B), X0, U, spec, benchmark={"name": "heat1d", "params": params})


def robot(K=None, noise: float = 0.1, speed_input: float = 0.4, accel_time: float = 1.25) -> ProblemFile:
    """Planar robot tracking a reference that accelerates along x and then coasts.

    State ``[px, py, vx, vy, px_ref, py_ref, vx_ref, vy_ref]``; input
    ``[u_ref (2); disturbance (2)]``.
    """
    A, B = double_integrator_matrices(2)
    K = ROBOT_K if K is None else np.asarray(K, dtype=float)
    cl = ClosedLoopSpec(A, B, K)
    sys = cl.system()
    G0 = np.zeros((8, 2))
    G0[0, 0] = G0[1, 1] = 0.1
    X0 = Zonotope(np.zeros(8), G0)
    Gu = np.zeros((4, 2))
    Gu[2, 0] = Gu[3, 1] = noise
    accel = Zonotope([speed_input, 0.0, 0.0, 0.0], Gu)
    coast = Zonotope(np.zeros(4), Gu)
    U = PiecewiseInput([0.0, accel_time], [accel, coast])
    params = {"noise": noise, "speed_input": speed_input, "accel_time": accel_time}
    if K is not ROBOT_K:
        params["K"] = K.tolist()
    return ProblemFile(sys, X0, U, ROBOT_SPEC, closed_loop=cl, benchmark={"name": "robot", "params": params})


def traffic() -> ProblemFile:
    """Car on a straight road with a no-passing zone ahead."""
    A, B = double_integrator_matrices(2)
    X0 = Zonotope([0.0, 0.0, 30.0, 0.0], 0.1 * np.eye(4))
    U = Zonotope([0.0, 0.0], 9.0 * np.eye(2))
    return ProblemFile(LinearSystem(A, B), X0, U, TRAFFIC_SPEC,
                       benchmark={"name": "traffic", "params": {}},
                       extra={"prediction": {"dt": 0.05, "kappa": 10}})


GENERATORS = {
    "double_integrator": double_integrator,
    "rotation": rotation,
    "corridor": corridor,
    "heat1d": heat1d,
    "robot": robot,
    "traffic": traffic,
}


def generate_benchmark(name: str, params: dict | None = None) -> ProblemFile:
    """Build the named benchmark; ``params`` are keyword arguments of its generator."""
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(sorted(GENERATORS))}") from None
    return gen(**(params or {}))
