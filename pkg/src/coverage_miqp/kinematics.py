"""Discrete-time point-mass agent with drag: steps, rollouts, bound checks.

State update per step: pos' = pos + dt*vel, vel' = (1-drag)*vel + (dt/mass)*u.
Bounds are per-axis boxes, not norm balls.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import Point2

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class KinematicParams:
    dt: float
    mass: float
    drag: float
    force_max: float
    speed_max: float
    workspace: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if not 0 <= self.drag < 1:
            raise ValueError("drag must lie in [0, 1)")
        if self.force_max <= 0 or self.speed_max <= 0:
            raise ValueError("force_max and speed_max must be positive")
        xmin, ymin, xmax, ymax = self.workspace
        if xmin >= xmax or ymin >= ymax:
            raise ValueError("workspace box is empty")


class AgentState(NamedTuple):
    pos: Point2
    vel: tuple[float, float]


class ControlInput(NamedTuple):
    fx: float
    fy: float


class BoundViolation(NamedTuple):
    t: int
    quantity: str
    value: float
    limit: float


def step(s: AgentState, u: ControlInput, k: KinematicParams) -> AgentState:
    """One update of the linear model; bound violations are not checked here."""
    retain = 1.0 - k.drag
    gain = k.dt / k.mass
    pos = Point2(s.pos.x + k.dt * s.vel[0], s.pos.y + k.dt * s.vel[1])
    vel = (retain * s.vel[0] + gain * u.fx, retain * s.vel[1] + gain * u.fy)
    return AgentState(pos, vel)


def rollout(x0: AgentState, controls: Sequence[ControlInput],
            k: KinematicParams) -> list[AgentState]:
    """States x_1..x_T from repeated application of step."""
    if not controls:
        raise ValueError("controls must be nonempty")
    out: list[AgentState] = []
    s = x0
    for u in controls:
        s = step(s, u, k)
        out.append(s)
    return out


def transition_matrices(k: KinematicParams) -> tuple[np.ndarray, np.ndarray]:
    """State matrix (4x4) and input matrix (4x2) of the linear model."""
    retain = 1.0 - k.drag
    phi = np.block([[np.eye(2), k.dt * np.eye(2)],
                    [np.zeros((2, 2)), retain * np.eye(2)]])
    gamma = np.vstack([np.zeros((2, 2)), (k.dt / k.mass) * np.eye(2)])
    return phi, gamma


def rollout_closed_form(x0: AgentState, controls: Sequence[ControlInput],
                        k: KinematicParams) -> list[AgentState]:
    """States x_1..x_T via x_t = Phi^t x_0 + sum_tau Phi^(t-tau-1) Gamma u_tau."""
    if not controls:
        raise ValueError("controls must be nonempty")
    phi, gamma = transition_matrices(k)
    x0v = np.array([x0.pos.x, x0.pos.y, x0.vel[0], x0.vel[1]])
    us = [np.array([u.fx, u.fy]) for u in controls]
    out: list[AgentState] = []
    phi_pow = np.eye(4)  # Phi^t, built up incrementally
    powers = [np.eye(4)]
    for t in range(1, len(controls) + 1):
        phi_pow = phi @ phi_pow
        powers.append(phi_pow)
        x = phi_pow @ x0v
        for tau in range(t):
            x = x + powers[t - tau - 1] @ gamma @ us[tau]
        out.append(AgentState(Point2(x[0], x[1]), (x[2], x[3])))
    return out


def check_bounds(traj: Sequence[AgentState], controls: Sequence[ControlInput],
                 k: KinematicParams) -> list[BoundViolation]:
    """Every per-axis force/speed/workspace violation, with tolerance 1e-9.

    traj holds x_1..x_T as produced by rollout; control tau produced state
    tau+1. Force violations are reported at the control index, state
    violations at the state index (1-based).
    """
    if len(traj) != len(controls):
        raise ValueError("trajectory and control lengths differ")
    viols: list[BoundViolation] = []
    for tau, u in enumerate(controls):
        for name, f in (("force_x", u.fx), ("force_y", u.fy)):
            if abs(f) > k.force_max + BOUND_TOL:
                viols.append(BoundViolation(tau, name, f, k.force_max))
    xmin, ymin, xmax, ymax = k.workspace
    for i, s in enumerate(traj):
        t = i + 1
        for name, v in (("speed_x", s.vel[0]), ("speed_y", s.vel[1])):
            if abs(v) > k.speed_max + BOUND_TOL:
                viols.append(BoundViolation(t, name, v, k.speed_max))
        if not (xmin - BOUND_TOL <= s.pos.x <= xmax + BOUND_TOL):
            viols.append(BoundViolation(t, "pos_x", s.pos.x,
                                        xmin if s.pos.x < xmin else xmax))
        if not (ymin - BOUND_TOL <= s.pos.y <= ymax + BOUND_TOL):
            viols.append(BoundViolation(t, "pos_y", s.pos.y,
                                        ymin if s.pos.y < ymin else ymax))
    return viols


def state_in_bounds(s: AgentState, k: KinematicParams, tol: float = BOUND_TOL) -> bool:
    """Per-axis speed and workspace test for a single state."""
    xmin, ymin, xmax, ymax = k.workspace
    return (abs(s.vel[0]) <= k.speed_max + tol
            and abs(s.vel[1]) <= k.speed_max + tol
            and xmin - tol <= s.pos.x <= xmax + tol
            and ymin - tol <= s.pos.y <= ymax + tol)


def validate_state(s: AgentState) -> None:
    if not all(isfinite(v) for v in (s.pos.x, s.pos.y, s.vel[0], s.vel[1])):
        raise ValueError("agent state must be finite")
