"""Mixed-integer quadratic program for coverage planning.

Builds the full variable space and every constraint family, derives a total
assignment from any control/sensor plan, checks assignments row by row, and
exports LP text. Footprint half-planes are precomputed per configuration
relative to the agent position, so every row stays linear in the decision
variables; dynamics are emitted in unrolled form with the state variables
kept as defined equalities.

Index conventions: point/config/cell/edge indices are 0-based; time follows
the dynamics (states x_1..x_T, controls u_0..u_{T-1}). The per-step
configuration-switch cost enters the objective linearly through indicator
auxiliaries `sw`; the quadratic selector-difference form is available
separately for evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .environment import Scenario
from .geometry import ConvexPolygon, HalfPlane, Point2
from .kinematics import (AgentState, ControlInput, KinematicParams,
                         rollout, transition_matrices)
from .sensing import FovConfig, config_halfplanes, enumerate_configs
from .visibility import VisibilityTable, expected_meta

DERIVE_TOL = 1e-9
CHECK_TOL = 1e-6

_COMP = ("px", "py", "vx", "vy")


@dataclass(frozen=True)
class Weights:
    w1: float
    w2: float
    w3: float

    def __post_init__(self) -> None:
        for w in (self.w1, self.w2, self.w3):
            if w < 0 or not math.isfinite(w):
                raise ValueError("weights must be finite and nonnegative")


@dataclass
class Row:
    name: str
    family: str
    coeffs: dict[int, float]
    sense: str  # "<=", "=" or ">="
    rhs: float


@dataclass(frozen=True)
class Violation:
    row: str
    family: str
    slack: float


@dataclass(frozen=True)
class Assignment:
    values: np.ndarray

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])


class VariableSpace:
    """Flat decision vector with named blocks and index arithmetic.

    Blocks, in order: state x, control u, control splits u+/u-, switch
    indicators sw, edge binaries b, footprint binaries bS, cell-edge binaries
    bt, cell binaries bx, selector fsel, visible-coverage binaries bSp, and
    per-obstacle collision binaries bc.
    """

    def __init__(self, T: int, n_points: int, n_configs: int, n_cells: int,
                 obstacle_faces: Sequence[int], k: KinematicParams) -> None:
        self.T = T
        self.n_points = n_points
        self.n_configs = n_configs
        self.n_cells = n_cells
        self.obstacle_faces = tuple(obstacle_faces)
        self.names: list[str] = []
        lb: list[float] = []
        ub: list[float] = []
        binary: list[bool] = []

        def add(name: str, lo: float, hi: float, is_bin: bool = False) -> None:
            self.names.append(name)
            lb.append(lo)
            ub.append(hi)
            binary.append(is_bin)

        xmin, ymin, xmax, ymax = k.workspace
        self._off_x = 0
        for t in range(1, T + 1):
            add(f"x_{t}_0", xmin, xmax)
            add(f"x_{t}_1", ymin, ymax)
            add(f"x_{t}_2", -k.speed_max, k.speed_max)
            add(f"x_{t}_3", -k.speed_max, k.speed_max)
        self._off_u = len(self.names)
        for t in range(T):
            for i in range(2):
                add(f"u_{t}_{i}", -k.force_max, k.force_max)
        self._off_up = len(self.names)
        for t in range(T):
            for i in range(2):
                add(f"up_{t}_{i}", 0.0, k.force_max)
        self._off_um = len(self.names)
        for t in range(T):
            for i in range(2):
                add(f"um_{t}_{i}", 0.0, k.force_max)
        self._off_sw = len(self.names)
        for t in range(1, T):
            for m in range(n_configs):
                add(f"sw_m{m}_t{t}", 0.0, 1.0)
        self._off_b = len(self.names)
        for t in range(1, T + 1):
            for m in range(n_configs):
                for p in range(n_points):
                    for n in range(3):
                        add(f"b_n{n}_p{p}_m{m}_t{t}", 0.0, 1.0, True)
        self._off_bS = len(self.names)
        for t in range(1, T + 1):
            for m in range(n_configs):
                for p in range(n_points):
                    add(f"bS_p{p}_m{m}_t{t}", 0.0, 1.0, True)
        self._off_bt = len(self.names)
        for t in range(1, T + 1):
            for c in range(n_cells):
                for kk in range(4):
                    add(f"bt_k{kk}_c{c}_t{t}", 0.0, 1.0, True)
        self._off_bx = len(self.names)
        for t in range(1, T + 1):
            for c in range(n_cells):
                add(f"bx_c{c}_t{t}", 0.0, 1.0, True)
        self._off_fsel = len(self.names)
        for t in range(1, T + 1):
            for m in range(n_configs):
                add(f"fsel_m{m}_t{t}", 0.0, 1.0, True)
        self._off_bSp = len(self.names)
        for t in range(1, T + 1):
            for m in range(n_configs):
                for p in range(n_points):
                    add(f"bSp_p{p}_m{m}_t{t}", 0.0, 1.0, True)
        self._off_coll: list[int] = []
        for o, faces in enumerate(self.obstacle_faces):
            self._off_coll.append(len(self.names))
            for t in range(1, T + 1):
                for i in range(faces):
                    add(f"bc_o{o}_t{t}_i{i}", 0.0, 1.0, True)

        self.lb = np.array(lb)
        self.ub = np.array(ub)
        self.binary = np.array(binary)
        self.by_name = {name: i for i, name in enumerate(self.names)}

    @property
    def n(self) -> int:
        return len(self.names)

    def x(self, t: int, i: int) -> int:
        return self._off_x + (t - 1) * 4 + i

    def u(self, t: int, i: int) -> int:
        return self._off_u + t * 2 + i

    def up(self, t: int, i: int) -> int:
        return self._off_up + t * 2 + i

    def um(self, t: int, i: int) -> int:
        return self._off_um + t * 2 + i

    def sw(self, m: int, t: int) -> int:
        return self._off_sw + (t - 1) * self.n_configs + m

    def b(self, n: int, p: int, m: int, t: int) -> int:
        return self._off_b + (((t - 1) * self.n_configs + m) * self.n_points + p) * 3 + n

    def bS(self, p: int, m: int, t: int) -> int:
        return self._off_bS + ((t - 1) * self.n_configs + m) * self.n_points + p

    def bt(self, k: int, c: int, t: int) -> int:
        return self._off_bt + ((t - 1) * self.n_cells + c) * 4 + k

    def bx(self, c: int, t: int) -> int:
        return self._off_bx + (t - 1) * self.n_cells + c

    def fsel(self, m: int, t: int) -> int:
        return self._off_fsel + (t - 1) * self.n_configs + m

    def bSp(self, p: int, m: int, t: int) -> int:
        return self._off_bSp + ((t - 1) * self.n_configs + m) * self.n_points + p

    def coll(self, o: int, t: int, i: int) -> int:
        return self._off_coll[o] + (t - 1) * self.obstacle_faces[o] + i


@dataclass
class MiqpModel:
    vars: VariableSpace
    rows: list[Row]
    obj_lin: dict[int, float]
    obj_quad: dict[tuple[int, int], float]  # key (i, j) with i <= j
    obj_const: float
    big_m: float
    _csr: Optional[sparse.csr_matrix] = field(default=None, repr=False)
    _rhs: Optional[np.ndarray] = field(default=None, repr=False)

    def objective_value(self, a: Assignment) -> float:
        v = a.values
        total = self.obj_const
        for i, c in self.obj_lin.items():
            total += c * v[i]
        for (i, j), c in self.obj_quad.items():
            total += c * v[i] * v[j]
        return float(total)


def active_obstacle_halfplanes(s: Scenario) -> list[tuple[HalfPlane, ...]]:
    """Outward half-planes of every polygon the agent must avoid; the region
    hull reuses the boundary's half-planes so all modules test identically."""
    out: list[tuple[HalfPlane, ...]] = []
    if not s.traversable and s.boundary is not None:
        out.append(s.boundary.halfplanes)
    for poly in s.extra_obstacles:
        out.append(poly.halfplanes)
    return out


def build(s: Scenario, vt: VisibilityTable) -> MiqpModel:
    """Assemble the full program for a scenario against a learned table."""
    configs = enumerate_configs(s.angles, s.zooms, s.fov)
    if vt.meta != expected_meta(s, configs):
        raise ValueError("visibility table does not match the scenario")
    T = s.horizon
    if T < 1:
        raise ValueError("horizon must be >= 1")
    P = len(s.points)
    M = len(configs)
    C = len(s.grid)
    bigm = s.big_m
    obstacles = active_obstacle_halfplanes(s)
    v = VariableSpace(T, P, M, C, [len(h) for h in obstacles], s.kinematics)
    rows: list[Row] = []

    # Unrolled dynamics: x_t - sum_tau Phi^(t-tau-1) Gamma u_tau = Phi^t x0.
    phi, gamma = transition_matrices(s.kinematics)
    x0v = np.array([s.x0.pos.x, s.x0.pos.y, s.x0.vel[0], s.x0.vel[1]])
    powers = [np.eye(4)]
    for _ in range(T):
        powers.append(phi @ powers[-1])
    for t in range(1, T + 1):
        rhs_vec = powers[t] @ x0v
        for i in range(4):
            coeffs = {v.x(t, i): 1.0}
            for tau in range(t):
                cmat = powers[t - tau - 1] @ gamma
                for j in range(2):
                    if cmat[i, j] != 0.0:
                        coeffs[v.u(tau, j)] = -cmat[i, j]
            rows.append(Row(f"p2_1_dyn_t{t}_{_COMP[i]}", "p2_1_", coeffs, "=",
                            float(rhs_vec[i])))

    # Footprint membership per edge, relative to the agent position.
    fov_hps = [config_halfplanes(cfg) for cfg in configs]
    for t in range(1, T + 1):
        for m, hps in enumerate(fov_hps):
            for p, pt in enumerate(s.points):
                for n, hp in enumerate(hps):
                    ax, ay = hp.normal
                    coeffs = {
                        v.x(t, 0): -ax,
                        v.x(t, 1): -ay,
                        v.b(n, p, m, t): bigm - hp.offset,
                    }
                    rhs = bigm - (ax * pt.x + ay * pt.y)
                    rows.append(Row(f"p2_5_fov_n{n}_p{p}_m{m}_t{t}", "p2_5_",
                                    coeffs, "<=", rhs))
                coeffs = {v.bS(p, m, t): 3.0}
                for n in range(3):
                    coeffs[v.b(n, p, m, t)] = -1.0
                rows.append(Row(f"p2_6_act_p{p}_m{m}_t{t}", "p2_6_", coeffs,
                                "<=", 0.0))

    # Cell membership.
    for t in range(1, T + 1):
        for c, cell in enumerate(s.grid.cells):
            for k, hp in enumerate(cell.halfplanes):
                ax, ay = hp.normal
                coeffs = {
                    v.x(t, 0): ax,
                    v.x(t, 1): ay,
                    v.bt(k, c, t): bigm - hp.offset,
                }
                rows.append(Row(f"p2_8_cell_k{k}_c{c}_t{t}", "p2_8_", coeffs,
                                "<=", bigm))
            coeffs = {v.bx(c, t): 4.0}
            for k in range(4):
                coeffs[v.bt(k, c, t)] = -1.0
            rows.append(Row(f"p2_9_act_c{c}_t{t}", "p2_9_", coeffs, "<=", 0.0))

    # One active configuration per step.
    for t in range(1, T + 1):
        coeffs = {v.fsel(m, t): 1.0 for m in range(M)}
        rows.append(Row(f"p2_10_onehot_t{t}", "p2_10_", coeffs, "=", 1.0))

    # Visible coverage: bSp <= fsel, bSp <= bS, bSp <= sum of table-visible
    # cell indicators (one-sided; coverage pressure activates it).
    for t in range(1, T + 1):
        for m in range(M):
            for p in range(P):
                bsp = v.bSp(p, m, t)
                rows.append(Row(f"p2_11_sel_p{p}_m{m}_t{t}", "p2_11_",
                                {bsp: 1.0, v.fsel(m, t): -1.0}, "<=", 0.0))
                rows.append(Row(f"p2_11_fov_p{p}_m{m}_t{t}", "p2_11_",
                                {bsp: 1.0, v.bS(p, m, t): -1.0}, "<=", 0.0))
                coeffs = {bsp: 1.0}
                for c in range(C):
                    if vt.table[c, p]:
                        coeffs[v.bx(c, t)] = -1.0
                rows.append(Row(f"p2_11_vis_p{p}_m{m}_t{t}", "p2_11_", coeffs,
                                "<=", 0.0))

    # Every point covered at least once.
    for p in range(P):
        coeffs = {v.bSp(p, m, t): 1.0 for t in range(1, T + 1) for m in range(M)}
        rows.append(Row(f"p2_12_cov_p{p}", "p2_12_", coeffs, ">=", 1.0))

    # Obstacle avoidance for the region hull and any extra obstacles.
    for o, hps in enumerate(obstacles):
        faces = len(hps)
        for t in range(1, T + 1):
            for i, hp in enumerate(hps):
                ax, ay = hp.normal
                coeffs = {
                    v.x(t, 0): -ax,
                    v.x(t, 1): -ay,
                    v.coll(o, t, i): -bigm,
                }
                rows.append(Row(f"o_1_obs{o}_t{t}_i{i}", "o_1_", coeffs, "<=",
                                -hp.offset))
            coeffs = {v.coll(o, t, i): 1.0 for i in range(faces)}
            rows.append(Row(f"o_2_obs{o}_t{t}", "o_2_", coeffs, "<=",
                            float(faces - 1)))

    # Control split u = u+ - u- (box bounds live on the variables).
    for t in range(T):
        for i, axis in enumerate("xy"):
            coeffs = {v.u(t, i): 1.0, v.up(t, i): -1.0, v.um(t, i): 1.0}
            rows.append(Row(f"bnd_usplit_t{t}_{axis}", "bnd_", coeffs, "=", 0.0))

    # Switch indicators: sw >= |fsel_(t+1) - fsel_t| per configuration.
    for t in range(1, T):
        for m in range(M):
            swv = v.sw(m, t)
            rows.append(Row(f"j3_sw_pos_m{m}_t{t}", "j3_",
                            {swv: 1.0, v.fsel(m, t + 1): -1.0,
                             v.fsel(m, t): 1.0}, ">=", 0.0))
            rows.append(Row(f"j3_sw_neg_m{m}_t{t}", "j3_",
                            {swv: 1.0, v.fsel(m, t + 1): 1.0,
                             v.fsel(m, t): -1.0}, ">=", 0.0))

    w = Weights(*s.weights)
    obj_lin: dict[int, float] = {}
    for idx, c in objective_j1(v).items():
        obj_lin[idx] = obj_lin.get(idx, 0.0) + w.w1 * c
    quad_j2, lin_j2 = objective_j2(v)
    for idx, c in lin_j2.items():
        obj_lin[idx] = obj_lin.get(idx, 0.0) + w.w2 * c
    obj_quad = {key: w.w2 * c for key, c in quad_j2.items()}
    for t in range(1, T):
        for m in range(M):
            idx = v.sw(m, t)
            obj_lin[idx] = obj_lin.get(idx, 0.0) + w.w3
    obj_lin = {i: c for i, c in obj_lin.items() if c != 0.0}
    obj_quad = {k: c for k, c in obj_quad.items() if c != 0.0}
    return MiqpModel(v, rows, obj_lin, obj_quad, 0.0, bigm)


def objective_j1(v: VariableSpace) -> dict[int, float]:
    """Completion-time terms: (t/T) per visible-coverage binary."""
    out: dict[int, float] = {}
    for t in range(1, v.T + 1):
        c = t / v.T
        for m in range(v.n_configs):
            for p in range(v.n_points):
                out[v.bSp(p, m, t)] = c
    return out


def objective_j2(v: VariableSpace) -> tuple[dict[tuple[int, int], float],
                                            dict[int, float]]:
    """Control-effort terms: squared consecutive differences plus the split
    variables carrying the per-axis absolute values."""
    quad: dict[tuple[int, int], float] = {}

    def bump(i: int, j: int, c: float) -> None:
        key = (i, j) if i <= j else (j, i)
        quad[key] = quad.get(key, 0.0) + c

    for t in range(1, v.T):
        for i in range(2):
            a, b = v.u(t - 1, i), v.u(t, i)
            bump(a, a, 1.0)
            bump(b, b, 1.0)
            bump(a, b, -2.0)
    lin: dict[int, float] = {}
    for t in range(v.T):
        for i in range(2):
            lin[v.up(t, i)] = 1.0
            lin[v.um(t, i)] = 1.0
    return quad, lin


def objective_j3(v: VariableSpace) -> dict[tuple[int, int], float]:
    """Quadratic selector-difference form; equals twice the switch count on
    one-hot selector sequences. The built model carries the equivalent linear
    form through the sw auxiliaries."""
    quad: dict[tuple[int, int], float] = {}

    def bump(i: int, j: int, c: float) -> None:
        key = (i, j) if i <= j else (j, i)
        quad[key] = quad.get(key, 0.0) + c

    for t in range(1, v.T):
        for m in range(v.n_configs):
            a, b = v.fsel(m, t), v.fsel(m, t + 1)
            bump(a, a, 1.0)
            bump(b, b, 1.0)
            bump(a, b, -2.0)
    return quad


def evaluate_terms(lin: dict[int, float], quad: dict[tuple[int, int], float],
                   values: np.ndarray) -> float:
    total = 0.0
    for i, c in lin.items():
        total += c * values[i]
    for (i, j), c in quad.items():
        total += c * values[i] * values[j]
    return float(total)


def check(m: MiqpModel, a: Assignment, tol: float = CHECK_TOL) -> list[Violation]:
    """Evaluate every row and variable bound; empty result means feasible."""
    if a.values.shape != (m.vars.n,):
        raise ValueError("assignment length does not match variable space")
    if m._csr is None:
        ri, ci, vals = [], [], []
        for r_idx, row in enumerate(m.rows):
            for col, c in row.coeffs.items():
                ri.append(r_idx)
                ci.append(col)
                vals.append(c)
        m._csr = sparse.csr_matrix((vals, (ri, ci)),
                                   shape=(len(m.rows), m.vars.n))
        m._rhs = np.array([r.rhs for r in m.rows])
    lhs = m._csr @ a.values
    out: list[Violation] = []
    for i, row in enumerate(m.rows):
        diff = lhs[i] - m._rhs[i]
        if row.sense == "<=":
            slack = diff
        elif row.sense == ">=":
            slack = -diff
        else:
            slack = abs(diff)
        if slack > tol:
            out.append(Violation(row.name, row.family, float(slack)))
    vs = m.vars
    low = vs.lb - a.values
    high = a.values - vs.ub
    for i in np.nonzero((low > tol) | (high > tol))[0]:
        out.append(Violation(f"bnd_var_{vs.names[i]}", "bnd_",
                             float(max(low[i], high[i]))))
    return out


def assignment_from_plan(s: Scenario, vt: VisibilityTable,
                         controls: Sequence[ControlInput],
                         schedule: Sequence[int]) -> Assignment:
    """Total assignment forced by a plan.

    Every geometric activation binary is set to its maximal value permitted by
    its big-M rows; the visible-coverage binaries are activated only at each
    point's first coverable step, which both satisfies the coverage rows and
    matches the completion-time accounting of the search.
    """
    configs = enumerate_configs(s.angles, s.zooms, s.fov)
    T = s.horizon
    if len(controls) != T or len(schedule) != T:
        raise ValueError("plan length does not match the horizon")
    if any(not 0 <= m < len(configs) for m in schedule):
        raise ValueError("schedule index out of range")
    obstacles = active_obstacle_halfplanes(s)
    v = VariableSpace(T, len(s.points), len(configs), len(s.grid),
                      [len(h) for h in obstacles], s.kinematics)
    vals = np.zeros(v.n)
    traj = rollout(s.x0, list(controls), s.kinematics)
    for t in range(1, T + 1):
        st = traj[t - 1]
        vals[v.x(t, 0)] = st.pos.x
        vals[v.x(t, 1)] = st.pos.y
        vals[v.x(t, 2)] = st.vel[0]
        vals[v.x(t, 3)] = st.vel[1]
    for t, u in enumerate(controls):
        for i, f in enumerate((u.fx, u.fy)):
            vals[v.u(t, i)] = f
            vals[v.up(t, i)] = max(f, 0.0)
            vals[v.um(t, i)] = max(-f, 0.0)
    for t in range(1, T + 1):
        vals[v.fsel(schedule[t - 1], t)] = 1.0
    for t in range(1, T):
        if schedule[t - 1] != schedule[t]:
            vals[v.sw(schedule[t - 1], t)] = 1.0
            vals[v.sw(schedule[t], t)] = 1.0

    fov_hps = [config_halfplanes(cfg) for cfg in configs]
    for t in range(1, T + 1):
        pos = traj[t - 1].pos
        for m, hps in enumerate(fov_hps):
            for p, pt in enumerate(s.points):
                rel = Point2(pt.x - pos.x, pt.y - pos.y)
                inside = 0
                for n, hp in enumerate(hps):
                    if hp.value(rel) <= DERIVE_TOL:
                        vals[v.b(n, p, m, t)] = 1.0
                        inside += 1
                if inside == 3:
                    vals[v.bS(p, m, t)] = 1.0
        for c, cell in enumerate(s.grid.cells):
            inside = 0
            for k, hp in enumerate(cell.halfplanes):
                if hp.value(pos) <= DERIVE_TOL:
                    vals[v.bt(k, c, t)] = 1.0
                    inside += 1
            if inside == 4:
                vals[v.bx(c, t)] = 1.0
        for o, hps in enumerate(obstacles):
            for i, hp in enumerate(hps):
                if hp.value(pos) < -DERIVE_TOL:
                    vals[v.coll(o, t, i)] = 1.0

    for p in range(len(s.points)):
        for t in range(1, T + 1):
            m = schedule[t - 1]
            if vals[v.bS(p, m, t)] != 1.0:
                continue
            if any(vals[v.bx(c, t)] == 1.0 and vt.table[c, p]
                   for c in range(len(s.grid))):
                vals[v.bSp(p, m, t)] = 1.0
                break
    return Assignment(vals)


def export_lp(m: MiqpModel, destination) -> None:
    """Write the model in LP text format; see lpformat for the dialect."""
    from .lpformat import write_lp
    write_lp(m, destination)
