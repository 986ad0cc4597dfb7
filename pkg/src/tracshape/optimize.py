"""Traction-method smoothing, step control and the outer optimization loop.

Raw shape gradients are applied as fictitious nodal loads on a pseudo-
elastic operator (unit modulus, nu = 0.3) with frozen regions clamped;
the resulting displacement is the boundary-update velocity, so interior
nodes follow the boundary for free.

The constraint is handled with an augmented Lagrangian. Because descent
happens in the smoothed (H1-like) metric, the plain AL gradient keeps a
persistent component along the constraint normal and the line search
collapses; the loop therefore smooths objective and constraint gradients
separately, projects the objective velocity onto the constraint tangent,
and adds an explicit restoration step that steers the constraint value
into a small tolerance band. The AL multiplier/penalty updates and merit
function are retained to globalize the search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from tracshape.errors import SolveError, TracshapeError
from tracshape.fem import (
    LinearOperatorCache,
    LoadCase,
    DirichletBC,
    Material,
    SolverOptions,
    evaluate,
    solve_static,
)
from tracshape.mesh import (
    Mesh,
    RegionTag,
    element_qualities,
    min_edge_length,
    signed_element_measures,
)
from tracshape.sensitivity import (
    compliance_gradient,
    stress_aggregate_gradient,
    volume_gradient,
)

MODE_VOLUME = "volume-min-stress-constrained"
MODE_COMPLIANCE = "compliance-min-volume-constrained"


@dataclass(frozen=True)
class OptimizationProblem:
    mode: str = MODE_VOLUME
    design_region: str = "design"
    frozen_regions: tuple = ("frozen",)
    stress_limit: float | None = None  # aggregate bound (mode 1); None = initial
    volume_limit: float | None = None  # m^3 (mode 2); None = initial volume
    p: float = 8.0
    lagrange: float = 0.0
    penalty: float = 10.0
    volume_reduction_cap: float = 0.20
    constraint_band: float = 0.012  # accepted relative constraint overshoot

    def __post_init__(self):
        if self.mode not in (MODE_VOLUME, MODE_COMPLIANCE):
            raise TracshapeError(f"unknown optimization mode {self.mode!r}")
        if self.lagrange < 0 or self.penalty <= 0:
            raise TracshapeError("need lagrange >= 0 and penalty > 0")
        if not 0.0 <= self.volume_reduction_cap < 1.0:
            raise TracshapeError("volume_reduction_cap must be in [0, 1)")
        if self.constraint_band < 0:
            raise TracshapeError("constraint_band must be non-negative")


@dataclass(frozen=True)
class StepControl:
    move_cap: float = 0.2  # max nodal move as a fraction of min edge length
    quality_floor: float = 0.05
    max_halvings: int = 8


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int
    volume: float
    compliance: float
    max_vm: float
    aggregate: float
    step_size: float
    constraint_violation: float
    min_quality: float
    accepted: bool


def _frozen_nodes(mesh: Mesh, frozen_regions) -> np.ndarray:
    idx = np.zeros(0, dtype=np.int64)
    for name in frozen_regions:
        if name not in mesh.regions:
            raise TracshapeError(f"frozen region {name!r} does not exist")
        idx = np.union1d(idx, mesh.region_nodes(name))
    return idx


_SMOOTHING = Material(youngs_modulus=1.0, poisson_ratio=0.3, density=1.0,
                      allowed_stress=1.0)


def _smoothing_operator(mesh: Mesh, frozen, nu: float) -> LinearOperatorCache:
    smoothing_mat = _SMOOTHING if nu == 0.3 else replace(_SMOOTHING, poisson_ratio=nu)
    hold = RegionTag("__frozen__", "nodes", np.asarray(frozen, dtype=np.int64))
    m = mesh.with_region(hold)
    case = LoadCase(dirichlet=(DirichletBC("__frozen__", (True,) * 3, 0.0),))
    try:
        return LinearOperatorCache(m, smoothing_mat, case)
    except SolveError as exc:
        raise SolveError(
            f"smoothing system singular: {exc}; freeze enough nodes to pin all "
            "rigid-body modes"
        ) from exc


def _smooth(op: LinearOperatorCache, mesh: Mesh, raw_gradient, frozen) -> np.ndarray:
    g = np.asarray(raw_gradient, dtype=np.float64).reshape(mesh.node_count,
                                                           mesh.dimension)
    if not np.isfinite(g).all():
        raise TracshapeError("raw gradient contains non-finite entries")
    v = op.solve_reduced(-g.reshape(-1)[op.free])
    V = v.reshape(-1, mesh.dimension)
    V[frozen] = 0.0
    return V


def traction_smooth(mesh: Mesh, raw_gradient, frozen, nu: float = 0.3) -> np.ndarray:
    """Velocity field from fictitious loads -raw_gradient, (nn, dim).

    Solves the pseudo-elastic problem with frozen nodes clamped; the
    result is a descent direction (g . V = -V^T K_s V <= 0) and exactly
    zero on frozen nodes.
    """
    frozen = np.asarray(frozen, dtype=np.int64).reshape(-1)
    op = _smoothing_operator(mesh, frozen, nu)
    return _smooth(op, mesh, raw_gradient, frozen)


def _geometry_ok(mesh: Mesh, quality_floor: float) -> bool:
    if (signed_element_measures(mesh) <= 0).any():
        return False
    return float(element_qualities(mesh).min()) >= quality_floor


def step(mesh: Mesh, velocity, control: StepControl = StepControl(), merit=None):
    """Backtracking shape update along a velocity field.

    Returns (new mesh, accepted, step size). The initial step scales the
    largest nodal move to move_cap * (min edge length); it is halved while
    the candidate inverts elements, drops below the quality floor, or
    fails to decrease the merit functional. Rejection is a result, not an
    error.
    """
    V = np.asarray(velocity, dtype=np.float64).reshape(mesh.node_count, mesh.dimension)
    vmax = float(np.linalg.norm(V, axis=1).max(initial=0.0))
    if vmax == 0.0:
        return mesh, True, 0.0
    t = control.move_cap * min_edge_length(mesh) / vmax
    moving = np.any(V != 0.0, axis=1)
    merit0 = merit(mesh) if merit is not None else None
    coords0 = mesh.nodes_dim
    for _ in range(control.max_halvings + 1):
        coords = coords0.copy()
        coords[moving] = coords0[moving] + t * V[moving]
        candidate = mesh.with_nodes(coords)
        if _geometry_ok(candidate, control.quality_floor):
            if merit is None or merit(candidate) < merit0:
                return candidate, True, t
        t *= 0.5
    return mesh, False, 0.0


def optimize(mesh: Mesh, material: Material, loads: LoadCase,
             problem: OptimizationProblem, max_steps: int = 30,
             control: StepControl = StepControl(),
             opts: SolverOptions = SolverOptions()):
    """Outer loop: solve, sensitivities, traction smoothing, line search,
    multiplier update. Returns (final mesh, history)."""
    sigma_ref = material.allowed_stress
    V0 = float(signed_element_measures(mesh).sum())
    frozen = _frozen_nodes(mesh, problem.frozen_regions)
    design = mesh.region_nodes(problem.design_region) \
        if problem.design_region in mesh.regions else np.zeros(0, np.int64)
    if np.intersect1d(frozen, design).size:
        raise TracshapeError("design and frozen node sets overlap")
    movable = design if design.size else None

    def analyse(m):
        op = LinearOperatorCache(m, material, loads, opts)
        sol = solve_static(m, material, loads, opts, operator=op)
        ev = evaluate(m, sol, p=problem.p, sigma_ref=sigma_ref, material=material)
        return op, sol, ev

    op, sol, ev = analyse(mesh)
    C0 = ev.compliance
    theta_limit = problem.stress_limit if problem.stress_limit is not None \
        else ev.aggregate
    volume_limit = problem.volume_limit if problem.volume_limit is not None else V0
    if problem.mode == MODE_VOLUME and theta_limit <= 0:
        raise TracshapeError("stress limit must be positive")
    if problem.mode == MODE_COMPLIANCE and volume_limit <= 0:
        raise TracshapeError("volume limit must be positive")

    lam = problem.lagrange
    mu = problem.penalty
    band = problem.constraint_band
    target = 0.5 * band  # steer the constraint to mid-band, not to zero

    def constraint(m, ev_m):
        if problem.mode == MODE_VOLUME:
            return ev_m.aggregate / theta_limit - 1.0
        return float(signed_element_measures(m).sum()) / volume_limit - 1.0

    def objective(m, ev_m):
        if problem.mode == MODE_VOLUME:
            return float(signed_element_measures(m).sum()) / V0
        return ev_m.compliance / max(C0, 1e-300)

    history = []
    consecutive_rejects = 0
    prev_viol = 0.0

    for it in range(1, max_steps + 1):
        c = constraint(mesh, ev)
        if problem.mode == MODE_VOLUME:
            gJ = volume_gradient(mesh, movable=movable) / V0
            gC = stress_aggregate_gradient(mesh, material, sol, loads, p=problem.p,
                                           sigma_ref=sigma_ref, operator=op,
                                           opts=opts, movable=movable) / theta_limit
        else:
            gJ = compliance_gradient(mesh, material, sol, loads,
                                     movable=movable) / max(C0, 1e-300)
            gC = volume_gradient(mesh, movable=movable) / volume_limit

        smoother = _smoothing_operator(mesh, frozen, 0.3)
        VJ = _smooth(smoother, mesh, gJ, frozen)
        VC = _smooth(smoother, mesh, gC, frozen)
        a = float((gC * VJ).sum())
        b = float((gC * VC).sum())  # = -gC.Ks^-1.gC <= 0
        if b < 0:
            eta = max(0.0, -a / b)
            tangent = VJ + eta * VC
            restore = (-(c - target) / b) * VC if c > target \
                else np.zeros_like(VC)
        else:
            # degenerate constraint sensitivity: fall back to the plain
            # augmented-Lagrangian gradient direction
            chat = max(c, -lam / mu)
            tangent = _smooth(smoother, mesh, gJ + (lam + mu * chat) * gC, frozen)
            restore = np.zeros_like(VC)

        edge = min_edge_length(mesh)
        rmax = float(np.linalg.norm(restore, axis=1).max(initial=0.0))
        if rmax > control.move_cap * edge:
            restore *= control.move_cap * edge / rmax
        vmax = float(np.linalg.norm(tangent, axis=1).max(initial=0.0))
        if vmax == 0.0 and rmax == 0.0:
            history.append(HistoryRecord(
                it, float(signed_element_measures(mesh).sum()), ev.compliance,
                ev.max_vm, ev.aggregate, 0.0, max(c, 0.0),
                float(element_qualities(mesh).min()), True))
            break
        t = control.move_cap * edge / vmax if vmax > 0.0 else 0.0

        def merit(m, ev_m):
            v = max(constraint(m, ev_m), 0.0)
            return objective(m, ev_m) + lam * v + mu * v * v

        merit0 = merit(mesh, ev)
        obj0 = objective(mesh, ev)
        coords0 = mesh.nodes_dim
        accepted = False
        t_used = 0.0
        for k in range(control.max_halvings + 1):
            candidate = mesh.with_nodes(coords0 + t * tangent + restore)
            if _geometry_ok(candidate, control.quality_floor):
                op_c, sol_c, ev_c = analyse(candidate)
                c_c = constraint(candidate, ev_c)
                # inside the tolerance band, objective progress is enough;
                # otherwise require the augmented-Lagrangian merit to drop
                in_band = max(c_c, 0.0) <= max(max(c, 0.0), band)
                improves = objective(candidate, ev_c) < obj0 \
                    or merit(candidate, ev_c) < merit0
                if in_band and improves:
                    mesh, op, sol, ev = candidate, op_c, sol_c, ev_c
                    accepted = True
                    t_used = t
                    break
            t *= 0.5
            if k == control.max_halvings - 1:
                restore = 0.5 * restore
        consecutive_rejects = 0 if accepted else consecutive_rejects + 1

        c_now = constraint(mesh, ev)
        lam = max(0.0, lam + mu * max(c_now, -lam / mu))
        viol = max(c_now, 0.0)
        if viol > band and prev_viol > band:
            mu = min(mu * 2.0, 1e8)
        prev_viol = viol

        vol_now = float(signed_element_measures(mesh).sum())
        history.append(HistoryRecord(
            iteration=it,
            volume=vol_now,
            compliance=ev.compliance,
            max_vm=ev.max_vm,
            aggregate=ev.aggregate,
            step_size=t_used,
            constraint_violation=viol,
            min_quality=float(element_qualities(mesh).min()),
            accepted=accepted,
        ))
        if vol_now <= (1.0 - problem.volume_reduction_cap) * V0 \
                and problem.volume_reduction_cap > 0.0:
            break
        if consecutive_rejects >= 3:
            break
    return mesh, history


def stalled(history) -> bool:
    """True if a run ended on three consecutive rejected steps."""
    tail = history[-3:]
    return len(tail) == 3 and all(not r.accepted for r in tail)
