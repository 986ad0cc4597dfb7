"""Command-line pipeline: initial analysis, optimization, export.

Exit codes: 0 success, 1 configuration error, 2 solve failure, 3 stalled
optimization (artifacts are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from tracshape import history as history_mod
from tracshape import rp, vtkio
from tracshape.errors import TracshapeError
from tracshape.fem import (
    DirichletBC,
    LoadCase,
    Material,
    NeumannLoad,
    SolverOptions,
    evaluate,
    solve_static,
)
from tracshape.fixtures import make_fixture
from tracshape.mesh import load_mesh, dumps_mesh, measure, validate
from tracshape.optimize import OptimizationProblem, StepControl, optimize, stalled


class ConfigError(TracshapeError):
    pass


MATERIAL_PRESETS = {"paper-steel": Material()}

_CONFIG_KEYS = {"mesh", "material", "loads", "problem", "solver", "output_dir", "seed"}


def _atomic_write(path, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunConfig:
    mesh: object
    material: Material
    loads: LoadCase
    problem: OptimizationProblem | None
    max_steps: int
    solver: SolverOptions
    output_dir: str | None
    seed: int


def _parse_material(spec) -> Material:
    if spec is None:
        return Material()
    if isinstance(spec, str):
        if spec not in MATERIAL_PRESETS:
            raise ConfigError(f"unknown material preset {spec!r}")
        return MATERIAL_PRESETS[spec]
    allowed = {"youngs_modulus", "poisson_ratio", "density", "allowed_stress"}
    if set(spec) - allowed:
        raise ConfigError(f"unknown material keys: {sorted(set(spec) - allowed)}")
    try:
        return Material(**spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_loads(spec) -> LoadCase:
    if spec is None:
        raise ConfigError("config requires a 'loads' block")
    dirichlet = []
    for bc in spec.get("dirichlet", []):
        if set(bc) - {"region", "components", "value"}:
            raise ConfigError("unknown dirichlet keys")
        comps = bc.get("components", [True, True, True])
        dirichlet.append(DirichletBC(bc["region"], tuple(bool(c) for c in comps),
                                     bc.get("value", 0.0)))
    neumann = []
    for ld in spec.get("neumann", []):
        if set(ld) - {"region", "kind", "value"}:
            raise ConfigError("unknown neumann keys")
        kind = ld.get("kind")
        if kind not in ("total_force", "pressure"):
            raise ConfigError(f"unknown load kind {kind!r}")
        neumann.append(NeumannLoad(ld["region"], kind, ld["value"]))
    if set(spec) - {"dirichlet", "neumann"}:
        raise ConfigError("unknown loads keys")
    return LoadCase(tuple(dirichlet), tuple(neumann))


def _parse_problem(spec):
    if spec is None:
        return None, 30
    allowed = {"mode", "design_region", "frozen_regions", "stress_limit",
               "volume_limit", "p", "penalty", "lagrange",
               "volume_reduction_cap", "max_steps"}
    if set(spec) - allowed:
        raise ConfigError(f"unknown problem keys: {sorted(set(spec) - allowed)}")
    max_steps = int(spec.get("max_steps", 30))
    kwargs = {}
    for key in ("mode", "design_region", "p", "penalty", "lagrange",
                "volume_reduction_cap"):
        if key in spec:
            kwargs[key] = spec[key]
    if "frozen_regions" in spec:
        kwargs["frozen_regions"] = tuple(spec["frozen_regions"])
    for key in ("stress_limit", "volume_limit"):
        if key in spec and spec[key] != "initial":
            kwargs[key] = float(spec[key])
    try:
        return OptimizationProblem(**kwargs), max_steps
    except TracshapeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if set(doc) - _CONFIG_KEYS:
        raise ConfigError(f"unknown config keys: {sorted(set(doc) - _CONFIG_KEYS)}")
    mesh_spec = doc.get("mesh")
    if not isinstance(mesh_spec, dict) or ("path" in mesh_spec) == (
            "fixture" in mesh_spec):
        raise ConfigError("config 'mesh' needs exactly one of 'path' or 'fixture'")
    solver_spec = doc.get("solver", {})
    if set(solver_spec) - {"method", "rtol", "max_iter"}:
        raise ConfigError("unknown solver keys")
    solver = SolverOptions(
        method=solver_spec.get("method", "auto"),
        rtol=float(solver_spec.get("rtol", 1e-10)),
        max_iter=solver_spec.get("max_iter"),
    )
    problem, max_steps = _parse_problem(doc.get("problem"))
    return RunConfig(
        mesh=mesh_spec,
        material=_parse_material(doc.get("material")),
        loads=_parse_loads(doc.get("loads")),
        problem=problem,
        max_steps=max_steps,
        solver=solver,
        output_dir=doc.get("output_dir"),
        seed=int(doc.get("seed", 0)),
    )


def _build_mesh(spec):
    if "path" in spec:
        path = spec["path"]
        if set(spec) - {"path"}:
            raise ConfigError("unknown mesh keys")
        if not os.path.exists(path):
            raise ConfigError(f"mesh file not found: {path}")
        return load_mesh(path)
    if set(spec) - {"fixture", "params"}:
        raise ConfigError("unknown mesh keys")
    try:
        return make_fixture(spec["fixture"], spec.get("params", {}))
    except TracshapeError as exc:
        raise ConfigError(str(exc)) from exc


def _summary(mesh, material, solution, p=8.0):
    rep = measure(mesh)
    ev = evaluate(mesh, solution, p=p, sigma_ref=material.allowed_stress,
                  material=material)
    return {
        "volume_m3": rep.volume,
        "mass_kg": rep.volume * material.density,
        "compliance_J": ev.compliance,
        "max_vm_Pa": ev.max_vm,
        "max_vm_MPa": ev.max_vm / 1e6,
        "aggregate": ev.aggregate,
    }


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def run_solve(config_path, out_dir) -> int:
    try:
        cfg = load_config(config_path)
        mesh = _build_mesh(cfg.mesh)
    except TracshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = out_dir or cfg.output_dir or "."
    try:
        solution = solve_static(mesh, cfg.material, cfg.loads, cfg.solver)
        summary = _summary(mesh, cfg.material, solution,
                           p=cfg.problem.p if cfg.problem else 8.0)
        vtk = vtkio.write_fields(mesh, solution)
    except TracshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _atomic_write(os.path.join(out, "solution.vtk"), vtk)
    _atomic_write(os.path.join(out, "summary.json"), _dump_json(summary))
    return 0


def run_optimize(config_path, out_dir) -> int:
    try:
        cfg = load_config(config_path)
        mesh = _build_mesh(cfg.mesh)
        if cfg.problem is None:
            raise ConfigError("optimize requires a 'problem' block")
    except TracshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = out_dir or cfg.output_dir or "."
    try:
        sol0 = solve_static(mesh, cfg.material, cfg.loads, cfg.solver)
        ev0 = evaluate(mesh, sol0, p=cfg.problem.p,
                       sigma_ref=cfg.material.allowed_stress, material=cfg.material)
        vol0 = measure(mesh).volume
        final, history = optimize(mesh, cfg.material, cfg.loads, cfg.problem,
                                  max_steps=cfg.max_steps, opts=cfg.solver)
        sol = solve_static(final, cfg.material, cfg.loads, cfg.solver)
    except TracshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    csv, svg = history_mod.write_history(history)
    summary = _summary(final, cfg.material, sol, p=cfg.problem.p)
    summary["initial_volume_m3"] = vol0
    summary["initial_max_vm_Pa"] = ev0.max_vm
    summary["volume_reduction"] = 1.0 - summary["volume_m3"] / vol0
    summary["max_vm_reduction_factor"] = (
        ev0.max_vm / summary["max_vm_Pa"] if summary["max_vm_Pa"] > 0 else 1.0
    )
    is_stalled = stalled(history)
    summary["stalled"] = is_stalled
    _atomic_write(os.path.join(out, "history.csv"), csv)
    _atomic_write(os.path.join(out, "history.svg"), svg)
    _atomic_write(os.path.join(out, "final_mesh.json"), dumps_mesh(final))
    _atomic_write(os.path.join(out, "final_solution.vtk"),
                  vtkio.write_fields(final, sol))
    if final.dimension == 3:
        surface = rp.surface_mesh(final)
        _atomic_write(os.path.join(out, "final.stl"), rp.write_stl(surface))
    _atomic_write(os.path.join(out, "summary.json"), _dump_json(summary))
    return 3 if is_stalled else 0


def run_export_stl(mesh_path, out_file, ascii_format, scale) -> int:
    try:
        mesh = load_mesh(mesh_path)
        surface = rp.surface_mesh(mesh, scale=scale)
        data = rp.write_stl(surface, "ascii" if ascii_format else "binary")
    except (TracshapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _atomic_write(out_file, data)
    return 0


def run_check_draft(mesh_path, pull_str, min_angle) -> int:
    try:
        mesh = load_mesh(mesh_path)
        pull = np.array([float(x) for x in pull_str.split(",")])
        norm = np.linalg.norm(pull)
        if norm == 0:
            raise TracshapeError("pull direction must be nonzero")
        surface = rp.surface_mesh(mesh)
        report = rp.draft_check(surface, pull / norm, min_angle)
    except (TracshapeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({
        "pull_direction": report.pull_direction.tolist(),
        "min_angle_deg": report.min_angle,
        "triangle_count": surface.triangle_count,
        "violation_count": len(report.violations),
        "violations": [
            {"triangle": t, "draft_angle_deg": a} for t, a in report.violations[:100]
        ],
    }, sort_keys=True, indent=2))
    return 0


def run_mesh_info(mesh_path) -> int:
    try:
        mesh = load_mesh(mesh_path)
    except (TracshapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rep = validate(mesh)
    print(json.dumps({
        "dimension": mesh.dimension,
        "nodes": mesh.node_count,
        "elements": mesh.element_count,
        "regions": sorted(mesh.regions),
        "volume_m3": rep.volume,
        "surface_area_m2": rep.surface_area,
        "min_quality": rep.min_quality,
        "worst_element": rep.worst_element,
        "is_valid": rep.is_valid,
        "messages": rep.messages,
    }, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracshape",
        description="Linear-elastic shape optimization with STL export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the initial static analysis")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("optimize", help="run the shape optimization loop")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("export-stl", help="export a 3D mesh boundary as STL")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ascii", action="store_true")
    p.add_argument("--scale", type=float, default=1000.0)

    p = sub.add_parser("check-draft", help="casting draft-angle analysis")
    p.add_argument("--mesh", required=True)
    p.add_argument("--pull", required=True, help="pull direction, e.g. 0,0,1")
    p.add_argument("--min-angle", type=float, required=True)

    p = sub.add_parser("mesh-info", help="validate and measure a mesh")
    p.add_argument("--mesh", required=True)

    args = parser.parse_args(argv)
    if args.command == "solve":
        return run_solve(args.config, args.out)
    if args.command == "optimize":
        return run_optimize(args.config, args.out)
    if args.command == "export-stl":
        return run_export_stl(args.mesh, args.out, args.ascii, args.scale)
    if args.command == "check-draft":
        return run_check_draft(args.mesh, args.pull, args.min_angle)
    return run_mesh_info(args.mesh)


if __name__ == "__main__":
    sys.exit(main())
