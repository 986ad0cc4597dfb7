"""Shape sensitivities with respect to node coordinates.

Volume uses the closed-form polyhedral derivative. Compliance and the
stress aggregate are exact discrete derivatives of the assembled system:
one adjoint solve plus per-element contractions such as d(w^T K_e u)/dX,
evaluated by complex-step differentiation of the element kernels (machine
precision; no truncation error to tune).
"""

from __future__ import annotations

import numpy as np

from tracshape import _kernels as kernels
from tracshape.errors import SolveError
from tracshape.fem import (
    LinearOperatorCache,
    LoadCase,
    Material,
    Solution,
    SolverOptions,
    aggregate_pnorm,
    dirichlet_arrays,
    elastic_matrix,
    evaluate,
    solve_static,
)
from tracshape.mesh import (
    Mesh,
    facet_area_vectors,
    facet_node_ids,
    signed_element_measures,
)

CS_STEP = 1e-100


def _restrict(grad, mesh, movable):
    if movable is None:
        return grad
    mask = np.zeros(mesh.node_count, dtype=bool)
    mask[np.asarray(movable, dtype=np.int64)] = True
    out = grad.copy()
    out[~mask] = 0.0
    return out


def volume_gradient(mesh: Mesh, movable=None) -> np.ndarray:
    """d(total volume)/d(node coordinates), (nn, dim); analytic."""
    coords = mesh.element_coords()
    nn, dim = mesh.node_count, mesh.dimension
    grad = np.zeros((nn, dim))
    if dim == 2:
        t = mesh.thickness
        a, b, c = coords[:, 0], coords[:, 1], coords[:, 2]

        def perp(v):
            return np.stack([-v[:, 1], v[:, 0]], axis=1)

        contrib = np.stack([perp(c - b), perp(a - c), perp(b - a)], axis=1) * (t / 2.0)
    else:
        a, b, c, d = coords[:, 0], coords[:, 1], coords[:, 2], coords[:, 3]
        gb = np.cross(c - a, d - a) / 6.0
        gc = np.cross(d - a, b - a) / 6.0
        gd = np.cross(b - a, c - a) / 6.0
        contrib = np.stack([-(gb + gc + gd), gb, gc, gd], axis=1)
    np.add.at(grad, mesh.elements.reshape(-1), contrib.reshape(-1, dim))
    return _restrict(grad, mesh, movable)


def _cs_element_grad(mesh: Mesh, per_element):
    """Gradient of sum_e phi_e(coords_e) via complex step, (nn, dim).

    per_element maps complex coords (ne, k, dim) to per-element scalars.
    """
    base = mesh.element_coords()
    ne, k, dim = base.shape
    grad = np.zeros((mesh.node_count, dim))
    for a in range(k):
        for d in range(dim):
            c = base.astype(np.complex128)
            c[:, a, d] += 1j * CS_STEP
            phi = per_element(c)
            np.add.at(grad[:, d], mesh.elements[:, a], phi.imag / CS_STEP)
    return grad


def _element_disp(mesh: Mesh, field_flat):
    dim = mesh.dimension
    return field_flat.reshape(-1, dim)[mesh.elements].reshape(mesh.element_count, -1)


def _energy_grad(mesh: Mesh, material: Material, u_flat, w_flat):
    """Gradient of w^T K u with u, w held fixed."""
    D = elastic_matrix(material, mesh.dimension)
    ue = _element_disp(mesh, u_flat)
    we = _element_disp(mesh, w_flat)
    t = mesh.thickness

    def per_element(coords):
        return kernels.element_virtual_work(coords, D, ue, we, t)

    return _cs_element_grad(mesh, per_element)


def load_virtual_work_gradient(mesh: Mesh, loads: LoadCase, w_flat) -> np.ndarray:
    """Gradient of w^T f(X) with w held fixed, (nn, dim)."""
    dim = mesh.dimension
    grad = np.zeros((mesh.node_count, dim))
    wn = np.asarray(w_flat, dtype=np.float64).reshape(-1, dim)
    for load in loads.neumann:
        tag = mesh.regions.get(load.region)
        if tag is None:
            raise SolveError(f"load region {load.region!r} does not exist")
        pairs = tag.members
        if len(pairs) == 0:
            continue
        fn = facet_node_ids(mesh, pairs)
        k = fn.shape[1]
        wbar = wn[fn].mean(axis=1)  # (nf, dim)
        if load.kind == "pressure":
            p = float(load.value)

            def facet_scalar(coords):
                an = facet_area_vectors(mesh, pairs, coords=coords)
                return p * np.einsum("fd,fd->f", an, wbar)

        elif load.kind == "total_force":
            F = np.asarray(load.value, dtype=np.float64).reshape(dim)
            an0 = facet_area_vectors(mesh, pairs)
            A0 = np.linalg.norm(an0, axis=1)
            Asum = A0.sum()
            c = wbar @ F
            # w^T f = sum_f A_f c_f / sum A; chain rule through the areas
            coef = c / Asum - (A0 @ c) / Asum**2

            def facet_scalar(coords, coef=coef):
                an = facet_area_vectors(mesh, pairs, coords=coords)
                A = np.sqrt(np.einsum("fd,fd->f", an, an))
                return coef * A

        else:
            raise SolveError(f"unknown load kind {load.kind!r}")
        # complex-step one node coordinate at a time: facets share nodes,
        # so batched perturbations would cross-contaminate contributions
        base = mesh.nodes_dim
        for node in np.unique(fn):
            for d in range(dim):
                cc = base.astype(np.complex128)
                cc[node, d] += 1j * CS_STEP
                phi = facet_scalar(cc)
                grad[node, d] += float(phi.imag.sum()) / CS_STEP
    return grad


def _require_homogeneous_dirichlet(mesh, loads):
    _, values = dirichlet_arrays(mesh, loads)
    if np.any(values):
        raise SolveError("shape gradients require zero prescribed displacements")


def compliance_gradient(mesh: Mesh, material: Material, solution: Solution,
                        loads: LoadCase, movable=None) -> np.ndarray:
    """Exact discrete gradient of compliance f^T u, (nn, dim)."""
    _require_homogeneous_dirichlet(mesh, loads)
    u = solution.displacement.reshape(-1)
    if solution.displacement.shape[0] != mesh.node_count:
        raise SolveError("solution does not match mesh")
    grad = 2.0 * load_virtual_work_gradient(mesh, loads, u) - _energy_grad(
        mesh, material, u, u
    )
    return _restrict(grad, mesh, movable)


def _vm_quadratic(dim):
    if dim == 2:
        return np.array([[1.0, -0.5, 0.0], [-0.5, 1.0, 0.0], [0.0, 0.0, 3.0]])
    M = np.full((3, 3), -0.5) + np.eye(3) * 1.5
    out = np.zeros((6, 6))
    out[:3, :3] = M
    out[3:, 3:] = np.eye(3) * 3.0
    return out


def stress_aggregate_gradient(mesh: Mesh, material: Material, solution: Solution,
                              loads: LoadCase, p: float = 8.0,
                              sigma_ref: float | None = None, movable=None,
                              operator: LinearOperatorCache | None = None,
                              opts: SolverOptions = SolverOptions()) -> np.ndarray:
    """Exact discrete gradient of the p-norm stress aggregate, (nn, dim).

    One adjoint solve plus explicit geometric terms.
    """
    _require_homogeneous_dirichlet(mesh, loads)
    if sigma_ref is None:
        sigma_ref = material.allowed_stress
    dim = mesh.dimension
    D = elastic_matrix(material, dim)
    M = _vm_quadratic(dim)
    vols = signed_element_measures(mesh)
    vm = solution.von_mises
    Vt = vols.sum()
    theta = aggregate_pnorm(vols, vm, p, sigma_ref)
    if theta <= 0.0:
        raise SolveError("stress aggregate gradient undefined for a zero stress field")
    w = vm / sigma_ref
    wmax = w.max()

    # d(theta)/du -> adjoint right-hand side
    u = solution.displacement.reshape(-1)
    ue = _element_disp(mesh, u)
    coords = mesh.element_coords()
    if dim == 2:
        B, _ = kernels.tri_bmatrix(coords)
    else:
        B, _ = kernels.tet_bmatrix(coords)
    Msig = solution.stress @ M.T
    safe_vm = np.where(vm > 0, vm, 1.0)
    dvm_due = np.einsum("ekj,ek->ej", B, Msig @ D) / safe_vm[:, None]
    dvm_due[vm <= 0] = 0.0
    # coef_e = dTheta/dvm_e, written stably as v_e (w_e/theta)^(p-1)/(Vt*sref)
    coef = vols * (w / theta) ** (p - 1.0) / (Vt * sigma_ref)
    rhs = np.zeros(dim * mesh.node_count)
    np.add.at(
        rhs.reshape(-1, dim),
        mesh.elements.reshape(-1),
        (coef[:, None] * dvm_due).reshape(-1, dim),
    )

    op = operator or LinearOperatorCache(mesh, material, loads, opts)
    lam = op.solve_reduced(rhs[op.free])

    # explicit geometric term: theta = (S/Vt)^(1/p) with S separable
    scale2 = (sigma_ref * wmax) ** 2

    def per_element_s(ccoords):
        if dim == 2:
            Bc, area = kernels.tri_bmatrix(ccoords)
            meas = area * mesh.thickness
        else:
            Bc, meas = kernels.tet_bmatrix(ccoords)
        sig = np.einsum("kl,elj,ej->ek", D, Bc, ue)
        q = np.einsum("ek,kl,el->e", sig, M, sig) / scale2
        return meas * q ** (p / 2.0)

    S_hat = float(np.sum(vols * (w / wmax) ** p))
    dS_hat = _cs_element_grad(mesh, per_element_s)
    dVt = volume_gradient(mesh)
    grad = (theta / (p * S_hat)) * dS_hat - (theta / (p * Vt)) * dVt

    # adjoint terms: + lam^T df/dx - lam^T dK/dx u
    grad += load_virtual_work_gradient(mesh, loads, lam)
    grad -= _energy_grad(mesh, material, u, lam)
    return _restrict(grad, mesh, movable)


def fd_check(mesh: Mesh, functional: str, direction, h: float,
             material: Material | None = None, loads: LoadCase | None = None,
             p: float = 8.0, sigma_ref: float | None = None,
             opts: SolverOptions = SolverOptions()) -> float:
    """Central-difference verification of a shape gradient.

    Returns |FD - g.d| / max(|g.d|, 1e-30). Re-solves the state for the
    state-dependent functionals.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    d = np.asarray(direction, dtype=np.float64).reshape(mesh.node_count, mesh.dimension)
    if not np.isfinite(d).all():
        raise ValueError("direction must be finite")
    material = material or Material()
    if sigma_ref is None:
        sigma_ref = material.allowed_stress

    def J(coords):
        m = mesh.with_nodes(coords)
        meas = signed_element_measures(m)
        if (meas <= 0).any():
            raise SolveError("perturbed mesh is invalid; reduce h")
        if functional == "volume":
            return float(meas.sum())
        sol = solve_static(m, material, loads, opts)
        ev = evaluate(m, sol, p=p, sigma_ref=sigma_ref, material=material)
        if functional == "compliance":
            return ev.compliance
        if functional == "aggregate":
            return ev.aggregate
        raise ValueError(f"unknown functional {functional!r}")

    if functional == "volume":
        g = volume_gradient(mesh)
    elif functional == "compliance":
        sol = solve_static(mesh, material, loads, opts)
        g = compliance_gradient(mesh, material, sol, loads)
    elif functional == "aggregate":
        sol = solve_static(mesh, material, loads, opts)
        g = stress_aggregate_gradient(mesh, material, sol, loads, p=p,
                                      sigma_ref=sigma_ref, opts=opts)
    else:
        raise ValueError(f"unknown functional {functional!r}")

    x0 = mesh.nodes_dim
    fd = (J(x0 + h * d) - J(x0 - h * d)) / (2.0 * h)
    gd = float(np.sum(g * d))
    return abs(fd - gd) / max(abs(gd), 1e-30)
