"""Linear elastostatics on simplex meshes.

Stiffness assembly, Dirichlet elimination, sparse solves, stress recovery
and the scalar responses (compliance, max and p-norm aggregated von Mises).
SI units throughout: m, N, Pa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from tracshape import _kernels as kernels
from tracshape.errors import (
    ConvergenceError,
    MeshValidationError,
    SingularSystemError,
    SolveError,
)
from tracshape.mesh import Mesh, facet_area_vectors, facet_node_ids, signed_element_measures


@dataclass(frozen=True)
class Material:
    """Isotropic elastic material; defaults are the cast-steel values
    used throughout (E = 2e11 Pa, nu = 0.25, rho = 7850 kg/m3, allowed
    tension stress 150 MPa)."""

    youngs_modulus: float = 2.0e11
    poisson_ratio: float = 0.25
    density: float = 7850.0
    allowed_stress: float = 150.0e6

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError("youngs_modulus must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must be in [0, 0.5)")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.allowed_stress <= 0:
            raise ValueError("allowed_stress must be positive")


PAPER_STEEL = Material()


@dataclass(frozen=True)
class DirichletBC:
    """Fixed displacement components on a region.

    mask selects components; value is a scalar, a length-dim vector, or a
    callable mapping node coordinates (m, 3) to values (m, dim).
    """

    region: str
    mask: tuple = (True, True, True)
    value: object = 0.0


@dataclass(frozen=True)
class NeumannLoad:
    """Surface load on a facet region.

    kind "total_force": `value` is the resultant force vector (N), spread
    over the region's facets proportionally to facet area.
    kind "pressure": `value` is a scalar (Pa) acting along outward normals.
    """

    region: str
    kind: str
    value: object


@dataclass(frozen=True)
class LoadCase:
    dirichlet: tuple = ()
    neumann: tuple = ()


@dataclass(frozen=True)
class SolverOptions:
    method: str = "auto"  # auto | direct | cg
    rtol: float = 1e-10
    max_iter: int | None = None  # default 20 * ndof


@dataclass(frozen=True)
class Solution:
    displacement: np.ndarray  # (nn, dim), m
    stress: np.ndarray  # (ne, 3) plane stress or (ne, 6) Voigt, Pa
    von_mises: np.ndarray  # (ne,), Pa
    compliance: float  # J
    reaction: np.ndarray  # (dim,), N


@dataclass(frozen=True)
class Evaluation:
    compliance: float
    max_vm: float
    aggregate: float


def elastic_matrix(material: Material, dimension: int) -> np.ndarray:
    """Constitutive matrix: 3x3 plane stress or 6x6 solid (Voigt,
    engineering shear)."""
    E, nu = material.youngs_modulus, material.poisson_ratio
    if dimension == 2:
        c = E / (1.0 - nu * nu)
        return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2]])
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    G = E / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] = lam + 2.0 * G
    D[np.arange(3, 6), np.arange(3, 6)] = G
    return D


def element_stiffness(coords, material: Material, model: str, thickness=None):
    """Stiffness of a single element. model: 'plane-stress' or 'solid'."""
    coords = np.asarray(coords, dtype=np.float64)
    if model == "plane-stress":
        D = elastic_matrix(material, 2)
        Ke, area = kernels.tri_stiffness(coords[None, :, :2], D, thickness)
        if area[0] <= 0:
            raise MeshValidationError("degenerate element: non-positive area")
        return Ke[0]
    if model == "solid":
        D = elastic_matrix(material, 3)
        Ke, vol = kernels.tet_stiffness(coords[None], D)
        if vol[0] <= 0:
            raise MeshValidationError("degenerate element: non-positive volume")
        return Ke[0]
    raise ValueError(f"unknown model {model!r}")


def _element_dofs(mesh: Mesh):
    dim = mesh.dimension
    return (dim * mesh.elements[:, :, None] + np.arange(dim)).reshape(
        mesh.element_count, -1
    )


def element_stiffness_batch(mesh: Mesh, material: Material):
    coords = mesh.element_coords()
    D = elastic_matrix(material, mesh.dimension)
    if mesh.dimension == 2:
        Ke, m = kernels.tri_stiffness(coords, D, mesh.thickness)
    else:
        Ke, m = kernels.tet_stiffness(coords, D)
    if (m <= 0).any():
        e = int(np.nonzero(m <= 0)[0][0])
        raise MeshValidationError(f"element {e}: degenerate (non-positive measure)")
    return Ke


def assemble(mesh: Mesh, material: Material) -> sp.csr_matrix:
    """Global stiffness; deterministic (CSR duplicate summation is ordered)."""
    Ke = element_stiffness_batch(mesh, material)
    edof = _element_dofs(mesh)
    k = edof.shape[1]
    rows = np.repeat(edof, k, axis=1).reshape(-1)
    cols = np.tile(edof, (1, k)).reshape(-1)
    ndof = mesh.dimension * mesh.node_count
    K = sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(ndof, ndof))
    return K.tocsr()


def build_load_vector(mesh: Mesh, loads: LoadCase) -> np.ndarray:
    """Consistent nodal forces from the Neumann entries."""
    dim = mesh.dimension
    f = np.zeros(dim * mesh.node_count)
    for load in loads.neumann:
        tag = mesh.regions.get(load.region)
        if tag is None:
            raise SolveError(f"load region {load.region!r} does not exist")
        if tag.kind != "facets":
            raise SolveError(f"load region {load.region!r} must be a facet set")
        pairs = tag.members
        if len(pairs) == 0:
            continue
        fn = facet_node_ids(mesh, pairs)
        an = facet_area_vectors(mesh, pairs)
        k = fn.shape[1]
        if load.kind == "total_force":
            F = np.asarray(load.value, dtype=np.float64).reshape(dim)
            areas = np.linalg.norm(an, axis=1)
            weights = areas / areas.sum()
            nodal = weights[:, None, None] * (F / k)  # (nf, 1, dim)
            nodal = np.broadcast_to(nodal, (len(pairs), k, dim))
        elif load.kind == "pressure":
            p = float(load.value)
            nodal = np.broadcast_to((p / k) * an[:, None, :], (len(pairs), k, dim))
        else:
            raise SolveError(f"unknown load kind {load.kind!r}")
        np.add.at(f.reshape(-1, dim), fn.reshape(-1), nodal.reshape(-1, dim))
    return f


def dirichlet_arrays(mesh: Mesh, loads: LoadCase):
    """(fixed mask, prescribed values), both of length ndof."""
    dim = mesh.dimension
    ndof = dim * mesh.node_count
    fixed = np.zeros(ndof, dtype=bool)
    values = np.zeros(ndof)
    for bc in loads.dirichlet:
        if bc.region not in mesh.regions:
            raise SolveError(f"dirichlet region {bc.region!r} does not exist")
        nodes = mesh.region_nodes(bc.region)
        mask = np.asarray(bc.mask, dtype=bool)[:dim]
        if callable(bc.value):
            vals = np.asarray(bc.value(mesh.nodes[nodes]), dtype=np.float64)
            vals = vals.reshape(len(nodes), dim)
        else:
            v = np.atleast_1d(np.asarray(bc.value, dtype=np.float64))
            if v.size not in (1, dim):
                raise SolveError(f"dirichlet value for {bc.region!r} has a bad shape")
            vals = np.broadcast_to(v, (len(nodes), dim))
        for c in range(dim):
            if mask[c]:
                dofs = dim * nodes + c
                fixed[dofs] = True
                values[dofs] = vals[:, c]
    return fixed, values


_MODE_NAMES = {
    2: ("translation-x", "translation-y", "rotation-z"),
    3: (
        "translation-x",
        "translation-y",
        "translation-z",
        "rotation-x",
        "rotation-y",
        "rotation-z",
    ),
}


def rigid_modes(mesh: Mesh) -> np.ndarray:
    """Rigid-body modes about the centroid, (ndof, 3|6)."""
    dim = mesh.dimension
    x = mesh.nodes_dim - mesh.nodes_dim.mean(axis=0)
    nn = mesh.node_count
    if dim == 2:
        R = np.zeros((2 * nn, 3))
        R[0::2, 0] = 1.0
        R[1::2, 1] = 1.0
        R[0::2, 2] = -x[:, 1]
        R[1::2, 2] = x[:, 0]
        return R
    R = np.zeros((3 * nn, 6))
    for c in range(3):
        R[c::3, c] = 1.0
    R[1::3, 3] = -x[:, 2]
    R[2::3, 3] = x[:, 1]
    R[0::3, 4] = x[:, 2]
    R[2::3, 4] = -x[:, 0]
    R[0::3, 5] = -x[:, 1]
    R[1::3, 5] = x[:, 0]
    return R


def check_rigid_modes(mesh: Mesh, fixed: np.ndarray) -> None:
    """Raise SingularSystemError naming any rigid-body mode the Dirichlet
    set leaves free."""
    # a connected component with no constrained node floats freely even if
    # the mesh as a whole looks constrained
    nn = mesh.node_count
    i = np.repeat(mesh.elements, mesh.elements.shape[1], axis=1).reshape(-1)
    j = np.tile(mesh.elements, (1, mesh.elements.shape[1])).reshape(-1)
    adj = sp.coo_matrix((np.ones_like(i), (i, j)), shape=(nn, nn))
    ncomp, labels = sp.csgraph.connected_components(adj.tocsr(), directed=False)
    if ncomp > 1:
        anchored = np.zeros(ncomp, dtype=bool)
        node_fixed = fixed.reshape(nn, -1).any(axis=1)
        np.logical_or.at(anchored, labels, node_fixed)
        if not anchored.all():
            names = _MODE_NAMES[mesh.dimension]
            raise SingularSystemError(
                f"unconstrained rigid mode: {names[0]} "
                "(disconnected component with no fixed node)"
            )
    R = rigid_modes(mesh)
    names = _MODE_NAMES[mesh.dimension]
    Rc = R[fixed]
    if Rc.shape[0] == 0:
        raise SingularSystemError(f"unconstrained rigid mode: {names[0]}")
    # normalize columns so translations and rotations compare fairly
    norms = np.linalg.norm(R, axis=0)
    s = np.linalg.svd(Rc / norms, compute_uv=False)
    if s[-1] < 1e-9 * max(1.0, s[0]):
        _, _, vt = np.linalg.svd(Rc / norms)
        combo = vt[-1]
        name = names[int(np.argmax(np.abs(combo)))]
        raise SingularSystemError(f"unconstrained rigid mode: {name}")


def _pcg_jacobi(A, b, rtol, maxiter):
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x
    dinv = 1.0 / A.diagonal()
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"conjugate gradients did not reach rtol={rtol} within {maxiter} iterations"
    )


class LinearOperatorCache:
    """Reusable reduced-system solver for one (mesh, material, dirichlet).

    The optimization loop solves the same operator for the state and the
    adjoint; keeping the factorization avoids a second factorization.
    """

    def __init__(self, mesh: Mesh, material: Material, loads: LoadCase,
                 opts: SolverOptions = SolverOptions()):
        self.mesh = mesh
        self.opts = opts
        self.K = assemble(mesh, material)
        self.fixed, self.values = dirichlet_arrays(mesh, loads)
        check_rigid_modes(mesh, self.fixed)
        self.free = ~self.fixed
        self.Kff = self.K[self.free][:, self.free].tocsc()
        self._lu = None

    def _method(self):
        m = self.opts.method
        if m == "auto":
            return "direct"
        return m

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K_ff x = rhs; returns the full-length vector (zeros on
        fixed dofs)."""
        out = np.zeros(self.K.shape[0])
        if self._method() == "cg":
            maxiter = self.opts.max_iter or 20 * self.K.shape[0]
            out[self.free] = _pcg_jacobi(self.Kff, rhs, self.opts.rtol, maxiter)
            return out
        if self._lu is None:
            try:
                self._lu = spla.splu(self.Kff)
            except RuntimeError as exc:
                raise SolveError(f"singular reduced system: {exc}") from exc
        x = self._lu.solve(rhs)
        resid = np.linalg.norm(self.Kff @ x - rhs)
        ref = np.linalg.norm(rhs)
        if ref > 0 and resid > max(self.opts.rtol, 1e-6) * ref:
            raise SolveError(f"direct solve residual {resid / ref:.2e} too large")
        out[self.free] = x
        return out


def solve_static(mesh: Mesh, material: Material, loads: LoadCase,
                 opts: SolverOptions = SolverOptions(),
                 operator: LinearOperatorCache | None = None) -> Solution:
    """Solve K u = f with Dirichlet dofs eliminated."""
    op = operator or LinearOperatorCache(mesh, material, loads, opts)
    f = build_load_vector(mesh, loads)
    u = op.values.copy()
    u[op.free] = 0.0
    rhs = f[op.free]
    if op.fixed.any() and np.any(op.values[op.fixed]):
        rhs = rhs - (op.K[op.free][:, op.fixed] @ op.values[op.fixed])
    u += op.solve_reduced(rhs)
    u[op.fixed] = op.values[op.fixed]

    dim = mesh.dimension
    disp = u.reshape(-1, dim)
    stress, vm = recover_stress(mesh, material, disp)
    compliance = float(f @ u)
    residual = op.K @ u - f
    rmask = op.fixed.reshape(-1, dim)
    reaction = np.array(
        [float(residual.reshape(-1, dim)[rmask[:, c], c].sum()) for c in range(dim)]
    )
    return Solution(disp, stress, vm, compliance, reaction)


def recover_stress(mesh: Mesh, material: Material, displacement):
    """Element-constant stress and von Mises from a displacement field."""
    dim = mesh.dimension
    disp = np.asarray(displacement, dtype=np.float64).reshape(-1, dim)
    if disp.shape[0] != mesh.node_count:
        raise SolveError("displacement length does not match the mesh")
    coords = mesh.element_coords()
    D = elastic_matrix(material, dim)
    ue = disp[mesh.elements].reshape(mesh.element_count, -1)
    if dim == 2:
        stress = kernels.tri_stress(coords, D, ue)
    else:
        stress = kernels.tet_stress(coords, D, ue)
    return stress, von_mises(stress, dim)


def von_mises(stress, dimension: int):
    """Equivalent stress. 2D input is plane stress (implied sigma_zz = 0)."""
    s = np.asarray(stress, dtype=np.float64)
    if dimension == 2:
        sx, sy, txy = s[..., 0], s[..., 1], s[..., 2]
        return np.sqrt(np.maximum(sx * sx - sx * sy + sy * sy + 3.0 * txy * txy, 0.0))
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    txy, tyz, tzx = s[..., 3], s[..., 4], s[..., 5]
    return np.sqrt(
        np.maximum(
            0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2)
            + 3.0 * (txy * txy + tyz * tyz + tzx * tzx),
            0.0,
        )
    )


def aggregate_pnorm(volumes, vm, p, sigma_ref):
    """Volume-weighted p-norm of vm/sigma_ref; upper-bounded by the max
    ratio and converging to it as p grows."""
    if sigma_ref <= 0:
        raise ValueError("sigma_ref must be positive")
    if p < 2:
        raise ValueError("aggregation exponent must be >= 2")
    w = np.asarray(vm, dtype=np.float64) / sigma_ref
    wmax = w.max(initial=0.0)
    if wmax == 0.0:
        return 0.0
    v = np.asarray(volumes, dtype=np.float64)
    return float(wmax * (np.sum(v * (w / wmax) ** p) / v.sum()) ** (1.0 / p))


def evaluate(mesh: Mesh, solution: Solution, p: float = 8.0,
             sigma_ref: float | None = None,
             material: Material | None = None) -> Evaluation:
    """Scalar responses of a solved state. sigma_ref defaults to the
    material's allowed stress."""
    if sigma_ref is None:
        sigma_ref = (material or PAPER_STEEL).allowed_stress
    vols = signed_element_measures(mesh)
    theta = aggregate_pnorm(vols, solution.von_mises, p, sigma_ref)
    return Evaluation(solution.compliance, float(solution.von_mises.max(initial=0.0)),
                      theta)
