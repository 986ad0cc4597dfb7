"""Parametric test geometries.

Self-contained benchmark geometries for experiments and tests:
`lug3d` (a block with a transverse hole, loaded through the hole like a
sling eye) is the canonical 3D benchmark; the 2D fixtures exist for cheap
verification.

Every fixture carries the standard regions: "load" (facet set), "pin"
(node set), "frozen" (node set) and "design" (boundary nodes not frozen).
"""

from __future__ import annotations

import numpy as np

from tracshape.errors import FixtureError
from tracshape.mesh import (
    Mesh,
    RegionTag,
    boundary_facets,
    facet_node_ids,
    signed_element_measures,
)


def _require(cond, msg):
    if not cond:
        raise FixtureError(msg)


def _fix_orientation(mesh: Mesh) -> Mesh:
    """Swap the last two nodes of negatively oriented elements."""
    m = signed_element_measures(mesh)
    flipped = m < 0
    if not flipped.any():
        return mesh
    elements = mesh.elements.copy()
    k = elements.shape[1]
    elements[flipped, k - 2], elements[flipped, k - 1] = (
        elements[flipped, k - 1].copy(),
        elements[flipped, k - 2].copy(),
    )
    return Mesh(mesh.dimension, mesh.nodes, elements, mesh.thickness, mesh.regions)


def _node_set(name, idx):
    return RegionTag(name, "nodes", np.asarray(sorted(set(map(int, idx))), dtype=np.int64))


def _facet_region(mesh: Mesh, name, predicate) -> RegionTag:
    """Boundary facets whose nodes all satisfy predicate(coords)->bool."""
    pairs = boundary_facets(mesh)
    fn = facet_node_ids(mesh, pairs)
    ok = predicate(mesh.nodes[fn.reshape(-1)]).reshape(fn.shape).all(axis=1)
    return RegionTag(name, "facets", pairs[ok])


def _boundary_nodes(mesh: Mesh):
    pairs = boundary_facets(mesh)
    return np.unique(facet_node_ids(mesh, pairs).reshape(-1))


def _with_standard_regions(mesh: Mesh, pin_idx, load_pred, frozen_idx) -> Mesh:
    mesh = mesh.with_region(_node_set("pin", pin_idx))
    mesh = mesh.with_region(_facet_region(mesh, "load", load_pred))
    load_nodes = mesh.region_nodes("load")
    frozen = np.union1d(np.asarray(frozen_idx, dtype=np.int64), load_nodes)
    frozen = np.union1d(frozen, np.asarray(pin_idx, dtype=np.int64))
    mesh = mesh.with_region(_node_set("frozen", frozen))
    design = np.setdiff1d(_boundary_nodes(mesh), frozen)
    return mesh.with_region(_node_set("design", design))


def _grid2d(Lx, Ly, nx, ny):
    """Structured tri3 grid on [0,Lx]x[0,Ly]; fixed diagonal split."""
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.reshape(-1), Y.reshape(-1)], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    return nodes, np.asarray(tris, dtype=np.int64)


_CUBE_TET_PATHS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _grid3d(Lx, Ly, Lz, nx, ny, nz):
    """Structured tet4 grid: every cube split into 6 Kuhn tets."""
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    zs = np.linspace(0.0, Lz, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.stack([X.reshape(-1), Y.reshape(-1), Z.reshape(-1)], axis=1)

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                corner = {}
                for dx in (0, 1):
                    for dy in (0, 1):
                        for dz in (0, 1):
                            corner[(dx, dy, dz)] = nid(i + dx, j + dy, k + dz)
                v000 = corner[(0, 0, 0)]
                v111 = corner[(1, 1, 1)]
                for a, b, c in _CUBE_TET_PATHS:
                    step = [0, 0, 0]
                    step[a] = 1
                    va = corner[tuple(step)]
                    step[b] = 1
                    vab = corner[tuple(step)]
                    tets.append((v000, va, vab, v111))
    return nodes, np.asarray(tets, dtype=np.int64)


def _punch_hole(nodes, tris, center, r):
    """Remove triangles inside a circle and snap the cavity ring onto it.

    Returns (nodes, tris, on_circle_mask) with orphan nodes dropped.
    """
    c = np.asarray(center)
    dist = np.linalg.norm(nodes - c, axis=1)
    inside = dist < r * (1.0 - 1e-12)
    # drop every triangle touching an interior node; the surviving cavity
    # ring then sits at or outside the circle and snaps inward gently
    keep = ~inside[tris].any(axis=1)
    _require(keep.any(), "hole swallows the whole mesh")
    _require(not keep.all(), "hole too coarse for this grid; increase n")
    removed_nodes = set(tris[~keep].reshape(-1).tolist())
    kept_tris = tris[keep]
    used = np.unique(kept_tris.reshape(-1))
    used_set = set(used.tolist())
    nodes = nodes.copy()
    cavity = sorted(removed_nodes & used_set)
    for i in cavity:
        d = np.linalg.norm(nodes[i] - c)
        _require(d > r * 1e-6, "hole too coarse for this grid; increase n")
        nodes[i] = c + (nodes[i] - c) * (r / d)
    renum = -np.ones(len(nodes), dtype=np.int64)
    renum[used] = np.arange(len(used))
    new_tris = renum[kept_tris]
    new_nodes = nodes[used]
    e1 = new_nodes[new_tris[:, 1]] - new_nodes[new_tris[:, 0]]
    e2 = new_nodes[new_tris[:, 2]] - new_nodes[new_tris[:, 0]]
    _require(
        (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0).all(),
        "hole snapping tangled the grid; increase n",
    )
    on_circle = np.abs(np.linalg.norm(new_nodes - c, axis=1) - r) < r * 1e-9
    return new_nodes, new_tris, on_circle


def _to3(nodes2d):
    out = np.zeros((len(nodes2d), 3))
    out[:, :2] = nodes2d
    return out


def _extrude(nodes2d, tris, z_levels):
    """Extrude a tri mesh into conforming tets (index-based prism split)."""
    nn = len(nodes2d)
    nlay = len(z_levels)
    nodes = np.zeros((nn * nlay, 3))
    for k, z in enumerate(z_levels):
        nodes[k * nn:(k + 1) * nn, :2] = nodes2d
        nodes[k * nn:(k + 1) * nn, 2] = z
    tets = []
    for k in range(nlay - 1):
        off_b, off_t = k * nn, (k + 1) * nn
        for tri in tris:
            b = [int(t) + off_b for t in tri]
            # rotate so the smallest bottom id leads; tops follow
            s = int(np.argmin(b))
            b = b[s:] + b[:s]
            t = [x - off_b + off_t for x in b]
            v = b + t
            if v[1] < v[2]:
                tets.append((v[0], v[1], v[2], v[5]))
                tets.append((v[0], v[1], v[5], v[4]))
            else:
                tets.append((v[0], v[1], v[2], v[4]))
                tets.append((v[0], v[2], v[5], v[4]))
            tets.append((v[0], v[4], v[5], v[3]))
    return nodes, np.asarray(tets, dtype=np.int64)


def _int_param(params, key, default, low=1):
    n = params.get(key, default)
    _require(float(n) == int(n) and int(n) >= low, f"{key} must be an integer >= {low}")
    return int(n)


def _pos_param(params, key, default):
    v = float(params.get(key, default))
    _require(v > 0, f"{key} must be positive")
    return v


def _check_keys(params, allowed):
    unknown = set(params) - set(allowed)
    _require(not unknown, f"unknown fixture params: {sorted(unknown)}")


def bar3d(params):
    _check_keys(params, {"L", "a", "n"})
    L = _pos_param(params, "L", 1.0)
    a = _pos_param(params, "a", 0.1)
    n = _int_param(params, "n", 2)
    nx = max(1, round(n * L / a))
    nodes, tets = _grid3d(L, a, a, nx, n, n)
    mesh = _fix_orientation(Mesh(3, nodes, tets))
    tol = 1e-9 * max(L, a)
    pin = np.nonzero(nodes[:, 0] < tol)[0]
    frozen = np.nonzero((nodes[:, 0] < tol) | (nodes[:, 0] > L - tol))[0]
    return _with_standard_regions(mesh, pin, lambda p: p[:, 0] > L - tol, frozen)


def cantilever2d(params):
    _check_keys(params, {"L", "h", "t", "n"})
    L = _pos_param(params, "L", 1.0)
    h = _pos_param(params, "h", 0.05)
    t = _pos_param(params, "t", 0.01)
    n = _int_param(params, "n", 8)
    nx = max(1, round(n * L / h))
    nodes2d, tris = _grid2d(L, h, nx, n)
    mesh = _fix_orientation(Mesh(2, _to3(nodes2d), tris, thickness=t))
    tol = 1e-9 * max(L, h)
    pin = np.nonzero(nodes2d[:, 0] < tol)[0]
    frozen = np.nonzero((nodes2d[:, 0] < tol) | (nodes2d[:, 0] > L - tol))[0]
    return _with_standard_regions(mesh, pin, lambda p: p[:, 0] > L - tol, frozen)


def plate_with_hole2d(params):
    _check_keys(params, {"L", "W", "r", "t", "n"})
    L = _pos_param(params, "L", 0.1)
    W = _pos_param(params, "W", 0.05)
    t = _pos_param(params, "t", 0.005)
    r = float(params.get("r", 0.01))
    n = _int_param(params, "n", 8)
    _require(0 < r < W / 2, "hole radius must satisfy 0 < r < W/2")
    _require(r < L / 2, "hole radius must satisfy r < L/2")
    nx = max(2, round(n * L / W))
    nodes2d, tris = _grid2d(L, W, nx, n)
    center = np.array([L / 2, W / 2])
    nodes2d, tris, on_circle = _punch_hole(nodes2d, tris, center, r)
    mesh = _fix_orientation(Mesh(2, _to3(nodes2d), tris, thickness=t))
    tol = 1e-9 * max(L, W)
    pin = np.nonzero(nodes2d[:, 0] < tol)[0]
    # freeze the entire outer boundary; only the hole boundary (plus the
    # interior, via the smoothing solve) is movable.
    bnodes = _boundary_nodes(mesh)
    hole = np.nonzero(on_circle)[0]
    frozen = np.setdiff1d(bnodes, hole)
    mesh = _with_standard_regions(mesh, pin, lambda p: p[:, 0] > L - tol, frozen)
    return mesh.with_region(_node_set("hole", hole))


def ring2d(params):
    _check_keys(params, {"r_in", "r_out", "t", "n"})
    r_in = _pos_param(params, "r_in", 0.02)
    r_out = _pos_param(params, "r_out", 0.04)
    t = _pos_param(params, "t", 0.005)
    n = _int_param(params, "n", 16)
    _require(r_in < r_out, "r_in must be smaller than r_out")
    n_theta = 4 * n
    n_r = max(2, n // 4)
    radii = np.linspace(r_in, r_out, n_r + 1)
    thetas = np.arange(n_theta) * (2 * np.pi / n_theta)
    nodes2d = np.zeros(((n_r + 1) * n_theta, 2))
    for i, rr in enumerate(radii):
        nodes2d[i * n_theta:(i + 1) * n_theta, 0] = rr * np.cos(thetas)
        nodes2d[i * n_theta:(i + 1) * n_theta, 1] = rr * np.sin(thetas)

    def nid(i, j):
        return i * n_theta + (j % n_theta)

    tris = []
    for i in range(n_r):
        for j in range(n_theta):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    mesh = _fix_orientation(Mesh(2, _to3(nodes2d), np.asarray(tris, dtype=np.int64),
                                 thickness=t))
    rr = np.linalg.norm(nodes2d, axis=1)
    tol = 1e-9 * r_out
    pin = np.nonzero(rr < r_in + tol)[0]
    # the load sits on the outer rim; polygonal radii are slightly below
    # r_out, so classify by midpoint.
    rmid = 0.5 * (radii[-2] + radii[-1])
    return _with_standard_regions(
        mesh,
        pin,
        lambda p: (np.linalg.norm(p[:, :2], axis=1) > rmid) & (p[:, 0] > 0),
        pin,
    )


def lug3d(params):
    _check_keys(params, {"L", "W", "t", "r", "n"})
    L = _pos_param(params, "L", 0.12)
    W = _pos_param(params, "W", 0.06)
    t = _pos_param(params, "t", 0.02)
    r = float(params.get("r", 0.015))
    n = _int_param(params, "n", 8)
    _require(0 < r < W / 2, "hole radius must satisfy 0 < r < W/2")
    nx = max(2, round(n * L / W))
    nodes2d, tris = _grid2d(L, W, nx, n)
    center = np.array([L - W / 2, W / 2])
    nodes2d, tris, on_circle = _punch_hole(nodes2d, tris, center, r)
    h2 = W / n
    nz = max(2, round(t / h2))
    nodes, tets = _extrude(nodes2d, tris, np.linspace(0.0, t, nz + 1))
    mesh = _fix_orientation(Mesh(3, nodes, tets))
    tol = 1e-9 * max(L, W, t)
    pin = np.nonzero(nodes[:, 0] < tol)[0]
    dist = np.linalg.norm(nodes[:, :2] - center, axis=1)
    hole = np.nonzero(np.abs(dist - r) < r * 1e-6)[0]
    mesh = _with_standard_regions(
        mesh,
        pin,
        lambda p: np.abs(np.linalg.norm(p[:, :2] - center, axis=1) - r) < r * 1e-6,
        hole,
    )
    return mesh.with_region(_node_set("hole", hole))


_FIXTURES = {
    "bar3d": bar3d,
    "cantilever2d": cantilever2d,
    "plate_with_hole2d": plate_with_hole2d,
    "ring2d": ring2d,
    "lug3d": lug3d,
}


def make_fixture(name: str, params: dict | None = None) -> Mesh:
    """Build a named fixture mesh. Deterministic for identical params."""
    if name not in _FIXTURES:
        raise FixtureError(f"unknown fixture {name!r}; choose from {sorted(_FIXTURES)}")
    return _FIXTURES[name](dict(params or {}))
