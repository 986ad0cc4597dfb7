"""Simplex mesh representation, validation, measures, and native JSON I/O.

Meshes are immutable: node/element arrays are frozen after construction
and every operation returns a new value. Coordinates are meters; 2D
meshes are plane-stress with an explicit thickness and live in the z=0
plane.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from tracshape.errors import MeshFormatError, MeshValidationError

DUPLICATE_NODE_TOL = 1e-12

# Local facet f of a tet is the face opposite node f, ordered so the
# right-hand normal points outward for a positively oriented element.
TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))
# Local facet f of a tri is the edge opposite node f, traversed CCW.
TRI_EDGES = ((1, 2), (2, 0), (0, 1))


@dataclass(frozen=True)
class RegionTag:
    """Named node set or boundary facet set.

    Facet members are (element index, local facet index) pairs.
    """

    name: str
    kind: str  # "nodes" | "facets"
    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.int64)
        if self.kind == "nodes":
            m = np.unique(m.reshape(-1))
        elif self.kind == "facets":
            m = m.reshape(-1, 2)
            m = np.unique(m, axis=0)
        else:
            raise MeshFormatError(f"region {self.name!r}: unknown kind {self.kind!r}")
        m.flags.writeable = False
        object.__setattr__(self, "members", m)


@dataclass(frozen=True)
class MeshReport:
    volume: float
    surface_area: float
    min_quality: float
    worst_element: int
    is_valid: bool
    messages: list = field(default_factory=list)


@dataclass(frozen=True)
class Mesh:
    dimension: int
    nodes: np.ndarray  # (nn, 3) float64, z == 0 for 2D
    elements: np.ndarray  # (ne, 3) tri3 or (ne, 4) tet4, int64
    thickness: float | None = None
    regions: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise MeshFormatError("nodes must be an (n, 3) array")
        if elements.ndim != 2 or elements.shape[1] not in (3, 4):
            raise MeshFormatError("elements must be (n, 3) or (n, 4)")
        if self.dimension not in (2, 3):
            raise MeshFormatError("dimension must be 2 or 3")
        if self.dimension == 2 and elements.shape[1] != 3:
            raise MeshFormatError("2D meshes use tri3 elements")
        if self.dimension == 3 and elements.shape[1] != 4:
            raise MeshFormatError("3D meshes use tet4 elements")
        if self.dimension == 2 and (self.thickness is None or self.thickness <= 0):
            raise MeshFormatError("2D mesh requires thickness > 0")
        nodes.flags.writeable = False
        elements.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)

    @property
    def node_count(self):
        return self.nodes.shape[0]

    @property
    def element_count(self):
        return self.elements.shape[0]

    @property
    def nodes_dim(self):
        """Node coordinates restricted to the active dimension."""
        return self.nodes[:, : self.dimension]

    def element_coords(self):
        """Per-element node coordinates, (ne, 3|4, dimension)."""
        return self.nodes_dim[self.elements]

    def with_nodes(self, coords):
        """Same topology with replaced coordinates (2D input gets z=0)."""
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape[1] == 2:
            full = np.zeros((coords.shape[0], 3))
            full[:, :2] = coords
            coords = full
        return replace(self, nodes=coords)

    def with_region(self, tag: RegionTag):
        regions = dict(self.regions)
        regions[tag.name] = tag
        return replace(self, regions=regions)

    def region_nodes(self, name):
        """Node indices of a region, resolving facet sets to their nodes."""
        tag = self.regions[name]
        if tag.kind == "nodes":
            return tag.members
        fn = facet_node_ids(self, tag.members)
        return np.unique(fn.reshape(-1))


def signed_element_measures(mesh: Mesh) -> np.ndarray:
    """Signed per-element volume (tet) or area*thickness (tri)."""
    coords = mesh.element_coords()
    if mesh.dimension == 2:
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        return area * mesh.thickness
    e = coords[:, 1:] - coords[:, :1]
    return np.linalg.det(e) / 6.0


def element_qualities(mesh: Mesh) -> np.ndarray:
    """Radius-ratio quality in (0, 1], 1 for the regular simplex."""
    coords = mesh.element_coords()
    if mesh.dimension == 2:
        a = np.linalg.norm(coords[:, 1] - coords[:, 2], axis=1)
        b = np.linalg.norm(coords[:, 2] - coords[:, 0], axis=1)
        c = np.linalg.norm(coords[:, 0] - coords[:, 1], axis=1)
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        s = 0.5 * (a + b + c)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = 8.0 * area**2 / (s * a * b * c)
        return np.where(area > 0, q, 0.0)
    e = coords[:, 1:] - coords[:, :1]  # (ne, 3, 3)
    vol = np.linalg.det(e) / 6.0
    # face areas (opposite each node)
    areas = np.empty((mesh.element_count, 4))
    for f, (i, j, k) in enumerate(TET_FACES):
        v1 = coords[:, j] - coords[:, i]
        v2 = coords[:, k] - coords[:, i]
        areas[:, f] = 0.5 * np.linalg.norm(np.cross(v1, v2), axis=1)
    surf = areas.sum(axis=1)
    # circumcenter from 2 (X_i - X_0) . c = |X_i|^2 - |X_0|^2
    rhs = np.einsum("eij,eij->ei", coords[:, 1:], coords[:, 1:]) - np.einsum(
        "ej,ej->e", coords[:, 0], coords[:, 0]
    )[:, None]
    bad = np.abs(vol) <= 0
    safe_e = np.where(bad[:, None, None], np.eye(3), 2.0 * e)
    center = np.linalg.solve(safe_e, rhs[:, :, None])[:, :, 0]
    R = np.linalg.norm(center - coords[:, 0], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 3.0 * vol / surf
        q = 3.0 * r / R
    return np.where((vol > 0) & (R > 0), q, 0.0)


def min_edge_length(mesh: Mesh) -> float:
    coords = mesh.element_coords()
    k = coords.shape[1]
    best = np.inf
    for i in range(k):
        for j in range(i + 1, k):
            d = np.linalg.norm(coords[:, i] - coords[:, j], axis=1)
            best = min(best, float(d.min()))
    return best


def _facet_index(mesh: Mesh):
    """All (element, local facet) with sorted node keys.

    Returns (keys (nf, k) sorted node ids, elem ids, local ids).
    """
    elems = mesh.elements
    local = TRI_EDGES if mesh.dimension == 2 else TET_FACES
    keys, eid, lid = [], [], []
    for f, idx in enumerate(local):
        keys.append(np.sort(elems[:, idx], axis=1))
        eid.append(np.arange(mesh.element_count))
        lid.append(np.full(mesh.element_count, f))
    return np.vstack(keys), np.concatenate(eid), np.concatenate(lid)


def boundary_facets(mesh: Mesh, *, strict: bool = True):
    """Boundary (element, local facet) pairs, sorted by (element, local).

    A boundary facet is incident to exactly one element. With strict=True
    a facet shared by more than two elements raises; otherwise offenders
    are returned separately for reporting.
    """
    keys, eid, lid = _facet_index(mesh)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    over = counts[inverse] > 2
    nonmanifold = np.stack([eid[over], lid[over]], axis=1)
    if strict and len(nonmanifold):
        e, f = nonmanifold[0]
        raise MeshValidationError(
            f"non-manifold facet: local facet {f} of element {e} is shared by more "
            "than two elements"
        )
    on_boundary = counts[inverse] == 1
    pairs = np.stack([eid[on_boundary], lid[on_boundary]], axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    if strict:
        return pairs
    return pairs, nonmanifold


def extract_boundary(mesh: Mesh) -> np.ndarray:
    """Oriented boundary facets as (element, local facet) pairs.

    Orientation is implicit: resolving a pair through TET_FACES/TRI_EDGES
    yields outward-oriented node lists for positively oriented elements.
    """
    return boundary_facets(mesh, strict=True)


def facet_node_ids(mesh: Mesh, pairs: np.ndarray) -> np.ndarray:
    """Node indices of facets, outward-oriented. pairs (m, 2) -> (m, k)."""
    local = TRI_EDGES if mesh.dimension == 2 else TET_FACES
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.empty((len(pairs), len(local[0])), dtype=np.int64)
    for f, idx in enumerate(local):
        sel = pairs[:, 1] == f
        out[sel] = mesh.elements[pairs[sel, 0]][:, idx]
    return out


def facet_area_vectors(mesh: Mesh, pairs: np.ndarray, coords=None) -> np.ndarray:
    """Outward area vectors per facet (|v| = area; 2D: edge length*thickness).

    coords may override mesh node coordinates (any dtype, shape (nn, dim));
    this path is reused by the complex-step load sensitivities.
    """
    fn = facet_node_ids(mesh, pairs)
    if coords is None:
        coords = mesh.nodes_dim
    p = coords[fn]
    if mesh.dimension == 2:
        d = p[:, 1] - p[:, 0]
        return np.stack([d[:, 1], -d[:, 0]], axis=1) * mesh.thickness
    return 0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def validate(mesh: Mesh) -> MeshReport:
    """Check every structural invariant; violations are reported, not raised."""
    messages = []
    nn = mesh.node_count
    bad_idx = (mesh.elements < 0) | (mesh.elements >= nn)
    for e in np.nonzero(bad_idx.any(axis=1))[0][:20]:
        j = mesh.elements[e][bad_idx[e]][0]
        messages.append(f"element {e}: node index {j} out of range [0, {nn})")
    measures = None
    if not bad_idx.any():
        measures = signed_element_measures(mesh)
        for e in np.nonzero(measures <= 0)[0][:20]:
            kind = "area" if mesh.dimension == 2 else "volume"
            messages.append(f"element {e}: inverted (non-positive signed {kind})")
        from scipy.spatial import cKDTree

        pairs = cKDTree(mesh.nodes).query_pairs(DUPLICATE_NODE_TOL, output_type="ndarray")
        for i, j in pairs[:20]:
            messages.append(f"nodes {min(i, j)} and {max(i, j)} are duplicates")
        used = np.zeros(nn, dtype=bool)
        used[mesh.elements.reshape(-1)] = True
        for i in np.nonzero(~used)[0][:20]:
            messages.append(f"node {i}: orphan (not referenced by any element)")
        bpairs, nonmanifold = boundary_facets(mesh, strict=False)
        for e, f in nonmanifold[:5]:
            messages.append(
                f"non-manifold facet: local facet {f} of element {e} shared by >2 elements"
            )
        bset = set(map(tuple, bpairs.tolist()))
        for name, tag in mesh.regions.items():
            if tag.kind == "nodes":
                bad = tag.members[(tag.members < 0) | (tag.members >= nn)]
                if len(bad):
                    messages.append(f"region {name!r}: node index {bad[0]} out of range")
            else:
                for e, f in tag.members.tolist():
                    if e < 0 or e >= mesh.element_count:
                        messages.append(f"region {name!r}: element index {e} out of range")
                    elif (e, f) not in bset:
                        messages.append(
                            f"region {name!r}: facet ({e}, {f}) is not a boundary facet"
                        )
    is_valid = not messages
    if measures is not None and (measures > 0).all():
        vol = float(measures.sum())
        q = element_qualities(mesh)
        worst = int(np.argmin(q))
        bpairs, _ = boundary_facets(mesh, strict=False)
        sa = float(np.linalg.norm(
            facet_area_vectors(mesh, bpairs).astype(float), axis=1
        ).sum())
        return MeshReport(vol, sa, float(q[worst]), worst, is_valid, messages)
    return MeshReport(0.0, 0.0, 0.0, -1, is_valid, messages)


def measure(mesh: Mesh) -> MeshReport:
    """Volume, surface area, and worst element quality of a valid mesh."""
    measures = signed_element_measures(mesh)
    bad = np.nonzero(measures <= 0)[0]
    if len(bad):
        raise MeshValidationError(f"element {bad[0]}: non-positive signed measure")
    q = element_qualities(mesh)
    worst = int(np.argmin(q))
    bpairs = boundary_facets(mesh, strict=True)
    sa = float(np.linalg.norm(facet_area_vectors(mesh, bpairs), axis=1).sum())
    return MeshReport(float(measures.sum()), sa, float(q[worst]), worst, True, [])


_TOP_KEYS = {"dimension", "thickness", "nodes", "elements", "regions"}


def loads_mesh(data: bytes | str) -> Mesh:
    """Parse a native-format JSON document into a validated Mesh."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"malformed mesh document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MeshFormatError("mesh document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise MeshFormatError(f"unknown mesh document keys: {sorted(unknown)}")
    for key in ("dimension", "nodes", "elements"):
        if key not in doc:
            raise MeshFormatError(f"mesh document missing key {key!r}")
    dim = doc["dimension"]
    if dim not in (2, 3):
        raise MeshFormatError(f"dimension must be 2 or 3, got {dim!r}")
    if dim == 2 and "thickness" not in doc:
        raise MeshFormatError("2D mesh document requires 'thickness'")
    if dim == 3 and "thickness" in doc:
        raise MeshFormatError("'thickness' is only valid for 2D meshes")
    try:
        nodes = np.asarray(doc["nodes"], dtype=np.float64).reshape(-1, 3)
        elements = np.asarray(doc["elements"], dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError(f"bad nodes/elements arrays: {exc}") from exc
    if elements.ndim != 2 or elements.shape[1] not in (3, 4):
        raise MeshFormatError("elements must be uniformly length 3 or 4")

    regions = {}
    raw_regions = doc.get("regions", {})
    if not isinstance(raw_regions, dict):
        raise MeshFormatError("'regions' must be an object")
    for name, spec in raw_regions.items():
        if set(spec) - {"kind", "members"}:
            raise MeshFormatError(f"region {name!r}: unknown keys")
        kind = spec.get("kind")
        if kind not in ("nodes", "facets"):
            raise MeshFormatError(f"region {name!r}: kind must be 'nodes' or 'facets'")
        regions[name] = RegionTag(name, kind, np.asarray(spec.get("members", []),
                                                         dtype=np.int64))

    bad = (elements < 0) | (elements >= len(nodes))
    if bad.any():
        e, j = np.argwhere(bad)[0]
        raise MeshValidationError(
            f"element {e}: node index {elements[e, j]} out of range")

    # repair inverted elements by swapping the last two nodes; local facets
    # named by region tags must be remapped for repaired elements.
    mesh = Mesh(dim, nodes, elements, doc.get("thickness"), regions)
    measures = signed_element_measures(mesh)
    flipped = np.nonzero(measures < 0)[0]
    if len(flipped):
        warnings.warn(
            f"repaired orientation of {len(flipped)} inverted element(s): "
            f"{flipped[:10].tolist()}",
            stacklevel=2,
        )
        elements = elements.copy()
        k = elements.shape[1]
        elements[flipped, k - 2], elements[flipped, k - 1] = (
            elements[flipped, k - 1].copy(),
            elements[flipped, k - 2].copy(),
        )
        flipset = set(flipped.tolist())
        fixed_regions = {}
        for name, tag in regions.items():
            if tag.kind == "facets":
                members = tag.members.copy()
                for row in members:
                    if int(row[0]) in flipset:
                        if row[1] == k - 2:
                            row[1] = k - 1
                        elif row[1] == k - 1:
                            row[1] = k - 2
                fixed_regions[name] = RegionTag(name, "facets", members)
            else:
                fixed_regions[name] = tag
        mesh = Mesh(dim, nodes, elements, doc.get("thickness"), fixed_regions)

    report = validate(mesh)
    if not report.is_valid:
        raise MeshValidationError("; ".join(report.messages))
    return mesh


def load_mesh(source) -> Mesh:
    """Load a mesh from a byte stream, path, or raw bytes/str."""
    if hasattr(source, "read"):
        return loads_mesh(source.read())
    if isinstance(source, (bytes, str)) and not (
        isinstance(source, str) and source.lstrip().startswith("{")
    ):
        with open(source, "rb") as fh:
            return loads_mesh(fh.read())
    return loads_mesh(source)


def dumps_mesh(mesh: Mesh) -> bytes:
    """Serialize to the native JSON format (round-trips bit-exactly)."""
    doc = {
        "dimension": mesh.dimension,
        "nodes": mesh.nodes.tolist(),
        "elements": mesh.elements.tolist(),
        "regions": {
            name: {"kind": tag.kind, "members": tag.members.tolist()}
            for name, tag in sorted(mesh.regions.items())
        },
    }
    if mesh.dimension == 2:
        doc["thickness"] = mesh.thickness
    return json.dumps(doc, sort_keys=True).encode()


def save_mesh(mesh: Mesh, target) -> None:
    data = dumps_mesh(mesh)
    if hasattr(target, "write"):
        target.write(data)
    else:
        with open(target, "wb") as fh:
            fh.write(data)
