"""Rapid-prototyping output: surface extraction, STL writing, manifold
checks, and casting draft-angle analysis.

STL files are unitless; coordinates are multiplied by an explicit export
scale (default 1000, meters to millimeters, the FDM toolchain convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tracshape.errors import ExportError
from tracshape.mesh import Mesh, extract_boundary, facet_node_ids

STL_HEADER_TAG = b"tracshape"
WELD_TOL = 1e-9


@dataclass(frozen=True)
class SurfaceModel:
    """Triangle soup with outward unit normals. Coordinates in meters."""

    vertices: np.ndarray  # (nt, 3, 3)
    normals: np.ndarray  # (nt, 3), unit
    scale: float = 1000.0  # export multiplier (m -> mm by default)

    @property
    def triangle_count(self):
        return self.vertices.shape[0]


@dataclass(frozen=True)
class ManifoldReport:
    watertight: bool
    edge_defects: list  # [(vertex id a, vertex id b, incidence), ...]
    winding_consistent: bool
    self_intersection_checked: bool = False


@dataclass(frozen=True)
class DraftReport:
    pull_direction: np.ndarray
    min_angle: float  # degrees
    violations: list  # [(triangle index, draft angle degrees), ...]


def surface_mesh(mesh: Mesh, scale: float = 1000.0) -> SurfaceModel:
    """Boundary surface of a 3D mesh with outward unit normals."""
    if mesh.dimension != 3:
        raise ExportError("STL export requires a 3D mesh")
    pairs = extract_boundary(mesh)
    fn = facet_node_ids(mesh, pairs)
    verts = mesh.nodes[fn]
    n = np.cross(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0])
    norms = np.linalg.norm(n, axis=1)
    if (norms <= 0).any():
        raise ExportError("degenerate boundary triangle")
    return SurfaceModel(verts, n / norms[:, None], scale)


def surface_volume(surface: SurfaceModel) -> float:
    """Signed enclosed volume via the divergence theorem (source units)."""
    v = surface.vertices
    return float(np.einsum("ij,ij->", v[:, 0], np.cross(v[:, 1], v[:, 2])) / 6.0)


_BINARY_DTYPE = np.dtype(
    [("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
)


def write_stl(surface: SurfaceModel, format: str = "binary",
              name: str = "tracshape") -> bytes:
    """Serialize a surface to STL bytes, binary (bit-exact layout) or ascii."""
    nt = surface.triangle_count
    verts = surface.vertices * surface.scale
    if format == "binary":
        if nt > 0xFFFFFFFF:
            raise ExportError("too many triangles for binary STL")
        header = STL_HEADER_TAG.ljust(80, b"\x20")[:80]
        records = np.zeros(nt, dtype=_BINARY_DTYPE)
        records["normal"] = surface.normals.astype("<f4")
        records["verts"] = verts.astype("<f4")
        return header + np.uint32(nt).tobytes() + records.tobytes()
    if format == "ascii":
        out = [f"solid {name}"]
        for i in range(nt):
            nx, ny, nz = surface.normals[i]
            out.append(f"  facet normal {nx:.9g} {ny:.9g} {nz:.9g}")
            out.append("    outer loop")
            for v in verts[i]:
                out.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
            out.append("    endloop")
            out.append("  endfacet")
        out.append(f"endsolid {name}")
        return ("\n".join(out) + "\n").encode()
    raise ExportError(f"unknown STL format {format!r}")


def _weld(vertices):
    """Quantized vertex welding; returns per-corner vertex ids (nt, 3)."""
    flat = vertices.reshape(-1, 3)
    keys = np.round(flat / WELD_TOL).astype(np.int64)
    _, ids = np.unique(keys, axis=0, return_inverse=True)
    return ids.reshape(-1, 3)


def check_manifold(surface: SurfaceModel) -> ManifoldReport:
    """Edge-incidence watertightness and winding consistency on welded
    vertices."""
    tri = _weld(surface.vertices)
    directed = {}
    undirected = {}
    for t in tri:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            a, b = int(a), int(b)
            directed[(a, b)] = directed.get((a, b), 0) + 1
            key = (min(a, b), max(a, b))
            undirected[key] = undirected.get(key, 0) + 1
    defects = sorted(
        (a, b, count) for (a, b), count in undirected.items() if count != 2
    )
    watertight = not defects
    winding = True
    for (a, b), count in undirected.items():
        if count == 2 and directed.get((a, b), 0) != 1:
            winding = False
            break
    return ManifoldReport(watertight, defects, winding)


def draft_check(surface: SurfaceModel, pull, min_angle: float) -> DraftReport:
    """Flag faces whose draft angle (vs. the pull direction) is below
    min_angle degrees. Near-vertical walls violate; faces perpendicular to
    pull always pass. Strict inequality: min_angle = 0 flags nothing."""
    pull = np.asarray(pull, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(pull) - 1.0) > 1e-9:
        raise ExportError("pull direction must be a unit vector")
    if not 0.0 <= min_angle < 90.0:
        raise ExportError("min_angle must be in [0, 90) degrees")
    dots = np.abs(surface.normals @ pull)
    angles = np.degrees(np.arcsin(np.clip(dots, 0.0, 1.0)))
    threshold = math.sin(math.radians(min_angle))
    bad = np.nonzero(dots < threshold)[0]
    violations = [(int(i), float(angles[i])) for i in bad]
    return DraftReport(pull, float(min_angle), violations)


def read_stl(data: bytes) -> SurfaceModel:
    """Parse STL bytes back into a SurfaceModel (scale 1, raw file units).

    Convenience for round-trip checks and CLI input; accepts both formats.
    """
    if data[:5] == b"solid" and b"facet" in data[:4096]:
        verts, normals = [], []
        cur = []
        normal = None
        for line in data.decode().splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "facet":
                normal = [float(x) for x in parts[2:5]]
            elif parts[0] == "vertex":
                cur.append([float(x) for x in parts[1:4]])
            elif parts[0] == "endfacet":
                verts.append(cur)
                normals.append(normal)
                cur = []
        return SurfaceModel(np.asarray(verts, dtype=np.float64),
                            np.asarray(normals, dtype=np.float64), 1.0)
    nt = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    records = np.frombuffer(data[84:84 + 50 * nt], dtype=_BINARY_DTYPE)
    return SurfaceModel(records["verts"].astype(np.float64),
                        records["normal"].astype(np.float64), 1.0)
