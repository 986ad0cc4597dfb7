"""VTK legacy ASCII export of displacement and von Mises fields."""

from __future__ import annotations

import numpy as np

from tracshape.errors import ExportError
from tracshape.fem import Solution
from tracshape.mesh import Mesh

VTK_TET = 10
VTK_TRI = 5


def write_fields(mesh: Mesh, solution: Solution) -> bytes:
    """DATASET UNSTRUCTURED_GRID with point displacement vectors and a
    cell von Mises scalar."""
    if solution.displacement.shape[0] != mesh.node_count:
        raise ExportError("solution does not match mesh")
    if solution.von_mises.shape[0] != mesh.element_count:
        raise ExportError("solution does not match mesh")
    out = [
        "# vtk DataFile Version 3.0",
        "tracshape fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.node_count} double",
    ]
    for x, y, z in mesh.nodes:
        out.append(f"{x:.17g} {y:.17g} {z:.17g}")
    k = mesh.elements.shape[1]
    out.append(f"CELLS {mesh.element_count} {mesh.element_count * (k + 1)}")
    for el in mesh.elements:
        out.append(f"{k} " + " ".join(str(int(i)) for i in el))
    out.append(f"CELL_TYPES {mesh.element_count}")
    ctype = VTK_TET if mesh.dimension == 3 else VTK_TRI
    out.extend([str(ctype)] * mesh.element_count)
    out.append(f"POINT_DATA {mesh.node_count}")
    out.append("VECTORS displacement double")
    disp = np.zeros((mesh.node_count, 3))
    disp[:, : mesh.dimension] = solution.displacement
    for x, y, z in disp:
        out.append(f"{x:.17g} {y:.17g} {z:.17g}")
    out.append(f"CELL_DATA {mesh.element_count}")
    out.append("SCALARS von_mises double 1")
    out.append("LOOKUP_TABLE default")
    for v in solution.von_mises:
        out.append(f"{v:.17g}")
    return ("\n".join(out) + "\n").encode()
