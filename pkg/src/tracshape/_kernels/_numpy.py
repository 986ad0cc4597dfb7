"""Pure-numpy element kernels.

These are the fallback implementations of the hot per-element loops
(stiffness batches and stress recovery). They are written dtype-generic
on purpose: the sensitivity engine re-evaluates them with complex
coordinates for complex-step differentiation, which the compiled backend
does not support.
"""

import numpy as np


def tri_shape_gradients(coords):
    """Shape-function gradients and signed areas for a batch of tri3.

    coords: (ne, 3, 2). Returns (dN (ne, 3, 2), area (ne,)).
    """
    a, b, c = coords[:, 0], coords[:, 1], coords[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    area = 0.5 * det
    dN = np.empty_like(coords)
    # grad N_i = perp(opposite edge) / (2A), perp(v) = (-v_y, v_x) picked
    # so the gradient points toward node i.
    dN[:, 0, 0] = b[:, 1] - c[:, 1]
    dN[:, 0, 1] = c[:, 0] - b[:, 0]
    dN[:, 1, 0] = c[:, 1] - a[:, 1]
    dN[:, 1, 1] = a[:, 0] - c[:, 0]
    dN[:, 2, 0] = a[:, 1] - b[:, 1]
    dN[:, 2, 1] = b[:, 0] - a[:, 0]
    # degenerate elements keep area = 0 for the caller's check instead of
    # dividing by zero here
    safe = np.where(det == 0, 1, det) if not np.iscomplexobj(det) else det
    dN /= safe[:, None, None]
    return dN, area


def tet_shape_gradients(coords):
    """Shape-function gradients and signed volumes for a batch of tet4.

    coords: (ne, 4, 3). Returns (dN (ne, 4, 3), vol (ne,)).
    """
    e = coords[:, 1:] - coords[:, :1]  # (ne, 3, 3), rows are edge vectors
    det = np.linalg.det(e)
    vol = det / 6.0
    if not np.iscomplexobj(e):
        flat = det == 0.0
        if flat.any():
            # keep vol = 0 so the caller rejects the element; substitute an
            # invertible Jacobian to avoid a LinAlgError mid-batch
            e = e.copy()
            e[flat] = np.eye(3)
    inv = np.linalg.inv(e)  # (ne, 3, 3)
    dN = np.empty_like(coords)
    # grad N_i (i=1..3) is column i-1 of inv(E); N_0 = 1 - sum.
    dN[:, 1:] = np.swapaxes(inv, 1, 2)
    dN[:, 0] = -dN[:, 1] - dN[:, 2] - dN[:, 3]
    return dN, vol


def tri_bmatrix(coords):
    """Strain-displacement matrices for tri3 (engineering shear).

    Returns (B (ne, 3, 6), area (ne,)). Voigt order (xx, yy, xy).
    """
    dN, area = tri_shape_gradients(coords)
    ne = coords.shape[0]
    B = np.zeros((ne, 3, 6), dtype=coords.dtype)
    for i in range(3):
        B[:, 0, 2 * i] = dN[:, i, 0]
        B[:, 1, 2 * i + 1] = dN[:, i, 1]
        B[:, 2, 2 * i] = dN[:, i, 1]
        B[:, 2, 2 * i + 1] = dN[:, i, 0]
    return B, area


def tet_bmatrix(coords):
    """Strain-displacement matrices for tet4 (engineering shear).

    Returns (B (ne, 6, 12), vol (ne,)). Voigt order (xx, yy, zz, xy, yz, zx).
    """
    dN, vol = tet_shape_gradients(coords)
    ne = coords.shape[0]
    B = np.zeros((ne, 6, 12), dtype=coords.dtype)
    for i in range(4):
        x, y, z = 3 * i, 3 * i + 1, 3 * i + 2
        B[:, 0, x] = dN[:, i, 0]
        B[:, 1, y] = dN[:, i, 1]
        B[:, 2, z] = dN[:, i, 2]
        B[:, 3, x] = dN[:, i, 1]
        B[:, 3, y] = dN[:, i, 0]
        B[:, 4, y] = dN[:, i, 2]
        B[:, 4, z] = dN[:, i, 1]
        B[:, 5, x] = dN[:, i, 2]
        B[:, 5, z] = dN[:, i, 0]
    return B, vol


def tri_stiffness(coords, D, thickness):
    """Element stiffness batch for tri3 plane stress.

    coords (ne,3,2), D (3,3) -> (Ke (ne,6,6), area (ne,)).
    """
    B, area = tri_bmatrix(coords)
    DB = np.einsum("kl,elj->ekj", D, B)
    Ke = np.einsum("eki,ekj->eij", B, DB) * (area * thickness)[:, None, None]
    return Ke, area


def tet_stiffness(coords, D):
    """Element stiffness batch for tet4. coords (ne,4,3), D (6,6)."""
    B, vol = tet_bmatrix(coords)
    DB = np.einsum("kl,elj->ekj", D, B)
    Ke = np.einsum("eki,ekj->eij", B, DB) * vol[:, None, None]
    return Ke, vol


def tri_stress(coords, D, ue):
    """Element stress batch for tri3. ue (ne,6) -> sigma (ne,3) Voigt."""
    B, _ = tri_bmatrix(coords)
    strain = np.einsum("ekj,ej->ek", B, ue)
    return strain @ D.T


def tet_stress(coords, D, ue):
    """Element stress batch for tet4. ue (ne,12) -> sigma (ne,6) Voigt."""
    B, _ = tet_bmatrix(coords)
    strain = np.einsum("ekj,ej->ek", B, ue)
    return strain @ D.T


def element_virtual_work(coords, D, ue, we, thickness=None):
    """Per-element scalar w_e^T K_e u_e, without forming K_e.

    Accepts complex coords; this is the workhorse of the complex-step
    sensitivity contractions.
    """
    if coords.shape[1] == 3:
        B, area = tri_bmatrix(coords)
        scale = area * thickness
    else:
        B, scale = tet_bmatrix(coords)
    eps_u = np.einsum("ekj,ej->ek", B, ue)
    eps_w = np.einsum("ekj,ej->ek", B, we)
    return scale * np.einsum("ek,kl,el->e", eps_w, D, eps_u)
