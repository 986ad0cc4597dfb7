"""Kernel backend selection.

The compiled Cython extension is preferred when it imports; otherwise the
pure-numpy implementation is used. Set TRACSHAPE_BACKEND=numpy (or =cython)
to force a backend, e.g. for the benchmark or for debugging.
"""

import os

import numpy as np

from tracshape._kernels import _numpy

_forced = os.environ.get("TRACSHAPE_BACKEND", "").lower()

if _forced == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from tracshape._kernels import _fast as _impl

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _numpy
        BACKEND = "numpy"


def _c(a):
    out = np.ascontiguousarray(a, dtype=np.float64)
    if not out.flags.writeable:
        # typed memoryviews in the compiled kernels require writable buffers
        out = out.copy()
    return out


def tri_stiffness(coords, D, thickness):
    return _impl.tri_stiffness(_c(coords), _c(D), float(thickness))


def tet_stiffness(coords, D):
    return _impl.tet_stiffness(_c(coords), _c(D))


def tri_stress(coords, D, ue):
    return _impl.tri_stress(_c(coords), _c(D), _c(ue))


def tet_stress(coords, D, ue):
    return _impl.tet_stress(_c(coords), _c(D), _c(ue))


# dtype-generic routines (complex-step capable) always come from the
# numpy implementation.
tri_bmatrix = _numpy.tri_bmatrix
tet_bmatrix = _numpy.tet_bmatrix
tri_shape_gradients = _numpy.tri_shape_gradients
tet_shape_gradients = _numpy.tet_shape_gradients
element_virtual_work = _numpy.element_virtual_work
