# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled element kernels: tri3/tet4 stiffness batches and stress recovery.

Mirrors the contracts of tracshape._kernels._numpy for float64 inputs.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def tri_stiffness(double[:, :, ::1] coords, double[:, ::1] D, double thickness):
    cdef Py_ssize_t ne = coords.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Ke_arr = np.zeros((ne, 6, 6))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] area_arr = np.zeros(ne)
    cdef double[:, :, ::1] Ke = Ke_arr
    cdef double[::1] area = area_arr
    cdef double B[3][6]
    cdef double DB[3][6]
    cdef double det, A, w
    cdef double dN[3][2]
    cdef Py_ssize_t e, i, j, k, l
    for e in range(ne):
        det = ((coords[e, 1, 0] - coords[e, 0, 0]) * (coords[e, 2, 1] - coords[e, 0, 1])
               - (coords[e, 1, 1] - coords[e, 0, 1]) * (coords[e, 2, 0] - coords[e, 0, 0]))
        A = 0.5 * det
        area[e] = A
        dN[0][0] = (coords[e, 1, 1] - coords[e, 2, 1]) / det
        dN[0][1] = (coords[e, 2, 0] - coords[e, 1, 0]) / det
        dN[1][0] = (coords[e, 2, 1] - coords[e, 0, 1]) / det
        dN[1][1] = (coords[e, 0, 0] - coords[e, 2, 0]) / det
        dN[2][0] = (coords[e, 0, 1] - coords[e, 1, 1]) / det
        dN[2][1] = (coords[e, 1, 0] - coords[e, 0, 0]) / det
        for k in range(3):
            for j in range(6):
                B[k][j] = 0.0
        for i in range(3):
            B[0][2 * i] = dN[i][0]
            B[1][2 * i + 1] = dN[i][1]
            B[2][2 * i] = dN[i][1]
            B[2][2 * i + 1] = dN[i][0]
        for k in range(3):
            for j in range(6):
                DB[k][j] = 0.0
                for l in range(3):
                    DB[k][j] += D[k, l] * B[l][j]
        w = A * thickness
        for i in range(6):
            for j in range(6):
                for k in range(3):
                    Ke[e, i, j] += w * B[k][i] * DB[k][j]
    return Ke_arr, area_arr


def tet_stiffness(double[:, :, ::1] coords, double[:, ::1] D):
    cdef Py_ssize_t ne = coords.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Ke_arr = np.zeros((ne, 12, 12))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vol_arr = np.zeros(ne)
    cdef double[:, :, ::1] Ke = Ke_arr
    cdef double[::1] vol = vol_arr
    cdef double E[3][3]
    cdef double inv[3][3]
    cdef double dN[4][3]
    cdef double B[6][12]
    cdef double DB[6][12]
    cdef double det, V
    cdef Py_ssize_t e, i, j, k, l, x, y, z
    for e in range(ne):
        for i in range(3):
            for j in range(3):
                E[i][j] = coords[e, i + 1, j] - coords[e, 0, j]
        det = (E[0][0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1])
               - E[0][1] * (E[1][0] * E[2][2] - E[1][2] * E[2][0])
               + E[0][2] * (E[1][0] * E[2][1] - E[1][1] * E[2][0]))
        V = det / 6.0
        vol[e] = V
        inv[0][0] = (E[1][1] * E[2][2] - E[1][2] * E[2][1]) / det
        inv[0][1] = (E[0][2] * E[2][1] - E[0][1] * E[2][2]) / det
        inv[0][2] = (E[0][1] * E[1][2] - E[0][2] * E[1][1]) / det
        inv[1][0] = (E[1][2] * E[2][0] - E[1][0] * E[2][2]) / det
        inv[1][1] = (E[0][0] * E[2][2] - E[0][2] * E[2][0]) / det
        inv[1][2] = (E[0][2] * E[1][0] - E[0][0] * E[1][2]) / det
        inv[2][0] = (E[1][0] * E[2][1] - E[1][1] * E[2][0]) / det
        inv[2][1] = (E[0][1] * E[2][0] - E[0][0] * E[2][1]) / det
        inv[2][2] = (E[0][0] * E[1][1] - E[0][1] * E[1][0]) / det
        # grad N_i (i=1..3) is column i-1 of inv(E); N_0 = 1 - sum.
        for i in range(3):
            for j in range(3):
                dN[i + 1][j] = inv[j][i]
        for j in range(3):
            dN[0][j] = -dN[1][j] - dN[2][j] - dN[3][j]
        for k in range(6):
            for j in range(12):
                B[k][j] = 0.0
        for i in range(4):
            x = 3 * i
            y = 3 * i + 1
            z = 3 * i + 2
            B[0][x] = dN[i][0]
            B[1][y] = dN[i][1]
            B[2][z] = dN[i][2]
            B[3][x] = dN[i][1]
            B[3][y] = dN[i][0]
            B[4][y] = dN[i][2]
            B[4][z] = dN[i][1]
            B[5][x] = dN[i][2]
            B[5][z] = dN[i][0]
        for k in range(6):
            for j in range(12):
                DB[k][j] = 0.0
                for l in range(6):
                    DB[k][j] += D[k, l] * B[l][j]
        for i in range(12):
            for j in range(12):
                for k in range(6):
                    Ke[e, i, j] += V * B[k][i] * DB[k][j]
    return Ke_arr, vol_arr


def tri_stress(double[:, :, ::1] coords, double[:, ::1] D, double[:, ::1] ue):
    cdef Py_ssize_t ne = coords.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sig_arr = np.zeros((ne, 3))
    cdef double[:, ::1] sig = sig_arr
    cdef double dN[3][2]
    cdef double eps[3]
    cdef double det
    cdef Py_ssize_t e, i, k, l
    for e in range(ne):
        det = ((coords[e, 1, 0] - coords[e, 0, 0]) * (coords[e, 2, 1] - coords[e, 0, 1])
               - (coords[e, 1, 1] - coords[e, 0, 1]) * (coords[e, 2, 0] - coords[e, 0, 0]))
        dN[0][0] = (coords[e, 1, 1] - coords[e, 2, 1]) / det
        dN[0][1] = (coords[e, 2, 0] - coords[e, 1, 0]) / det
        dN[1][0] = (coords[e, 2, 1] - coords[e, 0, 1]) / det
        dN[1][1] = (coords[e, 0, 0] - coords[e, 2, 0]) / det
        dN[2][0] = (coords[e, 0, 1] - coords[e, 1, 1]) / det
        dN[2][1] = (coords[e, 1, 0] - coords[e, 0, 0]) / det
        eps[0] = 0.0
        eps[1] = 0.0
        eps[2] = 0.0
        for i in range(3):
            eps[0] += dN[i][0] * ue[e, 2 * i]
            eps[1] += dN[i][1] * ue[e, 2 * i + 1]
            eps[2] += dN[i][1] * ue[e, 2 * i] + dN[i][0] * ue[e, 2 * i + 1]
        for k in range(3):
            for l in range(3):
                sig[e, k] += D[k, l] * eps[l]
    return sig_arr


def tet_stress(double[:, :, ::1] coords, double[:, ::1] D, double[:, ::1] ue):
    cdef Py_ssize_t ne = coords.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sig_arr = np.zeros((ne, 6))
    cdef double[:, ::1] sig = sig_arr
    cdef double E[3][3]
    cdef double inv[3][3]
    cdef double dN[4][3]
    cdef double eps[6]
    cdef double det
    cdef Py_ssize_t e, i, j, k, l
    for e in range(ne):
        for i in range(3):
            for j in range(3):
                E[i][j] = coords[e, i + 1, j] - coords[e, 0, j]
        det = (E[0][0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1])
               - E[0][1] * (E[1][0] * E[2][2] - E[1][2] * E[2][0])
               + E[0][2] * (E[1][0] * E[2][1] - E[1][1] * E[2][0]))
        inv[0][0] = (E[1][1] * E[2][2] - E[1][2] * E[2][1]) / det
        inv[0][1] = (E[0][2] * E[2][1] - E[0][1] * E[2][2]) / det
        inv[0][2] = (E[0][1] * E[1][2] - E[0][2] * E[1][1]) / det
        inv[1][0] = (E[1][2] * E[2][0] - E[1][0] * E[2][2]) / det
        inv[1][1] = (E[0][0] * E[2][2] - E[0][2] * E[2][0]) / det
        inv[1][2] = (E[0][2] * E[1][0] - E[0][0] * E[1][2]) / det
        inv[2][0] = (E[1][0] * E[2][1] - E[1][1] * E[2][0]) / det
        inv[2][1] = (E[0][1] * E[2][0] - E[0][0] * E[2][1]) / det
        inv[2][2] = (E[0][0] * E[1][1] - E[0][1] * E[1][0]) / det
        for i in range(3):
            for j in range(3):
                dN[i + 1][j] = inv[j][i]
        for j in range(3):
            dN[0][j] = -dN[1][j] - dN[2][j] - dN[3][j]
        for k in range(6):
            eps[k] = 0.0
        for i in range(4):
            eps[0] += dN[i][0] * ue[e, 3 * i]
            eps[1] += dN[i][1] * ue[e, 3 * i + 1]
            eps[2] += dN[i][2] * ue[e, 3 * i + 2]
            eps[3] += dN[i][1] * ue[e, 3 * i] + dN[i][0] * ue[e, 3 * i + 1]
            eps[4] += dN[i][2] * ue[e, 3 * i + 1] + dN[i][1] * ue[e, 3 * i + 2]
            eps[5] += dN[i][2] * ue[e, 3 * i] + dN[i][0] * ue[e, 3 * i + 2]
        for k in range(6):
            for l in range(6):
                sig[e, k] += D[k, l] * eps[l]
    return sig_arr
