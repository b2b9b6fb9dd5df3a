# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython statevector kernels.

Same contract as _sv_py: flat complex128 arrays of length 2**n, wire 0 is
the most significant bit. These are the hot loops of branch-enumerated
simulation; everything else stays in Python.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def apply_1q(cnp.ndarray[cnp.complex128_t, ndim=1] state, int n, int wire,
             cnp.ndarray[cnp.complex128_t, ndim=2] u):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t stride = 1 << (n - 1 - wire)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(dim, dtype=np.complex128)
    cdef double complex u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    cdef double complex a, b
    cdef Py_ssize_t base, i, i0, i1
    cdef Py_ssize_t block = stride << 1
    for base in range(0, dim, block):
        for i in range(stride):
            i0 = base + i
            i1 = i0 + stride
            a = state[i0]
            b = state[i1]
            out[i0] = u00 * a + u01 * b
            out[i1] = u10 * a + u11 * b
    return out


def apply_2q(cnp.ndarray[cnp.complex128_t, ndim=1] state, int n, int w1, int w2,
             cnp.ndarray[cnp.complex128_t, ndim=2] u):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t s1 = 1 << (n - 1 - w1)
    cdef Py_ssize_t s2 = 1 << (n - 1 - w2)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(dim, dtype=np.complex128)
    cdef double complex amp0, amp1, amp2, amp3
    cdef Py_ssize_t i, i00, i01, i10, i11
    cdef Py_ssize_t mask1 = s1, mask2 = s2
    cdef double complex[:, :] um = u
    for i in range(dim):
        if (i & mask1) or (i & mask2):
            continue
        i00 = i
        i01 = i | s2
        i10 = i | s1
        i11 = i | s1 | s2
        amp0 = state[i00]
        amp1 = state[i01]
        amp2 = state[i10]
        amp3 = state[i11]
        out[i00] = um[0, 0] * amp0 + um[0, 1] * amp1 + um[0, 2] * amp2 + um[0, 3] * amp3
        out[i01] = um[1, 0] * amp0 + um[1, 1] * amp1 + um[1, 2] * amp2 + um[1, 3] * amp3
        out[i10] = um[2, 0] * amp0 + um[2, 1] * amp1 + um[2, 2] * amp2 + um[2, 3] * amp3
        out[i11] = um[3, 0] * amp0 + um[3, 1] * amp1 + um[3, 2] * amp2 + um[3, 3] * amp3
    return out


def apply_diag(cnp.ndarray[cnp.complex128_t, ndim=1] state, int n, wires,
               cnp.ndarray[cnp.complex128_t, ndim=1] diag):
    cdef Py_ssize_t dim = state.shape[0]
    cdef int k = len(wires)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(dim, dtype=np.complex128)
    cdef Py_ssize_t[8] strides
    cdef int j
    for j in range(k):
        strides[j] = 1 << (n - 1 - <int> wires[j])
    cdef Py_ssize_t i, idx
    for i in range(dim):
        idx = 0
        for j in range(k):
            idx = (idx << 1) | (1 if (i & strides[j]) else 0)
        out[i] = state[i] * diag[idx]
    return out


def branch_probabilities(cnp.ndarray[cnp.complex128_t, ndim=1] state, int n, int wire):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t stride = 1 << (n - 1 - wire)
    cdef double p0 = 0.0, p1 = 0.0
    cdef double complex a
    cdef Py_ssize_t i
    for i in range(dim):
        a = state[i]
        if i & stride:
            p1 += a.real * a.real + a.imag * a.imag
        else:
            p0 += a.real * a.real + a.imag * a.imag
    return p0, p1


def project_and_remove(cnp.ndarray[cnp.complex128_t, ndim=1] state, int n, int wire,
                       int outcome, double norm):
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t stride = 1 << (n - 1 - wire)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(dim // 2, dtype=np.complex128)
    cdef Py_ssize_t base, i, j = 0
    cdef Py_ssize_t block = stride << 1
    cdef Py_ssize_t off = stride if outcome else 0
    for base in range(0, dim, block):
        for i in range(stride):
            out[j] = state[base + off + i] / norm
            j += 1
    return out
