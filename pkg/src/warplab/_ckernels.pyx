# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled mesh kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"


cdef inline double _lam(const double[::1] r, Py_ssize_t a, Py_ssize_t b, double t) noexcept nogil:
    return (t - r[a]) / (r[b] - r[a])


cdef inline double _vol6(double* p, double* q, double* s, double* u) noexcept nogil:
    cdef double q0 = q[0] - p[0], q1 = q[1] - p[1], q2 = q[2] - p[2]
    cdef double s0 = s[0] - p[0], s1 = s[1] - p[1], s2 = s[2] - p[2]
    cdef double u0 = u[0] - p[0], u1 = u[1] - p[1], u2 = u[2] - p[2]
    return fabs(q0 * (s1 * u2 - s2 * u1) - q1 * (s0 * u2 - s2 * u0) + q2 * (s0 * u1 - s1 * u0))


cdef double _prism_fraction(double lac, double lad, double lbc, double lbd) noexcept nogil:
    cdef double A0[3]
    cdef double A1[3]
    cdef double A2[3]
    cdef double B0[3]
    cdef double B1[3]
    cdef double B2[3]
    A0[0] = 0.0; A0[1] = 0.0; A0[2] = 0.0
    A1[0] = 0.0; A1[1] = lac; A1[2] = 0.0
    A2[0] = 0.0; A2[1] = 0.0; A2[2] = lad
    B0[0] = 1.0; B0[1] = 0.0; B0[2] = 0.0
    B1[0] = 1.0 - lbc; B1[1] = lbc; B1[2] = 0.0
    B2[0] = 1.0 - lbd; B2[1] = 0.0; B2[2] = lbd
    return _vol6(A0, A1, A2, B0) + _vol6(A1, A2, B0, B1) + _vol6(A2, B0, B1, B2)


def clip_level(simplices, r, double t):
    cdef const cnp.int64_t[:, ::1] S = np.ascontiguousarray(simplices, dtype=np.int64)
    cdef const double[::1] R = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t ns = S.shape[0], k = S.shape[1], m = k - 1
    if k != 3 and k != 4:
        raise NotImplementedError("clipping is implemented for triangles and tetrahedra")
    cdef Py_ssize_t s, j, n_in, n_cut = 0, n_fac = 0
    # first pass: sizes
    with nogil:
        for s in range(ns):
            n_in = 0
            for j in range(k):
                if R[S[s, j]] < t:
                    n_in += 1
            if 0 < n_in < k:
                n_cut += 1
                n_fac += 2 if (k == 4 and n_in == 2) else 1
    cut_a = np.empty(n_cut, dtype=np.int64)
    frac_a = np.empty(n_cut, dtype=np.float64)
    fs_a = np.empty(n_fac, dtype=np.int64)
    fa_a = np.empty((n_fac, m), dtype=np.int64)
    fb_a = np.empty((n_fac, m), dtype=np.int64)
    fl_a = np.empty((n_fac, m), dtype=np.float64)
    cdef cnp.int64_t[::1] cut = cut_a
    cdef double[::1] frac = frac_a
    cdef cnp.int64_t[::1] fs = fs_a
    cdef cnp.int64_t[:, ::1] fa = fa_a
    cdef cnp.int64_t[:, ::1] fb = fb_a
    cdef double[:, ::1] fl = fl_a
    cdef cnp.int64_t ins[4]
    cdef cnp.int64_t outs[4]
    cdef Py_ssize_t n_out, ic = 0, jf = 0
    cdef cnp.int64_t v, a, b, c, d
    cdef double l0, l1, l2, l3
    with nogil:
        for s in range(ns):
            n_in = 0
            n_out = 0
            for j in range(k):
                v = S[s, j]
                if R[v] < t:
                    ins[n_in] = v
                    n_in += 1
                else:
                    outs[n_out] = v
                    n_out += 1
            if n_in == 0 or n_out == 0:
                continue
            cut[ic] = s
            if m == 2:
                if n_in == 1:
                    a = ins[0]
                    l0 = _lam(R, a, outs[0], t)
                    l1 = _lam(R, a, outs[1], t)
                    frac[ic] = l0 * l1
                    fs[jf] = s
                    fa[jf, 0] = a; fa[jf, 1] = a
                    fb[jf, 0] = outs[0]; fb[jf, 1] = outs[1]
                    fl[jf, 0] = l0; fl[jf, 1] = l1
                else:
                    c = outs[0]
                    l0 = _lam(R, ins[0], c, t)
                    l1 = _lam(R, ins[1], c, t)
                    frac[ic] = 1.0 - (1.0 - l0) * (1.0 - l1)
                    fs[jf] = s
                    fa[jf, 0] = ins[0]; fa[jf, 1] = ins[1]
                    fb[jf, 0] = c; fb[jf, 1] = c
                    fl[jf, 0] = l0; fl[jf, 1] = l1
                jf += 1
            else:
                if n_in == 1:
                    a = ins[0]
                    l0 = _lam(R, a, outs[0], t)
                    l1 = _lam(R, a, outs[1], t)
                    l2 = _lam(R, a, outs[2], t)
                    frac[ic] = l0 * l1 * l2
                    fs[jf] = s
                    for j in range(3):
                        fa[jf, j] = a
                        fb[jf, j] = outs[j]
                    fl[jf, 0] = l0; fl[jf, 1] = l1; fl[jf, 2] = l2
                    jf += 1
                elif n_in == 3:
                    d = outs[0]
                    l0 = _lam(R, ins[0], d, t)
                    l1 = _lam(R, ins[1], d, t)
                    l2 = _lam(R, ins[2], d, t)
                    frac[ic] = 1.0 - (1.0 - l0) * (1.0 - l1) * (1.0 - l2)
                    fs[jf] = s
                    for j in range(3):
                        fa[jf, j] = ins[j]
                        fb[jf, j] = d
                    fl[jf, 0] = l0; fl[jf, 1] = l1; fl[jf, 2] = l2
                    jf += 1
                else:
                    a = ins[0]; b = ins[1]; c = outs[0]; d = outs[1]
                    l0 = _lam(R, a, c, t)
                    l1 = _lam(R, a, d, t)
                    l2 = _lam(R, b, c, t)
                    l3 = _lam(R, b, d, t)
                    frac[ic] = _prism_fraction(l0, l1, l2, l3)
                    fs[jf] = s
                    fa[jf, 0] = a; fa[jf, 1] = a; fa[jf, 2] = b
                    fb[jf, 0] = c; fb[jf, 1] = d; fb[jf, 2] = d
                    fl[jf, 0] = l0; fl[jf, 1] = l1; fl[jf, 2] = l3
                    jf += 1
                    fs[jf] = s
                    fa[jf, 0] = a; fa[jf, 1] = b; fa[jf, 2] = b
                    fb[jf, 0] = c; fb[jf, 1] = d; fb[jf, 2] = c
                    fl[jf, 0] = l0; fl[jf, 1] = l3; fl[jf, 2] = l2
                    jf += 1
            ic += 1
    return cut_a, frac_a, fs_a, fa_a, fb_a, fl_a


cdef inline cnp.int64_t _find(cnp.int64_t[::1] parent, cnp.int64_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def complement_counts(simplices, r, radii):
    S_arr = np.asarray(simplices, dtype=np.int64)
    r_arr = np.asarray(r, dtype=np.float64)
    radii_arr = np.asarray(radii, dtype=np.float64)
    key_arr = r_arr[S_arr].min(axis=1) if len(S_arr) else np.empty(0)
    order = np.argsort(-key_arr, kind="stable")
    cdef const cnp.int64_t[:, ::1] S = np.ascontiguousarray(S_arr[order])
    cdef const double[::1] key = np.ascontiguousarray(key_arr[order])
    cdef const double[::1] rad = radii_arr
    cdef cnp.int64_t[::1] rad_order = np.argsort(-radii_arr, kind="stable").astype(np.int64)
    cdef Py_ssize_t nv = r_arr.shape[0]
    parent_a = np.arange(nv, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_a
    active_a = np.zeros(nv, dtype=np.uint8)
    cdef cnp.uint8_t[::1] active = active_a
    counts_a = np.zeros(radii_arr.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_a
    cdef Py_ssize_t pos = 0, total = S.shape[0], k = S.shape[1] if S.shape[0] else 0
    cdef Py_ssize_t i, j, ri
    cdef cnp.int64_t n_active = 0, n_unions = 0, root, other, v
    cdef double t
    with nogil:
        for i in range(rad_order.shape[0]):
            ri = rad_order[i]
            t = rad[ri]
            while pos < total and key[pos] >= t:
                for j in range(k):
                    v = S[pos, j]
                    if not active[v]:
                        active[v] = 1
                        n_active += 1
                root = _find(parent, S[pos, 0])
                for j in range(1, k):
                    other = _find(parent, S[pos, j])
                    if other != root:
                        parent[other] = root
                        n_unions += 1
                pos += 1
            counts[ri] = n_active - n_unions
    return counts_a
