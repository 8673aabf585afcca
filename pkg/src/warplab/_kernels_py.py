"""Reference implementations of the mesh kernels (pure Python + numpy).

The compiled module ``_ckernels`` implements the same algorithms with the
same output ordering; :mod:`warplab.kernels` picks one at import.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def _lam(r, a, b, t):
    return (t - r[a]) / (r[b] - r[a])


def _det3(p, q, s):
    return (
        p[0] * (q[1] * s[2] - q[2] * s[1])
        - p[1] * (q[0] * s[2] - q[2] * s[0])
        + p[2] * (q[0] * s[1] - q[1] * s[0])
    )


def _prism_fraction(la_c, la_d, lb_c, lb_d):
    """Inside fraction of a tetrahedron with two vertices (a, b) below the level.

    Reference tetrahedron a=0, b=e1, c=e2, d=e3 (volume 1/6).  The inside part
    is the convex wedge with triangles (a, p_ac, p_ad) and (b, p_bc, p_bd).
    """
    A0 = (0.0, 0.0, 0.0)
    A1 = (0.0, la_c, 0.0)
    A2 = (0.0, 0.0, la_d)
    B0 = (1.0, 0.0, 0.0)
    B1 = (1.0 - lb_c, lb_c, 0.0)
    B2 = (1.0 - lb_d, 0.0, lb_d)

    def vol6(p, q, s, u):
        return abs(_det3((q[0] - p[0], q[1] - p[1], q[2] - p[2]), (s[0] - p[0], s[1] - p[1], s[2] - p[2]), (u[0] - p[0], u[1] - p[1], u[2] - p[2])))

    return vol6(A0, A1, A2, B0) + vol6(A1, A2, B0, B1) + vol6(A2, B0, B1, B2)


def clip_level(simplices, r, t):
    """Clip every simplex against the linear interpolant of ``r`` at level ``t``.

    Vertices with ``r < t`` are inside.  Returns ``(cut, frac, fs, fa, fb, fl)``:
    indices of simplices with vertices on both sides, the inside volume
    fraction of each, and the level-set facets.  Facet ``k`` belongs to simplex
    ``fs[k]``; its ``j``-th corner is ``X[fa] + fl * (X[fb] - X[fa])`` with
    ``fa`` inside and ``fb`` outside.  Triangles give segments, tetrahedra give
    triangles (quadrilaterals are split in two).
    """
    simplices = np.asarray(simplices, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    k = simplices.shape[1]
    if k not in (3, 4):
        raise NotImplementedError("clipping is implemented for triangles and tetrahedra")
    m = k - 1
    inside = r[simplices] < t
    n_in = inside.sum(axis=1)
    mixed = np.flatnonzero((n_in > 0) & (n_in < k))
    cut, frac, fs, fa, fb, fl = [], [], [], [], [], []
    for s in mixed.tolist():
        verts = simplices[s].tolist()
        ins = [v for v in verts if r[v] < t]
        out = [v for v in verts if not r[v] < t]
        cut.append(s)
        if m == 2:
            if len(ins) == 1:
                a = ins[0]
                l1, l2 = _lam(r, a, out[0], t), _lam(r, a, out[1], t)
                frac.append(l1 * l2)
                fs.append(s)
                fa.append((a, a))
                fb.append((out[0], out[1]))
                fl.append((l1, l2))
            else:
                c = out[0]
                l1, l2 = _lam(r, ins[0], c, t), _lam(r, ins[1], c, t)
                frac.append(1.0 - (1.0 - l1) * (1.0 - l2))
                fs.append(s)
                fa.append((ins[0], ins[1]))
                fb.append((c, c))
                fl.append((l1, l2))
        else:
            if len(ins) == 1:
                a = ins[0]
                ls = [_lam(r, a, o, t) for o in out]
                frac.append(ls[0] * ls[1] * ls[2])
                fs.append(s)
                fa.append((a, a, a))
                fb.append(tuple(out))
                fl.append(tuple(ls))
            elif len(ins) == 3:
                d = out[0]
                ls = [_lam(r, i, d, t) for i in ins]
                frac.append(1.0 - (1.0 - ls[0]) * (1.0 - ls[1]) * (1.0 - ls[2]))
                fs.append(s)
                fa.append(tuple(ins))
                fb.append((d, d, d))
                fl.append(tuple(ls))
            else:
                a, b = ins
                c, d = out
                lac, lad = _lam(r, a, c, t), _lam(r, a, d, t)
                lbc, lbd = _lam(r, b, c, t), _lam(r, b, d, t)
                frac.append(_prism_fraction(lac, lad, lbc, lbd))
                # quad p_ac, p_ad, p_bd, p_bc split along p_ac-p_bd
                fs.append(s)
                fa.append((a, a, b))
                fb.append((c, d, d))
                fl.append((lac, lad, lbd))
                fs.append(s)
                fa.append((a, b, b))
                fb.append((c, d, c))
                fl.append((lac, lbd, lbc))
    return (
        np.asarray(cut, dtype=np.int64),
        np.asarray(frac, dtype=np.float64),
        np.asarray(fs, dtype=np.int64),
        np.asarray(fa, dtype=np.int64).reshape(-1, m),
        np.asarray(fb, dtype=np.int64).reshape(-1, m),
        np.asarray(fl, dtype=np.float64).reshape(-1, m),
    )


def complement_counts(simplices, r, radii):
    """Connected components of ``{simplices with every vertex r >= t}`` per radius.

    Radii are processed in decreasing order so the complement only grows;
    simplices join in order of their least vertex ``r`` and a union-find
    tracks components (active vertices minus successful unions).
    """
    simplices = np.asarray(simplices, dtype=np.int64)
    r = np.asarray(r, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    key = r[simplices].min(axis=1)
    order = np.argsort(-key, kind="stable")
    parent = list(range(len(r)))
    active = [False] * len(r)
    n_active = 0
    n_unions = 0

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    counts = np.zeros(len(radii), dtype=np.int64)
    rad_order = np.argsort(-radii, kind="stable")
    keys = key[order].tolist()
    simp = simplices[order].tolist()
    pos = 0
    total = len(simp)
    for ri in rad_order.tolist():
        t = radii[ri]
        while pos < total and keys[pos] >= t:
            verts = simp[pos]
            for v in verts:
                if not active[v]:
                    active[v] = True
                    n_active += 1
            root = find(verts[0])
            for v in verts[1:]:
                other = find(v)
                if other != root:
                    parent[other] = root
                    n_unions += 1
            pos += 1
        counts[ri] = n_active - n_unions
    return counts
