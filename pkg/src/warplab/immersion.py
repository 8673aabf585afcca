"""Parametric immersions ``phi: P^m -> M_w^n`` and their meshes.

An immersion is a chart map from a parameter box into the polar-vector
chart of the ambient model space.  From the chart and its first and second
derivatives we get the induced metric, the second fundamental form
``B(X, Y) = (nabla_X Y)^perp``, the tangential part of ``grad r`` and the
restricted Hessian of radial functions.  :func:`mesh` samples all of these on
a structured Kuhn triangulation of the box.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse import csgraph

from . import expr
from .ambient import POLE_EXCLUSION, AmbientChart
from .errors import DomainError, ImmersionDegeneracyError, MeshError, NumericError
from .model_space import (
    ModelSpaceSpec,
    RadialFunction,
    integrated_warping,
    mean_curvature_eta,
    space_form_warping,
)

__all__ = [
    "ParametricImmersion",
    "MeshedSubmanifold",
    "VertexGeometry",
    "vertex_geometry",
    "induced_metric",
    "sff_norm",
    "mean_curvature_norm",
    "extrinsic_quantities",
    "restricted_hessian_F",
    "restricted_hessian_fd",
    "mesh",
    "builtin_example",
    "custom_immersion",
    "BUILTIN_NAMES",
    "write_mesh_text",
    "read_mesh_text",
]

DEGENERACY_DET = 1e-12
DEGENERATE_SIMPLEX_VOLUME = 1e-14
# Parameter offset (fraction of the axis length) used to evaluate per-vertex
# quantities at vertices where the chart collapses (sphere-coordinate poles).
COLLAPSE_NUDGE = 1e-4


@dataclass
class ParametricImmersion:
    """A chart ``u -> X`` from a parameter box into the ambient chart.

    ``derivatives(U)`` returns ``(X, J, H)`` with shapes ``(N, n)``,
    ``(N, n, m)`` and ``(N, n, m, m)``; if omitted, central differences with
    step ``fd_step`` are used.  ``wrap[k]`` marks a periodic axis (the upper
    end is identified with the lower).  Each ``collapse`` entry
    ``(axis, side, along)`` says that on the face ``axis = lo`` (side 0) or
    ``axis = hi`` (side 1) the chart does not depend on the axes in ``along``,
    so those grid vertices are identified.
    """

    name: str
    ambient: AmbientChart
    param_dim: int
    chart: Callable
    domain: tuple
    derivatives: Optional[Callable] = None
    fd_step: float = 1e-4
    wrap: tuple = ()
    collapse: tuple = ()
    params: dict = field(default_factory=dict)
    minimal: bool = False
    totally_geodesic: bool = False
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.param_dim
        n = self.ambient.dim
        if not (2 <= m < n):
            raise DomainError(f"need ambient dimension n > m >= 2, got m={m}, n={n}")
        self.domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(self.domain) != m:
            raise DomainError(f"domain must have {m} axes")
        if any(hi <= lo for lo, hi in self.domain):
            raise DomainError("every parameter axis needs lo < hi")
        self.wrap = tuple(bool(x) for x in self.wrap) or (False,) * m
        if len(self.wrap) != m:
            raise DomainError("wrap flags must match the parameter dimension")

    @property
    def jacobian_mode(self) -> str:
        return "analytic" if self.derivatives is not None else f"finite_difference({self.fd_step:g})"

    def evaluate(self, U):
        """Chart value, Jacobian and second derivatives at parameters ``U`` (N, m)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self.derivatives is not None:
            return self.derivatives(U)
        return _fd_derivatives(self.chart, U, self.fd_step)


def _fd_derivatives(chart, U, h):
    N, m = U.shape
    X = np.asarray(chart(U), dtype=float)
    n = X.shape[1]
    J = np.empty((N, n, m))
    H = np.empty((N, n, m, m))
    eye = np.eye(m) * h
    plus = [np.asarray(chart(U + eye[i]), float) for i in range(m)]
    minus = [np.asarray(chart(U - eye[i]), float) for i in range(m)]
    for i in range(m):
        J[:, :, i] = (plus[i] - minus[i]) / (2 * h)
        H[:, :, i, i] = (plus[i] - 2 * X + minus[i]) / (h * h)
        for j in range(i + 1, m):
            d = U + eye[i] + eye[j]
            val = (
                np.asarray(chart(d), float)
                - np.asarray(chart(U + eye[i] - eye[j]), float)
                - np.asarray(chart(U - eye[i] + eye[j]), float)
                + np.asarray(chart(U - eye[i] - eye[j]), float)
            ) / (4 * h * h)
            H[:, :, i, j] = val
            H[:, :, j, i] = val
    return X, J, H


@dataclass
class VertexGeometry:
    """Pointwise extrinsic geometry at a batch of parameters.

    Tangent and normal frames come from a QR factorisation of the Jacobian in
    coordinates where the ambient metric is the identity, so the projection
    onto the normal space stays accurate when the chart metric is badly
    conditioned.
    """

    X: np.ndarray
    r: np.ndarray
    J: np.ndarray
    G: np.ndarray  # ambient metric at X
    g: np.ndarray  # induced metric
    det_g: np.ndarray
    sff: np.ndarray  # (N, n - m, m, m) in orthonormal tangent and normal frames
    sff_norm: np.ndarray
    mean_curvature: np.ndarray  # norm of trace B
    radial_frame: np.ndarray  # <grad r, e_a> in the tangent frame
    radial_normal: np.ndarray  # <grad r, nu> in the normal frame
    gradr_tangent_norm: np.ndarray
    frame: np.ndarray  # C with C^T g C = I; tangent frame e_a = J C[:, a]


def vertex_geometry(I: ParametricImmersion, U, *, check=True) -> VertexGeometry:
    X, J, H = I.evaluate(U)
    A = I.ambient
    X, r = A.check_points(X)
    G = A.metric(X)
    m = I.param_dim
    g = np.einsum("nia,nij,njb->nab", J, G, J, optimize=True)
    g = 0.5 * (g + g.swapaxes(-1, -2))
    det = np.linalg.det(g)
    bad = ~(det > DEGENERACY_DET)
    if check and np.any(bad):
        idx = np.flatnonzero(bad)
        raise ImmersionDegeneracyError(
            f"{I.name}: induced metric degenerate (det <= {DEGENERACY_DET:g}) at parameters "
            f"{np.atleast_2d(U)[idx[:5]].tolist()}"
        )
    S = A.metric_sqrt(X)
    Jh = np.einsum("nkl,nli->nki", S, J)  # G = S S, so G-inner products become dot products
    Q, R = np.linalg.qr(Jh, mode="complete")
    Rm = R[:, :m, :]
    d = np.sign(np.diagonal(Rm, axis1=1, axis2=2))
    d = np.where(d == 0, 1.0, d)
    Q[:, :, :m] *= d[:, None, :]
    Rm = Rm * d[:, :, None]
    Rm = np.where(bad[:, None, None], np.eye(m), Rm)
    C = np.linalg.inv(Rm)
    gamma = A.christoffel(X)
    # nabla_{d_i} d_j = d_i d_j phi + Gamma(d_i phi, d_j phi)
    acc = H + np.einsum("nlpq,npi,nqj->nlij", gamma, J, J, optimize=True)
    acc_f = np.einsum("nia,nkij,njb->nkab", C, acc, C, optimize=True)
    acc_h = np.einsum("nkl,nlab->nkab", S, acc_f)
    QT, QN = Q[:, :, :m], Q[:, :, m:]
    b = np.einsum("nkv,nkab->nvab", QN, acc_h)
    b = 0.5 * (b + b.swapaxes(-1, -2))
    norm2 = np.einsum("nvab,nvab->n", b, b)
    tr = np.einsum("nvaa->nv", b)
    safe_r = np.where(r > 0, r, 1.0)
    u = np.where((r > 0)[:, None], X / safe_r[:, None], 0.0)
    uh = u  # S u = u
    rad_t = np.einsum("nka,nk->na", QT, uh)
    rad_n = np.einsum("nkv,nk->nv", QN, uh)
    return VertexGeometry(
        X=X,
        r=r,
        J=J,
        G=G,
        g=g,
        det_g=det,
        sff=b,
        sff_norm=np.sqrt(norm2),
        mean_curvature=np.sqrt(np.einsum("nv,nv->n", tr, tr)),
        radial_frame=rad_t,
        radial_normal=rad_n,
        gradr_tangent_norm=np.sqrt(np.einsum("na,na->n", rad_t, rad_t)),
        frame=C,
    )


def _single(I, u):
    u = np.asarray(u, dtype=float).reshape(1, I.param_dim)
    return vertex_geometry(I, u)


def induced_metric(I: ParametricImmersion, u):
    """Pullback metric ``g_ij = g(d_i phi, d_j phi)`` at a parameter point."""
    return _single(I, u).g[0]


def sff_norm(I: ParametricImmersion, u) -> float:
    """Hilbert-Schmidt norm of the second fundamental form at ``u``."""
    return float(_single(I, u).sff_norm[0])


def mean_curvature_norm(I: ParametricImmersion, u) -> float:
    return float(_single(I, u).mean_curvature[0])


def extrinsic_quantities(I: ParametricImmersion, u):
    """``(r, |grad^P r|)`` where ``grad^P r`` is the tangential part of ``grad r``."""
    geo = _single(I, u)
    r = float(geo.r[0])
    if r < POLE_EXCLUSION:
        raise DomainError(f"{I.name}: phi({list(np.ravel(u))}) is the pole")
    return r, float(geo.gradr_tangent_norm[0])


def _restricted_hessian(I, geo: VertexGeometry, F: RadialFunction):
    r = geo.r
    if np.any(r < POLE_EXCLUSION):
        raise DomainError("restricted Hessian of a radial function is undefined at the pole")
    w = I.ambient.warping
    eta = mean_curvature_eta(w, r)
    f1 = np.asarray(F.eval(r, 1), float)
    f2 = np.asarray(F.eval(r, 2), float)
    rad = geo.radial_frame
    beta_f = np.einsum("nv,nvab->nab", geo.radial_normal, geo.sff)
    m = I.param_dim
    rr = rad[:, :, None] * rad[:, None, :]
    hess_r = eta[:, None, None] * (np.eye(m) - rr)
    out = f2[:, None, None] * rr + f1[:, None, None] * (hess_r + beta_f)
    return 0.5 * (out + out.swapaxes(-1, -2))


def restricted_hessian_F(I: ParametricImmersion, u, F: Optional[RadialFunction] = None):
    """``Hess^P (F o r)`` at ``u`` in the Gram-Schmidt orthonormal tangent frame.

    Assembled as ``F'' <grad r, X><grad r, Y> + F' (Hess r(X, Y) + <grad r, B(X, Y)>)``
    with the model-space Hessian of ``r``.  ``F`` defaults to ``int_0^r w``.
    """
    F = F or integrated_warping(I.ambient.warping)
    U = np.atleast_2d(np.asarray(u, float))
    H = _restricted_hessian(I, vertex_geometry(I, U), F)
    return H[0] if np.ndim(u) == 1 else H


def restricted_hessian_fd(I: ParametricImmersion, u, F: RadialFunction, h: float = 1e-4):
    """Finite-difference Hessian of ``F(|phi(u)|)`` on ``P``, in the same frame.

    Uses only chart values, the induced metric and its difference quotients;
    it never touches the second fundamental form or the ambient Christoffel
    symbols, so it serves as an independent check of :func:`restricted_hessian_F`.
    """
    u = np.asarray(u, float)
    m = I.param_dim

    def f(p):
        X = np.asarray(I.chart(np.atleast_2d(p)), float)
        return np.asarray(F.eval(np.linalg.norm(X, axis=1), 0), float)[0]

    def gmat(p):
        return vertex_geometry(I, np.atleast_2d(p)).g[0]

    eye = np.eye(m) * h
    f0 = f(u)
    grad = np.array([(f(u + eye[i]) - f(u - eye[i])) / (2 * h) for i in range(m)])
    hess = np.empty((m, m))
    for i in range(m):
        hess[i, i] = (f(u + eye[i]) - 2 * f0 + f(u - eye[i])) / (h * h)
        for j in range(i + 1, m):
            v = (f(u + eye[i] + eye[j]) - f(u + eye[i] - eye[j]) - f(u - eye[i] + eye[j]) + f(u - eye[i] - eye[j])) / (
                4 * h * h
            )
            hess[i, j] = hess[j, i] = v
    g0 = gmat(u)
    dg = np.array([(gmat(u + eye[k]) - gmat(u - eye[k])) / (2 * h) for k in range(m)])  # dg[k, i, j]
    low = 0.5 * (np.swapaxes(dg, 0, 1) + np.moveaxis(dg, 0, -1) - dg)  # [l, i, j]
    gamma = np.einsum("kl,lij->kij", np.linalg.inv(g0), low)
    hess_cov = hess - np.einsum("kij,k->ij", gamma, grad)
    C = np.linalg.inv(np.linalg.cholesky(g0)).T
    return C.T @ hess_cov @ C


# --------------------------------------------------------------------------
# meshes


@dataclass
class MeshedSubmanifold:
    immersion: ParametricImmersion
    resolution: tuple
    params: np.ndarray
    points: np.ndarray
    r: np.ndarray
    induced_metric: np.ndarray
    sff: np.ndarray
    gradr: np.ndarray
    mean_curvature: np.ndarray
    simplices: np.ndarray
    simplex_volume: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    rho: np.ndarray
    base_vertex: int
    horizon: float
    nudged_vertices: np.ndarray
    eval_params: np.ndarray  # parameters used for per-vertex geometry

    @property
    def m(self) -> int:
        return self.immersion.param_dim

    @property
    def n(self) -> int:
        return self.immersion.ambient.dim

    @property
    def num_vertices(self) -> int:
        return len(self.r)

    @property
    def total_volume(self) -> float:
        return float(self.simplex_volume.sum())

    @property
    def contains_pole(self) -> bool:
        return bool(self.r[self.base_vertex] < POLE_EXCLUSION)

    @property
    def is_compact(self) -> bool:
        return not math.isfinite(self.horizon)

    def r_range(self):
        return float(self.r.min()), float(self.r.max())


def _axis_values(lo, hi, count, wrap):
    if wrap:
        return lo + (hi - lo) * np.arange(count) / count
    return np.linspace(lo, hi, count)


def _canonical_index(idx, shape, collapse):
    """Apply collapse identifications to grid multi-indices (..., m)."""
    idx = idx.copy()
    for axis, side, along in collapse:
        pos = 0 if side in (0, "lo") else shape[axis] - 1
        hit = idx[..., axis] == pos
        for b in along:
            idx[..., b] = np.where(hit, 0, idx[..., b])
    return idx


def mesh(I: ParametricImmersion, resolution, threads: int = 1) -> MeshedSubmanifold:
    """Sample ``I`` on a structured grid and triangulate it.

    Each grid box is split into ``m!`` Kuhn simplices; periodic axes close up
    and collapsed faces are identified, dropping simplices that lose a vertex.
    Per-vertex caches, simplex volumes (volume density averaged over the
    vertices), edge lengths (induced metric at the parameter midpoint) and the
    intrinsic distance ``rho`` (shortest edge paths from the vertex of least
    ``r``) are filled in.
    """
    m = I.param_dim
    shape = tuple(int(c) for c in resolution)
    if len(shape) != m or any(c < 2 for c in shape):
        raise DomainError(f"resolution must give >= 2 samples on each of {m} axes, got {resolution}")
    axes = [_axis_values(lo, hi, c, w) for (lo, hi), c, w in zip(I.domain, shape, I.wrap)]
    spacing = np.array([(hi - lo) / (c if w else c - 1) for (lo, hi), c, w in zip(I.domain, shape, I.wrap)])

    grid_idx = np.stack(np.meshgrid(*[np.arange(c) for c in shape], indexing="ij"), axis=-1).reshape(-1, m)
    canon = _canonical_index(grid_idx, shape, I.collapse)
    canon_flat = np.ravel_multi_index(tuple(canon.T), shape)
    uniq, vid_of_grid = np.unique(canon_flat, return_inverse=True)
    vid_of_grid = vid_of_grid.reshape(-1)
    vert_idx = np.stack(np.unravel_index(uniq, shape), axis=-1)
    params = np.stack([axes[k][vert_idx[:, k]] for k in range(m)], axis=-1)

    # Kuhn triangulation of every box
    box_counts = [c if w else c - 1 for c, w in zip(shape, I.wrap)]
    boxes = np.stack(np.meshgrid(*[np.arange(c) for c in box_counts], indexing="ij"), axis=-1).reshape(-1, m)
    simp_list, raw_list = [], []
    for perm in itertools.permutations(range(m)):
        corner = boxes.copy()
        offs = np.zeros_like(boxes)
        verts, raws = [], []
        for step in (None,) + perm:
            if step is not None:
                offs[:, step] += 1
            c = boxes + offs
            wrapped = np.where(np.array(I.wrap), c % np.array(shape), c)
            flat = np.ravel_multi_index(tuple(wrapped.T), shape)
            verts.append(vid_of_grid[flat])
            raws.append(np.stack([I.domain[k][0] + spacing[k] * c[:, k] for k in range(m)], axis=-1))
        del corner
        simp_list.append(np.stack(verts, axis=1))
        raw_list.append(np.stack(raws, axis=1))
    simplices = np.concatenate(simp_list).astype(np.int64)
    raw = np.concatenate(raw_list)
    srt = np.sort(simplices, axis=1)
    keep = np.all(srt[:, 1:] != srt[:, :-1], axis=1)
    simplices, raw = simplices[keep], raw[keep]

    # per-vertex geometry, evaluated at nudged parameters on collapsed faces
    on_collapse = np.zeros(len(params), dtype=bool)
    eval_params = params.copy()
    for axis, side, _along in I.collapse:
        lo, hi = I.domain[axis]
        pos = 0 if side in (0, "lo") else shape[axis] - 1
        hit = vert_idx[:, axis] == pos
        on_collapse |= hit
        delta = COLLAPSE_NUDGE * (hi - lo)
        eval_params[hit, axis] += delta if pos == 0 else -delta
    geo = _batched_geometry(I, eval_params, threads)
    bad = ~(geo["det_g"] > DEGENERACY_DET)
    if np.any(bad):
        raise ImmersionDegeneracyError(
            f"{I.name}: induced metric degenerate at parameters {eval_params[bad][:5].tolist()}"
        )
    X = np.asarray(I.evaluate(params)[0], float)
    r = np.linalg.norm(X, axis=1)
    G = I.ambient.metric(X)

    # simplex volumes: the volume density of the affine simplex, averaged over its vertices
    E = X[simplices[:, 1:]] - X[simplices[:, :1]]  # (S, m, n)
    gram = np.einsum("sin,svnk,sjk->svij", E, G[simplices], E, optimize=True)
    vol = np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)).mean(axis=1) / math.factorial(m)
    degenerate = np.flatnonzero(vol < DEGENERATE_SIMPLEX_VOLUME)
    if degenerate.size:
        raise MeshError(
            f"{I.name}: {degenerate.size} degenerate simplices (volume < {DEGENERATE_SIMPLEX_VOLUME:g}), "
            f"first cells {simplices[degenerate[:5]].tolist()}",
            cells=degenerate.tolist(),
        )

    # edges with midpoint induced lengths
    pairs = list(itertools.combinations(range(m + 1), 2))
    ea = np.concatenate([simplices[:, i] for i, _ in pairs])
    eb = np.concatenate([simplices[:, j] for _, j in pairs])
    ua = np.concatenate([raw[:, i] for i, _ in pairs])
    ub = np.concatenate([raw[:, j] for _, j in pairs])
    lo_v, hi_v = np.minimum(ea, eb), np.maximum(ea, eb)
    key = lo_v * len(params) + hi_v
    _, first = np.unique(key, return_index=True)
    edges = np.stack([lo_v[first], hi_v[first]], axis=1)
    du = ub[first] - ua[first]
    mid = 0.5 * (ua[first] + ub[first])
    gmid = _batched_geometry(I, mid, threads, fields=("g",))["g"]
    lengths = np.sqrt(np.einsum("ei,eij,ej->e", du, gmid, du))

    base = int(np.argmin(r))
    Nv = len(params)
    adj = sparse.coo_matrix(
        (np.concatenate([lengths, lengths]), (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]]))),
        shape=(Nv, Nv),
    ).tocsr()
    rho = csgraph.dijkstra(adj, directed=False, indices=base)

    # mesh horizon: least r on the boundary of the parameter box
    boundary = np.zeros(len(params), dtype=bool)
    collapsed_faces = {(a, 0 if s in (0, "lo") else 1) for a, s, _ in I.collapse}
    for k in range(m):
        if I.wrap[k]:
            continue
        for side, pos in ((0, 0), (1, shape[k] - 1)):
            if (k, side) in collapsed_faces:
                continue
            boundary |= vert_idx[:, k] == pos
    horizon = float(r[boundary].min()) if boundary.any() else math.inf

    return MeshedSubmanifold(
        immersion=I,
        resolution=shape,
        params=params,
        points=X,
        r=r,
        induced_metric=geo["g"],
        sff=geo["sff_norm"],
        gradr=np.where(r < POLE_EXCLUSION, 0.0, geo["gradr_tangent_norm"]),
        mean_curvature=geo["mean_curvature"],
        simplices=simplices,
        simplex_volume=vol,
        edges=edges,
        edge_lengths=lengths,
        rho=rho,
        base_vertex=base,
        horizon=horizon,
        nudged_vertices=np.flatnonzero(on_collapse),
        eval_params=eval_params,
    )


_GEO_FIELDS = ("g", "det_g", "sff_norm", "gradr_tangent_norm", "mean_curvature")


def _batched_geometry(I, U, threads=1, fields=_GEO_FIELDS, chunk=8192):
    starts = list(range(0, len(U), chunk))

    def work(s):
        if fields == ("g",):
            X, J, _H = I.evaluate(U[s : s + chunk])
            return {"g": np.einsum("nia,nij,njb->nab", J, I.ambient.metric(X), J, optimize=True)}
        geo = vertex_geometry(I, U[s : s + chunk], check=False)
        return {f: getattr(geo, f) for f in fields}

    if threads and threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    return {f: np.concatenate([p[f] for p in parts]) for f in fields}


def write_mesh_text(Mh: MeshedSubmanifold, fh) -> None:
    """Write the plain-text mesh table.

    Layout: comment lines start with ``#``.  After the header line
    ``# id u1..um x1..xn r rho sff gradr`` come one vertex per line; then
    ``# simplices <count>`` followed by ``# s0..sm`` and one simplex per line.
    """
    m, n = Mh.m, Mh.n
    cols = ["id"] + [f"u{i + 1}" for i in range(m)] + [f"x{i + 1}" for i in range(n)] + ["r", "rho", "sff", "gradr"]
    fh.write(f"# warplab mesh: immersion={Mh.immersion.name} m={m} n={n} vertices={Mh.num_vertices}\n")
    fh.write("# " + " ".join(cols) + "\n")
    table = np.column_stack([Mh.params, Mh.points, Mh.r, Mh.rho, Mh.sff, Mh.gradr])
    for i, row in enumerate(table.tolist()):
        fh.write(str(i) + " " + " ".join(map(repr, row)) + "\n")
    fh.write(f"# simplices {len(Mh.simplices)}\n")
    fh.write("# " + " ".join(f"s{i}" for i in range(m + 1)) + "\n")
    for s in Mh.simplices.tolist():
        fh.write(" ".join(map(str, s)) + "\n")


def read_mesh_text(fh):
    """Parse :func:`write_mesh_text` output into ``(columns, vertex_table, simplices)``."""
    lines = fh.read().splitlines()
    cols = lines[1][2:].split()
    rows, simp = [], []
    section = "v"
    for line in lines[2:]:
        if line.startswith("# simplices"):
            section = "s"
            continue
        if line.startswith("#") or not line.strip():
            continue
        if section == "v":
            rows.append([float(x) for x in line.split()])
        else:
            simp.append([int(x) for x in line.split()])
    return cols, np.array(rows), np.array(simp, dtype=np.int64)


# --------------------------------------------------------------------------
# built-in examples


def _ambient(n, b):
    return AmbientChart(ModelSpaceSpec(n, space_form_warping(b)))


def _flat_chart(m, n):
    def chart(U):
        U = np.atleast_2d(U)
        return np.concatenate([U, np.zeros((len(U), n - m))], axis=1)

    def derivs(U):
        N = len(U)
        J = np.zeros((N, n, m))
        J[:, np.arange(m), np.arange(m)] = 1.0
        return chart(U), J, np.zeros((N, n, m, m))

    return chart, derivs


def euclidean_plane(m=2, n=3, extent=10.0):
    chart, derivs = _flat_chart(m, n)
    return ParametricImmersion(
        name="euclidean_plane",
        ambient=_ambient(n, 0.0),
        param_dim=m,
        chart=chart,
        derivatives=derivs,
        domain=[(-extent, extent)] * m,
        params={"m": m, "n": n, "extent": extent},
        minimal=True,
        totally_geodesic=True,
    )


def hyperbolic_hyperplane(m=2, n=3, b=-1.0, extent=10.0):
    """Totally geodesic ``H^m(b)`` through the pole: a coordinate subspace of the chart."""
    if b >= 0:
        raise DomainError("hyperbolic_hyperplane needs b < 0")
    chart, derivs = _flat_chart(m, n)
    return ParametricImmersion(
        name="hyperbolic_hyperplane",
        ambient=_ambient(n, b),
        param_dim=m,
        chart=chart,
        derivatives=derivs,
        domain=[(-extent, extent)] * m,
        params={"m": m, "n": n, "b": b, "extent": extent},
        minimal=True,
        totally_geodesic=True,
    )


def catenoid(scale=1.0, v_max=4.0):
    """Catenoid ``(v, t) -> a (cosh v cos t, cosh v sin t, v)`` with neck radius ``a``."""
    a = float(scale)

    def parts(U):
        v, t = U[:, 0], U[:, 1]
        return np.cosh(v), np.sinh(v), np.cos(t), np.sin(t), v

    def chart(U):
        U = np.atleast_2d(U)
        ch, sh, c, s, v = parts(U)
        return a * np.stack([ch * c, ch * s, v], axis=1)

    def derivs(U):
        ch, sh, c, s, v = parts(U)
        z = np.zeros_like(v)
        J = a * np.stack([np.stack([sh * c, -ch * s], -1), np.stack([sh * s, ch * c], -1), np.stack([z + 1, z], -1)], 1)
        H = np.empty((len(U), 3, 2, 2))
        H[:, :, 0, 0] = a * np.stack([ch * c, ch * s, z], 1)
        H[:, :, 0, 1] = H[:, :, 1, 0] = a * np.stack([-sh * s, sh * c, z], 1)
        H[:, :, 1, 1] = a * np.stack([-ch * c, -ch * s, z], 1)
        return chart(U), J, H

    return ParametricImmersion(
        name="catenoid",
        ambient=_ambient(3, 0.0),
        param_dim=2,
        chart=chart,
        derivatives=derivs,
        domain=[(-v_max, v_max), (0.0, 2 * math.pi)],
        wrap=(False, True),
        params={"scale": a, "v_max": v_max},
        minimal=True,
    )


def _sphere_factors(angles):
    """Hyperspherical unit vector with first and second angle derivatives.

    ``angles`` has shape (N, k); the last angle is periodic.  Returns
    ``omega`` (N, k+1), ``d1`` (N, k+1, k), ``d2`` (N, k+1, k, k).
    """
    N, k = angles.shape
    S, Cc = np.sin(angles), np.cos(angles)
    # factor kind per (component, angle): 0 -> 1, 1 -> sin, 2 -> cos
    kinds = np.zeros((k + 1, k), dtype=int)
    for comp in range(k + 1):
        for i in range(min(comp, k)):
            kinds[comp, i] = 1
        if comp < k:
            kinds[comp, comp] = 2
    kinds[k, k - 1] = 1

    def factor(kind, i, order):
        if kind == 0:
            return np.ones(N) if order == 0 else np.zeros(N)
        s, c = S[:, i], Cc[:, i]
        if kind == 1:
            return (s, c, -s)[order]
        return (c, -s, -c)[order]

    omega = np.ones((N, k + 1))
    d1 = np.ones((N, k + 1, k))
    d2 = np.ones((N, k + 1, k, k))
    for comp in range(k + 1):
        for i in range(k):
            f0 = factor(kinds[comp, i], i, 0)
            omega[:, comp] *= f0
            for a in range(k):
                d1[:, comp, a] *= factor(kinds[comp, i], i, 1 if a == i else 0)
                for b in range(k):
                    order = (a == i) + (b == i)
                    d2[:, comp, a, b] *= factor(kinds[comp, i], i, order)
    return omega, d1, d2


def _sphere_collapse(k, first_axis):
    # an inner angle at 0 or pi makes every later angle irrelevant
    out = []
    for i in range(k - 1):
        along = tuple(range(first_axis + i + 1, first_axis + k))
        out.append((first_axis + i, 0, along))
        out.append((first_axis + i, 1, along))
    return tuple(out)


def round_sphere(R=1.0):
    """Round sphere of radius ``R`` centred at the pole (so ``r = R`` everywhere)."""
    R = float(R)

    def derivs(U):
        om, d1, d2 = _sphere_factors(U)
        # coordinate order: (cos phi, sin phi cos t, sin phi sin t)
        return R * om, R * d1, R * d2

    def chart(U):
        return derivs(np.atleast_2d(U))[0]

    return ParametricImmersion(
        name="round_sphere",
        ambient=_ambient(3, 0.0),
        param_dim=2,
        chart=chart,
        derivatives=derivs,
        domain=[(0.0, math.pi), (0.0, 2 * math.pi)],
        wrap=(False, True),
        collapse=_sphere_collapse(2, 0),
        params={"R": R},
    )


@dataclass
class CatenoidProfile:
    """Generating curve of the rotational minimal hypersurface in ``R^{m+1}``.

    Arc-length parametrized ``(y(s), z(s))`` with tangent angle ``a``:
    ``y' = sin a``, ``z' = cos a``, ``a' = (m-1) cos a / y``, starting at the
    neck ``y = 1``.  The first integral is ``y^{m-1} cos a = 1``.
    """

    m: int
    length: float
    solution: object = field(repr=False)
    drift: float = 0.0

    @classmethod
    def solve(cls, m, length, tol=1e-12):
        def rhs(_s, state):
            y, _z, a = state
            return [math.sin(a), math.cos(a), (m - 1) * math.cos(a) / y]

        sol = solve_ivp(rhs, (0.0, length), [1.0, 0.0, 0.0], method="DOP853", rtol=tol, atol=tol, dense_output=True)
        if not sol.success:
            raise NumericError(f"profile ODE failed: {sol.message}")
        y, _z, a = sol.y
        if not np.all(np.isfinite(sol.y)) or np.any(y <= 0):
            raise NumericError("profile ODE blew up")
        drift = float(np.max(np.abs(y ** (m - 1) * np.cos(a) - 1.0)))
        return cls(m, length, sol.sol, drift)

    def state(self, s):
        s = np.asarray(s, float)
        sign = np.sign(s)
        y, z, a = self.solution(np.abs(s))
        return y, sign * z, sign * a

    def first_integral_drift(self, s):
        y, _z, a = self.state(s)
        return np.abs(y ** (self.m - 1) * np.cos(a) - 1.0)


def higher_catenoid(m=3, length=12.0):
    """Rotational minimal hypersurface ``P^m`` in ``R^{m+1}`` with neck radius 1.

    Parameters ``(s, phi_1..phi_{m-2}, t)``: arc length of the profile and
    hyperspherical angles; the point is ``(y(s) omega, z(s))``.
    """
    m = int(m)
    if m < 2:
        raise DomainError("higher_catenoid needs m >= 2")
    prof = CatenoidProfile.solve(m, length)
    k = m - 1

    def derivs(U):
        s = U[:, 0]
        y, z, a = prof.state(s)
        sa, ca = np.sin(a), np.cos(a)
        y1, z1 = sa, ca
        y2 = (m - 1) * ca * ca / y
        z2 = -(m - 1) * sa * ca / y
        om, d1, d2 = _sphere_factors(U[:, 1:])
        N = len(U)
        X = np.concatenate([y[:, None] * om, z[:, None]], axis=1)
        J = np.zeros((N, m + 1, m))
        J[:, :m, 0] = y1[:, None] * om
        J[:, m, 0] = z1
        J[:, :m, 1:] = y[:, None, None] * d1
        H = np.zeros((N, m + 1, m, m))
        H[:, :m, 0, 0] = y2[:, None] * om
        H[:, m, 0, 0] = z2
        H[:, :m, 0, 1:] = y1[:, None, None] * d1
        H[:, :m, 1:, 0] = y1[:, None, None] * d1
        H[:, :m, 1:, 1:] = y[:, None, None, None] * d2
        return X, J, H

    def chart(U):
        return derivs(np.atleast_2d(U))[0]

    domain = [(-length, length)] + [(0.0, math.pi)] * (k - 1) + [(0.0, 2 * math.pi)]
    return ParametricImmersion(
        name="higher_catenoid",
        ambient=_ambient(m + 1, 0.0),
        param_dim=m,
        chart=chart,
        derivatives=derivs,
        domain=domain,
        wrap=(False,) * (m - 1) + (True,),
        collapse=_sphere_collapse(k, 1),
        params={"m": m, "length": length},
        minimal=True,
        extras={"profile": prof, "first_integral_drift": prof.drift},
    )


BUILTIN_NAMES = ("euclidean_plane", "catenoid", "higher_catenoid", "hyperbolic_hyperplane", "round_sphere")
_BUILTINS = {
    "euclidean_plane": euclidean_plane,
    "catenoid": catenoid,
    "higher_catenoid": higher_catenoid,
    "hyperbolic_hyperplane": hyperbolic_hyperplane,
    "round_sphere": round_sphere,
}


def builtin_example(name: str, **params) -> ParametricImmersion:
    """Construct one of :data:`BUILTIN_NAMES` with keyword parameters."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown built-in immersion {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    return factory(**params)


def custom_immersion(components, ambient: AmbientChart, domain, wrap=(), fd_step=1e-4, name="custom"):
    """Immersion from expression strings in ``u1..um``, differentiated numerically."""
    m = len(domain)
    names = tuple(f"u{i + 1}" for i in range(m))
    try:
        exprs = [expr.parse(c, names) for c in components]
    except expr.ExpressionError as exc:
        raise DomainError(f"bad chart expression: {exc}") from None
    if len(exprs) != ambient.dim:
        raise DomainError(f"chart needs {ambient.dim} components, got {len(exprs)}")

    def chart(U):
        U = np.atleast_2d(U)
        env = {nm: U[:, i] for i, nm in enumerate(names)}
        return np.stack([np.broadcast_to(np.asarray(e(**env), float), (len(U),)) for e in exprs], axis=1)

    return ParametricImmersion(
        name=name,
        ambient=ambient,
        param_dim=m,
        chart=chart,
        domain=domain,
        fd_step=fd_step,
        wrap=wrap,
        params={"components": list(components)},
    )
