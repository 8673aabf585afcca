"""Extrinsic balls, their measures, end counts and critical-point scans on meshes."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import kernels
from .ambient import POLE_EXCLUSION
from .errors import DomainError
from .immersion import MeshedSubmanifold, _restricted_hessian, vertex_geometry
from .model_space import RadialFunction, integrated_warping

__all__ = [
    "ExtrinsicBallMesh",
    "EndsScan",
    "ScanResult",
    "extrinsic_ball",
    "volume",
    "area",
    "ball_measures",
    "count_ends",
    "ends_radius_limit",
    "stabilization",
    "critical_point_scan",
    "convexity_scan",
    "STABILIZATION_FRACTION",
]

STABILIZATION_FRACTION = 0.3


@dataclass
class ExtrinsicBallMesh:
    """The part of a mesh with ``r < t``, clipped against the linear interpolant of ``r``."""

    parent: MeshedSubmanifold
    t: float
    interior_simplices: np.ndarray
    cut_simplices: np.ndarray
    cut_fractions: np.ndarray
    boundary_points: np.ndarray  # (F, m, n) facet corners in the ambient chart
    boundary_simplex: np.ndarray  # parent simplex of each facet
    boundary_measure: np.ndarray  # induced (m-1)-volume of each facet
    boundary_labels: np.ndarray  # connected component of each facet

    @property
    def is_empty(self) -> bool:
        return self.interior_simplices.size == 0 and self.cut_simplices.size == 0

    def volume(self) -> float:
        vol = self.parent.simplex_volume
        return float(vol[self.interior_simplices].sum() + (self.cut_fractions * vol[self.cut_simplices]).sum())

    def area(self) -> float:
        return float(self.boundary_measure.sum())

    def component_areas(self) -> np.ndarray:
        """Boundary measure of each connected component of the level set, largest first."""
        if self.boundary_labels.size == 0:
            return np.zeros(0)
        sums = np.bincount(self.boundary_labels, weights=self.boundary_measure)
        return np.sort(sums)[::-1]


def extrinsic_ball(Mh: MeshedSubmanifold, t: float) -> ExtrinsicBallMesh:
    """Clip the mesh at ``r = t``.

    An empty ball (``t`` at or below the least ``r``) is valid.  Facet measures
    use the ambient metric at the facet centroid.
    """
    t = float(t)
    S = Mh.simplices
    cut, frac, fs, fa, fb, fl = kernels.clip_level(S, Mh.r, t)
    inside_all = np.all(Mh.r[S] < t, axis=1)
    interior = np.flatnonzero(inside_all)
    X = Mh.points
    m = Mh.m
    if len(fs):
        P = X[fa] + fl[..., None] * (X[fb] - X[fa])
        centroid = P.mean(axis=1)
        G = Mh.immersion.ambient.metric(centroid)
        E = P[:, 1:] - P[:, :1]
        gram = np.einsum("fin,fnk,fjk->fij", E, G, E, optimize=True)
        measure = np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(m - 1)
        labels = _facet_components(fa, fb, len(X))
    else:
        P = np.zeros((0, m, Mh.n))
        measure = np.zeros(0)
        labels = np.zeros(0, dtype=np.int64)
    return ExtrinsicBallMesh(
        parent=Mh,
        t=t,
        interior_simplices=interior,
        cut_simplices=cut,
        cut_fractions=frac,
        boundary_points=P,
        boundary_simplex=fs,
        boundary_measure=measure,
        boundary_labels=labels,
    )


def _facet_components(fa, fb, nv):
    """Label facets that share a level-set point (the crossing on a mesh edge)."""
    F, m = fa.shape
    keys = (fa * nv + fb).ravel()
    uniq, point_id = np.unique(keys, return_inverse=True)
    rows = np.repeat(np.arange(F), m)
    # bipartite facet/point graph
    graph = sparse.coo_matrix((np.ones(F * m), (rows, F + point_id.ravel())), shape=(F + len(uniq),) * 2)
    _n, labels = csgraph.connected_components(graph, directed=False)
    _u, compact = np.unique(labels[:F], return_inverse=True)
    return compact.astype(np.int64)


def volume(B: ExtrinsicBallMesh) -> float:
    """Riemannian volume of the clipped ball."""
    return B.volume()


def area(B: ExtrinsicBallMesh) -> float:
    """Induced measure of the level set ``r = t`` inside the mesh."""
    return B.area()


@dataclass
class BallMeasures:
    radii: np.ndarray
    volume: np.ndarray
    area: np.ndarray
    component_areas: list


def ball_measures(Mh: MeshedSubmanifold, radii, threads: int = 1) -> BallMeasures:
    """Volume, boundary measure and per-component boundary measures for each radius."""
    radii = np.asarray(radii, float)

    def work(t):
        B = extrinsic_ball(Mh, t)
        return B.volume(), B.area(), B.component_areas()

    if threads and threads > 1 and len(radii) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, radii.tolist()))
    else:
        rows = [work(t) for t in radii.tolist()]
    return BallMeasures(
        radii=radii,
        volume=np.array([v for v, _, _ in rows]),
        area=np.array([a for _, a, _ in rows]),
        component_areas=[c for _, _, c in rows],
    )


@dataclass
class EndsScan:
    radii: np.ndarray
    counts: np.ndarray
    stabilized_count: Optional[int]
    stabilization_window: Optional[tuple]
    horizon: float


def stabilization(radii, counts, fraction: float = STABILIZATION_FRACTION):
    """Trailing run of equal counts; accepted if it spans ``fraction`` of the scanned range."""
    radii = np.asarray(radii, float)
    counts = np.asarray(counts)
    if len(counts) == 0:
        return None, None
    j = len(counts) - 1
    while j > 0 and counts[j - 1] == counts[-1]:
        j -= 1
    span = radii[-1] - radii[0]
    covered = radii[-1] - radii[j]
    if len(counts) == 1 or (span > 0 and covered >= fraction * span - 1e-12 * span):
        return int(counts[-1]), (float(radii[j]), float(radii[-1]))
    return None, None


def ends_radius_limit(Mh: MeshedSubmanifold) -> float:
    """Largest radius for end counting: the horizon minus the largest change of ``r`` along an edge."""
    if Mh.is_compact:
        return math.inf
    dr = np.abs(Mh.r[Mh.edges[:, 0]] - Mh.r[Mh.edges[:, 1]])
    return Mh.horizon - float(dr.max())


def count_ends(Mh: MeshedSubmanifold, radii, fraction: float = STABILIZATION_FRACTION) -> EndsScan:
    """Connected components of the complement of each extrinsic ball.

    A simplex survives at radius ``t`` when none of its vertices has ``r < t``.
    """
    radii = np.asarray(radii, float)
    if radii.ndim != 1 or len(radii) == 0 or np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be a nonempty strictly increasing list")
    limit = ends_radius_limit(Mh)
    if radii[-1] > limit:
        raise DomainError(
            f"radius {radii[-1]:g} is within one mesh cell of the horizon {Mh.horizon:g} "
            f"(largest usable radius {limit:g}); the complement pinches at the parameter-box boundary there"
        )
    counts = kernels.complement_counts(Mh.simplices, Mh.r, radii)
    stab, window = stabilization(radii, counts, fraction)
    return EndsScan(radii, np.asarray(counts, dtype=np.int64), stab, window, Mh.horizon)


@dataclass
class ScanResult:
    value: float
    vertex: int
    param: tuple
    r: float
    samples: int


def _annulus(Mh, t_lo, t_hi):
    tol = 1e-12 * max(1.0, abs(t_hi))
    sel = (Mh.r >= t_lo - tol) & (Mh.r <= t_hi + tol) & (Mh.r >= POLE_EXCLUSION)
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise DomainError(f"no mesh vertices with r in [{t_lo:g}, {t_hi:g}]")
    return idx


def critical_point_scan(Mh: MeshedSubmanifold, t_lo: float, t_hi: float) -> ScanResult:
    """Least ``|grad^P r|`` over vertices with ``t_lo <= r <= t_hi``.

    A positive value means no critical point of ``r|_P`` at mesh scale.
    """
    idx = _annulus(Mh, t_lo, t_hi)
    vals = Mh.gradr[idx]
    k = int(np.argmin(vals))
    v = int(idx[k])
    return ScanResult(float(vals[k]), v, tuple(Mh.params[v].tolist()), float(Mh.r[v]), int(idx.size))


def convexity_scan(Mh: MeshedSubmanifold, region, F: Optional[RadialFunction] = None) -> ScanResult:
    """Least eigenvalue of ``Hess^P (F o r)`` over vertices with ``r`` in ``region``."""
    F = F or integrated_warping(Mh.immersion.ambient.warping)
    idx = _annulus(Mh, float(region[0]), float(region[1]))
    I = Mh.immersion
    mins = np.empty(idx.size)
    chunk = 8192
    for s in range(0, idx.size, chunk):
        sub = idx[s : s + chunk]
        geo = vertex_geometry(I, Mh.eval_params[sub])
        H = _restricted_hessian(I, geo, F)
        mins[s : s + chunk] = np.linalg.eigvalsh(H)[:, 0]
    k = int(np.argmin(mins))
    v = int(idx[k])
    return ScanResult(float(mins[k]), v, tuple(Mh.params[v].tolist()), float(Mh.r[v]), int(idx.size))
