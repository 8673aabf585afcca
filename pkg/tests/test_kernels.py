import itertools
import os
import subprocess
import sys
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warplab import _kernels_py, kernels

needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")


def linear_level_fraction(f, t):
    """Volume fraction of ``{f < t}`` in a simplex for affine ``f`` with distinct vertex values."""
    m = len(f) - 1
    total = 0.0
    for i, fi in enumerate(f):
        if t > fi:
            den = np.prod([fj - fi for j, fj in enumerate(f) if j != i])
            total += (t - fi) ** m / den
    return total


def bfs_components(simplices, r, t):
    keep = [s for s in simplices.tolist() if min(r[v] for v in s) >= t]
    by_vertex = {}
    for k, s in enumerate(keep):
        for v in s:
            by_vertex.setdefault(v, []).append(k)
    seen = [False] * len(keep)
    count = 0
    for start in range(len(keep)):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            k = queue.popleft()
            for v in keep[k]:
                for nb in by_vertex[v]:
                    if not seen[nb]:
                        seen[nb] = True
                        queue.append(nb)
    return count


def grid_triangles(nx, ny):
    idx = np.arange(nx * ny).reshape(nx, ny)
    a, b, c, d = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
    return np.concatenate([np.stack([a, b, d], 1), np.stack([a, c, d], 1)])


def cube_tets(n):
    """Kuhn split of an ``n^3`` lattice into tetrahedra."""
    pts = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), -1).reshape(-1, 3)
    idx = np.arange(n**3).reshape(n, n, n)
    out = []
    base = np.stack(np.meshgrid(*[np.arange(n - 1)] * 3, indexing="ij"), -1).reshape(-1, 3)
    for perm in itertools.permutations(range(3)):
        cur = base.copy()
        verts = [idx[tuple(cur.T)]]
        for ax in perm:
            cur = cur.copy()
            cur[:, ax] += 1
            verts.append(idx[tuple(cur.T)])
        out.append(np.stack(verts, 1))
    return pts, np.concatenate(out)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.compiled_backend is not None:
        assert kernels.BACKEND == "cython"


def test_pure_python_env_switch():
    env = dict(os.environ, WARPLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from warplab import kernels; print(kernels.BACKEND)"], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_triangle_fraction_oracle(backend):
    k = _kernels_py if backend == "python" else kernels.compiled_backend
    if k is None:
        pytest.skip("compiled extension not built")
    S = np.array([[0, 1, 2]])
    r = np.array([0.3, 1.1, 2.0])
    for t in (0.5, 1.0, 1.5, 1.9):
        cut, frac, fs, fa, fb, fl = k.clip_level(S, r, t)
        assert list(cut) == [0]
        assert frac[0] == pytest.approx(linear_level_fraction(r, t), rel=1e-12)
        assert len(fs) == 1
        np.testing.assert_allclose(r[fa] + fl * (r[fb] - r[fa]), t, rtol=1e-12)


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_tet_fraction_oracle(backend):
    k = _kernels_py if backend == "python" else kernels.compiled_backend
    if k is None:
        pytest.skip("compiled extension not built")
    S = np.array([[0, 1, 2, 3]])
    r = np.array([0.1, 0.7, 1.3, 2.2])
    for t in (0.4, 1.0, 1.2, 1.8):
        cut, frac, fs, fa, fb, fl = k.clip_level(S, r, t)
        assert frac[0] == pytest.approx(linear_level_fraction(r, t), rel=1e-12)
        n_in = int((r < t).sum())
        assert len(fs) == (2 if n_in == 2 else 1)
        np.testing.assert_allclose(r[fa] + fl * (r[fb] - r[fa]), t, rtol=1e-12)


def test_clip_rejects_other_dimensions():
    with pytest.raises(NotImplementedError):
        _kernels_py.clip_level(np.array([[0, 1]]), np.array([0.0, 1.0]), 0.5)


def test_uncut_simplices_not_reported():
    S = np.array([[0, 1, 2], [1, 2, 3]])
    r = np.array([0.0, 0.1, 0.2, 5.0])
    cut, frac, *_ = _kernels_py.clip_level(S, r, 1.0)
    assert list(cut) == [1]


@needs_compiled
def test_backends_identical_on_meshes(catenoid_mesh):
    Mh = catenoid_mesh
    radii = np.linspace(1.2, 20.0, 25)
    for t in radii[::6]:
        a = _kernels_py.clip_level(Mh.simplices, Mh.r, t)
        b = kernels.compiled_backend.clip_level(Mh.simplices, Mh.r, t)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(np.asarray(x), np.asarray(y))
    np.testing.assert_array_equal(
        _kernels_py.complement_counts(Mh.simplices, Mh.r, radii), kernels.compiled_backend.complement_counts(Mh.simplices, Mh.r, radii)
    )


@needs_compiled
def test_backends_identical_on_tets():
    rng = np.random.default_rng(7)
    pts, T = cube_tets(7)
    r = np.linalg.norm(pts - 3.1, axis=1) + 1e-3 * rng.random(len(pts))
    for t in (1.0, 2.5, 4.0):
        a = _kernels_py.clip_level(T, r, t)
        b = kernels.compiled_backend.clip_level(T, r, t)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(np.asarray(x), np.asarray(y))
    radii = np.linspace(0.5, 5, 10)
    np.testing.assert_array_equal(_kernels_py.complement_counts(T, r, radii), kernels.compiled_backend.complement_counts(T, r, radii))


def test_union_find_matches_bfs_on_catenoid(catenoid_mesh):
    Mh = catenoid_mesh
    sel = np.flatnonzero(np.abs(Mh.params[Mh.simplices].mean(axis=1)[:, 0]) < 2.0)[:10000]
    S = Mh.simplices[sel]
    radii = np.array([1.0, 1.5, 2.5, 3.5])
    counts = kernels.complement_counts(S, Mh.r, radii)
    assert list(counts) == [bfs_components(S, Mh.r, t) for t in radii]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(3, 12))
def test_union_find_matches_bfs_random(seed, n):
    rng = np.random.default_rng(seed)
    S = grid_triangles(n, n)
    r = rng.random(n * n) * 3
    radii = np.sort(rng.choice(np.linspace(0.05, 3.0, 60), size=5, replace=False))
    counts = kernels.complement_counts(S, r, radii)
    assert list(counts) == [bfs_components(S, r, t) for t in radii]


@settings(max_examples=60, deadline=None)
@given(f=st.lists(st.floats(-5, 5), min_size=3, max_size=4, unique=True), s=st.floats(0.0, 1.0))
def test_clip_fraction_closed_form(f, s):
    f = np.array(f)
    if np.min(np.abs(np.subtract.outer(f, f)) + np.eye(len(f))) < 1e-3:
        return
    t = f.min() + s * (f.max() - f.min())
    cut, frac, *_ = kernels.clip_level(np.arange(len(f))[None, :], f, t)
    expected = linear_level_fraction(f, t)
    if len(cut):
        assert frac[0] == pytest.approx(expected, abs=1e-9)
        assert 0.0 <= frac[0] <= 1.0
    else:
        assert expected in (0.0, pytest.approx(1.0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_clipped_volume_monotone_in_level(seed):
    rng = np.random.default_rng(seed)
    S = grid_triangles(8, 8)
    r = rng.random(64)
    prev = -1.0
    for t in np.linspace(0.0, 1.01, 15):
        cut, frac, *_ = kernels.clip_level(S, r, t)
        inside = np.all(r[S] < t, axis=1).sum()
        vol = inside + float(np.sum(frac))
        assert vol >= prev - 1e-12
        prev = vol
    assert prev == pytest.approx(len(S))


def test_counts_are_order_independent():
    S = grid_triangles(10, 10)
    rng = np.random.default_rng(3)
    r = rng.random(100)
    radii = np.array([0.2, 0.5, 0.8])
    a = kernels.complement_counts(S, r, radii)
    b = kernels.complement_counts(S[::-1].copy(), r, radii[::-1].copy())[::-1]
    np.testing.assert_array_equal(a, b)
