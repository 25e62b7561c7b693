import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pushgrasp import kernels
from pushgrasp.kernels import compiled_backend, python_backend

needs_compiled = pytest.mark.skipif(compiled_backend is None, reason="compiled extension not built")
finite = st.floats(-0.1, 0.74, allow_nan=False)


def convex(rng):
    """Random convex CCW polygon: sorted angles on a jittered ellipse."""
    n = int(rng.integers(3, 7))
    a = np.sort(rng.uniform(0, 2 * math.pi, n))
    rx, ry = rng.uniform(0.005, 0.05, 2)
    cx, cy = rng.uniform(-0.05, 0.7, 2)
    return np.column_stack([cx + rx * np.cos(a), cy + ry * np.sin(a)])


@needs_compiled
def test_polygon_bit_identical():
    rng = np.random.default_rng(0)
    for _ in range(500):
        v = convex(rng)
        a = python_backend.raster_polygon(v, 0.0, 0.0, 0.01, 64, 64)
        b = compiled_backend.raster_polygon(v, 0.0, 0.0, 0.01, 64, 64)
        assert a.dtype == b.dtype and np.array_equal(a, b)


@needs_compiled
@given(finite, finite, st.floats(0.0, 0.1))
def test_disc_bit_identical(cx, cy, r):
    a = python_backend.raster_disc(cx, cy, r, 0.0, 0.0, 0.01, 64, 64)
    b = compiled_backend.raster_disc(cx, cy, r, 0.0, 0.0, 0.01, 64, 64)
    assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("k", range(16))
def test_rotate_bit_identical(k):
    img = np.random.default_rng(k).random((3, 32, 32))
    a = k * math.pi / 8
    c, s = math.cos(a), math.sin(a)
    x = python_backend.rotate_bilinear(img, c, s)
    y = compiled_backend.rotate_bilinear(img, c, s)
    assert x.tobytes() == y.tobytes()


def test_polygon_matches_half_plane_definition():
    # cell centers inside the triangle, checked point by point
    v = np.array([[0.1, 0.1], [0.3, 0.12], [0.15, 0.35]])
    m = kernels.raster_polygon(v, 0.0, 0.0, 0.01, 64, 64)
    for r in range(64):
        for c in range(64):
            px, py = (c + 0.5) * 0.01, (r + 0.5) * 0.01
            inside = all((v[(i + 1) % 3][0] - v[i][0]) * (py - v[i][1])
                         - (v[(i + 1) % 3][1] - v[i][1]) * (px - v[i][0]) >= 0 for i in range(3))
            assert bool(m[r, c]) == inside


def test_fallback_selected_by_environment():
    code = "from pushgrasp import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, PUSHGRASP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == ("compiled" if compiled_backend is not None
                               and os.environ.get("PUSHGRASP_PURE_PYTHON") != "1" else "python")
