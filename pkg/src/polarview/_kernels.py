"""Hot numeric kernels with a numba-jitted path and a pure-numpy fallback.

The active backend is chosen once at import time: numba when importable,
unless the environment variable ``POLARVIEW_NUMBA`` is set to ``0``,
``false`` or ``no``.  Both implementations are always importable under
their ``*_numpy`` / ``*_numba`` names so tests and benchmarks can compare
them directly (``benchmarks/bench_kernels.py``).

All kernels take and return float64 arrays.  Layout conventions:
  * box encodings / decoded boxes: (N, 9) rows ordered
    (r, sin_a, cos_a, z, l, w, h, sin_t, cos_t) after decoding, matching
    the raw pre-activation order before it;
  * polar cost inputs: (M, 3) / (N, 3) rows of (r, sin_a, cos_a);
  * feature grids: (H, W, C) with sample points as (x, y) cell coords;
  * planar points: (N, 2).
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numba_requested() -> bool:
    return os.environ.get("POLARVIEW_NUMBA", "1").strip().lower() not in (
        "0",
        "false",
        "no",
    )


# ---------------------------------------------------------------------------
# pure numpy implementations (fallback path and vectorized reference)
# ---------------------------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow-free split form
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def decode_boxes_numpy(enc: np.ndarray, r_max: float, z_min: float, z_max: float) -> np.ndarray:
    enc = np.ascontiguousarray(enc, dtype=np.float64)
    out = np.empty_like(enc)
    out[:, 0] = _sigmoid(enc[:, 0]) * r_max
    out[:, 3] = _sigmoid(enc[:, 3]) * (z_max - z_min) + z_min
    na = np.hypot(enc[:, 1], enc[:, 2])
    out[:, 1] = enc[:, 1] / na
    out[:, 2] = enc[:, 2] / na
    out[:, 4:7] = np.exp(enc[:, 4:7])
    nt = np.hypot(enc[:, 7], enc[:, 8])
    out[:, 7] = enc[:, 7] / nt
    out[:, 8] = enc[:, 8] / nt
    return out


def polar_cost_matrix_numpy(gt: np.ndarray, pred: np.ndarray, k_scaling: float) -> np.ndarray:
    gt = np.ascontiguousarray(gt, dtype=np.float64)
    pred = np.ascontiguousarray(pred, dtype=np.float64)
    dr = np.abs(gt[:, 0:1] - pred[None, :, 0])
    ds = np.abs(gt[:, 1:2] - pred[None, :, 1])
    dc = np.abs(gt[:, 2:3] - pred[None, :, 2])
    return dr + k_scaling * (ds + dc)


def bilinear_many_numpy(grid: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample (x, y) cell coordinates from an (H, W, C) grid.

    Cell centers sit at integer coordinates; points outside the center
    hull [0, W-1] x [0, H-1] (or non-finite) come back zero and invalid.
    """
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    h, w, _ = grid.shape
    x = points[:, 0]
    y = points[:, 1]
    valid = (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)

    xs = np.where(valid, x, 0.0)
    ys = np.where(valid, y, 0.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]

    vals = (
        grid[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + grid[y0, x1] * fx * (1.0 - fy)
        + grid[y1, x0] * (1.0 - fx) * fy
        + grid[y1, x1] * fx * fy
    )
    vals[~valid] = 0.0
    return vals, valid


def pairwise_distances_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return np.hypot(a[:, 0:1] - b[None, :, 0], a[:, 1:2] - b[None, :, 1])


# ---------------------------------------------------------------------------
# numba loop implementations
# ---------------------------------------------------------------------------


def _decode_boxes_loop(enc, r_max, z_min, z_max):  # pragma: no cover - jitted
    n = enc.shape[0]
    out = np.empty((n, 9), dtype=np.float64)
    z_span = z_max - z_min
    for i in range(n):
        br = enc[i, 0]
        if br >= 0.0:
            sr = 1.0 / (1.0 + math.exp(-br))
        else:
            e = math.exp(br)
            sr = e / (1.0 + e)
        out[i, 0] = sr * r_max
        bz = enc[i, 3]
        if bz >= 0.0:
            sz = 1.0 / (1.0 + math.exp(-bz))
        else:
            e = math.exp(bz)
            sz = e / (1.0 + e)
        out[i, 3] = sz * z_span + z_min
        na = math.hypot(enc[i, 1], enc[i, 2])
        out[i, 1] = enc[i, 1] / na
        out[i, 2] = enc[i, 2] / na
        out[i, 4] = math.exp(enc[i, 4])
        out[i, 5] = math.exp(enc[i, 5])
        out[i, 6] = math.exp(enc[i, 6])
        nt = math.hypot(enc[i, 7], enc[i, 8])
        out[i, 7] = enc[i, 7] / nt
        out[i, 8] = enc[i, 8] / nt
    return out


def _polar_cost_matrix_loop(gt, pred, k_scaling):  # pragma: no cover - jitted
    m = gt.shape[0]
    n = pred.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    for j in range(m):
        for i in range(n):
            out[j, i] = abs(gt[j, 0] - pred[i, 0]) + k_scaling * (
                abs(gt[j, 1] - pred[i, 1]) + abs(gt[j, 2] - pred[i, 2])
            )
    return out


def _bilinear_many_loop(grid, points):  # pragma: no cover - jitted
    h, w, c = grid.shape
    n = points.shape[0]
    vals = np.zeros((n, c), dtype=np.float64)
    valid = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        x = points[i, 0]
        y = points[i, 1]
        if not (x >= 0.0 and x <= w - 1.0 and y >= 0.0 and y <= h - 1.0):
            continue
        valid[i] = True
        x0 = int(math.floor(x))
        y0 = int(math.floor(y))
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        for ch in range(c):
            vals[i, ch] = (
                grid[y0, x0, ch] * (1.0 - fx) * (1.0 - fy)
                + grid[y0, x1, ch] * fx * (1.0 - fy)
                + grid[y1, x0, ch] * (1.0 - fx) * fy
                + grid[y1, x1, ch] * fx * fy
            )
    return vals, valid


def _pairwise_distances_loop(a, b):  # pragma: no cover - jitted
    m = a.shape[0]
    n = b.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            out[i, j] = math.hypot(a[i, 0] - b[j, 0], a[i, 1] - b[j, 1])
    return out


def _as_float2d(fn):
    """Coerce array args so the jitted loops always see contiguous float64."""

    def wrapper(*args):
        coerced = tuple(
            np.ascontiguousarray(a, dtype=np.float64) if isinstance(a, np.ndarray) or hasattr(a, "__len__") else a
            for a in args
        )
        return fn(*coerced)

    return wrapper


decode_boxes_numba = None
polar_cost_matrix_numba = None
bilinear_many_numba = None
pairwise_distances_numba = None

try:
    from numba import njit

    HAS_NUMBA = True
    decode_boxes_numba = _as_float2d(njit(cache=True)(_decode_boxes_loop))
    polar_cost_matrix_numba = _as_float2d(njit(cache=True)(_polar_cost_matrix_loop))
    bilinear_many_numba = _as_float2d(njit(cache=True)(_bilinear_many_loop))
    pairwise_distances_numba = _as_float2d(njit(cache=True)(_pairwise_distances_loop))
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

USING_NUMBA = HAS_NUMBA and _numba_requested()

if USING_NUMBA:
    decode_boxes = decode_boxes_numba
    polar_cost_matrix = polar_cost_matrix_numba
    bilinear_many = bilinear_many_numba
    pairwise_distances = pairwise_distances_numba
else:
    decode_boxes = decode_boxes_numpy
    polar_cost_matrix = polar_cost_matrix_numpy
    bilinear_many = bilinear_many_numpy
    pairwise_distances = pairwise_distances_numpy


def backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USING_NUMBA else "numpy"


def warmup() -> None:
    """Trigger JIT compilation of every kernel with tiny inputs."""
    enc = np.zeros((1, 9))
    enc[0, 2] = enc[0, 8] = 1.0  # angle pairs must not be (0, 0)
    decode_boxes(enc, 50.0, -5.0, 3.0)
    rsc = np.array([[10.0, 0.0, 1.0]])
    polar_cost_matrix(rsc, rsc, 20.0)
    bilinear_many(np.zeros((2, 2, 1)), np.array([[0.5, 0.5]]))
    pairwise_distances(np.zeros((1, 2)), np.zeros((1, 2)))
