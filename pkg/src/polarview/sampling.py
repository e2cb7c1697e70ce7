"""Bilinear feature sampling from per-view grids with the zero rule.

Feature grids are (height, width, channels) arrays with cell centers at
integer coordinates; an image pixel (u, v) maps to cell coordinates
(u / stride, v / stride).  Points projecting outside a view, or sampling
outside the grid's cell-center hull, produce an all-zero vector flagged
invalid — invisible views contribute nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import PixelPoint, Rig, project_to_view

__all__ = [
    "FeatureMap",
    "FeatureSample",
    "bilinear_sample",
    "bilinear_sample_many",
    "sample_center_features",
    "context_points",
]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Dense per-view feature grid plus the pixel-to-cell stride."""

    data: np.ndarray
    stride: float = 1.0

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError("FeatureMap: data must be (height, width, channels)")
        if not np.isfinite(data).all():
            raise ValueError("FeatureMap: values must be finite")
        if not self.stride > 0.0:
            raise ValueError("FeatureMap: stride must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class FeatureSample:
    """Sampled feature vector; invalid samples are identically zero."""

    values: np.ndarray
    valid: bool

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not self.valid and np.any(values != 0.0):
            raise ValueError("FeatureSample: invalid samples must be all-zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def bilinear_sample(fmap: FeatureMap, u: float, v: float) -> FeatureSample:
    """Bilinearly blend the 4 cells around image pixel (u, v).

    Out-of-grid points (after stride division) yield a zero, invalid
    sample; non-finite coordinates are treated as out of grid.
    """
    pts = np.array([[u / fmap.stride, v / fmap.stride]], dtype=np.float64)
    vals, valid = _kernels.bilinear_many(fmap.data, pts)
    return FeatureSample(values=vals[0], valid=bool(valid[0]))


def bilinear_sample_many(fmap: FeatureMap, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch :func:`bilinear_sample` over (N, 2) pixel coordinates (hot kernel)."""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    return _kernels.bilinear_many(fmap.data, uv / fmap.stride)


def sample_center_features(center3d, rig: Rig, maps: list[FeatureMap]) -> list[FeatureSample]:
    """Project a 3D center into every view and sample its feature per view.

    Views where the center is invisible produce zero, invalid samples.
    """
    if len(maps) != len(rig):
        raise ValueError("sample_center_features: one feature map per view required")
    out = []
    for k, (cam, fmap) in enumerate(zip(rig.cameras, maps)):
        pix = project_to_view(center3d, cam, view=k)
        if pix is None:
            out.append(FeatureSample(values=np.zeros(fmap.channels), valid=False))
        else:
            out.append(bilinear_sample(fmap, pix.u, pix.v))
    return out


def context_points(center: PixelPoint, offsets) -> list[PixelPoint]:
    """Shift a projected center by pixel offsets (view and depth carry over)."""
    pts = []
    for du, dv in offsets:
        du = float(du)
        dv = float(dv)
        if not (np.isfinite(du) and np.isfinite(dv)):
            raise ValueError("context_points: offsets must be finite")
        pts.append(
            PixelPoint(u=center.u + du, v=center.v + dv, depth=center.depth, view=center.view)
        )
    return pts
