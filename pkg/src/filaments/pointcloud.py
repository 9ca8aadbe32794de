from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class PointCloud:
    """``n`` points in R^d plus the column names they came from."""

    points: np.ndarray
    columns: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("point cloud must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("point cloud contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{i}" for i in range(pts.shape[1])))
        elif len(self.columns) != pts.shape[1]:
            raise InvalidInputError("column names do not match point dimension")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def as_points(data) -> np.ndarray:
    """Return the (n, d) float array behind ``data`` (PointCloud or array-like)."""
    if isinstance(data, PointCloud):
        return data.points
    pts = np.asarray(data, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInputError("expected a non-empty (n, d) array of points")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points contain non-finite values")
    return pts
