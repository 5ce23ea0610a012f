"""Spherical shadow maps: per-camera min-distance grids over view directions.

A shadow map discretizes the unit sphere around a camera into an
equirectangular azimuth x polar grid (+z pole, +x azimuth origin). Each cell
stores the smallest distance from the camera to any scene point whose angular
footprint covers that cell; untouched cells hold `empty_value` (by default the
camera range, i.e. "no return within range").

Point footprints: a point at distance r with nearest-neighbor distance s is
splatted over an angular radius theta = atan(s / r): every cell whose center
direction lies within angular distance theta of the point's direction takes
the min with r. Candidate cells are enumerated from the circumscribed
polar/azimuth window (polar half-height theta, azimuth half-width
theta / max(sin(beta_cell), sin(polar_cell_height)), full ring when the
window touches a pole) and then kept by the exact angular test; the point's
own cell is always painted. Splats close the gaps between surface samples so
geometry behind a sampled surface reads as occluded.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CameraMismatchError,
    InvalidConfigError,
    ShapeMismatchError,
    ZeroDirectionError,
)
from .pointcloud import PointCloud

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ShadowMapConfig:
    """Grid resolution, effective range, and visibility slack.

    `compensation` (default 3% of range) is added to stored cell values in
    visibility tests so quantization does not hide genuinely visible points.
    `empty_value` (default = range) is what untouched cells report.
    """

    n_azimuth: int = 64
    n_polar: int = 32
    range: float = 4.0
    compensation: float | None = None
    empty_value: float | None = None

    def __post_init__(self):
        if self.n_azimuth < 4 or self.n_polar < 2:
            raise InvalidConfigError("grid must be at least 4 x 2 cells")
        if self.range <= 0:
            raise InvalidConfigError("range must be positive")
        if self.compensation is None:
            object.__setattr__(self, "compensation", 0.03 * self.range)
        if self.compensation < 0:
            raise InvalidConfigError("compensation must be >= 0")
        if self.empty_value is None:
            object.__setattr__(self, "empty_value", self.range)
        if not 0 < self.empty_value <= self.range:
            raise InvalidConfigError("empty_value must be in (0, range]")

    @property
    def cell_count(self) -> int:
        return self.n_azimuth * self.n_polar

    def with_range(self, new_range: float) -> "ShadowMapConfig":
        """Same grid, rescaled range with default compensation/empty_value."""
        return replace(self, range=new_range, compensation=0.03 * new_range, empty_value=new_range)


@dataclass
class ShadowMap:
    """Min-distance grid for one camera; grid[polar_row, azimuth_col]."""

    camera: np.ndarray
    grid: np.ndarray
    config: ShadowMapConfig


@dataclass(frozen=True)
class ViewCone:
    """A camera's viewing cone: forward direction plus half-angles (radians)."""

    camera: np.ndarray
    forward: np.ndarray
    half_angle_h: float
    half_angle_v: float

    def __post_init__(self):
        f = np.asarray(self.forward, dtype=np.float64)
        if abs(np.linalg.norm(f) - 1.0) > 1e-9:
            raise InvalidConfigError("forward must be a unit vector")
        if not (0 < self.half_angle_h < np.pi / 2 and 0 < self.half_angle_v < np.pi / 2):
            raise InvalidConfigError("half-angles must be in (0, pi/2)")
        object.__setattr__(self, "camera", np.asarray(self.camera, dtype=np.float64))
        object.__setattr__(self, "forward", f)


def _angles(camera: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point (r, azimuth in [0, 2*pi), polar in [0, pi]) around the camera."""
    d = points - camera
    r = np.linalg.norm(d, axis=1)
    az = np.arctan2(d[:, 1], d[:, 0]) % TWO_PI
    with np.errstate(invalid="ignore", divide="ignore"):
        pol = np.arccos(np.clip(np.divide(d[:, 2], r, where=r > 0), -1.0, 1.0))
    return r, az, pol


def _cell_indices(az: np.ndarray, pol: np.ndarray, config: ShadowMapConfig):
    da = TWO_PI / config.n_azimuth
    db = np.pi / config.n_polar
    ai = np.minimum((az / da).astype(np.int64), config.n_azimuth - 1)
    bi = np.minimum((pol / db).astype(np.int64), config.n_polar - 1)
    return ai, bi


def direction_to_cell(
    camera: np.ndarray, point: np.ndarray, config: ShadowMapConfig
) -> tuple[int, int]:
    """Cell (azimuth index, polar index) that the camera->point direction hits."""
    camera = np.asarray(camera, dtype=np.float64)
    point = np.asarray(point, dtype=np.float64)
    r, az, pol = _angles(camera, point[None, :])
    if r[0] == 0:
        raise ZeroDirectionError("point coincides with camera")
    ai, bi = _cell_indices(az, pol, config)
    return int(ai[0]), int(bi[0])


def _splat_cells(
    points: np.ndarray,
    nn_dist: np.ndarray,
    camera: np.ndarray,
    config: ShadowMapConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Enumerate every (flat cell, source point) update pair for a splat pass.

    Returns (flat_cells, point_ids, r) where point_ids index into the rows of
    `points` that are in range; r holds per-point camera distances.
    """
    n_az, n_pol = config.n_azimuth, config.n_polar
    da = TWO_PI / n_az
    db = np.pi / n_pol

    r_all, az_all, pol_all = _angles(camera, points)
    keep = (r_all > 0) & (r_all <= config.range)
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64), r_all)
    r, az, pol = r_all[idx], az_all[idx], pol_all[idx]
    ai, bi = _cell_indices(az, pol, config)
    theta = np.arctan(nn_dist[idx] / r)

    # polar rows whose centers fall in [pol - theta, pol + theta]; the own row
    # is unioned in so every point paints at least its own cell
    wlo = np.ceil((pol - theta) / db - 0.5).astype(np.int64)
    whi = np.floor((pol + theta) / db - 0.5).astype(np.int64)
    blo = np.clip(np.minimum(bi, wlo), 0, n_pol - 1)
    bhi = np.clip(np.maximum(bi, whi), 0, n_pol - 1)

    pole = (pol - theta < 0) | (pol + theta > np.pi)
    # circumscribe the disc: azimuth width set by the window row nearest a pole
    sin_rows = np.minimum(np.sin((blo + 0.5) * db), np.sin((bhi + 0.5) * db))
    dalpha = theta / np.maximum(sin_rows, np.sin(db))
    full = pole | (dalpha >= np.pi)

    alo = np.ceil((az - dalpha) / da - 0.5).astype(np.int64)
    ahi = np.floor((az + dalpha) / da - 0.5).astype(np.int64)
    ncols = ahi - alo + 1
    none = ncols <= 0
    alo = np.where(none, ai, alo)
    ncols = np.where(none, 1, ncols)
    alo = np.where(full, 0, alo)
    ncols = np.minimum(np.where(full, n_az, ncols), n_az)

    nrows = bhi - blo + 1
    counts = nrows * ncols
    total = int(counts.sum())
    pid = np.repeat(np.arange(idx.size), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    off = np.arange(total) - np.repeat(starts, counts)
    ncols_r = ncols[pid]
    rows = blo[pid] + off // ncols_r
    cols = (alo[pid] + off % ncols_r) % n_az

    # exact footprint: keep cells whose center is within angular distance
    # theta of the point direction (the window above is just the candidate
    # superset); the point's own cell always stays
    beta_cell = (rows + 0.5) * db
    alpha_cell = (cols + 0.5) * da
    cos_sep = np.cos(beta_cell) * np.cos(pol[pid]) + np.sin(beta_cell) * np.sin(
        pol[pid]
    ) * np.cos(alpha_cell - az[pid])
    sep = np.arccos(np.clip(cos_sep, -1.0, 1.0))
    keep_cell = (sep <= theta[pid]) | ((rows == bi[pid]) & (cols == ai[pid]))
    rows, cols, pid = rows[keep_cell], cols[keep_cell], pid[keep_cell]
    return rows * n_az + cols, idx[pid], r_all


class SplatScatter:
    """Precomputed splat geometry for one (cloud, camera, config) triple.

    Building a map for any subset of the cloud is then a single masked
    min-scatter, which makes per-step depth-error evaluation cheap.
    """

    def __init__(self, cloud: PointCloud, camera: np.ndarray, config: ShadowMapConfig):
        self.camera = np.asarray(camera, dtype=np.float64)
        self.config = config
        cells, pids, r = _splat_cells(cloud.points, cloud.nn_dist, self.camera, config)
        self.cells = cells
        self.point_ids = pids
        self.r = r
        self.n_points = len(cloud)

    def build(self, mask: np.ndarray | None = None) -> ShadowMap:
        """Shadow map over the masked subset (mask=None means all points)."""
        grid = np.full(self.config.cell_count, self.config.empty_value)
        if mask is None:
            cells, pids = self.cells, self.point_ids
        else:
            sel = mask[self.point_ids]
            cells, pids = self.cells[sel], self.point_ids[sel]
        np.minimum.at(grid, cells, self.r[pids])
        return ShadowMap(self.camera, grid.reshape(self.config.n_polar, self.config.n_azimuth), self.config)


def compute_shadow_map(
    cloud: PointCloud,
    camera: np.ndarray,
    config: ShadowMapConfig,
    indices: np.ndarray | None = None,
) -> ShadowMap:
    """Build the omnidirectional shadow map of `cloud` seen from `camera`.

    `indices` restricts the pass to a subset of the cloud while keeping each
    point's footprint size from the full cloud, which preserves pointwise
    subset monotonicity (fewer points can only raise cell values).
    """
    camera = np.asarray(camera, dtype=np.float64)
    pts, nn = cloud.points, cloud.nn_dist
    if indices is not None:
        pts, nn = pts[indices], nn[indices]
    cells, pids, r = _splat_cells(pts, nn, camera, config)
    grid = np.full(config.cell_count, config.empty_value)
    np.minimum.at(grid, cells, r[pids])
    return ShadowMap(camera, grid.reshape(config.n_polar, config.n_azimuth), config)


def cone_contains(cone: ViewCone, points: np.ndarray) -> np.ndarray:
    """Which points fall inside the cone (horizontal/vertical decomposition)."""
    f = cone.forward
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(f, up)
    n = np.linalg.norm(right)
    if n < 1e-9:  # forward parallel to world up
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / n
    up_c = np.cross(right, f)
    d = np.atleast_2d(points) - cone.camera
    z = d @ f
    hx = d @ right
    vy = d @ up_c
    h = np.arctan2(np.abs(hx), z)
    v = np.arctan2(np.abs(vy), z)
    return (h <= cone.half_angle_h) & (v <= cone.half_angle_v)


def compute_shadow_map_cone(
    cloud: PointCloud, cone: ViewCone, config: ShadowMapConfig
) -> ShadowMap:
    """Shadow map restricted to a viewing cone: outside points contribute nothing."""
    inside = cone_contains(cone, cloud.points)
    return compute_shadow_map(cloud, cone.camera, config, indices=np.nonzero(inside)[0])


def visible_mask(sm: ShadowMap, points: np.ndarray) -> np.ndarray:
    """Vectorized visibility: within range and not behind the stored surface."""
    points = np.atleast_2d(points)
    r, az, pol = _angles(sm.camera, points)
    ai, bi = _cell_indices(az, pol, sm.config)
    vals = sm.grid[bi, ai]
    ok = (r <= sm.config.range) & (r <= vals + sm.config.compensation)
    ok |= r == 0  # a point at the camera itself is trivially visible
    return ok


def is_visible(sm: ShadowMap, point: np.ndarray) -> bool:
    """True if `point` is within range and passes the compensated depth test."""
    return bool(visible_mask(sm, np.asarray(point, dtype=np.float64)[None, :])[0])


def shadow_map_abs_diff(a: ShadowMap, b: ShadowMap) -> float:
    """Mean absolute per-cell difference (meters) of two same-shape maps."""
    if a.grid.shape != b.grid.shape:
        raise ShapeMismatchError(f"grid shapes differ: {a.grid.shape} vs {b.grid.shape}")
    if not np.allclose(a.camera, b.camera, atol=1e-9):
        raise CameraMismatchError("maps were built from different camera positions")
    return float(np.abs(a.grid - b.grid).mean())


def write_pgm(sm: ShadowMap, path: str) -> None:
    """16-bit binary PGM; value = round(depth / range * 65535), row = polar."""
    scaled = np.round(sm.grid / sm.config.range * 65535.0)
    data = np.clip(scaled, 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{sm.config.n_azimuth} {sm.config.n_polar}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def write_csv(sm: ShadowMap, path: str) -> None:
    """Row-major CSV (meters, 6 decimals), one polar row per line."""
    np.savetxt(path, sm.grid, fmt="%.6f", delimiter=",")
