"""Scene point clouds: loading, synthesis, and geometric utilities.

Clouds are treated as immutable after construction; every function here
returns new values instead of mutating inputs. All coordinates are meters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptyCloudError,
    InvalidCenterIndexError,
    InvalidDimensionError,
    KOutOfRangeError,
    SceneIoError,
    SceneParseError,
    SinglePointCloudError,
)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box (closed on both ends)."""

    min: np.ndarray
    max: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains_xy(self, xy: np.ndarray) -> np.ndarray:
        """Boolean mask: which (n, 2) positions fall inside the footprint."""
        xy = np.atleast_2d(xy)
        return (
            (xy[:, 0] >= self.min[0])
            & (xy[:, 0] <= self.max[0])
            & (xy[:, 1] >= self.min[1])
            & (xy[:, 1] <= self.max[1])
        )


class PointCloud:
    """A scene point cloud with optional colors and cached geometry.

    `nn_dist` (per-point distance to the nearest other point) is computed
    lazily on first access and cached; it is the quantity that sizes the
    angular footprint of a point in a shadow map.
    """

    def __init__(
        self,
        points: np.ndarray,
        colors: np.ndarray | None = None,
        nn_dist: np.ndarray | None = None,
        dedup_count: int = 0,
    ):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise SceneParseError(f"points must be (n, 3), got {points.shape}")
        if len(points) == 0:
            raise EmptyCloudError("point cloud is empty")
        points = points.copy()
        points.setflags(write=False)
        self.points = points
        if colors is not None:
            colors = np.asarray(colors, dtype=np.uint8).copy()
            colors.setflags(write=False)
        self.colors = colors
        self._nn_dist = None if nn_dist is None else np.asarray(nn_dist, dtype=np.float64)
        self.dedup_count = int(dedup_count)
        self.bbox = Aabb(points.min(axis=0), points.max(axis=0))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def nn_dist(self) -> np.ndarray:
        if self._nn_dist is None:
            self._nn_dist = nearest_neighbor_distances(self)
        return self._nn_dist

    @classmethod
    def from_points(
        cls, points: np.ndarray, colors: np.ndarray | None = None
    ) -> "PointCloud":
        """Build a cloud, collapsing exact duplicate positions to one point.

        Keeps the first occurrence of each position (original order), so the
        result is deterministic. The number of dropped points is recorded in
        `dedup_count`.
        """
        points = np.asarray(points, dtype=np.float64)
        if points.size == 0:
            raise EmptyCloudError("point cloud is empty")
        _, first = np.unique(points, axis=0, return_index=True)
        keep = np.sort(first)
        dropped = len(points) - len(keep)
        kept_colors = None
        if colors is not None and len(colors) == len(points):
            kept_colors = np.asarray(colors)[keep]
        return cls(points[keep], kept_colors, dedup_count=dropped)


def nearest_neighbor_distances(cloud: PointCloud) -> np.ndarray:
    """Distance from each point to its nearest other point.

    Exact (kd-tree, k=2 query); matches the brute-force all-pairs minimum.
    """
    if len(cloud) < 2:
        raise SinglePointCloudError("need at least 2 points for neighbor distances")
    dist, _ = cKDTree(cloud.points).query(cloud.points, k=2)
    return dist[:, 1]


def rotate_scene(cloud: PointCloud, angle_deg: float) -> PointCloud:
    """Rotate the cloud about the vertical axis through its bbox center.

    Neighbor distances are preserved value-for-value (rigid motion); the
    bounding box is recomputed for the rotated positions.
    """
    ang = np.deg2rad(angle_deg)
    c, s = np.cos(ang), np.sin(ang)
    center = cloud.bbox.center
    pts = cloud.points - center
    rotated = np.empty_like(pts)
    rotated[:, 0] = c * pts[:, 0] - s * pts[:, 1]
    rotated[:, 1] = s * pts[:, 0] + c * pts[:, 1]
    rotated[:, 2] = pts[:, 2]
    rotated += center
    nn = cloud._nn_dist.copy() if cloud._nn_dist is not None else None
    return PointCloud(rotated, cloud.colors, nn_dist=nn, dedup_count=cloud.dedup_count)


def farthest_point_sample_points(points: np.ndarray, k: int, start: int) -> np.ndarray:
    """Greedy farthest-point sampling over a raw (n, 3) array.

    The first index is `start`; each following pick maximizes the minimum
    distance to the already-selected set, ties resolved to the lowest index.
    """
    n = len(points)
    out = np.empty(k, dtype=np.int64)
    out[0] = start
    dist = np.linalg.norm(points - points[start], axis=1)
    for i in range(1, k):
        pick = int(np.argmax(dist))  # argmax returns the first (lowest) index on ties
        out[i] = pick
        np.minimum(dist, np.linalg.norm(points - points[pick], axis=1), out=dist)
    return out


def farthest_point_sample(cloud: PointCloud, k: int, seed: int) -> np.ndarray:
    """Farthest-point sampling of `k` point indices, seeded start."""
    n = len(cloud)
    if not 1 <= k <= n:
        raise KOutOfRangeError(f"k={k} out of range for {n} points")
    start = int(np.random.default_rng(seed).integers(n))
    return farthest_point_sample_points(cloud.points, k, start)


def group_neighbors(cloud: PointCloud, centers: np.ndarray, g: int) -> np.ndarray:
    """For each center index, the `g` nearest point indices (center included).

    Rows are sorted by distance, ties broken by lower index. When the cloud
    has fewer than `g` points, rows are padded by repeating the nearest index.
    """
    if g < 1:
        raise KOutOfRangeError(f"group size must be >= 1, got {g}")
    centers = np.asarray(centers, dtype=np.int64)
    n = len(cloud)
    if centers.size and (centers.min() < 0 or centers.max() >= n):
        raise InvalidCenterIndexError("center index out of range")
    pts = cloud.points
    d = np.linalg.norm(pts[centers][:, None, :] - pts[None, :, :], axis=2)
    take = min(g, n)
    order = np.lexsort((np.broadcast_to(np.arange(n), d.shape), d), axis=1)
    rows = order[:, :take]
    if take < g:
        pad = np.repeat(rows[:, :1], g - take, axis=1)
        rows = np.concatenate([rows, pad], axis=1)
    return rows


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Keep the first point of each occupied voxel (deterministic)."""
    if voxel_size <= 0:
        raise InvalidDimensionError("voxel size must be positive")
    cells = np.floor((cloud.points - cloud.bbox.min) / voxel_size).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    keep = np.sort(first)
    colors = cloud.colors[keep] if cloud.colors is not None else None
    return PointCloud(cloud.points[keep], colors)


# ---------------------------------------------------------------------------
# Loading / writing
# ---------------------------------------------------------------------------

_PLY_SIZES = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def _parse_ply(data: bytes, path: str) -> tuple[np.ndarray, np.ndarray | None]:
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise SceneParseError(f"{path}: not a PLY file")
    header_end = data.index(b"\n", end) + 1
    header = data[:header_end].decode("ascii", errors="replace")

    fmt = None
    n_vertices = None
    props: list[tuple[str, str]] = []  # (type, name), vertex element only
    in_vertex = False
    for lineno, line in enumerate(header.splitlines(), start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertices = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise SceneParseError(f"{path}:{lineno}: list property on vertices unsupported")
            props.append((tok[1], tok[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise SceneParseError(f"{path}: unsupported PLY format {fmt!r}")
    if n_vertices is None:
        raise SceneParseError(f"{path}: PLY header has no vertex element")
    names = [name for _, name in props]
    try:
        ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
    except ValueError:
        raise SceneParseError(f"{path}: PLY vertices lack x/y/z properties") from None
    has_rgb = all(c in names for c in ("red", "green", "blue"))

    if fmt == "ascii":
        text = data[header_end:].decode("ascii", errors="replace").splitlines()
        rows = []
        colors = [] if has_rgb else None
        header_lines = header.count("\n")
        for i in range(n_vertices):
            if i >= len(text):
                raise SceneParseError(f"{path}: expected {n_vertices} vertices, file ends at {i}")
            tok = text[i].split()
            if len(tok) < len(props):
                raise SceneParseError(
                    f"{path}:{header_lines + i + 1}: vertex row has {len(tok)} fields, expected {len(props)}"
                )
            try:
                rows.append((float(tok[ix]), float(tok[iy]), float(tok[iz])))
                if has_rgb:
                    ir, ig, ib = names.index("red"), names.index("green"), names.index("blue")
                    colors.append((int(float(tok[ir])), int(float(tok[ig])), int(float(tok[ib]))))
            except ValueError as exc:
                raise SceneParseError(f"{path}:{header_lines + i + 1}: {exc}") from None
        pts = np.array(rows, dtype=np.float64)
        cols = np.array(colors, dtype=np.uint8) if has_rgb else None
        return pts, cols

    # binary little-endian: fixed stride per vertex
    fmt_chars = []
    for typ, _ in props:
        if typ not in _PLY_SIZES:
            raise SceneParseError(f"{path}: unknown PLY property type {typ!r}")
        fmt_chars.append(_PLY_SIZES[typ])
    stride = struct.calcsize("<" + "".join(fmt_chars))
    need = header_end + stride * n_vertices
    if len(data) < need:
        raise SceneParseError(
            f"{path}: binary payload truncated at byte {len(data)}, expected {need}"
        )
    dtype = np.dtype([(f"f{i}", "<" + c) for i, c in enumerate(fmt_chars)])
    raw = np.frombuffer(data, dtype=dtype, count=n_vertices, offset=header_end)
    pts = np.stack(
        [raw[f"f{ix}"], raw[f"f{iy}"], raw[f"f{iz}"]], axis=1
    ).astype(np.float64)
    cols = None
    if has_rgb:
        ir, ig, ib = names.index("red"), names.index("green"), names.index("blue")
        cols = np.stack([raw[f"f{ir}"], raw[f"f{ig}"], raw[f"f{ib}"]], axis=1).astype(np.uint8)
    return pts, cols


def _parse_xyz_text(data: bytes, path: str) -> tuple[np.ndarray, np.ndarray | None]:
    rows = []
    colors = []
    ncols = None
    for lineno, line in enumerate(data.decode("utf-8", errors="replace").splitlines(), 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if ncols is None:
            ncols = 6 if len(tok) >= 6 else 3
        if len(tok) < ncols:
            raise SceneParseError(f"{path}:{lineno}: expected >= {ncols} columns, got {len(tok)}")
        try:
            rows.append((float(tok[0]), float(tok[1]), float(tok[2])))
            if ncols == 6:
                colors.append((int(float(tok[3])), int(float(tok[4])), int(float(tok[5]))))
        except ValueError as exc:
            raise SceneParseError(f"{path}:{lineno}: {exc}") from None
    pts = np.array(rows, dtype=np.float64) if rows else np.empty((0, 3))
    cols = np.array(colors, dtype=np.uint8) if colors else None
    return pts, cols


def load_point_cloud(
    path: str, format: str = "auto", voxel_size: float | None = None
) -> PointCloud:
    """Load a scene cloud from PLY (ascii / binary LE) or whitespace xyz text.

    Text rows are "x y z" or "x y z r g b"; extra columns are ignored. Exact
    duplicate positions are collapsed (see PointCloud.from_points). Pass
    `voxel_size` to voxel-downsample right after loading.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise SceneIoError(f"{path}: {exc}") from None
    if format == "auto":
        format = "ply" if data.startswith(b"ply") else "xyz"
    if format == "ply":
        pts, cols = _parse_ply(data, path)
    elif format in ("xyz", "xyz_rgb_text"):
        pts, cols = _parse_xyz_text(data, path)
    else:
        raise SceneParseError(f"unknown format {format!r}")
    if len(pts) == 0:
        raise EmptyCloudError(f"{path}: no points")
    cloud = PointCloud.from_points(pts, cols)
    if voxel_size is not None:
        cloud = voxel_downsample(cloud, voxel_size)
    return cloud


def write_point_cloud(cloud: PointCloud, path: str, format: str = "ply_ascii") -> None:
    """Write a cloud as ascii PLY, binary little-endian PLY, or xyz text."""
    pts = cloud.points
    cols = cloud.colors
    if format == "xyz":
        with open(path, "w") as fh:
            for i, p in enumerate(pts):
                row = f"{p[0]:.8f} {p[1]:.8f} {p[2]:.8f}"
                if cols is not None:
                    row += f" {cols[i][0]} {cols[i][1]} {cols[i][2]}"
                fh.write(row + "\n")
        return
    if format not in ("ply_ascii", "ply_binary"):
        raise SceneParseError(f"unknown format {format!r}")
    binary = format == "ply_binary"
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0"]
    header += [f"element vertex {len(pts)}"]
    header += ["property double x", "property double y", "property double z"]
    if cols is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += ["end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            for i, p in enumerate(pts):
                fh.write(struct.pack("<ddd", *p))
                if cols is not None:
                    fh.write(struct.pack("<BBB", *cols[i]))
        else:
            for i, p in enumerate(pts):
                row = f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}"
                if cols is not None:
                    row += f" {cols[i][0]} {cols[i][1]} {cols[i][2]}"
                fh.write((row + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


def _face_grid(
    origin: np.ndarray,
    u_dir: np.ndarray,
    v_dir: np.ndarray,
    u_len: float,
    v_len: float,
    spacing: float,
    rng: np.random.Generator | None,
    jitter: float,
) -> np.ndarray:
    """Sample a planar rectangle on a centered grid with ~`spacing` pitch.

    Points sit at cell centers so adjacent faces never share positions.
    Jitter, when enabled, moves points only within the face plane.
    """
    nu = max(1, round(u_len / spacing))
    nv = max(1, round(v_len / spacing))
    su, sv = u_len / nu, v_len / nv
    uu = (np.arange(nu) + 0.5) * su
    vv = (np.arange(nv) + 0.5) * sv
    gu, gv = np.meshgrid(uu, vv, indexing="ij")
    gu = gu.ravel()
    gv = gv.ravel()
    if jitter > 0 and rng is not None:
        gu = gu + rng.uniform(-jitter, jitter, size=gu.shape)
        gv = gv + rng.uniform(-jitter, jitter, size=gv.shape)
    return origin[None, :] + gu[:, None] * u_dir[None, :] + gv[:, None] * v_dir[None, :]


_EX = np.array([1.0, 0.0, 0.0])
_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


def generate_synthetic_scene(
    kind: str,
    dims: tuple[float, float, float],
    spacing: float,
    seed: int = 0,
    jitter: float = 0.0,
) -> PointCloud:
    """Generate a watertight room-scale scene (closed walls + ceiling + floor).

    Kinds:
      box_room          a single rectangular room
      two_room_doorway  two rooms split by an interior wall with a door opening
      l_shape           an L-shaped room (the +x/+y quarter removed)

    `dims` is (width x, depth y, height z) in meters; points are sampled on
    every surface at roughly `spacing` pitch. `jitter` (meters, in-plane,
    at most spacing/4) roughens the sampling; seed makes it reproducible.
    """
    w, d, h = (float(v) for v in dims)
    if min(w, d, h) <= 0:
        raise InvalidDimensionError(f"dimensions must be positive, got {dims}")
    if spacing <= 0:
        raise InvalidDimensionError(f"spacing must be positive, got {spacing}")
    if jitter < 0 or jitter > spacing / 4:
        raise InvalidDimensionError(f"jitter must be within [0, spacing/4], got {jitter}")
    rng = np.random.default_rng(seed) if jitter > 0 else None
    o = np.zeros(3)
    faces: list[np.ndarray] = []

    def rect(origin, u_dir, v_dir, u_len, v_len):
        faces.append(_face_grid(np.asarray(origin, float), u_dir, v_dir, u_len, v_len, spacing, rng, jitter))

    if kind == "box_room":
        rect(o, _EX, _EY, w, d)                        # floor z=0
        rect([0, 0, h], _EX, _EY, w, d)                # ceiling z=h
        rect(o, _EX, _EZ, w, h)                        # wall y=0
        rect([0, d, 0], _EX, _EZ, w, h)                # wall y=d
        rect(o, _EY, _EZ, d, h)                        # wall x=0
        rect([w, 0, 0], _EY, _EZ, d, h)                # wall x=w
    elif kind == "two_room_doorway":
        rect(o, _EX, _EY, w, d)
        rect([0, 0, h], _EX, _EY, w, d)
        rect(o, _EX, _EZ, w, h)
        rect([0, d, 0], _EX, _EZ, w, h)
        rect(o, _EY, _EZ, d, h)
        rect([w, 0, 0], _EY, _EZ, d, h)
        # interior wall at x = w/2 with a doorway opening centered in y
        door_w = min(0.9, 0.5 * d)
        door_h = min(2.0, 0.8 * h)
        wall = _face_grid(np.array([w / 2, 0, 0]), _EY, _EZ, d, h, spacing, rng, jitter)
        in_door = (np.abs(wall[:, 1] - d / 2) < door_w / 2) & (wall[:, 2] < door_h)
        faces.append(wall[~in_door])
    elif kind == "l_shape":
        # footprint: [0,w]x[0,d] minus the open quarter [w/2,w]x[d/2,d]
        def in_cut(p):
            return (p[:, 0] > w / 2) & (p[:, 1] > d / 2)

        floor = _face_grid(o, _EX, _EY, w, d, spacing, rng, jitter)
        faces.append(floor[~in_cut(floor)])
        ceil = _face_grid(np.array([0, 0, h]), _EX, _EY, w, d, spacing, rng, jitter)
        faces.append(ceil[~in_cut(ceil)])
        rect(o, _EX, _EZ, w, h)                        # y=0, full width
        rect(o, _EY, _EZ, d, h)                        # x=0, full depth
        rect([w, 0, 0], _EY, _EZ, d / 2, h)            # x=w, lower half
        rect([0, d, 0], _EX, _EZ, w / 2, h)            # y=d, left half
        rect([w / 2, d / 2, 0], _EY, _EZ, d / 2, h)    # inner wall x=w/2
        rect([w / 2, d / 2, 0], _EX, _EZ, w / 2, h)    # inner wall y=d/2
    else:
        raise InvalidDimensionError(f"unknown scene kind {kind!r}")

    return PointCloud.from_points(np.concatenate(faces, axis=0))
