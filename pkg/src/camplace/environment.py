"""Episodic placement environment: observation, coverage, depth error, reward.

An episode fixes a scene and a camera count. Each step moves the cameras in a
horizontal plane, accumulates which scene points have been observed by any
camera so far (flags never reset within an episode), and scores the placement
by space coverage (volume of grid cells whose centers are visible now) and
depth observation error (shadow-map difference between the observed partial
cloud and the full cloud at five fixed sampling viewpoints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ActionLengthMismatchError,
    DegenerateBboxError,
    EpisodeFinishedError,
    InvalidConfigError,
    InvalidPlacementError,
    UnknownModeError,
)
from .pointcloud import Aabb, PointCloud, farthest_point_sample_points
from .shadowmap import ShadowMap, ShadowMapConfig, SplatScatter, compute_shadow_map, shadow_map_abs_diff, visible_mask

REWARD_MAPPINGS = ("none", "cubic_delta", "cubic_level")


@dataclass(frozen=True)
class EnvConfig:
    """Episode parameters; `reward_weights` is (K_sc, K_doe, K_penalty)."""

    num_cameras: int = 1
    camera_range: float = 4.0
    plane_height_fraction: float = 0.5
    max_steps: int = 50
    max_step_move: float = 0.5
    coverage_cells_longest_axis: int = 48
    reward_weights: tuple[float, float, float] = (1.0, 1.0, -1.0)
    reward_mapping: str = "cubic_level"
    sm_config: ShadowMapConfig | None = None
    eval_sm_range_override: float | None = None
    obs_point_cap: int = 1024

    def __post_init__(self):
        if self.num_cameras < 1:
            raise InvalidConfigError("num_cameras must be >= 1")
        if self.max_steps < 1:
            raise InvalidConfigError("max_steps must be >= 1")
        if not all(np.isfinite(self.reward_weights)):
            raise InvalidConfigError("reward weights must be finite")
        if self.reward_weights[2] > 0:
            raise InvalidConfigError("penalty weight must be <= 0")
        if self.reward_mapping not in REWARD_MAPPINGS:
            raise UnknownModeError(f"unknown reward mapping {self.reward_mapping!r}")
        if self.sm_config is not None and self.sm_config.range != self.camera_range:
            raise InvalidConfigError("sm_config.range must equal camera_range")

    def observation_sm_config(self) -> ShadowMapConfig:
        if self.sm_config is not None:
            return self.sm_config
        return ShadowMapConfig(range=self.camera_range)


@dataclass
class Observation:
    """What the agent sees: a capped observed subcloud plus manual features."""

    observed_points: np.ndarray
    observed_bbox: Aabb | None
    cameras: np.ndarray
    step: int


@dataclass
class RewardBreakdown:
    """Reward components for one step; deltas are improvement-positive."""

    sc: float
    doe: float
    penalty: bool
    delta_sc: float
    delta_doe: float
    combined: float
    mapped: float


@dataclass
class EpisodeState:
    scene: PointCloud
    observed: np.ndarray
    cameras: np.ndarray
    step: int
    prev_sc: float
    prev_doe: float
    doe_reset: float
    prev_quality: float
    fps_salt: int
    gt_maps: list[ShadowMap] = field(default_factory=list)


def sampling_viewpoints(bbox: Aabb, config: EnvConfig | None = None) -> np.ndarray:
    """The 5 depth-error viewpoints: footprint center and four 2/3-corners.

    All five sit at half the bbox height; the corner viewpoints lie 2/3 of the
    way from the center toward each footprint corner.
    """
    if np.any(bbox.extent <= 0):
        raise DegenerateBboxError(f"bbox extent {bbox.extent} is degenerate")
    cx, cy = bbox.center[0], bbox.center[1]
    z = bbox.min[2] + 0.5 * bbox.extent[2]
    pts = [(cx, cy, z)]
    for corner_x in (bbox.min[0], bbox.max[0]):
        for corner_y in (bbox.min[1], bbox.max[1]):
            pts.append((cx + (corner_x - cx) * 2 / 3, cy + (corner_y - cy) * 2 / 3, z))
    return np.array(pts, dtype=np.float64)


def combine_reward(
    delta_sc_norm: float,
    delta_doe_norm: float,
    penalty: bool,
    weights: tuple[float, float, float],
) -> float:
    """Weighted sum of normalized improvements, or exactly K_penalty when penalized."""
    k_sc, k_doe, k_p = weights
    if penalty:
        return float(k_p)
    return float(k_sc * delta_sc_norm + k_doe * delta_doe_norm)


def map_reward(
    combined: float,
    mode: str,
    quality: float | None = None,
    prev_quality: float | None = None,
    penalty: bool = False,
) -> float:
    """Monotone reward shaping.

    none         pass `combined` through
    cubic_delta  cube `combined` (odd, sign-preserving)
    cubic_level  cube the level quality before differencing: q^3 - q_prev^3,
                 which amplifies small improvements near convergence; a
                 penalized step passes `combined` (= K_penalty) through
    """
    if mode == "none":
        return float(combined)
    if mode == "cubic_delta":
        return float(combined) ** 3
    if mode == "cubic_level":
        if penalty:
            return float(combined)
        if quality is None or prev_quality is None:
            raise InvalidConfigError("cubic_level mapping needs quality levels")
        return float(quality) ** 3 - float(prev_quality) ** 3
    raise UnknownModeError(f"unknown reward mapping {mode!r}")


class SceneMetrics:
    """Shared per-scene machinery: observation maps, coverage grid, depth error.

    Ground-truth viewpoint maps and per-viewpoint splat geometry are computed
    once per (scene, config) and reused by every episode step and every
    offline placement evaluation.
    """

    def __init__(self, scene: PointCloud, config: EnvConfig):
        self.scene = scene
        self.config = config
        self.obs_cfg = config.observation_sm_config()
        eval_range = config.eval_sm_range_override or scene.bbox.diagonal
        self.eval_cfg = self.obs_cfg.with_range(eval_range)
        self.viewpoints = sampling_viewpoints(scene.bbox, config)
        self.plane_z = float(scene.bbox.min[2] + config.plane_height_fraction * scene.bbox.extent[2])
        self._scatters = [SplatScatter(scene, vp, self.eval_cfg) for vp in self.viewpoints]
        self.gt_maps = [sc.build() for sc in self._scatters]
        self._coverage_centers, self.cell_volume = self._coverage_grid()
        scene.nn_dist  # force the lazy cache before any timing-sensitive loop

    def _coverage_grid(self) -> tuple[np.ndarray, float]:
        bbox = self.scene.bbox
        edge = bbox.extent.max() / self.config.coverage_cells_longest_axis
        counts = np.maximum(1, np.ceil(bbox.extent / edge).astype(int))
        spacing = bbox.extent / counts  # exact tiling keeps coverage <= bbox volume
        axes = [bbox.min[k] + (np.arange(counts[k]) + 0.5) * spacing[k] for k in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        return centers, float(np.prod(spacing))

    def camera_maps(self, cameras: np.ndarray) -> list[ShadowMap]:
        return [compute_shadow_map(self.scene, cam, self.obs_cfg) for cam in cameras]

    def observe(self, maps: list[ShadowMap], flags: np.ndarray | None = None) -> np.ndarray:
        """OR per-camera visibility of every scene point into `flags` (copy)."""
        out = np.zeros(len(self.scene), dtype=bool) if flags is None else flags.copy()
        for sm in maps:
            out |= visible_mask(sm, self.scene.points)
        return out

    def coverage(self, maps: list[ShadowMap]) -> float:
        """Volume of grid cells whose center is visible to >= 1 camera now."""
        if not maps:
            return 0.0
        vis = np.zeros(len(self._coverage_centers), dtype=bool)
        for sm in maps:
            vis |= visible_mask(sm, self._coverage_centers)
        return float(vis.sum()) * self.cell_volume

    def depth_error(self, observed: np.ndarray) -> float:
        """Summed mean-absolute shadow-map difference at the 5 viewpoints."""
        total = 0.0
        for scatter, gt in zip(self._scatters, self.gt_maps):
            total += shadow_map_abs_diff(scatter.build(observed), gt)
        return total


class PlacementEnv:
    """Gym-style environment wrapper around SceneMetrics.

    One instance is single-threaded; run several instances for parallelism.
    """

    def __init__(self, scene: PointCloud, config: EnvConfig):
        self.metrics = SceneMetrics(scene, config)
        self.scene = scene
        self.config = config
        self.state: EpisodeState | None = None

    @property
    def plane_z(self) -> float:
        return self.metrics.plane_z

    def reset(self, seed: int) -> Observation:
        """Start an episode: random central placement, one observation pass."""
        rng = np.random.default_rng(seed)
        bbox = self.scene.bbox
        # initial cameras land in the central 50% of the footprint
        lo = bbox.center[:2] - 0.25 * bbox.extent[:2]
        hi = bbox.center[:2] + 0.25 * bbox.extent[:2]
        xy = rng.uniform(lo, hi, size=(self.config.num_cameras, 2))
        cameras = np.column_stack([xy, np.full(self.config.num_cameras, self.plane_z)])
        fps_salt = int(rng.integers(1 << 31))

        maps = self.metrics.camera_maps(cameras)
        observed = self.metrics.observe(maps)
        sc = self.metrics.coverage(maps)
        doe = self.metrics.depth_error(observed)
        self.state = EpisodeState(
            scene=self.scene,
            observed=observed,
            cameras=cameras,
            step=0,
            prev_sc=sc,
            prev_doe=doe,
            doe_reset=doe,
            prev_quality=self._quality(sc, doe, doe),
            fps_salt=fps_salt,
            gt_maps=self.metrics.gt_maps,
        )
        return self._observation()

    def _quality(self, sc: float, doe: float, doe_reset: float) -> float:
        k_sc, k_doe, _ = self.config.reward_weights
        denom = doe_reset if doe_reset > 0 else 1.0
        return k_sc * sc / self.scene.bbox.volume - k_doe * doe / denom

    def _observation(self) -> Observation:
        st = self.state
        idx = np.nonzero(st.observed)[0]
        if idx.size == 0:
            return Observation(np.empty((0, 3)), None, st.cameras.copy(), st.step)
        sub = self.scene.points[idx]
        if idx.size > self.config.obs_point_cap:
            picks = farthest_point_sample_points(
                sub, self.config.obs_point_cap, st.fps_salt % idx.size
            )
            sub = sub[picks]
        bbox = Aabb(self.scene.points[idx].min(axis=0), self.scene.points[idx].max(axis=0))
        return Observation(sub, bbox, st.cameras.copy(), st.step)

    def step(self, actions: np.ndarray) -> tuple[Observation, RewardBreakdown, bool]:
        """Apply per-camera (dx, dy) moves, observe, and score."""
        st = self.state
        if st is None or st.step >= self.config.max_steps:
            raise EpisodeFinishedError("call reset before stepping")
        actions = np.asarray(actions, dtype=np.float64).reshape(-1, 2)
        if len(actions) != self.config.num_cameras:
            raise ActionLengthMismatchError(
                f"got {len(actions)} actions for {self.config.num_cameras} cameras"
            )
        norms = np.linalg.norm(actions, axis=1)
        scale = np.minimum(1.0, self.config.max_step_move / np.maximum(norms, 1e-300))
        moves = actions * scale[:, None]
        cameras = st.cameras.copy()
        cameras[:, :2] += moves

        bbox = self.scene.bbox
        inside = (
            (cameras[:, 0] >= bbox.min[0]) & (cameras[:, 0] <= bbox.max[0])
            & (cameras[:, 1] >= bbox.min[1]) & (cameras[:, 1] <= bbox.max[1])
        )
        penalty = bool(~inside.all())

        maps = self.metrics.camera_maps(cameras)
        observed = self.metrics.observe(maps, st.observed)
        sc = self.metrics.coverage(maps)
        doe = self.metrics.depth_error(observed)

        denom = st.doe_reset if st.doe_reset > 0 else 1.0
        delta_sc = sc - st.prev_sc
        delta_doe = st.prev_doe - doe  # improvement-positive
        combined = combine_reward(
            delta_sc / bbox.volume, delta_doe / denom, penalty, self.config.reward_weights
        )
        quality = self._quality(sc, doe, st.doe_reset)
        mapped = map_reward(
            combined, self.config.reward_mapping, quality, st.prev_quality, penalty
        )

        st.cameras = cameras
        st.observed = observed
        st.prev_sc = sc
        st.prev_doe = doe
        st.prev_quality = quality
        st.step += 1
        done = st.step >= self.config.max_steps
        breakdown = RewardBreakdown(sc, doe, penalty, delta_sc, delta_doe, combined, mapped)
        return self._observation(), breakdown, done


def observe_points(env: PlacementEnv) -> tuple[np.ndarray, int]:
    """Re-run the observation pass for the current placement; returns flags + newly observed."""
    st = env.state
    if st is None:
        raise EpisodeFinishedError("no active episode")
    maps = env.metrics.camera_maps(st.cameras)
    flags = env.metrics.observe(maps, st.observed)
    newly = int(flags.sum() - st.observed.sum())
    st.observed = flags
    return flags, newly


def space_coverage(env: PlacementEnv) -> float:
    """Coverage of the current placement (instantaneous, not accumulated)."""
    st = env.state
    if st is None:
        raise EpisodeFinishedError("no active episode")
    return env.metrics.coverage(env.metrics.camera_maps(st.cameras))


def depth_observation_error(env: PlacementEnv) -> float:
    """Depth error of the accumulated observed set at the 5 viewpoints."""
    st = env.state
    if st is None:
        raise EpisodeFinishedError("no active episode")
    return env.metrics.depth_error(st.observed)


def validate_placement(positions: np.ndarray, plane_z: float | None = None) -> np.ndarray:
    """Coerce to an (n, 3) float array; optionally pin z to the camera plane."""
    arr = np.asarray(positions, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) < 1 or not np.isfinite(arr).all():
        raise InvalidPlacementError("placement must be a finite (n, 3) array with n >= 1")
    if plane_z is not None:
        arr = arr.copy()
        arr[:, 2] = plane_z
    return arr
