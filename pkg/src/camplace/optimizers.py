"""Offline placement baselines scored by the environment's depth error.

Both optimizers see the full scene (offline setting): a binary particle swarm
over a discrete candidate lattice, and simulated annealing over continuous
plane positions with optional camera birth/death moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import EnvConfig, SceneMetrics, validate_placement
from .errors import InfeasibleLatticeError, InvalidPlacementError
from .pointcloud import PointCloud
from .shadowmap import compute_shadow_map, visible_mask


@dataclass(frozen=True)
class BpsoConfig:
    grid_nx: int = 16
    grid_ny: int = 16
    swarm_size: int = 30
    iterations: int = 100
    inertia_start: float = 0.9
    inertia_end: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    v_max: float = 4.0
    seed: int = 0


@dataclass(frozen=True)
class TdsaConfig:
    iterations: int = 2000
    t0: float = 1.0
    cooling: float = 0.995
    sigma0: float = 0.5
    allow_dimension_moves: bool = False
    birth_death_prob: float = 0.1
    camera_cost: float = 0.05  # energy per camera when dimension moves are on
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise InvalidPlacementError("cooling factor must be in (0, 1)")
        if self.sigma0 <= 0:
            raise InvalidPlacementError("sigma0 must be positive")


@dataclass
class OptimizationResult:
    placement: np.ndarray
    final_error: float
    history: list[tuple[int, float]]
    evaluations: int


class PlacementEvaluator:
    """Depth error of a placement, with per-scene precomputation and memoization."""

    def __init__(self, scene: PointCloud, config: EnvConfig):
        self.metrics = SceneMetrics(scene, config)
        self.scene = scene
        self.config = config
        self.evaluations = 0
        self._memo: dict[bytes, float] = {}

    @property
    def plane_z(self) -> float:
        return self.metrics.plane_z

    def error(self, placement: np.ndarray) -> float:
        placement = validate_placement(placement)
        key = placement.tobytes()
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        maps = [compute_shadow_map(self.scene, cam, self.metrics.obs_cfg) for cam in placement]
        observed = np.zeros(len(self.scene), dtype=bool)
        for sm in maps:
            observed |= visible_mask(sm, self.scene.points)
        err = self.metrics.depth_error(observed)
        self.evaluations += 1
        self._memo[key] = err
        return err


def evaluate_placement(scene: PointCloud, placement: np.ndarray, config: EnvConfig) -> float:
    """Depth error of a fixed placement (single observation pass, no episode)."""
    return PlacementEvaluator(scene, config).error(placement)


def metropolis_accept(delta_e: float, temp: float, u: float) -> bool:
    """Annealing acceptance: downhill always, uphill with prob exp(-dE/T).

    In the zero-temperature limit this degenerates to hill climbing: no move
    that increases the energy is ever accepted.
    """
    if delta_e <= 0:
        return True
    if temp <= 0:
        return False
    return u < np.exp(-delta_e / temp)


def random_placement(scene: PointCloud, env_config: EnvConfig, seed: int) -> np.ndarray:
    """Uniform camera positions in the bbox footprint on the camera plane."""
    rng = np.random.default_rng(seed)
    bbox = scene.bbox
    xy = rng.uniform(bbox.min[:2], bbox.max[:2], size=(env_config.num_cameras, 2))
    z = bbox.min[2] + env_config.plane_height_fraction * bbox.extent[2]
    return np.column_stack([xy, np.full(env_config.num_cameras, z)])


def _lattice(scene: PointCloud, env_config: EnvConfig, nx: int, ny: int) -> np.ndarray:
    bbox = scene.bbox
    z = bbox.min[2] + env_config.plane_height_fraction * bbox.extent[2]
    xs = bbox.min[0] + (np.arange(nx) + 0.5) * bbox.extent[0] / nx
    ys = bbox.min[1] + (np.arange(ny) + 0.5) * bbox.extent[1] / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(nx * ny, z)])


def _repair(bits: np.ndarray, prob: np.ndarray, k: int) -> np.ndarray:
    """Force exactly k ones, keeping the highest-probability bits."""
    ones = np.nonzero(bits)[0]
    if len(ones) > k:
        order = ones[np.argsort(-prob[ones], kind="stable")]
        bits = np.zeros_like(bits)
        bits[order[:k]] = True
    elif len(ones) < k:
        zeros = np.nonzero(~bits)[0]
        order = zeros[np.argsort(-prob[zeros], kind="stable")]
        bits = bits.copy()
        bits[order[: k - len(ones)]] = True
    return bits


def optimize_bpso(
    scene: PointCloud, env_config: EnvConfig, bpso: BpsoConfig
) -> OptimizationResult:
    """Binary PSO over a candidate lattice, exactly num_cameras bits set."""
    candidates = _lattice(scene, env_config, bpso.grid_nx, bpso.grid_ny)
    k = env_config.num_cameras
    n = len(candidates)
    if n < k:
        raise InfeasibleLatticeError(f"lattice has {n} candidates for {k} cameras")
    rng = np.random.default_rng(bpso.seed)
    ev = PlacementEvaluator(scene, env_config)

    def err_of(bits: np.ndarray) -> float:
        return ev.error(candidates[np.nonzero(bits)[0]])

    pos = np.zeros((bpso.swarm_size, n), dtype=bool)
    for p in range(bpso.swarm_size):
        pos[p, rng.choice(n, size=k, replace=False)] = True
    vel = rng.uniform(-1.0, 1.0, size=(bpso.swarm_size, n))

    costs = np.array([err_of(pos[p]) for p in range(bpso.swarm_size)])
    pbest = pos.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(costs))
    gbest, gbest_cost = pos[g].copy(), float(costs[g])
    history = [(0, gbest_cost)]

    for it in range(1, bpso.iterations + 1):
        w = bpso.inertia_start + (bpso.inertia_end - bpso.inertia_start) * (
            it / max(1, bpso.iterations)
        )
        r1 = rng.random((bpso.swarm_size, n))
        r2 = rng.random((bpso.swarm_size, n))
        vel = (
            w * vel
            + bpso.c1 * r1 * (pbest.astype(float) - pos.astype(float))
            + bpso.c2 * r2 * (gbest.astype(float)[None, :] - pos.astype(float))
        )
        np.clip(vel, -bpso.v_max, bpso.v_max, out=vel)
        prob = 1.0 / (1.0 + np.exp(-vel))
        sampled = rng.random((bpso.swarm_size, n)) < prob
        for p in range(bpso.swarm_size):
            pos[p] = _repair(sampled[p], prob[p], k)
            c = err_of(pos[p])
            if c < pbest_cost[p]:
                pbest_cost[p] = c
                pbest[p] = pos[p].copy()
            if c < gbest_cost:
                gbest_cost = c
                gbest = pos[p].copy()
        history.append((it, gbest_cost))

    placement = candidates[np.nonzero(gbest)[0]]
    return OptimizationResult(placement, gbest_cost, history, ev.evaluations)


def optimize_tdsa(
    scene: PointCloud, env_config: EnvConfig, tdsa: TdsaConfig
) -> OptimizationResult:
    """Simulated annealing on plane positions; optional birth/death moves."""
    rng = np.random.default_rng(tdsa.seed)
    ev = PlacementEvaluator(scene, env_config)
    bbox = scene.bbox

    def energy(placement: np.ndarray) -> float:
        e = ev.error(placement)
        if tdsa.allow_dimension_moves:
            e += tdsa.camera_cost * len(placement)
        return e

    current = random_placement(scene, env_config, int(rng.integers(1 << 31)))
    cur_e = energy(current)
    best, best_e = current.copy(), cur_e
    best_err = ev.error(best)
    history = [(0, best_err)]

    for it in range(1, tdsa.iterations + 1):
        temp = tdsa.t0 * tdsa.cooling**it
        proposal = current.copy()
        if tdsa.allow_dimension_moves and rng.random() < tdsa.birth_death_prob:
            if rng.random() < 0.5 or len(proposal) == 1:
                xy = rng.uniform(bbox.min[:2], bbox.max[:2])
                newcam = np.array([[xy[0], xy[1], ev.plane_z]])
                proposal = np.concatenate([proposal, newcam], axis=0)
            else:
                drop = int(rng.integers(len(proposal)))
                proposal = np.delete(proposal, drop, axis=0)
        else:
            i = int(rng.integers(len(proposal)))
            sigma = tdsa.sigma0 * temp / tdsa.t0
            proposal[i, :2] += rng.normal(0.0, sigma, size=2)
            proposal[i, 0] = np.clip(proposal[i, 0], bbox.min[0], bbox.max[0])
            proposal[i, 1] = np.clip(proposal[i, 1], bbox.min[1], bbox.max[1])
        new_e = energy(proposal)
        de = new_e - cur_e
        if metropolis_accept(de, temp, rng.random() if de > 0 else 0.0):
            current, cur_e = proposal, new_e
            if cur_e < best_e:
                best, best_e = current.copy(), cur_e
                best_err = ev.error(best)
        history.append((it, best_err))

    return OptimizationResult(best, best_err, history, ev.evaluations)
