"""Depth-camera placement toolkit.

Shadow-map scene simulation, space-coverage and depth-error metrics, an
episodic placement environment with a wire protocol, and offline placement
optimizers.
"""

from .environment import (
    EnvConfig,
    EpisodeState,
    Observation,
    PlacementEnv,
    RewardBreakdown,
    SceneMetrics,
    combine_reward,
    map_reward,
    sampling_viewpoints,
)
from .optimizers import (
    BpsoConfig,
    OptimizationResult,
    PlacementEvaluator,
    TdsaConfig,
    evaluate_placement,
    optimize_bpso,
    optimize_tdsa,
    random_placement,
)
from .pointcloud import (
    Aabb,
    PointCloud,
    farthest_point_sample,
    generate_synthetic_scene,
    group_neighbors,
    load_point_cloud,
    nearest_neighbor_distances,
    rotate_scene,
    voxel_downsample,
    write_point_cloud,
)
from .shadowmap import (
    ShadowMap,
    ShadowMapConfig,
    ViewCone,
    compute_shadow_map,
    compute_shadow_map_cone,
    direction_to_cell,
    is_visible,
    shadow_map_abs_diff,
    visible_mask,
)

__version__ = "0.1.0"
