"""Command-line entry points.

Exit codes: 0 success, 2 usage/config/parse error, 1 runtime failure. All
commands are deterministic given flags and seeds; wall-clock timings go to a
separate timing.csv so every other output is byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import reporting
from .environment import EnvConfig, validate_placement
from .errors import CamplaceError
from .optimizers import (
    BpsoConfig,
    TdsaConfig,
    PlacementEvaluator,
    optimize_bpso,
    optimize_tdsa,
    random_placement,
)
from .pointcloud import generate_synthetic_scene, load_point_cloud, rotate_scene, write_point_cloud
from .shadowmap import ShadowMapConfig, compute_shadow_map, write_csv, write_pgm
from .server import serve_stdio, serve_tcp


def _parse_triple(text: str, sep: str = ",") -> tuple[float, float, float]:
    parts = text.split(sep)
    if len(parts) != 3:
        raise ValueError(f"expected three values, got {text!r}")
    return tuple(float(p) for p in parts)


def parse_placement_literal(text: str) -> np.ndarray:
    """Parse "x1,y1,z1;x2,y2,z2;..." into an (n, 3) array."""
    rows = [p for p in text.split(";") if p.strip()]
    if not rows:
        raise ValueError("empty placement literal")
    return np.array([_parse_triple(r) for r in rows], dtype=np.float64)


def format_placement(placement: np.ndarray) -> str:
    return ";".join(",".join(f"{v:.6f}" for v in row) for row in placement)


def _add_scene_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("scene", help="scene file (.ply or xyz text)")
    p.add_argument("--format", choices=["auto", "ply", "xyz"], default="auto")
    p.add_argument("--voxel-size", type=float, default=None,
                   help="optional voxel downsample size in meters")
    p.add_argument("--rotate", type=float, default=0.0,
                   help="rotate the scene by DEG about its vertical center axis")


def _add_env_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--num-cameras", type=int, default=1)
    p.add_argument("--range", type=float, default=4.0, help="camera range in meters")
    p.add_argument("--sm-bins", default="64x32", help="shadow map bins as AZxPOL")
    p.add_argument("--compensation", type=float, default=None,
                   help="visibility slack in meters (default 3%% of range)")
    p.add_argument("--plane-height-frac", type=float, default=0.5)
    p.add_argument("--max-steps", type=int, default=50)
    p.add_argument("--max-step-move", type=float, default=0.5)
    p.add_argument("--coverage-cells", type=int, default=48)
    p.add_argument("--k-sc", type=float, default=1.0)
    p.add_argument("--k-doe", type=float, default=1.0)
    p.add_argument("--k-p", type=float, default=-1.0)
    p.add_argument("--reward-mapping", choices=["none", "cubic_delta", "cubic_level"],
                   default="cubic_level")
    p.add_argument("--eval-range", type=float, default=None,
                   help="depth-error viewpoint range (default: bbox diagonal)")
    p.add_argument("--obs-cap", type=int, default=1024)


def _load_scene(args) -> tuple:
    cloud = load_point_cloud(args.scene, args.format, args.voxel_size)
    scene_id = os.path.splitext(os.path.basename(args.scene))[0]
    if args.rotate:
        cloud = rotate_scene(cloud, args.rotate)
        scene_id += f"_rot{int(round(args.rotate)) % 360:03d}"
    return cloud, scene_id


def _env_config(args) -> EnvConfig:
    az, pol = (int(v) for v in args.sm_bins.lower().split("x"))
    sm = ShadowMapConfig(n_azimuth=az, n_polar=pol, range=args.range,
                         compensation=args.compensation)
    return EnvConfig(
        num_cameras=args.num_cameras,
        camera_range=args.range,
        plane_height_fraction=args.plane_height_frac,
        max_steps=args.max_steps,
        max_step_move=args.max_step_move,
        coverage_cells_longest_axis=args.coverage_cells,
        reward_weights=(args.k_sc, args.k_doe, args.k_p),
        reward_mapping=args.reward_mapping,
        sm_config=sm,
        eval_sm_range_override=args.eval_range,
        obs_point_cap=args.obs_cap,
    )


def _env_digest(args, extra: dict | None = None) -> str:
    cfg = {
        "num_cameras": args.num_cameras, "range": args.range, "sm_bins": args.sm_bins,
        "compensation": args.compensation, "plane_height_frac": args.plane_height_frac,
        "max_steps": args.max_steps, "max_step_move": args.max_step_move,
        "coverage_cells": args.coverage_cells, "k_sc": args.k_sc, "k_doe": args.k_doe,
        "k_p": args.k_p, "reward_mapping": args.reward_mapping,
        "eval_range": args.eval_range, "obs_cap": args.obs_cap,
        "rotate": args.rotate, "voxel_size": args.voxel_size,
    }
    if extra:
        cfg.update(extra)
    return reporting.config_digest(cfg)


def cmd_evaluate(args) -> int:
    cloud, scene_id = _load_scene(args)
    config = _env_config(args)
    placement = validate_placement(parse_placement_literal(args.cameras))
    ev = PlacementEvaluator(cloud, config)
    error = ev.error(placement)
    maps = [compute_shadow_map(cloud, cam, ev.metrics.obs_cfg) for cam in placement]
    coverage = ev.metrics.coverage(maps)
    digest = _env_digest(args)
    print("scene,approach,depth_error,coverage,config_digest")
    print(f"{scene_id},{args.approach},{error:.6f},{coverage:.6f},{digest}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        reporting.write_run_report(
            os.path.join(args.out_dir, "report.csv"),
            reporting.RunReport(scene_id, args.approach, error, 0, digest),
        )
    return 0


def cmd_optimize(args) -> int:
    cloud, scene_id = _load_scene(args)
    config = _env_config(args)
    digest = _env_digest(args, {"algo": args.algo, "iterations": args.iterations})
    t0 = time.perf_counter()
    if args.algo == "bpso":
        res = optimize_bpso(cloud, config, BpsoConfig(
            grid_nx=args.grid_nx, grid_ny=args.grid_ny, swarm_size=args.swarm_size,
            iterations=args.iterations, v_max=args.v_max, seed=args.seed,
        ))
    elif args.algo == "tdsa":
        res = optimize_tdsa(cloud, config, TdsaConfig(
            iterations=args.iterations, t0=args.t0, cooling=args.cooling,
            sigma0=args.sigma0, allow_dimension_moves=args.dimension_moves,
            seed=args.seed,
        ))
    else:  # random control: a single evaluated draw
        placement = random_placement(cloud, config, args.seed)
        ev = PlacementEvaluator(cloud, config)
        err = ev.error(placement)
        from .optimizers import OptimizationResult

        res = OptimizationResult(placement, err, [(0, err)], ev.evaluations)
    wall = time.perf_counter() - t0

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "history.csv"), "w") as fh:
        fh.write("iteration,best_error\n")
        for it, err in res.history:
            fh.write(f"{it},{err:.6f}\n")
    with open(os.path.join(args.out_dir, "placement.txt"), "w") as fh:
        fh.write(format_placement(res.placement) + "\n")
    reporting.write_run_report(
        os.path.join(args.out_dir, "report.csv"),
        reporting.RunReport(scene_id, args.algo, res.final_error, args.seed, digest),
    )
    with open(os.path.join(args.out_dir, "timing.csv"), "w") as fh:
        fh.write("wall_time_s\n")
        fh.write(f"{wall:.3f}\n")
    print("scene,approach,final_error,evaluations,seed,config_digest")
    print(f"{scene_id},{args.algo},{res.final_error:.6f},{res.evaluations},{args.seed},{digest}")
    return 0


def cmd_serve(args) -> int:
    cloud, _ = _load_scene(args)
    config = _env_config(args)
    if args.transport == "stdio":
        serve_stdio(cloud, config, metrics_path=args.metrics_csv)
    else:
        serve_tcp(cloud, config, args.host, args.port, metrics_path=args.metrics_csv)
    return 0


def cmd_shadowmap(args) -> int:
    cloud, _ = _load_scene(args)
    az, pol = (int(v) for v in args.sm_bins.lower().split("x"))
    cfg = ShadowMapConfig(n_azimuth=az, n_polar=pol, range=args.range,
                          compensation=args.compensation)
    camera = np.array(_parse_triple(args.camera))
    sm = compute_shadow_map(cloud, camera, cfg)
    if args.out.endswith(".pgm"):
        write_pgm(sm, args.out)
    elif args.out.endswith(".csv"):
        write_csv(sm, args.out)
    else:
        raise CamplaceError(f"output must end in .pgm or .csv, got {args.out!r}")
    return 0


def cmd_report(args) -> int:
    reports = reporting.read_run_reports(args.run_dirs)
    scene_means, sums = reporting.aggregate(reports)
    paths = reporting.write_aggregates(args.out_dir, scene_means, sums)
    if not args.no_figures:
        paths += reporting.render_figures(args.out_dir, scene_means, sums)
    for p in paths:
        print(p)
    return 0


def cmd_generate(args) -> int:
    dims = tuple(float(v) for v in args.dims.lower().split("x"))
    cloud = generate_synthetic_scene(args.kind, dims, args.spacing, args.seed, args.jitter)
    write_point_cloud(cloud, args.out, args.ply_format)
    print(f"{args.out},{len(cloud)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="camplace",
                                 description="Depth-camera placement toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a fixed placement on a scene")
    _add_scene_args(p)
    _add_env_args(p)
    p.add_argument("--cameras", required=True, help='placement literal "x,y,z;x,y,z;..."')
    p.add_argument("--approach", default="manual")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("optimize", help="run a placement optimizer")
    _add_scene_args(p)
    _add_env_args(p)
    p.add_argument("--algo", choices=["bpso", "tdsa", "random"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--grid-nx", type=int, default=16)
    p.add_argument("--grid-ny", type=int, default=16)
    p.add_argument("--swarm-size", type=int, default=30)
    p.add_argument("--v-max", type=float, default=4.0)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--cooling", type=float, default=0.995)
    p.add_argument("--sigma0", type=float, default=0.5)
    p.add_argument("--dimension-moves", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("serve", help="serve the environment over stdio or tcp")
    _add_scene_args(p)
    _add_env_args(p)
    p.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7075)
    p.add_argument("--metrics-csv", default=None,
                   help="append per-step metric rows (step,sc,doe,penalty,combined,mapped)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("shadowmap", help="write one camera's shadow map")
    _add_scene_args(p)
    p.add_argument("--camera", required=True, help='camera position "x,y,z"')
    p.add_argument("--out", required=True, help="output path (.pgm or .csv)")
    p.add_argument("--sm-bins", default="64x32")
    p.add_argument("--range", type=float, default=4.0)
    p.add_argument("--compensation", type=float, default=None)
    p.set_defaults(fn=cmd_shadowmap)

    p = sub.add_parser("report", help="aggregate run reports into CSV + figures")
    p.add_argument("run_dirs", nargs="+", help="run directories (or report.csv files)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("generate", help="write a synthetic scene")
    p.add_argument("kind", choices=["box_room", "two_room_doorway", "l_shape"])
    p.add_argument("--dims", default="4x4x3", help="WxDxH in meters")
    p.add_argument("--spacing", type=float, default=0.1)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ply-format", choices=["ply_ascii", "ply_binary", "xyz"],
                   default="ply_ascii")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (CamplaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # genuine runtime failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
