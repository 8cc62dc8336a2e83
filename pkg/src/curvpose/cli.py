"""
Command-line entry point.

Subcommands:
  gen         synthetic scene + oracle heatmaps into an output directory
  centers     heatmaps -> 3D centers JSON
  solve       heatmaps -> centers -> pose estimates JSON
  eval        estimates + ground-truth scene -> metrics JSON (and CSV)
  render      scene -> curvature / normal / depth PNGs
  bench-cost  cost-function throughput for 1 and N workers

Exit codes: 0 success, 1 usage, 2 I/O, 3 validation, 4 algorithmic failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core.config import PipelineConfig
from .core.errors import ConfigError, CurvposeError
from .core.geometry import Pose
from .rendering.curvature import render_view
from .scene.generator import SceneGenerationSpec, generate_scene
from .scene.scene_io import Scene, load_scene, read_json_document, save_scene
from .serialization.grid_codec import write_normals_png, write_png16, write_raw_grid
from .serialization.heatmap_store import read_heatmap_set, write_heatmap_set
from .serialization.reports import (
    read_centers,
    read_estimate,
    write_centers,
    write_estimate,
    write_report,
    write_trace,
)
from .services.costfn import PoseSet, SceneContext, benchmark_cost
from .services.heatmaps import curvature_target, synthesize_oracle
from .services.metrics import evaluate_scene
from .services.pipeline import PoseEstimationWorkflow

logger = logging.getLogger("curvpose.cli")

SCENE_FILE = "scene.json"
HEATMAP_DIR = "heatmaps"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_USAGE = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -------------------- Argument parsing --------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="PipelineConfig JSON file")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="Only log errors")
    verbosity.add_argument("--verbose", action="store_true", help="Log debug detail")


def _add_triangulation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d-t", type=float, help="Max ray gap for a midpoint (m)")
    parser.add_argument("--d-c", type=float, help="Midpoint merge distance (m)")
    parser.add_argument("--d-o", type=float, help="Center pruning distance (m)")
    parser.add_argument("--expected-count", type=int, help="Keep at most this many centers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="curvpose", description="Multi-view pose estimation from oracle heatmaps"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a synthetic scene and oracle heatmaps")
    gen.add_argument("--spec", type=Path, help="SceneGenerationSpec JSON file")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise-sigma", type=float, help="Gaussian noise on center heatmaps")
    gen.add_argument("--visible-only", action="store_true", help="Mask occluded curvature")
    gen.add_argument("--no-previews", action="store_true", help="Skip PNG previews")
    gen.add_argument("--out", type=Path, required=True, help="Output directory")
    _add_common(gen)

    centers = sub.add_parser("centers", help="Triangulate 3D centers from heatmaps")
    centers.add_argument("--data", type=Path, required=True, help="Directory written by gen")
    centers.add_argument("--out", type=Path, help="Centers JSON (default: DATA/centers.json)")
    _add_triangulation(centers)
    _add_common(centers)

    solve = sub.add_parser("solve", help="Estimate object poses from heatmaps")
    solve.add_argument("--data", type=Path, required=True, help="Directory written by gen")
    solve.add_argument("--out", type=Path, help="Estimate JSON (default: DATA/estimate.json)")
    solve.add_argument("--centers", type=Path, help="Use precomputed centers JSON")
    solve.add_argument("--candidates", type=int, help="Random pose candidates per object")
    solve.add_argument("--n-refine", type=int, help="Candidates refined with the simplex")
    solve.add_argument("--seed", type=int, help="Optimizer RNG seed")
    solve.add_argument("--workers", type=int, help="Cost evaluation workers")
    solve.add_argument("--backend", choices=("thread", "process"))
    solve.add_argument("--trace", type=Path, help="Write the convergence trace CSV here")
    _add_triangulation(solve)
    _add_common(solve)

    ev = sub.add_parser("eval", help="Score estimates against the ground truth")
    ev.add_argument("--estimate", type=Path, required=True)
    ev.add_argument("--scene", type=Path, required=True)
    ev.add_argument("--out", type=Path, required=True, help="Report JSON")
    ev.add_argument("--csv", type=Path, help="Per-view error table")
    ev.add_argument("--theta-mspd-px", type=float, default=5.0)
    ev.add_argument("--theta-mssd-frac", type=float, default=0.05)
    _add_common(ev)

    render = sub.add_parser("render", help="Write curvature, normal and depth images")
    render.add_argument("--scene", type=Path, required=True)
    render.add_argument("--out", type=Path, required=True, help="Output directory")
    _add_common(render)

    bench = sub.add_parser("bench-cost", help="Measure cost evaluations per second")
    bench.add_argument("--scene", type=Path, help="Scene JSON (default: reference scene)")
    bench.add_argument("--candidates", type=int, default=64)
    bench.add_argument("--workers", type=int, default=4)
    bench.add_argument("--backend", choices=("thread", "process"), default="process")
    bench.add_argument("--seed", type=int, default=0)
    _add_common(bench)
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level_name = os.getenv("CURVPOSE_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ConfigError(f"CURVPOSE_LOG_LEVEL must be a logging level name, got {level_name!r}")
    if getattr(args, "quiet", False):
        level = logging.ERROR
    elif getattr(args, "verbose", False):
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    tri = {
        name: getattr(args, name)
        for name in ("d_t", "d_c", "d_o", "expected_count")
        if getattr(args, name, None) is not None
    }
    if tri:
        config.triangulation = dataclasses.replace(config.triangulation, **tri)
    if args.command == "solve":
        opt = {
            key: getattr(args, flag)
            for flag, key in (
                ("candidates", "n_candidates"),
                ("n_refine", "n_refine"),
                ("seed", "rng_seed"),
            )
            if getattr(args, flag) is not None
        }
        if opt:
            config.optimizer = dataclasses.replace(config.optimizer, **opt)
        cost = {
            name: getattr(args, name)
            for name in ("workers", "backend")
            if getattr(args, name) is not None
        }
        if cost:
            config.cost = dataclasses.replace(config.cost, **cost)
    if getattr(args, "noise_sigma", None) is not None:
        config.heatmaps = dataclasses.replace(config.heatmaps, noise_sigma=args.noise_sigma)
    return config


# -------------------- Subcommands --------------------


def cmd_gen(args: argparse.Namespace, config: PipelineConfig) -> int:
    spec_data = read_json_document(args.spec) if args.spec else None
    spec = SceneGenerationSpec.from_dict(spec_data)
    scene = generate_scene(spec, seed=args.seed)
    save_scene(scene, args.out / SCENE_FILE)
    oracle = synthesize_oracle(
        scene, config.heatmaps, seed=args.seed, visible_only=args.visible_only
    )
    metadata = {
        "seed": args.seed,
        "noise_sigma": config.heatmaps.noise_sigma,
        "sigma_scale": config.heatmaps.sigma_scale,
        "visible_only": bool(args.visible_only),
    }
    write_heatmap_set(
        args.out / HEATMAP_DIR, oracle, previews=not args.no_previews, metadata=metadata
    )
    print(f"Generated {len(scene.instances)} objects in {len(scene.cameras)} views -> {args.out}")
    return 0


def _load_inputs(data_dir: Path):
    scene = load_scene(data_dir / SCENE_FILE)
    heatmaps = read_heatmap_set(data_dir / HEATMAP_DIR)
    return scene, heatmaps


def cmd_centers(args: argparse.Namespace, config: PipelineConfig) -> int:
    scene, heatmaps = _load_inputs(args.data)
    workflow = PoseEstimationWorkflow(scene.classes, config)
    centers = workflow.centers_only(heatmaps, scene.cameras)
    out = args.out or args.data / "centers.json"
    write_centers(out, centers)
    print(f"Found {len(centers)} centers -> {out}")
    return 0


def cmd_solve(args: argparse.Namespace, config: PipelineConfig) -> int:
    scene, heatmaps = _load_inputs(args.data)
    centers = read_centers(args.centers) if args.centers else None
    workflow = PoseEstimationWorkflow(scene.classes, config)
    session = workflow.start_session(heatmaps, scene.cameras, centers=centers)
    if args.trace:
        write_trace(args.trace, session.trace)
    if session.exception is not None:
        raise session.exception
    out = args.out or args.data / "estimate.json"
    write_estimate(out, session.estimate)
    print(f"Estimated {len(session.estimate)} poses -> {out}")
    return 0


def cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> int:
    estimate = read_estimate(args.estimate)
    scene = load_scene(args.scene)
    report = evaluate_scene(estimate, scene, args.theta_mspd_px, args.theta_mssd_frac)
    write_report(args.out, report, args.csv)
    for name, value in sorted(report.ar.items()):
        print(f"AR {name}: {value:.4f}")
    return 0


def cmd_render(args: argparse.Namespace, config: PipelineConfig) -> int:
    scene = load_scene(args.scene)
    out = Path(args.out)
    for v, camera in enumerate(scene.cameras):
        render = render_view(scene.meshes, scene.poses, camera)
        write_raw_grid(out / f"curvature_v{v:02d}.raw", render.curvature)
        write_png16(out / f"curvature_v{v:02d}.png", render.curvature, "curvature", v)
        write_normals_png(out / f"normals_v{v:02d}.png", render.normals, v)
        # Depth is stored in millimeters.
        write_png16(out / f"depth_v{v:02d}.png", render.depth, "depth", v, scale=1000.0)
    print(f"Rendered {len(scene.cameras)} views -> {out}")
    return 0


def perturbed_candidates(scene: Scene, n: int, rng: np.random.Generator) -> List[PoseSet]:
    """Whole-scene pose sets with every instance jittered around the ground truth."""
    candidates: List[PoseSet] = []
    for _ in range(n):
        pose_set = []
        for mesh, pose in zip(scene.meshes, scene.poses):
            rotation = Pose.from_rotvec(rng.normal(0.0, 0.1, size=3)).rotation @ pose.rotation
            translation = pose.translation + rng.normal(0.0, 0.01, size=3)
            pose_set.append((mesh, Pose(rotation, translation)))
        candidates.append(pose_set)
    return candidates


def cmd_bench_cost(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.candidates < 1 or args.workers < 1:
        raise ConfigError("bench-cost needs --candidates >= 1 and --workers >= 1")
    scene = load_scene(args.scene) if args.scene else generate_scene(SceneGenerationSpec(), 0)
    targets = [
        curvature_target(scene.meshes, scene.poses, camera, view_index=v)
        for v, camera in enumerate(scene.cameras)
    ]
    cost_config = dataclasses.replace(config.cost, backend=args.backend)
    context = SceneContext.from_targets(scene.cameras, targets, cost_config)
    candidates = perturbed_candidates(scene, args.candidates, np.random.default_rng(args.seed))

    single = benchmark_cost(context, candidates, workers=1)
    multi = benchmark_cost(context, candidates, workers=args.workers)
    identical = bool(np.array_equal(single.costs, multi.costs))
    speedup = multi.evaluations_per_second / single.evaluations_per_second
    summary = {
        "candidates": len(candidates),
        "views": len(scene.cameras),
        "backend": args.backend,
        "evaluations_per_second": {
            "1": single.evaluations_per_second,
            str(args.workers): multi.evaluations_per_second,
        },
        "speedup": speedup,
        "identical_costs": identical,
    }
    print(json.dumps(summary, indent=2))
    if not identical:
        logger.error("Cost vectors differ between worker counts")
        return 4
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "centers": cmd_centers,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "render": cmd_render,
    "bench-cost": cmd_bench_cost,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)

    try:
        configure_logging(args)
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except CurvposeError as e:
        print(f"curvpose {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"curvpose {args.command}: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
