"""Command-line driver wiring configuration, pipeline, experiments, reports.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or usage,
3 pipeline diagnostic (degenerate-site explosion or invalid state).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

from . import __version__
from .cell import CellError
from .engine import Config, ConfigError, PipelineError, run_remesh
from .extract import compute_rvd, dual_triangulate, edge_manifold_violations
from .knn import PointIndex
from .mesh import MeshError, load_mesh, save_mesh
from .quality import mesh_quality, quality_report
from . import report as rpt

logger = logging.getLogger("cvtremesh")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_PIPELINE = 3

# Fraction of sites allowed to fall back to "stay in place" per iteration
# before the run is flagged as diagnostically broken.
DEGENERATE_FRACTION_LIMIT = 0.2


def _add_remesh_config_flags(p):
    p.add_argument("--alpha", type=float, default=0.8,
                   help="cosine threshold for the second clip (default 0.8)")
    p.add_argument("--beta", type=float, default=0.7,
                   help="cosine threshold for the third clip (default 0.7)")
    p.add_argument("--max-clips", type=int, default=3, choices=(1, 2, 3),
                   help="cap on facet clips per cell (default 3)")
    p.add_argument("--knn", type=int, default=24,
                   help="neighbor count for Voronoi cell construction (default 24)")
    p.add_argument("--epsilon", type=float, default=1e-4,
                   help="stop when max displacement / bbox diag drops below (default 1e-4)")
    p.add_argument("--max-iters", type=int, default=100,
                   help="iteration cap (default 100)")
    p.add_argument("--k-proj", type=int, default=8,
                   help="vertex neighbors for surface projection (default 8)")
    p.add_argument("--padding", type=float, default=0.05,
                   help="bounding box padding as a fraction of bbox diag (default 0.05)")
    p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; 0 = one per CPU (default 1)")


def _add_report_flags(p):
    p.add_argument("--report", help="write the quality report JSON here "
                                    "(a CSV row and figures land alongside)")
    p.add_argument("--samples", type=int, default=100000,
                   help="surface-distance samples per side (default 100000)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering PNG figures next to the report")


def _config_from_args(args):
    return Config(
        n=args.sites, alpha=args.alpha, beta=args.beta, max_clips=args.max_clips,
        knn=args.knn, epsilon=args.epsilon, max_iters=args.max_iters,
        k_proj=args.k_proj, seed=args.seed, padding=args.padding,
        threads=args.threads,
    ).validate()


def _run_pipeline(mesh, cfg):
    """Remesh + extraction; returns (output mesh, remesh result, timings)."""
    result = run_remesh(mesh, cfg)
    t0 = time.perf_counter()
    rvd = compute_rvd(mesh, result.sites, PointIndex(result.sites.positions), cfg.knn)
    out_mesh = dual_triangulate(rvd, result.sites)
    extraction = time.perf_counter() - t0
    timings = {
        "sampling": result.sampling_seconds,
        "iterations": sum(s.seconds for s in result.iterations),
        "extraction": extraction,
    }
    return out_mesh, result, timings


def _check_degenerate(result):
    if not result.iterations:
        return
    last = result.iterations[-1]
    n = sum(last.level_counts)
    if n and last.degenerate / n > DEGENERATE_FRACTION_LIMIT:
        raise PipelineError(
            f"{last.degenerate}/{n} sites had degenerate cross-sections "
            f"in the final iteration"
        )


def _report_stem(path):
    stem, ext = os.path.splitext(path)
    return stem if ext else path


def cmd_remesh(args):
    mesh = load_mesh(args.input)
    cfg = _config_from_args(args)
    t_total = time.perf_counter()
    out_mesh, result, timings = _run_pipeline(mesh, cfg)
    _check_degenerate(result)
    save_mesh(out_mesh, args.output)

    violations = edge_manifold_violations(out_mesh)
    if violations:
        logger.warning("output has %d non-manifold edges", len(violations))

    t_report = args.time if args.time is not None else sum(timings.values())
    report = None
    if args.report:
        t0 = time.perf_counter()
        report = quality_report(mesh, out_mesh, T=t_report,
                                samples=args.samples, seed=cfg.seed)
        timings["metrics"] = time.perf_counter() - t0
        rpt.write_report_json(report, args.report)
        stem = _report_stem(args.report)
        rpt.write_report_csv(report, stem + ".csv")
        if not args.no_figures:
            rpt.render_metrics_figures(report, mesh, out_mesh, stem)
            rpt.render_convergence_figure(result.iterations, stem)
        print(rpt.format_table(report))

    if args.manifest:
        manifest = {
            "tool": "cvtremesh",
            "version": __version__,
            "config": dataclasses.asdict(cfg),
            "input": args.input,
            "output": args.output,
            "seed": cfg.seed,
            "iterations": len(result.iterations),
            "final_delta": result.iterations[-1].delta if result.iterations else None,
            "unsecured_final": result.iterations[-1].unsecured if result.iterations else 0,
            "phase_seconds": timings,
            "total_seconds": time.perf_counter() - t_total,
        }
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    if not args.report:
        n_it = len(result.iterations)
        delta = result.iterations[-1].delta if result.iterations else float("nan")
        print(f"remeshed {args.input} -> {args.output}: "
              f"{len(out_mesh.vertices)} vertices, {len(out_mesh.faces)} faces, "
              f"{n_it} iterations, final delta {delta:.3g}")
    return EXIT_OK


def cmd_metrics(args):
    mesh_in = load_mesh(args.input)
    mesh_out = load_mesh(args.output_mesh)
    if args.time is not None and args.time <= 0:
        raise ConfigError("--time must be positive")
    report = quality_report(mesh_in, mesh_out, T=args.time or 1.0,
                            samples=args.samples, seed=args.seed)
    print(rpt.format_table(report))
    if args.report:
        rpt.write_report_json(report, args.report)
        stem = _report_stem(args.report)
        rpt.write_report_csv(report, stem + ".csv")
        if not args.no_figures:
            rpt.render_metrics_figures(report, mesh_in, mesh_out, stem)
    return EXIT_OK


def _parse_grid(spec):
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step, got {spec!r}")
    start, stop, step = (float(x) for x in parts)
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid {spec!r}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def cmd_sweep(args):
    mesh = load_mesh(args.input)
    alphas = _parse_grid(args.alpha_grid)
    betas = _parse_grid(args.beta_grid)
    rows = []
    for alpha in alphas:
        for beta in betas:
            cfg = _config_from_args(args)
            cfg.alpha = alpha
            cfg.beta = beta
            cfg.validate()
            out_mesh, result, timings = _run_pipeline(mesh, cfg)
            q_avg = mesh_quality(out_mesh)[1]
            t = sum(timings.values())
            rows.append((alpha, beta, q_avg, t))
            logger.info("sweep alpha=%g beta=%g Q_avg=%.4f T=%.2fs", alpha, beta, q_avg, t)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            rpt.write_sweep_csv(rows, fh)
        if not args.no_figures:
            rpt.render_sweep_figures(rows, _report_stem(args.csv))
    rpt.write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_gen(args):
    from . import shapes

    if args.shape == "icosphere":
        mesh = shapes.icosphere(args.subdivisions, radius=args.size)
    elif args.shape == "rounded-cube":
        mesh = shapes.rounded_cube(args.divisions, fillet=args.fillet, half=args.size)
    elif args.shape == "grid":
        mesh = shapes.flat_grid(args.divisions, args.divisions, size=args.size)
    else:
        mesh = shapes.cube(half=args.size)
    save_mesh(mesh, args.out)
    print(f"wrote {args.shape}: {len(mesh.vertices)} vertices, "
          f"{len(mesh.faces)} faces -> {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cvtremesh",
        description="CVT-based isotropic surface remeshing with "
                    "curvature-adaptive facet clipping",
    )
    parser.add_argument("--version", action="version", version=f"cvtremesh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("remesh", help="remesh an OBJ surface")
    p.add_argument("--input", required=True, help="input OBJ path")
    p.add_argument("--sites", required=True, type=int, help="number of output vertices")
    p.add_argument("--output", required=True, help="output OBJ path")
    _add_remesh_config_flags(p)
    _add_report_flags(p)
    p.add_argument("--time", type=float, default=None,
                   help="report this T instead of the measured wall time "
                        "(for byte-reproducible reports)")
    p.add_argument("--manifest", help="write a run manifest JSON here")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="-v: iteration stats as JSON lines; -vv: per-site decisions")
    p.set_defaults(func=cmd_remesh)

    p = sub.add_parser("metrics", help="evaluate an input/output mesh pair")
    p.add_argument("--input", required=True, help="input (reference) OBJ path")
    p.add_argument("--output-mesh", required=True, help="remeshed OBJ path")
    p.add_argument("--time", type=float, default=None,
                   help="remeshing time T in seconds used for Q_up/T (default 1)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    _add_report_flags(p)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="grid-sweep alpha/beta and emit CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--sites", required=True, type=int)
    p.add_argument("--alpha-grid", required=True,
                   help="alpha values as start:stop:step or a single value")
    p.add_argument("--beta-grid", required=True,
                   help="beta values as start:stop:step or a single value")
    p.add_argument("--csv", help="also write the CSV (and heatmap figures) here")
    _add_remesh_config_flags(p)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="generate a procedural test mesh")
    p.add_argument("--shape", required=True,
                   choices=("icosphere", "rounded-cube", "grid", "cube"))
    p.add_argument("--out", required=True)
    p.add_argument("--subdivisions", type=int, default=3,
                   help="icosphere subdivision level (default 3)")
    p.add_argument("--divisions", type=int, default=12,
                   help="grid cells per side (default 12)")
    p.add_argument("--fillet", type=float, default=0.25,
                   help="rounded-cube edge radius (default 0.25)")
    p.add_argument("--size", type=float, default=1.0,
                   help="radius / half-width / edge length (default 1)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_gen)
    return parser


def _setup_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(getattr(args, "verbose", 0))
    try:
        return args.func(args)
    except (MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, CellError) as exc:
        print(f"pipeline diagnostic: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
