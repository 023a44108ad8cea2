"""Command-line front end.

Subcommands: phantom, simulate, reconstruct, sweep. Every output directory
gets a run manifest with the resolved config, seeds, file hashes and timing;
feeding a manifest back through --config reproduces the run bit-identically.
Exit codes: 0 success (including non-converged with a warning), 1 validation
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    config_to_strings,
    geometry_from_config,
    load_config,
    noise_levels,
    phantom_materials,
)
from .forward import (
    Sinogram,
    add_poisson_noise,
    intensity_contrast,
    project,
    propagate_intensity,
)
from .geometry import make_grain_phantom
from .gridio import read_grid, read_manifest, sha256_file, write_grid, write_manifest
from .metrics import metric_report
from .operators import radon
from .pipelines import (
    CellResult,
    ExperimentSpec,
    grid_searched_cell,
    material_sweep,
    noise_sweep,
    write_cells_csv,
    write_noise_curves_csv,
)
from .render import display_range, sweep_panel, write_grayscale_png
from .retrieval import duality_delta


def _build_spec(cfg) -> ExperimentSpec:
    geo = geometry_from_config(cfg)
    bg, a, b = phantom_materials(cfg)
    rec = cfg.get("reconstruct", {})
    return ExperimentSpec(
        geometry=geo,
        background=bg,
        grain_a=a,
        grain_b=b,
        n_grains=cfg["phantom"]["n_grains"],
        phantom_seed=geo.rng_seed,
        sigma_rule=rec.get("sigma", "smallest-beta-grain"),
        alpha_tsd=rec.get("alpha_tsd"),
        alpha_acd=rec.get("alpha_acd"),
        noise_seed=geo.rng_seed + 1000,
        epsilon=rec.get("epsilon", 1e-3),
        tau_tol=rec.get("tau_tol", 1e-6),
        max_iters=rec.get("max_iters", 20000),
    )


def _manifest_base(command: str, cfg) -> dict:
    return {
        "tool": "pctrecon",
        "version": __version__,
        "command": command,
        "config": config_to_strings(cfg),
        "inputs": {},
        "outputs": {},
    }


def _hash_outputs(manifest: dict, outdir: Path, names) -> None:
    for name in names:
        manifest["outputs"][name] = sha256_file(outdir / name)


def cmd_phantom(args) -> int:
    cfg = load_config(args.config, full_scale=args.full_scale)
    spec = _build_spec(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ph = make_grain_phantom(spec.geometry, spec.background, spec.grain_a,
                            spec.grain_b, spec.n_grains, spec.phantom_seed)
    write_grid(outdir / "beta.grid", ph.beta_map, "beta")
    write_grid(outdir / "delta.grid", ph.delta_map, "delta")
    write_grid(outdir / "labels.grid", ph.label_map.astype(float), "labels")
    lo, hi = display_range(ph.beta_map)
    write_grayscale_png(outdir / "preview.png", ph.beta_map, lo, hi)
    manifest = _manifest_base("phantom", cfg)
    manifest["sigma"] = spec.resolve_sigma()
    manifest["seeds"] = {"phantom": spec.phantom_seed}
    manifest["timing_s"] = time.perf_counter() - t0
    _hash_outputs(manifest, outdir, ["beta.grid", "delta.grid", "labels.grid",
                                     "preview.png"])
    write_manifest(outdir / "manifest.json", manifest)
    print(f"phantom written to {outdir}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, full_scale=args.full_scale)
    spec = _build_spec(cfg)
    geo = spec.geometry
    phantom_dir = Path(args.phantom)
    beta, _ = read_grid(phantom_dir / "beta.grid")
    delta, _ = read_grid(phantom_dir / "delta.grid")
    if beta.shape != (geo.n_pixels, geo.n_pixels):
        raise ConfigError(
            f"phantom {beta.shape} does not match configured grid "
            f"({geo.n_pixels}, {geo.n_pixels})"
        )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    from .geometry import Phantom

    ph = Phantom(beta, delta, np.zeros_like(beta, dtype=int))
    A = radon(geo)
    B, phi = project(ph, geo, A)
    clean = propagate_intensity(B, phi, geo)
    noisy = add_poisson_noise(clean, geo.photons_N0, spec.noise_seed)
    g = intensity_contrast(noisy)
    write_grid(outdir / "intensity_clean.grid", clean.values, "intensity")
    write_grid(outdir / "intensity_noisy.grid", noisy.values, "intensity")
    write_grid(outdir / "contrast.grid", g.values, "contrast")
    manifest = _manifest_base("simulate", cfg)
    manifest["sigma"] = spec.resolve_sigma()
    manifest["seeds"] = {"noise": spec.noise_seed}
    manifest["inputs"] = {
        "beta.grid": sha256_file(phantom_dir / "beta.grid"),
        "delta.grid": sha256_file(phantom_dir / "delta.grid"),
    }
    manifest["timing_s"] = time.perf_counter() - t0
    _hash_outputs(manifest, outdir, ["intensity_clean.grid",
                                     "intensity_noisy.grid", "contrast.grid"])
    write_manifest(outdir / "manifest.json", manifest)
    print(f"simulated dataset written to {outdir}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config, full_scale=args.full_scale)
    spec = _build_spec(cfg)
    if args.alpha is not None:
        if args.method == "tsd":
            spec.alpha_tsd = args.alpha
        else:
            spec.alpha_acd = args.alpha
    if args.max_iters is not None:
        spec.max_iters = args.max_iters
    geo = spec.geometry
    data_dir = Path(args.data)
    g_values, kind = read_grid(data_dir / "contrast.grid")
    if kind != "contrast":
        raise ConfigError(f"{data_dir}/contrast.grid holds {kind!r} data")
    if g_values.shape != (geo.n_detector, geo.n_angles):
        raise ConfigError(
            f"data shape {g_values.shape} does not match configured detector "
            f"({geo.n_detector}, {geo.n_angles})"
        )
    g = Sinogram(g_values, "contrast")

    phantom = None
    if args.phantom is not None:
        from .geometry import Phantom

        pdir = Path(args.phantom)
        beta, _ = read_grid(pdir / "beta.grid")
        delta, _ = read_grid(pdir / "delta.grid")
        labels, _ = read_grid(pdir / "labels.grid")
        phantom = Phantom(beta, delta, labels.astype(int))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    sigma = spec.resolve_sigma()
    if phantom is not None:
        cell = grid_searched_cell(spec, args.method, g, phantom, "reconstruct",
                                  geo.photons_N0)
        report, alpha = cell.report, cell.alpha
    else:
        from .pipelines import run_acd, run_tsd

        pinned = spec.alpha_tsd if args.method == "tsd" else spec.alpha_acd
        if pinned is None:
            raise ConfigError(
                "no ground truth given: set alpha via --alpha or [reconstruct] "
                f"alpha_{args.method}"
            )
        report = run_tsd(spec, g) if args.method == "tsd" else run_acd(spec, g)
        alpha = pinned

    beta_rec = report.solution
    delta_rec = duality_delta(beta_rec, sigma)
    write_grid(outdir / "beta_recon.grid", beta_rec, "beta")
    write_grid(outdir / "delta_recon.grid", delta_rec, "delta")
    if phantom is not None:
        lo, hi = display_range(phantom.beta_map)
        range_source = "ground-truth"
    else:
        lo, hi = display_range(beta_rec)
        range_source = "self"
    write_grayscale_png(outdir / "beta_recon.png", beta_rec, lo, hi)
    with open(outdir / "residuals.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "p_sq", "d_sq", "objective"])
        for row in report.residual_csv_rows():
            writer.writerow(row)

    manifest = _manifest_base(f"reconstruct-{args.method}", cfg)
    manifest["sigma"] = sigma
    manifest["alpha"] = alpha
    manifest["seeds"] = {}
    manifest["display_range_source"] = range_source
    manifest["inputs"]["contrast.grid"] = sha256_file(data_dir / "contrast.grid")
    manifest["convergence"] = {
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residuals": list(report.residual_history[-1]),
    }
    outputs = ["beta_recon.grid", "delta_recon.grid", "beta_recon.png",
               "residuals.csv"]
    if phantom is not None:
        mr = metric_report(beta_rec, phantom.beta_map, phantom.label_map,
                           n_classes=len(np.unique(phantom.label_map)))
        with open(outdir / "metrics.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["E", "Es", "thresholds", "class_counts"])
            writer.writerow([
                f"{mr.relative_error:.8f}", f"{mr.segmentation_error:.8f}",
                ";".join(f"{t:.6e}" for t in mr.thresholds),
                ";".join(str(c) for c in mr.class_counts),
            ])
        outputs.append("metrics.csv")
        manifest["metrics"] = {"E": mr.relative_error, "Es": mr.segmentation_error}
    manifest["timing_s"] = time.perf_counter() - t0
    _hash_outputs(manifest, outdir, outputs)
    write_manifest(outdir / "manifest.json", manifest)
    if not report.converged:
        print(f"warning: solver stopped at max_iters={spec.max_iters} without "
              f"meeting the residual criterion")
    print(f"reconstruction ({args.method}) written to {outdir}")
    return 0


def _write_cell_outputs(outdir: Path, cells, phantoms) -> None:
    for cell in cells:
        if cell.beta is None:
            continue
        cell_dir = outdir / "cells" / f"{cell.experiment_id}-{cell.method}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_grid(cell_dir / "beta_recon.grid", cell.beta, "beta")
        phantom = phantoms[[c.experiment_id for c in cells].index(cell.experiment_id) // 2]
        lo, hi = display_range(phantom.beta_map)
        write_grayscale_png(cell_dir / "beta_recon.png", cell.beta, lo, hi)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, full_scale=args.full_scale)
    spec = _build_spec(cfg)
    workers = args.threads or cfg.get("sweep", {}).get("workers") or (os.cpu_count() or 1)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.kind == "materials":
        cells, phantoms = material_sweep(spec, workers=workers,
                                         full_scale=args.full_scale)
    else:
        cells, phantoms = noise_sweep(spec, n0_list=noise_levels(cfg),
                                      workers=workers, full_scale=args.full_scale)
    write_cells_csv(outdir / "cells.csv", cells)
    if args.kind == "noise":
        write_noise_curves_csv(outdir / "curves.csv", cells)
    _write_cell_outputs(outdir, cells, phantoms)

    panel_rows = []
    for i, phantom in enumerate(phantoms):
        row_cells = cells[2 * i:2 * i + 2]
        by_method = {c.method: c for c in row_cells}
        lo, hi = display_range(phantom.beta_map)
        images = [phantom.beta_map]
        for method in ("tsd", "acd"):
            c = by_method.get(method)
            images.append(c.beta if c is not None and c.beta is not None
                          else np.zeros_like(phantom.beta_map))
        panel_rows.append((row_cells[0].experiment_id, images, (lo, hi)))
    sweep_panel(outdir / "panel.png", panel_rows)

    manifest = _manifest_base(f"sweep-{args.kind}", cfg)
    manifest["seeds"] = {"phantom": spec.phantom_seed, "noise": spec.noise_seed}
    manifest["timing_s"] = time.perf_counter() - t0
    manifest["convergence"] = {
        f"{c.experiment_id}-{c.method}": {"iterations": c.iterations,
                                          "converged": c.converged}
        for c in cells
    }
    _hash_outputs(manifest, outdir, ["cells.csv", "panel.png"])
    write_manifest(outdir / "manifest.json", manifest)
    print(f"sweep ({args.kind}) written to {outdir}: {len(cells)} cells in "
          f"{manifest['timing_s']:.0f}s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pctrecon",
        description="Simulate and reconstruct single-distance propagation-based "
                    "phase-contrast tomography scans",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="config file (INI) or a previous run manifest (JSON)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for sweeps")
    common.add_argument("--full-scale", action="store_true",
                        help="reference-scale defaults (200 px, 572 bins, 360 angles)")

    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("phantom", parents=[common], help="generate a grain phantom")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate intensities for a phantom")
    p.add_argument("--phantom", required=True, help="phantom output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[common],
                       help="reconstruct from simulated contrast data")
    p.add_argument("method", choices=["tsd", "acd"])
    p.add_argument("--data", required=True, help="simulate output directory")
    p.add_argument("--phantom", default=None,
                   help="phantom directory for metrics and display range")
    p.add_argument("--alpha", type=float, default=None,
                   help="override the regularization weight")
    p.add_argument("--max-iters", type=int, default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", parents=[common],
                       help="run the material or noise comparison")
    p.add_argument("kind", choices=["materials", "noise"])
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None:
            # route the override through the config layer so manifests record it
            cfg = load_config(args.config, full_scale=args.full_scale)
            cfg["geometry"]["seed"] = args.seed
            import json
            import tempfile

            tmp = tempfile.NamedTemporaryFile(
                "w", suffix=".json", delete=False, prefix="pctrecon-cfg-"
            )
            json.dump({"config": config_to_strings(cfg)}, tmp)
            tmp.close()
            args.config = tmp.name
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
