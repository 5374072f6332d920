"""Command-line interface for the monitoring workflow.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import pipeline
from .cloud import bounding_box
from .distances import c2c_distances, hausdorff as hausdorff_summary, write_field_csv
from .errors import CloudTwinError
from .io import FORMATS, load_cloud, save_cloud
from .regions import crop as crop_op, exclude as exclude_op, load_regions
from .registration import (
    RigidTransform,
    apply_transform,
    icp_refine,
    load_correspondences,
    rough_align,
)
from .simulate import load_simulation_spec, run_simulation

_fmt_option = click.option(
    "--format", "fmt", type=click.Choice(FORMATS), default=None,
    help="Cloud file format (auto-detected when omitted).")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for any randomized data generation.")
@click.option("--threads", type=int, default=None,
              help="Cap on worker threads for parallel kernels.")
@click.pass_context
def cli(ctx, seed, threads):
    """Point-cloud change monitoring: registration, C2C distances, synthetic
    deterioration, and epoch comparison reports."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    if threads is not None:
        import numba
        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def _print_transform(T: RigidTransform):
    q = T.to_quaternion()
    click.echo("rotation:")
    for row in T.rotation:
        click.echo("  [{: .9f} {: .9f} {: .9f}]".format(*row))
    click.echo("translation: [{:.9g} {:.9g} {:.9g}]".format(*T.translation))
    click.echo("quaternion (w x y z): [{:.9g} {:.9g} {:.9g} {:.9g}]".format(*q))


@cli.command()
@click.argument("cloud_path", type=click.Path(exists=True))
@_fmt_option
def info(cloud_path, fmt):
    """Print point count, color presence, and the tight bounding box."""
    cloud = load_cloud(cloud_path, fmt)
    click.echo(f"points: {len(cloud)}")
    click.echo(f"colors: {'yes' if cloud.has_colors else 'no'}")
    if len(cloud):
        box = bounding_box(cloud)
        click.echo("bbox min: [{:.9g} {:.9g} {:.9g}]".format(*box.min))
        click.echo("bbox max: [{:.9g} {:.9g} {:.9g}]".format(*box.max))
        click.echo(f"bbox diagonal: {box.diagonal:.9g}")


def _single_region(region_path):
    regions = load_regions(region_path)
    if len(regions) != 1:
        raise CloudTwinError(
            f"{region_path} holds {len(regions)} regions; exactly one expected")
    return regions[0]


@cli.command()
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("region_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@_fmt_option
def crop(cloud_path, region_path, output, fmt):
    """Keep only the points inside an oriented-box region."""
    cloud = load_cloud(cloud_path, fmt)
    result = crop_op(cloud, _single_region(region_path))
    save_cloud(result, output)
    click.echo(f"kept {len(result)} of {len(cloud)} points -> {output}")


@cli.command()
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("region_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@_fmt_option
def exclude(cloud_path, region_path, output, fmt):
    """Remove the points inside an oriented-box region."""
    cloud = load_cloud(cloud_path, fmt)
    result = exclude_op(cloud, _single_region(region_path))
    save_cloud(result, output)
    click.echo(f"kept {len(result)} of {len(cloud)} points -> {output}")


@cli.command()
@click.argument("corr_path", type=click.Path(exists=True))
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Also write the transform as JSON.")
def align(corr_path, json_out):
    """Closed-form rough alignment from a correspondence file."""
    corr = load_correspondences(corr_path)
    T, rmse = rough_align(corr)
    _print_transform(T)
    click.echo(f"residual rmse: {rmse:.9g}  (pairs: {len(corr)})")
    if json_out:
        with open(json_out, "w") as f:
            json.dump({
                "quaternion": [float(v) for v in T.to_quaternion()],
                "translation": [float(v) for v in T.translation],
                "rmse": rmse,
            }, f, indent=2)


@cli.command()
@click.argument("reference", type=click.Path(exists=True))
@click.argument("floating", type=click.Path(exists=True))
@click.option("--corr", type=click.Path(exists=True), default=None,
              help="Correspondence file for the initial rough alignment.")
@click.option("--max-iterations", default=50, show_default=True)
@click.option("--tol", default=1e-6, show_default=True,
              help="Stop when the RMSE change drops below this.")
@click.option("--trim", default=1.0, show_default=True,
              help="Fraction of best matches kept each iteration.")
@click.option("--apply-to", type=click.Path(), default=None,
              help="Write the aligned floating cloud here.")
def icp(reference, floating, corr, max_iterations, tol, trim, apply_to):
    """Refine the alignment of FLOATING onto REFERENCE with ICP."""
    ref = load_cloud(reference)
    flo = load_cloud(floating)
    initial = None
    if corr:
        initial, _ = rough_align(load_correspondences(corr))
    result = icp_refine(ref, flo, initial, max_iterations=max_iterations,
                        rmse_delta_tol=tol, trim_fraction=trim)
    _print_transform(result.transform)
    click.echo(f"iterations: {result.iterations}  converged: {result.converged}")
    click.echo(f"final rmse: {result.final_rmse:.9g}")
    if apply_to:
        save_cloud(apply_transform(flo, result.transform), apply_to)
        click.echo(f"aligned cloud -> {apply_to}")


@cli.command()
@click.argument("reference", type=click.Path(exists=True))
@click.argument("floating", type=click.Path(exists=True))
@click.option("--csv", "csv_out", type=click.Path(), default=None)
def c2c(reference, floating, csv_out):
    """Per-point distances from FLOATING to its nearest points in REFERENCE."""
    ref = load_cloud(reference)
    flo = load_cloud(floating)
    field = c2c_distances(ref, flo)
    d = field.distances
    click.echo(f"points: {len(field)}")
    click.echo(f"mean: {d.mean():.9g}  median: {np.median(d):.9g}  max: {d.max():.9g}")
    if csv_out:
        write_field_csv(field, flo, csv_out)
        click.echo(f"distance table -> {csv_out}")


@cli.command()
@click.argument("cloud_a", type=click.Path(exists=True))
@click.argument("cloud_b", type=click.Path(exists=True))
def hausdorff(cloud_a, cloud_b):
    """Symmetric Hausdorff distance between two clouds."""
    a = load_cloud(cloud_a)
    b = load_cloud(cloud_b)
    s = hausdorff_summary(a, b)
    click.echo(f"directed h(A,B): {s.directed_h_ab:.9g}")
    click.echo(f"directed h(B,A): {s.directed_h_ba:.9g}")
    click.echo(f"Hausdorff H(A,B): {s.hausdorff:.9g}")


@cli.command()
@click.argument("cloud_path", type=click.Path(exists=True))
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def simulate(cloud_path, spec_path, output):
    """Inject a synthetic deterioration (recolor or shift) into a cloud."""
    cloud = load_cloud(cloud_path)
    spec = load_simulation_spec(spec_path)
    result = run_simulation(cloud, spec)
    save_cloud(result, output)
    click.echo(f"simulated {spec['mode']} -> {output}")


@cli.group()
def epoch():
    """Epoch registry operations."""


@epoch.command("add")
@click.option("--registry", required=True, type=click.Path())
@click.option("--id", "epoch_id", required=True)
@click.option("--cloud", "cloud_path", required=True, type=click.Path(exists=True))
@click.option("--captured-at", default="", help="ISO-8601 capture timestamp.")
@click.option("--notes", default="")
@click.option("--corr", type=click.Path(exists=True), default=None,
              help="Correspondence file aligning this epoch to the reference.")
@click.option("--identity", is_flag=True,
              help="The cloud is already in the reference frame; skip alignment.")
@click.option("--rmse-ceiling", type=float, default=float("inf"),
              help="Flag the registration when its final RMSE exceeds this.")
@_fmt_option
def epoch_add(registry, epoch_id, cloud_path, captured_at, notes, corr, identity,
              rmse_ceiling, fmt):
    """Register an epoch; the first one defines the reference frame."""
    record = pipeline.EpochRecord(
        epoch_id=epoch_id, captured_at=captured_at,
        cloud_path=str(cloud_path), format=fmt, notes=notes,
        transform=RigidTransform.identity() if identity else None)
    correspondences = load_correspondences(corr) if corr else None
    stored = pipeline.register_epoch(registry, record, correspondences,
                                     rmse_ceiling=rmse_ceiling)
    click.echo(f"registered epoch {stored.epoch_id!r}"
               + (f" (rmse {stored.registration_rmse:.9g})"
                  if stored.registration_rmse is not None else ""))
    if stored.flagged:
        click.echo("warning: registration RMSE above ceiling; record flagged")


def _comparison(registry, ref, flo, roi_path, threshold, out_dir, ramp_max):
    regions = load_regions(roi_path)
    rois = [r for r in regions if r.role == "roi"]
    exclusions = [r for r in regions if r.role == "exclude"]
    if len(rois) != 1:
        raise CloudTwinError(f"{roi_path} must define exactly one 'roi' region")
    return pipeline.compare_epochs(
        registry, ref, flo, rois[0], exclusions, threshold,
        out_dir=out_dir, ramp_max=ramp_max)


def _echo_report(report):
    s = report.summary
    click.echo(f"compared {report.floating_epoch} vs {report.reference_epoch}: "
               f"{s.count} ROI points")
    click.echo(f"Hausdorff: {s.hausdorff:.9g}  mean: {s.mean:.9g}  p95: {s.p95:.9g}")
    click.echo(f"changed fraction (> {report.threshold_used:.9g}): "
               f"{report.changed_fraction:.9g}")
    click.echo(f"suggested threshold: {report.suggested_threshold:.9g}")
    for name, path in report.artifacts.items():
        click.echo(f"artifact {name}: {path}")


@epoch.command("compare")
@click.option("--registry", required=True, type=click.Path(exists=True))
@click.option("--ref", required=True, help="Reference epoch id.")
@click.option("--float", "flo", required=True, help="Floating epoch id.")
@click.option("--roi", "roi_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.0, show_default=True)
@click.option("--out-dir", type=click.Path(), default=None,
              help="Also write the report artifacts here.")
@click.option("--ramp-max", type=float, default=None,
              help="Color-ramp saturation distance (default: p99).")
def epoch_compare(registry, ref, flo, roi_path, threshold, out_dir, ramp_max):
    """Compare two registered epochs over an ROI."""
    report = _comparison(registry, ref, flo, roi_path, threshold, out_dir, ramp_max)
    _echo_report(report)


@cli.command()
@click.option("--registry", required=True, type=click.Path(exists=True))
@click.option("--ref", required=True)
@click.option("--float", "flo", required=True)
@click.option("--roi", "roi_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--ramp-max", type=float, default=None)
def report(registry, ref, flo, roi_path, threshold, out_dir, ramp_max):
    """Run a comparison and emit the full decision-support report."""
    rep = _comparison(registry, ref, flo, roi_path, threshold, out_dir, ramp_max)
    _echo_report(rep)


def main(argv=None) -> int:
    """Entry point honouring the exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as e:
        return 0 if e.exit_code == 0 else 1
    except (click.UsageError, click.Abort) as e:
        if isinstance(e, click.UsageError):
            click.echo(e.format_message(), err=True)
        return 1
    except CloudTwinError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except OSError as e:
        click.echo(f"I/O error: {e}", err=True)
        return 3


def entry():  # console_scripts hook
    sys.exit(main())
