"""``agavescan`` command line: one verb per pipeline stage.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 adapter error.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import fixtures as fixture_data
from . import io as aio
from .config import load_config, to_toml
from .curator import CuratorError, LabelStore
from .geo import BitMask, InvalidInputError, Raster, make_grid, rasterize
from .maturity import (classify_tile, balance_split, extract_tiles,
                       parcel_maturity, write_tile_dataset)
from .metrics import (aggregate, evaluation_report, object_match, report_table,
                      save_report, seg_score)
from .preprocess import (SplitManifest, build_split, clip_cell, list_clip_ids,
                         load_clip_pair, resample_to_u8, save_clip_pair)
from .segmenter import AdapterError, infer, threshold_map
from .synth import generate_batch


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Pipeline config TOML.")
@click.option("--jobs", type=int, default=None,
              help="Worker pool size (default: available cores).")
@click.pass_context
def cli(ctx, config_path, jobs):
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path)
    ctx.obj["jobs"] = jobs or os.cpu_count() or 1


@cli.command("config")
@click.pass_context
def dump_config(ctx):
    """Print the effective configuration as TOML."""
    click.echo(to_toml(ctx.obj["config"]))


@cli.command()
@click.option("--scene", required=True, type=click.Path(exists=True),
              help="Input GeoTIFF scene.")
@click.option("--labels", "labels_path", type=click.Path(exists=True),
              default=None, help="Expert labels (GeoJSON).")
@click.option("--cell-km", type=float, default=None)
@click.option("--clip", "clip_size", type=int, default=None)
@click.option("--split-assignment", type=click.Path(exists=True), default=None,
              help="JSON map of cell_id to train/val/test.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def preprocess(ctx, scene, labels_path, cell_km, clip_size, split_assignment, out):
    """Grid, resample to 8-bit, rasterize labels and cut 256x256 clips."""
    cfg = ctx.obj["config"]
    cell_km = cell_km if cell_km is not None else cfg.cell_km
    clip_size = clip_size if clip_size is not None else cfg.clip_size
    pixels, transform = aio.read_geotiff(scene)
    scene_raster = Raster(pixels, transform)
    labels = aio.load_labels(labels_path) if labels_path else []
    scene_mask = rasterize([lab.polygon for lab in labels], transform,
                           scene_raster.width, scene_raster.height)
    x0, y0 = transform.pixel_to_map(0, scene_raster.height)
    x1, y1 = transform.pixel_to_map(scene_raster.width, 0)
    cells = make_grid((x0, min(y0, y1), x1, max(y0, y1)), cell_km * 1000.0)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process_cell(cell):
        c0, r0 = transform.map_to_pixel(cell.bounds[0], cell.bounds[3])
        c1, r1 = transform.map_to_pixel(cell.bounds[2], cell.bounds[1])
        c0, r0 = max(0, int(round(c0))), max(0, int(round(r0)))
        c1 = min(scene_raster.width, int(round(c1)))
        r1 = min(scene_raster.height, int(round(r1)))
        if c1 <= c0 or r1 <= r0:
            return []
        window = scene_raster.window(c0, r0, c1 - c0, r1 - r0)
        window = resample_to_u8(window)
        cell_mask = BitMask(scene_mask.data[r0:r1, c0:c1])
        return clip_cell(window, cell_mask, str(cell.cell_id), clip_size)

    with ThreadPoolExecutor(max_workers=ctx.obj["jobs"]) as pool:
        per_cell = list(pool.map(process_cell, cells))
    clips = [clip for group in per_cell for clip in group]
    for clip in clips:
        save_clip_pair(out_dir, clip)
    assignment = {str(c.cell_id): "train" for c in cells}
    if split_assignment:
        assignment.update(json.loads(Path(split_assignment).read_text()))
    manifest = build_split(clips, assignment, phase=1)
    manifest.save(out_dir / "manifest.json")
    click.echo(f"wrote {len(clips)} clips from {len(cells)} cells to {out_dir}")


@cli.command()
@click.option("--clips", "clips_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def segment(ctx, clips_dir, out):
    """Run segmentation inference and write predicted masks."""
    cfg = ctx.obj["config"]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = list_clip_ids(clips_dir)

    def run(clip_id):
        pair = load_clip_pair(clips_dir, clip_id)
        pmap = infer(pair.image, cfg.segmenter, clip_id=clip_id)
        pred = threshold_map(pmap, cfg.segmenter)
        aio.write_mask_png(out_dir / f"{clip_id}.png", pred)

    if cfg.segmenter.kind == "external":
        for clip_id in ids:  # adapters are strictly request-response
            run(clip_id)
    else:
        with ThreadPoolExecutor(max_workers=ctx.obj["jobs"]) as pool:
            list(pool.map(run, ids))
    click.echo(f"segmented {len(ids)} clips into {out_dir}")


@cli.command()
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--truth", "truth_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--objects/--no-objects", default=False,
              help="Also compute object-level TP/FP/FN at IoU 0.5.")
def evaluate(pred_dir, truth_dir, out_path, objects):
    """Score predicted masks against ground truth masks (matched by name)."""
    from scipy import ndimage

    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    truth_dir = truth_dir / "masks" if (truth_dir / "masks").exists() else truth_dir
    pred_dir = pred_dir / "masks" if (pred_dir / "masks").exists() else pred_dir
    names = sorted(p.stem for p in truth_dir.glob("*.png"))
    if not names:
        raise InvalidInputError(f"no masks found under {truth_dir}")
    per_clip = {}
    inter = union = npred = ntruth = 0
    obj_counts = None
    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for name in names:
        ppath = pred_dir / f"{name}.png"
        if not ppath.exists():
            raise InvalidInputError(f"missing prediction for clip {name}")
        pred = aio.read_mask_png(ppath)
        truth = aio.read_mask_png(truth_dir / f"{name}.png")
        per_clip[name] = seg_score(pred, truth)
        pi = int((pred.data & truth.data).sum())
        inter += pi
        npred += int(pred.data.sum())
        ntruth += int(truth.data.sum())
        if objects:
            from .metrics import ConfusionCounts

            def components(mask):
                lab, n = ndimage.label(mask.data, structure=cross)
                return [BitMask(lab == i) for i in range(1, n + 1)]

            c = object_match(components(pred), components(truth))
            if obj_counts is None:
                obj_counts = c
            else:
                obj_counts = ConfusionCounts(
                    tp=obj_counts.tp + c.tp, tn=0,
                    fp=obj_counts.fp + c.fp, fn=obj_counts.fn + c.fn)
    union = npred + ntruth - inter
    from .metrics import SegScore
    pooled = SegScore(iou=inter / union if union else 1.0,
                      dsi=2 * inter / (npred + ntruth) if (npred + ntruth) else 1.0)
    report = evaluation_report(per_clip, pooled=pooled, objects=obj_counts)
    click.echo(report_table(report))
    if out_path:
        save_report(out_path, report)


@cli.command()
@click.option("--clips", "clips_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--ratios", default="0.5625,0.25,0.1875",
              help="train,val,test tile ratios.")
def tiles(clips_dir, labels_path, out, seed, ratios):
    """Extract 32x32 maturity tiles and write a balanced split dataset."""
    labels = aio.load_labels(labels_path)
    samples = []
    for clip_id in list_clip_ids(clips_dir):
        pair = load_clip_pair(clips_dir, clip_id)
        for lab in labels:
            if lab.maturity == "unknown":
                continue
            samples.extend(extract_tiles(pair.image, lab, validity=pair.validity))
    parts = tuple(float(x) for x in ratios.split(","))
    train, val, test = balance_split(samples, parts, seed=seed)
    manifest = write_tile_dataset(out, {"train": train, "val": val, "test": test})
    click.echo(json.dumps(manifest, indent=2))


@cli.command()
@click.option("--clips", "clips_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def maturity(ctx, clips_dir, labels_path, out_path):
    """Classify parcel maturity by tile votes and write a GeoJSON report."""
    cfg = ctx.obj["config"]
    labels = aio.load_labels(labels_path)
    votes: dict[str, list[str]] = {}
    for clip_id in list_clip_ids(clips_dir):
        pair = load_clip_pair(clips_dir, clip_id)
        for lab in labels:
            for tile in extract_tiles(pair.image, lab, validity=pair.validity):
                cls, _conf = classify_tile(tile.image, cfg.maturity,
                                           tile_id=tile.tile_id)
                votes.setdefault(lab.id, []).append(cls)
    fc = {"type": "FeatureCollection", "features": []}
    for lab in labels:
        if lab.id not in votes:
            continue
        verdict = parcel_maturity(votes[lab.id], parcel_id=lab.id)
        fc["features"].append({
            "type": "Feature",
            "geometry": {"type": "Polygon",
                         "coordinates": [[list(p) for p in ring]
                                         for ring in lab.polygon.rings]},
            "properties": {
                "id": lab.id,
                "maturity": verdict.maturity,
                "tile_votes": verdict.tile_votes,
                "tie_broken": verdict.tie_broken,
            },
        })
    Path(out_path).write_text(json.dumps(fc, indent=2))
    click.echo(f"classified {len(fc['features'])} parcels")


@cli.group()
def synth():
    """Synthetic training data."""


@synth.command("generate")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=7)
@click.option("--profile", type=click.Choice(["agave", "decoy", "mixed"]),
              default="mixed")
@click.option("--out", required=True, type=click.Path())
def synth_generate(n, seed, profile, out):
    """Generate n seeded synthetic clips with exact labels."""
    pairs, manifest = generate_batch(n, seed=seed, profile=profile, out_dir=out)
    click.echo(f"generated {len(pairs)} synthetic clips into {out}")


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--ui-dir", type=click.Path(), default=None)
@click.pass_context
def serve(ctx, store_dir, host, port, ui_dir):
    """Run the curator HTTP service (and review UI, when built)."""
    import uvicorn

    from .service import create_app

    cfg = ctx.obj["config"]
    store = LabelStore(store_dir)
    app = create_app(store, cfg.segmenter, ui_dir=ui_dir)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port,
                log_level="warning")


@cli.command()
@click.option("--phase", type=int, required=True)
@click.option("--store", "store_dir", type=click.Path(exists=True), default=None)
def report(phase, store_dir):
    """Dataset report for a phase (store when given, else shipped fixtures)."""
    if store_dir:
        store = LabelStore(store_dir)
        data = store.dataset_report(phase)
    else:
        manifest = fixture_data.phase_manifest(phase)
        provenance: dict[str, int] = {}
        for e in manifest.entries:
            p = e.get("provenance", "expert")
            provenance[p] = provenance.get(p, 0) + 1
        data = {"phase": phase, "counts": manifest.counts,
                "total": manifest.total, "provenance": provenance}
    click.echo(json.dumps(data, indent=2))


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--from-phase", type=int, required=True)
@click.option("--entries", "entries_path", type=click.Path(exists=True), default=None)
@click.option("--allow-pending", is_flag=True, default=False)
def promote(store_dir, from_phase, entries_path, allow_pending):
    """Promote a phase dataset to the next phase."""
    store = LabelStore(store_dir)
    entries = json.loads(Path(entries_path).read_text()) if entries_path else None
    ds = store.promote_phase(from_phase, new_entries=entries,
                             allow_pending=allow_pending)
    click.echo(json.dumps(store.dataset_report(ds.phase), indent=2))


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return 3
    except (InvalidInputError, CuratorError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
