"""Command line surface for every pipeline stage.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.  All
randomness flows from --seed; artifacts land under --out.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as ds
from . import glyphgraph as gg
from . import outline as ol
from . import raster
from . import tasks
from .neural import ModelConfig, TrainConfig, train as run_train
from .raster import RasterImage

STAGE_ALIASES = {
    "pretrain": "pretrain_encoder",
    "pretrain_encoder": "pretrain_encoder",
    "joint": "joint",
    "renderer": "renderer",
    "baseline": "baseline",
}


@click.group()
def cli():
    """Glyph multi-modality toolkit: datasets, training, completion, serving."""


@cli.command()
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--fonts", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--glyphs", default=ds.LETTERS, show_default=False)
def synth(out: Path, fonts: int, seed: int, glyphs: str):
    """Write a synthetic font corpus in the ingestion source layout."""
    params = ds.write_synth_corpus(out, n_fonts=fonts, seed=seed, glyphs=glyphs)
    click.echo(f"wrote {len(params)} fonts x {len(glyphs)} glyphs under {out}")


@cli.command()
@click.option("--source", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
def ingest(source: Path, out: Path, workers: int):
    """Parse, normalize, graph and rasterize every glyph under --source."""
    manifest = ds.ingest(source, out, workers=workers)
    report = ds.stats(manifest)
    click.echo(
        f"ingested {report['glyphs_valid']}/{report['glyphs_total']} glyphs "
        f"from {report['fonts']} fonts -> {out / 'manifest.jsonl'}"
    )


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--test-fraction", type=float, default=0.05, show_default=True)
def split(manifest_path: Path, seed: int, test_fraction: float):
    """Assign font-level train/test splits in place."""
    manifest = ds.DatasetManifest.read(manifest_path)
    manifest = ds.split(manifest, seed=seed, test_fraction=test_fraction)
    manifest.write(manifest_path)
    sizes = ds.stats(manifest)["split_sizes"]
    click.echo(f"split -> {sizes}")


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--json", "as_json", is_flag=True)
def stats(manifest_path: Path, as_json: bool):
    """Dataset statistics: per-glyph counts, exclusions, split sizes."""
    report = ds.stats(ds.DatasetManifest.read(manifest_path))
    click.echo(json.dumps(report, indent=1) if as_json else ds.format_stats(report))


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--stage", type=click.Choice(sorted(set(STAGE_ALIASES))), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--lr-final", type=float, default=None)
@click.option("--steps", type=int, default=None, help="Hard step budget overriding --epochs.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--init-checkpoint", type=click.Path(path_type=Path), default=None)
@click.option("--glyphs", default=None, help="Renderer stage: letters to train, e.g. 'HIO'.")
@click.option("--train-split/--all-fonts", "use_split", default=True, show_default=True)
def train(manifest_path, stage, out, epochs, batch_size, lr, lr_final, steps, seed,
          init_checkpoint, glyphs, use_split):
    """Run one training stage and write a checkpoint."""
    manifest = ds.DatasetManifest.read(manifest_path)
    has_split = any(f.split for f in manifest.fonts)
    bundle = ds.load_bundle(manifest, ds.TRAINVAL if (use_split and has_split) else None)
    model_cfg = ModelConfig(s_fonts=bundle.n_fonts)
    glyph_ids = [gg.glyph_id_of(l) for l in glyphs.upper()] if glyphs else None
    cfg = TrainConfig(
        stage=STAGE_ALIASES[stage],
        out_dir=out,
        epochs=epochs,
        batch_size=batch_size,
        lr=lr,
        lr_final=lr_final,
        max_steps=steps,
        seed=seed,
        init_checkpoint=init_checkpoint,
        glyphs=glyph_ids,
    )
    ckpt = run_train(bundle, model_cfg, cfg)
    click.echo(f"checkpoint -> {ckpt}")


def _parse_targets(targets: str, c_in: int | None) -> list[int]:
    if targets == "all":
        return [c for c in range(1, gg.GLYPH_COUNT + 1) if c != c_in]
    return [gg.glyph_id_of(l) for l in targets.upper()]


def _truth_map(truth_dir: Path | None, targets: list[int]) -> dict | None:
    if truth_dir is None:
        return None
    out = {}
    for c in targets:
        p = truth_dir / f"{gg.glyph_letter(c)}.png"
        if p.exists():
            out[c] = raster.load_png(p)
    return out


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--image", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--glyph", required=True, help="Letter of the input glyph, e.g. H.")
@click.option("--targets", default="all", show_default=True)
@click.option("--renderer", type=click.Choice(["conventional", "neural"]), default="conventional")
@click.option("--truth-dir", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def complete(checkpoint, image, glyph, targets, renderer, truth_dir, out):
    """Complete a glyph set from one reference glyph image."""
    pipeline = tasks.Pipeline.load(checkpoint)
    c_in = gg.glyph_id_of(glyph.upper())
    target_ids = _parse_targets(targets, c_in)
    result = pipeline.complete(
        raster.load_png(image), c_in, target_ids, renderer,
        ground_truth=_truth_map(truth_dir, target_ids),
    )
    tasks.export_completion(result, out)
    click.echo(f"completed {len(result.entries)} glyphs -> {out}")


@cli.command(name="complete-multi")
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--image", "images", type=click.Path(exists=True, path_type=Path),
              required=True, multiple=True)
@click.option("--glyph", "glyphs", required=True, multiple=True)
@click.option("--targets", default="all", show_default=True)
@click.option("--renderer", type=click.Choice(["conventional", "neural"]), default="conventional")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def complete_multi(checkpoint, images, glyphs, targets, renderer, out):
    """Complete from several reference glyphs (averaged style vector)."""
    if len(images) != len(glyphs):
        raise click.UsageError("--image and --glyph must be given the same number of times")
    pipeline = tasks.Pipeline.load(checkpoint)
    ids = [gg.glyph_id_of(g.upper()) for g in glyphs]
    target_ids = _parse_targets(targets, None)
    result = pipeline.complete_multi(
        [raster.load_png(p) for p in images], ids, target_ids, renderer
    )
    tasks.export_completion(result, out)
    click.echo(f"completed {len(result.entries)} glyphs -> {out}")


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--mode", type=click.Choice(["forward", "backward"]), required=True)
@click.option("--image", type=click.Path(exists=True, path_type=Path), required=True,
              help="Original reference glyph image (defines the style and mapping).")
@click.option("--glyph", required=True)
@click.option("--edited-graph", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--targets", default="all", show_default=True)
@click.option("--steps", type=int, default=tasks.BACKWARD_STEPS, show_default=True)
@click.option("--lr", type=float, default=tasks.BACKWARD_LR, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def manipulate(checkpoint, mode, image, glyph, edited_graph, targets, steps, lr, out):
    """Propagate a graph edit to the rest of the glyph set."""
    pipeline = tasks.Pipeline.load(checkpoint)
    c_in = gg.glyph_id_of(glyph.upper())
    edited = gg.graph_from_json(Path(edited_graph).read_text())
    if edited.template.glyph_id != c_in:
        raise click.UsageError("edited graph letter does not match --glyph")
    target_ids = _parse_targets(targets, c_in)
    out = Path(out)
    if mode == "forward":
        rendered, result = pipeline.manipulate_forward(edited, target_ids)
        tasks.export_completion(result, out)
        raster.save_png(rendered, out / "input_rerendered.png")
    else:
        z0 = pipeline.encode_image(raster.load_png(image))
        _, mapping, _ = pipeline.predict(z0, c_in)
        z_new, records, result = pipeline.manipulate_backward(
            edited.nodes, mapping, z0, c_in, target_ids, steps=steps, lr=lr
        )
        tasks.export_completion(result, out)
        with (out / "objective.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "objective"])
            w.writerows(records)
    click.echo(f"manipulated ({mode}) -> {out}")


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--image1", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--image2", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--lambdas", default="0.8,0.6,0.4,0.2", show_default=True)
@click.option("--targets", default="all", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def interpolate(checkpoint, image1, image2, lambdas, targets, out):
    """Blend two font styles over a lambda grid."""
    pipeline = tasks.Pipeline.load(checkpoint)
    lams = tuple(float(x) for x in lambdas.split(","))
    target_ids = _parse_targets(targets, None)
    frames = pipeline.interpolate(
        raster.load_png(image1), raster.load_png(image2), target_ids, lams
    )
    out = Path(out)
    for lam, result in frames:
        tasks.export_completion(result, out / f"lambda_{lam:0.2f}")
    click.echo(f"{len(frames)} interpolation frames -> {out}")


@cli.command(name="eval")
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True,
              help="Graph-pipeline checkpoint (encoder+decoder+constructor).")
@click.option("--baseline-checkpoint", type=click.Path(path_type=Path), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--split", "split_name", default=ds.TEST, show_default=True)
@click.option("--inputs-per-font", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def eval_cmd(checkpoint, baseline_checkpoint, manifest_path, split_name,
             inputs_per_font, seed, out):
    """Completion metrics table over a dataset split (CSV)."""
    manifest = ds.DatasetManifest.read(manifest_path)
    has_split = any(f.split for f in manifest.fonts)
    bundle = ds.load_bundle(manifest, split_name if has_split else None)
    rows = []
    pipeline = tasks.Pipeline.load(checkpoint)
    scores = tasks.evaluate_completion(pipeline, bundle, inputs_per_font, seed)
    rows.append(["img2graph2img", "L_rec+L_cls", scores["mse"], scores["psnr"], scores["ssim"]])
    if baseline_checkpoint is not None:
        base = tasks.Pipeline.load(baseline_checkpoint)
        scores = tasks.evaluate_baseline(base, bundle, inputs_per_font, seed)
        rows.append(["img2img", "L_img", scores["mse"], scores["psnr"], scores["ssim"]])
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "loss", "MSE", "PSNR", "SSIM"])
        for method, loss, mse_v, psnr_v, ssim_v in rows:
            w.writerow([method, loss, f"{mse_v:.6f}", f"{psnr_v:.4f}", f"{ssim_v:.6f}"])
    click.echo(out.read_text().strip())


@cli.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--size", type=int, default=128, show_default=True)
def render(graph_path, out, size):
    """Conventionally render a graph JSON file to a PNG."""
    graph = gg.graph_from_json(Path(graph_path).read_text())
    img = raster.rasterize(raster.graph_to_outline(graph), size, size)
    raster.save_png(img, out)
    click.echo(f"rendered {graph_path} -> {out}")


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(checkpoint, host, port):
    """Run the HTTP service."""
    from .service import serve as run_serve

    click.echo(f"serving {checkpoint} on {host}:{port}")
    run_serve(checkpoint, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        if e.ctx is not None:
            click.echo(e.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 2
    except Exception as e:  # runtime failure
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
