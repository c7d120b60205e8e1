"""Command-line entry points: embed, run, annotate-batch, serve, export, route."""

from __future__ import annotations

import json
from pathlib import Path

import click

from ..corpus import load_dataset
from .annotation import make_annotation_batch, write_task_batch
from .config import ExperimentConfig, load_config
from .export import export as export_reports
from .runner import build_embedder, run_experiment
from .service import ClassifyContext, serve as serve_app

from ..embedding import embed_corpus


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Experiment config (.yaml/.json).")
@click.option("--seed", type=int, default=None, help="Override the config's sample seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Override the config's output directory.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, seed: int | None, out_dir: str | None) -> None:
    """Retrieval-backed classification harness."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out_dir"] = out_dir


def _require_config(ctx: click.Context) -> ExperimentConfig:
    path = ctx.obj.get("config_path")
    if not path:
        raise click.UsageError("--config is required for this command")
    return load_config(path, seed=ctx.obj.get("seed"), out_dir=ctx.obj.get("out_dir"))


@main.command()
@click.pass_context
def embed(ctx: click.Context) -> None:
    """Build or refresh the embedding caches for every configured dataset."""
    config = _require_config(ctx)
    provider = build_embedder(config.embedder)
    for ds_cfg in config.datasets:
        dataset = load_dataset(ds_cfg.path, ds_cfg.format, name=ds_cfg.name, labels=ds_cfg.labels)
        cache_path = Path(config.out_dir) / "cache" / f"{ds_cfg.name}.{provider.provider_id}.vec"
        cache = embed_corpus(provider, dataset, cache_path, workers=max(1, config.workers))
        click.echo(f"{ds_cfg.name}: {len(cache)} vectors cached at {cache_path}")


@main.command()
@click.pass_context
def run(ctx: click.Context) -> None:
    """Run the full experiment sweep (resumable per query)."""
    config = _require_config(ctx)
    summary = run_experiment(config)
    for cell in summary.cells:
        click.echo(
            f"{cell.dataset} k={cell.k}: {cell.n_queries} new, {cell.n_skipped} resumed, "
            f"{cell.n_prediction_failures} prediction failures, "
            f"{cell.n_annotation_failures} annotation failures"
        )
    click.echo(f"records under {summary.out_dir} (config digest {summary.config_digest[:12]})")


@main.command("annotate-batch")
@click.option("--n", "n_queries", type=int, required=True, help="Queries to sample.")
@click.option("--ks", required=True, help="Comma-separated k values, e.g. 1,10,20.")
@click.option("--annotator", required=True, help="Annotator id the batch is assigned to.")
@click.option("--dataset", "dataset_name", default=None, help="Dataset name (default: first).")
@click.pass_context
def annotate_batch(
    ctx: click.Context, n_queries: int, ks: str, annotator: str, dataset_name: str | None
) -> None:
    """Sample queries from a finished run into an annotation task batch."""
    config = _require_config(ctx)
    seed = ctx.obj.get("seed")
    k_list = [int(part) for part in ks.split(",") if part.strip()]
    tasks = make_annotation_batch(
        config, n_queries, seed if seed is not None else 0, k_list, annotator, dataset_name
    )
    path = Path(config.out_dir) / "annotations" / f"batch-{annotator}.jsonl"
    write_task_batch(tasks, path)
    click.echo(f"{len(tasks)} tasks written to {path}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--ui-dir", default=None, help="Directory of built UI assets to serve at /.")
@click.pass_context
def serve(ctx: click.Context, host: str, port: int, ui_dir: str | None) -> None:
    """Serve the annotation and classification endpoints."""
    config = _require_config(ctx)
    serve_app(config, host=host, port=port, ui_dir=ui_dir)


@main.command()
@click.option(
    "--what",
    default="all",
    type=click.Choice(["accuracy", "kappa", "contingency", "correlation", "grid", "all"]),
)
@click.option("--format", "fmt", default="both", type=click.Choice(["csv", "jsonl", "both"]))
@click.pass_context
def export(ctx: click.Context, what: str, fmt: str) -> None:
    """Write report artifacts from a run directory."""
    config = _require_config(ctx)
    written = export_reports(config.out_dir, what=what, format=fmt)
    for path in written:
        click.echo(str(path))


@main.command()
@click.option("--text", required=True, help="Text to classify.")
@click.option("--k", type=int, default=None, help="Neighbors to retrieve (default: max configured).")
@click.option("--threshold", type=float, default=None, help="Relevance threshold (default: config).")
@click.pass_context
def route(ctx: click.Context, text: str, k: int | None, threshold: float | None) -> None:
    """Classify one text through the relevance-gated router."""
    config = _require_config(ctx)
    context = ClassifyContext(config)
    context.ensure()
    result = context.classify(
        text,
        k if k is not None else max(config.k_values),
        threshold if threshold is not None else config.router_threshold,
    )
    click.echo(json.dumps(result, sort_keys=True))


if __name__ == "__main__":
    main()
