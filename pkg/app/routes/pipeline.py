# app/routes/pipeline.py

"""
pipeline: upload -> aggregate -> recommend -> download on one dataset,
with per-phase metrics and the fidelity check.

Outputs (in --out-dir):
    manifest.json   resolved settings, written first
    pipeline.csv    one row per phase
    messages.csv    full message log (with --dump-log)
"""

import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import BaseModel, Field, model_validator

from app.dependencies.cli_options import common_options, handles_domain_errors, prepare_run
from app.dependencies.random_streams import MAX_SEED
from app.services.dataset_service import generate_synthetic, load_interactions
from app.services.errors import build_model
from app.services.output_service import RunManifest, atomic_write_text, write_csv, write_manifest
from app.services.protocol_service import DrawMode, LdMode
from app.services.recommender_service import RecommenderSpec
from app.services.simnet_service import METRIC_COLUMNS, SimConfig, message_log_csv, run_pipeline
from app.services.split_service import SplitConfig

logger = logging.getLogger(__name__)

DEFAULTS = {
    "n_max": 50, "c": 2, "splits": 50, "alpha": 0.9, "id_len": 7, "k": 10,
    "draw_mode": "per_round", "ld_mode": "sender_ip",
}
SYNTHETIC_N_ITEM = 2000


class PipelineRequest(BaseModel):
    """Resolved settings for one pipeline run."""
    seed: int = Field(..., ge=0, le=MAX_SEED, description="Master seed")
    out_dir: str = Field(..., description="Output directory")
    input: Optional[str] = Field(None, description="Interaction file")
    synthetic: Optional[int] = Field(None, ge=2, description="Number of synthetic users")
    n_item: Optional[int] = Field(None, ge=2, description="Catalog size (file: max index seen; synthetic: 2000)")
    n_max: int = Field(..., ge=1)
    c: int = Field(..., gt=1)
    splits: int = Field(..., ge=1, description="Split vectors per source vector")
    alpha: float = Field(..., gt=0.0, lt=1.0)
    id_len: int = Field(..., ge=1)
    k: int = Field(..., ge=1, description="Recommendations per user")
    max_rounds: Optional[int] = Field(None, ge=1, description="Round budget per phase (default 10 * users)")
    draw_mode: DrawMode
    ld_mode: LdMode

    @model_validator(mode="after")
    def _one_source(self) -> "PipelineRequest":
        if (self.input is None) == (self.synthetic is None):
            raise ValueError("exactly one of --input or --synthetic is required")
        return self

    @property
    def source(self) -> str:
        return f"file:{self.input}" if self.input else f"synthetic:{self.synthetic}"


@click.command("pipeline")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None, help="Interaction file, one user per line.")
@click.option("--synthetic", type=int, default=None, help="Generate this many synthetic users instead.")
@click.option("--n-item", type=int, default=None, help="Catalog size.")
@click.option("--n-max", type=int, default=None, help="Maximum interactions per user (default 50).")
@click.option("--c", type=int, default=None, help="Fake-item multiplier (default 2).")
@click.option("--splits", type=int, default=None, help="Split vectors S (default 50).")
@click.option("--alpha", type=float, default=None, help="p_sto decay factor (default 0.9).")
@click.option("--id-len", type=int, default=None, help="Virtual ID length (default 7).")
@click.option("--k", type=int, default=None, help="Recommendations per user (default 10).")
@click.option("--max-rounds", type=int, default=None, help="Round budget per phase (default 10 * users).")
@click.option("--draw-mode", type=click.Choice(["per_round", "per_triplet"]), default=None)
@click.option("--ld-mode", type=click.Choice(["sender_ip", "vid"]), default=None)
@click.option("--dump-log", is_flag=True, help="Also write messages.csv.")
@common_options
@handles_domain_errors
def pipeline(input_path, synthetic, n_item, n_max, c, splits, alpha, id_len, k, max_rounds,
             draw_mode, ld_mode, dump_log, seed, out_dir, config_path, log_level):
    """Run upload, recommendation and download on one dataset."""
    values = prepare_run(
        config_path,
        {"input": input_path, "synthetic": synthetic, "n_item": n_item, "n_max": n_max, "c": c,
         "splits": splits, "alpha": alpha, "id_len": id_len, "k": k, "max_rounds": max_rounds,
         "draw_mode": draw_mode, "ld_mode": ld_mode, "seed": seed, "out_dir": out_dir,
         "log_level": log_level},
        DEFAULTS,
    )
    values.pop("log_level", None)
    request = build_model(PipelineRequest, **values)

    out = Path(request.out_dir)
    write_manifest(out, RunManifest(
        command="pipeline",
        config=request.model_dump(mode="json"),
        seed=request.seed,
        source=request.source,
        out_dir=str(out),
    ))

    if request.input:
        data, catalog = load_interactions(request.input, n_max=request.n_max, n_item=request.n_item)
    else:
        catalog = request.n_item or SYNTHETIC_N_ITEM
        data = generate_synthetic(request.synthetic, catalog, request.n_max, request.seed)

    split = build_model(SplitConfig, n_item=catalog, n_max=request.n_max, c=request.c, s_spl=request.splits)
    cfg = build_model(
        SimConfig, n_user=len(data), split=split, alpha=request.alpha, id_len=request.id_len,
        max_rounds=request.max_rounds, seed=request.seed, draw_mode=request.draw_mode,
        ld_mode=request.ld_mode,
    )
    result = run_pipeline(cfg, data, build_model(RecommenderSpec, k=request.k))

    write_csv(out / "pipeline.csv", METRIC_COLUMNS, [result.upload.to_row(), result.download.to_row()])
    if dump_log:
        atomic_write_text(out / "messages.csv", message_log_csv([result.upload, result.download]))

    for phase in (result.upload, result.download):
        click.echo(
            f"{phase.phase}: {phase.total_bytes} bytes, {phase.total_messages} messages, "
            f"{phase.rounds_used} rounds, {phase.undelivered} undelivered"
        )
    click.echo(f"total: {result.total_bytes} bytes, {result.mean_client_sends:.3f} sends per client")
    click.echo(f"vid collisions: {result.upload.vid_collisions}, excluded groups: {result.excluded}")
    click.echo(f"fidelity: {'OK' if result.fidelity_ok else 'FAILED'}")

    if not result.fidelity_ok:
        raise click.ClickException(
            f"Fidelity check failed: {len(result.upload_mismatches)} upload mismatches, "
            f"{len(result.download_mismatches)} download mismatches, "
            f"{result.download.undelivered} undelivered"
        )
