# app/routes/split_demo.py

"""
split-demo: split one interaction vector and show the shares and the
reconstruction.
"""

import logging
from typing import List

import click
import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.dependencies.cli_options import INT_LIST, common_options, handles_domain_errors, parse_number_list, prepare_run
from app.dependencies.random_streams import MAX_SEED, SPLIT_DEMO, make_rng
from app.services.errors import build_model
from app.services.split_service import (
    InteractionVector,
    SplitConfig,
    check_shares,
    mask_interactions,
    reconstruct,
    split_mask,
)

logger = logging.getLogger(__name__)

DEFAULTS = {"n_item": 10, "n_max": 2, "c": 2, "splits": 3}


class SplitDemoRequest(BaseModel):
    """Settings for a single split."""
    items: List[int] = Field(..., min_length=1, description="Interacted item indices")
    seed: int = Field(..., ge=0, le=MAX_SEED)
    n_item: int = Field(..., description="Catalog size")
    n_max: int = Field(..., description="Maximum interactions per user")
    c: int = Field(..., description="Fake-item multiplier")
    splits: int = Field(..., description="Number of split vectors")

    @field_validator("items", mode="before")
    @classmethod
    def _parse_items(cls, v):
        return parse_number_list(v, int)


def _format_row(label: str, values: np.ndarray) -> str:
    return f"{label:>10}: " + " ".join(f"{int(v):>4d}" for v in values)


@click.command("split-demo")
@click.option("--items", type=INT_LIST, default="3,7", show_default=True, help="Item indices, e.g. 3,7.")
@click.option("--n-item", type=int, default=None, help="Catalog size (default 10).")
@click.option("--n-max", type=int, default=None, help="Maximum interactions per user (default 2).")
@click.option("--c", type=int, default=None, help="Fake-item multiplier (default 2).")
@click.option("--splits", type=int, default=None, help="Number of split vectors S (default 3).")
@common_options
@handles_domain_errors
def split_demo(items, n_item, n_max, c, splits, seed, out_dir, config_path, log_level):
    """Split one interaction vector and print shares and reconstruction."""
    values = prepare_run(
        config_path,
        {"n_item": n_item, "n_max": n_max, "c": c, "splits": splits, "seed": seed,
         "out_dir": out_dir, "log_level": log_level},
        DEFAULTS,
    )
    request = build_model(
        SplitDemoRequest, items=items, seed=values["seed"], n_item=values["n_item"],
        n_max=values["n_max"], c=values["c"], splits=values["splits"],
    )
    cfg = build_model(SplitConfig, n_item=request.n_item, n_max=request.n_max, c=request.c, s_spl=request.splits)

    rng = make_rng(request.seed, SPLIT_DEMO)
    source = InteractionVector.of(request.items)
    masked = mask_interactions(source, cfg, rng)
    shares = split_mask(masked, cfg, rng)

    click.echo(f"source items: {list(source.items)}")
    click.echo(f"n* = {cfg.n_star}, S = {cfg.s_spl}, seed = {request.seed}")
    click.echo(_format_row("indices", masked.indices))
    click.echo(_format_row("mask", masked.mask))
    for s, share in enumerate(shares, start=1):
        click.echo(_format_row(f"V^{s}", share.split))
    click.echo(_format_row("sum", np.sum([share.split for share in shares], axis=0)))

    sums_ok = check_shares(shares, masked.mask)
    restored = reconstruct(shares)
    click.echo(f"shares sum to mask: {'yes' if sums_ok else 'NO'}")
    click.echo(f"reconstruction: {list(restored.items)}")
    if not sums_ok or restored.as_set() != source.as_set():
        raise click.ClickException("Reconstruction does not match the source vector")
