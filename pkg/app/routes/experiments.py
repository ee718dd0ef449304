# app/routes/experiments.py

"""
Experiment commands: attack, ratio, id-collision, alpha-sweep, scaling.

Each writes manifest.json, then <name>.csv and <name>.json, prints the
checked claims, and exits nonzero when one fails (unless --no-check).
"""

import logging
from pathlib import Path
from typing import Callable, List, Optional

import click
from pydantic import BaseModel, Field, field_validator

from app.dependencies.cli_options import (
    FLOAT_LIST,
    INT_LIST,
    common_options,
    handles_domain_errors,
    parse_number_list,
    prepare_run,
)
from app.dependencies.random_streams import MAX_SEED
from app.services import experiment_service
from app.services.errors import build_model
from app.services.experiment_service import ExperimentResult, save_result
from app.services.output_service import RunManifest, write_manifest
from app.services.protocol_service import DrawMode, LdMode

logger = logging.getLogger(__name__)


# ============================================
# REQUEST MODELS
# ============================================

class ExperimentRequest(BaseModel):
    seed: int = Field(..., ge=0, le=MAX_SEED, description="Master seed")
    out_dir: str = Field(..., description="Output directory")
    trials: int = Field(..., ge=1, description="Trials per measured point")


class SpeculationRequest(ExperimentRequest):
    n_item: int = Field(..., ge=2)
    n_max: int = Field(..., ge=1)


class AttackRequest(SpeculationRequest):
    s_values: List[int] = Field(..., min_length=1, description="Split counts S to sweep")
    c: int = Field(..., gt=1)

    @field_validator("s_values", mode="before")
    @classmethod
    def _parse_list(cls, v):
        return parse_number_list(v, int)


class RatioRequest(SpeculationRequest):
    c_values: List[int] = Field(..., min_length=1, description="Fake-item multipliers to sweep")
    splits: int = Field(..., ge=1)

    @field_validator("c_values", mode="before")
    @classmethod
    def _parse_list(cls, v):
        return parse_number_list(v, int)


class IdCollisionRequest(ExperimentRequest):
    lengths: List[int] = Field(..., min_length=1, description="Virtual ID lengths to sweep")
    users: int = Field(..., ge=0)

    @field_validator("lengths", mode="before")
    @classmethod
    def _parse_list(cls, v):
        return parse_number_list(v, int)


class CostRequest(ExperimentRequest):
    """Shared settings of the communication-cost experiments."""
    alphas: List[float] = Field(..., min_length=1)
    n_item: int = Field(..., ge=2)
    n_max: int = Field(..., ge=1)
    c: int = Field(..., gt=1)
    splits: int = Field(..., ge=1)
    id_len: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    workers: int = Field(..., ge=1)
    max_rounds: Optional[int] = Field(None, ge=1)
    draw_mode: DrawMode
    ld_mode: LdMode

    @field_validator("alphas", mode="before")
    @classmethod
    def _parse_alphas(cls, v):
        return parse_number_list(v, float)


class AlphaSweepRequest(CostRequest):
    users: int = Field(..., ge=2)


class ScalingRequest(CostRequest):
    n_users: List[int] = Field(..., min_length=1, description="Client counts to sweep")

    @field_validator("n_users", mode="before")
    @classmethod
    def _parse_n_users(cls, v):
        return parse_number_list(v, int)


SPECULATION_DEFAULTS = {"n_item": 2000, "n_max": 50, "trials": 20}
COST_DEFAULTS = {
    "n_item": 2000, "n_max": 50, "c": 2, "splits": 50, "id_len": 7, "k": 10,
    "trials": 10, "workers": 1, "draw_mode": "per_round", "ld_mode": "sender_ip",
}


# ============================================
# SHARED
# ============================================

def _cost_options(command: Callable) -> Callable:
    options = [
        click.option("--n-item", type=int, default=None, help="Catalog size (default 2000)."),
        click.option("--n-max", type=int, default=None, help="Maximum interactions per user (default 50)."),
        click.option("--c", type=int, default=None, help="Fake-item multiplier (default 2)."),
        click.option("--splits", type=int, default=None, help="Split vectors S (default 50)."),
        click.option("--id-len", type=int, default=None, help="Virtual ID length (default 7)."),
        click.option("--k", type=int, default=None, help="Recommendations per user (default 10)."),
        click.option("--trials", type=int, default=None, help="Trials per point (default 10)."),
        click.option("--workers", type=int, default=None, help="Worker processes (default 1)."),
        click.option("--max-rounds", type=int, default=None, help="Round budget per phase."),
        click.option("--draw-mode", type=click.Choice(["per_round", "per_triplet"]), default=None),
        click.option("--ld-mode", type=click.Choice(["sender_ip", "vid"]), default=None),
        click.option("--no-check", is_flag=True, help="Exit 0 even when a checked claim fails."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _resolve(model_cls, config_path, flags, defaults):
    values = prepare_run(config_path, flags, defaults)
    values.pop("log_level", None)
    return build_model(model_cls, **values)


def _execute(command: str, request: ExperimentRequest, run: Callable[[], ExperimentResult], no_check: bool) -> None:
    out = Path(request.out_dir)
    write_manifest(out, RunManifest(
        command=command,
        config=request.model_dump(mode="json"),
        seed=request.seed,
        source="synthetic",
        out_dir=str(out),
    ))

    result = run()
    paths = save_result(result, out)

    for outcome in result.assertions:
        status = "PASS" if outcome.passed else "FAIL"
        click.echo(f"[{status}] {outcome.name}: observed {outcome.observed} (expected {outcome.expected})")
    for key, value in result.summary.items():
        click.echo(f"{key}: {value}")
    click.echo(f"wrote {', '.join(str(p) for p in paths)}")

    failures = result.failures()
    if failures and not no_check:
        raise click.ClickException(f"{len(failures)} of {len(result.assertions)} checks failed for {command}")


def _cost_flags(n_item, n_max, c, splits, id_len, k, trials, workers, max_rounds, draw_mode, ld_mode,
                seed, out_dir, log_level):
    return {
        "n_item": n_item, "n_max": n_max, "c": c, "splits": splits, "id_len": id_len, "k": k,
        "trials": trials, "workers": workers, "max_rounds": max_rounds, "draw_mode": draw_mode,
        "ld_mode": ld_mode, "seed": seed, "out_dir": out_dir, "log_level": log_level,
    }


# ============================================
# COMMANDS
# ============================================

@click.command("attack")
@click.option("--s-values", type=INT_LIST, default=None, help="Split counts, e.g. 50,100,200 (default).")
@click.option("--c", type=int, default=None, help="Fake-item multiplier (default 2).")
@click.option("--n-item", type=int, default=None, help="Catalog size (default 2000).")
@click.option("--n-max", type=int, default=None, help="Maximum interactions per user (default 50).")
@click.option("--trials", type=int, default=None, help="Trials per point (default 20).")
@click.option("--no-check", is_flag=True, help="Exit 0 even when a checked claim fails.")
@common_options
@handles_domain_errors
def attack(s_values, c, n_item, n_max, trials, no_check, seed, out_dir, config_path, log_level):
    """Speculation attack: similarity vs captured split vectors."""
    request = _resolve(
        AttackRequest, config_path,
        {"s_values": s_values, "c": c, "n_item": n_item, "n_max": n_max, "trials": trials,
         "seed": seed, "out_dir": out_dir, "log_level": log_level},
        {**SPECULATION_DEFAULTS, "s_values": [50, 100, 200], "c": 2},
    )
    _execute("attack", request, lambda: experiment_service.attack_curve(
        s_values=request.s_values, c=request.c, n_item=request.n_item, n_max=request.n_max,
        trials=request.trials, seed=request.seed,
    ), no_check)


@click.command("ratio")
@click.option("--c-values", type=INT_LIST, default=None, help="Multipliers, e.g. 2,4,6,8,10 (default).")
@click.option("--splits", type=int, default=None, help="Split vectors S (default 100).")
@click.option("--n-item", type=int, default=None, help="Catalog size (default 2000).")
@click.option("--n-max", type=int, default=None, help="Maximum interactions per user (default 50).")
@click.option("--trials", type=int, default=None, help="Trials per point (default 20).")
@click.option("--no-check", is_flag=True, help="Exit 0 even when a checked claim fails.")
@common_options
@handles_domain_errors
def ratio(c_values, splits, n_item, n_max, trials, no_check, seed, out_dir, config_path, log_level):
    """Speculation attack at fixed S for several fake-item multipliers."""
    request = _resolve(
        RatioRequest, config_path,
        {"c_values": c_values, "splits": splits, "n_item": n_item, "n_max": n_max, "trials": trials,
         "seed": seed, "out_dir": out_dir, "log_level": log_level},
        {**SPECULATION_DEFAULTS, "c_values": [2, 4, 6, 8, 10], "splits": 100},
    )
    _execute("ratio", request, lambda: experiment_service.ratio_curve(
        c_values=request.c_values, s_spl=request.splits, n_item=request.n_item, n_max=request.n_max,
        trials=request.trials, seed=request.seed,
    ), no_check)


@click.command("id-collision")
@click.option("--lengths", type=INT_LIST, default=None, help="ID lengths, e.g. 1..8 (default).")
@click.option("--users", type=int, default=None, help="IDs drawn per trial (default 31831).")
@click.option("--trials", type=int, default=None, help="Trials per length (default 5).")
@click.option("--no-check", is_flag=True, help="Exit 0 even when a checked claim fails.")
@common_options
@handles_domain_errors
def id_collision(lengths, users, trials, no_check, seed, out_dir, config_path, log_level):
    """Virtual-ID repetition rate per ID length."""
    request = _resolve(
        IdCollisionRequest, config_path,
        {"lengths": lengths, "users": users, "trials": trials,
         "seed": seed, "out_dir": out_dir, "log_level": log_level},
        {"lengths": list(range(1, 9)), "users": 31831, "trials": 5},
    )
    _execute("id-collision", request, lambda: experiment_service.id_collision_curve(
        lengths=request.lengths, n_user=request.users, trials=request.trials, seed=request.seed,
    ), no_check)


@click.command("alpha-sweep")
@click.option("--alphas", type=FLOAT_LIST, default=None, help="Decay factors (default 0.5,0.6,0.7,0.8,0.85,0.9,0.95).")
@click.option("--users", type=int, default=None, help="Clients per run (default 1000).")
@_cost_options
@common_options
@handles_domain_errors
def alpha_sweep(alphas, users, n_item, n_max, c, splits, id_len, k, trials, workers, max_rounds,
                draw_mode, ld_mode, no_check, seed, out_dir, config_path, log_level):
    """Upload, download and total bytes per decay factor."""
    request = _resolve(
        AlphaSweepRequest, config_path,
        {"alphas": alphas, "users": users,
         **_cost_flags(n_item, n_max, c, splits, id_len, k, trials, workers, max_rounds,
                       draw_mode, ld_mode, seed, out_dir, log_level)},
        {**COST_DEFAULTS, "alphas": [0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95], "users": 1000},
    )
    _execute("alpha-sweep", request, lambda: experiment_service.alpha_sweep(
        alphas=request.alphas, n_user=request.users, n_item=request.n_item, n_max=request.n_max,
        c=request.c, s_spl=request.splits, id_len=request.id_len, k=request.k, trials=request.trials,
        seed=request.seed, workers=request.workers, max_rounds=request.max_rounds,
        draw_mode=request.draw_mode, ld_mode=request.ld_mode,
    ), no_check)


@click.command("scaling")
@click.option("--n-users", type=INT_LIST, default=None, help="Client counts (default 100..1000:100).")
@click.option("--alphas", type=FLOAT_LIST, default=None, help="One curve per alpha (default 0.5,0.7,0.9).")
@_cost_options
@common_options
@handles_domain_errors
def scaling(n_users, alphas, n_item, n_max, c, splits, id_len, k, trials, workers, max_rounds,
            draw_mode, ld_mode, no_check, seed, out_dir, config_path, log_level):
    """Total bytes and per-client sends as the client count grows."""
    request = _resolve(
        ScalingRequest, config_path,
        {"n_users": n_users, "alphas": alphas,
         **_cost_flags(n_item, n_max, c, splits, id_len, k, trials, workers, max_rounds,
                       draw_mode, ld_mode, seed, out_dir, log_level)},
        {**COST_DEFAULTS, "n_users": list(range(100, 1001, 100)), "alphas": [0.5, 0.7, 0.9]},
    )
    _execute("scaling", request, lambda: experiment_service.scaling_curve(
        n_users=request.n_users, alphas=request.alphas, n_item=request.n_item, n_max=request.n_max,
        c=request.c, s_spl=request.splits, id_len=request.id_len, k=request.k, trials=request.trials,
        seed=request.seed, workers=request.workers, max_rounds=request.max_rounds,
        draw_mode=request.draw_mode, ld_mode=request.ld_mode,
    ), no_check)


COMMANDS = [attack, ratio, id_collision, alpha_sweep, scaling]
