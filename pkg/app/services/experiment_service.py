# app/services/experiment_service.py

"""
Experiment drivers: speculation attack, fake-item ratio, virtual-ID
repetition rate, alpha sweep and client-count scaling.

Each driver returns an ExperimentResult: one row per measured point
(series, x, mean, std, n_trials) plus the checks evaluated on those rows.
Every trial draws from its own stream derived from (master seed, trial
keys), so results are bit-exact reproducible and do not depend on whether
trials run in worker processes.
"""

import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np
from scipy import stats
from tqdm import tqdm

from app.dependencies.random_streams import TRIAL, derive_seed, make_rng
from app.services.dataset_service import generate_synthetic
from app.services.errors import PhaseIncompleteError, build_model
from app.services.output_service import write_csv, write_json
from app.services.recommender_service import RecommenderSpec
from app.services.simnet_service import SimConfig, run_pipeline
from app.services.split_service import (
    InteractionVector,
    SplitConfig,
    jaccard_similarity,
    mask_interactions,
    speculate,
    split_mask,
)
from app.services.virtual_id import ALPHABET, new_virtual_ids

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["series", "x", "mean", "std", "n_trials"]

# Claims checked against the measured curves
SPECULATION_BOUND = 0.4
ALPHA_RANK_THRESHOLD = 0.9
ALPHA_OPTIMUM_NEIGHBOURHOOD = (0.85, 0.90, 0.95)
LINEAR_FIT_MIN_R2 = 0.95
SENDS_MAX_RELATIVE_SPREAD = 0.2
ORACLE_STANDARD_ERRORS = 3.0
# 62**10 is the largest symbol space that fits a signed 64-bit draw
ORACLE_MAX_ID_LEN = 10

T = TypeVar("T")
R = TypeVar("R")


# ============================================
# RESULT TYPES
# ============================================

@dataclass
class AssertionOutcome:
    """One checked claim: what was expected and what was observed."""
    name: str
    passed: bool
    observed: Any
    expected: str


@dataclass
class ExperimentResult:
    name: str
    parameters: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    assertions: List[AssertionOutcome] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def add_point(self, series: str, x: Any, values: Sequence[float]) -> Dict[str, Any]:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise ValueError(f"No trials for {series} at x={x}")
        row = {
            "series": series,
            "x": x,
            "mean": float(values.mean()),
            "std": float(values.std(ddof=1)) if values.size > 1 else None,
            "n_trials": int(values.size),
        }
        self.rows.append(row)
        return row

    def series(self, name: str) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row["series"] == name]

    def check(self, name: str, passed: bool, observed: Any, expected: str) -> None:
        self.assertions.append(AssertionOutcome(name, bool(passed), observed, expected))

    @property
    def passed(self) -> bool:
        return all(outcome.passed for outcome in self.assertions)

    def failures(self) -> List[AssertionOutcome]:
        return [outcome for outcome in self.assertions if not outcome.passed]

    def to_summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "passed": self.passed,
            "assertions": [asdict(outcome) for outcome in self.assertions],
            "summary": self.summary,
        }


def save_result(result: ExperimentResult, out_dir: Path) -> List[Path]:
    """Write <name>.csv and <name>.json into out_dir."""
    out_dir = Path(out_dir)
    csv_path = write_csv(out_dir / f"{result.name}.csv", ROW_COLUMNS, result.rows)
    json_path = write_json(out_dir / f"{result.name}.json", result.to_summary())
    logger.info(f"Saved {result.name} results to {csv_path} and {json_path}")
    return [csv_path, json_path]


def _progress(iterable, total: int, desc: str):
    return tqdm(iterable, total=total, desc=desc, disable=not sys.stderr.isatty(), leave=False)


def _run_jobs(fn: Callable[[T], R], jobs: Sequence[T], workers: int, desc: str) -> List[R]:
    """Run jobs in order, optionally in worker processes; results keep job order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(_progress(executor.map(fn, jobs), len(jobs), desc))
    return [fn(job) for job in _progress(jobs, len(jobs), desc)]


def _format_list(values: Sequence[Any]) -> str:
    return ",".join(str(v) for v in values)


# ============================================
# SPECULATION ATTACK
# ============================================

def _random_source(cfg: SplitConfig, rng: np.random.Generator) -> InteractionVector:
    length = int(rng.integers(1, cfg.n_max + 1))
    return InteractionVector.of(rng.choice(cfg.n_item, size=length, replace=False) + 1)


def _speculation_curve(cfg: SplitConfig, trials: int, rng_key: Callable[[int], np.random.Generator]) -> np.ndarray:
    """Jaccard similarity per trial (rows) and captured share count t (columns)."""
    similarity = np.zeros((trials, cfg.s_spl + 1))
    for trial in range(trials):
        rng = rng_key(trial)
        masked = mask_interactions(_random_source(cfg, rng), cfg, rng)
        shares = split_mask(masked, cfg, rng)
        for t in range(cfg.s_spl + 1):
            similarity[trial, t] = jaccard_similarity(speculate(shares, t, cfg.n_star), masked.mask)
    return similarity


def _check_speculation(result: ExperimentResult, series: str, s_spl: int) -> None:
    rows = result.series(series)
    complete = [row["mean"] for row in rows if row["x"] == s_spl]
    partial = [row["mean"] for row in rows if row["x"] < s_spl]
    result.check(
        f"{series}: full share set recovers the mask",
        complete == [1.0],
        complete[0] if complete else None,
        "mean similarity == 1.0 at t = S",
    )
    worst = max(partial) if partial else None
    result.check(
        f"{series}: partial share sets stay below {SPECULATION_BOUND}",
        worst is not None and worst < SPECULATION_BOUND,
        worst,
        f"max mean similarity < {SPECULATION_BOUND} for t < S",
    )


def attack_curve(
    s_values: Sequence[int] = (50, 100, 200),
    c: int = 2,
    n_item: int = 2000,
    n_max: int = 50,
    trials: int = 20,
    seed: int = 0,
) -> ExperimentResult:
    """
    Jaccard similarity of the speculated vector against the true mask as a
    function of how many split vectors (t) an attacker holds, per S.
    """
    result = ExperimentResult(
        name="attack",
        parameters={"s_values": _format_list(s_values), "c": c, "n_item": n_item,
                    "n_max": n_max, "trials": trials, "seed": seed},
    )
    for s_spl in s_values:
        cfg = build_model(SplitConfig, n_item=n_item, n_max=n_max, c=c, s_spl=s_spl)
        similarity = _speculation_curve(cfg, trials, lambda trial: make_rng(seed, TRIAL, s_spl, trial))
        series = f"S={s_spl}"
        for t in range(s_spl + 1):
            result.add_point(series, t, similarity[:, t])
        _check_speculation(result, series, s_spl)
    return result


def ratio_curve(
    c_values: Sequence[int] = (2, 4, 6, 8, 10),
    s_spl: int = 100,
    n_item: int = 2000,
    n_max: int = 50,
    trials: int = 20,
    seed: int = 0,
) -> ExperimentResult:
    """
    The attack curve at fixed S for several fake-item multipliers c.

    Raises:
        ConfigError: If any c gives c * n_max >= n_item
    """
    configs = [build_model(SplitConfig, n_item=n_item, n_max=n_max, c=c, s_spl=s_spl) for c in c_values]
    result = ExperimentResult(
        name="ratio",
        parameters={"c_values": _format_list(c_values), "s_spl": s_spl, "n_item": n_item,
                    "n_max": n_max, "trials": trials, "seed": seed},
    )
    for cfg in configs:
        similarity = _speculation_curve(cfg, trials, lambda trial: make_rng(seed, TRIAL, cfg.c, trial))
        series = f"c={cfg.c}"
        for t in range(s_spl + 1):
            result.add_point(series, t, similarity[:, t])
        _check_speculation(result, series, s_spl)
    return result


# ============================================
# VIRTUAL ID REPETITION RATE
# ============================================

def repetition_rate(ids: Sequence[Any]) -> float:
    """Share of entries that duplicate an earlier one: (n - distinct) / n."""
    if len(ids) == 0:
        return 0.0
    return (len(ids) - len(set(ids))) / len(ids)


def expected_repetition_rate(id_len: int, n_user: int) -> float:
    """Closed-form expected repetition rate for n_user uniform draws over 62**id_len symbols."""
    if n_user <= 0:
        return 0.0
    space = float(len(ALPHABET)) ** id_len
    expected_distinct = space * -math.expm1(n_user * math.log1p(-1.0 / space))
    return max(0.0, 1.0 - expected_distinct / n_user)


def birthday_oracle(id_len: int, n_user: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """
    Repetition rates from plain uniform integer draws over the symbol space,
    independent of how virtual IDs are generated.
    """
    if id_len > ORACLE_MAX_ID_LEN:
        raise ValueError(f"Oracle supports id_len <= {ORACLE_MAX_ID_LEN}, got {id_len}")
    space = len(ALPHABET) ** id_len
    rates = np.zeros(trials)
    for trial in range(trials):
        draws = rng.integers(0, space, size=n_user, dtype=np.int64)
        rates[trial] = (n_user - np.unique(draws).size) / n_user if n_user else 0.0
    return rates


def id_collision_curve(
    lengths: Sequence[int] = tuple(range(1, 9)),
    n_user: int = 31831,
    trials: int = 5,
    seed: int = 0,
) -> ExperimentResult:
    """Repetition rate of n_user freshly drawn virtual IDs per ID length."""
    result = ExperimentResult(
        name="id_collision",
        parameters={"lengths": _format_list(lengths), "n_user": n_user, "trials": trials, "seed": seed},
    )
    per_length_max: Dict[int, float] = {}
    for id_len in lengths:
        rates = np.array([
            repetition_rate(new_virtual_ids(n_user, id_len, make_rng(seed, TRIAL, id_len, trial)))
            for trial in range(trials)
        ])
        per_length_max[id_len] = float(rates.max()) if rates.size else 0.0
        result.add_point("repetition_rate", id_len, rates)
        result.add_point("expected_rate", id_len, [expected_repetition_rate(id_len, n_user)])

        if id_len > ORACLE_MAX_ID_LEN:
            continue
        oracle = birthday_oracle(id_len, n_user, trials, make_rng(seed, TRIAL, 2 ** 16 + id_len))
        result.add_point("oracle_rate", id_len, oracle)
        if trials > 1:
            standard_error = math.sqrt(rates.var(ddof=1) / trials + oracle.var(ddof=1) / trials)
        else:
            standard_error = 0.0
        gap = abs(float(rates.mean()) - float(oracle.mean()))
        result.check(
            f"id_len={id_len}: matches the birthday oracle",
            gap <= ORACLE_STANDARD_ERRORS * standard_error + 1e-12,
            {"gap": gap, "standard_error": standard_error},
            f"|observed - oracle| <= {ORACLE_STANDARD_ERRORS} standard errors",
        )

    if 7 in per_length_max:
        result.check(
            "id_len=7: no repetitions in any trial",
            per_length_max[7] == 0.0,
            per_length_max[7],
            "repetition rate == 0 in every trial",
        )
    result.summary["max_rate_per_length"] = per_length_max
    return result


# ============================================
# COMMUNICATION COST
# ============================================

@dataclass(frozen=True)
class PipelineJob:
    """One full pipeline run, picklable for worker processes."""
    n_user: int
    n_item: int
    n_max: int
    c: int
    s_spl: int
    alpha: float
    id_len: int
    k: int
    seed: int
    max_rounds: Optional[int] = None
    draw_mode: str = "per_round"
    ld_mode: str = "sender_ip"


@dataclass(frozen=True)
class PipelineOutcome:
    upload_bytes: int
    download_bytes: int
    client_sends: float
    upload_sends: float
    download_sends: float
    undelivered: int
    incomplete: bool


def run_pipeline_job(job: PipelineJob) -> PipelineOutcome:
    """Generate the job's dataset and run upload, recommendation and download."""
    split = build_model(SplitConfig, n_item=job.n_item, n_max=job.n_max, c=job.c, s_spl=job.s_spl)
    cfg = build_model(
        SimConfig, n_user=job.n_user, split=split, alpha=job.alpha, id_len=job.id_len,
        max_rounds=job.max_rounds, seed=job.seed, draw_mode=job.draw_mode, ld_mode=job.ld_mode,
    )
    data = generate_synthetic(job.n_user, job.n_item, job.n_max, job.seed)
    try:
        result = run_pipeline(cfg, data, RecommenderSpec(k=job.k))
    except PhaseIncompleteError as e:
        held = e.metrics.undelivered if e.metrics is not None else 0
        logger.warning(f"Upload incomplete for alpha={job.alpha}, n_user={job.n_user}: {e}")
        return PipelineOutcome(0, 0, 0.0, 0.0, 0.0, held, True)
    return PipelineOutcome(
        upload_bytes=result.upload.total_bytes,
        download_bytes=result.download.total_bytes,
        client_sends=result.mean_client_sends,
        upload_sends=result.upload.mean_client_sends,
        download_sends=result.download.mean_client_sends,
        undelivered=result.download.undelivered,
        incomplete=result.download.undelivered > 0,
    )


def _rank_correlation(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rho, or None when it is undefined (fewer than 3 points or a constant series)."""
    if len(x) < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(stats.spearmanr(x, y)[0])


def _relative_spread(values: Sequence[float]) -> float:
    """(max - min) / mean; 0.0 for an all-zero series."""
    mean = float(np.mean(values))
    return (max(values) - min(values)) / mean if mean else 0.0


def _check_trend(result: ExperimentResult, name: str, x: Sequence[float], y: Sequence[float],
                 increasing: bool) -> Optional[float]:
    """Check that y rises (or falls) with x by rank; an undefined rho fails with the reason."""
    rho = _rank_correlation(x, y)
    expected = f"Spearman rho > {ALPHA_RANK_THRESHOLD}" if increasing else f"Spearman rho < -{ALPHA_RANK_THRESHOLD}"
    if rho is None:
        result.check(name, False, "undefined: constant series", expected)
    else:
        signed = rho if increasing else -rho
        result.check(name, signed > ALPHA_RANK_THRESHOLD, rho, expected)
    return rho


def alpha_sweep(
    alphas: Sequence[float] = (0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95),
    n_user: int = 1000,
    n_item: int = 2000,
    n_max: int = 50,
    c: int = 2,
    s_spl: int = 50,
    id_len: int = 7,
    k: int = 10,
    trials: int = 10,
    seed: int = 0,
    workers: int = 1,
    max_rounds: Optional[int] = None,
    draw_mode: str = "per_round",
    ld_mode: str = "sender_ip",
) -> ExperimentResult:
    """
    Upload, download and total bytes per decay factor alpha. Trial t uses
    the same dataset and master seed for every alpha.
    """
    alphas = sorted(alphas)
    result = ExperimentResult(
        name="alpha_sweep",
        parameters={"alphas": _format_list(alphas), "n_user": n_user, "n_item": n_item,
                    "n_max": n_max, "c": c, "s_spl": s_spl, "id_len": id_len, "k": k,
                    "trials": trials, "seed": seed, "max_rounds": max_rounds,
                    "draw_mode": draw_mode, "ld_mode": ld_mode},
    )
    jobs = [
        PipelineJob(n_user=n_user, n_item=n_item, n_max=n_max, c=c, s_spl=s_spl, alpha=alpha,
                    id_len=id_len, k=k, seed=derive_seed(seed, TRIAL, trial), max_rounds=max_rounds,
                    draw_mode=draw_mode, ld_mode=ld_mode)
        for alpha in alphas for trial in range(trials)
    ]
    outcomes = _run_jobs(run_pipeline_job, jobs, workers, "alpha sweep")

    incomplete: Dict[str, Dict[str, int]] = {}
    measured, upload_means, download_means, total_means = [], [], [], []
    for position, alpha in enumerate(alphas):
        runs = outcomes[position * trials:(position + 1) * trials]
        done = [run for run in runs if not run.incomplete]
        failed = [run for run in runs if run.incomplete]
        if failed:
            incomplete[str(alpha)] = {"runs": len(failed), "undelivered": sum(run.undelivered for run in failed)}
        if not done:
            continue
        upload = result.add_point("upload_bytes", alpha, [run.upload_bytes for run in done])
        download = result.add_point("download_bytes", alpha, [run.download_bytes for run in done])
        total = result.add_point("total_bytes", alpha, [run.upload_bytes + run.download_bytes for run in done])
        result.add_point("client_sends", alpha, [run.client_sends for run in done])
        measured.append(alpha)
        upload_means.append(upload["mean"])
        download_means.append(download["mean"])
        total_means.append(total["mean"])

    result.summary["incomplete_runs"] = incomplete
    if not measured:
        result.check("at least one alpha completed", False, 0, "completed runs > 0")
        return result

    best = measured[int(np.argmin(total_means))]
    result.summary["argmin_alpha"] = best
    logger.info(f"Alpha sweep: total cost minimised at alpha={best}")

    if len(measured) >= 3:
        result.summary["upload_spearman"] = _check_trend(
            result, "upload bytes increase with alpha", measured, upload_means, increasing=True)
        result.summary["download_spearman"] = _check_trend(
            result, "download bytes decrease with alpha", measured, download_means, increasing=False)
        result.check("total cost minimised near the top of the sweep",
                     any(math.isclose(best, a) for a in ALPHA_OPTIMUM_NEIGHBOURHOOD),
                     best, f"argmin alpha in {ALPHA_OPTIMUM_NEIGHBOURHOOD}")
    return result


def scaling_curve(
    n_users: Sequence[int] = tuple(range(100, 1001, 100)),
    alphas: Sequence[float] = (0.5, 0.7, 0.9),
    n_item: int = 2000,
    n_max: int = 50,
    c: int = 2,
    s_spl: int = 50,
    id_len: int = 7,
    k: int = 10,
    trials: int = 10,
    seed: int = 0,
    workers: int = 1,
    max_rounds: Optional[int] = None,
    draw_mode: str = "per_round",
    ld_mode: str = "sender_ip",
) -> ExperimentResult:
    """
    Total bytes and mean triplet sends per client as the client count grows,
    one curve per alpha, with a least-squares R^2 of bytes against N.

    Sends are reported per phase. The stability check covers upload sends
    only: a dispatched recommendation share walks at random until it meets
    a client whose LD knows its vid, and at fixed s_spl there are about
    s_spl * hops such clients, so download sends per client grow roughly
    as N / (s_spl * hops). Their spread is reported in the summary.
    """
    n_users = sorted(n_users)
    result = ExperimentResult(
        name="scaling",
        parameters={"n_users": _format_list(n_users), "alphas": _format_list(alphas),
                    "n_item": n_item, "n_max": n_max, "c": c, "s_spl": s_spl, "id_len": id_len,
                    "k": k, "trials": trials, "seed": seed, "max_rounds": max_rounds,
                    "draw_mode": draw_mode, "ld_mode": ld_mode},
    )
    grid = [(alpha, n_user) for alpha in alphas for n_user in n_users]
    jobs = [
        PipelineJob(n_user=n_user, n_item=n_item, n_max=n_max, c=c, s_spl=s_spl, alpha=alpha,
                    id_len=id_len, k=k, seed=derive_seed(seed, TRIAL, trial, n_user),
                    max_rounds=max_rounds, draw_mode=draw_mode, ld_mode=ld_mode)
        for alpha, n_user in grid for trial in range(trials)
    ]
    outcomes = _run_jobs(run_pipeline_job, jobs, workers, "scaling")

    incomplete: Dict[str, int] = {}
    fits: Dict[str, Dict[str, float]] = {}
    for alpha in alphas:
        xs, totals = [], []
        sends: Dict[str, List[float]] = {"client": [], "upload": [], "download": []}
        for position, (grid_alpha, n_user) in enumerate(grid):
            if grid_alpha != alpha:
                continue
            runs = outcomes[position * trials:(position + 1) * trials]
            done = [run for run in runs if not run.incomplete]
            if len(done) < len(runs):
                incomplete[f"alpha={alpha},n_user={n_user}"] = len(runs) - len(done)
            if not done:
                continue
            total = result.add_point(f"total_bytes@alpha={alpha}", n_user,
                                     [run.upload_bytes + run.download_bytes for run in done])
            xs.append(n_user)
            totals.append(total["mean"])
            for phase, attr in (("client", "client_sends"), ("upload", "upload_sends"), ("download", "download_sends")):
                row = result.add_point(f"{attr}@alpha={alpha}", n_user, [getattr(run, attr) for run in done])
                sends[phase].append(row["mean"])

        if len(xs) >= 3:
            fit = stats.linregress(xs, totals)
            r_squared = float(fit.rvalue ** 2)
            spreads = {phase: _relative_spread(values) for phase, values in sends.items()}
            fits[str(alpha)] = {"slope": float(fit.slope), "intercept": float(fit.intercept),
                                "r_squared": r_squared,
                                "sends_relative_spread": spreads["client"],
                                "upload_sends_relative_spread": spreads["upload"],
                                "download_sends_relative_spread": spreads["download"]}
            result.check(f"alpha={alpha}: total bytes linear in N", r_squared >= LINEAR_FIT_MIN_R2,
                         r_squared, f"R^2 >= {LINEAR_FIT_MIN_R2}")
            result.check(f"alpha={alpha}: per-client upload sends stable across N",
                         spreads["upload"] < SENDS_MAX_RELATIVE_SPREAD, spreads["upload"],
                         f"(max - min) / mean < {SENDS_MAX_RELATIVE_SPREAD}")
            if spreads["download"] >= SENDS_MAX_RELATIVE_SPREAD:
                logger.info(f"alpha={alpha}: download sends per client spread {spreads['download']:.3f} across N")

    result.summary["linear_fits"] = fits
    result.summary["incomplete_runs"] = incomplete
    return result
