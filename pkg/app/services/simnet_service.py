# app/services/simnet_service.py

"""
Round-synchronous simulated network.

Every message sent in round k is delivered before round k+1 starts, in
(sender index, triplet index) order, with the server ordered first. All
randomness comes from per-entity streams derived from the master seed, so
the same (config, data) always produces the same message log, metrics and
final states.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.dependencies.random_streams import DOWNLOAD, UPLOAD, RandomStreams
from app.services.errors import ConfigError, IncompleteShareSetError, PhaseIncompleteError
from app.services.protocol_service import (
    SERVER,
    ClientState,
    DrawMode,
    LdMode,
    ServerState,
    Triplet,
    client_assemble_recommendation,
    client_init,
    client_receive_upload,
    client_route_result,
    client_upload_round,
    server_aggregate,
    server_dispatch_recommendations,
    server_receive,
)
from app.services.recommender_service import RecommenderSpec, build_matrix, recommend
from app.services.split_service import InteractionVector, SplitConfig

logger = logging.getLogger(__name__)

UPLOAD_PHASE = "upload"
DOWNLOAD_PHASE = "download"


# ============================================
# CONFIGURATION
# ============================================

class SimConfig(BaseModel):
    """Settings for one simulation run."""
    model_config = ConfigDict(frozen=True)

    n_user: int = Field(..., ge=2, description="Number of clients")
    split: SplitConfig
    alpha: float = Field(0.9, gt=0.0, lt=1.0, description="p_sto decay factor")
    id_len: int = Field(7, ge=1, description="Virtual ID length")
    max_rounds: Optional[int] = Field(None, ge=1, description="Round budget per phase (default 10 * n_user)")
    seed: int = Field(0, ge=0, le=2 ** 64 - 1, description="Master seed")
    draw_mode: DrawMode = "per_round"
    ld_mode: LdMode = "sender_ip"

    @property
    def round_budget(self) -> int:
        return self.max_rounds if self.max_rounds is not None else 10 * self.n_user


# ============================================
# METRICS
# ============================================

def message_size(t: Triplet, id_len: int) -> int:
    """Wire size of a triplet in bytes: 1 + id_len + 5 * n*."""
    return 1 + id_len + 5 * len(t.share.indices)


def _endpoint(address: int) -> str:
    return "server" if address == SERVER else f"client:{address}"


class MessageRecord(NamedTuple):
    round: int
    phase: str
    sender: int
    receiver: int
    vid: str
    bytes: int


@dataclass
class PhaseMetrics:
    """Byte, message and round accounting for one protocol phase."""
    phase: str
    n_user: int
    total_bytes: int = 0
    messages_client_to_client: int = 0
    messages_to_server: int = 0
    messages_server_to_client: int = 0
    rounds_used: int = 0
    per_client_sends: List[int] = field(default_factory=list)
    undelivered: int = 0
    vid_collisions: int = 0
    log: List[MessageRecord] = field(default_factory=list)

    def __post_init__(self):
        if not self.per_client_sends:
            self.per_client_sends = [0] * self.n_user

    def record(self, round_no: int, sender: int, receiver: int, t: Triplet, id_len: int) -> None:
        size = message_size(t, id_len)
        self.total_bytes += size
        if sender == SERVER:
            self.messages_server_to_client += 1
        else:
            self.per_client_sends[sender] += 1
            if receiver == SERVER:
                self.messages_to_server += 1
            else:
                self.messages_client_to_client += 1
        self.log.append(MessageRecord(round_no, self.phase, sender, receiver, t.vid, size))

    @property
    def total_messages(self) -> int:
        return self.messages_client_to_client + self.messages_to_server + self.messages_server_to_client

    @property
    def mean_client_sends(self) -> float:
        return float(np.mean(self.per_client_sends)) if self.per_client_sends else 0.0

    def recompute_bytes(self) -> int:
        """Total bytes recomputed from the message log."""
        return sum(record.bytes for record in self.log)

    def to_row(self) -> Dict[str, object]:
        return {
            "phase": self.phase,
            "total_bytes": self.total_bytes,
            "messages_client_to_client": self.messages_client_to_client,
            "messages_to_server": self.messages_to_server,
            "messages_server_to_client": self.messages_server_to_client,
            "rounds_used": self.rounds_used,
            "mean_client_sends": f"{self.mean_client_sends:.6f}",
            "undelivered": self.undelivered,
            "vid_collisions": self.vid_collisions,
        }


METRIC_COLUMNS = [
    "phase", "total_bytes", "messages_client_to_client", "messages_to_server",
    "messages_server_to_client", "rounds_used", "mean_client_sends", "undelivered", "vid_collisions",
]
LOG_COLUMNS = ["round", "phase", "from", "to", "vid", "bytes"]


def message_log_csv(metrics: Sequence[PhaseMetrics]) -> str:
    """Render the message logs of one or more phases as CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for phase in metrics:
        for record in phase.log:
            writer.writerow([
                record.round, record.phase, _endpoint(record.sender),
                _endpoint(record.receiver), record.vid, record.bytes,
            ])
    return buffer.getvalue()


# ============================================
# UPLOAD PHASE
# ============================================

def run_upload_phase(
    cfg: SimConfig,
    data: Sequence[InteractionVector],
) -> Tuple[ServerState, List[ClientState], PhaseMetrics]:
    """
    Run the upload phase until every client has emptied its held triplets.

    Each round first delivers everything sent in the previous round, then
    lets every client with held triplets send.

    Args:
        cfg: simulation settings
        data: one interaction vector per client

    Returns:
        tuple: (server state, client states, metrics)

    Raises:
        ConfigError: If len(data) != cfg.n_user
        PhaseIncompleteError: If max_rounds runs out first (carries metrics)
    """
    if len(data) != cfg.n_user:
        raise ConfigError(f"Expected {cfg.n_user} interaction vectors, got {len(data)}")

    streams = RandomStreams(cfg.seed)
    rngs = [streams.client(UPLOAD, i) for i in range(cfg.n_user)]
    clients = [
        client_init(
            vector, cfg.split, cfg.id_len, cfg.alpha, rngs[i],
            ip=i, draw_mode=cfg.draw_mode, ld_mode=cfg.ld_mode,
        )
        for i, vector in enumerate(data)
    ]
    server = ServerState()
    metrics = PhaseMetrics(phase=UPLOAD_PHASE, n_user=cfg.n_user)

    logger.info(
        f"Upload phase: n_user={cfg.n_user}, s_spl={cfg.split.s_spl}, "
        f"alpha={cfg.alpha}, seed={cfg.seed}"
    )

    in_flight: List[Tuple[int, int, Triplet]] = []
    round_no = 0
    while True:
        for sender, receiver, triplet in in_flight:
            if receiver == SERVER:
                server_receive(server, triplet)
            else:
                client_receive_upload(clients[receiver], triplet, sender)
        in_flight = []

        if not any(client.held for client in clients):
            break
        if round_no >= cfg.round_budget:
            metrics.rounds_used = round_no
            metrics.vid_collisions = server.vid_collisions
            held = sum(len(client.held) for client in clients)
            metrics.undelivered = held
            raise PhaseIncompleteError(
                f"Upload phase did not finish within {cfg.round_budget} rounds; "
                f"{held} triplets still held",
                metrics,
            )

        round_no += 1
        for i, client in enumerate(clients):
            for receiver, triplet in client_upload_round(client, rngs[i], cfg.n_user):
                metrics.record(round_no, i, receiver, triplet, cfg.id_len)
                in_flight.append((i, receiver, triplet))
        logger.debug(f"Upload round {round_no}: {len(in_flight)} messages in flight")

    metrics.rounds_used = round_no
    metrics.vid_collisions = server.vid_collisions
    logger.info(
        f"Upload phase finished in {round_no} rounds: {metrics.total_messages} messages, "
        f"{metrics.total_bytes} bytes, {server.vid_collisions} vid collisions"
    )
    return server, clients, metrics


# ============================================
# DOWNLOAD PHASE
# ============================================

def run_download_phase(
    server: ServerState,
    clients: List[ClientState],
    recs: Dict[str, InteractionVector],
    cfg: SimConfig,
) -> PhaseMetrics:
    """
    Dispatch recommendation triplets and route them until every one is kept
    by its owner or max_rounds is reached. Undelivered triplets are counted,
    not raised.
    """
    n_clients = len(clients)
    streams = RandomStreams(cfg.seed)
    rngs = [streams.client(DOWNLOAD, i) for i in range(n_clients)]
    metrics = PhaseMetrics(phase=DOWNLOAD_PHASE, n_user=n_clients)

    round_no = 1
    in_flight: List[Tuple[int, int, Triplet]] = []
    for receiver, triplet in server_dispatch_recommendations(
        server, recs, cfg.split, streams.server(DOWNLOAD), n_clients
    ):
        metrics.record(round_no, SERVER, receiver, triplet, cfg.id_len)
        in_flight.append((SERVER, receiver, triplet))

    logger.info(f"Download phase: {len(in_flight)} recommendation triplets dispatched")

    while in_flight and round_no < cfg.round_budget:
        round_no += 1
        forwarded: List[Tuple[int, int, Triplet]] = []
        for _, receiver, triplet in in_flight:
            decision = client_route_result(clients[receiver], triplet, rngs[receiver], n_clients)
            if decision is None:
                continue
            next_hop, routed = decision
            metrics.record(round_no, receiver, next_hop, routed, cfg.id_len)
            forwarded.append((receiver, next_hop, routed))
        forwarded.sort(key=lambda message: message[0])
        in_flight = forwarded
        logger.debug(f"Download round {round_no}: {len(in_flight)} triplets still travelling")

    metrics.rounds_used = round_no
    metrics.undelivered = len(in_flight)
    if metrics.undelivered:
        logger.warning(f"{metrics.undelivered} recommendation triplets undelivered after {round_no} rounds")
    logger.info(
        f"Download phase finished in {round_no} rounds: {metrics.total_messages} messages, "
        f"{metrics.total_bytes} bytes"
    )
    return metrics


# ============================================
# FULL PIPELINE
# ============================================

@dataclass
class PipelineResult:
    """Both phases of one run plus the fidelity checks against ground truth."""
    upload: PhaseMetrics
    download: PhaseMetrics
    aggregated: int
    excluded: int
    upload_mismatches: List[str]
    download_mismatches: List[str]
    clients: List[ClientState] = field(repr=False, default_factory=list)

    @property
    def fidelity_ok(self) -> bool:
        return not self.upload_mismatches and not self.download_mismatches and self.download.undelivered == 0

    @property
    def total_bytes(self) -> int:
        return self.upload.total_bytes + self.download.total_bytes

    @property
    def mean_client_sends(self) -> float:
        sends = np.add(self.upload.per_client_sends, self.download.per_client_sends)
        return float(np.mean(sends))


def run_pipeline(cfg: SimConfig, data: Sequence[InteractionVector], rec_spec: RecommenderSpec) -> PipelineResult:
    """
    Upload, aggregate, recommend, download, then check both directions
    against the ground truth the simulator can see.

    Raises:
        ConfigError: If rec_spec.k exceeds n_max
        PhaseIncompleteError: If the upload phase runs out of rounds
    """
    if rec_spec.k > cfg.split.n_max:
        raise ConfigError(f"k={rec_spec.k} must not exceed n_max={cfg.split.n_max}")

    server, clients, upload_metrics = run_upload_phase(cfg, data)
    aggregated = server_aggregate(server)

    truth = {client.vid: client.own_interactions for client in clients}
    upload_mismatches = sorted(
        vid for vid, vector in aggregated.items()
        if vid not in truth or vector.as_set() != truth[vid].as_set()
    )

    matrix = build_matrix(aggregated, cfg.split.n_item)
    recs = recommend(matrix, rec_spec)
    download_metrics = run_download_phase(server, clients, recs, cfg)

    download_mismatches = []
    for client in clients:
        if client.vid not in recs:
            continue
        try:
            assembled = client_assemble_recommendation(client)
        except IncompleteShareSetError:
            download_mismatches.append(client.vid)
            continue
        if assembled.as_set() != recs[client.vid].as_set():
            download_mismatches.append(client.vid)

    result = PipelineResult(
        upload=upload_metrics,
        download=download_metrics,
        aggregated=len(aggregated),
        excluded=len(server.excluded),
        upload_mismatches=upload_mismatches,
        download_mismatches=sorted(download_mismatches),
        clients=clients,
    )
    logger.info(
        f"Pipeline done: {result.total_bytes} bytes total, "
        f"fidelity {'OK' if result.fidelity_ok else 'FAILED'}"
    )
    return result
