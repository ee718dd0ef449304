# app/services/protocol_service.py

"""
Client and server state machines for the two protocol phases.

Upload: each client splits its interactions, tags every share with its
virtual ID and lets the triplets hop between random clients. A client keeps
forwarding with probability p_sto, which decays by alpha after every sending
round, and otherwise hands its held triplets to the server. Receivers note
(vid -> previous hop) in their LD table.

Download: the server splits each recommendation list the same way and
drops the triplets on random clients, which keep their own, follow LD back
towards the owner, or forward at random.

Nothing here knows about rounds or transport; simnet drives these functions.
"""

import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Set, Tuple

import numpy as np

from app.services.errors import IncompleteShareSetError, ShareMixingError, SplitRecError
from app.services.split_service import (
    InteractionVector,
    SplitConfig,
    SplitShare,
    check_interactions,
    reconstruct,
    split_vector,
)
from app.services.virtual_id import VirtualId, is_valid_virtual_id, new_virtual_id

logger = logging.getLogger(__name__)

# Destination address of the central server. Clients are addressed by their
# non-negative index.
SERVER = -1

# Wire message types
UPLOAD_MESSAGE = 1
DOWNLOAD_MESSAGE = 2

DrawMode = Literal["per_round", "per_triplet"]
LdMode = Literal["sender_ip", "vid"]

Send = Tuple[int, "Triplet"]


# ============================================
# DOMAIN TYPES
# ============================================

@dataclass(frozen=True, eq=False)
class Triplet:
    """(virtual ID, split vector, masked index vector), the unit of transmission."""
    vid: VirtualId
    share: SplitShare


@dataclass(eq=False)
class ClientState:
    """
    One client's protocol state.

    ip is the client's transport address (its index in the simulation).
    ld maps a virtual ID to the address it was first received from;
    seen_ips holds every sender address already considered for ld.
    """
    ip: int
    vid: VirtualId
    alpha: float
    own_interactions: InteractionVector
    p_sto: float = 1.0
    rounds_sent: int = 0
    held: List[Triplet] = field(default_factory=list)
    ld: Dict[str, int] = field(default_factory=dict)
    seen_ips: Set[int] = field(default_factory=set)
    ld_rec: List[Triplet] = field(default_factory=list)
    rerouted: Set[bytes] = field(default_factory=set)
    draw_mode: DrawMode = "per_round"
    ld_mode: LdMode = "sender_ip"


@dataclass(eq=False)
class ServerState:
    """
    Server-side store. Shares are grouped by virtual ID only; the server
    never learns which address a triplet came from.
    """
    id_list: Dict[str, List[SplitShare]] = field(default_factory=dict)
    corrupt: Set[str] = field(default_factory=set)
    vid_collisions: int = 0
    excluded: Dict[str, str] = field(default_factory=dict)
    rec_outbox: List[Triplet] = field(default_factory=list)


# ============================================
# CLIENT: UPLOAD PHASE
# ============================================

def client_init(
    interactions: InteractionVector,
    cfg: SplitConfig,
    id_len: int,
    alpha: float,
    rng: np.random.Generator,
    ip: int = 0,
    draw_mode: DrawMode = "per_round",
    ld_mode: LdMode = "sender_ip",
) -> ClientState:
    """
    Create a client: draw its virtual ID and split its interactions.

    Args:
        interactions: the client's interaction vector
        cfg: split settings
        id_len: virtual ID length
        alpha: p_sto decay factor, in (0, 1)
        rng: the client's random stream
        ip: the client's address
        draw_mode: one forwarding draw per round, or one per held triplet
        ld_mode: LD dedup keyed on sender address, or on virtual ID

    Returns:
        ClientState: with s_spl own triplets held and p_sto = 1

    Raises:
        InvalidInteractionError: If the interactions violate cfg
        ValueError: If alpha or id_len are out of range
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if ip < 0:
        raise ValueError(f"Client address must be non-negative, got {ip}")
    check_interactions(interactions, cfg)

    vid = new_virtual_id(id_len, rng)
    shares = split_vector(interactions, cfg, rng)
    return ClientState(
        ip=ip,
        vid=vid,
        alpha=alpha,
        own_interactions=interactions,
        held=[Triplet(vid=vid, share=share) for share in shares],
        draw_mode=draw_mode,
        ld_mode=ld_mode,
    )


def _random_peers(own_ip: int, n_clients: int, count: int, rng: np.random.Generator) -> List[int]:
    """Uniform draws over every client address except own_ip."""
    if n_clients < 2:
        raise ValueError("At least two clients are needed to forward to a peer")
    picks = rng.integers(0, n_clients - 1, size=count)
    picks = picks + (picks >= own_ip)
    return [int(p) for p in picks]


def client_upload_round(state: ClientState, rng: np.random.Generator, n_clients: int) -> List[Send]:
    """
    One sending round: forward every held triplet to random peers with
    probability p_sto, otherwise hand them to the server; then decay p_sto.

    Args:
        state: the sending client (mutated)
        rng: the client's random stream
        n_clients: number of clients in the network

    Returns:
        list: (destination, triplet) pairs; destination SERVER for the server
    """
    if not state.held:
        return []

    held, state.held = state.held, []
    if state.draw_mode == "per_triplet":
        draws = rng.random(len(held))
        to_peer = draws < state.p_sto
        peers = iter(_random_peers(state.ip, n_clients, int(to_peer.sum()), rng))
        sends = [(next(peers) if forward else SERVER, t) for forward, t in zip(to_peer, held)]
    elif rng.random() < state.p_sto:
        sends = list(zip(_random_peers(state.ip, n_clients, len(held), rng), held))
    else:
        sends = [(SERVER, t) for t in held]

    state.p_sto *= state.alpha
    state.rounds_sent += 1
    return sends


def client_receive_upload(state: ClientState, t: Triplet, sender_ip: int) -> ClientState:
    """
    Accept a relayed upload triplet: note where it came from and hold it
    for forwarding in the next round.

    With ld_mode "sender_ip" only the first triplet from each sender
    address is considered for LD; an already-mapped vid keeps its first
    mapping in both modes.
    """
    if sender_ip == state.ip:
        raise ValueError("A client cannot receive its own upload message")

    if state.ld_mode == "vid":
        state.ld.setdefault(t.vid, sender_ip)
    elif sender_ip not in state.seen_ips:
        state.seen_ips.add(sender_ip)
        state.ld.setdefault(t.vid, sender_ip)

    state.held.append(t)
    return state


# ============================================
# SERVER
# ============================================

def server_receive(state: ServerState, t: Triplet) -> ServerState:
    """
    Store a share under its virtual ID. A share whose index vector differs
    from the group's marks the group corrupt (two clients drew the same vid).
    """
    group = state.id_list.setdefault(t.vid, [])
    if group and not np.array_equal(group[0].indices, t.share.indices):
        if t.vid not in state.corrupt:
            state.corrupt.add(t.vid)
            state.vid_collisions += 1
            logger.warning(f"Virtual ID collision detected for vid {t.vid}")
    group.append(t.share)
    return state


def server_aggregate(state: ServerState) -> Dict[str, InteractionVector]:
    """
    Reconstruct every stored group.

    Corrupt or unreconstructable groups are left out of the result and
    recorded in state.excluded with the reason.

    Returns:
        dict: virtual ID -> reconstructed interaction vector
    """
    aggregated: Dict[str, InteractionVector] = {}
    state.excluded = {}
    for vid, shares in state.id_list.items():
        if vid in state.corrupt:
            state.excluded[vid] = "vid collision"
            continue
        try:
            aggregated[vid] = reconstruct(shares)
        except (ShareMixingError, IncompleteShareSetError) as e:
            state.excluded[vid] = str(e)
            logger.warning(f"Excluding group {vid}: {e}")

    logger.info(
        f"Aggregated {len(aggregated)} of {len(state.id_list)} groups "
        f"({len(state.excluded)} excluded)"
    )
    return aggregated


def server_dispatch_recommendations(
    state: ServerState,
    recs: Dict[str, InteractionVector],
    cfg: SplitConfig,
    rng: np.random.Generator,
    n_clients: int,
) -> List[Send]:
    """
    Split every recommendation list and address each triplet to a uniformly
    random client (the owner may be hit by chance).

    Lists longer than n_max are cut to their first n_max items so the split
    preconditions hold.

    Returns:
        list: (destination, triplet) pairs in ascending vid order
    """
    if n_clients < 1:
        raise ValueError("No clients to dispatch to")

    sends: List[Send] = []
    for vid in sorted(recs):
        rec = recs[vid]
        if len(rec) > cfg.n_max:
            rec = InteractionVector(rec.items[:cfg.n_max])
        shares = split_vector(rec, cfg, rng, allow_empty=True)
        destinations = rng.integers(0, n_clients, size=len(shares))
        for dest, share in zip(destinations, shares):
            triplet = Triplet(vid=VirtualId(vid), share=share)
            state.rec_outbox.append(triplet)
            sends.append((int(dest), triplet))
    return sends


# ============================================
# CLIENT: DOWNLOAD PHASE
# ============================================

def client_route_result(
    state: ClientState,
    t: Triplet,
    rng: np.random.Generator,
    n_clients: int,
) -> Optional[Send]:
    """
    Route a recommendation triplet.

    Returns:
        None when the triplet is the client's own and was kept in ld_rec;
        otherwise the (destination, triplet) to send on: the LD previous hop
        when known, a random other client when not. A triplet that comes
        back to a client that already sent it along LD goes out at random,
        which breaks LD cycles.
    """
    if t.vid == state.vid:
        state.ld_rec.append(t)
        return None

    previous_hop = state.ld.get(t.vid)
    if previous_hop is not None:
        fingerprint = t.share.fingerprint()
        if fingerprint not in state.rerouted:
            state.rerouted.add(fingerprint)
            return previous_hop, t

    return _random_peers(state.ip, n_clients, 1, rng)[0], t


def client_assemble_recommendation(state: ClientState) -> InteractionVector:
    """
    Reconstruct the client's recommendation list from ld_rec.

    Raises:
        IncompleteShareSetError: If shares are still missing
    """
    if not state.ld_rec:
        raise IncompleteShareSetError(f"Client {state.ip} holds no recommendation shares yet")
    return reconstruct([t.share for t in state.ld_rec])


# ============================================
# WIRE ENCODING
# ============================================

_HEADER = struct.Struct("<B")


def encode_triplet(t: Triplet, message_type: int = UPLOAD_MESSAGE) -> bytes:
    """
    Encode a triplet: type byte, vid, n* little-endian uint32 indices,
    n* int8 split values.

    Raises:
        SplitRecError: If a split value does not fit in a signed byte
    """
    if message_type not in (UPLOAD_MESSAGE, DOWNLOAD_MESSAGE):
        raise ValueError(f"Unknown message type: {message_type}")
    split = t.share.split
    if split.size and (split.min() < -128 or split.max() > 127):
        raise SplitRecError("Split value outside the signed 8-bit wire range")
    return b"".join([
        _HEADER.pack(message_type),
        t.vid.encode("ascii"),
        t.share.indices.astype("<u4").tobytes(),
        split.astype("i1").tobytes(),
    ])


def decode_triplet(blob: bytes, id_len: int) -> Tuple[int, Triplet]:
    """
    Decode a triplet produced by encode_triplet.

    Returns:
        tuple: (message_type, triplet)
    """
    body = len(blob) - _HEADER.size - id_len
    if body < 0 or body % 5:
        raise SplitRecError(f"Malformed triplet of {len(blob)} bytes for id_len={id_len}")
    n_star = body // 5

    (message_type,) = _HEADER.unpack_from(blob, 0)
    offset = _HEADER.size
    vid = blob[offset:offset + id_len].decode("ascii")
    if not is_valid_virtual_id(vid, id_len):
        raise SplitRecError(f"Malformed virtual ID in triplet: {vid!r}")
    offset += id_len
    indices = np.frombuffer(blob, dtype="<u4", count=n_star, offset=offset).astype(np.int64)
    offset += 4 * n_star
    split = np.frombuffer(blob, dtype="i1", count=n_star, offset=offset).astype(np.int64)
    return message_type, Triplet(vid=VirtualId(vid), share=SplitShare(split=split, indices=indices))
