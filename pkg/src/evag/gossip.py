"""Scheduler agent: contribution pings, per-peer cache and adaptive refresh rate.

A node pings a random peer every ``delta_t`` seconds with a random local
solution. The receiver stores it in its cache (one slot per peer, newest
evaluation count wins) and answers with a pong. The round trip time of that
exchange becomes the sender's next ``delta_t``.

Wire layout (little-endian)::

    tag u8 (1=Ping, 2=Pong) | token u64 | sender u32
    Ping only: num_evaluations u64 | genome length u16 | genome f64[] | fitness f64
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .operators import Individual

__all__ = [
    "Contribution",
    "Cache",
    "SchedulerState",
    "Ping",
    "Pong",
    "DecodeError",
    "scheduler_tick",
    "handle_ping",
    "handle_pong",
    "cache_insert",
    "encode_message",
    "decode_message",
    "write_frame",
    "read_frame",
]

DELTA_T_INITIAL = 1.0
DELTA_T_MIN = 1e-3
DELTA_T_MAX = 10.0
# pending pings older than this many delta_t_max are treated as lost
LOST_PONG_FACTOR = 10

PING, PONG = 1, 2
_HEADER = struct.Struct("<BQI")
_PING_FIXED = struct.Struct("<QH")
_F64 = struct.Struct("<d")
U32_MAX = 2**32 - 1
U64_MAX = 2**64 - 1


@dataclass(frozen=True, eq=True)
class Contribution:
    """Gossip payload: sender address, its evaluation count and one solution."""

    address: int
    num_evaluations: int
    solution: Individual


@dataclass(frozen=True)
class Ping:
    token: int
    contribution: Contribution

    @property
    def sender(self) -> int:
        return self.contribution.address


@dataclass(frozen=True)
class Pong:
    token: int
    sender: int


class Cache:
    """At most one contribution per peer, never one from ``owner``."""

    def __init__(self, owner: int, dim: int | None = None):
        self.owner = owner
        self.dim = dim
        self.entries: dict[int, Contribution] = {}
        # bumped on every successful insert so readers can resync lazily
        self.version = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, node: int) -> bool:
        return node in self.entries

    def contributions(self) -> list[Contribution]:
        return [self.entries[k] for k in sorted(self.entries)]


def cache_insert(cache: Cache, c: Contribution) -> bool:
    """Store ``c`` unless the slot already holds a higher evaluation count."""
    if c.address == cache.owner:
        raise ValueError(f"node {cache.owner} cannot cache its own contribution")
    old = cache.entries.get(c.address)
    if old is not None and c.num_evaluations < old.num_evaluations:
        return False
    cache.entries[c.address] = c
    cache.version += 1
    return True


@dataclass
class SchedulerState:
    node_id: int
    directory: list[int]
    delta_t: float = DELTA_T_INITIAL
    delta_t_min: float = DELTA_T_MIN
    delta_t_max: float = DELTA_T_MAX
    pending_pings: dict[int, float] = field(default_factory=dict)
    last_send: float = 0.0
    next_token: int = 0
    dropped: int = 0
    unknown_pongs: int = 0
    lost_pongs: int = 0
    sent: int = 0

    def __post_init__(self) -> None:
        self.directory = sorted(p for p in self.directory if p != self.node_id)
        if not self.delta_t_min <= self.delta_t_max:
            raise ValueError("delta_t_min must not exceed delta_t_max")
        self.delta_t = min(max(self.delta_t, self.delta_t_min), self.delta_t_max)


def scheduler_tick(st: SchedulerState, bb, rng: np.random.Generator, now: float) -> tuple[int, Ping] | None:
    """Build the next ping, or ``None`` if there is no peer or it is too early.

    ``bb`` must provide ``local_evaluations`` and ``random_agent_solution(rng)``.
    Returns ``(target, ping)``.
    """
    horizon = LOST_PONG_FACTOR * st.delta_t_max
    for token in [t for t, sent in st.pending_pings.items() if now - sent > horizon]:
        del st.pending_pings[token]
        st.lost_pongs += 1
    if not st.directory or now < st.last_send + st.delta_t:
        return None
    target = st.directory[int(rng.integers(len(st.directory)))]
    solution = bb.random_agent_solution(rng)
    token = st.next_token
    st.next_token = (st.next_token + 1) & U64_MAX
    st.pending_pings[token] = now
    st.last_send = now
    st.sent += 1
    return target, Ping(token, Contribution(st.node_id, int(bb.local_evaluations), solution))


def _well_formed(c: Contribution, cache: Cache) -> bool:
    sol = c.solution
    if c.address == cache.owner or c.num_evaluations < 0:
        return False
    if cache.dim is not None and sol.genome.shape != (cache.dim,):
        return False
    return bool(np.all(np.isfinite(sol.genome))) and math.isfinite(sol.fitness)


def handle_ping(st: SchedulerState, cache: Cache, ping: Ping, now: float) -> Pong | None:
    """Cache the contribution and acknowledge it; malformed pings get no reply."""
    if not _well_formed(ping.contribution, cache):
        st.dropped += 1
        return None
    cache_insert(cache, ping.contribution)
    return Pong(ping.token, st.node_id)


def handle_pong(st: SchedulerState, token: int, now: float) -> None:
    sent = st.pending_pings.pop(token, None)
    if sent is None:
        st.unknown_pongs += 1
        return
    st.delta_t = min(max(now - sent, st.delta_t_min), st.delta_t_max)


# -- codec -------------------------------------------------------------------


class DecodeError(ValueError):
    pass


def encode_message(m: Ping | Pong) -> bytes:
    if isinstance(m, Pong):
        return _HEADER.pack(PONG, m.token, m.sender)
    c = m.contribution
    genome = np.ascontiguousarray(c.solution.genome, dtype="<f8")
    if genome.shape[0] > 0xFFFF:
        raise ValueError("genome too long for the wire format")
    return b"".join(
        (
            _HEADER.pack(PING, m.token, c.address),
            _PING_FIXED.pack(c.num_evaluations, genome.shape[0]),
            genome.tobytes(),
            _F64.pack(c.solution.fitness),
        )
    )


def decode_message(data: bytes) -> Ping | Pong:
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise DecodeError(f"truncated header: {len(data)} bytes")
    tag, token, sender = _HEADER.unpack_from(data)
    if tag == PONG:
        if len(data) != _HEADER.size:
            raise DecodeError("pong carries trailing bytes")
        return Pong(token, sender)
    if tag != PING:
        raise DecodeError(f"unknown message tag {tag}")
    off = _HEADER.size
    if len(data) < off + _PING_FIXED.size:
        raise DecodeError("truncated ping")
    evals, length = _PING_FIXED.unpack_from(data, off)
    off += _PING_FIXED.size
    need = off + 8 * length + 8
    if need > len(data):
        raise DecodeError(f"declared genome length {length} exceeds remaining bytes")
    if need < len(data):
        raise DecodeError("ping carries trailing bytes")
    genome = np.frombuffer(data, dtype="<f8", count=length, offset=off).astype(np.float64)
    (fitness,) = _F64.unpack_from(data, off + 8 * length)
    return Ping(token, Contribution(sender, evals, Individual(genome, fitness)))


def message_size(dim: int) -> int:
    """Encoded size of a ping carrying a ``dim``-gene genome."""
    return _HEADER.size + _PING_FIXED.size + 8 * dim + 8


# -- stream transport --------------------------------------------------------

_LEN = struct.Struct("<I")


def write_frame(stream, payload: bytes) -> None:
    """Write one length-prefixed frame to a binary stream (file or socket file)."""
    stream.write(_LEN.pack(len(payload)) + payload)


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def read_frame(stream) -> bytes | None:
    """Read one frame; ``None`` on clean end of stream."""
    head = _read_exact(stream, _LEN.size)
    if not head:
        return None
    if len(head) < _LEN.size:
        raise DecodeError("truncated frame length")
    (n,) = _LEN.unpack(head)
    body = _read_exact(stream, n)
    if len(body) < n:
        raise DecodeError("truncated frame body")
    return body
