"""Deterministic discrete-event network simulator.

Links carry a latency and a bandwidth; a message sent at ``t`` arrives at
``t + latency + size / bandwidth``. There is no queueing or contention.
Events with equal timestamps run in insertion order, so a run is fully
determined by its topology, seeds and workload.
"""
from __future__ import annotations

import heapq
import math
import statistics
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

__all__ = ["LinkSpec", "Event", "SimNetwork", "build_complete", "send", "step", "latency_stats"]

DELIVER = "deliver"
TIMER = "timer"


@dataclass(frozen=True)
class LinkSpec:
    latency: float
    bandwidth: float
    drop_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.latency < 0 or not math.isfinite(self.latency):
            raise ValueError(f"latency must be finite and >= 0, got {self.latency}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")

    def transit(self, size: int) -> float:
        return self.latency + size / self.bandwidth


@dataclass(order=True)
class Event:
    time: float
    seq: int
    kind: str = field(compare=False)
    source: int = field(compare=False)
    target: int = field(compare=False)
    msg_class: str = field(compare=False, default="")
    payload: object = field(compare=False, default=None)
    sent_at: float = field(compare=False, default=0.0)

    @property
    def size(self) -> int:
        return len(self.payload) if isinstance(self.payload, (bytes, bytearray)) else 0


class NodeHandler(Protocol):
    def handle(self, net: "SimNetwork", event: Event) -> None: ...


class SimNetwork:
    def __init__(self, n: int, seed: int = 0, record_log: bool = False):
        if n < 1:
            raise ValueError("a network needs at least one node")
        self.n = n
        self.nodes: list[NodeHandler | None] = [None] * n
        self.links: dict[tuple[int, int], LinkSpec] = {}
        self.clock = 0.0
        self.metrics: dict[str, list[float]] = {}
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.log: list[tuple] | None = [] if record_log else None
        self._queue: list[Event] = []
        self._seq = 0
        self._fault_rng = np.random.default_rng(seed)

    # -- topology --------------------------------------------------------

    @staticmethod
    def _key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def link(self, a: int, b: int) -> LinkSpec:
        try:
            return self.links[self._key(a, b)]
        except KeyError:
            raise KeyError(f"no link between {a} and {b}") from None

    def set_link(self, a: int, b: int, spec: LinkSpec) -> None:
        if a == b:
            raise ValueError("self-links are not allowed")
        for x in (a, b):
            if not 0 <= x < self.n:
                raise ValueError(f"unknown node {x}")
        self.links[self._key(a, b)] = spec

    def neighbours(self, node: int) -> list[int]:
        return sorted(b if a == node else a for a, b in self.links if node in (a, b))

    def attach(self, node: int, handler: NodeHandler) -> None:
        self.nodes[node] = handler

    # -- events ----------------------------------------------------------

    def _push(self, ev: Event) -> None:
        heapq.heappush(self._queue, ev)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def schedule(self, node: int, delay: float, name: str, payload: object = None) -> None:
        """Timer for ``node`` firing ``delay`` seconds from now."""
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        self._push(Event(self.clock + delay, self._next_seq(), TIMER, node, node, name, payload, self.clock))

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run(self, until: float | None = None, max_events: int | None = None, stop=None) -> int:
        """Process events until the queue empties, ``until`` is passed,
        ``max_events`` were handled or ``stop()`` returns true."""
        done = 0
        while self._queue:
            if until is not None and self._queue[0].time > until:
                break
            if max_events is not None and done >= max_events:
                break
            if stop is not None and stop():
                break
            step(self)
            done += 1
        return done

    def export_log(self, path) -> None:
        """Write the event log as ``time kind source target class size`` lines."""
        if self.log is None:
            raise ValueError("network was built without record_log=True")
        with open(path, "w") as fh:
            for t, kind, src, dst, cls, size in self.log:
                fh.write(f"{t:.17g} {kind} {src} {dst} {cls} {size}\n")


def build_complete(n: int, latency: float, bandwidth: float, seed: int = 0, record_log: bool = False) -> SimNetwork:
    """Fully connected network with ``n(n-1)/2`` identical links."""
    net = SimNetwork(n, seed=seed, record_log=record_log)
    spec = LinkSpec(latency, bandwidth)
    for a in range(n):
        for b in range(a + 1, n):
            net.links[(a, b)] = spec
    return net


def send(net: SimNetwork, src: int, dst: int, payload: bytes, now: float | None = None, msg_class: str = "data") -> float | None:
    """Schedule delivery of ``payload``; returns the arrival time, or ``None``
    if the link's fault injector dropped it.

    The transit time is recorded under ``msg_class`` when the message is
    delivered.
    """
    if now is not None and now != net.clock:
        raise ValueError(f"send at t={now} but the clock reads {net.clock}")
    if src == dst:
        raise ValueError("cannot send to self")
    spec = net.link(src, dst)
    size = len(payload)
    if net.log is not None:
        net.log.append((net.clock, "send", src, dst, msg_class, size))
    net.sent += 1
    if spec.drop_probability > 0 and net._fault_rng.random() < spec.drop_probability:
        net.dropped += 1
        if net.log is not None:
            net.log.append((net.clock, "drop", src, dst, msg_class, size))
        return None
    arrival = net.clock + spec.transit(size)
    net._push(Event(arrival, net._next_seq(), DELIVER, src, dst, msg_class, bytes(payload), net.clock))
    return arrival


def step(net: SimNetwork) -> Event | None:
    """Pop and dispatch the earliest event; ``None`` when the queue is empty."""
    if not net._queue:
        return None
    ev = heapq.heappop(net._queue)
    net.clock = ev.time
    if ev.kind == DELIVER:
        net.delivered += 1
        net.metrics.setdefault(ev.msg_class, []).append(ev.time - ev.sent_at)
    if net.log is not None:
        net.log.append((ev.time, ev.kind, ev.source, ev.target, ev.msg_class, ev.size))
    handler = net.nodes[ev.target]
    if handler is not None:
        handler.handle(net, ev)
    return ev


def latency_stats(net: SimNetwork, msg_class: str) -> tuple[float, float, int]:
    """Mean, sample standard deviation and count of transit times."""
    xs = net.metrics.get(msg_class)
    if not xs:
        raise ValueError(f"no messages recorded for class {msg_class!r}")
    sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return statistics.fmean(xs), sd, len(xs)
