"""Downlink traffic sources (CBR and Poisson flows) and per-UE transmit queues."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class FlowKind(Enum):
    CBR = "cbr"
    POISSON = "poisson"


@dataclass(frozen=True)
class FlowSpec:
    kind: FlowKind
    payload_bytes: int
    interval_ms: Optional[float] = None
    rate_bps: Optional[float] = None
    phase_ms: float = 0.0

    def __post_init__(self):
        if self.payload_bytes < 1:
            raise ValueError("payload_bytes must be >= 1")
        if self.kind is FlowKind.CBR:
            if self.interval_ms is None or self.interval_ms <= 0:
                raise ValueError("CBR flow requires interval_ms > 0")
        else:
            if self.rate_bps is None or self.rate_bps <= 0:
                raise ValueError("Poisson flow requires rate_bps > 0")

    @property
    def mean_interarrival_ms(self) -> float:
        if self.kind is FlowKind.CBR:
            return float(self.interval_ms)
        return self.payload_bytes * 8.0 / self.rate_bps * 1000.0


def cbr_flow(payload_bytes: int = 250, interval_ms: float = 10.0, phase_ms: float = 0.0) -> FlowSpec:
    return FlowSpec(FlowKind.CBR, payload_bytes, interval_ms=interval_ms, phase_ms=phase_ms)


def poisson_flow(payload_bytes: int = 32, rate_bps: float = 100_000.0) -> FlowSpec:
    return FlowSpec(FlowKind.POISSON, payload_bytes, rate_bps=rate_bps)


@dataclass
class Packet:
    __slots__ = ("id", "ue_id", "size_bytes", "created_at_ms", "delivered_at_ms")
    id: int
    ue_id: int
    size_bytes: int
    created_at_ms: float
    delivered_at_ms: Optional[float]

    def __init__(self, id, ue_id, size_bytes, created_at_ms, delivered_at_ms=None):
        self.id = id
        self.ue_id = ue_id
        self.size_bytes = size_bytes
        self.created_at_ms = created_at_ms
        self.delivered_at_ms = delivered_at_ms


class UeQueue:
    """FIFO transmit queue with tail drop plus cumulative bookkeeping counters."""

    def __init__(self, capacity_packets: int = 300):
        if capacity_packets < 1:
            raise ValueError("capacity_packets must be >= 1")
        self.capacity_packets = capacity_packets
        self.pending: deque[Packet] = deque()
        self.pending_bytes = 0
        self.delivered: list[Packet] = []  # current-window delivery log
        self.dropped_count = 0
        self.generated_count = 0
        self.delivered_count = 0
        self.lost_disconnect_count = 0
        self.next_packet_id = 0

    def __len__(self):
        return len(self.pending)


def generate(flow: FlowSpec, window, rng, ue_id: int = 0, start_id: int = 0) -> list[Packet]:
    """Emit the flow's packets with creation times inside [t0, t1).

    CBR timestamps sit on the flow's phase grid; Poisson inter-arrivals are
    exponential with mean payload_bits / rate_bps. Packet ids continue from
    start_id so that per-UE ids stay strictly increasing across windows.
    """
    t0, t1 = window
    if t1 < t0:
        raise ValueError("window must satisfy t1 >= t0")
    if t1 == t0:
        return []
    out: list[Packet] = []
    pid = start_id
    if flow.kind is FlowKind.CBR:
        interval = float(flow.interval_ms)
        k = math.ceil((t0 - flow.phase_ms) / interval)
        t = flow.phase_ms + k * interval
        while t < t1:
            out.append(Packet(pid, ue_id, flow.payload_bytes, t))
            pid += 1
            t += interval
    else:
        mean = flow.mean_interarrival_ms
        span = t1 - t0
        t = t0
        while True:
            n = max(16, int(span / mean * 1.25) + 8)
            gaps = rng.exponential(mean, size=n)
            for g in gaps:
                t += g
                if t >= t1:
                    return out
                out.append(Packet(pid, ue_id, flow.payload_bytes, t))
                pid += 1
            span = t1 - t
    return out


def enqueue(queue: UeQueue, pkt: Packet) -> bool:
    """Append under the capacity limit; count a tail drop otherwise."""
    queue.generated_count += 1
    if len(queue.pending) >= queue.capacity_packets:
        queue.dropped_count += 1
        return False
    queue.pending.append(pkt)
    queue.pending_bytes += pkt.size_bytes
    return True


def hol_delay_ms(queue: UeQueue, now: float) -> float:
    if not queue.pending:
        return 0.0
    return now - queue.pending[0].created_at_ms


def flush_pending(queue: UeQueue) -> int:
    """Discard every pending packet, counting each as lost to disconnection."""
    n = len(queue.pending)
    queue.lost_disconnect_count += n
    queue.pending.clear()
    queue.pending_bytes = 0
    return n
