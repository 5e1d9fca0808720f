"""Per-TTI channel-and-QoS-aware allocation of resource block groups."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .radio import CqiTable, bits_per_rb
from .traffic import UeQueue, Packet


@lru_cache(maxsize=8)
def _rates_by_cqi(table: CqiTable) -> tuple:
    return tuple([0] + [bits_per_rb(table, q) for q in range(1, 16)])


@dataclass(frozen=True)
class RbgPartition:
    groups: tuple
    k: int

    @property
    def n_rb(self) -> int:
        return sum(self.groups)


def rbg_partition(n_rb: int, bandwidth_mhz: float | None = None) -> RbgPartition:
    """Split the RB grid into groups of K RBs, K picked by grid-size tier.

    bandwidth_mhz is accepted for callers that think in MHz, but the tier is
    keyed on the RB count (the two are locked together at 5 RB/MHz anyway).
    """
    if n_rb < 1:
        raise ValueError("n_rb must be >= 1")
    if n_rb <= 10:
        k = 1
    elif n_rb <= 26:
        k = 2
    elif n_rb <= 63:
        k = 3
    else:
        k = 4
    n_groups = math.ceil(n_rb / k)
    sizes = [k] * (n_groups - 1)
    sizes.append(n_rb - k * (n_groups - 1))
    return RbgPartition(tuple(sizes), k)


@dataclass
class TtiAllocation:
    assignments: dict = field(default_factory=dict)   # group index -> ue id
    bits_granted: dict = field(default_factory=dict)  # ue id -> granted bits
    rbs_used: int = 0


def schedule_tti(partition: RbgPartition, backlogged, table: CqiTable, now: float = 0.0) -> TtiAllocation:
    """Greedy RBG assignment by the metric m = (1 + HOL_ms) * bits_per_rb(CQI).

    backlogged holds (ue_id, hol_ms, cqi, backlog_bits) tuples. Groups are
    walked in index order; each goes to the highest-metric UE whose backlog is
    not yet covered by earlier grants. Ties resolve to the lower ue_id. UEs at
    CQI 0 cannot carry bits and are skipped.
    """
    alloc = TtiAllocation()
    rates = _rates_by_cqi(table)
    pool = []
    for ue_id, hol_ms, cqi, backlog_bits in backlogged:
        rate = rates[cqi]
        if rate <= 0 or backlog_bits <= 0:
            continue
        metric = (1.0 + hol_ms) * rate
        pool.append((-metric, ue_id, rate, backlog_bits))
    if not pool:
        return alloc
    pool.sort()
    idx = 0
    ue_id, rate, remaining = pool[0][1], pool[0][2], pool[0][3]
    for g_idx, g_size in enumerate(partition.groups):
        while remaining <= 0:
            idx += 1
            if idx >= len(pool):
                return alloc
            ue_id, rate, remaining = pool[idx][1], pool[idx][2], pool[idx][3]
        bits = g_size * rate
        alloc.assignments[g_idx] = ue_id
        alloc.bits_granted[ue_id] = alloc.bits_granted.get(ue_id, 0) + bits
        alloc.rbs_used += g_size
        remaining -= bits
    return alloc


def deliver(alloc: TtiAllocation, queues, now: float) -> list[Packet]:
    """Dequeue whole packets per UE while they fit inside the granted bits.

    A head packet that does not fit stays queued (no segmentation). Delivered
    packets are stamped delivered_at_ms = now + 1 and appended to the queue's
    window delivery log.
    """
    out: list[Packet] = []
    for ue_id, bits in alloc.bits_granted.items():
        q: UeQueue = queues[ue_id]
        used_bytes = 0
        while q.pending and (used_bytes + q.pending[0].size_bytes) * 8 <= bits:
            pkt = q.pending.popleft()
            used_bytes += pkt.size_bytes
            q.pending_bytes -= pkt.size_bytes
            pkt.delivered_at_ms = now + 1
            q.delivered.append(pkt)
            q.delivered_count += 1
            out.append(pkt)
    return out
