"""Per-window KPI aggregation: throughput, delay, jitter, loss, utilization."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .traffic import UeQueue


@dataclass
class KpiWindow:
    step: int
    t_start_ms: int
    t_end_ms: int
    n_ues: int
    n_tti: int
    # per UE, length n_ues
    delivered_bytes: np.ndarray
    delivered_count: np.ndarray
    generated: np.ndarray
    dropped: np.ndarray
    lost_disconnect: np.ndarray
    pending: np.ndarray
    mean_delay_ms: np.ndarray
    jitter_ms: np.ndarray
    cqi: np.ndarray
    connected: np.ndarray
    # per BS
    rbu: np.ndarray
    attached: np.ndarray
    attached_ratio: np.ndarray
    # network scalars
    throughput_bps: float
    plr: float
    mean_delay_net_ms: float
    mean_jitter_net_ms: float
    handovers: int
    disconnected_count: int


def rbu(tti_log) -> float:
    arr = np.asarray(tti_log, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("utilization log is empty")
    return float(arr.mean())


def attachment_ratios(attached_counts, n_total: int) -> np.ndarray:
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    return np.asarray(attached_counts, dtype=np.float64) / n_total


def ue_delay_ms(delivered, queue: UeQueue, now: float) -> float:
    """Mean delivered-packet delay this window; falls back to the age of the
    oldest pending packet when nothing was delivered, then to zero."""
    if delivered:
        return sum(p.delivered_at_ms - p.created_at_ms for p in delivered) / len(delivered)
    if queue is not None and queue.pending:
        return now - queue.pending[0].created_at_ms
    return 0.0


def jitter_ms(delivered) -> float:
    if len(delivered) < 2:
        return 0.0
    delays = [p.delivered_at_ms - p.created_at_ms for p in delivered]
    diffs = [abs(b - a) for a, b in zip(delays, delays[1:])]
    return sum(diffs) / len(diffs)


def plr(generated: int, dropped: int, lost_on_disconnect: int = 0) -> float:
    lost = dropped + lost_on_disconnect
    if generated < lost:
        raise ValueError("generated must cover dropped + lost_on_disconnect")
    if generated == 0:
        return 0.0
    return lost / generated


def throughput_bps(delivered_bytes: int, window_s: float) -> float:
    if window_s <= 0:
        raise ValueError("window_s must be > 0")
    return 8.0 * delivered_bytes / window_s


def mean_ci90(values):
    """Sample mean with a two-sided 90% Student-t half-width across seeds.

    A single observation has no spread estimate; its interval is width zero.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mean_ci90 needs at least one value")
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, 0.0
    sd = float(arr.std(ddof=1))
    tcrit = float(stats.t.ppf(0.95, arr.size - 1))
    return mean, tcrit * sd / np.sqrt(arr.size)


def kpi_hash(kpi: KpiWindow) -> str:
    """Stable digest of a window, used to assert trajectory determinism."""
    parts = [
        repr(kpi.step), repr(kpi.t_start_ms), repr(kpi.t_end_ms),
        repr(kpi.delivered_bytes.tolist()), repr(kpi.delivered_count.tolist()),
        repr(kpi.generated.tolist()), repr(kpi.dropped.tolist()),
        repr(kpi.lost_disconnect.tolist()), repr(kpi.pending.tolist()),
        repr(kpi.mean_delay_ms.tolist()), repr(kpi.jitter_ms.tolist()),
        repr(kpi.cqi.tolist()), repr(kpi.connected.tolist()),
        repr(kpi.rbu.tolist()), repr(kpi.attached.tolist()),
        repr(kpi.throughput_bps), repr(kpi.plr), repr(kpi.mean_delay_net_ms),
        repr(kpi.mean_jitter_net_ms), repr(kpi.handovers), repr(kpi.disconnected_count),
    ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()
