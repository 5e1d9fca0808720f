"""A3 handover with per-cell individual offsets, TTT tracking, and the
utilization-triggered ReBUHA baseline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class HandoverConfig:
    hysteresis_db: float = 2.0
    ttt_ms: float = 8.0
    cio_db: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cio_min_db: float = -9.0
    cio_max_db: float = 9.0

    def __post_init__(self):
        self.cio_db = np.asarray(self.cio_db, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.ttt_ms < 0:
            raise ValueError("ttt_ms must be >= 0")
        if self.hysteresis_db < 0:
            raise ValueError("hysteresis_db must be >= 0")
        if np.any(self.cio_db < self.cio_min_db) or np.any(self.cio_db > self.cio_max_db):
            raise ValueError(
                f"cio_db entries must lie in [{self.cio_min_db}, {self.cio_max_db}]")

    def copy(self) -> "HandoverConfig":
        return HandoverConfig(self.hysteresis_db, self.ttt_ms, self.cio_db.copy(),
                              self.cio_min_db, self.cio_max_db)


class TttTracker:
    """Per-UE time-to-trigger accumulator against the current best candidate.

    Only one candidate is tracked per UE (the scan always evaluates the best
    neighbor); switching candidates restarts the count, as does any sample
    where the entry condition fails.
    """

    def __init__(self, n_ues: int, ttt_ms: float = 8.0):
        self.ttt_ms = float(ttt_ms)
        self.cand = np.full(n_ues, -1, dtype=np.int64)
        self.acc = np.zeros(n_ues, dtype=np.float64)

    def reset(self, ue: int):
        self.cand[ue] = -1
        self.acc[ue] = 0.0

    def reset_all(self):
        self.cand.fill(-1)
        self.acc.fill(0.0)


def a3_condition(rsrp_serving_i: float, rsrp_neighbor_j: float,
                 cio_j_to_i: float, cio_i_to_j: float, hys: float) -> bool:
    """Entry condition: neighbor power plus its offset strictly beats the
    serving power plus its offset by the hysteresis margin."""
    return rsrp_neighbor_j + cio_j_to_i > hys + rsrp_serving_i + cio_i_to_j


def ttt_update(tracker: TttTracker, ue: int, candidate: int, holds: bool,
               dt_ms: float, ttt_ms: float | None = None) -> bool:
    if dt_ms <= 0:
        raise ValueError("dt_ms must be > 0")
    threshold = tracker.ttt_ms if ttt_ms is None else ttt_ms
    if not holds:
        tracker.cand[ue] = -1
        tracker.acc[ue] = 0.0
        return False
    if tracker.cand[ue] != candidate:
        tracker.cand[ue] = candidate
        tracker.acc[ue] = dt_ms
    else:
        tracker.acc[ue] += dt_ms
    return bool(tracker.acc[ue] >= threshold)


def a3_scan(serving: np.ndarray, rsrp_matrix: np.ndarray, cfg: HandoverConfig,
            tracker: TttTracker, dt_ms: float = 1.0) -> list:
    """One measurement tick: evaluate the entry condition for every UE against
    its best offset-adjusted neighbor, advance TTT counts, and return the
    (ue, target_cell) pairs whose timers matured this tick."""
    n, m = rsrp_matrix.shape
    rows = np.arange(n)
    adj = rsrp_matrix + cfg.cio_db[None, :]
    serving_val = adj[rows, serving]
    masked = adj.copy()
    masked[rows, serving] = -np.inf
    best = np.argmax(masked, axis=1)
    best_val = masked[rows, best]
    holds = best_val > cfg.hysteresis_db + serving_val

    switched = tracker.cand != best
    tracker.acc = np.where(holds, np.where(switched, dt_ms, tracker.acc + dt_ms), 0.0)
    tracker.cand = np.where(holds, best, -1)
    fired = holds & (tracker.acc >= cfg.ttt_ms)
    if not fired.any():
        return []
    return [(int(u), int(tracker.cand[u])) for u in np.flatnonzero(fired)]


def rebuha_step(rbu, gamma_rb: float, attachments, rsrp_matrix: np.ndarray) -> list:
    """One load-balancing epoch.

    When every cell is past the threshold there is nowhere to shed load, so
    nothing moves. Otherwise each overloaded cell hands one UE (the one
    hearing the target best) to the least-loaded cell still under threshold;
    load ties resolve to the lower cell index, UE ties to the lower ue id.
    """
    p = np.asarray(rbu, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("rbu entries must lie in [0, 1]")
    m = len(p)
    if all(p[i] > gamma_rb for i in range(m)):
        return []
    moves = []
    targets = [j for j in range(m) if p[j] < gamma_rb]
    for i in range(m):
        if p[i] <= gamma_rb:
            continue
        candidates = [j for j in targets if j != i]
        if not candidates or not attachments[i]:
            continue
        j = min(candidates, key=lambda c: (p[c], c))
        ue = min(attachments[i], key=lambda u: (-rsrp_matrix[u, j], u))
        moves.append((int(ue), int(j)))
    return moves


def execute_handover(sim, ue: int, target_cell: int):
    """Re-home one UE: swap attachment sets, reset its TTT state, and refresh
    its link quality from the new serving geometry. The transmit queue moves
    with the UE untouched."""
    if not 0 <= ue < sim.n_ues:
        raise ValueError(f"unknown ue id {ue}")
    if not 0 <= target_cell < sim.n_bs:
        raise ValueError(f"unknown cell id {target_cell}")
    old = int(sim.serving[ue])
    if old == target_cell:
        raise ValueError("target cell equals the serving cell")
    sim.serving[ue] = target_cell
    sim.serving_list[ue] = target_cell
    sim.ues[ue].serving_cell = target_cell
    sim.bs[old].attached_ues.discard(ue)
    sim.bs[target_cell].attached_ues.add(ue)
    sim.tracker.reset(ue)
    sim.window_handovers += 1
    sim.refresh_link()
