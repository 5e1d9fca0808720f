"""Topology, UE placement, mobility, and the 1 ms TTI loop composing radio,
traffic, scheduling and handover into 1 s agent steps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import metrics
from .handover import HandoverConfig, TttTracker, a3_scan, execute_handover, rebuha_step
from .radio import (CqiTable, RadioConfig, bits_per_rb_table, default_cqi_table,
                    noise_dbm_per_rb, rsrp_dbm)
from .scheduler import rbg_partition, schedule_tti, deliver
from .traffic import (FlowSpec, UeQueue, cbr_flow, enqueue, flush_pending,
                      generate, poisson_flow)

_PLACEMENT_TAG = 11
_TRAFFIC_TAG = 13
_MOBILITY_TAG = 17


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray  # (M, 2) meters

    def __post_init__(self):
        pos = np.asarray(self.bs_positions, dtype=np.float64)
        object.__setattr__(self, "bs_positions", pos)
        if len(pos) < 2:
            raise ValueError("need at least 2 base stations")
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if np.allclose(pos[i], pos[j]):
                    raise ValueError("base stations must not coincide")

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def mid_cell(self) -> int:
        return (self.n_bs - 1) // 2

    @staticmethod
    def collinear(n_bs: int = 3, isd_m: float = 720.0) -> "Topology":
        xs = (np.arange(n_bs) - (n_bs - 1) / 2.0) * isd_m
        return Topology(np.column_stack([xs, np.zeros(n_bs)]))


@dataclass
class SimConfig:
    n_ues: int = 30
    n_bs: int = 3
    isd_m: float = 720.0
    edge_fraction: float = 0.4
    edge_disc_radius_m: float = 100.0
    edge_disc_center_m: float = 280.0
    mobility_fraction: float = 0.0
    speed_mps: float = 20.0
    cbr_ues: int = 20
    cbr_payload_bytes: int = 250
    cbr_interval_ms: float = 10.0
    poisson_payload_bytes: int = 32
    poisson_rate_bps: float = 100_000.0
    queue_capacity: int = 300
    step_ms: int = 1000
    radio: RadioConfig = field(default_factory=RadioConfig)
    cqi_table: CqiTable = field(default_factory=default_cqi_table)
    handover: HandoverConfig = field(default_factory=HandoverConfig)

    def __post_init__(self):
        if self.n_ues < 1:
            raise ValueError("n_ues must be >= 1")
        if self.n_bs < 2:
            raise ValueError("n_bs must be >= 2")
        if not 0.0 <= self.edge_fraction <= 1.0:
            raise ValueError("edge_fraction must lie in [0, 1]")
        if not 0.0 <= self.mobility_fraction <= 1.0:
            raise ValueError("mobility_fraction must lie in [0, 1]")
        if self.speed_mps < 0:
            raise ValueError("speed_mps must be >= 0")
        if self.cbr_ues < 0:
            raise ValueError("cbr_ues must be >= 0")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.step_ms < 1:
            raise ValueError("step_ms must be >= 1")
        if len(self.handover.cio_db) != self.n_bs:
            self.handover.cio_db = np.zeros(self.n_bs)


@dataclass
class UeState:
    id: int
    position: np.ndarray
    serving_cell: Optional[int]
    mobile: bool = False
    speed_mps: float = 0.0
    flow: Optional[FlowSpec] = None
    queue: Optional[UeQueue] = None
    last_cqi: int = 0
    connected: bool = True
    heading_rad: Optional[float] = None
    heading_age_ms: float = math.inf


@dataclass
class BsState:
    id: int
    attached_ues: set
    tti_utilization_log: np.ndarray


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def place_ues(n: int, edge_fraction: float, edge_disc_radius_m: float, rng,
              topology: Optional[Topology] = None,
              edge_disc_center_m: float = 280.0) -> list:
    """Scatter UEs: a fraction into small discs near each cell edge, the rest
    uniformly across the middle cell's coverage disc. Everyone starts attached
    to the middle BS.
    """
    if not 0.0 <= edge_fraction <= 1.0:
        raise ValueError("edge_fraction must lie in [0, 1]")
    topo = topology if topology is not None else Topology.collinear()
    mid = topo.mid_cell
    mid_pos = topo.bs_positions[mid]
    coverage_radius = 360.0
    if topo.n_bs >= 2:
        gaps = [np.linalg.norm(topo.bs_positions[j] - mid_pos)
                for j in range(topo.n_bs) if j != mid]
        coverage_radius = min(gaps) / 2.0
    dirs = []
    for j in range(topo.n_bs):
        if j == mid:
            continue
        v = topo.bs_positions[j] - mid_pos
        dirs.append(v / np.linalg.norm(v))
    n_edge = _round_half_up(n * edge_fraction)
    ues = []
    for i in range(n):
        if i < n_edge:
            center = mid_pos + edge_disc_center_m * dirs[i % len(dirs)]
            radius = edge_disc_radius_m
        else:
            center = mid_pos
            radius = coverage_radius
        r = radius * math.sqrt(rng.random())
        theta = rng.random() * 2.0 * math.pi
        pos = center + np.array([r * math.cos(theta), r * math.sin(theta)])
        ues.append(UeState(id=i, position=pos, serving_cell=mid))
    return ues


def random_walk_step(ue: UeState, dt_ms: float, rng, bounds) -> np.ndarray:
    """Advance a mobile UE along its heading, redrawing the heading once per
    second and reflecting at the bounding box."""
    if not ue.mobile:
        raise ValueError("random_walk_step requires a mobile UE")
    if ue.heading_rad is None or ue.heading_age_ms >= 1000.0:
        ue.heading_rad = rng.uniform(0.0, 2.0 * math.pi)
        ue.heading_age_ms = 0.0
    dist = ue.speed_mps * dt_ms / 1000.0
    x = ue.position[0] + dist * math.cos(ue.heading_rad)
    y = ue.position[1] + dist * math.sin(ue.heading_rad)
    xmin, xmax, ymin, ymax = bounds
    ue.position[0] = _reflect(x, xmin, xmax)
    ue.position[1] = _reflect(y, ymin, ymax)
    ue.heading_age_ms += dt_ms
    return ue.position.copy()


def _reflect(v: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    t = (v - lo) % (2.0 * span)
    if t > span:
        t = 2.0 * span - t
    return lo + t


def connectivity_check(sim: "Simulation") -> set:
    """UEs whose serving SINR sits below the radio-link-failure floor."""
    return {int(i) for i in np.flatnonzero(sim.sinr < sim.cfg.radio.rlf_sinr_db)}


@lru_cache(maxsize=8)
def _rate_lut(table: CqiTable, rb_bandwidth_hz: float) -> tuple:
    return tuple(int(b) for b in bits_per_rb_table(table, rb_bandwidth_hz))


class Simulation:
    """One deterministic network instance driven in 1 s agent steps.

    Placement draws from a per-run stream so every episode of a run sees the
    same layout; traffic and mobility draw from per-(run, episode) streams.
    """

    def __init__(self, cfg: SimConfig, run_seed: int, episode: int = 0,
                 enable_a3: bool = True):
        self.cfg = cfg
        self.run_seed = run_seed
        self.episode = episode
        self.enable_a3 = enable_a3
        self.topology = Topology.collinear(cfg.n_bs, cfg.isd_m)
        self.n_bs = cfg.n_bs
        self.n_ues = cfg.n_ues

        rng_place = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([run_seed, _PLACEMENT_TAG])))
        self.rng_traffic = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([run_seed, _TRAFFIC_TAG, episode])))
        self.rng_mobility = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([run_seed, _MOBILITY_TAG, episode])))

        self.ues = place_ues(cfg.n_ues, cfg.edge_fraction, cfg.edge_disc_radius_m,
                             rng_place, self.topology, cfg.edge_disc_center_m)
        n_mobile = _round_half_up(cfg.n_ues * cfg.mobility_fraction)
        for ue in self.ues:
            ue.queue = UeQueue(cfg.queue_capacity)
            ue.mobile = ue.id < n_mobile
            ue.speed_mps = cfg.speed_mps if ue.mobile else 0.0
            if ue.id < cfg.cbr_ues:
                ue.flow = cbr_flow(cfg.cbr_payload_bytes, cfg.cbr_interval_ms,
                                   phase_ms=float(ue.id % max(1, int(cfg.cbr_interval_ms))))
            elif cfg.poisson_rate_bps > 0:
                ue.flow = poisson_flow(cfg.poisson_payload_bytes, cfg.poisson_rate_bps)
            else:
                ue.flow = None

        self.pos = np.array([ue.position for ue in self.ues], dtype=np.float64)
        for i, ue in enumerate(self.ues):
            ue.position = self.pos[i]  # views into the shared array
        self.serving = np.array([ue.serving_cell for ue in self.ues], dtype=np.int64)
        self.serving_list = self.serving.tolist()
        self.connected = np.ones(cfg.n_ues, dtype=bool)
        self.connected_list = [True] * cfg.n_ues
        self.queues = [ue.queue for ue in self.ues]

        self.bs = [BsState(j, set(), np.zeros(cfg.step_ms)) for j in range(cfg.n_bs)]
        for ue in self.ues:
            self.bs[ue.serving_cell].attached_ues.add(ue.id)

        self.ho_cfg = cfg.handover.copy()
        self.tracker = TttTracker(cfg.n_ues, cfg.handover.ttt_ms)
        self.partition = rbg_partition(cfg.radio.n_rb)
        self.noise_lin_mw = 10.0 ** (noise_dbm_per_rb(cfg.radio) / 10.0)
        self.thresholds = np.asarray(cfg.cqi_table.sinr_thresholds_db, dtype=np.float64)
        self.bits_lut = np.asarray(_rate_lut(cfg.cqi_table, cfg.radio.rb_bandwidth_hz),
                                   dtype=np.int64)

        xs = self.topology.bs_positions[:, 0]
        half = cfg.isd_m / 2.0
        self.bounds = (float(xs.min() - half), float(xs.max() + half), -half, half)

        self.now_ms = 0
        self.step_count = 0
        self.window_handovers = 0
        self.backlogged: set = set()

        self.refresh_geometry()
        self.refresh_link()

    # --- channel state -----------------------------------------------------

    def set_cio(self, cio_db) -> None:
        cio = np.asarray(cio_db, dtype=np.float64)
        if cio.shape != (self.n_bs,):
            raise ValueError(f"cio vector must have length {self.n_bs}")
        self.ho_cfg.cio_db = cio.copy()
        self.ho_cfg.validate()

    def refresh_geometry(self) -> None:
        diff = self.pos[:, None, :] - self.topology.bs_positions[None, :, :]
        d = np.maximum(np.sqrt((diff * diff).sum(axis=2)), 1.0)
        pl = (self.cfg.radio.pathloss_intercept_db
              + self.cfg.radio.pathloss_slope_db_per_decade * np.log10(d / 1000.0))
        self.rsrp = rsrp_dbm(self.cfg.radio, pl)
        self.lin = 10.0 ** (self.rsrp / 10.0)
        self.lin_total = self.lin.sum(axis=1)

    def refresh_link(self) -> None:
        rows = np.arange(self.n_ues)
        s_lin = self.lin[rows, self.serving]
        denom = self.lin_total - s_lin + self.noise_lin_mw
        self.sinr = 10.0 * np.log10(s_lin / denom)
        self.cqi = np.searchsorted(self.thresholds, self.sinr, side="right")
        self.cqi_list = self.cqi.tolist()
        for ue in self.ues:
            ue.last_cqi = self.cqi_list[ue.id]

    # --- baselines ----------------------------------------------------------

    def apply_rebuha(self, prev_rbu, gamma_rb: float) -> list:
        attachments = [self.bs[j].attached_ues for j in range(self.n_bs)]
        moves = rebuha_step(prev_rbu, gamma_rb, attachments, self.rsrp)
        for ue, tgt in moves:
            execute_handover(self, ue, tgt)
        return moves

    # --- main loop ----------------------------------------------------------

    def run_agent_step(self, duration_ms: Optional[int] = None) -> metrics.KpiWindow:
        dur = int(duration_ms if duration_ms is not None else self.cfg.step_ms)
        t0 = self.now_ms
        queues = self.queues
        snap_gen = [q.generated_count for q in queues]
        snap_drop = [q.dropped_count for q in queues]
        snap_lost = [q.lost_disconnect_count for q in queues]
        for b in self.bs:
            b.tti_utilization_log = np.zeros(dur)
        util_logs = [b.tti_utilization_log for b in self.bs]
        # window_handovers is NOT reset here: forced handovers applied between
        # steps (the ReBUHA epoch) belong to the window that follows them

        movers = [ue for ue in self.ues if ue.mobile and ue.speed_mps > 0]
        if movers:
            for ue in movers:
                random_walk_step(ue, dur, self.rng_mobility, self.bounds)
            self.refresh_geometry()
            self.refresh_link()

        arrivals = [[] for _ in range(dur)]
        for ue in self.ues:
            if ue.flow is None:
                continue
            q = ue.queue
            pkts = generate(ue.flow, (t0, t0 + dur), self.rng_traffic, ue.id,
                            q.next_packet_id)
            if pkts:
                q.next_packet_id = pkts[-1].id + 1
                for p in pkts:
                    arrivals[int(p.created_at_ms) - t0].append(p)

        backlogged = self.backlogged
        serving = self.serving_list
        connected = self.connected_list
        n_rb = self.cfg.radio.n_rb
        table = self.cfg.cqi_table
        scan = self.enable_a3

        for off in range(dur):
            now = t0 + off
            batch = arrivals[off]
            if batch:
                for p in batch:
                    if enqueue(queues[p.ue_id], p):
                        backlogged.add(p.ue_id)
            if scan:
                fires = a3_scan(self.serving, self.rsrp, self.ho_cfg,
                                self.tracker, 1.0)
                for ue_id, tgt in fires:
                    execute_handover(self, ue_id, tgt)
            if backlogged:
                cqi_list = self.cqi_list
                per_bs = [[] for _ in range(self.n_bs)]
                for ue_id in backlogged:
                    if not connected[ue_id]:
                        continue
                    cqi = cqi_list[ue_id]
                    if cqi == 0:
                        continue
                    q = queues[ue_id]
                    per_bs[serving[ue_id]].append(
                        (ue_id, now - q.pending[0].created_at_ms, cqi,
                         q.pending_bytes * 8))
                for j in range(self.n_bs):
                    items = per_bs[j]
                    if not items:
                        continue
                    alloc = schedule_tti(self.partition, items, table, now)
                    if alloc.rbs_used:
                        util_logs[j][off] = alloc.rbs_used / n_rb
                        deliver(alloc, queues, now)
                        for ue_id in alloc.bits_granted:
                            if not queues[ue_id].pending:
                                backlogged.discard(ue_id)

        # step boundary: RLF check, loss accounting, KPI aggregation
        t_end = t0 + dur
        self.connected = self.sinr >= self.cfg.radio.rlf_sinr_db
        self.connected_list = self.connected.tolist()
        for i in range(self.n_ues):
            self.ues[i].connected = self.connected_list[i]
            if not self.connected_list[i] and queues[i].pending:
                flush_pending(queues[i])
                backlogged.discard(i)
        kpi = self._collect_kpi(dur, t0, t_end, snap_gen, snap_drop, snap_lost)
        for q in queues:
            q.delivered.clear()
        self.window_handovers = 0
        self.now_ms = t_end
        self.step_count += 1
        return kpi

    def _collect_kpi(self, dur, t0, t_end, snap_gen, snap_drop, snap_lost):
        n = self.n_ues
        queues = self.queues
        delivered_bytes = np.zeros(n, dtype=np.int64)
        delivered_count = np.zeros(n, dtype=np.int64)
        generated = np.zeros(n, dtype=np.int64)
        dropped = np.zeros(n, dtype=np.int64)
        lost = np.zeros(n, dtype=np.int64)
        pending = np.zeros(n, dtype=np.int64)
        delay = np.zeros(n, dtype=np.float64)
        jitter = np.zeros(n, dtype=np.float64)
        for i, q in enumerate(queues):
            delivered_count[i] = len(q.delivered)
            delivered_bytes[i] = sum(p.size_bytes for p in q.delivered)
            generated[i] = q.generated_count - snap_gen[i]
            dropped[i] = q.dropped_count - snap_drop[i]
            lost[i] = q.lost_disconnect_count - snap_lost[i]
            pending[i] = len(q.pending)
            delay[i] = metrics.ue_delay_ms(q.delivered, q, t_end)
            jitter[i] = metrics.jitter_ms(q.delivered)
        cqi_rep = np.where(self.connected, self.cqi, 0).astype(np.int64)
        attached = np.zeros(self.n_bs, dtype=np.int64)
        for i in range(n):
            if self.connected_list[i]:
                attached[self.serving_list[i]] += 1
        rbu_vec = np.array([b.tti_utilization_log.mean() for b in self.bs])
        window_s = dur / 1000.0
        has_delay = (delivered_count > 0) | (pending > 0)
        has_jitter = delivered_count >= 2
        kpi = metrics.KpiWindow(
            step=self.step_count,
            t_start_ms=t0,
            t_end_ms=t_end,
            n_ues=n,
            n_tti=dur,
            delivered_bytes=delivered_bytes,
            delivered_count=delivered_count,
            generated=generated,
            dropped=dropped,
            lost_disconnect=lost,
            pending=pending,
            mean_delay_ms=delay,
            jitter_ms=jitter,
            cqi=cqi_rep,
            connected=self.connected.copy(),
            rbu=rbu_vec,
            attached=attached,
            attached_ratio=metrics.attachment_ratios(attached, n),
            throughput_bps=metrics.throughput_bps(int(delivered_bytes.sum()), window_s),
            # loss ratio over the whole run so far: flushed backlog can make a
            # single window's losses exceed that window's arrivals
            plr=metrics.plr(sum(q.generated_count for q in queues),
                            sum(q.dropped_count for q in queues),
                            sum(q.lost_disconnect_count for q in queues)),
            mean_delay_net_ms=float(delay[has_delay].mean()) if has_delay.any() else 0.0,
            mean_jitter_net_ms=float(jitter[has_jitter].mean()) if has_jitter.any() else 0.0,
            handovers=self.window_handovers,
            disconnected_count=int(n - self.connected.sum()),
        )
        return kpi
