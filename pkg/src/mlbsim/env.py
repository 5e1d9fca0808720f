"""Environment facade: state vector assembly, CIO action decoding, the
three-part reward, and the training loop around the simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cdql import CdqlAgent
from .metrics import KpiWindow
from .simulation import SimConfig, Simulation

DEFAULT_CIO_VALUES = (-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0)


@dataclass(frozen=True)
class RewardConfig:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    c: float = -2.0
    o_per_s: float = 75.0
    pdb_ms: float = 150.0
    a: float = 20.0
    d_target: float = 0.6
    gamma_rb: float = 0.6
    literal_cqi_band: bool = False

    def __post_init__(self):
        if self.pdb_ms <= 0:
            raise ValueError("pdb_ms must be > 0")
        for name in ("w1", "w2", "w3", "c", "o_per_s", "a"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def target_delay_s(self) -> float:
        """Delay sweet spot: two thirds of the packet delay budget, in seconds."""
        return (2.0 / 3.0) * self.pdb_ms / 1000.0


@dataclass(frozen=True)
class RewardBreakdown:
    r_delay: float
    r_rbu: float
    r_cqi: float
    total: float


def _sigmoid(z: float) -> float:
    z = min(max(z, -500.0), 500.0)
    return 1.0 / (1.0 + math.exp(-z))


def reward_delay(per_ue, cfg: RewardConfig) -> float:
    """Mean of per-UE delay scores: a disconnected UE scores -1, a connected
    one scores 1 + c * sigmoid(o * (d_avg - F))."""
    if not per_ue:
        raise ValueError("per_ue must list every UE")
    total = 0.0
    for connected, d_avg_s in per_ue:
        if not connected:
            total += -1.0
        else:
            total += 1.0 + cfg.c * _sigmoid(cfg.o_per_s * (d_avg_s - cfg.target_delay_s))
    return total / len(per_ue)


def reward_rbu(p, cfg: RewardConfig) -> float:
    arr = np.asarray(p, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("p must hold one utilization per cell")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("utilization entries must lie in [0, 1]")
    return 1.0 + cfg.c * _sigmoid(cfg.a * (float(arr.max()) - cfg.d_target))


def cqi_band_score(cqi: int, literal: bool = False) -> int:
    if 7 <= cqi <= 9:
        return 0
    if cqi >= 10:
        return 1
    if literal:
        # verbatim case split: only CQI < 6 is penalized, leaving 6 to the
        # catch-all positive branch
        return -1 if cqi < 6 else 1
    return -1


def reward_cqi(cqis, cfg: RewardConfig) -> float:
    if len(cqis) == 0:
        raise ValueError("cqis must list every UE")
    return sum(cqi_band_score(int(q), cfg.literal_cqi_band) for q in cqis) / len(cqis)


def reward_total(r_delay: float, r_rbu: float, r_cqi: float,
                 cfg: RewardConfig) -> RewardBreakdown:
    total = cfg.w1 * r_delay + cfg.w2 * r_rbu + cfg.w3 * r_cqi
    return RewardBreakdown(r_delay, r_rbu, r_cqi, total)


def build_state(kpi: KpiWindow) -> np.ndarray:
    """[attachment ratios | mean RB utilizations], one pair per cell."""
    return np.concatenate([kpi.attached_ratio, kpi.rbu]).astype(np.float64)


def rewards_from_kpi(kpi: KpiWindow, cfg: RewardConfig) -> RewardBreakdown:
    per_ue = [(bool(kpi.connected[i]), kpi.mean_delay_ms[i] / 1000.0)
              for i in range(kpi.n_ues)]
    r_d = reward_delay(per_ue, cfg)
    r_rb = reward_rbu(kpi.rbu, cfg)
    r_c = reward_cqi(kpi.cqi, cfg)
    return reward_total(r_d, r_rb, r_c, cfg)


class ActionSpace:
    """Maps action indices to per-cell CIO vectors.

    permutations mode enumerates ordered k-arrangements of the offset set in
    lexicographic order (no repeated value across cells); product mode uses
    mixed-radix digits, repeats allowed.
    """

    def __init__(self, cio_values=DEFAULT_CIO_VALUES, k: int = 3,
                 mode: str = "permutations"):
        if mode not in ("permutations", "product"):
            raise ValueError("mode must be 'permutations' or 'product'")
        if len(set(cio_values)) != len(cio_values):
            raise ValueError("cio_values must be distinct")
        if k < 1:
            raise ValueError("k must be >= 1")
        if mode == "permutations" and k > len(cio_values):
            raise ValueError("k cannot exceed the number of offsets in permutations mode")
        self.cio_values = tuple(float(v) for v in cio_values)
        self.k = k
        self.mode = mode
        l = len(self.cio_values)
        if mode == "permutations":
            self.size = math.factorial(l) // math.factorial(l - k)
        else:
            self.size = l ** k

    def decode(self, index: int):
        if not 0 <= index < self.size:
            raise ValueError(f"action index {index} outside [0, {self.size})")
        l = len(self.cio_values)
        if self.mode == "product":
            digits = []
            rem = index
            for pos in range(self.k):
                power = l ** (self.k - 1 - pos)
                digits.append(rem // power)
                rem %= power
            return tuple(self.cio_values[d] for d in digits)
        remaining = list(self.cio_values)
        rem = index
        out = []
        for pos in range(self.k):
            stride = math.factorial(l - 1 - pos) // math.factorial(l - self.k)
            d = rem // stride
            rem %= stride
            out.append(remaining.pop(d))
        return tuple(out)

    def encode(self, cio) -> int:
        cio = tuple(float(v) for v in cio)
        if len(cio) != self.k:
            raise ValueError(f"expected {self.k} offsets")
        l = len(self.cio_values)
        if self.mode == "product":
            index = 0
            for v in cio:
                index = index * l + self.cio_values.index(v)
            return index
        remaining = list(self.cio_values)
        index = 0
        for pos, v in enumerate(cio):
            stride = math.factorial(l - 1 - pos) // math.factorial(l - self.k)
            index += remaining.index(v) * stride
            remaining.remove(v)
        return index


class BalancerEnv:
    """Gym-flavored wrapper: 1 s steps, CIO vector actions, KPI-driven reward."""

    def __init__(self, sim_cfg: SimConfig, reward_cfg: RewardConfig | None = None,
                 action_space: ActionSpace | None = None, run_seed: int = 0):
        self.sim_cfg = sim_cfg
        self.reward_cfg = reward_cfg if reward_cfg is not None else RewardConfig()
        self.action_space = action_space if action_space is not None else \
            ActionSpace(k=sim_cfg.n_bs)
        if self.action_space.k != sim_cfg.n_bs:
            raise ValueError("action space width must equal the cell count")
        self.run_seed = run_seed
        self.sim: Simulation | None = None
        self.state_dim = 2 * sim_cfg.n_bs

    def reset(self, episode: int = 0) -> np.ndarray:
        self.sim = Simulation(self.sim_cfg, self.run_seed, episode=episode)
        attached = np.zeros(self.sim_cfg.n_bs)
        for ue in self.sim.ues:
            attached[ue.serving_cell] += 1
        u = attached / self.sim_cfg.n_ues
        return np.concatenate([u, np.zeros(self.sim_cfg.n_bs)])

    def reward_from_kpi(self, kpi: KpiWindow) -> RewardBreakdown:
        return rewards_from_kpi(kpi, self.reward_cfg)

    def step(self, action_index: int):
        if self.sim is None:
            raise RuntimeError("call reset() before step()")
        cio = self.action_space.decode(action_index)
        self.sim.set_cio(cio)
        kpi = self.sim.run_agent_step()
        breakdown = self.reward_from_kpi(kpi)
        return build_state(kpi), breakdown, kpi


def run_training(env: BalancerEnv, agent: CdqlAgent, episodes: int = 150,
                 steps: int = 50, on_step=None) -> list:
    """Outer training loop: fresh simulator per episode, one agent update and
    one epsilon decay per environment step. Returns per-episode records."""
    log = []
    for ep in range(episodes):
        state = env.reset(ep)
        cum = 0.0
        comp = np.zeros(3)
        for t in range(steps):
            action = agent.select_action(state)
            next_state, rb, kpi = env.step(action)
            agent.observe(state, action, rb.total, next_state)
            agent.update()
            agent.decay_epsilon()
            state = next_state
            cum += rb.total
            comp += (rb.r_delay, rb.r_rbu, rb.r_cqi)
            if on_step is not None:
                on_step(ep, t, kpi, rb, agent.epsilon)
        log.append({
            "episode": ep,
            "cumulative_reward": cum,
            "epsilon": agent.epsilon,
            "mean_r_delay": comp[0] / steps,
            "mean_r_rbu": comp[1] / steps,
            "mean_r_cqi": comp[2] / steps,
        })
    return log
