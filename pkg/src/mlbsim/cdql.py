"""Clipped double Q-learning: twin networks, shared clipped target, replay,
epsilon-greedy exploration, Adam on a Huber TD loss, Polyak target tracking."""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .nn import Adam, Mlp, huber, huber_grad

CHECKPOINT_FORMAT = "mlbsim-ckpt-1"


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.95
    epsilon: float = 1.0
    epsilon_min: float = 0.001
    epsilon_decay: float = 0.995
    tau: float = 0.005
    lr: float = 1e-3
    batch_size: int = 32
    huber_delta: float = 1.0
    hidden: tuple = (64, 64)
    buffer_capacity: int = 10_000
    literal_epsilon: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay < 1.0:
            raise ValueError("epsilon_decay must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")


class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s') transitions, oldest overwritten."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim), dtype=np.float64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.next_states = np.zeros((capacity, state_dim), dtype=np.float64)
        self.size = 0
        self.cursor = 0

    def __len__(self):
        return self.size

    def push(self, s, a, r, s_next):
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])

    def chronological(self):
        """Stored transitions oldest-first (for inspection and tests)."""
        if self.size < self.capacity:
            order = np.arange(self.size)
        else:
            order = (np.arange(self.capacity) + self.cursor) % self.capacity
        return (self.states[order], self.actions[order], self.rewards[order],
                self.next_states[order])


def forward(net: Mlp, state) -> np.ndarray:
    return net.forward(state)


def polyak(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """Blend online parameters into the target copy in place."""
    if target.sizes != online.sizes:
        raise ValueError("network shapes differ")
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - tau
        tp += tau * op
    return target


def cdql_target(r, s_next, nets, gamma: float):
    """Shared bootstrap value: each net evaluates its own greedy action on the
    next state; the smaller of the two estimates backs the target."""
    t1, t2 = nets
    q1 = t1.forward(s_next)
    q2 = t2.forward(s_next)
    if q1.ndim == 1:
        v1 = q1[int(np.argmax(q1))]
        v2 = q2[int(np.argmax(q2))]
        return r + gamma * min(v1, v2)
    rows = np.arange(q1.shape[0])
    v1 = q1[rows, np.argmax(q1, axis=1)]
    v2 = q2[rows, np.argmax(q2, axis=1)]
    return np.asarray(r, dtype=np.float64) + gamma * np.minimum(v1, v2)


def select_action(net1: Mlp, state, epsilon: float, rng, literal: bool = False) -> int:
    """Epsilon-greedy over net1's values; greedy ties go to the lowest index.

    literal=True flips the comparison so the agent exploits when epsilon >= x,
    matching a published pseudo-code reading rather than standard semantics.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    x = rng.random()
    explore = (epsilon < x) if literal else (x < epsilon)
    if explore:
        return int(rng.integers(0, net1.sizes[-1]))
    return int(np.argmax(net1.forward(state)))


def decay_epsilon(epsilon: float, cfg: AgentConfig) -> float:
    if epsilon > cfg.epsilon_min:
        return max(epsilon * cfg.epsilon_decay, cfg.epsilon_min)
    return epsilon


def update(buffer: ReplayBuffer, nets, targets, cfg: AgentConfig, rng, optimizers):
    """One gradient step per network against the shared clipped target,
    followed by a Polyak refresh of both target copies.

    Returns the (loss1, loss2) pair, or None when the buffer is still short.
    """
    if len(buffer) < cfg.batch_size:
        return None
    s, a, r, s_next = buffer.sample(cfg.batch_size, rng)
    y = cdql_target(r, s_next, targets, cfg.gamma)
    rows = np.arange(len(a))
    losses = []
    for net, opt in zip(nets, optimizers):
        q, acts = net.forward_cache(s)
        taken = q[rows, a]
        td = y - taken
        losses.append(float(np.mean(huber(td, cfg.huber_delta))))
        grad_out = np.zeros_like(q)
        grad_out[rows, a] = -huber_grad(td, cfg.huber_delta) / len(a)
        grads = net.backward(acts, grad_out)
        flat = []
        for dw, db in grads:
            flat.append(dw)
            flat.append(db)
        opt.step(net.parameters(), flat)
    for tgt, net in zip(targets, nets):
        polyak(tgt, net, cfg.tau)
    return tuple(losses)


class CdqlAgent:
    """Bundles the twin networks, their targets, the buffer and exploration
    state behind the handful of calls a training loop needs."""

    def __init__(self, state_dim: int, n_actions: int, cfg: AgentConfig | None = None,
                 seed: int = 0):
        self.cfg = cfg if cfg is not None else AgentConfig()
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, 23])))
        sizes = [state_dim, *self.cfg.hidden, n_actions]
        self.q1 = Mlp(sizes, self.rng)
        self.q2 = Mlp(sizes, self.rng)
        self.t1 = self.q1.copy()
        self.t2 = self.q2.copy()
        self.opt1 = Adam(self.q1.parameters(), lr=self.cfg.lr)
        self.opt2 = Adam(self.q2.parameters(), lr=self.cfg.lr)
        self.buffer = ReplayBuffer(self.cfg.buffer_capacity, state_dim)
        self.epsilon = self.cfg.epsilon

    def select_action(self, state) -> int:
        return select_action(self.q1, state, self.epsilon, self.rng,
                             self.cfg.literal_epsilon)

    def greedy_action(self, state) -> int:
        return int(np.argmax(self.q1.forward(state)))

    def observe(self, s, a, r, s_next) -> None:
        self.buffer.push(s, a, r, s_next)

    def update(self):
        return update(self.buffer, (self.q1, self.q2), (self.t1, self.t2),
                      self.cfg, self.rng, (self.opt1, self.opt2))

    def decay_epsilon(self) -> None:
        self.epsilon = decay_epsilon(self.epsilon, self.cfg)

    # --- checkpointing ------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "format": CHECKPOINT_FORMAT,
            "config": asdict(self.cfg),
            "state_dim": self.state_dim,
            "n_actions": self.n_actions,
            "epsilon": self.epsilon,
            "buffer_size": self.buffer.size,
            "buffer_cursor": self.buffer.cursor,
            "adam_t": [self.opt1.t, self.opt2.t],
        }
        arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
        for tag, net in (("q1", self.q1), ("q2", self.q2),
                         ("t1", self.t1), ("t2", self.t2)):
            for i, w in enumerate(net.weights):
                arrays[f"{tag}_w{i}"] = w
            for i, b in enumerate(net.biases):
                arrays[f"{tag}_b{i}"] = b
        for tag, opt in (("opt1", self.opt1), ("opt2", self.opt2)):
            for i, m in enumerate(opt.m):
                arrays[f"{tag}_m{i}"] = m
            for i, v in enumerate(opt.v):
                arrays[f"{tag}_v{i}"] = v
        arrays["buf_s"] = self.buffer.states
        arrays["buf_a"] = self.buffer.actions
        arrays["buf_r"] = self.buffer.rewards
        arrays["buf_s2"] = self.buffer.next_states
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "CdqlAgent":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"unsupported checkpoint format: {meta.get('format')}")
            cfg_dict = dict(meta["config"])
            cfg_dict["hidden"] = tuple(cfg_dict["hidden"])
            cfg = AgentConfig(**cfg_dict)
            agent = cls(meta["state_dim"], meta["n_actions"], cfg)
            for tag, net in (("q1", agent.q1), ("q2", agent.q2),
                             ("t1", agent.t1), ("t2", agent.t2)):
                net.weights = [data[f"{tag}_w{i}"].copy() for i in range(net.n_layers)]
                net.biases = [data[f"{tag}_b{i}"].copy() for i in range(net.n_layers)]
            for tag, net, opt_t in (("opt1", agent.q1, meta["adam_t"][0]),
                                    ("opt2", agent.q2, meta["adam_t"][1])):
                opt = Adam(net.parameters(), lr=cfg.lr)
                opt.t = opt_t
                n = len(opt.m)
                opt.m = [data[f"{tag}_m{i}"].copy() for i in range(n)]
                opt.v = [data[f"{tag}_v{i}"].copy() for i in range(n)]
                if tag == "opt1":
                    agent.opt1 = opt
                else:
                    agent.opt2 = opt
            agent.buffer.states = data["buf_s"].copy()
            agent.buffer.actions = data["buf_a"].copy()
            agent.buffer.rewards = data["buf_r"].copy()
            agent.buffer.next_states = data["buf_s2"].copy()
            agent.buffer.size = meta["buffer_size"]
            agent.buffer.cursor = meta["buffer_cursor"]
            agent.epsilon = meta["epsilon"]
        return agent
