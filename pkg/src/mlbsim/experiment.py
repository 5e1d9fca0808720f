"""Scenario sweeps: run the learned balancer and the two baselines across UE
counts and seeds, write CSV results plus a manifest per scenario, and build
cross-algorithm comparison tables."""
from __future__ import annotations

import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cdql import AgentConfig, CdqlAgent
from .env import BalancerEnv, RewardConfig, rewards_from_kpi, run_training
from .handover import HandoverConfig
from .metrics import mean_ci90
from .radio import RadioConfig
from .simulation import SimConfig, Simulation

ALGORITHMS = ("cdql", "a3", "rebuha")

# summary metric name in the CSVs -> attribute on KpiWindow
SUMMARY_METRICS = (
    ("throughput_bps", "throughput_bps"),
    ("mean_delay_ms", "mean_delay_net_ms"),
    ("mean_jitter_ms", "mean_jitter_net_ms"),
    ("plr", "plr"),
)

REWARD_COLUMNS = ["algorithm", "seed", "episode", "cumulative_reward",
                  "epsilon", "mean_r_delay", "mean_r_rbu", "mean_r_cqi"]


@dataclass
class ExperimentPlan:
    """What to run: which policies, which loads, how many seeded repeats."""

    algorithms: tuple = ALGORITHMS
    ue_counts: tuple = (30, 35, 40, 45, 50)
    mobility_fraction: float = 0.0
    speed_mps: float = 20.0
    seeds: tuple = tuple(range(1, 16))
    episodes: int = 150
    steps_per_episode: int = 50
    out_dir: str = "results"

    def __post_init__(self):
        if isinstance(self.algorithms, str):
            self.algorithms = (self.algorithms,)
        self.algorithms = tuple(self.algorithms)
        self.ue_counts = tuple(int(u) for u in self.ue_counts)
        self.seeds = tuple(int(s) for s in self.seeds)
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if not self.algorithms:
            raise ValueError("algorithms must be non-empty")
        if not self.ue_counts:
            raise ValueError("ue_counts must be non-empty")
        if any(u < 1 for u in self.ue_counts):
            raise ValueError("ue_counts entries must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not 0.0 <= self.mobility_fraction <= 1.0:
            raise ValueError("mobility_fraction must lie in [0, 1]")
        if self.speed_mps < 0:
            raise ValueError("speed_mps must be >= 0")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")

    @property
    def replications(self) -> int:
        return len(self.seeds)


def _build(cls, kwargs: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    for key in kwargs:
        if key not in names:
            raise ValueError(f"unknown config key '{section}.{key}'")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid value in section '{section}': {exc}") from exc


def parse_config(path=None, overrides: dict | None = None):
    """Read a JSON config with optional sections sim / agent / reward / plan
    (sim may nest radio and handover) and apply CLI-style overrides to the
    plan. Unknown keys are rejected by name; omitted keys take the defaults.

    Returns (SimConfig, AgentConfig, RewardConfig, ExperimentPlan).
    """
    raw = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: top level must be an object")
    for key in raw:
        if key not in ("sim", "agent", "reward", "plan"):
            raise ValueError(f"unknown config section {key!r}")

    sim_kw = dict(raw.get("sim", {}))
    radio_kw = sim_kw.pop("radio", {})
    ho_kw = sim_kw.pop("handover", {})
    sim_kw["radio"] = _build(RadioConfig, radio_kw, "sim.radio")
    sim_kw["handover"] = _build(HandoverConfig, ho_kw, "sim.handover")
    sim_cfg = _build(SimConfig, sim_kw, "sim")

    agent_kw = dict(raw.get("agent", {}))
    if "hidden" in agent_kw:
        agent_kw["hidden"] = tuple(agent_kw["hidden"])
    agent_cfg = _build(AgentConfig, agent_kw, "agent")
    reward_cfg = _build(RewardConfig, dict(raw.get("reward", {})), "reward")

    plan_kw = dict(raw.get("plan", {}))
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                plan_kw[key] = value
    plan = _build(ExperimentPlan, plan_kw, "plan")
    return sim_cfg, agent_cfg, reward_cfg, plan


def run_baseline(algo: str, sim_cfg: SimConfig,
                 reward_cfg: RewardConfig | None, run_seed: int, steps: int,
                 episode: int = 0) -> list:
    """One measurement episode under a fixed policy.

    a3 runs the standard event with zero offsets; rebuha disables the event
    scan and instead forces one move per 1 s epoch from the previous window's
    utilisation. Returns [(KpiWindow, RewardBreakdown)] per step.
    """
    reward_cfg = reward_cfg if reward_cfg is not None else RewardConfig()
    if algo == "a3":
        sim = Simulation(sim_cfg, run_seed, episode=episode, enable_a3=True)
    elif algo == "rebuha":
        sim = Simulation(sim_cfg, run_seed, episode=episode, enable_a3=False)
    else:
        raise ValueError(f"unknown baseline {algo!r}")
    out = []
    prev_rbu = None
    for _ in range(steps):
        if algo == "rebuha" and prev_rbu is not None:
            sim.apply_rebuha(prev_rbu, reward_cfg.gamma_rb)
        kpi = sim.run_agent_step()
        prev_rbu = kpi.rbu
        out.append((kpi, rewards_from_kpi(kpi, reward_cfg)))
    return out


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return [v.item() for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _kpi_header(n_bs: int) -> list:
    head = ["algorithm", "seed", "episode", "step", "throughput_bps",
            "mean_delay_ms", "mean_jitter_ms", "plr", "handovers",
            "disconnected"]
    head += [f"rbu_{i}" for i in range(n_bs)]
    head += [f"attached_{i}" for i in range(n_bs)]
    head += ["r_delay", "r_rbu", "r_cqi", "r_total", "epsilon"]
    return head


def _kpi_row(algo, seed, episode, step, kpi, rb, epsilon):
    row = [algo, seed, episode, step, float(kpi.throughput_bps),
           float(kpi.mean_delay_net_ms), float(kpi.mean_jitter_net_ms),
           float(kpi.plr), int(kpi.handovers), int(kpi.disconnected_count)]
    row += [float(v) for v in kpi.rbu]
    row += [int(v) for v in kpi.attached]
    row += [float(rb.r_delay), float(rb.r_rbu), float(rb.r_cqi), float(rb.total)]
    row.append("" if epsilon is None else float(epsilon))
    return row


def _scenario_name(algo: str, n_ues: int, mobility_fraction: float) -> str:
    return f"{algo}_ues{n_ues}_mob{int(round(mobility_fraction * 100))}"


def _run_scenario(algo, plan, sim_cfg, agent_cfg, reward_cfg, scen_dir, log):
    n_bs = sim_cfg.n_bs
    eval_ep = plan.episodes - 1
    per_seed = {name: [] for name, _ in SUMMARY_METRICS}

    kpi_path = scen_dir / "kpis.csv"
    rewards_path = scen_dir / "rewards.csv"
    with open(kpi_path, "w", newline="") as kf:
        kw = csv.writer(kf)
        kw.writerow(_kpi_header(n_bs))
        rf = open(rewards_path, "w", newline="") if algo == "cdql" else None
        try:
            rw = None
            if rf is not None:
                rw = csv.writer(rf)
                rw.writerow(REWARD_COLUMNS)
            for seed in plan.seeds:
                if algo == "cdql":
                    env = BalancerEnv(sim_cfg, reward_cfg, run_seed=seed)
                    agent = CdqlAgent(env.state_dim, env.action_space.size,
                                      agent_cfg, seed=seed)
                    eval_kpis = []

                    def on_step(ep, t, kpi, rb, eps, _seed=seed, _sink=eval_kpis):
                        kw.writerow(_kpi_row(algo, _seed, ep, t, kpi, rb, eps))
                        if ep == eval_ep:
                            _sink.append(kpi)

                    episode_log = run_training(env, agent, plan.episodes,
                                               plan.steps_per_episode,
                                               on_step=on_step)
                    for rec in episode_log:
                        rw.writerow([algo, seed, rec["episode"],
                                     float(rec["cumulative_reward"]),
                                     float(rec["epsilon"]),
                                     float(rec["mean_r_delay"]),
                                     float(rec["mean_r_rbu"]),
                                     float(rec["mean_r_cqi"])])
                else:
                    # A fixed policy learns nothing, so one measurement episode
                    # suffices; it reuses the traffic and mobility streams of
                    # the learner's final episode to keep comparisons paired.
                    records = run_baseline(algo, sim_cfg, reward_cfg, seed,
                                           plan.steps_per_episode, episode=eval_ep)
                    for t, (kpi, rb) in enumerate(records):
                        kw.writerow(_kpi_row(algo, seed, eval_ep, t, kpi, rb, None))
                    eval_kpis = [kpi for kpi, _ in records]
                for name, attr in SUMMARY_METRICS:
                    per_seed[name].append(
                        float(np.mean([getattr(k, attr) for k in eval_kpis])))
                log(f"    seed {seed}: done")
        finally:
            if rf is not None:
                rf.close()

    summary = {
        "algorithm": algo,
        "ue_count": sim_cfg.n_ues,
        "mobility_fraction": float(plan.mobility_fraction),
        "n_seeds": len(plan.seeds),
    }
    for name, _ in SUMMARY_METRICS:
        mean, half = mean_ci90(per_seed[name])
        summary[f"{name}_mean"] = mean
        summary[f"{name}_ci90"] = half
    with open(scen_dir / "summary.csv", "w", newline="") as sf:
        sw = csv.writer(sf)
        sw.writerow(list(summary.keys()))
        sw.writerow(list(summary.values()))

    manifest = {
        "scenario": scen_dir.name,
        "algorithm": algo,
        "ue_count": sim_cfg.n_ues,
        "mobility_fraction": float(plan.mobility_fraction),
        "speed_mps": float(plan.speed_mps),
        "seeds": list(plan.seeds),
        "episodes": plan.episodes,
        "steps_per_episode": plan.steps_per_episode,
        "evaluation_episode": eval_ep,
        "sim": _jsonable(sim_cfg),
        "agent": _jsonable(agent_cfg) if algo == "cdql" else None,
        "reward": _jsonable(reward_cfg),
    }
    (scen_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return summary


def run_experiment(plan: ExperimentPlan, sim_cfg: SimConfig | None = None,
                   agent_cfg: AgentConfig | None = None,
                   reward_cfg: RewardConfig | None = None,
                   quiet: bool = False) -> list:
    """Run every (algorithm, ue_count) scenario in the plan with seed
    replication. Each scenario directory receives kpis.csv, summary.csv,
    manifest.json and, for the learner, rewards.csv. Returns the scenario
    directories in run order.
    """
    sim_cfg = sim_cfg if sim_cfg is not None else SimConfig()
    agent_cfg = agent_cfg if agent_cfg is not None else AgentConfig()
    reward_cfg = reward_cfg if reward_cfg is not None else RewardConfig()
    log = (lambda *_: None) if quiet else \
        (lambda msg: print(msg, flush=True))

    root = Path(plan.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    dirs = []
    for algo in plan.algorithms:
        for n_ues in plan.ue_counts:
            scen = _scenario_name(algo, n_ues, plan.mobility_fraction)
            scen_dir = root / scen
            scen_dir.mkdir(exist_ok=True)
            log(f"scenario {scen} ({plan.replications} seeds)")
            scen_cfg = dataclasses.replace(
                sim_cfg, n_ues=n_ues,
                mobility_fraction=plan.mobility_fraction,
                speed_mps=plan.speed_mps)
            _run_scenario(algo, plan, scen_cfg, agent_cfg, reward_cfg,
                          scen_dir, log)
            dirs.append(scen_dir)
    return dirs


def _read_summaries(root: Path) -> list:
    rows = []
    for path in sorted(root.glob("*/summary.csv")):
        with open(path, newline="") as f:
            for rec in csv.DictReader(f):
                rec["ue_count"] = int(rec["ue_count"])
                rec["mobility_fraction"] = float(rec["mobility_fraction"])
                rec["n_seeds"] = int(rec["n_seeds"])
                for name, _ in SUMMARY_METRICS:
                    rec[f"{name}_mean"] = float(rec[f"{name}_mean"])
                    rec[f"{name}_ci90"] = float(rec[f"{name}_ci90"])
                rows.append(rec)
    return rows


# for delay, jitter and loss a reduction is an improvement, so the gain sign
# is flipped relative to throughput
_GAIN_SPECS = (
    ("throughput_gain_pct", "throughput_bps_mean", +1),
    ("delay_gain_pct", "mean_delay_ms_mean", -1),
    ("jitter_gain_pct", "mean_jitter_ms_mean", -1),
    ("plr_gain_pct", "plr_mean", -1),
)


def summarize(out_dir, write_csv: bool = True, stream=None) -> list:
    """Merge scenario summaries under out_dir into one comparison table with
    the learner's relative gain (in percent) against each baseline, write it
    to comparison.csv, print it, and flag gaps (missing runs, single-seed
    intervals). Returns the table rows as dicts.
    """
    stream = stream if stream is not None else sys.stdout
    root = Path(out_dir)
    rows = _read_summaries(root)
    if not rows:
        raise FileNotFoundError(f"no scenario summaries under {root}")

    warnings = []
    by_key = {}
    for rec in rows:
        by_key.setdefault((rec["ue_count"], rec["mobility_fraction"]), {})[
            rec["algorithm"]] = rec
    algos_seen = sorted({rec["algorithm"] for rec in rows})
    for (ues, mob), group in sorted(by_key.items()):
        missing = [a for a in algos_seen if a not in group]
        if missing:
            warnings.append(
                f"{ues} UEs / mobility {mob:g}: missing {', '.join(missing)}")
        cdql = group.get("cdql")
        for algo, rec in group.items():
            if rec["n_seeds"] == 1:
                warnings.append(
                    f"{algo} @ {ues} UEs: single seed, confidence intervals "
                    "are zero-width")
            for col, src, sign in _GAIN_SPECS:
                rec[col] = ""
                if algo != "cdql" and cdql is not None and rec[src] != 0.0:
                    diff = cdql[src] - rec[src]
                    rec[col] = sign * diff / rec[src] * 100.0

    columns = (["algorithm", "ue_count", "mobility_fraction", "n_seeds"]
               + [f"{name}_{suffix}" for name, _ in SUMMARY_METRICS
                  for suffix in ("mean", "ci90")]
               + [col for col, _, _ in _GAIN_SPECS])
    table = sorted(rows, key=lambda r: (r["ue_count"], r["mobility_fraction"],
                                        r["algorithm"]))
    if write_csv:
        with open(root / "comparison.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(columns)
            for rec in table:
                w.writerow([rec[c] for c in columns])

    header = (f"{'algorithm':<8} {'ues':>4} {'thr [Mbps]':>16} "
              f"{'delay [ms]':>16} {'jitter [ms]':>14} {'plr':>16}")
    print(header, file=stream)
    print("-" * len(header), file=stream)
    for rec in table:
        thr = f"{rec['throughput_bps_mean'] / 1e6:.3f} ± {rec['throughput_bps_ci90'] / 1e6:.3f}"
        dly = f"{rec['mean_delay_ms_mean']:.2f} ± {rec['mean_delay_ms_ci90']:.2f}"
        jit = f"{rec['mean_jitter_ms_mean']:.2f} ± {rec['mean_jitter_ms_ci90']:.2f}"
        plr = f"{rec['plr_mean']:.4f} ± {rec['plr_ci90']:.4f}"
        print(f"{rec['algorithm']:<8} {rec['ue_count']:>4} {thr:>16} "
              f"{dly:>16} {jit:>14} {plr:>16}", file=stream)
    for rec in table:
        if rec["algorithm"] == "cdql":
            continue
        # a gain is undefined when the learner is absent or the baseline
        # metric is exactly zero (nothing to divide by)
        gains = {col: (f"{rec[col]:+.1f}%" if rec[col] != "" else "n/a")
                 for col, _, _ in _GAIN_SPECS}
        if all(v == "n/a" for v in gains.values()):
            continue
        print(f"cdql vs {rec['algorithm']} @ {rec['ue_count']} UEs: "
              f"throughput {gains['throughput_gain_pct']}, "
              f"delay {gains['delay_gain_pct']}, "
              f"jitter {gains['jitter_gain_pct']}, "
              f"plr {gains['plr_gain_pct']}", file=stream)
    for msg in warnings:
        print(f"warning: {msg}", file=stream)
    return table
