"""Downlink cellular load-balancing testbed: a deterministic multi-cell
simulator plus a from-scratch clipped double Q-learning agent that steers
handovers through per-cell offsets."""

from .cdql import AgentConfig, CdqlAgent, ReplayBuffer, cdql_target, select_action
from .env import (ActionSpace, BalancerEnv, RewardBreakdown, RewardConfig,
                  build_state, rewards_from_kpi, run_training)
from .experiment import (ExperimentPlan, parse_config, run_baseline,
                         run_experiment, summarize)
from .handover import HandoverConfig, TttTracker, a3_condition, a3_scan, rebuha_step
from .metrics import KpiWindow, kpi_hash, mean_ci90
from .radio import CqiTable, RadioConfig, bits_per_rb, cqi_from_sinr, default_cqi_table, pathloss_db, rsrp_dbm, sinr_db
from .scheduler import RbgPartition, TtiAllocation, deliver, rbg_partition, schedule_tti
from .simulation import SimConfig, Simulation, Topology, place_ues
from .traffic import FlowKind, FlowSpec, Packet, UeQueue, cbr_flow, generate, poisson_flow

__version__ = "0.1.0"

__all__ = [
    "ActionSpace", "AgentConfig", "BalancerEnv", "CdqlAgent", "CqiTable",
    "ExperimentPlan", "FlowKind", "FlowSpec", "HandoverConfig", "KpiWindow",
    "Packet", "RadioConfig", "RbgPartition", "ReplayBuffer", "RewardBreakdown",
    "RewardConfig", "SimConfig", "Simulation", "Topology", "TtiAllocation",
    "TttTracker", "UeQueue", "a3_condition", "a3_scan", "bits_per_rb",
    "build_state", "cbr_flow", "cdql_target", "cqi_from_sinr",
    "default_cqi_table", "deliver", "generate", "kpi_hash", "mean_ci90",
    "parse_config", "pathloss_db", "place_ues", "poisson_flow", "rbg_partition",
    "rebuha_step", "rewards_from_kpi", "rsrp_dbm", "run_baseline",
    "run_experiment", "run_training", "schedule_tti", "select_action",
    "sinr_db", "summarize",
]
