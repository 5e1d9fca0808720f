"""One-off rehearsal of the two long acceptance checks (learning-curve trend,
congested-scenario KPI comparison) with the exact procedure the test suite
uses. Prints the raw margins so the thresholds can be sanity-checked before
the suite is frozen."""
import time

import numpy as np

from mlbsim.cdql import AgentConfig, CdqlAgent
from mlbsim.env import BalancerEnv, run_training
from mlbsim.experiment import run_baseline
from mlbsim.simulation import SimConfig

SEEDS = (1, 2, 3)
EPISODES = 40
STEPS = 50


def train(seed: int, n_ues: int):
    env = BalancerEnv(SimConfig(n_ues=n_ues), run_seed=seed)
    agent = CdqlAgent(env.state_dim, env.action_space.size, AgentConfig(),
                      seed=seed)
    log = run_training(env, agent, episodes=EPISODES, steps=STEPS)
    return env, agent, log


def main():
    t0 = time.time()
    print("== learning-curve trend (30 UEs) ==", flush=True)
    for seed in SEEDS:
        _, _, log = train(seed, 30)
        first = np.mean([e["cumulative_reward"] for e in log[:10]])
        last = np.mean([e["cumulative_reward"] for e in log[-10:]])
        print(f"seed {seed}: first10={first:.3f} last10={last:.3f} "
              f"margin={last - first:.3f} [{time.time() - t0:.0f}s]",
              flush=True)

    print("== congested comparison (45 UEs) ==", flush=True)
    thr_c, dly_c, thr_a, dly_a = [], [], [], []
    for seed in SEEDS:
        env, agent, _ = train(seed, 45)
        s = env.reset(EPISODES)
        thr, dly = [], []
        for _ in range(STEPS):
            s, _, kpi = env.step(agent.greedy_action(s))
            thr.append(kpi.throughput_bps)
            dly.append(kpi.mean_delay_net_ms)
        base = run_baseline("a3", SimConfig(n_ues=45), None, seed, STEPS,
                            episode=EPISODES)
        thr_c.append(np.mean(thr))
        dly_c.append(np.mean(dly))
        thr_a.append(np.mean([k.throughput_bps for k, _ in base]))
        dly_a.append(np.mean([k.mean_delay_net_ms for k, _ in base]))
        print(f"seed {seed}: cdql thr={thr_c[-1] / 1e6:.3f} Mbps "
              f"delay={dly_c[-1]:.1f} ms | a3 thr={thr_a[-1] / 1e6:.3f} "
              f"delay={dly_a[-1]:.1f} [{time.time() - t0:.0f}s]", flush=True)
    print(f"means: cdql thr={np.mean(thr_c) / 1e6:.3f} vs a3 "
          f"{np.mean(thr_a) / 1e6:.3f}; cdql delay={np.mean(dly_c):.1f} vs "
          f"a3 {np.mean(dly_a):.1f}", flush=True)
    print(f"total {time.time() - t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
