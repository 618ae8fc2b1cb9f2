# Closed-loop MPC trajectories from random starts, then the symmetric sample set.
import numpy as np

from pwlcis import Rng, collect, condense, load_config, simulate, symmetrize

cfg = load_config("example1")
template = condense(cfg.mpc)

# One trajectory from a start near the corner of the box.
traj = simulate(template, np.array([0.4, 0.3]), conv_tol=1e-3, max_steps=200)
print("single start:", traj.status.value, "with", len(traj.states), "states")
print("last state:", traj.states[-1])

# A small batch; infeasible starts are dropped, converged trajectories pooled.
s = collect(cfg.mpc, 40, Rng(cfg.seed).child(0), cfg.conv_tol, cfg.max_steps)
print("outcomes:", {k: v for k, v in s.stats.items()})
sym = symmetrize(s)
print("raw samples:", len(s), " after adding the mirror images:", len(sym))
