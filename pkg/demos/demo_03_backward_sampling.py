"""Generative backward sampling with frozen per-interval rates and a
residual clock, cross-checked against the exact law of the same scheme.

Two clock semantics are available:

* algorithm_literal -- a fresh Exp(1) draw every grid interval while the
  accumulated hazard Gamma persists across no-jump intervals;
* single_clock     -- one Exp(1) per holding period.

They agree as rates vanish but differ measurably on coarse grids, and the
literal form keeps a bias that does not vanish with the step size. The
exact (state, residual)-lattice propagation makes the discrepancy visible
without Monte-Carlo noise.
"""

import numpy as np

from ddmkit import (
    ALGORITHM_LITERAL,
    SINGLE_CLOCK,
    DiscreteDistribution,
    Model,
    ScoreOracle,
    divergence,
    grid_adaptive,
    grid_uniform,
    propagate_exact,
    sample_backward,
    sample_terminal_ensemble,
)

model = Model.rw(3, 1, 6.0)
mu = DiscreteDistribution.random_full_support(model.space, seed=11)
oracle = ScoreOracle(model, mu)

print("=== time grids ===")
g_uni = grid_uniform(6.0, 12)
g_ada = grid_adaptive(6.0, 0.0, 0.5, 0.25)
print(f"uniform: {len(g_uni.times) - 1} intervals, h = {g_uni.steps[0]:.3f}")
print(f"adaptive: k0={g_ada.k0} constant, k1={g_ada.k1} geometric, "
      f"k2={g_ada.k2} tail steps; step range [{g_ada.steps.min():.4f}, {g_ada.steps.max():.4f}]")

print("\n=== one trajectory (deterministic in its seed) ===")
run = sample_backward(model, oracle, grid_uniform(6.0, 60), seed=5)
print(f"jumps at: {['%.3f -> %s' % (t, s) for t, s in run.trace[:6]]}")
print(f"terminal state: {run.terminal}")

print("\n=== ensemble vs exact propagation ===")
grid = grid_uniform(6.0, 120)
n = 50_000
for mode in (ALGORITHM_LITERAL, SINGLE_CLOCK):
    exact = propagate_exact(model, oracle, grid, clock_mode=mode)
    states = sample_terminal_ensemble(model, oracle, grid, seed=1, n_runs=n, clock_mode=mode)
    emp = np.bincount(states, minlength=3) / n
    tv = 0.5 * np.abs(emp - exact.terminal.probs).sum()
    kl = divergence(mu, exact.terminal)
    print(f"{mode:>18}: TV(empirical, exact) = {tv:.4f}, KL(data, terminal) = {kl:.2e}")

print("\n=== the clock discrepancy on a coarse grid ===")
coarse = grid_uniform(6.0, 6)
lit = propagate_exact(model, oracle, coarse, clock_mode=ALGORITHM_LITERAL)
single = propagate_exact(model, oracle, coarse, clock_mode=SINGLE_CLOCK)
gap = 0.5 * np.abs(lit.terminal.probs - single.terminal.probs).sum()
print(f"TV between the two terminal laws at 6 intervals: {gap:.4f}")
print("(the literal clock suppresses late jumps: surviving intervals inflates"
      " the accumulated hazard against fresh exponentials)")
