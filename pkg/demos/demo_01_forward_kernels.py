"""Forward kernels of the three models, checked against a brute-force ODE
integration of the forward equation.

Each model factorizes over coordinates, so the package builds full-space
kernels from one-coordinate closed forms:

* the cyclic walk kernel is a matrix exponential computed by
  uniformization,
* the masking kernel is the absorbing closed form driven by the survival
  factor alpha(t),
* the counting-walk kernel is a binomial-survivors-plus-Poisson-arrivals
  convolution, evaluated in log space.
"""

import numpy as np

from ddmkit import (
    BetaSchedule,
    DiscreteDistribution,
    Model,
    alpha,
    kernel_brw_matrix,
    kernel_product,
    kernel_rw_1d,
    kolmogorov_oracle,
)

print("=== cyclic random walk on {0,1,2} ===")
model = Model.rw(3, 1, 2.0)
for t in (0.25, 1.0):
    closed = kernel_rw_1d(3, t).matrix
    oracle = kolmogorov_oracle(model, t, dt=1e-4)
    print(f"t={t}: return probability {closed[0, 0]:.6f} "
          f"(spectral value {1 / 3 + 2 / 3 * np.exp(-1.5 * t):.6f}), "
          f"max |closed - oracle| = {np.abs(closed - oracle).max():.2e}")

print("\n=== masking process, two letters, one coordinate ===")
beta = BetaSchedule.constant(1.0)
masked = Model.masked(2, 1, 2.0, beta)
t = np.log(2.0)
k = kernel_product(masked, 0.0, t).dense()
print(f"at t = ln 2 the survival factor is alpha = {alpha(beta, t):.3f}:")
print(np.array_str(k, precision=3))
print("letters keep their value or fall into MASK (last column); MASK is absorbing")

print("\n=== biased counting walk, truncated at 12 ===")
brw = Model.brw(1, 12, 2.0)
kb = kernel_brw_matrix(1.0, 12)
oracle = kolmogorov_oracle(brw, 1.0, dt=1e-4)
print(f"max |closed - oracle| = {np.abs(kb.matrix - oracle).max():.2e}")
print(f"worst row leak through the cap: {kb.row_leak.max():.2e} (row {kb.row_leak.argmax()})")

print("\n=== forward marginal flow ===")
mu0 = DiscreteDistribution.point_mass(brw.space, (5,))
for t in (0.0, 0.5, 2.0):
    mu_t = kernel_product(brw, 0.0, t).apply(mu0) if t else mu0
    mean = float(mu_t.probs @ np.arange(13))
    print(f"t={t:>3}: mean count {mean:.4f} "
          f"(closed form {5 * np.exp(-t) + 1 - np.exp(-t):.4f})")
