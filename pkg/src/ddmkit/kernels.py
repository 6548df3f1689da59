"""Exact forward transition kernels and forward marginals.

Each model factorizes over coordinates, so full-space kernels are applied
as products of one-coordinate kernels:

* rw: matrix exponential of the cyclic one-coordinate generator, computed
  by uniformization (a Poisson-weighted power series of the jump matrix) --
  unconditionally stable and free of any eigensolver;
* masked: the closed-form absorbing kernel driven by
  ``alpha(t) = exp(-integral of beta)``;
* brw: the closed-form birth/death kernel (survivors of the initial count,
  thinned at rate 1, plus Poisson arrivals), evaluated in log space.

A brute-force cross-check integrates the forward equation
``dP/dt = P Q_t`` with a classical fixed-step fourth-order scheme; it
exists purely as an oracle for the closed forms.

Truncated brw rows are sub-stochastic; the lost boundary mass ("leak") is
always recorded, and renormalization is opt-in and logged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .generators import BetaSchedule, Model, rate_matrix
from .spaces import BRW, MASKED, RW, Space, all_coords, encode, mask_count
from .util import logsumexp

logger = logging.getLogger(__name__)

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Dense probability vector over an enumerated space.

    ``leak`` records probability mass lost to brw truncation upstream of
    this distribution (zero for exact constructions).
    """

    space: Space
    probs: np.ndarray
    leak: float = 0.0

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.shape != (self.space.size,):
            raise ValueError(f"need {self.space.size} probabilities, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("negative probability entry")
        if abs(arr.sum() - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @classmethod
    def uniform(cls, space: Space) -> "DiscreteDistribution":
        if space.kind == MASKED:
            core = ~(all_coords(space) == space.mask_value).any(axis=1)
            probs = np.where(core, 1.0 / core.sum(), 0.0)
            return cls(space, probs)
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def point_mass(cls, space: Space, x) -> "DiscreteDistribution":
        probs = np.zeros(space.size)
        probs[encode(space, x)] = 1.0
        return cls(space, probs)

    @classmethod
    def random_full_support(cls, space: Space, seed: int, concentration: float = 3.0):
        """Seeded Dirichlet draw with full support (masked: full support on
        the unmasked core, zero on mask-extended states)."""
        rng = np.random.default_rng(seed)
        if space.kind == MASKED:
            core = ~(all_coords(space) == space.mask_value).any(axis=1)
            probs = np.zeros(space.size)
            probs[core] = rng.dirichlet(np.full(int(core.sum()), concentration))
            return cls(space, probs)
        return cls(space, rng.dirichlet(np.full(space.size, concentration)))


@dataclass(frozen=True)
class Kernel1D:
    """One-coordinate transition matrix over ``[0, radix)`` for an elapsed
    span; ``row_leak`` is per-row mass lost to truncation (brw only)."""

    matrix: np.ndarray
    s: float
    t: float
    row_leak: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        leak = self.row_leak
        if leak is None:
            leak = np.zeros(m.shape[0])
        leak = np.array(leak, dtype=float)
        deficit = np.abs(1.0 - m.sum(axis=1) - leak)
        if deficit.max() > _PROB_TOL:
            raise ValueError(f"rows sum to 1 - leak with residual {deficit.max():.3e}")
        if m.min() < -_PROB_TOL:
            raise ValueError("negative kernel entry")
        m.setflags(write=False)
        leak.setflags(write=False)
        object.__setattr__(self, "matrix", np.clip(m, 0.0, None))
        object.__setattr__(self, "row_leak", leak)


def alpha(beta: BetaSchedule, t: float) -> float:
    """Survival factor ``exp(-integral_0^t beta)``; 1 at t=0, non-increasing."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return math.exp(-beta.integral(t))


def kernel_rw_1d(m: int, t: float, tol: float = 1e-14) -> Kernel1D:
    """Cyclic one-coordinate kernel ``exp(t (P - I))`` by uniformization.

    P is the single-jump matrix (1/2 to each cyclic neighbour; for m=2 the
    two directions coincide and accumulate). The Poisson-weighted power
    series is truncated once the remaining tail weight drops below ``tol``.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    p = np.zeros((m, m))
    for j in range(m):
        p[j, (j + 1) % m] += 0.5
        p[j, (j - 1) % m] += 0.5
    out = np.eye(m) * math.exp(-t)
    term = np.eye(m)
    weight = math.exp(-t)
    cumulative = weight
    n = 0
    while 1.0 - cumulative > tol:
        n += 1
        term = term @ p
        weight *= t / n
        out += weight * term
        cumulative += weight
        if n > 1000 + 10 * int(t):
            break
    # analytic symmetry of the cyclic kernel; remove summation roundoff and
    # close the truncated Poisson tail with one scalar (row sums are equal
    # by symmetry, so this keeps the matrix doubly stochastic)
    out = 0.5 * (out + out.T)
    out /= out.sum(axis=1).mean()
    return Kernel1D(out, 0.0, t)


def kernel_masked_1d(beta: BetaSchedule, s: float, t: float, m: int) -> Kernel1D:
    """Absorbing one-coordinate kernel over {0..m} for the span [s, t].

    Alphabet states survive with probability ``alpha_t / alpha_s`` and
    otherwise jump to MASK; MASK is absorbing.
    """
    if s > t:
        raise ValueError("need s <= t")
    surv = math.exp(-beta.integral_between(s, t))
    k = np.zeros((m + 1, m + 1))
    for j in range(m):
        k[j, j] = surv
        k[j, m] = 1.0 - surv
    k[m, m] = 1.0
    return Kernel1D(k, s, t)


def kernel_brw_1d(t: float, k: int, n: int) -> float:
    """One-coordinate birth/death transition probability from ``k`` to ``n``
    after time ``t``, evaluated stably in log space.

    Equals the convolution of Binomial(k, e^-t) survivors with
    Poisson(1 - e^-t) arrivals.
    """
    if t < 0 or k < 0 or n < 0:
        raise ValueError("need t >= 0 and k, n >= 0")
    if t == 0.0:
        return 1.0 if k == n else 0.0
    q = math.exp(-t)
    log1mq = math.log1p(-q)
    base = q - 1.0  # log of exp(e^-t - 1)
    terms = []
    for j in range(min(k, n) + 1):
        terms.append(
            base
            + math.lgamma(k + 1)
            - math.lgamma(j + 1)
            - math.lgamma(k - j + 1)
            - t * j
            + (k + n - 2 * j) * log1mq
            - math.lgamma(n - j + 1)
        )
    return math.exp(logsumexp(terms))


def kernel_brw_matrix(t: float, cap: int) -> Kernel1D:
    """(cap+1, cap+1) matrix of :func:`kernel_brw_1d`; per-row leak is the
    exact transition mass beyond the cap."""
    size = cap + 1
    mat = np.zeros((size, size))
    for k in range(size):
        for n in range(size):
            mat[k, n] = kernel_brw_1d(t, k, n)
    leak = 1.0 - mat.sum(axis=1)
    return Kernel1D(mat, 0.0, t, row_leak=np.clip(leak, 0.0, None))


@dataclass(frozen=True)
class FactoredKernel:
    """Coordinate-factorized transition operator over the full space."""

    model: Model
    s: float
    t: float
    one_dim: Kernel1D

    def apply_vector(self, probs: np.ndarray) -> np.ndarray:
        """Raw pushforward of a mass vector.

        For brw the result is sub-stochastic: the truncation deficit stays
        visible to the caller. This is the non-renormalizing route.
        """
        space = self.model.space
        r = space.radix
        v = np.asarray(probs, dtype=float).reshape((r,) * space.d)
        k = self.one_dim.matrix
        for _ in range(space.d):
            # contract the leading axis and append the result axis: after d
            # applications the original axis order is restored.
            v = np.tensordot(v, k, axes=([0], [0]))
        return v.reshape(-1)

    def apply(self, dist: DiscreteDistribution) -> DiscreteDistribution:
        """Push a distribution through the kernel, opting in to
        renormalization of the brw truncation deficit.

        The removed mass accumulates in ``leak`` and every renormalization
        is logged; rw and masked kernels are stochastic so nothing is lost.
        Use :meth:`apply_vector` to keep sub-stochastic output instead.
        """
        if dist.space != self.model.space:
            raise ValueError("distribution space does not match the kernel")
        space = self.model.space
        v = self.apply_vector(dist.probs)
        if space.kind != BRW:
            return DiscreteDistribution(space, v, leak=dist.leak)
        total = float(v.sum())
        step_leak = max(0.0, 1.0 - total)
        if step_leak > 0:
            logger.debug(
                "renormalizing truncated kernel output over [%g, %g]: leak=%.3e",
                self.s,
                self.t,
                step_leak,
            )
        return DiscreteDistribution(space, v / total, leak=dist.leak + step_leak)

    def dense(self) -> np.ndarray:
        """Full (size, size) matrix (Kronecker product of the coordinate
        kernel, matching the mixed-radix encode order)."""
        out = np.array([[1.0]])
        for _ in range(self.model.space.d):
            out = np.kron(out, self.one_dim.matrix)
        return out


def kernel_product(model: Model, s: float, t: float) -> FactoredKernel:
    """Transition operator of the model from time ``s`` to ``t``."""
    if s > t:
        raise ValueError("need s <= t")
    space = model.space
    if space.kind == RW:
        k1 = kernel_rw_1d(space.m, t - s)
    elif space.kind == MASKED:
        k1 = kernel_masked_1d(model.beta, s, t, space.m)
    else:
        k1 = kernel_brw_matrix(t - s, space.cap)
    return FactoredKernel(model, s, t, k1)


def kolmogorov_oracle(model: Model, t: float, dt: float) -> np.ndarray:
    """Brute-force full-space kernel by fixed-step RK4 on ``dP/dt = P Q_t``.

    Exists as an independent cross-check of the closed forms; ``dt`` small
    enough for stability is the caller's contract.
    """
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    size = model.space.size
    p = np.eye(size)
    if model.space.kind != MASKED:
        q = rate_matrix(model, 0.0)

        def q_at(_s):
            return q

    else:
        q0 = rate_matrix(model, 0.0)
        b0 = model.beta.rate(0.0)
        base = q0 / b0 if b0 > 0 else None

        def q_at(s):
            # masked rates scale uniformly by beta(s)
            if base is not None:
                return base * model.beta.rate(s)
            return rate_matrix(model, s)

    steps = max(1, int(round(t / dt)))
    hstep = t / steps
    s = 0.0
    for _ in range(steps):
        k1 = p @ q_at(s)
        k2 = (p + 0.5 * hstep * k1) @ q_at(s + 0.5 * hstep)
        k3 = (p + 0.5 * hstep * k2) @ q_at(s + 0.5 * hstep)
        k4 = (p + hstep * k3) @ q_at(s + hstep)
        p = p + (hstep / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s += hstep
    return p


def forward_marginal(model: Model, mu_star: DiscreteDistribution, t: float) -> DiscreteDistribution:
    """Law of the forward process at time ``t`` started from ``mu_star``.

    brw marginals are renormalized over the truncated enumeration with the
    removed mass recorded in ``leak``.
    """
    model._check_time(t)
    if t == 0.0:
        return mu_star
    return kernel_product(model, 0.0, t).apply(mu_star)


def masked_fraction(model: Model, mu_star: DiscreteDistribution, t: float) -> float:
    """Expected number of masked coordinates at time ``t`` (masked models)."""
    dist = forward_marginal(model, mu_star, t)
    return float(dist.probs @ mask_count(model.space))
