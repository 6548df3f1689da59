"""Exact discrete-score oracles, backward rates, and the entropic loss.

The backward (time-reversed) process of each model has generator
``u_t(x, y) * qtilde_t(x, y)``, where ``qtilde`` is derived from the
forward rates and the score ``u`` is a ratio of forward marginals:

* rw:     u_t(x, sigma(x)) = mu_{T-t}(sigma(x)) / mu_{T-t}(x)
* masked: u_t(x, um(x))    = mu_{T-t}(um(x)) / mu_{T-t}(x)   (unmask moves)
* brw:    u_t(x, sigma(x)) = ratio of the Poisson(1)-relative densities

Backward time ``t`` runs over [0, T]; the marginal involved is the forward
law at ``T - t``. Oracles cache marginals per requested backward time
(exact float equality -- grids are finite, no interpolation); caches can be
populated eagerly at construction, after which evaluation is read-only.

A "perturbed" oracle multiplies the exact score by ``exp(eps * xi)`` with a
deterministic hash-based noise field ``xi`` in [-1, 1), standing in for an
imperfect learned score while keeping experiments reproducible.
"""

from __future__ import annotations

import math
from typing import Dict, Optional

import numpy as np

from .generators import Model
from .kernels import DiscreteDistribution, forward_marginal, kernel_product
from .spaces import (
    BRW,
    MASKED,
    RW,
    Minus,
    Plus,
    Unmask,
    all_coords,
    apply_op,
    encode,
    neighbor_table,
    op_catalog,
)
from .util import hash_unit

EXACT = "exact"
PERTURBED = "perturbed"


class ScoreError(ValueError):
    """Raised when a score is undefined (zero marginal at the base state)."""


def _legal_backward(space, op) -> bool:
    if space.kind in (RW, BRW):
        return isinstance(op, (Plus, Minus))
    return isinstance(op, Unmask)


class ScoreOracle:
    """Evaluator of the backward score on allowed jumps.

    Parameters
    ----------
    model, mu_star:
        The forward model and the data law it starts from.
    times:
        Backward times whose marginals are cached eagerly. Additional times
        are admitted lazily; populate eagerly before sharing across threads.
    mode, eps, seed:
        ``"exact"`` or ``"perturbed"``; the latter multiplies every score by
        ``exp(eps * xi(seed, x, y, t))``.
    """

    def __init__(self, model: Model, mu_star: DiscreteDistribution, times=(),
                 mode: str = EXACT, eps: float = 0.0, seed: int = 0,
                 _marginals: Optional[Dict[float, DiscreteDistribution]] = None):
        if mu_star.space != model.space:
            raise ValueError("data law lives on a different space")
        if mode not in (EXACT, PERTURBED):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == PERTURBED and eps < 0:
            raise ValueError("perturbation size must be nonnegative")
        self.model = model
        self.mu_star = mu_star
        self.mode = mode
        self.eps = float(eps)
        self.seed = int(seed)
        self._marginals = {} if _marginals is None else _marginals
        self._tables: Dict[float, np.ndarray] = {}
        for t in times:
            self.marginal(float(t))

    # -- marginals ---------------------------------------------------------

    def marginal(self, t: float) -> DiscreteDistribution:
        """Forward marginal at forward time ``T - t`` (backward time ``t``)."""
        t = float(t)
        if not 0.0 <= t <= self.model.t_final + 1e-12:
            raise ValueError(f"backward time {t} outside [0, {self.model.t_final}]")
        got = self._marginals.get(t)
        if got is None:
            got = forward_marginal(self.model, self.mu_star, self.model.t_final - t)
            self._marginals[t] = got
        return got

    # -- scalar evaluation ---------------------------------------------------

    def score(self, t: float, x, op) -> float:
        """Score ``u_t(x, op(x))`` (perturbed when the oracle is perturbed)."""
        space = self.model.space
        if not _legal_backward(space, op):
            raise ValueError(f"{op!r} is not a backward jump for {space.kind}")
        y = apply_op(space, x, op)
        if y is None:
            raise ValueError(f"{op!r} is undefined at state {tuple(x)}")
        mu = self.marginal(t).probs
        ix, iy = encode(space, x), encode(space, y)
        if mu[ix] <= 0.0:
            raise ScoreError(
                f"score undefined: zero marginal at {tuple(x)} (backward time {t})"
            )
        value = mu[iy] / mu[ix]
        if space.kind == BRW:
            c = int(x[op.axis])
            value *= (c + 1.0) if isinstance(op, Plus) else 1.0 / c
        if self.mode == PERTURBED:
            value *= math.exp(self.eps * hash_unit(self.seed, ix, iy, float(t)))
        return value

    def diagonal_score(self, t: float, x) -> float:
        """Diagonal convention ``u_t(x, x)``: the rate-weighted mean of the
        off-diagonal scores. Never used by the samplers; kept for
        completeness."""
        space = self.model.space
        rates = backward_rates(self, t, x)
        if space.kind == RW:
            return sum(self.score(t, x, op) for op in op_catalog(space)) / (2 * space.d)
        if space.kind == BRW:
            coords = [int(c) for c in x]
            q_total = space.d + float(sum(coords))
            return sum(rates.values()) / q_total
        from .spaces import masked_sets

        masked, _ = masked_sets(space, x)
        qt_total = len(masked) * space.m * self.model.beta.rate(self.model.t_final - t)
        if qt_total == 0.0:
            return 0.0
        return sum(rates.values()) / qt_total

    # -- vectorized tables ---------------------------------------------------

    def score_table(self, t: float) -> np.ndarray:
        """(n_ops, size) array of scores; NaN where a jump is disallowed.

        Row order follows ``op_catalog``. Perturbed oracles cache the table
        per time like the marginals.
        """
        t = float(t)
        got = self._tables.get(t)
        if got is not None:
            return got
        space = self.model.space
        mu = self.marginal(t).probs
        targets = neighbor_table(space)
        coords = all_coords(space)
        table = np.full(targets.shape, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, op in enumerate(op_catalog(space)):
                if not _legal_backward(space, op):
                    continue
                ok = targets[i] >= 0
                ratio = mu[np.clip(targets[i], 0, None)] / mu
                if space.kind == BRW:
                    if isinstance(op, Plus):
                        ratio = ratio * (coords[:, op.axis] + 1.0)
                    else:
                        ratio = ratio / np.where(coords[:, op.axis] > 0, coords[:, op.axis], 1)
                table[i] = np.where(ok, ratio, np.nan)
        if self.mode == PERTURBED:
            src = np.arange(space.size)
            for i, op in enumerate(op_catalog(space)):
                if not _legal_backward(space, op):
                    continue
                for s in src[targets[i] >= 0]:
                    table[i, s] *= math.exp(
                        self.eps * hash_unit(self.seed, int(s), int(targets[i, s]), t)
                    )
        table.setflags(write=False)
        self._tables[t] = table
        return table


def exact_score(oracle: ScoreOracle, t: float, x, op) -> float:
    """Score of the oracle at a jump (exact unless the oracle is perturbed)."""
    return oracle.score(t, x, op)


def score_via_conditional(oracle: ScoreOracle, t: float, x, op) -> float:
    """Score recomputed through its conditional-expectation form.

    Sums ``p_{0,s}(x0, op(x)) / p_{0,s}(x0, x)`` against the posterior of
    the starting state given the state ``x`` at forward time ``s = T - t``.
    Agrees with :func:`exact_score` up to floating-point roundoff; serves as
    an independent aggregation-path cross-check. Requires ``t < T``: at the
    data endpoint the representation degenerates (the span-0 kernel is the
    identity and the in-expectation ratio collapses to 0/1).
    """
    model = oracle.model
    space = model.space
    if not model.t_final - t > 0:
        raise ValueError("the conditional form needs a positive remaining span (t < horizon)")
    if not _legal_backward(space, op):
        raise ValueError(f"{op!r} is not a backward jump for {space.kind}")
    y = apply_op(space, x, op)
    if y is None:
        raise ValueError(f"{op!r} is undefined at state {tuple(x)}")
    s = model.t_final - t
    kern = kernel_product(model, 0.0, s).dense()
    ix, iy = encode(space, x), encode(space, y)
    w = oracle.mu_star.probs * kern[:, ix]
    total = w.sum()
    if total <= 0.0:
        raise ScoreError(f"zero marginal at {tuple(x)} (backward time {t})")
    support = w > 0
    ratios = kern[support, iy] / kern[support, ix]
    value = float((w[support] / total) @ ratios)
    if space.kind == BRW:
        # conditional form delivers u * q(x, y); divide the backward-jump
        # rate q(y, x) back out to expose u itself
        c = int(x[op.axis])
        q_fwd = 1.0 if isinstance(op, Plus) else float(c)
        q_bwd = float(c + 1) if isinstance(op, Plus) else 1.0
        value *= q_bwd / q_fwd
    return value


def perturbed_score(base: ScoreOracle, eps: float, seed: int) -> ScoreOracle:
    """Deterministically perturbed copy of an exact oracle.

    Shares the marginal cache with the base; ``eps = 0`` reproduces the
    base values exactly (``exp(0) == 1``).
    """
    if base.mode != EXACT:
        raise ValueError("perturb an exact oracle, not an already-perturbed one")
    return ScoreOracle(
        base.model,
        base.mu_star,
        mode=PERTURBED,
        eps=eps,
        seed=seed,
        _marginals=base._marginals,
    )


def _jump_weights(model: Model, t_backward: float) -> np.ndarray:
    """Loss/backward weights per (op, state): 1 for rw, beta(T - t) for
    masked unmask moves, forward q(x, op(x)) for brw."""
    space = model.space
    targets = neighbor_table(space)
    coords = all_coords(space)
    w = np.zeros(targets.shape)
    if space.kind == RW:
        w[:] = 1.0
    elif space.kind == MASKED:
        b = model.beta.rate(model.t_final - t_backward)
        for i, op in enumerate(op_catalog(space)):
            if isinstance(op, Unmask):
                w[i] = np.where(targets[i] >= 0, b, 0.0)
    else:
        for i, op in enumerate(op_catalog(space)):
            if isinstance(op, Plus):
                w[i] = np.where(targets[i] >= 0, 1.0, 0.0)
            else:
                w[i] = coords[:, op.axis]
    return w


def entropic_loss(u_true: ScoreOracle, u_approx: ScoreOracle, grid) -> float:
    """Discretized entropic training loss between two score oracles.

    ``sum_k h_{k+1} E[ sum_jumps u_approx * h(u_true / u_approx) * w ]``
    with the expectation under the forward marginal at each grid time and
    the model's jump weights. Zero iff the oracles agree on every
    positive-mass jump; ``inf`` if the approximation vanishes on one.
    """
    if u_true.model != u_approx.model or not np.array_equal(
        u_true.mu_star.probs, u_approx.mu_star.probs
    ):
        raise ValueError("oracles must share the model and data law")
    model = u_true.model
    total = 0.0
    times = grid.times
    for k in range(len(times) - 1):
        t_k = float(times[k])
        h_k1 = float(times[k + 1] - times[k])
        mu = u_true.marginal(t_k).probs
        ut = u_true.score_table(t_k)
        ua = u_approx.score_table(t_k)
        w = _jump_weights(model, t_k)
        legal = ~np.isnan(ut) & (w > 0)
        ut_l, ua_l, w_l = ut[legal], ua[legal], w[legal]
        mass = np.broadcast_to(mu, ut.shape)[legal]
        if ((ua_l <= 0) & (ut_l > 0) & (mass > 0)).any():
            return math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(
                ut_l > 0,
                ut_l * (np.log(np.where(ut_l > 0, ut_l, 1.0)) - np.log(np.where(ua_l > 0, ua_l, 1.0)))
                - ut_l
                + ua_l,
                ua_l,
            )
        total += h_k1 * float(np.sum(mass * w_l * term))
    return total


def backward_rates(oracle: ScoreOracle, t_k: float, x) -> dict:
    """Backward jump rates at state ``x`` frozen at backward time ``t_k``.

    rw/brw: score times the forward rate of the same jump; masked: only
    unmask moves carry rate, ``beta(T - t_k)`` times the score.
    """
    model = oracle.model
    space = model.space
    if not 0.0 <= t_k < model.t_final + 1e-12:
        raise ValueError(f"backward time {t_k} outside [0, {model.t_final})")
    rates = {}
    if space.kind in (RW, BRW):
        for op in op_catalog(space):
            y = apply_op(space, x, op)
            if y is None:
                continue
            if space.kind == RW:
                q = 0.5
            else:
                q = 1.0 if isinstance(op, Plus) else float(int(x[op.axis]))
                if q == 0.0:
                    continue
            rates[op] = oracle.score(t_k, x, op) * q
        return rates
    b = model.beta.rate(model.t_final - t_k)
    from .spaces import masked_sets

    masked, _ = masked_sets(space, x)
    for i in sorted(masked):
        for j in range(space.m):
            op = Unmask(i, j)
            rates[op] = b * oracle.score(t_k, x, op)
    return rates


def backward_rate_table(oracle: ScoreOracle, t_k: float) -> np.ndarray:
    """(n_ops, size) array of backward rates; zero where no jump exists."""
    ut = oracle.score_table(t_k)
    space = oracle.model.space
    if space.kind == RW:
        w = np.full(ut.shape, 0.5)
    else:
        w = _jump_weights(oracle.model, t_k)
    return np.where(np.isnan(ut), 0.0, np.nan_to_num(ut) * w)


def hjb_residual(oracle: ScoreOracle, t: float, x, dt: float, op=None) -> float:
    """Finite-difference residual of the backward evolution equation.

    rw / brw check the potential ``V_t = -log(marginal or relative
    density)``: residual = (time derivative term) - (jump-mean term), with
    the derivative by central differences, so the residual is O(dt^2) when
    the closed forms are exact. masked checks the score evolution of a
    given unmask jump (``op`` required). brw states touching the truncation
    cap are rejected (their rate identity needs the dropped birth move).
    """
    model = oracle.model
    space = model.space
    if not (dt > 0 and t - dt > 0 and t + dt < model.t_final):
        raise ValueError("need 0 < t - dt and t + dt < horizon")
    ix = encode(space, x)

    if space.kind in (RW, BRW):
        if space.kind == BRW and any(int(c) >= space.cap for c in x):
            raise ValueError("residual undefined on the truncation boundary")

        def potential(tt):
            mu = oracle.marginal(tt).probs
            if space.kind == RW:
                return -math.log(mu[ix])
            logw = -sum(math.lgamma(int(c) + 1) for c in x)  # Poisson weight, const in t
            return -(math.log(mu[ix]) - logw)

        dv = (potential(t + dt) - potential(t - dt)) / (2.0 * dt)
        jump_sum = 0.0
        for op_ in op_catalog(space):
            y = apply_op(space, x, op_)
            if y is None:
                continue
            u = oracle.score(t, x, op_)
            q = 0.5 if space.kind == RW else (1.0 if isinstance(op_, Plus) else float(int(x[op_.axis])))
            jump_sum += q * (u - 1.0)
        if space.kind == RW:
            return 2.0 * dv - 2.0 * jump_sum  # rates 1/2 folded into jump_sum
        return dv - jump_sum

    if not isinstance(op, Unmask):
        raise ValueError("masked residuals need an Unmask op")
    y = apply_op(space, x, op)
    if y is None:
        raise ValueError(f"{op!r} undefined at {tuple(x)}")
    du = (oracle.score(t + dt, x, op) - oracle.score(t - dt, x, op)) / (2.0 * dt)
    mu = oracle.marginal(t).probs
    from .spaces import masked_sets

    masked, _ = masked_sets(space, x)
    iy = encode(space, y)
    grow = sum(
        mu[encode(space, apply_op(space, x, Unmask(kk, n)))]
        for kk in masked
        for n in range(space.m)
    ) / mu[ix]
    shrink = sum(
        mu[encode(space, apply_op(space, y, Unmask(kk, n)))]
        for kk in masked - {op.axis}
        for n in range(space.m)
    ) / mu[iy]
    rhs = model.beta.rate(model.t_final - t) * oracle.score(t, x, op) * (1.0 + grow - shrink)
    return du - rhs
