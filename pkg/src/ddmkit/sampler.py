"""Time grids, generative initialization, and the Euler-type backward
samplers with residual-clock mechanics.

Per grid interval the backward rates are frozen at the left endpoint and at
most one jump happens. The residual clock can follow two semantics:

* ``algorithm_literal`` -- a fresh Exp(1) variable ``E`` is drawn every
  interval; a jump occurs iff ``(E - Gamma) / rate`` falls inside the
  interval, with the accumulated hazard ``Gamma`` growing across no-jump
  intervals and resetting after a jump. This reproduces the pseudo-code
  loop verbatim; the per-interval jump probability is
  ``exp(-Gamma) * (1 - exp(-h * rate))``.
* ``single_clock`` -- one Exp(1) variable persists across intervals until
  it is consumed by a jump; by memorylessness the per-interval jump
  probability is ``1 - exp(-h * rate)`` regardless of the residual.

Both modes are intentionally available so their discrepancy is measurable;
``propagate_exact`` computes the exact law of either scheme, tracking the
joint (state, residual) lattice for the literal mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .generators import Model
from .kernels import DiscreteDistribution, alpha
from .scores import ScoreOracle, backward_rate_table, backward_rates
from .spaces import MASKED, RW, apply_op, decode, mask_count, neighbor_table
from .util import poisson_log_weight

ALGORITHM_LITERAL = "algorithm_literal"
SINGLE_CLOCK = "single_clock"
_CLOCK_MODES = (ALGORITHM_LITERAL, SINGLE_CLOCK)

_SUM_TOL = 1e-12


class ResourceBudgetError(RuntimeError):
    """Raised when the exact-propagation lattice exceeds its cell budget."""


@dataclass(frozen=True)
class TimeGrid:
    """Ordered partition 0 = t_0 < ... < t_K = horizon of the backward run.

    ``eta`` is the early-stopping margin: the grid covers ``[0, T - eta]``.
    Adaptive grids carry their construction parameters and phase counts
    (k0 constant-step points, k1 geometric steps, k2 tail steps).
    """

    times: np.ndarray
    eta: float = 0.0
    c: Optional[float] = None
    a: Optional[float] = None
    k0: Optional[int] = None
    k1: Optional[int] = None
    k2: Optional[int] = None

    def __post_init__(self):
        ts = np.array(self.times, dtype=float)
        if ts.ndim != 1 or ts.size < 2 or ts[0] != 0.0:
            raise ValueError("grid needs times starting at 0")
        if (np.diff(ts) <= 0).any():
            raise ValueError("grid times must be strictly increasing")
        ts.setflags(write=False)
        object.__setattr__(self, "times", ts)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def num_intervals(self) -> int:
        return len(self.times) - 1


def grid_uniform(t_final: float, k: int, eta: float = 0.0) -> TimeGrid:
    """Uniform grid with ``k`` intervals over [0, t_final - eta]."""
    if k < 1:
        raise ValueError("need at least one interval")
    if not 0.0 <= eta < t_final:
        raise ValueError("early-stopping margin must lie in [0, t_final)")
    return TimeGrid(np.linspace(0.0, t_final - eta, k + 1), eta=eta)


def grid_adaptive(t_final: float, eta: float, c: float, a: float) -> TimeGrid:
    """Adaptive three-phase grid over [0, t_final - eta].

    Steps are ``c`` while the remaining horizon exceeds 1, then geometric
    ``c * remaining``, then constant ``c * a`` with a final step closing
    the horizon exactly. Phase lengths are fixed by the closed forms

        k0 = floor((T' - 1) / c),
        k1 = floor(log(a / (T' - t_k0)) / log(1 - c)),

    with T' = t_final - eta and t_k0 = k0 * c; k2 counts the tail steps
    including the closing one.
    """
    horizon = t_final - eta
    if not 0.0 < c <= 0.5:
        raise ValueError("max step fraction c must lie in (0, 1/2]")
    if not 0.0 < a <= 1.0:
        raise ValueError("geometric floor a must lie in (0, 1]")
    if not 0.0 <= eta < t_final:
        raise ValueError("early-stopping margin must lie in [0, t_final)")
    if horizon < 1.0 + 2.0 * c:
        raise ValueError("need t_final - eta >= 1 + 2c")
    k0 = int(math.floor((horizon - 1.0) / c))
    t_k0 = k0 * c
    k1 = int(math.floor(math.log(a / (horizon - t_k0)) / math.log(1.0 - c)))
    times = [0.0]
    for _ in range(k0 + 1):
        times.append(times[-1] + c)
    for _ in range(k1):
        times.append(times[-1] + c * (horizon - times[-1]))
    k2 = 0
    tail = c * a
    while horizon - times[-1] > tail * (1.0 + 1e-12):
        times.append(times[-1] + tail)
        k2 += 1
    times.append(horizon)  # closing step, size <= c * a
    k2 += 1
    return TimeGrid(np.array(times), eta=eta, c=c, a=a, k0=k0, k1=k1, k2=k2)


def init_distribution(model: Model) -> DiscreteDistribution:
    """Generative starting law of the backward run.

    rw: uniform. masked: the closed form
    ``(1 - alpha_T)^{#masked} (alpha_T / m)^{d - #masked}`` (the uniform
    core pushed through the full-horizon kernel). brw: the per-coordinate
    truncated, renormalized Poisson(1) product; the removed tail mass is
    recorded as ``leak``.
    """
    space = model.space
    if space.kind == RW:
        return DiscreteDistribution.uniform(space)
    if space.kind == MASKED:
        a_t = alpha(model.beta, model.t_final)
        k = mask_count(space).astype(float)
        probs = (1.0 - a_t) ** k * (a_t / space.m) ** (space.d - k)
        return DiscreteDistribution(space, probs / probs.sum())
    log_one = poisson_log_weight(np.arange(space.cap + 1))
    pmf = np.exp(log_one)
    tail = 1.0 - pmf.sum()
    pmf = pmf / pmf.sum()
    probs = pmf.copy()
    v = probs
    for _ in range(space.d - 1):
        v = np.multiply.outer(v, pmf)
    leak = 1.0 - (1.0 - tail) ** space.d
    return DiscreteDistribution(space, v.reshape(-1), leak=max(leak, 0.0))


@dataclass(frozen=True)
class SamplerRun:
    """One backward trajectory: jump records and the terminal state."""

    seed: int
    clock_mode: str
    trace: Tuple[Tuple[float, Tuple[int, ...]], ...]
    terminal: Tuple[int, ...]


def _check_masked_eta(model: Model, grid: TimeGrid):
    if model.space.kind == MASKED and grid.eta <= 0.0:
        raise ValueError("masked sampling needs an early-stopping margin eta > 0")
    if grid.horizon > model.t_final + 1e-12:
        raise ValueError("grid horizon exceeds the model horizon")


def sample_backward(model: Model, score: ScoreOracle, grid: TimeGrid, seed: int,
                    clock_mode: str = ALGORITHM_LITERAL) -> SamplerRun:
    """Simulate one backward trajectory with frozen per-interval rates.

    Deterministic in ``seed``. Masked runs skip the clock entirely on
    fully-unmasked states (nothing can move); zero total rate never jumps.
    """
    if clock_mode not in _CLOCK_MODES:
        raise ValueError(f"unknown clock mode {clock_mode!r}")
    _check_masked_eta(model, grid)
    rng = np.random.default_rng(seed)
    init = init_distribution(model)
    state = decode(model.space, int(rng.choice(model.space.size, p=init.probs)))
    gamma = 0.0
    exp_clock = rng.exponential() if clock_mode == SINGLE_CLOCK else None
    trace: List[Tuple[float, Tuple[int, ...]]] = []
    times = grid.times
    masked_kind = model.space.kind == MASKED
    for k in range(grid.num_intervals):
        t_k = float(times[k])
        h_k1 = float(times[k + 1] - times[k])
        if masked_kind and all(c != model.space.mask_value for c in state):
            continue  # nothing left to unmask; the clock is not consulted
        rates = backward_rates(score, t_k, state)
        lam = sum(rates.values())
        if clock_mode == ALGORITHM_LITERAL:
            e = rng.exponential()
        else:
            e = exp_clock
        if lam > 0.0 and 0.0 <= (e - gamma) / lam < h_k1:
            wait = (e - gamma) / lam
            ops = list(rates)
            weights = np.array([rates[o] for o in ops]) / lam
            op = ops[int(rng.choice(len(ops), p=weights))]
            state = apply_op(model.space, state, op)
            trace.append((t_k + wait, state))
            gamma = 0.0
            if clock_mode == SINGLE_CLOCK:
                exp_clock = rng.exponential()
        else:
            gamma += h_k1 * lam
    return SamplerRun(seed, clock_mode, tuple(trace), state)


def _rate_tables(model: Model, score: ScoreOracle, grid: TimeGrid):
    """Per-interval backward rates: list of (lam, cum_frac, targets) with
    lam (size,), cum_frac (n_ops, size) cumulative jump fractions, and the
    static target table."""
    targets = neighbor_table(model.space)
    tables = []
    for k in range(grid.num_intervals):
        r = backward_rate_table(score, float(grid.times[k]))
        lam = r.sum(axis=0)
        safe = np.where(lam > 0, lam, 1.0)
        cum = np.cumsum(r / safe, axis=0)
        tables.append((lam, cum))
    return targets, tables


def sample_terminal_ensemble(model: Model, score: ScoreOracle, grid: TimeGrid,
                             seed: int, n_runs: int,
                             clock_mode: str = ALGORITHM_LITERAL) -> np.ndarray:
    """Terminal state indices of ``n_runs`` independent backward runs.

    Vectorized over runs (one rate table per grid interval); statistically
    identical to repeated :func:`sample_backward` calls, intended for
    distribution-level comparisons.
    """
    if clock_mode not in _CLOCK_MODES:
        raise ValueError(f"unknown clock mode {clock_mode!r}")
    _check_masked_eta(model, grid)
    rng = np.random.default_rng(seed)
    init = init_distribution(model)
    states = rng.choice(model.space.size, size=n_runs, p=init.probs)
    gamma = np.zeros(n_runs)
    exp_clock = rng.exponential(size=n_runs) if clock_mode == SINGLE_CLOCK else None
    targets, tables = _rate_tables(model, score, grid)
    steps = grid.steps
    for k in range(grid.num_intervals):
        lam_all, cum = tables[k]
        lam = lam_all[states]
        h_k1 = steps[k]
        if clock_mode == ALGORITHM_LITERAL:
            e = rng.exponential(size=n_runs)
        else:
            e = exp_clock
        jump = (e >= gamma) & (e - gamma < h_k1 * lam)
        if jump.any():
            u = rng.uniform(size=n_runs)[jump]
            cdf = cum[:, states[jump]]
            op_idx = (u[None, :] > cdf).sum(axis=0)
            new_states = targets[op_idx, states[jump]]
            states = states.copy()
            states[jump] = new_states
            gamma[jump] = 0.0
            if clock_mode == SINGLE_CLOCK:
                fresh = rng.exponential(size=int(jump.sum()))
                exp_clock = exp_clock.copy()
                exp_clock[jump] = fresh
        nojump = ~jump
        gamma[nojump] += h_k1 * lam[nojump]
    return states


@dataclass
class PropagationResult:
    """Exact per-grid-time laws of the discretized backward scheme."""

    terminal: DiscreteDistribution
    history: List[DiscreteDistribution] = field(default_factory=list)


def propagate_exact(model: Model, score: ScoreOracle, grid: TimeGrid,
                    clock_mode: str = ALGORITHM_LITERAL,
                    residual_rel_tol: float = 1e-12,
                    max_cells: int = 2_000_000,
                    initial: Optional[DiscreteDistribution] = None) -> PropagationResult:
    """Deterministic law of the backward scheme at every grid time.

    ``single_clock`` is Markov on states (memorylessness makes the jump
    probability ``1 - exp(-h * rate)``), so a matrix recursion suffices.
    ``algorithm_literal`` tracks the joint law of (state, accumulated
    residual); residual values are pooled within ``residual_rel_tol`` and
    the lattice size is capped by ``max_cells``.

    ``initial`` overrides the generative starting law (diagnostics only;
    the algorithms themselves always start from :func:`init_distribution`).
    """
    if clock_mode not in _CLOCK_MODES:
        raise ValueError(f"unknown clock mode {clock_mode!r}")
    _check_masked_eta(model, grid)
    space = model.space
    init = init_distribution(model) if initial is None else initial
    targets, tables = _rate_tables(model, score, grid)
    n_ops = targets.shape[0]
    history = [init]
    steps = grid.steps

    if clock_mode == SINGLE_CLOCK:
        probs = init.probs.copy()
        for k in range(grid.num_intervals):
            lam, cum = tables[k]
            frac = np.diff(np.vstack([np.zeros(space.size), cum]), axis=0)
            p_jump = np.where(lam > 0, -np.expm1(-steps[k] * lam), 0.0)
            nxt = probs * (1.0 - p_jump)
            moving = probs * p_jump
            for i in range(n_ops):
                ok = (targets[i] >= 0) & (moving > 0)
                np.add.at(nxt, targets[i][ok], moving[ok] * frac[i][ok])
            probs = nxt
            history.append(DiscreteDistribution(space, probs / probs.sum(), leak=init.leak))
        return PropagationResult(history[-1], history)

    def quantize(g: float) -> float:
        # pool residual labels at relative tolerance; masses add exactly
        if g == 0.0:
            return 0.0
        digits = max(0, -int(math.floor(math.log10(abs(g) * residual_rel_tol))))
        return round(g, digits)

    cells = {}
    for s in range(space.size):
        if init.probs[s] > 0:
            cells[(s, 0.0)] = float(init.probs[s])
    for k in range(grid.num_intervals):
        lam, cum = tables[k]
        frac = np.diff(np.vstack([np.zeros(space.size), cum]), axis=0)
        h_k1 = float(steps[k])
        nxt = {}
        for (s, g), w in cells.items():
            lam_s = float(lam[s])
            if lam_s <= 0.0:
                key = (s, g)
                nxt[key] = nxt.get(key, 0.0) + w
                continue
            p_jump = math.exp(-g) * -math.expm1(-h_k1 * lam_s)
            stay = w * (1.0 - p_jump)
            key = (s, quantize(g + h_k1 * lam_s))
            nxt[key] = nxt.get(key, 0.0) + stay
            moved = w * p_jump
            for i in range(n_ops):
                tgt = int(targets[i, s])
                if tgt < 0 or frac[i, s] <= 0.0:
                    continue
                key = (tgt, 0.0)
                nxt[key] = nxt.get(key, 0.0) + moved * float(frac[i, s])
        if len(nxt) > max_cells:
            raise ResourceBudgetError(
                f"residual lattice grew to {len(nxt)} cells (budget {max_cells})"
            )
        cells = nxt
        marg = np.zeros(space.size)
        for (s, _), w in cells.items():
            marg[s] += w
        history.append(DiscreteDistribution(space, marg / marg.sum(), leak=init.leak))
    return PropagationResult(history[-1], history)
