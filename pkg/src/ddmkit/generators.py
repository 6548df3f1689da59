"""Forward rate structures for the three jump models.

The cyclic random walk moves each coordinate to either neighbour at rate
1/2; the masking process sets unmasked coordinates to MASK at a
time-dependent rate ``beta(t)`` and never unmasks; the biased counting walk
has birth rate 1 and death rate equal to the coordinate value, with the
Poisson(1) product as its stationary law.

The brw generator is represented on the truncated space {0..cap}^d as a
sub-generator: the birth transition out of a capped coordinate is dropped,
so its row loses mass through the boundary. Invariance and decay checks
restrict to interior states and report that leak explicitly.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .spaces import BRW, MASKED, RW, Mask, Minus, Plus, Space, Unmask, all_coords
from .spaces import neighbor_table, op_catalog


@dataclass(frozen=True)
class BetaSchedule:
    """Masking-rate schedule ``t -> beta(t)``.

    Either a constant in (0, 1] or a tabulated piecewise-linear function
    given by monotone samples. Values must lie in [0, 1] and be
    non-decreasing; queries beyond the last sample hold the final value.
    The sample spacing is the caller's accuracy contract: integrals are
    exact for the piecewise-linear interpolant.
    """

    kind: str
    value: float = 1.0
    times: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    _cumulative: Tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def constant(cls, value: float) -> "BetaSchedule":
        if not 0.0 < value <= 1.0:
            raise ValueError("constant rate must lie in (0, 1]")
        return cls("constant", value=value)

    @classmethod
    def tabulated(cls, times, values) -> "BetaSchedule":
        ts = tuple(float(t) for t in times)
        vs = tuple(float(v) for v in values)
        if len(ts) != len(vs) or len(ts) < 2:
            raise ValueError("need at least two (time, value) samples")
        if ts[0] != 0.0:
            raise ValueError("tabulated schedule must start at t = 0")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in vs):
            raise ValueError("rate values must lie in [0, 1]")
        if any(b < a for a, b in zip(vs, vs[1:])):
            raise ValueError("rate values must be non-decreasing")
        cum = [0.0]
        for i in range(1, len(ts)):
            cum.append(cum[-1] + 0.5 * (vs[i] + vs[i - 1]) * (ts[i] - ts[i - 1]))
        return cls("tabulated", times=ts, values=vs, _cumulative=tuple(cum))

    def rate(self, t: float) -> float:
        if t < 0:
            raise ValueError("time must be nonnegative")
        if self.kind == "constant":
            return self.value
        if t >= self.times[-1]:
            return self.values[-1]
        i = bisect.bisect_right(self.times, t) - 1
        t0, t1 = self.times[i], self.times[i + 1]
        v0, v1 = self.values[i], self.values[i + 1]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)

    def integral(self, t: float) -> float:
        """Exact integral of the interpolant over [0, t]."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        if self.kind == "constant":
            return self.value * t
        if t >= self.times[-1]:
            return self._cumulative[-1] + self.values[-1] * (t - self.times[-1])
        i = bisect.bisect_right(self.times, t) - 1
        dt = t - self.times[i]
        return self._cumulative[i] + 0.5 * (self.values[i] + self.rate(t)) * dt

    def integral_between(self, s: float, t: float) -> float:
        if s > t:
            raise ValueError("integral_between needs s <= t")
        return self.integral(t) - self.integral(s)


@dataclass(frozen=True)
class Model:
    """One of the three forward models: a space, a horizon, and (masked only)
    a rate schedule. rw and brw are time-homogeneous."""

    space: Space
    t_final: float
    beta: Optional[BetaSchedule] = None

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("time horizon must be positive")
        if self.space.kind == MASKED and self.beta is None:
            raise ValueError("masked models need a beta schedule")
        if self.space.kind != MASKED and self.beta is not None:
            raise ValueError("beta schedules only apply to masked models")

    @classmethod
    def rw(cls, m: int, d: int, t_final: float) -> "Model":
        return cls(Space.rw(m, d), t_final)

    @classmethod
    def masked(cls, m: int, d: int, t_final: float, beta: BetaSchedule) -> "Model":
        return cls(Space.masked(m, d), t_final, beta)

    @classmethod
    def brw(cls, d: int, cap: int, t_final: float) -> "Model":
        return cls(Space.brw(d, cap), t_final)

    def _check_time(self, t: float):
        if not 0.0 <= t <= self.t_final + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.t_final}]")


def forward_rate(model: Model, t: float, x, op) -> float:
    """Forward jump rate of a single operator at state ``x`` and time ``t``.

    Per-operator rates: rw 1/2 for every Plus/Minus; masked ``beta(t)`` for
    Mask on an unmasked coordinate and 0 for Unmask; brw 1 for Plus and
    ``x^axis`` for Minus. Rates of distinct operators mapping to the same
    target state accumulate in the rate matrix (relevant for rw with m=2).
    """
    model._check_time(t)
    space = model.space
    kind = space.kind
    if kind == RW:
        if not isinstance(op, (Plus, Minus)):
            raise ValueError(f"operator {op!r} is illegal for rw")
        return 0.5
    if kind == BRW:
        if not isinstance(op, (Plus, Minus)):
            raise ValueError(f"operator {op!r} is illegal for brw")
        c = int(x[op.axis])
        if isinstance(op, Plus):
            return 1.0 if c < space.cap else 0.0
        return float(c)
    if isinstance(op, Mask):
        return model.beta.rate(t) if int(x[op.axis]) != space.mask_value else 0.0
    if isinstance(op, Unmask):
        return 0.0
    raise ValueError(f"operator {op!r} is illegal for masked")


def total_rate(model: Model, t: float, x) -> float:
    """Total outflow rate at ``x`` (sum of per-operator rates legal in the
    enumerated space; brw excludes the truncation boundary birth)."""
    model._check_time(t)
    space = model.space
    if space.kind == RW:
        return float(space.d)
    if space.kind == BRW:
        births = sum(1.0 for c in x if int(c) < space.cap)
        return births + float(sum(int(c) for c in x))
    unmasked = sum(1 for c in x if int(c) != space.mask_value)
    return unmasked * model.beta.rate(t)


def rate_table(model: Model, t: float) -> np.ndarray:
    """(n_ops, size) array of per-operator forward rates over all states.

    Rows follow ``op_catalog(model.space)``; entries are zero where the
    operator is disallowed (brw boundary, masked Unmask, masked Mask on an
    already-masked coordinate).
    """
    model._check_time(t)
    space = model.space
    coords = all_coords(space)
    targets = neighbor_table(space)
    ops = op_catalog(space)
    table = np.zeros(targets.shape)
    if space.kind == RW:
        table[:] = 0.5
    elif space.kind == BRW:
        for i, op in enumerate(ops):
            if isinstance(op, Plus):
                table[i] = np.where(targets[i] >= 0, 1.0, 0.0)
            else:
                table[i] = coords[:, op.axis]
    else:
        b = model.beta.rate(t)
        for i, op in enumerate(ops):
            if isinstance(op, Mask):
                table[i] = np.where(targets[i] >= 0, b, 0.0)
    return table


def rate_matrix(model: Model, t: float = 0.0) -> np.ndarray:
    """Dense (size, size) rate matrix at time ``t``.

    Off-diagonal entries accumulate all operators mapping x to y; the
    diagonal is minus the row sum, so rows sum to zero exactly (the brw
    boundary loses the dropped birth transition, as intended for the
    truncated sub-generator).
    """
    space = model.space
    table = rate_table(model, t)
    targets = neighbor_table(space)
    size = space.size
    q = np.zeros((size, size))
    src = np.arange(size)
    for i in range(table.shape[0]):
        ok = targets[i] >= 0
        np.add.at(q, (src[ok], targets[i][ok]), table[i][ok])
    q[src, src] -= q.sum(axis=1)
    return q


def interior_mask(space: Space) -> np.ndarray:
    """States unaffected by brw truncation (all coordinates < cap).

    For rw and masked spaces every state is interior.
    """
    if space.kind != BRW:
        return np.ones(space.size, dtype=bool)
    return (all_coords(space) < space.cap).all(axis=1)


def invariant_residual(model: Model, gamma) -> float:
    """Max-abs stationarity residual ``|sum_y gamma(y) q(y, x)|`` over
    interior states ``x``."""
    probs = np.asarray(getattr(gamma, "probs", gamma), dtype=float)
    if probs.shape != (model.space.size,):
        raise ValueError("distribution size does not match the space")
    q = rate_matrix(model, 0.0)
    residual = probs @ q
    return float(np.abs(residual[interior_mask(model.space)]).max())


@dataclass
class AssumptionReport:
    """Per-assumption pass/fail outcome with a human-readable detail line."""

    entries: list

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.entries)

    def failures(self):
        return [(name, detail) for name, ok, detail in self.entries if not ok]


def validate_assumptions(model: Model, mu_star) -> AssumptionReport:
    """Check the standing assumptions of the model against a data law.

    Covers rate-matrix stability/conservativeness, full support (rw), the
    masked-support and schedule-monotonicity conditions, finite moments and
    relative Fisher information (brw), and the brw Lyapunov drift bound
    certifying non-explosion.
    """
    from .metrics import fisher_information, moments  # local import, no cycle at runtime

    probs = np.asarray(getattr(mu_star, "probs", mu_star), dtype=float)
    space = model.space
    entries = []

    q = rate_matrix(model, 0.0)
    off = q - np.diag(np.diag(q))
    entries.append(
        (
            "rates_nonnegative",
            bool((off >= 0).all()),
            f"min off-diagonal rate {off.min():.3e}",
        )
    )
    row_res = np.abs(q.sum(axis=1)).max()
    entries.append(
        ("rows_conservative", bool(row_res < 1e-12), f"max row-sum residual {row_res:.3e}")
    )
    exit_rates = -np.diag(q)
    entries.append(
        ("exit_rates_bounded", bool(np.isfinite(exit_rates).all()), f"sup exit rate {exit_rates.max():.6g}")
    )

    if space.kind == RW:
        ok = bool((probs > 0).all())
        entries.append(("full_support", ok, f"min mass {probs.min():.3e}"))
    elif space.kind == MASKED:
        mask_states = (all_coords(space) == space.mask_value).any(axis=1)
        core_ok = bool((probs[~mask_states] > 0).all())
        masked_ok = bool((probs[mask_states] == 0).all())
        entries.append(("core_full_support", core_ok, f"min core mass {probs[~mask_states].min():.3e}"))
        entries.append(
            (
                "no_mass_on_masked_states",
                masked_ok,
                f"mass on masked states {probs[mask_states].sum():.3e}",
            )
        )
        grid = np.linspace(0.0, model.t_final, 64)
        vals = [model.beta.rate(t) for t in grid]
        mono = all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        rng_ok = all(0.0 <= v <= 1.0 for v in vals)
        entries.append(("schedule_monotone_in_range", mono and rng_ok, "beta non-decreasing in [0,1]"))
        sup_rate = space.d * max(vals)
        entries.append(("bounded_masking_rate", sup_rate <= space.d + 1e-12, f"sup total rate {sup_rate:.6g} <= d"))
    else:
        from .kernels import DiscreteDistribution

        dist = mu_star if hasattr(mu_star, "probs") else DiscreteDistribution(space, probs)
        m2 = moments(dist, 2)
        entries.append(("finite_second_moment", bool(np.isfinite(m2)), f"m2 = {m2:.6g}"))
        fi = fisher_information(model, dist)
        entries.append(("finite_relative_fisher", bool(np.isfinite(fi)), f"I = {fi:.6g}"))
        # Lyapunov drift for non-explosion: with V(x) = d + sum(x), the
        # generator drift on interior states is d - sum(x) <= V(x).
        coords = all_coords(space)
        interior = interior_mask(space)
        drift = q @ coords.sum(axis=1).astype(float)
        expected = space.d - coords.sum(axis=1).astype(float)
        drift_exact = bool(np.allclose(drift[interior], expected[interior], atol=1e-10))
        lyapunov = bool((expected[interior] <= space.d + coords.sum(axis=1)[interior] + 1e-12).all())
        entries.append(("lyapunov_drift", drift_exact and lyapunov, "d - |x| <= d + |x| at interior states"))
    return AssumptionReport(entries)
