"""Time grids, initialization laws, backward sampling, and exact propagation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddmkit.generators import BetaSchedule, Model
from ddmkit.kernels import DiscreteDistribution, alpha, kernel_product
from ddmkit.sampler import (
    ALGORITHM_LITERAL,
    SINGLE_CLOCK,
    grid_adaptive,
    grid_uniform,
    init_distribution,
    propagate_exact,
    sample_backward,
    sample_terminal_ensemble,
)
from ddmkit.scores import ScoreOracle, backward_rates
from ddmkit.spaces import mask_count


class TestUniformGrid:
    def test_worked_example(self):
        g = grid_uniform(2.0, 4)
        assert np.allclose(g.times, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_sum_with_margin(self):
        g = grid_uniform(3.0, 7, eta=0.25)
        assert g.steps.sum() == pytest.approx(2.75, abs=1e-12)

    def test_single_interval(self):
        g = grid_uniform(1.0, 1)
        assert g.num_intervals == 1

    def test_bad_params(self):
        with pytest.raises(ValueError):
            grid_uniform(1.0, 0)
        with pytest.raises(ValueError):
            grid_uniform(1.0, 4, eta=1.0)


class TestAdaptiveGrid:
    def test_worked_example_counts(self):
        g = grid_adaptive(3.0, 0.0, 0.5, 0.25)
        assert g.k0 == math.floor(2.0 / 0.5) == 4
        assert g.k1 == math.floor(math.log(0.25 / 1.0) / math.log(0.5)) == 2
        assert np.allclose(g.times, [0, 0.5, 1.0, 1.5, 2.0, 2.5, 2.75, 2.875, 3.0])
        assert g.num_intervals == g.k0 + g.k1 + g.k2 + 1

    @given(
        st.floats(0.05, 0.5),
        st.floats(0.0, 0.4),
        st.floats(0.02, 1.0),
        st.floats(1.2, 9.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_structure(self, c, eta, a, extra):
        t_final = eta + 1.0 + 2.0 * c + extra
        g = grid_adaptive(t_final, eta, c, a)
        horizon = t_final - eta
        assert abs(g.steps.sum() - horizon) <= 1e-12
        assert (g.steps > 0).all()
        assert g.steps.max() <= c + 1e-12
        # closed-form counts
        assert g.k0 == math.floor((horizon - 1.0) / c)
        t_k0 = g.k0 * c
        assert g.k1 == math.floor(math.log(a / (horizon - t_k0)) / math.log(1.0 - c))
        assert g.num_intervals == g.k0 + g.k1 + g.k2 + 1
        # phase structure: k0+1 constant steps, k1 geometric, then ca steps
        steps = g.steps
        assert np.allclose(steps[: g.k0 + 1], c)
        rem = horizon - g.times[: -1]
        for j in range(g.k0 + 1, g.k0 + 1 + g.k1):
            assert steps[j] == pytest.approx(c * rem[j], rel=1e-12)
        for j in range(g.k0 + g.k1 + 1, g.num_intervals - 1):
            assert steps[j] == pytest.approx(c * a, rel=1e-12)
        assert steps[-1] <= c * a * (1.0 + 1e-9)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            grid_adaptive(3.0, 0.0, 0.6, 0.5)
        with pytest.raises(ValueError):
            grid_adaptive(1.5, 0.0, 0.5, 0.5)  # horizon < 1 + 2c


class TestInitDistribution:
    def test_rw_uniform(self):
        model = Model.rw(3, 2, 2.0)
        init = init_distribution(model)
        assert np.allclose(init.probs, 1.0 / 9.0)

    def test_masked_closed_form(self):
        model = Model.masked(3, 2, 2.5, BetaSchedule.constant(1.0))
        init = init_distribution(model)
        a_t = alpha(model.beta, 2.5)
        k = mask_count(model.space)
        expected = (1.0 - a_t) ** k * (a_t / 3.0) ** (2 - k)
        assert np.abs(init.probs - expected).max() < 1e-15
        # fully-masked state carries (1 - alpha)^d
        idx = int(np.argmax(k == 2))
        assert init.probs[(mask_count(model.space) == 2)].max() == pytest.approx(
            (1 - a_t) ** 2, abs=1e-15
        )

    def test_masked_matches_kernel_route(self):
        model = Model.masked(2, 2, 2.0, BetaSchedule.tabulated([0.0, 2.0], [0.3, 1.0]))
        init = init_distribution(model)
        uniform_core = DiscreteDistribution.uniform(model.space)
        pushed = kernel_product(model, 0.0, 2.0).apply(uniform_core)
        assert np.abs(init.probs - pushed.probs).max() < 1e-12

    def test_brw_tail_mass(self):
        model = Model.brw(2, 20, 2.0)
        init = init_distribution(model)
        # removed Poisson(1) tail beyond 20 is astronomically small
        assert 0.0 <= init.leak < 1e-18
        assert abs(init.probs.sum() - 1.0) < 1e-12


class TestSampleBackward:
    def test_determinism(self):
        model = Model.rw(3, 1, 3.0)
        mu = DiscreteDistribution.random_full_support(model.space, 2)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(3.0, 30)
        r1 = sample_backward(model, oracle, grid, seed=7)
        r2 = sample_backward(model, oracle, grid, seed=7)
        assert r1.trace == r2.trace and r1.terminal == r2.terminal

    def test_masked_fully_unmasked_never_moves(self):
        model = Model.masked(2, 2, 2.0, BetaSchedule.constant(1.0))
        mu = DiscreteDistribution.random_full_support(model.space, 2)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(2.0, 10, eta=0.1)
        # force an unmasked start by monkey-free means: run until a seed
        # draws an unmasked initial state, then check it holds forever
        for seed in range(40):
            run = sample_backward(model, oracle, grid, seed=seed)
            if run.trace:
                continue
            if all(c != model.space.mask_value for c in run.terminal):
                break
        else:
            pytest.skip("no fully-unmasked draw in 40 seeds")
        assert not run.trace

    def test_masked_requires_eta(self):
        model = Model.masked(2, 1, 2.0, BetaSchedule.constant(1.0))
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        with pytest.raises(ValueError):
            sample_backward(model, oracle, grid_uniform(2.0, 5), seed=0)

    def test_clock_modes_both_run(self):
        model = Model.brw(1, 10, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 1)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(2.0, 20)
        for mode in (ALGORITHM_LITERAL, SINGLE_CLOCK):
            run = sample_backward(model, oracle, grid, seed=3, clock_mode=mode)
            assert run.clock_mode == mode
            assert all(t1 < t2 for (t1, _), (t2, _) in zip(run.trace, run.trace[1:]))


class TestPropagateExact:
    def test_single_interval_jump_probability(self):
        """From a point state with zero residual the literal-mode jump
        probability over one interval is 1 - exp(-h * rate)."""
        model = Model.brw(1, 15, 1.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(1.0, 1)
        start = DiscreteDistribution.point_mass(model.space, (3,))
        res = propagate_exact(
            model, oracle, grid, clock_mode=ALGORITHM_LITERAL, initial=start
        )
        lam = sum(backward_rates(oracle, 0.0, (3,)).values())
        p_stay = float(res.terminal.probs[3])
        assert p_stay == pytest.approx(math.exp(-grid.steps[0] * lam), abs=1e-12)

    def test_zero_rate_state_stays(self):
        model = Model.masked(2, 1, 2.0, BetaSchedule.constant(1.0))
        mu = DiscreteDistribution.uniform(model.space)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(2.0, 6, eta=0.2)
        res = propagate_exact(model, oracle, grid)
        # unmasked mass can only grow: the two alphabet states absorb
        assert res.terminal.probs[:2].sum() >= res.history[0].probs[:2].sum()

    def test_uniform_rw_invariant_both_modes(self):
        model = Model.rw(4, 1, 2.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        grid = grid_uniform(2.0, 9)
        for mode in (ALGORITHM_LITERAL, SINGLE_CLOCK):
            res = propagate_exact(model, oracle, grid, clock_mode=mode)
            assert np.abs(res.terminal.probs - 0.25).max() < 1e-13

    def test_monte_carlo_agreement(self):
        model = Model.rw(3, 1, 3.0)
        mu = DiscreteDistribution.random_full_support(model.space, 5)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(3.0, 40)
        n = 40000
        for mode in (ALGORITHM_LITERAL, SINGLE_CLOCK):
            exact = propagate_exact(model, oracle, grid, clock_mode=mode)
            states = sample_terminal_ensemble(model, oracle, grid, 9, n, clock_mode=mode)
            emp = np.bincount(states, minlength=3) / n
            tv = 0.5 * np.abs(emp - exact.terminal.probs).sum()
            assert tv <= 4.0 * math.sqrt(3.0 / n)

    def test_clock_modes_differ_measurably(self):
        """Coarse grids expose the residual-clock discrepancy between the
        per-interval and per-holding-period exponential semantics."""
        model = Model.rw(3, 1, 4.0)
        mu = DiscreteDistribution.random_full_support(model.space, 11)
        oracle = ScoreOracle(model, mu)
        grid = grid_uniform(4.0, 4)
        lit = propagate_exact(model, oracle, grid, clock_mode=ALGORITHM_LITERAL)
        single = propagate_exact(model, oracle, grid, clock_mode=SINGLE_CLOCK)
        gap = 0.5 * np.abs(lit.terminal.probs - single.terminal.probs).sum()
        assert gap > 1e-3

    def test_history_lengths(self):
        model = Model.rw(3, 1, 1.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        grid = grid_uniform(1.0, 5)
        res = propagate_exact(model, oracle, grid)
        assert len(res.history) == 6
