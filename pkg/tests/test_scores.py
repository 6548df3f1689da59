"""Score oracles: exact values, conditional cross-checks, perturbations,
the entropic loss, backward rates, and evolution-equation residuals."""

import math

import numpy as np
import pytest

from ddmkit.generators import BetaSchedule, Model, rate_matrix
from ddmkit.kernels import DiscreteDistribution
from ddmkit.sampler import grid_uniform, init_distribution
from ddmkit.scores import (
    ScoreError,
    ScoreOracle,
    backward_rates,
    entropic_loss,
    exact_score,
    hjb_residual,
    perturbed_score,
    score_via_conditional,
)
from ddmkit.spaces import Minus, Plus, Unmask, apply_op, decode, encode, op_catalog


def legal_backward_ops(space, x):
    for op in op_catalog(space):
        if space.kind == "masked" and not isinstance(op, Unmask):
            continue
        if apply_op(space, x, op) is not None:
            yield op


class TestExactScore:
    def test_rw_uniform_is_one(self):
        model = Model.rw(3, 2, 2.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        for t in (0.0, 1.0, 2.0):
            for idx in (0, 4, 8):
                x = decode(model.space, idx)
                for op in legal_backward_ops(model.space, x):
                    assert exact_score(oracle, t, x, op) == pytest.approx(1.0, abs=1e-13)

    def test_masked_worked_value(self):
        # uniform two-letter data, unit masking rate: at remaining forward
        # time log 2 the survival factor is 1/2 and the unmask score is
        # (alpha/m) / (1 - alpha) = 0.5
        t_final = 2.0
        model = Model.masked(2, 1, t_final, BetaSchedule.constant(1.0))
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        t = t_final - math.log(2.0)
        mask = model.space.mask_value
        for j in (0, 1):
            assert oracle.score(t, (mask,), Unmask(0, j)) == pytest.approx(0.5, abs=1e-14)

    def test_brw_stationary_is_one(self):
        model = Model.brw(2, 14, 3.0)
        gamma = init_distribution(model)
        oracle = ScoreOracle(model, gamma)
        for t in (0.5, 1.5, 2.5):
            for x in ((0, 0), (1, 2), (3, 1)):
                for op in legal_backward_ops(model.space, x):
                    assert oracle.score(t, x, op) == pytest.approx(1.0, abs=1e-9)

    def test_zero_marginal_raises(self):
        model = Model.masked(2, 1, 1.0, BetaSchedule.constant(1.0))
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        mask = model.space.mask_value
        with pytest.raises(ScoreError):
            oracle.score(1.0, (mask,), Unmask(0, 0))  # forward time 0: no mask mass


class TestConditionalCrossCheck:
    def test_rw_ten_seeds(self):
        model = Model.rw(3, 1, 2.0)
        for seed in range(10):
            mu = DiscreteDistribution.random_full_support(model.space, seed)
            oracle = ScoreOracle(model, mu)
            for t in np.linspace(0.0, 1.9, 10):
                for idx in range(model.space.size):
                    x = decode(model.space, idx)
                    for op in legal_backward_ops(model.space, x):
                        a = exact_score(oracle, float(t), x, op)
                        b = score_via_conditional(oracle, float(t), x, op)
                        assert abs(a - b) <= 1e-12

    def test_uniform_gives_one(self):
        model = Model.rw(4, 1, 1.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        assert score_via_conditional(oracle, 0.5, (1,), Plus(0)) == pytest.approx(1.0, abs=1e-13)

    def test_brw_rate_weighted_form(self):
        model = Model.brw(1, 30, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 3)
        oracle = ScoreOracle(model, mu)
        for t in (0.4, 1.2):
            for x in ((0,), (2,), (7,)):
                for op in legal_backward_ops(model.space, x):
                    a = exact_score(oracle, t, x, op)
                    b = score_via_conditional(oracle, t, x, op)
                    assert abs(a - b) <= 1e-10


class TestDiagonalScore:
    def test_rw_mean_convention(self):
        model = Model.rw(3, 2, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 8)
        oracle = ScoreOracle(model, mu)
        x = (1, 2)
        expected = sum(
            oracle.score(0.7, x, op) for op in op_catalog(model.space)
        ) / (2 * model.space.d)
        assert oracle.diagonal_score(0.7, x) == pytest.approx(expected, abs=1e-14)

    def test_brw_rate_weighted_convention(self):
        model = Model.brw(1, 12, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 8)
        oracle = ScoreOracle(model, mu)
        x = (3,)
        rates = backward_rates(oracle, 0.7, x)
        assert oracle.diagonal_score(0.7, x) == pytest.approx(
            sum(rates.values()) / (1 + 3), abs=1e-14
        )


class TestPerturbation:
    def test_zero_eps_identical(self):
        model = Model.rw(3, 2, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        base = ScoreOracle(model, mu)
        pert = perturbed_score(base, 0.0, seed=9)
        for t in (0.0, 1.0):
            assert np.array_equal(
                np.nan_to_num(base.score_table(t)), np.nan_to_num(pert.score_table(t))
            )

    def test_same_seed_reproducible(self):
        model = Model.brw(1, 10, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        base = ScoreOracle(model, mu)
        p1 = perturbed_score(base, 0.1, seed=4)
        p2 = perturbed_score(base, 0.1, seed=4)
        assert p1.score(0.5, (3,), Plus(0)) == p2.score(0.5, (3,), Plus(0))

    def test_positive_eps_gives_positive_loss(self):
        model = Model.rw(3, 1, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        base = ScoreOracle(model, mu)
        pert = perturbed_score(base, 0.1, seed=4)
        grid = grid_uniform(2.0, 8)
        assert entropic_loss(base, pert, grid) > 0.0

    def test_bounded_noise(self):
        model = Model.rw(3, 1, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        base = ScoreOracle(model, mu)
        eps = 0.3
        pert = perturbed_score(base, eps, seed=11)
        for t in (0.0, 0.7, 1.9):
            ratio = pert.score_table(t) / base.score_table(t)
            ratio = ratio[~np.isnan(ratio)]
            assert (ratio >= math.exp(-eps) - 1e-12).all()
            assert (ratio <= math.exp(eps) + 1e-12).all()


class TestEntropicLoss:
    def test_zero_between_identical(self):
        model = Model.rw(3, 2, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        oracle = ScoreOracle(model, mu)
        assert entropic_loss(oracle, oracle, grid_uniform(2.0, 5)) == 0.0

    def test_uniform_multiplicative_shift(self):
        """A global factor e^delta gives loss 2 d (e^delta - delta - 1) sum(h):
        per jump u_approx * h(u/u_approx) = u (e^delta - delta - 1) and the
        expected total score mass is exactly 2d at every time."""
        model = Model.rw(3, 2, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 1)
        base = ScoreOracle(model, mu)
        delta = 0.15

        class Shifted(ScoreOracle):
            def score_table(self, t):
                return ScoreOracle.score_table(base, t) * math.exp(delta)

        shifted = Shifted(model, mu)
        grid = grid_uniform(2.0, 7)
        expected = (
            2.0 * model.space.d * (math.exp(delta) - delta - 1.0) * grid.steps.sum()
        )
        assert entropic_loss(base, shifted, grid) == pytest.approx(expected, rel=1e-12)

    def test_single_interval(self):
        model = Model.rw(2, 1, 1.5)
        mu = DiscreteDistribution.random_full_support(model.space, 2)
        base = ScoreOracle(model, mu)
        pert = perturbed_score(base, 0.2, seed=3)
        grid = grid_uniform(1.5, 1)
        loss = entropic_loss(base, pert, grid)
        # one-term sum: h_1 times the single expectation
        mu0 = base.marginal(0.0).probs
        ut, ua = base.score_table(0.0), pert.score_table(0.0)
        term = 0.0
        for i in range(ut.shape[0]):
            for s in range(model.space.size):
                if np.isnan(ut[i, s]):
                    continue
                u, a = ut[i, s], ua[i, s]
                term += mu0[s] * (u * math.log(u / a) - u + a)
        assert loss == pytest.approx(1.5 * term, rel=1e-12)


class TestBackwardRates:
    def test_time_reversal_identity(self):
        """mu_{T-t}(x) qbar_t(x,y) equals mu_{T-t}(y) q_{T-t}(y,x) for all
        pairs: direct evaluation against the forward rate matrix."""
        cases = [
            (Model.rw(3, 1, 2.0), 0),
            (Model.masked(2, 2, 2.0, BetaSchedule.constant(1.0)), 1),
            (Model.brw(1, 12, 2.0), 2),
        ]
        for model, seed in cases:
            mu = DiscreteDistribution.random_full_support(model.space, seed)
            oracle = ScoreOracle(model, mu)
            space = model.space
            eta = 0.05 if space.kind == "masked" else 0.0
            for t in np.linspace(0.1, model.t_final - max(eta, 0.1), 5):
                marg = oracle.marginal(float(t)).probs
                q_fwd = rate_matrix(model, model.t_final - float(t))
                worst = 0.0
                for idx in range(space.size):
                    x = decode(space, idx)
                    if marg[idx] == 0:
                        continue
                    for op, rate in backward_rates(oracle, float(t), x).items():
                        y = apply_op(space, x, op)
                        iy = encode(space, y)
                        worst = max(
                            worst, abs(marg[idx] * rate - marg[iy] * q_fwd[iy, idx])
                        )
                assert worst <= 1e-12

    def test_masked_only_unmask_moves(self):
        model = Model.masked(2, 2, 2.0, BetaSchedule.constant(1.0))
        mu = DiscreteDistribution.random_full_support(model.space, 0)
        oracle = ScoreOracle(model, mu)
        mask = model.space.mask_value
        rates = backward_rates(oracle, 0.5, (mask, 0))
        assert rates
        assert all(isinstance(op, Unmask) for op in rates)
        assert all(op.axis == 0 for op in rates)

    def test_brw_stationary_reversibility(self):
        model = Model.brw(1, 15, 2.0)
        gamma = init_distribution(model)
        oracle = ScoreOracle(model, gamma)
        x = (4,)
        rates = backward_rates(oracle, 1.0, x)
        assert rates[Plus(0)] == pytest.approx(1.0, abs=1e-9)
        assert rates[Minus(0)] == pytest.approx(4.0, abs=1e-8)


class TestEvolutionResiduals:
    def test_rw_uniform_zero(self):
        model = Model.rw(3, 1, 2.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        assert abs(hjb_residual(oracle, 1.0, (0,), 1e-3)) < 1e-12

    def test_brw_stationary_zero(self):
        model = Model.brw(1, 25, 2.0)
        oracle = ScoreOracle(model, init_distribution(model))
        assert abs(hjb_residual(oracle, 1.0, (2,), 1e-3)) < 1e-8

    def test_second_order_shrink(self):
        model = Model.rw(3, 1, 2.0)
        mu = DiscreteDistribution.random_full_support(model.space, 6)
        oracle = ScoreOracle(model, mu)
        r1 = abs(hjb_residual(oracle, 0.8, (1,), 2e-3))
        r2 = abs(hjb_residual(oracle, 0.8, (1,), 1e-3))
        assert r1 / r2 == pytest.approx(4.0, abs=0.5)

    def test_masked_score_evolution(self):
        model = Model.masked(2, 2, 2.0, BetaSchedule.constant(1.0))
        mu = DiscreteDistribution.random_full_support(model.space, 6)
        oracle = ScoreOracle(model, mu)
        mask = model.space.mask_value
        x = (mask, 1)
        r1 = abs(hjb_residual(oracle, 1.0, x, 2e-3, op=Unmask(0, 0)))
        r2 = abs(hjb_residual(oracle, 1.0, x, 1e-3, op=Unmask(0, 0)))
        assert r2 < 1e-6
        assert r1 / r2 == pytest.approx(4.0, abs=0.6)

    def test_time_bounds_checked(self):
        model = Model.rw(3, 1, 2.0)
        oracle = ScoreOracle(model, DiscreteDistribution.uniform(model.space))
        with pytest.raises(ValueError):
            hjb_residual(oracle, 0.0, (0,), 1e-3)
        with pytest.raises(ValueError):
            hjb_residual(oracle, 2.0, (0,), 1e-3)
