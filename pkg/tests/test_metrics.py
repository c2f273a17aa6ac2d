import math

import numpy as np
import pytest

from cascade_tuner.cascade import (
    Architecture,
    CascadeSpec,
    ModelProfile,
    ThresholdVector,
    route_matrix,
)
from cascade_tuner.density import BetaMixture, MarkovJointModel, PairCopula, sample_joint
from cascade_tuner.metrics import (
    AnalyticPerformance,
    analytic_loss,
    analytic_performance,
    loss_gradient,
    _loss_from_array,
)

from conftest import random_model


def mc_routing(model, spec, t, n=10**6, seed=0):
    x = sample_joint(model, n, seed=seed)
    labels = np.random.default_rng(seed + 1).random(x.shape) < x
    return route_matrix(spec, t, x, labels)


class TestAnalyticPerformance:
    def test_single_model_no_abstention(self):
        mix = BetaMixture((1.0,), (5.0,), (1.6,))
        model = MarkovJointModel((mix,), ())
        spec = CascadeSpec((ModelProfile("only", 2.0, 1),))
        perf = analytic_performance(model, spec, ThresholdVector((), (0.0,)))
        assert perf.p_correct == pytest.approx(mix.mean(), abs=1e-12)
        assert perf.p_abstention == 0.0
        assert perf.expected_cost == 2.0

    def test_always_defer_never_abstain(self, model2, spec2):
        t = ThresholdVector((1.0,), (0.0, 0.0))
        perf = analytic_performance(model2, spec2, t)
        assert perf.expected_cost == pytest.approx(11.0, abs=1e-9)
        assert perf.p_abstention <= 1e-12

    def test_partition_identity(self, model3, spec3):
        rng = np.random.default_rng(4)
        for _ in range(20):
            phi = rng.uniform(0.05, 0.95, 2)
            xi = np.array(
                [
                    rng.uniform(0, phi[0] - 1e-3),
                    rng.uniform(0, phi[1] - 1e-3),
                    rng.uniform(0, 0.95),
                ]
            )
            perf = analytic_performance(
                model3, spec3, ThresholdVector(tuple(phi), tuple(xi))
            )
            total = perf.p_correct + perf.p_error_no_abstain + perf.p_abstention
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_k2_against_monte_carlo(self, model2, spec2):
        t = ThresholdVector((0.7,), (0.2, 0.3))
        perf = analytic_performance(model2, spec2, t)
        mc = mc_routing(model2, spec2, t, seed=21)
        n = 10**6
        se_err = math.sqrt(mc.error * (1 - mc.error) / n)
        se_abs = math.sqrt(mc.abstention * (1 - mc.abstention) / n)
        assert perf.p_error_no_abstain == pytest.approx(mc.error, abs=4 * se_err)
        assert perf.p_abstention == pytest.approx(mc.abstention, abs=4 * se_abs)
        assert perf.expected_cost == pytest.approx(mc.cost, rel=0.01)

    def test_k3_against_monte_carlo(self, model3, spec3):
        t = ThresholdVector((0.65, 0.75), (0.15, 0.25, 0.4))
        perf = analytic_performance(model3, spec3, t)
        mc = mc_routing(model3, spec3, t, seed=22)
        n = 10**6
        se_err = math.sqrt(mc.error * (1 - mc.error) / n)
        se_abs = math.sqrt(mc.abstention * (1 - mc.abstention) / n)
        assert perf.p_error_no_abstain == pytest.approx(mc.error, abs=4 * se_err)
        assert perf.p_abstention == pytest.approx(mc.abstention, abs=4 * se_abs)
        assert perf.expected_cost == pytest.approx(mc.cost, rel=0.01)

    def test_zero_abstention_reduction(self, model3, spec3):
        t = ThresholdVector((0.6, 0.7), (0.0, 0.0, 0.0))
        perf = analytic_performance(model3, spec3, t)
        assert perf.p_abstention <= 1e-12

    def test_monotone_cost_in_phi(self, spec2):
        rng = np.random.default_rng(13)
        for trial in range(8):
            model = random_model(rng, 2)
            phi = rng.uniform(0.1, 0.9)
            xi = rng.uniform(0.0, phi - 0.05)
            xi2 = rng.uniform(0.0, 0.9)
            lo = analytic_performance(
                model, spec2, ThresholdVector((phi,), (xi, xi2))
            ).expected_cost
            hi = analytic_performance(
                model, spec2, ThresholdVector((min(phi + 0.05, 0.999),), (xi, xi2))
            ).expected_cost
            assert hi >= lo - 1e-9

    def test_mismatched_k_rejected(self, model3, spec2):
        with pytest.raises(ValueError, match="k="):
            analytic_performance(model3, spec2, ThresholdVector((0.7,), (0.2, 0.3)))

    def test_partition_enforced_in_type(self):
        with pytest.raises(ValueError, match="partition"):
            AnalyticPerformance(0.5, 1.0, 0.4, 0.2)


class TestAnalyticLoss:
    def test_zero_lambdas(self, model2, spec2):
        t = ThresholdVector((0.7,), (0.2, 0.3))
        perf = analytic_performance(model2, spec2, t)
        assert analytic_loss(model2, spec2, t, 0.0, 0.0) == pytest.approx(
            perf.p_error_no_abstain
        )

    def test_single_model_closed_form(self):
        mix = BetaMixture((1.0,), (5.0,), (1.6,))
        model = MarkovJointModel((mix,), ())
        spec = CascadeSpec((ModelProfile("only", 2.0, 1),))
        loss = analytic_loss(model, spec, ThresholdVector((), (0.0,)), 0.05, 0.3)
        assert loss == pytest.approx((1 - mix.mean()) + 0.05 * 2.0, abs=1e-12)

    def test_matches_empirical_loss_mc(self, model2, spec2):
        t = ThresholdVector((0.62,), (0.08, 0.33))
        lc, la = 0.013, 0.4
        analytic = analytic_loss(model2, spec2, t, lc, la)
        mc = mc_routing(model2, spec2, t, seed=30)
        empirical = mc.error + lc * mc.cost + la * mc.abstention
        assert analytic == pytest.approx(empirical, abs=0.01)

    def test_negative_lambda_rejected(self, model2, spec2):
        with pytest.raises(ValueError):
            analytic_loss(model2, spec2, ThresholdVector((0.7,), (0.2, 0.3)), -0.1, 0.0)


class TestLossGradient:
    def test_dimension_k1(self):
        mix = BetaMixture((1.0,), (5.0,), (1.6,))
        model = MarkovJointModel((mix,), ())
        spec = CascadeSpec((ModelProfile("only", 2.0, 1),))
        g = loss_gradient(model, spec, ThresholdVector((), (0.3,)), 0.01, 0.2)
        assert g.shape == (1,)

    @pytest.mark.parametrize("k", [2, 3])
    def test_matches_central_differences(self, k, spec2, spec3):
        spec = spec2 if k == 2 else spec3
        rng = np.random.default_rng(40 + k)
        model = random_model(rng, k)
        lc, la = 0.01, 0.3
        for _ in range(20):
            phi = rng.uniform(0.15, 0.85, k - 1)
            xi = np.concatenate(
                [rng.uniform(0.05, phi - 0.05), [rng.uniform(0.05, 0.9)]]
            )
            t = ThresholdVector(tuple(phi), tuple(xi))
            g = loss_gradient(model, spec, t, lc, la)
            x = t.as_array()
            for j in range(x.size):
                h = 1e-5
                hi, lo = x.copy(), x.copy()
                hi[j] += h
                lo[j] -= h
                fd = (
                    _loss_from_array(model, spec.expected_costs, hi, lc, la)
                    - _loss_from_array(model, spec.expected_costs, lo, lc, la)
                ) / (2 * h)
                if abs(fd) < 1e-3:
                    assert g[j] == pytest.approx(fd, abs=1e-7)
                else:
                    assert g[j] == pytest.approx(fd, rel=1e-4)

    def test_boundary_rejected(self, model2, spec2):
        with pytest.raises(ValueError, match="boundary|stencil"):
            loss_gradient(model2, spec2, ThresholdVector((0.7,), (0.2, 0.0)), 0.01, 0.1)

    def test_abstention_gradient_sign_flips_with_lambda(self, model2, spec2):
        """The final-model abstention component trades error against the
        abstention penalty: its sign must flip as lambda_abs grows."""
        t = ThresholdVector((0.7,), (0.2, 0.4))
        signs = set()
        for la in np.logspace(-3, 1, 12):
            g = loss_gradient(model2, spec2, t, 0.0, float(la))
            signs.add(math.copysign(1.0, g[2]))
        assert signs == {-1.0, 1.0}
