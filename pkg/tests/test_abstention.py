import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_tuner.abstention import (
    AbstentionClassifier,
    cost_savings_estimate,
    fit_abstention_classifier,
    label_abstentions,
    precision_recall,
)
from cascade_tuner.density import BetaMixture, MarkovJointModel, PairCopula, sample_joint
from cascade_tuner.errors import DegenerateFitError


def synthetic_setup(rho, n_train=300, n_test=10_000, rate=0.3, seed=0):
    """Two-model confidences from a Gaussian-copula joint; labels from the
    final model's lower-quantile threshold."""
    model = MarkovJointModel(
        (
            BetaMixture((0.6, 0.4), (2.0, 8.0), (5.0, 2.0)),
            BetaMixture((1.0,), (5.0,), (1.6,)),
        ),
        (PairCopula(rho),),
    )
    x = sample_joint(model, n_train + n_test, seed=seed)
    train, test = x[:n_train], x[n_train:]
    labeling = label_abstentions(train[:, 1], rate)
    clf = fit_abstention_classifier(train[:, :1], labeling)
    test_labels = test[:, 1] < labeling.xi_k
    curve = precision_recall(clf, test[:, :1], test_labels)
    return curve


class TestLabeling:
    def test_exact_order_statistics(self):
        conf = np.arange(0.1, 1.05, 0.1)  # 0.1 .. 1.0
        labeling = label_abstentions(conf, 0.2)
        assert sum(labeling.labels) == 2
        assert labeling.xi_k == pytest.approx(0.3)

    def test_sampled_rate_close_to_target(self):
        rng = np.random.default_rng(1)
        conf = rng.uniform(0, 1, 1000)
        labeling = label_abstentions(conf, 0.3)
        assert 0.29 <= labeling.realized_rate <= 0.31

    @pytest.mark.parametrize("rate", [0.2, 0.3])
    def test_reference_rates(self, rate):
        rng = np.random.default_rng(2)
        conf = rng.beta(5, 1.6, 500)
        labeling = label_abstentions(conf, rate)
        assert labeling.realized_rate == pytest.approx(rate, abs=1 / 500 + 1e-12)

    def test_constant_confidences_rejected(self):
        with pytest.raises(DegenerateFitError):
            label_abstentions(np.full(50, 0.5), 0.2)

    def test_bad_rate_rejected(self):
        with pytest.raises(ValueError):
            label_abstentions(np.linspace(0, 1, 50), 1.5)

    @given(st.integers(25, 400), st.floats(0.05, 0.95))
    def test_realized_rate_within_one_step(self, n, rate):
        rng = np.random.default_rng(n)
        conf = rng.permutation(np.linspace(0.01, 0.99, n))  # distinct values
        labeling = label_abstentions(conf, rate)
        assert labeling.realized_rate <= rate + 1e-12
        assert labeling.realized_rate >= rate - 1.0 / n - 1e-12


class TestClassifier:
    def test_separable_problem(self):
        from cascade_tuner.abstention import AbstentionLabeling

        rng = np.random.default_rng(3)
        conf1 = rng.uniform(0, 1, 400)
        labels = conf1 < 0.3
        labeling = AbstentionLabeling(0.3, 0.3, tuple(bool(b) for b in labels))
        clf = fit_abstention_classifier(conf1[:, None], labeling)
        scores = clf.scores(conf1[:, None])
        # perfect ranking: every positive scores above every negative
        assert scores[labels].min() > scores[~labels].max()

    def test_single_class_rejected(self):
        from cascade_tuner.abstention import AbstentionLabeling

        labeling = AbstentionLabeling(0.2, 0.1, tuple([False] * 40))
        with pytest.raises(DegenerateFitError):
            fit_abstention_classifier(np.linspace(0.1, 0.9, 40)[:, None], labeling)

    def test_correlated_signal_beats_baseline(self):
        curve = synthetic_setup(rho=0.8, seed=4)
        assert curve.precision_at_recall(0.2) >= curve.baseline + 0.15

    def test_uncorrelated_signal_matches_baseline(self):
        curve = synthetic_setup(rho=0.0, seed=5)
        for target in np.linspace(0.1, 1.0, 10):
            assert curve.precision_at_recall(float(target)) == pytest.approx(
                curve.baseline, abs=0.07
            )

    def test_average_precision_monotone_in_rho(self):
        avg_prec = []
        for rho in (0.0, 0.4, 0.8):
            curve = synthetic_setup(rho=rho, seed=6)
            recalls = np.array([p[0] for p in curve.points])
            precisions = np.array([p[1] for p in curve.points])
            # average precision via the step-integral over recall
            drec = np.diff(np.concatenate([[0.0], recalls]))
            avg_prec.append(float(np.sum(precisions * drec)))
        assert avg_prec[0] <= avg_prec[1] <= avg_prec[2]


class TestPrecisionRecall:
    def test_perfect_classifier(self):
        # low-confidence queries score highest: precision 1 at every recall
        # until the positives run out
        clf = AbstentionClassifier(intercept=0.0, coefficients=(-8.0,))
        conf = np.concatenate([np.linspace(0.01, 0.2, 30), np.linspace(0.6, 0.99, 70)])
        labels = conf < 0.5
        curve = precision_recall(clf, conf[:, None], labels)
        for r, p, _ in curve.points:
            if r < 1.0:
                assert p == 1.0

    def test_constant_scores_single_point(self):
        clf = AbstentionClassifier(intercept=0.3, coefficients=(0.0,))
        rng = np.random.default_rng(8)
        conf = rng.uniform(0, 1, 200)
        labels = conf < 0.25
        curve = precision_recall(clf, conf[:, None], labels)
        assert len(curve.points) == 1
        r, p, _ = curve.points[0]
        assert r == 1.0
        assert p == pytest.approx(curve.baseline)

    def test_all_positive_endpoint(self):
        curve = synthetic_setup(rho=0.5, seed=9)
        r, p, _ = curve.points[-1]
        assert r == 1.0
        assert p == pytest.approx(curve.baseline, abs=1e-12)

    def test_recalls_nondecreasing(self):
        curve = synthetic_setup(rho=0.5, seed=10)
        recalls = [r for r, _, _ in curve.points]
        assert recalls == sorted(recalls)

    def test_no_positives_rejected(self):
        clf = AbstentionClassifier(intercept=0.0, coefficients=(1.0,))
        with pytest.raises(ValueError, match="positives"):
            precision_recall(clf, np.linspace(0.1, 0.9, 30)[:, None], np.zeros(30, bool))


class TestCostSavings:
    def test_worked_example(self):
        factor, new_rate = cost_savings_estimate(0.30, 0.20, 0.80, 0.10)
        assert factor == pytest.approx(0.9325, abs=1e-12)
        assert new_rate == pytest.approx(0.315, abs=1e-12)

    def test_zero_recall_changes_nothing(self):
        with pytest.raises(ValueError):
            cost_savings_estimate(0.3, 0.0, 0.8, 0.1)  # recall must be > 0

    def test_tiny_recall_approaches_identity(self):
        factor, new_rate = cost_savings_estimate(0.3, 1e-9, 0.8, 0.1)
        assert factor == pytest.approx(1.0, abs=1e-8)
        assert new_rate == pytest.approx(0.3, abs=1e-8)

    def test_perfect_predictor(self):
        factor, new_rate = cost_savings_estimate(0.3, 1.0, 1.0, 0.1)
        assert factor == pytest.approx(0.73, abs=1e-12)
        assert new_rate == pytest.approx(0.30, abs=1e-12)

    @given(
        st.floats(0.01, 0.99),
        st.floats(0.01, 1.0),
        st.floats(0.01, 1.0),
        st.floats(0.01, 0.99),
    )
    def test_invariants(self, rate, recall, precision, ratio):
        from hypothesis import assume

        assume(rate * recall / precision < 1.0 - 1e-9)
        factor, new_rate = cost_savings_estimate(rate, recall, precision, ratio)
        assert ratio < factor <= 1.0
        assert new_rate >= rate - 1e-12
        if precision < 1.0:
            assert new_rate > rate
        else:
            assert new_rate == pytest.approx(rate, abs=1e-12)

    def test_inconsistent_operating_point_rejected(self):
        with pytest.raises(ValueError, match="exceeds 1"):
            cost_savings_estimate(0.9, 1.0, 0.5, 0.1)
