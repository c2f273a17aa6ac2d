import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from cascade_tuner.calibration import (
    CalibrationModel,
    apply_calibration,
    brier_score,
    fit_calibration,
    transform_raw,
)
from cascade_tuner.errors import DegenerateFitError


class TestTransform:
    def test_lower_clamp(self):
        # p_raw = 0 clamps to eps, giving log(1/(1-eps)) ~ eps
        assert transform_raw(0.0) == pytest.approx(1e-6, rel=1e-3)

    def test_known_values(self):
        assert transform_raw(0.5) == pytest.approx(math.log(2.0), abs=1e-12)
        assert transform_raw(0.9) == pytest.approx(math.log(10.0), rel=1e-12)

    def test_finite_everywhere(self):
        vals = transform_raw(np.array([0.0, 1e-9, 0.5, 1 - 1e-9, 1.0]))
        assert np.all(np.isfinite(vals))

    @given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
    def test_strictly_increasing(self, a, b):
        if a < b:
            assert transform_raw(a) < transform_raw(b)


class TestFit:
    def test_generative_recovery(self):
        """Labels from a known logistic model on f(p_raw); fit recovers it."""
        rng = np.random.default_rng(1)
        p_raw = rng.uniform(0.0, 1.0, 10_000)
        f = transform_raw(p_raw)
        labels = rng.random(10_000) < expit(2.0 * f - 1.0)
        model = fit_calibration(list(zip(p_raw, labels)))
        assert model.intercept == pytest.approx(-1.0, abs=0.15)
        assert model.slope == pytest.approx(2.0, abs=0.15)

    def test_separable_data_stays_finite(self):
        p_raw = np.concatenate([np.linspace(0.0, 0.4, 30), np.linspace(0.6, 1.0, 30)])
        labels = p_raw > 0.5
        model = fit_calibration(list(zip(p_raw, labels)))
        assert math.isfinite(model.intercept)
        assert math.isfinite(model.slope)

    def test_single_class_rejected(self):
        pairs = [(x, True) for x in np.linspace(0.1, 0.9, 20)]
        with pytest.raises(DegenerateFitError):
            fit_calibration(pairs)

    def test_too_few_pairs_rejected(self):
        with pytest.raises(ValueError, match="at least 10"):
            fit_calibration([(0.5, True), (0.4, False)])


class TestApply:
    def test_constant_model(self):
        m = CalibrationModel(intercept=0.0, slope=0.0)
        assert apply_calibration(m, 0.123) == pytest.approx(0.5)

    def test_monotone_for_positive_slope(self):
        m = CalibrationModel(intercept=-0.5, slope=1.7)
        assert apply_calibration(m, 0.2) < apply_calibration(m, 0.8)

    def test_known_value(self):
        m = CalibrationModel(intercept=-1.0, slope=2.0)
        expected = expit(-1.0 + 2.0 * math.log(2.0))
        assert apply_calibration(m, 0.5) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.5955, abs=5e-4)

    def test_output_clamped(self):
        m = CalibrationModel(intercept=50.0, slope=10.0)
        assert apply_calibration(m, 0.99) <= 1.0 - 1e-4
        m = CalibrationModel(intercept=-50.0, slope=10.0)
        assert apply_calibration(m, 0.01) >= 1e-4

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone_property(self, a, b):
        m = CalibrationModel(intercept=0.3, slope=2.5)
        if a <= b:
            assert apply_calibration(m, a) <= apply_calibration(m, b) + 1e-15


class TestBrier:
    def test_calibration_does_not_hurt_brier(self):
        """On miscalibrated training data the fitted model's Brier score
        cannot exceed the raw signal's."""
        rng = np.random.default_rng(9)
        p_raw = rng.uniform(0, 1, 5_000)
        # overconfident raw signal: true probability is pulled toward 0.5
        labels = rng.random(5_000) < (0.25 + 0.5 * p_raw)
        model = fit_calibration(list(zip(p_raw, labels)))
        calibrated = apply_calibration(model, p_raw)
        assert brier_score(calibrated, labels) <= brier_score(p_raw, labels) + 1e-9
