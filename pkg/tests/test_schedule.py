import math

import pytest

from lvunet.schedule import METHODS, ScheduleSpec, slope


class TestEndpoints:
    def test_exact_zero_and_one(self):
        for method in METHODS:
            spec = ScheduleSpec(method, 300)
            assert slope(spec, 0) == 0.0
            assert slope(spec, 300) == 1.0

    def test_midpoint(self):
        spec = ScheduleSpec("cosine", 300)
        assert math.isclose(slope(spec, 150), 1.0 - math.cos(math.pi / 4))
        assert abs(slope(spec, 150) - 0.292893) < 1e-6

    def test_linear_midpoint(self):
        assert slope(ScheduleSpec("linear", 300), 150) == 0.5


class TestProperties:
    def test_monotone_nondecreasing_e300(self):
        for method in METHODS:
            spec = ScheduleSpec(method, 300)
            values = [slope(spec, e) for e in range(301)]
            assert all(b >= a for a, b in zip(values, values[1:]))
            assert all(0.0 <= v <= 1.0 for v in values)

    def test_cosine_below_linear(self):
        cos_spec = ScheduleSpec("cosine", 300)
        lin_spec = ScheduleSpec("linear", 300)
        for e in range(301):
            assert slope(cos_spec, e) <= slope(lin_spec, e) + 1e-12

    def test_e1_degenerate(self):
        for method in METHODS:
            spec = ScheduleSpec(method, 1)
            assert slope(spec, 0) == 0.0
            assert slope(spec, 1) == 1.0


class TestValidation:
    def test_epoch_range(self):
        spec = ScheduleSpec("cosine", 10)
        with pytest.raises(ValueError, match="epoch"):
            slope(spec, -1)
        with pytest.raises(ValueError, match="epoch"):
            slope(spec, 11)

    def test_bad_spec(self):
        with pytest.raises(ValueError, match="method"):
            ScheduleSpec("quadratic", 10)
        with pytest.raises(ValueError, match="total_epochs"):
            ScheduleSpec("cosine", 0)
