import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskmarket.model import (
    DIGITAL,
    ConfigError,
    DigitalCapitalSpec,
    DomainError,
    EconomyConfig,
    Mode,
    Occupation,
    OccupationSpec,
    cost_matrix,
    digital_productivity,
    digital_unit_cost,
    effective_productivity,
    executor_rank,
    labor_unit_cost,
    parse_executor,
    productivity_slope,
    skill_composition,
)


def occ(lm, lr, la, w=1.0, kind=Occupation.PROF):
    return OccupationSpec(kind, lm, lr, la, w)


def dc(kbar=1.0, theta=0.0, gamma=2.0, r=2.0):
    return DigitalCapitalSpec(kbar, theta, gamma, r)


class TestSkillComposition:
    def test_raw_at_zero(self):
        s = skill_composition(0.0)
        assert (s.manual, s.routine, s.abstract) == (1.0, 0.0, 0.0)

    def test_raw_midpoint_sums_to_two(self):
        s = skill_composition(0.5)
        assert (s.manual, s.routine, s.abstract) == (0.5, 1.0, 0.5)
        assert s.total == 2.0

    def test_normalized_midpoint(self):
        s = skill_composition(0.5, Mode.NORMALIZED)
        assert (s.manual, s.routine, s.abstract) == (0.25, 0.5, 0.25)

    @pytest.mark.parametrize("z", [-0.01, 1.01, math.nan, math.inf])
    def test_domain(self, z):
        with pytest.raises(DomainError):
            skill_composition(z)

    def test_normalized_sums_to_one_on_fine_grid(self):
        for z in np.linspace(0, 1, 10001):
            assert abs(skill_composition(z, Mode.NORMALIZED).total - 1.0) <= 1e-12

    @given(st.floats(0.0, 1.0))
    def test_raw_components_in_unit_interval(self, z):
        s = skill_composition(z)
        for c in (s.manual, s.routine, s.abstract):
            assert 0.0 <= c <= 1.0
        assert s.total == pytest.approx(1 + 4 * z * (1 - z), abs=1e-15)
        assert 1.0 <= s.total <= 2.0


class TestProductivityAndCosts:
    @pytest.mark.parametrize("z", [0.0, 0.3, 0.77, 1.0])
    def test_linear_identity(self, z):
        assert effective_productivity(occ(1, 0, 1), z) == pytest.approx(1.0, abs=1e-15)

    def test_pure_routine_midpoint(self):
        assert effective_productivity(occ(0, 1, 0), 0.5) == 1.0

    def test_boundary(self):
        assert effective_productivity(occ(2, 0, 1), 0.0) == 2.0

    def test_labor_cost_examples(self):
        assert labor_unit_cost(occ(1, 0, 1), 0.3) == pytest.approx(1.0)
        assert labor_unit_cost(occ(0, 1, 0, w=2.0), 0.5) == 2.0
        assert labor_unit_cost(occ(0, 1, 0), 0.0) == math.inf

    def test_digital_productivity_examples(self):
        assert digital_productivity(dc(1.0, 0.0), 0.7) == 1.0
        assert digital_productivity(dc(1.0, 4.0, 2.0), 0.5) == 2.0
        assert digital_productivity(dc(0.5, 1.0, 1.5), 1.0) == 1.5

    def test_digital_cost_examples(self):
        for z in (0.0, 0.4, 1.0):
            assert digital_unit_cost(dc(1.0, 0.0, 2.0, 2.0), z) == 2.0
        assert digital_unit_cost(dc(1.0, 4.0, 2.0, 2.0), 0.5) == 1.0
        assert digital_unit_cost(dc(1.0, 1.0, 2.0, 1.0), 1.0) == 0.5

    def test_digital_cost_decreasing(self, rng):
        z = np.linspace(0, 1, 2001)
        for _ in range(50):
            d = dc(rng.uniform(0.1, 1), rng.uniform(0.01, 10), rng.uniform(1.01, 3), rng.uniform(0.5, 2))
            c = digital_unit_cost(d, z)
            assert np.all(np.diff(c) < 0)
        flat = digital_unit_cost(dc(0.5, 0.0), z)
        assert np.all(np.diff(flat) == 0)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_cost_times_productivity_is_wage(self, rng, mode):
        z = np.linspace(0, 1, 501)
        for _ in range(30):
            o = occ(*rng.uniform(0, 2, 3), w=rng.uniform(0.5, 2))
            lam = effective_productivity(o, z, mode)
            c = labor_unit_cost(o, z, mode)
            pos = lam > 0
            np.testing.assert_allclose(c[pos] * lam[pos], o.wage, rtol=1e-12)
            assert np.all(np.isinf(c[~pos]))

    @pytest.mark.parametrize("mode", list(Mode))
    def test_slope_matches_central_difference(self, rng, mode):
        h = 1e-6
        for _ in range(30):
            o = occ(*rng.uniform(0, 2, 3))
            for z in rng.uniform(0.01, 0.99, 5):
                fd = (effective_productivity(o, z + h, mode) - effective_productivity(o, z - h, mode)) / (2 * h)
                assert productivity_slope(o, z, mode) == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestValidation:
    def test_zero_capability(self):
        with pytest.raises(ConfigError):
            occ(0, 0, 0)

    @pytest.mark.parametrize("w", [0.0, -1.0, math.nan])
    def test_wage(self, w):
        with pytest.raises(ConfigError):
            occ(1, 0, 0, w=w)

    def test_negative_capability(self):
        with pytest.raises(ConfigError):
            occ(-0.1, 1, 1)

    @pytest.mark.parametrize("kwargs", [dict(kbar=0.0), dict(gamma=1.0), dict(r=0.0), dict(theta=-1.0)])
    def test_digital(self, kwargs):
        with pytest.raises(ConfigError):
            dc(**kwargs)

    def test_duplicate_kinds(self):
        with pytest.raises(ConfigError):
            EconomyConfig((occ(1, 0, 1), occ(1, 1, 1)), dc())

    def test_canonical_order_and_executors(self):
        e = EconomyConfig((occ(1, 0, 1, kind=Occupation.MGMT), occ(1, 0, 1, kind=Occupation.PHYS)), dc())
        assert e.kinds == (Occupation.PHYS, Occupation.MGMT)
        assert e.executors[-1] == DIGITAL
        assert [executor_rank(x) for x in e.executors] == sorted(executor_rank(x) for x in e.executors)

    def test_labels_round_trip(self):
        for k in Occupation:
            assert Occupation.from_label(k.label) is k
            assert parse_executor(k.label) is k
        assert parse_executor("digital") == DIGITAL

    def test_cost_matrix_rows(self):
        e = EconomyConfig((occ(1, 0, 1),), dc(theta=4.0))
        m = cost_matrix(e, [0.0, 0.5, 1.0])
        assert m.shape == (2, 3)
        np.testing.assert_allclose(m[1], [2.0, 1.0, 0.4])
