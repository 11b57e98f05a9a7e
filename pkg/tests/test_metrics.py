import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lapcast import metrics as M
from lapcast.errors import MetricError


class TestMae:
    def test_perfect(self):
        assert M.mae([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_case(self):
        assert M.mae([1, 2], [2, 4]) == pytest.approx(1.5)

    def test_order_invariant(self, rng):
        a = rng.integers(1, 10, 20).astype(float)
        f = a + rng.standard_normal(20)
        perm = rng.permutation(20)
        assert M.mae(a, f) == pytest.approx(M.mae(a[perm], f[perm]))

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            M.mae([], [])


class TestTop1:
    @staticmethod
    def group(actual, predicted):
        return [(a, p, car) for car, (a, p) in enumerate(zip(actual, predicted))]

    def test_identity_forecast(self):
        groups = {("r", lap): self.group([1, 2, 3], [1, 2, 3])
                  for lap in range(4)}
        assert M.top1_accuracy(groups) == 1.0

    def test_swapped_leader(self):
        groups = {("r", lap): self.group([1, 2, 3], [2, 1, 3])
                  for lap in range(3)}
        assert M.top1_accuracy(groups) == 0.0

    def test_three_of_four(self):
        groups = {("r", lap): self.group([1, 2], [1, 2]) for lap in range(3)}
        groups[("r", 99)] = self.group([1, 2], [2, 1])
        assert M.top1_accuracy(groups) == 0.75

    def test_incomplete_group_rejected(self):
        groups = {("r", 1): self.group([1, 2, 3], [1, 2, 3]),
                  ("r", 2): self.group([1, 2], [1, 2])}
        with pytest.raises(MetricError):
            M.top1_accuracy(groups)


class TestRhoRisk:
    def test_exact_quantile_zero_risk(self):
        assert M.rho_risk([5.0], [[5.0] * 10], 0.5) == 0.0

    def test_worked_example_overshoot(self):
        # Z=10, Zhat_0.5=12 -> 2*(12-10)*(1-0.5)/10 = 0.2
        assert M.rho_risk([10.0], [[12.0]], 0.5) == pytest.approx(0.2)

    def test_worked_example_undershoot(self):
        # Z=10, Zhat_0.9=8 -> 2*(8-10)*(0-0.9)/10 = 0.36
        assert M.rho_risk([10.0], [[8.0]], 0.9) == pytest.approx(0.36)

    def test_median_identity_with_absolute_deviation(self, rng):
        # at rho=0.5 with Zhat = sample median: risk = sum|Zhat-Z| / sum Z
        actuals = rng.integers(1, 12, 30).astype(float)
        sample_sets = [np.sort(rng.normal(a, 2.0, 100)) for a in actuals]
        medians = [M.quantile_nearest_rank(s, 0.5) for s in sample_sets]
        lhs = M.rho_risk(actuals, sample_sets, 0.5)
        rhs = np.sum(np.abs(np.array(medians) - actuals)) / np.sum(actuals)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_zero_normalizer_rejected(self):
        with pytest.raises(MetricError):
            M.rho_risk([0.0], [[1.0]], 0.5)

    def test_rho_domain(self):
        from lapcast.errors import DomainError
        with pytest.raises(DomainError):
            M.quantile_nearest_rank([1.0], 1.5)


class TestQuantile:
    def test_nearest_rank_definition(self):
        values = list(range(1, 101))
        assert M.quantile_nearest_rank(values, 0.5) == 50
        assert M.quantile_nearest_rank(values, 0.9) == 90
        assert M.quantile_nearest_rank(values, 0.1) == 10

    def test_small_sets(self):
        assert M.quantile_nearest_rank([3.0], 0.5) == 3.0
        assert M.quantile_nearest_rank([1.0, 2.0], 0.5) == 1.0
        assert M.quantile_nearest_rank([1.0, 2.0], 0.9) == 2.0

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50),
           st.floats(0.01, 0.99))
    @settings(max_examples=60, deadline=None)
    def test_quantile_is_an_order_statistic(self, values, rho):
        q = M.quantile_nearest_rank(values, rho)
        assert q in values


class TestSignAcc:
    def test_same_sign_correct(self):
        assert M.sign_accuracy([-3.0], [-1.0]) == 1.0

    def test_opposite_sign_incorrect(self):
        assert M.sign_accuracy([2.0], [-2.0]) == 0.0

    def test_two_of_three(self):
        assert M.sign_accuracy([-1, 2, 3], [-4, 5, -1]) == pytest.approx(2 / 3)

    def test_zero_actual_needs_exact_zero_prediction(self):
        assert M.sign_accuracy([0.0], [0.0]) == 1.0
        assert M.sign_accuracy([0.1], [0.0]) == 0.0
