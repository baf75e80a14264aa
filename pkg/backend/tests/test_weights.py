"""权重实验室测试

测试场景：
1. 权重预设、格值与 CSV 的解析和分辨率变换
2. 弱 A₂ / 经典 A₂ / ε 加强扫描
3. Dirichlet 核下界
4. 部分和算子 R_M 的范数扫描与常数关系
5. 框架界的解析值与测试子空间测量值
6. 诊断面板分类
"""
import math

import numpy as np
import pytest

from app.core.errors import InvalidMeasureError, PreconditionError, ResolutionError, ScenarioError
from app.schemas import Expectation, SweepTrend, SystemClass, Trend
from app.services import weights
from app.services.hilbert import operator_norm
from app.services.weights import Weight, WeightForm


def _step_weight() -> Weight:
    return Weight.from_values([1.0] * 512 + [4.0] * 512, name="step_1_4")


class TestWeightResolution:
    """权重解析测试"""

    def test_unknown_preset(self):
        with pytest.raises(ScenarioError) as info:
            Weight.preset("cubic")
        assert info.value.field == "preset"

    def test_power_cell_averages(self):
        assert np.allclose(Weight.preset("linear_x").resolve(4), [0.125, 0.375, 0.625, 0.875])
        assert np.allclose(Weight.preset("constant").resolve(3), 1.0)
        assert Weight.preset("inv_sqrt_x").resolve(4)[0] == pytest.approx(4.0)

    def test_centered_power_is_integrable_on_every_cell(self):
        values = Weight.preset("sym_inv_sqrt").resolve(4)
        assert np.all(np.isfinite(values))
        # 4·∫_{1/4}^{1/2} (1/2 - x)^(-1/2) dx = 4
        assert values[1] == pytest.approx(4.0)
        assert values[0] == pytest.approx(values[3])

    def test_non_integrable_first_cell(self):
        w = Weight(name="x^-1", form=WeightForm.POWER, exponent=-1.0)
        values = w.resolve(4)
        assert math.isinf(values[0])
        assert np.allclose(values[1:], 4 * np.log([2.0, 1.5, 4.0 / 3.0]))

    def test_indicator_overlaps(self):
        w = Weight.preset("half_indicator")
        assert w.resolve(4).tolist() == [1.0, 1.0, 0.0, 0.0]
        assert np.allclose(w.resolve(3), [1.0, 0.5, 0.0])

    def test_cell_values_refine_and_coarsen(self):
        w = Weight.from_values([1.0, 3.0])
        assert w.resolve(4).tolist() == [1.0, 1.0, 3.0, 3.0]
        assert w.resolve(1).tolist() == [2.0]
        with pytest.raises(ResolutionError):
            w.resolve(3)

    @pytest.mark.parametrize("values", [[], [1.0, -1.0], [0.0, 0.0], [1.0, float("nan")]])
    def test_invalid_values(self, values):
        with pytest.raises(InvalidMeasureError):
            Weight.from_values(values)

    def test_from_csv(self, tmp_path):
        path = tmp_path / "bump.csv"
        path.write_text("# density\n1.0\n\n2.5\n0\n", encoding="utf-8")
        w = Weight.from_csv(path)
        assert w.name == "bump"
        assert w.cells.tolist() == [1.0, 2.5, 0.0]

    def test_from_csv_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0\nabc\n", encoding="utf-8")
        with pytest.raises(ScenarioError) as info:
            Weight.from_csv(bad)
        assert info.value.field == "csv"
        assert "bad.csv:2" in info.value.message
        with pytest.raises(ScenarioError):
            Weight.from_csv(tmp_path / "missing.csv")

    def test_algebra(self):
        linear = Weight.preset("linear_x")
        assert linear.power(2.0).exponent == 2.0
        assert linear.reciprocal().exponent == -1.0
        assert np.allclose(linear.scaled(2.0).resolve(2), [0.5, 1.5])
        with pytest.raises(PreconditionError):
            linear.scaled(-1.0)
        inverse = Weight.from_values([2.0, 0.0, 4.0]).reciprocal()
        assert inverse.cells.tolist() == [0.5, 0.0, 0.25]

    def test_essential_range(self):
        assert Weight.preset("linear_x").essential_range() == (0.0, 1.0)
        assert Weight.preset("inv_sqrt_x").essential_range() == (1.0, math.inf)
        low, high = Weight.preset("sym_inv_sqrt").essential_range()
        assert low == pytest.approx(math.sqrt(2.0))
        assert math.isinf(high)
        assert Weight.from_values([2.0, 0.0, 4.0]).essential_range() == (2.0, 4.0)

    def test_resolve_weight_needs_one_source(self):
        with pytest.raises(ScenarioError):
            weights.resolve_weight()
        with pytest.raises(ScenarioError):
            weights.resolve_weight("constant", [1.0])
        assert weights.resolve_weight(values=[1.0, 2.0]).native_cells == 2


class TestA2Scans:
    """A₂ 扫描测试"""

    def test_constant_weight(self):
        report = weights.weak_a2_constant(Weight.preset("constant"), depth=8)
        assert report.constant == pytest.approx(1.0, abs=1e-12)
        assert report.refinement_trend is Trend.STABLE
        assert report.finite

    def test_half_indicator(self):
        w = Weight.preset("half_indicator")
        weak = weights.weak_a2_constant(w, depth=8)
        classical = weights.a2_constant(w, depth=8)
        assert weak.constant == pytest.approx(1.0, abs=1e-12)
        assert weak.finite
        assert classical.infinite
        assert not classical.finite
        assert classical.refinement_trend is Trend.GROWING

    def test_inverse_square_root_is_stable(self):
        report = weights.weak_a2_constant(Weight.preset("inv_sqrt_x"), depth=12)
        level8, level12 = report.levels[7], report.levels[11]
        assert level8.level == 8 and level12.level == 12
        assert abs(level12.constant - level8.constant) <= 0.01 * level8.constant
        # 1/w 的格平均按闭式计算，[0, h) 上的乘积恰为 4/3
        assert report.constant == pytest.approx(4.0 / 3.0, rel=1e-9)
        assert report.argmax_interval[0] == 0.0
        assert report.refinement_trend is Trend.STABLE

    def test_inverse_square_root_wraps_on_the_circle(self):
        report = weights.weak_a2_constant(Weight.preset("inv_sqrt_x"), depth=10)
        assert report.refinement_trend is Trend.STABLE
        assert report.periodic_trend is Trend.GROWING
        assert not report.periodic_finite
        # 跨过 1 ≡ 0 的区间
        assert report.periodic_argmax[1] > 1.0
        constants = [lv.periodic_constant for lv in report.levels]
        assert np.all(np.diff(constants) > 0.0)

    def test_centered_singularity_is_periodic_a2(self):
        report = weights.weak_a2_constant(Weight.preset("sym_inv_sqrt"), depth=10)
        assert report.finite
        assert report.periodic_finite
        assert report.periodic_constant == pytest.approx(1.5, rel=2e-2)
        assert report.periodic_constant >= report.constant - 1e-12

    def test_periodic_scan_dominates_interval_scan(self):
        for w in (Weight.preset("linear_x"), Weight.preset("half_indicator"), _step_weight()):
            report = weights.weak_a2_constant(w, depth=6)
            assert report.periodic_constant >= report.constant - 1e-12

    @pytest.mark.parametrize(
        "w",
        [Weight.preset("linear_x"), Weight.preset("inv_sqrt_x"), Weight.from_values([1.0, 4.0, 2.0])],
        ids=["linear_x", "inv_sqrt_x", "cells"],
    )
    def test_invariant_under_scaling(self, w):
        base = weights.weak_a2_constant(w, depth=8)
        scaled = weights.weak_a2_constant(w.scaled(3.7), depth=8)
        assert scaled.constant == pytest.approx(base.constant, rel=1e-12)
        assert scaled.periodic_constant == pytest.approx(base.periodic_constant, rel=1e-12)

    @pytest.mark.parametrize(
        "w",
        [Weight.preset("inv_sqrt_x"), Weight.preset("sym_inv_sqrt"), Weight.from_values([1.0, 4.0, 2.0])],
        ids=["inv_sqrt_x", "sym_inv_sqrt", "cells"],
    )
    def test_weak_constant_symmetric_under_reciprocal(self, w):
        forward = weights.weak_a2_constant(w, depth=8)
        backward = weights.weak_a2_constant(w.reciprocal(), depth=8)
        assert backward.constant == pytest.approx(forward.constant, rel=1e-12)
        assert backward.periodic_constant == pytest.approx(forward.periodic_constant, rel=1e-12)

    def test_linear_weight_grows(self):
        report = weights.weak_a2_constant(Weight.preset("linear_x"), depth=10)
        constants = [lv.constant for lv in report.levels]
        increments = np.diff(constants)
        assert np.all(increments >= 0.3)
        assert report.refinement_trend is Trend.GROWING
        # 全区间上的值 ½ Σ_{k<K} 1/(k+½)
        expected = 0.5 * sum(1.0 / (k + 0.5) for k in range(1024))
        assert constants[-1] == pytest.approx(expected, rel=1e-12)

    def test_cell_weight_uses_native_grid(self):
        report = weights.weak_a2_constant(Weight.from_values([1.0, 4.0]))
        assert len(report.levels) == 1
        assert report.constant == pytest.approx(25.0 / 16.0)
        assert report.argmax_interval == (0.0, 1.0)

    def test_zero_cell_breaks_classical_only(self):
        w = Weight.from_values([1.0, 0.0, 1.0, 1.0])
        assert not weights.weak_a2_constant(w).infinite
        assert weights.a2_constant(w).infinite

    def test_eps_check(self):
        report = weights.eps_strengthened_check(Weight.preset("inv_sqrt_x"), 0.5, depth=8)
        assert report.variant == "eps"
        assert report.eps == 0.5
        with pytest.raises(PreconditionError):
            weights.eps_strengthened_check(Weight.preset("constant"), 0.0)

    def test_panel(self):
        panel = weights.a2_panel(Weight.preset("constant"), depth=4, eps_grid=[0.1, 1.0])
        assert [r.eps for r in panel.eps] == [0.1, 1.0]
        assert panel.weak.constant <= panel.classical.constant + 1e-12

    def test_depth_cap(self):
        with pytest.raises(ResolutionError):
            weights.weak_a2_constant(Weight.preset("constant"), depth=20)
        with pytest.raises(PreconditionError):
            weights.weak_a2_constant(Weight.preset("constant"), depth=0)


class TestDirichlet:
    """Dirichlet 核测试"""

    def test_kernel_values(self):
        assert weights.dirichlet_kernel(3, 0.0) == pytest.approx(7.0)
        assert weights.dirichlet_kernel(3, 1.0) == pytest.approx(7.0)
        assert weights.dirichlet_kernel(2, 0.25) == pytest.approx(-1.0)
        assert weights.dirichlet_kernel(2, np.array([0.0, 0.25])).shape == (2,)

    def test_lower_bound_holds(self):
        report = weights.check_dirichlet_bound(64, samples_per_n=1000)
        assert report.passed
        assert report.min_ratio >= 1.0

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            weights.dirichlet_kernel(-1, 0.0)
        with pytest.raises(PreconditionError):
            weights.check_dirichlet_bound(0)


class TestPartialSums:
    """部分和算子测试"""

    def test_lebesgue_norm_is_one(self):
        sweep = weights.rm_norm_sweep(Weight.preset("constant"), [4, 8, 16, 32, 64], cells=1024)
        for _, norm in sweep.points:
            assert norm == pytest.approx(1.0, abs=1e-10)
        assert sweep.trend is SweepTrend.BOUNDED

    def test_inverse_square_root_grows_on_the_circle(self):
        sweep = weights.rm_norm_sweep(Weight.preset("inv_sqrt_x"), [4, 8, 16, 32, 64, 128], cells=4096)
        norms = [v for _, v in sweep.points]
        assert np.all(np.diff(norms) > 0.0)
        assert sweep.trend is SweepTrend.GROWING
        assert 0.1 < sweep.last_octave_slope < 0.35

    def test_step_weight_is_bounded(self):
        sweep = weights.rm_norm_sweep(_step_weight(), [4, 8, 16, 32, 64, 128], cells=4096)
        assert sweep.trend is SweepTrend.BOUNDED
        assert max(v for _, v in sweep.points) <= 2.0

    def test_centered_singularity_grows_slower(self):
        Ms = [8, 16, 32, 64, 128]
        centered = weights.rm_norm_sweep(Weight.preset("sym_inv_sqrt"), Ms, cells=4096)
        corner = weights.rm_norm_sweep(Weight.preset("inv_sqrt_x"), Ms, cells=4096)
        assert centered.last_octave_slope < corner.last_octave_slope

    def test_linear_weight_grows(self):
        sweep = weights.rm_norm_sweep(Weight.preset("linear_x"), [8, 16, 32, 64, 128], cells=4096)
        norms = [v for _, v in sweep.points]
        assert norms[-1] > norms[-2]
        assert sweep.trend is SweepTrend.GROWING

    def test_linear_map_matches_norm(self):
        op = weights.partial_sum_operator(Weight.preset("linear_x"), 4, cells=64)
        assert operator_norm(op.to_linear_map()) == pytest.approx(op.norm(), rel=1e-10)

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            weights.partial_sum_operator(Weight.preset("constant"), 32, cells=64)

    def test_non_integrable_weight(self):
        w = Weight(name="x^-1", form=WeightForm.POWER, exponent=-1.0)
        with pytest.raises(InvalidMeasureError):
            weights.partial_sum_operator(w, 4, cells=64)

    def test_sweep_needs_ascending(self):
        with pytest.raises(PreconditionError):
            weights.rm_norm_sweep(Weight.preset("constant"), [8, 4], cells=64)

    def test_compression_is_identity_on_full_support(self):
        X = weights.coefficient_compression(Weight.preset("constant"), 4, cells=64)
        assert np.allclose(X, np.eye(9), atol=1e-12)
        Y = weights.coefficient_compression(Weight.preset("half_indicator"), 4, cells=64)
        assert not np.allclose(Y, np.eye(9))
        assert Y[0, 0] == pytest.approx(0.5)

    @pytest.mark.parametrize("name", ["constant", "linear_x", "inv_sqrt_x", "half_indicator", "sym_inv_sqrt"])
    def test_constant_relation_on_presets(self, name):
        report = weights.mthm_constant_relation(Weight.preset(name), depth=8, Ms=[4, 8, 16, 32], cells=1024)
        assert report.passed
        assert report.details["factor"] == 256.0

    def test_constant_relation_reports_circle_trend(self):
        constant = weights.mthm_constant_relation(Weight.preset("constant"), depth=8, Ms=[4, 8, 16, 32], cells=1024)
        assert constant.details["periodic_trend"] == "stable"
        assert constant.details["trends_agree"] is True
        corner = weights.mthm_constant_relation(
            Weight.preset("inv_sqrt_x"), depth=8, Ms=[4, 8, 16, 32, 64, 128], cells=4096
        )
        assert corner.details["periodic_trend"] == "growing"
        assert corner.details["rm_trend"] == "growing"
        assert corner.details["trends_agree"] is True
        assert corner.passed


class TestFrameBounds:
    """框架界测试"""

    def test_oracles(self):
        constant = weights.exp_frame_bound_oracle(Weight.preset("constant"), 64)
        assert (constant.lower, constant.upper) == (1.0, 1.0)
        inv_sqrt = weights.exp_frame_bound_oracle(Weight.preset("inv_sqrt_x"), 64)
        assert inv_sqrt.upper_infinite
        assert inv_sqrt.upper == pytest.approx(16.0)
        orbit = weights.orbit_frame_bound_oracle(Weight.preset("linear_x"), 64)
        assert orbit.lower == 1.0
        assert orbit.upper_infinite
        step = weights.orbit_frame_bound_oracle(_step_weight())
        assert (step.lower, step.upper) == (0.25, 1.0)

    def test_measured_step_weight(self):
        w = _step_weight()
        pairs = [weights.exp_frame_bound_measured(w, M, 1024) for M in (32, 64, 128, 256)]
        for earlier, later in zip(pairs, pairs[1:]):
            assert later.lower >= earlier.lower - 1e-12
            assert later.upper >= earlier.upper - 1e-12
        assert pairs[-1].lower == pytest.approx(1.0, rel=0.05)
        assert pairs[-1].upper == pytest.approx(4.0, rel=0.05)
        assert pairs[-1].upper <= 4.0 + 1e-9

    def test_test_cells_must_divide(self):
        with pytest.raises(ResolutionError):
            weights.exp_frame_bound_measured(Weight.preset("constant"), 4, cells=64, test_cells=7)

    def test_bessel_lower_bound(self):
        report = weights.bessel_lower_bound_check(Weight.preset("constant"), 16, cells=256)
        assert report.passed
        assert report.details["min_weight"] == 1.0


class TestDiagnose:
    """诊断面板测试"""

    def test_constant(self):
        report = weights.diagnose(Weight.preset("constant"), depth=4, max_m=16, cells=256)
        assert report.exponential_class is SystemClass.FRAME
        assert report.orbit_class is SystemClass.FRAME
        assert report.dextrodual_expected is Expectation.EXPECTED
        assert report.positive_everywhere
        assert [m for m, _, _ in report.measured] == [1, 2, 4, 8, 16]

    def test_linear(self):
        report = weights.diagnose(Weight.preset("linear_x"), depth=4, max_m=16, cells=256)
        assert report.exponential_class is SystemClass.BESSEL_ONLY
        assert report.orbit_class is SystemClass.LOWER_SEMI_FRAME_ONLY
        assert report.dextrodual_expected is Expectation.EXCLUDED

    def test_half_indicator(self):
        report = weights.diagnose(Weight.preset("half_indicator"), depth=4, max_m=16, cells=256)
        assert report.exponential_class is SystemClass.FRAME
        assert report.dextrodual_expected is Expectation.EXPECTED
        assert not report.positive_everywhere

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            weights.diagnose(Weight.preset("constant"), depth=4, max_m=64, cells=128)

    def test_inverse_square_root(self):
        report = weights.diagnose(Weight.preset("inv_sqrt_x"), depth=8, max_m=16, cells=256)
        assert report.exponential_class is SystemClass.LOWER_SEMI_FRAME_ONLY
        assert report.orbit_class is SystemClass.BESSEL_ONLY
        assert report.weak_a2.finite
        assert not report.weak_a2.periodic_finite
        assert report.dextrodual_expected is Expectation.EXPECTED
        assert any("not on the circle" in note for note in report.notes)
