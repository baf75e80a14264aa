"""Kaczmarz 辅助序列与行作用求解器测试

测试场景：
1. 两原子测度上的辅助序列精确值
2. 单位向量与配对归一化前置条件
3. 对偶配对在 φ = ψ 时退化为经典序列
4. 重建与有效性判定，Cantor 测度上的长横向
5. 行作用求解器的收敛与最小范数性质
"""
from dataclasses import replace

import numpy as np
import pytest

from app.core.errors import (
    DimensionMismatchError,
    NonUnitVectorError,
    PairNormalizationError,
    PreconditionError,
    ZeroRowError,
)
from app.schemas import EffectivenessVerdict
from app.services.hilbert import LinearMap, euclidean_space
from app.services.kaczmarz import (
    ExplicitStream,
    ExponentialStream,
    OrbitStream,
    TransformedStream,
    auxiliary_sequence,
    dual_auxiliary_sequence,
    effectiveness_test,
    partial_reconstruction,
    reconstruction_curve,
    row_action_solve,
    sequential_update,
)
from app.services.measures import MeasureSpec, cantor_iterate, fourier_coefficient, space_of


class TestStreams:
    """向量流测试"""

    def test_explicit_stream_is_cyclic(self):
        s = euclidean_space(2)
        stream = ExplicitStream(np.eye(2), s)
        assert np.allclose(stream.take(5), [[1, 0], [0, 1], [1, 0], [0, 1], [1, 0]])

    def test_explicit_stream_dimension(self):
        with pytest.raises(DimensionMismatchError):
            ExplicitStream(np.eye(3), euclidean_space(2))

    def test_orbit_stream_extends_cache(self):
        s = euclidean_space(2)
        stream = OrbitStream(np.diag([0.5, 2.0]), [1.0, 1.0], s)
        assert np.allclose(stream.take(2), [[1, 1], [0.5, 2.0]])
        assert np.allclose(stream.take(4)[3], [0.125, 8.0])
        assert np.allclose(stream.vector(2).coords, [0.25, 4.0])

    def test_transformed_stream(self, two_atom):
        s = space_of(two_atom)
        base = ExponentialStream(two_atom, s)
        doubled = TransformedStream(LinearMap(2 * np.eye(2), s, s), base)
        assert np.allclose(doubled.take(3), 2 * base.take(3))


class TestAuxiliarySequence:
    """经典辅助序列测试"""

    def test_two_atom_exact(self, two_atom):
        s = space_of(two_atom)
        aux = auxiliary_sequence(ExponentialStream(two_atom, s), 20, s)
        expected = np.zeros((21, 2))
        expected[0] = [1, 1]
        expected[1] = [1, -1]
        assert np.abs(aux.g - expected).max() <= 1e-12

    def test_first_terms(self, three_atom):
        s = space_of(three_atom)
        aux = auxiliary_sequence(ExponentialStream(three_atom, s), 10, s)
        e = ExponentialStream(three_atom, s).take(2)
        assert np.allclose(aux.g[0], e[0])
        # g_1 = e_1 - <e_1, e_0> g_0 and <e_1, e_0> = conj(ν̂(1))
        assert np.allclose(aux.g[1], e[1] - np.conj(fourier_coefficient(three_atom, 1)) * e[0])
        assert aux.recursion_defect() < 1e-10
        assert aux.n_max == 10

    def test_long_horizon_recursion(self):
        mu = cantor_iterate(3)
        s = space_of(mu)
        aux = auxiliary_sequence(ExponentialStream(mu, s), 2000, s)
        assert aux.length == 2001
        assert aux.recursion_defect() <= 1e-10
        assert aux.recursion_defect(block=7) == pytest.approx(aux.recursion_defect(), abs=1e-12)

    def test_recursion_defect_sees_a_corrupted_term(self):
        mu = cantor_iterate(3)
        s = space_of(mu)
        aux = auxiliary_sequence(ExponentialStream(mu, s), 400, s)
        g = aux.g.copy()
        g[300, 0] += 1e-6
        assert replace(aux, g=g).recursion_defect() > 1e-7

    def test_orthonormal_basis_is_its_own_auxiliary(self):
        s = euclidean_space(3)
        aux = auxiliary_sequence(ExplicitStream(np.eye(3), s), 2, s)
        assert np.allclose(aux.g, np.eye(3))

    def test_non_unit_vector(self):
        s = euclidean_space(2)
        with pytest.raises(NonUnitVectorError) as info:
            auxiliary_sequence(ExplicitStream([[1, 0], [0, 2]], s), 1, s)
        assert info.value.index == 1

    def test_non_probability_measure(self):
        m = MeasureSpec.atomic([(0.0, 0.3), (0.5, 0.3)])
        s = space_of(m)
        with pytest.raises(NonUnitVectorError) as info:
            auxiliary_sequence(ExponentialStream(m, s), 3, s)
        assert info.value.index == 0

    def test_space_mismatch(self, two_atom):
        with pytest.raises(DimensionMismatchError):
            auxiliary_sequence(ExponentialStream(two_atom), 3, euclidean_space(3))

    def test_negative_length(self, two_atom):
        s = space_of(two_atom)
        with pytest.raises(PreconditionError):
            auxiliary_sequence(ExponentialStream(two_atom, s), -1, s)


class TestDualAuxiliarySequence:
    """对偶配对辅助序列测试"""

    def test_equal_pair_matches_classic(self, three_atom):
        s = space_of(three_atom)
        e = ExponentialStream(three_atom, s)
        classic = auxiliary_sequence(e, 30, s)
        dual = dual_auxiliary_sequence(e, e, 30, s)
        assert np.allclose(classic.g, dual.g, atol=1e-12)

    def test_pair_normalization(self):
        s = euclidean_space(2)
        phi = ExplicitStream(np.eye(2), s)
        psi = ExplicitStream([[1, 0], [0, 0.5]], s)
        with pytest.raises(PairNormalizationError) as info:
            dual_auxiliary_sequence(phi, psi, 1, s)
        assert info.value.index == 1

    def test_scaled_pair(self, three_atom):
        # (2 e_n, e_n / 2) 满足 <φ_n, ψ_n> = 1
        s = space_of(three_atom)
        e = ExponentialStream(three_atom, s)
        phi = TransformedStream(LinearMap(2 * np.eye(3), s, s), e)
        psi = TransformedStream(LinearMap(0.5 * np.eye(3), s, s), e)
        aux = dual_auxiliary_sequence(phi, psi, 20, s)
        assert aux.recursion_defect() < 1e-10


class TestReconstruction:
    """部分重建测试"""

    def test_two_atom_reconstruction(self, two_atom):
        s = space_of(two_atom)
        e = ExponentialStream(two_atom, s)
        aux = auxiliary_sequence(e, 5, s)
        x = s.vector([0.3 + 0.1j, -1.2])
        assert np.allclose(partial_reconstruction(x, aux, e, 1).coords, x.coords)
        curve = reconstruction_curve(x.coords, aux, aux.phi)
        assert np.allclose(curve[-1], x.coords)

    def test_sequential_update_matches_auxiliary(self, three_atom, rng):
        s = space_of(three_atom)
        e = ExponentialStream(three_atom, s)
        aux = auxiliary_sequence(e, 15, s)
        x = s.vector(rng.standard_normal(3))
        assert np.allclose(sequential_update(x, (e, e), 15).coords, partial_reconstruction(x, aux, e, 15).coords)

    def test_reconstruction_past_length(self, two_atom):
        s = space_of(two_atom)
        e = ExponentialStream(two_atom, s)
        aux = auxiliary_sequence(e, 2, s)
        with pytest.raises(PreconditionError):
            partial_reconstruction(s.vector([1, 0]), aux, e, 3)


class TestEffectiveness:
    """有效性判定测试"""

    def test_two_atom_effective_at_n1(self, two_atom):
        s = space_of(two_atom)
        report = effectiveness_test(ExponentialStream(two_atom, s), s, trials=4, n_max=8, seed=7)
        assert report.verdict is EffectivenessVerdict.EFFECTIVE
        assert report.residual_curve[1][1] <= 1e-12
        assert report.parseval_defect <= 1e-12
        assert report.seed == 7

    def test_cantor_measure(self):
        mu = cantor_iterate(3)
        s = space_of(mu)
        early = effectiveness_test(ExponentialStream(mu, s), s, n_max=500, tol=1e-6)
        # 残差不超过 Σ_{k>n} ‖g_k‖² 的平方根
        assert early.max_residual <= 1.5e-6
        assert early.parseval_defect <= 1e-11
        assert early.verdict is not EffectivenessVerdict.NOT_EFFECTIVE
        late = effectiveness_test(ExponentialStream(mu, s), s, n_max=600, tol=1e-6)
        assert late.verdict is EffectivenessVerdict.EFFECTIVE

    def test_non_spanning_stream_not_effective(self):
        s = euclidean_space(2)
        report = effectiveness_test(ExplicitStream([[1, 0]], s), s, trials=4, n_max=50)
        assert report.verdict is EffectivenessVerdict.NOT_EFFECTIVE
        assert report.max_residual > 1e-3

    def test_report_is_seed_deterministic(self, three_atom):
        s = space_of(three_atom)
        e = ExponentialStream(three_atom, s)
        a = effectiveness_test(e, s, trials=3, n_max=40, seed=11)
        b = effectiveness_test(e, s, trials=3, n_max=40, seed=11)
        assert a == b

    def test_trials_must_be_positive(self, two_atom):
        s = space_of(two_atom)
        with pytest.raises(PreconditionError):
            effectiveness_test(ExponentialStream(two_atom, s), s, trials=0, n_max=4)


class TestRowActionSolve:
    """行作用求解器测试"""

    @staticmethod
    def _system(rng, rows: int, cols: int, condition: float) -> np.ndarray:
        Q1, _ = np.linalg.qr(rng.standard_normal((rows, rows)))
        Q2, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
        k = min(rows, cols)
        sigma = np.zeros((rows, cols))
        sigma[:k, :k] = np.diag(np.geomspace(1.0, condition, k))
        return Q1 @ sigma @ Q2

    def test_square_consistent_systems(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 7))
            A = self._system(rng, n, n, float(rng.uniform(1.0, 5.0)))
            x_true = rng.standard_normal(n)
            result = row_action_solve(A, A @ x_true, sweeps=10000, tol=1e-8)
            assert result.converged
            assert result.residual <= 1e-8
            assert np.allclose(result.x.coords, x_true, atol=1e-6)

    def test_minimum_norm_solution(self, rng):
        A = self._system(rng, 3, 5, 3.0)
        b = A @ rng.standard_normal(5)
        result = row_action_solve(A, b, sweeps=10000, tol=1e-10)
        assert np.allclose(result.x.coords, np.linalg.pinv(A) @ b, atol=1e-6)

    def test_zero_row(self):
        with pytest.raises(ZeroRowError) as info:
            row_action_solve([[1.0, 0.0], [0.0, 0.0]], [1.0, 0.0])
        assert info.value.row == 1

    def test_rhs_length(self):
        with pytest.raises(DimensionMismatchError):
            row_action_solve(np.eye(2), [1.0, 2.0, 3.0])

    def test_not_converged_within_budget(self):
        result = row_action_solve([[1.0, 1.0], [1.0, 2.0]], [1.0, 0.0], sweeps=1, tol=1e-12)
        assert not result.converged
        assert result.iterations == 2
