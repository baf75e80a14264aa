"""测度与 L²(μ) 实现测试

测试场景：
1. 测度描述的规范化与校验
2. 总质量与概率测度判定
3. 网格权重只保留支撑上的格子
4. 指数函数的格平均与 Fourier 系数
5. Cantor 迭代、一般位置原子、重新加权
"""
import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import InvalidMeasureError, LevelTooLargeError, NotProbabilityError
from app.services.hilbert import inner
from app.services.measures import (
    MeasureKind,
    MeasureSpec,
    cantor_iterate,
    cell_average_exponentials,
    exp_matrix,
    exp_vector,
    exponential_independence,
    fourier_coefficient,
    fourier_coefficients,
    generic_atomic,
    is_probability,
    require_atomic,
    require_probability,
    reweighted,
    space_of,
    total_mass,
)


class TestMeasureSpec:
    """测度描述测试"""

    def test_atoms_sorted(self):
        m = MeasureSpec.atomic([(0.5, 0.5), (0.1, 0.5)])
        assert m.positions.tolist() == [0.1, 0.5]
        assert m.masses.tolist() == [0.5, 0.5]

    @pytest.mark.parametrize(
        "atoms",
        [
            [(1.0, 0.5)],
            [(-0.1, 0.5)],
            [(0.2, 0.0)],
            [(0.2, float("inf"))],
            [(0.2, 0.5), (0.2, 0.5)],
        ],
    )
    def test_invalid_atoms(self, atoms):
        with pytest.raises(ValidationError):
            MeasureSpec.atomic(atoms)

    def test_invalid_grid(self):
        with pytest.raises(ValidationError):
            MeasureSpec.grid([1.0, -1.0])
        with pytest.raises(ValidationError):
            MeasureSpec.grid([0.0, 0.0])

    def test_mixture_needs_two_components(self):
        with pytest.raises(ValidationError):
            MeasureSpec(kind=MeasureKind.MIXTURE, components=(MeasureSpec.grid([1.0]),))

    def test_document_round_trip(self, three_atom):
        assert MeasureSpec.from_document(three_atom.to_document()) == three_atom


class TestMass:
    """总质量测试"""

    def test_atomic_mass(self, three_atom):
        assert total_mass(three_atom) == pytest.approx(1.0)
        assert is_probability(three_atom)

    def test_grid_mass_is_mean(self):
        assert total_mass(MeasureSpec.grid([1.0, 3.0])) == pytest.approx(2.0)

    def test_mixture_mass(self, two_atom):
        m = MeasureSpec.mixture(two_atom, MeasureSpec.grid([2.0, 0.0]))
        assert total_mass(m) == pytest.approx(2.0)

    def test_require_probability(self):
        with pytest.raises(NotProbabilityError):
            require_probability(MeasureSpec.atomic([(0.0, 0.3), (0.5, 0.3)]))

    def test_require_atomic(self):
        with pytest.raises(InvalidMeasureError):
            require_atomic(MeasureSpec.grid([1.0]))


class TestRealization:
    """L²(μ) 实现测试"""

    def test_atomic_space(self, three_atom):
        s = space_of(three_atom)
        assert s.dim == 3
        assert np.allclose(np.diag(s.metric).real, [0.2, 0.3, 0.5])

    def test_grid_space_restricted_to_support(self):
        s = space_of(MeasureSpec.grid([1.0, 0.0, 2.0, 0.0]))
        assert s.dim == 2
        assert np.allclose(np.diag(s.metric).real, [0.25, 0.5])

    def test_mixture_space_is_block_diagonal(self, two_atom):
        m = MeasureSpec.mixture(two_atom, MeasureSpec.grid([1.0, 1.0]))
        assert space_of(m).dim == 4
        assert exp_matrix(m, [0, 1]).shape == (2, 4)

    def test_exponentials_are_unit_vectors(self, three_atom):
        s = space_of(three_atom)
        rows = exp_matrix(three_atom, range(5))
        norms = np.einsum("ni,ij,nj->n", rows.conj(), s.metric, rows).real
        assert np.allclose(norms, 1.0)


class TestFourier:
    """Fourier 系数测试"""

    def test_cell_averages(self):
        averages = cell_average_exponentials(4, [0, 1, 4])
        assert np.allclose(averages[0], 1.0)
        assert abs(averages[1].sum()) < 1e-12
        assert np.allclose(averages[2], 0.0, atol=1e-12)

    def test_two_atom_coefficients(self, two_atom):
        coefficients = fourier_coefficients(two_atom, [0, 1, 2])
        assert np.allclose(coefficients, [1.0, 0.0, 1.0], atol=1e-12)

    def test_exp_vector_examples(self, two_atom):
        assert np.allclose(exp_vector(two_atom, 0).coords, [1.0, 1.0])
        assert np.allclose(exp_vector(two_atom, 1).coords, [1.0, -1.0])
        m = MeasureSpec.atomic([(0.0, 0.5), (1 / 3, 0.5)])
        assert np.allclose(exp_vector(m, 1).coords, [1.0, np.exp(2j * np.pi / 3)])

    def test_fourier_coefficient_is_inner_product(self, three_atom):
        e3 = exp_vector(three_atom, 3)
        assert inner(exp_vector(three_atom, 0), e3) == pytest.approx(fourier_coefficient(three_atom, 3))

    def test_coefficient_is_conjugate_exponential_sum(self, three_atom):
        expected = np.sum(three_atom.masses * np.exp(-2j * np.pi * 3 * three_atom.positions))
        assert fourier_coefficient(three_atom, 3) == pytest.approx(expected)

    def test_lebesgue_coefficients(self):
        m = MeasureSpec.grid([1.0] * 8)
        assert np.allclose(fourier_coefficients(m, [0, 1, 3]), [1.0, 0.0, 0.0], atol=1e-12)


class TestFamilies:
    """测度族测试"""

    def test_cantor_level_two(self):
        m = cantor_iterate(2)
        assert np.allclose(m.positions, [0.0, 2 / 9, 2 / 3, 8 / 9])
        assert np.allclose(m.masses, 0.25)

    def test_cantor_level_cap(self):
        with pytest.raises(LevelTooLargeError):
            cantor_iterate(13)
        with pytest.raises(LevelTooLargeError):
            cantor_iterate(-1)

    def test_generic_atomic_is_deterministic(self):
        a = generic_atomic(5, seed=1)
        b = generic_atomic(5, seed=1)
        assert a == b
        assert is_probability(a)
        assert len(set(a.positions.tolist())) == 5
        assert exponential_independence(a) > 1e-8

    def test_generic_atomic_without_normalization(self):
        m = generic_atomic(4, seed=3, probability=False)
        assert not is_probability(m)

    def test_reweighted(self, three_atom):
        m = reweighted(three_atom, [2.0, 1.0, 0.5])
        assert np.allclose(m.masses, [0.4, 0.3, 0.25])

    def test_reweighted_rejects_non_positive(self, three_atom):
        with pytest.raises(InvalidMeasureError):
            reweighted(three_atom, [1.0, 0.0, 1.0])
