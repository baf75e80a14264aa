"""Finite Borel measures on [0, 1) and their L²(μ) realizations.

Three kinds are supported:

- ``Atomic``: finitely many point masses; L²(μ) is exactly C^N with the masses as metric.
- ``GridWeight``: a piecewise-constant density on the uniform K-cell partition. Functions
  are identified μ-a.e., so the realization keeps only the cells where the density is
  positive (dim = number of positive cells).
- ``Mixture``: sum of two measures, realized block-diagonally.

Exponentials over grid measures use exact cell averages of e^{2πinx}, so inner products
against piecewise-constant functions are exact integrals.
"""
from __future__ import annotations

import logging
import math
from enum import StrEnum

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.core.errors import InvalidMeasureError, LevelTooLargeError, NotProbabilityError
from app.services.hilbert import SpaceDesc, Vector, diagonal_space

logger = logging.getLogger(__name__)


class MeasureKind(StrEnum):
    ATOMIC = "Atomic"
    GRID = "GridWeight"
    MIXTURE = "Mixture"


class MeasureSpec(BaseModel):
    """Serializable measure description; atoms are kept sorted by position."""

    model_config = ConfigDict(frozen=True)

    kind: MeasureKind
    atoms: tuple[tuple[float, float], ...] = ()
    weight: tuple[float, ...] = ()
    components: tuple[MeasureSpec, ...] = Field(default=())

    @model_validator(mode="before")
    @classmethod
    def _canonical_atoms(cls, data):
        if isinstance(data, dict) and data.get("atoms"):
            data = dict(data)
            data["atoms"] = sorted((float(x), float(p)) for x, p in data["atoms"])
        return data

    @model_validator(mode="after")
    def _check(self) -> MeasureSpec:
        if self.kind is MeasureKind.ATOMIC:
            if not self.atoms:
                raise ValueError("atomic measure needs at least one atom")
            positions = [x for x, _ in self.atoms]
            for x, p in self.atoms:
                if not (0.0 <= x < 1.0):
                    raise ValueError(f"atom position {x!r} outside [0, 1)")
                if not (p > 0.0 and math.isfinite(p)):
                    raise ValueError(f"atom mass {p!r} must be positive and finite")
            if len(set(positions)) != len(positions):
                raise ValueError("atom positions must be pairwise distinct")
        elif self.kind is MeasureKind.GRID:
            if not self.weight:
                raise ValueError("grid weight needs at least one cell")
            if any(not math.isfinite(w) or w < 0.0 for w in self.weight):
                raise ValueError("grid weight values must be finite and >= 0")
            if max(self.weight) <= 0.0:
                raise ValueError("grid weight needs at least one positive value")
        else:
            if len(self.components) != 2:
                raise ValueError("mixture needs exactly two components")
        return self

    # 构造辅助
    @classmethod
    def atomic(cls, atoms) -> MeasureSpec:
        return cls(kind=MeasureKind.ATOMIC, atoms=tuple(tuple(a) for a in atoms))

    @classmethod
    def grid(cls, weight) -> MeasureSpec:
        return cls(kind=MeasureKind.GRID, weight=tuple(float(w) for w in weight))

    @classmethod
    def mixture(cls, first: MeasureSpec, second: MeasureSpec) -> MeasureSpec:
        return cls(kind=MeasureKind.MIXTURE, components=(first, second))

    @property
    def is_atomic(self) -> bool:
        return self.kind is MeasureKind.ATOMIC

    @property
    def positions(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    def to_document(self) -> dict:
        return self.model_dump(mode="json", exclude_defaults=True)

    @classmethod
    def from_document(cls, document: dict) -> MeasureSpec:
        return cls.model_validate(document)


MeasureSpec.model_rebuild()


def total_mass(m: MeasureSpec) -> float:
    if m.kind is MeasureKind.ATOMIC:
        return float(math.fsum(m.masses))
    if m.kind is MeasureKind.GRID:
        return float(math.fsum(m.weight) / len(m.weight))
    return total_mass(m.components[0]) + total_mass(m.components[1])


def is_probability(m: MeasureSpec, tol: float | None = None) -> bool:
    tol = settings.unit_tol if tol is None else tol
    return abs(total_mass(m) - 1.0) <= tol


def require_probability(m: MeasureSpec) -> None:
    if not is_probability(m):
        logger.warning(f"测度总质量 {total_mass(m):.12g} 不是 1")
        raise NotProbabilityError(f"total mass {total_mass(m):.12g} != 1", total_mass=total_mass(m))


def require_atomic(m: MeasureSpec) -> None:
    if not m.is_atomic:
        raise InvalidMeasureError(f"an atomic measure is required, got {m.kind}")


def support_cells(m: MeasureSpec) -> np.ndarray:
    """Indices of the cells with positive density of a grid measure."""
    return np.flatnonzero(np.asarray(m.weight) > 0.0)


def _metric_diagonal(m: MeasureSpec) -> np.ndarray:
    if m.kind is MeasureKind.ATOMIC:
        return m.masses
    if m.kind is MeasureKind.GRID:
        weight = np.asarray(m.weight, dtype=float)
        return weight[support_cells(m)] / weight.size
    return np.concatenate([_metric_diagonal(c) for c in m.components])


def space_of(m: MeasureSpec) -> SpaceDesc:
    """L²(μ) as a diagonal-metric space."""
    return diagonal_space(_metric_diagonal(m), label=f"L2({m.kind})")


def cell_average_exponentials(K: int, frequencies) -> np.ndarray:
    """Rows n, columns k: K·∫_{k/K}^{(k+1)/K} e^{2πinx} dx."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    edges = np.arange(K + 1) / K
    out = np.ones((freqs.size, K), dtype=complex)
    nz = freqs != 0
    if np.any(nz):
        n = freqs[nz][:, None]
        phase = np.exp(2j * np.pi * n * edges[None, :])
        out[nz] = (phase[:, 1:] - phase[:, :-1]) * K / (2j * np.pi * n)
    return out


def exp_matrix(m: MeasureSpec, frequencies) -> np.ndarray:
    """Coordinate rows of e^{2πinx} for every n in ``frequencies``."""
    freqs = np.atleast_1d(np.asarray(frequencies))
    if m.kind is MeasureKind.ATOMIC:
        return np.exp(2j * np.pi * np.outer(freqs, m.positions))
    if m.kind is MeasureKind.GRID:
        return cell_average_exponentials(len(m.weight), freqs)[:, support_cells(m)]
    return np.hstack([exp_matrix(c, freqs) for c in m.components])


def exp_vector(m: MeasureSpec, n: int) -> Vector:
    return Vector(exp_matrix(m, [n])[0], space_of(m))


def ones_vector(m: MeasureSpec) -> Vector:
    return exp_vector(m, 0)


def fourier_coefficients(m: MeasureSpec, frequencies) -> np.ndarray:
    """μ̂(n) = ∫ e^{-2πinx} dμ = <1, e_n> for all n at once."""
    return exp_matrix(m, frequencies).conj() @ _metric_diagonal(m)


def fourier_coefficient(m: MeasureSpec, n: int) -> complex:
    return complex(fourier_coefficients(m, [n])[0])


def cantor_iterate(level: int) -> MeasureSpec:
    """Left endpoints of the level-th middle-thirds construction, equal masses."""
    if level < 0:
        raise LevelTooLargeError("level must be non-negative")
    if level > settings.max_cantor_level:
        raise LevelTooLargeError(
            f"level {level} exceeds {settings.max_cantor_level} (atom cap {2 ** settings.max_cantor_level})",
            level=level,
        )
    points = np.zeros(1)
    for _ in range(level):
        points = np.concatenate([points / 3.0, points / 3.0 + 2.0 / 3.0])
    mass = 2.0 ** (-level)
    return MeasureSpec.atomic([(float(x), mass) for x in points])


def generic_atomic(n_atoms: int, seed: int | None = None, probability: bool = True) -> MeasureSpec:
    """Atoms at frac(k·√2 + shift), k = 1..n, with random positive masses."""
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    shift = rng.uniform(0.0, 1.0)
    positions = np.mod(np.arange(1, n_atoms + 1) * math.sqrt(2.0) + shift, 1.0)
    masses = rng.uniform(0.5, 1.5, size=n_atoms)
    if probability:
        masses = masses / masses.sum()
    return MeasureSpec.atomic(zip(positions.tolist(), masses.tolist()))


def reweighted(m: MeasureSpec, density) -> MeasureSpec:
    """The atomic measure g·μ for a positive function g given on the atoms."""
    require_atomic(m)
    g = np.asarray(density.coords if isinstance(density, Vector) else density)
    if np.any(np.abs(g.imag) > settings.arithmetic_tol) or np.any(g.real <= 0.0):
        raise InvalidMeasureError("reweighting density must be real and positive on every atom")
    return MeasureSpec.atomic(zip(m.positions.tolist(), (m.masses * g.real).tolist()))


def exponential_independence(m: MeasureSpec) -> float:
    """Smallest singular value of e_0..e_{N-1} over an N-atom measure (Vandermonde)."""
    require_atomic(m)
    rows = exp_matrix(m, np.arange(len(m.atoms)))
    return float(scipy.linalg.svdvals(rows)[-1])
