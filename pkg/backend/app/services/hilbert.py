"""Finite-dimensional complex inner-product spaces with arbitrary metrics.

Every space carries a Hermitian positive-definite metric ``M``; the inner product
is linear in the first argument, ``<u, v> = v^H M u``. All metric computations go
through one Cholesky factor ``M = E^H E`` ("whitening"), which turns adjoints,
norms and eigenproblems into their Euclidean counterparts.

Values are immutable: arrays are copied on construction and frozen.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    NotSelfAdjointError,
    PreconditionError,
)

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SpaceDesc:
    """A space C^dim with inner product <u, v> = v^H metric u."""

    metric: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        metric = np.atleast_2d(np.asarray(self.metric, dtype=complex))
        if metric.ndim != 2 or metric.shape[0] != metric.shape[1]:
            raise DimensionMismatchError(f"metric must be square, got shape {metric.shape}")
        if metric.shape[0] == 0:
            raise DimensionMismatchError("dimension 0 is not supported")

        scale = max(np.linalg.norm(metric), np.finfo(float).tiny)
        if np.linalg.norm(metric - metric.conj().T) > settings.hermitian_tol * scale:
            raise NotSelfAdjointError("metric is not Hermitian")
        metric = 0.5 * (metric + metric.conj().T)

        diagonal = np.diag(metric)
        if np.count_nonzero(metric - np.diag(diagonal)) == 0:
            smallest = float(diagonal.real.min())
        else:
            smallest = float(np.linalg.eigvalsh(metric)[0])
        if smallest <= 0.0:
            raise NotPositiveDefiniteError(smallest, f"metric eigenvalue {smallest:.6e} is not positive")
        object.__setattr__(self, "metric", _frozen(metric))

    @property
    def dim(self) -> int:
        return self.metric.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        """Upper-triangular E with metric = E^H E."""
        if self.is_diagonal:
            return _frozen(np.diag(np.sqrt(np.diag(self.metric).real)))
        return _frozen(scipy.linalg.cholesky(self.metric, lower=False))

    @cached_property
    def factor_inv(self) -> np.ndarray:
        if self.is_diagonal:
            return _frozen(np.diag(1.0 / np.sqrt(np.diag(self.metric).real)))
        return _frozen(scipy.linalg.solve_triangular(self.factor, np.eye(self.dim), lower=False))

    @cached_property
    def is_diagonal(self) -> bool:
        return bool(np.count_nonzero(self.metric - np.diag(np.diag(self.metric))) == 0)

    def same_as(self, other: SpaceDesc) -> bool:
        return self is other or (
            self.dim == other.dim and np.array_equal(self.metric, other.metric)
        )

    def vector(self, coords) -> Vector:
        return Vector(np.asarray(coords, dtype=complex), self)

    def identity(self) -> LinearMap:
        return LinearMap(np.eye(self.dim), self, self)


@dataclass(frozen=True, eq=False)
class Vector:
    coords: np.ndarray
    space: SpaceDesc

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=complex).reshape(-1)
        if coords.shape[0] != self.space.dim:
            raise DimensionMismatchError(
                f"vector has {coords.shape[0]} coordinates, space has dim {self.space.dim}"
            )
        object.__setattr__(self, "coords", _frozen(coords))

    def norm(self) -> float:
        return float(np.sqrt(max(inner(self, self).real, 0.0)))

    def __add__(self, other: Vector) -> Vector:
        _check_same(self.space, other.space)
        return Vector(self.coords + other.coords, self.space)

    def __sub__(self, other: Vector) -> Vector:
        _check_same(self.space, other.space)
        return Vector(self.coords - other.coords, self.space)

    def __mul__(self, scalar: complex) -> Vector:
        return Vector(self.coords * scalar, self.space)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Matrix of a map domain -> codomain in coordinates."""

    matrix: np.ndarray
    domain: SpaceDesc
    codomain: SpaceDesc

    def __post_init__(self) -> None:
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if matrix.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatchError(
                f"matrix shape {matrix.shape} does not match "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        object.__setattr__(self, "matrix", _frozen(matrix))

    @property
    def is_endomorphism(self) -> bool:
        return self.domain.same_as(self.codomain)

    def apply(self, v: Vector) -> Vector:
        _check_same(self.domain, v.space)
        return Vector(self.matrix @ v.coords, self.codomain)

    def __matmul__(self, other: LinearMap) -> LinearMap:
        _check_same(self.domain, other.codomain)
        return LinearMap(self.matrix @ other.matrix, other.domain, self.codomain)

    def __add__(self, other: LinearMap) -> LinearMap:
        _check_same(self.domain, other.domain)
        _check_same(self.codomain, other.codomain)
        return LinearMap(self.matrix + other.matrix, self.domain, self.codomain)

    def __sub__(self, other: LinearMap) -> LinearMap:
        _check_same(self.domain, other.domain)
        _check_same(self.codomain, other.codomain)
        return LinearMap(self.matrix - other.matrix, self.domain, self.codomain)

    def scaled(self, scalar: complex) -> LinearMap:
        return LinearMap(self.matrix * scalar, self.domain, self.codomain)

    def whitened(self) -> np.ndarray:
        """E_cod A E_dom^{-1}: the matrix in metric-orthonormal coordinates."""
        return self.codomain.factor @ self.matrix @ self.domain.factor_inv

    def inverse(self) -> LinearMap:
        return LinearMap(np.linalg.inv(self.matrix), self.codomain, self.domain)


def _check_same(a: SpaceDesc, b: SpaceDesc) -> None:
    if not a.same_as(b):
        raise DimensionMismatchError(f"spaces differ (dim {a.dim} vs dim {b.dim})")


def euclidean_space(dim: int, label: str = "euclidean") -> SpaceDesc:
    return SpaceDesc(np.eye(dim), label)


def diagonal_space(weights, label: str = "") -> SpaceDesc:
    return SpaceDesc(np.diag(np.asarray(weights, dtype=float)), label)


def inner(u: Vector, v: Vector, s: SpaceDesc | None = None) -> complex:
    """<u, v>_s = v^H M u, linear in ``u``.

    Raises:
        DimensionMismatchError: ``u`` or ``v`` does not belong to ``s``.
    """
    space = s or u.space
    _check_same(space, u.space)
    _check_same(space, v.space)
    return complex(np.vdot(v.coords, space.metric @ u.coords))


def cross_gram(a_rows: np.ndarray, b_rows: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """G[n, k] = <a_n, b_k> for coordinate rows ``a_n`` and ``b_k``."""
    return np.asarray(a_rows) @ np.asarray(metric).T @ np.asarray(b_rows).conj().T


def metric_norms(rows: np.ndarray, metric: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(rows)
    values = np.einsum("ni,ij,nj->n", rows.conj(), metric, rows, optimize=True).real
    return np.sqrt(np.maximum(values, 0.0))


def adjoint(A: LinearMap) -> LinearMap:
    """A* = M_dom^{-1} A^H M_cod, so that <Au, v>_cod = <u, A*v>_dom."""
    rhs = A.matrix.conj().T @ A.codomain.metric
    matrix = scipy.linalg.cho_solve((A.domain.factor, False), rhs)
    return LinearMap(matrix, A.codomain, A.domain)


def self_adjoint_defect(A: LinearMap) -> float:
    if not A.is_endomorphism:
        raise DimensionMismatchError("self-adjointness needs domain == codomain")
    W = A.whitened()
    return float(np.linalg.norm(W - W.conj().T) / max(np.linalg.norm(W), np.finfo(float).tiny))


def eig_selfadjoint(A: LinearMap, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a self-adjoint map.

    Returns ascending eigenvalues and the metric-orthonormal eigenvectors as
    columns in original coordinates. Each eigenvector is phased so its first
    non-negligible component is real positive.
    """
    tol = settings.arithmetic_tol if tol is None else tol
    if self_adjoint_defect(A) > max(tol, 1e-8):
        raise NotSelfAdjointError(f"defect {self_adjoint_defect(A):.3e}")
    W = A.whitened()
    values, vectors = np.linalg.eigh(0.5 * (W + W.conj().T))
    vectors = _phase_convention(vectors)
    return values, A.domain.factor_inv @ vectors


def _phase_convention(columns: np.ndarray) -> np.ndarray:
    out = np.array(columns, dtype=complex)
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1.0))
        if idx.size:
            out[:, j] = col * (abs(col[idx[0]]) / col[idx[0]])
    return out


def spd_power(A: LinearMap, power: float) -> LinearMap:
    """A^power for a self-adjoint positive-definite map.

    Raises:
        NotPositiveDefiniteError: smallest eigenvalue is not positive (the value is attached).
    """
    defect = self_adjoint_defect(A)
    if defect > 1e-8:
        raise NotSelfAdjointError(f"defect {defect:.3e}")
    W = A.whitened()
    W = 0.5 * (W + W.conj().T)
    values, Q = np.linalg.eigh(W)
    scale = max(abs(values).max(), np.finfo(float).tiny)
    if values[0] <= settings.arithmetic_tol * scale:
        logger.warning(f"非正定算子: 最小特征值 {values[0]:.6e}")
        raise NotPositiveDefiniteError(float(values[0]))
    whitened = (Q * values**power) @ Q.conj().T
    E, E_inv = A.domain.factor, A.domain.factor_inv
    return LinearMap(E_inv @ whitened @ E, A.domain, A.domain)


def sqrt_spd(A: LinearMap) -> LinearMap:
    return spd_power(A, 0.5)


def renormed_space(s: SpaceDesc, S: LinearMap) -> SpaceDesc:
    """Space with <f, g>' = <S^{-1/2} f, S^{-1/2} g>_s."""
    _check_same(s, S.domain)
    R = spd_power(S, -0.5).matrix
    metric = R.conj().T @ s.metric @ R
    return SpaceDesc(0.5 * (metric + metric.conj().T), label=f"{s.label}'")


def operator_norm(A: LinearMap) -> float:
    """Largest singular value with respect to the metric norms."""
    return float(np.linalg.norm(A.whitened(), 2))


def singular_values(A: LinearMap) -> np.ndarray:
    return np.linalg.svd(A.whitened(), compute_uv=False)


def condition_number(A: LinearMap) -> float:
    sv = singular_values(A)
    if sv[-1] == 0.0:
        return float("inf")
    return float(sv[0] / sv[-1])


def random_unit_vectors(space: SpaceDesc, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` pseudo-random unit vectors of ``space`` as coordinate rows."""
    if count < 1:
        raise PreconditionError("count must be >= 1")
    z = rng.standard_normal((count, space.dim)) + 1j * rng.standard_normal((count, space.dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ space.factor_inv.T
