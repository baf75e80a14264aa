"""Kaczmarz machinery: auxiliary sequences, reconstructions and the row-action solver.

Classic auxiliary sequence of a unit-vector stream e_n::

    g_n = e_n - Σ_{k<n} <e_n, e_k> g_k

Dual version for a pair (φ_n, ψ_n) with <φ_n, ψ_n> = 1::

    g_n = φ_n - Σ_{k<n} <φ_n, ψ_k> g_k

Both recursions are forward substitution in the unit lower-triangular system
(I + L) G = Φ with L[n, k] = <φ_n, ψ_k> for k < n. L is never formed: the
running map Q_n x = Σ_{k<n} <x, ψ_k> g_k is a dim×dim matrix, so a horizon h costs
O(h·dim²) time and O(h·dim) memory.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from app.core.config import settings
from app.core.errors import (
    DimensionMismatchError,
    NonUnitVectorError,
    PairNormalizationError,
    PreconditionError,
    ZeroRowError,
)
from app.schemas import EffectivenessReport, EffectivenessVerdict
from app.services.hilbert import (
    LinearMap,
    SpaceDesc,
    Vector,
    cross_gram,
    euclidean_space,
    metric_norms,
    random_unit_vectors,
)
from app.services.measures import MeasureSpec, exp_matrix, space_of

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- streams


class VectorStream(ABC):
    """An indexed sequence of vectors of one space, realized on demand."""

    space: SpaceDesc
    label: str = "stream"

    @abstractmethod
    def take(self, count: int) -> np.ndarray:
        """Coordinate rows of the first ``count`` vectors."""

    def vector(self, n: int) -> Vector:
        return Vector(self.take(n + 1)[n], self.space)


class ExplicitStream(VectorStream):
    """A finite list of vectors, repeated cyclically past its end."""

    def __init__(self, rows, space: SpaceDesc, label: str = "explicit") -> None:
        rows = np.atleast_2d(np.asarray(rows, dtype=complex))
        if rows.shape[1] != space.dim:
            raise DimensionMismatchError(f"rows have dim {rows.shape[1]}, space has {space.dim}")
        self.rows = rows
        self.space = space
        self.label = label

    def take(self, count: int) -> np.ndarray:
        return self.rows[np.arange(count) % self.rows.shape[0]]


class ExponentialStream(VectorStream):
    """e_n = e^{2πinx}, n = 0, 1, 2, ... over a measure."""

    def __init__(self, measure: MeasureSpec, space: SpaceDesc | None = None) -> None:
        self.measure = measure
        self.space = space or space_of(measure)
        self.label = "exponentials"

    def take(self, count: int) -> np.ndarray:
        return exp_matrix(self.measure, np.arange(count))


class TransformedStream(VectorStream):
    """A·v_n for a fixed linear map A applied to a base stream."""

    def __init__(self, transform: LinearMap, base: VectorStream, label: str = "transformed") -> None:
        if transform.domain.dim != base.space.dim:
            raise DimensionMismatchError("transform domain does not match the base stream")
        self.transform = transform
        self.base = base
        self.space = transform.codomain
        self.label = label

    def take(self, count: int) -> np.ndarray:
        return self.base.take(count) @ self.transform.matrix.T


class OrbitStream(VectorStream):
    """T^n g_0, n = 0, 1, 2, ..."""

    def __init__(self, operator: np.ndarray, seed: np.ndarray, space: SpaceDesc, label: str = "orbit") -> None:
        self.operator = np.asarray(operator, dtype=complex)
        self.seed = np.asarray(seed, dtype=complex).reshape(-1)
        self.space = space
        self.label = label
        self._cache = self.seed[None, :]

    def take(self, count: int) -> np.ndarray:
        if count > self._cache.shape[0]:
            rows = [*self._cache]
            current = rows[-1]
            # 幂迭代顺序固定，保证结果可复现
            for _ in range(count - len(rows)):
                current = self.operator @ current
                rows.append(current)
            self._cache = np.array(rows)
        return self._cache[:count]


# ------------------------------------------------------- auxiliary sequences


@dataclass(frozen=True, eq=False)
class AuxiliarySequence:
    """Realized g_0..g_{n_max} with the rows they were computed from."""

    g: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    space: SpaceDesc
    source: str

    @property
    def length(self) -> int:
        return self.g.shape[0]

    @property
    def n_max(self) -> int:
        return self.length - 1

    def vector(self, n: int) -> Vector:
        return Vector(self.g[n], self.space)

    def recursion_defect(self, block: int = 256) -> float:
        """max_n ‖g_n - (φ_n - Σ_{k<n} <φ_n, ψ_k> g_k)‖ with the sum written out, ``block`` rows at a time."""
        metric = self.space.metric
        worst = 0.0
        for start in range(0, self.length, block):
            stop = min(start + block, self.length)
            coefficients = cross_gram(self.phi[start:stop], self.psi[:stop], metric)
            rows = np.arange(start, stop)[:, None]
            coefficients[rows <= np.arange(stop)[None, :]] = 0.0
            residual = self.phi[start:stop] - coefficients @ self.g[:stop] - self.g[start:stop]
            worst = max(worst, float(metric_norms(residual, metric).max()))
        return worst


def _check_stream_space(stream: VectorStream, s: SpaceDesc) -> None:
    if not stream.space.same_as(s):
        raise DimensionMismatchError(
            f"stream '{stream.label}' lives in a different space (dim {stream.space.dim} vs {s.dim})"
        )


def _solve_recursion(phi: np.ndarray, psi: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """g_n = (I - Q_n) φ_n, then Q_{n+1} = Q_n + g_n ⊗ ψ_n."""
    g = np.empty_like(phi, dtype=complex)
    projector = np.zeros((phi.shape[1], phi.shape[1]), dtype=complex)
    for n in range(phi.shape[0]):
        g[n] = phi[n] - projector @ phi[n]
        # <x, ψ_n> = ψ_n^H M x
        projector += np.outer(g[n], psi[n].conj() @ metric)
    return g


def auxiliary_sequence(e: VectorStream, n_max: int, s: SpaceDesc) -> AuxiliarySequence:
    """Classic auxiliary sequence g_0..g_{n_max} of a stream of unit vectors.

    Raises:
        NonUnitVectorError: some e_n is not a unit vector (the index is attached).
        DimensionMismatchError: the stream belongs to another space.
    """
    if n_max < 0:
        raise PreconditionError("n_max must be >= 0")
    _check_stream_space(e, s)
    rows = e.take(n_max + 1)
    norms = metric_norms(rows, s.metric)
    bad = np.flatnonzero(np.abs(norms - 1.0) > settings.unit_tol)
    if bad.size:
        logger.warning(f"辅助序列输入向量 {bad[0]} 不是单位向量: ‖e‖={norms[bad[0]]:.12g}")
        raise NonUnitVectorError(int(bad[0]), float(norms[bad[0]]))
    g = _solve_recursion(rows, rows, s.metric)
    return AuxiliarySequence(g=g, phi=rows, psi=rows, space=s, source=e.label)


def dual_auxiliary_sequence(phi: VectorStream, psi: VectorStream, n_max: int, s: SpaceDesc) -> AuxiliarySequence:
    """Auxiliary sequence of a pair with <φ_n, ψ_n> = 1.

    Raises:
        PairNormalizationError: <φ_n, ψ_n> deviates from 1 by more than the unit tolerance.
    """
    if n_max < 0:
        raise PreconditionError("n_max must be >= 0")
    _check_stream_space(phi, s)
    _check_stream_space(psi, s)
    phi_rows = phi.take(n_max + 1)
    psi_rows = psi.take(n_max + 1)
    _check_pair_normalization(phi_rows, psi_rows, s.metric)
    g = _solve_recursion(phi_rows, psi_rows, s.metric)
    return AuxiliarySequence(g=g, phi=phi_rows, psi=psi_rows, space=s, source=f"{phi.label}|{psi.label}")


def _check_pair_normalization(phi_rows: np.ndarray, psi_rows: np.ndarray, metric: np.ndarray) -> None:
    diagonal = np.einsum("ni,ij,nj->n", psi_rows.conj(), metric, phi_rows)
    bad = np.flatnonzero(np.abs(diagonal - 1.0) > settings.unit_tol)
    if bad.size:
        raise PairNormalizationError(int(bad[0]), complex(diagonal[bad[0]]))


def reconstruction_curve(x: np.ndarray, g: AuxiliarySequence, targets: np.ndarray) -> np.ndarray:
    """All partial sums x_n = Σ_{k<=n} <x, g_k> target_k, as rows n = 0..len-1."""
    coefficients = cross_gram(np.atleast_2d(x), g.g, g.space.metric)[0]
    return np.cumsum(coefficients[:, None] * targets[: g.length], axis=0)


def partial_reconstruction(x: Vector, g: AuxiliarySequence, targets: VectorStream, n: int) -> Vector:
    """x_n = Σ_{k<=n} <x, g_k> target_k."""
    if n > g.n_max:
        raise PreconditionError(f"n={n} exceeds the realized length {g.n_max}")
    target_rows = targets.take(n + 1)
    coefficients = cross_gram(x.coords[None, :], g.g[: n + 1], g.space.metric)[0]
    return Vector(coefficients @ target_rows, targets.space)


def sequential_update(x: Vector, pair: tuple[VectorStream, VectorStream], n: int) -> Vector:
    """x_n = x_{n-1} + <x - x_{n-1}, φ_n> ψ_n from x_{-1} = 0."""
    phi, psi = pair
    metric = x.space.metric
    phi_rows = phi.take(n + 1)
    psi_rows = psi.take(n + 1)
    _check_pair_normalization(phi_rows, psi_rows, metric)
    current = np.zeros_like(x.coords)
    for k in range(n + 1):
        step = np.vdot(phi_rows[k], metric @ (x.coords - current))
        current = current + step * psi_rows[k]
    return Vector(current, psi.space)


# ---------------------------------------------------------- effectiveness


def _tail_slope(curve: np.ndarray) -> float | None:
    """Decade slope of log10(residual) over n in [n_max/10, n_max]."""
    n_max = curve.shape[0] - 1
    start = max(n_max // 10, 1)
    if n_max <= start:
        return None
    floor = 1e-300
    rise = math.log10(max(curve[n_max], floor)) - math.log10(max(curve[start], floor))
    run = math.log10(n_max) - math.log10(start)
    return rise / run


def effectiveness_test(
    system: VectorStream | tuple[VectorStream, VectorStream],
    s: SpaceDesc,
    trials: int | None = None,
    n_max: int | None = None,
    tol: float | None = None,
    seed: int | None = None,
) -> EffectivenessReport:
    """Reconstruct seeded random unit vectors and grade the residuals.

    ``system`` is a single stream (classic Kaczmarz) or a pair (φ, ψ). The
    verdict is ``effective_within_tolerance`` iff both the final residual and
    the Parseval defect are within ``tol``; above tolerance, a residual that
    still falls faster than the configured decade slope is ``inconclusive``,
    otherwise ``not_effective``. For a pair the Parseval defect is measured on
    the mixed identity Σ <x, g_k><ψ_k, x> = ‖x‖².
    """
    trials = settings.default_trials if trials is None else trials
    n_max = settings.default_horizon if n_max is None else n_max
    tol = settings.parseval_tol if tol is None else tol
    seed = settings.seed if seed is None else seed
    if trials < 1:
        raise PreconditionError("trials must be >= 1")

    if isinstance(system, tuple):
        phi, psi = system
        aux = dual_auxiliary_sequence(phi, psi, n_max, s)
        targets = psi.take(n_max + 1)
    else:
        aux = auxiliary_sequence(system, n_max, s)
        targets = aux.phi

    rng = np.random.default_rng(seed)
    samples = random_unit_vectors(s, trials, rng)
    coefficients = cross_gram(samples, aux.g, s.metric)
    if isinstance(system, tuple):
        # 对偶对没有 Parseval 性质，用混合恒等式 Σ <x, g_k><ψ_k, x> = ‖x‖²
        energy = np.cumsum(coefficients * cross_gram(targets, samples, s.metric).T, axis=1)
    else:
        energy = np.cumsum(np.abs(coefficients) ** 2, axis=1)
    parseval = np.abs(energy - 1.0).max(axis=0)

    residuals = np.empty(n_max + 1)
    partial = np.zeros_like(samples)
    for k in range(n_max + 1):
        partial += coefficients[:, k : k + 1] * targets[k][None, :]
        residuals[k] = metric_norms(samples - partial, s.metric).max()

    max_residual = float(residuals[-1])
    parseval_defect = float(parseval[-1])
    slope = _tail_slope(residuals)
    if max_residual <= tol and parseval_defect <= tol:
        verdict = EffectivenessVerdict.EFFECTIVE
    elif slope is not None and slope < settings.inconclusive_slope:
        verdict = EffectivenessVerdict.INCONCLUSIVE
    else:
        verdict = EffectivenessVerdict.NOT_EFFECTIVE

    logger.info(
        f"有效性检验: n_max={n_max}, trials={trials}, residual={max_residual:.3e}, "
        f"parseval={parseval_defect:.3e}, verdict={verdict}"
    )
    return EffectivenessReport(
        tested_vectors=trials,
        horizon=n_max,
        seed=seed,
        tol=tol,
        max_residual=max_residual,
        parseval_defect=parseval_defect,
        tail_slope=slope,
        residual_curve=[(n, float(r)) for n, r in enumerate(residuals)],
        parseval_curve=[(n, float(p)) for n, p in enumerate(parseval)],
        verdict=verdict,
    )


# ---------------------------------------------------------- row action


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: Vector
    iterations: int
    residual: float
    converged: bool


def row_action_solve(A, b, sweeps: int = 1000, tol: float = 1e-10) -> SolveResult:
    """Cyclic Kaczmarz projections from x = 0.

    Stops once ‖Ax - b‖ <= tol or after ``sweeps`` full passes; the iterate
    with the smallest residual is returned. Starting from zero keeps every
    iterate in the row space, so consistent systems converge to the
    minimum-norm solution.

    Raises:
        ZeroRowError: a row of A is zero (the row index is attached).
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    b = np.asarray(b.coords if isinstance(b, Vector) else b, dtype=complex).reshape(-1)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatchError(f"rhs has {b.shape[0]} entries, matrix has {A.shape[0]} rows")
    row_norms = np.sum(np.abs(A) ** 2, axis=1)
    zero = np.flatnonzero(row_norms == 0.0)
    if zero.size:
        raise ZeroRowError(int(zero[0]))

    x = np.zeros(A.shape[1], dtype=complex)
    best_x, best_residual = x.copy(), float(np.linalg.norm(b))
    iterations = 0
    for _ in range(sweeps):
        if best_residual <= tol:
            break
        for i in range(A.shape[0]):
            x = x + (b[i] - A[i] @ x) / row_norms[i] * A[i].conj()
            iterations += 1
        residual = float(np.linalg.norm(A @ x - b))
        if residual < best_residual:
            best_x, best_residual = x.copy(), residual

    logger.debug(f"行作用求解: iterations={iterations}, residual={best_residual:.3e}")
    return SolveResult(
        x=Vector(best_x, euclidean_space(A.shape[1])),
        iterations=iterations,
        residual=best_residual,
        converged=best_residual <= tol,
    )
