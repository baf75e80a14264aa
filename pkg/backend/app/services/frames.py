"""Frame analysis of truncated vector sequences.

Infinite sequences (orbits, auxiliary sequences, cyclic streams) are only ever
classified through a finite horizon plus a tail indicator: the relative change
of the frame bounds between horizon/2 and horizon. Finite explicit lists are
realized completely and carry a zero tail indicator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.core.config import settings
from app.core.errors import NotAFrameError, PreconditionError
from app.schemas import FrameClass, FrameReport
from app.services.hilbert import LinearMap, SpaceDesc, Vector, cross_gram
from app.services.kaczmarz import AuxiliarySequence, ExplicitStream, OrbitStream, VectorStream

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class FrameSequence:
    stream: VectorStream
    space: SpaceDesc
    generator: str
    length: int | None = None

    @property
    def finite(self) -> bool:
        return self.length is not None

    @classmethod
    def explicit(cls, rows, space: SpaceDesc, cyclic: bool = False) -> FrameSequence:
        stream = ExplicitStream(rows, space)
        return cls(stream, space, "explicit", None if cyclic else stream.rows.shape[0])

    @classmethod
    def orbit(cls, operator: np.ndarray, seed, space: SpaceDesc) -> FrameSequence:
        return cls(OrbitStream(operator, seed, space), space, "orbit")

    @classmethod
    def auxiliary(cls, aux: AuxiliarySequence) -> FrameSequence:
        # 辅助序列按已实现的长度截断
        return cls(ExplicitStream(aux.g, aux.space, label=aux.source), aux.space, "auxiliary", aux.length)

    @classmethod
    def from_stream(cls, stream: VectorStream) -> FrameSequence:
        return cls(stream, stream.space, stream.label)

    def realize(self, horizon: int) -> np.ndarray:
        if horizon < 1:
            raise PreconditionError("horizon must be >= 1")
        if self.finite:
            horizon = min(horizon, self.length)
        return self.stream.take(horizon)

    def effective_horizon(self, horizon: int) -> int:
        return min(horizon, self.length) if self.finite else horizon


def frame_operator(fs: FrameSequence, horizon: int) -> LinearMap:
    """S_h f = Σ_{n<h} <f, g_n> g_n, i.e. the matrix Σ g_n g_n^H M."""
    rows = fs.realize(horizon)
    return LinearMap(rows.T @ rows.conj() @ fs.space.metric, fs.space, fs.space)


def _bounds(rows: np.ndarray, space: SpaceDesc) -> tuple[float, float]:
    # eigenvalues of the whitened frame operator are squared singular values of E R^T
    singular = np.linalg.svd(space.factor @ rows.T, compute_uv=False)
    squares = np.sort(singular**2)
    upper = float(squares[-1]) if squares.size else 0.0
    lower = float(squares[0]) if rows.shape[0] >= space.dim else 0.0
    return max(lower, 0.0), upper


def frame_eigenvalues(fs: FrameSequence, horizon: int) -> np.ndarray:
    rows = fs.realize(horizon)
    singular = np.linalg.svd(fs.space.factor @ rows.T, compute_uv=False)
    values = np.zeros(fs.space.dim)
    values[: singular.size] = singular**2
    return np.sort(values)


def _relative_change(new: float, old: float) -> float:
    scale = max(abs(new), np.finfo(float).tiny)
    return abs(new - old) / scale


def classify(
    lower: float,
    upper: float,
    upper_stable: bool,
    count: int | None,
    dim: int,
) -> list[FrameClass]:
    floor = settings.eigen_floor
    tol = settings.parseval_tol
    flags: list[FrameClass] = []
    bessel = upper_stable
    lower_ok = lower > floor
    if bessel:
        flags.append(FrameClass.BESSEL)
    if lower_ok:
        flags.append(FrameClass.LOWER_SEMI_FRAME)
    if bessel and lower_ok:
        flags.append(FrameClass.FRAME)
        if upper - lower <= tol * upper:
            flags.append(FrameClass.TIGHT)
            if abs(lower - 1.0) <= tol and abs(upper - 1.0) <= tol:
                flags.append(FrameClass.PARSEVAL)
        if count is not None and count == dim:
            flags.append(FrameClass.RIESZ_BASIS_FINITE)
    return flags


def frame_bounds(fs: FrameSequence, horizon: int) -> FrameReport:
    """Optimal bounds of the truncated system and its classification.

    Raises:
        PreconditionError: fewer realized vectors than the dimension.
    """
    h = fs.effective_horizon(horizon)
    if h < fs.space.dim:
        raise PreconditionError(f"horizon {h} < dim {fs.space.dim}: bounds are meaningless", horizon=h)
    rows = fs.realize(h)
    lower, upper = _bounds(rows, fs.space)

    if fs.finite:
        tail = 0.0
        upper_stable = True
    else:
        half_lower, half_upper = _bounds(rows[: max(h // 2, 1)], fs.space)
        upper_change = _relative_change(upper, half_upper)
        tail = max(_relative_change(lower, half_lower), upper_change)
        upper_stable = upper_change < settings.stable_rel
    stable = tail < settings.stable_rel

    flags = classify(lower, upper, upper_stable, fs.length, fs.space.dim)
    excess = None
    if fs.finite and FrameClass.LOWER_SEMI_FRAME in flags:
        excess = fs.length - fs.space.dim
    logger.debug(f"框架界: h={h}, A={lower:.6e}, B={upper:.6e}, tail={tail:.3e}")
    return FrameReport(
        horizon=h,
        lower_bound=lower,
        upper_bound=upper,
        tail_indicator=tail,
        stable=stable,
        classification=flags,
        excess=excess,
    )


def stabilized_report(
    fs: FrameSequence,
    start: int | None = None,
    rel: float | None = None,
    max_horizon: int | None = None,
) -> FrameReport:
    """Double the horizon until both bounds move less than ``rel`` across a doubling."""
    rel = settings.stable_rel if rel is None else rel
    max_horizon = settings.max_horizon if max_horizon is None else max_horizon
    horizon = max(start or settings.default_horizon, 2 * fs.space.dim)
    report = frame_bounds(fs, horizon)
    while not fs.finite and report.tail_indicator >= rel and horizon < max_horizon:
        horizon = min(2 * horizon, max_horizon)
        report = frame_bounds(fs, horizon)
        logger.debug(f"横向加倍: h={horizon}, tail={report.tail_indicator:.3e}")
    return report


def bounds_sweep(fs: FrameSequence, horizons) -> list[FrameReport]:
    return [frame_bounds(fs, h) for h in horizons]


def canonical_dual(fs: FrameSequence, horizon: int) -> FrameSequence:
    """{S_h^{-1} g_n} as a finite explicit list.

    Raises:
        NotAFrameError: the smallest eigenvalue of S_h is at or below the eigenvalue floor.
    """
    h = fs.effective_horizon(horizon)
    rows = fs.realize(h)
    lower, _ = _bounds(rows, fs.space) if h >= fs.space.dim else (0.0, 0.0)
    if lower <= settings.eigen_floor:
        logger.warning(f"不是框架: 最小特征值 {lower:.3e}")
        raise NotAFrameError(f"lower frame bound {lower:.3e} <= {settings.eigen_floor}", lower_bound=lower)
    S = rows.T @ rows.conj() @ fs.space.metric
    dual_rows = np.linalg.solve(S, rows.T).T
    return FrameSequence.explicit(dual_rows, fs.space)


def reconstruct(fs: FrameSequence, dual: FrameSequence, f: Vector, horizon: int) -> Vector:
    """Σ_{n<h} <f, dual_n> g_n."""
    rows = fs.realize(horizon)
    dual_rows = dual.realize(horizon)
    coefficients = cross_gram(f.coords[None, :], dual_rows, fs.space.metric)[0]
    return Vector(coefficients @ rows, fs.space)


def excess_finite(vectors, s: SpaceDesc) -> int:
    """#vectors - dim for a finite spanning family (the synthesis kernel dimension).

    Raises:
        NotAFrameError: the family does not span ``s``.
    """
    rows = np.atleast_2d(np.asarray(vectors, dtype=complex))
    singular = np.linalg.svd(s.factor @ rows.T, compute_uv=False)
    rank = int(np.sum(singular > settings.eigen_floor * max(singular.max(initial=0.0), 1.0)))
    if rank < s.dim:
        raise NotAFrameError(f"family spans a {rank}-dimensional subspace of a {s.dim}-dimensional space", rank=rank)
    return rows.shape[0] - s.dim


def gram_matrix(fs: FrameSequence, horizon: int) -> np.ndarray:
    """G[n, k] = <g_n, g_k>."""
    rows = fs.realize(horizon)
    return cross_gram(rows, rows, fs.space.metric)
