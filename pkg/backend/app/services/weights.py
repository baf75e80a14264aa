"""Weights on [0, 1): A₂ scans, Dirichlet kernels, partial-sum operators, frame-bound oracles.

A weight is either a closed-form preset (a power |x - c|^a or an interval indicator) or a list
of cell values. Every numerical pass works on a piecewise-constant resolution of the weight
into K uniform cells whose values are exact cell averages, so interval integrals carry no
quadrature error. 1/w gets exact cell averages as well whenever its closed form is integrable
on every cell; otherwise (x^a with a >= 1, cell values) it is the reciprocal of the resolution.

A₂ scans run over two interval families: intervals inside [0, 1), and intervals on the circle
R/Z that may wrap across 1 ≡ 0. Partial sums R_M act on the circle, so their boundedness is
governed by the periodic family.

Divergence is never reported as a sentinel number: scans carry an ``infinite`` flag and a
refinement trend, oracles carry ``*_infinite`` flags next to the largest resolved value.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.errors import InvalidMeasureError, PreconditionError, ResolutionError, ScenarioError
from app.schemas import (
    A2Level,
    A2Panel,
    A2Report,
    BoundPair,
    DiagnoseReport,
    DirichletReport,
    Expectation,
    NormSweep,
    SweepTrend,
    SystemClass,
    Trend,
    VerificationReport,
)
from app.services.hilbert import LinearMap, euclidean_space
from app.services.measures import MeasureSpec, exp_matrix, fourier_coefficients, space_of, support_cells

logger = logging.getLogger(__name__)

# 由证明中 N = ⌊1/(8|I|)⌋ ≥ 1/(16|I|) 推出的充分常数
CONSTANT_RELATION_FACTOR = 256.0


class WeightForm(StrEnum):
    POWER = "power"
    INDICATOR = "indicator"
    CELLS = "cells"


PRESETS: dict[str, dict] = {
    "constant": {"form": WeightForm.POWER, "exponent": 0.0},
    "linear_x": {"form": WeightForm.POWER, "exponent": 1.0},
    "inv_sqrt_x": {"form": WeightForm.POWER, "exponent": -0.5},
    "half_indicator": {"form": WeightForm.INDICATOR, "interval": (0.0, 0.5)},
    "sym_inv_sqrt": {"form": WeightForm.POWER, "exponent": -0.5, "center": 0.5},
}

PRESET_DESCRIPTIONS: dict[str, str] = {
    "constant": "w(x) = 1",
    "linear_x": "w(x) = x",
    "inv_sqrt_x": "w(x) = x^(-1/2)",
    "half_indicator": "w(x) = 1 on [0, 1/2), 0 elsewhere",
    "sym_inv_sqrt": "w(x) = |x - 1/2|^(-1/2)",
}


def _power_cell_averages(exponent: float, cells: int, center: float = 0.0) -> np.ndarray:
    """K·∫_cell |x - c|^a dx for every cell; +inf where the integral diverges.

    Antiderivative sign(x - c)·|x - c|^(a+1)/(a+1), or sign(x - c)·log|x - c| for a = -1.
    """
    if exponent == 0.0:
        return np.ones(cells)
    edges = np.arange(cells + 1, dtype=float) / cells
    offset = edges - center
    with np.errstate(divide="ignore", invalid="ignore"):
        if exponent == -1.0:
            antiderivative = np.sign(offset) * np.log(np.abs(offset))
        else:
            antiderivative = np.sign(offset) * np.abs(offset) ** (exponent + 1.0) / (exponent + 1.0)
        out = cells * np.diff(antiderivative)
    if exponent <= -1.0:
        # 闭包含奇点的格上积分发散
        out[(edges[:-1] <= center) & (edges[1:] >= center)] = np.inf
    return out


def _indicator_cell_averages(interval: tuple[float, float], cells: int) -> np.ndarray:
    lo, hi = interval
    edges = np.arange(cells + 1, dtype=float) / cells
    overlap = (np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo)) * cells
    overlap = np.clip(overlap, 0.0, 1.0)
    # 贴齐格点的边界不应留下舍入残渣
    overlap[overlap < 1e-12] = 0.0
    overlap[np.abs(overlap - 1.0) < 1e-12] = 1.0
    return overlap


@dataclass(frozen=True, eq=False)
class Weight:
    """A non-negative weight on [0, 1), closed-form or given by cell values.

    ``POWER`` is |x - center|^exponent; ``INDICATOR`` is 1 on ``interval``.
    """

    name: str
    form: WeightForm
    exponent: float = 0.0
    center: float = 0.0
    interval: tuple[float, float] = (0.0, 1.0)
    cells: np.ndarray | None = None
    scale: float = 1.0

    @classmethod
    def preset(cls, name: str) -> Weight:
        if name not in PRESETS:
            raise ScenarioError("preset", f"unknown weight preset {name!r}, expected one of {sorted(PRESETS)}")
        return cls(name=name, **PRESETS[name])

    @classmethod
    def from_values(cls, values, name: str = "values") -> Weight:
        array = np.array(values, dtype=float).ravel()
        if array.size == 0:
            raise InvalidMeasureError("weight needs at least one cell")
        if not np.all(np.isfinite(array)) or np.any(array < 0.0):
            raise InvalidMeasureError("weight values must be finite and >= 0")
        if array.max() <= 0.0:
            raise InvalidMeasureError("weight needs at least one positive value")
        array.setflags(write=False)
        return cls(name=name, form=WeightForm.CELLS, cells=array)

    @classmethod
    def from_csv(cls, path: str | Path) -> Weight:
        """One value per line; blank lines and lines starting with ``#`` are skipped."""
        path = Path(path)
        values: list[float] = []
        try:
            with path.open(newline="", encoding="utf-8") as handle:
                for line_no, row in enumerate(csv.reader(handle), start=1):
                    if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                        continue
                    try:
                        values.append(float(row[0]))
                    except ValueError:
                        raise ScenarioError("csv", f"{path.name}:{line_no}: not a number: {row[0]!r}") from None
        except OSError as e:
            raise ScenarioError("csv", f"cannot read {path}: {e}") from e
        return cls.from_values(values, name=path.stem)

    @property
    def closed_form(self) -> bool:
        return self.form is not WeightForm.CELLS

    @property
    def native_cells(self) -> int | None:
        return None if self.cells is None else int(self.cells.size)

    def default_cells(self, fallback: int | None = None) -> int:
        if self.native_cells is not None:
            return self.native_cells
        return fallback or settings.default_cells

    def resolve(self, cells: int | None = None) -> np.ndarray:
        """Exact cell averages on the uniform K-cell partition.

        Raises:
            ResolutionError: cell values cannot be refined or coarsened to ``cells``.
        """
        K = self.default_cells() if cells is None else int(cells)
        if K < 1:
            raise ResolutionError("resolution must be >= 1 cell")
        if self.form is WeightForm.POWER:
            values = _power_cell_averages(self.exponent, K, self.center)
        elif self.form is WeightForm.INDICATOR:
            values = _indicator_cell_averages(self.interval, K)
        else:
            native = self.cells.size
            if K == native:
                values = np.array(self.cells)
            elif K % native == 0:
                values = np.repeat(self.cells, K // native)
            elif native % K == 0:
                values = self.cells.reshape(K, native // K).mean(axis=1)
            else:
                raise ResolutionError(f"{native} cells cannot be resolved to {K}", native=native, cells=K)
        return values * self.scale

    def power(self, p: float) -> Weight:
        """w^p; closed forms stay closed."""
        name = f"{self.name}^{p:g}"
        if self.form is WeightForm.POWER:
            return replace(self, name=name, exponent=self.exponent * p, scale=self.scale**p)
        if self.form is WeightForm.INDICATOR:
            return replace(self, name=name, scale=self.scale**p)
        return Weight.from_values(self.cells**p * self.scale**p, name=name)

    def scaled(self, c: float) -> Weight:
        if c <= 0.0:
            raise PreconditionError("scale factor must be positive")
        return replace(self, name=f"{c:g}*{self.name}", scale=self.scale * c)

    def reciprocal(self) -> Weight:
        """1/w on the support {w > 0}, 0 elsewhere."""
        name = f"1/{self.name}"
        if self.form is WeightForm.POWER:
            return replace(self, name=name, exponent=-self.exponent, scale=1.0 / self.scale)
        if self.form is WeightForm.INDICATOR:
            return replace(self, name=name, scale=1.0 / self.scale)
        values = self.cells * self.scale
        inverse = np.divide(1.0, values, out=np.zeros_like(values), where=values > 0.0)
        return Weight.from_values(inverse, name=name)

    def essential_range(self, cells: int | None = None) -> tuple[float, float]:
        """(ess inf on the support, ess sup); analytic for closed forms, +inf when unbounded."""
        if self.form is WeightForm.POWER:
            farthest = max(self.center, 1.0 - self.center) ** self.exponent * self.scale
            if self.exponent > 0.0:
                return 0.0, farthest
            if self.exponent < 0.0:
                return farthest, math.inf
            return self.scale, self.scale
        if self.form is WeightForm.INDICATOR:
            return self.scale, self.scale
        values = self.resolve(cells)
        positive = values[values > 0.0]
        return float(positive.min()), float(values.max())

    def inverse_averages(self, cells: int, weak: bool) -> np.ndarray:
        """Cell averages of 1/w, with ``weak`` meaning (1/w)·χ_{w>0}.

        Closed forms whose reciprocal is integrable on every cell use the exact
        averages; elsewhere each cell holds the reciprocal of its average. In the
        classical form a cell where w vanishes on positive measure holds +inf.
        """
        if self.form is WeightForm.POWER and self.exponent < 1.0:
            return self.reciprocal().resolve(cells)
        values = self.resolve(cells)
        if self.form is WeightForm.INDICATOR:
            exact = self.reciprocal().resolve(cells)
            return exact if weak else np.where(values == self.scale, exact, np.inf)
        fill = 0.0 if weak else np.inf
        return np.divide(1.0, values, out=np.full(values.size, fill), where=values > 0.0)


def resolve_weight(preset: str | None = None, values=None, csv_path: str | None = None) -> Weight:
    """Exactly one source: a preset name, explicit values, or a CSV path."""
    given = [x is not None for x in (preset, values, csv_path)]
    if sum(given) != 1:
        raise ScenarioError("weight", "exactly one of preset, values, csv is required")
    if preset is not None:
        return Weight.preset(preset)
    if values is not None:
        return Weight.from_values(values)
    return Weight.from_csv(csv_path)


# ----------------------------------------------------------------- Dirichlet


def dirichlet_kernel(M: int, t):
    """D_M(t) = sin(π(2M+1)t) / sin(πt), with the limit 2M+1 at integers."""
    if M < 0:
        raise PreconditionError("M must be >= 0")
    t = np.asarray(t, dtype=float)
    at_integer = np.abs(t - np.round(t)) < 1e-12
    denominator = np.where(at_integer, 1.0, np.sin(np.pi * t))
    value = np.where(at_integer, 2 * M + 1.0, np.sin(np.pi * (2 * M + 1) * t) / denominator)
    return float(value) if value.ndim == 0 else value


def check_dirichlet_bound(n_max: int, samples_per_n: int = 1000) -> DirichletReport:
    """Sample |t| ≤ 1/(8N) for every N ≤ n_max and collect points where D_N(t) < N."""
    if n_max < 1 or samples_per_n < 1:
        raise PreconditionError("n_max and samples_per_n must be >= 1")
    min_ratio = math.inf
    argmin = (1, 0.0)
    violations: list[tuple[int, float]] = []
    for N in range(1, n_max + 1):
        half_width = 1.0 / (8 * N)
        t = np.linspace(-half_width, half_width, samples_per_n)
        ratio = dirichlet_kernel(N, t) / N
        k = int(np.argmin(ratio))
        if ratio[k] < min_ratio:
            min_ratio, argmin = float(ratio[k]), (N, float(t[k]))
        violations.extend((N, float(x)) for x in t[ratio < 1.0])
    if violations:
        logger.warning(f"Dirichlet 下界被违反 {len(violations)} 次, 首个 {violations[0]}")
    logger.info(f"Dirichlet 检查: N<={n_max}, 最小比值 {min_ratio:.6f} @ {argmin}")
    return DirichletReport(
        n_max=n_max,
        samples_per_n=samples_per_n,
        min_ratio=min_ratio,
        argmin=argmin,
        violations=violations,
    )


# -------------------------------------------------------------------- A₂ scans


@dataclass(frozen=True)
class _Scan:
    constant: float
    infinite: bool
    argmax: tuple[float, float]


def _prefix(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    finite = np.isfinite(values)
    sums = np.concatenate([[0.0], np.cumsum(np.where(finite, values, 0.0))])
    infinite_counts = np.concatenate([[0], np.cumsum(~finite)])
    return sums, infinite_counts


def _scan_intervals(
    values: np.ndarray,
    inverse: np.ndarray,
    dyadic_only: bool = False,
    max_length: int | None = None,
    periodic: bool = False,
) -> _Scan:
    """sup over cell-aligned intervals I of avg_I(w)·avg_I(v), v the cell averages of 1/w.

    ``inverse`` carries the variant: zeros off the support for the weak form, +inf
    there for the classical one. With ``periodic`` every start cell is allowed and
    intervals wrap across 1 ≡ 0; the reported right end is then above 1.
    """
    K = values.size
    if periodic:
        values = np.concatenate([values, values])
        inverse = np.concatenate([inverse, inverse])
    w_sum, w_inf = _prefix(values)
    v_sum, v_inf = _prefix(inverse)

    if dyadic_only:
        lengths = []
        length = K
        while length >= 1:
            lengths.append(length)
            if length % 2:
                break
            length //= 2
    else:
        lengths = list(range(1, K + 1))
    if max_length is not None:
        lengths = [n for n in lengths if n <= max_length]
    if not lengths:
        raise PreconditionError("no interval of the requested family fits the resolution", cells=K)

    best, best_interval = -math.inf, (0.0, 1.0)
    infinite, infinite_interval = False, None
    for length in lengths:
        last = K - 1 if periodic and length < K else K - length
        starts = np.arange(0, last + 1, length if dyadic_only else 1)
        ends = starts + length
        sw = w_sum[ends] - w_sum[starts]
        sv = v_sum[ends] - v_sum[starts]
        iw = w_inf[ends] - w_inf[starts]
        iv = v_inf[ends] - v_inf[starts]
        diverges = ((iw > 0) & ((sv > 0) | (iv > 0))) | ((iv > 0) & ((sw > 0) | (iw > 0)))
        if not infinite and np.any(diverges):
            k = int(np.flatnonzero(diverges)[0])
            infinite, infinite_interval = True, (starts[k] / K, ends[k] / K)
        product = np.where(diverges, -math.inf, sw * sv) / float(length) ** 2
        k = int(np.argmax(product))
        if product[k] > best:
            best, best_interval = float(product[k]), (starts[k] / K, ends[k] / K)
    if infinite:
        best_interval = infinite_interval
    return _Scan(constant=max(best, 0.0), infinite=infinite, argmax=best_interval)


def _scan_resolutions(w: Weight, depth: int) -> list[tuple[int, int]]:
    """(level, cells) pairs: 2^1..2^depth for closed forms, the native grid otherwise."""
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    if w.closed_form:
        if 2**depth > settings.max_scan_cells:
            raise ResolutionError(f"depth {depth} exceeds the scan cap of {settings.max_scan_cells} cells")
        return [(level, 2**level) for level in range(1, depth + 1)]
    K = w.native_cells
    if K > settings.max_scan_cells:
        raise ResolutionError(f"{K} cells exceed the scan cap of {settings.max_scan_cells}", cells=K)
    return [(max(K.bit_length() - 1, 0), K)]


def _refinement_trend(constants: list[float], infinite: bool) -> Trend:
    if infinite:
        return Trend.GROWING
    if len(constants) >= 2:
        previous = constants[-2]
        if constants[-1] - previous > settings.a2_stable_rel * max(previous, np.finfo(float).tiny):
            return Trend.GROWING
    return Trend.STABLE


def _a2_report(w: Weight, variant: str, depth: int | None, weak: bool, eps: float = 0.0) -> A2Report:
    depth = settings.default_depth if depth is None else depth
    levels: list[A2Level] = []
    scan = wrapped = None
    for level, cells in _scan_resolutions(w, depth):
        values = w.resolve(cells)
        inverse = w.inverse_averages(cells, weak)
        scan = _scan_intervals(values, inverse)
        wrapped = _scan_intervals(values, inverse, periodic=True)
        levels.append(
            A2Level(
                level=level,
                constant=scan.constant,
                argmax_a=scan.argmax[0],
                argmax_b=scan.argmax[1],
                periodic_constant=wrapped.constant,
            )
        )
        logger.debug(
            f"A2 扫描 {w.name} [{variant}]: level={level}, C={scan.constant:.6g}, "
            f"C_circle={wrapped.constant:.6g}, inf={scan.infinite}"
        )

    trend = _refinement_trend([lv.constant for lv in levels], scan.infinite)
    periodic_trend = _refinement_trend([lv.periodic_constant for lv in levels], wrapped.infinite)
    logger.info(
        f"A2 {variant} {w.name}: C={scan.constant:.6g}, infinite={scan.infinite}, trend={trend}, "
        f"圆周 C={wrapped.constant:.6g}, trend={periodic_trend}"
    )
    return A2Report(
        weight=w.name,
        variant=variant,
        eps=eps,
        constant=scan.constant,
        infinite=scan.infinite,
        scan_depth=depth,
        argmax_interval=scan.argmax,
        refinement_trend=trend,
        levels=levels,
        periodic_constant=wrapped.constant,
        periodic_infinite=wrapped.infinite,
        periodic_argmax=wrapped.argmax,
        periodic_trend=periodic_trend,
    )


def weak_a2_constant(w: Weight, depth: int | None = None) -> A2Report:
    """sup_I avg_I(w)·avg_I((1/w)χ_{w>0}) over all cell-aligned intervals (dyadic ones included)."""
    return _a2_report(w, "weak", depth, weak=True)


def a2_constant(w: Weight, depth: int | None = None) -> A2Report:
    return _a2_report(w, "classical", depth, weak=False)


def eps_strengthened_check(w: Weight, eps: float, depth: int | None = None) -> A2Report:
    """Weak scan of w^{1+eps}."""
    if eps <= 0.0:
        raise PreconditionError("eps must be > 0")
    return _a2_report(w.power(1.0 + eps), "eps", depth, weak=True, eps=eps)


def a2_panel(w: Weight, depth: int | None = None, eps_grid=None) -> A2Panel:
    grid = settings.eps_grid if eps_grid is None else eps_grid
    return A2Panel(
        weak=weak_a2_constant(w, depth),
        classical=a2_constant(w, depth),
        eps=[eps_strengthened_check(w, e, depth) for e in grid],
    )


# ------------------------------------------------------- partial-sum operators


def _finite_grid(w: Weight, cells: int) -> MeasureSpec:
    values = w.resolve(cells)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise InvalidMeasureError(f"{w.name} is not integrable on cell {bad} at resolution {cells}", cell=bad)
    return MeasureSpec.grid(values)


def _check_resolution(cells: int, M: int) -> None:
    if M < 0:
        raise PreconditionError("M must be >= 0")
    if cells < 4 * M:
        raise ResolutionError(f"resolution {cells} < 4·M = {4 * M}", cells=cells, M=M)


def _whitening(gram: np.ndarray) -> np.ndarray:
    """Rows spanning the numerical range of a PSD Gram: ‖E c‖² = c^H G c."""
    values, vectors = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    keep = values > 1e-13 * max(values[-1], np.finfo(float).tiny)
    return np.sqrt(values[keep])[:, None] * vectors[:, keep].conj().T


@dataclass(frozen=True, eq=False)
class PartialSumOperator:
    """R_M f = Σ_{|n|≤M} <f, χ_{w>0} e_n>_Leb e_n on the K-cell grid of the support.

    ``coefficients`` maps grid coordinates to the 2M+1 trigonometric coefficients;
    ``codomain_factor`` whitens those coefficients for the L²(w) norm.
    """

    weight: str
    M: int
    cells: int
    measure: MeasureSpec
    metric_diagonal: np.ndarray
    coefficients: np.ndarray
    gram: np.ndarray
    codomain_factor: np.ndarray = field(repr=False)

    def norm(self) -> float:
        whitened = (self.codomain_factor @ self.coefficients) / np.sqrt(self.metric_diagonal)[None, :]
        return float(np.linalg.norm(whitened, 2))

    def to_linear_map(self) -> LinearMap:
        """The operator as a map from the grid space into whitened coefficient space."""
        matrix = self.codomain_factor @ self.coefficients
        return LinearMap(matrix, space_of(self.measure), euclidean_space(matrix.shape[0], label="trig"))


def partial_sum_operator(w: Weight, M: int, cells: int | None = None) -> PartialSumOperator:
    """
    Raises:
        ResolutionError: fewer than 4·M cells.
        InvalidMeasureError: the weight has a non-integrable cell at this resolution.
    """
    K = w.default_cells(settings.rm_cells) if cells is None else cells
    _check_resolution(K, M)
    measure = _finite_grid(w, K)
    frequencies = np.arange(-M, M + 1)
    # 对 Lebesgue 测度求系数：<f, χ e_n> = Σ_k f_k conj(avg_k e_n) / K
    coefficients = exp_matrix(measure, frequencies).conj() / K
    w_hat = fourier_coefficients(measure, np.arange(0, 2 * M + 1))
    # G[m, n] = ∫ w e_n conj(e_m) = ŵ(m - n)
    gram = scipy.linalg.toeplitz(w_hat, w_hat.conj())
    values = w.resolve(K)
    return PartialSumOperator(
        weight=w.name,
        M=M,
        cells=K,
        measure=measure,
        metric_diagonal=values[support_cells(measure)] / K,
        coefficients=coefficients,
        gram=gram,
        codomain_factor=_whitening(gram),
    )


def coefficient_compression(w: Weight, M: int, cells: int | None = None) -> np.ndarray:
    """R_M restricted to trigonometric polynomials, on coefficients: X[n, m] = χ̂(n - m).

    X is the identity exactly when the support is all of [0, 1), i.e. R_M∘R_M = R_M.
    """
    K = w.default_cells(settings.rm_cells) if cells is None else cells
    _check_resolution(K, M)
    values = w.resolve(K)
    indicator = MeasureSpec.grid((values > 0.0).astype(float))
    chi_hat = fourier_coefficients(indicator, np.arange(0, 2 * M + 1))
    return scipy.linalg.toeplitz(chi_hat, chi_hat.conj())


def _last_octave_slope(points: list[tuple[int, float]]) -> float:
    positive = [(m, v) for m, v in points if m > 0 and v > 0.0]
    if len(positive) < 2:
        return 0.0
    last_m, last_v = positive[-1]
    earlier = [(m, v) for m, v in positive[:-1] if m <= last_m / 2]
    prev_m, prev_v = earlier[-1] if earlier else positive[-2]
    return float(math.log(last_v / prev_v) / math.log(last_m / prev_m))


def rm_norm_sweep(w: Weight, Ms, cells: int | None = None) -> NormSweep:
    """(M, ‖R_M‖_{L²(w)}) over ascending Ms, classified by the log-log slope of the last octave."""
    Ms = [int(m) for m in Ms]
    if not Ms:
        raise PreconditionError("Ms must not be empty")
    if sorted(Ms) != Ms:
        raise PreconditionError("Ms must be ascending")
    K = w.default_cells(settings.rm_cells) if cells is None else cells
    _check_resolution(K, Ms[-1])

    points = []
    for M in Ms:
        norm = partial_sum_operator(w, M, K).norm()
        points.append((M, norm))
        logger.debug(f"R_M 范数 {w.name}: M={M}, ‖R_M‖={norm:.6f}")

    slope = _last_octave_slope(points)
    norms = np.array([v for _, v in points])
    trend = SweepTrend.BOUNDED if slope < settings.rm_slope_tol else SweepTrend.GROWING
    logger.info(f"R_M 扫描 {w.name}: K={K}, 斜率={slope:.4f}, trend={trend}")
    return NormSweep(
        weight=w.name,
        points=points,
        trend=trend,
        last_octave_slope=slope,
        max_min_ratio=float(norms.max() / norms.min()),
    )


def mthm_constant_relation(
    w: Weight,
    depth: int | None = None,
    Ms=None,
    cells: int | None = None,
    sweep: NormSweep | None = None,
) -> VerificationReport:
    """weak A₂ constant over dyadic |I| ≤ 1/8 against 256·(max_M ‖R_M‖)².

    The factor 256 is a derived sufficient constant; a ratio above 1 means the
    inequality failed at this resolution.
    """
    depth = settings.default_depth if depth is None else depth
    Ms = [4, 8, 16, 32, 64, 128] if Ms is None else Ms
    scan_cells = w.native_cells or 2**depth
    scan = _scan_intervals(
        w.resolve(scan_cells), w.inverse_averages(scan_cells, True), dyadic_only=True, max_length=scan_cells // 8
    )
    circle = [
        _scan_intervals(w.resolve(k), w.inverse_averages(k, True), periodic=True)
        for k in ([scan_cells // 2, scan_cells] if w.closed_form and scan_cells > 1 else [scan_cells])
    ]
    periodic_trend = _refinement_trend([s.constant for s in circle], circle[-1].infinite)
    if sweep is None:
        sweep = rm_norm_sweep(w, Ms, cells)
    sup_norm = max(v for _, v in sweep.points)
    bound = CONSTANT_RELATION_FACTOR * sup_norm**2
    ratio = math.inf if scan.infinite else scan.constant / bound
    logger.info(f"常数关系 {w.name}: weak={scan.constant:.6g}, 256·B²={bound:.6g}, ratio={ratio:.3e}")
    return VerificationReport(
        check="constant_relation",
        defects={"constant_ratio": ratio},
        tolerances={"constant_ratio": 1.0},
        details={
            "weight": w.name,
            "weak_dyadic_constant": scan.constant,
            "weak_dyadic_infinite": scan.infinite,
            "argmax_interval": list(scan.argmax),
            "sup_norm": sup_norm,
            "bound": bound,
            "factor": CONSTANT_RELATION_FACTOR,
            "factor_is_derived_sufficient": True,
            "scan_cells": scan_cells,
            "rm_trend": str(sweep.trend),
            "periodic_weak_constant": circle[-1].constant,
            "periodic_trend": str(periodic_trend),
            # 圆周上 A2 有界 ⇔ R_M 一致有界
            "trends_agree": (periodic_trend is Trend.STABLE) == (sweep.trend is SweepTrend.BOUNDED),
        },
    )


# ------------------------------------------------------------ frame bounds


def exp_frame_bound_oracle(w: Weight, cells: int | None = None) -> BoundPair:
    """(ess inf of w on its support, ess sup of w): Σ_n |<f, e_n>_μ|² = ∫|f|² w² dx."""
    K = w.default_cells() if cells is None else cells
    lower, upper = w.essential_range(K)
    upper_infinite = math.isinf(upper)
    if upper_infinite:
        values = w.resolve(K)
        upper = float(values[np.isfinite(values)].max())
    return BoundPair(lower=lower, upper=upper, upper_infinite=upper_infinite, resolution=K)


def orbit_frame_bound_oracle(w: Weight, cells: int | None = None) -> BoundPair:
    """Bounds of the two-sided orbit {e_n / w} in L²(w dx): (1/ess sup w, 1/ess inf w)."""
    K = w.default_cells() if cells is None else cells
    lower, upper = w.essential_range(K)
    orbit_lower = 0.0 if math.isinf(upper) else 1.0 / upper
    upper_infinite = lower <= 0.0
    if upper_infinite:
        values = w.resolve(K)
        orbit_upper = float(1.0 / values[values > 0.0].min())
    else:
        orbit_upper = 1.0 / lower
    return BoundPair(lower=orbit_lower, upper=orbit_upper, upper_infinite=upper_infinite, resolution=K)


def _subspace_bounds(w: Weight, M: int, cells: int | None, test_cells: int | None, orbit: bool) -> BoundPair:
    K = w.default_cells() if cells is None else cells
    sub = settings.test_cells if test_cells is None else test_cells
    _check_resolution(K, M)
    if sub < 1 or K % sub:
        raise ResolutionError(f"{sub} test cells do not divide {K} cells", cells=K, test_cells=sub)
    measure = _finite_grid(w, K)
    support = support_cells(measure)
    metric = w.resolve(K)[support] / K

    # 测试子空间：支撑上按粗格划分的分片常数函数
    coarse = support // (K // sub)
    used = np.unique(coarse)
    basis = (coarse[:, None] == used[None, :]).astype(float)

    rows = exp_matrix(measure, np.arange(-M, M + 1)).conj()
    if orbit:
        # <f, e_n / w>_μ 是 f 在支撑上的 Lebesgue 系数
        analysis = rows @ basis / K
    else:
        analysis = rows @ (metric[:, None] * basis)
    energy = analysis.conj().T @ analysis
    gram = basis.T @ (metric[:, None] * basis)
    values = scipy.linalg.eigh(0.5 * (energy + energy.conj().T), gram, eigvals_only=True)
    return BoundPair(lower=max(float(values[0]), 0.0), upper=float(values[-1]), resolution=K)


def exp_frame_bound_measured(
    w: Weight,
    M: int,
    cells: int | None = None,
    test_cells: int | None = None,
) -> BoundPair:
    """Extreme eigenvalues of Σ_{|n|≤M} e_n⊗e_n on L²(w dx), compressed to the test subspace.

    Both bounds are non-decreasing in M and approach the oracle from below.
    """
    return _subspace_bounds(w, M, cells, test_cells, orbit=False)


def orbit_frame_bound_measured(
    w: Weight,
    M: int,
    cells: int | None = None,
    test_cells: int | None = None,
) -> BoundPair:
    return _subspace_bounds(w, M, cells, test_cells, orbit=True)


def bessel_lower_bound_check(w: Weight, M: int, cells: int | None = None) -> VerificationReport:
    """Compare ess inf w on the support with 1/(3B), B the measured Bessel bound of {e_n / w}."""
    K = w.default_cells() if cells is None else cells
    measured = orbit_frame_bound_measured(w, M, K)
    values = w.resolve(K)
    g_min = float(values[values > 0.0].min())
    ratio = 1.0 / (3.0 * measured.upper * g_min)
    return VerificationReport(
        check="bessel_lower_bound",
        defects={"threshold_ratio": ratio},
        tolerances={"threshold_ratio": 1.0},
        details={"bessel_bound": measured.upper, "min_weight": g_min, "threshold": 1.0 / (3.0 * measured.upper), "M": M},
    )


# ----------------------------------------------------------------- diagnose


def _system_class(bessel: bool, lower: bool) -> SystemClass:
    if bessel and lower:
        return SystemClass.FRAME
    if bessel:
        return SystemClass.BESSEL_ONLY
    if lower:
        return SystemClass.LOWER_SEMI_FRAME_ONLY
    return SystemClass.NEITHER


def _doubling(max_m: int) -> list[int]:
    ms = [1]
    while ms[-1] * 2 <= max_m:
        ms.append(ms[-1] * 2)
    if ms[-1] != max_m:
        ms.append(max_m)
    return ms


def diagnose(
    w: Weight,
    depth: int | None = None,
    max_m: int = 128,
    cells: int | None = None,
) -> DiagnoseReport:
    """Classification panel for the measure w dx: exponentials, the orbit {e_n / w}, A₂ scans."""
    depth = settings.default_depth if depth is None else depth
    K = w.default_cells() if cells is None else cells
    _check_resolution(K, max_m)
    notes: list[str] = []

    oracle = exp_frame_bound_oracle(w, K)
    orbit_oracle = orbit_frame_bound_oracle(w, K)
    measured = []
    for M in _doubling(max_m):
        pair = exp_frame_bound_measured(w, M, K)
        measured.append((M, pair.lower, pair.upper))

    floor = settings.eigen_floor
    exponential_class = _system_class(not oracle.upper_infinite, oracle.lower > floor)
    orbit_class = _system_class(not orbit_oracle.upper_infinite, orbit_oracle.lower > floor)
    if oracle.upper_infinite:
        notes.append(f"ess sup of {w.name} is unbounded; largest cell average at K={K} is {oracle.upper:.6g}")
    if orbit_oracle.upper_infinite:
        notes.append(f"ess inf of {w.name} on its support is 0; the orbit {{e_n / w}} is not Bessel")

    weak = weak_a2_constant(w, depth)
    eps_panel = [eps_strengthened_check(w, e, depth) for e in settings.eps_grid]
    if any(r.finite for r in eps_panel):
        expected = Expectation.EXPECTED
        first = next(r.eps for r in eps_panel if r.finite)
        notes.append(f"w^(1+eps) passes the weak A2 scan for eps = {first:g}")
    elif weak.finite:
        expected = Expectation.OPEN
        notes.append("weak A2 holds but no eps in the grid does: open case, candidate recorded")
    else:
        expected = Expectation.EXCLUDED
        notes.append("weak A2 fails, so no Bessel dextrodual orbit exists")
    if weak.finite and not weak.periodic_finite:
        notes.append("w is A2 on [0,1) but not on the circle; R_M is unbounded")
    notes.append(f"A2 scans stabilized at depth {weak.scan_depth}; measured bounds use {settings.test_cells} sub cells at K={K}")

    values = w.resolve(K)
    report = DiagnoseReport(
        weight=w.name,
        resolution=K,
        depth=depth,
        max_m=max_m,
        oracle=oracle,
        measured=measured,
        exponential_class=exponential_class,
        orbit_oracle=orbit_oracle,
        orbit_class=orbit_class,
        weak_a2=weak,
        eps_panel=eps_panel,
        dextrodual_expected=expected,
        positive_everywhere=bool(np.all(values > 0.0)),
        notes=notes,
    )
    logger.info(f"诊断 {w.name}: exp={exponential_class}, orbit={orbit_class}, dextrodual={expected}")
    return report
