"""数据模型定义

Reports returned by the verifiers and scanners, plus the scenario and HTTP
request models. Every report is graded (it carries defect numbers and the
tolerances they were compared against), never a bare boolean.
"""
from __future__ import annotations

from enum import StrEnum
from typing import Any, Literal

from pydantic import BaseModel, Field, computed_field, model_validator

from app.services.measures import MeasureSpec


# ---------------------------------------------------------------- kaczmarz


class EffectivenessVerdict(StrEnum):
    EFFECTIVE = "effective_within_tolerance"
    NOT_EFFECTIVE = "not_effective"
    INCONCLUSIVE = "inconclusive"


class EffectivenessReport(BaseModel):
    """Residual curves of Kaczmarz reconstructions on seeded random unit vectors."""
    tested_vectors: int
    horizon: int
    seed: int
    tol: float
    max_residual: float
    parseval_defect: float
    tail_slope: float | None = None
    residual_curve: list[tuple[int, float]]
    parseval_curve: list[tuple[int, float]]
    verdict: EffectivenessVerdict

    @model_validator(mode="after")
    def _consistent(self) -> EffectivenessReport:
        if not self.residual_curve:
            raise ValueError("residual_curve must not be empty")
        within = self.max_residual <= self.tol and self.parseval_defect <= self.tol
        if within != (self.verdict is EffectivenessVerdict.EFFECTIVE):
            raise ValueError("verdict inconsistent with max_residual / parseval_defect")
        return self


# ------------------------------------------------------------------ frames


class FrameClass(StrEnum):
    FRAME = "frame"
    BESSEL = "bessel"
    LOWER_SEMI_FRAME = "lower_semi_frame"
    PARSEVAL = "parseval"
    TIGHT = "tight"
    RIESZ_BASIS_FINITE = "riesz_basis_finite"


class FrameReport(BaseModel):
    horizon: int
    lower_bound: float = Field(ge=0.0)
    upper_bound: float
    tail_indicator: float
    stable: bool
    classification: list[FrameClass]
    excess: int | None = None

    @model_validator(mode="after")
    def _ordered(self) -> FrameReport:
        if self.lower_bound > self.upper_bound * (1 + 1e-12) + 1e-15:
            raise ValueError("lower bound exceeds upper bound")
        flags = set(self.classification)
        if FrameClass.PARSEVAL in flags and FrameClass.TIGHT not in flags:
            raise ValueError("parseval without tight")
        if FrameClass.TIGHT in flags and FrameClass.FRAME not in flags:
            raise ValueError("tight without frame")
        return self

    def has(self, flag: FrameClass) -> bool:
        return flag in self.classification


# ------------------------------------------------------------------ orbits


class VerificationReport(BaseModel):
    """Defects of one identity check; ``passed`` iff every defect is within its tolerance."""
    check: str
    horizon: int | None = None
    defects: dict[str, float]
    tolerances: dict[str, float]
    details: dict[str, Any] = Field(default_factory=dict)
    exploratory: bool = False

    @computed_field
    @property
    def passed(self) -> bool:
        return all(
            self.defects[name] <= tol for name, tol in self.tolerances.items() if name in self.defects
        )


class GrowthCurve(BaseModel):
    """B(M) = Σ_{n<=M} |ν̂(n)|² and the ratio B(M)/(M+1)."""
    points: list[tuple[int, float]]
    min_ratio_tail: float


# ----------------------------------------------------------------- weights


class Trend(StrEnum):
    STABLE = "stable"
    GROWING = "growing"


class A2Level(BaseModel):
    level: int
    constant: float
    argmax_a: float
    argmax_b: float
    periodic_constant: float | None = None


class A2Report(BaseModel):
    weight: str
    variant: Literal["weak", "classical", "eps"]
    eps: float = 0.0
    constant: float
    infinite: bool = False
    scan_depth: int
    argmax_interval: tuple[float, float]
    refinement_trend: Trend
    levels: list[A2Level] = Field(default_factory=list)
    # 圆周上的区间（允许跨过 1 ≡ 0）；argmax 的右端点大于 1 表示绕回
    periodic_constant: float | None = None
    periodic_infinite: bool = False
    periodic_argmax: tuple[float, float] | None = None
    periodic_trend: Trend | None = None

    @property
    def finite(self) -> bool:
        return not self.infinite and self.refinement_trend is Trend.STABLE

    @property
    def periodic_finite(self) -> bool:
        return not self.periodic_infinite and self.periodic_trend is Trend.STABLE


class A2Panel(BaseModel):
    """Weak, classical and ε-strengthened scans of one weight at the same depth."""
    weak: A2Report
    classical: A2Report
    eps: list[A2Report] = Field(default_factory=list)


class SweepTrend(StrEnum):
    BOUNDED = "bounded"
    GROWING = "growing"


class NormSweep(BaseModel):
    weight: str
    points: list[tuple[int, float]]
    trend: SweepTrend
    last_octave_slope: float
    max_min_ratio: float


class DirichletReport(BaseModel):
    n_max: int
    samples_per_n: int
    min_ratio: float
    argmin: tuple[int, float]
    violations: list[tuple[int, float]] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


class BoundPair(BaseModel):
    lower: float
    upper: float
    lower_infinite: bool = False
    upper_infinite: bool = False
    resolution: int | None = None


class SystemClass(StrEnum):
    FRAME = "frame"
    BESSEL_ONLY = "bessel_only"
    LOWER_SEMI_FRAME_ONLY = "lower_semi_frame_only"
    NEITHER = "neither"


class Expectation(StrEnum):
    EXPECTED = "expected"
    OPEN = "open"
    EXCLUDED = "excluded"


class DiagnoseReport(BaseModel):
    """One-page classification panel for a weight (absolutely continuous measure)."""
    weight: str
    resolution: int
    depth: int
    max_m: int
    oracle: BoundPair
    measured: list[tuple[int, float, float]]
    exponential_class: SystemClass
    orbit_oracle: BoundPair
    orbit_class: SystemClass
    weak_a2: A2Report
    eps_panel: list[A2Report]
    dextrodual_expected: Expectation
    positive_everywhere: bool
    notes: list[str] = Field(default_factory=list)


# --------------------------------------------------------------- scenarios


class ScenarioKind(StrEnum):
    AUX = "aux"
    ORBIT = "orbit"
    GENBACKWARD = "genbackward"
    KACZMARZCLASS = "kaczmarzclass"
    MAINSINGULAR = "mainsingular"
    WEIGHTS = "weights"
    RM_SWEEP = "rm_sweep"
    DIAGNOSE = "diagnose"
    SOLVE = "solve"


class WeightSpec(BaseModel):
    """A preset name, explicit cell values, or a CSV path (one value per line)."""
    preset: str | None = None
    values: list[float] | None = None
    csv: str | None = None
    cells: int = Field(default=1024, ge=1, le=1 << 16)

    @model_validator(mode="after")
    def _one_source(self) -> WeightSpec:
        given = [x is not None for x in (self.preset, self.values, self.csv)]
        if sum(given) != 1:
            raise ValueError("exactly one of preset, values, csv is required")
        return self


class OperatorSpec(BaseModel):
    """V as an explicit matrix (real part plus optional imaginary part) or a preset."""
    preset: Literal["identity", "diag12", "rotation", "random"] | None = "identity"
    matrix: list[list[float]] | None = None
    matrix_imag: list[list[float]] | None = None
    condition: float = Field(default=10.0, ge=1.0, le=1e8)


class Scenario(BaseModel):
    name: str = Field(min_length=1, max_length=200)
    kind: ScenarioKind
    measure: MeasureSpec | None = None
    cantor_level: int | None = Field(default=None, ge=0, le=12)
    generic_atoms: int | None = Field(default=None, ge=1, le=64)
    weight: WeightSpec | None = None
    operator: OperatorSpec = Field(default_factory=OperatorSpec)
    g0: list[float] | None = None
    horizon: int = Field(default=200, ge=1, le=16384)
    depth: int = Field(default=10, ge=1, le=16)
    ms: list[int] = Field(default_factory=lambda: [4, 8, 16, 32, 64, 128])
    max_m: int = Field(default=128, ge=0, le=4096)
    trials: int = Field(default=8, ge=1, le=256)
    tol: float = Field(default=1e-6, gt=0.0, le=1.0)
    eps: float = Field(default=0.5, gt=0.0, le=10.0)
    expect_rm: SweepTrend | None = None
    matrix: list[list[float]] | None = None
    rhs: list[float] | None = None
    sweeps: int = Field(default=1000, ge=1, le=10**6)
    seed: int = Field(default=20240917, ge=0, lt=1 << 64)

    @model_validator(mode="after")
    def _sources(self) -> Scenario:
        needs_measure = {
            ScenarioKind.AUX,
            ScenarioKind.ORBIT,
            ScenarioKind.GENBACKWARD,
            ScenarioKind.KACZMARZCLASS,
            ScenarioKind.MAINSINGULAR,
        }
        if self.kind in needs_measure:
            sources = [self.measure, self.cantor_level, self.generic_atoms]
            if sum(s is not None for s in sources) != 1:
                raise ValueError("exactly one of measure, cantor_level, generic_atoms is required")
        if self.kind in {ScenarioKind.WEIGHTS, ScenarioKind.RM_SWEEP, ScenarioKind.DIAGNOSE}:
            if self.weight is None:
                raise ValueError("weight is required")
        if self.kind is ScenarioKind.SOLVE and (self.matrix is None or self.rhs is None):
            raise ValueError("matrix and rhs are required")
        if sorted(self.ms) != self.ms:
            raise ValueError("ms must be ascending")
        return self


class ScenarioFile(BaseModel):
    scenarios: list[Scenario] = Field(min_length=1)


class ScenarioResult(BaseModel):
    name: str
    kind: ScenarioKind
    passed: bool
    seed: int
    artifacts: list[str]
    report: dict[str, Any]
    error: dict[str, Any] | None = None


class RunSummary(BaseModel):
    app: str
    version: str
    started_at: str
    wall_clock_seconds: float
    tolerances: dict[str, float]
    results: list[ScenarioResult]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @computed_field
    @property
    def errored(self) -> int:
        return sum(r.error is not None for r in self.results)


class DiagnoseRequest(BaseModel):
    weight: WeightSpec
    depth: int = Field(default=10, ge=1, le=16)
    max_m: int = Field(default=128, ge=1, le=4096)
