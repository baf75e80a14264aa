"""Scenario pipelines and the concurrent batch runner.

A scenario file is JSON: either one scenario object, a list of them, or
``{"scenarios": [...]}``. Each scenario runs its pipeline sequentially and
writes its artifacts under ``<out>/<index>_<name>/``; a batch runs scenarios
concurrently in worker threads and writes ``summary.json`` at the root.
"""
from __future__ import annotations

import asyncio
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np
from pydantic import ValidationError

from app import __version__
from app.core.config import settings
from app.core.errors import INTERNAL_ERROR_CODE, ScenarioError, error_payload
from app.schemas import (
    EffectivenessVerdict,
    OperatorSpec,
    RunSummary,
    Scenario,
    ScenarioFile,
    ScenarioKind,
    ScenarioResult,
    SweepTrend,
    WeightSpec,
)
from app.services import export, frames, orbits, weights
from app.services.frames import FrameSequence
from app.services.hilbert import Vector
from app.services.kaczmarz import ExponentialStream, auxiliary_sequence, effectiveness_test, row_action_solve
from app.services.measures import MeasureSpec, cantor_iterate, generic_atomic, space_of

logger = logging.getLogger(__name__)

ROTATION_ANGLE = np.pi / 5


@dataclass
class _Outcome:
    passed: bool
    report: dict[str, Any]
    artifacts: list[Path] = field(default_factory=list)


def tolerance_table() -> dict[str, float]:
    return {
        "arithmetic_tol": settings.arithmetic_tol,
        "hermitian_tol": settings.hermitian_tol,
        "unit_tol": settings.unit_tol,
        "parseval_tol": settings.parseval_tol,
        "eigen_floor": settings.eigen_floor,
        "stable_rel": settings.stable_rel,
        "a2_stable_rel": settings.a2_stable_rel,
        "rm_slope_tol": settings.rm_slope_tol,
    }


# ------------------------------------------------------------------ inputs


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Parse a scenario file.

    Raises:
        ScenarioError: unreadable, empty or malformed file; ``field`` names the offending entry.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("file", f"cannot read {path}: {e}") from e
    if not text.strip():
        raise ScenarioError("file", f"{path.name} is empty")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("file", f"{path.name}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_scenarios(document)


def parse_scenarios(document: Any) -> list[Scenario]:
    if isinstance(document, list):
        document = {"scenarios": document}
    try:
        if isinstance(document, dict) and "scenarios" in document:
            return ScenarioFile.model_validate(document).scenarios
        return [Scenario.model_validate(document)]
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "scenario"
        raise ScenarioError(location, first["msg"]) from None


def scenario_measure(sc: Scenario) -> MeasureSpec:
    if sc.measure is not None:
        return sc.measure
    if sc.cantor_level is not None:
        return cantor_iterate(sc.cantor_level)
    return generic_atomic(sc.generic_atoms, seed=sc.seed)


def scenario_weight(spec: WeightSpec) -> tuple[weights.Weight, int | None]:
    """The weight and the resolution to use (None means the weight's native grid)."""
    w = weights.resolve_weight(spec.preset, spec.values, spec.csv)
    return w, spec.cells if w.closed_form else None


def build_operator(spec: OperatorSpec, dim: int, seed: int) -> np.ndarray:
    """V as a dim x dim matrix from an explicit matrix or a preset."""
    if spec.matrix is not None:
        V = np.asarray(spec.matrix, dtype=float).astype(complex)
        if spec.matrix_imag is not None:
            imag = np.asarray(spec.matrix_imag, dtype=float)
            if imag.shape != V.shape:
                raise ScenarioError("operator.matrix_imag", f"shape {imag.shape} != {V.shape}")
            V = V + 1j * imag
        if V.shape != (dim, dim):
            raise ScenarioError("operator.matrix", f"expected a {dim}x{dim} matrix, got {V.shape}")
        return V

    preset = spec.preset or "identity"
    scaling = np.diag(np.linspace(1.0, 2.0, dim)) if dim > 1 else np.eye(1)
    if preset == "identity":
        return np.eye(dim, dtype=complex)
    if preset == "diag12":
        return scaling.astype(complex)
    if preset == "rotation":
        if dim < 2:
            raise ScenarioError("operator.preset", "rotation needs at least two atoms")
        c, s = np.cos(ROTATION_ANGLE), np.sin(ROTATION_ANGLE)
        R = np.eye(dim)
        R[:2, :2] = [[c, -s], [s, c]]
        return (R @ scaling).astype(complex)
    # random：两个正交阵夹一个几何间隔的奇异值对角阵
    rng = np.random.default_rng(seed)
    Q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    singular = np.geomspace(1.0, spec.condition, dim)
    return (Q1 @ np.diag(singular) @ Q2).astype(complex)


def _horizons(dim: int, horizon: int) -> list[int]:
    out = []
    h = max(dim, 1)
    while h < horizon:
        out.append(h)
        h *= 2
    out.append(horizon)
    return out


# --------------------------------------------------------------- pipelines


def _run_aux(sc: Scenario, out: Path) -> _Outcome:
    nu = scenario_measure(sc)
    s = space_of(nu)
    stream = ExponentialStream(nu, s)
    aux = auxiliary_sequence(stream, sc.horizon - 1, s)
    effectiveness = effectiveness_test(stream, s, trials=sc.trials, n_max=sc.horizon - 1, tol=sc.tol, seed=sc.seed)
    bounds = frames.bounds_sweep(FrameSequence.auxiliary(aux), _horizons(s.dim, sc.horizon))
    artifacts = [
        export.aux_csv(out / "aux.csv", aux),
        export.curve_csv(out / "residual.csv", ["n", "residual"], effectiveness.residual_curve),
        export.bounds_csv(out / "bounds.csv", bounds),
    ]
    report = {
        "effectiveness": effectiveness.model_dump(mode="json", exclude={"residual_curve", "parseval_curve"}),
        "bounds": bounds[-1].model_dump(mode="json"),
        "recursion_defect": aux.recursion_defect(),
    }
    return _Outcome(effectiveness.verdict is EffectivenessVerdict.EFFECTIVE, report, artifacts)


def _run_orbit(sc: Scenario, out: Path) -> _Outcome:
    nu = scenario_measure(sc)
    check = orbits.verify_singular_orbit(nu, sc.horizon)
    fs = orbits.build_singular_shift(nu).frame_sequence()
    bounds = frames.bounds_sweep(fs, _horizons(fs.space.dim, sc.horizon))
    artifacts = [export.bounds_csv(out / "bounds.csv", bounds)]
    report = {"check": check.model_dump(mode="json"), "bounds": bounds[-1].model_dump(mode="json")}
    return _Outcome(check.passed, report, artifacts)


def _bundle(sc: Scenario) -> orbits.GenbackwardBundle:
    nu = scenario_measure(sc)
    V = build_operator(sc.operator, len(nu.atoms), sc.seed)
    return orbits.build_perturbed_conjugate(V, nu)


def _run_genbackward(sc: Scenario, out: Path) -> _Outcome:
    bundle = _bundle(sc)
    genbackward = orbits.verify_genbackward(bundle, sc.horizon, trials=sc.trials, seed=sc.seed)
    tform = orbits.verify_tform(bundle, trials=sc.trials, seed=sc.seed)
    dextrodual = orbits.dextrodual_orbit(bundle, sc.horizon, trials=min(sc.trials, 4), seed=sc.seed)
    bounds = frames.bounds_sweep(bundle.T.frame_sequence(), _horizons(bundle.H.dim, sc.horizon))
    artifacts = [
        export.bounds_csv(out / "bounds.csv", bounds),
        export.curve_csv(out / "growth.csv", ["M", "B"], dextrodual.growth.points),
    ]
    report = {
        "genbackward": genbackward.model_dump(mode="json"),
        "tform": tform.model_dump(mode="json"),
        "dextrodual": dextrodual.report.model_dump(mode="json"),
        "growth_min_ratio_tail": dextrodual.growth.min_ratio_tail,
    }
    passed = genbackward.passed and tform.passed and dextrodual.report.passed
    return _Outcome(passed, report, artifacts)


def _run_kaczmarzclass(sc: Scenario, out: Path) -> _Outcome:
    check = orbits.verify_kaczmarzclass(_bundle(sc), sc.horizon)
    return _Outcome(check.passed, {"check": check.model_dump(mode="json")})


def _run_mainsingular(sc: Scenario, out: Path) -> _Outcome:
    mu = scenario_measure(sc)
    s = space_of(mu)
    g0 = orbits.tight_seed(mu) if sc.g0 is None else Vector(np.asarray(sc.g0, dtype=complex), s)
    prop = orbits.verify_prop_exist(mu, g0, sc.horizon, trials=min(sc.trials, 4), seed=sc.seed)
    T = orbits.build_mainsingular(mu, g0)
    identities = orbits.verify_S1_eq_g0(T)
    bounds = frames.stabilized_report(T.frame_sequence(), start=sc.horizon)
    artifacts = [export.bounds_csv(out / "bounds.csv", [bounds])]
    report = {
        "prop_exist": prop.model_dump(mode="json"),
        "identities": identities.model_dump(mode="json"),
        "bounds": bounds.model_dump(mode="json"),
    }
    return _Outcome(prop.passed and identities.passed, report, artifacts)


def _sweep_cells(w: weights.Weight, cells: int | None, ms: list[int]) -> int | None:
    """Closed forms use the requested grid; cell weights are refined to at least 4·max(M) cells."""
    if w.closed_form:
        return cells
    native = w.native_cells
    return native * max(1, math.ceil(4 * max(ms, default=0) / native))


def _run_weights(sc: Scenario, out: Path) -> _Outcome:
    w, cells = scenario_weight(sc.weight)
    panel = weights.a2_panel(w, sc.depth, [sc.eps])
    sweep = weights.rm_norm_sweep(w, sc.ms, _sweep_cells(w, cells, sc.ms))
    relation = weights.mthm_constant_relation(w, sc.depth, sc.ms, cells, sweep=sweep)
    artifacts = [
        export.a2_csv(out / "a2_weak.csv", panel.weak),
        export.a2_csv(out / "a2_classical.csv", panel.classical),
        export.a2_csv(out / "a2_eps.csv", panel.eps[0]),
        export.rm_csv(out / "rm.csv", sweep),
    ]

    # 圆周上的弱 A2 决定 R_M 是否一致有界
    expected = sc.expect_rm or (SweepTrend.BOUNDED if panel.weak.periodic_finite else SweepTrend.GROWING)
    checks = {
        "a2_matches_expected": panel.weak.periodic_finite == (expected is SweepTrend.BOUNDED),
        "rm_trend_matches": sweep.trend is expected,
        "constant_relation": relation.passed,
    }
    ordered = panel.classical.infinite or panel.weak.constant <= panel.classical.constant * (1 + 1e-12)
    report = {
        "panel": panel.model_dump(mode="json"),
        "sweep": sweep.model_dump(mode="json"),
        "constant_relation": relation.model_dump(mode="json"),
        "expected_rm": str(expected),
        "checks": checks,
        "weak_le_classical": ordered,
    }
    return _Outcome(all(checks.values()), report, artifacts)


def _run_rm_sweep(sc: Scenario, out: Path) -> _Outcome:
    w, cells = scenario_weight(sc.weight)
    sweep = weights.rm_norm_sweep(w, sc.ms, _sweep_cells(w, cells, sc.ms))
    relation = weights.mthm_constant_relation(w, sc.depth, sc.ms, cells, sweep=sweep)
    artifacts = [export.rm_csv(out / "rm.csv", sweep)]
    report = {"sweep": sweep.model_dump(mode="json"), "constant_relation": relation.model_dump(mode="json")}
    return _Outcome(relation.passed, report, artifacts)


def _run_diagnose(sc: Scenario, out: Path) -> _Outcome:
    w, cells = scenario_weight(sc.weight)
    report = weights.diagnose(w, sc.depth, sc.max_m, cells)
    artifacts = [
        export.curve_csv(out / "measured.csv", ["M", "A", "B"], report.measured),
        export.a2_csv(out / "a2.csv", report.weak_a2),
    ]
    return _Outcome(True, {"diagnose": report.model_dump(mode="json")}, artifacts)


def _run_solve(sc: Scenario, out: Path) -> _Outcome:
    result = row_action_solve(np.asarray(sc.matrix, dtype=float), np.asarray(sc.rhs, dtype=float), sc.sweeps, sc.tol)
    artifacts = [
        export.curve_csv(
            out / "solution.csv",
            ["i", "re", "im"],
            ((i, z.real, z.imag) for i, z in enumerate(result.x.coords)),
        )
    ]
    report = {"iterations": result.iterations, "residual": result.residual, "converged": result.converged}
    return _Outcome(result.converged, report, artifacts)


PIPELINES: dict[ScenarioKind, Callable[[Scenario, Path], _Outcome]] = {
    ScenarioKind.AUX: _run_aux,
    ScenarioKind.ORBIT: _run_orbit,
    ScenarioKind.GENBACKWARD: _run_genbackward,
    ScenarioKind.KACZMARZCLASS: _run_kaczmarzclass,
    ScenarioKind.MAINSINGULAR: _run_mainsingular,
    ScenarioKind.WEIGHTS: _run_weights,
    ScenarioKind.RM_SWEEP: _run_rm_sweep,
    ScenarioKind.DIAGNOSE: _run_diagnose,
    ScenarioKind.SOLVE: _run_solve,
}


# ------------------------------------------------------------------ runner


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "scenario"


def run_scenario(sc: Scenario, out_root: str | Path, index: int = 0) -> ScenarioResult:
    out_root = Path(out_root)
    out = out_root / f"{index:02d}_{_slug(sc.name)}"
    out.mkdir(parents=True, exist_ok=True)
    logger.info(f"运行场景 {sc.name} ({sc.kind}), seed={sc.seed}")

    outcome = PIPELINES[sc.kind](sc, out)
    document = {
        "scenario": sc.model_dump(mode="json"),
        "version": __version__,
        "seed": sc.seed,
        "tolerances": tolerance_table(),
        "passed": outcome.passed,
        "report": outcome.report,
    }
    report_path = export.write_json(out / "report.json", document)
    artifacts = [p.relative_to(out_root).as_posix() for p in [*outcome.artifacts, report_path]]
    if not outcome.passed:
        logger.warning(f"场景 {sc.name} 未通过")
    return ScenarioResult(
        name=sc.name,
        kind=sc.kind,
        passed=outcome.passed,
        seed=sc.seed,
        artifacts=artifacts,
        report=outcome.report,
    )


def run_scenario_captured(sc: Scenario, out_root: str | Path, index: int = 0) -> ScenarioResult:
    """run_scenario, with any exception recorded as a failed result instead of raised."""
    try:
        return run_scenario(sc, out_root, index)
    except Exception as e:
        error = error_payload(e)
        if error["code"] == INTERNAL_ERROR_CODE:
            logger.exception(f"场景 {sc.name} 执行出错: {error['message']}")
        else:
            logger.warning(f"场景 {sc.name} 输入错误 [{error['code']}]: {error['message']}")
        out = Path(out_root) / f"{index:02d}_{_slug(sc.name)}"
        out.mkdir(parents=True, exist_ok=True)
        document = {
            "scenario": sc.model_dump(mode="json"),
            "version": __version__,
            "seed": sc.seed,
            "tolerances": tolerance_table(),
            "passed": False,
            "error": error,
        }
        report_path = export.write_json(out / "report.json", document)
        return ScenarioResult(
            name=sc.name,
            kind=sc.kind,
            passed=False,
            seed=sc.seed,
            artifacts=[report_path.relative_to(Path(out_root)).as_posix()],
            report={},
            error=error,
        )


async def run_batch(
    scenarios: list[Scenario],
    out_dir: str | Path | None = None,
    seed: int | None = None,
) -> RunSummary:
    """Run every scenario concurrently in worker threads and write ``summary.json``.

    A scenario that raises is recorded as a failed result carrying its error code;
    the other scenarios and the summary are unaffected.
    """
    out_root = Path(out_dir or settings.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    if seed is not None:
        scenarios = [sc.model_copy(update={"seed": seed}) for sc in scenarios]

    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    results = await asyncio.gather(
        *(asyncio.to_thread(run_scenario_captured, sc, out_root, i) for i, sc in enumerate(scenarios))
    )
    summary = RunSummary(
        app=settings.app_name,
        version=__version__,
        started_at=started.isoformat(),
        wall_clock_seconds=time.perf_counter() - t0,
        tolerances=tolerance_table(),
        results=list(results),
    )
    export.write_json(out_root / "summary.json", summary)
    logger.info(f"批量运行完成: {len(results)} 个场景, passed={summary.passed}, errored={summary.errored}")
    return summary
