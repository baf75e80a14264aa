"""实验接口模块"""
from __future__ import annotations

import asyncio
from pathlib import Path

from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.core.config import settings
from app.schemas import DiagnoseReport, DiagnoseRequest, RunSummary, Scenario
from app.services import weights
from app.services.scenarios import run_batch, scenario_weight


router = APIRouter(prefix="/api", tags=["experiments"])


class RunRequest(BaseModel):
    scenarios: list[Scenario] = Field(min_length=1)
    seed: int | None = Field(default=None, ge=0, lt=1 << 64)
    out: str | None = None


@router.get("/presets")
async def list_presets() -> dict:
    """可用的权重预设"""
    return {"presets": [{"name": k, "description": v} for k, v in weights.PRESET_DESCRIPTIONS.items()]}


@router.post("/diagnose")
async def diagnose(payload: DiagnoseRequest) -> DiagnoseReport:
    """对权重做分类诊断（数值计算放在工作线程中执行）"""
    w, cells = scenario_weight(payload.weight)
    return await asyncio.to_thread(weights.diagnose, w, payload.depth, payload.max_m, cells)


@router.post("/scenarios/run")
async def run_scenarios(payload: RunRequest) -> RunSummary:
    """运行一批场景，产物写入 output_dir"""
    out = Path(payload.out) if payload.out else Path(settings.output_dir)
    return await run_batch(payload.scenarios, out, payload.seed)
