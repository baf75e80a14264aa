"""CSV / JSON artifact writers.

Floats are written with ``repr`` (shortest round-trip form) and rows in a fixed
order, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel

from app.schemas import A2Report, FrameReport, NormSweep
from app.services.kaczmarz import AuxiliarySequence

logger = logging.getLogger(__name__)


def format_number(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    logger.debug(f"写入 CSV: {path}")
    return path


def write_json(path: Path, document: BaseModel | dict | list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(document, BaseModel):
        document = document.model_dump(mode="json")
    path.write_text(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.debug(f"写入 JSON: {path}")
    return path


def aux_csv(path: Path, aux: AuxiliarySequence) -> Path:
    """n, re_0, im_0, re_1, im_1, ... per auxiliary vector."""
    header = ["n"]
    for j in range(aux.space.dim):
        header += [f"re_{j}", f"im_{j}"]

    def rows():
        for n, g in enumerate(aux.g):
            row: list[Any] = [n]
            for z in g:
                row += [z.real, z.imag]
            yield row

    return write_csv(path, header, rows())


def bounds_csv(path: Path, reports: list[FrameReport]) -> Path:
    return write_csv(
        path,
        ["horizon", "A", "B", "tail_indicator"],
        ((r.horizon, r.lower_bound, r.upper_bound, r.tail_indicator) for r in reports),
    )


def rm_csv(path: Path, sweep: NormSweep) -> Path:
    return write_csv(path, ["M", "norm"], sweep.points)


def a2_csv(path: Path, report: A2Report) -> Path:
    return write_csv(
        path,
        ["level", "constant", "argmax_a", "argmax_b"],
        ((lv.level, lv.constant, lv.argmax_a, lv.argmax_b) for lv in report.levels),
    )


def curve_csv(path: Path, header: list[str], points: Iterable[Iterable[Any]]) -> Path:
    return write_csv(path, header, points)
