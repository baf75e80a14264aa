"""错误类型与错误码映射

所有数值前置条件失败都抛出 ``OrbitLabError`` 的子类，携带稳定的错误码和
结构化 detail，CLI 与 HTTP 层据此生成诊断信息和退出码。
"""
from __future__ import annotations

from typing import Any

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_VERDICT_FAILURE = 2

# 错误码到描述的映射
ERROR_CODE_MAP: dict[int, str] = {
    1: "dimension mismatch",
    2: "matrix is not positive definite",
    3: "operator is not self-adjoint",
    4: "vector is not a unit vector",
    5: "pair normalization <phi_n, psi_n> = 1 violated",
    6: "system is not a frame",
    7: "operator is singular or ill-conditioned",
    8: "measure is not a probability measure",
    9: "invalid measure description",
    10: "grid resolution too coarse",
    11: "matrix has a zero row",
    12: "level exceeds the atom cap",
    13: "malformed scenario",
    14: "precondition violated",
    15: "unexpected internal error",
}

INTERNAL_ERROR_CODE = 15


def get_error_message(error_code: int | str | None, fallback: str | None = None) -> str:
    """获取错误码对应的描述

    Args:
        error_code: 错误码（int 或 str）
        fallback: 找不到映射时使用的默认消息

    Returns:
        错误描述
    """
    if error_code is None:
        return fallback or "unknown error"

    try:
        code = int(error_code)
    except (ValueError, TypeError):
        return fallback or str(error_code)

    return ERROR_CODE_MAP.get(code, fallback or f"error code {code}")


class OrbitLabError(Exception):
    """Base class; ``code`` indexes ``ERROR_CODE_MAP``."""

    code: int = 14

    def __init__(self, message: str | None = None, **detail: Any) -> None:
        self.detail = detail
        self.message = message or get_error_message(self.code)
        super().__init__(self.message)

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class DimensionMismatchError(OrbitLabError):
    code = 1


class NotPositiveDefiniteError(OrbitLabError):
    code = 2

    def __init__(self, eigenvalue: float, message: str | None = None, **detail: Any) -> None:
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            message or f"eigenvalue {self.eigenvalue:.6e} is not strictly positive",
            eigenvalue=self.eigenvalue,
            **detail,
        )


class NotSelfAdjointError(OrbitLabError):
    code = 3


class NonUnitVectorError(OrbitLabError):
    code = 4

    def __init__(self, index: int, norm: float) -> None:
        self.index = index
        super().__init__(f"vector {index} has norm {norm:.12g}, expected 1", index=index, norm=norm)


class PairNormalizationError(OrbitLabError):
    code = 5

    def __init__(self, index: int, value: complex) -> None:
        self.index = index
        super().__init__(
            f"<phi_{index}, psi_{index}> = {value:.12g}, expected 1",
            index=index,
            value=str(value),
        )


class NotAFrameError(OrbitLabError):
    code = 6


class SingularOperatorError(OrbitLabError):
    code = 7

    def __init__(self, condition: float, limit: float | None = None) -> None:
        self.condition = float(condition)
        super().__init__(
            f"condition number {self.condition:.3e} exceeds limit {limit}",
            condition=self.condition,
            limit=limit,
        )


class NotProbabilityError(OrbitLabError):
    code = 8


class InvalidMeasureError(OrbitLabError):
    code = 9


class ResolutionError(OrbitLabError):
    code = 10


class ZeroRowError(OrbitLabError):
    code = 11

    def __init__(self, row: int) -> None:
        self.row = row
        super().__init__(f"row {row} of the system matrix is zero", row=row)


class LevelTooLargeError(OrbitLabError):
    code = 12


class ScenarioError(OrbitLabError):
    code = 13

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}", field=field)


class PreconditionError(OrbitLabError):
    code = 14


def error_payload(exc: BaseException) -> dict[str, Any]:
    """{code, message, detail} for a report entry; unknown exceptions get code 15."""
    if isinstance(exc, OrbitLabError):
        return exc.to_dict()
    return {
        "code": INTERNAL_ERROR_CODE,
        "message": f"{type(exc).__name__}: {exc}",
        "detail": {},
    }


def exit_code_for(exc: BaseException | None) -> int:
    """Map a raised exception to the CLI exit code.

    Any exception is 1; 2 is reserved for a completed run whose verdict failed.
    """
    if exc is None:
        return EXIT_OK
    return EXIT_INPUT_ERROR
