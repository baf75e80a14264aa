"""错误码与退出码映射测试

测试场景：
1. 错误码描述查找（含回退）
2. 子类携带结构化 detail
3. 异常到 CLI 退出码的映射
4. 场景失败时写入报告的错误条目
"""
import pytest

from app.core.errors import (
    EXIT_INPUT_ERROR,
    EXIT_OK,
    NonUnitVectorError,
    NotPositiveDefiniteError,
    OrbitLabError,
    PairNormalizationError,
    ScenarioError,
    SingularOperatorError,
    ZeroRowError,
    error_payload,
    exit_code_for,
    get_error_message,
)


class TestGetErrorMessage:
    """错误码描述测试"""

    def test_known_code(self):
        assert get_error_message(6) == "system is not a frame"
        assert get_error_message("13") == "malformed scenario"

    def test_none_and_fallback(self):
        assert get_error_message(None) == "unknown error"
        assert get_error_message(None, "boom") == "boom"

    def test_unknown_code(self):
        assert get_error_message(99) == "error code 99"
        assert get_error_message("abc") == "abc"


class TestErrorDetail:
    """结构化 detail 测试"""

    def test_default_message_from_code(self):
        e = OrbitLabError()
        assert e.code == 14
        assert e.message == "precondition violated"

    def test_non_unit_vector_carries_index(self):
        e = NonUnitVectorError(3, 1.5)
        payload = e.to_dict()
        assert payload["code"] == 4
        assert payload["detail"] == {"index": 3, "norm": 1.5}
        assert e.index == 3

    def test_not_positive_definite_carries_eigenvalue(self):
        e = NotPositiveDefiniteError(-0.25)
        assert e.eigenvalue == -0.25
        assert e.detail["eigenvalue"] == -0.25
        assert e.code == 2

    def test_pair_normalization_value_is_text(self):
        e = PairNormalizationError(2, 0.5 + 0.1j)
        assert e.detail["index"] == 2
        assert isinstance(e.detail["value"], str)

    def test_scenario_error_names_field(self):
        e = ScenarioError("csv", "not a number")
        assert e.field == "csv"
        assert e.message == "csv: not a number"

    def test_singular_and_zero_row(self):
        assert SingularOperatorError(1e12, 1e8).condition == 1e12
        assert ZeroRowError(4).row == 4


class TestExitCodes:
    """退出码映射测试"""

    def test_success(self):
        assert exit_code_for(None) == EXIT_OK

    @pytest.mark.parametrize("exc", [OrbitLabError("x"), ValueError("x"), OSError("x"), ScenarioError("f", "m")])
    def test_input_errors(self, exc):
        assert exit_code_for(exc) == EXIT_INPUT_ERROR

    @pytest.mark.parametrize("exc", [RuntimeError("x"), KeyError("k"), MemoryError()])
    def test_unexpected_exceptions_are_not_verdicts(self, exc):
        assert exit_code_for(exc) == EXIT_INPUT_ERROR


class TestErrorPayload:
    """报告错误条目测试"""

    def test_orbitlab_error_keeps_code(self):
        payload = error_payload(ScenarioError("operator.matrix", "bad shape"))
        assert payload["code"] == 13
        assert payload["message"] == "operator.matrix: bad shape"
        assert payload["detail"] == {"field": "operator.matrix"}

    def test_unexpected_exception(self):
        payload = error_payload(KeyError("missing"))
        assert payload["code"] == 15
        assert payload["message"].startswith("KeyError")
        assert get_error_message(payload["code"]) == "unexpected internal error"
