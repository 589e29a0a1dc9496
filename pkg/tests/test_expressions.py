"""Whitelisted expression compiler for user-supplied coefficients."""

import math

import numpy as np
import pytest

from isaacsfem.errors import ParameterError
from isaacsfem.expressions import ALLOWED_FUNCTIONS, compile_expression


def test_vectorized_max_with_a_floor():
    fn = compile_expression("max(y, 0.1)")
    x = np.zeros(4)
    y = np.array([-1.0, 0.0, 0.1, 2.0])
    np.testing.assert_array_equal(fn(x, y), [0.1, 0.1, 0.1, 2.0])


def test_control_variables_and_pi():
    fn = compile_expression("sin(alpha) + cos(beta) * pi")
    got = fn(0.0, 0.0, alpha=math.pi / 2.0, beta=0.0)
    assert got == pytest.approx(1.0 + math.pi)


def test_power_and_precedence():
    fn = compile_expression("x**2 + y")
    assert fn(3.0, 1.0) == pytest.approx(10.0)
    assert fn(-2.0, 0.5) == pytest.approx(4.5)


def test_extra_constants():
    fn = compile_expression("T - t", constants={"T": 2.0})
    assert fn(0.0, 0.0, t=0.5) == pytest.approx(1.5)


def test_min_accepts_more_than_two_arguments():
    fn = compile_expression("min(x, y, 0.0)")
    assert fn(2.0, -1.0) == pytest.approx(-1.0)


def test_atan2_signature():
    fn = compile_expression("atan2(y, x)")
    assert fn(1.0, 1.0) == pytest.approx(math.pi / 4.0)
    with pytest.raises(ParameterError):
        compile_expression("atan2(y)")


def test_output_is_float_array():
    fn = compile_expression("x + 1")
    out = fn(np.array([1, 2]), np.zeros(2))
    assert out.dtype == np.float64


def test_malformed_syntax_rejected():
    with pytest.raises(ParameterError):
        compile_expression("x +")
    with pytest.raises(ParameterError):
        compile_expression("(x")


def test_unknown_name_rejected_at_compile_time():
    with pytest.raises(ParameterError, match="gamma"):
        compile_expression("x + gamma")


def test_disallowed_calls_and_syntax_rejected():
    with pytest.raises(ParameterError):
        compile_expression("__import__('os')")
    with pytest.raises(ParameterError):
        compile_expression("x.real")
    with pytest.raises(ParameterError):
        compile_expression("[x for x in y]")
    with pytest.raises(ParameterError):
        compile_expression("x if y else t")
    with pytest.raises(ParameterError):
        compile_expression("sin(x, key=1)")
    with pytest.raises(ParameterError):
        compile_expression("'text'")


def test_whitelist_is_numpy_backed():
    for name, fn in ALLOWED_FUNCTIONS.items():
        assert callable(fn), name
    assert ALLOWED_FUNCTIONS["max"] is np.maximum
