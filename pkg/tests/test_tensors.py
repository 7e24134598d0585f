import math

import pytest
from hypothesis import given, strategies as st

from dataflow_cost.dsl import OP_TYPES, LayerSpec
from dataflow_cost.tensors import (
    infer_coupling, loop_extents, mac_count_dense, output_dims, tensor_volume,
)


def test_conv_weight_coupling():
    assert infer_coupling("CONV2D")["Weight"] == frozenset("KCRS")


def test_conv_full_coupling():
    c = infer_coupling("CONV2D")
    assert c["Input"] == frozenset({"N", "C", "Y", "X"})
    assert c["Output"] == frozenset({"N", "K", "Yp", "Xp"})


def test_dwconv_output_couples_to_c():
    assert infer_coupling("DWCONV")["Output"] == frozenset({"N", "C", "Yp", "Xp"})


def test_pwconv_forces_unit_kernel():
    layer = LayerSpec("p", "PWCONV", dict(K=4, C=3, Y=5, X=5, R=3, S=3))
    assert layer.dims["R"] == layer.dims["S"] == 1
    assert infer_coupling("PWCONV") == infer_coupling("CONV2D")


@pytest.mark.parametrize("op", OP_TYPES)
def test_coupling_total(op):
    c = infer_coupling(op)
    assert set(c) == {"Input", "Weight", "Output"}
    assert c == infer_coupling(op)


def test_unknown_op():
    with pytest.raises(ValueError):
        infer_coupling("MATMUL3D")


@pytest.mark.parametrize("dims, stride, expect", [
    (dict(X=8, S=3), 1, (1, 6)),
    (dict(Y=5, X=5, R=5, S=5), 1, (1, 1)),
    (dict(Y=7, R=3, X=1, S=1), 2, (3, 1)),
])
def test_output_dims(dims, stride, expect):
    layer = LayerSpec("o", "CONV2D", dims, stride_y=stride, stride_x=stride)
    assert output_dims(layer) == expect


def test_volumes():
    conv = LayerSpec("c", "CONV2D", dict(K=4, C=3, Y=5, X=5, R=2, S=2))
    assert tensor_volume(conv, "Weight") == 48
    dw = LayerSpec("d", "DWCONV", dict(C=3, Y=5, X=5, R=2, S=2))
    assert tensor_volume(dw, "Weight") == 12
    out = LayerSpec("o", "CONV2D", dict(K=4, Y=4, X=4))
    assert tensor_volume(out, "Output") == 64


def test_transposed_output_grows():
    tr = LayerSpec("t", "TRCONV", dict(Y=3, X=3, R=2, S=2), stride_y=2, stride_x=2)
    assert output_dims(tr) == (6, 6)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(1, 7), st.integers(1, 7),
       st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 2]))
def test_mac_count_formula(n, k, c, y, x, r, s, stride):
    r, s = min(r, y), min(s, x)
    layer = LayerSpec("m", "CONV2D", dict(N=n, K=k, C=c, Y=y, X=x, R=r, S=s), stride_y=stride, stride_x=stride)
    yp, xp = output_dims(layer)
    assert mac_count_dense(layer) == n * k * c * yp * xp * r * s
    assert math.prod(loop_extents(layer).values()) == mac_count_dense(layer)
