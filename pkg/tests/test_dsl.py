from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dataflow_cost.dsl import (
    Dataflow, Directive, DslError, HardwareConfig, LayerSpec, format_hardware, format_model,
    parse_dataflow, parse_hardware, parse_model, validate_dataflow,
)
from dataflow_cost.randgen import random_dataflow, random_layer

from conftest import data_text


def test_parse_simple_layer():
    text = ("Layer CONV2D { Dimensions { K:4 C:3 Y:5 X:5 R:2 S:2 } "
            "Dataflow { SpatialMap(1,1) Xp; TemporalMap(1,1) S; } }")
    [(layer, df)] = parse_model(text)
    assert layer.dims["N"] == 1
    assert layer.dims["K"] == 4 and layer.dims["S"] == 2
    assert df.directives == (Directive("SpatialMap", 1, 1, "Xp"), Directive("TemporalMap", 1, 1, "S"))


def test_parse_1d_conv_dataflow():
    df = parse_dataflow("SpatialMap(2,2) Xp; TemporalMap(3,3) S;")
    assert [str(d) for d in df.directives] == ["SpatialMap(2,2) Xp;", "TemporalMap(3,3) S;"]


def test_zero_size_rejected():
    with pytest.raises(DslError):
        parse_dataflow("SpatialMap(0,1) K;")


def test_parse_error_has_position():
    with pytest.raises(DslError) as e:
        parse_model("Layer CONV2D {\n Dimensions { K:4 }\n Dataflow { Bogus(1,1) K; } }")
    assert e.value.line == 3


def test_dilation_rejected():
    with pytest.raises(DslError):
        parse_model("Layer CONV2D { Dimensions { K:4 C:3 Y:5 X:5 R:2 S:2 dilation:2 } Dataflow { } }")


def test_one_spatial_map_per_level():
    with pytest.raises(DslError):
        parse_dataflow("SpatialMap(1,1) K; SpatialMap(1,1) C;")
    parse_dataflow("SpatialMap(1,1) K; Cluster(2); SpatialMap(1,1) C;")


def test_duplicate_dim_in_level():
    with pytest.raises(DslError):
        parse_dataflow("TemporalMap(1,1) K; TemporalMap(2,2) K;")


def test_filter_larger_than_input_rejected():
    with pytest.raises(ValueError):
        LayerSpec("bad", "CONV2D", dict(Y=2, R=3))


def test_density_range():
    with pytest.raises(ValueError):
        LayerSpec("bad", "CONV2D", dict(K=2), density={"Input": Fraction(0)})


def test_parse_hardware():
    hw = parse_hardware("num_pes:256 noc_bandwidth:32 noc_avg_latency:2")
    assert (hw.num_pes, hw.noc_bandwidth, hw.noc_avg_latency) == (256, 32, 2)
    assert hw.vector_width == 1 and hw.double_buffering is True


def test_hardware_zero_pes():
    with pytest.raises((DslError, ValueError)):
        parse_hardware("num_pes:0")


def test_hardware_round_trip():
    hw = HardwareConfig(num_pes=12, l1_bytes=64, noc_bandwidth=3, double_buffering=False, shared_noc=True)
    assert parse_hardware(format_hardware(hw)) == hw


def test_hardware_docs_mention_mesh():
    assert "N" in parse_hardware.__doc__ and "corner" in parse_hardware.__doc__


LAYER_K4 = LayerSpec("l", "CONV2D", dict(K=4, C=3, Y=4, X=4, R=1, S=1))


def test_bound_error():
    rep = validate_dataflow(LAYER_K4, parse_dataflow("TemporalMap(5,5) K;"))
    assert [f.condition for f in rep.errors] == ["bound"]


def test_bound_lenient_warns():
    rep = validate_dataflow(LAYER_K4, parse_dataflow("TemporalMap(5,5) K;"), strict=False)
    assert rep.ok and [f.condition for f in rep.warnings] == ["bound"]


def test_redundancy_error():
    rep = validate_dataflow(LAYER_K4, parse_dataflow("TemporalMap(2,1) C;"))
    assert [f.condition for f in rep.errors] == ["redundancy"]


def test_coverage_warning():
    rep = validate_dataflow(LAYER_K4, parse_dataflow("TemporalMap(2,4) K;"))
    assert rep.ok and [f.condition for f in rep.warnings] == ["coverage"]


def test_overlap_allowed_on_x():
    layer = LayerSpec("l", "CONV2D", dict(X=8, S=3))
    assert validate_dataflow(layer, parse_dataflow("TemporalMap(3,1) X;")).ok


def test_inner_level_bound_uses_inherited_size():
    layer = LayerSpec("l", "CONV2D", dict(K=8))
    df = parse_dataflow("SpatialMap(2,2) K; Cluster(2); TemporalMap(4,4) K;")
    assert [f.condition for f in validate_dataflow(layer, df).errors] == ["bound"]


@pytest.mark.parametrize("name", ["conv1d.m", "styles.m", "dse_small.m", "dse_big.m"])
def test_shipped_examples_validate(name):
    for layer, df in parse_model(data_text(name)):
        assert validate_dataflow(layer, df).ok, layer.name


@pytest.mark.parametrize("name", ["conv1d.m", "styles.m"])
def test_model_round_trip(name):
    pairs = parse_model(data_text(name))
    assert parse_model(format_model(pairs)) == pairs


@given(st.integers(0, 10 ** 6))
def test_round_trip_random(seed):
    import random

    rng = random.Random(seed)
    layer = random_layer(rng)
    df, _ = random_dataflow(rng, layer)
    pairs = [(layer, df)]
    assert parse_model(format_model(pairs)) == pairs


@given(st.integers(0, 10 ** 6))
def test_validate_is_pure(seed):
    import random

    rng = random.Random(seed)
    layer = random_layer(rng)
    df = Dataflow(tuple(Directive("TemporalMap", rng.randint(1, 7), rng.randint(1, 7), d)
                        for d in rng.sample(["K", "C", "R", "S"], 2)))
    assert validate_dataflow(layer, df) == validate_dataflow(layer, df)
