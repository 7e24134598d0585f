import dataclasses
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dataflow_cost.clusters import hierarchy_for
from dataflow_cost.dsl import HardwareConfig, LayerSpec, parse_dataflow, parse_model
from dataflow_cost.perf import (
    EnergyTable, ValidationFailed, analyze_layer, analyze_level, analyze_network, case_delay, noc_delay,
    parse_energy,
)
from dataflow_cost.randgen import random_config

from conftest import conv1d_hw, data_text


@pytest.mark.parametrize("el, bw, lat, expect", [(12, 4, 2, 5), (0, 4, 2, 0), (1, 32, 2, 3)])
def test_noc_delay(el, bw, lat, expect):
    assert noc_delay(el, HardwareConfig(num_pes=1, noc_bandwidth=bw, noc_avg_latency=lat)) == expect


def test_case_delay_double_buffered():
    assert case_delay(10, 7, 2, HardwareConfig(num_pes=1)) == (10, "Compute")


def test_case_delay_serial():
    assert case_delay(10, 7, 2, HardwareConfig(num_pes=1, double_buffering=False))[0] == 19


def test_case_delay_bandwidth_starved():
    assert case_delay(4, 16, 0, HardwareConfig(num_pes=1)) == (16, "InComm")


def test_shared_noc_serializes():
    hw = HardwareConfig(num_pes=1, shared_noc=True)
    assert case_delay(4, 3, 3, hw) == (6, "InComm")


def test_degenerate_layer():
    layer = LayerSpec("one", "CONV2D", {})
    r = analyze_layer(layer, parse_dataflow("TemporalMap(1,1) K;"), HardwareConfig(num_pes=1))
    # one compute cycle, exposed fetch of input and weight, write-back of the output
    assert r.runtime_cycles == 1 + 2 + 1
    assert r.mac_count == 1


def test_unrolled_example_compute(conv1d):
    layer, df = conv1d["unrolled"]
    h = hierarchy_for(layer, df, conv1d_hw("unrolled"))
    res = analyze_level(layer, h, conv1d_hw("unrolled"))
    assert res.cases[0]["compute"] == 6


def test_unrolled_example_runtime(conv1d):
    # 6 compute cycles + exposed fetch of 11 elements (ceil(11/2)+1 = 7) + drain of 6 (3+1 = 4)
    layer, df = conv1d["unrolled"]
    r = analyze_layer(layer, df, conv1d_hw("unrolled", noc_bandwidth=2, noc_avg_latency=1))
    assert r.runtime_cycles == 17


def test_two_level_uses_inner_runtime(conv1d):
    layer, df = conv1d["F"]
    hw = conv1d_hw("F")
    h = hierarchy_for(layer, df, hw)
    inner = analyze_level(layer, h, hw, index=1)
    top = analyze_level(layer, h, hw, index=0)
    assert top.cases and all(c["compute"] >= 1 for c in top.cases)
    assert top.runtime >= inner.runtime


def test_density_identity():
    layer = LayerSpec("d", "CONV2D", dict(K=2, C=2, Y=3, X=3, R=2, S=2))
    df = parse_dataflow("SpatialMap(1,1) K; TemporalMap(1,1) C;")
    hw = HardwareConfig(num_pes=2)
    a = analyze_layer(layer, df, hw)
    dense = dataclasses.replace(layer, density={t: Fraction(1) for t in ("Input", "Weight", "Output")})
    assert analyze_layer(dense, df, hw) == a


def test_weight_density_halves():
    layer = LayerSpec("d", "CONV2D", dict(K=2, C=2, Y=3, X=3, R=2, S=2))
    half = LayerSpec("d", "CONV2D", layer.dims, density={"Weight": Fraction(1, 2)})
    df = parse_dataflow("SpatialMap(1,1) K; TemporalMap(1,1) C;")
    hw = HardwareConfig(num_pes=2)
    a, b = analyze_layer(layer, df, hw), analyze_layer(half, df, hw)
    assert b.mac_count == Fraction(a.mac_count, 2)
    for k in ("reads", "writes"):
        assert b.levels[0]["Weight"][k] == Fraction(a.levels[0]["Weight"][k], 2)


def test_network_totals():
    pairs = parse_model(data_text("styles.m"))
    hw = HardwareConfig(num_pes=64)
    one = analyze_network(pairs[:1], hw)
    assert one.runtime_cycles == one.layers[0].runtime_cycles and one.energy == one.layers[0].energy
    two = analyze_network([pairs[0], pairs[0]], hw)
    assert two.runtime_cycles == 2 * one.runtime_cycles and two.energy == 2 * one.energy
    mixed = analyze_network(pairs, hw)
    assert mixed.runtime_cycles == sum(r.runtime_cycles for r in mixed.layers)


def test_validation_failure_raises():
    layer = LayerSpec("k", "CONV2D", dict(K=4))
    with pytest.raises(ValidationFailed):
        analyze_layer(layer, parse_dataflow("TemporalMap(5,5) K;"), HardwareConfig(num_pes=1))
    analyze_layer(layer, parse_dataflow("TemporalMap(5,5) K;"), HardwareConfig(num_pes=1), strict=False)


def test_buffer_feasibility_flags():
    layer = LayerSpec("k", "CONV2D", dict(K=4, C=4))
    df = parse_dataflow("SpatialMap(1,1) K; TemporalMap(1,1) C;")
    r = analyze_layer(layer, df, HardwareConfig(num_pes=4))
    tight = analyze_layer(layer, df, HardwareConfig(num_pes=4, l1_bytes=r.l1_requirement_bytes - 1))
    assert r.feasible and not tight.l1_feasible


def test_parse_energy():
    e = parse_energy(data_text("energy_example.txt"))
    assert (e.mac_op, e.l1_read, e.l2_read) == (1, 2, 20)


def _cfg(seed):
    return random_config(random.Random(seed), mac_cap=1500)


@given(st.integers(0, 10 ** 6))
def test_rooflines(seed):
    layer, df, hw = _cfg(seed)
    r = analyze_layer(layer, df, hw)
    assert r.runtime_cycles >= Fraction(r.mac_count) / (r.active_pes * hw.vector_width)
    l2 = r.levels[0]
    inbound = Fraction(l2["Input"]["reads"]) + Fraction(l2["Weight"]["reads"])
    outbound = Fraction(l2["Output"]["writes"])
    if hw.shared_noc:
        assert r.runtime_cycles >= (inbound + outbound) / hw.noc_bandwidth
    else:
        assert r.runtime_cycles >= max(inbound, outbound) / hw.noc_bandwidth
    assert 0 <= r.pe_utilization <= 1


@given(st.integers(0, 10 ** 6))
def test_monotone_in_bandwidth_and_vector_width(seed):
    layer, df, hw = _cfg(seed)
    base = analyze_layer(layer, df, hw).runtime_cycles
    assert analyze_layer(layer, df, dataclasses.replace(hw, noc_bandwidth=hw.noc_bandwidth * 2)).runtime_cycles <= base
    assert analyze_layer(layer, df, dataclasses.replace(hw, vector_width=hw.vector_width + 1)).runtime_cycles <= base


@given(st.integers(0, 10 ** 6))
def test_double_buffering_never_slower(seed):
    layer, df, hw = _cfg(seed)
    db = analyze_layer(layer, df, dataclasses.replace(hw, double_buffering=True))
    no = analyze_layer(layer, df, dataclasses.replace(hw, double_buffering=False))
    assert db.runtime_cycles <= no.runtime_cycles


@given(st.integers(0, 10 ** 6), st.fractions(min_value=0, max_value=10))
def test_energy_linear(seed, s):
    layer, df, hw = _cfg(seed)
    e = EnergyTable(noc_hop=Fraction(1, 3))
    a = analyze_layer(layer, df, hw, e).energy
    b = analyze_layer(layer, df, hw, e.scaled(s)).energy
    assert Fraction(b) == s * Fraction(a)


@given(st.integers(0, 10 ** 6))
def test_mac_conservation(seed):
    from dataflow_cost.tensors import mac_count_dense

    layer, df, hw = _cfg(seed)
    r = analyze_layer(layer, df, hw)
    assert r.mac_count == mac_count_dense(layer) * layer.density["Input"] * layer.density["Weight"]
