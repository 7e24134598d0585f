import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dataflow_cost.dse import (
    Budgets, CostModel, SweepSpace, dominates, hardware_cost, parse_cost, pareto_check, pareto_front,
    parse_sweep, sweep,
)
from dataflow_cost.dsl import HardwareConfig, LayerSpec, parse_dataflow

from conftest import data_text

LAYER = LayerSpec("l", "CONV2D", dict(K=8, C=4, Y=6, X=6, R=3, S=3))
CANDS = [[parse_dataflow("SpatialMap(1,1) K; TemporalMap(1,1) C; TemporalMap(1,1) Yp; TemporalMap(1,1) Xp;"),
          parse_dataflow("SpatialMap(1,1) K; TemporalMap(4,4) C; TemporalMap(1,1) Yp;")]]
CM = parse_cost(data_text("cost_example.txt"))


def test_zero_cost():
    assert hardware_cost(HardwareConfig(num_pes=64, l1_bytes=512, l2_bytes=4096), CostModel()) == (0, 0)


def test_arbiter_quadratic():
    cm = CostModel(arbiter_area=1, arbiter_power=1)
    a4, p4 = hardware_cost(HardwareConfig(num_pes=4), cm)
    a8, p8 = hardware_cost(HardwareConfig(num_pes=8), cm)
    assert a8 == 4 * a4 and p8 == 4 * p4


def test_cost_formula():
    cm = CostModel(pe_area=3, sram_area_per_byte=2, bus_area=5, arbiter_area=7)
    hw = HardwareConfig(num_pes=4, l1_bytes=10, l2_bytes=100, noc_bandwidth=2)
    assert hardware_cost(hw, cm)[0] == 4 * 3 + (40 + 100) * 2 + 4 * 2 * 5 + 16 * 7


def test_case_study_budget_shape():
    # 16 mm^2 and 450 mW expressed in um^2 and mW
    b = Budgets(area=Fraction(16 * 10 ** 6), power=Fraction(450))
    area, power = hardware_cost(HardwareConfig(num_pes=256, l1_bytes=512, l2_bytes=1 << 20, noc_bandwidth=64), CM)
    assert b.ok(area, power) == (area <= 16 * 10 ** 6 and power <= 450)


def test_negative_coefficient():
    with pytest.raises(ValueError):
        CostModel(pe_area=-1)


def test_bad_sweep():
    with pytest.raises(ValueError):
        parse_sweep(["num_pes=8:4:1"])
    with pytest.raises(ValueError):
        parse_sweep(["num_pes=1:4"])
    with pytest.raises(ValueError):
        SweepSpace({"dram": (1, 2, 1)})


def test_bad_objective():
    with pytest.raises(ValueError):
        sweep([LAYER], CANDS, parse_sweep([]), CM, Budgets(), objective="latency")


SPACE = parse_sweep(["num_pes=2:8:2", "l1_bytes=32:256:32", "l2_bytes=128:1024:128", "noc_bandwidth=1:4:1"])


def test_unbounded_budgets_keep_full_grid():
    res = sweep([LAYER], CANDS, SPACE, CM, Budgets())
    assert len(res.points) == SPACE.size(HardwareConfig(num_pes=1)) and res.pruned == 0


def test_valid_points_respect_budgets():
    b = Budgets(area=Fraction(20000), power=Fraction(40))
    res = sweep([LAYER], CANDS, SPACE, CM, b)
    assert res.valid
    for p in res.valid:
        area, power = hardware_cost(p.hw, CM)
        assert area <= b.area and power <= b.power
        assert all(r.l1_requirement_bytes <= p.hw.l1_bytes and r.l2_requirement_bytes <= p.hw.l2_bytes
                   for r in p.analysis.layers)


def test_front_contains_axis_optima():
    res = sweep([LAYER], CANDS, SPACE, CM, Budgets(area=Fraction(30000)))
    front = {id(p) for p in res.front}
    assert id(min(res.valid, key=lambda p: (p.runtime, p.energy))) in front
    assert id(min(res.valid, key=lambda p: (p.energy, p.runtime))) in front


def test_csv_deterministic():
    a = sweep([LAYER], CANDS, SPACE, CM, Budgets(area=Fraction(15000)))
    b = sweep([LAYER], CANDS, SPACE, CM, Budgets(area=Fraction(15000)))
    assert a.csv() == b.csv()
    assert a.csv().splitlines()[0] == ("num_pes,l1_bytes,l2_bytes,noc_bandwidth,area,power,"
                                       "runtime_cycles,energy,edp,valid,pareto")


def test_empty_valid_set():
    res = sweep([LAYER], CANDS, SPACE, CM, Budgets(area=Fraction(1)))
    assert res.best is None and res.valid == []


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), st.sampled_from(["throughput", "energy", "edp"]))
def test_pruned_equals_exhaustive(seed, objective):
    rng = random.Random(seed)
    space = parse_sweep([f"num_pes={rng.randint(1, 3)}:{rng.randint(4, 8)}:{rng.randint(1, 2)}",
                         f"l1_bytes=16:{rng.choice([64, 128, 256])}:16",
                         f"l2_bytes=64:{rng.choice([256, 512])}:64",
                         f"noc_bandwidth=1:{rng.randint(1, 4)}:1"])
    budgets = Budgets(area=Fraction(rng.randint(3000, 30000)), power=Fraction(rng.randint(10, 60)))
    kw = dict(objective=objective)
    a = sweep([LAYER], CANDS, space, CM, budgets, prune=True, **kw)
    b = sweep([LAYER], CANDS, space, CM, budgets, prune=False, **kw)
    assert [p.config() for p in a.valid] == [p.config() for p in b.valid]
    assert (a.best and a.best.config()) == (b.best and b.best.config())
    assert [p.config() for p in a.front] == [p.config() for p in b.front]


def test_pareto_small_cases():
    assert pareto_front([(1, 2)], key=lambda p: p) == [(1, 2)]
    assert pareto_front([(1, 2), (2, 3)], key=lambda p: p) == [(1, 2)]
    assert pareto_front([(1, 3), (3, 1)], key=lambda p: p) == [(1, 3), (3, 1)]


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 9)), max_size=40))
def test_pareto_matches_quadratic_check(pts):
    front = pareto_front(pts, key=lambda p: p)
    assert pareto_check(pts, front, key=lambda p: p)
    for p in front:
        assert not any(dominates(q, p) for q in pts)
