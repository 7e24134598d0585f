"""Hardware design-space exploration with bound-based pruning."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .dsl import Dataflow, DslError, HardwareConfig, LayerSpec, parse_kv
from .perf import EnergyTable, NetworkResult, analyze_layer

PARAMS = ("num_pes", "l2_bytes", "l1_bytes", "noc_bandwidth")   # sweep order, outermost first
CSV_COLUMNS = ("num_pes", "l1_bytes", "l2_bytes", "noc_bandwidth", "area", "power",
               "runtime_cycles", "energy", "edp", "valid", "pareto")
OBJECTIVES = ("throughput", "energy", "edp")


@dataclass(frozen=True)
class CostModel:
    pe_area: Fraction = Fraction(0)
    pe_power: Fraction = Fraction(0)
    sram_area_per_byte: Fraction = Fraction(0)
    sram_power_per_byte: Fraction = Fraction(0)
    bus_area: Fraction = Fraction(0)       # per (endpoint x bandwidth)
    bus_power: Fraction = Fraction(0)
    arbiter_area: Fraction = Fraction(0)   # per endpoint^2
    arbiter_power: Fraction = Fraction(0)

    def __post_init__(self):
        for k in self.__dataclass_fields__:
            v = Fraction(getattr(self, k))
            if v < 0:
                raise ValueError(f"cost coefficient {k} must be nonnegative")
            object.__setattr__(self, k, v)


def parse_cost(text: str) -> CostModel:
    kv = parse_kv(text)
    bad = set(kv) - set(CostModel.__dataclass_fields__)
    if bad:
        raise DslError(f"unknown cost keys: {sorted(bad)}")
    return CostModel(**{k: Fraction(v) for k, v in kv.items()})


def hardware_cost(hw: HardwareConfig, cm: CostModel) -> Tuple[Fraction, Fraction]:
    """Area and power: PEs, SRAM, a bus linear in endpoints x bandwidth and
    an arbiter quadratic in endpoints."""
    p = hw.num_pes
    sram = hw.l1_bytes * p + hw.l2_bytes
    bus = p * hw.noc_bandwidth
    area = p * cm.pe_area + sram * cm.sram_area_per_byte + bus * cm.bus_area + p * p * cm.arbiter_area
    power = p * cm.pe_power + sram * cm.sram_power_per_byte + bus * cm.bus_power + p * p * cm.arbiter_power
    return area, power


@dataclass(frozen=True)
class SweepSpace:
    ranges: Dict[str, Tuple[int, int, int]]

    def __post_init__(self):
        for k, (lo, hi, st) in self.ranges.items():
            if k not in PARAMS:
                raise ValueError(f"unknown sweep parameter {k!r}")
            if lo > hi or st < 1:
                raise ValueError(f"bad range for {k}: {lo}:{hi}:{st}")

    def values(self, param: str, base: int) -> List[int]:
        if param not in self.ranges:
            return [base]
        lo, hi, st = self.ranges[param]
        return list(range(lo, hi + 1, st))

    def size(self, base: HardwareConfig) -> int:
        n = 1
        for p in PARAMS:
            n *= len(self.values(p, getattr(base, p)))
        return n


def parse_sweep(items: Iterable[str]) -> SweepSpace:
    ranges = {}
    for it in items:
        try:
            k, v = it.split("=", 1)
            lo, hi, st = (int(x) for x in v.split(":"))
        except ValueError as e:
            raise ValueError(f"bad --sweep item {it!r}, expected param=min:max:step") from e
        ranges[k.strip()] = (lo, hi, st)
    return SweepSpace(ranges)


@dataclass(frozen=True)
class Budgets:
    area: Optional[Fraction] = None
    power: Optional[Fraction] = None

    def ok(self, area, power) -> bool:
        return (self.area is None or area <= self.area) and (self.power is None or power <= self.power)


@dataclass
class DesignPoint:
    hw: HardwareConfig
    area: Fraction
    power: Fraction
    analysis: Optional[NetworkResult]
    valid: bool
    pareto: bool = False
    choice: Optional[Tuple[int, ...]] = None   # candidate dataflow index per layer

    @property
    def runtime(self):
        return self.analysis.runtime_cycles if self.analysis else None

    @property
    def energy(self):
        return Fraction(self.analysis.energy) if self.analysis else None

    @property
    def edp(self):
        return self.energy * self.runtime if self.analysis else None

    def config(self) -> Tuple[int, int, int, int]:
        return (self.hw.num_pes, self.hw.l1_bytes, self.hw.l2_bytes, self.hw.noc_bandwidth)

    def objective(self, name: str):
        return {"throughput": self.runtime, "energy": self.energy, "edp": self.edp}[name]


AXES: Dict[str, Callable[[DesignPoint], object]] = {
    "runtime": lambda p: p.runtime,
    "energy": lambda p: p.energy,
    "area": lambda p: p.area,
    "power": lambda p: p.power,
}


def dominates(a: Sequence, b: Sequence) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(points: Sequence, axes: Sequence[str] = ("runtime", "energy"), key=None) -> List:
    """Non-dominated subset under minimization, in input order."""
    if key is None:
        key = lambda p: tuple(AXES[a](p) for a in axes)
    vals = [key(p) for p in points]
    # equal values never dominate each other, so only distinct values matter
    best: List[Tuple] = []
    keep = set()
    for v in sorted(set(vals)):
        if not any(dominates(b, v) for b in best):
            best.append(v)
            keep.add(v)
    return [p for p, v in zip(points, vals) if v in keep]


def pareto_check(points: Sequence, front: Sequence, axes=("runtime", "energy"), key=None) -> bool:
    """Quadratic reference: front == {p : no q dominates p}, compared
    pairwise over the distinct objective vectors."""
    if key is None:
        key = lambda p: tuple(AXES[a](p) for a in axes)
    distinct = set(key(p) for p in points)
    ok = {v for v in distinct if not any(dominates(u, v) for u in distinct)}
    expect = [p for p in points if key(p) in ok]
    return [id(p) for p in expect] == [id(p) for p in front]


@dataclass
class SweepResult:
    points: List[DesignPoint]
    best: Optional[DesignPoint]
    front: List[DesignPoint]
    grid_size: int
    analyzed: int
    analyses: int
    pruned: int
    seconds: float
    objective: str = "edp"

    @property
    def valid(self) -> List[DesignPoint]:
        return [p for p in self.points if p.valid]

    def rates(self) -> Dict[str, float]:
        s = max(self.seconds, 1e-9)
        return {"analyzed_points_per_s": self.analyzed / s, "analyses_per_s": self.analyses / s,
                "effective_designs_per_s": self.grid_size / s}

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.valid:
            w.writerow([p.hw.num_pes, p.hw.l1_bytes, p.hw.l2_bytes, p.hw.noc_bandwidth,
                        _fmt(p.area), _fmt(p.power), p.runtime, _fmt(p.energy), _fmt(p.edp),
                        int(p.valid), int(p.pareto)])
        return buf.getvalue()


def _fmt(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{float(x):.6g}"


def _min_cost(base: HardwareConfig, fixed: Dict[str, int], space: SweepSpace, cm: CostModel):
    kw = {p: fixed.get(p, space.values(p, getattr(base, p))[0]) for p in PARAMS}
    return hardware_cost(replace(base, **kw), cm)


def _select(cands, hw: HardwareConfig, objective: str):
    """Best feasible candidate per layer under the point's buffer sizes."""
    chosen = []
    for layer_cands in cands:
        ok = [(i, r) for i, r in enumerate(layer_cands) if r is not None and _fits(r, hw)]
        if not ok:
            return None
        metric = {
            "throughput": lambda r: (r.runtime_cycles, Fraction(r.energy)),
            "energy": lambda r: (Fraction(r.energy), r.runtime_cycles),
            "edp": lambda r: (Fraction(r.energy) * r.runtime_cycles,),
        }[objective]
        chosen.append(min(ok, key=lambda ir: (metric(ir[1]), ir[0])))
    return chosen


def sweep(layers: Sequence[LayerSpec], dataflows: Sequence[Sequence[Dataflow]], space: SweepSpace,
          cm: CostModel, budgets: Budgets, objective: str = "edp", base: Optional[HardwareConfig] = None,
          energy: Optional[EnergyTable] = None, prune: bool = True,
          pareto_axes: Sequence[str] = ("runtime", "energy")) -> SweepResult:
    """Nested sweep num_pes -> l2 -> l1 -> bandwidth.

    ``dataflows[i]`` lists candidate dataflows for ``layers[i]``; at every
    design point each layer uses its best candidate (by ``objective``) that
    fits the point's buffers.  With one candidate per layer this is a plain
    fixed-dataflow sweep.

    Before entering the loops below a parameter value, the cheapest point of
    that subspace (all remaining parameters at their minima) is costed; if it
    breaks a budget, the rest of that parameter's range is skipped, which is
    sound because cost never decreases in any parameter.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if len(layers) != len(dataflows):
        raise ValueError("one candidate list per layer is required")
    base = base or HardwareConfig(num_pes=1)
    energy = energy or EnergyTable()
    t0 = time.perf_counter()
    cache: Dict[Tuple[int, int], list] = {}
    points: List[DesignPoint] = []
    stats = {"analyzed": 0, "analyses": 0, "visited": 0}

    def candidates(hw: HardwareConfig) -> list:
        # buffer capacities only decide feasibility, so analyses are shared
        key = (hw.num_pes, hw.noc_bandwidth)
        if key not in cache:
            free = replace(hw, l1_bytes=0, l2_bytes=0)
            rows = []
            for layer, cands in zip(layers, dataflows):
                row = []
                for df in cands:
                    stats["analyses"] += 1
                    try:
                        row.append(analyze_layer(layer, df, free, energy))
                    except (DslError, ValueError):
                        row.append(None)
                rows.append(row)
            cache[key] = rows
        return cache[key]

    def rec(depth: int, fixed: Dict[str, int]):
        if depth == len(PARAMS):
            stats["visited"] += 1
            hw = replace(base, **fixed)
            area, power = hardware_cost(hw, cm)
            in_budget = budgets.ok(area, power)
            res = None
            choice = None
            if in_budget:
                chosen = _select(candidates(hw), hw, objective)
                if chosen is not None:
                    stats["analyzed"] += 1
                    choice = tuple(i for i, _ in chosen)
                    res = _network([r for _, r in chosen])
            points.append(DesignPoint(hw, area, power, res, res is not None, choice=choice))
            return
        p = PARAMS[depth]
        for v in space.values(p, getattr(base, p)):
            f = dict(fixed, **{p: v})
            if prune and not budgets.ok(*_min_cost(base, f, space, cm)):
                break
            rec(depth + 1, f)

    rec(0, {})
    valid = [p for p in points if p.valid]
    front = pareto_front(valid, pareto_axes)
    for p in front:
        p.pareto = True
    best = min(valid, key=lambda p: (p.objective(objective), p.area, p.power, p.config())) if valid else None
    grid = space.size(base)
    return SweepResult(points, best, front, grid, stats["analyzed"], stats["analyses"],
                       grid - stats["visited"], time.perf_counter() - t0, objective)


def sweep_pairs(pairs: Sequence[Tuple[LayerSpec, Dataflow]], space: SweepSpace, cm: CostModel,
                budgets: Budgets, **kw) -> SweepResult:
    return sweep([l for l, _ in pairs], [[d] for _, d in pairs], space, cm, budgets, **kw)


def _network(results) -> NetworkResult:
    from .perf import _num

    return NetworkResult(
        layers=list(results),
        runtime_cycles=sum(r.runtime_cycles for r in results),
        energy=_num(sum(Fraction(r.energy) for r in results)),
        mac_count=_num(sum(Fraction(r.mac_count) for r in results)),
        feasible=True,
    )


def _fits(r, hw: HardwareConfig) -> bool:
    return ((not hw.l1_bytes or r.l1_requirement_bytes <= hw.l1_bytes)
            and (not hw.l2_bytes or r.l2_requirement_bytes <= hw.l2_bytes))
