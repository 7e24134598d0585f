"""Performance and cost analysis.

Delay model per cluster level, for steps ``t = 0 .. T-1``:

* ``compute_t`` is the slowest active sub-cluster: its own outstanding delay,
  or ``ceil(MACs / vector_width)`` for a PE;
* ``in_t`` moves Input and Weight elements the sub-clusters do not already
  hold (multicast counted once);
* ``out_t`` writes back outputs that left the sub-clusters between ``t-1``
  and ``t`` (spatially reduced unless disabled); the last step's outputs are
  drained after the schedule.

With double buffering a step costs ``max(compute_t, in_t, out_t)`` and the
first fetch and final drain are exposed; without it a step costs the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .clusters import ClusterHierarchy, hierarchy_for
from .dsl import DIMS, TENSORS, Dataflow, HardwareConfig, LayerSpec, validate_dataflow
from .reuse import INIT, LevelPlan, evaluate_case, final_drain
from .tensors import axis_set, mac_count_dense, tensor_axes

COMPUTE, IN_COMM, OUT_COMM = "Compute", "InComm", "OutComm"


@dataclass(frozen=True)
class EnergyTable:
    mac_op: Fraction = Fraction(1)
    l1_read: Fraction = Fraction(2)
    l1_write: Fraction = Fraction(2)
    l2_read: Fraction = Fraction(20)
    l2_write: Fraction = Fraction(20)
    noc_hop: Fraction = Fraction(0)

    def __post_init__(self):
        for k in self.__dataclass_fields__:
            v = Fraction(getattr(self, k))
            if v < 0:
                raise ValueError(f"energy entry {k} must be nonnegative")
            object.__setattr__(self, k, v)

    def scaled(self, s) -> "EnergyTable":
        return EnergyTable(**{k: getattr(self, k) * Fraction(s) for k in self.__dataclass_fields__})


def parse_energy(text: str) -> EnergyTable:
    from .dsl import DslError, parse_kv

    kv = parse_kv(text)
    bad = set(kv) - set(EnergyTable.__dataclass_fields__)
    if bad:
        raise DslError(f"unknown energy keys: {sorted(bad)}")
    return EnergyTable(**{k: Fraction(v) for k, v in kv.items()})


def noc_delay(elements, hw: HardwareConfig) -> int:
    """Pipe model: ceil(elements / bandwidth) + latency, 0 for no traffic."""
    if elements <= 0:
        return 0
    return -(-math.ceil(elements) // hw.noc_bandwidth) + hw.noc_avg_latency


def step_delay(compute: int, in_el, out_el, hw: HardwareConfig, first: bool = False) -> Tuple[int, str]:
    """Delay of one step and its bottleneck.

    ``first`` marks the opening step, whose fetch is exposed separately under
    double buffering (see ``exposed_delay``).
    """
    if hw.double_buffering and first:
        in_el = 0
    if hw.shared_noc:
        comm = noc_delay(in_el + out_el, hw)
        parts = [(compute, COMPUTE), (comm, IN_COMM if in_el >= out_el else OUT_COMM)]
        if hw.double_buffering:
            d = max(compute, comm)
        else:
            d = compute + comm
    else:
        i, o = noc_delay(in_el, hw), noc_delay(out_el, hw)
        parts = [(compute, COMPUTE), (i, IN_COMM), (o, OUT_COMM)]
        d = max(compute, i, o) if hw.double_buffering else compute + i + o
    best = parts[0]
    for p in parts[1:]:
        if p[0] > best[0]:
            best = p
    return d, best[1]


def case_delay(compute: int, in_el, out_el, hw: HardwareConfig) -> Tuple[int, str]:
    return step_delay(compute, in_el, out_el, hw)


def exposed_delay(first_in, drain, hw: HardwareConfig) -> int:
    """Pipeline fill and drain that overlap nothing."""
    fill = noc_delay(first_in, hw) if hw.double_buffering else 0
    return fill + noc_delay(drain, hw)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


def _num(x):
    x = Fraction(x)
    return int(x) if x.denominator == 1 else x


@dataclass
class AnalysisResult:
    layer: str
    runtime_cycles: int
    mac_count: object
    levels: List[Dict[str, Dict[str, object]]]   # outermost first; levels[0] is L2
    l1: Dict[str, Dict[str, object]]
    l1_requirement_bytes: int
    l2_requirement_bytes: int
    peak_noc_bw_demand: object
    energy: object
    bottleneck: Dict[str, int]
    pe_utilization: object
    noc_traffic: object = 0
    temporal_reduction: bool = False
    l1_feasible: bool = True
    l2_feasible: bool = True
    num_cases: int = 0
    active_pes: int = 0
    cases: List[dict] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.l1_feasible and self.l2_feasible

    def l2(self) -> Dict[str, Dict[str, object]]:
        return self.levels[0]

    def local_accesses_per_fetch(self) -> Dict[str, Optional[Fraction]]:
        out = {}
        for t in TENSORS:
            fetch = Fraction(self.levels[0][t]["reads"] if t != "Output" else self.levels[0][t]["writes"])
            local = Fraction(self.l1[t]["reads"])
            out[t] = local / fetch if fetch else None
        return out

    COMPARED = (
        "runtime_cycles", "mac_count", "levels", "l1", "l1_requirement_bytes", "l2_requirement_bytes",
        "peak_noc_bw_demand", "energy", "bottleneck", "pe_utilization", "noc_traffic",
        "temporal_reduction", "l1_feasible", "l2_feasible",
    )

    def observable(self) -> dict:
        return {k: getattr(self, k) for k in self.COMPARED}


# ---------------------------------------------------------------------------
# recursive level analysis
# ---------------------------------------------------------------------------


@dataclass
class LevelResult:
    runtime: int
    macs: int                       # dense MACs
    moved: List[Dict[str, int]]     # per level below and including this one
    fills: List[Dict[str, int]]
    out_writes: List[int]
    out_distinct: List[int]
    sub_footprint: int              # largest PE footprint (elements)
    footprint: int = 0              # this level: largest union step footprint
    out_footprint: int = 0
    temporal_reduction: bool = False
    peak_bw: Fraction = Fraction(0)
    bottleneck: Dict[str, int] = field(default_factory=dict)
    cases: List[dict] = field(default_factory=list)
    noc: Fraction = Fraction(0)


class _Engine:
    def __init__(self, layer: LayerSpec, h: ClusterHierarchy, hw: HardwareConfig):
        self.layer = layer
        self.h = h
        self.hw = hw
        self.dI = layer.density["Input"]
        self.dW = layer.density["Weight"]
        self.dO = layer.density["Output"]
        self.memo: Dict[Tuple[int, Tuple[int, ...]], LevelResult] = {}
        self.axes = tensor_axes(layer)

    def compute_pe(self, tile: Tuple[int, ...]) -> int:
        macs = math.prod(tile) * self.dI * self.dW
        return math.ceil(macs / self.hw.vector_width)

    def out_volume(self, extents: Dict[str, int]) -> int:
        w = {d: (0, extents[d]) for d in DIMS}
        return math.prod(len(axis_set(a, w)) for a in self.axes["Output"])

    def level(self, idx: int, extents: Tuple[int, ...]) -> LevelResult:
        key = (idx, extents)
        if key in self.memo:
            return self.memo[key]
        res = self._level(idx, dict(zip(DIMS, extents)))
        self.memo[key] = res
        return res

    def _level(self, idx: int, extents: Dict[str, int]) -> LevelResult:
        hw = self.hw
        lv = self.h.levels[idx]
        plan = LevelPlan(self.layer, lv, extents)
        innermost = idx == len(self.h.levels) - 1
        depth = len(self.h.levels) - idx
        moved = [dict.fromkeys(TENSORS, 0) for _ in range(depth)]
        fills = [dict.fromkeys(TENSORS, 0) for _ in range(depth)]
        out_writes = [0] * depth
        out_distinct = [0] * depth
        out_distinct[0] = self.out_volume(extents)
        runtime = 0
        macs = 0
        sub_fp = 0
        fp = 0
        out_fp = 0
        tred = False
        peak = Fraction(0)
        noc = Fraction(0)
        bneck: Dict[str, int] = {}
        table = []
        first_in = 0
        for case in plan.cases():
            sc = evaluate_case(plan, case)
            occ = case.occurrences
            first = all(s == INIT for s in case.states.values())
            # compute term and aggregation of the sub-clusters
            compute = 0
            for tile, n in sc.tiles:
                if innermost:
                    compute = max(compute, self.compute_pe(tile))
                    macs += occ * n * math.prod(tile)
                else:
                    sub = self.level(idx + 1, tile)
                    compute = max(compute, sub.runtime)
                    macs += occ * n * sub.macs
                    for k in range(1, depth):
                        for t in TENSORS:
                            moved[k][t] += occ * n * sub.moved[k - 1][t]
                            fills[k][t] += occ * n * sub.fills[k - 1][t]
                        out_writes[k] += occ * n * sub.out_writes[k - 1]
                        out_distinct[k] += occ * n * sub.out_distinct[k - 1]
                    sub_fp = max(sub_fp, sub.sub_footprint)
            if innermost:
                sub_fp = max(sub_fp, sc.sub_footprint)
            for t in TENSORS:
                moved[0][t] += occ * sc.moved[t]
                fills[0][t] += occ * sc.fills[t]
            em = sc.emitted if hw.spatial_reduction else sc.emitted_sum
            out_writes[0] += occ * em
            fp = max(fp, sum(sc.footprint.values()))
            out_fp = max(out_fp, sc.footprint["Output"])
            tred = tred or sc.output_overlap > 0
            in_el = sc.moved["Input"] * self.dI + sc.moved["Weight"] * self.dW
            out_el = em * self.dO
            if first:
                first_in = in_el
            d, b = step_delay(compute, in_el, out_el, hw, first)
            runtime += occ * d
            bneck[b] = bneck.get(b, 0) + occ
            noc += occ * (in_el + out_el)
            peak = max(peak, (in_el + out_el) / max(compute, 1))
            table.append({"states": dict(case.states), "occurrences": occ, "compute": compute,
                          "in_elements": _num(in_el), "out_elements": _num(out_el),
                          "delay": d, "bottleneck": b})
        drain_red, drain_sum = final_drain(plan)
        drain = drain_red if hw.spatial_reduction else drain_sum
        out_writes[0] += drain
        noc += drain * self.dO
        runtime += exposed_delay(first_in, drain * self.dO, hw)
        return LevelResult(runtime, macs, moved, fills, out_writes, out_distinct, sub_fp, fp, out_fp,
                           tred, peak, bneck, table, noc)


def _volume(layer: LayerSpec, tensor: str) -> int:
    from .tensors import loop_extents

    ext = loop_extents(layer)
    w = {d: (0, ext[d]) for d in DIMS}
    return math.prod(len(axis_set(a, w)) for a in tensor_axes(layer)[tensor])


def assemble(layer: LayerSpec, hw: HardwareConfig, energy: EnergyTable, active_pes: int, top: dict,
             counts: dict) -> AnalysisResult:
    """Build an AnalysisResult from dense totals.  Shared by the analytic
    engine and the oracle so that both apply identical scaling and energy.

    ``counts`` holds, per hierarchy level (outermost first): ``moved``,
    ``fills`` (per-tensor dicts), ``out_writes`` and ``out_distinct``; plus
    ``macs`` and ``pe_footprint``.  ``top`` holds runtime, footprint,
    out_footprint, temporal_reduction, peak_bw, bottleneck and noc.
    """
    dens = layer.density
    eff = counts["macs"] * dens["Input"] * dens["Weight"]
    nlev = len(counts["moved"])
    levels = []
    for k in range(nlev):
        lv = {}
        for t in ("Input", "Weight"):
            writes = _volume(layer, t) if k == 0 else counts["fills"][k - 1][t]
            lv[t] = {"reads": _num(counts["moved"][k][t] * dens[t]), "writes": _num(writes * dens[t])}
        ow = counts["out_writes"][k]
        lv["Output"] = {"reads": _num((ow - counts["out_distinct"][k]) * dens["Output"]),
                        "writes": _num(ow * dens["Output"])}
        levels.append(lv)
    inner_fills = counts["fills"][nlev - 1]
    l1 = {
        "Input": {"reads": _num(eff), "writes": _num(inner_fills["Input"] * dens["Input"])},
        "Weight": {"reads": _num(eff), "writes": _num(inner_fills["Weight"] * dens["Weight"])},
        "Output": {"reads": _num(eff), "writes": _num(eff)},
    }
    db = 2 if hw.double_buffering else 1
    eb = hw.element_bytes
    l1_req = counts["pe_footprint"] * eb * db
    l2_req = top["footprint"] * eb * db + (0 if top["temporal_reduction"] else top["out_footprint"] * eb)
    l1r = sum(Fraction(v["reads"]) for v in l1.values())
    l1w = sum(Fraction(v["writes"]) for v in l1.values())
    l2r = sum(Fraction(v["reads"]) for v in levels[0].values())
    l2w = sum(Fraction(v["writes"]) for v in levels[0].values())
    noc = Fraction(top["noc"])
    e = (energy.mac_op * eff + energy.l1_read * l1r + energy.l1_write * l1w
         + energy.l2_read * l2r + energy.l2_write * l2w + energy.noc_hop * noc)
    runtime = top["runtime"]
    util = Fraction(eff) / (runtime * hw.num_pes * hw.vector_width) if runtime else Fraction(0)
    return AnalysisResult(
        layer=layer.name,
        runtime_cycles=runtime,
        mac_count=_num(eff),
        levels=levels,
        l1=l1,
        l1_requirement_bytes=l1_req,
        l2_requirement_bytes=l2_req,
        peak_noc_bw_demand=_num(top["peak_bw"]),
        energy=_num(e),
        bottleneck=dict(sorted(top["bottleneck"].items())),
        pe_utilization=_num(util),
        noc_traffic=_num(noc),
        temporal_reduction=top["temporal_reduction"],
        l1_feasible=not hw.l1_bytes or l1_req <= hw.l1_bytes,
        l2_feasible=not hw.l2_bytes or l2_req <= hw.l2_bytes,
        active_pes=active_pes,
    )


class ValidationFailed(ValueError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(report.lines()))


def analyze_hierarchy(layer: LayerSpec, h: ClusterHierarchy, hw: HardwareConfig,
                      energy: Optional[EnergyTable] = None) -> AnalysisResult:
    eng = _Engine(layer, h, hw)
    ext = tuple(h.levels[0].dim_sizes[d] for d in DIMS)
    r = eng.level(0, ext)
    noc_total = r.noc
    # traffic of the inner levels, for the noc_hop energy term
    if len(h.levels) > 1:
        noc_total = Fraction(0)
        for k in range(len(h.levels)):
            noc_total += (r.moved[k]["Input"] * layer.density["Input"]
                          + r.moved[k]["Weight"] * layer.density["Weight"]
                          + r.out_writes[k] * layer.density["Output"])
    top = {"runtime": r.runtime, "footprint": r.footprint, "out_footprint": r.out_footprint,
           "temporal_reduction": r.temporal_reduction, "peak_bw": r.peak_bw,
           "bottleneck": r.bottleneck, "noc": noc_total}
    counts = {"moved": r.moved, "fills": r.fills, "out_writes": r.out_writes,
              "out_distinct": r.out_distinct, "macs": r.macs, "pe_footprint": r.sub_footprint}
    res = assemble(layer, hw, energy or EnergyTable(), h.active_pes, top, counts)
    res.num_cases = sum(len(v.cases) for v in eng.memo.values())
    res.cases = [{"level": h.levels[i].level_index, "extents": dict(zip(DIMS, ext)), **row}
                 for (i, ext), v in sorted(eng.memo.items()) for row in v.cases]
    return res


def analyze_layer(layer: LayerSpec, df: Dataflow, hw: HardwareConfig,
                  energy: Optional[EnergyTable] = None, strict: bool = True) -> AnalysisResult:
    rep = validate_dataflow(layer, df, strict=strict)
    if rep.errors:
        raise ValidationFailed(rep)
    return analyze_hierarchy(layer, hierarchy_for(layer, df, hw), hw, energy)


def analyze_level(layer: LayerSpec, h: ClusterHierarchy, hw: HardwareConfig, index: int = 0) -> LevelResult:
    """Analyze one level (and, recursively, the levels below it)."""
    eng = _Engine(layer, h, hw)
    return eng.level(index, tuple(h.levels[index].dim_sizes[d] for d in DIMS))


@dataclass
class NetworkResult:
    layers: List[AnalysisResult]
    runtime_cycles: int
    energy: object
    mac_count: object
    feasible: bool


def analyze_network(pairs: Sequence[Tuple[LayerSpec, Dataflow]], hw: HardwareConfig,
                    energy: Optional[EnergyTable] = None, strict: bool = True) -> NetworkResult:
    results = [analyze_layer(l, d, hw, energy, strict) for l, d in pairs]
    return NetworkResult(
        layers=results,
        runtime_cycles=sum(r.runtime_cycles for r in results),
        energy=_num(sum(Fraction(r.energy) for r in results)),
        mac_count=_num(sum(Fraction(r.mac_count) for r in results)),
        feasible=all(r.feasible for r in results),
    )


__all__ = [
    "EnergyTable", "AnalysisResult", "LevelResult", "NetworkResult", "noc_delay", "case_delay",
    "step_delay", "exposed_delay", "analyze_layer", "analyze_level", "analyze_network",
    "analyze_hierarchy", "assemble", "parse_energy", "ValidationFailed", "mac_count_dense",
]
