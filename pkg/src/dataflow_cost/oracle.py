"""Brute-force reference simulator.

Every level is walked step by step; every sub-cluster's tile is expanded
into explicit index tuples for all three tensors.  Fetches, write-backs and
footprints come from plain set operations between consecutive steps and
across sub-clusters.  Directive interpretation is written from scratch here
and shares nothing with the analytic engines except the delay rule and the
final density/energy bookkeeping (``perf.assemble``).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Tuple

from .dsl import Dataflow, HardwareConfig, LayerSpec
from .perf import AnalysisResult, EnergyTable, assemble, exposed_delay, step_delay

ORDER = ("N", "K", "C", "Y", "X", "R", "S")


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class Mapping:
    dims: Dict[str, set]
    tensors: Dict[str, set]


@dataclass
class OracleResult:
    result: AnalysisResult
    trace: List[str] = field(default_factory=list)
    contributions: Counter = field(default_factory=Counter)

    def __getattr__(self, name):
        return getattr(self.__dict__["result"], name)


# ---------------------------------------------------------------------------
# directive interpretation
# ---------------------------------------------------------------------------


def _out_size(n, f, st, transposed):
    return st * (n - 1) + f if transposed else (n - f) // st + 1


class _Model:
    def __init__(self, layer: LayerSpec, df: Dataflow, hw: HardwareConfig):
        self.layer = layer
        self.hw = hw
        d = layer.dims
        self.tr = layer.op_type == "TRCONV"
        self.chan = layer.op_type in ("DWCONV", "POOL")
        self.sy, self.sx = layer.stride_y, layer.stride_x
        self.ext = dict(d)
        if not self.tr:
            self.ext["Y"] = _out_size(d["Y"], d["R"], self.sy, False)
            self.ext["X"] = _out_size(d["X"], d["S"], self.sx, False)
        groups: List[list] = [[]]
        sizes: List[int] = []
        for dv in df.directives:
            if dv.kind == "Cluster":
                sizes.append(dv.size)
                groups.append([])
            else:
                groups[-1].append(self._loop(dv))
        per = math.prod(sizes)
        if hw.num_pes < per:
            raise ValueError("not enough PEs for the cluster sizes")
        self.nsub = [hw.num_pes // per] + sizes
        self.active = self.nsub[0] * per
        # nominal extents per level, for augmentation of missing dims
        self.levels = []
        ext = dict(self.ext)
        for g in groups:
            g = [(k, dm, min(sz, ext[dm]), off) for k, dm, sz, off in g]
            have = {x[1] for x in g}
            g += [("TemporalMap", dm, ext[dm], ext[dm]) for dm in ORDER if dm not in have]
            self.levels.append(g)
            ext = dict(ext)
            for _, dm, sz, _ in g:
                ext[dm] = sz

    def _loop(self, dv):
        dim, size, off = dv.dim, dv.size, dv.offset
        if dim in ("Yp", "Xp"):
            return (dv.kind, dim[0], size, off)
        if dim in ("Y", "X") and not self.tr:
            st = self.sy if dim == "Y" else self.sx
            f = self.layer.dims["R" if dim == "Y" else "S"]
            return (dv.kind, dim, (size - f) // st + 1, off // st)
        return (dv.kind, dim, size, off)

    @staticmethod
    def starts(extent, size, off):
        out = [0]
        while out[-1] + size < extent and out[-1] + off < extent:
            out.append(out[-1] + off)
        return out

    def schedule(self, idx: int, lo: Dict[str, int], hi: Dict[str, int]):
        """Yield, per step, the list of sub-cluster windows (None = idle)."""
        loops = self.levels[idx]
        n = self.nsub[idx]
        has_spatial = any(k == "SpatialMap" for k, *_ in loops)
        ranges = []
        for kind, dim, size, off in loops:
            st = self.starts(hi[dim] - lo[dim], size, off)
            if kind == "SpatialMap":
                ranges.append([st[j:j + n] for j in range(0, len(st), n)])
            else:
                ranges.append(st)
        for combo in product(*ranges):
            base_lo, base_hi = dict(lo), dict(hi)
            chunk = None
            for (kind, dim, size, off), v in zip(loops, combo):
                if kind == "SpatialMap":
                    chunk = (dim, size, v)
                    continue
                base_lo[dim] = lo[dim] + v
                base_hi[dim] = min(lo[dim] + v + size, hi[dim])
            wins: List[Optional[Tuple[dict, dict]]] = []
            for i in range(n):
                if chunk is None:
                    wins.append((base_lo, base_hi) if i == 0 or has_spatial else None)
                    continue
                dim, size, starts = chunk
                if i >= len(starts):
                    wins.append(None)
                    continue
                a, b = dict(base_lo), dict(base_hi)
                a[dim] = lo[dim] + starts[i]
                b[dim] = min(a[dim] + size, hi[dim])
                wins.append((a, b))
            yield wins

    def macs(self, a, b):
        return product(*[range(a[d], b[d]) for d in ORDER])

    def touch(self, a, b):
        ins, ws, outs = set(), set(), set()
        for n, k, c, y, x, r, s in self.macs(a, b):
            ins.add(self.input_index(n, c, y, x, r, s))
            ws.add((c, r, s) if self.chan else (k, c, r, s))
            outs.add(self.output_index(n, k, c, y, x, r, s))
        return {"Input": ins, "Weight": ws, "Output": outs}

    def input_index(self, n, c, y, x, r, s):
        if self.tr:
            return (n, c, y, x)
        return (n, c, y * self.sy + r, x * self.sx + s)

    def output_index(self, n, k, c, y, x, r, s):
        ch = c if self.chan else k
        if self.tr:
            return (n, ch, y * self.sy + r, x * self.sx + s)
        return (n, ch, y, x)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


class _Sim:
    def __init__(self, model: _Model, trace: bool):
        self.m = model
        self.hw = model.hw
        dn = model.layer.density
        self.dI, self.dW, self.dO = dn["Input"], dn["Weight"], dn["Output"]
        self.nlev = len(model.levels)
        self.moved = [Counter() for _ in range(self.nlev)]
        self.fills = [Counter() for _ in range(self.nlev)]
        self.out_writes = [0] * self.nlev
        self.out_distinct = [0] * self.nlev
        self.macs = 0
        self.pe_fp = 0
        self.contrib: Counter = Counter()
        self.trace_on = trace
        self.trace: List[str] = []
        self.top: dict = {}

    def run(self):
        lo = dict.fromkeys(ORDER, 0)
        hi = dict(self.m.ext)
        self.top = self.level(0, lo, hi, path="")
        return self

    def level(self, idx, lo, hi, path):
        hw = self.hw
        inner = idx == self.nlev - 1
        prev_sets: Optional[List[Optional[dict]]] = None
        runtime = 0
        first_in = 0
        fp = out_fp = 0
        tred = False
        peak = Fraction(0)
        noc = Fraction(0)
        bneck: Counter = Counter()
        emitted_all = set()
        emitted_n = 0
        cur_sets = None
        for t, wins in enumerate(self.m.schedule(idx, lo, hi)):
            cur_sets = [self.m.touch(*w) if w else None for w in wins]
            compute = 0
            for i, w in enumerate(wins):
                if w is None:
                    continue
                if inner:
                    nm = math.prod(w[1][d] - w[0][d] for d in ORDER)
                    self.macs += nm
                    for mac in self.m.macs(*w):
                        self.contrib[mac] += 1
                    c = math.ceil(nm * self.dI * self.dW / hw.vector_width)
                    self.pe_fp = max(self.pe_fp, sum(len(v) for v in cur_sets[i].values()))
                else:
                    c = self.level(idx + 1, w[0], w[1], f"{path}{i}.{t}/")
                compute = max(compute, c)
                if self.trace_on:
                    for tn, s in cur_sets[i].items():
                        for ix in sorted(s):
                            self.trace.append(f"{idx},{path}{i},{t},{tn},{ix}")
            moved = {}
            for tn in ("Input", "Weight", "Output"):
                union_new, fill = set(), 0
                for i, s in enumerate(cur_sets):
                    if s is None:
                        continue
                    old = prev_sets[i][tn] if prev_sets and prev_sets[i] else set()
                    new = s[tn] - old
                    union_new |= new
                    fill += len(new)
                moved[tn] = len(union_new)
                self.fills[idx][tn] += fill
                if tn != "Output":
                    self.moved[idx][tn] += len(union_new)
            out_now = set().union(*[s["Output"] for s in cur_sets if s])
            fp = max(fp, sum(len(set().union(*[s[tn] for s in cur_sets if s]))
                             for tn in ("Input", "Weight", "Output")))
            out_fp = max(out_fp, len(out_now))
            em = 0
            if prev_sets is not None:
                left, left_n = set(), 0
                for i, p in enumerate(prev_sets):
                    if p is None:
                        continue
                    now = cur_sets[i]["Output"] if cur_sets[i] else set()
                    gone = p["Output"] - now
                    left |= gone
                    left_n += len(gone)
                em = len(left) if hw.spatial_reduction else left_n
                emitted_all |= left
                prev_out = set().union(*[p["Output"] for p in prev_sets if p])
                tred = tred or bool(prev_out & out_now)
            emitted_n += em
            in_el = moved["Input"] * self.dI + moved["Weight"] * self.dW
            out_el = em * self.dO
            if t == 0:
                first_in = in_el
            d, b = step_delay(compute, in_el, out_el, hw, first=(t == 0))
            runtime += d
            bneck[b] += 1
            noc += in_el + out_el
            peak = max(peak, (in_el + out_el) / max(compute, 1))
            prev_sets = cur_sets
        last = [s["Output"] for s in cur_sets if s]
        drain = len(set().union(*last)) if hw.spatial_reduction else sum(len(s) for s in last)
        emitted_n += drain
        noc += drain * self.dO
        runtime += exposed_delay(first_in, drain * self.dO, hw)
        self.out_writes[idx] += emitted_n
        self.out_distinct[idx] += len(emitted_all | set().union(*last))
        if idx == 0:
            return {"runtime": runtime, "footprint": fp, "out_footprint": out_fp,
                    "temporal_reduction": tred, "peak_bw": peak, "bottleneck": dict(bneck), "noc": noc}
        return runtime


def simulate(layer: LayerSpec, df: Dataflow, hw: HardwareConfig, energy: Optional[EnergyTable] = None,
             budget: int = 10 ** 6, trace: bool = False) -> OracleResult:
    """Walk every step of every level and count exactly."""
    model = _Model(layer, df, hw)
    total = math.prod(model.ext.values())
    if total > budget:
        raise BudgetExceeded(f"{total} MACs exceed the oracle budget of {budget}")
    sim = _Sim(model, trace).run()
    top = dict(sim.top)
    top["noc"] = sum(sim.moved[k]["Input"] * sim.dI + sim.moved[k]["Weight"] * sim.dW
                     + sim.out_writes[k] * sim.dO for k in range(sim.nlev))
    counts = {
        "moved": [dict(m) for m in sim.moved],
        "fills": [dict(f) for f in sim.fills],
        "out_writes": sim.out_writes,
        "out_distinct": sim.out_distinct,
        "macs": sim.macs,
        "pe_footprint": sim.pe_fp,
    }
    for k in range(sim.nlev):
        for tn in ("Input", "Weight", "Output"):
            counts["moved"][k].setdefault(tn, 0)
            counts["fills"][k].setdefault(tn, 0)
    res = assemble(layer, hw, energy or EnergyTable(), model.active, top, counts)
    return OracleResult(res, sim.trace, sim.contrib)


def mapped_indices(layer: LayerSpec, df: Dataflow, hw: HardwareConfig, level: int, subcluster: int, t: int,
                   path: Tuple[Tuple[int, int], ...] = ()) -> Mapping:
    """Index sets held by one sub-cluster at one step.

    ``level`` counts from the outermost level (0).  ``path`` fixes the
    (sub-cluster, step) chosen at each enclosing level; it defaults to the
    first sub-cluster and first step.
    """
    m = _Model(layer, df, hw)
    lo = dict.fromkeys(ORDER, 0)
    hi = dict(m.ext)
    path = list(path) + [(0, 0)] * (level - len(path))
    for idx in range(level + 1):
        i, step = (subcluster, t) if idx == level else path[idx]
        steps = list(m.schedule(idx, lo, hi))
        if not 0 <= step < len(steps):
            raise IndexError(f"step {step} outside schedule of length {len(steps)}")
        w = steps[step][i]
        if w is None:
            return Mapping({}, {"Input": set(), "Weight": set(), "Output": set()})
        lo, hi = w
    names = {d: (d + "p" if d in ("Y", "X") and not m.tr else d) for d in ORDER}
    return Mapping({names[d]: set(range(lo[d], hi[d])) for d in ORDER}, m.touch(lo, hi))


def coverage(layer: LayerSpec, df: Dataflow, hw: HardwareConfig) -> Tuple[int, int, int]:
    """(missing, duplicated, total) MAC contributions of the full schedule."""
    res = simulate(layer, df, hw)
    m = _Model(layer, df, hw)
    total = math.prod(m.ext.values())
    seen = res.contributions
    dup = sum(v - 1 for v in seen.values() if v > 1)
    return total - len(seen), dup, total


def compare(a: AnalysisResult, b) -> List[str]:
    """Field-by-field diff; empty when everything matches exactly."""
    if isinstance(b, OracleResult):
        b = b.result
    out = []
    oa, ob = a.observable(), b.observable()
    for k in AnalysisResult.COMPARED:
        if oa[k] != ob[k]:
            out.append(f"{k}: analytic={oa[k]!r} oracle={ob[k]!r}")
    return out
