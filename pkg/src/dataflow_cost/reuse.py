"""Iteration cases, prime changing dimension, and per-case reuse.

A level's schedule is a loop nest in directive order.  Every loop whose
trip count exceeds one takes three states: ``Init`` (first position),
``Steady`` (full windows after the first) and ``Edge`` (a final, shorter
window).  Steps sharing the same state vector are equivalent up to a
translation, so one representative step per case gives exact counts.

Tensor index sets are products of per-axis sets.  Sub-clusters differ only
on the axis carrying the spatially mapped dimension, which keeps unions and
differences across sub-clusters in closed form::

    |U_i (P_i x Q  minus  P'_i x Q')| = |U P_i| * |Q - Q'| + |U (P_i - P'_i)| * |Q & Q'|
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

from .clusters import ClusterLevel, Loop, chunk_count
from .dsl import DIMS, TENSORS, LayerSpec
from .tensors import Axis, axis_set, loop_coupling, reduction_dims, tensor_axes, windowed_pairs

INIT, STEADY, EDGE = "Init", "Steady", "Edge"

Window = Tuple[int, int]


@dataclass(frozen=True)
class PlannedLoop:
    loop: Loop
    count: int      # trip count (folds for a SpatialMap)
    chunks: int     # window positions along the dimension
    edge: bool      # last trip differs from the steady ones


@dataclass
class IterationCase:
    states: Dict[str, str]
    occurrences: int

    def key(self) -> Tuple[str, ...]:
        return tuple(self.states.values())


@dataclass
class ReuseProfile:
    unique_elements_per_step: int
    temporally_reused_elements: int
    spatial_multicast_factor: int
    spatial_reduction_factor: int
    temporal_reduction: bool
    neighbor_shared_elements: int = 0


class LevelPlan:
    """Schedule of one cluster level for a concrete tile extent."""

    def __init__(self, layer: LayerSpec, level: ClusterLevel, extents: Optional[Dict[str, int]] = None):
        self.layer = layer
        self.level = level
        self.extents = dict(extents or level.dim_sizes)
        self.nsub = level.num_subclusters
        self.loops: List[PlannedLoop] = []
        self.spatial: Optional[int] = None
        for lp in level.loops:
            e = self.extents[lp.dim]
            p = chunk_count(e, lp.size, lp.offset)
            if lp.spatial:
                self.spatial = len(self.loops)
                count = -(-p // self.nsub)
                last_active = p - (count - 1) * self.nsub
                last_len = min(lp.size, e - (p - 1) * lp.offset)
                edge = count > 1 and (last_active < self.nsub or last_len < min(lp.size, e))
            else:
                count = p
                edge = count > 1 and e - (p - 1) * lp.offset < lp.size
            self.loops.append(PlannedLoop(lp, count, p, edge))
        self.active = list(self.rolled())
        self.axes = tensor_axes(layer)
        self.sdim = level.loops[self.spatial].dim if self.spatial is not None else None

    def rolled(self):
        return (i for i, pl in enumerate(self.loops) if pl.count > 1)

    def total_steps(self) -> int:
        n = 1
        for pl in self.loops:
            n *= pl.count
        return n

    # -- windows ----------------------------------------------------------
    def step(self, pos: Sequence[int]) -> Tuple[Dict[str, Window], List[Optional[Window]]]:
        """Shared windows and the per sub-cluster window of the spatial
        dimension (None = idle) at loop positions ``pos``."""
        base: Dict[str, Window] = {d: (0, self.extents[d]) for d in DIMS}
        for pl, p in zip(self.loops, pos):
            lp = pl.loop
            if lp.spatial:
                continue
            lo = p * lp.offset
            base[lp.dim] = (lo, min(lo + lp.size, self.extents[lp.dim]))
        if self.spatial is None:
            return base, [base[DIMS[0]]] + [None] * (self.nsub - 1)
        pl = self.loops[self.spatial]
        lp = pl.loop
        e = self.extents[lp.dim]
        first = pos[self.spatial] * self.nsub
        spans: List[Optional[Window]] = []
        for c in range(first, first + self.nsub):
            if c >= pl.chunks:
                spans.append(None)
            else:
                lo = c * lp.offset
                spans.append((lo, min(lo + lp.size, e)))
        return base, spans

    def windows(self, pos: Sequence[int]) -> List[Optional[Dict[str, Window]]]:
        """Per sub-cluster windows at loop positions ``pos`` (None = idle)."""
        base, spans = self.step(pos)
        if self.spatial is None:
            return [base if sp is not None else None for sp in spans]
        out = []
        for sp in spans:
            if sp is None:
                out.append(None)
            else:
                w = dict(base)
                w[self.sdim] = sp
                out.append(w)
        return out

    # -- cases -------------------------------------------------------------
    def state_counts(self, i: int) -> Dict[str, int]:
        pl = self.loops[i]
        if pl.count == 1:
            return {INIT: 1}
        steady = pl.count - 1 - (1 if pl.edge else 0)
        out = {INIT: 1}
        if steady:
            out[STEADY] = steady
        if pl.edge:
            out[EDGE] = 1
        return out

    def cases(self) -> List[IterationCase]:
        names = [self.loops[i].loop.dim for i in self.active]
        per = [self.state_counts(i) for i in self.active]
        out = []
        for combo in product(*[list(c.items()) for c in per]):
            occ = 1
            for _, n in combo:
                occ *= n
            out.append(IterationCase({nm: s for nm, (s, _) in zip(names, combo)}, occ))
        return out

    def positions(self, case: IterationCase) -> Tuple[List[int], Optional[List[int]]]:
        """Representative positions for a case and for the step before it."""
        pos = [0] * len(self.loops)
        for i in self.active:
            st = case.states[self.loops[i].loop.dim]
            pos[i] = 0 if st == INIT else (1 if st == STEADY else self.loops[i].count - 1)
        adv = None
        for i in self.active:
            if pos[i] > 0:
                adv = i
        if adv is None:
            return pos, None
        prev = list(pos)
        prev[adv] -= 1
        for i in self.active:
            if i > adv:
                prev[i] = self.loops[i].count - 1
        return pos, prev

    def last_positions(self) -> List[int]:
        return [pl.count - 1 for pl in self.loops]


# ---------------------------------------------------------------------------
# set arithmetic on axis sets
# ---------------------------------------------------------------------------


# Axis sets are either half-open intervals ``(lo, hi)`` (the common,
# contiguous case) or explicit frozensets (strided windows with gaps).


def _norm(a):
    if isinstance(a, range):
        return (a.start, a.stop) if a.stop > a.start else (0, 0)
    return frozenset(a)


def _len(a) -> int:
    return a[1] - a[0] if isinstance(a, tuple) else len(a)


def _materialize(a):
    return set(range(a[0], a[1])) if isinstance(a, tuple) else a


def _inter(a, b) -> int:
    if isinstance(a, tuple) and isinstance(b, tuple):
        return max(0, min(a[1], b[1]) - max(a[0], b[0]))
    return len(_materialize(a) & _materialize(b))


def _minus(a, b) -> list:
    """a - b as a list of pieces (intervals or sets)."""
    if b is None:
        return [a]
    if isinstance(a, tuple) and isinstance(b, tuple):
        out = []
        if b[0] > a[0]:
            out.append((a[0], min(a[1], b[0])))
        if b[1] < a[1]:
            out.append((max(a[0], b[1]), a[1]))
        return [x for x in out if x[1] > x[0]]
    return [frozenset(_materialize(a) - _materialize(b))]


def _union_len(pieces) -> int:
    pieces = [p for p in pieces if p is not None and _len(p)]
    if all(isinstance(p, tuple) for p in pieces):
        total = 0
        end = None
        for lo, hi in sorted(pieces):
            if end is None or lo >= end:
                total += hi - lo
                end = hi
            elif hi > end:
                total += hi - end
                end = hi
        return total
    out: set = set()
    for p in pieces:
        out |= _materialize(p)
    return len(out)


def _union_set(pieces) -> set:
    out: set = set()
    for p in pieces:
        if p is not None:
            out |= _materialize(p)
    return out


@dataclass
class TensorParts:
    P: List                  # per sub-cluster piece on the spatial axis (None = idle)
    Q: List                  # other axes (shared by all sub-clusters)
    qlen: int = 0


def tensor_parts(axes: List[Axis], sdim: Optional[str], base: Dict[str, Window],
                 spans: List[Optional[Window]]) -> TensorParts:
    sp = None
    if sdim is not None:
        for k, ax in enumerate(axes):
            if sdim in ax.dims:
                sp = k
    Q = [_norm(axis_set(ax, base)) for k, ax in enumerate(axes) if k != sp]
    qlen = 1
    for q in Q:
        qlen *= _len(q)
    if sp is None:
        return TensorParts([None if w is None else (0, 1) for w in spans], Q, qlen)
    ax = axes[sp]
    if not ax.inner:
        return TensorParts(list(spans), Q, qlen)
    st = ax.stride
    P: List = []
    if sdim == ax.dim:
        ilo, ihi = base[ax.inner]
        dense = st == 1 or ihi - ilo >= st
        for w in spans:
            if w is None:
                P.append(None)
            elif dense:
                P.append((w[0] * st + ilo, (w[1] - 1) * st + ihi))
            else:
                P.append(frozenset(o * st + i for o in range(*w) for i in range(ilo, ihi)))
    else:
        olo, ohi = base[ax.dim]
        for w in spans:
            if w is None:
                P.append(None)
            elif st == 1 or w[1] - w[0] >= st:
                P.append((olo * st + w[0], (ohi - 1) * st + w[1]))
            else:
                P.append(frozenset(o * st + i for o in range(olo, ohi) for i in range(*w)))
    return TensorParts(P, Q, qlen)


def _qint(a: TensorParts, b: TensorParts) -> int:
    n = 1
    for x, y in zip(a.Q, b.Q):
        n *= _inter(x, y)
    return n


def moved_union(cur: TensorParts, prev: Optional[TensorParts]) -> int:
    """|U_i (cur_i - prev_i)|."""
    u = _union_len(cur.P)
    if prev is None:
        return u * cur.qlen
    qi = _qint(cur, prev)
    fresh = []
    for p, pp in zip(cur.P, prev.P):
        if p is not None:
            fresh.extend(_minus(p, pp))
    return u * (cur.qlen - qi) + _union_len(fresh) * qi


def moved_sum(cur: TensorParts, prev: Optional[TensorParts]) -> int:
    """sum_i |cur_i - prev_i|."""
    tot = sum(_len(p) for p in cur.P if p is not None)
    if prev is None:
        return tot * cur.qlen
    qi = _qint(cur, prev)
    keep = sum(_inter(p, pp) for p, pp in zip(cur.P, prev.P) if p is not None and pp is not None)
    return tot * cur.qlen - keep * qi


def union_size(parts: TensorParts) -> int:
    return _union_len(parts.P) * parts.qlen


def union_overlap(a: TensorParts, b: TensorParts) -> int:
    """|(U a_i) & (U b_i)|."""
    qi = _qint(a, b)
    if not qi:
        return 0
    return len(_union_set(a.P) & _union_set(b.P)) * qi


# ---------------------------------------------------------------------------
# per-case evaluation
# ---------------------------------------------------------------------------


@dataclass
class StepCounts:
    """Exact counts for one representative step (dense, unscaled)."""

    tiles: List[Tuple[Tuple[int, ...], int]]          # (tile extents in DIMS order, sub-clusters)
    moved: Dict[str, int] = field(default_factory=dict)       # into sub-clusters, multicast once
    fills: Dict[str, int] = field(default_factory=dict)       # into sub-clusters, per receiver
    emitted: int = 0            # outputs leaving sub-clusters before this step (reduced)
    emitted_sum: int = 0        # same without spatial reduction
    footprint: Dict[str, int] = field(default_factory=dict)   # union over sub-clusters
    sub_footprint: int = 0      # largest single sub-cluster footprint (all tensors)
    mapped: Dict[str, int] = field(default_factory=dict)      # sum_i |A_i|
    reused: Dict[str, int] = field(default_factory=dict)      # sum_i |A_i & B_i|
    output_overlap: int = 0     # outputs shared with the previous step
    active: int = 0


def _tiles(plan: LevelPlan, base, spans) -> List[Tuple[Tuple[int, ...], int]]:
    groups: Dict[int, int] = {}
    for w in spans:
        if w is not None:
            n = w[1] - w[0]
            groups[n] = groups.get(n, 0) + 1
    out = []
    for n, cnt in groups.items():
        key = tuple(n if d == plan.sdim else base[d][1] - base[d][0] for d in DIMS)
        out.append((key, cnt))
    return sorted(out)


def evaluate_positions(plan: LevelPlan, pos: List[int], prev: Optional[List[int]]) -> StepCounts:
    base, spans = plan.step(pos)
    pstep = plan.step(prev) if prev is not None else None
    sc = StepCounts(_tiles(plan, base, spans), active=sum(w is not None for w in spans))
    sub_fp = [0] * len(spans)
    for t in TENSORS:
        axes = plan.axes[t]
        cur = tensor_parts(axes, plan.sdim, base, spans)
        old = tensor_parts(axes, plan.sdim, *pstep) if pstep is not None else None
        sc.moved[t] = moved_union(cur, old)
        sc.fills[t] = moved_sum(cur, old)
        sc.footprint[t] = union_size(cur)
        q = cur.qlen
        mapped = 0
        for i, p in enumerate(cur.P):
            if p is not None:
                n = _len(p) * q
                mapped += n
                sub_fp[i] += n
        sc.mapped[t] = mapped
        sc.reused[t] = mapped - sc.fills[t]
        if t == "Output" and old is not None:
            sc.emitted = moved_union(old, cur)
            sc.emitted_sum = moved_sum(old, cur)
            sc.output_overlap = union_overlap(cur, old)
    sc.sub_footprint = max(sub_fp)
    return sc


def evaluate_case(plan: LevelPlan, case: IterationCase) -> StepCounts:
    pos, prev = plan.positions(case)
    return evaluate_positions(plan, pos, prev)


def final_drain(plan: LevelPlan) -> Tuple[int, int]:
    """Outputs left in sub-clusters after the last step: (reduced, per sub-cluster)."""
    base, spans = plan.step(plan.last_positions())
    parts = tensor_parts(plan.axes["Output"], plan.sdim, base, spans)
    return union_size(parts), sum(_len(p) for p in parts.P if p is not None) * parts.qlen


# ---------------------------------------------------------------------------
# public reuse queries
# ---------------------------------------------------------------------------


def _user_dim(layer: LayerSpec, dim: str) -> str:
    return dim + "p" if dim in windowed_pairs(layer) else dim


def prime_changing_dimension(layer: LayerSpec, level: ClusterLevel, extents=None) -> Optional[str]:
    """Innermost dimension that is not fully unrolled, or None."""
    plan = LevelPlan(layer, level, extents)
    if not plan.active:
        return None
    return _user_dim(layer, plan.loops[plan.active[-1]].loop.dim)


def enumerate_cases(layer: LayerSpec, level: ClusterLevel, extents=None) -> List[IterationCase]:
    return LevelPlan(layer, level, extents).cases()


def temporal_reduction(layer: LayerSpec, level: ClusterLevel, extents=None) -> bool:
    plan = LevelPlan(layer, level, extents)
    return any(evaluate_case(plan, c).output_overlap for c in plan.cases())


def temporal_reuse(layer: LayerSpec, level: ClusterLevel, case: IterationCase, extents=None) -> Dict[str, Tuple[int, int]]:
    """Per tensor (unique, reused) element counts summed over sub-clusters."""
    sc = evaluate_case(LevelPlan(layer, level, extents), case)
    return {t: (sc.fills[t], sc.reused[t]) for t in TENSORS}


def spatial_reuse(layer: LayerSpec, level: ClusterLevel, case: IterationCase, extents=None) -> Dict[str, ReuseProfile]:
    plan = LevelPlan(layer, level, extents)
    sc = evaluate_case(plan, case)
    red = reduction_dims(layer)
    coupling = loop_coupling(layer)
    tr = any(evaluate_case(plan, c).output_overlap for c in plan.cases())
    out = {}
    for t in TENSORS:
        fp = sc.footprint[t]
        mc = sc.mapped[t] // fp if fp else 1
        shared = 0
        if plan.sdim is not None and plan.sdim in coupling[t]:
            shared = sc.mapped[t] - fp
        rf = sc.active if (t == "Output" and plan.sdim in red and sc.active > 1) else 1
        out[t] = ReuseProfile(
            unique_elements_per_step=sc.fills[t],
            temporally_reused_elements=sc.reused[t],
            spatial_multicast_factor=max(1, mc),
            spatial_reduction_factor=rf,
            temporal_reduction=tr and t == "Output",
            neighbor_shared_elements=shared,
        )
    return out


def classify(layer: LayerSpec, level: ClusterLevel, extents=None) -> Dict[str, set]:
    """Qualitative reuse kinds observed per tensor across all cases.

    Kinds: ``spatial_multicast``, ``spatial_reduction``, ``temporal_multicast``
    (data kept across steps), ``temporal_reduction``, ``partial_spatial`` and
    ``partial_temporal`` (window overlap only).
    """
    plan = LevelPlan(layer, level, extents)
    red = reduction_dims(layer)
    coupling = loop_coupling(layer)
    out: Dict[str, set] = {t: set() for t in TENSORS}
    for case in plan.cases():
        sc = evaluate_case(plan, case)
        pos, prev = plan.positions(case)
        for t in TENSORS:
            fp = sc.footprint[t]
            if sc.active > 1 and fp < sc.mapped[t]:
                full = plan.sdim not in coupling[t]
                if t == "Output":
                    out[t].add("spatial_reduction" if plan.sdim in red else "partial_spatial")
                else:
                    out[t].add("spatial_multicast" if full else "partial_spatial")
            if prev is not None and sc.reused[t]:
                steady_dim = plan.loops[plan.active[-1]].loop.dim
                full = steady_dim not in coupling[t] or sc.fills[t] == 0
                kind = ("temporal_reduction" if t == "Output" else "temporal_multicast") if full else "partial_temporal"
                out[t].add(kind)
    return out
