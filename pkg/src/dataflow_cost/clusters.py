"""Cluster hierarchy construction and directive augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

from .dsl import (
    DIMS, OUTPUT_DIMS, SPATIAL, TEMPORAL, Dataflow, Directive, DslError, HardwareConfig, LayerSpec,
)
from .tensors import loop_extents, windowed_pairs


@dataclass(frozen=True)
class Loop:
    """A directive expressed in iteration-space units (see ``tensors``)."""

    kind: str
    dim: str
    size: int
    offset: int

    @property
    def spatial(self) -> bool:
        return self.kind == SPATIAL


def chunk_count(extent: int, size: int, offset: int) -> int:
    """Number of distinct window positions a map takes over ``extent``.

    Positions are 0, offset, 2*offset, ... and stop once a window reaches the
    end of the dimension or a start would fall outside it.
    """
    if extent <= size:
        return 1
    return min(1 + -(-(extent - size) // offset), -(-extent // offset))


@dataclass
class ClusterLevel:
    level_index: int
    directives: Tuple[Directive, ...]
    loops: Tuple[Loop, ...]
    num_subclusters: int
    dim_sizes: Dict[str, int]
    folding: Dict[str, int] = field(default_factory=dict)
    pes_per_subcluster: int = 1

    @property
    def spatial_loop(self):
        for lp in self.loops:
            if lp.spatial:
                return lp
        return None


@dataclass
class ClusterHierarchy:
    levels: List[ClusterLevel]
    num_pes: int
    active_pes: int
    augmented: bool = False

    @property
    def inactive_pes(self) -> int:
        return self.num_pes - self.active_pes

    def format(self) -> str:
        """Print the per-level dataflow in the model grammar."""
        out = []
        for i, lv in enumerate(self.levels):
            sizes = " ".join(f"{d}:{lv.dim_sizes[d]}" for d in DIMS)
            out.append(f"# level {lv.level_index}: {lv.num_subclusters} sub-clusters, sizes {sizes}")
            out.extend(str(d) for d in lv.directives)
            if i + 1 < len(self.levels):
                out.append(f"Cluster({self.levels[i + 1].num_subclusters});")
        return "\n".join(out)

    def dataflow(self) -> Dataflow:
        ds: List[Directive] = []
        for i, lv in enumerate(self.levels):
            ds.extend(lv.directives)
            if i + 1 < len(self.levels):
                ds.append(Directive("Cluster", self.levels[i + 1].num_subclusters))
        return Dataflow(tuple(ds))


def _to_loop(layer: LayerSpec, d: Directive) -> Loop:
    dim = d.dim
    if dim in OUTPUT_DIMS:
        return Loop(d.kind, dim[0], d.size, d.offset)
    if dim in windowed_pairs(layer):
        st = layer.stride_y if dim == "Y" else layer.stride_x
        f = layer.dims["R" if dim == "Y" else "S"]
        if d.size < f or (d.size - f) % st or d.offset % st:
            raise DslError(f"{d} does not cover whole filter windows")
        return Loop(d.kind, dim, (d.size - f) // st + 1, d.offset // st)
    return Loop(d.kind, dim, d.size, d.offset)


def _to_directive(layer: LayerSpec, lp: Loop) -> Directive:
    if lp.dim in ("Y", "X") and lp.dim in windowed_pairs(layer):
        st = layer.stride_y if lp.dim == "Y" else layer.stride_x
        f = layer.dims["R" if lp.dim == "Y" else "S"]
        return Directive(lp.kind, lp.size * st + f - st, lp.offset * st, lp.dim)
    return Directive(lp.kind, lp.size, lp.offset, lp.dim)


def subcluster_counts(df: Dataflow, num_pes: int) -> List[int]:
    sizes = df.cluster_sizes()
    if not sizes:
        return [num_pes]
    per = 1
    for s in sizes:
        per *= s
    if num_pes < per:
        raise DslError(f"num_pes={num_pes} is smaller than the cluster size product {per}")
    return [num_pes // per] + sizes


def build_hierarchy(layer: LayerSpec, df: Dataflow, hw: HardwareConfig) -> ClusterHierarchy:
    """Split the dataflow into levels, count sub-clusters and inherit sizes.

    Directive sizes larger than the extent they see are clamped (lenient
    reading); strict callers reject such dataflows in validation first.
    """
    counts = subcluster_counts(df, hw.num_pes)
    raw_levels = df.levels()
    n = len(raw_levels)
    ext = loop_extents(layer)
    levels: List[ClusterLevel] = []
    pes_below = [1] * n
    for i in range(n - 2, -1, -1):
        pes_below[i] = pes_below[i + 1] * counts[i + 1]
    for i, raw in enumerate(raw_levels):
        loops = []
        for d in raw:
            lp = _to_loop(layer, d)
            loops.append(replace(lp, size=min(lp.size, ext[lp.dim])))
        fold = {}
        for lp in loops:
            if lp.spatial:
                fold[lp.dim] = -(-chunk_count(ext[lp.dim], lp.size, lp.offset) // counts[i])
        levels.append(ClusterLevel(
            level_index=n - 1 - i,
            directives=tuple(raw),
            loops=tuple(loops),
            num_subclusters=counts[i],
            dim_sizes=dict(ext),
            folding=fold,
            pes_per_subcluster=pes_below[i],
        ))
        nxt = dict(ext)
        for lp in loops:
            nxt[lp.dim] = lp.size
        ext = nxt
    active = counts[0] * pes_below[0]
    return ClusterHierarchy(levels, hw.num_pes, active)


def augment_directives(layer: LayerSpec, h: ClusterHierarchy) -> ClusterHierarchy:
    """Insert fully-unrolled TemporalMaps for unmapped dimensions (innermost
    position) and rewrite output-centric directives in input-centric form."""
    new_levels = []
    for lv in h.levels:
        present = {lp.dim for lp in lv.loops}
        loops = list(lv.loops)
        for d in DIMS:
            if d not in present:
                loops.append(Loop(TEMPORAL, d, lv.dim_sizes[d], lv.dim_sizes[d]))
        directives = tuple(_to_directive(layer, lp) for lp in loops)
        new_levels.append(replace(lv, loops=tuple(loops), directives=directives))
    return ClusterHierarchy(new_levels, h.num_pes, h.active_pes, augmented=True)


def hierarchy_for(layer: LayerSpec, df: Dataflow, hw: HardwareConfig) -> ClusterHierarchy:
    return augment_directives(layer, build_hierarchy(layer, df, hw))
