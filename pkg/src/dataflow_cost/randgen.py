"""Random small layers and legal dataflows for property tests."""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Optional, Tuple

from .dsl import DIMS, Dataflow, Directive, HardwareConfig, LayerSpec, validate_dataflow
from .tensors import loop_extents


def random_layer(rng: random.Random, max_dim: int = 6, mac_cap: int = 4000,
                 ops=("CONV2D", "CONV2D", "DWCONV", "PWCONV", "FC", "TRCONV")) -> LayerSpec:
    while True:
        op = rng.choice(ops)
        d = {k: rng.randint(1, max_dim) for k in DIMS}
        d["N"] = rng.choice([1, 1, 2])
        d["R"] = rng.randint(1, min(3, d["Y"]))
        d["S"] = rng.randint(1, min(3, d["X"]))
        if op == "FC":
            d["Y"], d["X"] = d["R"], d["S"]
        sy, sx = rng.choice([1, 2]), rng.choice([1, 2])
        dens = {t: rng.choice([Fraction(1, 2), Fraction(1)]) for t in ("Input", "Weight")}
        layer = LayerSpec("rand", op, d, sy, sx, dens)
        if math.prod(loop_extents(layer).values()) <= mac_cap:
            return layer


def _level(rng, layer, ext, spatial: bool):
    dims = list(DIMS)
    rng.shuffle(dims)
    dims = dims[: rng.randint(1, len(dims))]
    sp = rng.randrange(len(dims)) if spatial else -1
    out = []
    nxt = dict(ext)
    for i, d in enumerate(dims):
        e = ext[d]
        size = rng.randint(1, e)
        kind = "SpatialMap" if i == sp else "TemporalMap"
        name, dsize, doff = d, size, size
        if d in ("Y", "X") and layer.op_type != "TRCONV":
            if rng.random() < 0.4:
                # input-centric window covering `size` output rows
                st = layer.stride_y if d == "Y" else layer.stride_x
                f = layer.dims["R" if d == "Y" else "S"]
                dsize, doff = size * st + f - st, size * st
            else:
                name = d + "p"
        out.append(Directive(kind, dsize, doff, name))
        nxt[d] = size
    return out, nxt


def random_dataflow(rng: random.Random, layer: LayerSpec, levels: Optional[int] = None) -> Tuple[Dataflow, int]:
    """Return a legal dataflow and the cluster size used (0 if single level)."""
    while True:
        nlev = levels or rng.choice([1, 1, 2])
        ext = loop_extents(layer)
        ds = []
        csize = 0
        for k in range(nlev):
            part, ext = _level(rng, layer, ext, spatial=rng.random() < 0.85)
            ds.extend(part)
            if k + 1 < nlev:
                csize = rng.randint(1, 4)
                ds.append(Directive("Cluster", csize))
        df = Dataflow(tuple(ds))
        rep = validate_dataflow(layer, df)
        if not rep.errors and not rep.warnings:
            return df, csize


def random_hw(rng: random.Random, min_pes: int = 1, max_pes: int = 8) -> HardwareConfig:
    return HardwareConfig(
        num_pes=rng.randint(max(1, min_pes), max_pes),
        noc_bandwidth=rng.choice([1, 2, 4, 8]),
        noc_avg_latency=rng.choice([0, 1, 2]),
        vector_width=rng.choice([1, 1, 2]),
        double_buffering=rng.random() < 0.5,
        shared_noc=rng.random() < 0.2,
        spatial_reduction=rng.random() < 0.8,
    )


def random_config(rng: random.Random, mac_cap: int = 4000):
    layer = random_layer(rng, mac_cap=mac_cap)
    df, csize = random_dataflow(rng, layer)
    hw = random_hw(rng, min_pes=max(1, csize))
    return layer, df, hw
