"""Tensor/dimension coupling and shape arithmetic.

Internally every layer is described by a 7-deep iteration space over the
loop dimensions ``N K C Y X R S``.  For the convolution-like operators the
``Y``/``X`` loops run over *output* rows/columns (``Yp``/``Xp``) and the
input row is ``y * stride_y + r``.  For TRCONV the roles swap: the loops run
over input rows and the output row is ``y * stride_y + r``.

Each tensor is a list of axes; an axis is either a plain loop dimension or a
window ``outer * stride + inner``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Tuple

from .dsl import DIMS, DslError, LayerSpec, OP_TYPES, TENSORS


@dataclass(frozen=True)
class Axis:
    dim: str
    inner: str = ""
    stride: int = 1

    @property
    def windowed(self) -> bool:
        return bool(self.inner)

    @property
    def dims(self) -> Tuple[str, ...]:
        return (self.dim, self.inner) if self.inner else (self.dim,)


CONV_LIKE = ("CONV2D", "PWCONV", "FC", "LSTM-hidden")
CHANNELWISE = ("DWCONV", "POOL")


def infer_coupling(op_type: str) -> Dict[str, FrozenSet[str]]:
    """Tensor -> coupled dimension names, in the user-facing naming."""
    if op_type not in OP_TYPES:
        raise DslError(f"unsupported operator type {op_type!r}")
    if op_type in CHANNELWISE:
        return {
            "Input": frozenset({"N", "C", "Y", "X"}),
            "Weight": frozenset({"C", "R", "S"}),
            "Output": frozenset({"N", "C", "Yp", "Xp"}),
        }
    return {
        "Input": frozenset({"N", "C", "Y", "X"}),
        "Weight": frozenset({"K", "C", "R", "S"}),
        "Output": frozenset({"N", "K", "Yp", "Xp"}),
    }


def output_dims(layer: LayerSpec) -> Tuple[int, int]:
    d = layer.dims
    if layer.op_type == "TRCONV":
        yp = layer.stride_y * (d["Y"] - 1) + d["R"]
        xp = layer.stride_x * (d["X"] - 1) + d["S"]
    else:
        yp = (d["Y"] - d["R"]) // layer.stride_y + 1
        xp = (d["X"] - d["S"]) // layer.stride_x + 1
    if yp < 1 or xp < 1:
        raise DslError(f"non-positive output size in layer {layer.name}")
    return yp, xp


def tensor_volume(layer: LayerSpec, tensor: str) -> int:
    yp, xp = output_dims(layer)
    sizes = dict(layer.dims, Yp=yp, Xp=xp)
    v = 1
    for dim in infer_coupling(layer.op_type)[tensor]:
        v *= sizes[dim]
    return v


def tensor_axes(layer: LayerSpec) -> Dict[str, List[Axis]]:
    """Per-tensor axes over the loop dimensions."""
    sy, sx = layer.stride_y, layer.stride_x
    wy, wx = Axis("Y", "R", sy), Axis("X", "S", sx)
    py, px = Axis("Y"), Axis("X")
    chan = "C" if layer.op_type in CHANNELWISE else "K"
    if layer.op_type == "TRCONV":
        inp, out = [Axis("N"), Axis("C"), py, px], [Axis("N"), Axis("K"), wy, wx]
    else:
        inp, out = [Axis("N"), Axis("C"), wy, wx], [Axis("N"), Axis(chan), py, px]
    if layer.op_type in CHANNELWISE:
        w = [Axis("C"), Axis("R"), Axis("S")]
    else:
        w = [Axis("K"), Axis("C"), Axis("R"), Axis("S")]
    return {"Input": inp, "Weight": w, "Output": out}


def loop_coupling(layer: LayerSpec) -> Dict[str, FrozenSet[str]]:
    """Tensor -> loop dimensions its index depends on."""
    return {t: frozenset(d for a in axes for d in a.dims) for t, axes in tensor_axes(layer).items()}


def reduction_dims(layer: LayerSpec) -> FrozenSet[str]:
    """Loop dimensions not coupled to the output (summed over)."""
    return frozenset(DIMS) - loop_coupling(layer)["Output"]


def loop_extents(layer: LayerSpec) -> Dict[str, int]:
    ext = dict(layer.dims)
    if layer.op_type != "TRCONV":
        ext["Y"], ext["X"] = output_dims(layer)
    return ext


def windowed_pairs(layer: LayerSpec) -> FrozenSet[str]:
    """User-facing Y/X names that denote input-centric windows and must be
    converted to output loops (empty for TRCONV, whose loops are the inputs)."""
    return frozenset() if layer.op_type == "TRCONV" else frozenset({"Y", "X"})


def mac_count_dense(layer: LayerSpec) -> int:
    v = 1
    for n in loop_extents(layer).values():
        v *= n
    return v


def axis_set(axis: Axis, windows: Dict[str, Tuple[int, int]]) -> range | set:
    """Index set of one axis given half-open windows per loop dimension."""
    lo, hi = windows[axis.dim]
    if not axis.inner:
        return range(lo, hi)
    ilo, ihi = windows[axis.inner]
    if hi <= lo or ihi <= ilo:
        return range(0)
    if axis.stride == 1 or ihi - ilo >= axis.stride:
        # contiguous: every integer between the extremes is hit
        return range(lo * axis.stride + ilo, (hi - 1) * axis.stride + ihi)
    return {o * axis.stride + i for o in range(lo, hi) for i in range(ilo, ihi)}


__all__ = [
    "Axis", "TENSORS", "infer_coupling", "output_dims", "tensor_volume", "tensor_axes",
    "loop_coupling", "reduction_dims", "loop_extents", "windowed_pairs", "mac_count_dense", "axis_set",
]
