"""Input formats and shared domain types.

Three textual formats are handled here:

* model files: ``Network name { Layer OPTYPE name { Dimensions {...} Dataflow {...} } }``
* hardware files: ``key: value`` lines
* energy and cost tables: same ``key: value`` format (see ``parse_kv``)

The module also hosts ``validate_dataflow``, which checks the legality
conditions (bound, coverage, redundancy) of a dataflow against a layer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

DIMS: Tuple[str, ...] = ("N", "K", "C", "Y", "X", "R", "S")
OUTPUT_DIMS: Tuple[str, ...] = ("Yp", "Xp")
ALL_DIM_NAMES: Tuple[str, ...] = DIMS + OUTPUT_DIMS
TENSORS: Tuple[str, ...] = ("Input", "Weight", "Output")
OP_TYPES: Tuple[str, ...] = ("CONV2D", "DWCONV", "PWCONV", "FC", "TRCONV", "LSTM-hidden", "POOL")

SPATIAL = "SpatialMap"
TEMPORAL = "TemporalMap"
CLUSTER = "Cluster"


class DslError(ValueError):
    """Raised for malformed model or hardware text."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Directive:
    kind: str
    size: int
    offset: Optional[int] = None
    dim: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (SPATIAL, TEMPORAL, CLUSTER):
            raise DslError(f"unknown directive kind {self.kind!r}")
        if self.size < 1:
            raise DslError(f"{self.kind} size must be >= 1, got {self.size}")
        if self.kind != CLUSTER:
            if self.offset is None or self.offset < 1:
                raise DslError(f"{self.kind} offset must be >= 1, got {self.offset}")
            if self.dim not in ALL_DIM_NAMES:
                raise DslError(f"unknown dimension {self.dim!r}")

    def __str__(self) -> str:
        if self.kind == CLUSTER:
            return f"Cluster({self.size});"
        return f"{self.kind}({self.size},{self.offset}) {self.dim};"


@dataclass(frozen=True)
class Dataflow:
    directives: Tuple[Directive, ...]

    def __post_init__(self):
        object.__setattr__(self, "directives", tuple(self.directives))
        check_structure(self.directives)

    def levels(self) -> List[Tuple[Directive, ...]]:
        """Split at Cluster directives; outermost level first."""
        out: List[List[Directive]] = [[]]
        for d in self.directives:
            if d.kind == CLUSTER:
                out.append([])
            else:
                out[-1].append(d)
        return [tuple(x) for x in out]

    def cluster_sizes(self) -> List[int]:
        return [d.size for d in self.directives if d.kind == CLUSTER]

    def __str__(self) -> str:
        return " ".join(str(d) for d in self.directives)


def check_structure(directives: Sequence[Directive]) -> None:
    """One SpatialMap per cluster level, each dimension at most once per level."""
    level = 0
    seen: Dict[str, int] = {}
    spatial = False
    for d in directives:
        if d.kind == CLUSTER:
            level += 1
            seen = {}
            spatial = False
            continue
        base = d.dim[0] if d.dim in OUTPUT_DIMS else d.dim
        if base in seen:
            raise DslError(f"dimension {d.dim} appears twice in cluster level {level}")
        seen[base] = 1
        if d.kind == SPATIAL:
            if spatial:
                raise DslError(f"more than one SpatialMap in cluster level {level}")
            spatial = True


@dataclass(frozen=True)
class LayerSpec:
    name: str
    op_type: str
    dims: Dict[str, int]
    stride_y: int = 1
    stride_x: int = 1
    density: Dict[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if self.op_type not in OP_TYPES:
            raise DslError(f"unsupported operator type {self.op_type!r}")
        dims = {d: int(self.dims.get(d, 1)) for d in DIMS}
        for d, v in self.dims.items():
            if d not in DIMS:
                raise DslError(f"unknown dimension {d!r} in layer {self.name}")
        if self.op_type == "PWCONV":
            dims["R"] = dims["S"] = 1
        if self.op_type in ("DWCONV", "POOL"):
            dims["K"] = 1
        for d, v in dims.items():
            if v < 1:
                raise DslError(f"dimension {d} must be positive, got {v}")
        if self.stride_y < 1 or self.stride_x < 1:
            raise DslError("strides must be positive")
        if self.op_type != "TRCONV" and (dims["R"] > dims["Y"] or dims["S"] > dims["X"]):
            raise DslError(f"filter larger than input in layer {self.name} (padding is fixed at 0)")
        dens = {t: Fraction(1) for t in TENSORS}
        for t, v in self.density.items():
            if t not in TENSORS:
                raise DslError(f"unknown tensor {t!r} in density")
            v = Fraction(v)
            if not 0 < v <= 1:
                raise DslError(f"density of {t} must lie in (0,1], got {v}")
            dens[t] = v
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "density", dens)

    def with_dims(self, **kw) -> "LayerSpec":
        dims = dict(self.dims)
        dims.update(kw)
        return replace(self, dims=dims)


@dataclass(frozen=True)
class HardwareConfig:
    num_pes: int
    l1_bytes: int = 0
    l2_bytes: int = 0
    noc_bandwidth: int = 1
    noc_avg_latency: int = 0
    vector_width: int = 1
    double_buffering: bool = True
    element_bytes: int = 1
    shared_noc: bool = False
    spatial_reduction: bool = True

    def __post_init__(self):
        if self.num_pes < 1:
            raise DslError(f"num_pes must be >= 1, got {self.num_pes}")
        if self.noc_bandwidth < 1:
            raise DslError(f"noc_bandwidth must be >= 1, got {self.noc_bandwidth}")
        if self.vector_width < 1:
            raise DslError(f"vector_width must be >= 1, got {self.vector_width}")
        if self.element_bytes < 1:
            raise DslError("element_bytes must be >= 1")
        if self.l1_bytes < 0 or self.l2_bytes < 0 or self.noc_avg_latency < 0:
            raise DslError("buffer sizes and latency must be nonnegative")


@dataclass
class Finding:
    condition: str
    directive: Optional[Directive]
    message: str


@dataclass
class ValidationReport:
    errors: List[Finding] = field(default_factory=list)
    warnings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def lines(self) -> List[str]:
        out = []
        for kind, items in (("error", self.errors), ("warning", self.warnings)):
            for f in items:
                where = f" [{f.directive}]" if f.directive is not None else ""
                out.append(f"{kind}: {f.condition}{where}: {f.message}")
        return out


# ---------------------------------------------------------------------------
# Model grammar
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>(#|//)[^\n]*)"
    r"|(?P<num>\d+(\.\d+)?(/\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)"
    r"|(?P<punct>[{}();:,])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DslError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise DslError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def int_(self) -> int:
        t = self.next()
        if t.kind != "num" or not t.text.isdigit():
            self.fail(f"expected integer, found {t.text!r}", t)
        return int(t.text)

    def model(self) -> List[Tuple[LayerSpec, Dataflow]]:
        out = []
        if self.peek().text == "Network":
            self.next()
            if self.peek().kind == "ident":
                self.next()
            self.expect("{")
            while self.peek().text == "Layer":
                out.append(self.layer(len(out)))
            self.expect("}")
        else:
            while self.peek().text == "Layer":
                out.append(self.layer(len(out)))
        if not out:
            self.fail("expected at least one Layer")
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r}")
        return out

    def layer(self, index: int) -> Tuple[LayerSpec, Dataflow]:
        self.expect("Layer")
        t = self.next()
        if t.text not in OP_TYPES:
            self.fail(f"unsupported operator type {t.text!r}", t)
        op = t.text
        name = f"layer{index}"
        if self.peek().kind == "ident" and self.peek().text not in ("Dimensions",):
            name = self.next().text
        self.expect("{")
        if self.peek().text != "Dimensions":
            self.fail("expected Dimensions block")
        dims, strides, density = self.dimensions()
        if self.peek().text != "Dataflow":
            self.fail("missing Dataflow block")
        df = self.dataflow()
        self.expect("}")
        try:
            layer = LayerSpec(name, op, dims, strides.get("stride_y", 1), strides.get("stride_x", 1), density)
        except DslError as e:
            self.fail(str(e), t)
        return layer, df

    def dimensions(self):
        self.expect("Dimensions")
        self.expect("{")
        dims: Dict[str, int] = {}
        strides: Dict[str, int] = {}
        density: Dict[str, Fraction] = {}
        while self.peek().text != "}":
            t = self.next()
            if t.text == "density":
                self.expect("{")
                while self.peek().text != "}":
                    tt = self.next()
                    if tt.text not in TENSORS:
                        self.fail(f"unknown tensor {tt.text!r}", tt)
                    self.expect(":")
                    v = self.next()
                    if v.kind != "num":
                        self.fail("expected number", v)
                    density[tt.text] = Fraction(v.text)
                self.expect("}")
                continue
            if t.text in ("dilation_y", "dilation_x", "dilation"):
                self.fail("dilation is not supported", t)
            if t.text in ("stride_y", "stride_x"):
                self.expect(":")
                strides[t.text] = self.int_()
                continue
            if t.text not in DIMS:
                self.fail(f"unknown dimension name {t.text!r}", t)
            if t.text in dims:
                self.fail(f"dimension {t.text} given twice", t)
            self.expect(":")
            dims[t.text] = self.int_()
        self.expect("}")
        return dims, strides, density

    def dataflow(self) -> Dataflow:
        self.expect("Dataflow")
        self.expect("{")
        ds: List[Directive] = []
        first = self.peek()
        while self.peek().text != "}":
            t = self.next()
            if t.text == CLUSTER:
                self.expect("(")
                size = self.int_()
                if self.peek().text == ",":  # optional type argument, logical only
                    self.next()
                    self.next()
                self.expect(")")
                self.expect(";")
                d = (CLUSTER, size, None, None)
            elif t.text in (SPATIAL, TEMPORAL):
                self.expect("(")
                size = self.int_()
                self.expect(",")
                off = self.int_()
                self.expect(")")
                dt = self.next()
                if dt.text not in ALL_DIM_NAMES:
                    self.fail(f"unknown dimension name {dt.text!r}", dt)
                self.expect(";")
                d = (t.text, size, off, dt.text)
            else:
                self.fail(f"expected directive, found {t.text!r}", t)
            try:
                ds.append(Directive(*d))
            except DslError as e:
                self.fail(str(e), t)
        self.expect("}")
        if not ds:
            self.fail("empty Dataflow block", first)
        try:
            return Dataflow(tuple(ds))
        except DslError as e:
            self.fail(str(e), first)


def parse_model(text: str) -> List[Tuple[LayerSpec, Dataflow]]:
    """Parse a model file into (layer, dataflow) pairs."""
    return _Parser(text).model()


def parse_dataflow(text: str) -> Dataflow:
    """Parse a bare directive list such as ``SpatialMap(1,1) Xp; TemporalMap(1,1) S;``."""
    p = _Parser("Dataflow {" + text + "}")
    return p.dataflow()


def format_layer(layer: LayerSpec, df: Dataflow) -> str:
    dims = " ".join(f"{d}:{layer.dims[d]}" for d in DIMS)
    extra = f" stride_y:{layer.stride_y} stride_x:{layer.stride_x}"
    dens = [f"{t}:{v}" for t, v in layer.density.items() if v != 1]
    if dens:
        extra += " density { " + " ".join(dens) + " }"
    body = "\n".join(f"      {d}" for d in df.directives)
    return (
        f"  Layer {layer.op_type} {layer.name} {{\n"
        f"    Dimensions {{ {dims}{extra} }}\n"
        f"    Dataflow {{\n{body}\n    }}\n  }}"
    )


def format_model(pairs: Sequence[Tuple[LayerSpec, Dataflow]], name: str = "net") -> str:
    return f"Network {name} {{\n" + "\n".join(format_layer(l, d) for l, d in pairs) + "\n}\n"


# ---------------------------------------------------------------------------
# key: value files
# ---------------------------------------------------------------------------


def parse_kv(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        # allow several pairs per line: "num_pes:256 noc_bandwidth:32"
        for m in re.finditer(r"([A-Za-z_]\w*)\s*:\s*([^\s]+)", line):
            out[m.group(1)] = m.group(2)
        if ":" not in line:
            raise DslError(f"expected 'key: value', got {raw!r}", n, 1)
    return out


def _bool(v: str) -> bool:
    if v.lower() in ("true", "1", "yes", "on"):
        return True
    if v.lower() in ("false", "0", "no", "off"):
        return False
    raise DslError(f"expected boolean, got {v!r}")


_HW_FIELDS = {
    "num_pes": int,
    "l1_bytes": int,
    "l2_bytes": int,
    "noc_bandwidth": int,
    "noc_avg_latency": int,
    "vector_width": int,
    "double_buffering": _bool,
    "element_bytes": int,
    "shared_noc": _bool,
    "spatial_reduction": _bool,
}


def parse_hardware(text: str) -> HardwareConfig:
    """Parse a hardware file. An N x N mesh fed from one corner is
    approximated by ``noc_bandwidth: N`` and ``noc_avg_latency: N``."""
    kv = parse_kv(text)
    args = {}
    for k, v in kv.items():
        if k not in _HW_FIELDS:
            raise DslError(f"unknown hardware key {k!r}")
        try:
            args[k] = _HW_FIELDS[k](v)
        except ValueError as e:
            raise DslError(f"bad value for {k}: {v!r}") from e
    if "num_pes" not in args:
        raise DslError("num_pes is required")
    return HardwareConfig(**args)


def format_hardware(hw: HardwareConfig) -> str:
    return "".join(f"{k}: {str(getattr(hw, k)).lower()}\n" for k in _HW_FIELDS)


# ---------------------------------------------------------------------------
# Legality
# ---------------------------------------------------------------------------


def validate_dataflow(layer: LayerSpec, df: Dataflow, strict: bool = True) -> ValidationReport:
    """Check bound, coverage and redundancy conditions level by level.

    Sizes are compared against the extent each directive actually sees: the
    layer dimension at the top level, and the mapping size inherited from the
    level above otherwise.
    """
    from .tensors import output_dims, windowed_pairs

    rep = ValidationReport()
    yp, xp = output_dims(layer)
    extent = dict(layer.dims)
    extent["Yp"], extent["Xp"] = yp, xp
    windowed = windowed_pairs(layer)
    stride = {"Y": layer.stride_y, "X": layer.stride_x, "Yp": layer.stride_y, "Xp": layer.stride_x}
    flt = {"Y": layer.dims["R"], "X": layer.dims["S"]}

    for lvl in df.levels():
        nxt = dict(extent)
        for d in lvl:
            dim = d.dim
            if dim in OUTPUT_DIMS and layer.op_type == "TRCONV":
                rep.errors.append(Finding("syntax", d, "TRCONV dataflows address Y/X directly"))
                continue
            if dim in ("Y", "X") and dim in windowed:
                st = stride[dim]
                f = flt[dim]
                if d.size < f or (d.size - f) % st or d.offset % st:
                    rep.errors.append(Finding(
                        "window", d,
                        f"input-centric {dim} map must cover whole filter windows "
                        f"(size = k*{st} + {f} - {st}, offset multiple of {st})"))
                    continue
            ext = extent[dim]
            if d.size > ext:
                if strict:
                    rep.errors.append(Finding("bound", d, f"size {d.size} exceeds dimension size {ext}"))
                else:
                    rep.warnings.append(Finding("bound", d, f"size {d.size} clamped to dimension size {ext}"))
            steps_needed = d.size < ext
            if d.offset > d.size and steps_needed and stride.get(dim, 1) == 1:
                rep.warnings.append(Finding(
                    "coverage", d, f"offset {d.offset} > size {d.size} leaves indices unmapped"))
            if d.offset < d.size and steps_needed and dim not in ("X", "Y"):
                rep.errors.append(Finding(
                    "redundancy", d, f"offset {d.offset} < size {d.size} maps indices of {dim} twice"))
            inherited = min(d.size, ext)
            if dim in ("Y", "X") and dim in windowed:
                # keep the inherited extent in input-centric units
                nxt[dim] = inherited
                nxt[dim + "p"] = (inherited - flt[dim]) // stride[dim] + 1
            elif dim in OUTPUT_DIMS:
                nxt[dim] = inherited
                base = dim[0]
                nxt[base] = (inherited - 1) * stride[dim] + flt[base]
            else:
                nxt[dim] = inherited
        extent = nxt
    return rep
