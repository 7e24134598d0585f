"""Command-line front end: validate, analyze, oracle-check and dse."""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from .dsl import DslError, HardwareConfig, parse_hardware, parse_model, validate_dataflow
from .perf import AnalysisResult, EnergyTable, ValidationFailed, analyze_layer, parse_energy

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EMPTY = 0, 1, 2, 3

_FRAC = re.compile(r"^-?\d+/\d+$")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _encode(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, dict):
        return {k: _encode(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_encode(v) for v in x]
    return x


def _decode(x):
    if isinstance(x, str) and _FRAC.match(x):
        return Fraction(x)
    if isinstance(x, dict):
        return {k: _decode(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_decode(v) for v in x]
    return x


def result_to_dict(r: AnalysisResult) -> dict:
    d = {f.name: _encode(getattr(r, f.name)) for f in dataclasses.fields(r)}
    d["local_accesses_per_fetch"] = _encode(r.local_accesses_per_fetch())
    return d


def result_from_dict(d: dict) -> AnalysisResult:
    names = {f.name for f in dataclasses.fields(AnalysisResult)}
    kw = {k: (v if k == "layer" else _decode(v)) for k, v in d.items() if k in names}
    return AnalysisResult(**kw)


def dumps_results(results: Sequence[AnalysisResult]) -> str:
    return json.dumps([result_to_dict(r) for r in results], indent=2, sort_keys=True)


def loads_results(text: str) -> List[AnalysisResult]:
    return [result_from_dict(d) for d in json.loads(text)]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _f(x) -> str:
    if x is None:
        return "-"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{float(x):.4g}"


def report(r: AnalysisResult) -> str:
    lines = [f"layer {r.layer}",
             f"  runtime_cycles      {r.runtime_cycles}",
             f"  mac_count           {_f(r.mac_count)}",
             f"  pe_utilization      {_f(r.pe_utilization)}  (active PEs {r.active_pes})",
             f"  peak_noc_bw_demand  {_f(r.peak_noc_bw_demand)} elements/cycle",
             f"  energy              {_f(r.energy)}",
             f"  l1_requirement      {r.l1_requirement_bytes} B{'' if r.l1_feasible else '  (exceeds l1_bytes)'}",
             f"  l2_requirement      {r.l2_requirement_bytes} B{'' if r.l2_feasible else '  (exceeds l2_bytes)'}",
             "  bottleneck steps    " + ", ".join(f"{k}={v}" for k, v in r.bottleneck.items()),
             "  local accesses per fetch  " + ", ".join(
                 f"{t}={_f(v)}" for t, v in r.local_accesses_per_fetch().items()),
             f"  {'buffer':<8}{'tensor':<8}{'reads':>12}{'writes':>12}"]
    # levels[0] is the shared L2; deeper cluster levels are named by depth
    bufs = [("L2" if k == 0 else f"C{k}", lv) for k, lv in enumerate(r.levels)] + [("L1", r.l1)]
    for name, lv in bufs:
        for t, c in lv.items():
            lines.append(f"  {name:<8}{t:<8}{_f(c['reads']):>12}{_f(c['writes']):>12}")
    return "\n".join(lines)


def explain(r: AnalysisResult) -> str:
    lines = [f"cases for {r.layer} ({r.num_cases} total)"]
    for c in r.cases:
        st = " ".join(f"{d}:{s}" for d, s in c["states"].items()) or "(single step)"
        lines.append(f"  level {c['level']} {st:<40} x{c['occurrences']:<6} compute={c['compute']} "
                     f"in={_f(c['in_elements'])} out={_f(c['out_elements'])} delay={c['delay']} "
                     f"[{c['bottleneck']}]")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def _pairs(path: str):
    return parse_model(_read(path))


def _hw(args) -> HardwareConfig:
    if args.hw:
        return parse_hardware(_read(args.hw))
    return HardwareConfig(num_pes=args.pes)


def _energy(args) -> EnergyTable:
    return parse_energy(_read(args.energy)) if args.energy else EnergyTable()


def _one_model(args) -> str:
    if not args.model:
        raise UsageError("--model is required")
    if len(args.model) > 1:
        raise UsageError("this command takes a single --model")
    return args.model[0]


def cmd_validate(args, out) -> int:
    bad = False
    for layer, df in _pairs(_one_model(args)):
        rep = validate_dataflow(layer, df, strict=args.strict)
        status = "ok" if rep.ok else "INVALID"
        print(f"{layer.name}: {status}", file=out)
        for line in rep.lines():
            print(f"  {line}", file=out)
        bad |= not rep.ok
    return EXIT_FAIL if bad else EXIT_OK


def cmd_analyze(args, out) -> int:
    hw, energy = _hw(args), _energy(args)
    results = []
    for layer, df in _pairs(_one_model(args)):
        try:
            r = analyze_layer(layer, df, hw, energy, strict=args.strict)
        except ValidationFailed as e:
            print(f"{layer.name}: INVALID", file=out)
            for line in e.report.lines():
                print(f"  {line}", file=out)
            return EXIT_FAIL
        results.append(r)
        print(report(r), file=out)
        if args.explain:
            print(explain(r), file=out)
    if len(results) > 1:
        print(f"network runtime_cycles {sum(r.runtime_cycles for r in results)} "
              f"energy {_f(sum(Fraction(r.energy) for r in results))}", file=out)
    if args.csv:
        cols = ["layer", "runtime_cycles", "mac_count", "energy", "l1_requirement_bytes",
                "l2_requirement_bytes", "peak_noc_bw_demand", "pe_utilization"]
        rows = [",".join(cols)] + [",".join(_f(getattr(r, c)) if c != "layer" else r.layer for c in cols)
                                   for r in results]
        Path(args.csv).write_text("\n".join(rows) + "\n")
    if args.json:
        Path(args.json).write_text(dumps_results(results) + "\n")
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    from .oracle import BudgetExceeded, compare, simulate

    hw, energy = _hw(args), _energy(args)
    failed = False
    trace: List[str] = []
    for layer, df in _pairs(_one_model(args)):
        rep = validate_dataflow(layer, df, strict=args.strict)
        if rep.errors:
            print(f"{layer.name}: INVALID", file=out)
            for line in rep.lines():
                print(f"  {line}", file=out)
            failed = True
            continue
        a = analyze_layer(layer, df, hw, energy, strict=args.strict)
        try:
            o = simulate(layer, df, hw, energy, budget=args.budget, trace=bool(args.trace))
        except BudgetExceeded as e:
            raise UsageError(f"{layer.name}: {e}") from e
        diff = compare(a, o)
        print(f"{layer.name}: {'match' if not diff else 'MISMATCH'}", file=out)
        for d in diff:
            print(f"  {d}", file=out)
        failed |= bool(diff)
        trace.extend(f"{layer.name},{line}" for line in o.trace)
    if args.trace:
        Path(args.trace).write_text("\n".join(trace) + ("\n" if trace else ""))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_dse(args, out) -> int:
    from .dse import Budgets, CostModel, parse_cost, parse_sweep, sweep

    if not args.model:
        raise UsageError("--model is required")
    files = [_pairs(m) for m in args.model]
    names = [[l.name for l, _ in f] for f in files]
    if any(n != names[0] for n in names):
        raise UsageError("candidate model files must list the same layers in the same order")
    for f in files[1:]:
        for (l0, _), (l1, _) in zip(files[0], f):
            if l0.dims != l1.dims or l0.op_type != l1.op_type:
                raise UsageError(f"layer {l0.name} differs between candidate files")
    layers = [l for l, _ in files[0]]
    dataflows = [[f[i][1] for f in files] for i in range(len(layers))]
    cm = parse_cost(_read(args.cost)) if args.cost else CostModel()
    space = parse_sweep(args.sweep or [])
    budgets = Budgets(area=Fraction(args.area) if args.area else None,
                      power=Fraction(args.power) if args.power else None)
    res = sweep(layers, dataflows, space, cm, budgets, objective=args.objective, base=_hw(args),
                energy=_energy(args))
    text = res.csv()
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        out.write(text)
    rates = res.rates()
    print(f"# grid {res.grid_size} points, {len(res.valid)} valid, {res.pruned} pruned, "
          f"{res.analyses} analyses in {res.seconds:.3f}s", file=sys.stderr if not args.csv else out)
    print(f"# {rates['analyzed_points_per_s']:.0f} analyzed points/s, {rates['analyses_per_s']:.0f} analyses/s, "
          f"{rates['effective_designs_per_s']:.0f} effective designs/s", file=sys.stderr if not args.csv else out)
    if res.best is None:
        print("no valid design point", file=sys.stderr)
        return EXIT_EMPTY
    b = res.best
    summary = [f"best ({args.objective}): num_pes={b.hw.num_pes} l1_bytes={b.hw.l1_bytes} "
               f"l2_bytes={b.hw.l2_bytes} noc_bandwidth={b.hw.noc_bandwidth} runtime={b.runtime} "
               f"energy={_f(b.energy)} area={_f(b.area)} power={_f(b.power)} candidates={list(b.choice)}",
               f"pareto front (runtime, energy): {len(res.front)} points"]
    front = sorted(res.front, key=lambda p: (p.runtime, p.energy, p.config()))
    for p in front[:12]:
        summary.append(f"  {p.hw.num_pes},{p.hw.l1_bytes},{p.hw.l2_bytes},{p.hw.noc_bandwidth} "
                       f"runtime={p.runtime} energy={_f(p.energy)}")
    if len(front) > 12:
        summary.append(f"  ... {len(front) - 12} more in the CSV (pareto=1)")
    print("\n".join(summary), file=sys.stderr if not args.csv else out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--model", action="append", metavar="FILE",
                        help="model file (repeat for candidate dataflows in dse)")
    common.add_argument("--hw", metavar="FILE", help="hardware file")
    common.add_argument("--pes", type=int, default=1, help="PE count when no --hw is given")
    common.add_argument("--energy", metavar="FILE", help="energy table")
    g = common.add_mutually_exclusive_group()
    g.add_argument("--strict", dest="strict", action="store_true", default=True,
                   help="oversized directives are errors (default)")
    g.add_argument("--lenient", dest="strict", action="store_false", help="oversized directives are warnings")
    common.add_argument("--seed", type=int, help="seed for randomized test harnesses")

    p = _Parser(prog="dataflow-cost", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check dataflow legality")
    a = sub.add_parser("analyze", parents=[common], help="analytic runtime, accesses and energy")
    a.add_argument("--csv", metavar="FILE")
    a.add_argument("--json", metavar="FILE")
    a.add_argument("--explain", action="store_true", help="dump per-level case tables")
    o = sub.add_parser("oracle-check", parents=[common], help="compare against the step simulator")
    o.add_argument("--trace", metavar="FILE", help="write the simulator trace")
    o.add_argument("--budget", type=int, default=10 ** 6, help="max MACs to simulate")
    d = sub.add_parser("dse", parents=[common], help="hardware design-space sweep")
    d.add_argument("--cost", metavar="FILE", help="cost model file")
    d.add_argument("--csv", metavar="FILE", help="write the CSV here instead of stdout")
    d.add_argument("--objective", choices=("throughput", "energy", "edp"), default="edp")
    d.add_argument("--area", type=str, help="area budget")
    d.add_argument("--power", type=str, help="power budget")
    d.add_argument("--sweep", action="append", metavar="param=min:max:step")
    return p


COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "oracle-check": cmd_oracle, "dse": cmd_dse}


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        for flag in ("area", "power"):
            v = getattr(args, flag, None)
            if v is not None:
                try:
                    Fraction(v)
                except ValueError as e:
                    raise UsageError(f"--{flag} must be a number, got {v!r}") from e
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DslError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
