"""Analytical cost model and design-space exploration for spatial DNN accelerators."""

from .dsl import (
    Dataflow, Directive, HardwareConfig, LayerSpec, ValidationReport, parse_dataflow, parse_hardware,
    parse_model, validate_dataflow,
)
from .perf import AnalysisResult, EnergyTable, analyze_layer, analyze_network, noc_delay
from .oracle import compare, mapped_indices, simulate

__all__ = [
    "Dataflow", "Directive", "HardwareConfig", "LayerSpec", "ValidationReport", "parse_dataflow",
    "parse_hardware", "parse_model", "validate_dataflow", "AnalysisResult", "EnergyTable",
    "analyze_layer", "analyze_network", "noc_delay", "compare", "mapped_indices", "simulate",
]
