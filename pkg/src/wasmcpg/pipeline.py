"""End-to-end graph construction with per-stage timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .ast_builder import BuildContext, build_ast
from .cfg_builder import build_cfg
from .cg_builder import build_cg, build_signature_index
from .dataflow import AnalysisStats, build_ddg
from .ir import ModuleIR
from .wat_parser import parse_module
from . import graph as g

STAGES = ("parse", "ast", "cfg", "cg", "ddg")


@dataclass
class BuildReport:
    timings: dict[str, float] = field(default_factory=dict)
    function_stats: dict[str, AnalysisStats] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return sum(self.timings.values())


def build_cpg_from_ir(module: ModuleIR, report: BuildReport | None = None) -> tuple[g.Cpg, BuildReport]:
    report = report or BuildReport()
    t0 = time.perf_counter()
    ctx = build_ast(module)
    t1 = time.perf_counter()
    report.timings["ast"] = t1 - t0
    build_cfg(ctx)
    t2 = time.perf_counter()
    report.timings["cfg"] = t2 - t1
    build_cg(ctx, build_signature_index(module))
    t3 = time.perf_counter()
    report.timings["cg"] = t3 - t2
    report.function_stats = build_ddg(ctx)
    report.timings["ddg"] = time.perf_counter() - t3
    ctx.cpg.freeze()
    return ctx.cpg, report


def build_cpg(source: str) -> tuple[g.Cpg, BuildReport]:
    """Parse WAT text and build the frozen four-subgraph property graph."""
    report = BuildReport()
    t0 = time.perf_counter()
    module = parse_module(source)
    report.timings["parse"] = time.perf_counter() - t0
    return build_cpg_from_ir(module, report)


def build_context(source: str) -> BuildContext:
    """Builder context with all edge sets present and the graph frozen."""
    module = parse_module(source)
    ctx = build_ast(module)
    build_cfg(ctx)
    build_cg(ctx)
    build_ddg(ctx)
    ctx.cpg.freeze()
    return ctx
