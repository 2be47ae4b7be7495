from __future__ import annotations

import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from wasmcpg.pipeline import BuildReport, build_cpg_from_ir
from wasmcpg.ast_builder import BuildContext, build_ast
from wasmcpg.cfg_builder import build_cfg
from wasmcpg.cg_builder import build_cg
from wasmcpg.dataflow import build_ddg
from wasmcpg.queries import ScanConfig
from wasmcpg.wat_parser import parse_module

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

CORPUS = [f"q{i:02d}_{kind}" for i in range(1, 11) for kind in ("vuln", "clean")]
EXTRA = ["fig_ddg", "libpng_get_token", "empty", "mixed", "cfg_brtable"]
ALL_FIXTURES = CORPUS + EXTRA

# expected findings per corpus fixture: (query id, kind, function, label)
ANSWER_KEY: dict[str, list[tuple[int, str, str, str]]] = {
    "q01_vuln": [(1, "FormatString", "$fmt_vuln", "$printf")],
    "q02_vuln": [(2, "DangerousFunction", "$read_line", "$gets")],
    "q03_vuln": [(3, "Use after free", "$uaf", "$free")],
    "q04_vuln": [(4, "Double free", "$df", "$free")],
    "q05_vuln": [(5, "Tainted CallIndirect", "$dispatch", "call_indirect")],
    "q06_vuln": [(6, "Tainted", "$relay", "$send")],
    "q07_vuln": [(7, "Tainted Local", "$handler", "$memcpy")],
    "q08_vuln": [(8, "BO StaticBuffer", "$stack_copy", "$memcpy")],
    "q09_vuln": [(9, "BO StaticMalloc", "$heap_copy", "$memcpy")],
    "q10_vuln": [(10, "BO Loops", "$fill", "$L")],
    **{f"q{i:02d}_clean": [] for i in range(1, 11)},
}


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.wat").read_text(encoding="utf-8")


def wql_source(name: str) -> str:
    return (FIXTURES / "wql" / f"{name}.wql").read_text(encoding="utf-8")


_CTX_CACHE: dict[str, tuple[BuildContext, BuildReport]] = {}


def build_fixture(name: str) -> tuple[BuildContext, BuildReport]:
    """Full build (all four edge sets, frozen graph) with per-session caching."""
    if name not in _CTX_CACHE:
        module = parse_module(fixture_source(name))
        ctx = build_ast(module)
        report = BuildReport()
        build_cfg(ctx)
        build_cg(ctx)
        report.function_stats = build_ddg(ctx)
        ctx.cpg.freeze()
        _CTX_CACHE[name] = (ctx, report)
    return _CTX_CACHE[name]


def fixture_cpg(name: str):
    return build_fixture(name)[0].cpg


@pytest.fixture(scope="session")
def scan_config() -> ScanConfig:
    return ScanConfig.from_file(str(FIXTURES / "scan_config.json"))
