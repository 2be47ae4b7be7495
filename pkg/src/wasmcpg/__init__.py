"""Code property graphs for WebAssembly text modules.

Build a combined AST/CFG/CG/DDG graph from a .wat module, query it through
the native traversal API or the embedded query language, run the built-in
vulnerability detectors, and serialize the graph to JSON, DOT, Datalog facts
or Neo4j CSV.
"""

from .errors import (
    DataflowError,
    GraphError,
    NameResolutionError,
    ParseError,
    SchemaError,
    UnsupportedOpcodeError,
    ValidationError,
    WasmCpgError,
    WqlError,
)
from .export import ExportManifest, export, import_json
from .findings import Finding
from .pipeline import build_cpg
from .queries import ScanConfig, run_all
from .wat_parser import parse_module
from .wql import eval_wql, parse_wql

__version__ = "0.1.0"

__all__ = [
    "build_cpg", "parse_module", "run_all", "ScanConfig", "Finding",
    "export", "import_json", "ExportManifest", "parse_wql", "eval_wql",
    "WasmCpgError", "ParseError", "UnsupportedOpcodeError",
    "NameResolutionError", "ValidationError", "GraphError", "SchemaError",
    "DataflowError", "WqlError",
]
