"""The embedded imperative query language.

Programs are sequences of semicolon-terminated statements; `:` introduces an
indented block after foreach/while/if. Assignment is `:=` and doubles as an
expression; `=` compares. `[n in lst : pred]` filters a list preserving order.
"""

from .parser import parse_wql
from .interp import eval_wql

__all__ = ["parse_wql", "eval_wql"]
