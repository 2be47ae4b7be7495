"""Query-language syntax tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class NodeBase:
    line: int = field(default=0, kw_only=True)


@dataclass
class Program(NodeBase):
    body: list = field(default_factory=list)


@dataclass
class Foreach(NodeBase):
    var: str = ""
    iterable: Any = None
    body: list = field(default_factory=list)


@dataclass
class While(NodeBase):
    cond: Any = None
    body: list = field(default_factory=list)


@dataclass
class IfStmt(NodeBase):
    cond: Any = None
    then: list = field(default_factory=list)
    orelse: list = field(default_factory=list)


@dataclass
class Break(NodeBase):
    pass


@dataclass
class Continue(NodeBase):
    pass


@dataclass
class ExprStmt(NodeBase):
    expr: Any = None


@dataclass
class Assign(NodeBase):
    name: str = ""
    expr: Any = None


@dataclass
class BinOp(NodeBase):
    op: str = ""
    left: Any = None
    right: Any = None


@dataclass
class UnOp(NodeBase):
    op: str = ""
    operand: Any = None


@dataclass
class Literal(NodeBase):
    value: Any = None


@dataclass
class Var(NodeBase):
    name: str = ""


@dataclass
class CallBuiltin(NodeBase):
    name: str = ""
    args: list = field(default_factory=list)


@dataclass
class MethodCall(NodeBase):
    obj: Any = None
    name: str = ""
    args: list = field(default_factory=list)


@dataclass
class Attr(NodeBase):
    obj: Any = None
    name: str = ""


@dataclass
class Index(NodeBase):
    obj: Any = None
    index: Any = None


@dataclass
class RangeExpr(NodeBase):
    var: str = ""
    source: Any = None
    pred: Any = None
