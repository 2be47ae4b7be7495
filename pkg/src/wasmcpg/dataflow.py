"""Dependency dataflow over the CFG and DDG edge materialization.

Tracks four dependency kinds (constant, function result, global, local) per
abstract state (global store, local store, value stack, open-label list) and
propagates them with a LIFO worklist. Loops are processed modularly: edges
leaving a loop are buffered until no work remains inside it, and a loop header
whose joined input gained nothing is not re-expanded, so stabilized inner
loops are not re-swept by outer iterations.

Stack/label fixups for block and loop exits are applied when traversing an
edge into the construct's exit node: the frame entry records the base height,
the top `nresults` sets survive, and values abandoned by a branch are dropped.

Linear memory is deliberately untracked: a load pushes the empty set, so a
store followed by a load never induces an edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .ast_builder import BuildContext, FunctionLayout
from .errors import DataflowError
from .ir import InstructionIR, iter_instructions
from . import graph as g

CONST_DEP = "Const"
FUNCTION_DEP = "Function"
GLOBAL_DEP = "Global"
LOCAL_DEP = "Local"


class Dep(NamedTuple):
    kind: str
    origin: int                      # originating node id
    name: str | None = None          # variable / function name
    value: int | float | None = None  # constant payload
    value_type: str | None = None

    def sort_key(self):
        return (self.origin, self.kind, self.name or "", repr(self.value))


EMPTY: frozenset = frozenset()


@dataclass(frozen=True)
class State:
    """(global store, local store, abstract stack, open labels)."""
    globals_: tuple[tuple[str, frozenset], ...] = ()
    locals_: tuple[tuple[str, frozenset], ...] = ()
    stack: tuple[frozenset, ...] = ()
    labels: tuple[tuple[str, int], ...] = ()

    def get_global(self, name: str) -> frozenset:
        for k, v in self.globals_:
            if k == name:
                return v
        return EMPTY

    def get_local(self, name: str) -> frozenset:
        for k, v in self.locals_:
            if k == name:
                return v
        return EMPTY

    def set_global(self, name: str, deps: frozenset) -> "State":
        return State(_store_set(self.globals_, name, deps), self.locals_,
                     self.stack, self.labels)

    def set_local(self, name: str, deps: frozenset) -> "State":
        return State(self.globals_, _store_set(self.locals_, name, deps),
                     self.stack, self.labels)

    def push(self, deps: frozenset) -> "State":
        return State(self.globals_, self.locals_, self.stack + (deps,), self.labels)

    def pop(self, n: int) -> tuple[list[frozenset], "State"]:
        if n == 0:
            return [], self
        if len(self.stack) < n:
            raise DataflowError(
                f"abstract stack underflow: need {n}, have {len(self.stack)}")
        popped = list(self.stack[len(self.stack) - n:])
        return popped, State(self.globals_, self.locals_,
                             self.stack[:len(self.stack) - n], self.labels)

    def push_label(self, label: str) -> "State":
        return State(self.globals_, self.locals_, self.stack,
                     self.labels + ((label, len(self.stack)),))


def _store_set(store: tuple, name: str, deps: frozenset) -> tuple:
    out = tuple((k, v) for k, v in store if k != name)
    if deps:
        out = out + ((name, deps),)
    return tuple(sorted(out))


def join(a: Optional[State], b: State) -> tuple[State, bool]:
    """Pointwise union; returns (joined, grew-relative-to-a)."""
    if a is None:
        return b, True
    if len(a.stack) != len(b.stack):
        raise DataflowError(
            f"join of states with mismatched stack heights "
            f"{len(a.stack)} vs {len(b.stack)}")
    if a.labels != b.labels:
        raise DataflowError("join of states with mismatched label stacks")
    grew = False
    stack = []
    for x, y in zip(a.stack, b.stack):
        u = x | y
        if len(u) != len(x):
            grew = True
        stack.append(u)
    ga = dict(a.globals_)
    for k, v in b.globals_:
        u = ga.get(k, EMPTY) | v
        if len(u) != len(ga.get(k, EMPTY)):
            grew = True
        ga[k] = u
    la = dict(a.locals_)
    for k, v in b.locals_:
        u = la.get(k, EMPTY) | v
        if len(u) != len(la.get(k, EMPTY)):
            grew = True
        la[k] = u
    if not grew:
        return a, False
    return State(tuple(sorted((k, v) for k, v in ga.items() if v)),
                 tuple(sorted((k, v) for k, v in la.items() if v)),
                 tuple(stack), a.labels), True


# ---------------------------------------------------------------------------
# Per-node transfer information

@dataclass
class NodeInfo:
    tag: str
    var: str | None = None
    name: str | None = None
    value: int | float | None = None
    value_type: str | None = None
    nargs: int = 0
    nresults: int = 0
    label: str | None = None


@dataclass
class FunctionDataflow:
    """Everything the engine needs about one function's nodes."""
    layout: FunctionLayout
    info: dict[int, NodeInfo] = field(default_factory=dict)
    loops_of: dict[int, tuple[int, ...]] = field(default_factory=dict)
    nodes: list[int] = field(default_factory=list)
    phi_static: int = 0
    n_locals: int = 0
    n_globals: int = 0


def _prepare(ctx: BuildContext, layout: FunctionLayout) -> FunctionDataflow:
    fd = FunctionDataflow(layout=layout)
    module = ctx.module
    func = layout.func
    fd.n_locals = len(func.params) + len(func.locals)
    fd.n_globals = len(module.globals)
    fd.phi_static = len(func.params)

    def visit(seq: Iterable[InstructionIR], loops: tuple[int, ...]) -> None:
        for inst in seq:
            node = layout.inst_node[id(inst)]
            fd.loops_of[node] = loops
            fd.nodes.append(node)
            o = inst.opcode
            if o == "block":
                begin = layout.begin_node[id(inst)]
                fd.info[begin] = NodeInfo("begin_block", label=inst.label,
                                          nargs=inst.block_params)
                fd.loops_of[begin] = loops
                fd.nodes.append(begin)
                fd.info[node] = NodeInfo("block_end", label=inst.label,
                                         nresults=inst.nresults)
                visit(inst.body, loops)
            elif o == "loop":
                fd.info[node] = NodeInfo("loop", label=inst.label)
                fd.loops_of[node] = loops + (node,)
                visit(inst.body, loops + (node,))
                end = layout.end_node[id(inst)]
                fd.info[end] = NodeInfo("end_loop", label=inst.label,
                                        nresults=inst.nresults)
                fd.loops_of[end] = loops
                fd.nodes.append(end)
            elif o == "if":
                fd.info[node] = NodeInfo("if")
                visit(inst.body, loops)
                if inst.has_else:
                    enode = layout.else_node[id(inst)]
                    fd.info[enode] = NodeInfo("identity")
                    fd.loops_of[enode] = loops
                    fd.nodes.append(enode)
                    visit(inst.else_body, loops)
            elif o == "call":
                callee = module.function_by_name(inst.callee)
                fd.info[node] = NodeInfo("call", name=inst.callee,
                                         nargs=callee.nargs,
                                         nresults=callee.nresults)
                fd.phi_static += 1 if callee.nresults else 0
            elif o == "call_indirect":
                sig = inst.type_use
                fd.info[node] = NodeInfo("call_indirect", name=sig.text(),
                                         nargs=len(sig.params),
                                         nresults=len(sig.results))
                fd.phi_static += 1 if sig.results else 0
            else:
                fd.info[node] = _plain_info(inst)
                if fd.info[node].tag in ("const", "local.get", "global.get"):
                    fd.phi_static += 1

    visit(func.body, ())
    exit_node = layout.exit_node
    fd.info[exit_node] = NodeInfo("exit", nresults=func.nresults)
    fd.loops_of[exit_node] = ()
    fd.nodes.append(exit_node)
    fd.info[layout.func_node] = NodeInfo("identity")
    fd.loops_of[layout.func_node] = ()
    return fd


_PLAIN_TAGS = {
    "Const": "const", "Unary": "unop", "Convert": "unop",
    "Binary": "binop", "Compare": "binop",
    "Drop": "drop", "Select": "select",
    "LocalGet": "local.get", "LocalSet": "local.set", "LocalTee": "local.tee",
    "GlobalGet": "global.get", "GlobalSet": "global.set",
    "Load": "load", "Store": "store",
    "MemorySize": "memsize", "MemoryGrow": "memgrow",
    "Nop": "identity", "Unreachable": "identity", "Return": "identity",
    "Br": "identity", "BrIf": "br_if", "BrTable": "br_if",
}


def _plain_info(inst: InstructionIR) -> NodeInfo:
    from . import opcodes as op
    t = op.opcode_inst_type(inst.opcode)
    tag = _PLAIN_TAGS[t]
    if t in ("Binary", "Compare", "Unary", "Convert"):
        # eqz is a one-operand comparison; follow the opcode arity
        tag = "unop" if op.SIMPLE_OPCODES[inst.opcode][1] == 1 else "binop"
    return NodeInfo(tag, var=inst.var, value=inst.value,
                    value_type=inst.value_type)


# ---------------------------------------------------------------------------
# Transfer function

def transfer(node: int, info: NodeInfo, s: State) -> tuple[State, list[frozenset]]:
    """One instruction's effect; returns (out state, popped dependency sets)."""
    tag = info.tag
    if tag == "const":
        dep = Dep(CONST_DEP, node, value=info.value, value_type=info.value_type)
        return s.push(frozenset((dep,))), []
    if tag == "unop":
        popped, s2 = s.pop(1)
        return s2.push(popped[0]), popped
    if tag == "binop":
        popped, s2 = s.pop(2)
        return s2.push(popped[0] | popped[1]), popped
    if tag == "drop":
        popped, s2 = s.pop(1)
        return s2, popped
    if tag == "select":
        popped, s2 = s.pop(3)  # v0, v1, condition (top)
        return s2.push(popped[0] | popped[1]), popped
    if tag == "local.get":
        dep = Dep(LOCAL_DEP, node, name=info.var)
        return s.push(s.get_local(info.var) | {dep}), []
    if tag == "local.set":
        popped, s2 = s.pop(1)
        return s2.set_local(info.var, popped[0]), popped
    if tag == "local.tee":
        popped, s2 = s.pop(1)
        return s2.set_local(info.var, popped[0]).push(popped[0]), popped
    if tag == "global.get":
        dep = Dep(GLOBAL_DEP, node, name=info.var)
        return s.push(s.get_global(info.var) | {dep}), []
    if tag == "global.set":
        popped, s2 = s.pop(1)
        return s2.set_global(info.var, popped[0]), popped
    if tag == "load":
        popped, s2 = s.pop(1)
        return s2.push(EMPTY), popped   # memory contents are untracked
    if tag == "store":
        popped, s2 = s.pop(2)
        return s2, popped
    if tag == "memsize":
        return s.push(EMPTY), []
    if tag == "memgrow":
        popped, s2 = s.pop(1)
        return s2.push(EMPTY), popped
    if tag == "identity" or tag == "block_end" or tag == "end_loop" or tag == "exit":
        return s, []
    if tag == "begin_block":
        # frame base sits below any values entering as block parameters
        labels = s.labels + ((info.label, len(s.stack) - info.nargs),)
        return State(s.globals_, s.locals_, s.stack, labels), []
    if tag == "loop":
        return s.push_label(info.label), []
    if tag == "if" or tag == "br_if":
        popped, s2 = s.pop(1)
        return s2, popped
    if tag == "call":
        popped, s2 = s.pop(info.nargs)
        if info.nresults:
            s2 = s2.push(frozenset((Dep(FUNCTION_DEP, node, name=info.name),)))
        return s2, popped
    if tag == "call_indirect":
        popped, s2 = s.pop(info.nargs + 1)
        if info.nresults:
            s2 = s2.push(frozenset((Dep(FUNCTION_DEP, node, name=info.name),)))
        return s2, popped
    raise DataflowError(f"no transfer rule for tag {tag!r}")


def adjust_for_edge(s: State, target_info: NodeInfo) -> State:
    """Frame fixup when an edge enters a construct exit or a loop header."""
    tag = target_info.tag
    if tag in ("block_end", "end_loop"):
        base, labels = _pop_label(s, target_info.label)
        r = target_info.nresults
        stack = s.stack[:base] + (s.stack[len(s.stack) - r:] if r else ())
        return State(s.globals_, s.locals_, stack, labels)
    if tag == "loop":
        for i in range(len(s.labels) - 1, -1, -1):
            if s.labels[i][0] == target_info.label:
                base = s.labels[i][1]
                return State(s.globals_, s.locals_, s.stack[:base], s.labels[:i])
        return s   # construct entry; the frame is not open yet
    if tag == "exit":
        r = target_info.nresults
        stack = s.stack[len(s.stack) - r:] if r else ()
        return State(s.globals_, s.locals_, stack, ())
    return s


def _pop_label(s: State, label: str) -> tuple[int, tuple]:
    for i in range(len(s.labels) - 1, -1, -1):
        if s.labels[i][0] == label:
            return s.labels[i][1], s.labels[:i]
    raise DataflowError(f"label {label!r} not open at a construct exit")


# ---------------------------------------------------------------------------
# Worklist engine

@dataclass
class AnalysisStats:
    pops: int = 0
    growth_revisits: int = 0
    max_stack: int = 0
    phi_static: int = 0
    n_locals: int = 0
    n_globals: int = 0
    transfer_counts: dict[int, int] = field(default_factory=dict)
    cfg_nodes: int = 0

    @property
    def height_bound(self) -> int:
        return (self.n_globals + self.n_locals + self.max_stack) * self.phi_static


@dataclass
class FunctionAnalysis:
    res: dict[int, State]
    stats: AnalysisStats
    fd: FunctionDataflow


def initial_state(fd: FunctionDataflow) -> State:
    seeds = []
    for name, _ty in fd.layout.func.params:
        var_node = fd.layout.param_var_node[name]
        seeds.append((name, frozenset((Dep(LOCAL_DEP, var_node, name=name),))))
    return State(locals_=tuple(sorted(seeds)))


def analyze_function(ctx: BuildContext, func_name: str) -> FunctionAnalysis:
    """LIFO worklist with loop-exit buffering; res maps nodes to joined inputs."""
    layout = ctx.layouts[func_name]
    fd = _prepare(ctx, layout)
    cpg = ctx.cpg
    stats = AnalysisStats(phi_static=fd.phi_static, n_locals=fd.n_locals,
                          n_globals=fd.n_globals, cfg_nodes=len(fd.nodes))
    res: dict[int, State] = {}
    if layout.func.is_import:
        return FunctionAnalysis(res, stats, fd)

    entry_edges = cpg.out_edges(layout.func_node, g.CFG)
    if not entry_edges:
        return FunctionAnalysis(res, stats, fd)
    entry = entry_edges[0].dst

    worklist: list[tuple[int, State]] = []
    pending_in_loop: dict[int, int] = {}
    exit_buffer: dict[int, list[tuple[int, State]]] = {}

    def push(node: int, state: State) -> None:
        worklist.append((node, state))
        for loop in fd.loops_of.get(node, ()):
            pending_in_loop[loop] = pending_in_loop.get(loop, 0) + 1

    def propagate(src: int, out: State) -> None:
        src_loops = fd.loops_of.get(src, ())
        for edge in cpg.out_edges(src, g.CFG):
            succ = edge.dst
            adjusted = adjust_for_edge(out, fd.info[succ])
            succ_loops = fd.loops_of.get(succ, ())
            left = [l for l in src_loops if l not in succ_loops]
            if left:
                outermost = min(left)
                exit_buffer.setdefault(outermost, []).append((succ, adjusted))
            else:
                push(succ, adjusted)

    def flush_ready(candidates: tuple[int, ...]) -> None:
        # innermost first; flushing only ever re-opens enclosing loops, so the
        # candidate set never grows beyond the popped node's own loop nest
        for loop in sorted(candidates, reverse=True):
            if pending_in_loop.get(loop, 0) == 0 and exit_buffer.get(loop):
                for node, state in exit_buffer.pop(loop):
                    push(node, state)

    push(entry, initial_state(fd))
    while worklist:
        node, incoming = worklist.pop()
        stats.pops += 1
        node_loops = fd.loops_of.get(node, ())
        for loop in node_loops:
            pending_in_loop[loop] -= 1
        seen = node in res
        joined, grew = join(res.get(node), incoming)
        if seen and not grew:
            flush_ready(node_loops)
            continue
        if seen:
            stats.growth_revisits += 1
        res[node] = joined
        stats.max_stack = max(stats.max_stack, len(joined.stack))
        out, _ = transfer(node, fd.info[node], joined)
        stats.max_stack = max(stats.max_stack, len(out.stack))
        stats.transfer_counts[node] = stats.transfer_counts.get(node, 0) + 1
        propagate(node, out)
        flush_ready(node_loops)
    if any(exit_buffer.values()):
        raise DataflowError("loop exit buffer not drained")
    return FunctionAnalysis(res, stats, fd)


def emit_ddg_edges(ctx: BuildContext, analysis: FunctionAnalysis) -> int:
    """Add one DDG edge per (origin, consumer, kind, label), coalesced."""
    cpg = ctx.cpg
    added = 0
    for node in sorted(analysis.res):
        state = analysis.res[node]
        _, popped = transfer(node, analysis.fd.info[node], state)
        deps = sorted({d for s in popped for d in s}, key=Dep.sort_key)
        for dep in deps:
            label = dep.value if dep.kind == CONST_DEP else dep.name
            key = (dep.kind, label)
            if cpg.has_edge(dep.origin, node, g.DDG, key):
                continue
            cpg.remember_edge(dep.origin, node, g.DDG, key)
            props = {"ddgType": dep.kind, "label": label}
            if dep.kind == CONST_DEP:
                props["valueType"] = dep.value_type
                props["value"] = dep.value
            cpg.add_edge(dep.origin, node, g.DDG, props)
            added += 1
    return added


def build_ddg(ctx: BuildContext) -> dict[str, AnalysisStats]:
    stats: dict[str, AnalysisStats] = {}
    for func in ctx.module.functions:
        analysis = analyze_function(ctx, func.name)
        emit_ddg_edges(ctx, analysis)
        stats[func.name] = analysis.stats
    return stats
