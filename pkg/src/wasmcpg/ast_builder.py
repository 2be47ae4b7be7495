"""AST construction: module/function hierarchy plus operand-tree folding.

Folding simulates the value stack over a flat instruction sequence: the last
`nargs` pending producers become an instruction's AST children (childIndex 0
is the deepest operand); instructions producing no value are rooted
statements. Structured instructions fold their bodies first, then join the
outer frame as single units.

Node ids follow source order inside each function (Module, then per function:
Function node, body instructions, synthetic exit, signature subtree), which
the dependency notation of the DDG relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .ir import FunctionIR, InstructionIR, ModuleIR, instruction_arity
from . import graph as g
from . import opcodes as op


@dataclass
class FoldFrame:
    pending: list[int] = field(default_factory=list)  # LIFO: value producers
    rooted: list[int] = field(default_factory=list)   # FIFO: statements


def fold_step(cpg: g.Cpg, frame: FoldFrame, node: int, nargs: int, nresults: int) -> None:
    """Fold one instruction node into the frame, wiring AST child edges."""
    if nargs > len(frame.pending):
        raise ValidationError(
            f"AST folding underflow at node {node}: need {nargs} operands, "
            f"have {len(frame.pending)}")
    if nargs:
        children = frame.pending[len(frame.pending) - nargs:]
        del frame.pending[len(frame.pending) - nargs:]
        for i, child in enumerate(children):
            cpg.add_edge(node, child, g.AST, {"childIndex": i})
    if nresults == 0:
        frame.rooted.append(node)
    else:
        frame.pending.append(node)


def fold_instructions(cpg: g.Cpg, items: list[tuple[int, int, int]]) -> list[int]:
    """Fold a flat list of (node id, nargs, nresults); returns rooted statements.

    Leftover pending values are appended after the rooted statements, mirroring
    a block that produces results.
    """
    frame = FoldFrame()
    for node, nargs, nresults in items:
        fold_step(cpg, frame, node, nargs, nresults)
    return frame.rooted + frame.pending


@dataclass
class FunctionLayout:
    """Node bookkeeping one function's CFG/DDG builders need."""
    func: FunctionIR
    func_node: int
    exit_node: int | None = None
    inst_node: dict[int, int] = field(default_factory=dict)       # id(inst) -> node
    begin_node: dict[int, int] = field(default_factory=dict)      # id(block inst) -> BeginBlock
    end_node: dict[int, int] = field(default_factory=dict)        # id(loop inst) -> EndLoop
    else_node: dict[int, int] = field(default_factory=dict)       # id(if inst) -> Else
    param_var_node: dict[str, int] = field(default_factory=dict)  # param name -> VarNode


@dataclass
class BuildContext:
    module: ModuleIR
    cpg: g.Cpg
    module_node: int = -1
    layouts: dict[str, FunctionLayout] = field(default_factory=dict)


def _instruction_props(inst: InstructionIR) -> dict:
    t = op.opcode_inst_type(inst.opcode)
    props: dict = {"instType": t}
    if t == op.CONST:
        props["valueType"] = inst.value_type
        props["value"] = inst.value
    elif t in (op.BINARY, op.COMPARE, op.UNARY, op.CONVERT):
        props["opcode"] = inst.opcode
    elif t in (op.LOAD, op.STORE):
        props["offset"] = inst.offset
    elif t in (op.LOCAL_GET, op.LOCAL_SET, op.LOCAL_TEE, op.GLOBAL_GET, op.GLOBAL_SET):
        props["label"] = inst.var
    elif t == op.CALL:
        props["label"] = inst.callee
    elif t in (op.BR, op.BR_IF):
        props["label"] = inst.label
    elif t == op.BLOCK or t == op.LOOP:
        props["label"] = inst.label
        props["nresults"] = inst.nresults
    elif t == op.IF:
        props["label"] = inst.label
        props["hasElse"] = inst.has_else
    return props


def _create_nodes(ctx: BuildContext, layout: FunctionLayout,
                  seq: list[InstructionIR]) -> None:
    cpg = ctx.cpg
    for inst in seq:
        node = cpg.add_node(g.INSTRUCTION, _instruction_props(inst))
        layout.inst_node[id(inst)] = node
        if inst.opcode == "block":
            layout.begin_node[id(inst)] = cpg.add_node(
                g.INSTRUCTION, {"instType": "BeginBlock", "label": inst.label})
            _create_nodes(ctx, layout, inst.body)
        elif inst.opcode == "loop":
            _create_nodes(ctx, layout, inst.body)
            layout.end_node[id(inst)] = cpg.add_node(
                g.INSTRUCTION,
                {"instType": "EndLoop", "label": inst.label, "nresults": inst.nresults})
        elif inst.opcode == "if":
            _create_nodes(ctx, layout, inst.body)
            if inst.has_else:
                layout.else_node[id(inst)] = cpg.add_node(g.ELSE)
                _create_nodes(ctx, layout, inst.else_body)


def _fold_sequence(ctx: BuildContext, layout: FunctionLayout,
                   seq: list[InstructionIR], labels: dict[str, int],
                   seed: list[int] | None = None) -> FoldFrame:
    """Fold one nesting level; the returned frame holds statements and leftovers."""
    cpg = ctx.cpg
    frame = FoldFrame(pending=list(seed or ()))
    dead = False
    for inst in seq:
        node = layout.inst_node[id(inst)]
        if inst.is_structured():
            inner_labels = dict(labels)
            inner_labels[inst.label] = 0 if inst.opcode == "loop" else inst.nresults
            if inst.opcode == "if":
                if dead:
                    cond: list[int] = []
                else:
                    if not frame.pending:
                        raise ValidationError("if without a condition value")
                    cond = [frame.pending.pop()]
                tframe = _fold_sequence(ctx, layout, inst.body, inner_labels)
                then_stmts = tframe.rooted + tframe.pending
                idx = 0
                for c in cond:
                    cpg.add_edge(node, c, g.AST, {"childIndex": idx})
                    idx += 1
                for s in then_stmts:
                    cpg.add_edge(node, s, g.AST, {"childIndex": idx})
                    idx += 1
                if inst.has_else:
                    enode = layout.else_node[id(inst)]
                    eframe = _fold_sequence(ctx, layout, inst.else_body, inner_labels)
                    else_stmts = eframe.rooted + eframe.pending
                    j = 0
                    for s in else_stmts:
                        cpg.add_edge(enode, s, g.AST, {"childIndex": j})
                        j += 1
                    cpg.add_edge(node, enode, g.AST, {"childIndex": idx})
            else:
                seed: list[int] = []
                bp = inst.block_params
                if bp and not dead:
                    if len(frame.pending) < bp:
                        raise ValidationError("block parameter without a producer")
                    seed = frame.pending[len(frame.pending) - bp:]
                    del frame.pending[len(frame.pending) - bp:]
                bframe = _fold_sequence(ctx, layout, inst.body, inner_labels, seed)
                stmts = bframe.rooted + bframe.pending
                idx = 0
                if inst.opcode == "block":
                    cpg.add_edge(node, layout.begin_node[id(inst)], g.AST,
                                 {"childIndex": idx})
                    idx += 1
                for s in stmts:
                    cpg.add_edge(node, s, g.AST, {"childIndex": idx})
                    idx += 1
                if inst.opcode == "loop":
                    cpg.add_edge(node, layout.end_node[id(inst)], g.AST,
                                 {"childIndex": idx})
            if dead:
                frame.rooted.append(node)
            else:
                fold_step(cpg, frame, node, 0, inst.nresults)
            continue
        if dead:
            frame.rooted.append(node)
            continue
        nargs, nresults = instruction_arity(inst, ctx.module, layout.func, labels)
        fold_step(cpg, frame, node, nargs, nresults)
        if inst.opcode in ("br", "return", "unreachable", "br_table"):
            dead = True
    return frame


def _build_signature(ctx: BuildContext, layout: FunctionLayout) -> int:
    cpg = ctx.cpg
    func = layout.func
    sig = cpg.add_node(g.FUNCTION_SIGNATURE)
    params = cpg.add_node(g.PARAMETERS)
    cpg.add_edge(sig, params, g.AST, {"childIndex": 0})
    for i, (name, ty) in enumerate(func.params):
        var = cpg.add_node(g.VAR_NODE, {"name": name, "varType": ty})
        layout.param_var_node[name] = var
        cpg.add_edge(params, var, g.AST, {"childIndex": i})
    locals_node = cpg.add_node(g.LOCALS)
    cpg.add_edge(sig, locals_node, g.AST, {"childIndex": 1})
    for i, (name, ty) in enumerate(func.locals):
        var = cpg.add_node(g.VAR_NODE, {"name": name, "varType": ty})
        cpg.add_edge(locals_node, var, g.AST, {"childIndex": i})
    results = cpg.add_node(g.RESULTS)
    cpg.add_edge(sig, results, g.AST, {"childIndex": 2})
    for i, ty in enumerate(func.results):
        var = cpg.add_node(g.VAR_NODE, {"name": f"$r{i}", "varType": ty})
        cpg.add_edge(results, var, g.AST, {"childIndex": i})
    return sig


def build_ast(module: ModuleIR) -> BuildContext:
    """Create all nodes and the AST edge set for a parsed module."""
    cpg = g.Cpg()
    ctx = BuildContext(module=module, cpg=cpg)
    ctx.module_node = cpg.add_node(g.MODULE, {"name": module.name})

    for func in module.functions:
        fn_node = cpg.add_node(g.FUNCTION, {
            "name": func.name,
            "index": func.index,
            "nargs": func.nargs,
            "nlocals": len(func.locals),
            "nresults": func.nresults,
            "isImport": func.is_import,
            "isExport": func.is_export,
        })
        cpg.add_edge(ctx.module_node, fn_node, g.AST,
                     {"childIndex": func.index})
        layout = FunctionLayout(func=func, func_node=fn_node)
        ctx.layouts[func.name] = layout

        if not func.is_import:
            _create_nodes(ctx, layout, func.body)
            layout.exit_node = cpg.add_node(g.INSTRUCTION, {"instType": "Return"})

        sig = _build_signature(ctx, layout)
        cpg.add_edge(fn_node, sig, g.AST, {"childIndex": 0})

        if not func.is_import:
            labels = {"$__func__": func.nresults}
            frame = _fold_sequence(ctx, layout, func.body, labels)
            idx = 1
            for s in frame.rooted:
                cpg.add_edge(fn_node, s, g.AST, {"childIndex": idx})
                idx += 1
            # leftover producers are the return expression, under the exit node
            for i, t in enumerate(frame.pending):
                cpg.add_edge(layout.exit_node, t, g.AST, {"childIndex": i})
            cpg.add_edge(fn_node, layout.exit_node, g.AST, {"childIndex": idx})
    return ctx
