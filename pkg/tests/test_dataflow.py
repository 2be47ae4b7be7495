"""Dependency analysis: transfer rules, the worklist engine, edge emission."""

from __future__ import annotations

import random

import pytest

from conftest import ALL_FIXTURES, build_fixture, fixture_cpg
from gen import random_module
from oracle import round_robin_states
from wasmcpg.ast_builder import build_ast
from wasmcpg.cfg_builder import build_cfg
from wasmcpg.cg_builder import build_cg
from wasmcpg.errors import DataflowError
from wasmcpg.wat_parser import parse_module
from wasmcpg import dataflow as df
from wasmcpg import graph as g


def _context(src: str):
    module = parse_module(src)
    ctx = build_ast(module)
    build_cfg(ctx)
    build_cg(ctx)
    return ctx


def _ddg_edges(cpg):
    return {
        (e.src, e.dst, e.properties["ddgType"], e.properties["label"])
        for e in cpg.edges_of_type(g.DDG)
    }


class TestTransfer:
    def test_const_pushes_anchored_dependency(self):
        s = df.State()
        out, popped = df.transfer(
            5, df.NodeInfo("const", value=2, value_type="i32"), s)
        assert popped == []
        assert out.stack == (frozenset({df.Dep("Const", 5, None, 2, "i32")}),)

    def test_local_get_anchors_itself_and_forwards_the_store(self):
        seeded = df.State(locals_=(("$y", frozenset({df.Dep("Local", 16, "$y")})),))
        out, _ = df.transfer(4, df.NodeInfo("local.get", var="$y"), seeded)
        assert out.stack[-1] == {df.Dep("Local", 4, "$y"),
                                 df.Dep("Local", 16, "$y")}
        # an untouched local still records the use site
        out2, _ = df.transfer(4, df.NodeInfo("local.get", var="$q"), df.State())
        assert out2.stack[-1] == {df.Dep("Local", 4, "$q")}

    def test_binop_unions_operands(self):
        lv = frozenset({df.Dep("Local", 4, "$y")})
        cv = frozenset({df.Dep("Const", 5, None, 2, "i32")})
        s = df.State(stack=(frozenset(), lv, cv))
        out, popped = df.transfer(6, df.NodeInfo("binop"), s)
        assert out.stack == (frozenset(), lv | cv)
        assert popped == [lv, cv]

    def test_select_discards_condition_set(self):
        a, b, c = (frozenset({df.Dep("Const", i, None, i, "i32")}) for i in (1, 2, 3))
        out, popped = df.transfer(9, df.NodeInfo("select"), df.State(stack=(a, b, c)))
        assert out.stack == (a | b,)
        assert popped == [a, b, c]

    def test_load_pushes_empty_set(self):
        addr = frozenset({df.Dep("Local", 4, "$p")})
        out, popped = df.transfer(7, df.NodeInfo("load"), df.State(stack=(addr,)))
        assert out.stack == (frozenset(),)
        assert popped == [addr]

    def test_call_pushes_function_dependency(self):
        arg = frozenset({df.Dep("Const", 1, None, 0, "i32")})
        info = df.NodeInfo("call", name="$fgetc", nargs=1, nresults=1)
        out, popped = df.transfer(3, info, df.State(stack=(arg,)))
        assert out.stack == (frozenset({df.Dep("Function", 3, "$fgetc")}),)
        assert popped == [arg]

    def test_stack_underflow(self):
        with pytest.raises(DataflowError, match="underflow"):
            df.transfer(1, df.NodeInfo("binop"), df.State())

    def test_monotone_on_random_states(self):
        rng = random.Random(7)
        deps = [df.Dep("Const", i, None, i, "i32") for i in range(6)]
        for _ in range(200):
            small = frozenset(rng.sample(deps, rng.randrange(0, 4)))
            big = small | frozenset(rng.sample(deps, rng.randrange(0, 3)))
            tag = rng.choice(["binop", "drop", "local.set", "local.tee"])
            info = df.NodeInfo(tag, var="$x")
            extra = frozenset(rng.sample(deps, 2))
            s1 = df.State(stack=(extra, small))
            s2 = df.State(stack=(extra, big))
            o1, _ = df.transfer(0, info, s1)
            o2, _ = df.transfer(0, info, s2)
            for x, y in zip(o1.stack, o2.stack):
                assert x <= y
            assert dict(o1.locals_).get("$x", frozenset()) <= \
                dict(o2.locals_).get("$x", frozenset())


class TestJoin:
    def test_mismatched_heights(self):
        with pytest.raises(DataflowError, match="mismatched stack heights"):
            df.join(df.State(stack=(frozenset(),)), df.State())

    def test_pointwise_union_and_growth_flag(self):
        a = df.State(stack=(frozenset({df.Dep("Const", 1, None, 1, "i32")}),))
        b = df.State(stack=(frozenset({df.Dep("Const", 2, None, 2, "i32")}),))
        joined, grew = df.join(a, b)
        assert grew and len(joined.stack[0]) == 2
        again, grew2 = df.join(joined, b)
        assert not grew2 and again is joined


class TestAnalyzeFunction:
    def test_straight_line_single_pass(self):
        ctx = _context("""(module (func $f
            i32.const 1
            i32.const 2
            i32.add
            drop))""")
        analysis = df.analyze_function(ctx, "$f")
        assert all(c == 1 for c in analysis.stats.transfer_counts.values())
        assert analysis.stats.growth_revisits == 0

    def test_fig_merge_joins_both_branches(self):
        ctx, _ = build_fixture("fig_ddg")
        analysis = df.analyze_function(ctx, "$test")
        # node 12 is the final add; its input stack carries both branch results
        state = analysis.res[12]
        labels = {(d.kind, d.name or d.value) for d in state.stack[0]}
        assert {("Local", "$y"), ("Local", "$z"),
                ("Const", 2), ("Const", 3)} <= labels

    @pytest.mark.parametrize("seed", range(10))
    def test_loop_fixpoint_matches_round_robin(self, seed):
        ctx = _context(random_module(seed, max_insts=50))
        for fn in ctx.module.functions:
            analysis = df.analyze_function(ctx, fn.name)
            assert analysis.res == round_robin_states(ctx, fn.name), fn.name

    def test_inner_loop_cache(self):
        # The outer loop needs a second sweep (it grows $i), but delivers an
        # unchanged state to the inner loop, whose body must not be re-swept.
        ctx = _context("""(module (func $nested
            (local $i i32)
            (local $j i32)
            loop $OUT
              local.get $i
              i32.const 1
              i32.add
              local.set $i
              i32.const 5
              local.set $j
              loop $IN
                local.get $j
                br_if $IN
              end
              local.get $i
              i32.const 10
              i32.lt_s
              br_if $OUT
            end))""")
        cpg = ctx.cpg
        analysis = df.analyze_function(ctx, "$nested")
        counts = analysis.stats.transfer_counts
        layout = ctx.layouts["$nested"]
        by_node = {nid: cpg.node(nid).properties
                   for nid in layout.inst_node.values()}
        inner_get = next(n for n, p in by_node.items()
                         if p.get("instType") == "LocalGet"
                         and p.get("label") == "$j"
                         and cpg.node_property(n - 1, "instType") == "Loop")
        outer_add = next(n for n, p in by_node.items()
                         if p.get("instType") == "Binary")
        assert counts[outer_add] == 2      # outer body re-swept once
        assert counts[inner_get] == 1      # inner body swept exactly once

    @pytest.mark.parametrize("name", ALL_FIXTURES)
    def test_height_bound_on_fixtures(self, name):
        _, report = build_fixture(name)
        for fname, stats in report.function_stats.items():
            if stats.cfg_nodes == 0:
                continue
            assert stats.growth_revisits <= stats.height_bound, fname
            assert stats.pops <= (stats.height_bound + 1) * stats.cfg_nodes, fname

    def test_ddg_stage_dominates_on_loop_heavy_input(self):
        from wasmcpg.pipeline import build_cpg
        from gen import scaling_module
        _, report = build_cpg(scaling_module(500))
        ddg = report.timings["ddg"]
        assert all(ddg >= report.timings[s] for s in ("parse", "ast", "cfg", "cg"))


class TestEmitDdgEdges:
    def test_fig_edge_properties(self):
        cpg = fixture_cpg("fig_ddg")
        edge = next(e for e in cpg.edges_of_type(g.DDG)
                    if e.src == 4 and e.dst == 6)
        assert edge.properties == {"ddgType": "Local", "label": "$y"}

    def test_no_value_consumers_no_edges(self):
        ctx = _context("(module (func $f nop nop))")
        ctx.cpg.freeze()
        assert ctx.cpg.edges_of_type(g.DDG) == []

    def test_memory_is_not_tracked(self):
        ctx = _context("""(module (func $f (result i32)
            i32.const 8
            i32.const 42
            i32.store
            i32.const 8
            i32.load))""")
        cpg = ctx.cpg
        store = next(n for n in cpg.nodes
                     if n.properties.get("instType") == "Store")
        load = next(n for n in cpg.nodes
                    if n.properties.get("instType") == "Load")
        assert not any(e.src == store.id and e.dst == load.id
                       for e in cpg.edges_of_type(g.DDG))
        # the loaded value carries nothing: the exit expression has no deps
        analysis = df.analyze_function(ctx, "$f")
        exit_state = analysis.res[ctx.layouts["$f"].exit_node]
        assert exit_state.stack[-1] == frozenset()

    def test_libpng_store_dependencies(self):
        # frozen from a hand-simulated transfer trace over the token loop:
        # the address operand carries $token/$i/const-1 through the adds, the
        # value operand carries the fgetc result and the $ret read
        cpg = fixture_cpg("libpng_get_token")
        store = next(n for n in cpg.nodes
                     if n.properties.get("instType") == "Store")
        incoming = {
            (cpg.node_property(e.src, "instType"),
             e.properties["ddgType"], e.properties["label"])
            for e in cpg.in_edges(store.id, g.DDG)
        }
        assert incoming == {
            ("Call", "Function", "$fgetc"),
            ("LocalGet", "Local", "$token"),
            ("LocalGet", "Local", "$i"),
            ("LocalGet", "Local", "$ret"),
            ("Const", "Const", 1),
            (None, "Local", "$token"),   # the parameter node seed
        }

    def test_duplicate_edges_coalesce(self):
        for name in ALL_FIXTURES:
            cpg = fixture_cpg(name)
            seen = set()
            for e in cpg.edges_of_type(g.DDG):
                key = (e.src, e.dst, e.properties["ddgType"],
                       e.properties["label"])
                assert key not in seen
                seen.add(key)
