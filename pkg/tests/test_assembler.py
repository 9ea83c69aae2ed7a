"""Assembler front-half tests: grammar, expansion, compilation invariants,
rendering, and the parse->render->parse isomorphism over the corpus."""

import json
import random
from pathlib import Path

import pytest

from reconcell.assembler import (
    END_FAILURE,
    END_SUCCESS,
    CmdAction,
    ForLoop,
    NoopAction,
    SequenceIR,
    SkillAction,
    StateNode,
    WaitAction,
    compile_ast,
    expand,
    parse,
    render,
    source_hash,
)
from reconcell.errors import (
    DuplicateStateId,
    IdCollisionAfterExpansion,
    MissingOutcomeCoverage,
    SequenceSyntaxError,
    UnboundParam,
    UnknownTemplate,
    UnknownTransitionTarget,
    UnreachableState,
)

CORPUS = sorted((Path(__file__).parent / "corpus").glob("*.seq"))


class TestParse:
    def test_minimal(self):
        ast = parse('sequence s { state a: wait 0.1; }')
        assert ast.name == "s"
        (state,) = ast.items
        assert state.id == "a"
        assert state.action == WaitAction(0.1)
        assert state.transitions == ()

    def test_for_loop_node(self):
        ast = parse('sequence s { for i in 1..3 { state screw_$i: skill "fasten" on r1; } }')
        (loop,) = ast.items
        assert isinstance(loop, ForLoop)
        assert (loop.var, loop.start, loop.end) == ("i", 1, 3)
        (body,) = loop.body
        assert body.id == "screw_$i"
        assert body.action == SkillAction("fasten", "r1")

    def test_missing_semicolon_position(self):
        src = 'sequence s {\n  state a: wait 0.1\n}\n'
        with pytest.raises(SequenceSyntaxError) as err:
            parse(src)
        assert err.value.line == 3 and err.value.column == 1
        assert "';'" in err.value.detail

    def test_error_positions(self):
        cases = [
            ('sequence s { state a wait 0.1; }', 1, 22, "':'"),
            ('sequence s { state a: fly 1; }', 1, 23, "action"),
            ('sequence { state a: noop; }', 1, 10, "sequence name"),
            ('sequence s { state a: noop on ok -> b; }', 1, 31, "outcome"),
        ]
        for src, line, col, hint in cases:
            with pytest.raises(SequenceSyntaxError) as err:
                parse(src)
            assert (err.value.line, err.value.column) == (line, col), src
            assert hint in err.value.detail

    def test_duplicate_state_id(self):
        with pytest.raises(DuplicateStateId):
            parse('sequence s { state a: noop; state a: wait 0.1; }')

    def test_comments_ignored(self):
        ast = parse('# header\nsequence s { # inline\n  state a: noop; # trailing\n}\n')
        assert len(ast.items) == 1

    def test_cmd_json_params(self):
        ast = parse('sequence s { state c: cmd fix1.clamp {"part_id": "housing", "force": 3.5}; }')
        (state,) = ast.items
        assert state.action == CmdAction("fix1", "clamp", {"part_id": "housing", "force": 3.5})

    def test_params_with_defaults(self):
        ast = parse('sequence s(n: int = 2 label: string) { state a: noop; }')
        assert [(p.name, p.type, p.default) for p in ast.params] == [
            ("n", "int", 2), ("label", "string", None)]

    def test_skill_version_pin(self):
        ast = parse('sequence s { state a: skill "x" @3 on r1; }')
        assert ast.items[0].action == SkillAction("x", "r1", 3)

    def test_transitions_parsed(self):
        ast = parse('sequence s { state a: noop on SUCCEEDED -> b on FAILED -> end_failure; state b: noop; }')
        assert ast.items[0].transitions == (("SUCCEEDED", "b"), ("FAILED", "end_failure"))


class TestExpand:
    def test_loop_unrolls_in_order(self):
        ast = parse('sequence s { for i in 1..3 { state screw_$i: skill "fasten" on r1; } }')
        flat = expand(ast)
        assert [s.id for s in flat.states()] == ["screw_1", "screw_2", "screw_3"]
        assert flat.is_loop_free()

    def test_single_iteration(self):
        ast = parse('sequence s { for i in 1..1 { state only_$i: noop; } }')
        assert [s.id for s in expand(ast).states()] == ["only_1"]

    def test_collision_after_expansion(self):
        src = ('sequence s { for i in 1..2 { state x_$i: noop; } '
               'for j in 2..2 { state x_$j: noop; } }')
        with pytest.raises(IdCollisionAfterExpansion):
            expand(parse(src))

    def test_unbound_param(self):
        ast = parse('sequence s(n: int) { state a: wait 0.1; }')
        with pytest.raises(UnboundParam):
            expand(ast)
        assert expand(ast, {"n": 1}).states()[0].id == "a"

    def test_placeholder_in_cmd_params(self):
        ast = parse('sequence s(part: string) { state c: cmd fix1.clamp {"part_id": "$part"}; }')
        flat = expand(ast, {"part": "lid"})
        assert flat.states()[0].action.params == {"part_id": "lid"}

    def test_typed_whole_value_substitution(self):
        ast = parse('sequence s { for i in 2..2 { state c_$i: cmd rack1.put {"slot": "$i", "name": "tool_$i"}; } }')
        flat = expand(ast)
        assert flat.states()[0].action.params == {"slot": 2, "name": "tool_2"}

    def test_idempotent_on_loop_free(self):
        ast = expand(parse('sequence s { for i in 1..2 { state a_$i: noop; } }'))
        again = expand(ast)
        assert again == ast

    def test_unknown_placeholder_rejected(self):
        ast = parse('sequence s { state a_$nope: noop; }')
        with pytest.raises(UnboundParam):
            expand(ast)

    def test_nested_loops(self):
        flat = expand(parse((Path(__file__).parent / "corpus" / "07_nested_loops.seq").read_text()))
        assert [s.id for s in flat.states()] == [
            "cell_11", "cell_12", "row_done_1", "cell_21", "cell_22", "row_done_2"]


class TestCompile:
    def compile(self, src, args=None):
        return compile_ast(expand(parse(src), args), wallclock=False)

    def test_default_linear_wiring(self):
        ir = self.compile('sequence s { state a: noop; state b: noop; state c: noop; }')
        assert ir.entry == "a"
        assert ir.state("a").transitions == {"SUCCEEDED": "b", "FAILED": END_FAILURE}
        assert ir.state("b").transitions == {"SUCCEEDED": "c", "FAILED": END_FAILURE}
        assert ir.state("c").transitions == {"SUCCEEDED": END_SUCCESS, "FAILED": END_FAILURE}

    def test_explicit_transition_overrides(self):
        ir = self.compile('sequence s { state a: noop on FAILED -> retry_a; state retry_a: noop on SUCCEEDED -> end_success; }')
        assert ir.state("a").transitions["FAILED"] == "retry_a"
        assert ir.state("a").transitions["SUCCEEDED"] == "retry_a"  # default linear

    def test_unknown_target(self):
        with pytest.raises(UnknownTransitionTarget):
            self.compile('sequence s { state a: noop on FAILED -> ghost; }')

    def test_unreachable_state(self):
        with pytest.raises(UnreachableState):
            self.compile('sequence s { state a: noop on SUCCEEDED -> end_success; state lost: noop; }')

    def test_totality_and_reachability_every_ir(self):
        for path in CORPUS:
            ast = parse(path.read_text())
            args = {p.name: (1 if p.type == "int" else ("x" if p.type == "string" else 0.1))
                    for p in ast.params if p.default is None}
            ir = compile_ast(expand(ast, args), wallclock=False)
            ids = {s.id for s in ir.states}
            reachable = set()
            frontier = [ir.entry]
            while frontier:
                sid = frontier.pop()
                if sid in reachable or sid in (END_SUCCESS, END_FAILURE):
                    continue
                reachable.add(sid)
                frontier.extend(ir.state(sid).transitions.values())
            assert reachable == ids
            for s in ir.states:
                assert "SUCCEEDED" in s.transitions and "FAILED" in s.transitions

    def test_ir_doc_round_trip(self):
        ir = self.compile('sequence s { state a: skill "x" @1 on r1 on FAILED -> b; state b: wait 0.5; }')
        doc = json.loads(json.dumps(ir.to_doc()))
        back = SequenceIR.from_doc(doc)
        assert back.name == ir.name and back.entry == ir.entry
        assert back.states == ir.states
        assert back.source_hash == ir.source_hash

    def test_ir_from_doc_validates(self):
        ir = self.compile('sequence s { state a: noop; }')
        doc = ir.to_doc()
        doc["states"][0]["transitions"].pop("FAILED")
        with pytest.raises(MissingOutcomeCoverage):
            SequenceIR.from_doc(doc)
        doc2 = ir.to_doc()
        doc2["entry"] = "ghost"
        with pytest.raises(UnknownTransitionTarget):
            SequenceIR.from_doc(doc2)

    def test_source_hash_stable_and_payload_independent(self):
        src = 'sequence s { state a: skill "fasten" on r1; }'
        h1 = self.compile(src).source_hash
        h2 = self.compile(src).source_hash
        assert h1 == h2
        h3 = self.compile('sequence s { state a: skill "other" on r1; }').source_hash
        assert h3 != h1


def compile_with_args(src):
    ast = parse(src)
    args = {p.name: (3 if p.type == "int" else ("part_x" if p.type == "string" else 0.25))
            for p in ast.params if p.default is None}
    return compile_ast(expand(ast, args), wallclock=False)


def random_sequence(rng: random.Random) -> str:
    """Small random program over the full grammar, for round-trip fuzzing."""
    lines = [f"sequence fuzz_{rng.randint(0, 9999)} {{"]
    n_states = rng.randint(1, 6)
    ids = [f"s{k}" for k in range(n_states)]
    for k, sid in enumerate(ids):
        choice = rng.random()
        if choice < 0.3:
            action = f'skill "sk_{rng.randint(1, 3)}" on r{rng.randint(1, 2)}'
            if rng.random() < 0.3:
                action = action.replace(" on", f" @{rng.randint(1, 3)} on", 1)
        elif choice < 0.6:
            action = f'cmd mod{rng.randint(1, 2)}.verb{rng.randint(1, 2)}'
            if rng.random() < 0.5:
                action += f' {{"x": {rng.randint(0, 9)}}}'
        elif choice < 0.8:
            action = f"wait {round(rng.uniform(0.01, 0.5), 3)}"
        else:
            action = "noop"
        trans = ""
        if rng.random() < 0.5:
            target = rng.choice(ids + ["end_success", "end_failure"])
            trans += f" on FAILED -> {target}"
        if rng.random() < 0.3:
            target = rng.choice(ids[k:] + ["end_success"])
            trans += f" on SUCCEEDED -> {target}"
        lines.append(f"  state {sid}: {action}{trans};")
    lines.append("}")
    return "\n".join(lines)


class TestRenderRoundTrip:
    def test_listing_reparse_isomorphic_corpus(self):
        assert len(CORPUS) >= 8
        for path in CORPUS:
            ir = compile_with_args(path.read_text())
            listing = render(ir, "listing")
            re_ir = compile_ast(expand(parse(listing)), wallclock=False)
            assert re_ir.entry == ir.entry, path.name
            assert [s.id for s in re_ir.states] == [s.id for s in ir.states]
            for a, b in zip(ir.states, re_ir.states):
                assert a.action == b.action, path.name
                assert a.transitions == b.transitions, path.name

    def test_listing_reparse_isomorphic_fuzz(self):
        rng = random.Random(20260810)
        accepted = 0
        while accepted < 15:
            src = random_sequence(rng)
            try:
                ir = compile_ast(expand(parse(src)), wallclock=False)
            except (UnreachableState, UnknownTransitionTarget):
                continue  # random graphs may orphan states; skip those
            accepted += 1
            listing = render(ir, "listing")
            re_ir = compile_ast(expand(parse(listing)), wallclock=False)
            assert [s.id for s in re_ir.states] == [s.id for s in ir.states]
            for a, b in zip(ir.states, re_ir.states):
                assert (a.action, a.transitions) == (b.action, b.transitions)

    def test_render_deterministic(self):
        ir = compile_with_args(CORPUS[2].read_text())
        assert render(ir, "listing") == render(ir, "listing")
        assert render(ir, "dot") == render(ir, "dot")

    def test_dot_counts(self):
        ir = compile_with_args('sequence s { state a: noop; state b: wait 0.1; }')
        dot = render(ir, "dot")
        node_lines = [l for l in dot.splitlines() if "[shape=" in l]
        assert len(node_lines) == 2 + 2  # states + END nodes
        edge_lines = [l for l in dot.splitlines() if "->" in l]
        assert len(edge_lines) == sum(len(s.transitions) for s in ir.states)

    def test_listing_single_state_block(self):
        ir = compile_with_args('sequence s { state only: wait 0.1; }')
        listing = render(ir, "listing")
        assert listing.count("state ") == 1

    def test_unknown_template(self):
        ir = compile_with_args('sequence s { state a: noop; }')
        with pytest.raises(UnknownTemplate):
            render(ir, "smach")
