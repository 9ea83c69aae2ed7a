"""FSM compiler: loop-free AST -> executable sequence IR.

Default wiring is linear: state k's SUCCEEDED goes to state k+1 (the last
state to END_SUCCESS) and every state's FAILED falls to END_FAILURE unless
an explicit transition says otherwise. Compilation establishes the IR
invariants: all targets exist, every state is reachable from the entry,
and every state covers SUCCEEDED and FAILED.

The source hash is the SHA-256 of the expanded AST's canonical
serialization; it identifies the compiled program independently of skill
payloads, which stay late-bound.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass

from ..errors import (
    InvalidValue,
    MissingOutcomeCoverage,
    UnknownTransitionTarget,
    UnreachableState,
)
from .nodes import (
    END_FAILURE,
    END_SUCCESS,
    Action,
    CmdAction,
    NoopAction,
    SequenceAST,
    SkillAction,
    WaitAction,
)

SUCCEEDED = "SUCCEEDED"
FAILED = "FAILED"

_END_ALIASES = {"end_success": END_SUCCESS, "end_failure": END_FAILURE,
                END_SUCCESS: END_SUCCESS, END_FAILURE: END_FAILURE}


def action_to_doc(action: Action) -> dict:
    if isinstance(action, SkillAction):
        doc = {"type": "skill", "skill": action.skill, "robot": action.robot}
        if action.version is not None:
            doc["version"] = action.version
        return doc
    if isinstance(action, CmdAction):
        return {"type": "cmd", "module": action.module, "verb": action.verb, "params": action.params}
    if isinstance(action, WaitAction):
        return {"type": "wait", "duration": action.duration}
    return {"type": "noop"}


def action_from_doc(doc: dict) -> Action:
    t = doc.get("type")
    if t == "skill":
        return SkillAction(doc["skill"], doc["robot"], doc.get("version"))
    if t == "cmd":
        return CmdAction(doc["module"], doc["verb"], dict(doc.get("params", {})))
    if t == "wait":
        return WaitAction(float(doc["duration"]))
    if t == "noop":
        return NoopAction()
    raise InvalidValue(f"unknown action type {t!r}")


@dataclass(frozen=True)
class IRState:
    id: str
    action: Action
    transitions: dict  # outcome -> state id | END_SUCCESS | END_FAILURE

    def to_doc(self) -> dict:
        return {"id": self.id, "action": action_to_doc(self.action),
                "transitions": dict(sorted(self.transitions.items()))}


@dataclass(frozen=True)
class SequenceIR:
    name: str
    entry: str
    states: tuple[IRState, ...]
    source_hash: str
    compiled_at: float = 0.0  # wall clock; persistence metadata only

    def state(self, state_id: str) -> IRState:
        for s in self.states:
            if s.id == state_id:
                return s
        raise InvalidValue(f"no state {state_id!r} in sequence {self.name}")

    def skill_refs(self) -> list[SkillAction]:
        return [s.action for s in self.states if isinstance(s.action, SkillAction)]

    def robot_names(self) -> set:
        return {a.robot for a in self.skill_refs()}

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "entry": self.entry,
            "states": [s.to_doc() for s in self.states],
            "source_hash": self.source_hash,
            "compiled_at": self.compiled_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SequenceIR":
        from ..model import _check_keys

        _check_keys(doc, {"name", "entry", "states", "source_hash"}, "sequence_ir",
                    optional={"compiled_at"})
        states = tuple(
            IRState(str(s["id"]), action_from_doc(s["action"]), dict(s["transitions"]))
            for s in doc["states"]
        )
        ir = cls(str(doc["name"]), str(doc["entry"]), states,
                 str(doc["source_hash"]), float(doc.get("compiled_at", 0.0)))
        validate_ir(ir)
        return ir


def canonical_ast_doc(ast: SequenceAST) -> dict:
    """Canonical serialization of an expanded AST (input to the source hash)."""
    return {
        "name": ast.name,
        "states": [
            {"id": s.id, "action": action_to_doc(s.action),
             "transitions": [[o, t] for o, t in s.transitions]}
            for s in ast.states()
        ],
    }


def source_hash(ast: SequenceAST) -> str:
    data = json.dumps(canonical_ast_doc(ast), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(data.encode()).hexdigest()


def compile_ast(ast: SequenceAST, wallclock: bool = True) -> SequenceIR:
    """Compile a loop-free AST; raises if loops remain."""
    states = ast.states()
    if not states:
        raise InvalidValue("sequence has no states")
    ids = [s.id for s in states]
    id_set = set(ids)

    ir_states = []
    for idx, node in enumerate(states):
        default_next = ids[idx + 1] if idx + 1 < len(states) else END_SUCCESS
        transitions = {SUCCEEDED: default_next, FAILED: END_FAILURE}
        for outcome, target in node.transitions:
            resolved = _END_ALIASES.get(target, target)
            if resolved not in (END_SUCCESS, END_FAILURE) and resolved not in id_set:
                raise UnknownTransitionTarget(
                    f"state {node.id!r}: transition {outcome} -> unknown state {target!r}")
            transitions[outcome] = resolved
        ir_states.append(IRState(node.id, node.action, transitions))

    ir = SequenceIR(ast.name, ids[0], tuple(ir_states), source_hash(ast),
                    time.time() if wallclock else 0.0)
    validate_ir(ir)
    return ir


def validate_ir(ir: SequenceIR):
    """Structural invariants: target existence, totality, reachability."""
    id_set = {s.id for s in ir.states}
    if ir.entry not in id_set:
        raise UnknownTransitionTarget(f"entry state {ir.entry!r} does not exist")
    for s in ir.states:
        for outcome, target in s.transitions.items():
            if target not in (END_SUCCESS, END_FAILURE) and target not in id_set:
                raise UnknownTransitionTarget(
                    f"state {s.id!r}: {outcome} -> unknown state {target!r}")
        for needed in (SUCCEEDED, FAILED):
            if needed not in s.transitions:
                raise MissingOutcomeCoverage(f"state {s.id!r} lacks a {needed} transition")
    reachable = set()
    frontier = [ir.entry]
    by_id = {s.id: s for s in ir.states}
    while frontier:
        sid = frontier.pop()
        if sid in reachable or sid in (END_SUCCESS, END_FAILURE):
            continue
        reachable.add(sid)
        frontier.extend(by_id[sid].transitions.values())
    unreachable = id_set - reachable
    if unreachable:
        raise UnreachableState(f"states never reached: {sorted(unreachable)}")
