"""Deterministic IR renderers.

``listing`` emits DSL source that re-parses and re-compiles to an
isomorphic IR (every transition explicit, so default wiring cannot drift).
``dot`` emits a graph description: one node per state plus the two END
nodes, one edge per transition.
"""

from __future__ import annotations

import json

from ..errors import UnknownTemplate
from .compiler import FAILED, SUCCEEDED, IRState, SequenceIR
from .nodes import END_FAILURE, END_SUCCESS, CmdAction, NoopAction, SkillAction, WaitAction

_END_KEYWORDS = {END_SUCCESS: "end_success", END_FAILURE: "end_failure"}


def render(ir: SequenceIR, template: str) -> str:
    if template == "listing":
        return render_listing(ir)
    if template == "dot":
        return render_dot(ir)
    raise UnknownTemplate(f"no template {template!r} (know: listing, dot)")


def _render_action(action) -> str:
    if isinstance(action, SkillAction):
        out = f"skill {json.dumps(action.skill)}"
        if action.version is not None:
            out += f" @{action.version}"
        return f"{out} on {action.robot}"
    if isinstance(action, CmdAction):
        out = f"cmd {action.module}.{action.verb}"
        if action.params:
            out += " " + json.dumps(action.params, sort_keys=True, separators=(", ", ": "))
        return out
    if isinstance(action, WaitAction):
        return f"wait {action.duration!r}"
    if isinstance(action, NoopAction):
        return "noop"
    raise UnknownTemplate(f"unrenderable action {action!r}")


def _outcome_order(state: IRState):
    rest = sorted(o for o in state.transitions if o not in (SUCCEEDED, FAILED))
    return [SUCCEEDED, FAILED] + rest


def render_listing(ir: SequenceIR) -> str:
    lines = [f"# compiled from source {ir.source_hash[:12]}", f"sequence {ir.name} {{"]
    for state in ir.states:
        transitions = " ".join(
            f"on {outcome} -> {_END_KEYWORDS.get(state.transitions[outcome], state.transitions[outcome])}"
            for outcome in _outcome_order(state)
        )
        lines.append(f"  state {state.id}: {_render_action(state.action)} {transitions};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_dot(ir: SequenceIR) -> str:
    lines = [f'digraph "{ir.name}" {{', "  rankdir=TB;"]
    lines.append(f'  "{END_SUCCESS}" [shape=doublecircle];')
    lines.append(f'  "{END_FAILURE}" [shape=doublecircle];')
    for state in ir.states:
        shape = "box"
        extra = ", style=bold" if state.id == ir.entry else ""
        lines.append(f'  "{state.id}" [shape={shape}{extra}];')
    for state in ir.states:
        for outcome in _outcome_order(state):
            lines.append(f'  "{state.id}" -> "{state.transitions[outcome]}" [label="{outcome}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
