"""AST node types for the assembly-sequence DSL, plus parameter binding
and loop expansion (the meta-scripting pass).

``$var`` placeholders may appear in state ids, module/robot names, skill
names, and command parameter documents; expansion substitutes them from
the parameter environment. A JSON string value that is exactly one
placeholder (``"$i"``) substitutes the *typed* value; placeholders
embedded in longer strings substitute textually.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from ..errors import IdCollisionAfterExpansion, InvalidValue, UnboundParam

END_SUCCESS = "END_SUCCESS"
END_FAILURE = "END_FAILURE"

PARAM_TYPES = ("int", "float", "string")

_PLACEHOLDER = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")


@dataclass(frozen=True)
class SequenceParam:
    name: str
    type: str
    default: object | None = None

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise InvalidValue(f"param {self.name}: type must be one of {PARAM_TYPES}")


@dataclass(frozen=True)
class SkillAction:
    """Late-bound skill reference: resolved against the store at execution."""

    skill: str
    robot: str
    version: int | None = None


@dataclass(frozen=True)
class CmdAction:
    module: str
    verb: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WaitAction:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidValue("wait duration must be >= 0")


@dataclass(frozen=True)
class NoopAction:
    pass


Action = Union[SkillAction, CmdAction, WaitAction, NoopAction]


@dataclass(frozen=True)
class StateNode:
    id: str
    action: Action
    transitions: tuple[tuple[str, str], ...] = ()  # (outcome, target) pairs
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class ForLoop:
    var: str
    start: int
    end: int  # inclusive
    body: tuple = ()
    line: int = 0
    column: int = 0


Item = Union[StateNode, ForLoop]


@dataclass(frozen=True)
class SequenceAST:
    name: str
    params: tuple[SequenceParam, ...] = ()
    items: tuple[Item, ...] = ()

    def is_loop_free(self) -> bool:
        return all(isinstance(i, StateNode) for i in self.items)

    def states(self) -> tuple[StateNode, ...]:
        if not self.is_loop_free():
            raise InvalidValue("AST still contains loops; expand first")
        return self.items  # type: ignore[return-value]


# -- expansion ----------------------------------------------------------------

def _subst_text(text: str, env: dict) -> str:
    def repl(m):
        name = m.group(1)
        if name not in env:
            raise UnboundParam(f"${name} is not bound")
        return str(env[name])

    return _PLACEHOLDER.sub(repl, text)


def _subst_value(value, env: dict):
    if isinstance(value, str):
        m = _PLACEHOLDER.fullmatch(value)
        if m:  # whole-value placeholder keeps the bound type
            name = m.group(1)
            if name not in env:
                raise UnboundParam(f"${name} is not bound")
            return env[name]
        return _subst_text(value, env)
    if isinstance(value, dict):
        return {k: _subst_value(v, env) for k, v in value.items()}
    if isinstance(value, list):
        return [_subst_value(v, env) for v in value]
    return value


def _subst_action(action: Action, env: dict) -> Action:
    if isinstance(action, SkillAction):
        return SkillAction(_subst_text(action.skill, env), _subst_text(action.robot, env), action.version)
    if isinstance(action, CmdAction):
        return CmdAction(_subst_text(action.module, env), _subst_text(action.verb, env),
                         _subst_value(action.params, env))
    return action


def _coerce_arg(param: SequenceParam, value):
    try:
        if param.type == "int":
            if isinstance(value, bool) or not isinstance(value, (int, str)):
                raise ValueError
            return int(value)
        if param.type == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise InvalidValue(f"param {param.name}: cannot coerce {value!r} to {param.type}") from None


def bind_params(ast: SequenceAST, args: dict | None) -> dict:
    """Resolve caller arguments against declared params (defaults applied)."""
    args = dict(args or {})
    env = {}
    for param in ast.params:
        if param.name in args:
            env[param.name] = _coerce_arg(param, args.pop(param.name))
        elif param.default is not None:
            env[param.name] = param.default
        else:
            raise UnboundParam(f"param {param.name} has no value and no default")
    if args:
        raise InvalidValue(f"unknown arguments: {sorted(args)}")
    return env


def expand(ast: SequenceAST, args: dict | None = None) -> SequenceAST:
    """Unroll loops and substitute every placeholder; result is loop-free.

    Idempotent on loop-free ASTs with no parameters.
    """
    env = bind_params(ast, args)
    out: list[StateNode] = []

    def emit(items, scope):
        for item in items:
            if isinstance(item, ForLoop):
                for value in range(item.start, item.end + 1):
                    emit(item.body, {**scope, item.var: value})
            else:
                out.append(StateNode(
                    _subst_text(item.id, scope),
                    _subst_action(item.action, scope),
                    tuple((outcome, _subst_text(target, scope)) for outcome, target in item.transitions),
                    item.line, item.column,
                ))

    emit(ast.items, env)
    seen = set()
    for state in out:
        if state.id in seen:
            raise IdCollisionAfterExpansion(f"state id {state.id!r} emitted twice")
        seen.add(state.id)
    return SequenceAST(ast.name, (), tuple(out))
