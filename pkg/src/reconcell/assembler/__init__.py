"""Assembly-sequence engine: DSL parser, meta-scripting expansion, FSM
compiler, renderers, pre-flight validation, and the tick-driven executor."""

from .compiler import SequenceIR, compile_ast, source_hash, validate_ir
from .executor import Finding, RunReport, SequenceExecutor, SequenceLibrary, validate
from .nodes import (
    END_FAILURE,
    END_SUCCESS,
    CmdAction,
    ForLoop,
    NoopAction,
    SequenceAST,
    SequenceParam,
    SkillAction,
    StateNode,
    WaitAction,
    expand,
)
from .parser import parse
from .render import render

__all__ = [
    "CmdAction", "END_FAILURE", "END_SUCCESS", "Finding", "ForLoop",
    "NoopAction", "RunReport", "SequenceAST", "SequenceExecutor",
    "SequenceIR", "SequenceLibrary", "SequenceParam", "SkillAction",
    "StateNode", "WaitAction", "compile_ast", "expand", "parse", "render",
    "source_hash", "validate", "validate_ir",
]
