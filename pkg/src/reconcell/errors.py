"""Exception hierarchy for the workcell.

Every domain failure raises a :class:`CellError` subclass carrying a stable
``code`` string; the gateway and CLI map codes to HTTP statuses and exit
codes without inspecting messages.
"""

from __future__ import annotations


class CellError(Exception):
    """Base class for all domain errors."""

    code = "cell_error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


# -- value / model -----------------------------------------------------------

class InvalidValue(CellError):
    code = "invalid_value"


class OutOfRange(CellError):
    code = "out_of_range"


# -- registry ----------------------------------------------------------------

class InvalidDescriptor(CellError):
    code = "invalid_descriptor"


class NameConflict(CellError):
    code = "name_conflict"


class UnknownModule(CellError):
    code = "unknown_module"


class StaleSequence(CellError):
    code = "stale_sequence"


class ModuleOffline(CellError):
    code = "module_offline"


class UnknownVerb(CellError):
    code = "unknown_verb"


class SchemaViolation(CellError):
    code = "schema_violation"


# -- robot -------------------------------------------------------------------

class JointLimit(CellError):
    code = "joint_limit"


class NoConvergence(CellError):
    code = "no_convergence"


class BusyMode(CellError):
    code = "busy_mode"


class SpeedInfeasible(CellError):
    code = "speed_infeasible"


class IKFailure(CellError):
    code = "ik_failure"


class DragOutsideFreeMode(CellError):
    code = "drag_outside_free_mode"


class DragTooLarge(CellError):
    code = "drag_too_large"


class ToolAlreadyEquipped(CellError):
    code = "tool_already_equipped"


class NoToolEquipped(CellError):
    code = "no_tool_equipped"


class NotAtRack(CellError):
    code = "not_at_rack"


# -- periphery ---------------------------------------------------------------

class AlreadyReleased(CellError):
    code = "already_released"


class AlreadyEngaged(CellError):
    code = "already_engaged"


class BrakeEngaged(CellError):
    code = "brake_engaged"


class NotGrasping(CellError):
    code = "not_grasping"


class SlotEmpty(CellError):
    code = "slot_empty"


class SlotOccupied(CellError):
    code = "slot_occupied"


class UnknownTool(CellError):
    code = "unknown_tool"


# -- skill store -------------------------------------------------------------

class InvalidPayload(CellError):
    code = "invalid_payload"


class UnknownSkill(CellError):
    code = "unknown_skill"


class UnknownVersion(CellError):
    code = "unknown_version"


class SkillInUse(CellError):
    code = "skill_in_use"


# -- teach -------------------------------------------------------------------

class AlreadyRecording(CellError):
    code = "already_recording"


class EmptyRecording(CellError):
    code = "empty_recording"


class UnknownSession(CellError):
    code = "unknown_session"


# -- assembler ---------------------------------------------------------------

class SequenceSyntaxError(CellError):
    """Syntax error with source position; line and column are 1-based."""

    code = "syntax_error"

    def __init__(self, detail: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {detail}")
        self.line = line
        self.column = column


class DuplicateStateId(CellError):
    code = "duplicate_state_id"


class UnboundParam(CellError):
    code = "unbound_param"


class IdCollisionAfterExpansion(CellError):
    code = "id_collision_after_expansion"


class UnknownTransitionTarget(CellError):
    code = "unknown_transition_target"


class UnreachableState(CellError):
    code = "unreachable_state"


class MissingOutcomeCoverage(CellError):
    code = "missing_outcome_coverage"


class UnknownTemplate(CellError):
    code = "unknown_template"


class UnknownSequence(CellError):
    code = "unknown_sequence"


class ValidationFailed(CellError):
    """Raised when executing a sequence whose pre-flight report has findings."""

    code = "validation_failed"

    def __init__(self, findings: list):
        super().__init__(f"{len(findings)} validation finding(s)")
        self.findings = findings


class ExecutionAborted(CellError):
    code = "execution_aborted"


class UnknownRun(CellError):
    code = "unknown_run"


class RobotBusy(CellError):
    code = "robot_busy"
