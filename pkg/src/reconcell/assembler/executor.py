"""Sequence execution: pre-flight validation against the live cell and a
tick-driven FSM engine.

Skill references resolve through the store at the instant each state is
entered (late binding), so overwriting a skill changes behavior on the next
entry with zero recompilation. One token walks the FSM; at most one run may
reference a given robot at a time. A module detaching mid-command surfaces
as an ABORTED outcome, which routes through the state's FAILED transition
unless the state maps ABORTED explicitly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..errors import (
    CellError,
    RobotBusy,
    UnknownRun,
    UnknownSkill,
    UnknownVersion,
    ValidationFailed,
)
from ..model import EventKind
from ..registry import CellRegistry, CommandHandle, ModuleState
from ..skills import SkillKind, SkillStore
from .compiler import FAILED, SUCCEEDED, SequenceIR
from .nodes import (
    END_FAILURE,
    END_SUCCESS,
    CmdAction,
    NoopAction,
    SkillAction,
    WaitAction,
)

# findings kinds
MISSING_SKILL = "MISSING_SKILL"
MISSING_MODULE = "MISSING_MODULE"
MODULE_OFFLINE = "MODULE_OFFLINE"
UNKNOWN_VERB = "UNKNOWN_VERB"
MODEL_MISMATCH = "MODEL_MISMATCH"

# safety valve: instant states processed per run per tick before the run is
# declared livelocked (a noop cycle would otherwise spin forever)
MAX_CHAIN_PER_TICK = 10_000


@dataclass(frozen=True)
class Finding:
    kind: str
    severity: str  # "error" | "warning"
    state_id: str
    detail: str

    def to_doc(self) -> dict:
        return {"kind": self.kind, "severity": self.severity,
                "state": self.state_id, "detail": self.detail}


def validate(ir: SequenceIR, cell, store: SkillStore) -> list[Finding]:
    """Pre-flight report; empty of errors means runnable.

    ``cell`` is a CellConfiguration snapshot; skills come from the store.
    Model mismatches are warnings, everything else is an error.
    """
    findings: list[Finding] = []
    by_name = {m.descriptor.name: m for m in cell.modules}

    def check_module(state_id, name, verb=None):
        rec = by_name.get(name)
        if rec is None:
            findings.append(Finding(MISSING_MODULE, "error", state_id, f"module {name!r} not attached"))
            return None
        if rec.state is not ModuleState.ONLINE:
            findings.append(Finding(MODULE_OFFLINE, "error", state_id,
                                    f"module {name!r} is {rec.state.value}"))
        if verb is not None and rec.descriptor.capability(verb) is None:
            findings.append(Finding(UNKNOWN_VERB, "error", state_id,
                                    f"module {name!r} has no verb {verb!r}"))
        return rec

    for state in ir.states:
        action = state.action
        if isinstance(action, SkillAction):
            rec = check_module(state.id, action.robot, "execute_trajectory")
            try:
                entry = store.get(action.skill, action.version)
            except (UnknownSkill, UnknownVersion) as exc:
                findings.append(Finding(MISSING_SKILL, "error", state.id, exc.detail))
                continue
            if entry.kind is SkillKind.PRIMITIVE:
                spec = entry.payload
                kind_matches = [m for m in cell.modules
                                if m.descriptor.kind is spec.module_kind
                                and m.state is ModuleState.ONLINE]
                if not kind_matches:
                    findings.append(Finding(MISSING_MODULE, "error", state.id,
                                            f"no ONLINE module of kind {spec.module_kind.value}"))
                elif all(m.descriptor.capability(spec.verb) is None for m in kind_matches):
                    findings.append(Finding(UNKNOWN_VERB, "error", state.id,
                                            f"kind {spec.module_kind.value} has no verb {spec.verb!r}"))
            elif rec is not None:
                skill_model = entry.meta.get("robot_model")
                robot_model = rec.descriptor.info.get("arm_model")
                if skill_model and robot_model and skill_model != robot_model:
                    findings.append(Finding(MODEL_MISMATCH, "warning", state.id,
                                            f"skill recorded on {skill_model!r}, robot is {robot_model!r}"))
        elif isinstance(action, CmdAction):
            check_module(state.id, action.module, action.verb)
    return findings


@dataclass
class StateRecord:
    state_id: str
    entered: float
    exited: float | None = None
    outcome: str | None = None

    def to_doc(self) -> dict:
        return {"state": self.state_id, "entered": self.entered,
                "exited": self.exited, "outcome": self.outcome}


@dataclass
class RunReport:
    run_id: str
    sequence: str
    source_hash: str
    records: list[StateRecord] = field(default_factory=list)
    final_outcome: str | None = None  # END_SUCCESS | END_FAILURE
    first_seq: int = 0
    last_seq: int = 0

    @property
    def done(self) -> bool:
        return self.final_outcome is not None

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "sequence": self.sequence,
            "source_hash": self.source_hash,
            "records": [r.to_doc() for r in self.records],
            "final_outcome": self.final_outcome,
            "event_seq_range": [self.first_seq, self.last_seq],
        }


class _Run:
    def __init__(self, run_id: str, ir: SequenceIR, report: RunReport):
        self.run_id = run_id
        self.ir = ir
        self.report = report
        self.current: str | None = None
        self.pending_cmd: CommandHandle | None = None
        self.wait_until: float | None = None
        self.done_event = threading.Event()


class SequenceExecutor:
    """Owns active runs; ``tick()`` is called once per simulation step by
    the cell, after module agents have ticked."""

    SOURCE = "sequencer"

    def __init__(self, registry: CellRegistry, store: SkillStore):
        self.registry = registry
        self.store = store
        self._runs: dict[str, _Run] = {}
        self._active: list[_Run] = []
        self._counter = 0

    # -- lifecycle -----------------------------------------------------------

    def start(self, ir: SequenceIR) -> RunReport:
        findings = validate(ir, self.registry.snapshot(), self.store)
        errors = [f for f in findings if f.severity == "error"]
        if errors:
            raise ValidationFailed([f.to_doc() for f in errors])
        busy = self._busy_robots() & ir.robot_names()
        if busy:
            raise RobotBusy(f"robot(s) already running a sequence: {sorted(busy)}")
        self._counter += 1
        run_id = f"run{self._counter:04d}"
        report = RunReport(run_id, ir.name, ir.source_hash)
        run = _Run(run_id, ir, report)
        self._runs[run_id] = run
        self._active.append(run)
        ev = self.registry.emit(self.SOURCE, EventKind.RUN_STARTED,
                                {"run_id": run_id, "sequence": ir.name,
                                 "source_hash": ir.source_hash})
        report.first_seq = ev.seq
        self._enter(run, ir.entry)
        self._advance(run)  # instant states resolve within the starting tick
        return report

    def report(self, run_id: str) -> RunReport:
        run = self._runs.get(run_id)
        if run is None:
            raise UnknownRun(f"no run {run_id}")
        return run.report

    def reports(self) -> list[RunReport]:
        return [r.report for r in self._runs.values()]

    def wait(self, run_id: str, timeout: float | None = None) -> bool:
        run = self._runs.get(run_id)
        if run is None:
            raise UnknownRun(f"no run {run_id}")
        return run.done_event.wait(timeout)

    def tick(self):
        for run in list(self._active):
            self._advance(run)

    def active_count(self) -> int:
        return len(self._active)

    def _busy_robots(self) -> set:
        busy = set()
        for run in self._active:
            busy |= run.ir.robot_names()
        return busy

    # -- state machinery -------------------------------------------------------

    def _enter(self, run: _Run, state_id: str):
        run.current = state_id
        run.report.records.append(StateRecord(state_id, self.registry.clock.now))
        self.registry.emit(self.SOURCE, EventKind.STATE_ENTERED,
                           {"run_id": run.run_id, "state": state_id,
                            "sequence": run.ir.name})
        state = run.ir.state(state_id)
        action = state.action
        run.pending_cmd = None
        run.wait_until = None
        try:
            if isinstance(action, SkillAction):
                run.pending_cmd = self._start_skill(action)
            elif isinstance(action, CmdAction):
                module_id = self.registry.module_id_by_name(action.module)
                run.pending_cmd = self.registry.dispatch(module_id, action.verb, action.params)
            elif isinstance(action, WaitAction):
                run.wait_until = self.registry.clock.now + action.duration
            # NoopAction: resolved immediately in _advance
        except CellError as exc:
            # action could not even start (module gone/offline, skill deleted)
            self._settle(run, FAILED, {"error": exc.code, "detail": exc.detail})

    def _start_skill(self, action: SkillAction) -> CommandHandle:
        entry = self.store.get(action.skill, action.version)  # late binding
        if entry.kind is SkillKind.TRAJECTORY:
            robot_id = self.registry.module_id_by_name(action.robot)
            return self.registry.dispatch(robot_id, "execute_trajectory",
                                          {"trajectory": entry.payload.to_doc()})
        spec = entry.payload
        candidates = self.registry.find_modules(kind=spec.module_kind)
        if not candidates:
            from ..errors import UnknownModule

            raise UnknownModule(f"no ONLINE module of kind {spec.module_kind.value}")
        return self.registry.dispatch(candidates[0].module_id, spec.verb, spec.params)

    def _advance(self, run: _Run):
        for _ in range(MAX_CHAIN_PER_TICK):
            if run.report.done or run.current is None:
                return
            outcome = self._poll_outcome(run)
            if outcome is None:
                return  # still working; revisit next tick
            self._settle(run, outcome, None)
            if run.report.done:
                return
        # only instant-state cycles can get here
        self._finish(run, END_FAILURE)

    def _poll_outcome(self, run: _Run) -> str | None:
        state = run.ir.state(run.current)
        if isinstance(state.action, NoopAction):
            return SUCCEEDED
        if run.wait_until is not None:
            return SUCCEEDED if self.registry.clock.now >= run.wait_until - 1e-9 else None
        if run.pending_cmd is not None:
            return run.pending_cmd.outcome if run.pending_cmd.done else None
        return None  # settle already routed this state

    def _settle(self, run: _Run, outcome: str, error: dict | None):
        record = run.report.records[-1]
        record.exited = self.registry.clock.now
        record.outcome = outcome
        state = run.ir.state(run.current)
        # unmapped outcomes (ABORTED and custom labels) follow the FAILED route
        target = state.transitions.get(outcome, state.transitions[FAILED])
        run.pending_cmd = None
        run.wait_until = None
        if target in (END_SUCCESS, END_FAILURE):
            self._finish(run, target)
        else:
            self._enter(run, target)

    def _finish(self, run: _Run, final: str):
        run.report.final_outcome = final
        run.current = None
        ev = self.registry.emit(self.SOURCE, EventKind.RUN_FINISHED,
                                {"run_id": run.run_id, "sequence": run.ir.name,
                                 "outcome": final})
        run.report.last_seq = ev.seq
        self._active.remove(run)
        run.done_event.set()


class SequenceLibrary:
    """Compiled sequences by name; the live set pins skill names so the
    store can refuse deleting anything a loaded sequence references."""

    def __init__(self):
        self._irs: dict[str, SequenceIR] = {}
        self._sources: dict[str, str] = {}

    def put(self, ir: SequenceIR, source: str | None = None):
        self._irs[ir.name] = ir
        if source is not None:
            self._sources[ir.name] = source

    def get(self, name: str) -> SequenceIR:
        from ..errors import UnknownSequence

        ir = self._irs.get(name)
        if ir is None:
            raise UnknownSequence(f"no sequence {name!r} loaded")
        return ir

    def source(self, name: str) -> str | None:
        return self._sources.get(name)

    def names(self) -> list[str]:
        return sorted(self._irs)

    def remove(self, name: str):
        self._irs.pop(name, None)
        self._sources.pop(name, None)

    def referenced_skills(self) -> set:
        return {a.skill for ir in self._irs.values() for a in ir.skill_refs()}
