"""Plug-and-produce module registry and ordered cell event bus.

The registry is the single logical owner of cell state: module lifecycle
(ATTACHED -> ONLINE -> {OFFLINE -> ONLINE}* -> DETACHED), capability
dispatch with per-module serialization, heartbeat liveness, and the global
event log. Every mutation is applied serially on the simulation thread and
every observable fact is emitted as a :class:`reconcell.model.CellEvent`
with a gapless, strictly increasing sequence number, so a snapshot is
always derivable by folding the log.

Module behaviors plug in as :class:`Agent` objects; in-process agents are
invoked directly, remote agents arrive through the wire bridge
(:mod:`reconcell.wire`) behind the same interface.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import jsonschema

from .clock import SimClock
from .errors import (
    InvalidDescriptor,
    InvalidValue,
    ModuleOffline,
    NameConflict,
    SchemaViolation,
    StaleSequence,
    UnknownModule,
    UnknownVerb,
)
from .model import CellEvent, EventKind, Pose, Resource, ToolDescriptor

# Terminal command outcomes. Capabilities may declare more, but SUCCEEDED
# and FAILED are always present and ABORTED is reserved for detach races.
SUCCEEDED = "SUCCEEDED"
FAILED = "FAILED"
ABORTED = "ABORTED"


class ModuleKind(str, Enum):
    ROBOT = "ROBOT"
    ROTARY_TABLE = "ROTARY_TABLE"
    TOOL_RACK = "TOOL_RACK"
    FIXTURE = "FIXTURE"
    OTHER = "OTHER"


class ModuleState(str, Enum):
    ATTACHED = "ATTACHED"
    ONLINE = "ONLINE"
    OFFLINE = "OFFLINE"
    DETACHED = "DETACHED"


@dataclass(frozen=True)
class Capability:
    """One dispatchable verb: schema-checked params, labeled outcomes."""

    verb: str
    params_schema: dict = field(default_factory=dict)
    outcomes: frozenset[str] = frozenset({SUCCEEDED, FAILED})

    def __post_init__(self):
        if not self.verb:
            raise InvalidDescriptor("capability verb must be non-empty")
        outcomes = frozenset(self.outcomes)
        if not {SUCCEEDED, FAILED} <= outcomes:
            raise InvalidDescriptor(f"capability {self.verb}: outcomes must include SUCCEEDED and FAILED")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "params_schema", dict(self.params_schema))

    def to_doc(self) -> dict:
        return {"verb": self.verb, "params_schema": self.params_schema, "outcomes": sorted(self.outcomes)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Capability":
        from .model import _check_keys

        _check_keys(doc, {"verb"}, "capability", optional={"params_schema", "outcomes"})
        return cls(str(doc["verb"]), dict(doc.get("params_schema", {})),
                   frozenset(doc.get("outcomes", [SUCCEEDED, FAILED])))


@dataclass(frozen=True)
class ModuleDescriptor:
    """Identity, capabilities and resource needs a module advertises when
    it couples to the cell."""

    name: str
    kind: ModuleKind
    capabilities: tuple[Capability, ...]
    resources_required: frozenset[Resource] = frozenset()
    mount_pose: Pose = field(default_factory=Pose)
    info: dict = field(default_factory=dict)  # free-form (e.g. arm model name)

    def __post_init__(self):
        if not self.name:
            raise InvalidDescriptor("module name must be non-empty")
        object.__setattr__(self, "kind", ModuleKind(self.kind))
        caps = tuple(self.capabilities)
        if not caps:
            raise InvalidDescriptor(f"module {self.name}: capabilities must be non-empty")
        verbs = [c.verb for c in caps]
        if len(set(verbs)) != len(verbs):
            raise InvalidDescriptor(f"module {self.name}: duplicate capability verbs")
        object.__setattr__(self, "capabilities", caps)
        object.__setattr__(self, "resources_required", frozenset(Resource(r) for r in self.resources_required))
        if not isinstance(self.mount_pose, Pose):
            raise InvalidDescriptor("mount_pose must be a Pose")

    def capability(self, verb: str) -> Capability | None:
        for c in self.capabilities:
            if c.verb == verb:
                return c
        return None

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "capabilities": [c.to_doc() for c in self.capabilities],
            "resources_required": sorted(r.value for r in self.resources_required),
            "mount_pose": self.mount_pose.to_doc(),
            "info": self.info,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ModuleDescriptor":
        from .model import _check_keys

        _check_keys(doc, {"name", "kind", "capabilities"}, "descriptor",
                    optional={"resources_required", "mount_pose", "info"})
        try:
            return cls(
                str(doc["name"]),
                ModuleKind(doc["kind"]),
                tuple(Capability.from_doc(c) for c in doc["capabilities"]),
                frozenset(Resource(r) for r in doc.get("resources_required", [])),
                Pose.from_doc(doc["mount_pose"]) if "mount_pose" in doc else Pose(),
                dict(doc.get("info", {})),
            )
        except (ValueError, InvalidValue) as exc:
            raise InvalidDescriptor(str(exc)) from exc


@dataclass(frozen=True)
class HeartbeatPolicy:
    period: float = 0.5
    miss_limit: int = 3

    def __post_init__(self):
        if self.period <= 0 or self.miss_limit < 1:
            raise InvalidValue("heartbeat policy: period > 0 and miss_limit >= 1")

    @property
    def deadline(self) -> float:
        return self.miss_limit * self.period


@dataclass
class ModuleRecord:
    """Registry-internal module row; snapshots expose copies."""

    module_id: str
    descriptor: ModuleDescriptor
    state: ModuleState
    last_heartbeat_seq: int = 0
    attach_time: float = 0.0
    last_heartbeat_time: float = 0.0

    def view(self) -> "ModuleRecord":
        return ModuleRecord(self.module_id, self.descriptor, self.state,
                            self.last_heartbeat_seq, self.attach_time, self.last_heartbeat_time)

    def to_doc(self) -> dict:
        return {
            "module_id": self.module_id,
            "descriptor": self.descriptor.to_doc(),
            "state": self.state.value,
            "last_heartbeat_seq": self.last_heartbeat_seq,
            "attach_time": self.attach_time,
        }


@dataclass(frozen=True)
class CellConfiguration:
    """Point-in-time cell view: non-DETACHED modules, equipped tools, clock."""

    modules: tuple[ModuleRecord, ...]
    equipped_tools: dict
    sim_time: float

    def module_by_name(self, name: str) -> ModuleRecord | None:
        for m in self.modules:
            if m.descriptor.name == name:
                return m
        return None

    def to_doc(self) -> dict:
        return {
            "modules": [m.to_doc() for m in self.modules],
            "equipped_tools": {k: (v.to_doc() if v else None) for k, v in self.equipped_tools.items()},
            "sim_time": self.sim_time,
        }


class CommandHandle:
    """In-flight command: resolves to exactly one terminal outcome."""

    def __init__(self, registry: "CellRegistry", cmd_id: int, module_id: str, verb: str, params: dict):
        self.cmd_id = cmd_id
        self.module_id = module_id
        self.verb = verb
        self.params = params
        self.outcome: str | None = None
        self.result: dict = {}
        self._registry = registry
        self._done = threading.Event()

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def finish(self, outcome: str, result: dict | None = None):
        """Complete the command; called by the owning agent exactly once."""
        self._registry._complete(self, outcome, result or {})

    def wait(self, timeout: float | None = None) -> bool:
        """Block a *wall-clock* caller until terminal (live deployments only)."""
        return self._done.wait(timeout)


class Agent:
    """Base class for in-process module behaviors.

    Subclasses override :meth:`begin` (and may finish the command inside
    it), plus :meth:`tick` for work spread over simulation time.
    """

    def descriptor(self) -> ModuleDescriptor:
        raise NotImplementedError

    def bind(self, module_id: str, registry: "CellRegistry"):
        self.module_id = module_id
        self.registry = registry

    def emit(self, kind: EventKind, payload: dict | None = None):
        self.registry.emit(self.module_id, kind, payload or {})

    def begin(self, cmd: CommandHandle):
        cmd.finish(FAILED, {"error": f"verb {cmd.verb} not implemented"})

    def tick(self, dt: float):
        pass

    def on_abort(self, cmd: CommandHandle):
        pass


class StubAgent(Agent):
    """Scriptable test double: completes every command immediately.

    ``script`` maps a verb to a list of outcomes consumed per call
    (last one repeats); unscripted verbs succeed.
    """

    def __init__(self, descriptor: ModuleDescriptor, script: dict | None = None):
        self._descriptor = descriptor
        self.script = {k: list(v) for k, v in (script or {}).items()}
        self.calls: list[tuple[str, dict]] = []

    def descriptor(self) -> ModuleDescriptor:
        return self._descriptor

    def begin(self, cmd: CommandHandle):
        self.calls.append((cmd.verb, cmd.params))
        seq = self.script.get(cmd.verb)
        outcome = SUCCEEDED if not seq else (seq.pop(0) if len(seq) > 1 else seq[0])
        cmd.finish(outcome, {})


class Subscription:
    """Pull cursor over the event log; every matching event exactly once,
    in global seq order."""

    def __init__(self, registry: "CellRegistry", kinds, sources, from_seq: int):
        self._registry = registry
        self._kinds = frozenset(EventKind(k) for k in kinds) if kinds else None
        self._sources = frozenset(sources) if sources else None
        self._next_index = max(0, from_seq - 1)  # event with seq n sits at index n-1

    def _matches(self, ev: CellEvent) -> bool:
        if self._kinds is not None and ev.kind not in self._kinds:
            return False
        if self._sources is not None and ev.source not in self._sources:
            return False
        return True

    def poll(self, limit: int | None = None) -> list[CellEvent]:
        log = self._registry._events
        end = len(log)
        out = []
        i = self._next_index
        while i < end:
            ev = log[i]
            i += 1
            if self._matches(ev):
                out.append(ev)
                if limit is not None and len(out) >= limit:
                    break
        self._next_index = i
        return out


class CellRegistry:
    def __init__(self, clock: SimClock, policy: HeartbeatPolicy | None = None):
        self.clock = clock
        self.policy = policy or HeartbeatPolicy()
        self._events: list[CellEvent] = []
        self._seq = 0
        self._records: dict[str, ModuleRecord] = {}
        self._agents: dict[str, Agent] = {}
        self._equipped: dict[str, ToolDescriptor | None] = {}
        self._id_counter = 0
        self._cmd_counter = 0
        self._inflight: dict[str, CommandHandle] = {}
        self._queues: dict[str, list[CommandHandle]] = {}
        self._handles: dict[int, CommandHandle] = {}

    # -- events ---------------------------------------------------------

    def emit(self, source: str, kind: EventKind, payload: dict | None = None) -> CellEvent:
        self._seq += 1
        ev = CellEvent(self._seq, self.clock.now, source, EventKind(kind), payload or {})
        self._events.append(ev)
        return ev

    @property
    def events(self) -> tuple[CellEvent, ...]:
        return tuple(self._events)

    def subscribe(self, kinds=None, sources=None, from_seq: int | None = None) -> Subscription:
        start = self._seq + 1 if from_seq is None else from_seq
        return Subscription(self, kinds, sources, start)

    # -- lifecycle ------------------------------------------------------

    def attach(self, descriptor: ModuleDescriptor, agent: Agent) -> str:
        if not isinstance(descriptor, ModuleDescriptor):
            raise InvalidDescriptor("attach requires a ModuleDescriptor")
        for rec in self._records.values():
            if rec.state is not ModuleState.DETACHED and rec.descriptor.name == descriptor.name:
                raise NameConflict(f"module name {descriptor.name!r} already attached")
        self._id_counter += 1
        module_id = f"m{self._id_counter:04d}"
        rec = ModuleRecord(module_id, descriptor, ModuleState.ATTACHED,
                           attach_time=self.clock.now, last_heartbeat_time=self.clock.now)
        self._records[module_id] = rec
        self._agents[module_id] = agent
        self._queues[module_id] = []
        agent.bind(module_id, self)
        self.emit(module_id, EventKind.ATTACHED,
                  {"module_id": module_id, "name": descriptor.name, "descriptor": descriptor.to_doc()})
        return module_id

    def detach(self, module_id: str):
        rec = self._record(module_id)
        rec.state = ModuleState.DETACHED
        agent = self._agents.pop(module_id, None)
        # pending work completes with ABORTED, in dispatch order
        pending = []
        if module_id in self._inflight:
            pending.append(self._inflight[module_id])
        pending.extend(self._queues.pop(module_id, []))
        for cmd in pending:
            if agent is not None:
                agent.on_abort(cmd)
            self._complete(cmd, ABORTED, {"reason": "module detached"})
        self.emit(module_id, EventKind.DETACHED, {"module_id": module_id, "name": rec.descriptor.name})

    def heartbeat(self, module_id: str, seq: int):
        rec = self._record(module_id)
        if seq <= rec.last_heartbeat_seq:
            raise StaleSequence(f"heartbeat seq {seq} <= {rec.last_heartbeat_seq}")
        rec.last_heartbeat_seq = seq
        rec.last_heartbeat_time = self.clock.now
        if rec.state in (ModuleState.ATTACHED, ModuleState.OFFLINE):
            rec.state = ModuleState.ONLINE
            self.emit(module_id, EventKind.ONLINE, {"module_id": module_id, "name": rec.descriptor.name})

    def sweep_liveness(self):
        """Mark overdue ONLINE modules OFFLINE (called once per sim tick)."""
        now = self.clock.now
        for rec in self._records.values():
            if rec.state is ModuleState.ONLINE and now - rec.last_heartbeat_time > self.policy.deadline:
                rec.state = ModuleState.OFFLINE
                self.emit(rec.module_id, EventKind.OFFLINE,
                          {"module_id": rec.module_id, "name": rec.descriptor.name})

    # -- dispatch -------------------------------------------------------

    def dispatch(self, module_id: str, verb: str, params: dict | None = None) -> CommandHandle:
        rec = self._record(module_id)
        # liveness is settled before any dispatch is accepted
        if rec.state is ModuleState.ONLINE and self.clock.now - rec.last_heartbeat_time > self.policy.deadline:
            rec.state = ModuleState.OFFLINE
            self.emit(module_id, EventKind.OFFLINE, {"module_id": module_id, "name": rec.descriptor.name})
        if rec.state is not ModuleState.ONLINE:
            raise ModuleOffline(f"module {rec.descriptor.name} is {rec.state.value}")
        cap = rec.descriptor.capability(verb)
        if cap is None:
            raise UnknownVerb(f"module {rec.descriptor.name} has no verb {verb!r}")
        params = params or {}
        try:
            jsonschema.validate(params, cap.params_schema)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(f"{verb} params: {exc.message}") from exc
        self._cmd_counter += 1
        cmd = CommandHandle(self, self._cmd_counter, module_id, verb, params)
        self._handles[cmd.cmd_id] = cmd
        self.emit(module_id, EventKind.SKILL_STARTED, {"cmd_id": cmd.cmd_id, "verb": verb})
        if module_id in self._inflight:
            self._queues[module_id].append(cmd)
        else:
            self._inflight[module_id] = cmd
            self._agents[module_id].begin(cmd)
        return cmd

    def _complete(self, cmd: CommandHandle, outcome: str, result: dict):
        if cmd.outcome is not None:
            return  # already terminal (e.g. finished during detach abort)
        cmd.outcome = outcome
        cmd.result = result
        cmd._done.set()
        self.emit(cmd.module_id, EventKind.SKILL_FINISHED,
                  {"cmd_id": cmd.cmd_id, "verb": cmd.verb, "outcome": outcome})
        if self._inflight.get(cmd.module_id) is cmd:
            del self._inflight[cmd.module_id]
            self._start_next(cmd.module_id)
        elif cmd in self._queues.get(cmd.module_id, []):
            self._queues[cmd.module_id].remove(cmd)

    def _start_next(self, module_id: str):
        # synchronous completion inside begin() recurses back through
        # _complete, which drains any further queue entries
        queue = self._queues.get(module_id)
        if queue and module_id not in self._inflight:
            nxt = queue.pop(0)
            self._inflight[module_id] = nxt
            self._agents[module_id].begin(nxt)

    # -- views ----------------------------------------------------------

    def snapshot(self) -> CellConfiguration:
        mods = tuple(rec.view() for rec in self._records.values() if rec.state is not ModuleState.DETACHED)
        return CellConfiguration(mods, dict(self._equipped), self.clock.now)

    def set_equipped_tool(self, module_id: str, tool: ToolDescriptor | None):
        """Record a tool change and emit TOOL_CHANGED (robot agents call this)."""
        self._record(module_id)
        self._equipped[module_id] = tool
        self.emit(module_id, EventKind.TOOL_CHANGED,
                  {"module_id": module_id, "tool": tool.to_doc() if tool else None})

    def record(self, module_id: str) -> ModuleRecord:
        return self._record(module_id).view()

    def agent(self, module_id: str) -> Agent:
        ag = self._agents.get(module_id)
        if ag is None:
            raise UnknownModule(f"no agent for {module_id}")
        return ag

    def find_modules(self, kind: ModuleKind | None = None, name: str | None = None,
                     states: Iterable[ModuleState] = (ModuleState.ONLINE,)) -> list[ModuleRecord]:
        states = set(states)
        out = []
        for rec in self._records.values():
            if rec.state not in states:
                continue
            if kind is not None and rec.descriptor.kind is not ModuleKind(kind):
                continue
            if name is not None and rec.descriptor.name != name:
                continue
            out.append(rec)
        return out

    def module_id_by_name(self, name: str) -> str:
        for rec in self._records.values():
            if rec.state is not ModuleState.DETACHED and rec.descriptor.name == name:
                return rec.module_id
        raise UnknownModule(f"no module named {name!r}")

    def handle(self, cmd_id: int) -> CommandHandle:
        h = self._handles.get(cmd_id)
        if h is None:
            raise UnknownModule(f"no command {cmd_id}")
        return h

    def _record(self, module_id: str) -> ModuleRecord:
        rec = self._records.get(module_id)
        if rec is None or rec.state is ModuleState.DETACHED:
            raise UnknownModule(f"module {module_id} unknown or detached")
        return rec
