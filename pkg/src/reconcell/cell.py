"""Composition root: one simulated workcell.

Owns the clock, registry, skill store, teach service, sequence library and
executor, and drives everything in a fixed per-tick order:

    1. clock advances
    2. auto-heartbeats for in-process modules
    3. queued jog commands apply (latest wins)
    4. robot agents tick
    5. released rotary tables follow any grasping tcp
    6. other module agents tick
    7. recording sessions sample
    8. sequence executor advances
    9. liveness sweep

The same script against the same scenario therefore produces a
bitwise-identical event log. Scenario files (JSON) describe modules to
attach, initial rack contents, pre-seeded skills, sequences to compile,
and an optional jog tape for headless demos.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .assembler import SequenceExecutor, SequenceLibrary, compile_ast, expand, parse
from .clock import SimClock
from .errors import CellError, UnknownModule
from .model import Pose
from .periphery import BrakeState, FixtureAgent, RotaryTableAgent, ToolRackAgent
from .registry import (
    Agent,
    CellRegistry,
    HeartbeatPolicy,
    ModuleKind,
    ModuleState,
)
from .robot import ArmModel, ControlLimits, RobotMode, SimulatedRobot
from .skills import SkillKind, SkillStore
from .teach import TeachService


class Cell:
    def __init__(self, dt: float = 0.01, store_root=None,
                 policy: HeartbeatPolicy | None = None, name: str = "cell"):
        self.name = name
        self.clock = SimClock(dt)
        self.registry = CellRegistry(self.clock, policy)
        self.store = SkillStore(store_root)
        self.library = SequenceLibrary()
        self.store.set_in_use_check(self.library.referenced_skills)
        self.teach = TeachService(self.registry, self.store)
        self.executor = SequenceExecutor(self.registry, self.store)
        self.lock = threading.RLock()  # shared by gateway/runner/wire threads
        self._auto_hb: dict[str, int] = {}

    # -- module management ---------------------------------------------------

    def attach(self, agent: Agent, auto_heartbeat: bool = True) -> str:
        """Attach an in-process agent; auto-heartbeat brings it ONLINE now
        and keeps it alive every tick."""
        module_id = self.registry.attach(agent.descriptor(), agent)
        if auto_heartbeat:
            self._auto_hb[module_id] = 0
            self._beat(module_id)
        return module_id

    def detach(self, module_id: str):
        self.registry.detach(module_id)
        self._auto_hb.pop(module_id, None)

    def _beat(self, module_id: str):
        self._auto_hb[module_id] += 1
        self.registry.heartbeat(module_id, self._auto_hb[module_id])

    def robots(self) -> list[SimulatedRobot]:
        return [self.registry.agent(r.module_id)
                for r in self.registry.find_modules(kind=ModuleKind.ROBOT,
                                                    states=(ModuleState.ONLINE, ModuleState.ATTACHED,
                                                            ModuleState.OFFLINE))]

    def robot(self, name: str | None = None) -> SimulatedRobot:
        robots = self.robots()
        if not robots:
            raise UnknownModule("no robot attached")
        if name is None:
            return robots[0]
        for r in robots:
            if r.name == name:
                return r
        raise UnknownModule(f"no robot named {name!r}")

    # -- simulation drive ------------------------------------------------------

    def step(self, n: int = 1):
        for _ in range(n):
            self.clock.advance()
            for module_id in list(self._auto_hb):
                rec = self.registry._records.get(module_id)
                if rec is None or rec.state is ModuleState.DETACHED:
                    self._auto_hb.pop(module_id, None)
                    continue
                self._beat(module_id)
            self.teach.apply_jogs()
            robot_agents = []
            other_agents = []
            for rec in self.registry.find_modules(states=(ModuleState.ONLINE, ModuleState.ATTACHED,
                                                          ModuleState.OFFLINE)):
                agent = self.registry._agents.get(rec.module_id)
                if agent is None:
                    continue
                if rec.descriptor.kind is ModuleKind.ROBOT:
                    robot_agents.append(agent)
                else:
                    other_agents.append(agent)
            for agent in robot_agents:
                agent.tick(self.clock.dt)
            self._couple_tables(robot_agents, other_agents)
            for agent in other_agents:
                agent.tick(self.clock.dt)
            self.teach.sample()
            self.executor.tick()
            self.registry.sweep_liveness()

    def _couple_tables(self, robot_agents, other_agents):
        for agent in other_agents:
            if not isinstance(agent, RotaryTableAgent) or agent.brake != BrakeState.RELEASED:
                continue
            for robot in robot_agents:
                tcp = robot.tcp_pose()
                if agent.grasped_by(tcp):
                    agent.coupled_update(tcp)
                    break

    def run_for(self, seconds: float):
        self.step(round(seconds / self.clock.dt))

    def run_until(self, predicate, max_seconds: float = 120.0) -> bool:
        budget = round(max_seconds / self.clock.dt)
        for _ in range(budget):
            if predicate():
                return True
            self.step()
        return predicate()

    # -- teach tape --------------------------------------------------------------

    def run_tape(self, robot_name: str, entries: list[dict],
                 rate: float | None = None, save_as: str | None = None,
                 settle: float = 0.7) -> int | None:
        """Apply a scripted jog tape deterministically on the sim clock.

        Entries: [{"t_s": 0.0, "lin": [x,y,z], "ang": [rx,ry,rz]}, ...].
        Optionally records at ``rate`` Hz and saves under ``save_as``,
        returning the stored version.
        """
        robot_id = self.registry.module_id_by_name(robot_name)
        entries = sorted(entries, key=lambda e: e["t_s"])
        session = None
        if save_as is not None:
            session = self.teach.start_recording(robot_id, rate or 50.0)
        t0 = self.clock.now
        idx = 0
        last_t = entries[-1]["t_s"] if entries else 0.0
        total_ticks = round((last_t + settle) / self.clock.dt) + 1
        for _ in range(total_ticks):
            elapsed = self.clock.now - t0
            while idx < len(entries) and entries[idx]["t_s"] <= elapsed + 1e-9:
                e = entries[idx]
                self.teach.jog(robot_id, tuple(e["lin"]) + tuple(e["ang"]))
                idx += 1
            self.step()
        self.teach.zero_jog(robot_id)
        self.run_until(lambda: self.robot(robot_name).mode is RobotMode.IDLE, 5.0)
        if session is not None:
            return self.teach.save_demonstration(session, save_as)
        return None

    # -- sequences ----------------------------------------------------------------

    def compile_sequence(self, text: str, args: dict | None = None):
        ir = compile_ast(expand(parse(text), args))
        self.library.put(ir, source=text)
        return ir

    def start_run(self, name: str):
        return self.executor.start(self.library.get(name))

    def run_sequence(self, name: str, max_seconds: float = 300.0):
        report = self.start_run(name)
        if not self.run_until(lambda: report.done, max_seconds):
            raise CellError(f"run {report.run_id} did not finish within {max_seconds} s (sim)")
        return report

    def close(self):
        self.store.close()


# -- scenario files ---------------------------------------------------------------


def load_scenario(source, store_root=None) -> Cell:
    """Build a cell from a scenario document, path, or JSON text.

    The document is fully parsed and cross-checked before any module is
    attached; references (arm models, sequence files, tool ids) must
    resolve or the load fails with no half-built cell.
    """
    base_dir = Path(".")
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        base_dir = Path(source).parent
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = dict(source)

    def pose(d, default=None):
        return Pose.from_doc(d) if d is not None else (default or Pose())

    # -- phase 1: construct everything (validates all references) --------------
    name = doc.get("name", "cell")
    dt = float(doc.get("dt", 0.01))
    hb = doc.get("heartbeat", {})
    policy = HeartbeatPolicy(float(hb.get("period", 0.5)), int(hb.get("miss_limit", 3)))

    agents: list[Agent] = []
    for arm_doc in doc.get("arms", []):
        model_ref = arm_doc.get("model", "desk6")
        model = ArmModel.from_doc(model_ref) if isinstance(model_ref, dict) else ArmModel.bundled(model_ref)
        if "base_pose" in arm_doc:
            model = ArmModel(model.name, model.dh_rows, model.joint_limits,
                             model.max_joint_speed, pose(arm_doc["base_pose"]))
        limits = ControlLimits(**arm_doc.get("limits", {}))
        agents.append(SimulatedRobot(model, name=arm_doc.get("name", "r1"),
                                     limits=limits, home=arm_doc.get("home")))
    for t in doc.get("rotary_tables", []):
        table = RotaryTableAgent(t.get("name", "table1"), pose(t.get("axis_pose")),
                                 pose(t.get("handle_offset"), Pose((0.15, 0.0, 0.05))),
                                 float(t.get("angle", 0.0)))
        for part_id, part_pose in t.get("parts", {}).items():
            table.parts[part_id] = pose(part_pose)
        agents.append(table)
    for r in doc.get("racks", []):
        slots = []
        for s in r.get("slots", []):
            from .model import ToolDescriptor

            tool = ToolDescriptor.from_doc(s["tool"]) if s.get("tool") else None
            slots.append((pose(s["pose"]), tool))
        agents.append(ToolRackAgent(r.get("name", "rack1"), slots))
    for f in doc.get("fixtures", []):
        agents.append(FixtureAgent(f.get("name", "fix1"), pose(f.get("pose")),
                                   f.get("part"), bool(f.get("clamped", False))))

    skills = []
    for s in doc.get("skills", []):
        skills.append((s["name"], SkillKind(s["kind"]), s["payload"], s.get("meta", {})))

    sequences = []
    for s in doc.get("sequences", []):
        if "file" in s:
            text = (base_dir / s["file"]).read_text()
        else:
            text = s["text"]
        parse(text)  # syntax-check before bring-up
        sequences.append((text, s.get("args")))

    tape = doc.get("tape")
    if tape is not None and "file" in tape:
        tape = {**tape, "entries": json.loads((base_dir / tape["file"]).read_text())}

    # -- phase 2: bring-up -------------------------------------------------------
    cell = Cell(dt=dt, store_root=store_root, policy=policy, name=name)
    for agent in agents:
        cell.attach(agent)
    for skill_name, kind, payload, meta in skills:
        cell.store.put(skill_name, kind, payload, meta)
    for text, args in sequences:
        cell.compile_sequence(text, args)
    cell.scenario_tape = tape
    return cell


def run_scenario_tape(cell: Cell) -> int | None:
    """Run the scenario's bundled tape (if any): scripted teach for
    headless demos."""
    tape = getattr(cell, "scenario_tape", None)
    if not tape:
        return None
    return cell.run_tape(tape.get("robot", "r1"), tape["entries"],
                         rate=tape.get("rate", 50.0), save_as=tape.get("save_as"))
