"""Robot abstraction layer and deterministic simulated arm.

An arm is pure data (:class:`ArmModel`, standard Denavit-Hartenberg rows),
so swapping robots is a configuration change. The simulation is kinematic:
setpoints are achieved instantly up to the per-joint speed limit, there are
no torque dynamics. One controller mode is active at a time (IDLE,
TRAJECTORY, VELOCITY, FREE_DRAG); ``step()`` advances the active mode by
one clock tick and is called only by the simulation owner.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from . import kinematics as kin
from .errors import (
    BusyMode,
    CellError,
    DragOutsideFreeMode,
    DragTooLarge,
    IKFailure,
    InvalidValue,
    JointLimit,
    NoConvergence,
    NotAtRack,
    NoToolEquipped,
    SlotOccupied,
    SpeedInfeasible,
    ToolAlreadyEquipped,
    UnknownTool,
)
from .model import (
    EventKind,
    JointState,
    Pose,
    ToolDescriptor,
    Trajectory,
    TrajectoryKind,
    Twist,
    interpolate,
)
from .registry import (
    FAILED,
    SUCCEEDED,
    Agent,
    Capability,
    CommandHandle,
    ModuleDescriptor,
    ModuleKind,
)

POSE_DOC_SCHEMA = {
    "type": "object",
    "properties": {"p": {"type": "array"}, "q": {"type": "array"}},
    "required": ["p", "q"],
}


@dataclass(frozen=True)
class ArmModel:
    """Kinematic description of a serial arm; standard DH convention
    (link transform RotZ(theta) TransZ(d) TransX(a) RotX(alpha))."""

    name: str
    dh_rows: tuple[tuple[float, float, float, float], ...]
    joint_limits: tuple[tuple[float, float], ...]
    max_joint_speed: float = 3.0
    base_pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        rows = tuple(tuple(float(c) for c in r) for r in self.dh_rows)
        if not 1 <= len(rows) <= 7:
            raise InvalidValue("arm DOF must be within 1..7")
        if any(len(r) != 4 for r in rows):
            raise InvalidValue("each DH row is (a, alpha, d, theta_offset)")
        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        if len(limits) != len(rows) or any(lo >= hi for lo, hi in limits):
            raise InvalidValue("joint limits must satisfy min < max per joint")
        if self.max_joint_speed <= 0:
            raise InvalidValue("max_joint_speed must be > 0")
        object.__setattr__(self, "dh_rows", rows)
        object.__setattr__(self, "joint_limits", limits)

    @property
    def dof(self) -> int:
        return len(self.dh_rows)

    def dh_array(self) -> np.ndarray:
        return np.array(self.dh_rows)

    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower(), self.upper())

    def within_limits(self, q, tol=1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower() - tol) and np.all(q <= self.upper() + tol))

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "dh_rows": [list(r) for r in self.dh_rows],
            "joint_limits": [list(l) for l in self.joint_limits],
            "max_joint_speed": self.max_joint_speed,
            "base_pose": self.base_pose.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ArmModel":
        from .model import _check_keys

        _check_keys(doc, {"name", "dh_rows", "joint_limits"}, "arm_model",
                    optional={"max_joint_speed", "base_pose", "convention"})
        return cls(
            str(doc["name"]),
            tuple(tuple(r) for r in doc["dh_rows"]),
            tuple(tuple(l) for l in doc["joint_limits"]),
            float(doc.get("max_joint_speed", 3.0)),
            Pose.from_doc(doc["base_pose"]) if "base_pose" in doc else Pose(),
        )

    @classmethod
    def load(cls, path) -> "ArmModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))

    @classmethod
    def bundled(cls, name: str) -> "ArmModel":
        """Load one of the shipped arm configs (``desk6``, ``desk7``)."""
        text = resources.files("reconcell.data").joinpath(f"{name}.json").read_text()
        return cls.from_doc(json.loads(text))


@dataclass(frozen=True)
class ControlLimits:
    max_linear: float = 0.25          # m/s
    max_angular: float = 1.0          # rad/s
    ik_damping: float = 0.002         # DLS lambda
    ik_tol_pos: float = 1e-6          # m
    ik_tol_rot: float = 1e-6          # rad
    ik_max_iters: int = 300
    velocity_idle_timeout: float = 0.5  # s of zero twist before mode drops to IDLE
    tracking_grace: float = 5.0       # extra s to settle after trajectory end
    rack_dock_pos_tol: float = 1e-3   # m
    rack_dock_rot_tol: float = 1e-2   # rad
    drag_step_max: float = 0.05       # m per apply_drag call

    def __post_init__(self):
        for name in ("max_linear", "max_angular", "ik_damping", "ik_tol_pos",
                     "ik_tol_rot", "ik_max_iters", "velocity_idle_timeout"):
            if getattr(self, name) <= 0:
                raise InvalidValue(f"control limit {name} must be positive")


class RobotMode(str, Enum):
    IDLE = "IDLE"
    TRAJECTORY = "TRAJECTORY"
    VELOCITY = "VELOCITY"
    FREE_DRAG = "FREE_DRAG"


class SimulatedRobot(Agent):
    """Deterministic kinematic arm exposed as a PnP module agent.

    Direct method calls raise domain errors; the same operations arriving
    as dispatched verbs map errors onto a FAILED outcome with the error
    code in the result document.
    """

    def __init__(self, model: ArmModel, name: str = "r1",
                 limits: ControlLimits | None = None,
                 home: tuple | None = None,
                 state_event_every: int = 10):
        self.model = model
        self.name = name
        self.limits = limits or ControlLimits()
        self.q = model.clamp(np.array(home if home is not None else np.zeros(model.dof), dtype=float))
        self.qd = np.zeros(model.dof)
        self.mode = RobotMode.IDLE
        self.equipped_tool: ToolDescriptor | None = None
        self.state_event_every = state_event_every
        self._tick_count = 0
        self._traj: Trajectory | None = None
        self._traj_cmd: CommandHandle | None = None
        self._traj_ticks = 0
        self._twist = Twist.zero()
        self._twist_zero_since: float | None = None
        self._dh = model.dh_array()

    # -- registry plumbing ------------------------------------------------

    def descriptor(self) -> ModuleDescriptor:
        traj_schema = {"type": "object", "properties": {"trajectory": {"type": "object"}},
                       "required": ["trajectory"]}
        caps = (
            Capability("execute_trajectory", traj_schema),
            Capability("set_velocity", {"type": "object", "properties": {"twist": {"type": "object"}},
                                        "required": ["twist"]}),
            Capability("free_drag_enter"),
            Capability("free_drag_exit"),
            Capability("apply_drag", {"type": "object", "properties": {"delta": POSE_DOC_SCHEMA},
                                      "required": ["delta"]}),
            Capability("equip_tool", {"type": "object", "properties": {"tool_id": {"type": "string"}},
                                      "required": ["tool_id"]}),
            Capability("unequip_tool"),
            Capability("get_state"),
        )
        return ModuleDescriptor(self.name, ModuleKind.ROBOT, caps,
                                mount_pose=self.model.base_pose,
                                info={"arm_model": self.model.name, "dof": self.model.dof})

    def begin(self, cmd: CommandHandle):
        try:
            if cmd.verb == "execute_trajectory":
                self.execute_trajectory(Trajectory.from_doc(cmd.params["trajectory"]), cmd)
                return  # finishes from step()
            if cmd.verb == "set_velocity":
                self.set_cartesian_velocity(Twist.from_doc(cmd.params["twist"]))
            elif cmd.verb == "free_drag_enter":
                self.enter_free_drag()
            elif cmd.verb == "free_drag_exit":
                self.exit_free_drag()
            elif cmd.verb == "apply_drag":
                self.apply_drag(Pose.from_doc(cmd.params["delta"]))
            elif cmd.verb == "equip_tool":
                self.equip_tool(cmd.params["tool_id"])
            elif cmd.verb == "unequip_tool":
                self.unequip_tool()
            elif cmd.verb == "get_state":
                cmd.finish(SUCCEEDED, self.state_doc())
                return
            else:
                raise InvalidValue(f"unhandled verb {cmd.verb}")
            cmd.finish(SUCCEEDED, {})
        except CellError as exc:
            cmd.finish(FAILED, {"error": exc.code, "detail": exc.detail})

    def on_abort(self, cmd: CommandHandle):
        if cmd is self._traj_cmd:
            self._traj = None
            self._traj_cmd = None
            self.mode = RobotMode.IDLE

    # -- kinematics views --------------------------------------------------

    def joint_state(self) -> JointState:
        now = self.registry.clock.now if hasattr(self, "registry") else 0.0
        return JointState(tuple(self.q), tuple(self.qd), now)

    def flange_pose(self, q=None) -> Pose:
        T = kin.fk(self._dh, self.q if q is None else np.asarray(q, dtype=float))
        chain = Pose.from_rotation_matrix(T[:3, :3].tolist(), T[:3, 3].tolist())
        return self.model.base_pose.compose(chain)

    def tcp_pose(self, q=None) -> Pose:
        flange = self.flange_pose(q)
        if self.equipped_tool is None:
            return flange
        return flange.compose(self.equipped_tool.tcp_offset)

    def jacobian(self, q=None) -> np.ndarray:
        """Geometric Jacobian of the flange in the cell-root frame."""
        q = self.q if q is None else np.asarray(q, dtype=float)
        if not self.model.within_limits(q):
            raise JointLimit("configuration outside joint limits")
        J = kin.jacobian(self._dh, q)
        R = np.array(self.model.base_pose.rotation_matrix())
        J[:3, :] = R @ J[:3, :]
        J[3:, :] = R @ J[3:, :]
        return J

    def forward_kinematics(self, q) -> Pose:
        q = np.asarray(q, dtype=float)
        if not self.model.within_limits(q):
            raise JointLimit("configuration outside joint limits")
        return self.flange_pose(q)

    def solve_ik(self, target: Pose, q0=None) -> np.ndarray:
        """Joint vector reaching a cell-root flange target (DLS iteration)."""
        q0 = self.q if q0 is None else np.asarray(q0, dtype=float)
        if not self.model.within_limits(q0):
            raise JointLimit("seed outside joint limits")
        chain_target = self.model.base_pose.inverse().compose(target)
        T = np.eye(4)
        T[:3, :3] = chain_target.rotation_matrix()
        T[:3, 3] = chain_target.position
        q, iters, ok = kin.ik_solve(
            self._dh, q0, T, self.model.lower(), self.model.upper(),
            lam=self.limits.ik_damping, tol_pos=self.limits.ik_tol_pos,
            tol_rot=self.limits.ik_tol_rot, max_iters=self.limits.ik_max_iters)
        if not ok:
            raise NoConvergence(f"IK did not converge in {iters} iterations")
        return q

    # -- control modes -----------------------------------------------------

    def execute_trajectory(self, traj: Trajectory, cmd: CommandHandle | None = None):
        if self.mode is not RobotMode.IDLE:
            raise BusyMode(f"robot in {self.mode.value}")
        if traj.kind is TrajectoryKind.JOINT:
            if traj.dof != self.model.dof:
                raise InvalidValue(f"trajectory DOF {traj.dof} != arm DOF {self.model.dof}")
            for (t0, s0), (t1, s1) in zip(traj.samples, traj.samples[1:]):
                rate = max(abs(b - a) for a, b in zip(s0.positions, s1.positions)) / (t1 - t0)
                # 1e-9 relative headroom: recorded motion clipped exactly at the
                # limit must stay replayable despite float dust
                if rate > self.model.max_joint_speed * (1.0 + 1e-9):
                    raise SpeedInfeasible(f"segment needs {rate:.3f} rad/s > {self.model.max_joint_speed}")
                if not self.model.within_limits(s1.positions) or not self.model.within_limits(s0.positions):
                    raise JointLimit("trajectory sample outside joint limits")
        else:
            try:
                self._ik_for_tcp(traj.samples[0][1])
            except NoConvergence as exc:
                raise IKFailure(f"first sample unreachable: {exc.detail}") from exc
        self._traj = traj
        self._traj_cmd = cmd
        self._traj_ticks = 0
        self.mode = RobotMode.TRAJECTORY

    def set_cartesian_velocity(self, twist: Twist):
        if self.mode not in (RobotMode.IDLE, RobotMode.VELOCITY):
            raise BusyMode(f"robot in {self.mode.value}")
        self._twist = twist.clamped(self.limits.max_linear, self.limits.max_angular)
        now = self.registry.clock.now if hasattr(self, "registry") else 0.0
        if self._twist.is_zero():
            if self._twist_zero_since is None:
                self._twist_zero_since = now
        else:
            self._twist_zero_since = None
            self.mode = RobotMode.VELOCITY

    def enter_free_drag(self):
        if self.mode is not RobotMode.IDLE:
            raise BusyMode(f"robot in {self.mode.value}")
        self.mode = RobotMode.FREE_DRAG

    def exit_free_drag(self):
        if self.mode is not RobotMode.FREE_DRAG:
            raise BusyMode("not in FREE_DRAG")
        self.mode = RobotMode.IDLE

    def apply_drag(self, delta: Pose):
        if self.mode is not RobotMode.FREE_DRAG:
            raise DragOutsideFreeMode("free-drag mode not active")
        if math.dist(delta.position, (0, 0, 0)) > self.limits.drag_step_max:
            raise DragTooLarge(f"drag step over {self.limits.drag_step_max} m")
        target_tcp = self.tcp_pose().compose(delta)
        q = self._ik_for_tcp(target_tcp)
        self.q = q
        self.qd = np.zeros(self.model.dof)

    # -- tool exchange -------------------------------------------------------

    def equip_tool(self, tool_id: str):
        if self.equipped_tool is not None:
            raise ToolAlreadyEquipped(f"{self.equipped_tool.tool_id} already equipped")
        rack_agent, slot_idx, tool = self._find_tool_slot(tool_id)
        self._require_docked(rack_agent.slot_pose(slot_idx))
        rack_agent.take_tool(tool_id)
        self.equipped_tool = tool
        self.registry.set_equipped_tool(self.module_id, tool)

    def unequip_tool(self):
        if self.equipped_tool is None:
            raise NoToolEquipped("no tool equipped")
        rack_agent, slot_idx = self._find_empty_docked_slot()
        rack_agent.put_tool(self.equipped_tool, slot_idx)
        self.equipped_tool = None
        self.registry.set_equipped_tool(self.module_id, None)

    def _find_tool_slot(self, tool_id: str):
        for rec in self.registry.find_modules(kind=ModuleKind.TOOL_RACK):
            agent = self.registry.agent(rec.module_id)
            idx = agent.slot_of(tool_id)
            if idx is not None:
                return agent, idx, agent.slots[idx][1]
        raise UnknownTool(f"tool {tool_id!r} not found in any rack")

    def _find_empty_docked_slot(self):
        flange = self.flange_pose()
        for rec in self.registry.find_modules(kind=ModuleKind.TOOL_RACK):
            agent = self.registry.agent(rec.module_id)
            for idx, (pose, occupant) in enumerate(agent.slots):
                if self._docked_at(flange, pose):
                    if occupant is not None:
                        raise SlotOccupied(f"slot {idx} already holds {occupant.tool_id}")
                    return agent, idx
        raise NotAtRack("flange not at any empty rack slot")

    def _require_docked(self, slot_pose: Pose):
        if not self._docked_at(self.flange_pose(), slot_pose):
            raise NotAtRack("flange not at the rack slot pickup pose")

    def _docked_at(self, flange: Pose, slot_pose: Pose) -> bool:
        return (flange.position_distance(slot_pose) <= self.limits.rack_dock_pos_tol
                and flange.rotation_distance(slot_pose) <= self.limits.rack_dock_rot_tol)

    # -- simulation tick -----------------------------------------------------

    def tick(self, dt: float):
        self.step(dt)

    def step(self, dt: float):
        if dt <= 0:
            raise InvalidValue("dt must be > 0")
        self.qd = np.zeros(self.model.dof)
        if self.mode is RobotMode.TRAJECTORY:
            self._step_trajectory(dt)
        elif self.mode is RobotMode.VELOCITY:
            self._step_velocity(dt)
        self._tick_count += 1
        # joint limits are a post-hoc invariant on every tick
        if not self.model.within_limits(self.q):
            raise JointLimit("joint limit violated during step")
        if self.state_event_every and self._tick_count % self.state_event_every == 0 and hasattr(self, "registry"):
            self.emit(EventKind.ROBOT_STATE, self.state_doc())

    def _step_trajectory(self, dt: float):
        traj = self._traj
        self._traj_ticks += 1
        t = min(self._traj_ticks * dt, traj.duration)
        if traj.kind is TrajectoryKind.JOINT:
            target = np.array(interpolate(traj, t).positions)
        else:
            try:
                target = self._ik_for_tcp(interpolate(traj, t))
            except NoConvergence:
                self._finish_trajectory(FAILED, {"error": "ik_failure", "t": t})
                return
        step_cap = self.model.max_joint_speed * dt
        delta = np.clip(target - self.q, -step_cap, step_cap)
        self.q = self.model.clamp(self.q + delta)
        self.qd = delta / dt
        elapsed = self._traj_ticks * dt
        if elapsed >= traj.duration - 1e-12:
            if self._at_trajectory_goal(traj):
                self._finish_trajectory(SUCCEEDED, {})
            elif elapsed > traj.duration + self.limits.tracking_grace:
                self._finish_trajectory(FAILED, {"error": "tracking_timeout"})

    def _at_trajectory_goal(self, traj: Trajectory) -> bool:
        if traj.kind is TrajectoryKind.JOINT:
            final = np.array(traj.samples[-1][1].positions)
            return bool(np.max(np.abs(self.q - final)) <= 1e-9)
        final = traj.samples[-1][1]
        tcp = self.tcp_pose()
        return (tcp.position_distance(final) <= 1e-5
                and tcp.rotation_distance(final) <= 1e-5)

    def _finish_trajectory(self, outcome: str, result: dict):
        cmd = self._traj_cmd
        self._traj = None
        self._traj_cmd = None
        self.mode = RobotMode.IDLE
        if cmd is not None:
            cmd.finish(outcome, result)

    def _step_velocity(self, dt: float):
        now = self.registry.clock.now if hasattr(self, "registry") else 0.0
        if self._twist.is_zero():
            if self._twist_zero_since is not None and now - self._twist_zero_since > self.limits.velocity_idle_timeout:
                self.mode = RobotMode.IDLE
            return
        # resolve the cell-root twist in the chain base frame
        R_inv = np.array(self.model.base_pose.inverse().rotation_matrix())
        v = np.concatenate([R_inv @ self._twist.linear, R_inv @ self._twist.angular])
        tool = None if self.equipped_tool is None else np.array(self.equipped_tool.tcp_offset.position)
        qd = kin.dls_qdot(self._dh, self.q, v, self.limits.ik_damping, tool)
        qd = np.clip(qd, -self.model.max_joint_speed, self.model.max_joint_speed)
        self.q = self.model.clamp(self.q + qd * dt)
        self.qd = qd

    def _ik_for_tcp(self, tcp_target: Pose) -> np.ndarray:
        flange_target = tcp_target
        if self.equipped_tool is not None:
            flange_target = tcp_target.compose(self.equipped_tool.tcp_offset.inverse())
        return self.solve_ik(flange_target)

    # -- documents -----------------------------------------------------------

    def state_doc(self) -> dict:
        return {
            "joints": list(self.q),
            "velocities": list(self.qd),
            "mode": self.mode.value,
            "flange": self.flange_pose().to_doc(),
            "tcp": self.tcp_pose().to_doc(),
            "tool": self.equipped_tool.to_doc() if self.equipped_tool else None,
            "model": self.model.name,
        }
