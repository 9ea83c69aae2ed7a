"""Simulated peripheral modules: passive rotary table, tool rack, fixture.

The rotary table is a passive reconfigurable element: it has no actuator
of its own, the robot re-orients it by driving the grasp handle while the
brake is released. The table records its angle at every brake transition
so the last known position survives release/engage cycles.
"""

from __future__ import annotations

import math

from .errors import (
    AlreadyEngaged,
    AlreadyReleased,
    BrakeEngaged,
    CellError,
    InvalidValue,
    NotGrasping,
    SlotEmpty,
    SlotOccupied,
    UnknownTool,
)
from .model import EventKind, Pose, ToolDescriptor
from .registry import (
    FAILED,
    SUCCEEDED,
    Agent,
    Capability,
    CommandHandle,
    ModuleDescriptor,
    ModuleKind,
)


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


def _rot_z(theta: float) -> Pose:
    return Pose(orientation=(math.cos(theta / 2.0), 0.0, 0.0, math.sin(theta / 2.0)))


class BrakeState(str):
    ENGAGED = "ENGAGED"
    RELEASED = "RELEASED"


class RotaryTableAgent(Agent):
    """Brake-gated passive table; angle follows the grasping robot's tcp."""

    GRASP_TOL = 1e-3  # m, tcp-to-handle proximity for coupling

    def __init__(self, name: str = "table1", axis_pose: Pose | None = None,
                 handle_offset: Pose | None = None, angle: float = 0.0):
        self.name = name
        self.axis_pose = axis_pose or Pose()
        # handle sits off-axis so tcp motion projects onto the rotation
        self.handle_offset = handle_offset or Pose((0.15, 0.0, 0.05))
        if math.hypot(self.handle_offset.position[0], self.handle_offset.position[1]) < 1e-6:
            raise InvalidValue("handle must be off the rotation axis")
        self.angle = wrap_angle(angle)
        self.stored_angle = self.angle
        self.brake = BrakeState.ENGAGED
        self.parts: dict[str, Pose] = {}  # part id -> pose in table-top frame

    def descriptor(self) -> ModuleDescriptor:
        return ModuleDescriptor(
            self.name, ModuleKind.ROTARY_TABLE,
            (Capability("release_brake"), Capability("engage_brake"), Capability("get_state")),
            mount_pose=self.axis_pose,
        )

    def begin(self, cmd: CommandHandle):
        try:
            if cmd.verb == "release_brake":
                self.release_brake()
            elif cmd.verb == "engage_brake":
                self.engage_brake()
            elif cmd.verb == "get_state":
                cmd.finish(SUCCEEDED, self.state_doc())
                return
            else:
                raise InvalidValue(f"unhandled verb {cmd.verb}")
            cmd.finish(SUCCEEDED, self.state_doc())
        except CellError as exc:
            cmd.finish(FAILED, {"error": exc.code, "detail": exc.detail})

    # -- brake state machine ----------------------------------------------

    def release_brake(self):
        if self.brake == BrakeState.RELEASED:
            raise AlreadyReleased("brake already released")
        self.stored_angle = self.angle  # last known position, recorded pre-release
        self.brake = BrakeState.RELEASED
        self._emit_brake()

    def engage_brake(self):
        if self.brake == BrakeState.ENGAGED:
            raise AlreadyEngaged("brake already engaged")
        self.brake = BrakeState.ENGAGED
        self.stored_angle = self.angle  # final position record
        self._emit_brake()

    def _emit_brake(self):
        if hasattr(self, "registry"):
            self.emit(EventKind.BRAKE_CHANGED,
                      {"module_id": self.module_id, "brake": self.brake,
                       "angle": self.angle, "stored_angle": self.stored_angle})

    # -- kinematic coupling -------------------------------------------------

    def top_pose(self, angle: float | None = None) -> Pose:
        return self.axis_pose.compose(_rot_z(self.angle if angle is None else angle))

    def handle_pose(self, angle: float | None = None) -> Pose:
        return self.top_pose(angle).compose(self.handle_offset)

    def part_pose(self, part_id: str) -> Pose:
        return self.top_pose().compose(self.parts[part_id])

    def grasped_by(self, tcp_pose: Pose) -> bool:
        return tcp_pose.position_distance(self.handle_pose()) <= self.GRASP_TOL

    def coupled_update(self, tcp_pose: Pose):
        """Advance the angle so the handle follows the grasping tcp.

        The new angle is the azimuth of the tcp about the table axis minus
        the handle's own azimuth; motion parallel to the axis projects to
        zero rotation.
        """
        if self.brake == BrakeState.ENGAGED:
            raise BrakeEngaged("table brake is engaged")
        if not self.grasped_by(tcp_pose):
            raise NotGrasping("tcp is not at the handle")
        local = self.axis_pose.inverse().transform_point(tcp_pose.position)
        if math.hypot(local[0], local[1]) < 1e-9:
            return  # on-axis: no azimuth defined, no rotation
        azimuth = math.atan2(local[1], local[0])
        handle_azimuth = math.atan2(self.handle_offset.position[1], self.handle_offset.position[0])
        self.angle = wrap_angle(azimuth - handle_azimuth)

    def state_doc(self) -> dict:
        return {
            "angle": self.angle,
            "stored_angle": self.stored_angle,
            "brake": self.brake,
            "handle": self.handle_pose().to_doc(),
            "parts": {pid: self.part_pose(pid).to_doc() for pid in self.parts},
        }


class ToolRackAgent(Agent):
    """Slot array holding exchangeable tools; occupancy changes are atomic
    within a simulation tick and always emitted."""

    def __init__(self, name: str = "rack1", slots=None, mount_pose: Pose | None = None):
        self.name = name
        self.mount_pose = mount_pose or Pose()
        self.slots: list[tuple[Pose, ToolDescriptor | None]] = [
            (pose, tool) for pose, tool in (slots or [])
        ]
        ids = [t.tool_id for _, t in self.slots if t is not None]
        if len(ids) != len(set(ids)):
            raise InvalidValue("duplicate tool ids in rack")
        # initial inventory: distinguishes "checked out" from "never here"
        self._home_slots = {t.tool_id: i for i, (_, t) in enumerate(self.slots) if t is not None}

    def descriptor(self) -> ModuleDescriptor:
        take_schema = {"type": "object", "properties": {"tool_id": {"type": "string"}},
                       "required": ["tool_id"]}
        put_schema = {"type": "object",
                      "properties": {"tool": {"type": "object"}, "slot": {"type": "integer"}},
                      "required": ["tool", "slot"]}
        return ModuleDescriptor(
            self.name, ModuleKind.TOOL_RACK,
            (Capability("take", take_schema), Capability("put", put_schema), Capability("list_slots")),
            mount_pose=self.mount_pose,
        )

    def begin(self, cmd: CommandHandle):
        try:
            if cmd.verb == "take":
                tool, idx = self.take_tool(cmd.params["tool_id"])
                cmd.finish(SUCCEEDED, {"tool": tool.to_doc(), "slot": idx})
                return
            if cmd.verb == "put":
                self.put_tool(ToolDescriptor.from_doc(cmd.params["tool"]), int(cmd.params["slot"]))
            elif cmd.verb == "list_slots":
                cmd.finish(SUCCEEDED, self.state_doc())
                return
            else:
                raise InvalidValue(f"unhandled verb {cmd.verb}")
            cmd.finish(SUCCEEDED, self.state_doc())
        except CellError as exc:
            cmd.finish(FAILED, {"error": exc.code, "detail": exc.detail})

    def slot_of(self, tool_id: str) -> int | None:
        for i, (_, tool) in enumerate(self.slots):
            if tool is not None and tool.tool_id == tool_id:
                return i
        return None

    def slot_pose(self, idx: int) -> Pose:
        return self.slots[idx][0]

    def take_tool(self, tool_id: str):
        idx = self.slot_of(tool_id)
        if idx is None:
            home = self._home_slots.get(tool_id)
            if home is not None:
                raise SlotEmpty(f"tool {tool_id!r} is checked out (slot {home} empty)")
            raise UnknownTool(f"tool {tool_id!r} not in rack")
        pose, tool = self.slots[idx]
        self.slots[idx] = (pose, None)
        self._emit_rack(idx)
        return tool, idx

    def take_from_slot(self, idx: int) -> ToolDescriptor:
        self._check_idx(idx)
        pose, tool = self.slots[idx]
        if tool is None:
            raise SlotEmpty(f"slot {idx} is empty")
        self.slots[idx] = (pose, None)
        self._emit_rack(idx)
        return tool

    def put_tool(self, tool: ToolDescriptor, idx: int):
        self._check_idx(idx)
        pose, occupant = self.slots[idx]
        if occupant is not None:
            raise SlotOccupied(f"slot {idx} holds {occupant.tool_id}")
        if self.slot_of(tool.tool_id) is not None:
            raise SlotOccupied(f"tool {tool.tool_id!r} already racked")
        self.slots[idx] = (pose, tool)
        self._emit_rack(idx)

    def _check_idx(self, idx: int):
        if not 0 <= idx < len(self.slots):
            raise InvalidValue(f"no slot {idx}")

    def _emit_rack(self, idx: int):
        if hasattr(self, "registry"):
            pose, tool = self.slots[idx]
            self.emit(EventKind.RACK_CHANGED,
                      {"module_id": self.module_id, "slot": idx,
                       "tool": tool.to_doc() if tool else None})

    def tool_count(self) -> int:
        return sum(1 for _, t in self.slots if t is not None)

    def state_doc(self) -> dict:
        return {"slots": [{"pose": p.to_doc(), "tool": t.to_doc() if t else None}
                          for p, t in self.slots]}


class FixtureAgent(Agent):
    """Workpiece holder; while clamped the part follows the fixture pose."""

    def __init__(self, name: str = "fix1", fixture_pose: Pose | None = None,
                 held_part: str | None = None, clamped: bool = False):
        self.name = name
        self.fixture_pose = fixture_pose or Pose()
        self.held_part = held_part
        self.clamped = clamped

    def descriptor(self) -> ModuleDescriptor:
        clamp_schema = {"type": "object", "properties": {"part_id": {"type": "string"}}}
        return ModuleDescriptor(
            self.name, ModuleKind.FIXTURE,
            (Capability("clamp", clamp_schema), Capability("unclamp"), Capability("get_state")),
            mount_pose=self.fixture_pose,
        )

    def begin(self, cmd: CommandHandle):
        try:
            if cmd.verb == "clamp":
                self.clamp(cmd.params.get("part_id"))
            elif cmd.verb == "unclamp":
                self.unclamp()
            elif cmd.verb == "get_state":
                pass
            else:
                raise InvalidValue(f"unhandled verb {cmd.verb}")
            cmd.finish(SUCCEEDED, self.state_doc())
        except CellError as exc:
            cmd.finish(FAILED, {"error": exc.code, "detail": exc.detail})

    def clamp(self, part_id: str | None = None):
        if part_id is not None:
            self.held_part = part_id
        self.clamped = True
        self._emit()

    def unclamp(self):
        self.clamped = False
        self._emit()

    def _emit(self):
        if hasattr(self, "registry"):
            self.emit(EventKind.FIXTURE_CHANGED,
                      {"module_id": self.module_id, "clamped": self.clamped,
                       "part": self.held_part})

    def part_pose(self) -> Pose | None:
        return self.fixture_pose if self.held_part else None

    def state_doc(self) -> dict:
        return {"clamped": self.clamped, "part": self.held_part,
                "pose": self.fixture_pose.to_doc()}
