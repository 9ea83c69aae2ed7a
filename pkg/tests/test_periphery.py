"""Periphery tests: rotary-table brake semantics and kinematic coupling,
tool rack occupancy, fixture clamping, tool-count conservation."""

import math

import numpy as np
import pytest

from reconcell.clock import SimClock
from reconcell.errors import (
    AlreadyEngaged,
    AlreadyReleased,
    BrakeEngaged,
    NotGrasping,
    SlotEmpty,
    SlotOccupied,
    UnknownTool,
)
from reconcell.model import EventKind, Pose, ToolDescriptor
from reconcell.periphery import (
    BrakeState,
    FixtureAgent,
    RotaryTableAgent,
    ToolRackAgent,
    wrap_angle,
)
from reconcell.registry import FAILED, SUCCEEDED, CellRegistry, HeartbeatPolicy


@pytest.fixture
def cellreg():
    clock = SimClock(0.01)
    return CellRegistry(clock, HeartbeatPolicy()), clock


def online(reg, agent):
    mid = reg.attach(agent.descriptor(), agent)
    reg.heartbeat(mid, 1)
    return mid


class TestWrapAngle:
    def test_range(self):
        for theta in np.linspace(-12.0, 12.0, 1001):
            w = wrap_angle(float(theta))
            assert -math.pi < w <= math.pi
            # same direction modulo full turns
            assert abs(math.remainder(w - theta, 2 * math.pi)) < 1e-9

    def test_boundary(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(2 * math.pi) == pytest.approx(0.0, abs=1e-12)


class TestRotaryBrake:
    def test_release_records_stored_angle(self, cellreg):
        reg, _ = cellreg
        table = RotaryTableAgent(angle=0.7)
        online(reg, table)
        assert table.brake == BrakeState.ENGAGED
        table.release_brake()
        assert table.brake == BrakeState.RELEASED
        assert table.stored_angle == 0.7

    def test_double_release_and_engage_errors(self, cellreg):
        reg, _ = cellreg
        table = RotaryTableAgent()
        online(reg, table)
        with pytest.raises(AlreadyEngaged):
            table.engage_brake()
        table.release_brake()
        with pytest.raises(AlreadyReleased):
            table.release_brake()
        table.engage_brake()
        with pytest.raises(AlreadyEngaged):
            table.engage_brake()

    def test_release_engage_without_motion_keeps_angle(self, cellreg):
        reg, _ = cellreg
        table = RotaryTableAgent(angle=-1.2)
        online(reg, table)
        table.release_brake()
        table.engage_brake()
        assert table.angle == -1.2
        assert table.stored_angle == -1.2

    def test_brake_events_emitted(self, cellreg):
        reg, _ = cellreg
        table = RotaryTableAgent()
        mid = online(reg, table)
        cmd = reg.dispatch(mid, "release_brake")
        assert cmd.outcome == SUCCEEDED
        cmd2 = reg.dispatch(mid, "release_brake")
        assert cmd2.outcome == FAILED and cmd2.result["error"] == "already_released"
        brakes = [e for e in reg.events if e.kind is EventKind.BRAKE_CHANGED]
        assert len(brakes) == 1
        assert brakes[0].payload["brake"] == "RELEASED"


class TestRotaryCoupling:
    def make_table(self, reg):
        table = RotaryTableAgent(
            axis_pose=Pose((0.4, 0.3, 0.1)),
            handle_offset=Pose((0.15, 0.0, 0.05)),
            angle=0.2,
        )
        online(reg, table)
        return table

    def test_engaged_rejects_update(self, cellreg):
        reg, _ = cellreg
        table = self.make_table(reg)
        with pytest.raises(BrakeEngaged):
            table.coupled_update(table.handle_pose())

    def test_far_tcp_not_grasping(self, cellreg):
        reg, _ = cellreg
        table = self.make_table(reg)
        table.release_brake()
        far = Pose((0.0, 0.0, 0.0))
        with pytest.raises(NotGrasping):
            table.coupled_update(far)

    def test_arc_advances_angle(self, cellreg):
        """Handle driven along a 90-degree arc; angle integrates to pi/2."""
        reg, _ = cellreg
        table = self.make_table(reg)
        table.release_brake()
        theta0 = table.angle
        steps = 500
        for k in range(1, steps + 1):
            target_angle = theta0 + (math.pi / 2) * k / steps
            tcp = table.handle_pose(target_angle)  # robot tracks the handle
            table.coupled_update(tcp)
        assert abs(wrap_angle(table.angle - theta0) - math.pi / 2) < 1e-3

    def test_axis_parallel_motion_no_rotation(self, cellreg):
        reg, _ = cellreg
        table = self.make_table(reg)
        table.release_brake()
        a0 = table.angle
        handle = table.handle_pose()
        for dz in np.linspace(0, 0.0009, 10):
            moved = Pose((handle.position[0], handle.position[1], handle.position[2] + dz),
                         handle.orientation)
            table.coupled_update(moved)
        assert table.angle == pytest.approx(a0, abs=1e-12)

    def test_angle_piecewise_constant_outside_released(self, cellreg):
        """Angle changes only during RELEASED intervals (trace assertion)."""
        reg, clock = cellreg
        table = self.make_table(reg)
        trace = []
        for cycle in range(3):
            trace.append((table.brake, table.angle))
            table.release_brake()
            for k in range(1, 51):
                clock.advance()
                tcp = table.handle_pose(table.angle + 0.005)
                table.coupled_update(tcp)
                trace.append((table.brake, table.angle))
            table.engage_brake()
            for _ in range(10):
                clock.advance()
                trace.append((table.brake, table.angle))
        for (b0, a0), (b1, a1) in zip(trace, trace[1:]):
            if a1 != a0:
                assert b1 == BrakeState.RELEASED

    def test_stored_angle_at_transitions(self, cellreg):
        reg, _ = cellreg
        table = self.make_table(reg)
        for _ in range(3):
            table.release_brake()
            assert table.stored_angle == table.angle
            for k in range(40):
                table.coupled_update(table.handle_pose(table.angle + 0.005))
            table.engage_brake()
            assert table.stored_angle == table.angle


class TestToolRack:
    def make_rack(self, reg=None):
        driver = ToolDescriptor("driver", Pose((0, 0, 0.1)))
        rack = ToolRackAgent("rack1", [
            (Pose((0.5, 0.0, 0.2)), driver),
            (Pose((0.5, 0.2, 0.2)), None),
        ])
        if reg is not None:
            online(reg, rack)
        return rack, driver

    def test_take_put_round_trip(self, cellreg):
        reg, _ = cellreg
        rack, driver = self.make_rack(reg)
        tool, idx = rack.take_tool("driver")
        assert tool == driver and idx == 0
        assert rack.tool_count() == 0
        rack.put_tool(tool, 0)
        assert rack.slot_of("driver") == 0

    def test_take_checked_out_slot_empty(self, cellreg):
        reg, _ = cellreg
        rack, _ = self.make_rack(reg)
        rack.take_tool("driver")
        with pytest.raises(SlotEmpty):
            rack.take_tool("driver")

    def test_take_unknown(self, cellreg):
        reg, _ = cellreg
        rack, _ = self.make_rack(reg)
        with pytest.raises(UnknownTool):
            rack.take_tool("wrench")

    def test_put_occupied(self, cellreg):
        reg, _ = cellreg
        rack, driver = self.make_rack(reg)
        other = ToolDescriptor("gripper")
        with pytest.raises(SlotOccupied):
            rack.put_tool(other, 0)

    def test_concurrent_take_one_succeeds(self, cellreg):
        """Two dispatches race for the same tool; per-module serialization
        lets exactly one win."""
        reg, _ = cellreg
        rack, _ = self.make_rack()
        mid = online(reg, rack)
        c1 = reg.dispatch(mid, "take", {"tool_id": "driver"})
        c2 = reg.dispatch(mid, "take", {"tool_id": "driver"})
        outcomes = sorted([c1.outcome, c2.outcome])
        assert outcomes == [FAILED, SUCCEEDED]
        loser = c1 if c1.outcome == FAILED else c2
        assert loser.result["error"] == "slot_empty"

    def test_rack_events(self, cellreg):
        reg, _ = cellreg
        rack, _ = self.make_rack(reg)
        rack.take_tool("driver")
        evs = [e for e in reg.events if e.kind is EventKind.RACK_CHANGED]
        assert len(evs) == 1 and evs[0].payload["tool"] is None


class TestFixture:
    def test_clamp_unclamp(self, cellreg):
        reg, _ = cellreg
        fix = FixtureAgent("fix1", Pose((0.3, 0.3, 0.0)), held_part="housing")
        mid = online(reg, fix)
        cmd = reg.dispatch(mid, "clamp", {})
        assert cmd.outcome == SUCCEEDED and fix.clamped
        assert fix.part_pose() == fix.fixture_pose
        cmd = reg.dispatch(mid, "unclamp")
        assert cmd.outcome == SUCCEEDED and not fix.clamped
