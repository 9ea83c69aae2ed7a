"""Sequence engine tests: validation findings, execution semantics, retry
and abort routing, late binding, robot exclusivity, determinism."""

import json

import pytest

from reconcell.assembler import compile_ast, expand, parse, validate
from reconcell.cell import Cell
from reconcell.errors import RobotBusy, SkillInUse, UnknownRun, ValidationFailed
from reconcell.model import EventKind, JointState, Trajectory, TrajectoryKind
from reconcell.periphery import FixtureAgent, RotaryTableAgent
from reconcell.registry import FAILED, SUCCEEDED, Capability, ModuleDescriptor, ModuleKind, StubAgent
from reconcell.robot import ArmModel, SimulatedRobot
from reconcell.skills import PrimitiveSpec, SkillKind


def small_move_traj(dof, target, duration=0.5):
    start = (0.0,) * dof
    goal = tuple(target if i == 0 else 0.0 for i in range(dof))
    return Trajectory(TrajectoryKind.JOINT, (
        (0.0, JointState(start)),
        (duration, JointState(goal, timestamp=duration)),
    ))


def make_cell(with_robot=True, with_table=True, with_fixture=False):
    cell = Cell(dt=0.01)
    if with_robot:
        cell.attach(SimulatedRobot(ArmModel.bundled("desk6"), name="r1"))
    if with_table:
        cell.attach(RotaryTableAgent("table1"))
    if with_fixture:
        cell.attach(FixtureAgent("fix1", held_part="housing"))
    return cell


def compiled(src, args=None):
    return compile_ast(expand(parse(src), args), wallclock=False)


class TestValidate:
    def test_missing_skill_finding(self):
        cell = make_cell()
        ir = compiled('sequence s { state a: skill "ghost" on r1; }')
        findings = validate(ir, cell.registry.snapshot(), cell.store)
        assert [f.kind for f in findings] == ["MISSING_SKILL"]

    def test_all_satisfied_empty_report(self):
        cell = make_cell()
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.2))
        ir = compiled('sequence s { state a: skill "move" on r1; state b: cmd table1.release_brake; }')
        assert validate(ir, cell.registry.snapshot(), cell.store) == []

    def test_offline_module_finding(self):
        cell = make_cell()
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.2))
        # silence auto-heartbeats and let the table go stale
        table_id = cell.registry.module_id_by_name("table1")
        del cell._auto_hb[table_id]
        cell.run_for(2.0)
        ir = compiled('sequence s { state a: cmd table1.release_brake; }')
        findings = validate(ir, cell.registry.snapshot(), cell.store)
        assert [f.kind for f in findings] == ["MODULE_OFFLINE"]

    def test_unknown_verb_and_missing_module(self):
        cell = make_cell()
        ir = compiled('sequence s { state a: cmd table1.fly; state b: cmd ghost.go; }')
        kinds = {f.kind for f in validate(ir, cell.registry.snapshot(), cell.store)}
        assert kinds == {"UNKNOWN_VERB", "MISSING_MODULE"}

    def test_model_mismatch_warning(self):
        cell = make_cell()
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.2),
                       {"robot_model": "desk7"})
        ir = compiled('sequence s { state a: skill "move" on r1; }')
        findings = validate(ir, cell.registry.snapshot(), cell.store)
        assert [(f.kind, f.severity) for f in findings] == [("MODEL_MISMATCH", "warning")]
        # warnings do not block execution
        cell.library.put(ir)
        assert cell.run_sequence(ir.name).final_outcome == "END_SUCCESS"


class TestExecution:
    def test_two_wait_states(self):
        cell = make_cell(with_robot=False, with_table=False)
        cell.compile_sequence('sequence waits { state a: wait 0.1; state b: wait 0.1; }')
        t0 = cell.clock.now
        report = cell.run_sequence("waits")
        assert report.final_outcome == "END_SUCCESS"
        assert [r.state_id for r in report.records] == ["a", "b"]
        assert cell.clock.now - t0 == pytest.approx(0.2, abs=0.02)
        for r in report.records:
            assert r.outcome == SUCCEEDED

    def test_state_entered_events_in_order(self):
        cell = make_cell(with_robot=False, with_table=False)
        cell.compile_sequence('sequence chain { state a: noop; state b: noop; state c: noop; }')
        report = cell.run_sequence("chain")
        entered = [e.payload["state"] for e in cell.registry.events
                   if e.kind is EventKind.STATE_ENTERED and e.payload["run_id"] == report.run_id]
        assert entered == ["a", "b", "c"]

    def test_run_events_bracket_report_range(self):
        cell = make_cell(with_robot=False, with_table=False)
        cell.compile_sequence('sequence one { state a: wait 0.05; }')
        report = cell.run_sequence("one")
        events = cell.registry.events
        first = next(e for e in events if e.kind is EventKind.RUN_STARTED)
        last = next(e for e in events if e.kind is EventKind.RUN_FINISHED)
        assert (report.first_seq, report.last_seq) == (first.seq, last.seq)

    def test_retry_transition_reenters_once(self):
        cell = make_cell(with_robot=False, with_table=False)
        desc = ModuleDescriptor("press", ModuleKind.OTHER, (Capability("push"),))
        cell.attach(StubAgent(desc, script={"push": [FAILED, SUCCEEDED]}))
        cell.compile_sequence(
            'sequence retry { state push: cmd press.push on FAILED -> push; }')
        report = cell.run_sequence("retry")
        assert report.final_outcome == "END_SUCCESS"
        assert [r.state_id for r in report.records] == ["push", "push"]
        assert [r.outcome for r in report.records] == [FAILED, SUCCEEDED]

    def test_custom_outcome_routing(self):
        cell = make_cell(with_robot=False, with_table=False)
        desc = ModuleDescriptor("camera", ModuleKind.OTHER,
                                (Capability("classify", outcomes=frozenset({"SUCCEEDED", "FAILED", "REJECT"})),))
        cell.attach(StubAgent(desc, script={"classify": ["REJECT"]}))
        cell.compile_sequence(
            'sequence sort { state look: cmd camera.classify on REJECT -> discard; '
            'state discard: noop; }')
        report = cell.run_sequence("sort")
        assert [r.state_id for r in report.records] == ["look", "discard"]

    def test_unmapped_outcome_follows_failed_route(self):
        cell = make_cell(with_robot=False, with_table=False)
        desc = ModuleDescriptor("flaky", ModuleKind.OTHER,
                                (Capability("go", outcomes=frozenset({"SUCCEEDED", "FAILED", "WEIRD"})),))
        cell.attach(StubAgent(desc, script={"go": ["WEIRD"]}))
        cell.compile_sequence('sequence s { state a: cmd flaky.go; }')
        report = cell.run_sequence("s")
        assert report.final_outcome == "END_FAILURE"
        assert report.records[0].outcome == "WEIRD"

    def test_validation_failed_blocks_run(self):
        cell = make_cell(with_robot=False, with_table=False)
        cell.compile_sequence('sequence bad { state a: cmd ghost.go; }')
        with pytest.raises(ValidationFailed) as err:
            cell.start_run("bad")
        assert err.value.findings[0]["kind"] == "MISSING_MODULE"

    def test_detach_mid_run_aborts_to_failure(self):
        cell = make_cell()
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.3, duration=2.0))
        cell.compile_sequence('sequence m { state a: skill "move" on r1; }')
        report = cell.start_run("m")
        cell.run_for(0.5)  # trajectory underway
        cell.detach(cell.registry.module_id_by_name("r1"))
        cell.run_until(lambda: report.done, 5.0)
        assert report.final_outcome == "END_FAILURE"
        assert report.records[0].outcome == "ABORTED"

    def test_robot_exclusivity(self):
        cell = make_cell()
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.3, duration=3.0))
        cell.compile_sequence('sequence m1 { state a: skill "move" on r1; }')
        cell.compile_sequence('sequence m2 { state a: skill "move" on r1; }')
        cell.start_run("m1")
        with pytest.raises(RobotBusy):
            cell.start_run("m2")

    def test_concurrent_runs_on_disjoint_modules(self):
        cell = make_cell(with_robot=False, with_table=False, with_fixture=True)
        cell.attach(RotaryTableAgent("table1"))
        cell.compile_sequence('sequence t { state a: cmd table1.release_brake; state b: wait 0.3; state c: cmd table1.engage_brake; }')
        cell.compile_sequence('sequence f { state a: cmd fix1.clamp; state b: wait 0.2; state c: cmd fix1.unclamp; }')
        r1 = cell.start_run("t")
        r2 = cell.start_run("f")
        cell.run_until(lambda: r1.done and r2.done, 10.0)
        assert r1.final_outcome == r2.final_outcome == "END_SUCCESS"

    def test_primitive_skill_resolves_by_kind(self):
        cell = make_cell(with_robot=False)
        cell.store.put("open_table", SkillKind.PRIMITIVE,
                       PrimitiveSpec(ModuleKind.ROTARY_TABLE, "release_brake"))
        cell.compile_sequence('sequence p { state a: skill "open_table" on r1; }')
        # robot name in a PRIMITIVE skill state is not dereferenced
        ir = cell.library.get("p")
        findings = [f for f in validate(ir, cell.registry.snapshot(), cell.store)
                    if f.severity == "error" and f.kind != "MISSING_MODULE"]
        assert findings == []

    def test_unknown_run(self):
        cell = make_cell(with_robot=False, with_table=False)
        with pytest.raises(UnknownRun):
            cell.executor.report("run9999")


class TestLateBinding:
    def test_overwrite_changes_motion_without_recompile(self):
        cell = make_cell(with_table=False)
        robot = cell.robot("r1")
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.25))
        cell.compile_sequence('sequence m { state a: skill "move" on r1; }')
        ir_before = cell.library.get("m")

        report1 = cell.run_sequence("m")
        q_after_1 = robot.q.copy()

        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, -0.4))
        report2 = cell.run_sequence("m")
        q_after_2 = robot.q.copy()

        assert cell.library.get("m") is ir_before  # zero recompilation
        assert report1.source_hash == report2.source_hash
        assert q_after_1[0] == pytest.approx(0.25, abs=1e-9)
        assert q_after_2[0] == pytest.approx(-0.4, abs=1e-9)

    def test_version_pin_defeats_late_binding(self):
        cell = make_cell(with_table=False)
        robot = cell.robot("r1")
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.2))
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.6))
        cell.compile_sequence('sequence pinned { state a: skill "move" @1 on r1; }')
        report = cell.run_sequence("pinned")
        assert report.final_outcome == "END_SUCCESS"
        assert robot.q[0] == pytest.approx(0.2, abs=1e-9)

    def test_loaded_sequence_pins_skill_against_delete(self):
        cell = make_cell(with_table=False)
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.2))
        cell.compile_sequence('sequence m { state a: skill "move" on r1; }')
        with pytest.raises(SkillInUse):
            cell.store.delete("move")
        cell.library.remove("m")
        cell.store.delete("move")


class TestDeterminism:
    def build_and_run(self):
        cell = make_cell(with_fixture=True)
        cell.store.put("move", SkillKind.TRAJECTORY, small_move_traj(6, 0.3))
        cell.compile_sequence(
            'sequence demo { state clamp: cmd fix1.clamp {"part_id": "housing"}; '
            'state open: cmd table1.release_brake; '
            'state m: skill "move" on r1; '
            'state close: cmd table1.engage_brake; '
            'state dwell: wait 0.15; }')
        report = cell.run_sequence("demo")
        return report, [e.to_doc() for e in cell.registry.events]

    def test_identical_runs_identical_event_logs(self):
        r1, ev1 = self.build_and_run()
        r2, ev2 = self.build_and_run()
        assert r1.final_outcome == r2.final_outcome == "END_SUCCESS"
        assert json.dumps(ev1) == json.dumps(ev2)
