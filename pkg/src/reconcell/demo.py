"""Bundled end-to-end demo: three-sided fastening with a passive rotary
table (tool pickup, taught fasten motion, release-rotate-engage cycles).

The scenario builder computes all trajectories from pure geometry (chosen
joint configurations and circular handle paths), so a scenario document is
plain data: attach list, rack contents, pre-generated skills, the sequence
source, and a scripted jog tape for the taught skill. ``run_demo`` brings a
cell up from that document, runs the tape (scripted teach), then compiles,
validates and executes the sequence headlessly.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .cell import Cell, load_scenario
from .model import Pose
from .robot import ArmModel, SimulatedRobot

Q_HOME = (0.0, -0.6, 1.0, 0.0, 0.8, 0.0)
Q_DOCK = (0.7, -0.5, 1.0, 0.0, 1.0, 0.0)

TABLE_AXIS = (0.30, -0.32, 0.0)
HANDLE_RADIUS = 0.12
HANDLE_HEIGHT = 0.10
TURN_PER_SIDE = 2.0 * math.pi / 3.0

TOOL_DOWN = (0.0, 1.0, 0.0, 0.0)  # flange z pointing down (RotX(pi))

DRIVER = {"tool_id": "driver", "tcp_offset": {"p": [0.0, 0.0, 0.12], "q": [1.0, 0.0, 0.0, 0.0]},
          "mass": 0.4, "resource_needs": ["POWER"]}

LEAD_IN_SECONDS = 2.0
ARC_SECONDS = 8.0
ARC_SAMPLES = 40
GOTO_SECONDS = 2.0

DEMO_SEQUENCE = """\
# three-sided fastening with tool pickup and a passive rotary table
sequence demo_screw {
  state clamp: cmd fix1.clamp {"part_id": "housing"};
  state dock: skill "goto_dock" on r1;
  state equip: cmd r1.equip_tool {"tool_id": "driver"};
  for i in 1..3 {
    state fasten_$i: skill "fasten" on r1;
    state release_$i: cmd table1.release_brake;
    state rotate_$i: skill "rotate_$i" on r1;
    state lock_$i: cmd table1.engage_brake;
  }
  state park: skill "goto_dock" on r1;
  state unequip: cmd r1.unequip_tool;
  state home: skill "goto_home" on r1;
  state unclamp: cmd fix1.unclamp;
}
"""

# scripted teach input: time-stamped stick vectors (see JogConfig for the
# deadband mapping); ends centered so the arm settles back to IDLE
FASTEN_TAPE = [
    {"t_s": 0.0, "lin": [0.0, 0.0, 0.0], "ang": [0.0, 0.0, 0.0]},
    {"t_s": 0.2, "lin": [0.5, 0.4, -0.5], "ang": [0.0, 0.0, 0.0]},
    {"t_s": 1.0, "lin": [0.0, 0.0, -0.4], "ang": [0.0, 0.0, 0.6]},
    {"t_s": 1.8, "lin": [0.0, 0.0, 0.5], "ang": [0.0, 0.0, -0.6]},
    {"t_s": 2.6, "lin": [-0.5, -0.4, 0.0], "ang": [0.0, 0.0, 0.0]},
    {"t_s": 3.4, "lin": [0.0, 0.0, 0.0], "ang": [0.0, 0.0, 0.0]},
]


def _handle_tcp(angle: float) -> Pose:
    """Tool-tip pose that places the driver tip in the handle socket."""
    return Pose((TABLE_AXIS[0] + HANDLE_RADIUS * math.cos(angle),
                 TABLE_AXIS[1] + HANDLE_RADIUS * math.sin(angle),
                 HANDLE_HEIGHT), TOOL_DOWN)


def _joint_traj_doc(q_from, q_to, seconds) -> dict:
    return {"kind": "JOINT", "samples": [
        {"t": 0.0, "q": list(q_from)},
        {"t": seconds, "q": list(q_to)},
    ]}


def _rotate_skill_doc(side: int, home_tcp: Pose) -> dict:
    """Cartesian lead-in from the fasten rest pose to the grasp point, then
    a constant-speed arc of one turn-per-side about the table axis."""
    start = (side - 1) * TURN_PER_SIDE
    samples = [{"t": 0.0, "pose": home_tcp.to_doc()}]
    grasp = _handle_tcp(start)
    samples.append({"t": LEAD_IN_SECONDS, "pose": grasp.to_doc()})
    for k in range(1, ARC_SAMPLES + 1):
        angle = start + TURN_PER_SIDE * k / ARC_SAMPLES
        t = LEAD_IN_SECONDS + ARC_SECONDS * k / ARC_SAMPLES
        samples.append({"t": t, "pose": _handle_tcp(angle).to_doc()})
    return {"kind": "CARTESIAN", "samples": samples, "frame": "cell-root"}


def build_demo_scenario() -> dict:
    """Scenario document for the bundled demo (pure data, no live cell)."""
    model = ArmModel.bundled("desk6")
    probe = SimulatedRobot(model)
    dock_pose = probe.forward_kinematics(Q_DOCK)
    home_flange = probe.forward_kinematics(Q_HOME)
    driver_offset = Pose.from_doc(DRIVER["tcp_offset"])
    home_tcp_with_tool = home_flange.compose(driver_offset)

    skills = [
        {"name": "goto_dock", "kind": "TRAJECTORY",
         "payload": _joint_traj_doc(Q_HOME, Q_DOCK, GOTO_SECONDS),
         "meta": {"robot_model": model.name, "tags": ["generated"]}},
        {"name": "goto_home", "kind": "TRAJECTORY",
         "payload": _joint_traj_doc(Q_DOCK, Q_HOME, GOTO_SECONDS),
         "meta": {"robot_model": model.name, "tags": ["generated"]}},
    ]
    for side in (1, 2, 3):
        skills.append({
            "name": f"rotate_{side}", "kind": "TRAJECTORY",
            "payload": _rotate_skill_doc(side, home_tcp_with_tool),
            "meta": {"robot_model": model.name, "tags": ["generated", "table"]},
        })

    return {
        "name": "demo_screw",
        "dt": 0.01,
        "arms": [{"model": "desk6", "name": "r1", "home": list(Q_HOME)}],
        "rotary_tables": [{
            "name": "table1",
            "axis_pose": {"p": list(TABLE_AXIS), "q": [1.0, 0.0, 0.0, 0.0]},
            "handle_offset": {"p": [HANDLE_RADIUS, 0.0, HANDLE_HEIGHT], "q": [1.0, 0.0, 0.0, 0.0]},
            "angle": 0.0,
            "parts": {"housing": {"p": [0.0, 0.0, 0.12], "q": [1.0, 0.0, 0.0, 0.0]}},
        }],
        "racks": [{
            "name": "rack1",
            "slots": [
                {"pose": dock_pose.to_doc(), "tool": DRIVER},
                {"pose": Pose((dock_pose.position[0], dock_pose.position[1] + 0.25,
                               dock_pose.position[2]), dock_pose.orientation).to_doc(),
                 "tool": None},
            ],
        }],
        "fixtures": [{"name": "fix1", "pose": {"p": [0.45, 0.15, 0.0], "q": [1.0, 0.0, 0.0, 0.0]},
                      "part": "housing"}],
        "skills": skills,
        "sequences": [{"file": "demo_screw.seq"}],
        "tape": {"robot": "r1", "rate": 50, "save_as": "fasten", "file": "fasten.tape.json"},
    }


def bundled_scenario_path() -> Path:
    return Path(str(resources.files("reconcell.data").joinpath("demo_screw.json")))


def write_bundle(out_dir) -> None:
    """Regenerate the bundled scenario files (build-time helper)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "demo_screw.json").write_text(json.dumps(build_demo_scenario(), indent=2) + "\n")
    (out / "demo_screw.seq").write_text(DEMO_SEQUENCE)
    (out / "fasten.tape.json").write_text(json.dumps(FASTEN_TAPE, indent=2) + "\n")


def run_demo(store_root=None, scenario_path=None) -> tuple[Cell, "RunReport"]:
    """Headless end-to-end: bring-up, scripted teach, validate, run."""
    from .cell import run_scenario_tape

    path = Path(scenario_path) if scenario_path else bundled_scenario_path()
    cell = load_scenario(path, store_root=store_root)
    run_scenario_tape(cell)
    report = cell.run_sequence("demo_screw")
    return cell, report
