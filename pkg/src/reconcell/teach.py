"""Programming by demonstration: jog mapping and trajectory recording.

Jog sticks map to Cartesian velocity targets through a deadband-then-
rescale curve so that full deflection always reaches the configured
maximum. Recording samples the robot's joint state (and derived tcp pose)
on the simulation clock at a fixed rate, regardless of how the robot is
being guided (jog or free drag); joint space is primary so replay is exact
independent of IK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    AlreadyRecording,
    EmptyRecording,
    InvalidValue,
    OutOfRange,
    UnknownSession,
)
from .model import JointState, Pose, Trajectory, TrajectoryKind, Twist
from .registry import CellRegistry, ModuleState
from .skills import SkillKind, SkillStore


@dataclass(frozen=True)
class JogConfig:
    v_max_linear: float = 0.25   # m/s at full deflection
    v_max_angular: float = 1.0   # rad/s at full deflection
    deadband: float = 0.10       # fraction of deflection ignored
    expo: float = 1.0            # curve exponent; >1 flattens near zero

    def __post_init__(self):
        if not 0.0 <= self.deadband < 1.0:
            raise InvalidValue("deadband must be in [0, 1)")
        if self.expo < 1.0:
            raise InvalidValue("curve exponent must be >= 1")
        if self.v_max_linear <= 0 or self.v_max_angular <= 0:
            raise InvalidValue("v_max must be positive")


def _map_axis(s: float, v_max: float, cfg: JogConfig) -> float:
    mag = abs(s)
    if mag > 1.0:
        raise OutOfRange(f"stick component {s} outside [-1, 1]")
    shaped = max(0.0, mag - cfg.deadband) / (1.0 - cfg.deadband)
    return v_max * math.copysign(shaped ** cfg.expo, s) if shaped > 0.0 else 0.0


def map_jog(stick, cfg: JogConfig | None = None) -> Twist:
    """Map a 6-axis stick vector (lin x,y,z then ang x,y,z in [-1,1]) to a
    Cartesian velocity target."""
    cfg = cfg or JogConfig()
    stick = tuple(float(c) for c in stick)
    if len(stick) != 6:
        raise OutOfRange("stick vector must have 6 components")
    lin = tuple(_map_axis(s, cfg.v_max_linear, cfg) for s in stick[:3])
    ang = tuple(_map_axis(s, cfg.v_max_angular, cfg) for s in stick[3:])
    return Twist(lin, ang)


def stick_from_doc(doc: dict) -> tuple:
    from .model import _check_keys, _num_list

    _check_keys(doc, {"lin", "ang"}, "stick")
    return tuple(_num_list(doc["lin"], 3, "stick.lin") + _num_list(doc["ang"], 3, "stick.ang"))


class RecordingSession:
    def __init__(self, session_id: str, robot_id: str, rate: float, start_time: float):
        if rate <= 0:
            raise InvalidValue("sample rate must be positive")
        self.session_id = session_id
        self.robot_id = robot_id
        self.rate = float(rate)
        self.start_time = start_time
        self.state = "RECORDING"
        self.joint_samples: list[tuple[float, JointState]] = []
        self.tcp_samples: list[tuple[float, Pose]] = []
        self._next_index = 0

    def due(self, now: float) -> bool:
        return now >= self.start_time + self._next_index / self.rate - 1e-9

    def add(self, now: float, joints: JointState, tcp: Pose):
        self.joint_samples.append((now, joints))
        self.tcp_samples.append((now, tcp))
        self._next_index += 1

    def trajectory(self) -> Trajectory:
        if len(self.joint_samples) < 2:
            raise EmptyRecording(f"{len(self.joint_samples)} samples recorded")
        t0 = self.joint_samples[0][0]
        samples = tuple(
            (0.0 if i == 0 else t - t0,
             JointState(s.positions, s.velocities, 0.0 if i == 0 else t - t0))
            for i, (t, s) in enumerate(self.joint_samples)
        )
        return Trajectory(TrajectoryKind.JOINT, samples)

    def tcp_trace(self) -> list[tuple[float, Pose]]:
        t0 = self.tcp_samples[0][0] if self.tcp_samples else 0.0
        return [(0.0 if i == 0 else t - t0, p) for i, (t, p) in enumerate(self.tcp_samples)]


class TeachService:
    """Owns jog forwarding and recording sessions; driven by the cell tick.

    ``apply_jogs`` runs before robots step (so a jog affects the tick it
    arrives on); ``sample`` runs after robots step (so samples see the
    post-motion state at the tick's timestamp).
    """

    def __init__(self, registry: CellRegistry, store: SkillStore | None = None,
                 jog_config: JogConfig | None = None):
        self.registry = registry
        self.store = store
        self.jog_config = jog_config or JogConfig()
        self._pending: dict[str, Twist] = {}
        self._sessions: dict[str, RecordingSession] = {}
        self._session_counter = 0

    # -- jog ----------------------------------------------------------------

    def jog(self, robot_id: str, stick, cfg: JogConfig | None = None):
        """Queue a jog for the next tick; latest wins per robot."""
        twist = map_jog(stick, cfg or self.jog_config)
        self._pending[robot_id] = twist

    def jog_doc(self, robot_id: str, doc: dict):
        self.jog(robot_id, stick_from_doc(doc))

    def zero_jog(self, robot_id: str):
        self._pending[robot_id] = Twist.zero()

    def apply_jogs(self):
        from .errors import BusyMode

        for robot_id, twist in self._pending.items():
            try:
                agent = self.registry.agent(robot_id)
            except Exception:
                continue
            try:
                agent.set_cartesian_velocity(twist)
            except BusyMode:
                pass  # jog frames are droppable while another mode owns the arm
        self._pending.clear()

    # -- recording ------------------------------------------------------------

    def start_recording(self, robot_id: str, rate: float = 50.0) -> str:
        rec = self.registry.record(robot_id)
        if rec.state is not ModuleState.ONLINE:
            from .errors import ModuleOffline

            raise ModuleOffline(f"robot {robot_id} is {rec.state.value}")
        for s in self._sessions.values():
            if s.robot_id == robot_id and s.state == "RECORDING":
                raise AlreadyRecording(f"robot {robot_id} already has session {s.session_id}")
        self._session_counter += 1
        sid = f"s{self._session_counter:04d}"
        session = RecordingSession(sid, robot_id, rate, self.registry.clock.now)
        self._sessions[sid] = session
        self._sample_session(session)  # inclusive start sample
        return sid

    def stop_recording(self, session_id: str) -> Trajectory:
        session = self.session(session_id)
        session.state = "STOPPED"
        return session.trajectory()

    def session(self, session_id: str) -> RecordingSession:
        s = self._sessions.get(session_id)
        if s is None:
            raise UnknownSession(f"no session {session_id}")
        return s

    def sample(self):
        """Record due samples for every active session (post-robot-step)."""
        now = self.registry.clock.now
        for session in self._sessions.values():
            if session.state != "RECORDING":
                continue
            while session.due(now):
                self._sample_session(session)

    def _sample_session(self, session: RecordingSession):
        agent = self.registry.agent(session.robot_id)
        session.add(self.registry.clock.now, agent.joint_state(), agent.tcp_pose())

    # -- persistence ------------------------------------------------------------

    def save_demonstration(self, session_or_traj, name: str) -> int:
        if self.store is None:
            raise InvalidValue("no skill store wired")
        meta = {}
        if isinstance(session_or_traj, str):
            session_or_traj = self.session(session_or_traj)
        if isinstance(session_or_traj, RecordingSession):
            session = session_or_traj
            if session.state == "RECORDING":
                traj = self.stop_recording(session.session_id)
            else:
                traj = session.trajectory()
            agent = self.registry.agent(session.robot_id)
            meta["robot_model"] = agent.model.name
            meta["robot"] = agent.name
        elif isinstance(session_or_traj, Trajectory):
            traj = session_or_traj
        else:
            raise InvalidValue("save_demonstration takes a session or a Trajectory")
        return self.store.put(name, SkillKind.TRAJECTORY, traj, meta)
