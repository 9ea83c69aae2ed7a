"""Skill store tests: version discipline, WAL durability across a hard
process kill, compaction, and delete protection."""

import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reconcell.errors import InvalidPayload, SkillInUse, UnknownSkill, UnknownVersion
from reconcell.model import JointState, Trajectory, TrajectoryKind
from reconcell.registry import ModuleKind
from reconcell.skills import PrimitiveSpec, SkillKind, SkillStore


def traj(vals=(0.0, 1.0)):
    samples = tuple(
        (float(i), JointState((v, -v), timestamp=float(i))) for i, v in enumerate(vals)
    )
    return Trajectory(TrajectoryKind.JOINT, samples)


class TestVersioning:
    def test_first_put_is_v1(self, tmp_path):
        store = SkillStore(tmp_path)
        assert store.put("pick_a", SkillKind.TRAJECTORY, traj()) == 1

    def test_overwrite_appends_version(self, tmp_path):
        store = SkillStore(tmp_path)
        store.put("pick_a", SkillKind.TRAJECTORY, traj((0, 1)))
        v2 = store.put("pick_a", SkillKind.TRAJECTORY, traj((0, 2)))
        assert v2 == 2
        assert store.get("pick_a").version == 2
        old = store.get("pick_a", 1)
        assert old.payload.samples[1][1].positions[0] == 1.0  # v1 still readable

    def test_invalid_payload_rejected(self):
        store = SkillStore()
        with pytest.raises(InvalidPayload):
            store.put("bad", SkillKind.TRAJECTORY,
                      {"kind": "JOINT", "samples": [{"t": 0.0, "q": [0]}, {"t": -1.0, "q": [1]}]})
        with pytest.raises(InvalidPayload):
            store.put("bad", SkillKind.PRIMITIVE, {"verb": "x"})  # missing module_kind
        with pytest.raises(InvalidPayload):
            store.put("bad", "NO_SUCH_KIND", traj())

    def test_get_unknown(self):
        store = SkillStore()
        with pytest.raises(UnknownSkill):
            store.get("ghost")
        store.put("real", SkillKind.TRAJECTORY, traj())
        with pytest.raises(UnknownVersion):
            store.get("real", 9)

    def test_history_and_list(self):
        store = SkillStore()
        assert store.list() == []
        for _ in range(3):
            store.put("a", SkillKind.TRAJECTORY, traj())
        store.put("b", SkillKind.PRIMITIVE,
                  PrimitiveSpec(ModuleKind.ROTARY_TABLE, "release_brake"), {"tags": ["table"]})
        assert [e.version for e in store.history("a")] == [1, 2, 3]
        assert [e.name for e in store.list()] == ["a", "b"]
        assert [e.name for e in store.list(kind=SkillKind.PRIMITIVE)] == ["b"]
        assert [e.name for e in store.list(tag="table")] == ["b"]
        with pytest.raises(UnknownSkill):
            store.history("ghost")

    def test_delete(self, tmp_path):
        store = SkillStore(tmp_path)
        store.put("a", SkillKind.TRAJECTORY, traj())
        store.delete("a")
        with pytest.raises(UnknownSkill):
            store.get("a")
        with pytest.raises(UnknownSkill):
            store.delete("a")
        # deletion survives restart
        store.close()
        store2 = SkillStore(tmp_path)
        assert store2.names() == []

    def test_delete_in_use(self):
        store = SkillStore()
        store.put("fasten", SkillKind.TRAJECTORY, traj())
        store.set_in_use_check(lambda: {"fasten"})
        with pytest.raises(SkillInUse):
            store.delete("fasten")
        store.set_in_use_check(lambda: set())
        store.delete("fasten")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=30))
    def test_version_monotonicity_property(self, names):
        store = SkillStore()
        for name in names:
            store.put(name, SkillKind.TRAJECTORY, traj())
        for name in set(names):
            versions = [e.version for e in store.history(name)]
            assert versions == list(range(1, names.count(name) + 1))


class TestDurability:
    def test_reopen_restores_state(self, tmp_path):
        store = SkillStore(tmp_path)
        store.put("a", SkillKind.TRAJECTORY, traj((0, 0.5)))
        store.put("a", SkillKind.TRAJECTORY, traj((0, 0.7)))
        store.put("b", SkillKind.PRIMITIVE, PrimitiveSpec(ModuleKind.FIXTURE, "clamp"))
        store.close()
        store2 = SkillStore(tmp_path)
        assert store2.get("a").version == 2
        assert store2.get("a", 1).payload.samples[1][1].positions[0] == 0.5
        assert store2.get("b").payload.verb == "clamp"

    def test_payload_bitwise_through_store(self, tmp_path):
        rng = np.random.default_rng(31)
        vals = rng.uniform(-2, 2, size=(40, 6))
        samples = tuple(
            (i * 0.02, JointState(tuple(row), timestamp=i * 0.02)) for i, row in enumerate(vals)
        )
        original = Trajectory(TrajectoryKind.JOINT, samples)
        store = SkillStore(tmp_path)
        store.put("demo", SkillKind.TRAJECTORY, original)
        store.close()
        loaded = SkillStore(tmp_path).get("demo").payload
        for (t0, s0), (t1, s1) in zip(original.samples, loaded.samples):
            assert t0 == t1
            assert s0.positions == s1.positions
            assert s0.velocities == s1.velocities

    def test_crash_kill_between_puts(self, tmp_path):
        """Child process puts entries and dies without closing anything;
        the committed prefix must be intact on reopen."""
        script = textwrap.dedent(f"""
            import os
            from reconcell.model import JointState, Trajectory, TrajectoryKind
            from reconcell.skills import SkillKind, SkillStore
            t = Trajectory(TrajectoryKind.JOINT,
                           ((0.0, JointState((0.0,))), (1.0, JointState((1.0,)))))
            store = SkillStore({str(tmp_path)!r})
            for i in range(5):
                store.put(f"skill{{i}}", SkillKind.TRAJECTORY, t)
            os._exit(1)  # hard kill: no close, no atexit
        """)
        proc = subprocess.run([sys.executable, "-c", script], capture_output=True, text=True)
        assert proc.returncode == 1, proc.stderr
        store = SkillStore(tmp_path)
        assert store.names() == [f"skill{i}" for i in range(5)]

    def test_torn_tail_ignored(self, tmp_path):
        store = SkillStore(tmp_path)
        store.put("a", SkillKind.TRAJECTORY, traj())
        store.close()
        with open(tmp_path / SkillStore.LOG, "ab") as fh:
            fh.write(b'{"op":"put","name":"b","ver')  # crash mid-write
        store2 = SkillStore(tmp_path)
        assert store2.names() == ["a"]
        # and the store keeps working after recovery
        store2.put("c", SkillKind.TRAJECTORY, traj())
        assert store2.get("c").version == 1

    def test_compaction_preserves_everything(self, tmp_path):
        store = SkillStore(tmp_path, compact_every=10_000)
        for i in range(7):
            store.put("a", SkillKind.TRAJECTORY, traj((0, i)))
        store.put("b", SkillKind.TRAJECTORY, traj())
        store.delete("b")
        store.compact()
        assert os.path.getsize(tmp_path / SkillStore.LOG) == 0
        store.close()
        store2 = SkillStore(tmp_path)
        assert [e.version for e in store2.history("a")] == list(range(1, 8))
        assert store2.names() == ["a"]

    def test_auto_compaction_threshold(self, tmp_path):
        store = SkillStore(tmp_path, compact_every=5)
        for i in range(5):
            store.put(f"s{i}", SkillKind.TRAJECTORY, traj())
        assert os.path.getsize(tmp_path / SkillStore.LOG) == 0  # just compacted
        assert SkillStore(tmp_path).names() == [f"s{i}" for i in range(5)]

    def test_log_is_valid_ndjson(self, tmp_path):
        store = SkillStore(tmp_path, compact_every=10_000)
        store.put("a", SkillKind.TRAJECTORY, traj())
        store.put("a", SkillKind.TRAJECTORY, traj())
        with open(tmp_path / SkillStore.LOG) as fh:
            records = [json.loads(line) for line in fh]
        assert [r["op"] for r in records] == ["put", "put"]
        assert [r["version"] for r in records] == [1, 2]
        assert set(records[0]) == {"op", "name", "version", "kind", "payload", "meta"}
