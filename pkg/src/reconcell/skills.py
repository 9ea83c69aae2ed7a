"""Versioned skill database with overwrite-without-recompile semantics.

Skills are named, append-only versioned entries (1..k, gapless). A put
under an existing name creates the next version; consumers that resolve a
name without a version get the latest at that instant (late binding), which
is what lets an operator overwrite a skill without touching any compiled
sequence.

Persistence is a write-ahead NDJSON log with fsync on every put, plus a
compacted snapshot file in the same record schema. Prior versions are
retained forever at desk scale.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import InvalidPayload, InvalidValue, SkillInUse, UnknownSkill, UnknownVersion
from .model import Trajectory
from .registry import ModuleKind


class SkillKind(str, Enum):
    TRAJECTORY = "TRAJECTORY"
    PRIMITIVE = "PRIMITIVE"


@dataclass(frozen=True)
class PrimitiveSpec:
    """Parameterized module command: resolved to a live module of the given
    kind at execution time."""

    module_kind: ModuleKind
    verb: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "module_kind", ModuleKind(self.module_kind))
        if not self.verb:
            raise InvalidPayload("primitive verb must be non-empty")
        object.__setattr__(self, "params", dict(self.params))

    def to_doc(self) -> dict:
        return {"module_kind": self.module_kind.value, "verb": self.verb, "params": self.params}

    @classmethod
    def from_doc(cls, doc: dict) -> "PrimitiveSpec":
        from .model import _check_keys

        _check_keys(doc, {"module_kind", "verb"}, "primitive", optional={"params"})
        return cls(ModuleKind(doc["module_kind"]), str(doc["verb"]), dict(doc.get("params", {})))


@dataclass(frozen=True)
class SkillEntry:
    name: str
    version: int
    kind: SkillKind
    payload: Trajectory | PrimitiveSpec
    meta: dict = field(default_factory=dict)

    def payload_doc(self) -> dict:
        return self.payload.to_doc()

    def to_doc(self) -> dict:
        return {"name": self.name, "version": self.version, "kind": self.kind.value,
                "payload": self.payload_doc(), "meta": self.meta}


def _payload_from_doc(kind: SkillKind, doc: dict):
    try:
        if kind is SkillKind.TRAJECTORY:
            return Trajectory.from_doc(doc)
        return PrimitiveSpec.from_doc(doc)
    except (InvalidValue, ValueError, KeyError, TypeError) as exc:
        raise InvalidPayload(f"bad {kind.value} payload: {exc}") from exc


def _coerce_payload(kind: SkillKind, payload):
    if kind is SkillKind.TRAJECTORY:
        if isinstance(payload, Trajectory):
            return payload
        if isinstance(payload, dict):
            return _payload_from_doc(kind, payload)
        raise InvalidPayload("TRAJECTORY payload must be a Trajectory or its document")
    if kind is SkillKind.PRIMITIVE:
        if isinstance(payload, PrimitiveSpec):
            return payload
        if isinstance(payload, dict):
            return _payload_from_doc(kind, payload)
        raise InvalidPayload("PRIMITIVE payload must be a PrimitiveSpec or its document")
    raise InvalidPayload(f"unknown skill kind {kind!r}")


class SkillStore:
    """Single-writer, multi-reader store. ``root=None`` keeps everything in
    memory (tests); otherwise the directory holds ``skills.log`` and
    ``skills.snapshot``."""

    LOG = "skills.log"
    SNAPSHOT = "skills.snapshot"

    def __init__(self, root: str | os.PathLike | None = None,
                 compact_every: int = 256):
        self._entries: dict[str, list[SkillEntry]] = {}
        self._in_use: Callable[[], set] = lambda: set()
        self._root = Path(root) if root is not None else None
        self._log_fh = None
        self._puts_since_compact = 0
        self._compact_every = compact_every
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)
            self._replay_disk()
            self._log_fh = open(self._root / self.LOG, "ab")

    # -- public API -------------------------------------------------------

    def put(self, name: str, kind, payload, meta: dict | None = None) -> int:
        if not name:
            raise InvalidPayload("skill name must be non-empty")
        try:
            kind = SkillKind(kind)
        except ValueError as exc:
            raise InvalidPayload(f"unknown skill kind {kind!r}") from exc
        payload = _coerce_payload(kind, payload)
        meta = dict(meta or {})
        meta.setdefault("created_wallclock", time.time())
        meta.setdefault("tags", [])
        version = len(self._entries.get(name, [])) + 1
        entry = SkillEntry(name, version, kind, payload, meta)
        self._append_record({"op": "put", **entry.to_doc()})
        self._entries.setdefault(name, []).append(entry)
        self._puts_since_compact += 1
        if self._root is not None and self._puts_since_compact >= self._compact_every:
            self.compact()
        return version

    def get(self, name: str, version: int | None = None) -> SkillEntry:
        versions = self._entries.get(name)
        if not versions:
            raise UnknownSkill(f"no skill named {name!r}")
        if version is None:
            return versions[-1]  # late binding: latest at this instant
        if not 1 <= version <= len(versions):
            raise UnknownVersion(f"{name!r} has no version {version}")
        return versions[version - 1]

    def list(self, tag: str | None = None, kind=None) -> list[SkillEntry]:
        kind = SkillKind(kind) if kind is not None else None
        out = []
        for versions in self._entries.values():
            entry = versions[-1]
            if kind is not None and entry.kind is not kind:
                continue
            if tag is not None and tag not in entry.meta.get("tags", []):
                continue
            out.append(entry)
        return sorted(out, key=lambda e: e.name)

    def history(self, name: str) -> list[SkillEntry]:
        versions = self._entries.get(name)
        if not versions:
            raise UnknownSkill(f"no skill named {name!r}")
        return list(versions)

    def delete(self, name: str):
        if name not in self._entries:
            raise UnknownSkill(f"no skill named {name!r}")
        if name in self._in_use():
            raise SkillInUse(f"skill {name!r} referenced by a loaded sequence")
        self._append_record({"op": "delete", "name": name})
        del self._entries[name]

    def set_in_use_check(self, fn: Callable[[], set]):
        """Install the loaded-sequence reference check used by delete()."""
        self._in_use = fn

    def names(self) -> list[str]:
        return sorted(self._entries)

    def close(self):
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- persistence --------------------------------------------------------

    def _append_record(self, record: dict):
        if self._root is None:
            return
        data = json.dumps(record, separators=(",", ":")).encode() + b"\n"
        self._log_fh.write(data)
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def compact(self):
        """Fold the log into the snapshot; atomic via rename."""
        if self._root is None:
            return
        tmp = self._root / (self.SNAPSHOT + ".tmp")
        with open(tmp, "wb") as fh:
            for versions in self._entries.values():
                for entry in versions:
                    fh.write(json.dumps({"op": "put", **entry.to_doc()},
                                        separators=(",", ":")).encode() + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._root / self.SNAPSHOT)
        # truncate the log only after the snapshot is durable
        self._log_fh.close()
        self._log_fh = open(self._root / self.LOG, "wb")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())
        self._puts_since_compact = 0

    def _replay_disk(self):
        for fname, tolerate_torn in ((self.SNAPSHOT, False), (self.LOG, True)):
            path = self._root / fname
            if not path.exists():
                continue
            with open(path, "rb") as fh:
                for raw in fh:
                    if not raw.strip():
                        continue
                    try:
                        record = json.loads(raw)
                    except json.JSONDecodeError:
                        if tolerate_torn:
                            break  # torn tail from a crash mid-write
                        raise
                    self._apply_record(record)

    def _apply_record(self, record: dict):
        op = record.get("op")
        if op == "put":
            kind = SkillKind(record["kind"])
            entry = SkillEntry(record["name"], int(record["version"]), kind,
                               _payload_from_doc(kind, record["payload"]),
                               dict(record.get("meta", {})))
            versions = self._entries.setdefault(entry.name, [])
            if entry.version != len(versions) + 1:
                raise InvalidPayload(
                    f"corrupt store: {entry.name} v{entry.version} after {len(versions)}")
            versions.append(entry)
        elif op == "delete":
            self._entries.pop(record["name"], None)
        else:
            raise InvalidPayload(f"corrupt store: unknown op {op!r}")
