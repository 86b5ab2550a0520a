"""Persistent session transcripts.

The public file is JSON Lines: a ``config`` record, one ``frame`` record per
message in the order Alice saw them, then ``counters``, ``digests`` and
``status`` records.  Ground truth lives in a sidecar ``<name>.oracle.json`` so
public-view analyses never touch it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..postprocessing.keys import KeyMaterial, bits_to_hex
from .wire import LoggedFrame, decode_payload, frame_decode


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, sort_keys=True)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".oracle.json")


def _key_record(key) -> dict:
    if isinstance(key, KeyMaterial):
        return key.to_record()
    return {"role": getattr(key, "role", "sifted"), "bits": bits_to_hex(key.bits)}


@dataclass
class SessionTranscript:
    config: dict
    messages: list[LoggedFrame] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    digests: dict = field(default_factory=dict)
    status: str = "ok"
    reason: str | None = None
    keys: dict[str, Any] = field(default_factory=dict)  # oracle view
    oracle: dict = field(default_factory=dict)
    run: Any = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.messages)

    def frames(self, direction: str | None = None) -> list[bytes]:
        return [m.frame for m in self.messages if direction is None or m.direction == direction]

    def public_records(self) -> list[dict]:
        out = [{"record": "config", "config": self.config}]
        for i, m in enumerate(self.messages):
            msg = frame_decode(m.frame)
            out.append(
                {"record": "frame", "n": i, "dir": m.direction, "type": msg.msg_type.name, "hex": m.frame.hex()}
            )
        out.append({"record": "counters", "counters": self.counters})
        out.append({"record": "digests", "digests": self.digests})
        out.append({"record": "status", "status": self.status, "reason": self.reason})
        return out

    def save(self, path: str | Path) -> tuple[Path, Path]:
        path = Path(path)
        path.write_text("".join(dumps(r) + "\n" for r in self.public_records()))
        side = sidecar_path(path)
        side.write_text(
            dumps({"oracle": self.oracle, "keys": {k: _key_record(v) for k, v in self.keys.items()}}) + "\n"
        )
        return path, side

    @classmethod
    def load(cls, path: str | Path, with_oracle: bool = True) -> "SessionTranscript":
        path = Path(path)
        t = cls(config={})
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.get("record")
            if kind == "config":
                t.config = rec["config"]
            elif kind == "frame":
                frame = bytes.fromhex(rec["hex"])
                t.messages.append(LoggedFrame(rec["dir"], frame))
            elif kind == "counters":
                t.counters = rec["counters"]
            elif kind == "digests":
                t.digests = rec["digests"]
            elif kind == "status":
                t.status, t.reason = rec["status"], rec.get("reason")
        side = sidecar_path(path)
        if with_oracle and side.exists():
            data = json.loads(side.read_text())
            t.oracle = data.get("oracle", {})
            t.keys = {k: v for k, v in data.get("keys", {}).items()}
        return t

    def decoded(self) -> list[tuple[str, str, dict]]:
        """``(direction, type name, fields)`` for every frame; raises on malformed frames."""
        out = []
        for m in self.messages:
            msg = frame_decode(m.frame)
            out.append((m.direction, msg.msg_type.name, decode_payload(msg.msg_type, msg.payload)))
        return out
