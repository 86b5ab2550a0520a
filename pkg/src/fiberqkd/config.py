"""Run configuration: one JSON document with CLI overrides.

Schema (every key optional; defaults reproduce the 48 km experiment)::

    {
      "protocol": "b92" | "bb84",
      "pulses": int,                  # or "duration_s": float
      "source":   {"mu_central", "pulse_rate", "pulse_width", "single_photon"},
      "channel":  {"length_km", "attenuation_db_per_km", "extra_loss_db"},
      "detector": {"efficiency", "gate_width", "dark_rate_override", "intrinsic_visibility"},
      "optics":   {"interferometer", "long_arm_transmission", "u_port"},
      "attack":   {"kind", "fraction", "resend_multiplicity"},
      "seeds":    {"alice", "bob", "eve", "channel", "auth"},
      "postprocessing": {"block_rows", "block_cols", "max_passes", "verify_count",
                         "ber_threshold", "security_margin", "encrypt_parities",
                         "initial_pool_bits", "refill_bits"},
      "run":      {"batch_size", "timeout"},
      "output":   {"transcript", "report"}
    }
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import secrets
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import AttackModel
from .encoding import ProtocolKind
from .optics import ChannelConfig, DetectorConfig, OpticsConfig, Port, SourceConfig
from .protocol import DEFAULT_BATCH, Seeds

DEFAULT_PULSES = 60_000_000  # 600 s at 100 kHz


class ConfigError(ValueError):
    pass


@dataclass
class PostConfig:
    block_rows: int = 8
    block_cols: int = 8
    max_passes: int = 10
    verify_count: int = 32
    ber_threshold: float = 0.15
    security_margin: int = 64
    encrypt_parities: bool = False
    initial_pool_bits: int = 1 << 14
    refill_bits: int | None = None  # None: refill exactly what the session consumed

    def __post_init__(self):
        if not 0.0 < self.ber_threshold < 0.5:
            raise ConfigError("ber_threshold must lie in (0, 0.5)")
        if self.block_rows < 2 or self.block_cols < 2:
            raise ConfigError("block dimensions must be at least 2")
        if self.max_passes < 1 or self.verify_count < 1:
            raise ConfigError("max_passes and verify_count must be positive")
        if self.security_margin < 0 or self.initial_pool_bits < 0:
            raise ConfigError("security_margin and initial_pool_bits must be non-negative")

    @property
    def block_dims(self) -> tuple[int, int]:
        return (self.block_rows, self.block_cols)


@dataclass
class RunConfig:
    kind: ProtocolKind = ProtocolKind.B92
    n_pulses: int = DEFAULT_PULSES
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    attack: AttackModel = field(default_factory=AttackModel)
    seeds: Seeds = field(default_factory=Seeds)
    post: PostConfig = field(default_factory=PostConfig)
    batch_size: int = DEFAULT_BATCH
    timeout: float = 30.0
    transcript_path: str | None = None
    report_path: str | None = None

    def __post_init__(self):
        self.kind = ProtocolKind(self.kind)
        if self.n_pulses < 0:
            raise ConfigError("pulses must be non-negative")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.attack.kind.value == "intercept-bob" and self.kind != ProtocolKind.B92:
            raise ConfigError("the Bob's-basis attack applies to B92 only")

    @property
    def session_id(self) -> int:
        return int(self.seeds.auth) & ((1 << 64) - 1)

    @property
    def duration_s(self) -> float:
        return self.n_pulses / self.optics.source.pulse_rate

    # ------------------------------------------------------------ serialisation

    def to_dict(self) -> dict:
        o = self.optics
        return {
            "protocol": self.kind.value,
            "pulses": self.n_pulses,
            "source": dataclasses.asdict(o.source),
            "channel": dataclasses.asdict(o.channel),
            "detector": dataclasses.asdict(o.detector),
            "optics": {
                "interferometer": o.interferometer,
                "long_arm_transmission": o.long_arm_transmission,
                "u_port": Port(o.u_port).name.lower(),
            },
            "attack": {
                "kind": self.attack.kind.value,
                "fraction": self.attack.fraction,
                "resend_multiplicity": self.attack.resend_multiplicity,
            },
            "seeds": dataclasses.asdict(self.seeds),
            "postprocessing": dataclasses.asdict(self.post),
            "run": {"batch_size": self.batch_size, "timeout": self.timeout},
            "output": {"transcript": self.transcript_path, "report": self.report_path},
        }

    def public_digest(self) -> bytes:
        """Digest of everything both parties must agree on; seeds and paths excluded."""
        d = self.to_dict()
        for private in ("seeds", "output", "run"):
            d.pop(private)
        d["attack"] = None  # Eve's choices are not negotiated
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).digest()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {"protocol", "pulses", "duration_s", "source", "channel", "detector", "optics", "attack",
                 "seeds", "postprocessing", "run", "output"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def section(name, ctor, **extra):
            body = dict(data.get(name) or {})
            body.update(extra)
            try:
                return ctor(**body)
            except TypeError as exc:
                raise ConfigError(f"bad [{name}] section: {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"bad [{name}] section: {exc}") from None

        source = section("source", SourceConfig)
        optics_body = dict(data.get("optics") or {})
        if "u_port" in optics_body:
            try:
                optics_body["u_port"] = Port[str(optics_body["u_port"]).upper()]
            except KeyError:
                raise ConfigError(f"u_port must be constructive or destructive") from None
        try:
            optics = OpticsConfig(
                source=source,
                channel=section("channel", ChannelConfig),
                detector=section("detector", DetectorConfig),
                **optics_body,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [optics] section: {exc}") from None

        pulses = data.get("pulses")
        duration = data.get("duration_s")
        if duration is not None:
            from_duration = int(round(duration * source.pulse_rate))
            if pulses is not None and int(pulses) != from_duration:
                raise ConfigError("pulses and duration_s disagree at the configured pulse rate")
            pulses = from_duration
        run = dict(data.get("run") or {})
        out = dict(data.get("output") or {})
        try:
            return cls(
                kind=ProtocolKind(data.get("protocol", "b92")),
                n_pulses=DEFAULT_PULSES if pulses is None else int(pulses),
                optics=optics,
                attack=section("attack", AttackModel),
                seeds=section("seeds", Seeds),
                post=section("postprocessing", PostConfig),
                batch_size=int(run.get("batch_size", DEFAULT_BATCH)),
                timeout=float(run.get("timeout", 30.0)),
                transcript_path=out.get("transcript"),
                report_path=out.get("report"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def entropy_seeds() -> Seeds:
    """Fresh seeds from OS entropy (echoed in reports so runs can be repeated)."""
    return Seeds(*(secrets.randbits(63) for _ in range(5)))


def apply_overrides(data: dict, overrides: dict[str, object]) -> dict:
    """Set dotted keys, e.g. ``{"detector.efficiency": 0.2}``."""
    data = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        parts = dotted.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return data
