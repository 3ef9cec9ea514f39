"""Run configuration types.

A ``RunConfig`` is a tree of small dataclasses. ``to_dict`` gives the
fully-resolved document that every run echoes into its output, and
``RunConfig.from_dict`` is the strict inverse used by ``io.parse_config``.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .channel import DEFAULT_RSSI_TABLE, SPEED_OF_LIGHT
from .model import EnergyConstants, payload_packets

SCENARIO_KINDS = ("NOP", "NAP")
RECEPTION_MODES = ("expected", "bernoulli")
CHANNEL_MODES = ("analytic", "trace")
SOLAR_SOURCES = ("synthetic", "trace", "none")
DEFAULT_PAYLOAD_BYTES = {"NOP": 80_000, "NAP": 300_000}


class ConfigError(ValueError):
    """Base class for configuration diagnostics. ``key`` is the dotted path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class UnknownKeyError(ConfigError):
    pass


class MissingFieldError(ConfigError):
    pass


class TypeMismatchError(ConfigError):
    pass


class InvalidValueError(ConfigError):
    pass


@dataclass
class ScenarioConfig:
    kind: str = "NOP"
    n: int = 10
    payload_bytes: Optional[int] = None
    arrival_rate: Optional[float] = None
    max_frames: int = 1_000_000
    reception_mode: str = "expected"
    seed: int = 0
    slots_per_frame: int = 100
    e0_mean: float = 50.0
    e0_std: float = 5.0

    REQUIRED = ("kind", "n")

    def validate(self, prefix: str = "scenario") -> None:
        if self.kind not in SCENARIO_KINDS:
            raise InvalidValueError(f"{prefix}.kind", f"must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise InvalidValueError(f"{prefix}.n", "must be >= 1")
        if self.kind == "NAP" and (self.arrival_rate is None):
            raise MissingFieldError(f"{prefix}.arrival_rate", "required for NAP scenarios")
        if self.arrival_rate is not None and self.arrival_rate <= 0:
            raise InvalidValueError(f"{prefix}.arrival_rate", "must be > 0")
        if self.payload_bytes is not None and self.payload_bytes < 0:
            raise InvalidValueError(f"{prefix}.payload_bytes", "must be >= 0")
        if self.max_frames < 1:
            raise InvalidValueError(f"{prefix}.max_frames", "must be >= 1")
        if self.reception_mode not in RECEPTION_MODES:
            raise InvalidValueError(f"{prefix}.reception_mode", f"must be one of {RECEPTION_MODES}")
        if self.slots_per_frame < 1:
            raise InvalidValueError(f"{prefix}.slots_per_frame", "must be >= 1")
        if self.e0_mean <= 0 or self.e0_std < 0:
            raise InvalidValueError(f"{prefix}.e0_mean", "e0_mean must be > 0 and e0_std >= 0")

    def resolve(self) -> None:
        if self.payload_bytes is None:
            self.payload_bytes = DEFAULT_PAYLOAD_BYTES[self.kind]

    @property
    def payload_packets(self) -> int:
        return payload_packets(self.payload_bytes if self.payload_bytes is not None
                               else DEFAULT_PAYLOAD_BYTES[self.kind])


@dataclass
class ChannelConfig:
    mode: str = "analytic"
    g_tx: float = 1.0
    g_rx: float = 1.0
    f0: float = 2.4e9
    c: float = SPEED_OF_LIGHT
    k2: float = 2.0
    n0: float = 1e-13
    gamma0: float = 10.0
    p_tx: float = 1e-3
    distance_min_m: float = 1.0
    distance_max_m: float = 300.0
    distances: Optional[list] = None
    trace: Optional[str] = None
    rssi_table: list = field(default_factory=lambda: [list(p) for p in DEFAULT_RSSI_TABLE])

    def validate(self, prefix: str = "channel") -> None:
        if self.mode not in CHANNEL_MODES:
            raise InvalidValueError(f"{prefix}.mode", f"must be one of {CHANNEL_MODES}")
        if self.mode == "trace" and not self.trace:
            raise MissingFieldError(f"{prefix}.trace", "required when mode is 'trace'")
        if self.mode == "analytic" and self.trace:
            raise InvalidValueError(f"{prefix}.trace", "set only when mode is 'trace'")
        if self.trace and not Path(self.trace).is_file():
            raise InvalidValueError(f"{prefix}.trace", f"file not found: {self.trace}")
        if not 0 < self.distance_min_m <= self.distance_max_m:
            raise InvalidValueError(f"{prefix}.distance_min_m", "need 0 < distance_min_m <= distance_max_m")

    def analytic_params(self):
        from .channel import AnalyticChannelParams
        return AnalyticChannelParams(self.g_tx, self.g_rx, self.f0, self.c, self.k2,
                                     self.n0, self.gamma0, self.p_tx)


@dataclass
class WptConfig:
    p_tx: float = 3.0
    delta_d: float = 0.5
    delta_theta: float = 0.5
    gain_sq: float = 1.0
    stochastic_gain: bool = False
    tau_s: Optional[float] = None
    efficiency_table: Optional[str] = None
    distance_m: Optional[float] = None
    orientation_deg: Optional[float] = None

    def validate(self, prefix: str = "energy.wpt") -> None:
        for name in ("delta_d", "delta_theta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidValueError(f"{prefix}.{name}", "must lie in [0, 1]")
        if self.p_tx < 0 or self.gain_sq < 0:
            raise InvalidValueError(f"{prefix}.p_tx", "power and gain must be >= 0")
        if self.tau_s is not None and self.tau_s < 0:
            raise InvalidValueError(f"{prefix}.tau_s", "must be >= 0")
        if self.efficiency_table:
            if not Path(self.efficiency_table).is_file():
                raise InvalidValueError(f"{prefix}.efficiency_table",
                                        f"file not found: {self.efficiency_table}")
            if self.distance_m is None or self.orientation_deg is None:
                raise MissingFieldError(f"{prefix}.distance_m",
                                        "distance_m and orientation_deg are required with an efficiency table")


@dataclass
class SolarConfig:
    source: str = "synthetic"
    peak_mw: float = 1.0
    period_s: float = 86400.0
    start_s: float = 0.0
    tau_s: Optional[float] = None
    trace: Optional[str] = None

    def validate(self, prefix: str = "energy.solar") -> None:
        if self.source not in SOLAR_SOURCES:
            raise InvalidValueError(f"{prefix}.source", f"must be one of {SOLAR_SOURCES}")
        if self.source == "trace":
            if not self.trace:
                raise MissingFieldError(f"{prefix}.trace", "required when source is 'trace'")
            if not Path(self.trace).is_file():
                raise InvalidValueError(f"{prefix}.trace", f"file not found: {self.trace}")
        if self.peak_mw < 0 or self.period_s <= 0:
            raise InvalidValueError(f"{prefix}.peak_mw", "peak_mw must be >= 0 and period_s > 0")
        if self.tau_s is not None and self.tau_s < 0:
            raise InvalidValueError(f"{prefix}.tau_s", "must be >= 0")


@dataclass
class EnergyConfig:
    e_tx_hello: float = 0.03e-3
    e_rx_hack: float = 0.01e-3
    e_rx_sack: float = 0.01e-3
    e_tx: float = 0.1e-3
    e_td: float = 1.67e-3
    v_cc: float = 3.0
    i_tx: float = 35e-3
    i_rx: float = 15e-3
    r_b: float = 250e3
    e_max: float = 50.0
    frame_duration_s: Optional[float] = None
    wpt: WptConfig = field(default_factory=WptConfig)
    solar: SolarConfig = field(default_factory=SolarConfig)

    def constants(self) -> EnergyConstants:
        return EnergyConstants(self.e_tx_hello, self.e_rx_hack, self.e_rx_sack, self.e_tx,
                               self.e_td, self.v_cc, self.i_tx, self.i_rx, self.r_b)

    def validate(self, prefix: str = "energy") -> None:
        try:
            c = self.constants()
        except ValueError as exc:
            raise InvalidValueError(prefix, str(exc)) from None
        if self.e_max <= c.e_td:
            raise InvalidValueError(f"{prefix}.e_max", "must exceed e_td")
        if self.frame_duration_s is not None and self.frame_duration_s <= 0:
            raise InvalidValueError(f"{prefix}.frame_duration_s", "must be > 0")
        self.wpt.validate(f"{prefix}.wpt")
        self.solar.validate(f"{prefix}.solar")


@dataclass
class OutputConfig:
    dir: str = "out"
    prefix: str = "run"


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    scheduler: str = "ehfs"
    kappa: float = 0.5
    output: OutputConfig = field(default_factory=OutputConfig)

    REQUIRED = ("scenario",)

    def validate(self) -> "RunConfig":
        self.scenario.validate()
        self.channel.validate()
        self.energy.validate()
        from .sched import SCHEDULERS
        if self.scheduler not in SCHEDULERS:
            raise InvalidValueError("scheduler", f"must be one of {sorted(SCHEDULERS)}, got {self.scheduler!r}")
        if not 0.0 < self.kappa <= 1.0:
            raise InvalidValueError("kappa", f"must lie in (0, 1], got {self.kappa!r}")
        self.scenario.resolve()
        return self

    def frame_duration(self) -> float:
        if self.energy.frame_duration_s is not None:
            return self.energy.frame_duration_s
        c = self.energy.constants()
        return self.scenario.slots_per_frame * c.packet_airtime() + c.rcap_airtime()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: Any) -> "RunConfig":
        return _build(cls, doc, "")

    def copy(self) -> "RunConfig":
        return RunConfig.from_dict(self.to_dict())


_NESTED = {"scenario": ScenarioConfig, "channel": ChannelConfig, "energy": EnergyConfig,
           "wpt": WptConfig, "solar": SolarConfig, "output": OutputConfig}


def _expected_type(tp) -> tuple:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        out: tuple = ()
        for a in args:
            out += _expected_type(a)
        return out
    if tp is float:
        return (float, int)
    if tp is type(None):
        return (type(None),)
    if origin is list or tp is list:
        return (list,)
    return (tp,)


def _build(cls, doc, prefix: str):
    if not isinstance(doc, dict):
        raise TypeMismatchError(prefix or "<root>", f"expected a mapping, got {type(doc).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    for key in doc:
        if key not in names:
            raise UnknownKeyError(f"{prefix}{key}", "unknown key")
    for key in getattr(cls, "REQUIRED", ()):
        if key not in doc:
            raise MissingFieldError(f"{prefix}{key}", "required field is missing")
    kwargs = {}
    for f in fields(cls):
        if f.name not in doc:
            continue
        value = doc[f.name]
        path = f"{prefix}{f.name}"
        sub = _NESTED.get(f.name)
        if sub is not None and hints[f.name] is sub:
            kwargs[f.name] = _build(sub, value, path + ".")
            continue
        allowed = _expected_type(hints[f.name])
        if isinstance(value, bool) and bool not in allowed:
            raise TypeMismatchError(path, f"expected {_names(allowed)}, got bool")
        if not isinstance(value, allowed):
            raise TypeMismatchError(path, f"expected {_names(allowed)}, got {type(value).__name__}")
        if float in allowed and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[f.name] = value
    return cls(**kwargs)


def _names(types: tuple) -> str:
    return " or ".join(sorted({"null" if t is type(None) else t.__name__ for t in types}))
