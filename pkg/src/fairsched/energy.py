"""Harvesting (WPT + solar) and per-frame energy bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import EnergyConstants, NodeState, rcap_cost

MIN_WPT_DISTANCE_M = 0.2  # testbed radiation-safety floor


@dataclass(frozen=True)
class WptParams:
    p_tx_wpt: float = 3.0
    delta_d: float = 0.5
    delta_theta: float = 0.5
    channel_gain_sq: float = 1.0
    tau_wpt: float = 0.0

    def __post_init__(self):
        for name in ("delta_d", "delta_theta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        for name in ("p_tx_wpt", "channel_gain_sq", "tau_wpt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def wpt_power(p: WptParams) -> float:
    return p.delta_d * p.delta_theta * p.p_tx_wpt * p.channel_gain_sq


def harvested_energy(p: WptParams, solar_power: float, tau_solar: float) -> float:
    return wpt_power(p) * p.tau_wpt + solar_power * tau_solar


@dataclass(frozen=True)
class SolarTrace:
    """Samples ``(node_id, frame, power_mW)``."""

    samples: tuple
    tau_solar: float | None = None

    def __post_init__(self):
        last: dict = {}
        for node, frame, power in self.samples:
            if power < 0:
                raise ValueError(f"negative solar power for node {node} at frame {frame}")
            if frame < last.get(node, -math.inf):
                raise ValueError(f"solar trace frames go backwards for node {node}")
            last[node] = frame

    def node_ids(self) -> list:
        return sorted({s[0] for s in self.samples})


def diurnal_solar_mw(t_seconds, peak_mw: float, period_s: float = 86400.0,
                     phase_s: float = 0.0):
    """Half-sine day cycle: positive half of a sinusoid, zero at night."""
    t = np.asarray(t_seconds, dtype=float)
    return peak_mw * np.maximum(0.0, np.sin(2 * np.pi * (t + phase_s) / period_s))


@dataclass(frozen=True)
class EfficiencyTable:
    distance_curve: tuple  # ((meters, received_mW), ...)
    orientation_curve: tuple  # ((degrees, received_mW), ...)

    def __post_init__(self):
        if not self.distance_curve or not self.orientation_curve:
            raise ValueError("efficiency table needs both a distance and an orientation curve")
        for d, p in self.distance_curve:
            if d < MIN_WPT_DISTANCE_M:
                raise ValueError(f"distance {d} m is below the {MIN_WPT_DISTANCE_M} m floor")
            if p < 0:
                raise ValueError("received power must be non-negative")
        for a, p in self.orientation_curve:
            if not 0.0 <= a < 360.0:
                raise ValueError(f"orientation {a} outside [0, 360)")
            if p < 0:
                raise ValueError("received power must be non-negative")
        for name, curve in (("distance", self.distance_curve), ("orientation", self.orientation_curve)):
            keys = [k for k, _ in curve]
            if any(b <= a for a, b in zip(keys, keys[1:])):
                raise ValueError(f"{name} curve keys must be strictly increasing")
            if max(p for _, p in curve) <= 0:
                raise ValueError(f"{name} curve has no positive reading")


_EFF_FLOOR = 1e-12


def efficiency_from_table(table: EfficiencyTable, d: float, theta: float) -> tuple:
    """Normalized (delta_d, delta_theta) at distance ``d`` and angle ``theta``.

    Each curve is divided by its own maximum and linearly interpolated;
    the orientation curve wraps around at 360 degrees.
    """
    if d < MIN_WPT_DISTANCE_M:
        raise ValueError(f"distance {d} m is below the measured regime ({MIN_WPT_DISTANCE_M} m)")
    dk = np.array([k for k, _ in table.distance_curve], dtype=float)
    dp = np.array([p for _, p in table.distance_curve], dtype=float)
    delta_d = float(np.interp(d, dk, dp / dp.max()))

    ak = np.array([k for k, _ in table.orientation_curve], dtype=float)
    ap = np.array([p for _, p in table.orientation_curve], dtype=float)
    ap = ap / ap.max()
    # close the circle so angles past the last key interpolate back to the first
    ak = np.append(ak, ak[0] + 360.0)
    ap = np.append(ap, ap[0])
    delta_theta = float(np.interp(theta % 360.0, ak, ap, left=ap[0]))
    return (min(1.0, max(_EFF_FLOOR, delta_d)), min(1.0, max(_EFF_FLOOR, delta_theta)))


def apply_frame_energy(node: NodeState, participated_rcap: bool, packets_sent: int,
                       harvest: float, constants: EnergyConstants,
                       e_max: float = 50.0) -> tuple:
    """Return ``(node', floored)`` after one frame of spending and harvesting.

    Harvested energy is added; the result is capped at ``e_max`` and floored
    at zero, with ``floored`` set when the floor was hit.
    """
    spent = (rcap_cost(constants) if participated_rcap else 0.0) + packets_sent * constants.e_tx
    energy = node.energy - spent + harvest
    floored = energy < 0
    energy = min(e_max, max(0.0, energy))
    return replace(node, energy=energy), floored
