"""Domain types and constants shared across the package.

Energies are in joules, powers in watts, times in seconds unless a name
says otherwise. Node ids are 1-based integers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

NodeId = int

PACKET_BYTES = 32
CONTROL_PACKET_BYTES = 10  # Hello, HACK and SACK share this length
FAIR_TOL = 1e-9


class ProtocolState(enum.IntEnum):
    """Per-node protocol state.

    AD: competes in the access period and may transmit.
    NA: fair and resting; skips the access period.
    ND: finished or out of energy; radio off for the rest of the run.
    """

    AD = 0
    NA = 1
    ND = 2


_ALLOWED_TRANSITIONS = {
    (ProtocolState.AD, ProtocolState.NA),
    (ProtocolState.NA, ProtocolState.AD),
    (ProtocolState.AD, ProtocolState.ND),
    (ProtocolState.NA, ProtocolState.ND),
}


def transition_allowed(old: ProtocolState, new: ProtocolState) -> bool:
    return old == new or (ProtocolState(old), ProtocolState(new)) in _ALLOWED_TRANSITIONS


@dataclass(frozen=True)
class EnergyConstants:
    """Per-event energy costs and radio figures.

    Defaults are the CC2420 figures at 3 V: 0.03 mJ per Hello sent,
    0.01 mJ per HACK/SACK received, 0.1 mJ per 32-byte data packet and a
    1.67 mJ death threshold.
    """

    e_tx_hello: float = 0.03e-3
    e_rx_hack: float = 0.01e-3
    e_rx_sack: float = 0.01e-3
    e_tx: float = 0.1e-3
    e_td: float = 1.67e-3
    v_cc: float = 3.0
    i_tx: float = 35e-3
    i_rx: float = 15e-3
    r_b: float = 250e3

    def __post_init__(self):
        for name in ("e_tx_hello", "e_rx_hack", "e_rx_sack", "e_tx", "e_td",
                     "v_cc", "i_tx", "i_rx", "r_b"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def e_rcap(self) -> float:
        return rcap_cost(self)

    @classmethod
    def from_radio(cls, v_cc: float = 3.0, i_tx: float = 35e-3, i_rx: float = 15e-3,
                   r_b: float = 250e3, e_td: float = 1.67e-3) -> "EnergyConstants":
        """Derive the per-packet costs from supply voltage, currents and bit rate."""
        ctrl_bits = CONTROL_PACKET_BYTES * 8
        return cls(
            e_tx_hello=packet_energy(v_cc, i_tx, ctrl_bits, r_b),
            e_rx_hack=packet_energy(v_cc, i_rx, ctrl_bits, r_b),
            e_rx_sack=packet_energy(v_cc, i_rx, ctrl_bits, r_b),
            e_tx=packet_energy(v_cc, i_tx, PACKET_BYTES * 8, r_b),
            e_td=e_td, v_cc=v_cc, i_tx=i_tx, i_rx=i_rx, r_b=r_b,
        )

    def packet_airtime(self) -> float:
        return PACKET_BYTES * 8 / self.r_b

    def rcap_airtime(self) -> float:
        return 3 * CONTROL_PACKET_BYTES * 8 / self.r_b


@dataclass(frozen=True)
class FairnessConfig:
    kappa: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa!r}")

    def target(self, payload: float) -> float:
        return self.kappa * payload


@dataclass
class NodeState:
    """One sensor node as seen at a frame boundary."""

    id: NodeId
    payload_total: int
    energy: float
    energy_initial: float
    prr: float = 1.0
    delivered: float = 0.0
    protocol_state: ProtocolState = ProtocolState.AD
    rcap_participant: bool = False
    arrival_frame: int = 1

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"node id must be >= 1, got {self.id}")
        if self.payload_total < 0:
            raise ValueError("payload_total must be non-negative")
        if not 0.0 <= self.prr <= 1.0:
            raise ValueError(f"prr must lie in [0, 1], got {self.prr!r}")
        if not -FAIR_TOL <= self.delivered <= self.payload_total + FAIR_TOL:
            raise ValueError(
                f"delivered={self.delivered!r} outside [0, {self.payload_total}]")
        self.protocol_state = ProtocolState(self.protocol_state)
        if self.rcap_participant and self.protocol_state != ProtocolState.AD:
            raise ValueError("only AD nodes take part in the access period")

    def is_fair(self, kappa: float) -> bool:
        return self.delivered >= kappa * self.payload_total - FAIR_TOL

    def with_state(self, new: ProtocolState) -> "NodeState":
        if not transition_allowed(self.protocol_state, new):
            raise ValueError(f"illegal transition {self.protocol_state.name} -> {ProtocolState(new).name}")
        participant = self.rcap_participant and new == ProtocolState.AD
        return replace(self, protocol_state=ProtocolState(new), rcap_participant=participant)


@dataclass(frozen=True)
class FrameSchedule:
    """Slot assignment for one super frame.

    Stored as ordered runs ``(node_id, n_slots)``; ``slots`` expands them to
    the per-slot list with ``None`` for idle slots.
    """

    frame_index: int
    n_slots: int
    grants: tuple = ()

    def __post_init__(self):
        used = 0
        seen = set()
        for node, k in self.grants:
            if k <= 0:
                raise ValueError(f"grant for node {node} has non-positive length {k}")
            if node in seen:
                raise ValueError(f"node {node} holds two separate runs")
            seen.add(node)
            used += k
        if used > self.n_slots:
            raise ValueError(f"{used} slots granted but only {self.n_slots} exist")

    @property
    def slots(self) -> list:
        out: list = []
        for node, k in self.grants:
            out.extend([node] * k)
        out.extend([None] * (self.n_slots - len(out)))
        return out

    @property
    def used(self) -> int:
        return sum(k for _, k in self.grants)

    def count(self, node: NodeId) -> int:
        for n, k in self.grants:
            if n == node:
                return k
        return 0

    def order(self) -> list:
        return [n for n, _ in self.grants]

    @classmethod
    def from_slots(cls, frame_index: int, slots: Sequence[Optional[NodeId]]) -> "FrameSchedule":
        """Build from an explicit slot list; a node's slots must be contiguous."""
        grants: list = []
        for s in slots:
            if s is None:
                continue
            if grants and grants[-1][0] == s:
                grants[-1][1] += 1
            else:
                grants.append([s, 1])
        return cls(frame_index, len(slots), tuple((n, k) for n, k in grants))


@dataclass
class RunMetrics:
    total_received: float = 0.0
    fair_nodes: int = 0
    dead_nodes: int = 0
    per_frame: dict = field(default_factory=lambda: {
        "frame": [], "gamma": [], "harvested": [], "live_nodes": [],
        "fair_nodes": [], "dead_nodes": [],
    })

    def check(self, n: int) -> None:
        if not 0 <= self.fair_nodes <= n:
            raise ValueError("fair_nodes out of range")
        if not 0 <= self.dead_nodes <= n:
            raise ValueError("dead_nodes out of range")
        if not math.isclose(math.fsum(self.per_frame["gamma"]), self.total_received,
                            rel_tol=1e-12, abs_tol=1e-9):
            raise ValueError("total_received does not match the per-frame series")


def rcap_cost(constants: EnergyConstants) -> float:
    """Energy one node spends in the access period: Hello + HACK + SACK."""
    return constants.e_tx_hello + constants.e_rx_hack + constants.e_rx_sack


def packet_energy(v_cc: float, i: float, bits: float, r_b: float) -> float:
    """Energy to send or receive ``bits`` at rate ``r_b`` drawing current ``i``."""
    if r_b <= 0:
        raise ValueError(f"bit rate must be positive, got {r_b!r}")
    return v_cc * i * bits / r_b


def payload_packets(payload_bytes: int) -> int:
    """Number of 32-byte data packets needed for a payload."""
    return -(-int(payload_bytes) // PACKET_BYTES)
