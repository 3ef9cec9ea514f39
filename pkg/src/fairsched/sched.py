"""Per-frame slot schedulers: EHFS and the FCFS / Low-Energy / High-PRR baselines.

Every scheduler is a pure function of a frame-start snapshot. Slots are
filled greedily along a priority order, each node receiving as many
consecutive slots as its payload, its energy headroom and (for EHFS phase
one) its fairness target allow. Ties are broken by ascending node id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (FAIR_TOL, EnergyConstants, FrameSchedule, NodeState,
                    ProtocolState)

AD, NA, ND = int(ProtocolState.AD), int(ProtocolState.NA), int(ProtocolState.ND)
_SLOT_TOL = 1e-9
_MAX_SLOTS = 2.0 ** 53


@dataclass
class SchedulerInput:
    """Frame-start snapshot handed to a scheduler (one entry per node).

    ``participant`` marks nodes that paid for the access period this frame;
    only they can be granted slots. ``strict_payload`` forbids a slot whose
    expected delivery would overshoot the payload (expected-value mode).
    """

    frame_index: int
    ids: np.ndarray
    energy: np.ndarray
    prr: np.ndarray
    delivered: np.ndarray
    payload: np.ndarray
    state: np.ndarray
    slots_available: int
    kappa: float
    constants: EnergyConstants = field(default_factory=EnergyConstants)
    arrival: np.ndarray | None = None
    arrived: np.ndarray | None = None
    participant: np.ndarray | None = None
    strict_payload: bool = True

    def __post_init__(self):
        n = len(self.ids)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        for name in ("energy", "prr", "delivered", "payload"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.state = np.asarray(self.state, dtype=np.int8)
        if self.arrival is None:
            self.arrival = np.ones(n, dtype=np.int64)
        if self.arrived is None:
            self.arrived = np.asarray(self.arrival) <= self.frame_index
        if self.participant is None:
            # snapshot is taken after the access-period charge
            self.participant = self.arrived & (self.state == AD) & (
                self.energy >= self.constants.e_td)
        for name in ("energy", "prr", "delivered", "payload", "state", "arrival",
                     "arrived", "participant"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if np.any((self.prr < 0) | (self.prr > 1)):
            raise ValueError("prr must lie in [0, 1]")
        if self.slots_available < 0:
            raise ValueError("slots_available must be non-negative")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")

    @classmethod
    def from_nodes(cls, frame_index: int, nodes: Sequence[NodeState], slots: int,
                   kappa: float, constants: EnergyConstants | None = None,
                   strict_payload: bool = True) -> "SchedulerInput":
        constants = constants or EnergyConstants()
        arrival = np.array([n.arrival_frame for n in nodes], dtype=np.int64)
        state = np.array([int(n.protocol_state) for n in nodes], dtype=np.int8)
        energy = np.array([n.energy for n in nodes], dtype=float)
        arrived = arrival <= frame_index
        return cls(
            frame_index=frame_index,
            ids=np.array([n.id for n in nodes]),
            energy=energy,
            prr=np.array([n.prr for n in nodes]),
            delivered=np.array([n.delivered for n in nodes]),
            payload=np.array([n.payload_total for n in nodes], dtype=float),
            state=state,
            slots_available=slots,
            kappa=kappa,
            constants=constants,
            arrival=arrival,
            arrived=arrived,
            participant=arrived & (state == AD) & (energy >= constants.e_td),
            strict_payload=strict_payload,
        )

    def live(self) -> np.ndarray:
        return self.arrived & (self.state != ND)

    def fair(self) -> np.ndarray:
        return self.delivered >= self.kappa * self.payload - FAIR_TOL

    def candidates(self) -> np.ndarray:
        return self.participant & (self.state == AD) & (self.prr > 0)


def eta(prr, energy):
    """Scheduling priority q / E: good links and low reserves go first."""
    e = np.asarray(energy, dtype=float)
    if np.any(e <= 0):
        raise ValueError("eta is undefined for non-positive energy")
    out = np.asarray(prr, dtype=float) / e
    return float(out) if out.ndim == 0 else out


def payload_slots(remaining, q, strict: bool = True) -> np.ndarray:
    """Slots a node may still use before its payload is exhausted.

    ``strict`` keeps expected delivery at or below the payload; otherwise the
    count covers the payload in expectation (a last partial slot is allowed).
    """
    remaining = np.asarray(remaining, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(q > 0, remaining / np.where(q > 0, q, 1.0), 0.0)
    ratio = np.minimum(ratio, _MAX_SLOTS)  # near-zero q would overflow int64
    if strict:
        k = np.floor(ratio + _SLOT_TOL)
    else:
        k = np.ceil(ratio - _SLOT_TOL)
    k = np.where(remaining > FAIR_TOL, k, 0.0)
    return np.maximum(k, 0).astype(np.int64)


def energy_slots(energy, constants: EnergyConstants) -> np.ndarray:
    """Packets affordable without dropping below the death threshold."""
    head = (np.asarray(energy, dtype=float) - constants.e_td) / constants.e_tx
    return np.maximum(np.floor(head + _SLOT_TOL), 0).astype(np.int64)


def fairness_slots(inp: SchedulerInput) -> np.ndarray:
    gap = inp.kappa * inp.payload - inp.delivered
    return payload_slots(gap, inp.prr, strict=False)


def fill(order: np.ndarray, caps: np.ndarray, n_slots: int) -> list:
    """Walk ``order`` granting each node up to ``caps[node]`` of the remaining slots.

    Returns ``[(index, k), ...]`` with k > 0, in grant order.
    """
    if n_slots <= 0 or len(order) == 0:
        return []
    c = caps[order]
    before = np.cumsum(c) - c
    k = np.clip(n_slots - before, 0, c)
    keep = k > 0
    return list(zip(order[keep].tolist(), k[keep].tolist()))


def _merge(runs: list) -> list:
    totals: dict = {}
    for idx, k in runs:
        totals[idx] = totals.get(idx, 0) + k
    return list(totals.items())


class Scheduler:
    """Base class. Subclasses define ``priority`` (an index order over candidates)."""

    name = "base"

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"

    def get_params(self) -> dict:
        return {}

    def priority(self, inp: SchedulerInput, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def schedule(self, inp: SchedulerInput) -> FrameSchedule:
        idx = np.flatnonzero(inp.candidates())
        order = self.priority(inp, idx)
        caps = np.minimum(
            payload_slots(inp.payload - inp.delivered, inp.prr, inp.strict_payload),
            energy_slots(inp.energy, inp.constants))
        runs = fill(order, caps, inp.slots_available)
        return self._to_schedule(inp, runs)

    def rest_states(self, state: np.ndarray, live: np.ndarray, fair: np.ndarray) -> np.ndarray:
        """AD/NA assignment for live nodes after a frame. Baselines never rest."""
        out = state.copy()
        out[live & (state != ND)] = AD
        return out

    @staticmethod
    def _to_schedule(inp: SchedulerInput, runs: list) -> FrameSchedule:
        grants = tuple((int(inp.ids[i]), int(k)) for i, k in runs)
        return FrameSchedule(inp.frame_index, inp.slots_available, grants)


def _stable(idx: np.ndarray, ids: np.ndarray, key: np.ndarray) -> np.ndarray:
    # ascending key, then ascending id
    return idx[np.lexsort((ids[idx], key[idx]))]


class EHFS(Scheduler):
    """Two-phase fair scheduler keyed on q / E.

    Phase one runs while some live node is below its fairness target: only
    unfair nodes compete, each served in descending q / E order until it
    reaches kappa * payload, and fair nodes rest in NA. Once every live node
    is fair all of them return to AD and are served in q / E order until
    their payload or energy runs out. The priority order is fixed at frame
    start.
    """

    name = "ehfs"

    def priority(self, inp, idx):
        return self._order(inp, idx)

    @staticmethod
    def _order(inp, idx):
        key = np.zeros(len(inp.ids))
        if len(idx):
            key[idx] = -(inp.prr[idx] / inp.energy[idx])
        return _stable(idx, inp.ids, key)

    def schedule(self, inp: SchedulerInput) -> FrameSchedule:
        idx = np.flatnonzero(inp.candidates())
        order = self._order(inp, idx)
        q = inp.prr
        e_caps = energy_slots(inp.energy, inp.constants)
        p_caps = payload_slots(inp.payload - inp.delivered, q, inp.strict_payload)
        fair = inp.fair()
        live = inp.live()
        if not np.any(live & ~fair):
            runs = fill(order, np.minimum(p_caps, e_caps), inp.slots_available)
            return self._to_schedule(inp, runs)

        unfair_order = order[~fair[order]]
        caps1 = np.minimum(np.minimum(fairness_slots(inp), p_caps), e_caps)
        runs = fill(unfair_order, caps1, inp.slots_available)
        left = inp.slots_available - sum(k for _, k in runs)

        if left > 0:
            # phase two may start mid-frame once every live node is fair in expectation
            granted = np.zeros(len(inp.ids), dtype=np.int64)
            for i, k in runs:
                granted[i] = k
            delivered = inp.delivered + granted * q
            if np.all(delivered[live] >= inp.kappa * inp.payload[live] - FAIR_TOL):
                caps2 = np.minimum(p_caps - granted, e_caps - granted)
                runs = _merge(runs + fill(order, np.maximum(caps2, 0), left))
        return self._to_schedule(inp, runs)

    def rest_states(self, state, live, fair):
        out = state.copy()
        active = live & (state != ND)
        if np.any(active & ~fair):
            out[active & fair] = NA
            out[active & ~fair] = AD
        else:
            out[active] = AD
        return out


class FCFS(Scheduler):
    """Batch processing: arrival order, head of line keeps the channel until done."""

    name = "fcfs"

    def priority(self, inp, idx):
        return _stable(idx, inp.ids, inp.arrival.astype(float))


class LowEnergy(Scheduler):
    name = "le"

    def priority(self, inp, idx):
        return _stable(idx, inp.ids, inp.energy)


class HighPRR(Scheduler):
    name = "hp"

    def priority(self, inp, idx):
        return _stable(idx, inp.ids, -inp.prr)


SCHEDULERS = {cls.name: cls for cls in (EHFS, FCFS, LowEnergy, HighPRR)}


def get_scheduler(name: str) -> Scheduler:
    try:
        return SCHEDULERS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}; choose from {sorted(SCHEDULERS)}") from None


def settle_states(scheduler: Scheduler, inp: SchedulerInput, delivered: np.ndarray,
                  complete: np.ndarray) -> np.ndarray:
    """Protocol states after a frame given the realized deliveries.

    Finished nodes go to ND; the scheduler decides AD/NA for the rest.
    """
    state = inp.state.copy()
    live = inp.arrived & (state != ND)
    state[live & complete] = ND
    live &= ~complete
    fair = delivered >= inp.kappa * inp.payload - FAIR_TOL
    return scheduler.rest_states(state, live, fair)


def _expected_outcome(inp: SchedulerInput, sched: FrameSchedule):
    granted = np.zeros(len(inp.ids), dtype=np.int64)
    pos = {int(i): k for k, i in enumerate(inp.ids)}
    for node, k in sched.grants:
        granted[pos[node]] = k
    delivered = np.minimum(inp.delivered + granted * inp.prr, inp.payload)
    remaining = inp.payload - delivered
    complete = payload_slots(remaining, inp.prr, inp.strict_payload) == 0
    complete &= (remaining <= FAIR_TOL) | (inp.prr > 0)
    return delivered, complete


def run_frame(scheduler: Scheduler, inp: SchedulerInput) -> tuple:
    """Schedule one frame and project the protocol states under expected delivery."""
    sched = scheduler.schedule(inp)
    delivered, complete = _expected_outcome(inp, sched)
    return sched, settle_states(scheduler, inp, delivered, complete)


def ehfs_frame(inp: SchedulerInput) -> tuple:
    return run_frame(EHFS(), inp)


def fcfs_frame(inp: SchedulerInput) -> FrameSchedule:
    return FCFS().schedule(inp)


def le_frame(inp: SchedulerInput) -> FrameSchedule:
    return LowEnergy().schedule(inp)


def hp_frame(inp: SchedulerInput) -> FrameSchedule:
    return HighPRR().schedule(inp)
