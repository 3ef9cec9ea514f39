"""Super-frame simulation engine.

Each frame runs the access period (every AD node pays the fixed access
cost or dies trying), queries the channel once per node, asks the
scheduler for a slot plan, applies the transmissions, adds harvested
energy, settles protocol states and appends one row of metrics.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import truncnorm

from .channel import AnalyticChannel, ChannelSource, RssiPrrTable, TraceChannel
from .config import RunConfig
from .energy import diurnal_solar_mw, efficiency_from_table
from .model import FAIR_TOL, EnergyConstants, FrameSchedule, ProtocolState, RunMetrics
from .sched import (AD, NA, ND, Scheduler, SchedulerInput, get_scheduler,
                    payload_slots, settle_states)

SWEEP_AXES = ("kappa", "n", "delta_d", "delta_theta")


class Harvester:
    """Per-frame harvested energy for every node (joules).

    WPT power is ``delta_d * delta_theta * p_tx * |h|^2`` over ``tau_wpt``
    seconds; solar is either a per-node ``(n, frames)`` table in mW held
    past its end, or a shared diurnal curve.
    """

    def __init__(self, n: int, wpt_power: float = 0.0, tau_wpt: float = 0.0,
                 tau_solar: float = 0.0, solar_table=None, solar_fn=None,
                 frame_duration: float = 0.1, gain_rng=None, table=None):
        self.n = n
        self.wpt_power = wpt_power
        self.tau_wpt = tau_wpt
        self.tau_solar = tau_solar
        self.solar_table = solar_table
        self.solar_fn = solar_fn
        self.frame_duration = frame_duration
        self.gain_rng = gain_rng
        self.table = None if table is None else np.atleast_2d(np.asarray(table, dtype=float))

    def __call__(self, frame: int) -> np.ndarray:
        if self.table is not None:
            col = min(frame, self.table.shape[1]) - 1
            return self.table[:, col]
        wpt = self.wpt_power * self.tau_wpt
        if self.gain_rng is not None:
            out = wpt * self.gain_rng.exponential(1.0, self.n)
        else:
            out = np.full(self.n, wpt)
        if self.solar_table is not None:
            col = min(frame - 1, self.solar_table.shape[1] - 1)
            out = out + self.solar_table[:, col] * 1e-3 * self.tau_solar
        elif self.solar_fn is not None:
            t = (frame - 1) * self.frame_duration
            out = out + float(self.solar_fn(t)) * 1e-3 * self.tau_solar
        return out


class World:
    """Mutable state of one run, stored as per-node arrays (index = id - 1)."""

    def __init__(self, payload, energy0, channel: ChannelSource, harvester: Callable,
                 constants: EnergyConstants, slots_per_frame: int, kappa: float,
                 arrival=None, e_max: float = math.inf, mode: str = "expected",
                 rng: Optional[np.random.Generator] = None):
        n = len(payload)
        self.n = n
        self.ids = np.arange(1, n + 1, dtype=np.int64)
        self.payload = np.asarray(payload, dtype=float)
        self.energy0 = np.asarray(energy0, dtype=float).copy()
        self.energy = self.energy0.copy()
        self.arrival = np.ones(n, dtype=np.int64) if arrival is None else np.asarray(arrival, dtype=np.int64)
        self.channel = channel
        self.harvester = harvester
        self.constants = constants
        self.slots = int(slots_per_frame)
        self.kappa = float(kappa)
        self.e_max = float(e_max)
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(0)

        self.delivered = np.zeros(n)
        self.state = np.full(n, AD, dtype=np.int8)
        self.dead = np.zeros(n, dtype=bool)
        self.participant = np.zeros(n, dtype=bool)
        self.prr = np.zeros(n)
        self.harvested = np.zeros(n)
        self.clamp_loss = np.zeros(n)
        self.rcap_frames = np.zeros(n, dtype=np.int64)
        self.slots_used = np.zeros(n, dtype=np.int64)
        self.fair_frame = np.zeros(n, dtype=np.int64)
        self.end_frame = np.zeros(n, dtype=np.int64)
        self.floored = 0
        self.frame = 0
        self.events: list = []
        self.metrics = RunMetrics()
        self.schedules: list = []
        self.keep_schedules = False
        self._cum_harvest = 0.0

    # -- queries -----------------------------------------------------------
    def arrived(self, frame: Optional[int] = None) -> np.ndarray:
        return self.arrival <= (self.frame if frame is None else frame)

    def fair(self) -> np.ndarray:
        # a node that finished its whole payload is fair whatever kappa is
        done = (self.end_frame > 0) & ~self.dead
        return (self.delivered >= self.kappa * self.payload - FAIR_TOL) | done

    def finished(self) -> bool:
        return bool(self.frame >= self.arrival.max() and np.all(self.state == ND))

    def active(self) -> bool:
        return bool(np.any(self.arrived(self.frame + 1) & (self.state != ND)))

    # -- bookkeeping -------------------------------------------------------
    def _log(self, frame: int, mask: np.ndarray, kind: str) -> None:
        if not mask.any():
            return
        for i in np.flatnonzero(mask):
            self.events.append((frame, int(self.ids[i]), kind))


def step_frame(world: World, scheduler: Scheduler) -> World:
    """Advance ``world`` by one super frame in place and return it."""
    f = world.frame + 1
    c = world.constants
    e_rcap = c.e_rcap
    arrived = world.arrived(f)
    world._log(f, world.arrival == f, "arrive")

    # (1) access period
    ad = arrived & (world.state == AD)
    starving = ad & (world.energy - e_rcap < c.e_td - 1e-12)
    if starving.any():
        world.state[starving] = ND
        world.dead[starving] = True
        world.end_frame[starving] = f
        world._log(f, starving, "dead")
    participant = ad & ~starving
    world.energy[participant] -= e_rcap
    world.rcap_frames[participant] += 1
    world.participant = participant

    # (2) channel, frozen for the frame
    world.prr = np.asarray(world.channel.prr(f), dtype=float)

    # (3) schedule
    strict = world.mode == "expected"
    inp = SchedulerInput(
        frame_index=f, ids=world.ids, energy=world.energy, prr=world.prr,
        delivered=world.delivered, payload=world.payload, state=world.state,
        slots_available=world.slots, kappa=world.kappa, constants=c,
        arrival=world.arrival, arrived=arrived, participant=participant,
        strict_payload=strict)
    plan = scheduler.schedule(inp)
    if world.keep_schedules:
        world.schedules.append(plan)

    # (4) transmissions
    gamma = 0.0
    for node, k in plan.grants:
        i = node - 1
        q = world.prr[i]
        before = world.delivered[i]
        if strict:
            used = k
            after = min(before + k * q, world.payload[i])
        else:
            need = world.payload[i] - before
            hits = np.cumsum(world.rng.random(k) < q)
            if hits.size and hits[-1] >= need:
                used = int(np.searchsorted(hits, need) + 1)
                after = world.payload[i]
            else:
                used = k
                after = before + (hits[-1] if hits.size else 0)
        world.delivered[i] = after
        world.energy[i] -= used * c.e_tx
        world.slots_used[i] += used
        gamma += after - before

    # (5) harvesting; nodes harvest in every state once they have arrived
    h = np.where(arrived, world.harvester(f), 0.0)
    world.energy += h
    world.harvested += h
    world._cum_harvest += float(h.sum())
    over = world.energy > world.e_max
    if over.any():
        world.clamp_loss[over] += world.energy[over] - world.e_max
        world.energy[over] = world.e_max
    under = world.energy < 0
    if under.any():
        world.floored += int(under.sum())
        world.energy[under] = 0.0

    # (6) state transitions
    remaining = world.payload - world.delivered
    if strict:
        complete = (remaining <= FAIR_TOL) | (
            (payload_slots(remaining, world.prr, True) == 0) & (world.prr > 0))
    else:
        complete = remaining <= 0.5
    was_fair = world.fair_frame > 0
    old = world.state.copy()
    inp.state = old
    new = settle_states(scheduler, inp, world.delivered, complete)
    done = (new == ND) & (old != ND)
    world.end_frame[done] = f
    world._log(f, done, "complete")
    world._log(f, (old == AD) & (new == NA), "rest")
    world._log(f, (old == NA) & (new == AD), "resume")
    world.state = new
    now_fair = world.fair() & arrived & ~was_fair
    world.fair_frame[now_fair] = f
    world._log(f, now_fair, "fair")

    # (7) metrics
    pf = world.metrics.per_frame
    pf["frame"].append(f)
    pf["gamma"].append(gamma)
    pf["harvested"].append(world._cum_harvest)
    pf["live_nodes"].append(int(np.sum(arrived & ~world.dead)))
    pf["fair_nodes"].append(int(np.sum(world.fair_frame > 0)))
    pf["dead_nodes"].append(int(world.dead.sum()))
    world.frame = f
    return world


@dataclass
class RunRecord:
    config: dict
    scheduler: str
    metrics: RunMetrics
    events: list = field(default_factory=list)
    nodes: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    config_sources: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "fairsched.run/1",
            "scheduler": self.scheduler,
            "config": self.config,
            "config_sources": self.config_sources,
            "metrics": {
                "total_received": self.metrics.total_received,
                "fair_nodes": self.metrics.fair_nodes,
                "dead_nodes": self.metrics.dead_nodes,
                "per_frame": self.metrics.per_frame,
            },
            "flags": self.flags,
            "nodes": self.nodes,
            "events": [list(e) for e in self.events],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        m = doc["metrics"]
        metrics = RunMetrics(m["total_received"], m["fair_nodes"], m["dead_nodes"],
                             {k: list(v) for k, v in m["per_frame"].items()})
        return cls(config=doc["config"], scheduler=doc["scheduler"], metrics=metrics,
                   events=[tuple(e) for e in doc["events"]], nodes=doc["nodes"],
                   flags=doc["flags"], config_sources=doc.get("config_sources", {}))


def finalize(world: World, scheduler_name: str, config: dict | None = None,
             sources: dict | None = None, max_frames_reached: bool = False) -> RunRecord:
    m = world.metrics
    m.total_received = math.fsum(m.per_frame["gamma"])
    m.fair_nodes = int(np.sum(world.fair_frame > 0))
    m.dead_nodes = int(world.dead.sum())
    nodes = {
        "id": world.ids.tolist(),
        "arrival_frame": world.arrival.tolist(),
        "payload": world.payload.tolist(),
        "delivered": world.delivered.tolist(),
        "energy_initial": world.energy0.tolist(),
        "energy": world.energy.tolist(),
        "harvested": world.harvested.tolist(),
        "rcap_frames": world.rcap_frames.tolist(),
        "slots_used": world.slots_used.tolist(),
        "clamp_loss": world.clamp_loss.tolist(),
        "state": [ProtocolState(s).name for s in world.state],
        "dead": world.dead.tolist(),
        "fair_frame": world.fair_frame.tolist(),
        "end_frame": world.end_frame.tolist(),
    }
    flags = {
        "frames": world.frame,
        "max_frames_reached": bool(max_frames_reached),
        "clamp_events": int(np.count_nonzero(world.clamp_loss)),
        "floor_events": world.floored,
    }
    return RunRecord(config=config or {}, scheduler=scheduler_name, metrics=m,
                     events=world.events, nodes=nodes, flags=flags,
                     config_sources=sources or {})


def build_world(config: RunConfig) -> World:
    """Instantiate nodes, channel and harvester from a validated config."""
    from . import io as fio  # late import: io depends on this module

    sc, ch, en = config.scenario, config.channel, config.energy
    constants = en.constants()
    n = sc.n
    setup, rx, gain = np.random.SeedSequence(sc.seed).spawn(3)
    rng = np.random.default_rng(setup)

    lo, hi = constants.e_td, en.e_max
    if sc.e0_std > 0:
        a, b = (lo - sc.e0_mean) / sc.e0_std, (hi - sc.e0_mean) / sc.e0_std
        e0 = truncnorm.rvs(a, b, loc=sc.e0_mean, scale=sc.e0_std, size=n, random_state=rng)
    else:
        e0 = np.full(n, min(max(sc.e0_mean, lo), hi))

    if ch.distances is not None:
        if len(ch.distances) != n:
            raise ValueError(f"channel.distances lists {len(ch.distances)} nodes, scenario has {n}")
        dist = np.asarray(ch.distances, dtype=float)
    else:
        r0, r1 = ch.distance_min_m, ch.distance_max_m
        dist = np.sqrt(rng.uniform(r0 * r0, r1 * r1, n))  # uniform over the annulus

    if sc.kind == "NAP":
        gaps = rng.exponential(sc.arrival_rate, n - 1)
        arrival = 1 + np.floor(np.concatenate([[0.0], np.cumsum(gaps)])).astype(np.int64)
    else:
        arrival = np.ones(n, dtype=np.int64)

    if ch.mode == "trace":
        channel = TraceChannel(fio.load_rssi_trace(ch.trace), n, RssiPrrTable(ch.rssi_table))
    else:
        channel = AnalyticChannel(ch.analytic_params(), dist)

    duration = config.frame_duration()
    wpt = en.wpt
    d_d, d_t = wpt.delta_d, wpt.delta_theta
    if wpt.efficiency_table:
        d_d, d_t = efficiency_from_table(fio.load_efficiency_table(wpt.efficiency_table),
                                         wpt.distance_m, wpt.orientation_deg)
    solar = en.solar
    solar_table = solar_fn = None
    if solar.source == "trace":
        from .channel import hold_table
        trace = fio.load_solar_trace(solar.trace)
        ids = trace.node_ids()
        solar_table, first = hold_table(trace.samples, [ids[k % len(ids)] for k in range(n)])
        if first > 1:
            solar_table = np.hstack([np.repeat(solar_table[:, :1], first - 1, axis=1), solar_table])
    elif solar.source == "synthetic" and solar.peak_mw > 0:
        peak, period, start = solar.peak_mw, solar.period_s, solar.start_s
        solar_fn = lambda t: diurnal_solar_mw(t + start, peak, period)  # noqa: E731
    harvester = Harvester(
        n, wpt_power=d_d * d_t * wpt.p_tx * wpt.gain_sq,
        tau_wpt=duration if wpt.tau_s is None else wpt.tau_s,
        tau_solar=duration if solar.tau_s is None else solar.tau_s,
        solar_table=solar_table, solar_fn=solar_fn, frame_duration=duration,
        gain_rng=np.random.default_rng(gain) if wpt.stochastic_gain else None)

    world = World(np.full(n, float(sc.payload_packets)), e0, channel, harvester, constants,
                  sc.slots_per_frame, config.kappa, arrival=arrival, e_max=en.e_max,
                  mode=sc.reception_mode, rng=np.random.default_rng(rx))
    world.distances = dist
    return world


def simulate(world: World, scheduler: Scheduler, max_frames: int) -> bool:
    """Step until every node is finished; returns True if ``max_frames`` cut it short."""
    while not world.finished():
        if world.frame >= max_frames:
            return True
        step_frame(world, scheduler)
    return False


def run(config: RunConfig, scheduler: Scheduler | str | None = None,
        sources: dict | None = None) -> RunRecord:
    """Execute one run of ``config`` with ``scheduler`` (defaults to ``config.scheduler``)."""
    config = config.copy().validate()
    if scheduler is None:
        scheduler = config.scheduler
    if isinstance(scheduler, str):
        scheduler = get_scheduler(scheduler)
    config.scheduler = scheduler.name
    world = build_world(config)
    cut = simulate(world, scheduler, config.scenario.max_frames)
    return finalize(world, scheduler.name, config.to_dict(), sources, cut)


def with_axis(config: RunConfig, axis: str, value) -> RunConfig:
    cfg = config.copy()
    if axis == "kappa":
        cfg.kappa = float(value)
    elif axis == "n":
        cfg.scenario.n = int(value)
    elif axis == "delta_d":
        cfg.energy.wpt.delta_d = float(value)
    elif axis == "delta_theta":
        cfg.energy.wpt.delta_theta = float(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    return cfg


def _run_one(args):
    cfg, sched = args
    return run(cfg, sched)


def sweep(base: RunConfig, axis: str, values: Sequence, scheduler: Scheduler | str | None = None,
          workers: int = 1) -> list:
    """One run per value of ``axis``, all on the base seed, returned in input order."""
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    jobs = [(with_axis(base, axis, v), scheduler) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]
