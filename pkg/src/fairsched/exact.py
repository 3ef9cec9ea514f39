"""Exact optimizer for small scheduling instances, used as an optimality oracle.

The objective is the expected packet count ``sum x[i, j, f] * q[i, f]``
subject to the energy floor, the fairness target, the payload cap and slot
exclusivity. Within a frame only the number of slots each node receives
matters, so the search enumerates slot counts per frame (frames outer,
nodes by descending link quality inner), which visits every distinct
assignment once up to slot permutation. Branches are cut with an
optimistic bound of current value plus the best remaining link quality for
every remaining slot, capped by outstanding payload.

Access-period cost is charged only in frames where a node transmits
(``phi[i, f] = 1`` iff the node holds a slot), so a node stops paying once
its payload is exhausted.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .channel import TableChannel
from .model import FAIR_TOL, EnergyConstants
from .sched import Scheduler, get_scheduler

DEFAULT_BUDGET = 64
CONSTRAINTS = tuple(f"cons{k}" for k in range(1, 11))


class BudgetExceeded(ValueError):
    pass


@dataclass
class ExactInstance:
    n: int
    s: int
    f_max: int
    payload: np.ndarray
    e0: np.ndarray
    q: np.ndarray  # (n, f_max)
    harvest: np.ndarray  # (n, f_max)
    kappa: float
    constants: EnergyConstants = field(default_factory=EnergyConstants)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        self.payload = np.asarray(self.payload, dtype=float).reshape(self.n)
        self.e0 = np.asarray(self.e0, dtype=float).reshape(self.n)
        self.q = np.asarray(self.q, dtype=float).reshape(self.n, self.f_max)
        self.harvest = np.asarray(self.harvest, dtype=float).reshape(self.n, self.f_max)
        if np.any((self.q < 0) | (self.q > 1)):
            raise ValueError("link qualities must lie in [0, 1]")
        if min(self.n, self.s, self.f_max) < 1:
            raise ValueError("n, s and f_max must all be >= 1")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")

    @property
    def n_vars(self) -> int:
        return self.n * self.s * self.f_max

    @property
    def e_td(self) -> float:
        return self.constants.e_td

    def to_dict(self) -> dict:
        c = self.constants
        return {
            "n": self.n, "s": self.s, "f_max": self.f_max, "kappa": self.kappa,
            "budget": self.budget,
            "constants": {k: getattr(c, k) for k in
                          ("e_tx_hello", "e_rx_hack", "e_rx_sack", "e_tx", "e_td")},
            "nodes": [
                {"payload": float(self.payload[i]), "e0": float(self.e0[i]),
                 "q": self.q[i].tolist(), "harvest": self.harvest[i].tolist()}
                for i in range(self.n)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExactInstance":
        known = {"n", "s", "f_max", "kappa", "budget", "constants", "nodes"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown instance keys: {sorted(extra)}")
        for key in ("n", "s", "f_max", "kappa", "nodes"):
            if key not in doc:
                raise ValueError(f"instance is missing '{key}'")
        nodes = doc["nodes"]
        n, f_max = int(doc["n"]), int(doc["f_max"])
        if len(nodes) != n:
            raise ValueError(f"instance lists {len(nodes)} nodes but n = {n}")
        for k, node in enumerate(nodes):
            for key in ("payload", "e0", "q"):
                if key not in node:
                    raise ValueError(f"node {k + 1} is missing '{key}'")
            if len(node["q"]) != f_max or len(node.get("harvest", [0.0] * f_max)) != f_max:
                raise ValueError(f"node {k + 1} needs {f_max} q and harvest values")
        return cls(
            n=n, s=int(doc["s"]), f_max=f_max, kappa=float(doc["kappa"]),
            payload=[node["payload"] for node in nodes],
            e0=[node["e0"] for node in nodes],
            q=[node["q"] for node in nodes],
            harvest=[node.get("harvest", [0.0] * f_max) for node in nodes],
            constants=EnergyConstants(**{k: float(v) for k, v in doc.get("constants", {}).items()}),
            budget=int(doc.get("budget", DEFAULT_BUDGET)),
        )

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ExactInstance":
        doc = yaml.safe_load(text)
        if not isinstance(doc, dict):
            raise ValueError("instance document must be a mapping")
        return cls.from_dict(doc)


@dataclass
class ExactSolution:
    status: str  # "optimal" or "infeasible"
    objective: Optional[float] = None
    x: Optional[np.ndarray] = None  # bool (n, s, f_max)
    phi: Optional[np.ndarray] = None  # bool (n, f_max)
    alpha: Optional[np.ndarray] = None
    slacks: dict = field(default_factory=dict)
    nodes_explored: int = 0
    runtime_s: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def counts_to_x(instance: ExactInstance, counts: np.ndarray, order=None) -> np.ndarray:
    """Expand per-frame slot counts ``(n, f_max)`` into a slot tensor ``(n, s, f_max)``."""
    x = np.zeros((instance.n, instance.s, instance.f_max), dtype=bool)
    for f in range(instance.f_max):
        j = 0
        nodes = range(instance.n) if order is None else order[f]
        for i in nodes:
            k = int(counts[i, f])
            x[i, j:j + k, f] = True
            j += k
        if j > instance.s:
            raise ValueError(f"frame {f + 1} uses {j} slots, only {instance.s} exist")
    return x


def objective(instance: ExactInstance, x: np.ndarray) -> float:
    """Expected packets of an assignment, summed exactly then rounded once."""
    counts = np.asarray(x).sum(axis=1)
    terms = []
    for i in range(instance.n):
        for f in range(instance.f_max):
            terms.extend([float(instance.q[i, f])] * int(counts[i, f]))
    return math.fsum(terms)


def _alpha(instance: ExactInstance, counts: np.ndarray) -> np.ndarray:
    out = np.zeros(instance.n)
    for i in range(instance.n):
        terms = []
        for f in range(instance.f_max):
            terms.extend([float(instance.q[i, f])] * int(counts[i, f]))
        out[i] = math.fsum(terms)
    return out


def check_feasible(instance: ExactInstance, x, phi=None) -> dict:
    """Minimum slack of every constraint; a negative value marks a violation.

    ``phi`` defaults to the cheapest choice the constraints allow: a node
    pays for the access period exactly in frames where it holds a slot.
    The auxiliary completion variable is taken as ``v = clip(lambda - cum, 0, 1)``.
    """
    x = np.asarray(x)
    shape = (instance.n, instance.s, instance.f_max)
    if x.shape != shape:
        raise ValueError(f"assignment shape {x.shape} does not match instance {shape}")
    xb = x.astype(float)
    if phi is None:
        phi = xb.any(axis=1)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (instance.n, instance.f_max):
        raise ValueError(f"phi shape {phi.shape} does not match ({instance.n}, {instance.f_max})")
    c = instance.constants
    counts = xb.sum(axis=1)
    alpha = _alpha(instance, counts)

    energy = (instance.e0 + instance.harvest.sum(axis=1) - c.e_rcap * phi.sum(axis=1)
              - c.e_tx * counts.sum(axis=1))
    s = {}
    s["cons1"] = float(np.min(energy - instance.e_td))
    s["cons2"] = float(np.min(alpha - instance.kappa * instance.payload))
    s["cons3"] = float(np.min(instance.payload - alpha))
    s["cons4"] = float(min(np.min(1 - xb), np.min(xb)))
    s["cons5"] = float(np.min(1 - xb.sum(axis=0)))

    # cumulative delivery in (frame, slot) order
    per_slot = xb * instance.q[:, None, :]
    seq = np.transpose(per_slot, (0, 2, 1)).reshape(instance.n, -1)
    cum = np.cumsum(seq, axis=1)
    rem = instance.payload[:, None] - cum
    v = np.clip(rem, 0.0, 1.0)
    s["cons6"] = float(np.min(rem - v))
    vf = v.reshape(instance.n, instance.f_max, instance.s)
    s["cons7"] = float(np.min(vf[:, :, :-1] - vf[:, :, 1:])) if instance.s > 1 else 0.0
    s["cons8"] = float(np.min(v[:, :-1] - v[:, 1:])) if v.shape[1] > 1 else 0.0
    worst9 = 0.0
    for i in range(instance.n):
        done = np.flatnonzero(rem[i] <= FAIR_TOL)
        if done.size:
            f_done = done[0] // instance.s
            worst9 = min(worst9, -float(phi[i, f_done + 1:].sum()))
    s["cons9"] = worst9
    s["cons10"] = float(np.min(phi[:, None, :] - xb))
    return s


def is_feasible(slacks: dict, tol: float = FAIR_TOL) -> bool:
    return all(v >= -tol for v in slacks.values())


def solve_exact(instance: ExactInstance) -> ExactSolution:
    """Branch-and-bound search for the best feasible assignment."""
    if instance.n_vars > instance.budget:
        raise BudgetExceeded(
            f"instance has {instance.n_vars} binary variables, limit is {instance.budget}")
    t0 = time.perf_counter()
    n, S, F = instance.n, instance.s, instance.f_max
    q = instance.q.astype(float)
    lam = instance.payload
    c = instance.constants
    target = instance.kappa * lam - FAIR_TOL
    budget_e = instance.e0 + instance.harvest.sum(axis=1) - instance.e_td
    order = [sorted(range(n), key=lambda i: (-q[i, f], i)) for f in range(F)]
    # best quality available to each node from frame f onward
    best_q_from = np.zeros(F + 1)
    node_best_from = np.zeros((n, F + 1))
    for f in range(F - 1, -1, -1):
        best_q_from[f] = max(best_q_from[f + 1], q[:, f].max())
        node_best_from[:, f] = np.maximum(node_best_from[:, f + 1], q[:, f])

    counts = np.zeros((n, F), dtype=np.int64)
    alpha = np.zeros(n)
    spent = np.zeros(n)
    state = {"best": -math.inf, "best_counts": None, "visited": 0}

    def bound_ok(f: int, slots_left: int, value: float) -> bool:
        future = slots_left + S * (F - f - 1)
        if np.any(alpha + node_best_from[:, f] * future < target):
            return False
        room = float(np.maximum(lam - alpha, 0).sum())
        optimistic = value + min(future * best_q_from[f], room)
        return optimistic + 1e-9 >= state["best"]

    def leaf():
        state["visited"] += 1
        if np.any(alpha < target) or np.any(spent > budget_e + 1e-12):
            return
        val = objective(instance, counts_to_x(instance, counts, order))
        if val > state["best"]:
            state["best"] = val
            state["best_counts"] = counts.copy()

    def visit(f: int, pos: int, slots_left: int, value: float):
        if f == F:
            leaf()
            return
        if pos == n:
            visit(f + 1, 0, S, value)
            return
        state["visited"] += 1
        if not bound_ok(f, slots_left, value):
            return
        i = order[f][pos]
        qi = q[i, f]
        k_max = slots_left
        if qi > 0:
            k_max = min(k_max, int(math.floor((lam[i] - alpha[i]) / qi + 1e-9)))
        k_max = max(k_max, 0)
        for k in range(k_max, -1, -1):
            cost = (c.e_rcap if k else 0.0) + k * c.e_tx
            if spent[i] + cost > budget_e[i] + 1e-12:
                continue
            counts[i, f] = k
            alpha[i] += k * qi
            spent[i] += cost
            visit(f, pos + 1, slots_left - k, value + k * qi)
            alpha[i] -= k * qi
            spent[i] -= cost
            counts[i, f] = 0

    visit(0, 0, S, 0.0)
    runtime = time.perf_counter() - t0
    if state["best_counts"] is None:
        return ExactSolution("infeasible", nodes_explored=state["visited"], runtime_s=runtime)
    best = state["best_counts"]
    x = counts_to_x(instance, best, order)
    phi = x.any(axis=1)
    return ExactSolution(
        "optimal", objective=objective(instance, x), x=x, phi=phi,
        alpha=_alpha(instance, best), slacks=check_feasible(instance, x, phi),
        nodes_explored=state["visited"], runtime_s=runtime)


def gap(heuristic_value: float, exact_value: float) -> float:
    """Relative shortfall of a heuristic against the optimum."""
    if exact_value <= 0:
        raise ValueError("gap is undefined for a non-positive optimum")
    return (exact_value - heuristic_value) / exact_value


@dataclass
class HeuristicResult:
    objective: float
    x: np.ndarray
    alpha: np.ndarray
    fair_nodes: int
    dead_nodes: int
    slacks: dict
    runtime_s: float


def run_heuristic(instance: ExactInstance, scheduler: Scheduler | str = "ehfs") -> HeuristicResult:
    """Play a scheduler over the instance horizon through the simulation engine."""
    from .sim import Harvester, World, step_frame

    if isinstance(scheduler, str):
        scheduler = get_scheduler(scheduler)
    t0 = time.perf_counter()
    world = World(instance.payload, instance.e0, TableChannel(instance.q),
                  Harvester(instance.n, table=instance.harvest), instance.constants,
                  instance.s, instance.kappa)
    world.keep_schedules = True
    for _ in range(instance.f_max):
        if world.finished():
            break
        step_frame(world, scheduler)
    runtime = time.perf_counter() - t0
    x = np.zeros((instance.n, instance.s, instance.f_max), dtype=bool)
    for plan in world.schedules:
        f = plan.frame_index - 1
        for j, node in enumerate(plan.slots):
            if node is not None:
                x[node - 1, j, f] = True
    counts = x.sum(axis=1)
    alpha = _alpha(instance, counts)
    fair = int(np.sum(alpha >= instance.kappa * instance.payload - FAIR_TOL))
    return HeuristicResult(objective(instance, x), x, alpha, fair, int(world.dead.sum()),
                           check_feasible(instance, x), runtime)
