"""Link quality: per-node, per-frame packet reception rate.

Two sources are available. ``AnalyticChannel`` uses free-space path loss
with Rayleigh block fading, so the reception rate is the probability that
the instantaneous SNR clears the threshold. ``TraceChannel`` replays an
RSSI trace through a piecewise-linear RSSI to PRR table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Generic 2.4 GHz reception cliff; synthetic, override via config.
DEFAULT_RSSI_TABLE = ((-92.0, 0.0), (-90.0, 0.1), (-87.0, 0.9), (-85.0, 1.0))


@dataclass(frozen=True)
class AnalyticChannelParams:
    g_tx: float = 1.0
    g_rx: float = 1.0
    f0: float = 2.4e9
    c: float = SPEED_OF_LIGHT
    k2: float = 2.0
    n0: float = 1e-13
    gamma0: float = 10.0
    p_tx: float = 1e-3

    def __post_init__(self):
        for name in ("g_tx", "g_rx", "f0", "c", "k2", "n0", "gamma0", "p_tx"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")

    @property
    def wavelength(self) -> float:
        return self.c / self.f0

    @property
    def k_src(self) -> float:
        return k1(self) * self.n0 * self.gamma0 / self.p_tx


def k1(params: AnalyticChannelParams) -> float:
    """Free-space loss constant (4 pi)^2 / (G_tx G_rx lambda0^2)."""
    if params.g_tx == 0 or params.g_rx == 0:
        raise ValueError("antenna gains must be non-zero")
    lam = params.c / params.f0
    return (4 * math.pi) ** 2 / (params.g_tx * params.g_rx * lam * lam)


def _check_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be strictly positive")
    return d


def path_loss(params: AnalyticChannelParams, d):
    d = _check_distance(d)
    out = k1(params) * d ** params.k2
    return float(out) if out.ndim == 0 else out


def mean_snr(params: AnalyticChannelParams, d):
    d = _check_distance(d)
    out = params.p_tx / (k1(params) * params.n0 * d ** params.k2)
    return float(out) if out.ndim == 0 else out


def prr_analytic(params: AnalyticChannelParams, d):
    """Reception rate exp(-K_src d^k2), i.e. 1 - outage under Rayleigh fading."""
    d = _check_distance(d)
    out = np.exp(-params.k_src * d ** params.k2)
    return float(out) if out.ndim == 0 else out


class RssiPrrTable:
    """Monotone piecewise-linear map from RSSI (dBm) to PRR, clamped at the ends."""

    def __init__(self, points: Iterable[Sequence[float]] = DEFAULT_RSSI_TABLE):
        pts = [(float(r), float(p)) for r, p in points]
        if not pts:
            raise ValueError("RSSI to PRR table is empty")
        rssi = np.array([r for r, _ in pts])
        prr = np.array([p for _, p in pts])
        if np.any(np.diff(rssi) <= 0):
            raise ValueError("RSSI breakpoints must be strictly increasing")
        if np.any(np.diff(prr) < 0):
            raise ValueError("PRR must be non-decreasing in RSSI")
        if np.any((prr < 0) | (prr > 1)):
            raise ValueError("PRR breakpoints must lie in [0, 1]")
        self.rssi = rssi
        self.prr = prr

    def __call__(self, rssi_dbm):
        out = np.interp(np.asarray(rssi_dbm, dtype=float), self.rssi, self.prr)
        return float(out) if out.ndim == 0 else out

    def points(self) -> list:
        return [[float(r), float(p)] for r, p in zip(self.rssi, self.prr)]


def rssi_to_prr(rssi_dbm, mapping=DEFAULT_RSSI_TABLE):
    if not isinstance(mapping, RssiPrrTable):
        mapping = RssiPrrTable(mapping)
    return mapping(rssi_dbm)


@dataclass(frozen=True)
class RssiTrace:
    """Samples ``(node_id, frame, rssi_dbm)``; frames non-decreasing per node."""

    samples: tuple

    def __post_init__(self):
        last: dict = {}
        for node, frame, _ in self.samples:
            if frame < last.get(node, -math.inf):
                raise ValueError(f"trace frames go backwards for node {node}")
            last[node] = frame

    def node_ids(self) -> list:
        return sorted({s[0] for s in self.samples})


def hold_table(samples: Iterable[Sequence[float]], node_map: Sequence[int]) -> tuple:
    """Dense zero-order-hold table for per-node time series.

    Returns ``(table, first_frame)`` where ``table[k, f - first_frame]`` is the
    value of the latest sample at or before frame ``f`` for sim node ``k``.
    ``node_map[k]`` names the trace node feeding sim node ``k``. Frames before
    a node's first sample take that first sample.
    """
    by_node: dict = {}
    for node, frame, value in samples:
        by_node.setdefault(int(node), []).append((int(frame), float(value)))
    missing = sorted(set(node_map) - set(by_node))
    if missing:
        raise ValueError(f"trace has no samples for node(s) {missing}")
    first = min(f for series in by_node.values() for f, _ in series)
    last = max(f for series in by_node.values() for f, _ in series)
    width = last - first + 1
    table = np.empty((len(node_map), width))
    for k, src in enumerate(node_map):
        series = by_node[src]
        frames = np.array([f for f, _ in series]) - first
        values = np.array([v for _, v in series])
        idx = np.searchsorted(frames, np.arange(width), side="right") - 1
        table[k] = values[np.maximum(idx, 0)]
    return table, first


class ChannelSource:
    """Base for per-frame PRR providers. Read-only after construction."""

    def prr(self, frame: int) -> np.ndarray:
        raise NotImplementedError


class AnalyticChannel(ChannelSource):
    def __init__(self, params: AnalyticChannelParams, distances):
        self.params = params
        self.distances = _check_distance(np.atleast_1d(distances)).copy()
        self._prr = prr_analytic(params, self.distances)
        self._prr = np.atleast_1d(self._prr)

    def prr(self, frame: int) -> np.ndarray:
        # distances are static, so the rate is frame-independent
        return self._prr


class TraceChannel(ChannelSource):
    """Replays an RSSI trace. Sim node ``k`` (0-based) reads trace node
    ``ids[k % len(ids)]`` so a short trace can feed a larger network."""

    def __init__(self, trace: RssiTrace, n_nodes: int, table: RssiPrrTable | None = None):
        table = table or RssiPrrTable()
        ids = trace.node_ids()
        if not ids:
            raise ValueError("RSSI trace is empty")
        node_map = [ids[k % len(ids)] for k in range(n_nodes)]
        rssi, self.first_frame = hold_table(trace.samples, node_map)
        self._prr = np.asarray(table(rssi), dtype=float).reshape(rssi.shape)

    def prr(self, frame: int) -> np.ndarray:
        col = min(max(frame - self.first_frame, 0), self._prr.shape[1] - 1)
        return self._prr[:, col]


class TableChannel(ChannelSource):
    """Explicit ``(n_nodes, n_frames)`` PRR table; frames past the end hold the last column."""

    def __init__(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if np.any((q < 0) | (q > 1)):
            raise ValueError("PRR values must lie in [0, 1]")
        self.q = q

    def prr(self, frame: int) -> np.ndarray:
        return self.q[:, min(frame, self.q.shape[1]) - 1]
