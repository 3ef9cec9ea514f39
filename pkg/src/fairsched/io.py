"""Config parsing, trace ingestion and result emission.

All CSV files are comma-separated, UTF-8, LF line endings, with a
mandatory header row. Floats are written with ``repr`` which round-trips
bit-exactly.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .channel import RssiTrace
from .config import ConfigError, RunConfig, TypeMismatchError
from .energy import EfficiencyTable, SolarTrace
from .sim import RunRecord

RSSI_HEADER = ["node_id", "frame", "rssi_dbm"]
SOLAR_HEADER = ["node_id", "frame", "power_mw"]
EFFICIENCY_HEADER = ["kind", "key", "received_mw"]
SERIES_HEADER = ["frame", "gamma", "live_nodes", "fair_nodes", "dead_nodes"]
SUMMARY_HEADER = ["axis_value", "total_received", "fair_nodes", "dead_nodes"]
COMPARE_HEADER = ["scheduler", "kappa", "seed", "total_received", "fair_nodes", "dead_nodes"]


class TraceError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


# -- configuration ----------------------------------------------------------

def _flatten(doc, prefix=""):
    if isinstance(doc, dict):
        for k, v in doc.items():
            yield from _flatten(v, f"{prefix}{k}.")
    else:
        yield prefix[:-1]


def parse_config(document, base_dir: str | os.PathLike | None = None) -> tuple:
    """Parse a YAML/JSON config document (text or mapping).

    Returns ``(config, sources)`` where ``sources`` maps every dotted key of
    the resolved config to ``"file"`` or ``"default"``. Relative trace paths
    are resolved against ``base_dir``.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise ConfigError("", f"malformed document: {exc}") from None
    else:
        doc = document
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise TypeMismatchError("<root>", "config document must be a mapping")
    if base_dir is not None:
        doc = _resolve_paths(doc, Path(base_dir))
    config = RunConfig.from_dict(doc).validate()
    given = set(_flatten(doc))
    sources = {k: ("file" if k in given else "default") for k in _flatten(config.to_dict())}
    return config, sources


_PATH_KEYS = (("channel", "trace"), ("energy", "solar", "trace"), ("energy", "wpt", "efficiency_table"))


def _resolve_paths(doc: dict, base: Path) -> dict:
    doc = json.loads(json.dumps(doc))  # deep copy of plain data
    for keys in _PATH_KEYS:
        node = doc
        for k in keys[:-1]:
            node = node.get(k) if isinstance(node, dict) else None
        if isinstance(node, dict) and isinstance(node.get(keys[-1]), str):
            p = Path(node[keys[-1]])
            if not p.is_absolute():
                node[keys[-1]] = str(base / p)
    return doc


def load_config(path) -> tuple:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


# -- traces -----------------------------------------------------------------

def _read_rows(path, header: Sequence[str]):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise TraceError(path, None, f"cannot open: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise TraceError(path, None, "file is empty")
        if [h.strip() for h in first] != list(header):
            raise TraceError(path, 1, f"expected header {','.join(header)}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise TraceError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            rows.append((reader.line_num, [c.strip() for c in row]))
    if not rows:
        raise TraceError(path, None, "no data rows")
    return rows


def _series(path, header, value_name, check=None):
    last: dict = {}
    samples = []
    for line, (node, frame, value) in _read_rows(path, header):
        try:
            node_i, frame_i, v = int(node), int(frame), float(value)
        except ValueError:
            raise TraceError(path, line, "node_id and frame must be integers, "
                                         f"{value_name} a number") from None
        if frame_i < last.get(node_i, -1):
            raise TraceError(path, line, f"frame {frame_i} precedes frame {last[node_i]} for node {node_i}")
        if check is not None:
            msg = check(v)
            if msg:
                raise TraceError(path, line, msg)
        last[node_i] = frame_i
        samples.append((node_i, frame_i, v))
    return tuple(samples)


def load_rssi_trace(path) -> RssiTrace:
    return RssiTrace(_series(path, RSSI_HEADER, "rssi_dbm"))


def load_solar_trace(path) -> SolarTrace:
    return SolarTrace(_series(path, SOLAR_HEADER, "power_mw",
                              lambda v: "power must be non-negative" if v < 0 else None))


def load_efficiency_table(path) -> EfficiencyTable:
    curves = {"distance": [], "orientation": []}
    for line, (kind, key, mw) in _read_rows(path, EFFICIENCY_HEADER):
        if kind not in curves:
            raise TraceError(path, line, f"kind must be 'distance' or 'orientation', got {kind!r}")
        try:
            curves[kind].append((float(key), float(mw)))
        except ValueError:
            raise TraceError(path, line, "key and received_mw must be numbers") from None
    try:
        return EfficiencyTable(tuple(sorted(curves["distance"])), tuple(sorted(curves["orientation"])))
    except ValueError as exc:
        raise TraceError(path, None, str(exc)) from None


def write_trace(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# -- results ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def record_json(record: RunRecord) -> str:
    return json.dumps(record.to_dict(), indent=1, allow_nan=False) + "\n"


def read_record(path) -> RunRecord:
    with open(path, encoding="utf-8") as fh:
        return RunRecord.from_dict(json.load(fh))


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def series_csv(record: RunRecord) -> str:
    pf = record.metrics.per_frame
    lines = [",".join(SERIES_HEADER)]
    for row in zip(*(pf[k] for k in SERIES_HEADER)):
        lines.append(",".join(str(_fmt(v)) for v in row))
    return "\n".join(lines) + "\n"


def emit_results(record: RunRecord, out_dir, prefix: str = "run") -> tuple:
    """Write ``<prefix>.json`` and ``<prefix>_series.csv``; returns both paths."""
    out_dir = Path(out_dir)
    jpath = out_dir / f"{prefix}.json"
    cpath = out_dir / f"{prefix}_series.csv"
    _write(jpath, record_json(record))
    _write(cpath, series_csv(record))
    return jpath, cpath


def summary_rows(values: Sequence, records: Sequence[RunRecord]) -> list:
    return [[v, r.metrics.total_received, r.metrics.fair_nodes, r.metrics.dead_nodes]
            for v, r in zip(values, records)]


def emit_sweep(values: Sequence, records: Sequence[RunRecord], out_dir, prefix: str = "sweep") -> list:
    """Per-run JSON/CSV pairs plus ``<prefix>_summary.csv``; returns every path written."""
    out_dir = Path(out_dir)
    paths = []
    for k, r in enumerate(records):
        paths.extend(emit_results(r, out_dir, f"{prefix}_{k:03d}"))
    spath = out_dir / f"{prefix}_summary.csv"
    _write(spath, _csv_text(SUMMARY_HEADER, summary_rows(values, records)))
    paths.append(spath)
    return paths


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(_fmt(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_compare(path, rows) -> Path:
    path = Path(path)
    _write(path, _csv_text(COMPARE_HEADER, rows))
    return path


def read_csv_rows(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
