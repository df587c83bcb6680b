"""JSON-lines series records.

One JSON object per line::

    {"id": "a1", "label": "walk", "times": [0, 1, 2], "values": [[0.1, 2], [0.3, 1], [0.2, 0]]}

``label`` and ``target`` are optional. ``values`` holds one row per time
stamp; a flat list is read as a single channel.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, List, Optional

import numpy as np

from .signature import Path


class RecordError(ValueError):
    """Malformed input; carries the 1-based line number."""

    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


@dataclass(frozen=True, eq=False)
class SeriesRecord:
    id: str
    times: np.ndarray
    values: np.ndarray
    label: Optional[str] = None
    target: Optional[float] = None

    def path(self) -> Path:
        return Path(self.times, self.values)

    def to_json(self) -> str:
        obj = {"id": self.id}
        if self.label is not None:
            obj["label"] = self.label
        if self.target is not None:
            obj["target"] = self.target
        obj["times"] = self.times.tolist()
        obj["values"] = self.values.tolist()
        return json.dumps(obj)


def parse_record(obj, source: str = "<input>", line: int = 0) -> SeriesRecord:
    def fail(msg):
        raise RecordError(source, line, msg)

    if not isinstance(obj, dict):
        fail("record must be a JSON object")
    for key in ("id", "times", "values"):
        if key not in obj:
            fail(f"missing field {key!r}")
    try:
        times = np.asarray(obj["times"], dtype=float)
        values = np.asarray(obj["values"], dtype=float)
    except (TypeError, ValueError):
        fail("times/values must be numeric and rectangular")
    if times.ndim != 1 or times.size == 0:
        fail("times must be a non-empty flat list")
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] != times.size:
        fail(f"values must have one row per time stamp ({times.size})")
    if values.shape[1] == 0:
        fail("values rows must be non-empty")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
        fail("non-finite number")
    if np.any(np.diff(times) <= 0):
        fail("times must be strictly increasing")
    label = obj.get("label")
    target = obj.get("target")
    if target is not None:
        if isinstance(target, bool) or not isinstance(target, (int, float)) or not math.isfinite(target):
            fail("target must be a finite number")
        target = float(target)
    return SeriesRecord(str(obj["id"]), times, values, None if label is None else str(label), target)


def read_records(stream: IO[str], source: str = "<input>") -> List[SeriesRecord]:
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(source, lineno, f"invalid JSON ({exc.msg})") from None
        out.append(parse_record(obj, source, lineno))
    if not out:
        raise RecordError(source, 0, "no records")
    return out


def load_records(path: str) -> List[SeriesRecord]:
    with open(path, encoding="utf-8") as fh:
        return read_records(fh, source=path)


def write_records(records: Iterable[SeriesRecord], stream: IO[str]):
    for rec in records:
        stream.write(rec.to_json() + "\n")
