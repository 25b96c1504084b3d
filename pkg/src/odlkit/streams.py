"""Annotated spectrum streams and their JSONL form.

One record per line::

    {"spectrum": [...], "label": "normal" | "anomalous" | <class id>, "segment": "init" | "train" | "predict"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import FormatError, InvalidInputError

Label = Union[str, int]
SEGMENTS = ("init", "train", "predict")


@dataclass(frozen=True)
class StreamRecord:
    spectrum: np.ndarray
    label: Label = "normal"
    segment: str = "predict"

    def __post_init__(self) -> None:
        if self.segment not in SEGMENTS:
            raise InvalidInputError(f"unknown segment {self.segment!r}")
        object.__setattr__(self, "spectrum", np.asarray(self.spectrum, dtype=np.float64))

    def to_json(self) -> dict:
        return {"spectrum": self.spectrum.tolist(), "label": self.label, "segment": self.segment}


@dataclass
class LabeledStream:
    """Ordered, annotated spectra for one scenario."""

    records: list[StreamRecord]
    task_name: str = ""
    environment: str = "silent"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.records:
            raise InvalidInputError("stream must not be empty")
        n = self.records[0].spectrum.size
        if any(r.spectrum.size != n for r in self.records):
            raise InvalidInputError("all spectra in a stream must have equal length")
        if self.environment not in ("silent", "noisy"):
            raise InvalidInputError(f"unknown environment {self.environment!r}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[StreamRecord]:
        return iter(self.records)

    @property
    def spectrum_len(self) -> int:
        return int(self.records[0].spectrum.size)

    def matrix(self) -> np.ndarray:
        return np.stack([r.spectrum for r in self.records])

    @property
    def labels(self) -> list[Label]:
        return [r.label for r in self.records]

    @classmethod
    def from_arrays(
        cls,
        X: np.ndarray,
        labels: Sequence[Label],
        segment: str,
        *,
        task_name: str = "",
        environment: str = "silent",
    ) -> "LabeledStream":
        recs = [StreamRecord(x, lab, segment) for x, lab in zip(X, labels)]
        return cls(recs, task_name=task_name, environment=environment)


def write_stream(path: str | Path, records: Sequence[StreamRecord] | LabeledStream) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")
            count += 1
    return count


def read_stream(path: str | Path) -> list[StreamRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rec = StreamRecord(
                    np.asarray(obj["spectrum"], dtype=np.float64),
                    obj.get("label", "normal"),
                    obj.get("segment", "predict"),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad stream record: {exc}") from exc
            if rec.spectrum.ndim != 1:
                raise FormatError(f"{path}:{lineno}: spectrum must be a flat list")
            out.append(rec)
    return out
