"""Replay an annotated stream through an ensemble.

Contiguous ``init`` records are buffered and handed to
:meth:`OdlEnsemble.kmeans_init` when the segment ends; ``train`` and
``predict`` records switch the mode and are processed one at a time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .ensemble import Detection, Mode, MovingAverageDriftDetector, OdlEnsemble, pack_detection
from .streams import StreamRecord


@dataclass(frozen=True)
class Emitted:
    seq: int
    index: int  # position in the input stream
    record: StreamRecord
    detection: Detection
    drift: bool = False


@dataclass
class RunSummary:
    n_records: int = 0
    n_init: int = 0
    n_train: int = 0
    n_predict: int = 0
    n_drift: int = 0
    init_rounds: int = 0
    cluster_counts: list[list[int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def replay(
    ens: OdlEnsemble,
    records: Iterable[StreamRecord],
    *,
    strict_init: bool = False,
    detector: MovingAverageDriftDetector | None = None,
    summary: RunSummary | None = None,
) -> Iterator[Emitted]:
    summary = RunSummary() if summary is None else summary
    pending: list[StreamRecord] = []
    seq = 0

    def flush() -> None:
        ens.set_mode(Mode.TRAIN)
        ens.kmeans_init([r.spectrum for r in pending], strict=strict_init)
        summary.init_rounds += 1
        summary.cluster_counts.append(ens.centroid_counts.tolist())
        if detector is not None:
            for r in pending:
                detector.observe(ens.predict(r.spectrum).score_l)
            detector.mark_baseline()
        pending.clear()

    for index, rec in enumerate(records):
        summary.n_records += 1
        if rec.segment == "init":
            pending.append(rec)
            summary.n_init += 1
            continue
        if pending:
            flush()
        if rec.segment == "train":
            ens.set_mode(Mode.TRAIN)
            det = ens.train_step(rec.spectrum)
            summary.n_train += 1
        else:
            ens.set_mode(Mode.PREDICT)
            det = ens.predict(rec.spectrum)
            summary.n_predict += 1
        drift = detector.update(det.score_l) if detector is not None else False
        summary.n_drift += int(drift)
        yield Emitted(seq, index, rec, det, drift)
        seq += 1
    if pending:
        flush()


def detection_json(e: Emitted, *, device_id: int, epoch_seconds: int) -> str:
    d = e.detection
    return json.dumps(
        {
            "seq": e.seq,
            "index": e.index,
            "device_id": device_id,
            "epoch_seconds": epoch_seconds,
            "score_l": d.score_l,
            "class_k": d.class_k,
            "mode": d.mode_at_emit.value,
            "label": e.record.label,
            "segment": e.record.segment,
            "drift": e.drift,
        }
    )


def write_detections(
    emitted: Iterable[Emitted],
    jsonl: IO[str],
    binary: IO[bytes] | None = None,
    *,
    device_id: int = 0,
    epoch_start: int = 0,
    period_s: int = 1,
) -> int:
    count = 0
    for e in emitted:
        epoch = epoch_start + e.seq * period_s
        jsonl.write(detection_json(e, device_id=device_id, epoch_seconds=epoch) + "\n")
        if binary is not None:
            binary.write(pack_detection(e.detection, device_id=device_id, seq=e.seq, epoch_seconds=epoch))
        count += 1
    return count
