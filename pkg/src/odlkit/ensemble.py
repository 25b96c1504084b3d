"""Multi-instance ODL ensemble.

K autoencoders share one hidden projection.  Prediction takes the smallest
reconstruction loss as the anomaly score and its instance index as the
output class; training updates only that winning instance.  Instances are
seeded by a sequential k-means pass over the initial training segment.
"""

from __future__ import annotations

import enum
import logging
import math
import struct
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Literal, Protocol, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError, ModeError, StateError
from .oselm import DEFAULT_DELTA, HiddenProjection, OselmInstance, init_instance, init_projection

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    PREDICT = "predict"
    TRAIN = "train"


@dataclass(frozen=True)
class Detection:
    score_l: float
    class_k: int
    mode_at_emit: Mode
    losses: tuple[float, ...] = ()


Seeding = Literal["maximin", "first-distinct"]


class OdlEnsemble:
    """K OS-ELM autoencoders with min-loss routing."""

    def __init__(
        self,
        projection: HiddenProjection,
        instances: Sequence[OselmInstance],
        *,
        delta: float = DEFAULT_DELTA,
        mode: Mode = Mode.PREDICT,
        initialized: bool = True,
    ):
        if not instances:
            raise ConfigurationError("ensemble needs at least one instance")
        N, m = instances[0].N, instances[0].m
        for inst in instances:
            if (inst.N, inst.m) != (N, m):
                raise ConfigurationError("all instances must share (N, m)")
            if inst.beta.dtype != projection.dtype:
                raise ConfigurationError("instance and projection dtypes differ")
        if projection.N != N:
            raise ConfigurationError(f"projection N={projection.N} != instance N={N}")
        self.projection = projection
        self.instances = list(instances)
        self.delta = delta
        self.mode = Mode(mode)
        self.initialized = initialized
        self.centroids = np.zeros((len(self.instances), projection.n))
        self.centroid_counts = np.zeros(len(self.instances), dtype=np.int64)

    @classmethod
    def create(
        cls,
        n: int,
        N: int,
        K: int,
        *,
        seed: int = 0,
        delta: float = DEFAULT_DELTA,
        m: int | None = None,
        dtype=np.float64,
    ) -> "OdlEnsemble":
        if K < 1:
            raise ConfigurationError("K must be >= 1")
        proj = init_projection(seed, n, N, dtype=dtype)
        m = n if m is None else m
        insts = [init_instance(N, m, delta, dtype=dtype) for _ in range(K)]
        return cls(proj, insts, delta=delta, initialized=False)

    @property
    def K(self) -> int:
        return len(self.instances)

    @property
    def n(self) -> int:
        return self.projection.n

    @property
    def N(self) -> int:
        return self.projection.N

    @property
    def m(self) -> int:
        return self.instances[0].m

    # -- prediction / training ----------------------------------------------

    def losses(self, x) -> np.ndarray:
        """Reconstruction MSE of every instance; never mutates state."""
        if self.n != self.m:
            raise ConfigurationError(f"autoencoder needs n == m, got n={self.n}, m={self.m}")
        x = np.asarray(x, dtype=self.projection.dtype)
        h = self.projection.hidden(x)
        return self._losses_hidden(h, x)

    def _losses_hidden(self, h, x) -> np.ndarray:
        out = np.empty(self.K)
        for i, inst in enumerate(self.instances):
            d = h @ inst.beta - x
            out[i] = float(np.mean(d * d))  # same reduction as oselm.loss
        return out

    def predict(self, x) -> Detection:
        if not self.initialized:
            raise StateError("ensemble is not initialized; run kmeans_init first")
        losses = self.losses(x)
        k = int(np.argmin(losses))  # first minimum wins ties
        return Detection(float(losses[k]), k, self.mode, tuple(losses.tolist()))

    def train_step(self, x) -> Detection:
        """Predict, then update only the winning instance with t = x."""
        if self.mode is not Mode.TRAIN:
            raise ModeError("train_step requires train mode")
        if not self.initialized:
            raise StateError("ensemble is not initialized; run kmeans_init first")
        x = np.asarray(x, dtype=self.projection.dtype)
        h = self.projection.hidden(x)
        losses = self._losses_hidden(h, x)
        k = int(np.argmin(losses))
        self.instances[k].update_hidden(h, x)
        return Detection(float(losses[k]), k, self.mode, tuple(losses.tolist()))

    def set_mode(self, mode: Mode | str) -> None:
        self.mode = Mode(mode)

    # -- initial clustering --------------------------------------------------

    def kmeans_init(
        self,
        samples: Iterable,
        *,
        seeding: Seeding = "maximin",
        strict: bool = False,
    ) -> np.ndarray:
        """Cluster the initial segment, then train each instance on its cluster.

        Centroids follow the sequential (running-mean) rule: each sample joins
        its nearest centroid, lowest index on ties, and moves it by
        ``(x - c) / count``.  Instances are reset and trained on their cluster's
        samples in arrival order.  Returns the per-sample assignment.
        """
        X = np.asarray([np.asarray(s, dtype=np.float64) for s in samples])
        if X.ndim != 2 or X.shape[0] < self.K:
            raise InvalidInputError(f"need at least K={self.K} samples, got {len(X)}")
        if X.shape[1] != self.n:
            raise InvalidInputError(f"sample length {X.shape[1]} != n={self.n}")

        centroids, counts, assign = sequential_kmeans(X, self.K, seeding=seeding)

        short = [j for j in range(self.K) if 0 < counts[j] < self.N]
        if short:
            msg = (
                f"clusters {short} hold fewer than N={self.N} samples "
                f"(counts {counts.tolist()}); train more normal data"
            )
            if strict:
                raise InvalidInputError(msg)
            log.warning(msg)

        dtype = self.projection.dtype
        self.instances = [init_instance(self.N, self.m, self.delta, dtype=dtype) for _ in range(self.K)]
        Xd = X.astype(dtype)
        for i in range(X.shape[0]):
            # per-sample hidden(), not one batched matmul, so the result is
            # bit-identical to feeding the same samples through train_step
            self.instances[assign[i]].update_hidden(self.projection.hidden(Xd[i]), Xd[i])
        self.centroids = centroids
        self.centroid_counts = counts
        self.initialized = True
        return assign


def _seed_indices(X: np.ndarray, K: int, seeding: Seeding) -> list[int]:
    if seeding == "first-distinct":
        idx: list[int] = []
        for i in range(X.shape[0]):
            if not any(np.array_equal(X[i], X[j]) for j in idx):
                idx.append(i)
                if len(idx) == K:
                    return idx
        # not enough distinct samples: pad with the first one
        return idx + [0] * (K - len(idx))
    if seeding == "maximin":
        idx = [0]
        mind = np.sum((X - X[0]) ** 2, axis=1)
        while len(idx) < K:
            j = int(np.argmax(mind))
            if mind[j] == 0.0:
                idx.append(0)
                continue
            idx.append(j)
            mind = np.minimum(mind, np.sum((X - X[j]) ** 2, axis=1))
        return idx
    raise ConfigurationError(f"unknown seeding rule {seeding!r}")


def sequential_kmeans(
    X: np.ndarray, K: int, *, seeding: Seeding = "maximin"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One pass of running-mean k-means; returns (centroids, counts, assignment)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < K:
        raise InvalidInputError(f"need at least K={K} samples, got {X.shape[0]}")
    centroids = X[_seed_indices(X, K, seeding)].copy()
    counts = np.zeros(K, dtype=np.int64)
    assign = np.empty(X.shape[0], dtype=np.int64)
    for i, x in enumerate(X):
        d = np.sum((centroids - x) ** 2, axis=1)
        j = int(np.argmin(d))
        counts[j] += 1
        centroids[j] += (x - centroids[j]) / counts[j]
        assign[i] = j
    return centroids, counts, assign


# -- drift trigger -------------------------------------------------------------


class DriftDetector(Protocol):
    def update(self, score: float) -> bool: ...


class MovingAverageDriftDetector:
    """Fires when the trailing-W mean score exceeds tau x the baseline mean.

    Deliberately simple placeholder for a proper concept-drift detector.
    Feed scores with :meth:`observe` during initial training, call
    :meth:`mark_baseline`, then feed live scores with :meth:`update`.
    """

    def __init__(self, window: int, tau: float):
        if window < 1:
            raise ConfigurationError("drift window W must be >= 1")
        if not tau > 0:
            raise ConfigurationError("threshold factor tau must be positive")
        self.window = window
        self.tau = tau
        self.baseline: float | None = None
        self._buf: deque[float] = deque(maxlen=window)

    def observe(self, score: float) -> None:
        self._buf.append(float(score))

    def mark_baseline(self) -> float:
        if not self._buf:
            raise StateError("no scores observed before mark_baseline")
        self.baseline = sum(self._buf) / len(self._buf)
        return self.baseline

    def update(self, score: float) -> bool:
        self._buf.append(float(score))
        if self.baseline is None:
            return False
        avg = sum(self._buf) / len(self._buf)
        if math.isinf(self.tau):
            return False
        return avg > self.tau * self.baseline


def drift_trigger(detector: DriftDetector, score_l: float) -> bool:
    return detector.update(score_l)


# -- 20-byte detection payload ---------------------------------------------------

# device_id u32, seq u32, epoch_seconds u32, score f32, class u8, mode u8, reserved u16
PAYLOAD_FORMAT = "<IIIfBBH"
PAYLOAD_SIZE = struct.calcsize(PAYLOAD_FORMAT)
assert PAYLOAD_SIZE == 20

_MODE_CODE = {Mode.PREDICT: 0, Mode.TRAIN: 1}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


def pack_detection(det: Detection, *, device_id: int, seq: int, epoch_seconds: int) -> bytes:
    return struct.pack(
        PAYLOAD_FORMAT,
        device_id & 0xFFFFFFFF,
        seq & 0xFFFFFFFF,
        epoch_seconds & 0xFFFFFFFF,
        det.score_l,
        det.class_k,
        _MODE_CODE[det.mode_at_emit],
        0,
    )


def unpack_detection(payload: bytes) -> dict:
    if len(payload) != PAYLOAD_SIZE:
        raise InvalidInputError(f"payload must be {PAYLOAD_SIZE} bytes, got {len(payload)}")
    dev, seq, epoch, score, k, mode, _ = struct.unpack(PAYLOAD_FORMAT, payload)
    return {
        "device_id": dev,
        "seq": seq,
        "epoch_seconds": epoch,
        "score_l": score,
        "class_k": k,
        "mode": _CODE_MODE[mode].value,
    }
