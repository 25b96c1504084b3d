"""Spectrum sources and the evaluation tasks built from them.

Two sources share one interface (:class:`SpectrumSource`):

* :class:`SyntheticFanSource` draws desk-scale fan spectra: harmonic series
  of the shaft frequency, a noise floor, an optional ventilation-fan noise
  source, and optional damage sidebands.  It is the default so everything
  runs offline.
* :class:`CoolingFanDataset` wraps the public cooling-fan recordings.

Tasks
-----
``2500rpm``, ``2000rpm``, ``1500rpm``, ``0rpm``
    train on 300 samples of the target speed; evaluate on 235 samples
    (target speed first, then the other three speeds).
``damage1``, ``damage2``
    train on 1200 normal samples (2500/2000/1500 rpm); evaluate on 235
    normal followed by 235 damaged samples.
``4speeds``
    train on 1200 samples (300 per speed, one speed after another);
    evaluate classification over 470 samples.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import DatasetIOError, FormatError, InvalidInputError
from .preprocess import SampleWindow, fft_magnitude
from .streams import LabeledStream

log = logging.getLogger(__name__)

SPEEDS = (2500, 2000, 1500, 0)
CONDITIONS = ("normal", "damage1", "damage2")
ENVIRONMENTS = ("silent", "noisy")
TASKS = ("2500rpm", "2000rpm", "1500rpm", "0rpm", "damage1", "damage2", "4speeds")

RPM_TRAIN, RPM_EVAL = 300, 235
BIG_TRAIN, BIG_EVAL = 1200, 470


# -- synthetic generator ------------------------------------------------------


@dataclass(frozen=True)
class ModeSpec:
    """Harmonic series fundamental*k with amplitude * decay**(k-1)."""

    fundamental_hz: float
    harmonic_decay: float = 0.6
    amplitude: float = 1.0
    n_harmonics: int = 5


@dataclass(frozen=True)
class NoiseSourceSpec:
    """Narrow-band interferer; each peak's amplitude varies per sample by +-spread."""

    peaks: tuple[float, ...]
    amplitude: float
    spread: float = 0.9
    width_hz: float = 4.0


@dataclass(frozen=True)
class DamageSpec:
    """Sidebands at every harmonic +- sideband_hz."""

    sideband_hz: float
    amplitude: float


@dataclass(frozen=True)
class SynthConfig:
    modes: tuple[ModeSpec, ...] = ()
    noise_floor: float = 0.0
    noise_source: NoiseSourceSpec | None = None
    damage: DamageSpec | None = None
    spectrum_len: int = 256
    freq_start_hz: float = 1.0
    freq_step_hz: float = 2.0
    peak_width_hz: float = 3.0
    amplitude_jitter: float = 0.1
    freq_jitter_hz: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.spectrum_len < 1:
            raise InvalidInputError("spectrum_len must be >= 1")
        if self.freq_step_hz <= 0 or self.peak_width_hz <= 0:
            raise InvalidInputError("freq_step_hz and peak_width_hz must be positive")
        if self.noise_floor < 0 or self.amplitude_jitter < 0 or self.freq_jitter_hz < 0:
            raise InvalidInputError("noise and jitter levels must be >= 0")
        top = self.freq_start_hz + self.freq_step_hz * (self.spectrum_len - 1)
        for mode in self.modes:
            if not self.freq_start_hz <= mode.fundamental_hz <= top:
                raise InvalidInputError(f"fundamental {mode.fundamental_hz} Hz outside [{self.freq_start_hz}, {top}]")
            if mode.amplitude < 0 or mode.harmonic_decay < 0 or mode.n_harmonics < 1:
                raise InvalidInputError("mode amplitude/decay must be >= 0 and n_harmonics >= 1")
        if self.noise_source is not None:
            ns = self.noise_source
            if ns.amplitude < 0 or not 0 <= ns.spread <= 1 or ns.width_hz <= 0:
                raise InvalidInputError("invalid noise source")
            for f in ns.peaks:
                if not self.freq_start_hz <= f <= top:
                    raise InvalidInputError(f"noise peak {f} Hz outside spectrum range")
        if self.damage is not None and self.damage.amplitude < 0:
            raise InvalidInputError("damage amplitude must be >= 0")

    @property
    def frequencies(self) -> np.ndarray:
        return self.freq_start_hz + self.freq_step_hz * np.arange(self.spectrum_len)


def _peak(freqs: np.ndarray, center: float, width: float, amplitude: float) -> np.ndarray:
    return amplitude * np.exp(-0.5 * ((freqs - center) / width) ** 2)


def synth_spectra(config: SynthConfig, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` spectra; returns (X, mode index per row, -1 when no modes)."""
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    f = config.frequencies
    X = np.zeros((count, config.spectrum_len))
    which = np.full(count, -1, dtype=np.int64)
    for i in range(count):
        row = X[i]
        if config.modes:
            j = int(rng.integers(len(config.modes)))
            which[i] = j
            mode = config.modes[j]
            f0 = mode.fundamental_hz + config.freq_jitter_hz * rng.standard_normal()
            amp = mode.amplitude * max(0.0, 1.0 + config.amplitude_jitter * rng.standard_normal())
            for k in range(1, mode.n_harmonics + 1):
                a_k = amp * mode.harmonic_decay ** (k - 1)
                row += _peak(f, k * f0, config.peak_width_hz, a_k)
                if config.damage is not None:
                    sb = config.damage.sideband_hz
                    row += _peak(f, k * f0 - sb, config.peak_width_hz, config.damage.amplitude)
                    row += _peak(f, k * f0 + sb, config.peak_width_hz, config.damage.amplitude)
        if config.noise_source is not None:
            ns = config.noise_source
            for fp in ns.peaks:
                scale = 1.0 + ns.spread * rng.uniform(-1.0, 1.0)
                row += _peak(f, fp, ns.width_hz, ns.amplitude * scale)
        if config.noise_floor > 0:
            row += config.noise_floor * np.abs(rng.standard_normal(config.spectrum_len))
    return X, which


def synth_stream(config: SynthConfig, count: int, *, segment: str = "predict", task_name: str = "synthetic") -> LabeledStream:
    """Deterministic stream for ``config.seed``; labels are mode indices (0 if no modes)."""
    rng = np.random.default_rng(config.seed)
    X, which = synth_spectra(config, count, rng)
    labels = [int(max(w, 0)) for w in which]
    env = "noisy" if config.noise_source is not None else "silent"
    return LabeledStream.from_arrays(X, labels, segment, task_name=task_name, environment=env)


# -- sources ---------------------------------------------------------------------


class SpectrumSource(Protocol):
    spectrum_len: int

    def draw(self, speed: int, condition: str, environment: str, count: int, rng: np.random.Generator) -> np.ndarray: ...


# ventilation fan near the test bench: 1440 rpm motor plus harmonics
DEFAULT_NOISE_PEAKS = (24.0, 48.0, 72.0, 96.0, 144.0)


@dataclass
class SyntheticFanSource:
    """Fan spectra for any (speed, condition, environment) cell."""

    spectrum_len: int = 256
    freq_start_hz: float = 1.0
    freq_step_hz: float = 2.0
    fan_amplitude: float = 1.0
    harmonic_decay: float = 0.6
    n_harmonics: int = 5
    noise_floor: float = 0.03
    noise_peaks: tuple[float, ...] = DEFAULT_NOISE_PEAKS
    noise_amplitude: float = 0.6
    noise_spread: float = 0.6
    damage: dict[str, DamageSpec] = field(
        default_factory=lambda: {
            "damage1": DamageSpec(sideband_hz=8.0, amplitude=0.35),
            "damage2": DamageSpec(sideband_hz=14.0, amplitude=0.35),
        }
    )

    def config(self, speed: int, condition: str, environment: str) -> SynthConfig:
        _check_cell(speed, condition, environment)
        modes = ()
        if speed:
            modes = (ModeSpec(speed / 60.0, self.harmonic_decay, self.fan_amplitude, self.n_harmonics),)
        noise = None
        if environment == "noisy":
            noise = NoiseSourceSpec(self.noise_peaks, self.noise_amplitude, self.noise_spread)
        damage = self.damage.get(condition) if speed else None
        return SynthConfig(
            modes=modes,
            noise_floor=self.noise_floor,
            noise_source=noise,
            damage=damage,
            spectrum_len=self.spectrum_len,
            freq_start_hz=self.freq_start_hz,
            freq_step_hz=self.freq_step_hz,
        )

    def draw(self, speed, condition, environment, count, rng):
        X, _ = synth_spectra(self.config(speed, condition, environment), count, rng)
        return X


def _check_cell(speed: int, condition: str, environment: str) -> None:
    if speed not in SPEEDS:
        raise InvalidInputError(f"unknown speed {speed}")
    if condition not in CONDITIONS:
        raise InvalidInputError(f"unknown condition {condition!r}")
    if environment not in ENVIRONMENTS:
        raise InvalidInputError(f"unknown environment {environment!r}")


# -- public cooling-fan dataset -----------------------------------------------

DATASET_SPECTRUM_LEN = 512

_SPEED_RE = re.compile(r"(?<!\d)(2500|2000|1500|0)[ _-]?rpm")
_COND_RE = re.compile(r"damage[ _-]?([12])")


def classify_path(rel: str) -> tuple[int, str, str] | None:
    """(speed, condition, environment) from path tokens, or None if no speed token.

    Expected tokens anywhere in the relative path (case-insensitive):
    ``<speed>rpm`` (2500/2000/1500/0, ``stop`` also means 0), ``damage1`` /
    ``damage2`` (otherwise normal), ``noisy``/``noise`` (otherwise silent).
    """
    low = rel.lower()
    m = _SPEED_RE.search(low)
    if m:
        speed = int(m.group(1))
    elif "stop" in low:
        speed = 0
    else:
        return None
    c = _COND_RE.search(low)
    condition = f"damage{c.group(1)}" if c else "normal"
    environment = "noisy" if "noisy" in low or "noise" in low else "silent"
    return speed, condition, environment


def _rows_to_spectra(rows: list[list[float]], path: Path) -> np.ndarray:
    """Accept one spectrum per row (512 values), one time window per row
    (1024 values), or a single column holding consecutive 512-blocks."""
    widths = {len(r) for r in rows}
    if widths == {1}:
        col = np.array([r[0] for r in rows])
        if col.size % DATASET_SPECTRUM_LEN:
            raise FormatError(f"{path}: single-column file with {col.size} values is not a multiple of 512")
        return col.reshape(-1, DATASET_SPECTRUM_LEN)
    if len(widths) != 1:
        raise FormatError(f"{path}: rows have inconsistent widths {sorted(widths)}")
    width = widths.pop()
    arr = np.asarray(rows)
    if width == DATASET_SPECTRUM_LEN:
        return np.abs(arr)
    if width == 2 * DATASET_SPECTRUM_LEN:
        return np.stack([fft_magnitude(SampleWindow(r)).bins for r in arr])
    if width > DATASET_SPECTRUM_LEN:
        # leading index/timestamp columns
        return np.abs(arr[:, -DATASET_SPECTRUM_LEN:])
    raise FormatError(f"{path}: rows have {width} values; expected 512 spectrum bins or 1024 samples")


def _read_numeric_csv(path: Path) -> list[list[float]]:
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, raw in enumerate(csv.reader(fh), start=1):
                fields = [c.strip() for c in raw if c.strip()]
                if not fields:
                    continue
                try:
                    rows.append([float(c) for c in fields])
                except ValueError:
                    numeric = []
                    for c in fields:
                        try:
                            numeric.append(float(c))
                        except ValueError:
                            pass
                    if lineno == 1 and len(numeric) < len(fields) // 2:
                        continue  # header
                    if not numeric:
                        raise FormatError(f"{path}:{lineno}: no numeric fields")
                    rows.append(numeric)
    except UnicodeDecodeError as exc:
        raise DatasetIOError(f"{path}: not a text CSV file") from exc
    except OSError as exc:
        raise DatasetIOError(f"{path}: {exc}") from exc
    if not rows:
        raise DatasetIOError(f"{path}: file holds no data rows")
    return rows


@dataclass
class CoolingFanDataset:
    """Spectra keyed by (speed, condition, environment)."""

    cells: dict[tuple[int, str, str], np.ndarray]
    root: Path | None = None
    spectrum_len: int = DATASET_SPECTRUM_LEN

    @property
    def counts(self) -> dict[tuple[int, str, str], int]:
        return {k: int(v.shape[0]) for k, v in sorted(self.cells.items())}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def draw(self, speed, condition, environment, count, rng):
        _check_cell(speed, condition, environment)
        data = self.cells.get((speed, condition, environment))
        if data is None and speed == 0:
            # a stopped fan has no damage signature
            data = self.cells.get((0, "normal", environment))
        have = 0 if data is None else data.shape[0]
        if have < count:
            raise InvalidInputError(
                f"need {count} samples of {speed} rpm/{condition}/{environment}, dataset has {have}"
            )
        start = int(rng.integers(0, have - count + 1))
        return data[start : start + count].copy()


def load_cooling_fan(path: str | Path) -> CoolingFanDataset:
    """Load every CSV under ``path`` whose path names a fan speed.

    Files are classified by :func:`classify_path`; CSV files that carry no
    speed token are rejected so a layout mismatch is never silently ignored.
    """
    root = Path(path)
    if not root.exists():
        raise DatasetIOError(f"{root}: no such file or directory")
    files = [root] if root.is_file() else sorted(p for p in root.rglob("*.csv") if p.is_file())
    if not files:
        raise DatasetIOError(f"{root}: no CSV files found")
    chunks: dict[tuple[int, str, str], list[np.ndarray]] = {}
    for p in files:
        rel = p.name if p == root else str(p.relative_to(root))
        key = classify_path(rel)
        if key is None:
            raise FormatError(f"{p}: cannot tell the fan speed from the path (expected e.g. '2500rpm')")
        chunks.setdefault(key, []).append(_rows_to_spectra(_read_numeric_csv(p), p))
    cells = {k: np.concatenate(v) for k, v in chunks.items()}
    ds = CoolingFanDataset(cells, root)
    log.info("loaded %d waveforms from %d files under %s", ds.total, len(files), root)
    return ds


# -- tasks -------------------------------------------------------------------------


@dataclass
class Task:
    name: str
    train: LabeledStream
    eval: LabeledStream
    truth: list
    kind: str  # "auc" or "accuracy"

    @property
    def is_anomalous(self) -> np.ndarray:
        return np.array([t == "anomalous" for t in self.truth])


def _split(total: int, parts: int) -> list[int]:
    return [len(a) for a in np.array_split(np.arange(total), parts)]


def build_task(
    task_name: str,
    source: SpectrumSource,
    *,
    train_env: str = "noisy",
    eval_env: str = "noisy",
    seed: int = 0,
) -> Task:
    """Assemble train and eval streams for one scenario.

    Train and eval draws come from independent child seeds, so the eval
    stream depends only on ``seed`` and ``eval_env``.
    """
    if task_name not in TASKS:
        raise InvalidInputError(f"unknown task {task_name!r}; choose from {', '.join(TASKS)}")
    ss = np.random.SeedSequence(seed)
    child_train, child_eval = ss.spawn(2)
    rng_train = np.random.default_rng([*child_train.generate_state(2), ENVIRONMENTS.index(train_env)])
    rng_eval = np.random.default_rng([*child_eval.generate_state(2), ENVIRONMENTS.index(eval_env)])

    if task_name.endswith("rpm"):
        target = int(task_name[:-3])
        Xtr = source.draw(target, "normal", train_env, RPM_TRAIN, rng_train)
        train = LabeledStream.from_arrays(Xtr, ["normal"] * RPM_TRAIN, "init", task_name=task_name, environment=train_env)
        order = [target] + [s for s in SPEEDS if s != target]
        blocks, truth = [], []
        for speed, cnt in zip(order, _split(RPM_EVAL, len(order))):
            blocks.append(source.draw(speed, "normal", eval_env, cnt, rng_eval))
            truth += ["normal" if speed == target else "anomalous"] * cnt
        kind = "auc"
    elif task_name.startswith("damage"):
        speeds = SPEEDS[:3]
        Xtr = np.concatenate(
            [source.draw(s, "normal", train_env, c, rng_train) for s, c in zip(speeds, _split(BIG_TRAIN, 3))]
        )
        train = LabeledStream.from_arrays(Xtr, ["normal"] * BIG_TRAIN, "init", task_name=task_name, environment=train_env)
        blocks, truth = [], []
        half = BIG_EVAL // 2
        for condition, label in (("normal", "normal"), (task_name, "anomalous")):
            for s, c in zip(speeds, _split(half, 3)):
                blocks.append(source.draw(s, condition, eval_env, c, rng_eval))
                truth += [label] * c
        kind = "auc"
    else:  # 4speeds
        parts = []
        labels: list = []
        for s, c in zip(SPEEDS, _split(BIG_TRAIN, 4)):
            parts.append(source.draw(s, "normal", train_env, c, rng_train))
            labels += [s] * c
        train = LabeledStream.from_arrays(np.concatenate(parts), labels, "init", task_name=task_name, environment=train_env)
        blocks, truth = [], []
        for s, c in zip(SPEEDS, _split(BIG_EVAL, 4)):
            blocks.append(source.draw(s, "normal", eval_env, c, rng_eval))
            truth += [s] * c
        kind = "accuracy"

    X_eval = np.concatenate(blocks)
    eval_stream = LabeledStream.from_arrays(X_eval, truth, "predict", task_name=task_name, environment=eval_env)
    return Task(task_name, train, eval_stream, truth, kind)
