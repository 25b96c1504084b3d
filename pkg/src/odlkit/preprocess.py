"""Acceleration window -> magnitude spectrum preprocessing.

A 1024-sample window at 1024 Hz gives 512 one-hertz bins (1..512 Hz, DC
dropped); averaging adjacent pairs yields the 256-bin, 2 Hz spectrum the
models consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Literal

import numpy as np
import numpy.typing as npt

from .errors import FormatError, InvalidInputError

FloatArray = npt.NDArray[np.float64]

DEFAULT_SAMPLE_RATE_HZ = 1024.0


@dataclass(frozen=True)
class SampleWindow:
    """Raw time-domain acceleration window."""

    values: FloatArray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidInputError("window must be one-dimensional")
        n = values.size
        if n < 2 or n & (n - 1):
            raise InvalidInputError(f"window length must be a power of two >= 2, got {n}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("window contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise InvalidInputError("sample_rate_hz must be positive")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum; bin i sits at freq_start_hz + i * freq_step_hz."""

    bins: FloatArray
    freq_start_hz: float
    freq_step_hz: float

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim != 1 or bins.size < 1:
            raise InvalidInputError("spectrum needs at least one bin")
        if np.any(bins < 0):
            raise InvalidInputError("spectrum bins must be non-negative")
        if not self.freq_step_hz > 0:
            raise InvalidInputError("freq_step_hz must be positive")
        object.__setattr__(self, "bins", bins)

    def __len__(self) -> int:
        return int(self.bins.size)

    @property
    def frequencies_hz(self) -> FloatArray:
        return self.freq_start_hz + self.freq_step_hz * np.arange(self.bins.size)


@dataclass(frozen=True)
class PreprocessConfig:
    downsample_factor: int = 2
    scale_divisor: float | None = None
    reduce: Literal["mean", "max"] = "mean"

    def __post_init__(self) -> None:
        if self.downsample_factor < 1:
            raise InvalidInputError("downsample_factor must be >= 1")
        if self.scale_divisor is not None and not self.scale_divisor > 0:
            raise InvalidInputError("scale_divisor must be positive")
        if self.reduce not in ("mean", "max"):
            raise InvalidInputError(f"unknown reduce mode {self.reduce!r}")


def fft_magnitude(window: SampleWindow) -> Spectrum:
    """Magnitude of bins 1..L/2 scaled by 2/L, so a sine of amplitude A reads A."""
    x = window.values
    n = x.size
    mags = np.abs(np.fft.rfft(x))[1:] * (2.0 / n)
    step = window.sample_rate_hz / n
    return Spectrum(bins=mags, freq_start_hz=step, freq_step_hz=step)


def downsample(
    spectrum: Spectrum, factor: int, reduce: Literal["mean", "max"] = "mean"
) -> Spectrum:
    if factor < 1:
        raise InvalidInputError("factor must be a positive integer")
    n = spectrum.bins.size
    if n % factor:
        raise InvalidInputError(f"{n} bins not divisible by factor {factor}")
    blocks = spectrum.bins.reshape(n // factor, factor)
    if reduce == "mean":
        bins = blocks.mean(axis=1)
    elif reduce == "max":
        bins = blocks.max(axis=1)
    else:
        raise InvalidInputError(f"unknown reduce mode {reduce!r}")
    return Spectrum(
        bins=bins,
        freq_start_hz=spectrum.freq_start_hz,
        freq_step_hz=spectrum.freq_step_hz * factor,
    )


def pipeline(window: SampleWindow, config: PreprocessConfig = PreprocessConfig()) -> Spectrum:
    spec = downsample(fft_magnitude(window), config.downsample_factor, config.reduce)
    if config.scale_divisor is not None:
        spec = Spectrum(spec.bins / config.scale_divisor, spec.freq_start_hz, spec.freq_step_hz)
    return spec


# -- file formats ------------------------------------------------------------


@dataclass
class RawWindowReader:
    """Read windows from CSV (one value per line, blank line between windows)
    or JSONL ({"t": index, "values": [...]}).

    A CSV file with no blank lines is split into consecutive windows of
    ``window_len`` samples.
    """

    path: Path
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    window_len: int | None = None
    _fmt: str = field(init=False, default="")

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        suffix = self.path.suffix.lower()
        self._fmt = "jsonl" if suffix in (".jsonl", ".json", ".ndjson") else "csv"

    def __iter__(self) -> Iterator[SampleWindow]:
        if self._fmt == "jsonl":
            yield from self._iter_jsonl()
        else:
            yield from self._iter_csv()

    def _iter_jsonl(self) -> Iterator[SampleWindow]:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    values = np.asarray(record["values"], dtype=np.float64)
                    yield SampleWindow(values, self.sample_rate_hz)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"{self.path}:{lineno}: bad window record: {exc}") from exc

    def _iter_csv(self) -> Iterator[SampleWindow]:
        chunk: list[float] = []
        start_line = 1
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text:
                    if chunk:
                        yield self._make(chunk, start_line)
                        chunk = []
                    start_line = lineno + 1
                    continue
                try:
                    chunk.append(float(text.split(",")[0]))
                except ValueError as exc:
                    raise FormatError(f"{self.path}:{lineno}: not a number: {text!r}") from exc
                if self.window_len is not None and len(chunk) == self.window_len:
                    yield self._make(chunk, start_line)
                    chunk = []
                    start_line = lineno + 1
        if chunk:
            yield self._make(chunk, start_line)

    def _make(self, chunk: list[float], start_line: int) -> SampleWindow:
        try:
            return SampleWindow(np.asarray(chunk), self.sample_rate_hz)
        except InvalidInputError as exc:
            raise FormatError(f"{self.path}:{start_line}: {exc}") from exc


def spectrum_to_record(spec: Spectrum) -> dict:
    return {"bins": spec.bins.tolist(), "f0": spec.freq_start_hz, "df": spec.freq_step_hz}


def spectrum_from_record(record: dict) -> Spectrum:
    return Spectrum(np.asarray(record["bins"], dtype=np.float64), float(record["f0"]), float(record["df"]))


def write_spectra(path: str | Path, spectra: Iterable[Spectrum]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for spec in spectra:
            fh.write(json.dumps(spectrum_to_record(spec)) + "\n")
            count += 1
    return count


def read_spectra(path: str | Path) -> list[Spectrum]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(spectrum_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad spectrum record: {exc}") from exc
    return out
