"""Uniformly sampled real time series and their CSV interchange format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNITS = ("volt", "ampere")

# t0/dt of two records must agree to this relative tolerance to be "aligned"
ALIGN_RTOL = 1e-9


class WaveformCsvError(ValueError):
    """Malformed or non-uniform waveform CSV input."""


@dataclass(frozen=True)
class Waveform:
    """Real samples on a uniform time grid: t_k = t0 + k*dt."""

    t0: float
    dt: float
    samples: np.ndarray
    unit: str = "volt"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a nonempty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def with_samples(self, samples, unit: str | None = None) -> Waveform:
        return Waveform(self.t0, self.dt, samples, unit or self.unit)


def aligned(a: Waveform, b: Waveform) -> bool:
    scale = max(abs(a.t0), abs(b.t0), a.dt)
    return (
        len(a) == len(b)
        and abs(a.dt - b.dt) <= ALIGN_RTOL * a.dt
        and abs(a.t0 - b.t0) <= ALIGN_RTOL * scale
    )


def require_aligned(*waves: Waveform):
    first = waves[0]
    for w in waves[1:]:
        if not aligned(first, w):
            raise ValueError(
                f"waveforms are not aligned: (t0={first.t0!r}, dt={first.dt!r}, "
                f"n={len(first)}) vs (t0={w.t0!r}, dt={w.dt!r}, n={len(w)})"
            )


def resample(w: Waveform, new_dt: float) -> Waveform:
    """Linear interpolation onto a new uniform grid over the same span.

    The start point is always preserved; the end point is preserved when the
    record span is an integer multiple of ``new_dt`` (otherwise the last new
    sample falls just short of it).
    """
    if new_dt <= 0:
        raise ValueError("new_dt must be > 0")
    span = w.t_end - w.t0
    n_new = int(np.floor(span / new_dt + 1e-9)) + 1
    new_t = w.t0 + new_dt * np.arange(n_new)
    new_samples = np.interp(new_t, w.times, w.samples)
    return Waveform(w.t0, new_dt, new_samples, w.unit)


def write_waveform_csv(path: str, w: Waveform):
    """Write "time_s,value" rows with 15 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time_s,value\n")
        for t, v in zip(w.times, w.samples):
            fh.write(f"{t:.15g},{v:.15g}\n")


def read_waveform_csv(path: str, unit: str = "volt") -> Waveform:
    """Read a waveform CSV, validating uniform sample spacing.

    Spacing must be uniform within 1e-9 relative; nonuniform records must be
    resampled externally first.
    """
    times, values = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "time_s,value":
            raise WaveformCsvError(
                f"{path}: expected header 'time_s,value', got {header!r}"
            )
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise WaveformCsvError(f"{path}:{line_no}: expected 2 columns")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError:
                raise WaveformCsvError(
                    f"{path}:{line_no}: non-numeric value"
                ) from None
    if len(times) < 1:
        raise WaveformCsvError(f"{path}: no samples")
    t = np.asarray(times)
    if len(t) == 1:
        return Waveform(t[0], 1.0, np.asarray(values), unit)
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-9 * dt + 1e-18):
        raise WaveformCsvError(
            f"{path}: sample times are not uniform within 1e-9 relative; "
            "resample the record first"
        )
    return Waveform(float(t[0]), dt, np.asarray(values), unit)
