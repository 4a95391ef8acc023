"""Port-current reconstruction from a pair of port-voltage waveforms.

Given a two-port admittance model and recorded V1(t), V2(t), the currents
follow from I1 = Y11 V1 + Y12 V2 and I2 = Y21 V1 + Y22 V2, with both port
currents taken positive INTO the network. Two routes are provided: a
state-space recurrence in the time domain (fast, causal, streaming-friendly)
and an FFT multiply/inverse route in the frequency domain. Both must agree
on band-limited records; that cross-check is the main validation lever.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass, field

import numpy as np

from .spectra import FrequencyResponse, interpolate
from .state_space import discretize, realize, simulate
from .vector_fit import RationalModel, eval_model_array, passivity_check
from .waveform import Waveform, require_aligned, resample  # noqa: F401  (resample re-exported)

_dm_cache_lock = threading.Lock()
_dm_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


@dataclass
class EstimationResult:
    """Estimated port currents plus pipeline diagnostics."""

    i1: Waveform
    i2: Waveform
    path: str  # "time_domain" | "freq_domain"
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ComparisonReport:
    """Relative-RMS comparison of an estimate against a reference record."""

    rel_rms_error: float
    max_abs_error: float
    reference_rms: float
    reference_is_zero: bool = False


def compare(estimate: Waveform, reference: Waveform) -> ComparisonReport:
    """RMS(estimate - reference) / RMS(reference), plus the peak deviation.

    A zero-RMS reference yields rel_rms_error = +inf with the degenerate
    flag set, so callers can branch on it instead of dividing by zero.
    """
    require_aligned(estimate, reference)
    diff = estimate.samples - reference.samples
    ref_rms = float(np.sqrt(np.mean(reference.samples**2)))
    max_abs = float(np.max(np.abs(diff)))
    if ref_rms == 0.0:
        return ComparisonReport(float("inf"), max_abs, 0.0, True)
    rel = float(np.sqrt(np.mean(diff**2)) / ref_rms)
    return ComparisonReport(rel, max_abs, ref_rms)


def _discrete_for(model: RationalModel, dt: float, method: str):
    """Realize + discretize, cached per (model, dt, method)."""
    key = (round(dt, 18), method)
    with _dm_cache_lock:
        per_model = _dm_cache.get(model)
        if per_model is not None and key in per_model:
            return per_model[key]
    dm = discretize(realize(model), dt, method)
    with _dm_cache_lock:
        _dm_cache.setdefault(model, {})[key] = dm
    return dm


def nice_time_domain(
    model: RationalModel,
    v1: Waveform,
    v2: Waveform,
    *,
    method: str = "zoh",
    initial_state: str = "steady",
    allow_nonpassive: bool = False,
) -> EstimationResult:
    """Estimate both port currents by state-space simulation.

    The model must be 2-port with e = 0, and passive unless
    ``allow_nonpassive`` overrides the check. Sign convention: positive
    current flows into the network at each port.
    """
    if model.n_ports != 2:
        raise ValueError("time-domain estimation expects a 2-port model")
    if np.any(model.e != 0.0):
        raise ValueError("model has a nonzero e term; refit with e disabled")
    require_aligned(v1, v2)

    passive = model.passive
    if passive is None:
        passive = passivity_check(model).is_passive
        model.passive = passive
    if not passive and not allow_nonpassive:
        raise ValueError(
            "model failed the passivity check; enforce passivity or pass "
            "allow_nonpassive=True"
        )

    dm = _discrete_for(model, v1.dt, method)
    i1, i2 = simulate(dm, [v1, v2], initial_state=initial_state)
    diagnostics = {
        "fit_error": model.fit_error,
        "passive": passive,
        "dc_mode": "steady_state" if initial_state == "steady" else "zero_state",
        "method": method,
    }
    return EstimationResult(i1, i2, "time_domain", diagnostics)


def _bin_admittance(
    source,
    bin_freqs: np.ndarray,
    *,
    extrapolate_dc: bool,
    allow_out_of_band: bool,
) -> tuple[np.ndarray, dict]:
    """Y at the FFT bin frequencies, with band clamping and DC policy."""
    diag: dict = {}
    if isinstance(source, RationalModel):
        fmax = source.band[1]
        dc_mode = "model"
    elif isinstance(source, FrequencyResponse):
        if source.kind != "Y":
            raise ValueError("frequency-domain estimation expects Y-kind data")
        fmax = float(source.freqs[-1])
        dc_mode = "explicit" if source.freqs[0] == 0.0 else "extrapolated"
        if dc_mode == "extrapolated" and not extrapolate_dc:
            raise ValueError(
                "tabulated data has no DC sample; pass extrapolate_dc=True to "
                "extend the lowest frequency's real part to DC"
            )
    else:
        raise TypeError("source must be a RationalModel or FrequencyResponse")

    out_of_band = bin_freqs > fmax * (1.0 + 1e-9)
    if np.any(out_of_band) and not allow_out_of_band:
        raise ValueError(
            f"{int(out_of_band.sum())} FFT bins lie above the model band "
            f"({fmax:.6g} Hz); pass allow_out_of_band=True to hold Y at the "
            "band edge there"
        )
    clamped = np.minimum(bin_freqs, fmax)
    uniq = np.unique(clamped)  # clamping repeats the band edge; interpolate wants ascending
    if isinstance(source, RationalModel):
        y_uniq = eval_model_array(source, uniq)
    else:
        y_uniq = interpolate(source, uniq, extrapolate_dc=extrapolate_dc).data
    y = y_uniq[np.searchsorted(uniq, clamped)]
    diag["dc_mode"] = dc_mode
    diag["n_out_of_band_bins"] = int(out_of_band.sum())
    return y, diag


def nice_freq_domain(
    source,
    v1: Waveform,
    v2: Waveform,
    *,
    extrapolate_dc: bool = False,
    allow_out_of_band: bool = False,
) -> EstimationResult:
    """Estimate both port currents by FFT, admittance multiply, inverse FFT.

    ``source`` is a fitted :class:`RationalModel` or a tabulated 2-port Y
    :class:`FrequencyResponse` covering the FFT bins (including DC, via an
    explicit sample or the DC extrapolation flag).

    Records are assumed to begin and end at DC steady state: the first
    sample is subtracted as a baseline before transforming (preventing
    wraparound steps) and its DC current contribution Y(0) * baseline is
    added back afterwards. No window is applied, so transient amplitudes
    are preserved. The record is zero-padded to the next power of two at
    least twice its length.
    """
    require_aligned(v1, v2)
    n = len(v1)
    dt = v1.dt
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    bin_freqs = np.fft.rfftfreq(nfft, dt)

    y_bins, diag = _bin_admittance(
        source, bin_freqs, extrapolate_dc=extrapolate_dc, allow_out_of_band=allow_out_of_band
    )
    if y_bins.shape[1:] != (2, 2):
        raise ValueError("frequency-domain estimation expects a 2-port source")

    base = np.array([v1.samples[0], v2.samples[0]])
    v1_spec = np.fft.rfft(v1.samples - base[0], nfft)
    v2_spec = np.fft.rfft(v2.samples - base[1], nfft)

    i1_spec = y_bins[:, 0, 0] * v1_spec + y_bins[:, 0, 1] * v2_spec
    i2_spec = y_bins[:, 1, 0] * v1_spec + y_bins[:, 1, 1] * v2_spec
    # conjugate symmetry of the implied full spectrum: DC and Nyquist bins real
    for spec in (i1_spec, i2_spec):
        spec[0] = spec[0].real
        spec[-1] = spec[-1].real

    i_dc = y_bins[0].real @ base
    i1_t = np.fft.irfft(i1_spec, nfft)[:n] + i_dc[0]
    i2_t = np.fft.irfft(i2_spec, nfft)[:n] + i_dc[1]

    # fraction of signal energy in bins held at the band edge
    total = float(np.sum(np.abs(v1_spec) ** 2 + np.abs(v2_spec) ** 2))
    if total > 0 and diag.get("n_out_of_band_bins", 0) > 0:
        k = diag["n_out_of_band_bins"]
        oob_energy = float(
            np.sum(np.abs(v1_spec[-k:]) ** 2 + np.abs(v2_spec[-k:]) ** 2)
        )
        diag["out_of_band_energy_fraction"] = oob_energy / total
    else:
        diag["out_of_band_energy_fraction"] = 0.0
    if isinstance(source, RationalModel):
        diag["fit_error"] = source.fit_error
        diag["passive"] = source.passive

    i1 = Waveform(v1.t0, dt, i1_t, unit="ampere")
    i2 = Waveform(v1.t0, dt, i2_t, unit="ampere")
    return EstimationResult(i1, i2, "freq_domain", diag)
