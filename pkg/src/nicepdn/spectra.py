"""Tabulated n-port frequency responses and network-parameter algebra.

The central container is :class:`FrequencyResponse`: a stack of complex
n x n parameter matrices (S, Y or Z) on an ascending frequency grid with a
single real reference impedance. Conversions work in admittance space where
possible because PDN elements combine additively there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

VALID_KINDS = ("S", "Y", "Z")

# LU solves past this condition estimate are reported, not rejected.
COND_WARN_THRESHOLD = 1e12


@dataclass(frozen=True)
class PortMatrixSample:
    """One frequency row of a response: (freq, n x n matrix)."""

    freq: float
    matrix: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("port matrix sample contains non-finite entries")


@dataclass(frozen=True)
class FrequencyResponse:
    """Tabulated n-port network parameters on an ascending frequency grid.

    Parameters
    ----------
    freqs : array of float
        Frequencies in Hz, strictly ascending. f = 0 is only meaningful for
        Y/Z data (S at DC is ill-defined for reactive networks).
    data : array of complex, shape (n_freqs, n_ports, n_ports)
        One parameter matrix per frequency.
    kind : {"S", "Y", "Z"}
    ref_impedance : float
        Real reference impedance in ohms, common to all ports.
    """

    freqs: np.ndarray
    data: np.ndarray
    kind: str = "S"
    ref_impedance: float = 50.0

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        data = np.asarray(self.data, dtype=complex)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ValueError("freqs must be a nonempty 1-D array")
        if not np.all(np.isfinite(freqs)):
            raise ValueError("freqs must be finite")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs must be strictly ascending")
        if freqs[0] < 0:
            raise ValueError("negative frequencies are not supported")
        if self.kind not in VALID_KINDS:
            raise ValueError(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")
        if freqs[0] == 0.0 and self.kind == "S":
            raise ValueError("f = 0 is only allowed for kind Y or Z")
        if data.ndim != 3 or data.shape[0] != freqs.size or data.shape[1] != data.shape[2]:
            raise ValueError(
                f"data must have shape (n_freqs, n, n); got {data.shape} for {freqs.size} frequencies"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains non-finite entries")
        if not (np.isrealobj(np.asarray(self.ref_impedance)) and self.ref_impedance > 0):
            raise ValueError("ref_impedance must be real and > 0")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "data", data)

    @property
    def n_ports(self) -> int:
        return self.data.shape[1]

    @property
    def n_freqs(self) -> int:
        return self.freqs.size

    def sample(self, index: int) -> PortMatrixSample:
        return PortMatrixSample(float(self.freqs[index]), self.data[index])

    def entry(self, i: int, j: int) -> np.ndarray:
        """The (i, j) parameter as a 1-D array over frequency."""
        return self.data[:, i, j]


def _solve_per_freq(lhs: np.ndarray, rhs: np.ndarray, freqs: np.ndarray, what: str) -> np.ndarray:
    """Solve lhs[k] @ x[k] = rhs[k] for every frequency, naming failures."""
    out = np.empty_like(rhs)
    worst_cond = 0.0
    worst_freq = freqs[0]
    for k in range(lhs.shape[0]):
        cond = np.linalg.cond(lhs[k])
        if cond > worst_cond:
            worst_cond, worst_freq = cond, freqs[k]
        try:
            out[k] = np.linalg.solve(lhs[k], rhs[k])
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"singular {what} matrix at f = {freqs[k]:.6g} Hz") from exc
    if worst_cond > COND_WARN_THRESHOLD:
        warnings.warn(
            f"{what} conversion is ill-conditioned near f = {worst_freq:.6g} Hz "
            f"(condition estimate {worst_cond:.3g})",
            stacklevel=3,
        )
    return out


def s_to_y(resp: FrequencyResponse) -> FrequencyResponse:
    """Convert S-parameters to Y-parameters (real reference impedance).

    Uses Y = (1/Z0) (I + S)^-1 (I - S) per frequency. Raises if the input is
    not S-kind or if (I + S) is singular at some frequency.
    """
    if resp.kind != "S":
        raise ValueError(f"s_to_y expects kind 'S', got {resp.kind!r}")
    eye = np.eye(resp.n_ports)
    y = _solve_per_freq(eye + resp.data, eye - resp.data, resp.freqs, "(I + S)") / resp.ref_impedance
    return FrequencyResponse(resp.freqs, y, kind="Y", ref_impedance=resp.ref_impedance)


def y_to_s(resp: FrequencyResponse) -> FrequencyResponse:
    """Convert Y-parameters to S-parameters; inverse of :func:`s_to_y`."""
    if resp.kind != "Y":
        raise ValueError(f"y_to_s expects kind 'Y', got {resp.kind!r}")
    if resp.freqs[0] == 0.0:
        raise ValueError("cannot convert a response containing f = 0 to S-parameters")
    eye = np.eye(resp.n_ports)
    z0y = resp.ref_impedance * resp.data
    # (I - Z0 Y) and (I + Z0 Y)^-1 commute, so a single solve suffices.
    s = _solve_per_freq(eye + z0y, eye - z0y, resp.freqs, "(I + Z0*Y)")
    return FrequencyResponse(resp.freqs, s, kind="S", ref_impedance=resp.ref_impedance)


def y_to_z(resp: FrequencyResponse) -> FrequencyResponse:
    """Invert Y to Z per frequency."""
    if resp.kind != "Y":
        raise ValueError(f"y_to_z expects kind 'Y', got {resp.kind!r}")
    eye = np.broadcast_to(np.eye(resp.n_ports), resp.data.shape)
    z = _solve_per_freq(resp.data, np.array(eye, dtype=complex), resp.freqs, "Y")
    return FrequencyResponse(resp.freqs, z, kind="Z", ref_impedance=resp.ref_impedance)


def z_to_y(resp: FrequencyResponse) -> FrequencyResponse:
    """Invert Z to Y per frequency."""
    if resp.kind != "Z":
        raise ValueError(f"z_to_y expects kind 'Z', got {resp.kind!r}")
    eye = np.broadcast_to(np.eye(resp.n_ports), resp.data.shape)
    y = _solve_per_freq(resp.data, np.array(eye, dtype=complex), resp.freqs, "Z")
    return FrequencyResponse(resp.freqs, y, kind="Y", ref_impedance=resp.ref_impedance)


def convert(resp: FrequencyResponse, to_kind: str) -> FrequencyResponse:
    """Convert between S, Y and Z kinds, routing through Y when needed."""
    if to_kind not in VALID_KINDS:
        raise ValueError(f"unknown target kind {to_kind!r}")
    if resp.kind == to_kind:
        return resp
    as_y = {"S": s_to_y, "Y": lambda r: r, "Z": z_to_y}[resp.kind](resp)
    return {"S": y_to_s, "Y": lambda r: r, "Z": y_to_z}[to_kind](as_y)


def interpolate(
    resp: FrequencyResponse,
    target_freqs,
    *,
    extrapolate_dc: bool = False,
) -> FrequencyResponse:
    """Interpolate a response onto a new frequency grid.

    Real and imaginary parts are interpolated element-wise, linearly in
    log10(f); values at existing grid points are returned bit-exactly. A
    segment adjoining an explicit DC sample is interpolated linearly in f
    (log10 is undefined at 0).

    With ``extrapolate_dc=True`` a request for f = 0 on a grid without a DC
    sample returns the lowest-frequency sample's real part with zero
    imaginary part (only meaningful for Y/Z data).

    Raises if any target lies outside [min(freqs), max(freqs)] and is not
    covered by the DC rule.
    """
    targets = np.atleast_1d(np.asarray(target_freqs, dtype=float))
    if targets.ndim != 1 or targets.size == 0:
        raise ValueError("target_freqs must be a nonempty 1-D array")
    if np.any(np.diff(targets) <= 0):
        raise ValueError("target_freqs must be strictly ascending")
    if resp.n_freqs < 2 and not np.array_equal(targets, resp.freqs):
        raise ValueError("interpolation requires at least 2 frequency samples")

    fmin, fmax = resp.freqs[0], resp.freqs[-1]
    out = np.empty((targets.size, resp.n_ports, resp.n_ports), dtype=complex)
    dc_extrapolated = targets[0] == 0.0 and fmin > 0.0
    if dc_extrapolated:
        if not extrapolate_dc:
            raise ValueError(
                "target f = 0 is below the tabulated grid; pass extrapolate_dc=True "
                "to copy the lowest sample's real part"
            )
        if resp.kind == "S":
            raise ValueError("DC extrapolation is only defined for Y/Z data")
        out[0] = resp.data[0].real
    inner = targets[1:] if dc_extrapolated else targets
    lo = 1 if dc_extrapolated else 0
    if inner.size:
        if inner[0] < fmin or inner[-1] > fmax:
            bad = inner[0] if inner[0] < fmin else inner[-1]
            raise ValueError(
                f"target frequency {bad:.6g} Hz outside tabulated range [{fmin:.6g}, {fmax:.6g}] Hz"
            )
        out[lo:] = _interp_in_band(resp, inner)
    return FrequencyResponse(targets, out, kind=resp.kind, ref_impedance=resp.ref_impedance)


def _interp_in_band(resp: FrequencyResponse, targets: np.ndarray) -> np.ndarray:
    freqs = resp.freqs
    n = resp.n_ports
    out = np.empty((targets.size, n, n), dtype=complex)

    exact = np.isin(targets, freqs)
    if np.any(exact):
        idx = np.searchsorted(freqs, targets[exact])
        out[exact] = resp.data[idx]
    rest = ~exact
    if not np.any(rest):
        return out

    t = targets[rest]
    if freqs[0] == 0.0:
        # Split off the segment between the DC sample and the first positive knot.
        in_dc_seg = t < freqs[1]
        if np.any(in_dc_seg):
            w = (t[in_dc_seg] / freqs[1])[:, None, None]
            seg = resp.data[0] * (1.0 - w) + resp.data[1] * w
            sub = np.where(rest)[0][in_dc_seg]
            out[sub] = seg
        t = t[~in_dc_seg]
        rest_idx = np.where(rest)[0][~in_dc_seg]
        pos_freqs, pos_data = freqs[1:], resp.data[1:]
    else:
        rest_idx = np.where(rest)[0]
        pos_freqs, pos_data = freqs, resp.data
    if t.size:
        logf = np.log10(pos_freqs)
        logt = np.log10(t)
        flat = pos_data.reshape(pos_data.shape[0], n * n)
        cols = np.empty((t.size, n * n), dtype=complex)
        for c in range(n * n):
            cols[:, c] = np.interp(logt, logf, flat[:, c].real) + 1j * np.interp(
                logt, logf, flat[:, c].imag
            )
        out[rest_idx] = cols.reshape(t.size, n, n)
    return out


def embed_shunt(resp: FrequencyResponse, port: int, shunt: FrequencyResponse) -> FrequencyResponse:
    """Attach a 1-port shunt admittance across one port of a Y response.

    Models a probe or termination hanging off a network port: only the
    diagonal entry Y[port, port] changes, by the shunt's own admittance.
    The shunt grid must cover the response grid; it is interpolated onto it.
    """
    if resp.kind != "Y":
        raise ValueError("embed_shunt operates on Y-parameters")
    if shunt.kind != "Y" or shunt.n_ports != 1:
        raise ValueError("shunt must be a 1-port Y response")
    if not 0 <= port < resp.n_ports:
        raise ValueError(f"port {port} out of range for a {resp.n_ports}-port response")
    shunt_on_grid = shunt if np.array_equal(shunt.freqs, resp.freqs) else interpolate(shunt, resp.freqs)
    data = resp.data.copy()
    data[:, port, port] += shunt_on_grid.data[:, 0, 0]
    return FrequencyResponse(resp.freqs, data, kind="Y", ref_impedance=resp.ref_impedance)


def capacitance_at(resp: FrequencyResponse, f: float) -> float:
    """Effective capacitance Im{Y11(f)} / (2 pi f) of a 1-port response.

    Between grid points Im(Y11) is interpolated linearly in f, which keeps
    the identity C(f) = C exact for an ideal capacitor at any frequency.
    """
    if resp.kind != "Y" or resp.n_ports != 1:
        raise ValueError("capacitance_at expects a 1-port Y response")
    if f <= 0:
        raise ValueError("capacitance is evaluated at f > 0")
    if not (resp.freqs[0] <= f <= resp.freqs[-1]):
        raise ValueError(
            f"f = {f:.6g} Hz outside tabulated range [{resp.freqs[0]:.6g}, {resp.freqs[-1]:.6g}] Hz"
        )
    im = float(np.interp(f, resp.freqs, resp.data[:, 0, 0].imag))
    return im / (2.0 * np.pi * f)
