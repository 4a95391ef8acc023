"""Touchstone 1.0 reader and writer (.s1p/.s2p/.y2p and general n-port).

Only version 1.0 is supported; files with a [Version] keyword are rejected
rather than misparsed. Noise-parameter sections in 2-port files are detected
(frequency restarts downward) and skipped with a warning.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .spectra import FrequencyResponse

FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}
FORMATS = ("RI", "MA", "DB")


class TouchstoneParseError(ValueError):
    """Malformed Touchstone input; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass
class TouchstoneOptions:
    """Option-line settings. Defaults follow the Touchstone 1.0 spec."""

    freq_unit: str = "GHz"
    param_kind: str = "S"
    value_format: str = "MA"
    ref_resistance: float = 50.0

    def __post_init__(self):
        if self.freq_unit.upper() not in FREQ_UNITS:
            raise ValueError(f"unknown frequency unit {self.freq_unit!r}")
        if self.param_kind.upper() not in ("S", "Y", "Z"):
            raise ValueError(f"unsupported parameter kind {self.param_kind!r}")
        if self.value_format.upper() not in FORMATS:
            raise ValueError(f"unknown value format {self.value_format!r}")
        if self.ref_resistance <= 0:
            raise ValueError("ref_resistance must be > 0")
        self.freq_unit = UNIT_NAMES[self.freq_unit.upper()]
        self.param_kind = self.param_kind.upper()
        self.value_format = self.value_format.upper()


def infer_ports_and_kind(filename: str) -> tuple[int, str]:
    """Port count and default parameter kind from a Touchstone extension."""
    m = re.search(r"\.([syz])(\d+)p$", filename.lower())
    if not m:
        raise ValueError(
            f"cannot infer port count from {filename!r}; expected an .sNp/.yNp/.zNp extension"
        )
    return int(m.group(2)), m.group(1).upper()


def _parse_option_line(tokens: list[str], line_no: int) -> TouchstoneOptions:
    unit, kind, fmt, r = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in FREQ_UNITS:
            unit = tok
        elif tok in ("S", "Y", "Z"):
            kind = tok
        elif tok in ("H", "G"):
            raise TouchstoneParseError(f"parameter kind {tok!r} is not supported", line_no)
        elif tok in FORMATS:
            fmt = tok
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneParseError("option 'R' is missing its resistance value", line_no)
            try:
                r = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneParseError(
                    f"non-numeric reference resistance {tokens[i + 1]!r}", line_no
                ) from None
            i += 1
        else:
            raise TouchstoneParseError(f"unknown option token {tokens[i]!r}", line_no)
        i += 1
    try:
        return TouchstoneOptions(UNIT_NAMES[unit], kind, fmt, r)
    except ValueError as exc:
        raise TouchstoneParseError(str(exc), line_no) from None


def _to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    if fmt == "MA":
        mag = a
    else:  # DB
        mag = 10.0 ** (a / 20.0)
    ang = math.radians(b)
    return complex(mag * math.cos(ang), mag * math.sin(ang))


def _from_complex(v: complex, fmt: str) -> tuple[float, float]:
    if fmt == "RI":
        return v.real, v.imag
    mag = abs(v)
    ang = math.degrees(math.atan2(v.imag, v.real))
    if fmt == "MA":
        return mag, ang
    if mag == 0.0:
        raise ValueError("cannot express zero magnitude in DB format")
    return 20.0 * math.log10(mag), ang


def _numbers(tokens: list[str], line_no: int) -> list[float]:
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise TouchstoneParseError(f"non-numeric token {tok!r}", line_no) from None
    return out


def parse_touchstone(text, n_ports: int) -> tuple[FrequencyResponse, TouchstoneOptions]:
    """Parse Touchstone 1.0 content into a :class:`FrequencyResponse`.

    ``text`` may be a string or an iterable of lines. The caller supplies
    ``n_ports`` (the CLI infers it from the file extension). Frequencies are
    returned in Hz; 2-port data honors the Touchstone row order
    S11 S21 S12 S22; matrices for n > 2 are row-major with one matrix row
    per line.
    """
    if n_ports < 1:
        raise ValueError("n_ports must be >= 1")
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]

    opts: TouchstoneOptions | None = None
    values_per_record = 1 + 2 * n_ports * n_ports
    rows: list[tuple[int, list[float]]] = []  # (line_no of record start, numbers)
    pending: list[float] | None = None
    pending_line = 0
    noise_from: int | None = None
    last_raw_freq: float | None = None

    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line.lower().startswith("[version"):
                raise TouchstoneParseError(
                    "Touchstone 2.0 ([Version] keyword) is not supported", line_no
                )
            raise TouchstoneParseError(f"unexpected keyword line {line!r}", line_no)
        if line.startswith("#"):
            if opts is not None:
                raise TouchstoneParseError("duplicate option line", line_no)
            if rows or pending:
                raise TouchstoneParseError("option line appears after data", line_no)
            opts = _parse_option_line(line[1:].split(), line_no)
            continue
        if opts is None:
            raise TouchstoneParseError("data encountered before the option line", line_no)
        nums = _numbers(line.split(), line_no)
        if n_ports <= 2:
            # One record per line. A 2-port line whose frequency restarts
            # downward begins the noise-parameter section.
            if (
                n_ports == 2
                and last_raw_freq is not None
                and nums
                and nums[0] < last_raw_freq
            ):
                noise_from = line_no
                break
            if len(nums) != values_per_record:
                raise TouchstoneParseError(
                    f"expected {values_per_record} values per frequency record, got {len(nums)}",
                    line_no,
                )
            rows.append((line_no, nums))
            last_raw_freq = nums[0]
        else:
            if pending is None:
                pending = nums
                pending_line = line_no
            else:
                pending.extend(nums)
            if len(pending) >= values_per_record:
                if len(pending) > values_per_record:
                    raise TouchstoneParseError(
                        f"expected {values_per_record} values per frequency record, "
                        f"got {len(pending)}",
                        pending_line,
                    )
                rows.append((pending_line, pending))
                pending = None

    if opts is None:
        raise TouchstoneParseError("missing option line ('# ...')", len(lines))
    if pending is not None:
        raise TouchstoneParseError(
            f"incomplete frequency record ({len(pending)} of {values_per_record} values)",
            pending_line,
        )
    if not rows:
        raise TouchstoneParseError("file contains no data rows", len(lines))
    if noise_from is not None:
        warnings.warn(
            f"noise-parameter section starting at line {noise_from} was skipped",
            stacklevel=2,
        )

    scale = FREQ_UNITS[opts.freq_unit.upper()]
    fmt = opts.value_format
    freqs: list[float] = []
    mats: list[np.ndarray] = []
    for line_no, nums in rows:
        f = nums[0] * scale
        if freqs and f <= freqs[-1]:
            raise TouchstoneParseError(f"frequency {nums[0]!r} is not ascending", line_no)
        pairs = nums[1:]
        vals = [_to_complex(pairs[2 * i], pairs[2 * i + 1], fmt) for i in range(n_ports * n_ports)]
        m = np.array(vals, dtype=complex).reshape(n_ports, n_ports)
        if n_ports == 2:
            m = m.T  # file order S11 S21 S12 S22 is column-major
        freqs.append(f)
        mats.append(m)

    resp = FrequencyResponse(
        np.array(freqs),
        np.array(mats),
        kind=opts.param_kind,
        ref_impedance=opts.ref_resistance,
    )
    return resp, opts


def write_touchstone(resp: FrequencyResponse, opts: TouchstoneOptions | None = None) -> str:
    """Render a response as Touchstone 1.0 text.

    Values are printed with 16 significant digits so that a parse/write round
    trip is lossless to well below 1e-12 relative. The caller is responsible
    for converting kinds beforehand; opts.param_kind must match resp.kind.
    """
    if opts is None:
        opts = TouchstoneOptions("Hz", resp.kind, "RI", resp.ref_impedance)
    if opts.param_kind != resp.kind:
        raise ValueError(
            f"options declare kind {opts.param_kind!r} but response is {resp.kind!r}"
        )
    n = resp.n_ports
    scale = FREQ_UNITS[opts.freq_unit.upper()]
    fmt = opts.value_format
    out = [f"# {opts.freq_unit} {opts.param_kind} {fmt} R {_fmt_num(opts.ref_resistance)}"]
    for k in range(resp.n_freqs):
        m = resp.data[k]
        if n == 2:
            m = m.T
        pairs = []
        for v in m.reshape(-1):
            a, b = _from_complex(v, fmt)
            pairs.append((a, b))
        f_txt = _fmt_num(resp.freqs[k] / scale)
        if n <= 2:
            row = " ".join(f"{_fmt_num(a)} {_fmt_num(b)}" for a, b in pairs)
            out.append(f"{f_txt} {row}")
        else:
            # one matrix row per line, frequency on the first
            for r in range(n):
                chunk = pairs[r * n : (r + 1) * n]
                row = " ".join(f"{_fmt_num(a)} {_fmt_num(b)}" for a, b in chunk)
                out.append(f"{f_txt} {row}" if r == 0 else f"  {row}")
    return "\n".join(out) + "\n"


def _fmt_num(x: float) -> str:
    return f"{x:.16g}"


def read_touchstone_file(path: str, n_ports: int | None = None):
    """Read a Touchstone file, inferring the port count when not given."""
    if n_ports is None:
        n_ports, _ = infer_ports_and_kind(path)
    with open(path, "r", encoding="utf-8") as fh:
        return parse_touchstone(fh.read(), n_ports)


def write_touchstone_file(path: str, resp: FrequencyResponse, opts: TouchstoneOptions | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_touchstone(resp, opts))
