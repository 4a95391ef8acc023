"""Lumped-element modeling: series-RLC branches, Pi networks, capacitor
equivalent-circuit fitting, and 2x-THRU fixture de-embedding.

A real decoupling capacitor is modeled as a parallel set of series-RLC legs;
the first leg captures the low-frequency response and further legs, with
progressively smaller L and C, refine the fit toward higher frequencies.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import least_squares

from .spectra import FrequencyResponse, capacitance_at

MAX_BRANCHES = 8

# log10-space fitting bounds, in SI units
_LOG_BOUNDS = {"r": (-9.0, 6.0), "l": (-15.0, 0.0), "c": (-15.0, 1.0)}


@dataclass(frozen=True)
class RlcBranch:
    """One series R-L-C leg. ``c=None`` means no capacitive term (R-L leg)."""

    r: float = 0.0
    l: float = 0.0
    c: float | None = None

    def __post_init__(self):
        if self.r < 0 or self.l < 0:
            raise ValueError("r and l must be >= 0")
        if self.c is not None and self.c <= 0:
            raise ValueError("c must be > 0 when present")
        if self.r == 0 and self.l == 0 and self.c is None:
            raise ValueError("branch needs at least one nonzero element")
        vals = [self.r, self.l] + ([self.c] if self.c is not None else [])
        if not all(np.isfinite(vals)):
            raise ValueError("branch values must be finite")


def branch_admittance(branch: RlcBranch, f) -> np.ndarray | complex:
    """Admittance of a series-RLC leg: Y = 1 / (r + j2pifL + 1/(j2pifC)).

    The capacitive term is omitted when ``c`` is absent. f = 0 is allowed
    only for branches without a capacitor (a capacitor is open at DC; the
    caller's DC policy must handle that limit).
    """
    farr = np.asarray(f, dtype=float)
    scalar = farr.ndim == 0
    farr = np.atleast_1d(farr)
    if branch.c is not None and np.any(farr == 0.0):
        raise ValueError("f = 0 is undefined for a branch with a series capacitor (open at DC)")
    w = 2.0 * np.pi * farr
    z = branch.r + 1j * w * branch.l
    if branch.c is not None:
        z = z + 1.0 / (1j * w * branch.c)
    y = 1.0 / z
    return complex(y[0]) if scalar else y


@dataclass(frozen=True)
class BranchSet:
    """Parallel combination of series-RLC legs; admittances add."""

    branches: tuple[RlcBranch, ...]

    def __init__(self, branches=()):
        branches = tuple(branches)
        if len(branches) > MAX_BRANCHES:
            raise ValueError(f"at most {MAX_BRANCHES} branches supported, got {len(branches)}")
        object.__setattr__(self, "branches", branches)

    def __len__(self) -> int:
        return len(self.branches)

    def admittance(self, f) -> np.ndarray:
        farr = np.atleast_1d(np.asarray(f, dtype=float))
        y = np.zeros(farr.shape, dtype=complex)
        for b in self.branches:
            y = y + branch_admittance(b, farr)
        return y


@dataclass(frozen=True)
class PiNetwork:
    """Two shunt legs (ya at port 1, yc at port 2) joined by a series leg yb."""

    ya: BranchSet = field(default_factory=BranchSet)
    yb: BranchSet = field(default_factory=BranchSet)
    yc: BranchSet = field(default_factory=BranchSet)

    def __post_init__(self):
        if len(self.yb) == 0:
            raise ValueError("the series leg yb must be nonempty (ports would be disconnected)")


def pi_y_params(net: PiNetwork, freqs) -> FrequencyResponse:
    """Y-parameters of a Pi network, read by inspection.

    Y11 = Ya + Yb, Y22 = Yc + Yb, Y12 = Y21 = -Yb at every frequency.
    """
    farr = np.atleast_1d(np.asarray(freqs, dtype=float))
    ya = net.ya.admittance(farr)
    yb = net.yb.admittance(farr)
    yc = net.yc.admittance(farr)
    data = np.empty((farr.size, 2, 2), dtype=complex)
    data[:, 0, 0] = ya + yb
    data[:, 1, 1] = yc + yb
    data[:, 0, 1] = -yb
    data[:, 1, 0] = -yb
    return FrequencyResponse(farr, data, kind="Y")


# ---------------------------------------------------------------------------
# equivalent-circuit fitting
# ---------------------------------------------------------------------------


@dataclass
class CircuitFitReport:
    misfit: float
    n_evaluations: int
    converged: bool
    bound_active: list[str] = field(default_factory=list)

    @property
    def warning(self) -> bool:
        return not self.converged or bool(self.bound_active)


def _branchset_from_log10(x: np.ndarray) -> BranchSet:
    vals = 10.0 ** x.reshape(-1, 3)
    return BranchSet([RlcBranch(r=v[0], l=v[1], c=v[2]) for v in vals])


def _seed_first_branch(target: FrequencyResponse) -> np.ndarray:
    """Heuristic single-branch seed.

    C comes from the effective capacitance at the lowest frequency, L from
    the inductive admittance at the highest, and R from the admittance peak
    at series resonance.
    """
    y = target.data[:, 0, 0]
    f = target.freqs
    c0 = capacitance_at(target, float(f[0]))
    if not np.isfinite(c0) or c0 <= 0:
        c0 = 1e-6
    im_hi = y[-1].imag
    if im_hi < 0:  # inductive at the top of the band
        l0 = -1.0 / (2.0 * np.pi * f[-1] * im_hi)
    else:
        l0 = 1e-10
    r0 = 1.0 / np.max(np.abs(y))
    if not np.isfinite(r0) or r0 <= 0:
        r0 = 1e-3
    return np.log10(np.array([r0, l0, c0]))


def _clip_to_bounds(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(x, lo + 1e-6, hi - 1e-6)


def fit_equivalent_circuit(
    target: FrequencyResponse,
    n_branches: int,
    *,
    log_mag_weighting: bool = False,
    max_iterations: int = 200,
    ftol: float = 1e-10,
) -> tuple[BranchSet, CircuitFitReport]:
    """Fit a parallel multi-branch series-RLC set to a 1-port Y target.

    Branches are added progressively: the first leg is fitted to the whole
    response from a low-frequency seed, then each additional leg starts one
    decade above the previous leg's resonance with 10x smaller C (and L) and
    all values are re-optimized jointly. Minimizes the mean squared relative
    error of the complex admittance over the grid; parameters live in log10
    space inside fixed physical bounds, so fitted R, L, C are always
    positive, and bounds that end up active are listed in the report.

    The target must span at least two decades of frequency. On
    non-convergence the best parameters so far are returned with
    ``report.converged = False`` rather than raising.
    """
    if target.kind != "Y" or target.n_ports != 1:
        raise ValueError("fit target must be a 1-port Y response")
    if not 1 <= n_branches <= MAX_BRANCHES:
        raise ValueError(f"n_branches must be in 1..{MAX_BRANCHES}")
    f = target.freqs
    if f[0] <= 0:
        raise ValueError("fit target grid must be strictly positive in frequency")
    if f[-1] / f[0] < 99.999:
        raise ValueError("fit target must cover at least 2 decades of frequency")

    y_t = target.data[:, 0, 0]
    scale = np.abs(y_t)
    if log_mag_weighting:
        w = 1.0 / np.maximum(np.log10(np.maximum(scale / scale.min(), 1.0)) + 1.0, 1e-12)
    else:
        w = np.ones_like(scale)

    def residuals(x: np.ndarray) -> np.ndarray:
        y_fit = _branchset_from_log10(x).admittance(f)
        rel = (y_fit - y_t) / scale * w
        return np.concatenate([rel.real, rel.imag])

    bounds_row = [_LOG_BOUNDS["r"], _LOG_BOUNDS["l"], _LOG_BOUNDS["c"]]
    x = _seed_first_branch(target)
    total_nfev = 0
    result = None
    for k in range(1, n_branches + 1):
        if k > 1:
            prev = x[-3:]
            x = np.concatenate([x, [prev[0], prev[1] - 1.0, prev[2] - 1.0]])
        lo = np.array([b[0] for b in bounds_row] * k)
        hi = np.array([b[1] for b in bounds_row] * k)
        budget = max_iterations * (3 * k + 1)
        result = least_squares(
            residuals,
            _clip_to_bounds(x, lo, hi),
            bounds=(lo, hi),
            method="trf",
            ftol=ftol,
            xtol=1e-14,
            gtol=1e-15,
            max_nfev=budget,
        )
        x = result.x
        total_nfev += int(result.nfev)

    names = [f"branch{k}.{p}" for k in range(n_branches) for p in ("r", "l", "c")]
    lo = np.array([b[0] for b in bounds_row] * n_branches)
    hi = np.array([b[1] for b in bounds_row] * n_branches)
    active = [
        names[i]
        for i in range(len(names))
        if x[i] - lo[i] < 1e-6 or hi[i] - x[i] < 1e-6
    ]
    fitted = _branchset_from_log10(x)
    rel = (fitted.admittance(f) - y_t) / scale
    misfit = float(np.mean(np.abs(rel) ** 2))
    converged = bool(result.status > 0) and result.nfev < max_iterations * (3 * n_branches + 1)
    report = CircuitFitReport(misfit, total_nfev, converged, active)
    if not converged:
        warnings.warn(
            f"equivalent-circuit fit did not converge after {total_nfev} evaluations "
            f"(misfit {misfit:.3g}); returning best-so-far",
            stacklevel=2,
        )
    return fitted, report


# ---------------------------------------------------------------------------
# 2x-THRU de-embedding
# ---------------------------------------------------------------------------


def _s_to_abcd(data: np.ndarray, z0: float) -> np.ndarray:
    s11 = data[:, 0, 0]
    s12 = data[:, 0, 1]
    s21 = data[:, 1, 0]
    s22 = data[:, 1, 1]
    if np.any(s21 == 0):
        raise ValueError("S21 = 0: network has no through path, ABCD undefined")
    den = 2.0 * s21
    abcd = np.empty_like(data)
    abcd[:, 0, 0] = ((1 + s11) * (1 - s22) + s12 * s21) / den
    abcd[:, 0, 1] = z0 * ((1 + s11) * (1 + s22) - s12 * s21) / den
    abcd[:, 1, 0] = ((1 - s11) * (1 - s22) - s12 * s21) / den / z0
    abcd[:, 1, 1] = ((1 - s11) * (1 + s22) + s12 * s21) / den
    return abcd


def _abcd_to_s(abcd: np.ndarray, z0: float) -> np.ndarray:
    a = abcd[:, 0, 0]
    b = abcd[:, 0, 1]
    c = abcd[:, 1, 0]
    d = abcd[:, 1, 1]
    den = a + b / z0 + c * z0 + d
    s = np.empty_like(abcd)
    s[:, 0, 0] = (a + b / z0 - c * z0 - d) / den
    s[:, 0, 1] = 2.0 * (a * d - b * c) / den
    s[:, 1, 0] = 2.0 / den
    s[:, 1, 1] = (-a + b / z0 - c * z0 + d) / den
    return s


def deembed_2x_thru(
    thru: FrequencyResponse, dut_fixtured: FrequencyResponse
) -> FrequencyResponse:
    """Remove a symmetric 2x-THRU fixture from a fixtured DUT measurement.

    The THRU's transfer (ABCD) matrix is bisected into identical halves by a
    principal matrix square root per frequency; each half is then inverted
    out of the fixtured measurement: Mdut = H^-1 Mfixtured H^-1.

    Both responses must be 2-port S-parameters on the same grid. A THRU that
    is asymmetric or non-reciprocal beyond 5 percent triggers a warning.
    """
    for name, resp in (("thru", thru), ("dut_fixtured", dut_fixtured)):
        if resp.kind != "S" or resp.n_ports != 2:
            raise ValueError(f"{name} must be a 2-port S response")
    if not np.array_equal(thru.freqs, dut_fixtured.freqs):
        raise ValueError("thru and dut_fixtured must share a frequency grid (interpolate first)")
    if thru.ref_impedance != dut_fixtured.ref_impedance:
        raise ValueError("thru and dut_fixtured must share a reference impedance")

    s = thru.data
    sym = np.max(np.abs(s[:, 0, 0] - s[:, 1, 1]) / np.maximum(np.abs(s[:, 0, 0]) + np.abs(s[:, 1, 1]), 1e-12))
    rec = np.max(np.abs(s[:, 0, 1] - s[:, 1, 0]) / np.maximum(np.abs(s[:, 0, 1]) + np.abs(s[:, 1, 0]), 1e-12))
    if max(sym, rec) > 0.05:
        warnings.warn(
            f"THRU deviates from symmetric/reciprocal by {max(sym, rec):.1%}; "
            "bisection assumes identical halves",
            stacklevel=2,
        )

    z0 = thru.ref_impedance
    m_thru = _s_to_abcd(thru.data, z0)
    m_dut = _s_to_abcd(dut_fixtured.data, z0)
    out = np.empty_like(m_dut)
    for k in range(m_thru.shape[0]):
        half = sla.sqrtm(m_thru[k])
        try:
            half_inv = np.linalg.inv(half)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                f"half-fixture matrix is singular at f = {thru.freqs[k]:.6g} Hz"
            ) from exc
        if not np.all(np.isfinite(half_inv)):
            raise ValueError(f"half-fixture matrix is singular at f = {thru.freqs[k]:.6g} Hz")
        out[k] = half_inv @ m_dut[k] @ half_inv
    return FrequencyResponse(
        thru.freqs, _abcd_to_s(out, z0), kind="S", ref_impedance=z0
    )


# ---------------------------------------------------------------------------
# JSON serialization (versioned)
# ---------------------------------------------------------------------------


def _branch_to_dict(b: RlcBranch) -> dict:
    d = {"r": b.r, "l": b.l}
    if b.c is not None:
        d["c"] = b.c
    return d


def _branch_from_dict(d: dict) -> RlcBranch:
    return RlcBranch(r=d.get("r", 0.0), l=d.get("l", 0.0), c=d.get("c"))


def pi_network_to_dict(net: PiNetwork) -> dict:
    return {
        "version": 1,
        "pi": {
            "ya": [_branch_to_dict(b) for b in net.ya.branches],
            "yb": [_branch_to_dict(b) for b in net.yb.branches],
            "yc": [_branch_to_dict(b) for b in net.yc.branches],
        },
    }


def pi_network_from_dict(doc: dict) -> PiNetwork:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported circuit document version {doc.get('version')!r}")
    pi = doc["pi"]
    return PiNetwork(
        ya=BranchSet([_branch_from_dict(d) for d in pi.get("ya", [])]),
        yb=BranchSet([_branch_from_dict(d) for d in pi.get("yb", [])]),
        yc=BranchSet([_branch_from_dict(d) for d in pi.get("yc", [])]),
    )


def save_pi_network(path: str, net: PiNetwork):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pi_network_to_dict(net), fh, indent=2)
        fh.write("\n")


def load_pi_network(path: str) -> PiNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return pi_network_from_dict(json.load(fh))
