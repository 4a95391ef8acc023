"""Synthetic ground-truth bench: transient-simulate a Pi-network PDN with a
programmable current-sink load, then run the estimation pipeline end to end
against the simulated records and score it.

The transient engine is fixed-step modified nodal analysis with trapezoidal
companion models for every L and C, integrated at an oversampled internal
step and decimated to the requested record rate. Because the circuit is
linear and the step is fixed, the whole per-step update collapses to one
affine map z -> M z + p*i_load + q over the branch-state vector, which the
main loop applies directly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import (
    BranchSet,
    PiNetwork,
    RlcBranch,
    pi_network_from_dict,
    pi_network_to_dict,
    pi_y_params,
)
from .estimator import ComparisonReport, compare, nice_freq_domain, nice_time_domain
from .vector_fit import FitOptions, RationalModel, passivity_check, vector_fit
from .waveform import Waveform

LOAD_KINDS = ("pulse", "ramp", "sine", "sawtooth", "exponential", "pwl")

FIT_POINTS_PER_DECADE = 40


@dataclass(frozen=True)
class LoadProfile:
    """Analytic load-current profile i(t) >= 0 drawn from port 2.

    Parameters are interpreted per kind:

    - pulse: baseline -> baseline+amplitude over ``rise`` after ``delay``,
      hold ``width``, return over ``fall``.
    - ramp: rise to baseline+amplitude over ``rise`` after ``delay``, hold.
    - sine: raised-cosine tone of peak ``amplitude`` and ``period`` starting
      at ``delay``; ``width`` (if set) limits the active duration.
    - sawtooth: linear rise over period-fall, drop over ``fall``; ``width``
      as for sine.
    - exponential: first-order approach to baseline+amplitude with ``tau``.
    - pwl: piecewise-linear through ``points`` [(t, i), ...], held outside.
    """

    kind: str
    baseline: float = 0.0
    amplitude: float = 0.0
    delay: float = 0.0
    rise: float = 0.0
    width: float | None = None
    fall: float = 0.0
    period: float | None = None
    tau: float | None = None
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in LOAD_KINDS:
            raise ValueError(f"load kind must be one of {LOAD_KINDS}")
        for name in ("baseline", "delay", "rise", "fall"):
            if getattr(self, name) < 0:
                raise ValueError(f"load {name} must be >= 0")
        if self.kind == "pwl":
            pts = tuple((float(t), float(i)) for t, i in self.points)
            if len(pts) < 2:
                raise ValueError("pwl profile needs at least 2 breakpoints")
            ts = [t for t, _ in pts]
            if any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("pwl breakpoints must be >= 0 and strictly ascending")
            if any(i < 0 for _, i in pts):
                raise ValueError("pwl currents must be >= 0 (sink only)")
            object.__setattr__(self, "points", pts)
            return
        if self.baseline + self.amplitude < 0:
            raise ValueError("profile current would go negative (sink only)")
        if self.kind == "pulse" and self.width is None:
            raise ValueError("pulse profile requires width")
        if self.kind in ("sine", "sawtooth"):
            if not self.period or self.period <= 0:
                raise ValueError(f"{self.kind} profile requires period > 0")
            if self.kind == "sawtooth" and not 0 < self.fall < self.period:
                raise ValueError("sawtooth requires 0 < fall < period")
        if self.kind == "exponential" and (not self.tau or self.tau <= 0):
            raise ValueError("exponential profile requires tau > 0")

    def current(self, t) -> np.ndarray:
        """Evaluate i(t) analytically on an array of times."""
        t = np.asarray(t, dtype=float)
        base, amp = self.baseline, self.amplitude
        if self.kind == "pwl":
            ts = np.array([p[0] for p in self.points])
            vals = np.array([p[1] for p in self.points])
            return np.interp(t, ts, vals)
        if self.kind == "pulse":
            bp = np.array(
                [
                    self.delay,
                    self.delay + self.rise,
                    self.delay + self.rise + self.width,
                    self.delay + self.rise + self.width + self.fall,
                ]
            )
            vals = np.array([base, base + amp, base + amp, base])
            return np.interp(t, bp, vals)
        if self.kind == "ramp":
            bp = np.array([self.delay, self.delay + max(self.rise, 0.0)])
            vals = np.array([base, base + amp])
            return np.interp(t, bp, vals)
        rel = t - self.delay
        active = rel >= 0
        if self.width is not None:
            active &= rel < self.width
        out = np.full(t.shape, base)
        if self.kind == "sine":
            out[active] = base + 0.5 * amp * (1.0 - np.cos(2.0 * np.pi * rel[active] / self.period))
        elif self.kind == "sawtooth":
            phase = np.mod(rel[active], self.period)
            up = self.period - self.fall
            shape = np.where(phase < up, phase / up, (self.period - phase) / self.fall)
            out[active] = base + amp * shape
        elif self.kind == "exponential":
            out[active] = base + amp * (1.0 - np.exp(-rel[active] / self.tau))
        return out


@dataclass(frozen=True)
class LabScenario:
    """Bench description: network, source, load, and record timing."""

    network: PiNetwork
    source_voltage: float
    source_resistance: float
    load: LoadProfile
    record_dt: float
    record_len: int
    sim_oversample: int = 4

    def __post_init__(self):
        if self.record_dt <= 0:
            raise ValueError("record_dt must be > 0")
        if self.record_len < 2:
            raise ValueError("record_len must be >= 2")
        if self.sim_oversample < 2:
            raise ValueError("sim_oversample must be >= 2")
        if self.source_resistance < 0:
            raise ValueError("source_resistance must be >= 0")
        if self.source_voltage < 0:
            raise ValueError("source_voltage must be >= 0")
        h = self.record_dt / self.sim_oversample
        tc = _min_time_constant(self.network)
        if tc is not None and h > tc / 5.0:
            raise ValueError(
                f"internal step {h:.3g} s does not resolve the fastest branch time "
                f"constant {tc:.3g} s (need step <= time constant / 5; decrease "
                "record_dt or increase sim_oversample)"
            )
        for leg, bs in (("ya", self.network.ya), ("yb", self.network.yb), ("yc", self.network.yc)):
            for b in bs.branches:
                if b.c is None and b.r == 0.0:
                    raise ValueError(
                        f"branch in {leg} with no capacitor needs r > 0 "
                        "(an ideal inductive short has no DC operating point)"
                    )

    @property
    def internal_dt(self) -> float:
        return self.record_dt / self.sim_oversample


def _branch_time_constant(b: RlcBranch) -> float | None:
    """1 / |fastest natural frequency| of one leg, None if static."""
    if b.c is not None and b.l > 0:
        # roots of L C s^2 + R C s + 1
        roots = np.roots([b.l * b.c, b.r * b.c, 1.0])
        return 1.0 / float(np.max(np.abs(roots)))
    if b.c is not None and b.r > 0:
        return b.r * b.c
    if b.l > 0 and b.r > 0:
        return b.l / b.r
    return None


def _min_time_constant(net: PiNetwork) -> float | None:
    tcs = [
        tc
        for bs in (net.ya, net.yb, net.yc)
        for b in bs.branches
        if (tc := _branch_time_constant(b)) is not None
    ]
    return min(tcs) if tcs else None


def network_order(net: PiNetwork) -> int:
    """Number of poles of the exact rational admittance of the network."""
    order = 0
    for bs in (net.ya, net.yb, net.yc):
        for b in bs.branches:
            if b.c is not None and b.l > 0:
                order += 2
            elif b.c is not None or b.l > 0:
                order += 1
    return order


# ---------------------------------------------------------------------------
# transient engine
# ---------------------------------------------------------------------------


class _TrapezoidalPdn:
    """Affine stepping maps for the 2-node Pi bench at a fixed step h.

    Branch states are (current, capacitor voltage, inductor voltage) per leg;
    the trapezoidal companion reduces each series leg to a Norton pair
    (g_eq, g_eq * E_hist), so one small nodal solve per step suffices. All
    relations are linear, so they are assembled once into
    z' = M z + p*i_load + q and [v1, v2, i_src] = N z + r*i_load + s.
    """

    def __init__(self, sc: LabScenario):
        net = sc.network
        h = sc.internal_dt
        legs = (
            [(b, 0, -1) for b in net.ya.branches]
            + [(b, 0, 1) for b in net.yb.branches]
            + [(b, 1, -1) for b in net.yc.branches]
        )
        nb = len(legs)
        self.nb = nb
        r = np.array([b.r for b, _, _ in legs])
        l = np.array([b.l for b, _, _ in legs])
        has_c = np.array([b.c is not None for b, _, _ in legs])
        c = np.array([b.c if b.c is not None else np.inf for b, _, _ in legs])
        self.has_c = has_c
        self.has_l = l > 0
        two_l_h = 2.0 * l / h
        h_2c = np.where(has_c, h / (2.0 * c), 0.0)
        self.two_l_h = two_l_h
        self.h_2c = h_2c
        geq = 1.0 / (r + two_l_h + h_2c)

        ainc = np.zeros((2, nb))
        for i, (_, a, b_node) in enumerate(legs):
            ainc[a, i] += 1.0
            if b_node >= 0:
                ainc[b_node, i] -= 1.0
        self.ainc = ainc
        self.legs = legs
        self.r_vals = r

        rsrc = sc.source_resistance
        self.mna = rsrc == 0.0
        gb = ainc @ np.diag(geq) @ ainc.T
        if self.mna:
            g = np.zeros((3, 3))
            g[:2, :2] = gb
            g[0, 2] = -1.0  # source branch current into node 1
            g[2, 0] = 1.0
        else:
            g = gb.copy()
            g[0, 0] += 1.0 / rsrc
        try:
            sinv = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular nodal matrix: network has a floating node") from exc

        # E_hist = Hz z  (per-leg history voltage of the Norton companion)
        hz = np.zeros((nb, 3 * nb))
        hz[:, :nb] = np.diag(-two_l_h + h_2c)
        hz[:, nb : 2 * nb] = np.eye(nb)
        hz[:, 2 * nb :] = -np.eye(nb)

        n_unk = 3 if self.mna else 2
        b_hist = np.zeros((n_unk, 3 * nb))
        b_hist[:2] = ainc @ (geq[:, None] * hz)
        b_il = np.zeros(n_unk)
        b_il[1] = -1.0
        b_const = np.zeros(n_unk)
        if self.mna:
            b_const[2] = sc.source_voltage
        else:
            b_const[0] = sc.source_voltage / rsrc

        u = sinv @ b_hist  # unknowns = U z + u_il*il + u_0
        u_il = sinv @ b_il
        u_0 = sinv @ b_const

        vab_z = ainc.T @ u[:2]
        vab_il = ainc.T @ u_il[:2]
        vab_0 = ainc.T @ u_0[:2]
        cur_z = geq[:, None] * (vab_z - hz)
        cur_il = geq * vab_il
        cur_0 = geq * vab_0

        e_cur = np.zeros((nb, 3 * nb))
        e_cur[:, :nb] = np.eye(nb)
        e_vc = np.zeros((nb, 3 * nb))
        e_vc[:, nb : 2 * nb] = np.eye(nb)
        e_vl = np.zeros((nb, 3 * nb))
        e_vl[:, 2 * nb :] = np.eye(nb)

        vc_z = e_vc + h_2c[:, None] * (cur_z + e_cur)
        vl_z = two_l_h[:, None] * (cur_z - e_cur) - e_vl
        self.m = np.vstack([cur_z, vc_z, vl_z])
        self.p = np.concatenate([cur_il, h_2c * cur_il, two_l_h * cur_il])
        self.q = np.concatenate([cur_0, h_2c * cur_0, two_l_h * cur_0])

        # outputs [v1, v2, i_src]
        n_out = np.zeros((3, 3 * nb))
        r_out = np.zeros(3)
        s_out = np.zeros(3)
        n_out[:2] = u[:2]
        r_out[:2] = u_il[:2]
        s_out[:2] = u_0[:2]
        if self.mna:
            n_out[2] = u[2]
            r_out[2] = u_il[2]
            s_out[2] = u_0[2]
        else:
            n_out[2] = -u[0] / rsrc
            r_out[2] = -u_il[0] / rsrc
            s_out[2] = (sc.source_voltage - u_0[0]) / rsrc
        self.n_out = n_out
        self.r_out = r_out
        self.s_out = s_out
        self.sc = sc

    def dc_state(self, i_load0: float) -> tuple[np.ndarray, np.ndarray]:
        """DC operating point: caps open, inductors shorted to their R."""
        sc = self.sc
        nb = self.nb
        gdc = np.where(self.has_c, 0.0, 1.0 / self.r_vals)
        gb = self.ainc @ np.diag(gdc) @ self.ainc.T
        if self.mna:
            g = np.zeros((3, 3))
            g[:2, :2] = gb
            g[0, 2] = -1.0
            g[2, 0] = 1.0
            rhs = np.array([0.0, -i_load0, sc.source_voltage])
        else:
            g = gb.copy()
            g[0, 0] += 1.0 / sc.source_resistance
            rhs = np.array([sc.source_voltage / sc.source_resistance, -i_load0])
        try:
            unk = np.linalg.solve(g, rhs)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "singular DC nodal matrix: no DC path supports the baseline load"
            ) from exc
        v = unk[:2]
        vab = self.ainc.T @ v
        cur = np.where(self.has_c, 0.0, gdc * vab)
        vc = np.where(self.has_c, vab - cur * self.r_vals, 0.0)
        vl = np.zeros(nb)
        z = np.concatenate([cur, vc, vl])
        i_src = unk[2] if self.mna else (sc.source_voltage - v[0]) / sc.source_resistance
        return z, np.array([v[0], v[1], i_src])


def simulate_pdn(sc: LabScenario) -> tuple[Waveform, Waveform, Waveform, Waveform]:
    """Transient-simulate the bench; returns (v1, v2, i_load, i_src).

    Starts from the DC steady state for the load's t = 0 value, integrates
    with the trapezoidal rule at the oversampled internal step h, and
    decimates to the record rate. The load current is evaluated analytically
    at every internal step, never pre-sampled.

    Decimation averages each pair of adjacent internal steps (record times
    sit at t0 + h/2). The trapezoidal rule is marginally stable at its
    Nyquist rate, so derivative corners in the load ring with period 2h;
    plain subsampling would alias that ring into a slow bias, while the
    two-tap average cancels it exactly. The same filter is applied to all
    four records, and since it is LTI it commutes with the network
    admittance, leaving the voltage-to-current relation that the estimator
    relies on untouched.
    """
    engine = _TrapezoidalPdn(sc)
    os_ = sc.sim_oversample
    n_rec = sc.record_len
    n_sub = (n_rec - 1) * os_ + 1
    h = sc.internal_dt

    t_sub = h * np.arange(n_sub + 1)
    il_sub = sc.load.current(t_sub)

    z, out0 = engine.dc_state(float(il_sub[0]))
    out_a = np.empty((n_rec, 3))  # outputs at substeps m*os
    out_b = np.empty((n_rec, 3))  # outputs at substeps m*os + 1
    out_a[0] = out0

    m, p, q = engine.m, engine.p, engine.q
    n_out, r_out, s_out = engine.n_out, engine.r_out, engine.s_out
    for k in range(1, n_sub + 1):
        il = il_sub[k]
        phase = k % os_
        if phase <= 1:
            o = n_out @ z + r_out * il + s_out
            if phase == 0:
                out_a[k // os_] = o
            else:
                out_b[(k - 1) // os_] = o
        z = m @ z + p * il + q
    # outputs at substep k are computed from z_{k-1}: the nodal solve of step k

    rec = 0.5 * (out_a + out_b)
    dt = sc.record_dt
    t0 = 0.5 * h
    ks = os_ * np.arange(n_rec)
    i_load = 0.5 * (il_sub[ks] + il_sub[ks + 1])
    return (
        Waveform(t0, dt, rec[:, 0], unit="volt"),
        Waveform(t0, dt, rec[:, 1], unit="volt"),
        Waveform(t0, dt, i_load, unit="ampere"),
        Waveform(t0, dt, rec[:, 2], unit="ampere"),
    )


# ---------------------------------------------------------------------------
# end-to-end lab run
# ---------------------------------------------------------------------------


@dataclass
class LabReport:
    """Scores of one end-to-end run plus pipeline diagnostics."""

    report1: ComparisonReport  # source-side current vs estimate
    report2: ComparisonReport  # load current vs (sign-adjusted) estimate
    runtime: dict
    scenario: LabScenario
    diagnostics: dict = field(default_factory=dict)


def fit_grid(sc: LabScenario) -> np.ndarray:
    """Log frequency grid spanning the record's resolvable band."""
    fmin = 1.0 / (10.0 * sc.record_len * sc.record_dt)
    fmax = 1.0 / (2.0 * sc.record_dt)
    n = max(int(np.ceil(FIT_POINTS_PER_DECADE * np.log10(fmax / fmin))) + 1, 20)
    return np.geomspace(fmin, fmax, n)


def fit_scenario_model(sc: LabScenario, fit_opts: FitOptions | None = None) -> RationalModel:
    """Vector-fit the scenario network's exact admittance over the lab band."""
    opts = fit_opts or FitOptions()
    n_poles = opts.n_poles if opts.n_poles is not None else max(network_order(sc.network), 2)
    resp = pi_y_params(sc.network, fit_grid(sc))
    return vector_fit(resp, n_poles, opts.n_iter, opts.weighting, fit_e=opts.fit_e)


def run_lab(
    sc: LabScenario,
    fit_opts: FitOptions | None = None,
    path: str = "time",
    *,
    method: str = "zoh",
    allow_nonpassive: bool = False,
) -> LabReport:
    """Simulate, fit, estimate, and score one scenario.

    ``path`` selects the estimation route ("time" or "freq"). The estimated
    port-2 current is sign-flipped before comparison so it overlays the load
    profile (positive current into the network equals minus the load draw).
    A failed passivity check aborts unless ``allow_nonpassive`` is set.
    """
    if path not in ("time", "freq"):
        raise ValueError("path must be 'time' or 'freq'")
    t0 = time.perf_counter()
    v1, v2, i_load, i_src = simulate_pdn(sc)
    t_sim = time.perf_counter()

    model = fit_scenario_model(sc, fit_opts)
    p_report = passivity_check(model)
    model.passive = p_report.is_passive
    if not p_report.is_passive and not allow_nonpassive:
        raise ValueError(
            f"fitted model failed the passivity check (worst eigenvalue "
            f"{p_report.worst():.3g} S over {len(p_report.violations)} interval(s)); "
            "rerun with allow_nonpassive=True to proceed anyway"
        )
    t_fit = time.perf_counter()

    if path == "time":
        est = nice_time_domain(
            model, v1, v2, method=method, allow_nonpassive=allow_nonpassive
        )
    else:
        est = nice_freq_domain(model, v1, v2)
    t_est = time.perf_counter()

    minus_i2 = est.i2.with_samples(-est.i2.samples)
    report2 = compare(minus_i2, i_load)
    report1 = compare(est.i1, i_src)
    runtime = {
        "simulate_s": t_sim - t0,
        "fit_s": t_fit - t_sim,
        "estimate_s": t_est - t_fit,
        "total_s": time.perf_counter() - t0,
    }
    diagnostics = dict(est.diagnostics)
    diagnostics["fit_error"] = model.fit_error
    diagnostics["passive"] = p_report.is_passive
    diagnostics["path"] = est.path
    return LabReport(report1, report2, runtime, sc, diagnostics)


# ---------------------------------------------------------------------------
# default bench and presets
# ---------------------------------------------------------------------------


def default_network() -> PiNetwork:
    """A plausible two-capacitor Pi PDN in the character of a small test
    board: bulk + mid-frequency ceramics on both ports, milliohm-class
    series interconnect. Values are representative, not a specific board.
    """
    cap_bank = BranchSet(
        [
            RlcBranch(r=5e-3, l=2e-9, c=100e-6),
            RlcBranch(r=2e-3, l=0.5e-9, c=1e-6),
        ]
    )
    series = BranchSet([RlcBranch(r=10e-3, l=5e-9)])
    return PiNetwork(ya=cap_bank, yb=series, yc=cap_bank)


def preset_scenario(name: str, *, record_len: int = 100_000) -> LabScenario:
    """Named bench scenarios for the five canonical load shapes."""
    profiles = {
        "pulse": LoadProfile(
            "pulse", baseline=0.1, amplitude=1.0, delay=20e-6, rise=10e-9,
            width=20e-6, fall=10e-9,
        ),
        "ramp": LoadProfile("ramp", baseline=0.1, amplitude=1.0, delay=20e-6, rise=20e-6),
        "sine": LoadProfile(
            "sine", baseline=0.1, amplitude=0.5, delay=10e-6, period=4e-6, width=80e-6
        ),
        "sawtooth": LoadProfile(
            "sawtooth", baseline=0.1, amplitude=0.8, delay=10e-6, period=8e-6,
            fall=0.4e-6, width=80e-6,
        ),
        "exponential": LoadProfile(
            "exponential", baseline=0.1, amplitude=1.0, delay=20e-6, tau=5e-6
        ),
    }
    if name not in profiles:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(profiles)}")
    return LabScenario(
        network=default_network(),
        source_voltage=1.2,
        source_resistance=10e-3,
        load=profiles[name],
        record_dt=1e-9,
        record_len=record_len,
        sim_oversample=4,
    )


# ---------------------------------------------------------------------------
# scenario JSON
# ---------------------------------------------------------------------------


def _load_to_dict(p: LoadProfile) -> dict:
    d = {"kind": p.kind, "baseline": p.baseline, "amplitude": p.amplitude, "delay": p.delay}
    if p.kind == "pulse":
        d.update(rise=p.rise, width=p.width, fall=p.fall)
    elif p.kind == "ramp":
        d.update(rise=p.rise)
    elif p.kind == "sine":
        d.update(period=p.period, width=p.width)
    elif p.kind == "sawtooth":
        d.update(period=p.period, fall=p.fall, width=p.width)
    elif p.kind == "exponential":
        d.update(tau=p.tau)
    elif p.kind == "pwl":
        d = {"kind": "pwl", "points": [[t, i] for t, i in p.points]}
    return d


def _load_from_dict(d: dict) -> LoadProfile:
    kind = d["kind"]
    if kind == "pwl":
        return LoadProfile("pwl", points=tuple((t, i) for t, i in d["points"]))
    kwargs = {
        k: d[k]
        for k in ("baseline", "amplitude", "delay", "rise", "width", "fall", "period", "tau")
        if k in d and d[k] is not None
    }
    return LoadProfile(kind, **kwargs)


def scenario_to_dict(sc: LabScenario) -> dict:
    return {
        "version": 1,
        "network": pi_network_to_dict(sc.network)["pi"],
        "source_voltage": sc.source_voltage,
        "source_resistance": sc.source_resistance,
        "load": _load_to_dict(sc.load),
        "record_dt": sc.record_dt,
        "record_len": sc.record_len,
        "sim_oversample": sc.sim_oversample,
    }


def scenario_from_dict(doc: dict) -> LabScenario:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported scenario version {doc.get('version')!r}")
    net = pi_network_from_dict({"version": 1, "pi": doc["network"]})
    return LabScenario(
        network=net,
        source_voltage=float(doc["source_voltage"]),
        source_resistance=float(doc["source_resistance"]),
        load=_load_from_dict(doc["load"]),
        record_dt=float(doc["record_dt"]),
        record_len=int(doc["record_len"]),
        sim_oversample=int(doc.get("sim_oversample", 4)),
    )


def save_scenario(path: str, sc: LabScenario):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")


def load_scenario(path: str) -> LabScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
