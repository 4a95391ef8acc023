"""Real state-space realizations of pole-residue models and their
discrete-time simulation.

The continuous A matrix is block diagonal: a 1x1 block per real pole and a
2x2 block [[a, b], [-b, a]] per conjugate pair (the real embedding of the
complex pole), repeated once per input column. Because every block is the
embedding of a complex scalar, both zero-order-hold and trapezoidal
discretization have closed forms per block, and the time recurrence reduces
to one first-order complex filter per block, which keeps simulation linear
in samples x states with compiled inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .vector_fit import RationalModel, _conjugate_index, evaluate
from .waveform import Waveform, require_aligned

DISCRETIZATION_METHODS = ("zoh", "trapezoidal")


@dataclass(frozen=True)
class StateSpaceModel:
    """Real (A, B, C, D) with block-diagonal A; H(s) = C (sI-A)^-1 B + D."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    block_poles: tuple[complex, ...]  # one complex pole per block, per input copy

    def __post_init__(self):
        if self.a.size and np.any(np.real(np.linalg.eigvals(self.a)) >= 0):
            raise ValueError("state matrix has eigenvalues with Re >= 0")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    def transfer(self, freqs) -> np.ndarray:
        """H(j 2 pi f), shape (n_freqs, n_out, n_in). For verification."""
        farr = np.atleast_1d(np.asarray(freqs, dtype=float))
        out = np.empty((farr.size, self.n_outputs, self.n_inputs), dtype=complex)
        eye = np.eye(self.n_states)
        for k, f in enumerate(farr):
            s = 2j * np.pi * f
            if self.n_states:
                out[k] = self.c @ np.linalg.solve(s * eye - self.a, self.b) + self.d
            else:
                out[k] = self.d.astype(complex)
        return out


@dataclass(frozen=True)
class DiscreteModel:
    """Discrete recurrence x[k+1] = ad x[k] + bd u[k], y[k] = c x[k] + d u[k]."""

    ad: np.ndarray
    bd: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dt: float
    method: str
    block_poles: tuple[complex, ...]  # continuous poles; fix the block sizes

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.method not in DISCRETIZATION_METHODS:
            raise ValueError(f"method must be one of {DISCRETIZATION_METHODS}")
        if self.ad.size:
            radius = float(np.max(np.abs(np.linalg.eigvals(self.ad))))
            if radius >= 1.0:
                raise ValueError(f"discrete model is unstable (spectral radius {radius})")

    @property
    def n_states(self) -> int:
        return self.ad.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.bd.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]


def _pole_slots(model: RationalModel) -> list[tuple[str, int]]:
    """One entry per realization block: ('real', k) or ('pair', k)."""
    cindex = _conjugate_index(model.poles)
    slots = []
    for k in range(model.n_poles):
        if cindex[k] == 0:
            slots.append(("real", k))
        elif cindex[k] == 1:
            slots.append(("pair", k))
    return slots


def realize(model: RationalModel) -> StateSpaceModel:
    """Build the real block-diagonal realization of a pole-residue model.

    Each real pole contributes one state per input with b = 1 and
    c = residue column; each conjugate pair contributes a 2x2 rotation block
    per input with b rows [2, 0] and c columns [Re R, Im R]. The feedthrough
    d is copied. Models with a proportional (e) term cannot be realized;
    refit with the e term disabled.
    """
    if np.any(model.e != 0.0):
        raise ValueError(
            "model has a nonzero proportional (e) term; refit with e disabled "
            "before realizing for time-domain use"
        )
    n = model.n_ports
    slots = _pole_slots(model)
    states_per_input = sum(1 if kind == "real" else 2 for kind, _ in slots)
    n_states = states_per_input * n

    a = np.zeros((n_states, n_states))
    b = np.zeros((n_states, n))
    c = np.zeros((n, n_states))
    block_poles = []
    row = 0
    for j in range(n):  # one copy of the pole set per input column
        for kind, k in slots:
            p = model.poles[k]
            r_col = model.residues[k][:, j]
            if kind == "real":
                a[row, row] = p.real
                b[row, j] = 1.0
                c[:, row] = r_col.real
                block_poles.append(complex(p.real, 0.0))
                row += 1
            else:
                a[row, row] = a[row + 1, row + 1] = p.real
                a[row, row + 1] = p.imag
                a[row + 1, row] = -p.imag
                b[row, j] = 2.0
                c[:, row] = r_col.real
                c[:, row + 1] = r_col.imag
                block_poles.append(p)
                row += 2

    ssm = StateSpaceModel(a, b, c, model.d.copy(), tuple(block_poles))
    _verify_realization(ssm, model)
    return ssm


def _verify_realization(ssm: StateSpaceModel, model: RationalModel):
    fmin, fmax = model.band
    if not (fmin > 0 and fmax > fmin):
        fmin, fmax = 1.0, 1e9
    check = np.geomspace(fmin, fmax, 20)
    h_ss = ssm.transfer(check)
    h_rat = evaluate(model, check).data
    scale = max(float(np.max(np.abs(h_rat))), 1e-300)
    err = float(np.max(np.abs(h_ss - h_rat))) / scale
    if err > 1e-9:
        raise RuntimeError(
            f"state-space realization disagrees with the pole-residue model "
            f"(max relative error {err:.3g})"
        )


def _rot(v: complex) -> np.ndarray:
    """Real 2x2 embedding of 'multiply the (x1 + j x2) state by conj(v)'."""
    return np.array([[v.real, v.imag], [-v.imag, v.real]])


def _zoh_block(alpha: float, beta: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zoh (ad, input map) for the block of pole alpha + j beta.

    For a real pole (beta = 0) the 1x1 case applies: ad = exp(alpha dt),
    input gain (exp(alpha dt) - 1)/alpha.
    """
    p = complex(alpha, beta)
    mu = np.exp(p * dt)
    gain = (mu - 1.0) / p if p != 0 else complex(dt)
    if beta == 0.0:
        return np.array([[mu.real]]), np.array([[gain.real]])
    return _rot(mu), _rot(gain)


def _tustin_block(alpha: float, beta: float, dt: float):
    """Trapezoidal (ad, input map, state map, feedthrough scalar) per block."""
    p = complex(alpha, beta)
    m = 1.0 - 0.5 * dt * p
    mu = (1.0 + 0.5 * dt * p) / m
    bgain = dt / m
    dgain = 0.5 * dt / m
    if beta == 0.0:
        return (
            np.array([[mu.real]]),
            np.array([[bgain.real]]),
            np.array([[dgain.real]]),
            mu,
        )
    return _rot(mu), _rot(bgain), _rot(dgain), mu


def discretize(ssm: StateSpaceModel, dt: float, method: str = "zoh") -> DiscreteModel:
    """Discretize per block with closed forms (no general matrix exponential).

    zoh integrates each block exponential exactly; trapezoidal applies the
    bilinear transform, which also modifies the feedthrough term.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if method not in DISCRETIZATION_METHODS:
        raise ValueError(f"method must be one of {DISCRETIZATION_METHODS}")
    n_states = ssm.n_states
    ad = np.zeros((n_states, n_states))
    bd = np.zeros_like(ssm.b)
    d = ssm.d.copy()
    row = 0
    for p in ssm.block_poles:
        size = 1 if p.imag == 0.0 else 2
        sl = slice(row, row + size)
        if method == "zoh":
            ad_blk, gain = _zoh_block(p.real, p.imag, dt)
            bd[sl] = gain @ ssm.b[sl]
        else:
            ad_blk, bgain, dgain, _ = _tustin_block(p.real, p.imag, dt)
            bd[sl] = bgain @ ssm.b[sl]
            d = d + ssm.c[:, sl] @ (dgain @ ssm.b[sl])
        ad[sl, sl] = ad_blk
        row += size
    return DiscreteModel(ad, bd, ssm.c.copy(), d, dt, method, ssm.block_poles)


def steady_state(dm: DiscreteModel, u0: np.ndarray) -> np.ndarray:
    """State x with x = ad x + bd u0 (DC equilibrium for constant input)."""
    if dm.n_states == 0:
        return np.zeros(0)
    return np.linalg.solve(np.eye(dm.n_states) - dm.ad, dm.bd @ u0)


def _run_blocks(dm: DiscreteModel, u: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """States over time via one complex first-order filter per block."""
    n_samples = u.shape[1]
    x = np.empty((dm.n_states, n_samples))
    row = 0
    for p in dm.block_poles:
        size = 1 if p.imag == 0.0 else 2
        sl = slice(row, row + size)
        v = dm.bd[sl] @ u  # (size, K) forcing term
        lam = dm.ad[row, row] if size == 1 else complex(dm.ad[row, row], dm.ad[row + 1, row])
        if size == 1:
            z0 = x0[row]
            w = v[0]
        else:
            z0 = complex(x0[row], x0[row + 1])
            w = v[0] + 1j * v[1]
        # f[k] = lam f[k-1] + w[k] with f[-1] = z0, so f[k] = x[k+1]
        f = lfilter([1.0], [1.0, -lam], w, zi=np.array([lam * z0]))[0]
        z = np.concatenate([[z0], f[:-1]])
        if size == 1:
            x[row] = z.real
        else:
            x[row] = z.real
            x[row + 1] = z.imag
        row += size
    return x


def simulate(
    dm: DiscreteModel,
    inputs: list[Waveform],
    *,
    initial_state: str = "steady",
) -> list[Waveform]:
    """Run the discrete recurrence over aligned input waveforms.

    ``initial_state`` is "steady" (equilibrium for the first input sample,
    so records that begin in DC equilibrium produce equilibrium outputs from
    sample 0) or "zero". Outputs share the inputs' time grid.
    """
    if len(inputs) != dm.n_inputs:
        raise ValueError(f"expected {dm.n_inputs} input waveforms, got {len(inputs)}")
    require_aligned(*inputs)
    if abs(inputs[0].dt - dm.dt) > 1e-9 * dm.dt:
        raise ValueError(
            f"input dt {inputs[0].dt!r} does not match model dt {dm.dt!r}"
        )
    if initial_state not in ("steady", "zero"):
        raise ValueError("initial_state must be 'steady' or 'zero'")

    u = np.vstack([w.samples for w in inputs])
    if initial_state == "steady":
        x0 = steady_state(dm, u[:, 0])
    else:
        x0 = np.zeros(dm.n_states)
    if dm.n_states:
        x = _run_blocks(dm, u, x0)
        y = dm.c @ x + dm.d @ u
    else:
        y = dm.d @ u
    t0, dt = inputs[0].t0, inputs[0].dt
    return [Waveform(t0, dt, y[i], unit="ampere") for i in range(dm.n_outputs)]
