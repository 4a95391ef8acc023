import numpy as np
import pytest
from scipy.signal import cont2discrete

from nicepdn.circuits import pi_y_params
from nicepdn.state_space import (
    DiscreteModel,
    _zoh_block,
    discretize,
    realize,
    simulate,
    steady_state,
)
from nicepdn.vector_fit import RationalModel, eval_model_array, vector_fit
from nicepdn.waveform import Waveform


def _model(poles, residues, d, e=None, band=(1e0, 1e6)):
    poles = np.asarray(poles, complex)
    residues = np.asarray(residues, complex)
    d = np.atleast_2d(np.asarray(d, float))
    e = np.zeros_like(d) if e is None else np.atleast_2d(np.asarray(e, float))
    return RationalModel(poles, residues, d, e, band)


def _first_order():
    return _model([-1.0 + 0j], np.ones((1, 1, 1)), [[0.0]], band=(1e-3, 1e1))


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------


def test_realize_canonical_first_order():
    ssm = realize(_first_order())
    np.testing.assert_array_equal(ssm.a, [[-1.0]])
    np.testing.assert_array_equal(ssm.b, [[1.0]])
    np.testing.assert_array_equal(ssm.c, [[1.0]])
    np.testing.assert_array_equal(ssm.d, [[0.0]])
    assert ssm.transfer([0.0])[0, 0, 0] == pytest.approx(1.0)


def test_realize_pure_feedthrough():
    m = _model(np.zeros(0), np.zeros((0, 1, 1)), [[0.02]])
    ssm = realize(m)
    assert ssm.n_states == 0
    assert ssm.transfer([1e3])[0, 0, 0] == pytest.approx(0.02)


def test_realize_complex_pair_matches_evaluation():
    p = -1e3 + 1e5j
    r = 5.0 + 2.0j
    m = _model([p, np.conj(p)], np.array([[[r]], [[np.conj(r)]]]), [[0.0]], band=(1e1, 1e6))
    ssm = realize(m)
    freqs = np.array([10.0, 1e3, 1.5e4, 2e5, 1e6])
    h_ss = ssm.transfer(freqs)[:, 0, 0]
    h_rat = eval_model_array(m, freqs)[:, 0, 0]
    np.testing.assert_allclose(h_ss, h_rat, rtol=1e-10)


def test_realize_two_port_block_structure(default_pi):
    freqs = np.geomspace(1e3, 5e8, 240)
    m = vector_fit(pi_y_params(default_pi, freqs), 9, 15)
    ssm = realize(m)
    assert ssm.n_states == 2 * m.n_poles  # pole set repeated per input
    # transfer-function equivalence at 20 log-spaced band frequencies
    check = np.geomspace(m.band[0], m.band[1], 20)
    h_ss = ssm.transfer(check)
    h_rat = eval_model_array(m, check)
    scale = np.abs(h_rat)
    assert np.max(np.abs(h_ss - h_rat) / scale) <= 1e-10


def test_realize_rejects_e_term():
    m = _model([-1.0 + 0j], np.ones((1, 1, 1)), [[0.0]], e=[[1e-9]])
    with pytest.raises(ValueError, match="e term|e disabled"):
        realize(m)


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


def test_zoh_scalar_exponential():
    dm = discretize(realize(_first_order()), 1.0, "zoh")
    assert dm.ad[0, 0] == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_zoh_block_pure_rotation_math():
    # alpha = 0 is not realizable as a stable model, but the block formula
    # itself must give a pure rotation: beta = 2 pi, dt = 0.25 -> 90 degrees
    ad, _ = _zoh_block(0.0, 2 * np.pi, 0.25)
    np.testing.assert_allclose(ad, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-12)


def test_zoh_small_step_taylor():
    # PDN-scale pair: ad ~ I + a dt + O(dt^2) at dt = 1e-9
    p = -2e3 + 2 * np.pi * 3.5e5j
    r = 1e2 + 5e1j
    m = _model([p, np.conj(p)], np.array([[[r]], [[np.conj(r)]]]), [[0.0]])
    ssm = realize(m)
    dt = 1e-9
    dm = discretize(ssm, dt, "zoh")
    err = np.max(np.abs(dm.ad - (np.eye(2) + ssm.a * dt)))
    assert err < (np.max(np.abs(ssm.a)) * dt) ** 2


def test_zoh_matches_scipy_expm(default_pi):
    freqs = np.geomspace(1e3, 5e8, 240)
    m = vector_fit(pi_y_params(default_pi, freqs), 9, 15)
    ssm = realize(m)
    dt = 1e-9
    dm = discretize(ssm, dt, "zoh")
    ad, bd, c, d, _ = cont2discrete((ssm.a, ssm.b, ssm.c, ssm.d), dt, method="zoh")
    np.testing.assert_allclose(dm.ad, ad, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(dm.bd, bd, rtol=1e-9, atol=1e-16)
    np.testing.assert_array_equal(dm.c, ssm.c)
    np.testing.assert_array_equal(dm.d, ssm.d)


def test_trapezoidal_matches_scipy_frequency_response():
    p = -3e3 + 5e4j
    r = 2e2 + 1e2j
    m = _model([p, np.conj(p), -1e3 + 0j], np.array([[[r]], [[np.conj(r)]], [[50.0]]]), [[0.01]])
    ssm = realize(m)
    dt = 1e-6
    mine = discretize(ssm, dt, "trapezoidal")
    ad, bd, cd, dd, _ = cont2discrete((ssm.a, ssm.b, ssm.c, ssm.d), dt, method="bilinear")

    for f in (1e3, 1e4, 2e5):
        z = np.exp(2j * np.pi * f * dt)
        h_mine = (mine.c @ np.linalg.solve(z * np.eye(3) - mine.ad, mine.bd) + mine.d)[0, 0]
        h_scipy = (cd @ np.linalg.solve(z * np.eye(3) - ad, bd) + dd)[0, 0]
        assert h_mine == pytest.approx(h_scipy, rel=1e-10)


def test_discretize_stability_preserved(default_pi):
    freqs = np.geomspace(1e3, 5e8, 240)
    m = vector_fit(pi_y_params(default_pi, freqs), 9, 15)
    ssm = realize(m)
    for method in ("zoh", "trapezoidal"):
        dm = discretize(ssm, 1e-9, method)
        assert np.max(np.abs(np.linalg.eigvals(dm.ad))) < 1.0


def test_discretize_rejects_bad_args():
    ssm = realize(_first_order())
    with pytest.raises(ValueError, match="dt"):
        discretize(ssm, -1.0)
    with pytest.raises(ValueError, match="method"):
        discretize(ssm, 1.0, "euler")


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _wave(samples, dt=1e-3, t0=0.0):
    return Waveform(t0, dt, np.asarray(samples, float), "volt")


def test_simulate_zero_in_zero_out():
    dm = discretize(realize(_first_order()), 1e-3, "zoh")
    out = simulate(dm, [_wave(np.zeros(100))], initial_state="zero")
    np.testing.assert_array_equal(out[0].samples, np.zeros(100))


def test_simulate_step_response_first_order():
    # unit step into 1/(s+1): y(t) = 1 - exp(-t); zoh sampling is exact
    dt = 1e-3
    dm = discretize(realize(_first_order()), dt, "zoh")
    n = 1001
    out = simulate(dm, [_wave(np.ones(n), dt)], initial_state="zero")[0]
    t = dt * np.arange(n)
    np.testing.assert_allclose(out.samples, 1.0 - np.exp(-t), atol=1e-12)
    assert out.samples[1000] == pytest.approx(1 - np.exp(-1.0), abs=1e-6)


def test_simulate_linearity(rng):
    p = -2e3 + 4e4j
    r = 1e2 + 3e1j
    m = _model([p, np.conj(p)], np.array([[[r]], [[np.conj(r)]]]), [[0.005]])
    dm = discretize(realize(m), 1e-6, "zoh")
    u1 = rng.normal(size=400)
    u2 = rng.normal(size=400)
    y1 = simulate(dm, [_wave(u1, 1e-6)], initial_state="zero")[0].samples
    y2 = simulate(dm, [_wave(u2, 1e-6)], initial_state="zero")[0].samples
    y12 = simulate(dm, [_wave(u1 + u2, 1e-6)], initial_state="zero")[0].samples
    scale = np.max(np.abs(y12))
    np.testing.assert_allclose(y12, y1 + y2, atol=1e-12 * scale)


def test_simulate_steady_state_initialization(default_pi):
    freqs = np.geomspace(1e3, 5e8, 240)
    m = vector_fit(pi_y_params(default_pi, freqs), 9, 15)
    dm = discretize(realize(m), 1e-9, "zoh")
    v = np.array([1.2, 1.19])
    inputs = [_wave(np.full(50, v[0]), 1e-9), _wave(np.full(50, v[1]), 1e-9)]
    outs = simulate(dm, inputs, initial_state="steady")
    want = eval_model_array(m, np.array([0.0]))[0].real @ v
    for i in (0, 1):
        scale = max(abs(want[0]), abs(want[1]))
        np.testing.assert_allclose(outs[i].samples, np.full(50, want[i]), atol=1e-6 * scale)


def test_simulate_bounded_long_random_input(rng):
    p = -2e4 + 2e6j
    r = 1e3 + 2e2j
    m = _model([p, np.conj(p), -5e3 + 0j], np.array([[[r]], [[np.conj(r)]], [[100.0]]]), [[0.01]])
    dm = discretize(realize(m), 1e-7, "zoh")
    u = rng.uniform(-1.0, 1.0, size=1_000_000)
    out = simulate(dm, [_wave(u, 1e-7)], initial_state="zero")[0].samples
    assert np.all(np.isfinite(out))
    assert np.max(np.abs(out)) < 1e3


def test_simulate_validates_inputs():
    dm = discretize(realize(_first_order()), 1e-3, "zoh")
    with pytest.raises(ValueError, match="expected 1 input"):
        simulate(dm, [_wave(np.ones(5)), _wave(np.ones(5))])
    with pytest.raises(ValueError, match="dt"):
        simulate(dm, [_wave(np.ones(5), dt=2e-3)])
    m2 = _model(
        [-1e3 + 0j],
        np.ones((1, 2, 2)),
        np.zeros((2, 2)),
    )
    dm2 = discretize(realize(m2), 1e-3, "zoh")
    with pytest.raises(ValueError, match="aligned"):
        simulate(dm2, [_wave(np.ones(5)), _wave(np.ones(6))])


def test_steady_state_solves_fixed_point():
    dm = discretize(realize(_first_order()), 1e-3, "zoh")
    x0 = steady_state(dm, np.array([2.0]))
    np.testing.assert_allclose(dm.ad @ x0 + dm.bd @ np.array([2.0]), x0, rtol=1e-12)
