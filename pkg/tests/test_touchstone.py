import numpy as np
import pytest

from nicepdn.spectra import FrequencyResponse
from nicepdn.touchstone import (
    TouchstoneOptions,
    TouchstoneParseError,
    infer_ports_and_kind,
    parse_touchstone,
    write_touchstone,
)

from conftest import random_passive_y


def test_option_defaults():
    opts = TouchstoneOptions()
    assert (opts.freq_unit, opts.param_kind, opts.value_format, opts.ref_resistance) == (
        "GHz", "S", "MA", 50.0,
    )


def test_infer_ports_and_kind():
    assert infer_ports_and_kind("meas.s2p") == (2, "S")
    assert infer_ports_and_kind("board.y2p") == (2, "Y")
    assert infer_ports_and_kind("CAP.S1P") == (1, "S")
    assert infer_ports_and_kind("x.z4p") == (4, "Z")
    with pytest.raises(ValueError, match="extension"):
        infer_ports_and_kind("whatever.txt")


def test_parse_ma_unit_magnitude():
    resp, opts = parse_touchstone("# HZ S MA R 50\n1e6 1 0\n", 1)
    assert resp.freqs[0] == 1e6
    assert resp.data[0, 0, 0] == pytest.approx(1 + 0j)
    assert opts.value_format == "MA"


def test_parse_db_90_degrees():
    resp, _ = parse_touchstone("# HZ S DB R 50\n1e6 0 90\n", 1)
    assert resp.data[0, 0, 0] == pytest.approx(1j, abs=1e-15)


def test_parse_mhz_y_ri():
    resp, opts = parse_touchstone("# MHZ Y RI R 50\n1 0.02 0\n", 1)
    assert resp.freqs[0] == 1e6
    assert resp.kind == "Y"
    assert resp.data[0, 0, 0] == 0.02 + 0j


def test_parse_2port_column_order():
    # Touchstone 1.0 2-port rows are S11 S21 S12 S22
    text = "# HZ S RI R 50\n1e6  .11 0  .21 0  .12 0  .22 0\n"
    resp, _ = parse_touchstone(text, 2)
    m = resp.data[0].real
    np.testing.assert_allclose(m, [[0.11, 0.12], [0.21, 0.22]])


def test_parse_comments_blanklines_case():
    text = """! vendor header
! more comments

# mhz s ri r 75

1 0.5 0.0 ! trailing comment
2 0.25 0.1
"""
    resp, opts = parse_touchstone(text, 1)
    assert opts.ref_resistance == 75.0
    assert resp.n_freqs == 2
    assert resp.data[1, 0, 0] == 0.25 + 0.1j


def test_parse_option_line_defaults_when_sparse():
    resp, opts = parse_touchstone("#\n1 1 0\n", 1)  # bare option line: all defaults
    assert opts.freq_unit == "GHz"
    assert resp.freqs[0] == 1e9


def test_errors_carry_line_numbers():
    with pytest.raises(TouchstoneParseError, match="line 2.*before the option"):
        parse_touchstone("! c\n1e6 1 0\n# HZ S MA R 50\n", 1)
    with pytest.raises(TouchstoneParseError, match="line 3.*duplicate"):
        parse_touchstone("# HZ S MA R 50\n1e6 1 0\n# HZ S MA R 50\n", 1)
    with pytest.raises(TouchstoneParseError, match="line 3.*ascending"):
        parse_touchstone("# HZ S MA R 50\n2e6 1 0\n1e6 1 0\n", 1)
    with pytest.raises(TouchstoneParseError, match="line 2.*expected 3 values"):
        parse_touchstone("# HZ S MA R 50\n1e6 1 0 4\n", 1)
    with pytest.raises(TouchstoneParseError, match="line 2.*non-numeric"):
        parse_touchstone("# HZ S MA R 50\n1e6 one 0\n", 1)
    with pytest.raises(TouchstoneParseError, match="missing option line"):
        parse_touchstone("! nothing here\n", 1)


def test_touchstone_2_rejected():
    with pytest.raises(TouchstoneParseError, match="2.0"):
        parse_touchstone("[Version] 2.0\n# HZ S MA R 50\n1e6 1 0\n", 1)


def test_noise_section_skipped_with_warning():
    text = (
        "# HZ S MA R 50\n"
        "1e6 1 0 0.5 0 0.5 0 1 0\n"
        "2e6 1 0 0.5 0 0.5 0 1 0\n"
        "1e6 2.0 0.4 30 0.5\n"  # noise parameters: frequency restarts downward
        "2e6 2.5 0.3 20 0.5\n"
    )
    with pytest.warns(UserWarning, match="noise"):
        resp, _ = parse_touchstone(text, 2)
    assert resp.n_freqs == 2


def test_write_column_counts():
    one = FrequencyResponse(np.array([1e6]), np.full((1, 1, 1), 0.5 + 0.25j), "S")
    lines = write_touchstone(one, TouchstoneOptions("Hz", "S", "RI", 50)).splitlines()
    assert len(lines[1].split()) == 3  # f + one complex pair

    two = FrequencyResponse(np.array([1e6]), np.full((1, 2, 2), 0.5 + 0.25j), "S")
    lines = write_touchstone(two, TouchstoneOptions("Hz", "S", "MA", 50)).splitlines()
    assert len(lines[1].split()) == 9  # f + four complex pairs


def _round_trip_error(resp, opts):
    text = write_touchstone(resp, opts)
    back, _ = parse_touchstone(text, resp.n_ports)
    scale = np.maximum(np.abs(resp.data), 1e-300)
    return (
        np.max(np.abs(back.freqs - resp.freqs) / resp.freqs),
        np.max(np.abs(back.data - resp.data) / scale),
    )


@pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
@pytest.mark.parametrize("unit", ["Hz", "kHz", "MHz", "GHz"])
@pytest.mark.parametrize("kind", ["S", "Y", "Z"])
def test_round_trip_all_combinations(rng, fmt, unit, kind):
    freqs, data = random_passive_y(rng, n_freqs=7)
    resp = FrequencyResponse(freqs, data, kind)
    ferr, derr = _round_trip_error(resp, TouchstoneOptions(unit, kind, fmt, 50))
    assert ferr <= 1e-12
    assert derr <= 1e-12


def test_round_trip_one_port_and_four_port(rng):
    freqs = np.geomspace(1e3, 1e9, 5)
    one = FrequencyResponse(freqs, rng.normal(size=(5, 1, 1)) + 1j * rng.normal(size=(5, 1, 1)), "S")
    ferr, derr = _round_trip_error(one, TouchstoneOptions("MHz", "S", "RI", 50))
    assert max(ferr, derr) <= 1e-12

    four = FrequencyResponse(freqs, rng.normal(size=(5, 4, 4)) + 1j * rng.normal(size=(5, 4, 4)), "S")
    ferr, derr = _round_trip_error(four, TouchstoneOptions("GHz", "S", "MA", 50))
    assert max(ferr, derr) <= 1e-12


def test_write_kind_mismatch_rejected():
    resp = FrequencyResponse(np.array([1e6]), np.zeros((1, 1, 1)), "Y")
    with pytest.raises(ValueError, match="kind"):
        write_touchstone(resp, TouchstoneOptions("Hz", "S", "RI", 50))
