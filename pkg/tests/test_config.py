import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isrsnli.config import PRESETS, config_to_dict, dump_config, load_config, parse_config
from isrsnli.errors import ConfigurationError

from conftest import make_nzdsf, make_smf


def _line_of(exc):
    return int(str(exc.value).split(":")[1])


def test_presets_match_reference_fibres():
    for name, ref in (("smf", make_smf()), ("nzdsf", make_nzdsf())):
        cfg = parse_config(json.dumps({"preset": name}))
        f = cfg.fiber
        for attr in ("alpha", "gamma", "dispersion", "dispersion_slope", "raman_slope", "length"):
            assert getattr(f, attr) == pytest.approx(getattr(ref, attr), rel=1e-12)
        assert len(cfg.grid) == 251
    assert set(PRESETS) == {"smf", "nzdsf"}


def test_overrides_and_sections():
    text = json.dumps({
        "preset": "smf",
        "grid": {"channel_count": 5, "modulation": "qpsk",
                 "overrides": [{"index": 2, "modulation": "gaussian", "power_dbm": 3.0}]},
        "link": {"spans": 6, "coherence_exponent": 0.05},
        "simulation": {"realizations": 2, "steps_per_span": 50},
        "sweep": {"spans": [1, 3], "modulations": ["16qam"], "channels": [0, 2]},
    })
    cfg = parse_config(text)
    assert len(cfg.grid) == 5 and cfg.link.span_count == 6
    assert cfg.grid.kurtoses[2] == 0.0 and cfg.grid.kurtoses[0] == -1.0
    assert cfg.grid.powers[2] == pytest.approx(10 ** 0.3 * 1e-3)
    assert cfg.simulation.realizations == 2 and cfg.sweep_spans == (1, 3)
    assert cfg.sweep_modulations == ("16qam",)


@pytest.mark.parametrize("text, line", [
    ('{\n  "preset": "smf",\n  "bogus": 1\n}', 3),
    ('{\n  "preset": "smf",\n  "fiber": {\n    "gamma_per_w_km": "x"\n  }\n}', 4),
    ('{\n  "preset": "smf",\n  "grid": {\n    "modulation": "qam7"\n  }\n}', 4),
    ('{\n  "preset": "smf",\n  "link": {\n\n    "spans": 0\n  }\n}', 3),
    ('{\n  "preset": "nope"\n}', 2),
    ('{\n  "preset": "smf",\n  "sweep": {"spans": []}\n}', 3),
    ('{\n  "preset": "smf",\n  "identity_pairs": [[3, 1]]\n}', 3),
    ('{\n  "preset": "smf",,\n}', 2),
    ('{\n  "preset": "smf",\n  "simulation": {\n    "realizations": 0\n  }\n}', 3),
])
def test_errors_name_the_line(text, line):
    with pytest.raises(ConfigurationError) as info:
        parse_config(text, "run.json")
    assert str(info.value).startswith(f"run.json:{line}:")


def test_missing_sections():
    with pytest.raises(ConfigurationError):
        parse_config("{}")
    with pytest.raises(ConfigurationError):
        parse_config("[1, 2]")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.json")


def test_round_trip(tmp_path):
    cfg = parse_config(json.dumps({"preset": "nzdsf", "grid": {"channel_count": 7,
                                                               "modulation": "64qam"},
                                   "link": {"spans": 4}}))
    p = tmp_path / "c.json"
    p.write_text(dump_config(cfg))
    back = load_config(p)
    assert back.link == cfg.link and back.simulation == cfg.simulation
    for attr in ("frequencies", "bandwidths", "powers", "kurtoses"):
        assert np.allclose(getattr(back.grid, attr), getattr(cfg.grid, attr), rtol=1e-12, atol=0)
    assert back.fiber.alpha == pytest.approx(cfg.fiber.alpha, rel=1e-14)
    assert back.fiber.reference_wavelength == pytest.approx(cfg.fiber.reference_wavelength,
                                                            rel=1e-14)


@given(st.integers(1, 40), st.floats(30.0, 200.0), st.floats(-10.0, 10.0),
       st.sampled_from(["qpsk", "16qam", "64qam", "256qam", "gaussian"]))
def test_uniform_grid_round_trip(count, spacing, power, mod):
    cfg = parse_config(json.dumps({"preset": "smf", "grid": {
        "channel_count": count, "spacing_ghz": spacing, "bandwidth_ghz": min(spacing, 30.0),
        "power_dbm": power, "modulation": mod}}))
    back = parse_config(dump_config(cfg))
    assert np.allclose(back.grid.frequencies, cfg.grid.frequencies, rtol=0, atol=1e-3)
    assert np.allclose(back.grid.powers, cfg.grid.powers, rtol=1e-12)
    assert np.array_equal(back.grid.kurtoses, cfg.grid.kurtoses)
