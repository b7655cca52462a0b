import dataclasses
import json

import pytest
from hypothesis import given, settings, strategies as st

from weylgrav.cli import main, sweep_configs
from weylgrav.config import (ConfigError, SECTIONS, SpectrumConfig, parse_config,
                             serialize_config)
from weylgrav.hawking import HawkingConfig
from weylgrav.lensing import LensingConfig


def test_empty_hawking_section_gives_defaults():
    cfg = parse_config("[hawking]\n", "hawking")
    h = cfg["hawking"]
    assert (h.n_interface, h.n_left, h.n_right, h.gamma_t, h.x0) == (400, 800, 800, 0.1, 1600.0)
    assert parse_config("", "hawking")["hawking"] == HawkingConfig()


def test_range_error_names_key():
    with pytest.raises(ConfigError) as err:
        parse_config("[hawking]\n# tilt rate\ngamma_t = -0.1\n", "hawking")
    assert err.value.key == "gamma_t" and err.value.line == 3
    assert "gamma_t" in str(err.value)


@pytest.mark.parametrize("text, line, key", [
    ("[hawking]\nn_left = 10\nfoo = 1\n", 3, "foo"),
    ("[hawking]\nn_left = ten\n", 2, "n_left"),
    ("[hawking]\nn_left = 10\nn_left = 20\n", 3, "n_left"),
    ("gamma_t = 0.2\n", 1, "gamma_t"),
    ("[lens]\nb = nan\n", 2, "b"),
    ("[nowhere]\n", 1, None),
    ("[lens]\njust words\n", 2, None),
])
def test_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "lens")
    assert (err.value.line, err.value.key) == (line, key)


def test_comments_lists_and_optional_values():
    text = "[spectrum]  # bands\ntilts = 0, 1.5 # two\nbeta = none\n[lens]\ndt = 0.01\n"
    cfg = parse_config(text, "spectrum")
    assert cfg["spectrum"].tilts == (0.0, 1.5) and cfg["spectrum"].beta is None
    assert cfg["lens"].dt == 0.01
    assert list(parse_config("", "sweep").sections) == ["lens", "sweep"]


finite = st.floats(0.05, 50.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(gamma=st.floats(0.0, 30.0), b=finite, side=st.sampled_from([1, -1]), dt=st.none() | finite,
       gamma_t=finite, omegas=st.lists(finite, min_size=1, max_size=4), stop=st.booleans(),
       tilts=st.lists(st.floats(-3, 3), min_size=1, max_size=5))
def test_serialize_round_trip(gamma, b, side, dt, gamma_t, omegas, stop, tilts):
    try:
        lens = LensingConfig(gamma=gamma, b=b, side=side, dt=dt)
    except ValueError:
        return
    cfg = parse_config("", "sweep")
    cfg.sections["lens"] = lens
    cfg.sections["hawking"] = HawkingConfig(gamma_t=gamma_t, omegas=tuple(omegas),
                                            stop_at_plateau=stop)
    cfg.sections["spectrum"] = SpectrumConfig(tilts=tuple(tilts))
    text = serialize_config(cfg)
    again = parse_config(text, "sweep")
    assert again.sections == cfg.sections
    assert serialize_config(again) == text


def test_every_section_field_is_serialized():
    text = serialize_config(parse_config("", "validate"))
    for name, cls in SECTIONS.items():
        cfg = parse_config("", "validate")
        cfg.sections[name] = cls()
        body = serialize_config(cfg)
        for f in dataclasses.fields(cls):
            assert f"\n{f.name} = " in "\n" + body
    assert text.startswith("[validate]")


def test_sweep_jobs_deduplicate_shared_point():
    cfg = parse_config("", "sweep")
    jobs = sweep_configs(cfg)
    assert len(jobs) == 5
    assert [(j.gamma, j.b) for j in jobs] == [(10, 30), (15, 30), (20, 30), (20, 50), (20, 80)]


def test_cli_validate(tmp_path, capsys):
    out = tmp_path / "v"
    cfg = tmp_path / "v.ini"
    cfg.write_text("[validate]\nn = 8\nn_k = 5\n")
    assert main(["validate", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    printed = capsys.readouterr().out
    assert "PASS" in printed and "FAIL" not in printed
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["status"] == "ok" and meta["parameters"]["validate"]["n"] == 8
    assert (out / "validate.csv").read_text().startswith("check,passed,detail\n")
    assert parse_config((out / "config_used.ini").read_text(), "validate")["validate"].n == 8


def test_cli_spectrum_writes_tables_and_figure(tmp_path):
    out = tmp_path / "s"
    cfg = tmp_path / "s.ini"
    cfg.write_text("[spectrum]\nn_points = 41\n")
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "cone_params.csv").read_text().splitlines()
    assert rows[0] == "index,V,slope_1,slope_2,class,crossing_frequency" and len(rows) == 5
    assert [r.split(",")[4] for r in rows[1:]] == ["untilted", "under", "critical", "over"]
    assert (out / "bands.png").stat().st_size > 0
    assert b"\r" not in (out / "bands_0.csv").read_bytes()


def test_cli_errors_are_machine_readable(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[hawking]\ngamma_t = -0.1\n")
    out = tmp_path / "e"
    assert main(["hawking", "--config", str(cfg), "--out", str(out)]) == 2
    rec = json.loads((out / "error.json").read_text())
    assert rec["status"] == "error" and rec["key"] == "gamma_t" and rec["line"] == 2
    assert json.loads(capsys.readouterr().err.splitlines()[0])["error"] == "ConfigError"
    assert main(["validate", "--threads", "0", "--out", str(out)]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.ini"), "--out", str(out)]) == 2


HAWKING_SMALL = """[hawking]
n_left = 400
n_interface = 60
n_right = 150
x0 = 550
sigma = 15
gamma_t = 0.3
t_end = 300
snapshot_times = 0, 150
omegas = 0.02, 0.04
which = quantum
"""


def test_cli_hawking_identical_across_threads(tmp_path):
    cfg = tmp_path / "h.ini"
    cfg.write_text(HAWKING_SMALL)
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"h{threads}"
        argv = ["hawking", "--config", str(cfg), "--out", str(out), "--threads", str(threads),
                "--stride", "5", "--no-plots"]
        assert main(argv) == 0
        outs.append(out)
    for name in ("hawking_rates.csv", "hawking_snapshots.csv", "hawking_runs.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    header = (outs[0] / "hawking_rates.csv").read_text().splitlines()[0]
    assert header == "omega,chi_c,chi_q,gamma_H,gamma_s"
    cells = {int(r.split(",")[3]) for r in (outs[0] / "hawking_snapshots.csv").read_text().splitlines()[1:]}
    assert cells == set(range(0, 610, 5))
