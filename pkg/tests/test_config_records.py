import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from mcfqkd.config import (
    Config,
    config_digest,
    config_from_dict,
    dump_config,
    load_config,
    load_preset,
    save_config,
)
from mcfqkd.model import BlockStats, ConfigError
from mcfqkd.records import format_table, read_stats, write_stats, STATS_COLUMNS


def test_preset_is_calibrated_defaults(preset):
    assert preset.channel.n_cores == 37
    assert 0.0 < preset.receiver.calibration_scale < 1.0
    assert replace(preset, receiver=replace(preset.receiver, calibration_scale=1.0)) == Config()


def test_save_load_round_trip(tmp_path, preset):
    save_config(preset, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == preset


def test_digest_ignores_representation(preset):
    raw = dump_config(preset)
    matrix = json.loads(json.dumps(raw))
    n = preset.channel.n_cores
    iso = raw["channel"]["crosstalk_db"]["uniform_db"]
    matrix["channel"]["crosstalk_db"] = [[None if i == j else iso for j in range(n)] for i in range(n)]
    shuffled = dict(reversed(list(matrix.items())))
    assert config_digest(config_from_dict(shuffled)) == config_digest(preset)


def test_digest_changes_with_content(preset):
    other = replace(preset, protocol=replace(preset.protocol, mu1=0.12))
    assert config_digest(other) != config_digest(preset)


def test_minimal_file_uses_defaults():
    assert config_from_dict({}) == Config()


def test_schema_errors_listed():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"protocol": {"mu1": "high"}, "receiver": {"n_z_detectors": 0.5}})
    assert len(exc.value.problems) >= 2


def test_invariant_errors(tmp_path):
    with pytest.raises(ConfigError, match="mu2"):
        config_from_dict({"protocol": {"mu1": 0.07, "mu2": 0.07}})


def test_bad_json_reports_position(tmp_path):
    (tmp_path / "c.json").write_text('{"protocol": }')
    with pytest.raises(ConfigError, match=r"c\.json:1:"):
        load_config(tmp_path / "c.json")


def test_unknown_preset():
    with pytest.raises(ConfigError):
        load_preset("nope")


def test_no_classical_light_round_trips(tmp_path):
    cfg = replace(Config(), classical=replace(Config().classical, rx_power_dbm=-math.inf))
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_table_header_documents_units():
    text = format_table("t", {"a": "dB, loss", "b": "bit/s, rate"}, [(1.5, 2)])
    assert text.splitlines() == ["# t", "# a: dB, loss", "# b: bit/s, rate", "a,b", "1.5,2"]


counts = st.floats(min_value=0, max_value=1e12, allow_subnormal=False)


@given(counts, counts, st.floats(1e-6, 1e4), st.integers(1, 10**13))
def test_stats_round_trip(tmp_path_factory, n, m, t, pulses):
    lo, hi = sorted((n, m))
    s = BlockStats(hi, lo, hi / 3, lo / 3, hi / 7, lo / 7, hi, lo, t, pulses)
    path = tmp_path_factory.mktemp("s") / "stats.csv"
    write_stats(path, [(4, s)])
    assert read_stats(path) == [(4, s)]


def test_stats_errors_carry_line_numbers(tmp_path):
    header = ",".join(STATS_COLUMNS)
    path = tmp_path / "s.csv"
    path.write_text(f"# x\n{header}\n0,1,2,0,0,0,0,0,0,1.0,10\n1,1,0,0,0\n")
    with pytest.raises(ConfigError) as exc:
        read_stats(path)
    text = str(exc.value)
    assert "s.csv:3" in text and "m_z_mu1" in text
    assert "s.csv:4" in text


def test_stats_bad_header(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("core_id,n_z\n0,1\n")
    with pytest.raises(ConfigError, match="s.csv:1: bad header"):
        read_stats(path)
