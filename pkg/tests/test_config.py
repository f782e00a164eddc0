import pytest

from v2xperf.config import ConfigError, build_config, load_file, parse_range, parse_text


def test_parse_text_with_comments():
    flat = parse_text("# head\nmac.cw_min = 7  # inline\n\nseed=3\n")
    assert flat == {"mac.cw_min": "7", "seed": "3"}


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_text("seed = 1\nnonsense\n", "f.txt")


def test_layers_later_wins():
    cfg = build_config("simulate", {"seed": "1", "mac.cw_min": "7"}, {"seed": "2"})
    assert cfg.seed == 2 and cfg.params.cw_min == 7


def test_command_defaults():
    assert build_config("hidden-sweep").run.cams_per_node == 300
    v = build_config("validate")
    assert v.scenario.kind == "highway" and v.run.duration == 100.0


def test_unknown_key_and_bad_value():
    with pytest.raises(ConfigError, match="unknown configuration keys"):
        build_config("simulate", {"mac.cwmin": "7"})
    with pytest.raises(ConfigError, match="mac.cw_min"):
        build_config("simulate", {"mac.cw_min": "seven"})
    with pytest.raises(ConfigError):
        build_config("simulate", {"scenario.kind": "ring"})
    with pytest.raises(ConfigError):
        build_config("explode")


def test_tx_power_shared_between_records():
    cfg = build_config("simulate", {"mac.tx_power": "20"})
    assert cfg.radio.budget.tx_power == 20.0 and cfg.params.tx_power == 20.0
    cfg = build_config("simulate", {"radio.tx_power": "14"})
    assert cfg.params.tx_power == 14.0


def test_dump_round_trips(tmp_path):
    cfg = build_config("lut-gen", {"seed": "9", "radio.exponent": "2.5", "run.grid": "5,10"})
    (tmp_path / "c.txt").write_text(cfg.dump())
    again = build_config("lut-gen", load_file(tmp_path / "c.txt"))
    assert again == cfg
    assert again.dump() == cfg.dump()


def test_parse_range():
    assert parse_range("0:220:20") == [20.0 * k for k in range(12)]
    assert parse_range("0,220") == [0.0, 220.0]
    with pytest.raises(ConfigError):
        parse_range("0:10:0")
    with pytest.raises(ConfigError):
        parse_range("a,b")
