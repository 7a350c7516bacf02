import pytest

from vamsim.config import ConfigError, ScenarioConfig, dump_config, load_config, parse_config


def test_defaults():
    c = ScenarioConfig()
    assert (c.segment_length, c.pedestrian_density, c.vehicle_density) == (2000.0, 48.0, 30.0)
    assert (c.warmup_seconds, c.measure_seconds, c.repetitions) == (100.0, 60.0, 5)
    assert c.duration == 160.0


def test_parse_snake_and_camel_and_subconfigs():
    c = parse_config(
        """
        # comment
        scheme = etsiCluster
        segmentLength = 200     # trailing comment
        vehicle_density = 0
        lossless = yes
        implicit.holdoffMax = 4.5
        mac.contention_window = 31
        """
    )
    assert c.scheme == "etsiCluster" and c.segment_length == 200.0 and c.vehicle_density == 0.0
    assert c.lossless is True
    assert c.implicit.holdoff_max == 4.5 and c.mac.contention_window == 31


@pytest.mark.parametrize(
    "text,key",
    [
        ("bogus = 1", "bogus"),
        ("implicit.bogus = 1", "implicit.bogus"),
        ("seed = abc", "seed"),
        ("lossless = maybe", "lossless"),
        ("scheme = flooding", "scheme"),
        ("measure_seconds = 0", "measure_seconds"),
        ("repetitions = 0", "repetitions"),
        ("seed = 1\nseed = 2", "seed"),
        ("implicit.holdoff_min = 9", "implicit"),
        ("a.b.c = 1", "a.b.c"),
    ],
)
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.key == key


def test_line_without_equals():
    with pytest.raises(ConfigError) as e:
        parse_config("scheme standalone")
    assert e.value.key == "line 1"


def test_optional_field():
    assert parse_config("disband_at = none").disband_at is None
    assert parse_config("disband_at = 12.5").disband_at == 12.5


def test_dump_round_trips(tmp_path):
    c = parse_config("scheme = implicitCluster\nseed = 7\nimplicit.cluster_radius = 6\nphy.capture_margin_db = inf")
    path = tmp_path / "c.cfg"
    path.write_text(dump_config(c))
    assert load_config(path) == c


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.cfg"))
    assert files
    for f in files:
        load_config(f)
