from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixlab.config import (
    DEFAULTS,
    ConfigError,
    dump_config,
    load_config,
    parse_config,
    parse_overrides,
)
from mixlab.grid import make_field, node_coordinates, write_binary

SCENARIOS = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.yaml"))

MINIMAL = """\
name: tiny
grid:
  resolution: 32
time:
  end: 1.0
  dt: 0.01
  snapshot_every: 0.5
velocity:
  kind: steady_shear
  amplitude: 1.0
"""


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_catalog_round_trip(path):
    cfg = load_config(path)
    again = parse_config(dump_config(cfg), base_dir=path.parent)
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


def test_defaults_filled():
    cfg = parse_config(MINIMAL)
    assert cfg.resolution == 32
    assert cfg["mixing"]["kappa_prime"] == DEFAULTS["mixing"]["kappa_prime"]
    assert cfg["initial"]["kind"] == DEFAULTS["initial"]["kind"]


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        (MINIMAL + "bogus: 1\n", 11, "unknown key 'bogus'"),
        (MINIMAL.replace("resolution: 32", "resolution: 48"), 3, "power of two"),
        (MINIMAL.replace("dt: 0.01", "dt: -1"), 6, "time.dt"),
        (MINIMAL.replace("snapshot_every: 0.5", "snapshot_every: 0.3"), 7, "divide"),
        (MINIMAL.replace("kind: steady_shear", "kind: vortex"), 9, "velocity.kind"),
        (MINIMAL + "mixing:\n  kappa_prime: 1.5\n", 12, "kappa_prime"),
        (
            MINIMAL + "initial:\n  kind: modes\n  modes: [[1, 1, 0, 0]]\nbounds:\n  kinds: [geometric_exponential]\n",
            15,
            "half_half",
        ),
        (MINIMAL + "initial:\n  kind: checkerboard\n  level: 4\n", 3, "multiple of"),
        (MINIMAL + "grid: [1\n", None, "YAML syntax"),
    ],
)
def test_line_level_errors(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, source="cfg.yaml")
    assert fragment in str(info.value)
    if line is not None:
        assert info.value.line == line
        assert f"cfg.yaml:{line}:" in str(info.value)


def test_overrides():
    ov = parse_overrides(["time.dt=0.02", "bounds.kinds=[kinetic_linear]", "velocity.budget.lip=7"])
    cfg = parse_config(MINIMAL, overrides=ov)
    assert cfg["time"]["dt"] == 0.02
    assert cfg["bounds"]["kinds"] == ["kinetic_linear"]
    assert cfg["velocity"]["budget"] == {"lip": 7}
    with pytest.raises(ConfigError):
        parse_overrides(["time.dt"])
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, overrides=parse_overrides(["time.nope=1"]))


@given(
    dt=st.sampled_from([0.001, 0.005, 0.01]),
    amp=st.floats(0.1, 3.0),
    n=st.sampled_from([16, 32, 64]),
)
def test_round_trip_property(dt, amp, n):
    text = MINIMAL.replace("dt: 0.01", f"dt: {dt}").replace("amplitude: 1.0", f"amplitude: {amp!r}")
    text = text.replace("resolution: 32", f"resolution: {n}")
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg


def _velocity_file(path, N, amp):
    X, Y = node_coordinates(N)
    write_binary(path, make_field(amp * np.sin(2 * np.pi * Y)), make_field(np.zeros((N, N))))


def test_grid_sampled_cfl(tmp_path):
    _velocity_file(tmp_path / "u.bin", 32, 1.0)
    text = MINIMAL.replace("kind: steady_shear\n  amplitude: 1.0", "kind: grid_sampled\n  file: u.bin")
    parse_config(text, base_dir=tmp_path)
    with pytest.raises(ConfigError, match="CFL"):
        parse_config(text.replace("dt: 0.01", "dt: 0.1"), base_dir=tmp_path)


def test_missing_files(tmp_path):
    text = MINIMAL.replace("kind: steady_shear\n  amplitude: 1.0", "kind: grid_sampled\n  file: u.bin")
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(text, base_dir=tmp_path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")


def test_initial_file_resolution(tmp_path):
    write_binary(tmp_path / "f.bin", make_field(np.zeros((16, 16))))
    text = MINIMAL + "initial:\n  kind: file\n  file: f.bin\n"
    with pytest.raises(ConfigError, match="N=16"):
        parse_config(text, base_dir=tmp_path)
