import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermalab.config import ExperimentConfig, apply_overrides, load_config, parse_config
from thermalab.errors import ConfigError

SAMPLE = """\
# comment
[run]
seed = 7
delta = 25.5
n_realizations = 12

[hf]
density = exponential
rho0 = 0.5
t0 = 80
n_levels = 300

[model]
kind = microscopic
lambda = 0.25

[observable]
kind = diagonal-smooth
function = cosine
scale = 40

[state]
center_e = 120.0
width = 8

[time]
n_points = 50

[eth]
sweep_n_levels = 100, 200, 400
"""


def test_parse_sample():
    c = parse_config(SAMPLE)
    assert c.master_seed == 7 and c.delta == 25.5 and c.n_realizations == 12
    assert c.hf.density == "exponential" and c.hf.n_levels == 300
    assert c.model.kind == "microscopic" and c.model.coupling == 0.25
    assert c.observable.function == "cosine"
    assert c.state.center_e == 120.0 and c.time_grid.n_points == 50
    assert c.eth.sweep_n_levels == (100, 200, 400)
    assert c.width_ratio == pytest.approx(8 / 25.5)


def test_defaults_from_empty_file():
    assert parse_config("") == ExperimentConfig()


def test_json_round_trip():
    c = parse_config(SAMPLE)
    assert ExperimentConfig.from_json(c.to_json()) == c
    assert ExperimentConfig.from_json(ExperimentConfig().to_json()) == ExperimentConfig()


@pytest.mark.parametrize("text,line", [
    ("[run]\nseed = 1\n\n[hf]\nspacing = -2\n", 5),
    ("[run]\nbogus = 1\n", 2),
    ("[run]\nseed = 1\n[nope]\nx = 1\n", 3),
    ("seed = 1\n", 1),
    ("[run]\ndelta = abc\n", 2),
    ("[hf]\ndensity = fractal\n", 2),
    ("[run]\nseed = 1\nseed = 2\n", 3),
    ("[run]\nseed = -4\n", 2),
    ("[run]\nseed = 1\n  this line is wrong\n[hf]\n", None),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    if line is not None:
        assert info.value.lineno == line
        assert str(info.value).startswith(f"line {line}:")


def test_load_from_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(SAMPLE)
    assert load_config(p) == parse_config(SAMPLE)


def test_overrides_take_precedence():
    c = apply_overrides(parse_config(SAMPLE), seed=9, out="x", jobs=3, n_levels=50, delta=4.0,
                        coupling=0.0)
    assert (c.master_seed, c.output_dir, c.jobs, c.hf.n_levels, c.delta, c.model.coupling) == \
        (9, "x", 3, 50, 4.0, 0.0)
    for bad in ({"seed": -1}, {"jobs": 0}, {"delta": 0.0}, {"n_levels": 1}, {"coupling": -1.0}):
        with pytest.raises(ConfigError):
            apply_overrides(c, **bad)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), delta=st.floats(1e-3, 1e3, allow_nan=False),
       n=st.integers(2, 5000), sweep=st.lists(st.integers(2, 5000), max_size=4))
def test_property_round_trip(seed, delta, n, sweep):
    c = ExperimentConfig(master_seed=seed, delta=delta)
    c = dataclasses.replace(c, hf=dataclasses.replace(c.hf, n_levels=n),
                            eth=dataclasses.replace(c.eth, sweep_n_levels=tuple(sweep)))
    assert ExperimentConfig.from_json(c.to_json()) == c
