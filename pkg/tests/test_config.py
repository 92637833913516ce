import pytest

from delaywave.config import (
    PRESET_NAMES,
    config_hash,
    load_preset,
    parse_config,
    serialize_config,
)
from delaywave.errors import ConfigError
from delaywave.solver import build_problem

MINIMAL = """
[exponents]
m = 2
p = 3

[delay]
mu1 = 0.5
mu2 = 0.1
tau1 = 0.5
tau2 = 1.0

[initial]
u0 = 0.1*sin(pi*x)
u1 = 0

[run]
t_end = 1.0
"""


def test_minimal_document_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.dimension == 1
    assert cfg.nodes == (201,)
    assert cfg.n_rho == 32
    assert cfg.n_tau == 16
    assert cfg.threshold == 1e6
    assert cfg.dt is None and cfg.sample_dt is None  # resolved at run time
    assert cfg.f0 == "0"
    assert cfg.scale == 1.0
    assert not cfg.override_conditions


def test_damping_exponent_lower_bound():
    bad = MINIMAL.replace("m = 2", "m = 1.5")
    with pytest.raises(ConfigError, match=r"m\(x\) >= 2"):
        parse_config(bad)


def test_unknown_key_rejected_with_line():
    bad = MINIMAL + "\n[output]\nmystery = 1\n"
    with pytest.raises(ConfigError, match="mystery"):
        parse_config(bad)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[wavelets]\nfoo = 1\n")


def test_duplicate_key_rejected():
    bad = MINIMAL.replace("mu1 = 0.5", "mu1 = 0.5\nmu1 = 0.6")
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_config(bad)


def test_missing_required_key():
    bad = MINIMAL.replace("t_end = 1.0", "")
    with pytest.raises(ConfigError, match="t_end"):
        parse_config(bad)


def test_expression_errors_carry_text():
    bad = MINIMAL.replace("u0 = 0.1*sin(pi*x)", "u0 = 0.1*sin(pi*q)")
    with pytest.raises(ConfigError, match="pi\\*q"):
        parse_config(bad)


def test_mu2_table_exclusive_and_interpolated():
    doc = MINIMAL.replace("mu2 = 0.1", "mu2_table = 0.5,0.1; 1.0,0.3")
    cfg = parse_config(doc)
    assert cfg.mu2 is None
    assert cfg.mu2_table == ((0.5, 0.1), (1.0, 0.3))
    prob = build_problem(cfg)
    # trapezoid mass of the linear interpolant: mean 0.2 over width 0.5
    assert prob.kernel.mass == pytest.approx(0.1, abs=1e-12)

    both = MINIMAL.replace("mu2 = 0.1", "mu2 = 0.1\nmu2_table = 0.5,0.1; 1.0,0.3")
    with pytest.raises(ConfigError, match="not both"):
        parse_config(both)


def test_negative_density_rejected():
    bad = MINIMAL.replace("mu2 = 0.1", "mu2 = -0.1")
    with pytest.raises(ConfigError, match="nonnegative"):
        parse_config(bad)


def test_cfl_violation_rejected():
    bad = MINIMAL + "dt = 0.1\n"
    with pytest.raises(ConfigError, match="CFL"):
        parse_config(bad)


def test_threshold_below_initial_sup_rejected():
    bad = MINIMAL + "threshold = 0.05\n"
    with pytest.raises(ConfigError, match="threshold"):
        parse_config(bad)


def test_tau_ordering_rejected():
    bad = MINIMAL.replace("tau2 = 1.0", "tau2 = 0.25")
    with pytest.raises(ConfigError, match="tau1"):
        parse_config(bad)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_parse_and_round_trip(name):
    cfg = parse_config(load_preset(name))
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
    assert config_hash(again) == config_hash(cfg)


def test_round_trip_2d_and_tables():
    doc = """
[grid]
dimension = 2
length_x = 1.0
length_y = 2.0
nodes_x = 17
nodes_y = 19

[exponents]
m = 2 + 0.1*x*y
p = 3.5

[delay]
mu1 = 0.5
mu2_table = 0.5,0.1; 0.75,0.2; 1.0,0.1
tau1 = 0.5
tau2 = 1.0

[initial]
u0 = 0.1*sin(pi*x)*sin(pi*y/2)
u1 = 0

[run]
t_end = 0.5
"""
    cfg = parse_config(doc)
    assert cfg.dimension == 2 and cfg.nodes == (17, 19)
    assert parse_config(serialize_config(cfg)) == cfg


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("nonexistent")
