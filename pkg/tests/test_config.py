import math

import numpy as np
import pytest

from pscurv import config as cfgmod
from pscurv.config import ConfigError, Scenario, compile_expression, evaluate_field, preset
from pscurv.torus import TorusGrid


@pytest.mark.parametrize("scenario", list(Scenario))
def test_presets_roundtrip(scenario, tmp_path):
    cfg = preset(scenario)
    assert cfgmod.loads(cfg.dumps()) == cfg
    assert cfgmod.load(cfgmod.dump(cfg, tmp_path / "c.ini")) == cfg


def test_file_values_override_preset():
    cfg = cfgmod.loads("[run]\nscenario = trivial_ode\n[grid]\npoints = 16\n")
    assert cfg.scenario is Scenario.TRIVIAL_ODE
    assert cfg.grid.points == 16
    assert cfg.solver.max_step == preset(Scenario.TRIVIAL_ODE).solver.max_step


def test_overrides():
    cfg = preset(Scenario.PERTURBED_F).with_overrides(["solver.tau_max=3", "run.seed = 7"])
    assert cfg.solver.tau_max == 3.0 and cfg.run.seed == 7
    assert cfg.source == preset(Scenario.PERTURBED_F).source


@pytest.mark.parametrize("item", ["solver.tau_max", "nosection=1", "bogus.key=1"])
def test_malformed_overrides(item):
    with pytest.raises(ConfigError):
        preset(Scenario.TRIVIAL_ODE).with_overrides([item])


@pytest.mark.parametrize(
    "text, section, key",
    [
        ("[source]\nvalue = -1\n", "source", "value"),
        ("[source]\nvalue = cos(x1) - 2\n", "source", "value"),
        ("[initial]\nvalue = 0\n", "initial", "value"),
        ("[grid]\npoints = 9\n", "grid", "points"),
        ("[grid]\npoints = many\n", "grid", "points"),
        ("[frame]\nn = 2\n", "frame", "n"),
        ("[solver]\nrel_tol = nan\n", "solver", "rel_tol"),
        ("[solver]\nbogus = 1\n", "solver", "bogus"),
        ("[run]\nscenario = NOPE\n", "run", "scenario"),
        ("[initial]\nvalue = __import__('os')\n", "initial", "value"),
    ],
)
def test_invalid_configs_name_the_entry(text, section, key):
    with pytest.raises(ConfigError) as info:
        cfgmod.loads(text)
    assert info.value.section == section and info.value.key == key


def test_negative_f_message():
    with pytest.raises(ConfigError, match=r"\[source\] value: source f must be nonnegative"):
        cfgmod.loads("[source]\nvalue = -0.5\n")


def test_unknown_section():
    with pytest.raises(ConfigError):
        cfgmod.loads("[extra]\nkey = 1\n")


def test_expression_evaluation():
    g = TorusGrid(2, 8)
    x1, x2 = g.coords
    assert np.allclose(evaluate_field("1 + 0.3*cos(x1)*sin(x2)", g), 1 + 0.3 * np.cos(x1) * np.sin(x2))
    assert np.all(evaluate_field("pi", g) == math.pi)
    assert compile_expression("2**x1 / 4")(x1=3.0) == 2.0


@pytest.mark.parametrize("text", ["x1.real", "[1][0]", "open('f')", "'a'", "x3", "lambda: 1"])
def test_expression_whitelist(text):
    with pytest.raises(ValueError):
        compile_expression(text, ("x1", "x2"))


def test_source_construction():
    g = TorusGrid(2, 8)
    cfg = preset(Scenario.PERTURBED_F)
    src = cfg.make_source(g)
    x1, _ = g.coords
    assert np.allclose(src(2.0, g), (0.25 + 0.025 * np.cos(x1)) * 1.2)
    assert src.monotone
    assert preset(Scenario.TRIVIAL_ODE).make_source(g).is_constant
