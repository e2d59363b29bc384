import pytest

from droughtrate.config import RunConfig, omega_grid
from conftest import ROOT
from droughtrate.errors import ValidationError


def test_round_trip(tmp_path):
    cfg = RunConfig(declarations="d.csv", instalment=1008.0, nu=0.3, eta=2.5, omega="0.4",
                    equal_weights=True, grid_step=0.1, replications=77, seed=2 ** 40,
                    input_costs={"maize": 0.1 + 0.2})
    p = tmp_path / "c.ini"
    cfg.write(p)
    back = RunConfig.from_file(p)
    assert back == cfg
    assert back.input_costs["maize"] == 0.1 + 0.2
    assert back.base_dir == str(tmp_path)
    assert back.path("yields") == str(tmp_path / "yields.csv")


def test_defaults_and_optional_empty():
    cfg = RunConfig.from_string("[policy]\nnu =\n")
    assert cfg.nu is None and cfg.retained_fraction == 0.15 and cfg.eta == 1.96
    assert cfg.omega == "declarations"


@pytest.mark.parametrize("text", [
    "[policy]\nbogus = 1\n",
    "[policy]\neta = abc\n",
    "[policy]\neta = nan\n",
    "[policy]\nretained_fraction =\n",
    "[policy]\nomega = often\n",
    "[policy]\nomega = 1.5\n",
    "[grid]\nstep = 0\n",
    "[policy]\nequal_weights = maybe\n",
    "not an ini",
])
def test_bad_config(text):
    with pytest.raises(ValidationError):
        RunConfig.from_string(text)


def test_omega_grid():
    g = omega_grid(0.05, 0.95, 0.05)
    assert len(g) == 19 and g[0] == 0.05 and g[-1] == 0.95 and g[6] == 0.35
    assert omega_grid(0.5, 0.5, 0.1) == [0.5]
    with pytest.raises(ValidationError):
        omega_grid(0.0, 0.5, 0.1)


def test_readme_example_parses():
    text = (ROOT / "README.md").read_text()
    block = text.split("```ini\n", 1)[1].split("```", 1)[0]
    cfg = RunConfig.from_string(block)
    assert cfg.instalment is None and cfg.nu is None and cfg.seed == 2019
    assert cfg.input_costs == {"maize": 1400.0}
