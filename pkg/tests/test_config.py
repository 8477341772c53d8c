import json

import pytest
from hypothesis import given, strategies as st

from noisyhopf.config import RunConfig, frange, load, parse, parse_list, resolve, serialize
from noisyhopf.errors import UsageError


def test_defaults_match_reference_setup():
    c = RunConfig()
    assert (c.tau, c.gamma, c.slope, c.dt, c.n_steps, c.D) == (12.0, -0.05, 60.0, 0.1, 10_000, 1e-5)
    assert c.eps_grid[0] == -0.4 and c.eps_grid[-1] == 0.25 and len(c.eps_grid) == 66
    assert c.decimation == 10 and c.window_fraction == 0.25


def test_parse_with_comments_and_lists():
    values = parse(
        """
        # reference run
        tau = 12      # delay
        D_grid = 0, 1e-6, 1e-5
        eps_grid = -0.1:0.1:0.05
        threshold = none
        n_trials = 200
        """
    )
    assert values == {
        "tau": 12.0,
        "D_grid": [0.0, 1e-6, 1e-5],
        "eps_grid": [-0.1, -0.05, 0.0, 0.05, 0.1],
        "threshold": None,
        "n_trials": 200,
    }


def test_round_trip_defaults():
    c = RunConfig()
    assert RunConfig(**parse(serialize(c))) == c


@given(
    tau=st.floats(0.5, 50),
    n_trials=st.integers(1, 5000),
    D_grid=st.lists(st.floats(0, 1e-3), min_size=1, max_size=5),
    threshold=st.none() | st.floats(1e-6, 1.0),
    out=st.text("abcxyz_/-.", min_size=1, max_size=12),
)
def test_round_trip(tau, n_trials, D_grid, threshold, out):
    c = RunConfig(tau=tau, n_trials=n_trials, D_grid=D_grid, threshold=threshold, out=out)
    assert RunConfig(**parse(serialize(c))) == c


def test_frange_is_inclusive():
    assert frange(0.0, 0.3, 0.1) == [0.0, 0.1, 0.2, 0.3]
    assert len(frange(-0.4, 0.25, 0.005)) == 131
    with pytest.raises(UsageError):
        frange(0, 1, 0)


def test_parse_errors():
    with pytest.raises(UsageError):
        parse("colour = red")
    with pytest.raises(UsageError):
        parse("tau 12")
    with pytest.raises(UsageError):
        parse("n_trials = many")
    with pytest.raises(UsageError):
        parse_list("0:1")


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("tau = 24\nn_trials = 10\n")
    c = resolve(path, n_trials=40, gamma=None)
    assert c.tau == 24.0 and c.n_trials == 40 and c.gamma == -0.05


def test_manifest_is_accepted_as_config(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"command": "scan", "config": {"tau": 12.0, "D_grid": [0.0, 1e-5], "threshold": None}}))
    assert load(path) == {"tau": 12.0, "D_grid": [0.0, 1e-5], "threshold": None}


def test_validation():
    for bad in (dict(tau=0.0), dict(dt=-0.1), dict(n_trials=0), dict(D=-1e-5), dict(window_fraction=0.7), dict(D_grid=[])):
        with pytest.raises(UsageError):
            RunConfig(**bad).validate()
