import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from osnet.io import fmt, read_trajectory_csv, to_jsonable, write_crossings_csv, write_json, write_trajectory_csv
from osnet.ode import Trajectory
from osnet.stability import Crossing

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=200, deadline=None)
@given(floats)
def test_fmt_roundtrip(x):
    assert float(fmt(x)) == x


@settings(max_examples=30, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 20), st.integers(1, 4)), elements=floats))
def test_csv_roundtrip(tmp_path_factory, states):
    path = tmp_path_factory.mktemp("io") / "t.csv"
    times = np.cumsum(np.full(len(states), 0.1)) - 0.1
    traj = Trajectory(times, states)
    write_trajectory_csv(path, traj)
    back = read_trajectory_csv(path)
    assert np.array_equal(back.times, traj.times) and np.array_equal(back.states, traj.states)


def test_header(tmp_path):
    p = tmp_path / "t.csv"
    write_trajectory_csv(p, Trajectory([0.0, 0.5], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    assert p.read_text().splitlines()[0] == "t,x0,x1,x2"


@pytest.mark.parametrize("text", [
    "",
    "time,x0\n0,1\n",
    "t,x0\n",
    "t,x0\n0,abc\n",
    "t,x0,x1\n0,1\n",
    "t,x0\n1,1\n0,2\n",
    "t,x0\n0,nan\n",
])
def test_malformed(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_trajectory_csv(p)


def test_crossings_csv(tmp_path):
    p = tmp_path / "c.csv"
    write_crossings_csv(p, [Crossing(1.5, np.array([0.1, 0.2]), 3)], 2)
    assert p.read_text() == "t,x0,x1\n1.5,0.10000000000000001,0.20000000000000001\n"


def test_jsonable():
    obj = {"a": np.float64(1.5), "b": np.array([1, 2]), "c": complex(1, -2), "d": math.inf,
           "e": np.bool_(True), "f": (np.int64(3),)}
    out = to_jsonable(obj)
    assert out == {"a": 1.5, "b": [1, 2], "c": {"re": 1.0, "im": -2.0}, "d": "inf", "e": True, "f": [3]}
    json.dumps(out)


def test_write_json(tmp_path):
    p = tmp_path / "r.json"
    write_json(p, {"x": np.arange(3)})
    assert json.loads(p.read_text()) == {"x": [0, 1, 2]}
