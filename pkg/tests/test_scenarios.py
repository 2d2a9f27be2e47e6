import json
import math

import numpy as np
import pytest

from arsgeo import expr_dsl as ed
from arsgeo.errors import ConfigurationError, InputError
from arsgeo.frame_core import classify_point, genericity_check, orientability_check, trace_singular_locus
from arsgeo.scenarios import SPHERE_AMBIENT, get_scenario, list_scenarios, load_scenario, scenario_from_dict


def test_registry():
    names = list_scenarios()
    for n in ("grushin", "grushin_m10", "davydov", "torus_cos", "torus_sin", "torus_sin_warped",
              "sphere_quantum", "torus_distribution_atlas", "klein_frame", "flat_torus", "warped_strip"):
        assert n in names
    with pytest.raises(InputError):
        get_scenario("no_such_thing")


def test_metadata_examples():
    assert get_scenario("grushin").metadata["has_tangency"] is False
    m = get_scenario("davydov").metadata
    assert m["has_tangency"] is True and m["tangency_points"] == [(0.0, 0.0)]
    assert get_scenario("sphere_quantum").expected == 0.0
    assert get_scenario("torus_cos").metadata["expected_verdict"] == "diverged"


@pytest.mark.parametrize("name", sorted(set(list_scenarios()) - {"torus_distribution_atlas"}))
def test_metadata_agrees_with_checks(name):
    s = get_scenario(name)
    rep = genericity_check(s.frame)
    assert bool(rep.tangency_points) == s.metadata["has_tangency"]
    assert rep.generic == s.metadata.get("generic", True)
    expected = "orientable" if s.metadata["orientable"] else "non-orientable"
    assert orientability_check(s.ars) == expected


def test_atlas_metadata():
    s = get_scenario("torus_distribution_atlas")
    assert orientability_check(s.ars) == "non-orientable" and s.metadata["orientable"] is False


def test_sphere_pushforward(rng):
    s = get_scenario("sphere_quantum")
    f = s.frame
    emb = f.chart.embedding
    u = rng.uniform(1e-3, math.pi - 1e-3, 200)
    v = rng.uniform(-math.pi, math.pi, 200)
    P = np.stack([ed.evaluate(e, u, v) for e in emb], axis=-1)
    J = np.stack([np.stack([ed.evaluate(ed.diff(e, w), u, v) for w in "xy"], axis=-1) for e in emb], axis=-2)
    X, Y, Z = P[:, 0], P[:, 1], P[:, 2]
    env = {"X": X, "Y": Y, "Z": Z, "0": np.zeros_like(X)}

    def ambient(field):
        return np.stack([-env[c[1:]] if c.startswith("-") else env[c] for c in field], axis=-1)

    for chart_field, amb_field in zip((f.X, f.Y), SPHERE_AMBIENT):
        push = np.einsum("nij,nj->ni", J, chart_field.value(u, v))
        assert np.max(np.abs(push - ambient(amb_field))) <= 1e-10


def test_sphere_equator_is_grushin():
    f = get_scenario("sphere_quantum").frame
    comps = trace_singular_locus(f, 96)
    assert len(comps) == 1 and comps[0].closed
    assert np.allclose(comps[0].points[:, 0], math.pi / 2, atol=1e-10)
    for q in comps[0].points[::7]:
        assert classify_point(f, q).kind == "Grushin"


def test_json_roundtrip(tmp_path):
    d = {
        "name": "warped",
        "charts": [{"name": "w", "domain": [-1e300, 1e300, -1e300, 1e300], "window": [-1, 1, -1, 1],
                    "frames": [{"X": ["1", "0"], "Y": ["0", "x*exp(0.2*x*cos(y))"]}]}],
        "metadata": {"chi_plus": 0, "chi_minus": 0, "orientable": True},
    }
    path = tmp_path / "warped.json"
    path.write_text(json.dumps(d))
    s = get_scenario(str(path))
    ref = get_scenario("warped_strip").frame
    assert s.name == "warped" and s.expected == 0.0
    for q in [(0.3, 0.1), (-0.7, 2.0)]:
        assert np.array_equal(s.frame.matrix(*q), ref.matrix(*q))
    assert load_scenario(path).frame.matrix(0.5, 0.5).tolist() == s.frame.matrix(0.5, 0.5).tolist()


def test_json_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"charts": [{"domain": [0, 1, 0, 1]}]})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"charts": [{"domain": [0, 1, 0, 1], "periodic": ["yes", False],
                                        "frames": [{"X": ["1", "0"], "Y": ["0", "1"]}]}]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_scenario(bad)
