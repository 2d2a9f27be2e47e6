"""Registry of ready-made structures and the JSON loader for custom ones."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, InputError
from .frame_core import ARS2, Chart, Frame2, Overlap

__all__ = ["Scenario", "get_scenario", "list_scenarios", "load_scenario", "scenario_from_dict", "SCENARIOS"]

PI = math.pi
R2 = (-math.inf, math.inf, -math.inf, math.inf)
SQUARE = (-PI, PI, -PI, PI)


@dataclass(frozen=True)
class Scenario:
    name: str
    ars: ARS2
    metadata: dict = field(default_factory=dict)

    @property
    def frame(self) -> Frame2:
        return self.ars.frame

    @property
    def expected(self):
        return self.metadata.get("expected")


def _single(name, X, Y, chart, **meta):
    f = Frame2(X, Y, chart)
    meta.setdefault("orientable", True)
    return Scenario(name, ARS2([f], metadata=meta), meta)


def _gb_meta(chi_plus, chi_minus, **extra):
    meta = {"chi_plus": chi_plus, "chi_minus": chi_minus, "expected": 2 * PI * (chi_plus - chi_minus)}
    meta.update(extra)
    return meta


def _grushin():
    chart = Chart("grushin", R2, window=(-3.0, 3.0, -3.0, 3.0))
    return _single(
        "grushin", ("1", "0"), ("0", "x"), chart,
        has_tangency=False, trivializable=True, base_point=(0.0, 0.0),
        notes="Grushin plane; Z is the y-axis",
    )


def _grushin_m10():
    s = _grushin()
    meta = dict(s.metadata, base_point=(-1.0, 0.0), notes="Grushin plane, loci from (-1, 0)")
    return Scenario("grushin_m10", ARS2([s.frame], metadata=meta), meta)


def _davydov():
    chart = Chart("davydov", R2, window=(-3.0, 3.0, -3.0, 3.0))
    return _single(
        "davydov", ("1", "0"), ("0", "y - x^2"), chart,
        has_tangency=True, tangency_points=[(0.0, 0.0)], trivializable=True,
        notes="Z is the parabola y = x^2 with one tangency point at the origin",
    )


def _torus(name):
    return Chart(name, SQUARE, periodic=(True, True))


def _torus_cos():
    return _single(
        "torus_cos", ("1", "0"), ("0", "1 - cos(x)"), _torus("torus_cos"),
        **_gb_meta(0, 0, has_tangency=False, trivializable=True, generic=False,
                   expected_verdict="diverged", expected_exponent=-3.0,
                   notes="M- is empty and Z = {x = 0} is not an embedded transversal curve"),
    )


def _torus_sin():
    return _single(
        "torus_sin", ("1", "0"), ("0", "sin(x)"), _torus("torus_sin"),
        **_gb_meta(0, 0, has_tangency=False, trivializable=True,
                   notes="M+ and M- are cylinders"),
    )


def _torus_sin_warped():
    return _single(
        "torus_sin_warped", ("1", "0"), ("0", "sin(x)*exp(0.3*cos(y))"), _torus("torus_sin_warped"),
        **_gb_meta(0, 0, has_tangency=False, trivializable=True,
                   notes="same singular set as torus_sin without the x-symmetry"),
    )


def _flat_torus():
    return _single(
        "flat_torus", ("1", "0"), ("0", "1"), _torus("flat_torus"),
        **_gb_meta(0, 0, has_tangency=False, trivializable=True, riemannian=True,
                   notes="Riemannian control case, Z is empty"),
    )


# Chart frame of the ambient fields (y, -x, 0) and (0, z, -y) in the chart
# (u, v) -> (sin u cos v, cos u, sin u sin v); u is x, v is y below.
SPHERE_X = ("cos(y)", "-(cos(x)/sin(x))*sin(y)")
SPHERE_Y = ("-sin(y)", "-(cos(x)/sin(x))*cos(y)")
SPHERE_EMBEDDING = ("sin(x)*cos(y)", "cos(x)", "sin(x)*sin(y)")
SPHERE_AMBIENT = ("Y", "-X", "0"), ("0", "Z", "-Y")
SPHERE_CAP = 1e-3


def _sphere():
    chart = Chart(
        "sphere_quantum", (0.0, PI, -PI, PI), periodic=(False, True),
        window=(SPHERE_CAP, PI - SPHERE_CAP, -PI, PI), embedding=SPHERE_EMBEDDING,
    )
    return _single(
        "sphere_quantum", SPHERE_X, SPHERE_Y, chart,
        **_gb_meta(1, 1, has_tangency=False, trivializable=True, cap=SPHERE_CAP,
                   notes="chart degenerates at u = 0 and u = pi (the points (0, +-1, 0))"),
    )


def _torus_atlas():
    c1 = Chart("omega1", (-PI / 2, PI / 2, -PI, PI), periodic=(False, True))
    c2 = Chart("omega2", (PI / 4, 7 * PI / 4, -PI, PI), periodic=(False, True))
    f1 = Frame2(("1", "0"), ("0", "sin(x)"), c1)
    f2 = Frame2(("1", "0"), ("0", "1"), c2)
    overlaps = [
        Overlap(0, 1, [[(3 * PI / 8, 0.0)]]),
        Overlap(0, 1, [[(-3 * PI / 8, 0.0)]], transition=("x + 6.283185307179586", "y")),
    ]
    meta = {"orientable": False, "trivializable": False, "has_tangency": False,
            "notes": "two-chart rank-varying distribution on the torus; overlap has two components"}
    return Scenario("torus_distribution_atlas", ARS2([f1, f2], overlaps, meta, distribution_only=True), meta)


def _klein():
    chart = Chart("klein", SQUARE, periodic=("twist", True))
    return _single(
        "klein_frame", ("1", "0"), ("0", "sin(2*x)"), chart,
        trivializable=True, has_tangency=False,
        notes="global frame on the Klein bottle (x, -pi) ~ (x, pi), (-pi, y) ~ (pi, -y)",
    )


def _warped_strip():
    chart = Chart("warped_strip", R2, window=(-1.0, 1.0, -1.0, 1.0))
    return _single(
        "warped_strip", ("1", "0"), ("0", "x*exp(0.2*x*cos(y))"), chart,
        has_tangency=False, trivializable=True,
        notes="Grushin-type frame with warping exp(phi), phi = 0.2 x cos y; boundary cancellation fixture",
    )


SCENARIOS = {
    "grushin": _grushin,
    "grushin_m10": _grushin_m10,
    "davydov": _davydov,
    "torus_cos": _torus_cos,
    "torus_sin": _torus_sin,
    "torus_sin_warped": _torus_sin_warped,
    "sphere_quantum": _sphere,
    "torus_distribution_atlas": _torus_atlas,
    "klein_frame": _klein,
    "flat_torus": _flat_torus,
    "warped_strip": _warped_strip,
}

_cache: dict = {}


def list_scenarios():
    return sorted(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        path = Path(name)
        if path.suffix == ".json" and path.exists():
            return load_scenario(path)
        raise InputError(f"unknown scenario {name!r}; known: {', '.join(list_scenarios())}")
    if name not in _cache:
        _cache[name] = SCENARIOS[name]()
    return _cache[name]


def _periodic(v):
    if v in (True, False, "twist"):
        return v
    raise ConfigurationError(f"periodic flag must be true, false or \"twist\", got {v!r}")


def scenario_from_dict(d: dict) -> Scenario:
    try:
        name = d.get("name", "custom")
        frames = []
        for k, c in enumerate(d["charts"]):
            dom = tuple(float(v) for v in c["domain"])
            chart = Chart(
                c.get("name", f"{name}_{k}"), dom,
                periodic=tuple(_periodic(v) for v in c.get("periodic", [False, False])),
                window=tuple(c["window"]) if c.get("window") else None,
                embedding=tuple(c["embedding"]) if c.get("embedding") else None,
            )
            fr = c["frames"][0]
            frames.append(Frame2(tuple(fr["X"]), tuple(fr["Y"]), chart))
        overlaps = [
            Overlap(
                int(o["i"]), int(o["j"]),
                [[tuple(float(v) for v in p) for p in comp] for comp in o["components"]],
                tuple(o["transition"]) if o.get("transition") else None,
            )
            for o in d.get("overlaps", [])
        ]
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ConfigurationError(f"malformed scenario description: {exc}") from exc
    meta = dict(d.get("metadata", {}))
    if "expected" not in meta and "chi_plus" in meta and "chi_minus" in meta:
        meta["expected"] = 2 * PI * (meta["chi_plus"] - meta["chi_minus"])
    ars = ARS2(frames, overlaps, meta, distribution_only=bool(d.get("distribution_only", False)))
    return Scenario(name, ars, meta)


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc
    return scenario_from_dict(data)
