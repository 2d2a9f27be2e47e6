"""Command-line interface: ``arsgeo <command> [options]``.

Tables go to ``--out`` (standard output by default) as CSV; ``--svg``
writes a static figure. Exit status: 0 success, 2 bad input, 3 numerical
failure, 4 output failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io as aio
from .errors import ArsgeoError, InputError
from .frame_core import classify_point, orientability_check, trace_singular_locus
from .gauss_bonnet import gauss_bonnet_limit
from .hamiltonian_flow import A_MAX, DEFAULT_TOL, _on_z, exp_map, front, geodesic, hamiltonian_values
from .loci import CutFinder, conjugate_time
from .metric import curvature_grid
from .scenarios import get_scenario, list_scenarios

log = logging.getLogger("arsgeo")

ACCEPTANCE_EPS = "0.2,0.1,0.05,0.025"


def _point(text):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}")
    return tuple(parts)


def _floats(text):
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _branch(text):
    if text not in ("1", "-1", "+1"):
        raise argparse.ArgumentTypeError("branch is 1 or -1")
    return int(text)


def build_parser():
    p = argparse.ArgumentParser(prog="arsgeo", description="Two-dimensional almost-Riemannian geometry.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    D = argparse.ArgumentDefaultsHelpFormatter

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=D)
        sp.add_argument("--out", default="-", help="CSV output path ('-' for standard output)")
        return sp

    def scen(sp):
        sp.add_argument("--scenario", required=True, help="registry name or path to a JSON description")

    def svg(sp):
        sp.add_argument("--svg", default=None, help="write a static SVG figure to this path")

    sp = add("scenario", "list the scenario registry")
    sp.add_argument("action", choices=["list"], help="what to do")

    sp = add("classify", "classify a point as ordinary, Grushin or tangency")
    scen(sp)
    sp.add_argument("--point", type=_point, required=True, help="point x,y")

    sp = add("singular-locus", "trace the singular locus Z")
    scen(sp)
    sp.add_argument("--grid", type=_positive(int), default=128, help="contouring grid size")
    svg(sp)

    sp = add("geodesic", "integrate one normal geodesic")
    scen(sp)
    sp.add_argument("--from", dest="base", type=_point, default=None, help="base point x,y (scenario default if omitted)")
    sp.add_argument("--theta", type=float, required=True, help="covector angle, or line coordinate a on Z")
    sp.add_argument("--tmax", type=_positive(float), required=True, help="final time")
    sp.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL, help="integrator tolerance")
    sp.add_argument("--branch", type=_branch, default=1, help="covector line at a Grushin base point")
    sp.add_argument("--samples", type=_positive(int), default=201, help="number of output times")
    svg(sp)

    sp = add("front", "minimum-time front at time t")
    scen(sp)
    sp.add_argument("--from", dest="base", type=_point, default=None, help="base point x,y")
    sp.add_argument("--t", type=_positive(float), required=True, help="front time")
    sp.add_argument("--n", type=_positive(int), default=720, help="number of geodesics")
    sp.add_argument("--a-max", type=_positive(float), default=A_MAX, help="range of a at a Grushin base point")
    sp.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL, help="integrator tolerance")
    svg(sp)

    for name, what in (("conjugate", "first conjugate times"), ("cut", "cut times")):
        sp = add(name, f"{what} along a family of geodesics")
        scen(sp)
        sp.add_argument("--from", dest="base", type=_point, default=None, help="base point x,y")
        sp.add_argument("--tmax", type=_positive(float), default=8.0, help="search horizon")
        sp.add_argument("--theta", type=_floats, default=None,
                        help="comma-separated parameters (default: a uniform grid)")
        sp.add_argument("--branch", type=_branch, default=1, help="covector line for --theta at a Grushin base point")
        sp.add_argument("--n", type=_positive(int), default=120, help="grid size when --theta is omitted")
        sp.add_argument("--a-max", type=_positive(float), default=5.0, help="grid range of a at a Grushin base point")
        sp.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL, help="integrator tolerance")
        svg(sp)

    sp = add("curvature-grid", "Gaussian curvature and area forms on a grid")
    scen(sp)
    sp.add_argument("--grid", type=_positive(int), default=64, help="grid size per axis")
    svg(sp)

    sp = add("gauss-bonnet", "integral of K dA_s over M_eps and its limit")
    scen(sp)
    sp.add_argument("--eps", type=_floats, default=_floats(ACCEPTANCE_EPS), help="decreasing eps values")
    sp.add_argument("--eps0", type=_positive(float), default=None, help="tube width (default: largest injective <= 0.5)")
    sp.add_argument("--nalpha", type=_positive(int), default=128, help="samples along each component of Z")
    sp.add_argument("--nt", type=_positive(int), default=16, help="Gauss nodes per t-panel and tube grid size")
    sp.add_argument("--csv", default=None, help="also write one CSV row per eps here")
    svg(sp)

    sp = add("orientability", "decide orientability of the structure")
    scen(sp)
    return p


# --------------------------------------------------------------------------


def _scenario(args):
    return get_scenario(args.scenario)


def _base(args, s):
    if args.base is not None:
        return args.base
    bp = s.metadata.get("base_point")
    if bp is None:
        raise InputError("--from is required for this scenario")
    return tuple(bp)


def _z_lines(f):
    try:
        return [(p.points, p.closed, "#999999") for p in trace_singular_locus(f, 96)]
    except ArsgeoError:
        return []


def cmd_scenario(args):
    rows = []
    for n in list_scenarios():
        m = get_scenario(n).metadata
        rows.append([n, m.get("expected"), m.get("orientable"), m.get("has_tangency")])
    aio.write_csv(args.out, ["name", "expected", "orientable", "has_tangency"], rows)


def cmd_classify(args):
    s = _scenario(args)
    f = s.ars.frames[0]
    pc = classify_point(f, args.point)
    if args.out == "-":
        sys.stdout.write(f"{pc}\n")
    else:
        aio.write_csv(args.out, ["x", "y", "kind", "d1", "d2", "d3"], [[*args.point, pc.kind, *pc.dims]])


def cmd_singular_locus(args):
    s = _scenario(args)
    f = s.ars.frames[0]
    comps = trace_singular_locus(f, args.grid)
    rows = [[p.chart, k, x, y] for k, p in enumerate(comps) for x, y in p.points]
    aio.write_csv(args.out, ["chart", "seg_id", "x", "y"], rows)
    if args.svg:
        aio.write_svg(args.svg, [(p.points, p.closed, "black") for p in comps], title="singular locus",
                      bbox=f.chart.window)


def cmd_geodesic(args):
    s = _scenario(args)
    f = s.frame
    q = _base(args, s)
    g = geodesic(f, q, args.theta, args.tmax, args.tol, args.branch)
    ts = np.linspace(0.0, g.tmax, args.samples)
    st = g.at(ts)
    H = hamiltonian_values(f, st)
    rows = [[t, *row, h] for t, row, h in zip(ts, st, H)]
    aio.write_csv(args.out, ["t", "x", "y", "lx", "ly", "H"], rows)
    if args.svg:
        aio.write_svg(args.svg, _z_lines(f) + [(st[:, :2], False, "black")], title="geodesic")


def cmd_front(args):
    s = _scenario(args)
    f = s.frame
    q = _base(args, s)
    fr = front(f, q, args.t, args.n, args.tol, args.a_max)
    rows = [[th, x, y, b] for th, b, (x, y) in zip(fr.theta, fr.branch, fr.points)]
    aio.write_csv(args.out, ["theta", "x", "y", "branch"], rows)
    if args.svg:
        if fr.closed:
            lines = [(fr.points, True, "black")]
        else:
            m = len(fr.points) // 2
            lines = [(fr.points[:m], False, "black"), (fr.points[m:], False, "black")]
        aio.write_svg(args.svg, _z_lines(f) + lines, title=f"front t={args.t:g}")


def _query(args, f, q):
    if args.theta is not None:
        th = np.array(args.theta, dtype=float)
        br = np.full(len(th), args.branch if _on_z(f, np.asarray(q, float)) else 0)
        return th, br
    if _on_z(f, np.asarray(q, float)):
        m = max(1, args.n // 2)
        m -= 1 - m % 2
        a = np.linspace(-args.a_max, args.a_max, m)
        return np.concatenate([a, a]), np.concatenate([np.ones(m, int), -np.ones(m, int)])
    th = -np.pi + 2 * np.pi * np.arange(args.n) / args.n
    return th, np.zeros(args.n, int)


def _locus_rows(kind, f, q, th, br, times, tol):
    rows, pts = [], []
    for a, b, t in zip(th, br, times):
        if t is None:
            rows.append([kind, a, None, None, None, b])
            continue
        p = exp_map(f, q, a, t, tol, int(b) or 1)
        rows.append([kind, a, t, p[0], p[1], b])
        pts.append(p)
    return rows, pts


LOCUS_HEADER = ["kind", "theta", "t", "x", "y", "branch"]


def cmd_conjugate(args):
    s = _scenario(args)
    f = s.frame
    q = _base(args, s)
    th, br = _query(args, f, q)
    times = [conjugate_time(f, q, a, args.tmax, args.tol, int(b) or 1) for a, b in zip(th, br)]
    rows, pts = _locus_rows("conjugate", f, q, th, br, times, args.tol)
    aio.write_csv(args.out, LOCUS_HEADER, rows)
    if args.svg:
        aio.write_svg(args.svg, _z_lines(f), [(np.array(pts).reshape(-1, 2), "red")], title="conjugate locus")


def cmd_cut(args):
    s = _scenario(args)
    f = s.frame
    q = _base(args, s)
    th, br = _query(args, f, q)
    finder = CutFinder(f, q, args.tmax, tol=args.tol)
    times = [finder.cut_time(float(a), int(b))[0] for a, b in zip(th, br)]
    rows, pts = _locus_rows("cut", f, q, th, br, times, args.tol)
    aio.write_csv(args.out, LOCUS_HEADER, rows)
    if args.svg:
        aio.write_svg(args.svg, _z_lines(f), [(np.array(pts).reshape(-1, 2), "blue")], title="cut locus")


def cmd_curvature_grid(args):
    s = _scenario(args)
    f = s.frame
    rows = curvature_grid(f, args.grid)
    aio.write_csv(args.out, ["x", "y", "K", "dA", "dAs", "region_sign"], rows.tolist())
    if args.svg:
        plus = rows[rows[:, 5] > 0, :2]
        minus = rows[rows[:, 5] < 0, :2]
        aio.write_svg(args.svg, _z_lines(f), [(plus, "red"), (minus, "blue")], title="region sign",
                      bbox=f.chart.window)


def cmd_gauss_bonnet(args):
    s = _scenario(args)
    rep = gauss_bonnet_limit(s, args.eps, eps0=args.eps0, nalpha=args.nalpha, nt=args.nt)
    d = rep.to_dict()
    aio.write_json(args.out, d)
    if args.csv:
        rows = [[e, i, bp, bm] for e, i, bp, bm in zip(rep.eps, rep.I, rep.B_plus, rep.B_minus)]
        aio.write_csv(args.csv, ["eps", "I", "B_plus", "B_minus"], rows)
    if args.svg:
        le = np.log10(rep.eps)
        li = np.log10(np.abs(np.asarray(rep.I)) + 1e-300)
        aio.write_svg(args.svg, [(np.stack([le, li], axis=1), False, "black")], title="log10 |I| against log10 eps")


def cmd_orientability(args):
    s = _scenario(args)
    res = orientability_check(s.ars)
    if args.out == "-":
        sys.stdout.write(f"{res}\n")
    else:
        aio.write_csv(args.out, ["scenario", "result"], [[s.name, res]])


COMMANDS = {
    "scenario": cmd_scenario,
    "classify": cmd_classify,
    "singular-locus": cmd_singular_locus,
    "geodesic": cmd_geodesic,
    "front": cmd_front,
    "conjugate": cmd_conjugate,
    "cut": cmd_cut,
    "curvature-grid": cmd_curvature_grid,
    "gauss-bonnet": cmd_gauss_bonnet,
    "orientability": cmd_orientability,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ArsgeoError as exc:
        print(f"arsgeo: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        print(f"arsgeo: error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
