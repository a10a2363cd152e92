"""Command-line interface: ``poincare-gap <subcommand> ...``.

Exit status: 0 when the run passes its checks, 1 when an experiment or bound
check fails (or a solver gives up), 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional

from .. import __version__
from .. import constants as C
from ..errors import GeometryError, InvalidExponent, PoincareGapError, WeightError
from ..fem import linf_bound_check, richardson, solve_eigen, verify_quantitative
from ..geometry import diameter, load_polygon
from ..mesh import refine_uniform, triangulate
from ..onedim import mu_p_1d_rayleigh, mu_p_1d_shoot
from ..weights import Weight, load_weight
from . import experiments as X
from .report import write_csv, write_json
from .svg import scatter_svg

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _weight_arg(text: Optional[str]) -> Weight:
    """A weight file path, inline JSON, or one of the shorthands '1' and 'x'."""
    if text is None or text in ("1", "constant"):
        return Weight.constant()
    if text == "x":
        return Weight.affine_power((0.0, 1.0, 0.0), 1.0)
    if text.lstrip().startswith("{"):
        return Weight.from_json(json.loads(text))
    return load_weight(text)


def _emit(obj, out: Optional[str], default_name: str) -> Optional[Path]:
    """Write JSON to ``out`` (a directory, or a file when it ends in .json)."""
    if not out:
        return None
    path = Path(out)
    if path.suffix.lower() != ".json":
        path = path / default_name
    return write_json(obj, path)


def _finish_report(rep: X.ExperimentReport, out: Optional[str]) -> int:
    if out:
        write_json(rep, Path(out) / "report.json")
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- subcommands ---------------------------------------------------------
GRID_P = (1.2, 1.5, 2.0, 3.0, 5.0)
GRID_M = (1, 2, 3)


def _checks_ok(rep: C.ConstantsReport) -> bool:
    return all(v for v in rep.checks.values() if isinstance(v, bool))


def cmd_constants(a) -> int:
    if a.grid:
        reports = [C.constants_report(p, m, a.N) for p in GRID_P for m in GRID_M]
        _emit({"schema": "1", "version": __version__, "grid": {"p": list(GRID_P), "m": list(GRID_M)},
               "reports": reports}, a.out, "constants.json")
        bad = [(r.p, r.m) for r in reports if not _checks_ok(r)]
        print(f"inequality suite over {len(reports)} (p, m) pairs: "
              + ("all checks ok" if not bad else f"FAILED at {bad}"))
        return EXIT_OK if not bad else EXIT_FAIL
    if a.p is None:
        print("error: --p is required unless --grid is given", file=sys.stderr)
        return EXIT_USAGE
    rep = C.constants_report(a.p, a.m, a.N)
    _emit(rep, a.out, "constants.json")
    ok = _checks_ok(rep)
    print(f"p={a.p:g} m={a.m} N={a.N}: ln K0 = {float(rep.k0.ln):.6e}, ln K1 = {float(rep.k1.ln):.6e}, "
          f"kroger = {rep.kroger:.6g}, checks {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_pip(a) -> int:
    val = C.pi_p(a.p)
    print(f"pi_p = {val:.15g}  pi_p^p = {C.pi_p_pow(a.p):.15g}  d_p = {C.d_p(a.p):.15g}")
    _emit({"p": a.p, "pi_p": val, "pi_p_pow": C.pi_p_pow(a.p), "d_p": C.d_p(a.p), "version": __version__},
          a.out, "pip.json")
    return EXIT_OK


def cmd_eig1d(a) -> int:
    w = _weight_arg(a.weight)
    t0 = time.perf_counter()
    res = mu_p_1d_shoot(a.p, a.d, w) if a.method == "shoot" else mu_p_1d_rayleigh(a.p, a.d, w, n=a.n)
    out = {"schema": "1", "version": __version__, "p": a.p, "d": a.d, "weight": w.to_json(),
           "method": a.method, "runtime": time.perf_counter() - t0, "result": res.to_json()}
    if not a.profile:
        out["result"].pop("grid", None)
        out["result"].pop("profile", None)
    _emit(out, a.out, "eig1d.json")
    print(f"mu_p = {res.mu:.12g} ({a.method}, p={a.p:g}, d={a.d:g}, weight {w.describe()})")
    return EXIT_OK


def cmd_eig2d(a) -> int:
    poly = load_polygon(a.polygon)
    w = _weight_arg(a.weight)
    t0 = time.perf_counter()
    mesh = triangulate(poly, a.h)
    res = solve_eigen(a.p, poly, w, mesh)
    out = {"schema": "1", "version": __version__, "p": a.p, "h": a.h, "weight": w.to_json(),
           "polygon": poly.to_json(), "mesh": mesh.stats(), "result": res.to_json()}
    mu = res.mu
    if a.refine:
        fine = solve_eigen(a.p, poly, w, refine_uniform(mesh))
        mu = richardson(res.mu, fine.mu)
        out["refined"] = {"mu_fine": fine.mu, "mu_extrapolated": mu, "n_nodes_fine": fine.n_nodes}
    floor = C.pi_p_pow(a.p) / diameter(poly) ** a.p
    linf = linf_bound_check(res, poly, w, a.p)
    out["checks"] = {"rigidity_floor": floor, "rigidity_holds": bool(mu > floor), "linf": linf,
                     "converged": res.converged}
    out["runtime"] = time.perf_counter() - t0
    _emit(out, a.out, "eig2d.json")
    ok = res.converged and mu > floor and linf["holds"]
    print(f"mu_p = {mu:.12g} on {mesh.n_nodes} nodes (floor {floor:.6g}, L-inf margin {linf['margin']:.3g})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(a) -> int:
    poly = load_polygon(a.polygon)
    w = _weight_arg(a.weight)
    s = verify_quantitative(a.p, poly, w, m=a.m, h=a.h, refine=a.refine)
    _emit({"schema": "1", "version": __version__, "sample": s.to_json()}, a.out, "verify.json")
    ok = s.floor_holds and s.rigidity_holds and s.status == "ok"
    print(f"deficit = {s.deficit:.8g}, ratio = {s.ratio:.8g}, ln ratio {s.ln_ratio:.4g} > ln K0 "
          f"{s.ln_k0:.4g}: {s.floor_holds}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sharpness(a) -> int:
    return _finish_report(X.sharpness_sweep(a.p, a.eps, h_factor=a.h_factor, refine=not a.no_refine), a.out)


def cmd_counterexample(a) -> int:
    rep = X.counterexample_logconcave(a.n, sides=a.sides, refine=not a.no_refine, max_nodes=a.max_nodes)
    return _finish_report(rep, a.out)


def cmd_collapse(a) -> int:
    rep = X.collapse_study(a.p, _weight_arg(a.weight), a.eps, h_factor=a.h_factor, refine=not a.no_refine,
                           check_eps=a.check_eps)
    return _finish_report(rep, a.out)


def cmd_rigidity(a) -> int:
    return _finish_report(X.rigidity_check(a.count, a.seed, a.ps, h=a.h, threads=a.threads), a.out)


def cmd_blaschke(a) -> int:
    rep, samples = X.blaschke_sample(a.p, a.count, a.seed, h=a.h, include_square=not a.no_square,
                                     threads=a.threads)
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(samples, out / "samples.csv")
        ok = [s.status == "ok" and math.isfinite(s.ratio) for s in samples]
        best = rep.fitted.get("min_ratio", {}).get("value")
        svg = scatter_svg([s.a2 for s, k in zip(samples, ok) if k], [s.ratio for s, k in zip(samples, ok) if k],
                          title=f"Deficit ratio, p = {a.p:g}, {sum(ok)} polygons (seed {a.seed})",
                          xlabel="John semi-axis a2 (unit diameter)", ylabel="deficit * D^(p+2) / a2^2",
                          log_y=True, highlight=[s.seed == "square" for s, k in zip(samples, ok) if k],
                          hline=best, note=f"min ratio {best:.4g}" if best is not None else "")
        (out / "diagram.svg").write_text(svg)
    return _finish_report(rep, a.out)


# -- parser -------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poincare-gap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    p = add("constants", cmd_constants, "evaluate the explicit constant chain at (p, m)")
    p.add_argument("--p", type=float)
    p.add_argument("--grid", action="store_true", help="run the inequality suite over the (p, m) grid")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--out")

    p = add("pip", cmd_pip, "print pi_p, (pi_p)^p and d_p")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--out")

    p = add("eig1d", cmd_eig1d, "first nonzero weighted Neumann eigenvalue on (0, d)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--weight", help="weight JSON file, inline JSON, '1' or 'x' (default 1)")
    p.add_argument("--method", choices=("shoot", "rayleigh"), default="shoot")
    p.add_argument("--n", type=int, default=4096, help="grid nodes for the rayleigh method")
    p.add_argument("--profile", action="store_true", help="include the eigenfunction in the JSON")
    p.add_argument("--out")

    p = add("eig2d", cmd_eig2d, "first nonzero weighted Neumann eigenvalue on a polygon")
    p.add_argument("--polygon", required=True)
    p.add_argument("--weight")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--refine", action="store_true", help="Richardson-extrapolate with a refined mesh")
    p.add_argument("--out", help="result JSON file (or directory)")

    p = add("verify", cmd_verify, "check the quantitative lower bound on one polygon")
    p.add_argument("--polygon", required=True)
    p.add_argument("--weight")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--refine", action="store_true")
    p.add_argument("--out")

    p = add("sharpness", cmd_sharpness, "thin-rectangle sweep of the deficit exponent")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--eps", type=_floats, default=list(X.SHARPNESS_EPS))
    p.add_argument("--h-factor", type=float, default=0.25)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out")

    p = add("counterexample", cmd_counterexample, "log-concave weights concentrating on a diameter")
    p.add_argument("--n", type=_floats, default=list(X.COUNTEREXAMPLE_N))
    p.add_argument("--sides", type=int, default=128)
    p.add_argument("--max-nodes", type=int, default=500_000)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out")

    p = add("blaschke", cmd_blaschke, "deficit ratios of seeded random convex polygons")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--h", type=float, default=0.04)
    p.add_argument("--no-square", action="store_true")
    p.add_argument("--threads", type=int, help=f"worker cap (default: ${X.THREADS_ENV}, else serial)")
    p.add_argument("--out")

    p = add("collapse", cmd_collapse, "thin rectangles against the collapsed 1D problem")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--weight")
    p.add_argument("--eps", type=_floats, default=list(X.COLLAPSE_EPS))
    p.add_argument("--check-eps", type=float, default=0.02)
    p.add_argument("--h-factor", type=float, default=0.25)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out")

    p = add("rigidity", cmd_rigidity, "strict Payne-Weinberger floor on random polygons")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--ps", type=_floats, default=[1.5, 2.0, 3.0])
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    try:
        return a.func(a)
    except (GeometryError, WeightError, InvalidExponent, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PoincareGapError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
