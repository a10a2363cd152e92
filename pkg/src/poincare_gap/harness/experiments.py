"""The checkable experiments: sharpness, log-concave counterexample, Blaschke sampling,
thin-domain collapse, and pointwise rigidity over random polygons.

Each driver returns an :class:`ExperimentReport` whose ``checks`` mirror the
acceptance rules; nothing here raises on a failed check.
"""
from __future__ import annotations

import math
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .. import __version__
from .. import constants as C
from ..errors import PoincareGapError
from ..fem import (DeficitSample, Eig2DResult, linf_bound_check, p2_spectrum, richardson, solve_eigen,
                   verify_quantitative)
from ..geometry import (ConvexPolygon2D, clip_band, diameter, john_ellipse, random_convex_polygon,
                        rectangle, regular_polygon)
from ..mesh import refine_uniform, triangulate
from ..onedim import mu_p_1d_shoot, spectrum_1d_p2
from ..weights import Weight

SHARPNESS_EPS = (0.1, 0.05, 0.02, 0.01, 0.005)
COUNTEREXAMPLE_N = (1, 2, 4, 8, 16, 32, 64)
COLLAPSE_EPS = (0.1, 0.05, 0.02)
BLASCHKE_BAND = (3.0, 12.0)

TOLERANCES = {
    "sharpness_slope_abs": 0.05,
    "sharpness_ratio_limit_rel": 0.01,
    "sharpness_upper_slack_rel": 5e-3,
    "counterexample_limit_rel": 0.02,
    "collapse_rel": 0.01,
    "linf_margin_min": 1.0,
    "square_ratio_rel": 0.01,
    "fit_points": 3,
}

THREADS_ENV = "POINCARE_GAP_THREADS"


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    samples: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    runtime: float = 0.0
    notes: list = field(default_factory=list)
    constants: Optional[dict] = None
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    version: str = __version__
    schema: str = "1"

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def to_json(self) -> dict:
        return {"schema": self.schema, "version": self.version, "name": self.name,
                "parameters": self.parameters, "passed": self.passed, "checks": self.checks,
                "fitted": self.fitted, "runtime": self.runtime, "notes": self.notes,
                "tolerances": self.tolerances, "constants": self.constants, "samples": self.samples}

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        failed = [k for k, v in self.checks.items() if not v]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"{self.name}: {verdict} in {self.runtime:.1f}s{tail}"


# -- helpers ---------------------------------------------------------------
def _line_fit(x, y) -> dict:
    """Least-squares line y = slope*x + intercept with rms residual and slope standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        stderr = 0.0
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "residual": rms, "slope_stderr": stderr}


def _constants_json(p: float, m: int = 1) -> dict:
    return C.constants_report(p, m).to_json()


def _linf(res: Eig2DResult, poly, w, p) -> Optional[float]:
    if not res.converged:
        return None
    return float(linf_bound_check(res, poly, w, p)["margin"])


def _solve(p, poly, w, h, refine, max_nodes=None) -> dict:
    """Eigenvalue on one mesh, optionally Richardson-extrapolated with its red refinement."""
    mesh = triangulate(poly, h) if max_nodes is None else triangulate(poly, h, max_nodes=max_nodes)
    coarse = solve_eigen(p, poly, w, mesh)
    out = {"mu_coarse": coarse.mu, "n_nodes": mesh.n_nodes, "mesh_h": mesh.h_max,
           "residual": coarse.residual, "converged": coarse.converged,
           "linf_margins": [_linf(coarse, poly, w, p)], "_results": [coarse]}
    if refine:
        fine_mesh = refine_uniform(mesh) if max_nodes is None else refine_uniform(mesh, max_nodes=max_nodes)
        fine = solve_eigen(p, poly, w, fine_mesh)
        out.update(mu_fine=fine.mu, mu=richardson(coarse.mu, fine.mu), n_nodes_fine=fine_mesh.n_nodes,
                   residual=max(coarse.residual, fine.residual),
                   converged=coarse.converged and fine.converged)
        out["linf_margins"].append(_linf(fine, poly, w, p))
        out["_results"].append(fine)
    else:
        out["mu"] = coarse.mu
    return out


def _public(d: dict) -> dict:
    return {k: v for k, v in d.items() if not k.startswith("_")}


def _linf_ok(samples: list) -> bool:
    margins = [m for s in samples for m in s.get("linf_margins", []) if m is not None]
    return bool(margins) and min(margins) >= TOLERANCES["linf_margin_min"]


def worker_count(threads: Optional[int] = None) -> int:
    """Worker cap: explicit argument, else the environment variable, else serial."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            threads = 0
    return max(0, int(threads))


def _ordered_map(fn: Callable, items: Sequence, threads: Optional[int]) -> list:
    n = worker_count(threads)
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))  # map preserves input order


# -- sharpness ----------------------------------------------------------
def sharpness_sweep(p: float = 2.0, eps_grid: Sequence[float] = SHARPNESS_EPS, h_factor: float = 0.25,
                    refine: bool = True) -> ExperimentReport:
    """Deficit on thin rectangles (0,1)x(0,eps) against the John semi-axis a2 = eps/2."""
    eps_grid = sorted((float(e) for e in eps_grid), reverse=True)
    if len(eps_grid) < 5 or not all(0 < e <= 0.2 for e in eps_grid):
        raise ValueError("eps_grid needs at least 5 values in (0, 0.2]")
    t0 = time.perf_counter()
    one = Weight.constant()
    floor1 = C.pi_p_pow(p)
    samples = []
    for eps in eps_grid:
        poly = rectangle(1.0, eps)
        D = diameter(poly)
        a2 = john_ellipse(poly).a2
        s = _solve(p, poly, one, h_factor * eps, refine)
        deficit = s["mu"] - floor1 / D**p
        ratio = deficit * D ** (p + 2) / a2**2
        rec = {"eps": eps, "D": D, "a2": a2, **_public(s), "deficit": deficit, "ratio": ratio,
               "upper_bound_holds": bool(s["mu"] <= floor1 * (1 + TOLERANCES["sharpness_upper_slack_rel"]))}
        if p == 2:
            rec["ratio_closed_form"] = 4 * math.pi**2 * (1 + eps**2)
            rec["deficit_closed_form"] = math.pi**2 * eps**2 / (1 + eps**2)
        samples.append(rec)
    k = TOLERANCES["fit_points"]
    tail = samples[-k:]  # the smallest eps values
    slope_fit = _line_fit([math.log(r["a2"]) for r in tail], [math.log(r["deficit"]) for r in tail])
    ratio_fit = _line_fit([r["eps"] ** 2 for r in tail], [r["ratio"] for r in tail])
    fitted = {"slope": {"value": slope_fit["slope"], "residual": slope_fit["residual"],
                        "stderr": slope_fit["slope_stderr"]},
              "ratio_limit": {"value": ratio_fit["intercept"], "residual": ratio_fit["residual"]}}
    checks = {"slope_within_0.05": abs(slope_fit["slope"] - 2.0) <= TOLERANCES["sharpness_slope_abs"],
              "upper_bound": all(r["upper_bound_holds"] for r in samples),
              "linf_margin": _linf_ok(samples)}
    if p == 2:
        ref = 4 * math.pi**2
        fitted["ratio_limit"]["reference"] = ref
        fitted["ratio_limit"]["rel_error"] = abs(ratio_fit["intercept"] - ref) / ref
        checks["ratio_limit_within_1pct"] = fitted["ratio_limit"]["rel_error"] <= TOLERANCES[
            "sharpness_ratio_limit_rel"]
    return ExperimentReport(
        name="sharpness", parameters={"p": p, "eps_grid": eps_grid, "h_factor": h_factor, "refine": refine},
        samples=samples, fitted=fitted, checks=checks, runtime=time.perf_counter() - t0,
        notes=["slope fitted on the three smallest eps; a2 is the John semi-axis eps/2"],
        constants=_constants_json(p))


# -- log-concave counterexample --------------------------------------------
def counterexample_logconcave(n_grid: Sequence[float] = COUNTEREXAMPLE_N, sides: int = 128, band: float = 6.0,
                              h_max: float = 0.05, h_scale: float = 0.2, refine: bool = True,
                              max_nodes: int = 500_000) -> ExperimentReport:
    """mu_2 of the unit-disk polygon with weight n exp(-(n y)^2), extrapolated in 1/n.

    Away from the axis the weight falls below exp(-band**2) of its peak, so the
    polygon is clipped to the band |y| <= band/n; the neglected weight mass is
    recorded per sample.
    """
    n_grid = [float(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be increasing")
    t0 = time.perf_counter()
    disk = regular_polygon(sides, 1.0)
    D = diameter(disk)
    a2 = john_ellipse(disk).a2
    floor = (math.pi / D) ** 2
    samples = []
    for n in n_grid:
        half = min(1.0, band / n)
        poly = clip_band(disk, half) if half < 1.0 else disk
        w = Weight.gaussian_y(n)
        s = _solve(2.0, poly, w, min(h_max, h_scale / n), refine, max_nodes=max_nodes)
        deficit = s["mu"] - floor
        samples.append({"n": n, "band_half_height": half, "tail_mass": math.erfc(n * half),
                        **_public(s), "deficit": deficit, "ratio": deficit * D**4 / a2**2,
                        "above_floor": bool(deficit > 0)})
    k = TOLERANCES["fit_points"]
    tail = samples[-k:]
    fit = _line_fit([1.0 / r["n"] for r in tail], [r["mu"] for r in tail])
    limit = fit["intercept"]
    ref = math.pi**2 / 4
    ratios = [r["ratio"] for r in samples]
    fitted = {"limit": {"value": limit, "residual": fit["residual"], "reference": ref,
                        "rel_error": abs(limit - ref) / ref, "slope_in_1_over_n": fit["slope"]}}
    checks = {"limit_within_2pct": abs(limit - ref) / ref <= TOLERANCES["counterexample_limit_rel"],
              "first_above_floor": samples[0]["above_floor"],
              "ratio_decreasing": all(b < a for a, b in zip(ratios, ratios[1:])),
              "linf_margin": _linf_ok(samples)}
    return ExperimentReport(
        name="counterexample",
        parameters={"n_grid": n_grid, "sides": sides, "band": band, "h_max": h_max, "h_scale": h_scale,
                    "refine": refine, "max_nodes": max_nodes},
        samples=samples, fitted=fitted, checks=checks, runtime=time.perf_counter() - t0,
        notes=["limit fitted as mu = L + c/n on the three largest n",
               "ratio uses the John semi-axis of the unclipped disk polygon",
               "L-infinity margins use the m = 1 constant; the weight is only log-concave"],
        constants=_constants_json(2.0))


# -- Blaschke sampling -----------------------------------------------------
def sample_seeds(seed: int, count: int) -> list[int]:
    """Per-polygon seeds derived from the experiment seed."""
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.integers(0, 2**31 - 1, size=count)]


def polygon_points_for(sample_seed: int, lo: int = 3, hi: int = 12) -> int:
    """Number of random disk points for a polygon seed (so the seed alone reproduces it)."""
    return lo + sample_seed % (hi - lo + 1)


def unit_diameter_square() -> ConvexPolygon2D:
    sq = rectangle(1.0, 1.0)
    return sq.transformed(np.eye(2) / math.sqrt(2.0))


def _failed_sample(seed, p, exc: Exception) -> DeficitSample:
    nan = float("nan")
    return DeficitSample(seed=seed, p=float(p), D=nan, a1=nan, a2=nan, width=nan, mu=nan, deficit=nan,
                         ratio=nan, residual=nan, status=f"failed:{type(exc).__name__}",
                         floor_holds=False, kroger_holds=False, rigidity_holds=False)


def blaschke_sample(p: float = 2.0, count: int = 200, seed: int = 7, h: float = 0.04,
                    include_square: bool = True, threads: Optional[int] = None,
                    band: tuple = BLASCHKE_BAND, points_range: tuple = (3, 12)) -> tuple[ExperimentReport, list]:
    """Deficit ratios of seeded random convex polygons of unit diameter.

    Returns the report and the list of :class:`DeficitSample` (square first
    when included, then the random polygons in seed order).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    t0 = time.perf_counter()
    one = Weight.constant()
    lo, hi = points_range
    tasks: list = []
    if include_square:
        tasks.append(("square", unit_diameter_square))
    for s in sample_seeds(seed, count):
        tasks.append((s, lambda s=s: random_convex_polygon(s, polygon_points_for(s, lo, hi))))

    def run(task):
        sid, make = task
        try:
            return verify_quantitative(p, make(), one, h=h, seed=sid)
        except (PoincareGapError, ValueError, np.linalg.LinAlgError) as exc:
            smp = _failed_sample(sid, p, exc)
            smp._error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
            return smp

    samples = _ordered_map(run, tasks, threads)
    is_valid = [s.status == "ok" and math.isfinite(s.ratio) for s in samples]
    valid = [s for s, ok in zip(samples, is_valid) if ok]
    excluded = [{"seed": s.seed, "status": s.status, "error": getattr(s, "_error", "not converged")}
                for s, ok in zip(samples, is_valid) if not ok]
    fitted = {}
    checks = {"floor_all": bool(valid) and all(s.floor_holds for s in valid),
              "rigidity_all": bool(valid) and all(s.rigidity_holds for s in valid)}
    if valid:
        best = min(valid, key=lambda s: s.ratio)
        fitted["min_ratio"] = {"value": best.ratio, "residual": best.residual, "seed": best.seed,
                               "a2": best.a2, "width": best.width, "D": best.D,
                               "full_axis_value": best.ratio / 4}
        fitted["max_ratio"] = {"value": max(s.ratio for s in valid), "residual": None}
        checks["min_ratio_in_band"] = band[0] <= best.ratio <= band[1]
    else:
        checks["min_ratio_in_band"] = False
    if include_square:
        sq = samples[0]
        ref = 8 * math.pi**2
        fitted["square_ratio"] = {"value": sq.ratio, "residual": sq.residual, "reference": ref}
        checks["square_ratio_within_1pct"] = bool(abs(sq.ratio - ref) / ref <= TOLERANCES["square_ratio_rel"])
    rep = ExperimentReport(
        name="blaschke",
        parameters={"p": p, "count": count, "seed": seed, "h": h, "include_square": include_square,
                    "band": list(band), "workers": worker_count(threads),
                    "sampler": {"model": "convex hull of n uniform points in the unit disk, centred and "
                                         "scaled to unit diameter",
                                "n_points": f"{lo} + (sample seed mod {hi - lo + 1})",
                                "sample_seeds": "numpy default_rng(seed).integers(0, 2**31-1, count)"}},
        samples=[s.to_json() for s in samples], fitted=fitted, checks=checks,
        runtime=time.perf_counter() - t0,
        notes=["x axis: John semi-axis a2 at unit diameter; y axis: deficit*D^(p+2)/a2^2",
               "full_axis_value divides the minimum by 4, i.e. measures a2 as the full minor axis",
               f"excluded samples: {len(excluded)}"],
        constants=_constants_json(p))
    rep.fitted["excluded"] = {"value": len(excluded), "residual": None, "samples": excluded}
    return rep, samples


# -- collapse -----------------------------------------------------------
def collapse_study(p: float = 2.0, weight: Optional[Weight] = None, eps_grid: Sequence[float] = COLLAPSE_EPS,
                   h_factor: float = 0.25, refine: bool = True, n_eigs: int = 3,
                   check_eps: float = 0.02) -> ExperimentReport:
    """mu_p on (0,1)x(0,eps) with an x-only weight against the 1D limit problem on (0,1)."""
    weight = weight or Weight.constant()
    if weight.depends_on_y():
        raise ValueError("collapse_study needs a weight independent of y")
    t0 = time.perf_counter()
    eps_grid = sorted((float(e) for e in eps_grid), reverse=True)
    target = mu_p_1d_shoot(p, 1.0, weight).mu
    spec1d = spectrum_1d_p2(1.0, weight, k=n_eigs) if (p == 2 and n_eigs > 1) else None
    samples = []
    for eps in eps_grid:
        poly = rectangle(1.0, eps)
        h = h_factor * eps
        s = _solve(p, poly, weight, h, refine)
        rec = {"eps": eps, **_public(s), "target": target, "rel_error": abs(s["mu"] - target) / target}
        if spec1d is not None:
            coarse_res = s["_results"][0]
            sp_c = p2_spectrum(poly, weight, coarse_res.mesh, k=n_eigs)
            if refine:
                sp_f = p2_spectrum(poly, weight, s["_results"][1].mesh, k=n_eigs)
                sp2d = [richardson(a, b) for a, b in zip(sp_c, sp_f)]
            else:
                sp2d = list(sp_c)
            rec["spectrum_2d"] = [float(v) for v in sp2d]
            rec["spectrum_1d"] = [float(v) for v in spec1d]
            rec["spectrum_rel_error"] = [abs(a - b) / b for a, b in zip(sp2d, spec1d)]
        samples.append(rec)
    errs = [(r["eps"], r["rel_error"]) for r in samples if r["rel_error"] > 0]
    fitted = {"target": {"value": target, "residual": None}}
    if len(errs) >= 2:
        fit = _line_fit([math.log(e) for e, _ in errs], [math.log(v) for _, v in errs])
        fitted["rate"] = {"value": fit["slope"], "residual": fit["residual"]}
    at = [r for r in samples if abs(r["eps"] - check_eps) < 1e-12]
    checks = {"linf_margin": _linf_ok(samples)}
    if at:
        checks[f"within_1pct_at_eps_{check_eps:g}"] = at[0]["rel_error"] <= TOLERANCES["collapse_rel"]
        if spec1d is not None:
            checks["spectrum_within_1pct"] = max(at[0]["spectrum_rel_error"]) <= TOLERANCES["collapse_rel"]
    else:
        checks["check_eps_in_grid"] = False
    return ExperimentReport(
        name="collapse",
        parameters={"p": p, "weight": weight.to_json(), "eps_grid": eps_grid, "h_factor": h_factor,
                    "refine": refine, "n_eigs": n_eigs, "check_eps": check_eps},
        samples=samples, fitted=fitted, checks=checks, runtime=time.perf_counter() - t0,
        notes=["1D target from the shooting solver on (0,1) with the x-profile of the weight"],
        constants=_constants_json(p, _collapse_m(weight)))


def _collapse_m(weight: Weight) -> int:
    c = weight.concavity
    if c.is_power_concave() and not weight.is_constant():
        return max(1, int(math.ceil(c.m)))
    return 1


# -- rigidity -----------------------------------------------------------
def affine_weight_for(poly: ConvexPolygon2D) -> Weight:
    """Positive affine weight (x - xmin) + D/2 on the polygon, 1-concave."""
    xmin = float(poly.vertices[:, 0].min())
    return Weight.affine_power((0.5 * diameter(poly) - xmin, 1.0, 0.0), 1.0)


def rigidity_check(count: int = 50, seed: int = 11, ps: Sequence[float] = (1.5, 2.0, 3.0), h: float = 0.05,
                   threads: Optional[int] = None, points_range: tuple = (3, 12)) -> ExperimentReport:
    """mu_p > (pi_p/D)^p on random polygons with constant and affine weights."""
    t0 = time.perf_counter()
    lo, hi = points_range
    seeds = sample_seeds(seed, count)
    tasks = [(s, p, kind) for s in seeds for p in ps for kind in ("constant", "affine")]

    def run(task):
        s, p, kind = task
        poly = random_convex_polygon(s, polygon_points_for(s, lo, hi))
        w = Weight.constant() if kind == "constant" else affine_weight_for(poly)
        try:
            smp = verify_quantitative(p, poly, w, h=h, seed=s)
        except (PoincareGapError, ValueError) as exc:
            return {"seed": s, "p": p, "weight": kind, "status": f"failed:{type(exc).__name__}",
                    "holds": False}
        return {"seed": s, "p": p, "weight": kind, "status": smp.status, "mu": smp.mu,
                "floor": C.pi_p_pow(p) / smp.D**p, "deficit": smp.deficit, "holds": smp.rigidity_holds,
                "linf_margins": [smp.linf_margin] if smp.status == "ok" else [], "spread": smp.spread}

    samples = _ordered_map(run, tasks, threads)
    rel = [s["deficit"] / s["floor"] for s in samples if "deficit" in s]
    fitted = {"min_relative_deficit": {"value": min(rel) if rel else None, "residual": None}}
    checks = {"strict_all": all(s["holds"] for s in samples), "linf_margin": _linf_ok(samples)}
    return ExperimentReport(
        name="rigidity", parameters={"count": count, "seed": seed, "ps": list(ps), "h": h},
        samples=samples, fitted=fitted, checks=checks, runtime=time.perf_counter() - t0,
        constants=_constants_json(2.0))
