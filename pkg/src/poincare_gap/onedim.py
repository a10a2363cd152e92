"""One-dimensional weighted Neumann p-Laplacian eigenproblem.

Two independent solvers for the first nontrivial eigenvalue of

    -(f |u'|^(p-2) u')' = mu f |u|^(p-2) u   on (0, d),   u'(0) = u'(d) = 0,

a shooting method on the flux form and a P1 Rayleigh-quotient minimiser.
Also the refined one-dimensional lower bound and a radial Bessel oracle
for the Neumann Laplacian on the unit disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_simpson, ode, solve_ivp
from scipy.optimize import brentq

from . import constants as C
from .errors import (BracketFailure, DescentStalled, IntervalTooShort, NonIntegrable,
                     WrongConcavityClass)
from .logvalue import LogValue
from .rayleigh import interval_operators, phi_p
from .weights import Weight, require_log_concave, require_power_concave

pi_p = C.pi_p
d_p = C.d_p

SHOOT_RTOL = 1e-12
SHOOT_ATOL = 1e-14
ENDPOINT_FLOOR = 1e-8
SUP_SAMPLES = 10_000


@dataclass
class Eig1DResult:
    mu: float
    z: float
    grid: np.ndarray
    profile: np.ndarray
    residual: float
    boundary_defect: float
    orthogonality: float
    tol: float
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"mu": self.mu, "z": self.z, "residual": self.residual,
                "boundary_defect": self.boundary_defect, "orthogonality": self.orthogonality,
                "tol": self.tol, "flags": list(self.flags),
                "grid": self.grid.tolist(), "profile": self.profile.tolist()}


@dataclass
class RefinedBound:
    base: float
    excess: LogValue
    total: LogValue
    k1: LogValue
    k3: float
    min_log_derivative_sq: float
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"base": self.base, "excess": self.excess.to_json(), "total": self.total.to_json(),
                "k1": self.k1.to_json(), "k3": self.k3,
                "min_log_derivative_sq": self.min_log_derivative_sq, "flags": list(self.flags)}


def sup_norm(f, d: float) -> float:
    """Grid sup of a 1D callable over [0, d]."""
    return float(np.max(f(np.linspace(0.0, d, SUP_SAMPLES))))


class _Profile:
    """The weight on [0, d], normalised to unit sup and oriented so any zero sits at x = 0."""

    def __init__(self, w: Weight, d: float):
        self.d = d
        self.flags = []
        xs = np.linspace(0.0, d, SUP_SAMPLES)
        vals = w.on_line(xs)
        if not np.all(np.isfinite(vals)) or np.any(vals[1:-1] <= 0):
            raise NonIntegrable(f"{w.describe()} is not positive inside (0, {d:g})")
        self.scale = float(vals.max())
        tiny = 1e-12
        left_zero = vals[0] <= tiny * self.scale
        right_zero = vals[-1] <= tiny * self.scale
        self.reflected = bool(right_zero and not left_zero)
        if self.reflected:
            self.flags.append("reflected")
        self.w = w
        self.floor = 0.0
        if left_zero and right_zero:
            self.floor = ENDPOINT_FLOOR
            self.flags.append("floored_endpoint")
        self.vanishes_at_0 = bool(left_zero or right_zero)
        fn = w.scalar_1d()
        sc, fl, dd = self.scale, self.floor, d
        if self.reflected:
            self.scalar = lambda x: max(fn(dd - x) / sc, fl)
        else:
            self.scalar = lambda x: max(fn(x) / sc, fl)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xx = self.d - x if self.reflected else x
        val = self.w.on_line(xx) / self.scale
        if self.floor:
            val = np.maximum(val, self.floor)
        return val


def _start(prof: _Profile, mu: float, d: float):
    if prof.vanishes_at_0:
        # start just off the degenerate endpoint with the integrated flux
        x0 = 1e-9 * d
        gx, gw = np.polynomial.legendre.leggauss(20)
        xs = 0.5 * x0 * (gx + 1)
        return x0, -mu * 0.5 * x0 * float(np.dot(gw, prof(xs)))
    return 0.0, 0.0


def _rhs_factory(prof: _Profile, p: float, mu: float):
    q = 1.0 / (p - 1)
    pm1 = p - 1
    fn = prof.scalar
    copysign = math.copysign

    def rhs(x, y):
        u, w = y
        fx = fn(x)
        if fx < 1e-300:
            fx = 1e-300
        return [copysign(abs(w / fx) ** q, w), -mu * fx * copysign(abs(u) ** pm1, u)]

    return rhs


def _shoot(prof: _Profile, p: float, mu: float, d: float):
    """Integrate to x = d; return (number of sign changes of u, u(d), w(d))."""
    x0, w0 = _start(prof, mu, d)
    changes = [0]
    last = [1.0]

    def solout(x, y):
        if y[0] * last[0] < 0:
            changes[0] += 1
        if y[0] != 0:
            last[0] = y[0]
        return 0

    r = ode(_rhs_factory(prof, p, mu)).set_integrator("dop853", rtol=SHOOT_RTOL, atol=SHOOT_ATOL,
                                                      nsteps=10**6)
    r.set_solout(solout)
    r.set_initial_value([1.0, w0], x0)
    y = r.integrate(d)
    if not r.successful():
        raise NonIntegrable(f"integration failed at mu={mu:g}")
    return changes[0], float(y[0]), float(y[1])


def _shoot_dense(prof: _Profile, p: float, mu: float, d: float):
    x0, w0 = _start(prof, mu, d)
    sol = solve_ivp(_rhs_factory(prof, p, mu), (x0, d), [1.0, w0], method="DOP853",
                    rtol=SHOOT_RTOL, atol=SHOOT_ATOL, events=lambda x, y: y[0], dense_output=True)
    if sol.status < 0:
        raise NonIntegrable(sol.message)
    return sol.t_events[0], float(sol.y[1, -1]), sol


def _below_first(n_zeros, u_d, w_d) -> bool:
    return n_zeros == 0 or (n_zeros == 1 and w_d * u_d > 0)


def mu_p_1d_shoot(p: float, d: float, f: Weight, max_expand: int = 60) -> Eig1DResult:
    """First nontrivial eigenvalue by shooting on the flux variable w = f |u'|^(p-2) u'."""
    if not p > 1:
        raise C.InvalidExponent(f"p must exceed 1, got {p}")
    require_log_concave(f)
    prof = _Profile(f, d)
    floor_pw = C.pi_p_pow(p) / d**p
    m_f = f.concavity.m if f.concavity.is_power_concave() else 1.0
    lo = floor_pw / 4
    hi = C.kroger(p, 1 + max(1, int(math.ceil(m_f)))) / d**p
    st_lo = _shoot(prof, p, lo, d)
    if not _below_first(*st_lo[:3]):
        raise BracketFailure("lower bracket end is already above the first eigenvalue")
    st_hi = _shoot(prof, p, hi, d)
    k = 0
    while _below_first(*st_hi[:3]):
        lo, st_lo = hi, st_hi
        hi *= 2
        st_hi = _shoot(prof, p, hi, d)
        k += 1
        if k > max_expand:
            raise BracketFailure("could not bracket the first eigenvalue from above")
    # bisection until both ends carry exactly one sign change of u
    for _ in range(200):
        if st_lo[0] == 1 and st_hi[0] == 1:
            break
        mid = 0.5 * (lo + hi)
        st_mid = _shoot(prof, p, mid, d)
        if _below_first(*st_mid[:3]):
            lo, st_lo = mid, st_mid
        else:
            hi, st_hi = mid, st_mid
    else:
        raise BracketFailure("bisection did not isolate a single-zero bracket")
    if not (st_lo[2] < 0 < st_hi[2]):
        raise BracketFailure("no sign change of w(d) in the bracket")
    mu = brentq(lambda s: _shoot(prof, p, s, d)[2], lo, hi, xtol=1e-14 * hi, rtol=1e-13,
                maxiter=200)
    zeros, w_d, sol = _shoot_dense(prof, p, mu, d)
    return _diagnose(prof, p, d, mu, zeros, w_d, sol)


def _diagnose(prof, p, d, mu, zeros, w_d, sol) -> Eig1DResult:
    x_start = sol.t[0]
    grid = np.linspace(x_start, d, 4001)
    u, w = sol.sol(grid)
    fx = prof(grid)
    integrand = fx * phi_p(u, p)
    integral = cumulative_simpson(integrand, x=grid, initial=0.0)
    w_start = sol.y[1, 0]
    defect = np.abs(w - (w_start - mu * integral))
    wscale = max(np.abs(w).max(), 1e-300)
    residual = float(defect.max() / wscale)
    fd = max(prof.scalar(d), 1e-300)
    boundary_defect = float(abs(w_d / fd) ** (1 / (p - 1)))
    l1 = float(np.trapezoid(fx * np.abs(u) ** (p - 1), grid))
    orthogonality = float(abs(-w_d / mu) / l1)
    uniform = np.linspace(0.0, d, 201)
    prof_vals = sol.sol(np.clip(uniform, x_start, d))[0]
    z = float(zeros[0]) if len(zeros) else float("nan")
    if prof.reflected:
        prof_vals = prof_vals[::-1]
        z = d - z
    prof_vals = prof_vals / np.abs(prof_vals).max()
    return Eig1DResult(mu=float(mu), z=z, grid=uniform, profile=prof_vals, residual=residual,
                       boundary_defect=boundary_defect, orthogonality=orthogonality,
                       tol=SHOOT_RTOL, flags=list(prof.flags))


def mu_p_1d_rayleigh(p: float, d: float, f: Weight, n: int = 4096, tol: float = 1e-10,
                     max_iter: int = 400) -> float:
    """Minimum of the P1 Rayleigh quotient on ``n`` uniform nodes (independent oracle)."""
    return mu_p_1d_rayleigh_full(p, d, f, n, tol, max_iter).mu


def mu_p_1d_rayleigh_full(p, d, f: Weight, n=4096, tol=1e-10, max_iter=400):
    if n < 16:
        raise ValueError("n must be at least 16")
    if not p > 1:
        raise C.InvalidExponent(f"p must exceed 1, got {p}")
    scale = sup_norm(f.on_line, d)
    x, R = interval_operators(d, n, lambda t: f.on_line(t) / scale)
    res = R.minimise(np.cos(np.pi * x / d), p, tol=tol, max_iter=max_iter)
    if not res.converged:
        raise DescentStalled(f"Rayleigh descent stalled at mu={res.mu:.10g} after {res.iterations} steps")
    return res


def refined_lower_bound(p: float, m: int, d: float, h: Weight, phi: Weight,
                        n_grid: int = SUP_SAMPLES) -> RefinedBound:
    """Lower bound (pi_p/d)^p + (2/3) K1 min (h'/h)^2 for f = h phi."""
    require_power_concave(h, 1.0)
    require_power_concave(phi, float(m))
    if d > 1 + 1e-15:
        raise ValueError(f"interval length must lie in [d_p, 1], got {d}")
    dp = C.d_p(p)
    if d < dp:
        raise IntervalTooShort(f"d = {d:g} below d_p = {dp:.6g}")
    # the sup normalisation of h*phi is a constant factor and leaves h'/h unchanged
    base = C.pi_p_pow(p) / d**p
    k1v = C.k1(p, m)
    k3v = C.k3(p, m)
    flags = []
    if d < 2 * k3v:
        flags.append("interval_too_short")
        return RefinedBound(base, LogValue.zero(), LogValue.from_value(base), k1v, k3v, 0.0, flags)
    xs = np.linspace(k3v, d - k3v, n_grid)
    hv = h.on_line(xs)
    if np.any(hv <= 0):
        raise WrongConcavityClass("h must be positive on [K3, d - K3]")
    q = float(np.min((h.derivative_1d(xs) / hv) ** 2))
    excess = LogValue.zero() if q == 0 else k1v * (2.0 / 3.0) * q
    total = LogValue.from_value(base) + excess
    return RefinedBound(base, excess, total, k1v, k3v, q, flags)


def bessel_radial_neumann(order: int = 1, R: float = 1.0) -> float:
    """First eigenvalue of -(r u')'/r + k^2 u/r^2 = mu u on (0, R) with u'(R) = 0, by shooting."""
    k = order

    def shoot(mu):
        r0 = 1e-6 * R
        # regular solution ~ r^k (1 - mu r^2 / (4(k+1)))
        u0 = r0**k * (1 - mu * r0**2 / (4 * (k + 1)))
        du0 = k * r0 ** (k - 1) - mu * (k + 2) * r0 ** (k + 1) / (4 * (k + 1)) if k > 0 else -mu * r0 / 2

        def rhs(r, y):
            u, v = y  # v = r u'
            return [v / r, (k * k / r - mu * r) * u]

        sol = solve_ivp(rhs, (r0, R), [u0, r0 * du0], method="DOP853", rtol=1e-12, atol=1e-16)
        return sol.y[1, -1]

    # scan upward for the first sign change of u'(R)
    grid = np.linspace(0.05, 40.0, 400) / R**2
    vals = [shoot(s) for s in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return float(brentq(shoot, a, b, xtol=1e-14, rtol=1e-14))
    raise BracketFailure("no radial Neumann eigenvalue found below 40/R^2")


def spectrum_1d_p2(d: float, f: Weight, k: int = 3, n: int = 4096) -> np.ndarray:
    """First ``k`` nonzero Neumann eigenvalues of -(f u')' = mu f u on (0, d) (P1, n nodes)."""
    _, R = interval_operators(d, n, f.on_line)
    K = (R.GT @ sp.diags(R.stiff) @ R.G).tocsc()
    M = (R.QT @ sp.diags(R.wq) @ R.Q).tocsc()
    # shift below zero so the constant mode is the first computed eigenvalue
    vals = spla.eigsh(K, k=k + 1, M=M, sigma=-1.0 / d**2, which="LM",
                      v0=np.cos(np.linspace(0.0, 1.0, n)), return_eigenvectors=False)
    return np.sort(vals)[1:]
