"""Constrained minimisation of a discrete weighted p-Rayleigh quotient.

The discrete problem is described by

* ``G``: sparse gradient operator, ``(G @ u).reshape(n_elems, dim)`` are the
  constant element gradients of a piecewise-linear field;
* ``stiff``: per-element factor so that the energy is
  ``sum(stiff * |grad|^p)``;
* ``Q`` and ``wq``: interpolation to quadrature points and quadrature
  weights (already multiplied by the weight function), so the mass is
  ``sum(wq * |Q @ u|^p)``.

The minimiser is an inverse iteration: each step solves the regularised
p-Poisson problem ``-div(phi |grad v|^(p-2) grad v) = lam phi |u|^(p-2) u``
by damped Newton, then applies the weighted mean shift and renormalises.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import ConstraintRootFailure, LinearSolveFailure


def phi_p(x, p):
    """Signed power |x|^(p-2) x, equal to 0 at x = 0."""
    return np.sign(x) * np.abs(x) ** (p - 1)


@dataclass
class RayleighResult:
    mu: float
    u: np.ndarray
    shift_c: float
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    constraint_residual: float = 0.0


class DiscreteRayleigh:
    def __init__(self, G: sp.spmatrix, dim: int, stiff: np.ndarray, Q: sp.spmatrix, wq: np.ndarray):
        self.G = sp.csr_matrix(G)
        self.GT = self.G.T.tocsr()
        self.dim = dim
        self.stiff = np.asarray(stiff, dtype=float)
        self.Q = sp.csr_matrix(Q)
        self.QT = self.Q.T.tocsr()
        self.wq = np.asarray(wq, dtype=float)
        self.n = self.G.shape[1]
        self.n_elems = len(self.stiff)
        # block-diagonal sparsity pattern of the per-element dim x dim blocks
        e = np.arange(self.n_elems)
        rows = (e[:, None, None] * dim + np.arange(dim)[None, :, None]) * np.ones((1, 1, dim), dtype=int)
        cols = (e[:, None, None] * dim + np.arange(dim)[None, None, :]) * np.ones((1, dim, 1), dtype=int)
        self._block_rows = rows.ravel()
        self._block_cols = cols.ravel()

    # -- functionals ----------------------------------------------------
    def grads(self, u):
        return (self.G @ u).reshape(self.n_elems, self.dim)

    def energy(self, u, p, delta=0.0):
        g2 = (self.grads(u) ** 2).sum(axis=1)
        return float((self.stiff * (g2 + delta**2) ** (p / 2)).sum())

    def mass(self, u, p):
        return float((self.wq * np.abs(self.Q @ u) ** p).sum())

    def constraint(self, u, p, c=0.0):
        return float((self.wq * phi_p(self.Q @ u - c, p)).sum())

    def weighted_mean_shift(self, u, p) -> float:
        """Unique c with sum(wq * phi_p(Q u - c)) = 0 (strictly decreasing in c)."""
        vals = self.Q @ u
        if p == 2:
            return float((self.wq * vals).sum() / self.wq.sum())
        lo, hi = float(vals.min()), float(vals.max())
        if hi - lo <= 1e-300:
            raise ConstraintRootFailure("field is constant at the quadrature points")

        def F(c):
            return float((self.wq * phi_p(vals - c, p)).sum())

        try:
            return float(brentq(F, lo, hi, xtol=1e-15 * (hi - lo + abs(lo)), rtol=1e-15, maxiter=500))
        except ValueError as exc:
            raise ConstraintRootFailure(str(exc)) from exc

    def quotient(self, u, p):
        c = self.weighted_mean_shift(u, p)
        return self.energy(u, p) / self.mass(u - c, p), c

    # -- derivatives ----------------------------------------------------
    def _energy_grad_hess(self, v, p, delta):
        g = self.grads(v)
        s = (g**2).sum(axis=1) + delta**2
        a = self.stiff * s ** ((p - 2) / 2)
        grad = self.GT @ (a[:, None] * g).ravel()
        b = (p - 2) * self.stiff * s ** ((p - 4) / 2)
        blocks = a[:, None, None] * np.eye(self.dim)[None] + b[:, None, None] * g[:, :, None] * g[:, None, :]
        D = sp.csr_matrix((blocks.ravel(), (self._block_rows, self._block_cols)),
                          shape=(self.n_elems * self.dim,) * 2)
        H = (self.GT @ D @ self.G).tocsc()
        return grad, H

    def stationarity_residual(self, u, p, mu):
        g = self.grads(u)
        s = (g**2).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(s > 0, self.stiff * s ** ((p - 2) / 2), 0.0)
        e_grad = self.GT @ (a[:, None] * g).ravel()
        m_grad = self.QT @ (self.wq * phi_p(self.Q @ u, p))
        denom = np.linalg.norm(mu * m_grad)
        return float(np.linalg.norm(e_grad - mu * m_grad) / denom) if denom > 0 else float("inf")

    # -- p-Poisson step -------------------------------------------------
    def poisson_step(self, v0, rhs, p, delta, tol=1e-13, max_newton=60):
        """Minimise E_delta(v)/p - rhs . v by damped Newton with node 0 pinned."""
        v = v0.copy()

        def J(x):
            return self.energy(x, p, delta) / p - float(rhs @ x)

        jv = J(v)
        scale = max(abs(jv), 1e-300)
        free = np.arange(1, self.n)
        for _ in range(max_newton):
            grad, H = self._energy_grad_hess(v, p, delta)
            r = grad - rhs
            Hf = H[free][:, free]
            try:
                step_f = spla.spsolve(Hf, -r[free])
            except Exception as exc:  # pragma: no cover - SuperLU failure
                raise LinearSolveFailure(str(exc)) from exc
            if not np.all(np.isfinite(step_f)):
                raise LinearSolveFailure("non-finite Newton step")
            step = np.zeros_like(v)
            step[free] = step_f
            dec = float(-r[free] @ step_f)
            if dec <= tol * scale:
                break
            t = 1.0
            while True:
                jn = J(v + t * step)
                if jn <= jv - 0.25 * t * dec:
                    break
                t *= 0.5
                if t < 1e-12:
                    break
            if t < 1e-12:
                break
            v = v + t * step
            jv = jn
        return v

    # -- outer iteration ------------------------------------------------
    def normalise(self, u, p):
        c = self.weighted_mean_shift(u, p)
        u = u - c
        return u / self.mass(u, p) ** (1 / p), c

    def minimise(self, u0, p, tol=1e-9, max_iter=300, delta_floor_rel=1e-8, delta0_rel=1e-3,
                 min_iter=3) -> RayleighResult:
        u, _ = self.normalise(np.asarray(u0, dtype=float), p)
        lam = self.energy(u, p)
        best = (lam, u)
        history = [lam]
        gscale = float(np.sqrt((self.grads(u) ** 2).sum(axis=1).max()))
        delta = delta0_rel * gscale if p != 2 else 0.0
        delta_floor = delta_floor_rel * gscale
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            rhs = lam * (self.QT @ (self.wq * phi_p(self.Q @ u, p)))
            v = self.poisson_step(u, rhs, p, delta)
            u_new, _ = self.normalise(v, p)
            lam_new = self.energy(u_new, p)
            history.append(lam_new)
            change = abs(lam_new - lam) / lam
            u, lam = u_new, lam_new
            if lam < best[0]:
                best = (lam, u)
            at_floor = delta <= delta_floor * (1 + 1e-12)
            if change < tol and at_floor and it >= min_iter:
                converged = True
                break
            if p != 2:
                delta = max(delta * 0.1, delta_floor)
        lam, u = best
        c = self.weighted_mean_shift(u, p)
        u = u - c
        mass = self.mass(u, p)
        return RayleighResult(
            mu=lam, u=u, shift_c=c,
            residual=self.stationarity_residual(u, p, lam),
            iterations=it, converged=converged, history=history,
            constraint_residual=abs(self.constraint(u, p)) / mass ** ((p - 1) / p),
        )


def interval_operators(d: float, n: int, weight_on_line):
    """P1 operators on a uniform grid of ``n`` nodes over [0, d] with 3-point Gauss quadrature."""
    x = np.linspace(0.0, d, n)
    h = d / (n - 1)
    ne = n - 1
    e = np.arange(ne)
    G = sp.csr_matrix((np.concatenate([-np.ones(ne), np.ones(ne)]) / h,
                       (np.concatenate([e, e]), np.concatenate([e, e + 1]))), shape=(ne, n))
    gx, gw = np.polynomial.legendre.leggauss(3)
    t = (gx + 1) / 2
    gw = gw / 2
    xq = (x[:-1, None] + h * t[None, :]).ravel()
    fq = weight_on_line(xq)
    wq = fq * np.tile(gw, ne) * h
    rows = np.repeat(np.arange(3 * ne), 2)
    cols = np.stack([np.repeat(e, 3), np.repeat(e, 3) + 1], axis=1).ravel()
    vals = np.stack([np.tile(1 - t, ne), np.tile(t, ne)], axis=1).ravel()
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(3 * ne, n))
    stiff = (fq * np.tile(gw, ne)).reshape(ne, 3).sum(axis=1) * h
    return x, DiscreteRayleigh(G, 1, stiff, Q, wq)
