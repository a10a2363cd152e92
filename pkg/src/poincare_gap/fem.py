"""Piecewise-linear finite elements for the weighted Neumann p-Laplacian on polygons."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constants as C
from .errors import LinearSolveFailure, NotConverged, WrongConcavityClass
from .geometry import ConvexPolygon2D, depth, diameter, john_ellipse, width
from .mesh import Mesh, refine_uniform, triangulate
from .rayleigh import DiscreteRayleigh
from .weights import Weight, require_power_concave

# barycentric coordinates and weights of the triangle quadrature rules
_QUAD_RULES = {
    "mid": (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1.0 / 3.0)),
}


def _dunavant5():
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    w0, w1, w2 = 0.225, 0.132394152788506, 0.125939180544827
    pts = [[1 / 3, 1 / 3, 1 / 3],
           [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
           [a2, b2, b2], [b2, a2, b2], [b2, b2, a2]]
    return np.array(pts), np.array([w0, w1, w1, w1, w2, w2, w2])


_QUAD_RULES["7pt"] = _dunavant5()


@dataclass
class Eig2DResult:
    mu: float
    u: np.ndarray
    shift_c: float
    residual: float
    iterations: int
    mesh_h: float
    p: float
    converged: bool = True
    n_nodes: int = 0
    restart_mus: list = field(default_factory=list)
    spread: float = 0.0
    next_mu: Optional[float] = None
    constraint_residual: float = 0.0
    flags: list = field(default_factory=list)
    mesh: Optional[Mesh] = field(default=None, repr=False, compare=False)

    def to_json(self, with_field: bool = False) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("u", "mesh")}
        if with_field:
            d["u"] = self.u.tolist()
        return d


@dataclass
class FEMProblem:
    mesh: Mesh
    weight: Weight
    rayleigh: DiscreteRayleigh
    quad_points: np.ndarray


def assemble(mesh: Mesh, w: Weight, quad: str = "mid") -> FEMProblem:
    bary, qw = _QUAD_RULES[quad]
    v = mesh.nodes
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    area = mesh.areas()
    # gradients of the barycentric functions: rows of inv([b-a, c-a])^T
    e1, e2 = b - a, c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    g0 = -g1 - g2
    grads = np.stack([g0, g1, g2], axis=1)  # (ne, 3 nodes, 2 dims)
    ne = len(t)
    rows = (np.arange(ne)[:, None, None] * 2 + np.arange(2)[None, None, :]) * np.ones((1, 3, 1), dtype=int)
    cols = t[:, :, None] * np.ones((1, 1, 2), dtype=int)
    G = sp.csr_matrix((grads.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * ne, mesh.n_nodes))
    nq = len(qw)
    xq = np.einsum("qk,ekd->eqd", bary, np.stack([a, b, c], axis=1))  # (ne, nq, 2)
    phi = w(xq)
    wq = (area[:, None] * qw[None, :] * phi).ravel()
    stiff = area * (qw[None, :] * phi).sum(axis=1)
    qrows = np.repeat(np.arange(ne * nq), 3)
    qcols = np.repeat(t, nq, axis=0).ravel()
    qvals = np.tile(bary, (ne, 1)).ravel()
    Q = sp.csr_matrix((qvals, (qrows, qcols)), shape=(ne * nq, mesh.n_nodes))
    return FEMProblem(mesh, w, DiscreteRayleigh(G, 2, stiff, Q, wq), xq.reshape(-1, 2))


def stiffness_mass(prob: FEMProblem):
    R = prob.rayleigh
    K = (R.GT @ sp.diags(np.repeat(R.stiff, 2)) @ R.G).tocsc()
    M = (R.QT @ sp.diags(R.wq) @ R.Q).tocsc()
    return K, M


def weighted_mean_shift(u, w: Weight, p: float, mesh: Mesh, prob: Optional[FEMProblem] = None) -> float:
    """The constant c with  integral phi |u - c|^(p-2) (u - c) = 0  (quadrature)."""
    prob = prob or assemble(mesh, w)
    return prob.rayleigh.weighted_mean_shift(np.asarray(u, dtype=float), p)


def _p2_eigs(prob: FEMProblem, k: int = 2, sigma: Optional[float] = None):
    K, M = stiffness_mass(prob)
    n = K.shape[0]
    D = float(np.ptp(prob.mesh.nodes, axis=0).max())
    if sigma is None:
        sigma = -1.0 / D**2
    try:
        lu = spla.splu((K - sigma * M).tocsc())
    except RuntimeError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    ones = np.ones(n)
    m1 = M @ ones
    tot = float(ones @ m1)

    def project(x):
        # M-orthogonal projection of a vector off the constants
        return x - ones * (m1 @ x) / tot

    def opinv(z):
        # ARPACK passes z = M x; the matching projection of a covector is the transpose
        return project(lu.solve(z - m1 * (ones @ z) / tot))

    op = spla.LinearOperator((n, n), matvec=opinv, dtype=float)
    xy = prob.mesh.nodes
    v0 = project(xy[:, 0] + 0.618 * xy[:, 1] + 0.1 * np.cos(7.0 * xy[:, 0]))
    try:
        vals, vecs = spla.eigsh(K, k=k, M=M, sigma=sigma, OPinv=op, which="LM", v0=v0, tol=1e-12,
                                maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise NotConverged(str(exc)) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order], K, M


def mu_2_fem(poly: ConvexPolygon2D, w: Weight, mesh: Mesh, prob: Optional[FEMProblem] = None,
             k: int = 2) -> Eig2DResult:
    """Smallest nonzero eigenvalue of the weighted P1 stiffness/mass pair."""
    prob = prob or assemble(mesh, w)
    vals, vecs, K, M = _p2_eigs(prob, k=k)
    mu = float(vals[0])
    u = vecs[:, 0]
    R = prob.rayleigh
    c = R.weighted_mean_shift(u, 2.0)
    u = u - c
    u = u / math.sqrt(R.mass(u, 2.0))
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    res = float(np.linalg.norm(K @ u - mu * (M @ u)) / np.linalg.norm(mu * (M @ u)))
    return Eig2DResult(mu=mu, u=u, shift_c=c, residual=res, iterations=1, mesh_h=mesh.h_max, p=2.0,
                       n_nodes=mesh.n_nodes, restart_mus=[mu],
                       next_mu=float(vals[1]) if len(vals) > 1 else None,
                       constraint_residual=abs(R.constraint(u, 2.0)), mesh=mesh)


def p2_spectrum(poly: ConvexPolygon2D, w: Weight, mesh: Mesh, k: int = 3) -> np.ndarray:
    """First ``k`` nonzero Neumann eigenvalues at p = 2."""
    return _p2_eigs(assemble(mesh, w), k=k)[0]


def mu_p_fem(p: float, poly: ConvexPolygon2D, w: Weight, mesh: Mesh, restarts: int = 3, seed: int = 0,
             tol: float = 1e-9, max_iter: int = 300, prob: Optional[FEMProblem] = None,
             strict: bool = False) -> Eig2DResult:
    """Local minimum of the P1 p-Rayleigh quotient from the p = 2 eigenvector, plus random restarts."""
    if not p > 1:
        raise C.InvalidExponent(f"p must exceed 1, got {p}")
    prob = prob or assemble(mesh, w)
    start = mu_2_fem(poly, w, mesh, prob=prob)
    R = prob.rayleigh
    runs = [R.minimise(start.u, p, tol=tol, max_iter=max_iter)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        runs.append(R.minimise(rng.standard_normal(mesh.n_nodes), p, tol=tol, max_iter=max_iter))
    mus = [r.mu for r in runs]
    best = runs[int(np.argmin(mus))]
    flags = [] if best.converged else ["not_converged"]
    if strict and not best.converged:
        raise NotConverged(f"p-Rayleigh iteration did not settle (mu={best.mu:.10g})")
    u = best.u
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    return Eig2DResult(mu=best.mu, u=u, shift_c=best.shift_c, residual=best.residual,
                       iterations=sum(r.iterations for r in runs), mesh_h=mesh.h_max, p=float(p),
                       converged=best.converged, n_nodes=mesh.n_nodes, restart_mus=mus,
                       spread=float((max(mus) - min(mus)) / min(mus)),
                       constraint_residual=best.constraint_residual, flags=flags, mesh=mesh)


def solve_eigen(p: float, poly: ConvexPolygon2D, w: Weight, mesh: Mesh, **kw) -> Eig2DResult:
    if p == 2:
        return mu_2_fem(poly, w, mesh)
    return mu_p_fem(p, poly, w, mesh, **kw)


def richardson(mu_h: float, mu_h2: float, order: int = 2) -> float:
    """Extrapolated limit from nested meshes of size h and h/2."""
    f = 2.0**order
    return (f * mu_h2 - mu_h) / (f - 1)


def solve_richardson(p: float, poly: ConvexPolygon2D, w: Weight, h: float, mesh: Optional[Mesh] = None,
                     **kw):
    """Solve on a mesh and its uniform refinement; return (extrapolated mu, coarse, fine)."""
    mesh = mesh or triangulate(poly, h)
    fine_mesh = refine_uniform(mesh)
    coarse = solve_eigen(p, poly, w, mesh, **kw)
    fine = solve_eigen(p, poly, w, fine_mesh, **kw)
    return richardson(coarse.mu, fine.mu), coarse, fine


def _n_eff(w: Weight, m: Optional[int], N: int = 2) -> int:
    if w.is_constant():
        return N
    if m is None:
        c = w.concavity
        m = int(math.ceil(c.m)) if c.is_power_concave() else 1
    return N + max(1, int(m))


def linf_bound_check(res: Eig2DResult, poly: ConvexPolygon2D, w: Weight, p: float,
                     m: Optional[int] = None, mesh: Optional[Mesh] = None) -> dict:
    """Compare |u|_inf with K_inf mu^(n/p) D^n (int phi)^(-1/p) |u|_{L^p(phi)}, n = 2 + m.

    For a constant weight n = 2 (the unweighted estimate).
    """
    mesh = mesh if mesh is not None else res.mesh
    if mesh is None:
        raise ValueError("linf_bound_check needs the mesh the eigenfunction lives on")
    R = assemble(mesh, w).rayleigh
    n_eff = _n_eff(w, m)
    D = diameter(poly)
    phi_mass = float(R.wq.sum())
    lp = R.mass(res.u, p) ** (1 / p)
    lhs = float(np.abs(res.u).max())
    common = res.mu ** (n_eff / p) * D**n_eff * phi_mass ** (-1 / p) * lp
    k_inf = C.k_infinity(n_eff)
    k_tilde = C.k_infinity_tilde(n_eff, p)
    rhs = k_inf * common
    return {"lhs": lhs, "rhs": rhs, "margin": rhs / lhs, "n_eff": n_eff, "k_inf": k_inf,
            "k_inf_tilde": k_tilde, "rhs_tilde": k_tilde * common, "margin_tilde": k_tilde * common / lhs,
            "lp_norm": lp, "phi_mass": phi_mass, "holds": bool(rhs >= lhs)}


@dataclass
class DeficitSample:
    seed: object
    p: float
    D: float
    a1: float
    a2: float
    width: float
    mu: float
    deficit: float
    ratio: float
    residual: float
    status: str
    depth: float = 0.0
    ln_ratio: float = 0.0
    ln_k0: float = 0.0
    floor_holds: bool = True
    kroger_holds: bool = True
    rigidity_holds: bool = True
    n_nodes: int = 0
    mesh_h: float = 0.0
    mu_coarse: Optional[float] = None
    mu_fine: Optional[float] = None
    linf_margin: Optional[float] = None
    spread: float = 0.0

    CSV_FIELDS = ("seed", "p", "D", "a1", "a2", "width", "mu", "deficit", "ratio", "residual", "status")

    def csv_row(self) -> list:
        out = []
        for k in self.CSV_FIELDS:
            v = getattr(self, k)
            out.append(f"{v:.12g}" if isinstance(v, float) else str(v))
        return out

    def to_json(self) -> dict:
        return asdict(self)


def verify_quantitative(p: float, poly: ConvexPolygon2D, w: Weight, m: Optional[int] = None,
                        h: float = 0.05, refine: bool = False, seed=None, mesh: Optional[Mesh] = None,
                        restarts: int = 3) -> DeficitSample:
    """Deficit over the Payne-Weinberger floor and its normalised ratio against ln K0."""
    try:
        require_power_concave(w)
    except WrongConcavityClass:
        raise WrongConcavityClass(f"{w.describe()} is not power-concave; the quantitative bound does not apply")
    if m is None:
        c = w.concavity
        m = max(1, int(math.ceil(c.m)))
    elif not w.is_constant():
        require_power_concave(w, float(m))
    D = diameter(poly)
    ell = john_ellipse(poly)
    mesh = mesh or triangulate(poly, h)
    kw = {} if p == 2 else {"restarts": restarts}
    res = solve_eigen(p, poly, w, mesh, **kw)
    mu = res.mu
    mu_coarse = mu_fine = None
    if refine:
        fine = solve_eigen(p, poly, w, refine_uniform(mesh), **kw)
        mu_coarse, mu_fine = mu, fine.mu
        mu = richardson(mu_coarse, mu_fine)
    floor = C.pi_p_pow(p) / D**p
    deficit = mu - floor
    ratio = deficit * D ** (p + 2) / ell.a2**2
    rep = C.constants_report(p, m)
    ln_k0 = rep.k0.ln_float
    ln_ratio = math.log(ratio) if ratio > 0 else -math.inf
    n_tot = 2 + m
    linf = linf_bound_check(res, poly, w, p, None if w.is_constant() else m)["margin"]
    status = "ok" if res.converged else "not_converged"
    return DeficitSample(
        seed=seed if seed is not None else "", p=float(p), D=D, a1=ell.a1, a2=ell.a2, width=width(poly),
        mu=mu, deficit=deficit, ratio=ratio, residual=res.residual, status=status, depth=depth(poly),
        ln_ratio=ln_ratio, ln_k0=ln_k0, floor_holds=bool(ln_ratio > ln_k0),
        kroger_holds=bool(mu * D**p <= C.kroger(p, n_tot)), rigidity_holds=bool(deficit > 0),
        n_nodes=mesh.n_nodes, mesh_h=mesh.h_max, mu_coarse=mu_coarse, mu_fine=mu_fine,
        linf_margin=linf, spread=res.spread,
    )
