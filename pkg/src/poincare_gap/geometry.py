"""Convex planar polygons: validation, diameter, width, depth and John ellipse.

Polygon files are JSON objects ``{"vertices": [[x, y], ...]}`` listing the
vertices counterclockwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .errors import Degenerate, NonConvex, SolverDidNotConverge, TooFewVertices

CONVEXITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConvexPolygon2D:
    """Validated strictly convex polygon with counterclockwise vertices.

    Build instances through :func:`polygon_validate`; the constructor does
    not check anything.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a6 = 3.0 * cross.sum()
        return np.array([((v[:, 0] + w[:, 0]) * cross).sum() / a6,
                         ((v[:, 1] + w[:, 1]) * cross).sum() / a6])

    def edges(self):
        """Unit outward normals ``n`` and offsets ``b`` with ``n . x <= b`` inside."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        length = np.hypot(e[:, 0], e[:, 1])
        normals = np.column_stack([e[:, 1], -e[:, 0]]) / length[:, None]
        offsets = np.einsum("ij,ij->i", normals, v)
        return normals, offsets

    def support(self, directions: np.ndarray) -> np.ndarray:
        return (directions @ self.vertices.T).max(axis=1)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        normals, offsets = self.edges()
        pts = np.atleast_2d(points)
        return np.all(pts @ normals.T <= offsets + tol, axis=1)

    def transformed(self, matrix=None, shift=(0.0, 0.0)) -> "ConvexPolygon2D":
        """Image under ``x -> matrix @ x + shift`` (re-validated)."""
        m = np.eye(2) if matrix is None else np.asarray(matrix, dtype=float)
        return polygon_validate(self.vertices @ m.T + np.asarray(shift, dtype=float))

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"ConvexPolygon2D(n={self.n}, area={self.area:.6g})"


def _signed_area2(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum())


def polygon_validate(points) -> ConvexPolygon2D:
    """Check strict convexity and return the polygon with CCW orientation.

    Raises TooFewVertices, Degenerate (zero area or repeated vertices) or
    NonConvex.  The convexity tolerance scales with the square of the
    bounding-box size so that very thin rectangles still validate.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise TooFewVertices("empty vertex list")
    pts = pts.reshape(-1, 2)
    if len(pts) < 3:
        raise TooFewVertices(f"need at least 3 vertices, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise Degenerate("non-finite coordinates")
    scale = float(np.ptp(pts, axis=0).max())
    if scale == 0.0:
        raise Degenerate("all vertices coincide")
    tol = CONVEXITY_TOL * scale**2
    if np.any(pdist(pts) <= 1e-14 * scale):
        raise Degenerate("repeated vertices")
    a2 = _signed_area2(pts)
    if abs(a2) <= tol:
        raise Degenerate(f"area {0.5 * a2:.3e} below tolerance")
    if a2 < 0:
        pts = pts[::-1].copy()
    prev = np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0)
    e1 = pts - prev
    e2 = nxt - pts
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(cross < tol):
        bad = int(np.argmin(cross))
        raise NonConvex(f"turn at vertex {bad} is not strictly convex (cross={cross[bad]:.3e})")
    turning = np.arctan2(cross, np.einsum("ij,ij->i", e1, e2)).sum()
    if abs(turning - 2 * math.pi) > 1e-6:
        raise NonConvex("vertices wind more than once")
    return ConvexPolygon2D(pts)


def diameter(poly: ConvexPolygon2D) -> float:
    return float(pdist(poly.vertices).max())


def diameter_endpoints(poly: ConvexPolygon2D):
    v = poly.vertices
    d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    return v[i].copy(), v[j].copy()


def width(poly: ConvexPolygon2D) -> float:
    """Minimal width; attained orthogonally to some edge for polygons."""
    normals, offsets = poly.edges()
    slab = offsets[:, None] - normals @ poly.vertices.T
    return float(slab.max(axis=1).min())


def depth(poly: ConvexPolygon2D) -> float:
    """Longest section orthogonal to a diameter of the polygon."""
    p, q = diameter_endpoints(poly)
    axis = (q - p) / np.linalg.norm(q - p)
    perp = np.array([-axis[1], axis[0]])
    local = np.column_stack([(poly.vertices - p) @ axis, (poly.vertices - p) @ perp])
    xs = local[:, 0]
    best = 0.0
    for x0 in xs:
        best = max(best, _section_length(local, x0))
    return best


def _section_length(local: np.ndarray, x0: float) -> float:
    ys = []
    w = np.roll(local, -1, axis=0)
    for a, b in zip(local, w):
        lo, hi = min(a[0], b[0]), max(a[0], b[0])
        if lo - 1e-15 <= x0 <= hi + 1e-15:
            if hi - lo < 1e-15:
                ys.extend([a[1], b[1]])
            else:
                t = (x0 - a[0]) / (b[0] - a[0])
                ys.append(a[1] + t * (b[1] - a[1]))
    return float(max(ys) - min(ys)) if ys else 0.0


@dataclass(frozen=True)
class JohnEllipse:
    center: tuple
    semi_axes: tuple
    rotation: float

    @property
    def a1(self) -> float:
        return self.semi_axes[0]

    @property
    def a2(self) -> float:
        return self.semi_axes[1]

    def shape_matrix(self) -> np.ndarray:
        """Symmetric B with ellipse = {center + B u : |u| <= 1}."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        q = np.array([[c, -s], [s, c]])
        return q @ np.diag(self.semi_axes) @ q.T

    def support(self, directions: np.ndarray) -> np.ndarray:
        b = self.shape_matrix()
        return directions @ np.asarray(self.center) + np.linalg.norm(directions @ b, axis=1)

    def containment(self, poly: ConvexPolygon2D, n_dirs: int = 360) -> tuple[float, float]:
        """Relative violations of ``E in P`` and ``P in 2E`` sampled on directions.

        Both values are <= 0 (up to rounding) when the containments hold.
        """
        th = np.linspace(0.0, 2 * math.pi, n_dirs, endpoint=False)
        u = np.column_stack([np.cos(th), np.sin(th)])
        scale = diameter(poly)
        b = self.shape_matrix()
        c = np.asarray(self.center)
        h_e = u @ c + np.linalg.norm(u @ b, axis=1)
        h_p = poly.support(u)
        h_2e = u @ c + 2.0 * np.linalg.norm(u @ b, axis=1)
        return float((h_e - h_p).max() / scale), float((h_p - h_2e).max() / scale)


def _logdet_derivs(beta):
    b11, b12, b22 = beta
    det = b11 * b22 - b12 * b12
    # B^{-1} entries; derivative basis is (E11, E12 + E21, E22)
    p, q, r = b22 / det, -b12 / det, b11 / det
    grad = np.array([p, 2.0 * q, r])
    hess = -np.array([[p * p, 2 * p * q, q * q],
                      [2 * p * q, 2 * (q * q + p * r), 2 * q * r],
                      [q * q, 2 * q * r, r * r]])
    return math.log(det), grad, hess


def _barrier(x, normals, offsets, t, value_only=False):
    beta, d = x[:3], x[3:]
    b11, b12, b22 = beta
    if b11 <= 0 or b22 <= 0 or b11 * b22 - b12 * b12 <= 0:
        return math.inf, None, None
    # B a_i for every edge normal a_i, written as J_i beta
    a1, a2 = normals[:, 0], normals[:, 1]
    v = np.column_stack([b11 * a1 + b12 * a2, b12 * a1 + b22 * a2])
    vn = np.linalg.norm(v, axis=1)
    g = offsets - normals @ d - vn
    if np.any(g <= 0):
        return math.inf, None, None
    if value_only:
        return -t * math.log(b11 * b22 - b12 * b12) - np.log(g).sum(), None, None
    ld, ld_grad, ld_hess = _logdet_derivs(beta)
    f = -t * ld - np.log(g).sum()
    vhat = v / vn[:, None]
    m = len(g)
    jac = np.zeros((m, 2, 3))
    jac[:, 0, 0] = a1
    jac[:, 0, 1] = a2
    jac[:, 1, 1] = a1
    jac[:, 1, 2] = a2
    dgb = -np.einsum("mij,mi->mj", jac, vhat)
    grad_g = np.hstack([dgb, -normals])
    proj = np.eye(2)[None] - vhat[:, :, None] * vhat[:, None, :]
    hg_b = -np.einsum("mia,mij,mjb->mab", jac, proj, jac) / vn[:, None, None]
    grad = -t * np.concatenate([ld_grad, [0.0, 0.0]]) - (grad_g / g[:, None]).sum(0)
    hess = np.zeros((5, 5))
    hess[:3, :3] -= t * ld_hess
    hess += np.einsum("ma,mb->ab", grad_g / g[:, None], grad_g / g[:, None])
    hess[:3, :3] -= (hg_b / g[:, None, None]).sum(0)
    return f, grad, hess


def _second_moments(poly: ConvexPolygon2D) -> np.ndarray:
    """Area second-moment matrix about the centroid (fan triangulation)."""
    c = poly.centroid
    v = poly.vertices - c
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    sxx = (cross * (v[:, 0] ** 2 + v[:, 0] * w[:, 0] + w[:, 0] ** 2)).sum() / 12
    syy = (cross * (v[:, 1] ** 2 + v[:, 1] * w[:, 1] + w[:, 1] ** 2)).sum() / 12
    sxy = (cross * (2 * v[:, 0] * v[:, 1] + v[:, 0] * w[:, 1] + w[:, 0] * v[:, 1]
                    + 2 * w[:, 0] * w[:, 1])).sum() / 24
    return np.array([[sxx, sxy], [sxy, syy]]) / poly.area


def _john_normalised(normals, offsets, tol, max_newton):
    """Barrier Newton for a polygon given by unit normals and offsets, roughly round about 0."""
    r0 = 0.5 * offsets.min()
    x = np.array([r0, 0.0, r0, 0.0, 0.0])
    m = len(offsets)
    t = 1.0
    newton_steps = 0
    while True:
        for _ in range(100):
            f, grad, hess = _barrier(x, normals, offsets, t)
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError as exc:
                raise SolverDidNotConverge("singular barrier Hessian") from exc
            dec2 = float(-grad @ step)
            if dec2 / 2 < 1e-11:
                break
            alpha = 1.0
            while True:
                f_new, _, _ = _barrier(x + alpha * step, normals, offsets, t, value_only=True)
                if f_new <= f - 0.25 * alpha * dec2:
                    break
                alpha *= 0.5
                if alpha < 1e-10:
                    break
            if alpha < 1e-10:
                # rounding floor reached on this barrier level
                break
            x = x + alpha * step
            newton_steps += 1
            if newton_steps > max_newton:
                raise SolverDidNotConverge(f"John ellipse: Newton budget {max_newton} exceeded")
        if m / t < tol:
            break
        t *= 20.0
    return np.array([[x[0], x[1]], [x[1], x[2]]]), x[3:]


def john_ellipse(poly: ConvexPolygon2D, tol: float = 1e-13, max_newton: int = 2000) -> JohnEllipse:
    """Maximal-area inscribed ellipse.

    Maximises log det B over ellipses {d + B u : |u| <= 1} subject to
    |B a_i| + a_i . d <= b_i for every edge, with a log-barrier
    path-following Newton method.  The problem is affine-equivariant, so the
    polygon is first mapped to isotropic position (identity second moments
    about its centroid) to keep thin polygons well conditioned.
    """
    c0 = poly.centroid
    evals, evecs = np.linalg.eigh(_second_moments(poly))
    # A maps the polygon to isotropic position, A_inv maps back
    A = evecs @ np.diag(evals ** -0.5) @ evecs.T
    A_inv = evecs @ np.diag(evals ** 0.5) @ evecs.T
    v = (poly.vertices - c0) @ A.T
    e = np.roll(v, -1, axis=0) - v
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.einsum("ij,ij->i", normals, v)
    B_iso, d_iso = _john_normalised(normals, offsets, tol, max_newton)
    # ellipse in original coordinates: c0 + A_inv d_iso + (A_inv B_iso) u
    U, sv, _ = np.linalg.svd(A_inv @ B_iso)
    rot = math.atan2(U[1, 0], U[0, 0])
    # fold the major-axis angle into (-pi/2, pi/2]
    if rot <= -math.pi / 2:
        rot += math.pi
    elif rot > math.pi / 2:
        rot -= math.pi
    center = c0 + A_inv @ d_iso
    return JohnEllipse(center=(float(center[0]), float(center[1])),
                       semi_axes=(float(sv[0]), float(sv[1])), rotation=float(rot))


def random_convex_polygon(seed: int, n_points: int, max_tries: int = 100) -> ConvexPolygon2D:
    """Hull of ``n_points`` uniform points in the unit disk, rescaled to diameter 1.

    The hull is translated so its vertex centroid is the origin.
    Deterministic per ``(seed, n_points)``.
    """
    if n_points < 3:
        raise TooFewVertices("n_points must be >= 3")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        r = np.sqrt(rng.random(n_points))
        th = 2 * math.pi * rng.random(n_points)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        try:
            hull = ConvexHull(pts)
        except Exception:
            continue
        v = pts[hull.vertices]
        v = v - v.mean(axis=0)
        v = v / pdist(v).max()
        try:
            return polygon_validate(v)
        except (Degenerate, NonConvex):
            continue
    raise Degenerate(f"no valid hull after {max_tries} draws (seed={seed})")


def rectangle(length: float, height: float) -> ConvexPolygon2D:
    """Axis-aligned rectangle (0, length) x (0, height)."""
    return polygon_validate([[0, 0], [length, 0], [length, height], [0, height]])


def regular_polygon(n: int, radius: float = 1.0, phase: float = 0.0) -> ConvexPolygon2D:
    th = phase + 2 * math.pi * np.arange(n) / n
    return polygon_validate(np.column_stack([radius * np.cos(th), radius * np.sin(th)]))


def clip_halfplane(poly: ConvexPolygon2D, normal, offset: float) -> ConvexPolygon2D:
    """Intersection with {x : normal . x <= offset} (Sutherland-Hodgman on a convex polygon)."""
    nrm = np.asarray(normal, dtype=float)
    v = poly.vertices
    s = v @ nrm - offset
    out = []
    for i in range(len(v)):
        j = (i + 1) % len(v)
        if s[i] <= 0:
            out.append(v[i])
        if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
            t = s[i] / (s[i] - s[j])
            out.append(v[i] + t * (v[j] - v[i]))
    pts = np.array(out)
    # drop points made collinear or duplicated by the cut
    keep = np.ones(len(pts), dtype=bool)
    scale = float(np.ptp(pts, axis=0).max()) if len(pts) else 1.0
    for i in range(len(pts)):
        if np.linalg.norm(pts[i] - pts[i - 1]) <= 1e-12 * scale:
            keep[i] = False
    pts = pts[keep]
    prev, nxt = np.roll(pts, 1, axis=0), np.roll(pts, -1, axis=0)
    cross = (pts[:, 0] - prev[:, 0]) * (nxt[:, 1] - pts[:, 1]) - (pts[:, 1] - prev[:, 1]) * (nxt[:, 0] - pts[:, 0])
    pts = pts[cross > CONVEXITY_TOL * scale**2]
    return polygon_validate(pts)


def clip_band(poly: ConvexPolygon2D, half_height: float) -> ConvexPolygon2D:
    """Intersection with the horizontal band |y| <= half_height."""
    out = clip_halfplane(poly, (0.0, 1.0), half_height)
    return clip_halfplane(out, (0.0, -1.0), half_height)


def load_polygon(path) -> ConvexPolygon2D:
    data = json.loads(Path(path).read_text())
    return polygon_validate(data["vertices"])


def save_polygon(poly: ConvexPolygon2D, path) -> None:
    Path(path).write_text(json.dumps(poly.to_json()))
