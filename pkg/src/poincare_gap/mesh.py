"""Quality triangulations of convex polygons (Shewchuk's Triangle via ``triangle``)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import triangle as tr

from .errors import MeshBudgetExceeded
from .geometry import ConvexPolygon2D, diameter, width

DEFAULT_NODE_CAP = 500_000
MIN_ANGLE = 20.0


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    target_h: float

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        a, b, c = (self.nodes[self.triangles[:, i]] for i in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))

    def edge_lengths(self) -> np.ndarray:
        t = self.triangles
        v = self.nodes
        return np.stack([np.linalg.norm(v[t[:, (i + 1) % 3]] - v[t[:, i]], axis=1) for i in range(3)], axis=1)

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, shape (n_triangles, 3)."""
        v = self.nodes
        t = self.triangles
        out = []
        for i in range(3):
            p, q, r = v[t[:, i]], v[t[:, (i + 1) % 3]], v[t[:, (i + 2) % 3]]
            e1, e2 = q - p, r - p
            cosang = (e1 * e2).sum(1) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
            out.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
        return np.stack(out, axis=1)

    def stats(self) -> dict:
        return {"n_nodes": self.n_nodes, "n_triangles": self.n_triangles, "target_h": self.target_h,
                "h_max": self.h_max, "min_angle_deg": float(self.angles().min())}


def effective_h(poly: ConvexPolygon2D, h: float) -> float:
    """Requested size capped so that at least four layers span the minimal width."""
    return min(h, width(poly) / 4)


def _subdivided_boundary(poly: ConvexPolygon2D, h: float):
    pts = []
    v = poly.vertices
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / h - 1e-9)))
        t = np.arange(k)[:, None] / k
        pts.append(a + t * (b - a))
    pts = np.vstack(pts)
    n = len(pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return pts, segs


def _estimate_nodes(area: float, h: float) -> float:
    return area / (math.sqrt(3) / 4 * h * h) / 2


def _to_mesh(out: dict, h: float) -> Mesh:
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    marks = np.asarray(out.get("vertex_markers", np.zeros((len(nodes), 1)))).ravel() != 0
    mesh = Mesh(nodes, tris, marks, h)
    areas = mesh.areas()
    if np.any(areas <= 0):
        # Triangle returns CCW elements; flip any that come back reversed
        bad = areas < 0
        tris = tris.copy()
        tris[bad] = tris[bad][:, [0, 2, 1]]
        mesh = Mesh(nodes, tris, marks, h)
    return mesh


def triangulate(poly: ConvexPolygon2D, h: float, max_nodes: int = DEFAULT_NODE_CAP,
                size_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Mesh:
    """Conforming Delaunay mesh with minimum angle 20 degrees (up to sharper polygon corners).

    ``size_fn`` optionally maps points (n, 2) to a local target size; the mesh is then graded by
    repeated area-constrained refinement, never coarser than ``h``.
    """
    D = diameter(poly)
    if not h > 0:
        raise ValueError("h must be positive")
    if h > D / 2:
        raise ValueError(f"h = {h:g} exceeds half the diameter {D / 2:g}")
    h_eff = effective_h(poly, h)
    if _estimate_nodes(poly.area, h_eff) > max_nodes:
        raise MeshBudgetExceeded(f"about {_estimate_nodes(poly.area, h_eff):.3g} nodes requested, cap {max_nodes}")
    pts, segs = _subdivided_boundary(poly, h_eff)
    max_area = math.sqrt(3) / 4 * h_eff**2
    # Triangle does not parse exponent notation in its switches
    area_sw = np.format_float_positional(max_area, precision=17, unique=False, trim="-")
    out = tr.triangulate({"vertices": pts, "segments": segs}, f"pq{MIN_ANGLE:g}a{area_sw}Q")
    if size_fn is not None:
        for _ in range(30):
            v = out["vertices"]
            t = out["triangles"]
            cent = v[t].mean(axis=1)
            target = np.minimum(np.asarray(size_fn(cent), dtype=float), h_eff)
            tgt_area = math.sqrt(3) / 4 * target**2
            a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
            area = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))
            if np.all(area <= tgt_area * 1.0001):
                break
            if len(v) > max_nodes:
                raise MeshBudgetExceeded(f"graded mesh exceeded {max_nodes} nodes")
            out["triangle_max_area"] = np.minimum(tgt_area, area).reshape(-1, 1)
            out = tr.triangulate(out, f"rpq{MIN_ANGLE:g}aQ")
    mesh = _to_mesh(out, h_eff)
    if mesh.n_nodes > max_nodes:
        raise MeshBudgetExceeded(f"mesh has {mesh.n_nodes} nodes, cap {max_nodes}")
    return mesh


def refine_uniform(mesh: Mesh, max_nodes: int = DEFAULT_NODE_CAP) -> Mesh:
    """Red refinement: split every triangle into four similar ones (nested meshes)."""
    t = mesh.triangles
    edges = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges_sorted = np.sort(edges, axis=1)
    uniq, inv = np.unique(edges_sorted, axis=0, return_inverse=True)
    inv = inv.ravel()
    n0 = mesh.n_nodes
    if n0 + len(uniq) > max_nodes:
        raise MeshBudgetExceeded(f"refined mesh would have {n0 + len(uniq)} nodes, cap {max_nodes}")
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    # an edge is on the boundary iff it belongs to exactly one triangle
    counts = np.bincount(inv, minlength=len(uniq))
    mid_boundary = counts == 1
    nodes = np.vstack([mesh.nodes, mids])
    boundary = np.concatenate([mesh.boundary, mid_boundary])
    nt = len(t)
    m01 = n0 + inv[:nt]
    m12 = n0 + inv[nt:2 * nt]
    m20 = n0 + inv[2 * nt:]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    new = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    return Mesh(nodes, new, boundary, mesh.target_h / 2)
