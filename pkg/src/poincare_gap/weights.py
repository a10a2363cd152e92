"""Positive weights with a declared concavity class.

A weight is evaluated on points of the plane; one-dimensional weights are
evaluated on ``(x, 0)``.  Weight files are JSON tagged unions, for example::

    {"kind": "constant", "value": 1.0}
    {"kind": "affine_power", "coeffs": [c0, cx, cy], "exponent": 1.0}
    {"kind": "gaussian_y", "n": 2.0}
    {"kind": "product", "factors": [{...}, {...}]}

``affine_power`` takes the value ``(c0 + cx*x + cy*y) ** exponent``.  An
optional ``"m"`` declares its power-concavity class (defaults to the
exponent) and an optional ``"box"`` restricts its domain.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import NonPositiveValue, OutsideDomain, WeightError, WrongConcavityClass

KINDS = ("constant", "affine_power", "gaussian_y", "product")


@dataclass(frozen=True)
class ConcavityClass:
    """``power_concave`` carries ``m`` (the weight is 1/m-concave; m = 0 means constant)."""

    kind: str
    m: Optional[float] = None

    def is_power_concave(self) -> bool:
        return self.kind == "power_concave"

    def is_log_concave(self) -> bool:
        # every power-concave weight is log-concave
        return self.kind in ("power_concave", "log_concave")

    def __str__(self):
        if self.kind == "power_concave":
            return f"power_concave(1/{self.m:g})"
        return self.kind


@dataclass(frozen=True)
class Weight:
    kind: str
    value: float = 1.0
    coeffs: tuple = (0.0, 1.0, 0.0)
    exponent: float = 1.0
    m: Optional[float] = None
    n: float = 1.0
    factors: tuple = field(default_factory=tuple)
    box: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise WeightError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise NonPositiveValue("constant weight must be positive")
        if self.kind == "affine_power":
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) + (0.0,) * (3 - len(self.coeffs)))
            if self.exponent < 0:
                raise WrongConcavityClass("affine_power exponent must be >= 0")
            if self.m is not None and self.m < self.exponent:
                raise WrongConcavityClass(
                    f"l(x)^{self.exponent:g} is not 1/{self.m:g}-concave (declared m below exponent)")
        if self.kind == "gaussian_y" and not self.n > 0:
            raise WeightError("gaussian_y scale must be positive")
        if self.kind == "product":
            object.__setattr__(self, "factors", tuple(self.factors))
            if not self.factors:
                raise WeightError("product needs at least one factor")

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value: float = 1.0) -> "Weight":
        return cls("constant", value=float(value))

    @classmethod
    def affine_power(cls, coeffs, exponent: float = 1.0, m: Optional[float] = None, box=None) -> "Weight":
        return cls("affine_power", coeffs=tuple(coeffs), exponent=float(exponent), m=m, box=box)

    @classmethod
    def gaussian_y(cls, n: float) -> "Weight":
        return cls("gaussian_y", n=float(n))

    @classmethod
    def product(cls, *factors: "Weight") -> "Weight":
        return cls("product", factors=tuple(factors))

    # -- metadata -----------------------------------------------------
    @property
    def concavity(self) -> ConcavityClass:
        if self.kind == "constant":
            return ConcavityClass("power_concave", 0.0)
        if self.kind == "affine_power":
            return ConcavityClass("power_concave", float(self.m if self.m is not None else self.exponent))
        if self.kind == "gaussian_y":
            return ConcavityClass("log_concave")
        classes = [f.concavity for f in self.factors]
        if all(c.is_power_concave() for c in classes):
            # product of 1/m_i-concave functions is 1/(sum m_i)-concave
            return ConcavityClass("power_concave", float(sum(c.m for c in classes)))
        if all(c.is_log_concave() for c in classes):
            return ConcavityClass("log_concave")
        return ConcavityClass("none")

    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "affine_power":
            return self.exponent == 0 or self.coeffs[1] == self.coeffs[2] == 0
        if self.kind == "product":
            return all(f.is_constant() for f in self.factors)
        return False

    def depends_on_y(self) -> bool:
        if self.kind == "affine_power":
            return self.coeffs[2] != 0 and self.exponent != 0
        if self.kind == "gaussian_y":
            return True
        if self.kind == "product":
            return any(f.depends_on_y() for f in self.factors)
        return False

    # -- evaluation ---------------------------------------------------
    def __call__(self, pts) -> np.ndarray:
        """Vectorised value on an array of shape (..., 2); no domain checks."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        if self.kind == "constant":
            return np.full(x.shape, self.value)
        if self.kind == "affine_power":
            c0, cx, cy = self.coeffs
            ell = np.maximum(c0 + cx * x + cy * y, 0.0)
            if self.exponent == 0:
                return np.ones_like(ell)
            return ell ** self.exponent
        if self.kind == "gaussian_y":
            return self.n * np.exp(-(self.n * y) ** 2)
        out = np.ones(x.shape)
        for fac in self.factors:
            out = out * fac(pts)
        return out

    def scalar_1d(self):
        """Plain-float evaluator of x -> w(x, 0), for use inside ODE right-hand sides."""
        if self.kind == "constant":
            v = float(self.value)
            return lambda x: v
        if self.kind == "affine_power":
            c0, cx, _ = self.coeffs
            e = self.exponent
            if e == 0:
                return lambda x: 1.0
            return lambda x: max(c0 + cx * x, 0.0) ** e
        if self.kind == "gaussian_y":
            v = float(self.n)
            return lambda x: v
        fns = [f.scalar_1d() for f in self.factors]

        def prod(x):
            out = 1.0
            for fn in fns:
                out *= fn(x)
            return out
        return prod

    def on_line(self, x) -> np.ndarray:
        """Values at the points (x, 0)."""
        x = np.asarray(x, dtype=float)
        return self(np.stack([x, np.zeros_like(x)], axis=-1))

    def gradient(self, pts) -> np.ndarray:
        """Analytic gradient, shape (..., 2)."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        if self.kind == "constant":
            return np.zeros(pts.shape)
        if self.kind == "affine_power":
            c0, cx, cy = self.coeffs
            if self.exponent == 0:
                return np.zeros(pts.shape)
            ell = np.maximum(c0 + cx * x + cy * y, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                dv = self.exponent * np.where(ell > 0, ell ** (self.exponent - 1), 0.0)
            return np.stack([dv * cx, dv * cy], axis=-1)
        if self.kind == "gaussian_y":
            v = self.n * np.exp(-(self.n * y) ** 2)
            return np.stack([np.zeros_like(v), -2 * self.n**2 * y * v], axis=-1)
        vals = [f(pts) for f in self.factors]
        grads = [f.gradient(pts) for f in self.factors]
        out = np.zeros(pts.shape)
        for i, g in enumerate(grads):
            rest = np.ones(x.shape)
            for j, v in enumerate(vals):
                if j != i:
                    rest = rest * v
            out = out + g * rest[..., None]
        return out

    def derivative_1d(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.gradient(np.stack([x, np.zeros_like(x)], axis=-1))[..., 0]

    def in_domain(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ok = np.ones(len(pts), dtype=bool)
        if self.kind == "affine_power":
            c0, cx, cy = self.coeffs
            ok &= c0 + cx * pts[:, 0] + cy * pts[:, 1] >= 0
            if self.box is not None:
                (x0, x1), (y0, y1) = self.box
                ok &= (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        elif self.kind == "product":
            for fac in self.factors:
                ok &= fac.in_domain(pts)
        return ok

    # -- serialisation ------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "affine_power":
            d = {"kind": "affine_power", "coeffs": list(self.coeffs), "exponent": self.exponent}
            if self.m is not None:
                d["m"] = self.m
            if self.box is not None:
                d["box"] = [list(b) for b in self.box]
            return d
        if self.kind == "gaussian_y":
            return {"kind": "gaussian_y", "n": self.n}
        return {"kind": "product", "factors": [f.to_json() for f in self.factors]}

    @classmethod
    def from_json(cls, data: dict) -> "Weight":
        kind = data.get("kind")
        if kind == "constant":
            return cls.constant(data.get("value", 1.0))
        if kind == "affine_power":
            box = data.get("box")
            return cls.affine_power(data["coeffs"], data.get("exponent", 1.0), data.get("m"),
                                    tuple(tuple(b) for b in box) if box else None)
        if kind == "gaussian_y":
            return cls.gaussian_y(data["n"])
        if kind == "product":
            return cls.product(*(cls.from_json(f) for f in data["factors"]))
        raise WeightError(f"unknown weight kind {kind!r}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"{self.value:g}"
        if self.kind == "affine_power":
            c0, cx, cy = self.coeffs
            return f"({c0:g}{cx:+g}x{cy:+g}y)^{self.exponent:g}"
        if self.kind == "gaussian_y":
            return f"{self.n:g}exp(-({self.n:g}y)^2)"
        return "*".join(f.describe() for f in self.factors)


def weight_eval(w: Weight, point) -> float:
    """Checked pointwise value.  A scalar or length-1 point is read as (x, 0)."""
    pt = np.atleast_1d(np.asarray(point, dtype=float)).ravel()
    if pt.size == 1:
        pt = np.array([pt[0], 0.0])
    elif pt.size != 2:
        raise OutsideDomain(f"point must be 1D or 2D, got {pt.size} coordinates")
    if not np.all(np.isfinite(pt)) or not w.in_domain(pt)[0]:
        raise OutsideDomain(f"point {pt.tolist()} outside the domain of {w.describe()}")
    val = float(w(pt))
    if not (val > 0 and math.isfinite(val)):
        raise NonPositiveValue(f"{w.describe()} evaluates to {val} at {pt.tolist()}")
    return val


def require_log_concave(w: Weight) -> None:
    if not w.concavity.is_log_concave():
        raise WrongConcavityClass(f"{w.describe()} is not declared log-concave")


def require_power_concave(w: Weight, m_max: Optional[float] = None) -> None:
    c = w.concavity
    if not c.is_power_concave():
        raise WrongConcavityClass(f"{w.describe()} is {c}, not power-concave")
    if m_max is not None and c.m > m_max + 1e-12:
        raise WrongConcavityClass(f"{w.describe()} is {c}, need 1/m-concave with m <= {m_max:g}")


def load_weight(path) -> Weight:
    return Weight.from_json(json.loads(Path(path).read_text()))


def save_weight(w: Weight, path) -> None:
    Path(path).write_text(json.dumps(w.to_json()))
