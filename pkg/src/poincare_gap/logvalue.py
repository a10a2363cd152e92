"""Non-negative reals stored by their natural logarithm.

The logarithm is kept as an ``mpmath.mpf`` because some constants have
logarithms (around -1e37 or smaller) that are fine as doubles but whose
consistency identities need more digits than a double carries, and at
larger parameters the logarithm itself exceeds the double range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

_NEG_INF = mpmath.mpf("-inf")


@dataclass(frozen=True)
class LogValue:
    ln: mpmath.mpf

    def __post_init__(self):
        object.__setattr__(self, "ln", mpmath.mpf(self.ln))
        if mpmath.isnan(self.ln) or self.ln == mpmath.inf:
            raise ValueError("LogValue needs a finite logarithm or -inf")

    sign = 1

    @classmethod
    def from_value(cls, x) -> "LogValue":
        with mpmath.workdps(max(30, mpmath.mp.dps)):
            x = mpmath.mpf(x)
        if x < 0:
            raise ValueError("LogValue represents non-negative numbers only")
        if x == 0:
            return cls(_NEG_INF)
        # a double carries 53 bits; its logarithm is taken with room to spare
        with mpmath.workdps(max(30, mpmath.mp.dps)):
            return cls(mpmath.log(x))

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(_NEG_INF)

    def is_zero(self) -> bool:
        return self.ln == _NEG_INF

    def __mul__(self, other):
        other = _coerce(other)
        with mpmath.workdps(_dps(self.ln, other.ln)):
            return LogValue(self.ln + other.ln)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by LogValue zero")
        with mpmath.workdps(_dps(self.ln, other.ln)):
            return LogValue(self.ln - other.ln)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, k):
        if self.is_zero():
            if k > 0:
                return self
            raise ZeroDivisionError("zero to a non-positive power")
        with mpmath.workdps(_dps(self.ln) + 5):
            return LogValue(self.ln * mpmath.mpf(k))

    def __add__(self, other):
        other = _coerce(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        hi, lo = (self.ln, other.ln) if self.ln >= other.ln else (other.ln, self.ln)
        with mpmath.workdps(_dps(self.ln, other.ln)):
            return LogValue(hi + mpmath.log1p(mpmath.exp(lo - hi)))

    __radd__ = __add__

    def _cmp_key(self, other):
        return self.ln, _coerce(other).ln

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    @property
    def ln_float(self) -> float:
        """Logarithm as a double (may be -inf if beyond double range)."""
        return float(self.ln)

    @property
    def value(self):
        """Linear value as a float, or None when it under/overflows a double."""
        if self.is_zero():
            return 0.0
        if self.ln < -745 or self.ln > 709:
            return None
        # exponentiate before rounding: float(ln) alone would cost |ln| * 2^-53 relative accuracy
        with mpmath.workdps(_dps(self.ln)):
            return float(mpmath.exp(self.ln))

    def to_json(self) -> dict:
        return {"ln": mpmath.nstr(self.ln, 25) if not self.is_zero() else "-inf",
                "ln_float": self.ln_float if math.isfinite(self.ln_float) else None,
                "value": self.value}

    def __repr__(self):
        return f"LogValue(ln={mpmath.nstr(self.ln, 17)})"


def _dps(*lns) -> int:
    """Decimal digits keeping about 25 significant digits after the point."""
    bits = max((mpmath.mag(x) for x in lns if mpmath.isfinite(x) and x != 0), default=0)
    return 25 + max(0, int(bits * 0.30103) + 1)


def _coerce(x) -> LogValue:
    return x if isinstance(x, LogValue) else LogValue.from_value(x)
