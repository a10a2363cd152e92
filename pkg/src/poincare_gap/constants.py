"""The explicit constant chain of the quantitative Payne-Weinberger bound.

Everything is evaluated in mpmath.  "Small" constants are also returned as
floats; the chained constants K1, K2, eta0 and K0 are :class:`LogValue`.
The working precision is raised with the magnitude of ln K1 so that the
algebraic identities among the chained constants hold to the last digit
of a double.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from .errors import InvalidExponent
from .logvalue import LogValue

BASE_DPS = 40
BETA_TOL = 1e-15
LN_TOL = 1e-12
# 7 * 16 * 256, the combinatorial factor in K0
K0_FACTOR = 7 * 16 * 256


def _check_p(p):
    if not p > 1:
        raise InvalidExponent(f"exponent p must exceed 1, got {p}")


def _check_n(N):
    if int(N) != N or N < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {N}")


# --- one-dimensional quantities ----------------------------------------

def pi_p_mp(p):
    p = mpmath.mpf(p)
    return 2 * mpmath.pi * (p - 1) ** (1 / p) / (p * mpmath.sin(mpmath.pi / p))


def pi_p(p: float) -> float:
    """First zero of the generalised p-sine, 2 pi (p-1)^(1/p) / (p sin(pi/p))."""
    _check_p(p)
    return 2 * math.pi * (p - 1) ** (1 / p) / (p * math.sin(math.pi / p))


def pi_p_pow(p: float) -> float:
    _check_p(p)
    return float(pi_p_mp(p) ** p)


def d_p_mp(p):
    pp = pi_p_mp(p)
    return pp / (pp ** mpmath.mpf(p) + 1) ** (1 / mpmath.mpf(p))


def d_p(p: float) -> float:
    """Interval length below which the 1D eigenvalue must exceed (pi_p)^p + 1.

    For p above about 40, 1 - d_p is below double resolution and the float
    rounds to 1.0; use :func:`d_p_mp` under a raised precision to resolve it.
    """
    _check_p(p)
    return float(d_p_mp(p))


# --- dimension-dependent constants -------------------------------------

def omega(N):
    return mpmath.pi ** (mpmath.mpf(N) / 2) / mpmath.gamma(mpmath.mpf(N) / 2 + 1)


def k_infinity_mp(N):
    _check_n(N)
    N = mpmath.mpf(N)
    return 2 ** (2 * N) / omega(N) * (1 + 4 * N ** (N + 1)) ** N * (N / (N - 1)) ** (N * (N - 1))


def k_infinity(N: int) -> float:
    """Constant of the sup-norm estimate for Neumann eigenfunctions."""
    return float(k_infinity_mp(N))


def beta_mp(N, p, tol: float = BETA_TOL):
    _check_n(N)
    _check_p(p)
    p = mpmath.mpf(p)
    delta = mpmath.mpf(N) / (N - 1)
    r = 1 / delta
    ln_delta = mpmath.log(delta)
    total = mpmath.mpf(0)
    k = 0
    while True:
        dk = delta**k
        total += (k * p * ln_delta - mpmath.log(p * dk - p + 1)) * r**k / p
        # bound of the remaining log-contribution: sum_{j>k} j ln(delta) r^j
        tail = ln_delta * r ** (k + 1) * ((k + 1) - k * r) / (1 - r) ** 2
        if tail < tol:
            break
        k += 1
    return mpmath.exp(total)


def beta(N: int, p: float, tol: float = BETA_TOL) -> float:
    """Infinite product entering the p-dependent sup-norm constant."""
    return float(beta_mp(N, p, tol))


def beta_upper_bound(N: int) -> float:
    return float((mpmath.mpf(N) / (N - 1)) ** (N * (N - 1)))


def k_infinity_tilde_mp(N, p):
    _check_n(N)
    _check_p(p)
    Nm, pm = mpmath.mpf(N), mpmath.mpf(p)
    c = (1 + 4 * Nm ** (Nm + 1)) / (Nm * omega(Nm) ** (1 / Nm))
    return 2 ** ((pm + 1) * Nm / pm) * Nm**Nm * c ** (Nm / pm) * beta_mp(N, p)


def k_infinity_tilde(N: int, p: float) -> float:
    return float(k_infinity_tilde_mp(N, p))


def moser_constants(N: int, p: float):
    """(C2, C3, C1): Sobolev, trace-corrected Sobolev, and iteration constants."""
    _check_n(N)
    _check_p(p)
    c2 = 1.0 / (N * float(omega(N)) ** (1.0 / N))
    c3 = c2 * (1 + 4 * N ** (N + 1))
    c1 = 2 ** (p + 1) * N**p * c3
    return c2, c3, c1


def trace_constant(N: int) -> float:
    _check_n(N)
    return 1.0 / (4 * N ** (N + 1))


def kroger_mp(p, N):
    _check_p(p)
    p, N = mpmath.mpf(p), mpmath.mpf(N)
    return (p + 1) * 2 ** ((N + 3 * p) / 2) * N ** (N + p)


def kroger(p: float, N) -> float:
    """Upper bound constant: mu_p * D^p <= kroger(p, N)."""
    return float(kroger_mp(p, N))


# --- constants of the one-dimensional refinement -----------------------

def gamma_mp(p, m):
    _check_p(p)
    if int(m) != m or m < 1:
        raise ValueError("m must be an integer >= 1")
    pm = mpmath.mpf(p)
    integral = mpmath.mpf(2) ** (-(m + 1)) / (m + 2)
    return k_infinity_mp(m + 1) * (pi_p_mp(p) ** pm + 1) ** ((m + 1) / pm) * integral ** (-1 / pm)


def gamma(p: float, m: int) -> float:
    return float(gamma_mp(p, m))


def min_power_integral(m: int) -> float:
    """Integral over (0, 1) of min(x, 1-x)^(m+1)."""
    return 2.0 ** (-(m + 1)) / (m + 2)


def b0_and_M_mp(p, a, s, t):
    pm = mpmath.mpf(p)
    a, s, t = mpmath.mpf(a), mpmath.mpf(s), mpmath.mpf(t)
    q = pm / (pm - 1)
    b0 = min(a / 2, ((pm - 1) / (2 * pm) * s / t) ** q)
    lead = ((pm - 1) / pm) ** (pm - 1)
    if pm < 2:
        M = lead * min(b0**2 / 2, b0 / 2 * s**q)
    else:
        M = lead * b0 ** (pm - 1) * s**pm / 2
    return b0, M


def b0_and_M(p: float, a: float, s: float, t: float):
    _check_p(p)
    if not (0 < a < 1 and s > 0 and t > 0):
        raise ValueError("need a in (0,1) and s, t > 0")
    with mpmath.workdps(BASE_DPS):
        b0, M = b0_and_M_mp(p, a, s, t)
        return float(b0), float(M)


def _dps_for(p, m) -> int:
    with mpmath.workdps(BASE_DPS):
        ln_kappa = mpmath.log(m + 1) + (m + 3) * mpmath.log(2) + p * (m + 2) * mpmath.log(gamma_mp(p, m))
        digits = float(ln_kappa / mpmath.log(10))
    return BASE_DPS + max(0, int(math.ceil(digits)))


def _k1_mp(p, m):
    pm = mpmath.mpf(p)
    g = gamma_mp(p, m)
    gp = g**pm
    a = 1 / (4 * gp)
    s = (4 * g) ** (-1 / (pm - 1))
    t = (4 * gp) ** (m + 1) * (pi_p_mp(p) ** pm + 1)
    _, M = b0_and_M_mp(p, a, s, t)
    ln_k1 = (-mpmath.log(2) / (pm - 1)
             - (m + 1) * mpmath.mpf(2) ** (m + 3) * g ** (pm * (m + 2))
             - (2 * pm**2 - pm) / (pm - 1) * mpmath.log(g)
             + mpmath.log(M))
    return ln_k1, M


def k1(p: float, m: int) -> LogValue:
    _check_p(p)
    with mpmath.workdps(_dps_for(p, m)):
        return LogValue(_k1_mp(p, m)[0])


def k3(p: float, m: int) -> float:
    _check_p(p)
    with mpmath.workdps(BASE_DPS):
        return float(1 / (4 * gamma_mp(p, m) ** mpmath.mpf(p)))


def kappa_star(p: float, m: int) -> LogValue:
    _check_p(p)
    with mpmath.workdps(BASE_DPS):
        g = gamma_mp(p, m)
        return LogValue(mpmath.log(m + 1) + (m + 2) * mpmath.log(2 * g ** mpmath.mpf(p)))


def k2(p: float, n_total: int) -> LogValue:
    """Area-sweep constant with K_inf and Kroger evaluated in dimension ``n_total``."""
    _check_p(p)
    with mpmath.workdps(BASE_DPS):
        n = mpmath.mpf(n_total)
        return LogValue(-n * mpmath.log(2) - mpmath.mpf(p) * mpmath.log(k_infinity_mp(n_total))
                        - n * mpmath.log(kroger_mp(p, n_total)))


@dataclass
class ConstantsReport:
    p: float
    N: int
    m: int
    pi_p: float
    pi_p_pow: float
    d_p: float
    k_inf: float
    k_inf_tilde: float
    beta: float
    trace_c: float
    c2_moser: float
    c3_moser: float
    c1_moser: float
    gamma: float
    kappa_star: LogValue
    k1: LogValue
    k3: float
    kroger: float
    k2: LogValue
    eta0: LogValue
    k0: LogValue
    c0: LogValue
    lemma1_c: LogValue
    M: LogValue
    working_dps: int
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            out[key] = val.to_json() if isinstance(val, LogValue) else val
        return out


def constants_report(p: float, m: int, N: int = 2) -> ConstantsReport:
    """Evaluate the full chain at (p, m) and check the auxiliary inequalities.

    K2 is evaluated at dimension N + m as needed for 1/m-concave weights.
    """
    _check_p(p)
    _check_n(N)
    if int(m) != m or m < 1:
        raise ValueError("m must be an integer >= 1")
    dps = _dps_for(p, m)
    with mpmath.workdps(dps):
        pm = mpmath.mpf(p)
        pp = pi_p_mp(p)
        ln_k1, M = _k1_mp(p, m)
        k1v = LogValue(ln_k1)
        g = gamma_mp(p, m)
        k3v = 1 / (4 * g**pm)
        n_tot = N + m
        ln_k2 = (-n_tot * mpmath.log(2) - pm * mpmath.log(k_infinity_mp(n_tot))
                 - n_tot * mpmath.log(kroger_mp(p, n_tot)))
        k2v = LogValue(ln_k2)
        ln_eta0 = -mpmath.log(2) + (mpmath.log(2) + ln_k1 - mpmath.log(3)) / 2
        eta0 = LogValue(ln_eta0)
        ln_k0 = ln_k1 + 2 * ln_k2 - mpmath.log(6) - 2 * mpmath.log(K0_FACTOR)
        k0v = LogValue(ln_k0)
        ln_c0 = 2 * ln_k2 - mpmath.log(2) - 2 * mpmath.log(256)
        ln_lemma1 = 2 * ln_k2 - 2 * mpmath.log(8 * 256)
        ln_kappa = mpmath.log(m + 1) + (m + 2) * mpmath.log(2 * g**pm)
        beta_v = beta_mp(N, p)
        c2, c3, c1 = moser_constants(N, p)
        identity_gap = ln_k0 - (2 * ln_k2 + 2 * ln_eta0 - 2 * mpmath.log(K0_FACTOR))
        lemma1_gap = ln_lemma1 - (ln_c0 - mpmath.log(32))
        checks = {
            "pi_p_pow_gt_2": bool(pp**pm > 2),
            "d_p_in_(2/3,1)": bool(mpmath.mpf(2) / 3 < pp / (pp**pm + 1) ** (1 / pm) < 1),
            "beta_le_bound": bool(beta_v <= (mpmath.mpf(N) / (N - 1)) ** (N * (N - 1))),
            "beta_ge_1": bool(beta_v >= 1),
            "k_inf_tilde_le_k_inf": bool(k_infinity_tilde_mp(N, p) <= k_infinity_mp(N)),
            "gamma_gt_1": bool(g > 1),
            "M_lt_1": bool(M < 1),
            "ln_k1_le_ln_1/6": bool(ln_k1 <= -mpmath.log(6)),
            "ln_k1_le_ln_k3/4": bool(ln_k1 <= mpmath.log(k3v) - mpmath.log(4)),
            "k0_identity": bool(abs(identity_gap) <= LN_TOL),
            "lemma1_c0_identity": bool(abs(lemma1_gap) <= LN_TOL),
            "k0_identity_gap": float(identity_gap),
        }
        return ConstantsReport(
            p=float(p), N=int(N), m=int(m),
            pi_p=float(pp), pi_p_pow=float(pp**pm), d_p=float(pp / (pp**pm + 1) ** (1 / pm)),
            k_inf=float(k_infinity_mp(N)), k_inf_tilde=float(k_infinity_tilde_mp(N, p)),
            beta=float(beta_v), trace_c=trace_constant(N),
            c2_moser=c2, c3_moser=c3, c1_moser=c1,
            gamma=float(g), kappa_star=LogValue(ln_kappa), k1=k1v, k3=float(k3v),
            kroger=float(kroger_mp(p, N)), k2=k2v, eta0=eta0, k0=k0v,
            c0=LogValue(ln_c0), lemma1_c=LogValue(ln_lemma1), M=LogValue(mpmath.log(M)),
            working_dps=dps, checks=checks,
        )
