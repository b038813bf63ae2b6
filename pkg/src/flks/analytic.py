"""Piecewise-exponential unimodal traveling wave for the stiff (sign) flux.

All quantities are in growth-scaled variables: xi_hat = sqrt(p) xi and
chi_hat = chi / sqrt(p). The wave travels at the minimum speed
c = (2 - chi_hat) sqrt(p); the signal peak sits at xi_hat = 0 and the density
crosses rho_c = 1/(1+p) at xi_hat = xi_c_hat.

Two conventions exist for the tail coefficient gamma. ``"printed"`` is the
closed form as published; it reproduces the published matching distances
but leaves a slope mismatch of t**2 at xi_c. ``"smooth"`` adds t**2 so the
profile is C1 there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError, NoRootError

__all__ = [
    "StiffWaveParams",
    "WaveCoefficients",
    "AnalyticProfile",
    "XiCRoot",
    "ValidationReport",
    "coefficients",
    "constraint_f",
    "constraint_g",
    "p_upper_bound",
    "below_p_upper",
    "F_value",
    "F_quadrature",
    "F_asymptote",
    "find_xi_c",
    "profile_density",
    "profile_slope",
    "make_profile",
    "validate_solution",
]

GAMMA_CONVENTIONS = ("printed", "smooth")
SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class StiffWaveParams:
    chi_hat: float
    p: float
    d: float

    def __post_init__(self):
        for name in ("chi_hat", "p", "d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v}")

    @property
    def t(self):
        return math.sqrt(self.p / (1.0 + self.p))

    @property
    def rho_c(self):
        return 1.0 / (1.0 + self.p)

    @property
    def c_min(self):
        """Physical minimum speed 2 sqrt(p) - chi."""
        return (2.0 - self.chi_hat) * math.sqrt(self.p)

    @property
    def c_min_hat(self):
        return 2.0 - self.chi_hat

    @property
    def decay_rate(self):
        """Tail decay rate sqrt(p) selected by the double root."""
        return math.sqrt(self.p)

    @property
    def q(self):
        """Scaled signal decay rate 1 / sqrt(p d)."""
        return 1.0 / math.sqrt(self.p * self.d)


@dataclass(frozen=True)
class WaveCoefficients:
    xi_c_hat: float
    t: float
    s: float
    nu: float
    eta_plus: float
    eta_minus: float
    mu_plus: float
    mu_minus: float
    alpha: float
    beta: float
    beta_minus_t2: float  # beta - t**2, kept separately: it is O(s**(1+t))
    gamma: float
    gamma_convention: str = "printed"

    @property
    def peak(self):
        """Density at the signal peak, 1 + alpha."""
        return 1.0 + self.alpha


def _rates(chi_hat, t):
    root = math.sqrt(chi_hat * chi_hat - 2.0 * chi_hat + 1.0 / (t * t))
    nu = chi_hat - 1.0 + root
    eta_p, eta_m = -1.0 + 1.0 / t, -1.0 - 1.0 / t
    mu_p = chi_hat - root + 1.0 / t
    mu_m = chi_hat - root - 1.0 / t
    return nu, eta_p, eta_m, mu_p, mu_m


def coefficients(params: StiffWaveParams, xi_c_hat, gamma_convention="printed") -> WaveCoefficients:
    if not xi_c_hat > 0:
        raise DomainError(f"xi_c_hat must be positive, got {xi_c_hat}")
    if gamma_convention not in GAMMA_CONVENTIONS:
        raise DomainError(f"unknown gamma convention {gamma_convention!r}")
    ch, t = params.chi_hat, params.t
    nu, eta_p, eta_m, mu_p, mu_m = _rates(ch, t)
    log_s = -xi_c_hat / t
    s = math.exp(log_s)
    s2, s1mt, s1pt = math.exp(2 * log_s), math.exp((1 - t) * log_s), math.exp((1 + t) * log_s)
    den = mu_p * s2 - mu_m
    alpha = (2.0 * ch * (1.0 - s2) - 2.0 * t * s1mt) / den
    beta = (2.0 * ch * s1pt - t * t * mu_m) / den
    beta_m = (2.0 * ch * s1pt - t * t * mu_p * s2) / den
    g = mu_p * s2 * t * (1 + t - t * t) - mu_m * t * (1 - t - t * t) - 4.0 * ch * s1pt
    gamma = g / (den * t)
    if gamma_convention == "smooth":
        gamma += t * t
    return WaveCoefficients(
        float(xi_c_hat), t, s, nu, eta_p, eta_m, mu_p, mu_m, alpha, beta, beta_m, gamma, gamma_convention
    )


def constraint_f(params: StiffWaveParams, xi_c_hat):
    """chi_hat (s^(t-1) - s^(t+1)) - t; positive iff alpha > 0."""
    t = params.t
    log_s = -xi_c_hat / t
    return params.chi_hat * (math.exp((t - 1) * log_s) - math.exp((t + 1) * log_s)) - t


def constraint_g(params: StiffWaveParams, xi_c_hat):
    """Numerator of the printed gamma; positive iff that gamma > 0."""
    t = params.t
    _, _, _, mu_p, mu_m = _rates(params.chi_hat, t)
    log_s = -xi_c_hat / t
    s2, s1pt = math.exp(2 * log_s), math.exp((1 + t) * log_s)
    return mu_p * s2 * t * (1 + t - t * t) - mu_m * t * (1 - t - t * t) - 4.0 * params.chi_hat * s1pt


def p_upper_bound():
    """Largest growth rate admitting the wave for large xi_c: (sqrt 5 - 1) / 2."""
    return (math.sqrt(5.0) - 1.0) / 2.0


def below_p_upper(t):
    """True iff 1 - t - t^2 > 0, i.e. t < (sqrt 5 - 1)/2."""
    return 1.0 - t - t * t > 0.0


def _divided_decay(rate, length):
    # (1 - exp(-rate*length)) / rate, continuous through rate = 0
    if abs(rate) < SINGULAR_TOL:
        return length
    return -math.expm1(-rate * length) / rate


def F_value(params: StiffWaveParams, xi_c_hat, gamma_convention="printed"):
    """2 d sqrt(p) S'(0) in closed form; zero when the signal peaks at xi = 0."""
    if not xi_c_hat > 0:
        raise DomainError(f"xi_c_hat must be positive, got {xi_c_hat}")
    c = coefficients(params, xi_c_hat, gamma_convention)
    q, t = params.q, c.t
    spd = 1.0 / q
    region_iii = (spd + t * t - c.gamma / (1.0 + q)) / (1.0 + q)
    region_ii = (
        c.beta * _divided_decay(c.eta_plus - q, xi_c_hat)
        - c.beta_minus_t2 * _divided_decay(c.eta_minus - q, xi_c_hat)
    )
    return -c.alpha / (c.nu + q) - math.exp(-q * xi_c_hat) * (region_iii + region_ii)


def F_asymptote(params: StiffWaveParams):
    """Limit of F as xi_c -> infinity; vanishes exactly at chi_hat = 2."""
    nu, _, eta_m, _, mu_m = _rates(params.chi_hat, params.t)
    q = params.q
    return 2.0 * params.chi_hat / mu_m * (1.0 / (nu + q) - 1.0 / (q - eta_m))


class XiCRoot(NamedTuple):
    xi_c_hat: float
    f_positive: bool
    g_positive: bool
    alpha: float
    gamma: float
    sign_changes: int
    brackets: tuple

    @property
    def admissible(self):
        return self.f_positive and self.g_positive


def find_xi_c(params: StiffWaveParams, bracket=(0.01, 60.0), scan=600, xtol=1e-10, gamma_convention="printed"):
    """Smallest root of F in ``bracket``, by bisection.

    F is first tabulated on ``scan`` equispaced points; every sign change is
    reported in ``brackets`` and the first one is refined.
    """
    from scipy.optimize import bisect

    lo, hi = bracket
    grid = np.linspace(lo, hi, scan)
    vals = np.array([F_value(params, x, gamma_convention) for x in grid])
    sgn = np.sign(vals)
    idx = np.flatnonzero(sgn[:-1] * sgn[1:] <= 0)
    if idx.size == 0:
        raise NoRootError(f"F has no sign change on [{lo}, {hi}] for {params}")
    brackets = tuple((float(grid[i]), float(grid[i + 1])) for i in idx)
    a, b = brackets[0]
    if vals[idx[0]] == 0:
        root = a
    else:
        root = bisect(lambda x: F_value(params, x, gamma_convention), a, b, xtol=xtol, maxiter=200)
    c = coefficients(params, root, gamma_convention)
    return XiCRoot(
        float(root),
        constraint_f(params, root) > 0,
        constraint_g(params, root) > 0,
        c.alpha,
        c.gamma,
        len(brackets),
        brackets,
    )


@dataclass(frozen=True)
class AnalyticProfile:
    coefficients: WaveCoefficients
    params: StiffWaveParams

    def density(self, xi_hat):
        return profile_density(self, xi_hat)

    def slope(self, xi_hat):
        return profile_slope(self, xi_hat)


def make_profile(params: StiffWaveParams, xi_c_hat=None, gamma_convention="printed"):
    """Profile at ``xi_c_hat``, or at the root of F when it is omitted."""
    if xi_c_hat is None:
        xi_c_hat = find_xi_c(params, gamma_convention=gamma_convention).xi_c_hat
    return AnalyticProfile(coefficients(params, xi_c_hat, gamma_convention), params)


def _pieces(profile, xi_hat, order):
    c = profile.coefficients
    x = np.asarray(xi_hat, dtype=float)
    out = np.empty_like(x)
    r1, r3 = x < 0, x >= c.xi_c_hat
    r2 = ~(r1 | r3)
    z1 = x[r1]
    z2 = x[r2] - c.xi_c_hat
    z3 = x[r3] - c.xi_c_hat
    e1 = c.alpha * c.nu**order * np.exp(c.nu * z1)
    ep = c.beta * c.eta_plus**order * np.exp(c.eta_plus * z2)
    em = c.beta_minus_t2 * c.eta_minus**order * np.exp(c.eta_minus * z2)
    e3 = np.exp(-z3)
    amp = 1.0 - c.t * c.t
    if order == 0:
        out[r1] = 1.0 + e1
        out[r2] = 1.0 - ep + em
        out[r3] = (amp + c.gamma * z3) * e3
    elif order == 1:
        out[r1] = e1
        out[r2] = -ep + em
        out[r3] = (c.gamma - amp - c.gamma * z3) * e3
    else:
        out[r1] = e1
        out[r2] = -ep + em
        out[r3] = (amp - 2.0 * c.gamma + c.gamma * z3) * e3
    return out[()] if out.ndim == 0 else out


def profile_density(profile: AnalyticProfile, xi_hat):
    """Density at scaled moving-frame positions (region chosen per point)."""
    return _pieces(profile, xi_hat, 0)


def profile_slope(profile: AnalyticProfile, xi_hat):
    """d rho / d xi_hat; one-sided from the right at the region boundaries."""
    return _pieces(profile, xi_hat, 1)


def _region_formula(profile, region, xi_hat, order, deviation=False):
    # evaluate one region's expression regardless of where xi_hat lies;
    # ``deviation`` returns rho - 1 for the saturating regions
    c = profile.coefficients
    x = np.asarray(xi_hat, dtype=float)
    amp = 1.0 - c.t * c.t
    base = 0.0 if deviation else 1.0
    if region == 1:
        e = c.alpha * c.nu**order * np.exp(c.nu * x)
        return base + e if order == 0 else e
    if region == 2:
        z = x - c.xi_c_hat
        v = -c.beta * c.eta_plus**order * np.exp(c.eta_plus * z) + c.beta_minus_t2 * c.eta_minus**order * np.exp(
            c.eta_minus * z
        )
        return base + v if order == 0 else v
    z = x - c.xi_c_hat
    e = np.exp(-z)
    return [(amp + c.gamma * z) * e, (c.gamma - amp - c.gamma * z) * e, (amp - 2 * c.gamma + c.gamma * z) * e][order]


def F_quadrature(params: StiffWaveParams, xi_c_hat, gamma_convention="printed"):
    """F by adaptive quadrature of the signal-slope integral over the profile."""
    from scipy.integrate import quad

    prof = make_profile(params, xi_c_hat, gamma_convention)
    q = params.q

    def integrand(z):
        return math.exp(-q * z) * (float(profile_density(prof, z)) - float(profile_density(prof, -z)))

    kw = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    total = quad(integrand, 0.0, xi_c_hat, **kw)[0] + quad(integrand, xi_c_hat, np.inf, **kw)[0]
    return total


@dataclass
class ValidationReport:
    residuals: dict
    passed: dict

    @property
    def ok(self):
        return all(self.passed.values())

    @property
    def failures(self):
        return [k for k, v in self.passed.items() if not v]

    def __str__(self):
        lines = [f"{k:28s} {self.residuals[k]:.3e} {'ok' if self.passed[k] else 'FAIL'}" for k in self.residuals]
        return "\n".join(lines)


def validate_solution(profile: AnalyticProfile, rtol=1e-8, samples=100) -> ValidationReport:
    """Check the profile against the moving-frame equations and matching conditions.

    Keys name the violated condition: ``ode_region_{i,ii,iii}``,
    ``continuity_at_0``, ``continuity_at_xi_c``, ``slope_continuity_at_xi_c``,
    ``slope_jump_at_0``, ``alpha_positive``, ``gamma_positive``,
    ``signal_peak_at_0``.
    """
    from scipy.integrate import quad

    c, prm = profile.coefficients, profile.params
    xc, p, ch = c.xi_c_hat, prm.p, prm.chi_hat
    c_hat = prm.c_min_hat
    res = {}

    # moving-frame ODEs in scaled form; signs of the drift per region
    def ode(region, x, drift, linear):
        r0 = _region_formula(profile, region, x, 0)
        r1 = _region_formula(profile, region, x, 1)
        r2 = _region_formula(profile, region, x, 2)
        lhs = drift * r1
        # saturating regions: use rho - 1 directly, 1 - r0 cancels badly
        reaction = -_region_formula(profile, region, x, 0, deviation=True) / p if linear == "saturating" else r0
        rhs = r2 + reaction
        scale = np.abs(lhs) + np.abs(r2) + np.abs(reaction)
        return float(np.max(np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0)))

    span = max(xc, 1.0)
    res["ode_region_i"] = ode(1, np.linspace(-30.0 / c.nu, 0.0, samples, endpoint=False), ch - c_hat, "saturating")
    res["ode_region_ii"] = ode(2, np.linspace(0.0, xc, samples), -(ch + c_hat), "saturating")
    res["ode_region_iii"] = ode(3, np.linspace(xc, xc + 10.0 * span, samples), -(ch + c_hat), "growth")

    rho0 = float(_region_formula(profile, 1, 0.0, 0))
    res["continuity_at_0"] = abs(rho0 - float(_region_formula(profile, 2, 0.0, 0))) / abs(rho0)
    a = float(_region_formula(profile, 2, xc, 0))
    b = float(_region_formula(profile, 3, xc, 0))
    res["continuity_at_xi_c"] = abs(a - b) / max(abs(a), abs(b))
    a = float(_region_formula(profile, 2, xc, 1))
    b = float(_region_formula(profile, 3, xc, 1))
    res["slope_continuity_at_xi_c"] = abs(a - b) / max(abs(a), abs(b), 1e-300)
    jump = float(_region_formula(profile, 1, 0.0, 1)) - float(_region_formula(profile, 2, 0.0, 1))
    res["slope_jump_at_0"] = abs(jump - 2.0 * ch * rho0) / (2.0 * ch * abs(rho0))

    q = prm.q

    def signed(z):
        return math.exp(-q * z) * (float(profile_density(profile, z)) - float(profile_density(profile, -z)))

    def magnitude(z):
        return math.exp(-q * z) * (abs(float(profile_density(profile, z))) + abs(float(profile_density(profile, -z))))

    kw = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
    num = quad(signed, 0.0, xc, **kw)[0] + quad(signed, xc, np.inf, **kw)[0]
    scale = quad(magnitude, 0.0, xc, **kw)[0] + quad(magnitude, xc, np.inf, **kw)[0]
    res["signal_peak_at_0"] = abs(num) / scale

    passed = {k: v <= rtol for k, v in res.items()}
    res["alpha_positive"] = c.alpha
    res["gamma_positive"] = c.gamma
    passed["alpha_positive"] = c.alpha > 0
    passed["gamma_positive"] = c.gamma > 0
    return ValidationReport(res, passed)


def perturbed(profile: AnalyticProfile, **changes) -> AnalyticProfile:
    """Copy of ``profile`` with some coefficients overwritten (negative controls)."""
    return AnalyticProfile(replace(profile.coefficients, **changes), profile.params)
