"""Model ingredients: bounded chemotactic flux, growth law, parameters.

All parameters are stored in physical (unscaled) units. The growth-scaled
("hatted") coordinates x_hat = sqrt(p) x, t_hat = p t are derived views and
are converted here and nowhere else.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "FluxKind",
    "FluxModel",
    "ProliferationModel",
    "ModelParams",
    "flux_velocity",
    "flux_slope_at_zero",
    "proliferation_rate",
    "critical_stiffness",
    "linear_stability_margin",
    "is_linearly_stable",
    "to_scaled",
    "from_scaled",
    "speed_to_scaled",
    "speed_from_scaled",
]


class FluxKind(enum.Enum):
    ARCTAN = "arctan"
    STIFF_SIGN = "stiff_sign"


@dataclass(frozen=True)
class FluxModel:
    """Drift velocity as a bounded function of the log-gradient of S.

    ``ARCTAN`` is U(X) = (2 chi / pi) arctan(X / delta); ``STIFF_SIGN`` is its
    delta -> 0 limit chi * sign(X), with the value 0 at X = 0.
    """

    kind: FluxKind
    chi: float
    delta: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.chi) and self.chi > 0):
            raise DomainError(f"chi must be positive and finite, got {self.chi}")
        if self.kind is FluxKind.ARCTAN:
            if self.delta is None or not self.delta > 0:
                raise DomainError(f"arctan flux needs delta > 0, got {self.delta}")

    @classmethod
    def arctan(cls, chi, delta):
        return cls(FluxKind.ARCTAN, float(chi), float(delta))

    @classmethod
    def stiff(cls, chi):
        return cls(FluxKind.STIFF_SIGN, float(chi), None)

    @property
    def slope_at_zero(self):
        return flux_slope_at_zero(self)


@dataclass(frozen=True)
class ProliferationModel:
    """Piecewise growth rate: p below rho_c = 1/(1+p), 1/rho - 1 above."""

    p: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 0):
            raise DomainError(f"growth rate p must be positive, got {self.p}")

    @property
    def rho_c(self):
        return 1.0 / (1.0 + self.p)


@dataclass(frozen=True)
class ModelParams:
    flux: FluxModel
    growth: ProliferationModel
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d > 0):
            raise DomainError(f"diffusivity d must be positive, got {self.d}")

    @classmethod
    def from_scaled(cls, chi_hat, stiffness, d, p):
        """Build physical parameters from (chi_hat, 2 chi/(pi delta), d, p).

        ``stiffness=math.inf`` selects the stiff sign flux.
        """
        if not (chi_hat > 0):
            raise DomainError(f"chi_hat must be positive, got {chi_hat}")
        if not (stiffness > 0):
            raise DomainError(f"stiffness must be positive, got {stiffness}")
        growth = ProliferationModel(float(p))
        chi = chi_hat * math.sqrt(p)
        if math.isinf(stiffness):
            flux = FluxModel.stiff(chi)
        else:
            flux = FluxModel.arctan(chi, 2.0 * chi / (math.pi * stiffness))
        return cls(flux, growth, float(d))

    @property
    def p(self):
        return self.growth.p

    @property
    def chi(self):
        return self.flux.chi

    @property
    def rho_c(self):
        return self.growth.rho_c

    @property
    def chi_hat(self):
        return self.flux.chi / math.sqrt(self.growth.p)

    @property
    def stiffness(self):
        """2 chi / (pi delta), the slope of the flux at the origin."""
        return flux_slope_at_zero(self.flux)


def flux_velocity(model: FluxModel, X):
    """Evaluate U_delta(X). Accepts scalars or arrays."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DomainError("flux_velocity: non-finite log-gradient")
    if model.kind is FluxKind.ARCTAN:
        out = (2.0 * model.chi / math.pi) * np.arctan(X / model.delta)
    else:
        out = model.chi * np.sign(X)
    return out[()] if out.ndim == 0 else out


def flux_slope_at_zero(model: FluxModel):
    """U'_delta(0) = 2 chi / (pi delta); ``math.inf`` for the sign flux."""
    if model.kind is FluxKind.STIFF_SIGN:
        return math.inf
    return 2.0 * model.chi / (math.pi * model.delta)


def proliferation_rate(growth: ProliferationModel, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise DomainError("proliferation_rate: density must be finite and >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(rho <= growth.rho_c, growth.p, 1.0 / np.where(rho > 0, rho, 1.0) - 1.0)
    return out[()] if out.ndim == 0 else out


def critical_stiffness(d):
    """Largest flux slope U'(0) for which rho = S = 1 is linearly stable."""
    return (1.0 + math.sqrt(d)) ** 2


def linear_stability_margin(params: ModelParams):
    """(1 + sqrt d)^2 - U'(0). Positive: stable; zero: critical; negative: unstable.

    The sign flux has infinite slope, so its margin is ``-inf``.
    """
    return critical_stiffness(params.d) - flux_slope_at_zero(params.flux)


def is_linearly_stable(params: ModelParams, rtol=1e-12):
    # a margin within rounding of zero is reported as critical, not stable
    margin = linear_stability_margin(params)
    return bool(margin > rtol * critical_stiffness(params.d))


def _p_of(params_or_p):
    return params_or_p.p if isinstance(params_or_p, ModelParams) else float(params_or_p)


def to_scaled(params_or_p, x, t=0.0):
    """Physical (x, t) -> growth-scaled (sqrt(p) x, p t)."""
    p = _p_of(params_or_p)
    return np.sqrt(p) * x, p * t


def from_scaled(params_or_p, x_hat, t_hat=0.0):
    p = _p_of(params_or_p)
    return x_hat / np.sqrt(p), t_hat / p


def speed_to_scaled(params_or_p, c):
    return c / np.sqrt(_p_of(params_or_p))


def speed_from_scaled(params_or_p, c_hat):
    return c_hat * np.sqrt(_p_of(params_or_p))
