"""Front tracking, dispersion relation, minimum speeds, and run classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .exceptions import DomainError, FrontNotFound
from .model import FluxKind, ModelParams, flux_velocity, from_scaled, speed_from_scaled

if TYPE_CHECKING:
    from .solver import GridSpec, SimState, Trajectory

__all__ = [
    "FrontTrace",
    "SpeedFit",
    "MinSpeed",
    "WaveMetrics",
    "SolutionType",
    "ClassifierSettings",
    "front_position",
    "front_speed",
    "decay_rate_at_front",
    "dispersion_speed",
    "interior_argmin",
    "min_speed",
    "min_speed_arctan",
    "min_speed_numeric",
    "signal_peak",
    "matching_distance",
    "stationary_maxima",
    "classify",
]


@dataclass
class FrontTrace:
    """Time series of the front tip x* (where rho = threshold) and the
    decay rate of rho measured there."""

    threshold: float = 1e-20
    samples: list = field(default_factory=list)

    def append(self, t, x_star, decay_rate=math.nan):
        if self.samples and t <= self.samples[-1][0]:
            raise DomainError("front trace times must increase")
        self.samples.append((float(t), float(x_star), float(decay_rate)))

    def __len__(self):
        return len(self.samples)

    @property
    def times(self):
        return np.array([s[0] for s in self.samples])

    @property
    def positions(self):
        return np.array([s[1] for s in self.samples])

    @property
    def decay_rates(self):
        return np.array([s[2] for s in self.samples])


def front_position(rho, grid: GridSpec, threshold=1e-20):
    """Rightmost downward crossing of ``threshold``.

    Cell values sit at cell centres; the crossing is interpolated linearly
    in log rho between the two straddling cells.
    """
    rho = np.asarray(rho)
    above = np.flatnonzero(rho >= threshold)
    if above.size == 0:
        raise FrontNotFound("density is below the threshold everywhere")
    k = above[-1]
    if k == rho.size - 1:
        raise FrontNotFound("density exceeds the threshold at the right wall")
    r0, r1 = rho[k], rho[k + 1]
    if r1 > 0:
        frac = (math.log(threshold) - math.log(r0)) / (math.log(r1) - math.log(r0))
    else:
        frac = (r0 - threshold) / r0
    return (k + 0.5 + frac) * grid.dx


def decay_rate_at_front(rho, grid: GridSpec, x_star):
    """-(d log rho / dx) by a centred difference in the cell containing x*.

    Returned as a positive number for a decaying tail.
    """
    rho = np.asarray(rho)
    j = int(math.floor(x_star / grid.dx))
    if j < 1 or j > rho.size - 4:
        raise DomainError(f"x*={x_star:g} is too close to a wall for a centred difference")
    lo, hi = rho[j - 1], rho[j + 1]
    if lo <= 0 or hi <= 0:
        raise DomainError("non-positive density on the decay-rate stencil")
    return -(math.log(hi) - math.log(lo)) / (2.0 * grid.dx)


class SpeedFit(NamedTuple):
    speed: float
    residual_rms: float
    steady: bool
    samples: int


def front_speed(trace: FrontTrace, window, min_samples=10, steady_tol=0.05):
    """Least-squares slope of x*(t) over ``window = (t_begin, t_end)``.

    The fit is flagged non-steady when the residual RMS exceeds
    ``steady_tol * |c| * (t_end - t_begin)``.
    """
    t, x = trace.times, trace.positions
    t_begin, t_end = window
    eps = 1e-9 * max(1.0, abs(t_end))
    m = (t >= t_begin - eps) & (t <= t_end + eps)
    if m.sum() < min_samples:
        raise DomainError(f"only {int(m.sum())} front samples in window {window}; need {min_samples}")
    tw, xw = t[m], x[m]
    A = np.column_stack([tw, np.ones_like(tw)])
    (c, b), *_ = np.linalg.lstsq(A, xw, rcond=None)
    rms = float(np.sqrt(np.mean((xw - (c * tw + b)) ** 2)))
    steady = rms <= steady_tol * abs(c) * (t_end - t_begin)
    return SpeedFit(float(c), rms, bool(steady), int(m.sum()))


def dispersion_speed(lam, params: ModelParams):
    """c(lambda) = lambda + p/lambda - U(min(lambda, 1/sqrt d))."""
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("decay rate must be positive")
    out = lam + params.p / lam - flux_velocity(params.flux, np.minimum(lam, 1.0 / math.sqrt(params.d)))
    return out[()] if np.ndim(out) == 0 else out


class MinSpeed(NamedTuple):
    speed: float
    branch: str  # "fast-signal" (dp > 1), "kink" (lambda = 1/sqrt d), or "interior"
    argmin: float


def interior_argmin(params: ModelParams):
    """Stationary point Lambda of lambda + p/lambda - U(lambda) for the arctan flux."""
    p, delta = params.p, params.flux.delta
    k = 2.0 * params.chi / math.pi
    b = p - delta**2 + k * delta
    return math.sqrt((b + math.sqrt(b * b + 4.0 * delta**2 * p)) / 2.0)


def min_speed_arctan(params: ModelParams) -> MinSpeed:
    """Closed-form minimum of the dispersion relation for the arctan flux."""
    if params.flux.kind is not FluxKind.ARCTAN:
        raise DomainError("min_speed_arctan needs the arctan flux")
    p, d, delta = params.p, params.d, params.flux.delta
    k = 2.0 * params.chi / math.pi
    sd = math.sqrt(d)
    u_kink = k * math.atan(1.0 / (sd * delta))
    dp = d * p
    if dp > 1.0:
        return MinSpeed(2.0 * math.sqrt(p) - u_kink, "fast-signal", math.sqrt(p))
    if 1.0 - k / (delta + 1.0 / (d * delta)) < dp:
        return MinSpeed(1.0 / sd + p * sd - u_kink, "kink", 1.0 / sd)
    lam = interior_argmin(params)
    return MinSpeed(lam + p / lam - k * math.atan(lam / delta), "interior", lam)


def min_speed(params: ModelParams):
    """Minimum of c(lambda) for either flux; the stiff flux gives 2 sqrt(p) - chi."""
    if params.flux.kind is FluxKind.ARCTAN:
        return min_speed_arctan(params).speed
    return 2.0 * math.sqrt(params.p) - params.chi


def min_speed_numeric(params: ModelParams, lam_range=(1e-3, 1e3), points=100_000, xtol=1e-8):
    """Brute-force minimum of c(lambda): log-spaced scan then golden section."""
    from scipy.optimize import minimize_scalar

    lam = np.geomspace(lam_range[0], lam_range[1], points)
    c = dispersion_speed(lam, params)
    i = int(np.argmin(c))
    lo, hi = lam[max(i - 1, 0)], lam[min(i + 1, points - 1)]
    res = minimize_scalar(
        lambda v: float(dispersion_speed(v, params)),
        bracket=(lo, lam[i], hi) if 0 < i < points - 1 else None,
        bounds=None,
        method="golden",
        tol=xtol / max(lam[i], 1e-300),
    )
    best_lam, best_c = (float(res.x), float(res.fun)) if res.fun <= c[i] else (float(lam[i]), float(c[i]))
    return MinSpeed(best_c, "numeric", best_lam)


class SolutionType(enum.Enum):
    I_MonotoneTW = "I"
    II_NonmonotoneTW = "II"
    III_BackwardTW = "III"
    IV_PeriodicWithFront = "IV"
    V_LocalizedSpikes = "V"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class WaveMetrics:
    """Summary of a run in physical units (see ``scaled`` for hatted ones)."""

    c_star: float
    lambda_star: float
    c_dispersion: float
    c_min: float
    rho_max: float
    peak_count: int
    steady: bool
    direction: int  # sign of c_star; Type IV fronts may move either way

    def scaled(self, p):
        sp = math.sqrt(p)
        return {
            "c_star_hat": self.c_star / sp,
            "lambda_star_hat": self.lambda_star / sp,
            "c_dispersion_hat": self.c_dispersion / sp,
            "c_min_hat": self.c_min / sp,
            "rho_max": self.rho_max,
        }


@dataclass(frozen=True)
class ClassifierSettings:
    """Thresholds of the decision tree. Lengths, times and speeds are hatted."""

    translation_tol: float = 1e-3  # L-inf mismatch relative to rho_max
    monotone_tol: float = 1e-3
    pattern_level: float = 1.05
    bulk_start: float = 100.0
    bulk_margin: float = 50.0
    min_pattern_peaks: int = 3
    stall_speed: float = 0.02
    spike_level: float = 1.5
    min_spikes: int = 2
    fit_length: float = 100.0  # default fit window is the last fit_length of the run


def _local_maxima(values, level):
    """Indices of interior local maxima strictly above ``level``."""
    v = np.asarray(values)
    mid = v[1:-1]
    return np.flatnonzero((mid > v[:-2]) & (mid >= v[2:]) & (mid > level)) + 1


def _parabolic(values, i, dx):
    """Centre position of the parabola through cells i-1, i, i+1."""
    a, b, c = values[i - 1], values[i], values[i + 1]
    den = a - 2.0 * b + c
    off = 0.5 * (a - c) / den if den != 0 else 0.0
    return (i + 0.5 + off) * dx


def stationary_maxima(earlier, later, grid: GridSpec, level, window=(0.0, math.inf)):
    """Positions (physical) of maxima of ``later`` above ``level`` inside
    ``window`` that moved less than one cell since ``earlier``."""
    def located(v):
        idx = _local_maxima(v, level)
        x = np.array([_parabolic(v, i, grid.dx) for i in idx])
        return x[(x >= window[0]) & (x <= window[1])] if x.size else x

    x0, x1 = located(earlier), located(later)
    if x0.size == 0 or x1.size == 0:
        return np.empty(0)
    drift = np.abs(x1[:, None] - x0[None, :]).min(axis=1)
    return x1[drift < grid.dx]


def _downward_crossing(values, level, grid: GridSpec, start=0):
    """Rightmost downward crossing of ``level`` at or right of cell ``start``
    (linear interpolation between cell centres)."""
    v = np.asarray(values)
    above = np.flatnonzero(v[start:] >= level)
    if above.size == 0:
        raise FrontNotFound(f"no crossing of level {level:g}")
    k = start + above[-1]
    if k == v.size - 1:
        raise FrontNotFound(f"level {level:g} exceeded at the right wall")
    return (k + 0.5 + (v[k] - level) / (v[k] - v[k + 1])) * grid.dx


def signal_peak(S, grid: GridSpec):
    """Position of the rightmost interior maximum of S, refined by a parabola."""
    S = np.asarray(S)
    idx = _local_maxima(S, -math.inf)
    if idx.size == 0:
        raise FrontNotFound("signal has no interior maximum")
    return _parabolic(S, idx[-1], grid.dx)


def matching_distance(state: SimState, grid: GridSpec, rho_c):
    """x_c - x_S: from the signal peak to the rightmost downward crossing of
    rho_c located right of it."""
    x_s = signal_peak(state.S, grid)
    x_c = _downward_crossing(state.rho, rho_c, grid, start=int(x_s / grid.dx))
    return x_c - x_s


def _translation_mismatch(earlier, later, grid: GridSpec, level):
    """L-inf distance between ``later`` and ``earlier`` shifted by the
    displacement of their rightmost ``level`` crossings, relative to max(later)."""
    shift = (_downward_crossing(later, level, grid) - _downward_crossing(earlier, level, grid)) / grid.dx
    x = np.arange(later.size, dtype=float)
    src = x - shift
    ok = (src >= 0) & (src <= x[-1])
    moved = np.interp(src[ok], x, earlier)
    return float(np.max(np.abs(later[ok] - moved)) / np.max(later))


def _metrics(trajectory: Trajectory, params: ModelParams, grid: GridSpec, window, settings):
    p = params.p
    fit = front_speed(trajectory.front_trace, window)
    t = trajectory.front_trace.times
    lam_all = trajectory.front_trace.decay_rates
    inside = np.flatnonzero(t <= window[1] + 1e-9 * max(1.0, abs(window[1])))
    lam = float(lam_all[inside[-1]])
    c_disp = float(dispersion_speed(lam, params)) if lam > 0 else math.nan
    c_min = min_speed(params)
    rho = trajectory.snapshots[-1][1].rho
    peaks = _local_maxima(rho, 1.0 + settings.monotone_tol)
    stall = speed_from_scaled(p, settings.stall_speed)
    direction = 0 if abs(fit.speed) < stall else int(math.copysign(1, fit.speed))
    return WaveMetrics(fit.speed, lam, c_disp, c_min, float(rho.max()), int(peaks.size), fit.steady, direction)


def classify(
    trajectory: Trajectory,
    params: ModelParams,
    grid: GridSpec,
    settings: ClassifierSettings | None = None,
    fit_window=None,
):
    """Assign one of the five solution types using the last two snapshots.

    ``fit_window`` is a physical time interval for the speed fit; by default
    the final ``settings.fit_length`` (hatted) of the trace. Returns
    ``(SolutionType, WaveMetrics)``; ``metrics`` is None when the trace is
    too short to fit a speed.
    """
    settings = settings or ClassifierSettings()
    p = params.p
    if len(trajectory.snapshots) < 2:
        raise DomainError("classification needs at least two snapshots")
    (_, early), (_, late) = trajectory.snapshots[-2:]
    if fit_window is None:
        t_last = late.time
        fit_window = (t_last - from_scaled(p, 0.0, settings.fit_length)[1], t_last)
    try:
        m = _metrics(trajectory, params, grid, fit_window, settings)
    except (DomainError, IndexError):
        return SolutionType.UNCLASSIFIED, None

    length = lambda v: from_scaled(p, v)[0]  # noqa: E731
    try:
        x_star = front_position(late.rho, grid, trajectory.front_trace.threshold)
    except FrontNotFound:
        return SolutionType.UNCLASSIFIED, m

    # a stalled front also passes the translation test, so spikes come first
    if m.direction == 0:
        spikes = stationary_maxima(early.rho, late.rho, grid, settings.spike_level, (0.0, x_star))
        if spikes.size >= settings.min_spikes:
            return SolutionType.V_LocalizedSpikes, m

    try:
        mismatch = _translation_mismatch(early.rho, late.rho, grid, params.rho_c)
    except FrontNotFound:
        mismatch = math.inf
    if mismatch <= settings.translation_tol:
        if m.c_star < 0:
            return SolutionType.III_BackwardTW, m
        if m.peak_count == 0:
            return SolutionType.I_MonotoneTW, m
        return SolutionType.II_NonmonotoneTW, m

    if m.direction != 0:
        bulk = (length(settings.bulk_start), x_star - length(settings.bulk_margin))
        pattern = stationary_maxima(early.rho, late.rho, grid, settings.pattern_level, bulk)
        if pattern.size >= settings.min_pattern_peaks:
            return SolutionType.IV_PeriodicWithFront, m
    return SolutionType.UNCLASSIFIED, m
