"""Finite-difference integrator for the flux-limited Keller-Segel system.

The density is advanced explicitly (centred advection with arithmetic-mean
face densities, 3-point diffusion) with the growth term taken semi-implicitly;
the signal S solves the discrete screened Poisson problem -d S'' + S = rho
exactly at every step. Everything here works in physical units.
"""

from __future__ import annotations

import functools
import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import DomainError, FrontNotFound, PositivityError
from .model import FluxKind, ModelParams, from_scaled, to_scaled
from .waves import FrontTrace, decay_rate_at_front, front_position

log = logging.getLogger(__name__)

__all__ = [
    "GridSpec",
    "SimState",
    "SnapshotSchedule",
    "Trajectory",
    "init_state",
    "helmholtz_solve",
    "convolution_oracle",
    "step",
    "run",
    "write_snapshot",
    "read_snapshot",
]

S_FLOOR = 1e-300


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh on [0, L] with ``cells`` intervals and fixed time step.

    Walls impose rho = S = ``left_value`` at x = 0 and ``right_value`` at
    x = L through ghost cells 2 g - rho; the model problem uses (1, 0).
    """

    L: float
    cells: int
    dt: float
    left_value: float = 1.0
    right_value: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"domain length must be positive, got {self.L}")
        if int(self.cells) != self.cells or self.cells < 3:
            raise DomainError(f"need an integer number of cells >= 3, got {self.cells}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"time step must be positive, got {self.dt}")

    @classmethod
    def from_scaled(cls, p, L_hat=1000.0, cells=10000, dt_hat=None, **kw):
        """Grid from growth-scaled sizes; default dt_hat = dx_hat**2 / 4."""
        dx_hat = L_hat / cells
        if dt_hat is None:
            dt_hat = dx_hat**2 / 4.0
        L, dt = from_scaled(p, L_hat, dt_hat)
        return cls(float(L), int(cells), float(dt), **kw)

    @property
    def dx(self):
        return self.L / self.cells

    @property
    def nodes(self):
        """Left node x_i = i dx of each cell."""
        return np.arange(self.cells) * self.dx

    @property
    def centers(self):
        return (np.arange(self.cells) + 0.5) * self.dx


@dataclass(frozen=True, eq=False)
class SimState:
    rho: np.ndarray
    S: np.ndarray
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        if self.rho.shape != self.S.shape or self.rho.ndim != 1:
            raise DomainError("rho and S must be 1-d arrays of equal length")

    def copy(self):
        return SimState(self.rho.copy(), self.S.copy(), self.time, self.step)


@dataclass(frozen=True)
class SnapshotSchedule:
    times: tuple = ()

    def __post_init__(self):
        t = tuple(float(v) for v in self.times)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", t)


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    front_trace: FrontTrace = field(default_factory=FrontTrace)
    final: SimState | None = None
    status: str = "ok"
    message: str = ""

    def snapshot_at(self, t, tol=None):
        for ts, st in self.snapshots:
            if abs(ts - t) <= (tol if tol is not None else 1e-9 * max(1.0, abs(t))):
                return st
        raise KeyError(t)


@functools.lru_cache(maxsize=16)
def _helmholtz_factor(cells, dx, d):
    c = d / dx**2
    off = -c
    cp, inv = _kernels.thomas_factor(cells, off, 1.0 + 3.0 * c, 1.0 + 2.0 * c, 1.0 + 3.0 * c)
    cp.flags.writeable = False
    inv.flags.writeable = False
    return off, cp, inv


def helmholtz_solve(rho, d, grid: GridSpec):
    """Solve -d (S[i-1] - 2 S[i] + S[i+1]) / dx^2 + S[i] = rho[i].

    Ghost values follow the wall values of ``grid``: S[-1] = 2 g_L - S[0],
    S[I] = 2 g_R - S[I-1].
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.cells,):
        raise DomainError(f"rho has shape {rho.shape}, grid has {grid.cells} cells")
    if not np.all(np.isfinite(rho)):
        raise DomainError("helmholtz_solve: non-finite density")
    if not d > 0:
        raise DomainError(f"diffusivity must be positive, got {d}")
    off, cp, inv = _helmholtz_factor(grid.cells, grid.dx, float(d))
    rhs = rho.copy()
    rhs[0] += 2.0 * grid.left_value * (-off)
    rhs[-1] += 2.0 * grid.right_value * (-off)
    S = np.empty_like(rhs)
    _kernels.thomas_solve(rhs, off, cp, inv, S)
    return S


def convolution_oracle(rho, d, grid: GridSpec):
    """Free-space Green's-function representation of S on the cell centres.

    S(x) = 1/(2 sqrt d) * integral exp(-|x - z| / sqrt d) rho(z) dz, by the
    trapezoid rule. Only meaningful for rho supported away from the walls.
    """
    from scipy.signal import fftconvolve

    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise DomainError("convolution_oracle: non-finite density")
    n = rho.size
    w = np.full(n, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    offsets = np.arange(-(n - 1), n) * grid.dx
    kernel = np.exp(-np.abs(offsets) / math.sqrt(d)) / (2.0 * math.sqrt(d))
    full = fftconvolve(rho * w, kernel, mode="full")
    return full[n - 1 : 2 * n - 1]


def init_state(grid: GridSpec, L0, d):
    """Step profile rho = 1 on nodes x_i <= L0, 0 beyond; S solved from rho."""
    if not (0 < L0 < grid.L):
        raise DomainError(f"initial front L0={L0} must lie inside (0, {grid.L})")
    # relative slack so that L0 landing exactly on a node counts as inside
    rho = np.where(grid.nodes <= L0 * (1 + 1e-12), 1.0, 0.0)
    return SimState(rho, helmholtz_solve(rho, d, grid), 0.0, 0)


class _Stepper:
    """Holds work buffers for repeated in-place steps on one grid."""

    def __init__(self, params: ModelParams, grid: GridSpec):
        if grid.dt * params.p >= 1.0:
            raise DomainError(f"dt * p = {grid.dt * params.p:g} must be < 1")
        self.params = params
        self.grid = grid
        self.off, self.cp, self.inv = _helmholtz_factor(grid.cells, grid.dx, float(params.d))
        n = grid.cells
        self._ext = np.empty(n + 2)
        self._U = np.empty(n + 1)
        self._new = np.empty(n)
        flux = params.flux
        self._stiff = flux.kind is FluxKind.STIFF_SIGN
        self._amp = flux.chi if self._stiff else 2.0 * flux.chi / math.pi
        self._scale = 1.0 / grid.dx if self._stiff else 1.0 / (grid.dx * flux.delta)

    def face_velocity(self, S):
        """U on faces 0..I from backward differences of log S (ghosts included)."""
        g = self.grid
        ext, U = self._ext, self._U
        ext[1:-1] = S
        ext[0] = 2.0 * g.left_value - S[0]
        ext[-1] = 2.0 * g.right_value - S[-1]
        np.maximum(ext, S_FLOOR, out=ext)
        np.log(ext, out=ext)
        np.subtract(ext[1:], ext[:-1], out=U)
        if self._stiff:
            np.sign(U, out=U)
        else:
            U *= self._scale
            np.arctan(U, out=U)
        U *= self._amp
        return U

    def advance(self, rho, S, step_index):
        """One in-place step of (rho, S)."""
        g = self.grid
        U = self.face_velocity(S)
        code, cell = _kernels.update(
            rho, S, U, g.dx, g.dt, self.params.p, self.params.rho_c,
            g.left_value, g.right_value, self.off, self.cp, self.inv, self._new,
        )
        if code != _kernels.OK:
            what = {
                _kernels.NEGATIVE_DENSITY: "positivity lost: rho < -1e-12",
                _kernels.NON_FINITE: "non-finite density",
                _kernels.NEGATIVE_SIGNAL: "positivity lost: S < 0",
            }[code]
            raise PositivityError(f"{what} in cell {cell}", step=step_index)


def step(state: SimState, params: ModelParams, grid: GridSpec) -> SimState:
    """Return the state one time step later; the input is left untouched."""
    if state.rho.shape != (grid.cells,):
        raise DomainError("state does not match grid")
    rho, S = state.rho.copy(), state.S.copy()
    _Stepper(params, grid).advance(rho, S, state.step + 1)
    return SimState(rho, S, state.time + grid.dt, state.step + 1)


def run(
    state: SimState,
    params: ModelParams,
    grid: GridSpec,
    t_end,
    schedule: SnapshotSchedule | None = None,
    sample_every=100,
    threshold=1e-20,
    wall_cells=50,
    max_wall_time=None,
) -> Trajectory:
    """Integrate from ``state`` until ``t_end``.

    The front tip (rho = ``threshold``) and the decay rate there are sampled
    every ``sample_every`` steps and at the final step. Integration stops
    early with ``status="aborted"`` if the tip comes within ``wall_cells``
    cells of a wall, or ``status="timeout"`` once ``max_wall_time`` seconds
    have elapsed. Solver errors propagate with the partial trajectory
    attached as ``err.trajectory``.
    """
    schedule = schedule or SnapshotSchedule()
    traj = Trajectory(front_trace=FrontTrace(threshold=threshold))
    n_steps = max(0, math.ceil((t_end - state.time) / grid.dt - 1e-9))
    t0, k0 = state.time, state.step
    targets = {}
    for ts in schedule.times:
        k = int(round((ts - t0) / grid.dt))
        if 0 <= k <= n_steps:
            targets.setdefault(k, ts)

    rho, S = state.rho.copy(), state.S.copy()
    stepper = _Stepper(params, grid)
    lo_wall, hi_wall = wall_cells * grid.dx, grid.L - wall_cells * grid.dx
    started = _time.monotonic()

    def current(k):
        return SimState(rho.copy(), S.copy(), t0 + k * grid.dt, k0 + k)

    def sample(k):
        t = t0 + k * grid.dt
        try:
            xs = front_position(rho, grid, threshold)
        except FrontNotFound:
            return True
        try:
            lam = decay_rate_at_front(rho, grid, xs)
        except (DomainError, FrontNotFound):
            lam = math.nan
        traj.front_trace.append(t, xs, lam)
        if not (lo_wall <= xs <= hi_wall):
            traj.status = "aborted"
            traj.message = f"front at x={xs:.6g} within {wall_cells} cells of a wall at t={t:.6g}"
            return False
        return True

    if 0 in targets:
        traj.snapshots.append((targets[0], current(0)))
    k = 0
    try:
        if n_steps > 0 and not sample(0):
            n_steps = 0
        while k < n_steps:
            k += 1
            stepper.advance(rho, S, k0 + k)
            if k in targets:
                traj.snapshots.append((targets[k], current(k)))
            if k % sample_every == 0 or k == n_steps:
                if not sample(k):
                    break
                if max_wall_time is not None and _time.monotonic() - started > max_wall_time:
                    traj.status = "timeout"
                    traj.message = f"wall-clock budget {max_wall_time}s exceeded at t={t0 + k * grid.dt:.6g}"
                    log.warning(traj.message)
                    break
    except PositivityError as err:
        traj.status = "aborted"
        traj.message = str(err)
        traj.final = current(k - 1) if k else current(0)
        err.trajectory = traj
        raise
    if traj.status == "aborted":
        log.warning(traj.message)
    traj.final = current(k)
    return traj


def write_snapshot(path, state: SimState, grid: GridSpec, p):
    """Plain-text snapshot: ``# t_hat=<t>`` then ``x_hat,rho,S`` per cell."""
    x_hat, t_hat = to_scaled(p, grid.centers, state.time)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# t_hat={t_hat:.17g}\n")
        for x, r, s in zip(x_hat, state.rho, state.S):
            fh.write(f"{x:.17g},{r:.17g},{s:.17g}\n")


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`: returns (t_hat, x_hat, rho, S)."""
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("# t_hat="):
            raise ValueError(f"{path}: missing '# t_hat=' header")
        t_hat = float(head.split("=", 1)[1])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return t_hat, data[:, 0], data[:, 1], data[:, 2]
