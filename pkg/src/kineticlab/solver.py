"""Strang-split time stepper for the kinetic jump equation.

One step of size ``dt`` applies a half step of free transport, a full
collision step, and another half transport step.  Transport is exact
(a Fourier phase shift per velocity column); the collision step uses
the dense velocity operator, either explicit Euler or implicit Euler
via an LU factorization.

The kernel is frozen at ``(t, x) = (t_freeze, 0)`` when the velocity
matrix is assembled, so kernels with genuine (t, x) dependence are
treated in frozen-coefficient fashion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .fields import PhaseGrid, ZeroExtension
from .fundsol import j0_table
from .kernels import KernelSpec
from .operators import OperatorMatrix, assemble_operator_matrix

__all__ = [
    "SolverConfig",
    "Trajectory",
    "trajectory_field",
    "step_transport",
    "step_collision",
    "solve",
    "fundamental_approx",
    "mollified_delta",
]


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    ``scheme`` is "explicit" (forward Euler), "implicit" (backward
    Euler) or "cn" (trapezoidal; second order and unconditionally
    stable, the default).  ``torus=True``
    closes the velocity box periodically, which conserves mass exactly
    up to rounding; otherwise mass leaks through the far field at the
    analytically expected rate, tracked in the diagnostics.
    """

    dt: float
    steps: int
    scheme: str = "cn"
    torus: bool = True
    save_every: int = 1
    t_freeze: float = 0.0

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 1:
            raise ValueError("need dt > 0 and steps >= 1")
        if self.scheme not in ("explicit", "implicit", "cn"):
            raise ValueError("scheme must be 'explicit', 'implicit' or 'cn'")
        if self.save_every < 1:
            raise ValueError("save_every must be positive")


@dataclass
class Trajectory:
    """Saved slices plus per-step diagnostics."""

    grid: PhaseGrid
    times: list = field(default_factory=list)
    slices: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    minimum: list = field(default_factory=list)
    maximum: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    leak_total: float = 0.0

    def record(self, t: float, f: np.ndarray, keep_slice: bool):
        g = self.grid
        self.times.append(t)
        self.mass.append(float(f.sum() * g.dx * g.dv))
        self.minimum.append(float(f.min()))
        self.maximum.append(float(f.max()))
        self.l2.append(float(np.sqrt((f * f).sum() * g.dx * g.dv)))
        if keep_slice:
            self.slices.append(f.copy())

    @property
    def final(self) -> np.ndarray:
        return self.slices[-1]

    def mass_drift(self) -> float:
        """Mass change corrected for the tracked far-field leak."""
        return abs(self.mass[-1] + self.leak_total - self.mass[0])


def step_transport(f: np.ndarray, dt: float, grid: PhaseGrid) -> np.ndarray:
    """Exact free transport ``f(x, v) -> f(x - dt v, v)`` by Fourier
    phase shift (periodic in x)."""
    phi = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
    Fh = np.fft.fft(f, axis=0)
    Fh *= np.exp(-1j * phi[:, None] * dt * grid.v_axis[None, :])
    return np.fft.ifft(Fh, axis=0).real


def step_collision(f: np.ndarray, dt: float, op: OperatorMatrix, scheme: str, lu=None) -> np.ndarray:
    """One collision step on a ``(nx, nv)`` slice."""
    if scheme == "explicit":
        return f + dt * op.apply(f)
    if lu is None:
        eff = dt if scheme == "implicit" else 0.5 * dt
        lu = lu_factor(np.eye(op.matrix.shape[0]) - eff * op.matrix)
    if scheme == "implicit":
        rhs = f + dt * op.gain[None, :]
    else:
        rhs = f + 0.5 * dt * (f @ op.matrix.T) + dt * op.gain[None, :]
    return lu_solve(lu, rhs.T).T


def solve(
    k: KernelSpec,
    f0: np.ndarray,
    grid: PhaseGrid,
    config: SolverConfig,
    closure=None,
    source=None,
) -> Trajectory:
    """Run the Strang-split scheme from the slice ``f0``.

    ``source`` may be ``None``, a slice, or a callable of time; it is
    added with the collision step.  The collision matrix is assembled
    once (kernel frozen at ``t_freeze``).
    """
    if closure is None:
        closure = ZeroExtension()
    f = np.asarray(f0, dtype=float).copy()
    if f.shape != (grid.nx, grid.nv):
        raise ValueError("initial slice shape does not match grid")
    op = assemble_operator_matrix(k, grid, t=config.t_freeze, x=0.0, closure=closure, torus=config.torus)
    lu = None
    if config.scheme == "implicit":
        lu = lu_factor(np.eye(grid.nv) - config.dt * op.matrix)
    elif config.scheme == "cn":
        lu = lu_factor(np.eye(grid.nv) - 0.5 * config.dt * op.matrix)

    traj = Trajectory(grid=grid)
    traj.record(0.0, f, keep_slice=True)
    for n in range(1, config.steps + 1):
        f = step_transport(f, 0.5 * config.dt, grid)
        before = f.sum() * grid.dx * grid.dv
        f = step_collision(f, config.dt, op, config.scheme, lu=lu)
        traj.leak_total += float(before - f.sum() * grid.dx * grid.dv)
        if source is not None:
            t_half = (n - 0.5) * config.dt
            h = source(t_half) if callable(source) else np.asarray(source, dtype=float)
            f = f + config.dt * h
            traj.leak_total -= config.dt * float(h.sum() * grid.dx * grid.dv)
        f = step_transport(f, 0.5 * config.dt, grid)
        traj.record(n * config.dt, f, keep_slice=(n % config.save_every == 0 or n == config.steps))
    return traj


def trajectory_field(traj: Trajectory, farfield=None) -> "PhaseField":
    """Bundle the saved slices into a time-resolved field."""
    from .fields import PhaseField

    g = traj.grid
    if len(traj.slices) != len(traj.times):
        raise ValueError("trajectory must be run with save_every=1 to bundle a field")
    grid = PhaseGrid(nt=len(traj.slices), nx=g.nx, nv=g.nv, x_period=g.x_period,
                     v_extent=g.v_extent, t0=traj.times[0], t1=traj.times[-1], d=g.d)
    values = np.stack(traj.slices, axis=0)
    return PhaseField(grid, values, farfield)


def mollified_delta(grid: PhaseGrid, s: float, x0: float = 0.0, v0: float = 0.0, width: float | None = None) -> np.ndarray:
    """Kinetic Gaussian approximating a point mass at ``(x0, v0)``.

    The velocity width defaults to ``2 max(dx^{1/(1+2s)}, dv)`` and the
    position width is its ``(1 + 2s)`` power, matching the anisotropic
    scaling.  Normalized to unit discrete mass.
    """
    if width is None:
        width = 2.0 * max(grid.dx ** (1.0 / (1 + 2 * s)), grid.dv)
    sig_v = width
    sig_x = width ** (1 + 2 * s)
    X, V = np.meshgrid(grid.x_axis, grid.v_axis, indexing="ij")
    g = np.exp(-0.5 * ((X - x0) / sig_x) ** 2 - 0.5 * ((V - v0) / sig_v) ** 2)
    g /= g.sum() * grid.dx * grid.dv
    return g


def fundamental_approx(
    k: KernelSpec,
    grid: PhaseGrid,
    T: float,
    config: SolverConfig,
    s: float,
    n_freq: int = 1024,
) -> dict:
    """Evolve a mollified point mass and compare with the explicit
    fundamental solution at time ``T``.

    The comparison convolves the tabulated propagator with the same
    mollifier (sheared convolution at time ``T``), so the two fields
    approximate the same object.  The reference table needs a finer
    frequency grid than the default: the slow velocity tails otherwise
    alias back into the box at the percent level.  Reports the sup-relative error on the
    region where the reference exceeds 1% of its peak, and the mass
    drift of the run.
    """
    from .fundsol import modified_convolution

    if abs(config.dt * config.steps - T) > 1e-12:
        raise ValueError("config horizon does not match T")
    f0 = mollified_delta(grid, s)
    traj = solve(k, f0, grid, config)
    fT = traj.final

    tab = j0_table(T, s, n_freq)
    X, V = np.meshgrid(grid.x_axis, grid.v_axis, indexing="ij")
    Jt = tab.sample(X, V)
    ref = modified_convolution(f0, Jt, T, grid.dx, grid.dv, warn=False)

    peak = ref.max()
    mask = ref > 0.01 * peak
    rel = np.abs(fT[mask] - ref[mask]) / ref[mask]
    return {
        "sup_rel_error": float(rel.max()),
        "mass_drift": traj.mass_drift(),
        "mass_initial": traj.mass[0],
        "mass_final": traj.mass[-1],
        "reference_peak": float(peak),
        "computed_peak": float(fT.max()),
    }
