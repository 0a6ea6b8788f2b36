"""Exponential barrier, its supersolution inequality, and decay envelopes.

The barrier is the explicit weight

    H(t, x, v) = exp(-m(t, x, v) * log(rho^{2s} / (k delta(t)))),
    m = max{1, (1/(3 rho)) max(|v - w0|, |x - y0 - (sigma + t - 2 tau0) w0|^{1/(1+2s)})},
    delta(t) = 2 (sigma - tau0) - (t - tau0),

which for large enough ``k`` satisfies

    TH + c int_{B_rho(v)} (sqrt(H)(v) - sqrt(H)(w))^2 [K(v,w) + K(w,v)] dw <= 0,

where ``T = d/dt + v d/dx`` is the transport derivative.  The module
measures this residual pointwise (analytic branch-wise transport term,
piecewise Gauss-Legendre quadrature for the jump term), finds the
threshold ``k*`` by bisection, checks the weighted energy decay in its
kinetic and parabolic variants, and fits the polynomial / exponential
decay envelopes of the fundamental solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fundsol import FundamentalSolutionTable, peak_decay_exponent
from .harnack import lower_bound_check
from .kernels import KernelSpec
from .solver import Trajectory

__all__ = [
    "BarrierParams",
    "barrier_eval",
    "barrier_values",
    "barrier_region",
    "barrier_residual",
    "barrier_residual_parts",
    "k_threshold",
    "region_samples",
    "aronson_energy_check",
    "gamma_of",
    "rho_choice",
    "DecayEnvelope",
    "decay_envelope_check",
    "meyers_check",
]


@dataclass(frozen=True)
class BarrierParams:
    """Parameters of the barrier; requires ``sigma - tau0 <= rho^{2s}/(4k)``."""

    rho: float
    k: float
    tau0: float
    sigma: float
    y0: float
    w0: float
    s: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 < self.s < 1.0:
            raise ValueError("s must lie in (0, 1)")
        if not self.tau0 < self.sigma:
            raise ValueError("need tau0 < sigma")
        if self.sigma - self.tau0 > self.rho ** (2 * self.s) / (4 * self.k) * (1 + 1e-12):
            raise ValueError("need sigma - tau0 <= rho^{2s}/(4k)")

    def delta(self, t):
        return 2.0 * (self.sigma - self.tau0) - (np.asarray(t, dtype=float) - self.tau0)

    def log_factor(self, t):
        """``log(rho^{2s} / (k delta(t)))``; positive on [tau0, sigma]."""
        return np.log(self.rho ** (2 * self.s) / (self.k * self.delta(t)))

    def spatial_arg(self, t, x):
        """``|x - y0 - (sigma + t - 2 tau0) w0|`` (before the 1/(1+2s) root)."""
        t = np.asarray(t, dtype=float)
        return np.abs(np.asarray(x, dtype=float) - self.y0 - (self.sigma + t - 2 * self.tau0) * self.w0)


def _multiplier(p: BarrierParams, t, x, v):
    """The exponent multiplier m and its two competing branch values."""
    gv = np.abs(np.asarray(v, dtype=float) - p.w0) / (3 * p.rho)
    gx = p.spatial_arg(t, x) ** (1.0 / (1 + 2 * p.s)) / (3 * p.rho)
    return np.maximum(1.0, np.maximum(gv, gx)), gv, gx


def barrier_values(p: BarrierParams, t, x, v):
    """Vectorized barrier evaluation; ``t`` must lie in [tau0, sigma]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < p.tau0 - 1e-12) or np.any(t > p.sigma + 1e-12):
        raise ValueError("time outside [tau0, sigma]")
    m, _, _ = _multiplier(p, t, x, v)
    return np.exp(-m * p.log_factor(t))


def barrier_eval(p: BarrierParams, z) -> float:
    """Scalar barrier value at a phase point ``z = (t, x, v)``."""
    t, x, v = float(z[0]), float(z[1]), float(z[2])
    return float(barrier_values(p, t, x, v))


def barrier_region(p: BarrierParams, z) -> int:
    """Case index 1..6 of the barrier's region decomposition.

    Thresholds are ``2 rho, 3 rho`` for the velocity distance and
    ``3 rho`` (and the velocity distance) for the spatial root; ties go
    to the lower-index case.
    """
    t, x, v = float(z[0]), float(z[1]), float(z[2])
    rho = p.rho
    dv = abs(v - p.w0)
    X = p.spatial_arg(t, x) ** (1.0 / (1 + 2 * p.s))
    if dv <= 2 * rho:
        return 1 if X <= 3 * rho else 2
    if dv <= 3 * rho:
        return 3 if X <= 3 * rho else 4
    if X <= 3 * rho or X <= dv:
        return 5
    return 6


def _transport_term(p: BarrierParams, t, x, v, tie_rtol: float = 1e-7):
    """Analytic transport derivative ``TH`` of the active branch.

    Returns ``(TH, tie)`` where ``tie`` marks points within relative
    tolerance of a branch kink (there the derivative is one-sided; a
    caller may fall back to finite differences).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    t, x, v = np.broadcast_arrays(t, x, v)
    m, gv, gx = _multiplier(p, t, x, v)
    H = np.exp(-m * p.log_factor(t))
    delta = p.delta(t)
    L = p.log_factor(t)

    core = (gv <= 1.0) & (gx <= 1.0)
    vel = (~core) & (gv >= gx)
    spa = (~core) & (gx > gv)

    TH = np.zeros_like(t)
    TH[core] = -p.k / p.rho ** (2 * p.s)
    TH[vel] = -H[vel] * gv[vel] / delta[vel]
    if np.any(spa):
        u = x - p.y0 - (p.sigma + t - 2 * p.tau0) * p.w0
        absu = np.abs(u)
        # transport derivative of u along (d/dt + v d/dx) is (v - w0)
        dm = (1.0 / (3 * p.rho * (1 + 2 * p.s))) * absu[spa] ** (-2 * p.s / (1 + 2 * p.s)) * np.sign(u[spa]) * (v[spa] - p.w0)
        TH[spa] = -H[spa] * (gx[spa] / delta[spa] + L[spa] * dm)

    # a kink only matters where the active branch could switch: at the
    # core boundary, or between the two growing branches
    top = np.maximum(gv, gx)
    tie = (np.abs(top - 1.0) <= tie_rtol) | ((top > 1.0) & (np.abs(gv - gx) <= tie_rtol * top))
    return TH, tie


def _sqrtH_of_w(p: BarrierParams, t, x, w):
    m, _, _ = _multiplier(p, t, x, w)
    return np.exp(-0.5 * m * p.log_factor(t))


def _jump_quadratic(p: BarrierParams, kspec: KernelSpec, t, x, v, quad_n: int = 24) -> float:
    """``int_{B_rho(v)} (sqrt(H)(v) - sqrt(H)(w))^2 [K(v,w)+K(w,v)] dw``
    by piecewise Gauss-Legendre with breakpoints at the branch kinks."""
    rho = p.rho
    mX = max(1.0, p.spatial_arg(t, x) ** (1.0 / (1 + 2 * p.s)) / (3 * rho))
    pts = {v - rho, v + rho, v, p.w0, p.w0 - 3 * rho * mX, p.w0 + 3 * rho * mX, p.w0 - 2 * rho, p.w0 + 2 * rho}
    brk = sorted(q for q in pts if v - rho <= q <= v + rho)
    nodes, weights = np.polynomial.legendre.leggauss(quad_n)
    sv = float(_sqrtH_of_w(p, t, x, v))
    acc = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a < 1e-14:
            continue
        w = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        ww = 0.5 * (b - a) * weights
        keep = np.abs(w - v) > 1e-12
        w, ww = w[keep], ww[keep]
        sw = _sqrtH_of_w(p, t, x, w)
        Ks = np.asarray(kspec._eval(t, x, np.full_like(w, v), w), dtype=float)
        Ks = Ks + np.asarray(kspec._eval(t, x, w, np.full_like(w, v)), dtype=float)
        acc += float(np.sum((sv - sw) ** 2 * Ks * ww))
    return acc


def barrier_residual_parts(p: BarrierParams, kspec: KernelSpec, z, quad_n: int = 24):
    """Return ``(TH, I, tie)`` so that the residual is ``TH + c I``."""
    t, x, v = float(z[0]), float(z[1]), float(z[2])
    TH, tie = _transport_term(p, np.array(t), np.array(x), np.array(v))
    I = _jump_quadratic(p, kspec, t, x, v, quad_n)
    return float(TH), I, bool(tie)


def barrier_residual(p: BarrierParams, kspec: KernelSpec, z, c: float = 2.0, quad_n: int = 24) -> float:
    """Supersolution residual; nonpositive residuals certify the barrier."""
    TH, I, tie = barrier_residual_parts(p, kspec, z, quad_n)
    if tie:
        # one-sided derivative at a kink: fall back to a flow-aligned
        # finite difference of H
        t, x, v = float(z[0]), float(z[1]), float(z[2])
        h = 1e-7 * max(p.sigma - p.tau0, 1e-12)
        tp, tm = min(t + h, p.sigma), max(t - h, p.tau0)
        Hp = barrier_values(p, tp, x + (tp - t) * v, v)
        Hm = barrier_values(p, tm, x + (tm - t) * v, v)
        TH = float((Hp - Hm) / (tp - tm))
    return TH + c * I


def region_samples(p: BarrierParams, n_per_region: int, rng: np.random.Generator):
    """Random sample points covering all six case regions (d = 1)."""
    rho = p.rho
    out = []
    for region in range(1, 7):
        count = 0
        while count < n_per_region:
            t = rng.uniform(p.tau0, p.sigma)
            if region in (1, 3, 5):
                Xr = rng.uniform(0.0, 2.9 * rho)
            else:
                Xr = rng.uniform(3.1 * rho, 12.0 * rho)
            if region == 1:
                dv = rng.uniform(0.0, 1.9 * rho)
            elif region == 2:
                dv = rng.uniform(0.0, 1.9 * rho)
            elif region in (3, 4):
                dv = rng.uniform(2.1 * rho, 2.9 * rho)
            else:
                dv = rng.uniform(3.1 * rho, 12.0 * rho)
            if region == 5 and Xr > 3 * rho:
                Xr = rng.uniform(3.1 * rho, max(3.2 * rho, dv))
            if region == 6:
                Xr = rng.uniform(max(3.1 * rho, dv * 1.01), 14.0 * rho)
            v = p.w0 + rng.choice([-1.0, 1.0]) * dv
            x = p.y0 + (p.sigma + t - 2 * p.tau0) * p.w0 + rng.choice([-1.0, 1.0]) * Xr ** (1 + 2 * p.s)
            z = (t, x, v)
            if barrier_region(p, z) == region:
                out.append(z)
                count += 1
    return out


def k_threshold(
    rho: float,
    tau0: float,
    y0: float,
    w0: float,
    s: float,
    kspec: KernelSpec,
    c: float = 2.0,
    n_per_region: int = 30,
    seed: int = 0,
    k_max: float = 2.0**24,
    tol: float = 1e-3,
) -> dict:
    """Smallest ``k >= 1`` making the residual nonpositive on a sample
    set covering all six regions, with ``sigma = tau0 + rho^{2s}/(4k)``.

    Feasibility is assumed monotone in ``k`` inside the bracket (checked
    at the endpoints); bisection to relative tolerance ``tol``.
    """
    rng = np.random.default_rng(seed)

    def residuals(k: float):
        p = BarrierParams(rho=rho, k=k, tau0=tau0, sigma=tau0 + rho ** (2 * s) / (4 * k), y0=y0, w0=w0, s=s)
        zs = region_samples(p, n_per_region, np.random.default_rng(seed))
        res = [barrier_residual(p, kspec, z, c) for z in zs]
        return np.asarray(res), zs

    def feasible(k: float):
        res, zs = residuals(k)
        i = int(np.argmax(res))
        return bool(res[i] <= 0.0), res[i], zs[i]

    lo, lo_ok = 1.0, None
    lo_ok, lo_res, lo_z = feasible(lo)
    if lo_ok:
        return {"k_star": 1.0, "worst_residual": lo_res, "worst_sample": lo_z, "c": c}
    hi = 2.0
    while hi <= k_max:
        hi_ok, hi_res, hi_z = feasible(hi)
        if hi_ok:
            break
        hi *= 2.0
    else:
        raise RuntimeError(f"no feasible k below {k_max}; worst residual {hi_res} at {hi_z}")
    while hi / lo > 1 + tol:
        mid = math.sqrt(lo * hi)
        ok, _, _ = feasible(mid)
        if ok:
            hi = mid
        else:
            lo = mid
    _, res, z = feasible(hi)
    return {"k_star": hi, "worst_residual": res, "worst_sample": z, "c": c}


def aronson_energy_check(
    traj: Trajectory,
    p: BarrierParams,
    variant: str = "kinetic",
    pointwise_bounded: bool = False,
) -> dict:
    """Implied constant of the weighted energy decay.

    Kinetic variant:  ``sup_t int f^2 H <= int f^2(tau0) H(tau0)
    + C rho^{-2s} |H|_inf |f|^2_{L^2(t,x,v)}``.
    Parabolic variant (x-constant data, pointwise-bounded kernel):
    the weight is ``rho^{-(d+2s)}`` against the squared L^2_t L^1_v norm.
    """
    if variant not in ("kinetic", "parabolic"):
        raise ValueError("variant must be 'kinetic' or 'parabolic'")
    g = traj.grid
    d = g.d
    times = [t for t in traj.times if p.tau0 <= t <= p.sigma]
    if not times:
        raise ValueError("trajectory times do not intersect [tau0, sigma]")
    keep = [i for i, t in enumerate(traj.times) if p.tau0 <= t <= p.sigma and i < len(traj.slices)]
    if len(keep) < 2:
        raise ValueError("need at least two saved slices inside [tau0, sigma]")
    X, V = np.meshgrid(g.x_axis, g.v_axis, indexing="ij")
    weighted = []
    H_sup = 0.0
    l2_time = 0.0
    l2l1_time = 0.0
    dt_slices = np.diff([traj.times[i] for i in keep])
    for j, i in enumerate(keep):
        f = traj.slices[i]
        t = traj.times[i]
        if variant == "parabolic":
            if not pointwise_bounded:
                raise ValueError("parabolic variant needs a pointwise-bounded kernel")
            if float(np.max(np.abs(f - f.mean(axis=0, keepdims=True)))) > 1e-8 * max(1.0, float(np.abs(f).max())):
                raise ValueError("parabolic variant needs an x-constant trajectory")
        H = barrier_values(p, t, X, V)
        H_sup = max(H_sup, float(H.max()))
        weighted.append(float((f * f * H).sum() * g.dx * g.dv))
        if j < len(dt_slices):
            l2_time += float((f * f).sum() * g.dx * g.dv) * dt_slices[j]
            l2l1_time += float(((np.abs(f).sum(axis=1) * g.dv) ** 2).sum() * g.dx) * dt_slices[j]
    gain = max(weighted) - weighted[0]
    if variant == "kinetic":
        denom = p.rho ** (-2 * p.s) * H_sup * l2_time
    else:
        denom = p.rho ** -(d + 2 * p.s) * H_sup * l2l1_time
    C = gain / denom if denom > 0 else 0.0
    return {
        "variant": variant,
        "constant": max(C, 0.0),
        "initial_weighted": weighted[0],
        "sup_weighted": max(weighted),
        "H_sup": H_sup,
        "norm_term": denom,
    }


def gamma_of(x, v, y0: float, w0: float, sigma: float, tau0: float, s: float):
    """``gamma = (1/4) max(|v - w0|, |x - y0 - (sigma - tau0) w0|^{1/(1+2s)})``
    and whether ``|sigma - tau0|^{1/(2s)} <= 4 gamma``."""
    spatial = abs(float(x) - y0 - (sigma - tau0) * w0) ** (1.0 / (1 + 2 * s))
    gamma = 0.25 * max(abs(float(v) - w0), spatial)
    flag = abs(sigma - tau0) ** (1.0 / (2 * s)) <= 4 * gamma
    return gamma, flag


def rho_choice(gamma: float, s: float, d: int = 1) -> float:
    """``rho = (gamma/12) (1/4 + (2d(1+s)+2s)/(2s))^{-1}``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    bracket = 0.25 + (2 * d * (1 + s) + 2 * s) / (2 * s)
    return (gamma / 12.0) / bracket


@dataclass
class DecayEnvelope:
    kind: str
    s: float
    d: int
    constant: float
    extra: dict

    def as_dict(self) -> dict:
        return {"kind": self.kind, "s": self.s, "d": self.d, "constant": self.constant, "extra": self.extra}


def _eval_window(tab: FundamentalSolutionTable, n: int = 129):
    """Fixed kinetically-scaled evaluation lattice, independent of the
    table resolution, so refinement measures table accuracy only."""
    s, t = tab.s, tab.t
    xs = 4.0 * t ** ((1 + 2 * s) / (2 * s)) * np.linspace(-1, 1, n)
    vs = 8.0 * t ** (1.0 / (2 * s)) * np.linspace(-1, 1, n)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    J = tab.sample(X.ravel(), V.ravel()).reshape(X.shape)
    return X, V, J


def _upper_envelope(tab: FundamentalSolutionTable, exponent: float, X, V):
    """``t^{-beta} [1 + max(|v|^{2s}, |x - t v|^{2s/(1+2s)}) / t]^{exponent}``
    (base point at the origin)."""
    s, d, t = tab.s, tab.d, tab.t
    arg = np.maximum(np.abs(V) ** (2 * s), np.abs(X - t * V) ** (2 * s / (1 + 2 * s)))
    beta = peak_decay_exponent(s, d)
    return t**-beta * (1.0 + arg / t) ** exponent


def decay_envelope_check(
    tab: FundamentalSolutionTable,
    kind: str,
    bracket_exponent: float | None = None,
    t_decade: int = 8,
) -> DecayEnvelope:
    """Fit the envelope constant of the requested kind on the table."""
    s, d = tab.s, tab.d
    beta = peak_decay_exponent(s, d)
    ring = max(abs(tab.meta.get("ringing", 0.0)), 1e-300)
    if kind == "NashOnDiag":
        ts = np.geomspace(tab.t / 10.0, tab.t, t_decade)
        vals = np.array([float(tab.sample(0.0, 0.0, t=float(t))) * t**beta for t in ts])
        return DecayEnvelope(
            kind=kind,
            s=s,
            d=d,
            constant=float(vals.max()),
            extra={"variation": float(vals.max() - vals.min()), "times": ts.tolist()},
        )
    if kind in ("UpperUnconditional", "UpperConditional"):
        if bracket_exponent is None:
            bracket_exponent = -0.25 if kind == "UpperUnconditional" else -(2 * d * (1 + s) + 2 * s) / (2 * s)
        X, V, J = _eval_window(tab)
        env = _upper_envelope(tab, bracket_exponent, X, V)
        pos = J > 10.0 * ring
        C = float(np.max(J[pos] / env[pos]))
        return DecayEnvelope(
            kind=kind,
            s=s,
            d=d,
            constant=C,
            extra={"bracket_exponent": bracket_exponent, "excluded_nodes": int((~pos).sum())},
        )
    if kind == "LowerExponential":
        rep = lower_bound_check(tab)
        return DecayEnvelope(kind=kind, s=s, d=d, constant=rep["C1"], extra=rep)
    raise ValueError(f"unknown envelope kind {kind!r}")


def meyers_check(J_full: np.ndarray, J_cutoff: np.ndarray, rho: float, s: float, d: int, elapsed: float) -> float:
    """Smallest ``c`` with ``J <= J_rho + c (sigma - tau0) rho^{-(2d(1+s)+2s)}``
    over shared grid nodes."""
    J_full = np.asarray(J_full, dtype=float)
    J_cutoff = np.asarray(J_cutoff, dtype=float)
    if J_full.shape != J_cutoff.shape:
        raise ValueError("tables must share a grid")
    if rho <= 0 or elapsed <= 0:
        raise ValueError("rho and elapsed time must be positive")
    scale = elapsed * rho ** -(2 * d * (1 + s) + 2 * s)
    return float(max(np.max((J_full - J_cutoff) / scale), 0.0))
