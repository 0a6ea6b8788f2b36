"""Gridded phase-space fields.

A :class:`PhaseField` lives on a uniform ``(t, x, v)`` grid with
periodic position and a declared far-field closure in velocity, which
stands in for the values of the field outside the velocity box.
Import/export uses a flat binary array plus a JSON header and is
bit-exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhaseGrid",
    "ZeroExtension",
    "PowerLawEnvelope",
    "PhaseField",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid; ``x`` is periodic on ``[-x_period/2, x_period/2)``,
    ``v`` covers ``[-v_extent, v_extent)``.  Node-based in x and v so
    FFT shifts are exact; cell counts must be even."""

    nt: int
    nx: int
    nv: int
    x_period: float
    v_extent: float
    t0: float = 0.0
    t1: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.nx % 2 or self.nv % 2:
            raise ValueError("nx and nv must be even")
        if self.x_period <= 0 or self.v_extent <= 0:
            raise ValueError("box sizes must be positive")
        if self.nt < 1:
            raise ValueError("need at least one time slice")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / max(self.nt - 1, 1)

    @property
    def dx(self) -> float:
        return self.x_period / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.v_extent / self.nv

    @property
    def t_axis(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def x_axis(self) -> np.ndarray:
        return -0.5 * self.x_period + self.dx * np.arange(self.nx)

    @property
    def v_axis(self) -> np.ndarray:
        return -self.v_extent + self.dv * np.arange(self.nv)


@dataclass(frozen=True)
class ZeroExtension:
    """Field vanishes outside the velocity box."""

    def envelope(self, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def tag(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class PowerLawEnvelope:
    """``f(w) ~ amplitude * |w|^{-exponent}`` outside the box."""

    amplitude: float
    exponent: float

    def __post_init__(self):
        if self.exponent <= 0:
            raise ValueError("power-law exponent must be positive")

    def envelope(self, w):
        w = np.asarray(w, dtype=float)
        return self.amplitude * np.abs(w) ** (-self.exponent)

    def tag(self) -> dict:
        return {"kind": "power_law", "amplitude": self.amplitude, "exponent": self.exponent}


def _closure_from_tag(tag: dict):
    if tag["kind"] == "zero":
        return ZeroExtension()
    if tag["kind"] == "power_law":
        return PowerLawEnvelope(tag["amplitude"], tag["exponent"])
    raise ValueError(f"unknown far-field closure {tag!r}")


class PhaseField:
    """Scalar field sampled on a :class:`PhaseGrid`.

    ``values`` has shape ``(nt, nx, nv)``.  ``sample`` interpolates
    trilinearly (periodic wrap in x, clamped in t and v).
    """

    def __init__(self, grid: PhaseGrid, values: np.ndarray, farfield=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.nt, grid.nx, grid.nv):
            raise ValueError(f"values shape {values.shape} does not match grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values
        self.farfield = farfield if farfield is not None else ZeroExtension()

    def slice(self, it: int) -> np.ndarray:
        return self.values[it]

    def sample(self, t, x, v):
        """Trilinear interpolation, vectorized over broadcastable inputs."""
        g = self.grid
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        t, x, v = np.broadcast_arrays(t, x, v)

        if g.nt > 1:
            ft = np.clip((t - g.t0) / g.dt, 0.0, g.nt - 1 - 1e-12)
        else:
            ft = np.zeros_like(t)
        it = np.floor(ft).astype(int)
        at = ft - it
        it1 = np.minimum(it + 1, g.nt - 1)

        fx = (x + 0.5 * g.x_period) / g.dx
        ix = np.floor(fx).astype(int)
        ax = fx - ix
        ix0 = np.mod(ix, g.nx)
        ix1 = np.mod(ix + 1, g.nx)

        fv = np.clip((v + g.v_extent) / g.dv, 0.0, g.nv - 1 - 1e-12)
        iv = np.floor(fv).astype(int)
        av = fv - iv
        iv1 = np.minimum(iv + 1, g.nv - 1)

        V = self.values
        out = np.zeros_like(t, dtype=float)
        for dt_, wt in ((it, 1 - at), (it1, at)):
            for dx_, wx in ((ix0, 1 - ax), (ix1, ax)):
                for dv_, wv in ((iv, 1 - av), (iv1, av)):
                    out += wt * wx * wv * V[dt_, dx_, dv_]
        return out

    def copy(self) -> "PhaseField":
        return PhaseField(self.grid, self.values.copy(), self.farfield)


def save_field(f: PhaseField, path: str) -> None:
    """Write ``path`` (binary, little-endian float64 C-order) and
    ``path + '.json'`` (header)."""
    g = f.grid
    header = {
        "d": g.d,
        "nt": g.nt,
        "nx": g.nx,
        "nv": g.nv,
        "x_period": g.x_period,
        "v_extent": g.v_extent,
        "t0": g.t0,
        "t1": g.t1,
        "farfield": f.farfield.tag(),
        "dtype": "<f8",
        "order": "C",
    }
    with open(path + ".json", "w") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")
    f.values.astype("<f8").tofile(path)


def load_field(path: str) -> PhaseField:
    with open(path + ".json") as fh:
        header = json.load(fh)
    grid = PhaseGrid(
        nt=header["nt"],
        nx=header["nx"],
        nv=header["nv"],
        x_period=header["x_period"],
        v_extent=header["v_extent"],
        t0=header["t0"],
        t1=header["t1"],
        d=header["d"],
    )
    count = grid.nt * grid.nx * grid.nv
    values = np.fromfile(path, dtype="<f8", count=count).reshape(grid.nt, grid.nx, grid.nv)
    if os.path.getsize(path) != count * 8:
        raise ValueError("binary payload size does not match header")
    return PhaseField(grid, values, _closure_from_tag(header["farfield"]))
