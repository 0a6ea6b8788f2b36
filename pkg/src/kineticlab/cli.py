"""Experiment runner.

Subcommands::

    kineticlab fundsol      --s 0.5 --t 1.0 [--n-freq 256]
    kineticlab solve        --s 0.5 --t 1.0 [grid/stepper flags]
    kineticlab ellipticity  --kernel frac [--fit]
    kineticlab harnack  {weak,strong,l1linf,tail,degiorgi,chain,lower} ...
    kineticlab aronson  {barrier,k-threshold,energy,envelope,meyers} ...
    kineticlab sweep    harnack-strong --refinements 3

Every run writes its reports (JSON) and series (CSV) into ``--out`` and
a ``manifest.json`` listing each output file with a SHA-256 digest.
Outputs are deterministic: fixed iteration orders, sorted JSON keys,
and a timestamp taken from ``SOURCE_DATE_EPOCH`` (0 if unset).

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .fields import PhaseGrid, PowerLawEnvelope, load_field
from .fundsol import chapman_kolmogorov_residual, j0_table
from .geometry import PhasePoint
from .harnack import (
    degiorgi_trace,
    fundamental_field,
    harnack_chain,
    l1_linf_ratio,
    lower_bound_check,
    strong_harnack_ratio,
    tail_bound_ratio,
    weak_harnack_ratio,
)
from .kernels import (
    check_coercivity,
    check_symmetry,
    check_upper_bound,
    kernel_from_config,
    normalized_fractional,
)
from .solver import SolverConfig, fundamental_approx, mollified_delta, solve

__all__ = ["main"]


class ConfigError(Exception):
    pass


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


class Emitter:
    """Deterministic output writer with a manifest."""

    def __init__(self, out_dir: str, config_text: str):
        self.out_dir = out_dir
        self.files: list[str] = []
        self.config_text = config_text
        os.makedirs(out_dir, exist_ok=True)

    def json(self, name: str, obj) -> None:
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2, default=_json_default)
            fh.write("\n")
        self.files.append(name)

    def csv(self, name: str, header: list[str], rows) -> None:
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(c)) if isinstance(c, (int, float, np.floating)) else str(c) for c in row) + "\n")
        self.files.append(name)

    def finish(self) -> None:
        inventory = {}
        for name in sorted(self.files):
            with open(os.path.join(self.out_dir, name), "rb") as fh:
                inventory[name] = hashlib.sha256(fh.read()).hexdigest()
        manifest = {
            "run_id": hashlib.sha256(self.config_text.encode()).hexdigest()[:12],
            "timestamp_epoch": int(os.environ.get("SOURCE_DATE_EPOCH", "0")),
            "config_digest": hashlib.sha256(self.config_text.encode()).hexdigest(),
            "config": self.config_text,
            "version": __version__,
            "outputs": inventory,
        }
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _check_s(s: float) -> float:
    if not 0.0 < s < 1.0:
        raise ConfigError(f"s = {s} violates the constraint s in (0, 1)")
    return s


def _kernel_from_args(args) -> object:
    if getattr(args, "kernel_config", None):
        with open(args.kernel_config) as fh:
            return kernel_from_config(fh.read())
    name = getattr(args, "kernel", "frac")
    if name == "frac":
        return normalized_fractional(_check_s(args.s), d=1)
    raise ConfigError(f"unknown kernel {name!r} (use 'frac' or --kernel-config)")


def _field_from_args(args, s: float):
    if getattr(args, "field", None):
        return load_field(args.field)
    tab = j0_table(1.0, s, n_freq=getattr(args, "n_freq", 256))
    return fundamental_field(tab, t_offset=getattr(args, "t_offset", 1.0))


# ---------------------------------------------------------------------------
# subcommand bodies


def _run_fundsol(args, em: Emitter) -> None:
    s = _check_s(args.s)
    tab = j0_table(args.t, s, n_freq=args.n_freq)
    ck = chapman_kolmogorov_residual(args.t / 2, args.t / 2, s, n_freq=min(args.n_freq, 128))
    em.json("fundsol.json", {
        "s": s,
        "t": args.t,
        "mass": tab.mass(),
        "peak": tab.peak(),
        "meta": tab.meta,
        "chapman_kolmogorov": ck,
    })


def _grid_from_args(args) -> PhaseGrid:
    return PhaseGrid(nt=1, nx=args.nx, nv=args.nv, x_period=args.x_period, v_extent=args.v_extent)


def _run_solve(args, em: Emitter) -> None:
    s = _check_s(args.s)
    grid = _grid_from_args(args)
    k = _kernel_from_args(args)
    config = SolverConfig(dt=args.dt, steps=args.steps, scheme=args.scheme, torus=not args.no_torus)
    if args.cross_validate:
        rep = fundamental_approx(k, grid, args.dt * args.steps, config, s, n_freq=args.n_freq)
        em.json("solve.json", rep)
        return
    f0 = mollified_delta(grid, s)
    traj = solve(k, f0, grid, config)
    em.csv("diagnostics.csv", ["t", "mass", "min", "max", "l2"],
           zip(traj.times, traj.mass, traj.minimum, traj.maximum, traj.l2))
    em.json("solve.json", {
        "mass_initial": traj.mass[0],
        "mass_final": traj.mass[-1],
        "mass_drift": traj.mass_drift(),
        "leak_total": traj.leak_total,
    })


def _run_ellipticity(args, em: Emitter) -> None:
    s = _check_s(args.s)
    k = _kernel_from_args(args)
    sym = check_symmetry(k, samples=args.samples, seed=args.seed)
    upper = check_upper_bound(k)
    report = {"symmetry": sym, "upper_bound": upper}
    if args.fit:
        report["coercivity"] = check_coercivity(k)
    em.json("ellipticity.json", report)


def _run_harnack(args, em: Emitter) -> None:
    s = _check_s(args.s)
    z0 = PhasePoint(args.t0, args.x0, args.v0)
    nodes = (args.nodes, args.nodes, args.nodes)
    sub = args.harnack_cmd
    if sub == "strong":
        f = _field_from_args(args, s)
        rep = strong_harnack_ratio(f, z0, args.r0, s, nodes=nodes)
        em.json("harnack_strong.json", rep.as_dict())
    elif sub == "weak":
        f = _field_from_args(args, s)
        rep = weak_harnack_ratio(f, z0, args.r0, zeta=args.zeta, s=s, nodes=nodes)
        em.json("harnack_weak.json", rep.as_dict())
    elif sub == "l1linf":
        f = _field_from_args(args, s)
        rep = l1_linf_ratio(f, z0, args.R, s, nodes=nodes)
        em.json("harnack_l1linf.json", rep.as_dict())
    elif sub == "tail":
        if not args.field:
            raise ConfigError("tail measurement needs --field (a saved gridded field)")
        f = load_field(args.field)
        k = _kernel_from_args(args)
        rep = tail_bound_ratio(f, k, z0, args.R, l=args.level, zeta=args.zeta, s=s, nodes=nodes)
        em.json("harnack_tail.json", rep.as_dict())
    elif sub == "degiorgi":
        f = _field_from_args(args, s)
        trace = degiorgi_trace(f, z0, args.R, delta=args.delta, p=args.p, zeta=args.zeta, s=s, nodes=nodes)
        em.json("harnack_degiorgi.json", trace.as_dict())
        em.csv("degiorgi.csv", ["k", "l_k", "r_k", "A_k"], trace.sequence)
    elif sub == "chain":
        rep = harnack_chain((args.tau0, args.y0, args.w0), (args.t1, args.x1, args.v1), s)
        em.json("harnack_chain.json", {k: v for k, v in rep.items() if k != "path"})
        em.csv("chain_path.csv", ["t", "x", "v"], rep["path"])
    elif sub == "lower":
        tab = j0_table(args.t, s, n_freq=args.n_freq)
        rep = lower_bound_check(tab, alpha=args.alpha)
        em.json("harnack_lower.json", rep)
    else:
        raise ConfigError(f"unknown harnack subcommand {sub!r}")


def _run_aronson(args, em: Emitter) -> None:
    from .aronson import (
        BarrierParams,
        barrier_eval,
        barrier_region,
        barrier_residual,
        decay_envelope_check,
        k_threshold,
        meyers_check,
    )

    s = _check_s(args.s)
    sub = args.aronson_cmd
    if sub == "barrier":
        p = BarrierParams(rho=args.rho, k=args.k, tau0=args.tau0,
                          sigma=args.tau0 + args.rho ** (2 * s) / (4 * args.k),
                          y0=args.y0, w0=args.w0, s=s)
        z = (0.5 * (p.tau0 + p.sigma), args.x1, args.v1)
        kspec = _kernel_from_args(args)
        em.json("aronson_barrier.json", {
            "H": barrier_eval(p, z),
            "region": barrier_region(p, z),
            "residual": barrier_residual(p, kspec, z, c=args.c),
        })
    elif sub == "k-threshold":
        kspec = _kernel_from_args(args)
        rep = k_threshold(args.rho, args.tau0, args.y0, args.w0, s, kspec,
                          c=args.c, n_per_region=args.samples, seed=args.seed)
        em.json("aronson_kthreshold.json", rep)
    elif sub == "energy":
        from .aronson import aronson_energy_check

        grid = _grid_from_args(args)
        kspec = _kernel_from_args(args)
        config = SolverConfig(dt=args.dt, steps=args.steps, scheme=args.scheme, torus=True)
        f0 = mollified_delta(grid, s)
        traj = solve(kspec, f0, grid, config)
        T = args.dt * args.steps
        rho = args.rho
        p = BarrierParams(rho=rho, k=args.k, tau0=0.0,
                          sigma=min(T, rho ** (2 * s) / (4 * args.k)),
                          y0=args.y0, w0=args.w0, s=s)
        rep = aronson_energy_check(traj, p, variant=args.variant,
                                   pointwise_bounded=args.variant == "parabolic")
        em.json("aronson_energy.json", rep)
    elif sub == "envelope":
        tab = j0_table(args.t, s, n_freq=args.n_freq)
        rep = decay_envelope_check(tab, args.kind)
        em.json("aronson_envelope.json", rep.as_dict())
    elif sub == "meyers":
        raise ConfigError("meyers needs two saved tables; use the library API (meyers_check)")
    else:
        raise ConfigError(f"unknown aronson subcommand {sub!r}")


def _run_sweep(args, em: Emitter) -> None:
    s = _check_s(args.s)
    if args.what != "harnack-strong":
        raise ConfigError("only 'harnack-strong' sweeps are wired up")
    f = _field_from_args(args, s)
    z0 = PhasePoint(args.t0, args.x0, args.v0)
    rows = []
    n = args.nodes
    for _ in range(args.refinements):
        rep = strong_harnack_ratio(f, z0, args.r0, s, nodes=(n, n, n))
        rows.append((n, rep.sup, rep.inf, rep.ratio))
        n *= 2
    em.csv("sweep_harnack_strong.csv", ["nodes", "sup", "inf", "ratio"], rows)


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s", type=float, default=0.5, help="jump order parameter, in (0, 1)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--n-freq", type=int, default=256, help="frequency grid size per axis")
    p.add_argument("--kernel", default="frac", help="kernel family name ('frac')")
    p.add_argument("--kernel-config", default=None, help="kernel key=value config file")
    p.add_argument("--seed", type=int, default=0)


class _Subparser(argparse.ArgumentParser):
    """Subcommand parser with option abbreviation disabled, so short flags
    like ``--k`` are not mistaken for prefixes of ``--kernel``."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kineticlab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Subparser)

    p = sub.add_parser("fundsol", help="fundamental-solution table and composition residual")
    _add_common(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--t", type=float, default=1.0)
    p.set_defaults(func=_run_fundsol)

    p = sub.add_parser("solve", help="run the split-step solver")
    _add_common(p)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--nv", type=int, default=256)
    p.add_argument("--x-period", type=float, default=8.0)
    p.add_argument("--v-extent", type=float, default=12.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--scheme", choices=["explicit", "implicit", "cn"], default="cn")
    p.add_argument("--no-torus", action="store_true")
    p.add_argument("--cross-validate", action="store_true",
                   help="compare against the explicit fundamental solution")
    p.set_defaults(func=_run_solve)

    p = sub.add_parser("ellipticity", help="symmetry / upper-bound / coercivity checks")
    _add_common(p)
    p.add_argument("--fit", action="store_true", help="also fit the coercivity ratio")
    p.add_argument("--samples", type=int, default=64)
    p.set_defaults(func=_run_ellipticity)

    p = sub.add_parser("harnack", help="Harnack-type measurements")
    _add_common(p)
    hs = p.add_subparsers(dest="harnack_cmd", required=True)
    for name in ("strong", "weak", "l1linf", "tail", "degiorgi", "chain", "lower"):
        q = hs.add_parser(name)
        q.add_argument("--field", default=None, help="saved field path (default: explicit solution)")
        q.add_argument("--t0", type=float, default=0.0)
        q.add_argument("--x0", type=float, default=0.0)
        q.add_argument("--v0", type=float, default=0.0)
        q.add_argument("--t-offset", dest="t_offset", type=float, default=1.0)
        q.add_argument("--nodes", type=int, default=8)
        q.add_argument("--r0", type=float, default=0.125)
        q.add_argument("--R", type=float, default=0.5)
        q.add_argument("--zeta", type=float, default=0.5)
        q.add_argument("--level", type=float, default=0.0)
        q.add_argument("--delta", type=float, default=0.5)
        q.add_argument("--p", type=float, default=1.05)
        q.add_argument("--tau0", type=float, default=1.0)
        q.add_argument("--y0", type=float, default=0.0)
        q.add_argument("--w0", type=float, default=0.0)
        q.add_argument("--t1", type=float, default=2.0)
        q.add_argument("--x1", type=float, default=1.0)
        q.add_argument("--v1", type=float, default=1.0)
        q.add_argument("--t", type=float, default=1.0)
        q.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=_run_harnack)

    p = sub.add_parser("aronson", help="barrier and decay-envelope checks")
    _add_common(p)
    asub = p.add_subparsers(dest="aronson_cmd", required=True)
    for name in ("barrier", "k-threshold", "energy", "envelope", "meyers"):
        q = asub.add_parser(name)
        q.add_argument("--rho", type=float, default=1.0)
        q.add_argument("--k", type=float, default=4.0)
        q.add_argument("--c", type=float, default=2.0)
        q.add_argument("--tau0", type=float, default=0.0)
        q.add_argument("--y0", type=float, default=0.0)
        q.add_argument("--w0", type=float, default=0.0)
        q.add_argument("--x1", type=float, default=0.0)
        q.add_argument("--v1", type=float, default=0.0)
        q.add_argument("--samples", type=int, default=30)
        q.add_argument("--t", type=float, default=1.0)
        q.add_argument("--kind", default="NashOnDiag",
                       choices=["NashOnDiag", "UpperUnconditional", "UpperConditional", "LowerExponential"])
        q.add_argument("--variant", choices=["kinetic", "parabolic"], default="kinetic")
        q.add_argument("--nx", type=int, default=64)
        q.add_argument("--nv", type=int, default=128)
        q.add_argument("--x-period", type=float, default=8.0)
        q.add_argument("--v-extent", type=float, default=8.0)
        q.add_argument("--dt", type=float, default=0.01)
        q.add_argument("--steps", type=int, default=10)
        q.add_argument("--scheme", choices=["explicit", "implicit", "cn"], default="cn")
    p.set_defaults(func=_run_aronson)

    p = sub.add_parser("sweep", help="refinement sweeps (CSV)")
    _add_common(p)
    p.add_argument("what", choices=["harnack-strong"])
    p.add_argument("--refinements", type=int, default=3)
    p.add_argument("--r0", type=float, default=0.125)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--t-offset", dest="t_offset", type=float, default=1.0)
    p.add_argument("--field", default=None)
    p.add_argument("--nodes", type=int, default=4)
    p.set_defaults(func=_run_sweep)

    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    # the output directory is not part of the experiment configuration
    kept, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--out":
            skip = True
        elif a.startswith("--out="):
            pass
        else:
            kept.append(a)
    config_text = "\n".join(kept)
    em = Emitter(args.out, config_text)
    try:
        args.func(args, em)
        em.finish()
    except (ConfigError, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
