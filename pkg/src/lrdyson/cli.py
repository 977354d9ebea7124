"""Command-line front end: ``lrdyson <command> --config run.toml [--out DIR] [--format csv|json]``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import FrequencySeries, TimeSeries, export_results, poles_chiF, polarizability, sigma1_table
from .config import RunConfig, load_config, site_count
from .dyson import (TimeGrid, casida_operator, chiF_freq, chiF_time_sinc, default_time_step, m_operator,
                    solve_dyson_time, stability_report)
from .errors import ConfigError, LRDysonError
from .fock import build_site_space
from .kernels import Kernel
from .models import System, build_system, make_kernel
from .response import chi0_freq, chi0_time, single_particle_spectrum
from .verify import Check, rel_frobenius, run_suite, sweep_strengths

COMMANDS = ("ground-state", "chi0", "sigma1", "dyson-time", "dyson-freq", "casida",
            "stability", "poles", "spectrum", "verify")
OUT_ENV = "LRDYSON_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


@dataclass
class CommandResult:
    command: str
    wall_time: float
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def system_from_config(cfg: RunConfig) -> System:
    s = cfg.system
    t = cfg.tolerances
    try:
        space = build_site_space(site_count(s), s.weights, s.positions, s.distance_matrix)
        if space.site_count > 1 and s.particles == space.site_count:
            raise ConfigError("a completely filled lattice has no excitations; need N < M")
        return build_system(space, s.particles, s.hopping, s.potential, s.interaction,
                            gap_tol=t.gap_tol, support_threshold=t.support_threshold, cluster_tol=t.cluster_tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def kernel_from_config(cfg: RunConfig, system: System) -> Kernel:
    k = cfg.kernel
    try:
        F = make_kernel(k.family, system, softening=k.softening, params=k.pw92.params(),
                        diagonal=k.diagonal, diagonal_c=k.diagonal_c)
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None
    return F if k.scale == 1.0 else F.scaled(k.scale)


def frequency_points(cfg: RunConfig, system: System) -> np.ndarray:
    g = cfg.grids
    if g.z is not None:
        return np.array([complex(re, im) for re, im in g.z])
    return omega_grid(cfg, system) + 1j * g.eta


def omega_grid(cfg: RunConfig, system: System) -> np.ndarray:
    g = cfg.grids
    top = 2.0 * float(np.max(system.context.eigenvalues)) if g.omega_max is None else g.omega_max
    return np.linspace(g.omega_min, top, g.omega_count)


def time_grid(cfg: RunConfig, system: System) -> TimeGrid:
    ctx = system.context
    dt = default_time_step(ctx) if cfg.grids.dt is None else cfg.grids.dt
    return TimeGrid.covering(20.0 / ctx.omega1 if cfg.grids.t_max is None else cfg.grids.t_max, dt)


def _summary(system: System, F: Kernel) -> dict:
    ctx = system.context
    rep = stability_report(ctx, F)
    out = {
        "E0": system.ground.energy,
        "gap": system.ground.gap,
        "omega1": ctx.omega1,
        "bfb_norm": rep.coupling_norm,
        "min_eig_M": rep.min_M,
        "min_eig_C": rep.min_C,
    }
    out = {k: v for k, v in out.items() if np.isfinite(v)}
    out["verdict"] = rep.verdict
    return out


class _Table:
    def __init__(self, header, rows, data):
        self._header, self._rows, self._data = header, rows, data

    def table(self):
        return self._header, self._rows

    def to_dict(self):
        return self._data


def _ground_table(system: System):
    gs = system.ground
    rows = [(i, float(d), bool(s)) for i, (d, s) in enumerate(zip(gs.density, gs.support_mask))]
    data = {"energy": gs.energy, "gap": gs.gap, "density": gs.density, "support": gs.support}
    return _Table(("site", "density", "in_support"), rows, data)


def _casida_table(C, m_eigs):
    rows = [(k, float(c), float(m)) for k, (c, m) in enumerate(zip(C.eigenvalues, m_eigs))]
    return _Table(("index", "C_eig", "M_eig"), rows, {"C_eigs": C.eigenvalues, "M_eigs": m_eigs})


def _stability_table(rep):
    scalars = {"verdict": rep.verdict, "min_eig_M": rep.min_M, "min_eig_C": rep.min_C,
               "growth_bound": rep.growth_bound, "omega1": rep.omega1, "bfb_norm": rep.coupling_norm,
               "casida_bound": rep.casida_bound}
    scalars.update({f"check_{k}": v for k, v in rep.checks.items()})
    rows = [(k, scalars[k]) for k in sorted(scalars)]
    return _Table(("key", "value"), rows, {**scalars, "M_eigs": rep.M_eigs, "C_eigs": rep.C_eigs})


def _checks_table(checks: list[Check]):
    rows = [(c.name, c.passed, c.value, c.tolerance, c.detail) for c in checks]
    data = {"checks": [{"name": c.name, "passed": c.passed, "value": c.value,
                        "tolerance": c.tolerance, "detail": c.detail} for c in checks]}
    return _Table(("name", "passed", "value", "tolerance", "detail"), rows, data)


def _sigma1(report):
    header, rows = sigma1_table(report)
    return _Table(header, rows, {"clusters": [dict(zip(header, r)) for r in rows]})


def run_command(cfg: RunConfig, command: str, out_dir=None, fmt: str | None = None) -> CommandResult:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    start = time.perf_counter()
    fmt = fmt or cfg.output.format
    out_dir = Path(out_dir or os.environ.get(OUT_ENV) or cfg.output.directory)

    system = system_from_config(cfg)
    ctx = system.context
    F = kernel_from_config(cfg, system)
    guard = cfg.tolerances.pole_guard
    sites = ctx.ground.support
    result = CommandResult(command, 0.0, summary=_summary(system, F))
    rank_tol = cfg.tolerances.rank_tol

    if command == "ground-state":
        obj = _ground_table(system)
    elif command == "chi0":
        zs = frequency_points(cfg, system)
        obj = FrequencySeries(zs, sites, np.array([chi0_freq(ctx, z, guard) for z in zs]))
    elif command == "sigma1":
        obj = _sigma1(single_particle_spectrum(ctx, rank_tol))
    elif command == "dyson-time":
        grid = time_grid(cfg, system)
        t = grid.times
        chi = solve_dyson_time(chi0_time(ctx, t), F, grid)
        result.summary["sinc_rel_error"] = rel_frobenius(chi, chiF_time_sinc(ctx, casida_operator(ctx, F), t))
        obj = TimeSeries(t, sites, chi)
    elif command == "dyson-freq":
        zs = frequency_points(cfg, system)
        C = casida_operator(ctx, F)
        obj = FrequencySeries(zs, sites, np.array([chiF_freq(ctx, C, z, guard) for z in zs]))
    elif command == "casida":
        obj = _casida_table(casida_operator(ctx, F), np.linalg.eigvalsh(m_operator(ctx, F)))
    elif command == "stability":
        obj = _stability_table(stability_report(ctx, F, cfg.tolerances.zero_tol))
    elif command == "poles":
        obj = poles_chiF(ctx, casida_operator(ctx, F), rank_tol, cfg.tolerances.cluster_tol,
                         cfg.tolerances.zero_tol)
    elif command == "spectrum":
        if system.space.positions is None:
            raise ConfigError("spectrum needs system.positions")
        obj = polarizability(ctx, system.space.positions, omega_grid(cfg, system), cfg.grids.eta,
                             casida_operator(ctx, F))
    else:
        probe = F if not F.is_zero() else make_kernel("rpa", system, softening=cfg.kernel.softening)
        v = cfg.verify
        result.checks = run_suite(
            system, probe, seed=cfg.seed, etas=v.etas,
            strengths=sweep_strengths(v.sweep_min, v.sweep_max, v.sweep_step),
            n1_strengths=v.n1_strengths, random_states=v.random_states, z_points=v.z_points,
            rank_tol=rank_tol, params=cfg.kernel.pw92.params())
        result.summary["kernel_tested"] = probe.label
        obj = _checks_table(result.checks)

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_{cfg.label}.{fmt}"
    export_results(obj, fmt, path)
    result.outputs.append(str(path))
    result.wall_time = time.perf_counter() - start
    return result


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lrdyson", description="Linear-response Dyson solver on finite lattices.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and output.directory)")
    p.add_argument("--format", choices=("csv", "json"), help="export format (overrides output.format)")
    return p


def _print_result(res: CommandResult, stream=None):
    stream = sys.stdout if stream is None else stream
    for c in res.checks:
        print(c.line(), file=stream)
    for k in sorted(res.summary):
        v = res.summary[k]
        print(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}", file=stream)
    for path in res.outputs:
        print(f"wrote {path}", file=stream)
    print(f"wall_time = {res.wall_time:.3f}s", file=stream)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        res = run_command(cfg, args.command, args.out, args.format)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LRDysonError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _print_result(res)
    if args.command == "verify" and not res.passed:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
