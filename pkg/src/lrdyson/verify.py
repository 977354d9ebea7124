"""Numerical identity checks for the response and Dyson machinery.

Each ``check_*`` function returns a list of :class:`Check` records.  They are
used by the ``verify`` command and by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import Bump, contour_coefficient, poles_chi0, poles_chiF, polarizability, stone_check
from .dyson import (CasidaOperator, TimeGrid, casida_operator, chiF_freq, chiF_freq_direct, chiF_time_sinc,
                    default_time_step, m_operator, operator_scales, sign_with_tol, solve_dyson_time, stability_report)
from .errors import DegenerateGroundState
from .kernels import Kernel, Pw92Params, bfb_operator, diagonal_kernel, fxc_heg, heg_energy_density, zero_kernel
from .models import System, make_kernel, one_particle_sector
from .response import ResponseContext, chi0_freq, chi0_time, single_particle_spectrum


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: {self.value:.3e} vs {self.tolerance:.1e}{extra}"


def _check(name, value, tol, detail="", *, below=True):
    value = float(value)
    ok = bool(np.isfinite(value) and (value <= tol if below else value >= tol))
    return Check(name, ok, value, tol, detail)


def rel_frobenius(a, ref) -> float:
    """||a - ref||_F / ||ref||_F over the whole array."""
    den = float(np.linalg.norm(ref))
    return float(np.linalg.norm(np.asarray(a) - ref)) / den if den else float(np.linalg.norm(a))


def limit_coupling(ctx: ResponseContext, F: Kernel, fraction: float = 0.5) -> Kernel:
    """Scale F down (never up) so that ||B*FB|| <= fraction * omega1."""
    v = bfb_operator(ctx, F).norm
    cap = fraction * ctx.omega1
    return F if v <= cap else F.scaled(cap / v)


# -- time domain --------------------------------------------------------------

@dataclass(frozen=True)
class TimeAgreement:
    error: float
    error_half: float
    dt: float
    steps: int

    @property
    def ratio(self) -> float:
        return self.error / self.error_half if self.error_half > 0 else float("inf")


def volterra_vs_sinc(ctx: ResponseContext, F: Kernel, dt: float | None = None, t_max: float | None = None) -> TimeAgreement:
    """Trapezoidal Volterra solution against the closed sinc form at step dt and dt / 2."""
    dt = default_time_step(ctx) if dt is None else dt
    t_max = 20.0 / ctx.omega1 if t_max is None else t_max
    C = casida_operator(ctx, F)
    errs = []
    for h in (dt, dt / 2):
        grid = TimeGrid.covering(t_max, h)
        t = grid.times
        chi_v = solve_dyson_time(chi0_time(ctx, t), F, grid)
        errs.append(rel_frobenius(chi_v, chiF_time_sinc(ctx, C, t)))
    return TimeAgreement(errs[0], errs[1], dt, TimeGrid.covering(t_max, dt).steps)


def check_dyson_time(ctx, F, dt=None, t_max=None, tol=1e-4, min_ratio=3.5, tag="") -> list[Check]:
    r = volterra_vs_sinc(ctx, F, dt, t_max)
    if r.error == 0.0:
        # both routes agree exactly (B*FB = 0): the convergence order is not measurable
        ratio = Check(f"volterra_halving_ratio{tag}", True, float("inf"), min_ratio, "exact agreement")
    else:
        ratio = _check(f"volterra_halving_ratio{tag}", r.ratio, min_ratio, below=False)
    return [_check(f"volterra_vs_sinc{tag}", r.error, tol, f"{r.steps} steps"), ratio]


def gronwall_ratio(ctx: ResponseContext, F: Kernel, prefactor: float = 2.0, dt=None, t_max=None) -> float:
    """max_t ||chi_F(t)|| / (a exp(a ||F|| t)) with a = prefactor * ||B||^2, weighted operator norms.

    sup_t ||chi_H(t)|| <= 2 ||B||^2, so prefactor 2 is the constant Gronwall's
    inequality actually delivers.
    """
    dt = default_time_step(ctx) if dt is None else dt
    grid = TimeGrid.covering(20.0 / ctx.omega1 if t_max is None else t_max, dt)
    t = grid.times
    chi = solve_dyson_time(chi0_time(ctx, t), F, grid)
    a = prefactor * ctx.b_norm() ** 2
    envelope = a * np.exp(a * F.weighted_norm * t)
    norms = np.array([ctx.weighted_norm(x) for x in chi])
    return float(np.max(norms / envelope))


def check_gronwall(ctx: ResponseContext, F: Kernel, prefactor: float = 2.0, slack=1.01) -> list[Check]:
    return [_check("gronwall_envelope", gronwall_ratio(ctx, F, prefactor), slack, f"prefactor {prefactor:g}")]


# -- frequency domain ---------------------------------------------------------

def off_pole_points(ctx: ResponseContext, C: CasidaOperator, count: int, rng: np.random.Generator,
                    min_distance: float = 1e-2) -> np.ndarray:
    """Random complex frequencies kept away from every pole of chi_H^ and chi_F^."""
    lam = ctx.eigenvalues
    c = C.eigenvalues
    poles = np.concatenate([lam, -lam, np.sqrt(c.astype(complex)), -np.sqrt(c.astype(complex))])
    top = 1.5 * float(max(np.max(lam), np.sqrt(np.max(np.abs(c)))))
    out = []
    while len(out) < count:
        z = complex(rng.uniform(-top, top), rng.uniform(-0.5, 0.5) * top)
        if np.min(np.abs(poles - z)) > min_distance * top:
            out.append(z)
    return np.array(out)


def check_dyson_freq(ctx, F, zs, tol=1e-10, tag="") -> list[Check]:
    C = casida_operator(ctx, F)
    worst = 0.0
    for z in zs:
        worst = max(worst, rel_frobenius(chiF_freq(ctx, C, z), chiF_freq_direct(ctx, F, z)))
    return [_check(f"casida_vs_dielectric{tag}", worst, tol, f"{len(zs)} points")]


def check_zero_kernel(ctx: ResponseContext, zs, dt=None, t_max=None) -> list[Check]:
    """With F = 0 every route must return chi_H itself, node for node."""
    F0 = zero_kernel(ctx.weights, ctx.density)
    C0 = casida_operator(ctx, F0)
    dt = default_time_step(ctx) if dt is None else dt
    grid = TimeGrid.covering(20.0 / ctx.omega1 if t_max is None else t_max, dt)
    x0 = chi0_time(ctx, grid.times)
    dev_t = max(np.max(np.abs(solve_dyson_time(x0, F0, grid) - x0)),
                np.max(np.abs(chiF_time_sinc(ctx, C0, grid.times) - x0)))
    dev_z = max((np.max(np.abs(chiF_freq(ctx, C0, z) - chi0_freq(ctx, z))) for z in zs), default=0.0)
    return [_check("zero_kernel_time", dev_t, 0.0), _check("zero_kernel_freq", dev_z, 0.0)]


def check_resolvent_identity(ctx: ResponseContext, F: Kernel, rng, count=5, tol=1e-11) -> list[Check]:
    """C(z)^-1 - D(z)^-1 - 2 C(z)^-1 (B*FB) D(z)^-1 = 0 with D(z) = z^2/H# - H#, for |Im z| > ||B*FB||."""
    C = casida_operator(ctx, F)
    lam = ctx.eigenvalues
    x = C.coupling
    worst = 0.0
    for _ in range(count):
        z = complex(rng.uniform(-2, 2) * np.max(lam), (C.coupling_norm + 0.1) * (1 + rng.uniform()))
        ci = np.linalg.inv(C.resolvent_operator(z, lam))
        di = np.diag(1.0 / (z * z / lam - lam))
        worst = max(worst, float(np.max(np.abs(ci - di - 2 * ci @ x @ di))))
    return [_check("resolvent_identity", worst, tol, f"{count} points")]


def check_c_at_zero(ctx, F) -> list[Check]:
    C = casida_operator(ctx, F)
    dev = np.max(np.abs(C.resolvent_operator(0.0, ctx.eigenvalues) + m_operator(ctx, F)))
    return [_check("c_at_zero_equals_minus_m", dev, 0.0)]


# -- stability ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    strengths: np.ndarray
    sign_M: np.ndarray
    sign_C: np.ndarray
    reports: tuple

    @property
    def signs_agree(self) -> bool:
        return bool(np.all(self.sign_M == self.sign_C))

    def crossing(self, signs) -> int | None:
        """First sweep index (in increasing strength) from which the sign is positive for good."""
        bad = np.nonzero(signs <= 0)[0]
        return None if len(bad) == 0 else int(bad[-1]) + 1

    @property
    def crossing_offset(self) -> int:
        a, b = self.crossing(self.sign_M), self.crossing(self.sign_C)
        if a is None or b is None:
            return 0 if a == b else len(self.strengths)
        return abs(a - b)


def stability_sweep(ctx: ResponseContext, strengths, tol=1e-10) -> SweepResult:
    """Diagonal kernels c / rho0 over the given strengths."""
    sm, sc, reps = [], [], []
    for c in strengths:
        F = _local_kernel(ctx, c)
        rep = stability_report(ctx, F, tol)
        m_scale, c_scale = operator_scales(ctx, rep.coupling_norm)
        sm.append(sign_with_tol(rep.M_eigs, tol, m_scale))
        sc.append(sign_with_tol(rep.C_eigs, tol, c_scale))
        reps.append(rep)
    return SweepResult(np.asarray(strengths, dtype=float), np.array(sm), np.array(sc), tuple(reps))


def _local_kernel(ctx, c):
    return diagonal_kernel(c / ctx.density, ctx.weights, ctx.density, label="diagonal")


def sweep_strengths(lo=-2.0, hi=1.0, step=0.05) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def check_sweep(sweep: SweepResult, tag="") -> list[Check]:
    flips = float(np.sum(sweep.sign_M != sweep.sign_C))
    checks = [
        _check(f"sign_equivalence{tag}", flips, 0.0, f"{len(sweep.strengths)} strengths"),
        _check(f"crossing_colocated{tag}", sweep.crossing_offset, 1.0),
    ]
    return checks + check_stability_bounds(sweep.reports, tag)


def check_stability_bounds(reports, tag="") -> list[Check]:
    names = ("casida_lower_bound", "m_implies_c", "c_implies_m")
    out = []
    for name in names:
        fails = sum(not r.checks[name] for r in reports)
        out.append(_check(f"{name}{tag}", fails, 0.0, f"{len(reports)} kernels"))
    return out


def check_one_particle_remark(system: System, strengths, tol=1e-12) -> list[Check]:
    """For N = 1 and F = c / rho0, eig(C) = {lambda^2 + 2 c lambda}."""
    try:
        one = one_particle_sector(system)
        detail = "system potential"
    except DegenerateGroundState:
        # a symmetric one-particle sector can be degenerate; tilt it
        m = system.space.site_count
        one = one_particle_sector(system, potential=system.potential + 0.1 * np.arange(m) / m)
        detail = "tilted potential"
    ctx = one.context
    lam = ctx.eigenvalues
    worst = 0.0
    for c in strengths:
        got = casida_operator(ctx, _local_kernel(ctx, c)).eigenvalues
        want = np.sort(lam**2 + 2 * c * lam)
        worst = max(worst, float(np.max(np.abs(got - want))) / max(1.0, float(np.max(np.abs(want)))))
    return [_check("one_particle_casida", worst, tol, detail)]


# -- poles, spectra -----------------------------------------------------------------

def _pole_radius(locations, scale):
    locs = np.asarray(locations)
    if len(locs) < 2:
        return 0.1 * scale
    d = np.abs(locs[:, None] - locs[None, :])
    d[np.diag_indices(len(locs))] = np.inf
    return min(0.25 * float(np.min(d)), 0.1 * scale)


def contour_ranks(fn, table, scale, rank_tol=1e-8, nodes=64, radius=None):
    """Numerical rank and residue of ``fn`` at every pole location by contour quadrature."""
    r = _pole_radius(table.locations, scale) if radius is None else radius
    out = []
    for p in table.rows:
        res = contour_coefficient(fn, p.location, r, power=1 if p.order == 2 else 0, nodes=nodes)
        sv = np.linalg.svd(res, compute_uv=False)
        out.append((int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0, res))
    return out


def check_poles(ctx: ResponseContext, F: Kernel, rank_tol=1e-10) -> list[Check]:
    C = casida_operator(ctx, F)
    scale = float(np.max(ctx.eigenvalues))
    p0, pF = poles_chi0(ctx, rank_tol), poles_chiF(ctx, C, rank_tol)
    bare = poles_chiF(ctx, casida_operator(ctx, zero_kernel(ctx.weights, ctx.density)), rank_tol)
    same = len(bare) == len(p0) and all(
        abs(a.location - b.location) <= 1e-10 * scale and a.order == b.order and a.rank == b.rank
        for a, b in zip(bare.rows, p0.rows))
    mism = 0
    runs = ((p0, p0, lambda z: chi0_freq(ctx, z)), (pF.real_axis(), pF, lambda z: chiF_freq_direct(ctx, F, z)))
    for table, full, fn in runs:
        radius = _pole_radius(full.locations, scale)
        for p, (rank, res) in zip(table.rows, contour_ranks(fn, table, scale, radius=radius)):
            mism += rank != p.rank or np.max(np.abs(res - p.residue)) > 1e-6 * max(1.0, p.residue_norm)
    dark = [cl.energy for cl in single_particle_spectrum(ctx, rank_tol).dark]
    listed = sum(np.any(np.abs(p0.locations - e) <= 1e-9 * scale) for e in dark)
    return [
        _check("bare_poles_match", 0.0 if same else 1.0, 0.0),
        _check("contour_residue_ranks", mism, 0.0, f"{len(p0) + len(pF.real_axis())} poles"),
        _check("dark_poles_absent", listed, 0.0, f"{len(dark)} dark clusters"),
    ]


def check_stone(ctx: ResponseContext, etas) -> list[Check]:
    energies = np.array([ctx.cluster_energy(k) for k in range(len(ctx.clusters))])
    projs = np.array(ctx.cluster_products)
    lo = energies[0]
    width = 0.5 * lo if len(energies) == 1 else 0.5 * min(lo, energies[1] - lo)
    rep = stone_check(energies, projs, Bump(lo, width), etas)
    return [
        _check("stone_slope_low", rep.slope, 0.8, below=False),
        _check("stone_slope_high", rep.slope, 1.2),
        _check("stone_monotone", 0.0 if rep.monotone else 1.0, 0.0),
    ]


def check_polarizability(ctx: ResponseContext, F: Kernel, positions, eta=0.05) -> list[Check]:
    C = casida_operator(ctx, F)
    top = 1.5 * float(np.sqrt(max(np.max(np.abs(C.eigenvalues)), np.max(ctx.eigenvalues) ** 2)))
    series = polarizability(ctx, positions, np.linspace(0.0, top, 101), eta, C)
    asym = float(np.max(np.abs(series.values - np.swapaxes(series.values, 1, 2))))
    out = [_check("polarizability_symmetry", asym, 1e-10)]
    if np.min(m_operator_eigs(ctx, F)) >= 0:
        out.append(_check("polarizability_finite", 0.0 if np.all(np.isfinite(series.values)) else 1.0, 0.0))
    return out


def m_operator_eigs(ctx, F):
    return np.linalg.eigvalsh(m_operator(ctx, F))


# -- norms and the local density approximation ---------------------------------------

def random_orthogonal_states(ctx: ResponseContext, count: int, rng) -> np.ndarray:
    """Normalized states orthogonal to Psi0, one per column."""
    psi0 = ctx.ground.vector
    phi = rng.standard_normal((len(psi0), count))
    # second pass restores orthogonality lost to cancellation
    for _ in range(2):
        phi -= np.outer(psi0, psi0.conj() @ phi)
    return phi / np.linalg.norm(phi, axis=0)


def check_b_bounds(system: System, rng, count=1000) -> list[Check]:
    ctx = system.context
    n = system.particle_count
    phi = random_orthogonal_states(ctx, count, rng)
    sup = ctx.ground.support
    occ = system.basis.occupations.T[sup].astype(float) / ctx.weights[:, None]
    rho_phi = occ @ np.abs(phi) ** 2
    lhs = np.abs(ctx.B.matrix @ phi)
    rhs = np.sqrt(ctx.density[:, None] * rho_phi)
    excess = float(np.max(lhs - rhs * (1 + 1e-12) - 1e-14))
    return [
        _check("b_norm_bound", ctx.b_norm() / n, 1.0 + 1e-12, f"||B|| = {ctx.b_norm():.4f}, N = {n}"),
        _check("cauchy_schwarz_pointwise", max(excess, 0.0), 0.0, f"{count} states"),
    ]


def fxc_finite_difference_error(rhos, params: Pw92Params = Pw92Params(), rel_step=1e-4) -> float:
    rhos = np.asarray(rhos, dtype=float)
    h = rel_step * rhos
    e = lambda r: heg_energy_density(r, params)
    fd = (e(rhos + h) - 2 * e(rhos) + e(rhos - h)) / h**2
    exact = fxc_heg(rhos, params)
    return float(np.max(np.abs(fd - exact) / np.abs(exact)))


def fxc_small_density_constant(params: Pw92Params = Pw92Params(), lo=1e-8, hi=1.0, count=400):
    """sup of |f_xc(rho)| rho^(5/6) on [lo, hi] and the argmax."""
    rho = np.geomspace(lo, hi, count)
    scaled = np.abs(fxc_heg(rho, params)) * rho ** (5 / 6)
    k = int(np.argmax(scaled))
    return float(scaled[k]), float(rho[k])


def check_fxc(params: Pw92Params = Pw92Params(), tol=1e-6) -> list[Check]:
    err = fxc_finite_difference_error(np.geomspace(1e-6, 1e2, 20), params)
    K, at = fxc_small_density_constant(params)
    rho = np.geomspace(1e-8, 1.0, 2000)
    excess = float(np.max(np.abs(fxc_heg(rho, params)) - K * rho ** (-5 / 6) * (1 + 1e-12)))
    return [
        _check("fxc_finite_difference", err, tol, "20 densities"),
        _check("fxc_small_density_bound", max(excess, 0.0), 0.0, f"K = {K:.6g} attained at rho = {at:.3g}"),
    ]


# -- the full suite -----------------------------------------------------------------

def run_suite(system: System, F: Kernel, *, seed: int = 0, etas=(0.1, 0.05, 0.02, 0.01),
              strengths=None, n1_strengths=(-0.4, -0.1, 0.2, 0.5, 1.0), random_states=1000,
              z_points=20, rank_tol=1e-10, params: Pw92Params = Pw92Params()) -> list[Check]:
    """Every identity check on one system and one kernel (scaled when the time-domain check needs it)."""
    rng = np.random.default_rng(seed)
    ctx = system.context
    strengths = sweep_strengths() if strengths is None else strengths
    C = casida_operator(ctx, F)
    zs = off_pole_points(ctx, C, z_points, rng)
    Ft = limit_coupling(ctx, F)
    checks = []
    checks += check_dyson_time(ctx, Ft)
    checks += check_dyson_freq(ctx, F, zs)
    checks += check_zero_kernel(ctx, zs)
    checks += check_c_at_zero(ctx, F)
    checks += check_resolvent_identity(ctx, F, rng)
    checks += check_stability_bounds([stability_report(ctx, F)], "_kernel")
    checks += check_sweep(stability_sweep(ctx, strengths), "_sweep")
    checks += check_one_particle_remark(system, n1_strengths)
    checks += check_poles(ctx, F, rank_tol)
    checks += check_stone(ctx, etas)
    if system.space.positions is not None:
        checks += check_polarizability(ctx, F, system.space.positions)
    checks += check_b_bounds(system, rng, random_states)
    checks += check_gronwall(ctx, Ft)
    checks += check_fxc(params)
    return checks
