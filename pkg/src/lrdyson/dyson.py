"""Solutions of the adiabatic Dyson equation chi_F = chi_0 + chi_0 * F chi_F.

Three independent routes are provided:

* :func:`solve_dyson_time` marches the Volterra equation with the trapezoidal rule,
* :func:`chiF_time_sinc` and :func:`chiF_freq` evaluate the closed forms built on the
  Casida operator C = H#^2 + 2 H#^1/2 B*FB H#^1/2,
* :func:`chiF_freq_direct` inverts the dielectric operator 1 - chi0(z) F.

All operators on the complement of Psi0 are expressed in the eigenbasis of H#.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PoleProximity, SingularDielectric
from .fock import _frozen
from .kernels import Kernel, bfb_operator
from .response import ResponseContext, chi0_freq, chi0_time

ZERO_TOL = 1e-10


@dataclass(frozen=True)
class CasidaOperator:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)
    coupling_norm: float
    # B H#^1/2 in the eigenbasis of C, shape (S, D-1)
    Y: np.ndarray = field(repr=False)
    # B*FB vanishes identically: C = H#^2 and chi_F = chi_0
    trivial: bool = False

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0]) if len(self.eigenvalues) else float("inf")

    def resolvent_operator(self, z: complex, lam: np.ndarray) -> np.ndarray:
        """C(z) = z^2 H#^-1 - H# - 2 B*FB."""
        z = complex(z)
        return np.diag(z * z / lam - lam) - 2.0 * self.coupling


def casida_lower_bound(omega1: float, coupling_norm: float) -> float:
    if omega1 >= coupling_norm:
        return omega1 * (omega1 - 2.0 * coupling_norm)
    return -coupling_norm**2


def casida_operator(ctx: ResponseContext, F: Kernel) -> CasidaOperator:
    blk = bfb_operator(ctx, F)
    lam = ctx.eigenvalues
    root = np.sqrt(lam)
    x = blk.matrix
    c = np.diag(lam**2) + 2.0 * root[:, None] * x * root[None, :]
    c = 0.5 * (c + c.T)
    trivial = not np.any(x)
    if trivial:
        evals, evecs = lam**2, np.eye(len(lam))
    else:
        evals, evecs = np.linalg.eigh(c)
    Y = (ctx.W * root[None, :]) @ evecs
    return CasidaOperator(
        matrix=_frozen(c), eigenvalues=_frozen(evals), eigenvectors=_frozen(evecs),
        coupling=x, coupling_norm=blk.norm, Y=_frozen(Y), trivial=trivial,
    )


def m_operator(ctx: ResponseContext, F: Kernel) -> np.ndarray:
    """M = H# + 2 B*FB."""
    return np.diag(ctx.eigenvalues) + 2.0 * bfb_operator(ctx, F).matrix


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.steps < 0:
            raise ValueError("number of steps must be nonnegative")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @classmethod
    def covering(cls, t_max: float, dt: float) -> "TimeGrid":
        return cls(dt, int(np.ceil(t_max / dt - 1e-12)))


def default_time_step(ctx: ResponseContext, factor: float = 0.05) -> float:
    """Largest step with max(lambda) * dt <= factor."""
    return factor / float(np.max(ctx.eigenvalues))


def frequency_grid(omega_min: float, omega_max: float, count: int, eta: float) -> np.ndarray:
    return np.linspace(omega_min, omega_max, count) + 1j * eta


def solve_dyson_time(chi0, F: Kernel, grid: TimeGrid | float) -> np.ndarray:
    """Trapezoidal Volterra marching on a uniform grid.

    ``chi0`` holds chi_0 at the nodes t_n = n dt.  Because chi_0(0) = 0 the
    implicit end-point term drops out and each step is explicit:

        chi_F(t_n) = chi_0(t_n) + dt * sum_j w_j chi_0(t_n - t_j) F chi_F(t_j),

    with w_0 = w_n = 1/2 and w_j = 1 otherwise.
    """
    chi0 = np.asarray(chi0)
    dt = grid.dt if isinstance(grid, TimeGrid) else float(grid)
    if isinstance(grid, TimeGrid) and grid.steps + 1 != len(chi0):
        raise ValueError("time series length does not match the grid")
    if not dt > 0:
        raise ValueError("time step must be positive")
    if np.max(np.abs(chi0[0]), initial=0.0) > 1e-12:
        raise ValueError("chi_0(0) must vanish for the explicit trapezoidal scheme")
    n_t, s, _ = chi0.shape
    kmu = F.sandwiched
    out = np.empty_like(chi0)
    out[0] = chi0[0]
    # reversed history laid out side by side so each convolution is one matrix product
    rev = np.ascontiguousarray(chi0[::-1].transpose(1, 0, 2).reshape(s, n_t * s))
    g = np.empty((n_t * s, s), dtype=np.result_type(chi0, kmu))
    g[:s] = kmu @ out[0]
    last = n_t - 1
    for n in range(1, n_t):
        acc = 0.5 * (chi0[n] @ g[:s])
        if n > 1:
            acc = acc + rev[:, (last - n + 1) * s:last * s] @ g[s:n * s]
        out[n] = chi0[n] + dt * acc
        g[n * s:(n + 1) * s] = kmu @ out[n]
    return out


def _sinc_sqrt(x):
    """sinc(sqrt(x)) continued analytically to x < 0 (sinh(sqrt(-x)) / sqrt(-x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-8
    pos = (x > 0) & ~small
    neg = (x < 0) & ~small
    r = np.sqrt(x[pos])
    out[pos] = np.sin(r) / r
    r = np.sqrt(-x[neg])
    out[neg] = np.sinh(r) / r
    xs = x[small]
    out[small] = 1.0 - xs / 6.0 + xs * xs / 120.0
    return out


def _casida_time(ctx, C, t, select=None):
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t)
    c = C.eigenvalues
    f = _sinc_sqrt(tt[:, None] ** 2 * c[None, :])
    f = np.where(tt[:, None] > 0, tt[:, None] * f, 0.0)
    if select is not None:
        f = f * select[None, :]
    out = -2.0 * np.einsum("ak,tk,bk->tab", C.Y, f, C.Y.conj())
    if not np.iscomplexobj(C.Y):
        out = out.real
    return out[0] if scalar else out


def chiF_time_sinc(ctx: ResponseContext, C: CasidaOperator, t) -> np.ndarray:
    """chi_F(t) = -2 theta(t) t B H#^1/2 sinc(t sqrt(C)) H#^1/2 B*."""
    if C.trivial:
        return chi0_time(ctx, t)
    return _casida_time(ctx, C, t)


def chiF_time_parts(ctx: ResponseContext, C: CasidaOperator, t):
    """Split chi_F into the bounded part (spectrum of C in (0, inf)) and the rest."""
    positive = (C.eigenvalues > 0).astype(float)
    return _casida_time(ctx, C, t, positive), _casida_time(ctx, C, t, 1.0 - positive)


def chiF_freq(ctx: ResponseContext, C: CasidaOperator, z: complex, pole_guard: float | None = None) -> np.ndarray:
    """chi_F^(z) = 2 B H#^1/2 (z^2 - C)^-1 H#^1/2 B*."""
    if C.trivial:
        return chi0_freq(ctx, z, pole_guard)
    z = complex(z)
    c = C.eigenvalues
    if not len(c):
        return np.zeros((ctx.size, ctx.size), dtype=complex)
    guard = 1e-8 * float(np.max(np.abs(c))) if pole_guard is None else pole_guard
    denom = z * z - c
    if np.min(np.abs(denom)) <= guard:
        k = int(np.argmin(np.abs(denom)))
        raise PoleProximity(f"z^2 = {z * z} is within {guard:.2e} of the Casida eigenvalue {c[k]:.6g}")
    return (C.Y * (2.0 / denom)[None, :]) @ C.Y.conj().T


def dielectric(ctx: ResponseContext, F: Kernel, z: complex) -> np.ndarray:
    """epsilon(z) = 1 - chi0^(z) F, as a matrix on supp(rho0)."""
    return np.eye(ctx.size) - chi0_freq(ctx, z) @ F.sandwiched


def chiF_freq_direct(ctx: ResponseContext, F: Kernel, z: complex, max_condition: float = 1e12) -> np.ndarray:
    """Solve (1 - chi0^(z) F) chi_F^(z) = chi0^(z) by a dense linear solve."""
    x0 = chi0_freq(ctx, z)
    eps = np.eye(ctx.size) - x0 @ F.sandwiched
    if ctx.size == 0:
        return x0
    cond = np.linalg.cond(eps)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularDielectric(f"dielectric operator at z = {complex(z)} has condition number {cond:.3e}")
    return np.linalg.solve(eps, x0)


@dataclass(frozen=True)
class StabilityReport:
    M_eigs: np.ndarray
    C_eigs: np.ndarray
    verdict: str
    growth_bound: float
    delta_used: float
    omega1: float
    coupling_norm: float
    casida_bound: float
    checks: dict

    @property
    def min_M(self) -> float:
        return float(self.M_eigs[0])

    @property
    def min_C(self) -> float:
        return float(self.C_eigs[0])


def sign_with_tol(eigs, tol: float = ZERO_TOL, scale: float | None = None) -> int:
    """Sign of the smallest eigenvalue; values within tol * scale count as zero.

    ``scale`` defaults to max|eig|.  Pass the size of the operator's building
    blocks when every eigenvalue may vanish (e.g. a marginal 1 x 1 operator).
    """
    lo = float(eigs[0])
    scale = float(np.max(np.abs(eigs))) if scale is None else scale
    if abs(lo) <= tol * scale:
        return 0
    return 1 if lo > 0 else -1


def operator_scales(ctx: ResponseContext, coupling_norm: float):
    """Reference magnitudes of M and C: ||H#|| + 2||B*FB|| and ||H#||^2 + 2||H#|| ||B*FB||."""
    top = float(np.max(ctx.eigenvalues))
    return top + 2 * coupling_norm, top * top + 2 * top * coupling_norm


def stability_report(ctx: ResponseContext, F: Kernel, tol: float = ZERO_TOL) -> StabilityReport:
    m_eigs = np.linalg.eigvalsh(m_operator(ctx, F))
    C = casida_operator(ctx, F)
    c_eigs = C.eigenvalues
    v = C.coupling_norm
    w1 = ctx.omega1
    m_scale, c_scale = operator_scales(ctx, v)
    sm, sc = sign_with_tol(m_eigs, tol, m_scale), sign_with_tol(c_eigs, tol, c_scale)
    verdict = {1: "stable", 0: "marginal", -1: "unstable"}[sm]
    min_m, min_c = float(m_eigs[0]), float(c_eigs[0])
    slack = tol * max(1.0, c_scale)
    bound = casida_lower_bound(w1, v)
    checks = {
        "sign_equivalence": sm == sc,
        "casida_lower_bound": min_c >= bound - slack,
        # M >= delta > 0  implies  C >= delta * omega1
        "m_implies_c": min_m <= 0 or min_c >= min_m * w1 - slack,
        # C >= delta > 0  implies  M >= sqrt(||B*FB||^2 + delta) - ||B*FB||
        "c_implies_m": min_c <= 0 or min_m >= np.sqrt(v * v + min_c) - v - slack,
    }
    return StabilityReport(
        M_eigs=_frozen(m_eigs), C_eigs=_frozen(c_eigs), verdict=verdict,
        growth_bound=float(np.sqrt(max(0.0, -min_c))), delta_used=min_m,
        omega1=w1, coupling_norm=v, casida_bound=bound, checks=checks,
    )
