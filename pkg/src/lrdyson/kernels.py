"""Adiabatic Hxc kernels on supp(rho0): RPA, ALDA (exchange + PW92 correlation), PGG, diagonal.

A :class:`Kernel` stores the integral kernel ``K`` of F with respect to the
site measure, i.e. ``(F g)(r) = sum_r' K[r, r'] g(r') mu(r')``.  A purely local
multiplier ``(F g)(r) = f(r) g(r)`` therefore has kernel ``diag(f / mu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fock import GroundState, ManyBodyBasis, SiteSpace, _frozen, hop
from .response import ResponseContext

FAMILIES = ("none", "rpa", "alda", "pgg", "diagonal")


@dataclass(frozen=True)
class Kernel:
    matrix: np.ndarray
    label: str
    weights: np.ndarray
    density: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def sandwiched(self) -> np.ndarray:
        """diag(mu) K diag(mu): the matrix that appears between B^H and B."""
        return self.weights[:, None] * self.matrix * self.weights[None, :]

    @property
    def weighted_norm(self) -> float:
        """||F|| as a map L2_{1/rho0} -> L2_{rho0}."""
        if self.density is None:
            raise ValueError("kernel was built without a density; weighted norm undefined")
        s = np.sqrt(self.density * self.weights)
        return float(np.linalg.norm(s[:, None] * self.matrix * s[None, :], 2))

    def min_weighted_eigenvalue(self) -> float:
        """Smallest eigenvalue of diag(sqrt(rho0 mu)) K diag(sqrt(rho0 mu)) (positivity probe)."""
        s = np.sqrt(self.density * self.weights)
        return float(np.linalg.eigvalsh(s[:, None] * self.matrix * s[None, :])[0])

    def apply(self, g):
        return self.matrix @ (self.weights * g)

    def scaled(self, factor: float) -> "Kernel":
        return replace(self, matrix=_frozen(factor * self.matrix), label=self.label)

    def is_zero(self) -> bool:
        return not np.any(self.matrix)


def _kernel(matrix, label, weights, density=None):
    matrix = np.asarray(matrix, dtype=float)
    if not np.array_equal(matrix, matrix.T):
        raise ValueError(f"{label} kernel is not symmetric")
    return Kernel(_frozen(matrix), label, _frozen(weights), None if density is None else _frozen(density))


def _support(space: SiteSpace, support_mask):
    if support_mask is None:
        return np.arange(space.site_count)
    return np.nonzero(np.asarray(support_mask))[0]


def zero_kernel(weights, density=None) -> Kernel:
    n = len(weights)
    return _kernel(np.zeros((n, n)), "none", weights, density)


def rpa_kernel(space: SiteSpace, support_mask=None, softening: float = 1.0, density=None) -> Kernel:
    """Bare Coulomb kernel 1/d(r, r') with on-site value 1/softening.

    ``density`` is the full-length ground-state density; it is only needed
    for the weighted norm.
    """
    if softening <= 0:
        raise ValueError("softening must be positive")
    sup = _support(space, support_mask)
    d = space.distance_matrix[np.ix_(sup, sup)]
    off = ~np.eye(len(sup), dtype=bool)
    if np.any(d[off] == 0):
        raise ValueError("coincident sites: zero distance between distinct sites")
    k = np.empty_like(d)
    k[off] = 1.0 / d[off]
    k[~off] = 1.0 / softening
    return _kernel(k, "rpa", space.weights[sup], None if density is None else np.asarray(density)[sup])


@dataclass(frozen=True)
class Pw92Params:
    """Homogeneous electron gas exchange-correlation parameters.

    The correlation energy per particle is written directly in the density,

        eps_c = -2 A (1 + a1 rho^-1/3) log(1 + 1 / (b1 rho^-1/6 + b2 rho^-1/3 + b3 rho^-1/2 + b4 rho^-(1+P)/3)),

    and exchange is ``eps_x = -C rho^(1/3)``.  Defaults are the Perdew-Wang
    (1992) unpolarized numbers used verbatim in this density form.  Use
    :meth:`from_rs` for constants converted from the usual Wigner-Seitz form.
    """

    A: float = 0.031091
    alpha1: float = 0.21370
    beta1: float = 7.5957
    beta2: float = 3.5876
    beta3: float = 1.6382
    beta4: float = 0.49294
    P: float = 1.0
    exchange_C: float = 0.75 * (3.0 / np.pi) ** (1.0 / 3.0)
    exchange: bool = True
    correlation: bool = True

    def __post_init__(self):
        for name in ("A", "alpha1", "beta1", "beta2", "beta3", "beta4", "exchange_C"):
            if not getattr(self, name) > 0:
                raise ValueError(f"PW92 parameter {name} must be positive")
        if self.P not in (0.75, 1.0):
            raise ValueError("P must be 0.75 or 1")

    @classmethod
    def from_rs(cls, A=0.031091, alpha1=0.21370, beta1=7.5957, beta2=3.5876, beta3=1.6382,
                beta4=0.49294, P=1.0, **kw) -> "Pw92Params":
        """Convert Wigner-Seitz radius constants (rs = (3 / 4 pi rho)^1/3) to the density form."""
        k = (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
        return cls(
            A=A, alpha1=alpha1 * k,
            beta1=2 * A * beta1 * k**0.5, beta2=2 * A * beta2 * k,
            beta3=2 * A * beta3 * k**1.5, beta4=2 * A * beta4 * k ** (P + 1),
            P=P, **kw,
        )

    def _q_terms(self):
        return ((self.beta1, 1 / 6), (self.beta2, 1 / 3), (self.beta3, 1 / 2), (self.beta4, (1 + self.P) / 3))


def heg_energy_density(rho, params: Pw92Params = Pw92Params()):
    """rho * eps_xc(rho) for the homogeneous electron gas."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    if params.exchange:
        out = out - params.exchange_C * rho ** (4 / 3)
    if params.correlation:
        q = sum(b * rho ** (-p) for b, p in params._q_terms())
        out = out - 2 * params.A * (rho + params.alpha1 * rho ** (2 / 3)) * np.log1p(1 / q)
    return out


def fxc_heg(rho, params: Pw92Params = Pw92Params()):
    """d^2 (rho eps_xc) / d rho^2 in closed form."""
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise ValueError("f_xc needs a strictly positive density")
    out = np.zeros_like(rho)
    if params.exchange:
        out = out - (4 / 9) * params.exchange_C * rho ** (-2 / 3)
    if params.correlation:
        a1 = params.alpha1
        u = rho + a1 * rho ** (2 / 3)
        du = 1 + (2 / 3) * a1 * rho ** (-1 / 3)
        d2u = -(2 / 9) * a1 * rho ** (-4 / 3)
        terms = params._q_terms()
        q = sum(b * rho ** (-p) for b, p in terms)
        dq = sum(-p * b * rho ** (-p - 1) for b, p in terms)
        d2q = sum(p * (p + 1) * b * rho ** (-p - 2) for b, p in terms)
        # L = log(1 + 1/q), written to avoid cancellation for large q
        L = np.log1p(1 / q)
        dL = -dq / (q * (q + 1))
        d2L = -d2q / (q * (q + 1)) + dq**2 * (2 * q + 1) / (q * q * (q + 1) ** 2)
        out = out - 2 * params.A * (d2u * L + 2 * du * dL + u * d2L)
    return out if out.ndim else float(out)


def alda_kernel(density, space: SiteSpace, params: Pw92Params, rpa: Kernel, support_mask=None) -> Kernel:
    """RPA plus the local ALDA response f_xc(rho0(r))."""
    sup = _support(space, support_mask)
    rho = np.asarray(density, dtype=float)[sup]
    if len(sup) != rpa.size:
        raise ValueError("RPA kernel lives on a different support")
    fxc = fxc_heg(rho, params)
    k = rpa.matrix + np.diag(np.atleast_1d(fxc) / space.weights[sup])
    return _kernel(k, "alda", space.weights[sup], rho)


@dataclass(frozen=True)
class OneBodyDensityMatrix:
    """gamma[r, r'] = <Psi0| a+_r' a_r |Psi0> in the site-orbital basis."""

    matrix: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def density(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)) / self.weights

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def one_body_density_matrix(gs: GroundState, basis: ManyBodyBasis, space: SiteSpace) -> OneBodyDensityMatrix:
    psi = gs.vector
    m = space.site_count
    gamma = np.zeros((m, m), dtype=psi.dtype)
    gamma[np.arange(m), np.arange(m)] = basis.occupations.T @ (np.abs(psi) ** 2)
    for r in range(m):
        for rp in range(m):
            if r == rp:
                continue
            # a+_rp a_r moves a particle from r to rp
            src, dst, sign = hop(basis, rp, r)
            gamma[r, rp] = np.sum(np.conj(psi[dst]) * sign * psi[src])
    return OneBodyDensityMatrix(_frozen(gamma), space.weights)


def pgg_kernel(density, gamma: OneBodyDensityMatrix, space: SiteSpace, softening: float = 1.0,
               support_mask=None, guard: float = 1e-14) -> Kernel:
    """RPA screened by 1 - |gamma(r,r')|^2 / (2 rho0(r) rho0(r'))."""
    sup = _support(space, support_mask)
    occ = np.real(np.diag(gamma.matrix))[sup]
    if np.any(occ <= guard):
        raise ValueError("PGG kernel needs rho0 above the division guard on its support")
    mult = pgg_multiplier(gamma, sup)
    mult = 0.5 * (mult + mult.T)
    rpa = rpa_kernel(space, support_mask, softening)
    return _kernel(rpa.matrix * mult, "pgg", space.weights[sup], np.asarray(density, dtype=float)[sup])


def pgg_multiplier(gamma: OneBodyDensityMatrix, support) -> np.ndarray:
    occ = np.real(np.diag(gamma.matrix))[support]
    g = gamma.matrix[np.ix_(support, support)]
    return 1.0 - 0.5 * np.abs(g) ** 2 / np.outer(occ, occ)


def diagonal_kernel(values, weights=None, density=None, label: str = "diagonal") -> Kernel:
    """Local multiplier kernel (F g)(r) = values[r] g(r)."""
    values = np.asarray(values, dtype=float)
    w = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=float)
    return _kernel(np.diag(values / w), label, w, density)


@dataclass(frozen=True)
class CouplingBlock:
    """B* F B expressed in the eigenbasis of H#."""

    matrix: np.ndarray
    norm: float


def bfb_operator(ctx: ResponseContext, F: Kernel) -> CouplingBlock:
    if F.size != ctx.size:
        raise ValueError(f"kernel acts on {F.size} sites, response context on {ctx.size}")
    x = ctx.W.conj().T @ F.sandwiched @ ctx.W
    # exact hermiticity; the product is only hermitian up to rounding
    x = 0.5 * (x + x.conj().T)
    norm = float(np.linalg.norm(x, 2)) if x.size else 0.0
    return CouplingBlock(_frozen(x), norm)
