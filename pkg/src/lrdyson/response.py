"""The contraction operator B, the reduced Hamiltonian and the Kohn-Sham response chi_H.

Response matrices are stored as integral kernels on supp(rho0): the operator
acts as ``(chi g)(r) = sum_r' X[r, r'] g(r') mu(r')``.  With the counting
measure kernel and operator coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PoleProximity
from .fock import GroundState, ManyBodyBasis, ManyBodyOperator, SiteSpace, _frozen


@dataclass(frozen=True)
class BOperator:
    """B : H_N -> functions on supp(rho0), with adjoint taken in L2(Omega, mu)."""

    matrix: np.ndarray
    weights: np.ndarray

    @property
    def adjoint(self) -> np.ndarray:
        return self.matrix.conj().T * self.weights[None, :]

    def __call__(self, phi):
        return self.matrix @ phi

    def apply_adjoint(self, g):
        return self.adjoint @ g


@dataclass(frozen=True)
class ReducedHamiltonian:
    """Spectral data of H# = P (H - E0) P on the orthogonal complement of Psi0."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def omega1(self) -> float:
        return float(self.eigenvalues[0]) if len(self.eigenvalues) else float("inf")


@dataclass(frozen=True)
class ResponseContext:
    ground: GroundState
    B: BOperator
    hsharp: ReducedHamiltonian
    clusters: tuple
    weights: np.ndarray
    density: np.ndarray
    # B applied to the H# eigenvectors, shape (S, D-1)
    W: np.ndarray = field(repr=False)
    cluster_products: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.W.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.hsharp.eigenvalues

    @property
    def omega1(self) -> float:
        return self.hsharp.omega1

    def cluster_energy(self, k: int) -> float:
        return float(np.mean(self.eigenvalues[self.clusters[k]]))

    def pole_guard(self) -> float:
        lam = self.eigenvalues
        return 1e-8 * float(np.max(lam) ** 2) if len(lam) else 0.0

    def b_norm(self) -> float:
        """||B|| from H_N to L2_{1/rho0}."""
        return weighted_b_norm(self.B.matrix, self.density, self.weights)

    def weighted_norm(self, kernel: np.ndarray) -> float:
        """Operator norm of a response kernel from L2_{rho0} to L2_{1/rho0}."""
        s = np.sqrt(self.weights / self.density)
        return float(np.linalg.norm(s[:, None] * kernel * s[None, :], 2)) if kernel.size else 0.0


def weighted_b_norm(B: np.ndarray, density, weights) -> float:
    if B.size == 0:
        return 0.0
    s = np.sqrt(np.asarray(weights) / np.asarray(density))
    return float(np.linalg.norm(s[:, None] * B, 2))


def _cluster(eigenvalues, tol):
    groups = []
    start = 0
    for k in range(1, len(eigenvalues) + 1):
        if k == len(eigenvalues) or eigenvalues[k] - eigenvalues[k - 1] > tol * max(abs(eigenvalues[k]), abs(eigenvalues[k - 1])):
            groups.append(np.arange(start, k))
            start = k
    return tuple(_frozen(g) for g in groups)


def build_b_matrix(gs: GroundState, basis: ManyBodyBasis, space: SiteSpace) -> np.ndarray:
    """B[r, K] = <Psi0| n_r |e_K> / mu_r - <Psi0, e_K> rho0(r), rows restricted to supp(rho0)."""
    sup = gs.support
    occ = basis.occupations.T[sup].astype(float)
    psi = np.conj(gs.vector)
    return (occ / space.weights[sup, None] - gs.density[sup, None]) * psi[None, :]


def build_response_context(H: ManyBodyOperator, gs: GroundState, space: SiteSpace,
                           basis: ManyBodyBasis | None = None, cluster_tol: float = 1e-9) -> ResponseContext:
    basis = H.basis if basis is None else basis
    evals, evecs = np.linalg.eigh(np.asarray(H.matrix))
    psi0 = gs.vector
    if abs(abs(np.vdot(evecs[:, 0], psi0)) - 1.0) > 1e-8:
        raise ValueError("ground state does not belong to this Hamiltonian")
    lam = evals[1:] - gs.energy
    V = evecs[:, 1:]
    V = V - np.outer(psi0, np.conj(psi0) @ V)
    if not np.iscomplexobj(H.matrix):
        V = V.real
    Bm = build_b_matrix(gs, basis, space)
    sup = gs.support
    W = Bm @ V
    clusters = _cluster(lam, cluster_tol)
    products = tuple(_frozen(W[:, c] @ W[:, c].conj().T) for c in clusters)
    return ResponseContext(
        ground=gs,
        B=BOperator(_frozen(Bm), _frozen(space.weights[sup])),
        hsharp=ReducedHamiltonian(_frozen(lam), _frozen(V)),
        clusters=clusters,
        weights=_frozen(space.weights[sup]),
        density=_frozen(gs.density[sup]),
        W=_frozen(W),
        cluster_products=products,
    )


def chi0_time(ctx: ResponseContext, t) -> np.ndarray:
    """chi_H(t) = -2 theta(t) B sin(t H#) B*.  Vectorized over an array of times."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t)
    s = np.where(tt[:, None] > 0, np.sin(tt[:, None] * ctx.eigenvalues[None, :]), 0.0)
    out = -2.0 * np.einsum("ak,tk,bk->tab", ctx.W, s, ctx.W.conj())
    if not np.iscomplexobj(ctx.W):
        out = out.real
    return out[0] if scalar else out


def chi0_freq(ctx: ResponseContext, z: complex, pole_guard: float | None = None) -> np.ndarray:
    """Fourier transform of chi_H continued to complex z: sum_k 2 l_k / (z^2 - l_k^2) B P_k B*."""
    z = complex(z)
    lam = ctx.eigenvalues
    guard = ctx.pole_guard() if pole_guard is None else pole_guard
    denom = z * z - lam**2
    if len(lam) and np.min(np.abs(denom)) <= guard:
        k = int(np.argmin(np.abs(denom)))
        raise PoleProximity(f"z = {z} is within {guard:.2e} of the pole at +/-{lam[k]:.6g}")
    coef = 2.0 * lam / denom
    return (ctx.W * coef[None, :]) @ ctx.W.conj().T


@dataclass(frozen=True)
class ExcitationCluster:
    energy: float
    multiplicity: int
    response_rank: int

    @property
    def bright(self) -> bool:
        return self.response_rank > 0


@dataclass(frozen=True)
class ExcitationReport:
    clusters: tuple

    @property
    def bright(self):
        return [c for c in self.clusters if c.bright]

    @property
    def dark(self):
        return [c for c in self.clusters if not c.bright]


def numerical_rank(a: np.ndarray, scale: float, rank_tol: float) -> int:
    if a.size == 0 or scale == 0.0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > rank_tol * scale))


def single_particle_spectrum(ctx: ResponseContext, rank_tol: float = 1e-10) -> ExcitationReport:
    """Per eigenvalue cluster of H#, the rank of B restricted to its eigenspace.

    Singular values are compared against ``rank_tol`` times the largest
    singular value of B on the whole complement of Psi0.
    """
    scale = float(np.linalg.norm(ctx.W, 2)) if ctx.W.size else 0.0
    out = []
    for k, idx in enumerate(ctx.clusters):
        r = numerical_rank(ctx.W[:, idx], scale, rank_tol)
        out.append(ExcitationCluster(ctx.cluster_energy(k), len(idx), r))
    return ExcitationReport(tuple(out))
