"""Discrete single-particle spaces, Slater-determinant bases and many-body Hamiltonians.

Sites are labelled ``0..M-1`` and a determinant is an occupation bitmask with
bit ``i`` set when site ``i`` is occupied.  The state of a bitmask is
``a+_{i1} a+_{i2} ... a+_{iN} |0>`` with ``i1 < i2 < ... < iN``, so applying
``a+_j`` or ``a_j`` picks up the Jordan-Wigner sign ``(-1)^(# occupied sites < j)``.

Site orbitals are ``e_i / sqrt(mu_i)`` (orthonormal in L2(Omega, mu)); densities
are therefore occupation numbers divided by the site weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import DegenerateGroundState, NonHermitian

MAX_SITES = 16
MAX_DIMENSION = 20_000


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SiteSpace:
    """The discrete measure space (Omega, mu)."""

    site_count: int
    weights: np.ndarray
    distance_matrix: np.ndarray
    positions: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return 0 if self.positions is None else self.positions.shape[1]


def build_site_space(site_count=None, weights=None, positions=None, distance_matrix=None) -> SiteSpace:
    """Validate a site description and derive the distance matrix.

    ``site_count`` may be omitted when positions, weights or a distance matrix
    fix it.  Weights default to the counting measure.  When neither positions
    nor distances are given the distance matrix is the chain metric ``|i - j|``.
    """
    if positions is not None:
        positions = np.asarray(positions, dtype=float)
        if positions.ndim == 1:
            positions = positions[:, None]
        if positions.ndim != 2:
            raise ValueError("positions must be a (M, d) array")
    sizes = {
        n for n in (
            site_count,
            None if weights is None else len(weights),
            None if positions is None else positions.shape[0],
            None if distance_matrix is None else len(distance_matrix),
        ) if n is not None
    }
    if len(sizes) != 1:
        raise ValueError(f"inconsistent site counts {sorted(sizes)}")
    m = sizes.pop()
    if m < 1:
        raise ValueError("need at least one site")

    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("site weights must be positive and finite")

    if positions is not None:
        diff = positions[:, None, :] - positions[None, :, :]
        derived = np.sqrt(np.sum(diff**2, axis=-1))
        if distance_matrix is not None:
            given = np.asarray(distance_matrix, dtype=float)
            if given.shape != (m, m) or np.max(np.abs(given - derived)) > 1e-12:
                raise ValueError("positions do not reproduce the given distance matrix")
        d = derived
    elif distance_matrix is not None:
        d = np.asarray(distance_matrix, dtype=float)
        if d.shape != (m, m):
            raise ValueError("distance matrix must be M x M")
        if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")
    else:
        idx = np.arange(m, dtype=float)
        d = np.abs(idx[:, None] - idx[None, :])

    return SiteSpace(
        site_count=m,
        weights=_frozen(w),
        distance_matrix=_frozen(d),
        positions=None if positions is None else _frozen(positions),
    )


def ring_positions(m: int, spacing: float = 1.0) -> np.ndarray:
    """Planar coordinates of ``m`` sites on a circle with nearest-neighbour chord ``spacing``."""
    if m == 1:
        return np.zeros((1, 2))
    radius = spacing / (2 * np.sin(np.pi / m))
    phi = 2 * np.pi * np.arange(m) / m
    return radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)


@dataclass(frozen=True)
class ManyBodyBasis:
    """Canonically ordered determinants of the N-fermion space on M sites."""

    site_count: int
    particle_count: int
    determinants: np.ndarray
    occupations: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.determinants)

    def index(self, bitmask) -> np.ndarray | int:
        """Position of ``bitmask`` (scalar or array) in the basis; -1 when absent."""
        b = np.asarray(bitmask, dtype=np.int64)
        pos = np.searchsorted(self.determinants, b)
        pos = np.minimum(pos, self.dimension - 1)
        found = self.determinants[pos] == b
        out = np.where(found, pos, -1)
        return int(out) if out.ndim == 0 else out


def enumerate_basis(m: int, n: int, max_dimension: int = MAX_DIMENSION) -> ManyBodyBasis:
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= N <= M, got N={n}, M={m}")
    if m > MAX_SITES:
        raise ValueError(f"at most {MAX_SITES} sites supported")
    if comb(m, n) > max_dimension:
        raise ValueError(f"dimension C({m},{n}) = {comb(m, n)} exceeds cap {max_dimension}")
    dets = sorted(sum(1 << i for i in c) for c in combinations(range(m), n))
    dets = np.array(dets, dtype=np.int64)
    occ = ((dets[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    return ManyBodyBasis(m, n, _frozen(dets), _frozen(occ))


@dataclass(frozen=True)
class ManyBodyOperator:
    matrix: np.ndarray
    basis: ManyBodyBasis = field(repr=False)
    hermitian: bool = True


def _check_hermitian(a, what="matrix"):
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.conj().T)) > 1e-12 * scale:
        raise NonHermitian(f"{what} is not hermitian")


def hop(basis: ManyBodyBasis, i: int, j: int):
    """Action of a+_i a_j (i != j): source indices, target indices and fermionic signs."""
    src = np.nonzero(basis.occupations[:, j] & ~basis.occupations[:, i])[0]
    old = basis.determinants[src]
    new = (old ^ (1 << j)) | (1 << i)
    lo, hi = min(i, j), max(i, j)
    between = ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)
    sign = 1.0 - 2.0 * (np.bitwise_count(old & between) & 1)
    return src, basis.index(new), sign


def build_hamiltonian(space: SiteSpace, basis: ManyBodyBasis, hopping, potential=None, interaction=None) -> ManyBodyOperator:
    """Second-quantized H = sum h_ij a+_i a_j + sum v_i n_i + 1/2 sum_{i!=j} U_ij n_i n_j."""
    m = space.site_count
    if basis.site_count != m:
        raise ValueError("basis and site space disagree on the number of sites")
    h = np.asarray(hopping)
    if np.iscomplexobj(h):
        if np.any(np.imag(h) != 0):
            raise ValueError("hopping must be real (Hamiltonian must commute with complex conjugation)")
        h = h.real
    h = h.astype(float)
    if h.shape != (m, m):
        raise ValueError(f"hopping must be {m}x{m}")
    if not np.array_equal(h, h.T):
        raise ValueError("hopping must be symmetric")
    v = np.zeros(m) if potential is None else np.asarray(potential, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"potential must have {m} entries")
    u = np.zeros((m, m)) if interaction is None else np.asarray(interaction, dtype=float)
    if u.shape != (m, m) or not np.array_equal(u, u.T):
        raise ValueError("interaction must be a symmetric M x M matrix")
    if np.any(np.diag(u) != 0):
        raise ValueError("interaction must have zero diagonal")

    occ = basis.occupations.astype(float)
    dim = basis.dimension
    mat = np.zeros((dim, dim))
    diag = occ @ (np.diag(h) + v) + 0.5 * np.einsum("ki,ij,kj->k", occ, u, occ)
    mat[np.arange(dim), np.arange(dim)] = diag

    for i in range(m):
        for j in range(m):
            if i == j or h[i, j] == 0.0:
                continue
            src, dst, sign = hop(basis, i, j)
            mat[dst, src] += h[i, j] * sign

    return ManyBodyOperator(_frozen(mat), basis, hermitian=True)


@dataclass(frozen=True)
class GroundState:
    energy: float
    vector: np.ndarray
    gap: float
    density: np.ndarray
    support_mask: np.ndarray
    spectrum: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.support_mask)[0]


def _fix_phase(vec):
    k = int(np.argmax(np.abs(vec)))
    phase = vec[k] / abs(vec[k])
    vec = vec / phase
    if np.iscomplexobj(vec) and np.max(np.abs(vec.imag)) <= 1e-14 * np.max(np.abs(vec)):
        vec = vec.real
    return vec


def ground_state(H: ManyBodyOperator, space: SiteSpace, gap_tol: float | None = None,
                 support_threshold: float | None = None) -> GroundState:
    """Lowest eigenpair, spectral gap and ground-state density.

    ``gap_tol`` defaults to ``1e-8 * (E_max - E0)``; ``support_threshold`` to
    ``1e-12 * max(rho0)``.  The phase is fixed so that the largest-magnitude
    amplitude is real and positive.
    """
    a = np.asarray(H.matrix)
    _check_hermitian(a, "Hamiltonian")
    evals, evecs = np.linalg.eigh(a)
    e0 = float(evals[0])
    if len(evals) > 1:
        gap = float(evals[1] - evals[0])
        tol = 1e-8 * float(evals[-1] - e0) if gap_tol is None else gap_tol
        if gap <= tol:
            raise DegenerateGroundState(f"ground state is degenerate: gap {gap:.3e} <= {tol:.3e}")
    else:
        gap = float("inf")
    psi0 = _fix_phase(evecs[:, 0])
    rho0 = density_of(psi0, H.basis, space)
    thr = 1e-12 * float(np.max(rho0)) if support_threshold is None else support_threshold
    return GroundState(
        energy=e0,
        vector=_frozen(psi0),
        gap=gap,
        density=_frozen(rho0),
        support_mask=_frozen(rho0 > thr),
        spectrum=_frozen(evals),
        eigenvectors=_frozen(evecs),
    )


def density_of(phi, basis: ManyBodyBasis, space: SiteSpace) -> np.ndarray:
    """rho_i = <phi| n_i |phi> / mu_i for the normalized state ``phi``."""
    phi = np.asarray(phi)
    norm2 = float(np.vdot(phi, phi).real)
    if norm2 == 0.0:
        raise ValueError("zero vector has no density")
    return (basis.occupations.T @ (np.abs(phi) ** 2)) / norm2 / space.weights
