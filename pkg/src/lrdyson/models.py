"""Ready-made lattice models: seeded random clusters and symmetric rings."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .fock import (GroundState, ManyBodyBasis, ManyBodyOperator, SiteSpace, build_hamiltonian,
                   build_site_space, enumerate_basis, ground_state, ring_positions)
from .kernels import (Kernel, Pw92Params, alda_kernel, diagonal_kernel, one_body_density_matrix, pgg_kernel,
                      rpa_kernel, zero_kernel)
from .response import ResponseContext, build_response_context


@dataclass(frozen=True)
class System:
    space: SiteSpace
    basis: ManyBodyBasis
    hamiltonian: ManyBodyOperator
    ground: GroundState
    context: ResponseContext
    hopping: np.ndarray
    potential: np.ndarray
    interaction: np.ndarray

    @property
    def particle_count(self) -> int:
        return self.basis.particle_count


def build_system(space: SiteSpace, n: int, hopping, potential=None, interaction=None, *,
                 gap_tol=None, support_threshold=None, cluster_tol=1e-9) -> System:
    m = space.site_count
    potential = np.zeros(m) if potential is None else np.asarray(potential, dtype=float)
    interaction = np.zeros((m, m)) if interaction is None else np.asarray(interaction, dtype=float)
    basis = enumerate_basis(m, n)
    H = build_hamiltonian(space, basis, hopping, potential, interaction)
    gs = ground_state(H, space, gap_tol, support_threshold)
    ctx = build_response_context(H, gs, space, basis, cluster_tol)
    return System(space, basis, H, gs, ctx, np.asarray(hopping, dtype=float), potential, interaction)


def ring_hopping(m: int, t: float = -1.0, closing_sign: float = 1.0) -> np.ndarray:
    h = np.zeros((m, m))
    for i in range(m):
        j = (i + 1) % m
        if i == j:
            continue
        s = closing_sign if j == 0 else 1.0
        h[i, j] = h[j, i] = t * s
    return h


def ring_interaction(m: int, u: float) -> np.ndarray:
    return -ring_hopping(m, -u) if m > 2 else u * (1 - np.eye(m))


def ring_system(m: int, n: int, t: float = -1.0, u: float = 0.0, closing_sign: float = 1.0, **kw) -> System:
    """Translation-symmetric ring; ``closing_sign=-1`` threads a pi flux (antiperiodic bond)."""
    space = build_site_space(positions=ring_positions(m))
    h = ring_hopping(m, t, closing_sign) if m > 2 else t * (1 - np.eye(m))
    return build_system(space, n, h, None, ring_interaction(m, u), **kw)


def dimer(potential=(0.0, 0.0), t: float = -1.0, n: int = 1) -> System:
    """Two sites a unit distance apart; the hand-checkable reference model."""
    space = build_site_space(positions=[[0.0], [1.0]])
    return build_system(space, n, [[0.0, t], [t, 0.0]], potential)


def dark_ring() -> System:
    """Four-site pi-flux ring at half filling with nearest-neighbour repulsion.

    Its highest excitation has vanishing transition density (a dark state).
    """
    return ring_system(4, 2, t=-1.0, u=1.0, closing_sign=-1.0)


def random_system(seed: int, m: int | None = None, n: int | None = None, max_dimension: int = 20) -> System:
    """A seeded random cluster: jittered ring geometry, random bonds, potential and repulsion."""
    rng = np.random.default_rng(seed)
    while True:
        mm = int(rng.integers(2, 7)) if m is None else m
        nn = int(rng.integers(1, min(3, mm) + 1)) if n is None else n
        if m is not None or (nn < mm and comb(mm, nn) <= max_dimension):
            break
    pos = ring_positions(mm, 1.0) + 0.15 * rng.standard_normal((mm, 2))
    space = build_site_space(positions=pos)
    h = np.zeros((mm, mm))
    for i in range(mm):
        for j in range(i + 1, mm):
            if j == i + 1 or rng.random() < 0.3:
                h[i, j] = h[j, i] = -rng.uniform(0.5, 1.5)
    v = rng.uniform(-1.0, 1.0, mm)
    u = np.zeros((mm, mm))
    for i in range(mm - 1):
        u[i, i + 1] = u[i + 1, i] = rng.uniform(0.0, 2.0)
    return build_system(space, nn, h, v, u)


def make_kernel(family: str, system: System, *, softening: float = 1.0, params: Pw92Params | None = None,
                diagonal=None, diagonal_c: float | None = None) -> Kernel:
    """Kernel of the given family on the ground-state support of ``system``.

    For ``diagonal`` pass either explicit multiplier values on the support or a
    strength ``diagonal_c`` giving the multiplier c / rho0.
    """
    gs, sp, ctx = system.ground, system.space, system.context
    mask = gs.support_mask
    if family == "none":
        return zero_kernel(ctx.weights, ctx.density)
    if family == "rpa":
        return rpa_kernel(sp, mask, softening, gs.density)
    if family == "alda":
        rpa = rpa_kernel(sp, mask, softening, gs.density)
        return alda_kernel(gs.density, sp, Pw92Params() if params is None else params, rpa, mask)
    if family == "pgg":
        gamma = one_body_density_matrix(gs, system.basis, sp)
        return pgg_kernel(gs.density, gamma, sp, softening, mask)
    if family == "diagonal":
        if (diagonal is None) == (diagonal_c is None):
            raise ValueError("give exactly one of diagonal values or diagonal_c")
        values = diagonal_c / ctx.density if diagonal is None else np.asarray(diagonal, dtype=float)
        if values.shape != (ctx.size,):
            raise ValueError(f"diagonal kernel needs {ctx.size} values (one per support site)")
        return diagonal_kernel(values, ctx.weights, ctx.density)
    raise ValueError(f"unknown kernel family {family!r}")


def one_particle_sector(system: System, potential=None, **kw) -> System:
    """The same sites, hopping and potential with a single particle."""
    v = system.potential if potential is None else potential
    return build_system(system.space, 1, system.hopping, v, None, **kw)
