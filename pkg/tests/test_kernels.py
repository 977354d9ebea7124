import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrdyson.fock import build_site_space, ring_positions
from lrdyson.kernels import (Kernel, OneBodyDensityMatrix, Pw92Params, alda_kernel, bfb_operator, diagonal_kernel,
                             fxc_heg, heg_energy_density, one_body_density_matrix, pgg_kernel, pgg_multiplier,
                             rpa_kernel, zero_kernel)
from lrdyson.models import build_system, make_kernel, random_system

from oracles import fxc_mpmath, pw92_rs_energy_density

seeds = st.integers(0, 10_000)
C_X = 0.75 * (3 / np.pi) ** (1 / 3)
EXCHANGE_ONLY = Pw92Params(correlation=False)


class TestRpa:
    def test_two_sites(self):
        sp = build_site_space(positions=[[0.0], [1.0]])
        assert rpa_kernel(sp).matrix.tolist() == [[1.0, 1.0], [1.0, 1.0]]

    def test_ring_softening(self):
        k = rpa_kernel(build_site_space(positions=ring_positions(3)), softening=0.5).matrix
        assert np.allclose(np.diag(k), 2.0)
        assert np.allclose(k[~np.eye(3, dtype=bool)], 1.0)

    def test_positivity_probe_two_sites(self, dimer_system):
        F = make_kernel("rpa", dimer_system)
        # sqrt(rho0) [[1,1],[1,1]] sqrt(rho0) has eigenvalues {0, 1}
        assert F.min_weighted_eigenvalue() == pytest.approx(0.0, abs=1e-15)

    def test_coincident_sites(self):
        with pytest.raises(ValueError):
            rpa_kernel(build_site_space(positions=[[0.0], [0.0]]))

    def test_bad_softening(self):
        with pytest.raises(ValueError):
            rpa_kernel(build_site_space(site_count=2), softening=0.0)


class TestFxc:
    def test_exchange_only_closed_form(self):
        rho = np.geomspace(1e-4, 1e2, 13)
        assert np.allclose(fxc_heg(rho, EXCHANGE_ONLY), -(4 / 9) * C_X * rho ** (-2 / 3), rtol=1e-14)

    def test_rho_one_finite_difference(self):
        h = 1e-4
        e = lambda r: heg_energy_density(r)
        fd = (e(1 + h) - 2 * e(1.0) + e(1 - h)) / h**2
        assert abs(fd - fxc_heg(1.0)) <= 1e-6 * abs(fxc_heg(1.0))

    @pytest.mark.parametrize("P", [1.0, 0.75])
    def test_high_precision_derivative(self, P):
        params = Pw92Params(P=P)
        for rho in np.geomspace(1e-6, 1e2, 20):
            ref = fxc_mpmath(rho, P=P)
            assert abs(fxc_heg(rho, params) - ref) <= 1e-11 * abs(ref)

    def test_small_density_bound(self):
        K = abs(fxc_heg(1.0))
        rho = np.geomspace(1e-8, 1.0, 3000)
        assert np.all(np.abs(fxc_heg(rho)) <= K * rho ** (-5 / 6) * (1 + 1e-12))

    def test_rs_conversion(self):
        rho = np.geomspace(1e-5, 1e2, 15)
        got = heg_energy_density(rho, Pw92Params.from_rs())
        assert np.allclose(got, pw92_rs_energy_density(rho), rtol=1e-13)

    def test_rejects_nonpositive_density(self):
        with pytest.raises(ValueError):
            fxc_heg(0.0)

    @pytest.mark.parametrize("kw", [{"P": 0.9}, {"A": -1.0}, {"beta3": 0.0}])
    def test_param_validation(self, kw):
        with pytest.raises(ValueError):
            Pw92Params(**kw)


class TestAlda:
    def test_exchange_only_shift(self, dimer_system):
        sp, gs = dimer_system.space, dimer_system.ground
        rpa = rpa_kernel(sp)
        F = alda_kernel(gs.density, sp, EXCHANGE_ONLY, rpa)
        shift = -(4 / 9) * C_X * 0.5 ** (-2 / 3)
        assert np.allclose(F.matrix - rpa.matrix, np.diag([shift, shift]), rtol=1e-14)

    def test_zeroed_parts_give_rpa(self, dimer_system):
        sp, gs = dimer_system.space, dimer_system.ground
        rpa = rpa_kernel(sp)
        F = alda_kernel(gs.density, sp, Pw92Params(exchange=False, correlation=False), rpa)
        assert np.array_equal(F.matrix, rpa.matrix)

    @given(seeds)
    def test_finite_weighted_norm(self, seed):
        s = random_system(seed)
        for fam in ("rpa", "alda", "pgg"):
            F = make_kernel(fam, s)
            assert np.isfinite(F.weighted_norm)
            assert np.array_equal(F.matrix, F.matrix.T)


class TestDensityMatrix:
    def test_dimer(self, dimer_system):
        g = one_body_density_matrix(dimer_system.ground, dimer_system.basis, dimer_system.space)
        assert np.allclose(g.matrix, 0.5, atol=1e-14)

    def test_filled_band(self):
        s = build_system(build_site_space(site_count=2), 2, [[0, -1], [-1, 0]])
        g = one_body_density_matrix(s.ground, s.basis, s.space)
        assert np.allclose(g.matrix, np.eye(2))

    @given(seeds)
    def test_invariants(self, seed):
        s = random_system(seed)
        g = one_body_density_matrix(s.ground, s.basis, s.space)
        ev = np.linalg.eigvalsh(g.matrix)
        assert np.all(ev >= -1e-12) and np.all(ev <= 1 + 1e-12)
        assert g.trace == pytest.approx(s.particle_count, abs=1e-12)
        assert np.allclose(g.density, s.ground.density, atol=1e-13)
        occ = s.ground.density * s.space.weights
        assert np.all(np.abs(g.matrix) ** 2 <= np.outer(occ, occ) + 1e-13)

    def test_matches_fock_space_oracle(self, ring):
        from oracles import annihilator, sector
        idx = sector(4, 2)
        psi = np.zeros(16)
        psi[idx] = ring.ground.vector
        ops = [annihilator(4, j) for j in range(4)]
        ref = np.array([[psi @ ops[rp].T @ ops[r] @ psi for rp in range(4)] for r in range(4)])
        g = one_body_density_matrix(ring.ground, ring.basis, ring.space).matrix
        assert np.allclose(g, ref, atol=1e-14)


class TestPgg:
    def test_one_particle_halves_rpa(self, dimer_system):
        F = make_kernel("pgg", dimer_system)
        assert np.allclose(F.matrix, 0.5 * make_kernel("rpa", dimer_system).matrix, atol=1e-15)

    @given(seeds)
    def test_one_particle_general(self, seed):
        s = random_system(seed, n=1)
        assert np.allclose(make_kernel("pgg", s).matrix, 0.5 * make_kernel("rpa", s).matrix, rtol=1e-12)

    @given(seeds)
    def test_multiplier_bounds(self, seed):
        s = random_system(seed)
        g = one_body_density_matrix(s.ground, s.basis, s.space)
        mult = pgg_multiplier(g, s.ground.support)
        assert np.all(mult >= 0.5 - 1e-12) and np.all(mult <= 1 + 1e-12)

    def test_zero_off_diagonal_density_matrix(self, dimer_system):
        s = dimer_system
        g = OneBodyDensityMatrix(np.diag([0.5, 0.5]), s.space.weights)
        F = pgg_kernel(s.ground.density, g, s.space)
        rpa = rpa_kernel(s.space).matrix
        # off-diagonal multipliers become 1, the on-site ones stay 1/2
        assert np.allclose(F.matrix, rpa * np.array([[0.5, 1.0], [1.0, 0.5]]))


class TestDiagonal:
    def test_zero(self):
        assert zero_kernel(np.ones(3)).is_zero()
        assert diagonal_kernel(np.zeros(3)).is_zero()

    def test_c_over_rho(self, dimer_system):
        F = make_kernel("diagonal", dimer_system, diagonal_c=0.3)
        assert np.allclose(F.matrix, np.diag([0.6, 0.6]))
        assert F.weighted_norm == pytest.approx(0.3)

    @given(seeds, st.floats(-3, 3))
    def test_weighted_norm_of_c_over_rho(self, seed, c):
        F = make_kernel("diagonal", random_system(seed), diagonal_c=c)
        assert F.weighted_norm == pytest.approx(abs(c), rel=1e-12, abs=1e-15)

    def test_weighted_sites(self):
        w = np.array([0.5, 2.0])
        F = diagonal_kernel([1.0, 1.0], w)
        assert np.allclose(F.apply(np.array([3.0, -1.0])), [3.0, -1.0])


@given(seeds)
def test_weighted_norm_two_ways(seed):
    s = random_system(seed)
    F = make_kernel("alda", s)
    rng = np.random.default_rng(seed)
    rho, mu = F.density, F.weights
    apply = lambda g: F.matrix @ (mu[:, None] * g)
    # adjoint of F from L^2_{1/rho0} to L^2_{rho0}
    adjoint = lambda h: rho[:, None] * (F.matrix.T @ ((rho * mu)[:, None] * h))

    def ratio(g):
        fg = apply(g)
        return np.sqrt(np.sum(fg**2 * (rho * mu)[:, None], axis=0) / np.sum(g**2 * (mu / rho)[:, None], axis=0))

    g = rng.normal(size=(F.size, 1000))
    assert ratio(g).max() <= F.weighted_norm * (1 + 1e-12)
    # random directions alone rarely come within 1% in six dimensions; a few ascent steps do
    for _ in range(30):
        g = adjoint(apply(g))
        g /= np.linalg.norm(g, axis=0)
    r = ratio(g)
    assert r.max() <= F.weighted_norm * (1 + 1e-12)
    assert r.max() >= 0.99 * F.weighted_norm


class TestBfb:
    def test_dimer_scalar(self, dimer_system):
        ctx = dimer_system.context
        for c in (0.3, -1.0):
            X = bfb_operator(ctx, diagonal_kernel([2 * c, 2 * c], ctx.weights, ctx.density))
            assert X.matrix.shape == (1, 1)
            assert X.matrix[0, 0] == pytest.approx(c, abs=1e-15)

    def test_zero(self, ring):
        ctx = ring.context
        assert not np.any(bfb_operator(ctx, zero_kernel(ctx.weights, ctx.density)).matrix)

    @given(seeds)
    def test_hermitian_for_random_symmetric_kernel(self, seed):
        ctx = random_system(seed).context
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(ctx.size, ctx.size))
        X = bfb_operator(ctx, Kernel(a + a.T, "random", ctx.weights, ctx.density)).matrix
        assert np.max(np.abs(X - X.conj().T)) <= 1e-12 * max(1.0, np.linalg.norm(X, 2))

    def test_dimension_mismatch(self, ring, dimer_system):
        with pytest.raises(ValueError):
            bfb_operator(ring.context, make_kernel("rpa", dimer_system))
