import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrdyson.dyson import (TimeGrid, casida_lower_bound, casida_operator, chiF_freq, chiF_freq_direct,
                           chiF_time_parts, chiF_time_sinc, m_operator, solve_dyson_time, stability_report)
from lrdyson.errors import PoleProximity, SingularDielectric
from lrdyson.kernels import Kernel, bfb_operator
from lrdyson.models import make_kernel, random_system
from lrdyson.response import chi0_freq, chi0_time
from lrdyson.verify import gronwall_ratio, limit_coupling, rel_frobenius

seeds = st.integers(0, 10_000)


def local(system, c):
    """F = diag(2c) on the dimer, so that B*FB = c."""
    return make_kernel("diagonal", system, diagonal=[2 * c, 2 * c])


def random_kernel(ctx, seed, scale=1.0):
    rng = np.random.default_rng(seed + 17)
    a = rng.normal(size=(ctx.size, ctx.size))
    return Kernel(scale * (a + a.T), "random", ctx.weights, ctx.density)


class TestDimerHandValues:
    @pytest.mark.parametrize("c", [0.3, -0.4, -1.0, -1.5])
    def test_casida_and_m(self, dimer_system, c):
        ctx = dimer_system.context
        F = local(dimer_system, c)
        assert casida_operator(ctx, F).matrix[0, 0] == pytest.approx(4 + 4 * c, abs=1e-14)
        assert m_operator(ctx, F)[0, 0] == pytest.approx(2 + 2 * c, abs=1e-14)

    def test_zero_kernel(self, dimer_system):
        ctx = dimer_system.context
        F = make_kernel("none", dimer_system)
        C = casida_operator(ctx, F)
        assert C.trivial
        assert np.array_equal(C.matrix, np.diag(ctx.eigenvalues**2))
        assert np.array_equal(m_operator(ctx, F), np.diag(ctx.eigenvalues))

    def test_static_response(self, dimer_system):
        ctx = dimer_system.context
        chi = chiF_freq(ctx, casida_operator(ctx, local(dimer_system, 0.3)), 0.0)
        assert chi[0, 0] == pytest.approx(-1 / 5.2, abs=1e-14)

    def test_stability_verdicts(self, dimer_system):
        ctx = dimer_system.context
        free = stability_report(ctx, make_kernel("none", dimer_system))
        assert free.verdict == "stable" and free.delta_used == pytest.approx(2.0)
        marginal = stability_report(ctx, local(dimer_system, -1.0))
        assert marginal.verdict == "marginal"
        assert marginal.min_C == pytest.approx(0.0, abs=1e-14)
        unstable = stability_report(ctx, local(dimer_system, -1.5))
        assert unstable.verdict == "unstable"
        assert unstable.growth_bound == pytest.approx(np.sqrt(2.0), abs=1e-14)

    def test_pole_guard(self, dimer_system):
        ctx = dimer_system.context
        C = casida_operator(ctx, local(dimer_system, 0.3))
        with pytest.raises(PoleProximity):
            chiF_freq(ctx, C, np.sqrt(5.2))

    def test_dielectric_singular_at_pole(self, dimer_system):
        ctx = dimer_system.context
        with pytest.raises(SingularDielectric):
            chiF_freq_direct(ctx, local(dimer_system, 0.3), np.sqrt(5.2) * (1 + 1e-15))


class TestCasidaProperties:
    @given(seeds, st.floats(0.05, 3.0))
    def test_symmetric_and_lower_bound(self, seed, scale):
        ctx = random_system(seed).context
        C = casida_operator(ctx, random_kernel(ctx, seed, scale))
        assert np.array_equal(C.matrix, C.matrix.T)
        bound = casida_lower_bound(ctx.omega1, C.coupling_norm)
        assert C.min_eig >= bound - 1e-10 * max(1.0, np.max(np.abs(C.eigenvalues)))

    @given(seeds)
    def test_c_at_zero_is_minus_m(self, seed):
        s = random_system(seed)
        ctx = s.context
        F = make_kernel("alda", s)
        C = casida_operator(ctx, F)
        assert np.array_equal(C.resolvent_operator(0.0, ctx.eigenvalues).real, -m_operator(ctx, F))

    @given(seeds, st.floats(0.05, 3.0))
    def test_stability_implications(self, seed, scale):
        ctx = random_system(seed).context
        rep = stability_report(ctx, random_kernel(ctx, seed, scale))
        assert all(rep.checks.values()), rep.checks

    @given(seeds)
    def test_resolvent_identity(self, seed):
        ctx = random_system(seed).context
        C = casida_operator(ctx, random_kernel(ctx, seed, 0.3))
        lam, x = ctx.eigenvalues, C.coupling
        rng = np.random.default_rng(seed)
        for _ in range(5):
            z = complex(rng.uniform(-3, 3), (C.coupling_norm + 0.1) * (1 + rng.uniform()))
            ci = np.linalg.inv(C.resolvent_operator(z, lam))
            di = np.diag(1 / (z * z / lam - lam))
            assert np.max(np.abs(ci - di - 2 * ci @ x @ di)) <= 1e-11


class TestTimeDomain:
    @given(seeds, st.floats(0.0, 30.0))
    def test_sinc_reduces_to_bare(self, seed, t):
        s = random_system(seed)
        ctx = s.context
        # force the generic path: a vanishing but explicitly non-trivial kernel
        C = casida_operator(ctx, random_kernel(ctx, seed, 0.0))
        object.__setattr__(C, "trivial", False)
        assert np.max(np.abs(chiF_time_sinc(ctx, C, t) - chi0_time(ctx, t))) <= 1e-12

    def test_sinc_vanishes_at_origin_and_before(self, ring):
        ctx = ring.context
        C = casida_operator(ctx, make_kernel("rpa", ring))
        assert not np.any(chiF_time_sinc(ctx, C, 0.0))
        assert not np.any(chiF_time_sinc(ctx, C, -2.0))

    def test_zero_kernel_volterra_exact(self, ring):
        ctx = ring.context
        grid = TimeGrid(0.01, 400)
        x0 = chi0_time(ctx, grid.times)
        assert np.array_equal(solve_dyson_time(x0, make_kernel("none", ring), grid), x0)

    def test_dimer_second_order(self, dimer_system):
        ctx = dimer_system.context
        F = local(dimer_system, 0.3)
        C = casida_operator(ctx, F)
        errs = []
        for dt in (0.02, 0.01):
            grid = TimeGrid.covering(10.0, dt)
            t = grid.times
            errs.append(rel_frobenius(solve_dyson_time(chi0_time(ctx, t), F, grid), chiF_time_sinc(ctx, C, t)))
        assert 3.8 <= errs[0] / errs[1] <= 4.2

    @given(seeds)
    def test_random_second_order(self, seed):
        s = random_system(seed)
        ctx = s.context
        F = limit_coupling(ctx, make_kernel("rpa", s))
        C = casida_operator(ctx, F)
        dt = 0.05 / np.max(ctx.eigenvalues)
        errs = []
        for h in (dt, dt / 2):
            grid = TimeGrid.covering(5.0 / ctx.omega1, h)
            t = grid.times
            errs.append(rel_frobenius(solve_dyson_time(chi0_time(ctx, t), F, grid), chiF_time_sinc(ctx, C, t)))
        if errs[0] > 0:
            assert errs[0] / errs[1] >= 3.5

    def test_unstable_growth_envelope(self, dimer_system):
        ctx = dimer_system.context
        rep = stability_report(ctx, local(dimer_system, -1.5))
        C = casida_operator(ctx, local(dimer_system, -1.5))
        t = np.linspace(0.0, 12.0, 121)
        x = chiF_time_sinc(ctx, C, t)[:, 0, 0]
        # exact value: -2 t (W^2 lambda) sinh(t g) / (t g) with g = sqrt(2)
        g = rep.growth_bound
        assert np.allclose(x[1:], -np.sinh(t[1:] * g) / g, rtol=1e-12)
        assert np.all(np.abs(x) <= np.exp(t * g))

    @given(seeds, st.floats(0.0, 20.0))
    def test_parts_sum(self, seed, t):
        ctx = random_system(seed).context
        C = casida_operator(ctx, random_kernel(ctx, seed, 2.0))
        plus, minus = chiF_time_parts(ctx, C, t)
        full = chiF_time_sinc(ctx, C, t)
        assert np.max(np.abs(plus + minus - full)) <= 1e-10 * max(1.0, np.max(np.abs(full)))

    @given(seeds, st.sampled_from(["rpa", "alda", "pgg"]))
    def test_gronwall_envelope_with_two_b_squared(self, seed, family):
        # sup ||chi_0(t)|| reaches 2 ||B||^2, so that is the prefactor the envelope needs
        s = random_system(seed)
        ctx = s.context
        F = limit_coupling(ctx, make_kernel(family, s))
        assert gronwall_ratio(ctx, F, prefactor=2.0, t_max=5.0 / ctx.omega1) <= 1.01

    def test_single_b_squared_envelope_is_exceeded(self, dimer_system):
        ctx = dimer_system.context
        F = local(dimer_system, 0.3)
        assert gronwall_ratio(ctx, F, prefactor=1.0) > 1.01

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.1, -1)
        assert TimeGrid.covering(1.0, 0.1).steps == 10

    def test_solver_input_validation(self, ring):
        ctx = ring.context
        F = make_kernel("rpa", ring)
        grid = TimeGrid(0.1, 5)
        x0 = chi0_time(ctx, grid.times)
        with pytest.raises(ValueError):
            solve_dyson_time(x0[:4], F, grid)
        shifted = x0 + 1e-6
        with pytest.raises(ValueError):
            solve_dyson_time(shifted, F, grid)


class TestFrequencyDomain:
    @given(seeds, st.complex_numbers(max_magnitude=8).filter(lambda z: abs(z.imag) > 0.1))
    def test_zero_kernel(self, seed, z):
        s = random_system(seed)
        ctx = s.context
        C = casida_operator(ctx, make_kernel("none", s))
        assert np.array_equal(chiF_freq(ctx, C, z), chi0_freq(ctx, z))
        assert np.array_equal(chiF_freq_direct(ctx, make_kernel("none", s), z), chi0_freq(ctx, z))

    @given(seeds, st.sampled_from(["rpa", "alda", "pgg"]))
    def test_against_dielectric_inversion(self, seed, family):
        s = random_system(seed)
        ctx = s.context
        F = make_kernel(family, s)
        C = casida_operator(ctx, F)
        for z in (2j, 0.7 + 0.5j, -1.3 + 0.05j):
            ref = chiF_freq_direct(ctx, F, z)
            assert rel_frobenius(chiF_freq(ctx, C, z), ref) <= 1e-10

    def test_generic_path_matches_bare(self, ring):
        ctx = ring.context
        C = casida_operator(ctx, random_kernel(ctx, 3, 0.0))
        object.__setattr__(C, "trivial", False)
        z = 0.4 + 0.3j
        assert rel_frobenius(chiF_freq(ctx, C, z), chi0_freq(ctx, z)) <= 1e-13

    def test_bfb_matches_coupling(self, ring):
        ctx = ring.context
        F = make_kernel("rpa", ring)
        assert np.array_equal(casida_operator(ctx, F).coupling, bfb_operator(ctx, F).matrix)
