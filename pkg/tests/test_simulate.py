import math

import numpy as np
import pytest
from scipy import integrate

from treegff.ou_core import TreeParams, apply_L_to_indicator
from treegff.simulate import (CAP_EXPONENT, ChiInterpolant, SimConfig, arcsine_check, arcsine_exact,
                              edge_nonvanish_prob, expected_front_sequence, expected_sign_front_bound,
                              front_check, interlacement_path_prob, martingale_moments, mean_and_se,
                              q_second_moment_exact, root_mass, sample_front)
from treegff.critical import u_star
from treegff.spectral import SolverControls, chi_h_eval, lambda_h

from oracles import gauss_density, nu_integral

D2, D3 = TreeParams(2), TreeParams(3)
FAST = SolverControls(m=200)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(replicas=0), dict(depth=-1), dict(seed=-1),
                                    dict(population_cap=10), dict(block_size=0)])
    def test_rejects(self, kw):
        base = dict(params=D2, h=0.0, depth=8, replicas=10)
        base.update(kw)
        with pytest.raises(ValueError):
            SimConfig(**base)

    def test_cap_floor(self):
        SimConfig(D2, 0.0, 20, 1, population_cap=2**CAP_EXPONENT)


def test_mean_and_se():
    x = np.random.default_rng(0).normal(size=1000)
    m, se = mean_and_se(x)
    assert m == pytest.approx(x.mean(), abs=1e-15)
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-12)
    assert math.isnan(mean_and_se([1.0])[1])
    assert math.isnan(mean_and_se([])[0])


class TestSampler:
    def test_block_invariance(self):
        a = sample_front(SimConfig(D2, 0.0, 6, 300, seed=4, block_size=300))
        b = sample_front(SimConfig(D2, 0.0, 6, 300, seed=4, block_size=7))
        assert np.array_equal(a.front_count, b.front_count)

    def test_replica_prefix_invariance(self):
        a = sample_front(SimConfig(D3, 0.2, 4, 100, seed=9))
        b = sample_front(SimConfig(D3, 0.2, 4, 40, seed=9))
        assert np.array_equal(a.front_count[:40], b.front_count)

    def test_coupled_across_barriers(self):
        lo = sample_front(SimConfig(D2, 0.0, 7, 500, seed=2))
        hi = sample_front(SimConfig(D2, 0.4, 7, 500, seed=2))
        assert np.all(hi.front_count <= lo.front_count)
        assert np.any(hi.front_count < lo.front_count)

    def test_full_tree_when_barrier_far(self):
        st = sample_front(SimConfig(D3, -50.0, 5, 20))
        assert np.all(st.front_count == 3 ** np.arange(6))

    def test_extinction_is_absorbing(self):
        st = sample_front(SimConfig(D2, 0.8, 8, 2000, seed=1))
        dead = st.front_count == 0
        assert np.all(dead[:, :-1] <= dead[:, 1:])

    def test_root_mass(self):
        cfg = SimConfig(D2, 0.3, 0, 40_000, seed=3)
        m, se = mean_and_se(sample_front(cfg).front_count[:, 0])
        assert abs(m - root_mass(0.3, D2)) < 4.5 * se

    def test_martingale_nan_without_chi(self):
        st = sample_front(SimConfig(D2, 0.0, 2, 5))
        assert np.all(np.isnan(st.martingale))

    def test_chi_mismatch(self):
        res = lambda_h(0.0, D2, FAST)
        with pytest.raises(ValueError):
            sample_front(SimConfig(D2, 0.1, 2, 5), res)

    def test_censoring(self):
        cfg = SimConfig(D2, -3.0, 10, 50, seed=0, population_cap=2**CAP_EXPONENT)
        st = sample_front(cfg)
        assert st.n_censored == 50
        first_zero = np.argmax(st.front_count == 0, axis=1)
        assert np.all(first_zero == CAP_EXPONENT + 1)
        assert np.all(st.front_count[:, first_zero[0]:] == 0)
        assert st.survival_frequency(10) == 0.0


class TestExpectedFront:
    def test_n0_is_root_mass(self):
        res = lambda_h(0.5, D2, FAST)
        seq = expected_front_sequence(0.5, 3, D2, res.grid)
        assert seq[0] == pytest.approx(root_mass(0.5, D2), rel=1e-12)

    def test_n1_matches_quadrature(self):
        res = lambda_h(0.2, D2, FAST)
        seq = expected_front_sequence(0.2, 1, D2, res.grid)
        oracle = nu_integral(lambda a: apply_L_to_indicator(a, 0.2, D2), D2.sigma2, lo=0.2)
        assert seq[1] == pytest.approx(oracle, rel=1e-10)

    def test_growth_rate(self):
        res = lambda_h(0.0, D2, FAST)
        seq = expected_front_sequence(0.0, 40, D2, res.grid)
        assert seq[40] / seq[39] == pytest.approx(res.lambda_h, rel=1e-8)

    def test_grid_mismatch(self):
        res = lambda_h(0.0, D2, FAST)
        with pytest.raises(ValueError):
            expected_front_sequence(0.1, 2, D2, res.grid)

    def test_monte_carlo_agrees(self):
        cfg = SimConfig(D2, 0.0, 6, 20_000, seed=5)
        fc = front_check(cfg, lambda_h(0.0, D2, FAST))
        assert np.all(np.abs(fc.z) < 4.5)
        assert set(fc.to_dict()) == {"n", "mean", "se", "oracle", "z", "censored"}


class TestMartingale:
    def test_chi_interpolant(self):
        res = lambda_h(0.0, D2, FAST)
        f = ChiInterpolant(res)
        a = np.linspace(-1, res.h_prime + 2, 999)
        assert np.allclose(f(a), chi_h_eval(res, a), rtol=1e-10, atol=1e-12)

    def test_flat_and_second_moment(self):
        res = lambda_h(0.0, D2, FAST)
        cfg = SimConfig(D2, 0.0, 6, 20_000, seed=6)
        mm = martingale_moments(cfg, res)
        assert np.all(np.abs(mm.drift_z) < 4.5)
        assert np.all(np.abs(mm.q_second_z) < 4.5)
        assert abs(mm.mean_per_n[0] - res.chi_mean) < 4.5 * mm.mean_se[0]

    def test_m0_is_chi_of_root(self):
        res = lambda_h(0.3, D2, FAST)
        cfg = SimConfig(D2, 0.3, 1, 50, seed=8)
        st = sample_front(cfg, res)
        from treegff import rng
        root = D2.sigma * rng.normals(rng.root_keys(8, np.arange(50)))
        assert np.allclose(st.martingale[:, 0], chi_h_eval(res, root), rtol=1e-9, atol=1e-12)

    def test_supercritical_only(self):
        res = lambda_h(1.0, D2, FAST)
        with pytest.raises(ValueError):
            martingale_moments(SimConfig(D2, 1.0, 2, 5), res)

    def test_exact_second_moment_n0(self):
        res = lambda_h(0.0, D2, FAST)
        ex = q_second_moment_exact(res, 3)
        assert ex[0] == pytest.approx(res.chi_moment(3) / res.chi_mean, rel=1e-14)
        assert np.all(np.diff(ex) > 0)


class TestArcsine:
    def test_edge_prob_values(self):
        assert edge_nonvanish_prob(1.0, 1.0) == pytest.approx(0.8646647167633873, rel=1e-15)
        assert edge_nonvanish_prob(-1.0, -1.0) == edge_nonvanish_prob(1.0, 1.0)
        assert edge_nonvanish_prob(1.0, -0.5) == 0.0
        assert edge_nonvanish_prob(0.0, 2.0) == 0.0

    def test_one_edge_integral_is_one_third(self):
        d = 2

        def f(b, a):
            return (gauss_density(a, D2.sigma2) * gauss_density(b - a / d, 1 / d)
                    * edge_nonvanish_prob(a, b))

        s = 12 * D2.sigma
        val, _ = integrate.dblquad(f, -s, s, -s, s, epsabs=1e-12, epsrel=1e-11)
        assert val == pytest.approx(1 / 3, abs=1e-9)
        assert arcsine_exact(1, D2) == pytest.approx(1 / 3, rel=1e-15)

    def test_exact_n4(self):
        assert arcsine_exact(4, D2) == pytest.approx(0.03981468553857748, rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_monte_carlo(self, n):
        chk = arcsine_check(n, SimConfig(D2, 0.0, 0, 100_000, seed=12))
        assert abs(chk.z_score) < 4.5
        assert set(chk.to_dict()) == {"n", "mc_estimate", "se", "exact", "z_score"}

    def test_bad_length(self):
        with pytest.raises(ValueError):
            arcsine_check(0, SimConfig(D2, 0.0, 0, 10))

    def test_sign_front_bound_tends_to_2_over_pi(self):
        assert expected_sign_front_bound(30, D2) == pytest.approx(2 / math.pi, rel=1e-12)


class TestInterlacement:
    def test_critical_level_balances_branching(self):
        u = u_star(D3)
        probs = [3**n * interlacement_path_prob(u, n, D3) for n in range(6)]
        assert np.allclose(probs, probs[0], rtol=1e-12)

    def test_root_term(self):
        assert interlacement_path_prob(1.0, 0, D2) == pytest.approx(math.exp(-1.5), rel=1e-15)

    @pytest.mark.parametrize("u,n", [(0.0, 1), (-1.0, 1), (1.0, -1)])
    def test_domain(self, u, n):
        with pytest.raises(ValueError):
            interlacement_path_prob(u, n, D2)


class TestReferenceCases:
    def test_barrier_above_support(self):
        st = sample_front(SimConfig(D2, 10.0, 3, 5000, seed=1))
        assert np.all(st.front_count == 0)

    def test_barrier_far_below(self):
        st = sample_front(SimConfig(D2, -10.0, 5, 200, seed=1))
        assert np.all(st.front_count == 2 ** np.arange(6))

    def test_expected_front_without_barrier(self):
        for d in (2, 3):
            p = TreeParams(d)
            res = lambda_h(-12 * p.sigma, p, FAST)
            seq = expected_front_sequence(res.h, 10, p, res.grid)
            assert np.allclose(seq, float(d) ** np.arange(11), rtol=1e-9, atol=0)

    def test_martingale_zero_iff_extinct(self):
        res = lambda_h(0.3, D2, FAST)
        st = sample_front(SimConfig(D2, 0.3, 6, 2000, seed=2), res)
        assert np.array_equal(st.martingale == 0, st.front_count == 0)

    def test_edge_prob_small_endpoints(self):
        assert edge_nonvanish_prob(1e-6, 1e-6) < 1e-11

    def test_arcsine_decays(self):
        chk = arcsine_check(12, SimConfig(D2, 0.0, 0, 20_000, seed=3))
        assert chk.mc_estimate < 1e-3

    def test_interlacement_monotone(self):
        us = [0.5, 1.0, 2.0]
        for n in range(4):
            v = [interlacement_path_prob(u, n, D2) for u in us]
            assert v[0] > v[1] > v[2]
        v = [interlacement_path_prob(1.0, n, D2) for n in range(5)]
        assert np.all(np.diff(v) < 0)

    def test_critical_decay_factor(self):
        for d in range(2, 11):
            p = TreeParams(d)
            u = u_star(p)
            f = interlacement_path_prob(u, 1, p) / interlacement_path_prob(u, 0, p)
            assert f == pytest.approx(1 / d, rel=1e-14)

    def test_survival_monotone_in_h(self):
        hs = [-0.5, 0.0, 0.5, 1.0]
        freq = [sample_front(SimConfig(D2, h, 8, 3000, seed=4)).survival_frequency(8) for h in hs]
        assert all(b <= a for a, b in zip(freq, freq[1:]))

    def test_generation_zero_mean(self):
        res = lambda_h(0.0, D2, FAST)
        st = sample_front(SimConfig(D2, 0.0, 0, 40_000, seed=9), res)
        m, se = mean_and_se(st.martingale[:, 0])
        assert abs(m - res.chi_mean) < 4.5 * se
