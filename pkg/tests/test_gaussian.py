import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from localdenoise.gaussian import (
    GaussianDist,
    LinearChannel,
    bayes_reverse,
    cmi_sweep,
    forward_step,
    gaussian_cmi,
    gaussian_kl,
    gmrf_chain,
    gmrf_grid,
    local_bayes_reverse,
    logpdf,
    markov_length_fit,
    multi_step_local_recovery,
    push,
    score,
)
from localdenoise.lattice import Lattice, Tripartition, build_tripartition


def random_spd(rng, K, floor=0.1):
    G = rng.standard_normal((K, K))
    return G @ G.T / K + floor * np.eye(K)


def random_gaussian(rng, K):
    return GaussianDist(rng.standard_normal(K), random_spd(rng, K))


def from_precision(prec, mean=None):
    K = len(prec)
    cov = np.linalg.inv(prec)
    return GaussianDist(np.zeros(K) if mean is None else mean, 0.5 * (cov + cov.T))


class TestGaussianDist:
    def test_validation(self):
        with pytest.raises(ValueError):
            GaussianDist([0, 0], [[1, 0.5], [0.4, 1]])
        with pytest.raises(ValueError):
            GaussianDist([0, 0], [[1, 1], [1, 1]])
        with pytest.raises(ValueError):
            GaussianDist([0], np.eye(2))

    def test_marginal(self, rng):
        P = random_gaussian(rng, 4)
        M = P.marginal([2, 0])
        np.testing.assert_array_equal(M.mean, P.mean[[2, 0]])
        np.testing.assert_array_equal(M.cov, P.cov[np.ix_([2, 0], [2, 0])])


class TestForwardStep:
    def test_identity(self):
        ch = forward_step(0.0, 0.0, 3)
        np.testing.assert_array_equal(ch.M, np.eye(3))
        np.testing.assert_array_equal(ch.noise_cov, np.zeros((3, 3)))

    def test_pure_noise(self):
        ch = forward_step(0.0, 1.0, 2)
        np.testing.assert_array_equal(ch.M, np.zeros((2, 2)))
        np.testing.assert_allclose(ch.noise_cov, np.eye(2))

    def test_half_way_matches_interpolation_moments(self, rng):
        P = random_gaussian(rng, 3)
        out = push(forward_step(0.0, 0.5, 3), P)
        # X_t = (1 - t) X0 + t Z at t = 1/2
        np.testing.assert_allclose(out.mean, 0.5 * P.mean)
        np.testing.assert_allclose(out.cov, 0.25 * P.cov + 0.25 * np.eye(3))

    @given(t1=st.floats(0, 0.9), dt1=st.floats(0, 0.05), dt2=st.floats(0, 0.05))
    def test_kernels_compose_along_the_interpolation(self, t1, dt1, dt2):
        t2, t3 = t1 + dt1, t1 + dt1 + dt2
        P = GaussianDist([0.7, -1.2], [[1.0, 0.3], [0.3, 0.5]])
        direct = push(forward_step(0.0, t3, 2), P)
        stepped = push(forward_step(t2, t3, 2), push(forward_step(t1, t2, 2), push(forward_step(0.0, t1, 2), P)))
        np.testing.assert_allclose(stepped.mean, direct.mean, atol=1e-12)
        np.testing.assert_allclose(stepped.cov, direct.cov, atol=1e-12)

    def test_rejects_backwards_time(self):
        with pytest.raises(ValueError):
            forward_step(0.5, 0.4)
        with pytest.raises(ValueError):
            forward_step(1.0, 1.0)

    def test_restricted_sites(self):
        ch = forward_step(0.0, 0.5, 3, sites=[1])
        np.testing.assert_allclose(np.diag(ch.M), [1.0, 0.5, 1.0])
        np.testing.assert_allclose(np.diag(ch.noise_cov), [0.0, 0.25, 0.0])


class TestPush:
    def test_identity_fixes(self, rng):
        P = random_gaussian(rng, 3)
        Q = push(LinearChannel.identity(3), P)
        np.testing.assert_allclose(Q.cov, P.cov)

    def test_constant_channel(self, rng):
        Q = push(LinearChannel(np.zeros((2, 2)), [1.0, 2.0], np.eye(2)), random_gaussian(rng, 2))
        np.testing.assert_allclose(Q.mean, [1.0, 2.0])
        np.testing.assert_allclose(Q.cov, np.eye(2))

    def test_scalar(self):
        Q = push(LinearChannel([[2.0]], [0.0], [[3.0]]), GaussianDist([1.0], [[1.0]]))
        assert Q.mean[0] == 2.0 and Q.cov[0, 0] == 7.0

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            push(LinearChannel(np.zeros((1, 1)), [0.0], [[0.0]]), GaussianDist([0.0], [[1.0]]))


class TestBayesReverse:
    def test_identity(self, rng):
        rev = bayes_reverse(LinearChannel.identity(3), random_gaussian(rng, 3))
        np.testing.assert_allclose(rev.M, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(rev.b, 0.0, atol=1e-9)
        np.testing.assert_allclose(rev.noise_cov, 0.0, atol=1e-9)

    def test_pure_noise_returns_prior(self, rng):
        P = random_gaussian(rng, 2)
        rev = bayes_reverse(forward_step(0.0, 1.0, 2), P)
        np.testing.assert_allclose(rev.M, 0.0, atol=1e-15)
        np.testing.assert_allclose(rev.b, P.mean)
        np.testing.assert_allclose(rev.noise_cov, P.cov)

    def test_conjugate_scalar(self):
        rev = bayes_reverse(LinearChannel([[1.0]], [0.0], [[1.0]]), GaussianDist([0.0], [[1.0]]))
        assert rev.M[0, 0] == pytest.approx(0.5)
        assert rev.b[0] == pytest.approx(0.0)
        assert rev.noise_cov[0, 0] == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(200))
    def test_fixes_prior(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(1, 6))
        P = random_gaussian(rng, K)
        ch = LinearChannel(rng.standard_normal((K, K)), rng.standard_normal(K), random_spd(rng, K, 0.05))
        Q = push(bayes_reverse(ch, P), push(ch, P))
        np.testing.assert_allclose(Q.mean, P.mean, atol=1e-8)
        np.testing.assert_allclose(Q.cov, P.cov, atol=1e-8)


class TestLocalBayesReverse:
    def chain(self, K=5, c=0.4):
        return gmrf_chain(K, c)

    def test_conditional_independence_is_exact(self):
        P = self.chain()
        part = build_tripartition(Lattice(1, 5, False), 2, 1, 1)  # B = {1, 3} separates
        ch = forward_step(0.0, 0.6, 5, sites=part.A)
        Q = push(local_bayes_reverse(ch, P, part), push(ch, P))
        assert gaussian_kl(P, Q) <= 1e-9

    def test_full_buffer_matches_global(self, rng):
        P = random_gaussian(rng, 4)
        part = Tripartition((1,), (0, 2, 3), (), 3)
        ch = forward_step(0.0, 0.7, 4, sites=[1])
        Y = push(ch, P)
        loc = push(local_bayes_reverse(ch, P, part), Y)
        glob = push(bayes_reverse(ch, P), Y)
        assert gaussian_kl(loc, glob) <= 1e-9
        assert gaussian_kl(P, loc) <= 1e-9

    def test_weak_coupling_error_below_cmi(self):
        prec = np.array([[1.0, -0.4, -0.1], [-0.4, 1.0, -0.4], [-0.1, -0.4, 1.0]])
        P = from_precision(prec)
        part = Tripartition((0,), (1,), (2,), 1)
        ch = forward_step(0.0, 0.5, 3, sites=[0])
        d = gaussian_kl(P, push(local_bayes_reverse(ch, P, part), push(ch, P)))
        assert 0 < d <= gaussian_cmi(P, part)

    def test_marginal_prior_with_labels(self, rng):
        P = random_gaussian(rng, 5)
        part = Tripartition((3,), (2, 4), (0, 1), 1)
        ch = forward_step(0.1, 0.4, 5, sites=[3])
        full = local_bayes_reverse(ch, P, part)
        labels = (2, 3, 4)
        marg = local_bayes_reverse(ch, P.marginal(labels), part, labels=labels)
        np.testing.assert_allclose(full.M, marg.M)
        np.testing.assert_allclose(full.noise_cov, marg.noise_cov)

    def test_rejects_channel_outside_region(self, rng):
        P = random_gaussian(rng, 3)
        with pytest.raises(ValueError):
            local_bayes_reverse(forward_step(0.0, 0.5, 3), P, Tripartition((0,), (1,), (2,), 1))
        with pytest.raises(ValueError):
            local_bayes_reverse(forward_step(0.0, 0.5, 3, sites=[0]), P, Tripartition((0,), (1,), (), 1))


class TestKL:
    def test_self(self, rng):
        P = random_gaussian(rng, 3)
        assert gaussian_kl(P, P) == pytest.approx(0.0, abs=1e-12)

    def test_values(self):
        assert gaussian_kl(GaussianDist([0.0], [[1.0]]), GaussianDist([1.0], [[1.0]])) == pytest.approx(0.5)
        assert gaussian_kl(GaussianDist([0.0], [[2.0]]), GaussianDist([0.0], [[1.0]])) == pytest.approx(
            0.5 * (2 - 1 + math.log(0.5))
        )

    def test_against_quadrature(self):
        P, Q = GaussianDist([0.3], [[0.7]]), GaussianDist([-0.5], [[1.9]])
        p, q = stats.norm(0.3, math.sqrt(0.7)), stats.norm(-0.5, math.sqrt(1.9))
        val, _ = integrate.quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)), -20, 20)
        assert gaussian_kl(P, Q) == pytest.approx(val, abs=1e-9)


class TestCMI:
    def test_diagonal(self):
        P = GaussianDist(np.zeros(3), np.diag([1.0, 2.0, 3.0]))
        assert gaussian_cmi(P, Tripartition((0,), (1,), (2,), 1)) == 0.0

    def test_tridiagonal_precision(self):
        P = gmrf_chain(8, 0.45)
        part = Tripartition((3,), (2, 4), (0, 1, 5, 6, 7), 1)
        assert gaussian_cmi(P, part) <= 1e-10

    def test_direct_coupling_monte_carlo(self):
        prec = np.array([[1.0, -0.2, -0.3], [-0.2, 1.0, -0.2], [-0.3, -0.2, 1.0]])
        P = from_precision(prec)
        part = Tripartition((0,), (1,), (2,), 1)
        exact = gaussian_cmi(P, part)
        assert exact > 0
        rng = np.random.default_rng(7)
        x = P.sample(1_000_000, rng)

        def lp(idx):
            return stats.multivariate_normal(np.zeros(len(idx)), P.cov[np.ix_(idx, idx)]).logpdf(x[:, idx])

        # entropies by sample averages of -log density, combined like the definition
        mc = np.mean(lp([0, 1, 2]) + stats.norm(0, math.sqrt(P.cov[1, 1])).logpdf(x[:, 1]) - lp([0, 1]) - lp([1, 2]))
        assert mc == pytest.approx(exact, abs=0.01)

    @given(seed=st.integers(0, 10_000), data=st.data())
    def test_relabeling_invariance(self, seed, data):
        rng = np.random.default_rng(seed)
        P = random_gaussian(rng, 6)
        part = Tripartition((0, 1), (2, 3), (4, 5), 1)
        A = data.draw(st.permutations(part.A))
        B = data.draw(st.permutations(part.B))
        C = data.draw(st.permutations(part.C))
        assert gaussian_cmi(P, Tripartition(tuple(A), tuple(B), tuple(C), 1)) == pytest.approx(
            gaussian_cmi(P, part), abs=1e-12
        )

    def test_nonnegative_and_bounded_by_mutual_information(self, rng):
        for _ in range(50):
            P = random_gaussian(rng, 5)
            part = Tripartition((0,), (1, 2), (3, 4), 1)
            c = gaussian_cmi(P, part)
            assert c >= 0
            # I(A:C|B) <= I(A:BC)
            assert c <= gaussian_cmi(P, Tripartition((0,), (), (1, 2, 3, 4), 0)) + 1e-12


class TestScore:
    def test_at_mean(self, rng):
        P = random_gaussian(rng, 3)
        np.testing.assert_allclose(score(P, P.mean), 0.0, atol=1e-12)

    def test_standard_normal(self):
        assert score(GaussianDist([0.0], [[1.0]]), [2.0])[0] == pytest.approx(-2.0)

    def test_finite_differences(self, rng):
        P = random_gaussian(rng, 4)
        x = rng.standard_normal(4)
        h = 1e-5
        fd = np.array([(logpdf(P, x + h * e)[0] - logpdf(P, x - h * e)[0]) / (2 * h) for e in np.eye(4)])
        s = score(P, x)
        assert np.linalg.norm(s - fd) / np.linalg.norm(s) <= 1e-6

    def test_logpdf_matches_scipy(self, rng):
        P = random_gaussian(rng, 3)
        x = rng.standard_normal((5, 3))
        np.testing.assert_allclose(logpdf(P, x), stats.multivariate_normal(P.mean, P.cov).logpdf(x))


class TestMarkovFit:
    def test_unit_decay(self):
        rs = np.arange(6)
        fit = markov_length_fit(rs, np.exp(-rs))
        assert fit.xi == pytest.approx(1.0) and fit.gamma == pytest.approx(1.0)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    def test_scaled_decay(self):
        rs = np.arange(6)
        fit = markov_length_fit(rs, 5 * np.exp(-rs / 2))
        assert fit.xi == pytest.approx(2.0) and fit.gamma == pytest.approx(5.0)

    def test_no_decay_flagged(self):
        fit = markov_length_fit([0, 1, 2], [0.1, 0.1, 0.2])
        assert fit.xi == math.inf and not fit.decaying

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            markov_length_fit([0, 1], [0.1, 0.0])

    def test_noisy_chain(self):
        P = push(forward_step(0.0, 0.5, 16), gmrf_chain(16, 0.4))
        rs = list(range(6))
        fit = markov_length_fit(rs, cmi_sweep(P, Lattice(1, 16, False), 8, rs))
        assert 0 < fit.xi < 2 and fit.decaying
        assert fit.residual < 1.0


class TestMultiStepRecovery:
    def test_full_buffer_exact(self):
        P = gmrf_chain(8, 0.4)
        assert multi_step_local_recovery(P, Lattice(1, 8, False), 4, 8).kl <= 1e-8

    @pytest.mark.parametrize("r", [0, 1, 3])
    def test_product_state_exact(self, r, rng):
        P = GaussianDist(rng.standard_normal(6), np.diag(rng.uniform(0.5, 2, 6)))
        assert multi_step_local_recovery(P, Lattice(1, 6, True), 3, r).kl <= 1e-8

    def test_2d_grid(self):
        P = gmrf_grid(4, 0.2, periodic=True)
        lat = Lattice(2, 4, True)
        kl0 = multi_step_local_recovery(P, lat, 3, 0).kl
        kl1 = multi_step_local_recovery(P, lat, 3, 1).kl
        assert kl1 < kl0
        assert multi_step_local_recovery(P, lat, 3, 4).kl <= 1e-8

    def test_decay_at_least_the_fitted_rate(self):
        P = gmrf_chain(16, 0.4)
        lat = Lattice(1, 16, False)
        rs = [0, 1, 2, 3, 4, 5]
        res = [multi_step_local_recovery(P, lat, 8, r) for r in rs]
        kls = [x.kl for x in res]
        assert all(b < a for a, b in zip(kls, kls[1:]))
        slope = np.polyfit(rs, np.log(kls), 1)[0]
        # worst per-step CMI over the run sets the Markov length relevant for the bound
        fit = markov_length_fit(rs, [max(x.step_cmis) for x in res])
        assert -slope >= 1 / (2 * fit.xi)

    def test_rejects_mismatched_sizes(self):
        with pytest.raises(ValueError):
            multi_step_local_recovery(gmrf_chain(5), Lattice(1, 6), 2, 1)
