import math

import numpy as np
import pytest

from rhomix import gaussian, tensor_bounds
from rhomix.errors import ValidationError
from rhomix.gaussian import GaussianSystem, OUChainParams


def random_psd(rng, n, labels=None):
    A = rng.standard_normal((n, n))
    cov = A @ A.T + 0.1 * np.eye(n)
    return GaussianSystem(tuple(labels or (f"v{k}" for k in range(n))), cov)


class TestMaxcorr:
    def test_worked_example(self):
        rep = gaussian.par411_report()
        assert rep["x1_y"] == pytest.approx(0.5, abs=1e-10)
        assert rep["x2_y"] == pytest.approx(0.5, abs=1e-10)
        assert rep["x1_y_given_x2"] == pytest.approx(1 / 3, abs=1e-10)
        assert rep["vec_y"] == pytest.approx(1 / math.sqrt(3), abs=1e-10)
        assert rep["l2_sum_bound"] == pytest.approx(1 / math.sqrt(2), abs=1e-10)
        assert rep["minimal_hypothesis_bound"] == pytest.approx(math.sqrt(13) / 6, abs=1e-10)
        assert not rep["minimal_hypothesis_bound_verified"]
        assert np.abs(rep["vtable"] - [[40.5, 13.5], [24, 12]]).max() < 1e-10

    def test_vtable_edge_examples(self):
        t1 = gaussian.vtable(np.array([[1.0, 0, 0], [-1, 1, 0], [1, 1, 1]]))
        assert np.abs(t1 - [[0.0, 1.0], [1 / 6, 0.5]]).max() < 1e-10
        t2 = gaussian.vtable(np.array([[1.0, 0, 1], [0, 1, -1], [0, 0, 1]]))
        assert np.abs(t2 - [[0.5, 1.5], [1.0, 1.0]]).max() < 1e-10

    def test_block_diagonal_is_zero(self):
        cov = np.diag([1.0, 2.0, 3.0])
        sys = GaussianSystem(("a", "b", "c"), cov)
        assert gaussian.maxcorr_gaussian(sys, ["a"], ["b", "c"]) == 0.0

    def test_scalar_correlation(self):
        for r in (-0.7, 0.0, 0.3, 0.99):
            sys = GaussianSystem(("x", "y"), np.array([[1.0, r], [r, 1.0]]))
            assert gaussian.maxcorr_gaussian(sys, ["x"], ["y"]) == pytest.approx(abs(r), abs=1e-12)

    def test_deterministic_identity_gives_one(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        sys = GaussianSystem(("x", "y"), cov)
        assert gaussian.maxcorr_gaussian(sys, ["x"], ["y"]) == pytest.approx(1.0, abs=1e-10)

    def test_reparameterization_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(15):
            sys = random_psd(rng, 5)
            labels = list(sys.labels)
            I, J = labels[:2], labels[2:]
            base = gaussian.maxcorr_gaussian(sys, I, J)
            A = rng.standard_normal((2, 2)) + 2 * np.eye(2)
            B = rng.standard_normal((3, 3)) + 2 * np.eye(3)
            T = np.zeros((5, 5))
            T[:2, :2] = A
            T[2:, 2:] = B
            sys2 = GaussianSystem(sys.labels, T @ sys.cov @ T.T)
            assert gaussian.maxcorr_gaussian(sys2, I, J) == pytest.approx(base, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValidationError):
            GaussianSystem(("a", "b"), np.array([[1.0, 0.5], [0.3, 1.0]]))
        with pytest.raises(ValidationError):
            GaussianSystem(("a", "b"), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestConditioning:
    def test_conditioning_on_independent_block_is_identity(self):
        cov = np.diag([1.0, 2.0, 3.0])
        cov[0, 1] = cov[1, 0] = 0.5
        sys = GaussianSystem(("a", "b", "c"), cov)
        out = gaussian.condition(sys, ["c"])
        assert np.abs(out.cov - cov[:2, :2]).max() < 1e-12

    def test_against_monte_carlo_regression(self):
        rng = np.random.default_rng(8)
        sys = random_psd(rng, 4)
        out = gaussian.condition(sys, [sys.labels[3]])
        n = 400_000
        X = rng.multivariate_normal(np.zeros(4), sys.cov, size=n)
        # regression residual covariance, and empirical conditional covariance near values
        beta = np.linalg.lstsq(X[:, 3:4], X[:, :3], rcond=None)[0]
        resid = X[:, :3] - X[:, 3:4] @ beta
        emp = np.cov(resid.T)
        assert np.abs(emp - out.cov).max() < 0.05 * max(1.0, np.abs(out.cov).max())
        for v in (-1.0, 0.0, 1.0):
            sel = np.abs(X[:, 3] - v) < 0.05
            sub = X[sel][:, :3]
            emp_v = np.cov(sub.T)
            assert np.abs(emp_v - out.cov).max() < 0.12 * max(1.0, np.abs(out.cov).max())

    def test_chained_orderings_agree(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            sys = random_psd(rng, 4)
            labels = list(sys.labels)
            v1, _ = gaussian.chained_maxcorr(sys, labels[:3], labels[3])
            v2, _ = gaussian.chained_maxcorr(sys, labels[:3][::-1], labels[3])
            assert v1 == pytest.approx(v2, abs=1e-9)

    def test_chained_matches_worked_example(self):
        M = np.array([[4.0, 1, 1], [1, 4, 1], [1, 1, 4]])
        sys = GaussianSystem(("X1", "X2", "Y"), M @ M.T)
        value, es = gaussian.chained_maxcorr(sys, ["X1", "X2"], "Y")
        assert es[0] == pytest.approx(0.5, abs=1e-10)
        assert es[1] == pytest.approx(1 / 3, abs=1e-10)
        assert value == pytest.approx(1 / math.sqrt(3), abs=1e-10)


class TestOptimalConstructions:
    def test_single_epsilon_recovers_alpha(self):
        for eps in (0.0, 0.3, 0.8):
            sys = gaussian.build_optimal_simple([eps])
            # Cov(X1, Y) = sqrt(alpha); e_1 = sqrt(alpha) = eps
            assert sys.cov[0, 1] == pytest.approx(eps, abs=1e-10)

    def test_zero_vector(self):
        sys = gaussian.build_optimal_simple([0.0, 0.0])
        assert gaussian.maxcorr_gaussian(sys, ["X1", "X2"], ["Y"]) == pytest.approx(0.0, abs=1e-12)

    def test_half_half_reaches_bound(self):
        sys = gaussian.build_optimal_simple([0.5, 0.5])
        got = gaussian.maxcorr_gaussian(sys, ["X1", "X2"], ["Y"])
        assert got == pytest.approx(math.sqrt(7) / 4, abs=1e-9)

    def test_random_gaussians_never_beat_their_chain_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            sys = random_psd(rng, 4)
            labels = list(sys.labels)
            value, es = gaussian.chained_maxcorr(sys, labels[:3], labels[3])
            assert value <= tensor_bounds.simple_bound(es) + 1e-9

    def test_banded_window(self):
        alpha, k = 1.0, 32
        rep = gaussian.build_banded_zz(alpha, k)
        expect = (math.sqrt(1 + 4 * alpha) - 1) / (2 * math.sqrt(1 + 2 * alpha))
        assert rep.e_half == pytest.approx(expect, abs=1e-9)
        limit = 2 * alpha / (1 + 2 * alpha)
        assert limit - 2.0 / k <= rep.maxcorr <= limit + 1e-12
        # consistency with the arcsine law: two conditional entries e_{1/2}
        assert tensor_bounds.zz_bound([expect, expect]) == pytest.approx(limit, abs=1e-12)

    def test_banded_zero_coupling(self):
        rep = gaussian.build_banded_zz(0.0, 4)
        assert rep.e_half == 0.0
        assert rep.maxcorr == pytest.approx(0.0, abs=1e-12)


class TestOUChain:
    def test_smallt_richardson(self):
        params = OUChainParams(K=16, t=0.05)
        co = gaussian.ou_smallt_coefficients(params, 0.05)
        assert co["pp"] == pytest.approx(co["pp_expected"], rel=0.02)
        assert co["pq"] == pytest.approx(co["pq_expected"], rel=0.02)
        assert co["qq"] == pytest.approx(co["qq_expected"], rel=0.02)
        assert co["slope_pp_1"] == pytest.approx(3.0, abs=0.3)
        assert co["slope_pp_2"] == pytest.approx(5.0, abs=0.3)

    def test_joint_report(self):
        rep = gaussian.ou_chain_joint(OUChainParams(K=8, t=0.5))
        assert rep.stationarity_residual < 1e-10
        r, R = rep.qbar_range
        assert 0 < r <= R < math.inf
        assert 0.0 < rep.maxcorr < 1.0
        assert rep.corr_pp.shape == (8, 8)
        # momentum autocorrelation decays with the friction to leading order
        assert rep.corr_pp[0, 0] < 1.0

    def test_nondimensional_scaling(self):
        # the correlation structure is invariant under temperature changes
        r1 = gaussian.ou_chain_joint(OUChainParams(K=6, t=0.7, T=1.0)).maxcorr
        r2 = gaussian.ou_chain_joint(OUChainParams(K=6, t=0.7, T=3.5)).maxcorr
        assert r1 == pytest.approx(r2, abs=1e-10)

    def test_param_validation(self):
        with pytest.raises(ValidationError):
            OUChainParams(K=2)
        with pytest.raises(ValidationError):
            OUChainParams(t=-1.0)


class TestThreeLines:
    def test_orthonormal_axes(self):
        rep = gaussian.three_lines([1, 0, 0], [0, 1, 0], [0, 0, 1])
        assert all(abs(a - math.pi / 2) < 1e-12 for a in rep.geometric)
        assert all(abs(a - math.pi / 2) < 1e-12 for a in rep.apparent)
        assert rep.order == "equal"

    def test_recovered_figure_configuration(self):
        # configuration recovered to match a reference drawing:
        # geometric angles ~ (58, 71, 15) deg, apparent ~ (30, 34, 9) deg
        u1 = (0.0, 0.0, 1.0)
        u2 = (0.2612607544865312, 0.0, 0.9652682622800401)
        u3 = (0.8177495314020848, -0.47378704096565905, 0.32682035387147423)
        rep = gaussian.three_lines(u1, u2, u3)
        got = np.rad2deg(list(rep.geometric) + list(rep.apparent))
        target = np.array([58.0, 71.0, 15.0, 30.0, 34.0, 9.0])
        assert np.abs(got - target).max() < 1.0
        assert rep.order == "apparent<geometric"

    def test_ratio_identity_random(self):
        rng = np.random.default_rng(6)
        done = 0
        while done < 300:
            u = rng.standard_normal((3, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            sines = [np.linalg.norm(np.cross(u[a], u[b])) for a, b in ((0, 1), (1, 2), (2, 0))]
            if min(sines) < 1e-3:
                continue
            done += 1
            rep = gaussian.three_lines(*u)
            assert max(rep.sine_ratios) - min(rep.sine_ratios) < 1e-10

    def test_collinear_error(self):
        with pytest.raises(ValidationError):
            gaussian.three_lines([1, 0, 0], [1, 0, 0], [0, 0, 1])
