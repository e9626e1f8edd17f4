import math

import numpy as np
import pytest

from rhomix import discrete, lattice
from rhomix.convdecay import ToeplitzKernel, decay_fit
from rhomix.discrete import FiniteSystem
from rhomix.errors import CapExceededError, ValidationError
from rhomix.lattice import IsingTorus, QuadraticModel


def nn_model(gamma_value, beta=1.0):
    return QuadraticModel(1, ToeplitzKernel.from_dict(1, 1, {1: gamma_value, -1: gamma_value}), beta)


class TestQuadratic:
    def test_zero_coupling_is_delta(self):
        cov = lattice.quadratic_covariance(nn_model(0.0))
        assert cov.a_inv_center == pytest.approx(1.0, abs=1e-15)
        assert cov.window_sum == pytest.approx(1.0, abs=1e-15)
        offs = cov.eps_kernel.offsets()
        vals = cov.eps_kernel.flat_values()
        assert vals[np.all(offs != 0, axis=1)].max(initial=0.0) == 0.0

    def test_mass_conservation_and_center_bound(self):
        model = nn_model(0.2)
        cov = lattice.quadratic_covariance(model)
        assert abs(cov.window_sum - 1.0) + cov.truncation_mass < 1e-10
        assert cov.a_inv_center >= 1.0 / (1.0 + model.Gamma) - 1e-12

    def test_covariance_entries_nonnegative(self):
        cov = lattice.quadratic_covariance(nn_model(0.35))
        assert cov.a_inv.values.min() >= -1e-15

    def test_rho_report(self):
        model = nn_model(0.2)  # Gamma = 0.4 < 1
        rep = lattice.quadratic_rho_report(model)
        assert rep.gamma_bound_applies
        assert rep.eps_sum_offcenter <= model.Gamma + 1e-9
        assert rep.sublattice is not None and rep.sublattice.k < 1.0
        assert rep.distance_profile[0] == 1.0 or rep.distance_profile[0] <= 1.0
        profile = [rep.distance_profile[d] for d in sorted(rep.distance_profile)]
        assert all(b <= a + 1e-12 for a, b in zip(profile, profile[1:]))

    def test_exponential_couplings_give_exponential_correlations(self):
        R = 40
        zs = np.arange(-R, R + 1)
        vals = 0.3 * np.exp(-0.7 * np.abs(zs))
        vals[R] = 0.0
        model = QuadraticModel(1, ToeplitzKernel(1, R, vals))
        fit = decay_fit(lattice.quadratic_covariance(model).a_inv, max_shell=R)
        assert fit.classification == "exponential"
        assert fit.rate <= 0.7 + 1e-9  # the inverse can decay more slowly, never faster

    def test_polynomial_couplings_keep_the_exponent(self):
        R = 46
        zs = np.arange(-R, R + 1)
        vals = 0.4 / (1.0 + np.abs(zs)) ** 3
        vals[R] = 0.0
        model = QuadraticModel(1, ToeplitzKernel(1, R, vals))
        fit = decay_fit(lattice.quadratic_covariance(model).a_inv, max_shell=R)
        assert fit.classification == "polynomial"
        assert fit.exponent == pytest.approx(3.0, abs=0.3)

    def test_validation(self):
        with pytest.raises(ValidationError):
            QuadraticModel(1, ToeplitzKernel.from_dict(1, 1, {0: 0.5}))
        with pytest.raises(ValidationError):
            QuadraticModel(1, ToeplitzKernel.from_dict(1, 1, {1: -0.1, -1: -0.1}))


class TestIsingExact:
    def test_high_temperature_decouples(self):
        rep = lattice.ising_epsilon(IsingTorus(1, 6, 1e6))
        assert rep.kernel.flat_values().max() < 1e-5

    def test_transfer_matrix_correlation(self):
        T, L = 2.0, 12
        sys = lattice.ising_exact(IsingTorus(1, L, T))
        spins = np.indices(sys.joint.shape) * 2 - 1
        for d in (1, 3, 5):
            got = float((sys.joint * spins[0] * spins[d]).sum())
            assert got == pytest.approx(lattice.ising_transfer_correlation(T, L, d), abs=1e-12)

    def test_pair_correlation_equals_moment_on_the_ring(self):
        # two-state variables: maximal correlation of a symmetric pair is E[w_i w_j]
        T, L = 2.5, 8
        rep = lattice.ising_epsilon(IsingTorus(1, L, T))
        # subjective values dominate the plain pair moments
        for d in (1, 2, 3):
            moment = lattice.ising_transfer_correlation(T, L, d)
            assert rep.kernel.value_at((d,)) >= moment - 1e-12

    def test_monotone_decay_and_k0(self):
        rep = lattice.ising_epsilon(IsingTorus(2, 3, 2.0))
        c0, k0 = lattice.ising_constants(2, 2.0)
        assert rep.c0 == c0 and rep.k0 == k0
        assert rep.subjective  # 9 sites: clamped contexts scanned
        vals = rep.kernel.flat_values()
        assert vals.max() <= k0 + 1e-12
        # monotone decay along the axis distances
        v1 = rep.kernel.value_at((1, 0))
        v2 = rep.kernel.value_at((1, 1))
        assert v1 >= v2 - 1e-12

    def test_user_supplied_decay_envelope(self):
        rep = lattice.ising_epsilon(IsingTorus(1, 8, 2.5))
        assert rep.envelope_holds is None  # constants are user inputs, never derived
        generous = rep.check_envelope(C_prime=5.0, psi_prime=0.1)
        assert generous.envelope_holds is True
        stingy = rep.check_envelope(C_prime=0.01, psi_prime=3.0)
        assert stingy.envelope_holds is False

    def test_site_cap(self):
        with pytest.raises(CapExceededError):
            lattice.ising_exact(IsingTorus(1, 17, 1.0))

    def test_clamped_boundary(self):
        sys = lattice.ising_exact(IsingTorus(1, 5, 2.0, clamp_sites=((0,),), clamp_values=(1,)))
        marg = sys.marginal([0])
        assert marg[1] == pytest.approx(1.0, abs=1e-12)


class TestIsingMcmc:
    def test_pairwise_estimate_matches_exact(self):
        T, L = 3.0, 16
        rep = lattice.ising_epsilon(IsingTorus(1, L, T), method="mcmc", seed=2,
                                    sweeps=4000, thin=2)
        exact = lattice.ising_transfer_correlation(T, L, 1)
        assert rep.kernel.value_at((1,)) == pytest.approx(exact, abs=0.03)
        assert rep.stderr is not None


class TestRingSampler:
    def test_law_is_exact_on_small_ring(self):
        import itertools

        T, L = 2.0, 5
        th = math.tanh(1.0 / T)
        # enumerate the sampler's law and compare to the Gibbs weights
        def sampler_prob(cfg):
            prob = 0.5
            cur = cfg[0]
            for i in range(L - 1):
                k = L - i - 1
                up = (1 + th * cur) * (1 + th**k * cfg[0])
                dn = (1 - th * cur) * (1 - th**k * cfg[0])
                p_up = up / (up + dn)
                prob *= p_up if cfg[i + 1] > 0 else 1 - p_up
                cur = cfg[i + 1]
            return prob

        weights = {}
        for cfg in itertools.product((-1, 1), repeat=L):
            weights[cfg] = math.exp(sum(cfg[i] * cfg[(i + 1) % L] for i in range(L)) / T)
        Z = sum(weights.values())
        for cfg, w in weights.items():
            assert sampler_prob(cfg) == pytest.approx(w / Z, abs=1e-14)


class TestCLT:
    def test_independent_baseline(self):
        rep = lattice.clt_experiment("independent", (32,), replicas=10_000, seed=0)
        assert rep.cf_distances[0] < 0.02
        assert rep.sigma_hat2 == pytest.approx(1.0, rel=0.05)

    def test_disk_shape_supported(self):
        rep = lattice.clt_experiment("independent", (6,), replicas=2_000, seed=1,
                                     shape="disk", dim=2)
        assert rep.cf_distances[0] < 0.2

    def test_quadratic_model_is_exactly_gaussian(self):
        model = nn_model(0.2)
        rep = lattice.clt_experiment(model, (4, 16), replicas=20_000, seed=2)
        assert max(rep.cf_distances) < 0.02
        assert rep.sigma2_limit == pytest.approx(1.0, abs=1e-12)
        assert rep.sigma_hat2 == pytest.approx(1.0, rel=0.08)

    def test_ising_chain_converges(self):
        model = IsingTorus(1, 8, 3.0)
        rep = lattice.clt_experiment(model, (8, 32), replicas=10_000, seed=4)
        th = math.tanh(1.0 / 3.0)
        assert rep.sigma2_limit == pytest.approx((1 + th) / (1 - th), abs=1e-12)
        assert rep.cf_distances[1] < rep.cf_distances[0]
        assert rep.sigma_hat2 == pytest.approx(rep.sigma2_limit, rel=0.06)


class TestPhaseProductBound:
    def _paired_system(self, gamma, blocks=2):
        # identically distributed correlated binary blocks
        base = np.array([[0.25 + gamma / 4, 0.25 - gamma / 4],
                         [0.25 - gamma / 4, 0.25 + gamma / 4]])
        joint = base
        for _ in range(blocks - 1):
            joint = np.multiply.outer(joint, base)
        names = tuple((f"v{k}", 2) for k in range(2 * blocks))
        return FiniteSystem(names, joint)

    def test_independent_blocks_have_zero_lhs(self):
        sys = self._paired_system(0.0)
        rep = lattice.phase_product_bound(sys, [["v0", "v1"], ["v2", "v3"]], lam=0.7)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)

    def test_lambda_zero_is_trivial(self):
        sys = self._paired_system(0.4)
        rep = lattice.phase_product_bound(sys, [["v0", "v1"], ["v2", "v3"]], lam=0.0)
        assert rep.lhs == 0.0 and rep.rhs == 0.0

    def test_correlated_blocks_strict_inequality(self):
        # two blocks sharing a spin-pair correlation, identical marginals
        gamma = 0.5
        base = np.array([[(1 + gamma) / 4, (1 - gamma) / 4],
                         [(1 - gamma) / 4, (1 + gamma) / 4]])
        sys = FiniteSystem((("a", 2), ("b", 2)), base)
        rep = lattice.phase_product_bound(sys, [["a"], ["b"]], lam=0.9)
        assert 0.0 < rep.lhs < rep.rhs

    def test_mismatched_blocks_error(self):
        joint = np.zeros((2, 3))
        joint[0, 0] = joint[1, 1] = joint[1, 2] = 1 / 3
        sys = FiniteSystem((("a", 2), ("b", 3)), joint)
        with pytest.raises(ValidationError):
            lattice.phase_product_bound(sys, [["a"], ["b"]], lam=0.3)
