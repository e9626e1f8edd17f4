import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhomix import discrete, tensor_bounds as tb
from rhomix.errors import ValidationError
from rhomix.tensor_bounds import EpsilonMatrix, LatticeKernel, TailModel

unit = st.floats(0.0, 1.0, allow_nan=False)


class TestSimpleBound:
    def test_half_half(self):
        assert tb.simple_bound([0.5, 0.5]) == pytest.approx(math.sqrt(7) / 4, abs=1e-15)

    def test_empty_and_one(self):
        assert tb.simple_bound([]) == 0.0
        assert tb.simple_bound([0.2, 1.0, 0.1]) == 1.0

    @given(st.lists(unit, min_size=1, max_size=6), st.integers(0, 5), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_each_entry(self, eps, idx, bump):
        eps = list(eps)
        k = idx % len(eps)
        raised = list(eps)
        raised[k] = min(1.0, eps[k] + bump)
        assert tb.simple_bound(raised) >= tb.simple_bound(eps) - 1e-12

    def test_dominated_by_l2_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            eps = rng.uniform(0, 1, size=rng.integers(1, 6))
            assert tb.simple_bound(eps) <= tb.l2_sum_bound(eps) + 1e-12


class TestNmBound:
    def test_row_matrix_is_l2_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            eps = rng.uniform(0, 1, size=5)
            got = tb.nm_bound(eps[None, :])
            assert got == pytest.approx(min(1.0, math.sqrt(float(eps @ eps))), abs=1e-12)

    def test_rank_one_constant_matrix(self):
        for eps, n, m in ((0.2, 3, 4), (0.8, 2, 2)):
            got = tb.nm_bound(np.full((n, m), eps))
            assert got == pytest.approx(min(1.0, eps * math.sqrt(n * m)), abs=1e-12)

    def test_zero(self):
        assert tb.nm_bound(np.zeros((3, 3))) == 0.0

    @given(st.integers(0, 10_000), st.integers(0, 8), st.floats(0, 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_each_entry(self, seed, cell, bump):
        rng = np.random.default_rng(seed)
        eps = rng.uniform(0, 1, size=(3, 3))
        i, j = divmod(cell % 9, 3)
        raised = eps.copy()
        raised[i, j] = min(1.0, eps[i, j] + bump)
        assert tb.nm_bound(raised) >= tb.nm_bound(eps) - 1e-12

    def test_raw_norm_exposed_beyond_one(self):
        mat = EpsilonMatrix.from_array(np.full((3, 3), 0.9))
        assert tb.nm_bound(mat) == 1.0
        assert mat.operator_norm() == pytest.approx(2.7, abs=1e-12)


class TestZzBound:
    def test_single_entry(self):
        assert tb.zz_bound([0.37]) == pytest.approx(0.37, abs=1e-15)

    def test_double_angle(self):
        for alpha in (0.2, 1.0, 3.0):
            e = (math.sqrt(1 + 4 * alpha) - 1) / (2 * math.sqrt(1 + 2 * alpha))
            assert tb.zz_bound([e, e]) == pytest.approx(2 * alpha / (1 + 2 * alpha), abs=1e-12)
            assert tb.zz_bound([e, e]) == pytest.approx(2 * e * math.sqrt(1 - e * e), abs=1e-12)

    def test_saturation(self):
        assert tb.zz_bound([0.9, 0.9, 0.9]) == 1.0

    @given(st.lists(unit, min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_dominated_by_mass(self, values):
        # the arcsine sum is strictly sharper than the operator-norm route,
        # whose translation-invariant norm is the plain sum
        zz = tb.zz_bound(values)
        mass = min(1.0, float(np.sum(values)))
        assert zz <= mass + 1e-12
        if 1e-6 < zz < 1 - 1e-6 and len([v for v in values if v > 1e-9]) > 1:
            assert zz < mass

    @given(st.lists(unit, min_size=1, max_size=6), st.integers(0, 5), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, values, idx, bump):
        k = idx % len(values)
        raised = list(values)
        raised[k] = min(1.0, values[k] + bump)
        assert tb.zz_bound(raised) >= tb.zz_bound(values) - 1e-12


def kernel_1d(entries, R=None, tail=None, norm="l1"):
    R = R if R is not None else max(abs(z) for z in entries)
    return LatticeKernel.from_dict(1, R, entries, norm=norm, tail=tail)


class TestLatticeKernel:
    def test_symmetry_enforced(self):
        values = np.zeros(5)
        values[3] = 0.5  # z = +1 only
        with pytest.raises(ValidationError):
            LatticeKernel(1, 2, values)

    def test_json_like_roundtrip_values(self):
        k = kernel_1d({1: 0.25, 2: 0.1})
        assert k.value_at(1) == 0.25 and k.value_at(-1) == 0.25
        assert k.value_at(5) == 0.0

    def test_unknown_tail_refuses(self):
        k = kernel_1d({1: 0.25}, tail=TailModel(kind="unknown"))
        with pytest.raises(ValidationError):
            tb.zn_bound(k)


class TestZnBound:
    def test_matches_zz_in_one_dimension(self):
        k = kernel_1d({1: 0.3, 2: 0.05})
        zb = tb.zn_bound(k)
        assert zb.value == pytest.approx(tb.zz_bound([0.3, 0.3, 0.05, 0.05]), abs=1e-12)
        assert zb.tail_arcsin == 0.0

    def test_zero_kernel(self):
        assert tb.zn_bound(kernel_1d({1: 0.0})).value == 0.0

    def test_exponential_tail_certifies_window_doubling(self):
        C, psi = 0.4, 0.9

        def build(R):
            zs = np.arange(-R, R + 1)
            g1, g2 = np.meshgrid(zs, zs, indexing="ij")
            vals = C * np.exp(-psi * (np.abs(g1) + np.abs(g2)))
            vals[R, R] = 0.0
            return LatticeKernel(2, R, np.clip(vals, 0, 1), norm="l1",
                                 tail=TailModel("exponential", C=C, psi=psi))

        small = tb.zn_bound(build(4))
        big = tb.zn_bound(build(8))
        direct = tb.zn_bound(LatticeKernel(2, 8, build(8).values, norm="l1"))
        # certified values are upper bounds that tighten as the window grows
        assert small.value >= big.value - 1e-12 >= direct.value - 1e-12
        assert small.tail_arcsin > big.tail_arcsin > 0


class TestDistanceBound:
    def test_saturates_at_one(self):
        k = kernel_1d({1: 0.8, 2: 0.7})
        assert tb.distance_bound(k, 0) == 1.0

    def test_single_shell_exact(self):
        k = kernel_1d({3: 0.21})
        assert tb.distance_bound(k, 3) == pytest.approx(0.42, abs=1e-15)
        assert tb.distance_bound(k, 4) == 0.0

    def test_ising_style_log_slope(self):
        psi = 0.8
        C = 1.4
        R = 40
        zs = np.arange(-R, R + 1)[:, None]
        ws = np.arange(-R, R + 1)[None, :]
        vals = np.clip(C * np.exp(-psi * (np.abs(zs) + np.abs(ws))), 0, 1)
        vals[R, R] = 0.0
        k = LatticeKernel(2, R, vals, norm="l1", tail=TailModel("exponential", C=C, psi=psi))
        ds = np.arange(8, 20)
        vals_d = np.array([tb.distance_bound(k, float(d)) for d in ds])
        slopes = np.diff(np.log(vals_d))
        assert np.abs(slopes.mean() + psi) < 0.12

    def test_polynomial_tail_rigorous(self):
        k = kernel_1d({1: 0.2, 2: 0.05}, R=2, tail=TailModel("polynomial", C=0.4, alpha=2.5))
        v8 = tb.distance_bound(k, 8.0)
        direct = sum(0.4 / z**2.5 for z in range(8, 100000)) * 2
        assert v8 >= direct - 1e-6


class TestSublattice:
    def test_zero_kernel(self):
        rep = tb.sublattice_k(kernel_1d({1: 0.0}))
        assert rep.k == 0.0 and rep.ell == 1

    def test_subcritical_mass_equals_sum(self):
        k = kernel_1d({1: 0.2, 2: 0.1})
        rep = tb.sublattice_k(k)
        assert rep.ell == 1
        assert rep.k == pytest.approx(0.6, abs=1e-12)
        assert rep.k < 1.0

    def test_nearest_neighbor_above_critical_mass(self):
        rep = tb.sublattice_k(kernel_1d({1: 0.6}))
        assert rep.ell == 3
        assert rep.k < 1.0
        per = tb.simple_bound([0.0, 0.6, 0.6])
        assert rep.k == pytest.approx(tb.simple_bound([per, per, per]), abs=1e-12)

    def test_brute_force_six_site_system(self):
        # ferromagnetic chain measured kernel, then every disjoint split obeys k
        from rhomix.lattice import IsingTorus, ising_exact

        torus = IsingTorus(1, 6, 4.0)
        sys = ising_exact(torus)
        n = 6
        eps_by_dist = {}
        for i in range(n):
            for j in range(i + 1, n):
                d = min(j - i, n - (j - i))
                v = discrete.subjective_maxcorr(sys, i, j)
                eps_by_dist[d] = max(eps_by_dist.get(d, 0.0), v)
        kern = kernel_1d({d: v for d, v in eps_by_dist.items()}, R=3)
        rep = tb.sublattice_k(kern)
        assert rep.k < 1.0
        worst = 0.0
        for assign in range(3**n):
            blocks = [[], []]
            a = assign
            for site in range(n):
                c = a % 3
                a //= 3
                if c:
                    blocks[c - 1].append(site)
            if blocks[0] and blocks[1]:
                worst = max(worst, discrete.maxcorr_blocks(sys, blocks[0], blocks[1]))
        assert worst <= rep.k + 1e-9

    def test_no_valid_spacing_error(self):
        # dense strong kernel: every spacing <= 64 leaves >= 2 entries of 0.7
        # in some congruence class, so no class sum drops below 1
        vals = np.full(2 * 130 + 1, 0.7)
        vals[130] = 0.0
        with pytest.raises(ValidationError):
            tb.sublattice_k(LatticeKernel(1, 130, vals))


class TestPFCertificate:
    def test_nilpotent(self):
        rho, u = tb.pf_certificate(np.array([[0.0, 1.0], [0.0, 0.0]]), delta=1e-3)
        assert rho == 0.0
        assert (u > 0).all()
        assert (np.array([[0.0, 1.0], [0.0, 0.0]]) @ u <= (rho + 1e-3) * u + 1e-12).all()

    def test_scalar(self):
        rho, u = tb.pf_certificate(np.array([[0.7]]))
        assert rho == pytest.approx(0.7, abs=1e-12)

    def test_random_matches_eigen_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            A = rng.uniform(0, 1, size=(3, 3))
            if rng.uniform() < 0.3:
                A[rng.integers(3), :] = 0.0  # force reducibility sometimes
            rho, u = tb.pf_certificate(A, delta=1e-7)
            oracle = float(np.max(np.abs(np.linalg.eigvals(A))))
            assert rho == pytest.approx(oracle, abs=1e-9)
            assert (u > 0).all()
            assert (A @ u <= (rho + 1e-7) * u * (1 + 1e-12) + 1e-12).all()

    def test_norm_link(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            eps = rng.uniform(0, 1, size=(3, 4))
            rho, _ = tb.pf_certificate(eps @ eps.T)
            assert math.sqrt(rho) == pytest.approx(
                float(np.linalg.svd(eps, compute_uv=False)[0]), abs=1e-9
            )


class TestSoundness:
    def test_measured_bounds_dominate_block_correlation(self):
        rng = np.random.default_rng(33)
        for _ in range(30):
            nx = int(rng.integers(1, 4))
            ny = int(rng.integers(1, 4))
            sys, xs, ys = discrete.random_system(rng, nx, ny)
            rho = discrete.maxcorr_blocks(sys, xs, ys)
            eps = np.array(
                [[discrete.subjective_maxcorr(sys, x, y) for y in ys] for x in xs]
            )
            assert rho <= tb.nm_bound(eps) + 1e-9
            if ny == 1:
                assert rho <= tb.simple_bound(eps[:, 0]) + 1e-9
