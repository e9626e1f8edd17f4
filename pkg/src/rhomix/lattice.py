"""Concrete models feeding the bound machinery.

* quadratic lattice model: Gaussian field with quadratic pinning and
  attractive pair couplings; its covariance kernel is the convolution inverse
  of the coupling kernel and the pairwise correlations are
  eps(z) = a_inv(z) / a_inv(0).
* small Ising tori: exact Gibbs enumeration, measured correlation kernels,
  theoretical constants c0 and k0, and an MCMC pairwise estimator.
* block-sum central limit experiments with empirical characteristic functions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import discrete
from .convdecay import ToeplitzKernel, conv_inverse
from .discrete import FinitePair, FiniteSystem
from .errors import CapExceededError, ValidationError
from .tensor_bounds import LatticeKernel, TailModel, distance_bound, sublattice_k

ISING_EXACT_SITE_CAP = 16
ISING_SUBJECTIVE_SITE_CAP = 10


# ---------------------------------------------------------------------------
# quadratic model


@dataclass(frozen=True)
class QuadraticModel:
    """Coupling kernel gamma(z) >= 0 on a window, with unit quadratic pinning."""

    n: int
    gamma: ToeplitzKernel
    beta: float = 1.0

    def __post_init__(self):
        g = self.gamma
        if g.n != self.n:
            raise ValidationError("QuadraticModel: kernel dimension mismatch")
        if g.values.min() < 0:
            raise ValidationError("QuadraticModel: couplings must be nonnegative")
        if g.value_at((0,) * self.n) != 0:
            raise ValidationError("QuadraticModel: gamma(0) must be 0")
        flipped = g.values[(slice(None, None, -1),) * self.n]
        if np.abs(g.values - flipped).max() > 1e-12:
            raise ValidationError("QuadraticModel: gamma must be symmetric")
        if self.beta <= 0:
            raise ValidationError("QuadraticModel: beta must be > 0")

    @property
    def Gamma(self) -> float:
        return self.gamma.l1_norm()


@dataclass(frozen=True)
class QuadraticCovariance:
    a_inv: ToeplitzKernel         # convolution inverse of the precision kernel
    eps_kernel: LatticeKernel     # eps(z) = a_inv(z)/a_inv(0), certified tail
    a_inv_center: float
    window_sum: float
    truncation_mass: float        # certified l1 mass of a_inv outside the window


def quadratic_covariance(model: QuadraticModel) -> QuadraticCovariance:
    """Covariance kernel of the quadratic model via the Neumann series.

    The precision kernel is (1+Gamma) delta_0 - gamma, so
    a_inv = (delta_0 + B[gamma/(1+Gamma)]) / (1+Gamma); the series always
    converges since ||gamma||_1/(1+Gamma) < 1.  Cov(w_i, w_j) =
    a_inv(j-i)/beta and eps(z) = a_inv(z)/a_inv(0).
    """
    G = model.Gamma
    scaled = ToeplitzKernel(model.n, model.gamma.R, model.gamma.values / (1.0 + G))
    series = conv_inverse(scaled)
    values = series.values.copy()
    center = (series.R,) * model.n
    values[center] += 1.0
    values /= 1.0 + G
    a_inv = ToeplitzKernel(model.n, series.R, values)
    s = scaled.l1_norm()
    n_terms = max(1, int(math.ceil(math.log(1e-12 * (1.0 - s)) / math.log(s)))) if s > 0 else 1
    trunc = (s ** (n_terms + 1)) / (1.0 - s) / (1.0 + G) if s > 0 else 0.0
    a0 = float(values[center])
    eps_vals = np.clip(values / a0, 0.0, 1.0)
    tail = TailModel(kind="mass", total=min(1.0, trunc / a0)) if trunc > 0 else TailModel()
    eps_kernel = LatticeKernel(model.n, a_inv.R, eps_vals, norm="l1", tail=tail)
    return QuadraticCovariance(a_inv, eps_kernel, a0, float(values.sum()), trunc)


@dataclass(frozen=True)
class QuadraticRhoReport:
    Gamma: float
    eps_sum_offcenter: float
    gamma_bound_applies: bool
    distance_profile: dict
    sublattice: object


def quadratic_rho_report(model: QuadraticModel, distances=(0, 1, 2, 4, 8)) -> QuadraticRhoReport:
    """Mixing report: off-center eps mass vs Gamma, distance and sublattice bounds."""
    cov = quadratic_covariance(model)
    k = cov.eps_kernel
    offs = k.offsets()
    vals = k.flat_values().copy()
    vals[np.all(offs == 0, axis=1)] = 0.0
    eps_sum = float(vals.sum()) + cov.truncation_mass / cov.a_inv_center
    if eps_sum > model.Gamma + 1e-9:
        raise ValidationError("quadratic_rho_report: eps mass exceeds Gamma")
    profile = {d: distance_bound(k, d) for d in distances}
    sub = sublattice_k(k) if vals.max() < 1 else None
    return QuadraticRhoReport(model.Gamma, eps_sum, model.Gamma < 1.0, profile, sub)


# ---------------------------------------------------------------------------
# Ising tori


@dataclass(frozen=True)
class IsingTorus:
    """Periodic Ising model; bonds are the multiset {(i, i+e_k)} over sites
    and axes (for L = 2 each pair along an axis is counted twice)."""

    n: int
    L: int
    T: float
    clamp_sites: tuple = ()
    clamp_values: tuple = ()

    def __post_init__(self):
        if self.n < 1 or self.L < 2:
            raise ValidationError("IsingTorus: need n >= 1 and L >= 2")
        if self.T <= 0:
            raise ValidationError("IsingTorus: temperature must be > 0")
        if len(self.clamp_sites) != len(self.clamp_values):
            raise ValidationError("IsingTorus: clamp sites/values mismatch")
        if any(v not in (-1, 1) for v in self.clamp_values):
            raise ValidationError("IsingTorus: clamp values must be +-1")

    @property
    def sites(self) -> list:
        return list(itertools.product(range(self.L), repeat=self.n))

    def bonds(self) -> list:
        out = []
        for s in self.sites:
            for k in range(self.n):
                t = list(s)
                t[k] = (t[k] + 1) % self.L
                out.append((s, tuple(t)))
        return out

    def min_image(self, z) -> tuple:
        return tuple((c + self.L // 2) % self.L - self.L // 2 for c in z)


def ising_exact(torus: IsingTorus) -> FiniteSystem:
    """Exact Gibbs law of a small torus as a FiniteSystem (state 0 is spin -1)."""
    sites = torus.sites
    if len(sites) > ISING_EXACT_SITE_CAP:
        raise CapExceededError(f"ising_exact: more than {ISING_EXACT_SITE_CAP} sites")
    nsite = len(sites)
    site_pos = {s: k for k, s in enumerate(sites)}
    bonds = [(site_pos[a], site_pos[b]) for a, b in torus.bonds()]
    states = np.array(list(itertools.product((-1, 1), repeat=nsite)), dtype=float)
    energy = np.zeros(len(states))
    for a, b in bonds:
        energy -= states[:, a] * states[:, b]
    logw = -energy / torus.T
    for site, val in zip(torus.clamp_sites, torus.clamp_values):
        logw = np.where(states[:, site_pos[tuple(site)]] == val, logw, -np.inf)
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    joint = w.reshape((2,) * nsite)
    names = tuple((f"s{'_'.join(map(str, s))}", 2) for s in sites)
    return FiniteSystem(names, joint)


@dataclass(frozen=True)
class IsingEpsilonReport:
    kernel: LatticeKernel
    c0: float
    k0: float
    method: str
    subjective: bool
    stderr: dict | None = None
    envelope_holds: bool | None = None  # eps(z) <= c0 C' e^{-psi' |z|}, if (C', psi') given

    def check_envelope(self, C_prime: float, psi_prime: float) -> "IsingEpsilonReport":
        """Re-issue the report with the user-supplied decay envelope checked."""
        offs = self.kernel.offsets()
        dist = self.kernel.norm_of(offs)
        vals = self.kernel.flat_values()
        nz = dist > 0
        ok = bool(np.all(vals[nz] <= self.c0 * C_prime * np.exp(-psi_prime * dist[nz]) + 1e-12))
        return IsingEpsilonReport(self.kernel, self.c0, self.k0, self.method,
                                  self.subjective, self.stderr, ok)


def ising_constants(n: int, T: float) -> tuple:
    """(c0, k0): the conditional-decorrelation constants of the torus model."""
    c0 = math.tanh(4.0 * n / T) + 1.0
    k0 = 1.0 - 4.0 / (math.exp(8.0 * n / T) + 2.0 * math.exp((4.0 * n + 2.0) / T) + 1.0)
    return c0, k0


def _displacement_classes(torus: IsingTorus) -> dict:
    """Representative site pairs, one per minimal-image displacement class."""
    sites = torus.sites
    origin = sites[0]
    classes = {}
    for s in sites[1:]:
        z = torus.min_image(s)
        key = max(z, tuple(-c for c in z))  # identify z and -z
        classes.setdefault(key, (origin, s))
    return classes


def ising_epsilon(torus: IsingTorus, method: str = "exact", seed: int = 0,
                  sweeps: int = 2000, thin: int = 4) -> IsingEpsilonReport:
    """Pairwise correlation kernel eps(z) of a torus, plus (c0, k0).

    exact path (<= 16 sites): enumerates the Gibbs law; on <= 10 sites the
    values are subjective suprema over clamped contexts, otherwise plain pair
    correlations.  mcmc path: heat-bath samples, thinned, pair tables, the
    two-state formula, and Wilson half-widths for the cell probabilities.
    """
    c0, k0 = ising_constants(torus.n, torus.T)
    nsite = torus.L**torus.n
    if method == "exact":
        sys = ising_exact(torus)
        subjective = nsite <= ISING_SUBJECTIVE_SITE_CAP
        values: dict = {}
        for key, (a, b) in _displacement_classes(torus).items():
            ia = torus.sites.index(a)
            ib = torus.sites.index(b)
            if subjective:
                v = discrete.subjective_maxcorr(sys, ia, ib)
            else:
                v = discrete.maxcorr_pair(sys.pair([ia], [ib])).rho
            values[key] = v
        kern = LatticeKernel.from_dict(torus.n, torus.L // 2, values, norm="l1")
        return IsingEpsilonReport(kern, c0, k0, "exact", subjective)
    if method != "mcmc":
        raise ValidationError("ising_epsilon: method must be 'exact' or 'mcmc'")
    samples = ising_mcmc_samples(torus, sweeps=sweeps, thin=thin, seed=seed)
    values = {}
    errs = {}
    nobs = samples.shape[0]
    zconf = 1.959963984540054  # 95% normal quantile for the Wilson interval
    origin = 0
    site_list = torus.sites
    for key, (a, b) in _displacement_classes(torus).items():
        ia = site_list.index(a)
        ib = site_list.index(b)
        sa = samples[:, ia]
        sb = samples[:, ib]
        cells = np.array(
            [
                [np.mean((sa < 0) & (sb < 0)), np.mean((sa < 0) & (sb > 0))],
                [np.mean((sa > 0) & (sb < 0)), np.mean((sa > 0) & (sb > 0))],
            ]
        )
        cells = cells / cells.sum()
        values[key] = discrete.maxcorr_pair(FinitePair.from_joint(cells)).rho
        phat = cells[1, 1]
        denom = 1.0 + zconf**2 / nobs
        half = zconf * math.sqrt(phat * (1 - phat) / nobs + zconf**2 / (4 * nobs**2)) / denom
        errs[key] = half
    kern = LatticeKernel.from_dict(torus.n, torus.L // 2, values, norm="l1")
    return IsingEpsilonReport(kern, c0, k0, "mcmc", False, errs)


def ising_mcmc_samples(torus: IsingTorus, sweeps: int, thin: int, seed: int,
                       burn: int = 200) -> np.ndarray:
    """Thinned heat-bath samples of the torus, shape (n_kept, n_sites)."""
    rng = np.random.default_rng(seed)
    sites = torus.sites
    nsite = len(sites)
    site_pos = {s: k for k, s in enumerate(sites)}
    neigh = np.zeros((nsite, 2 * torus.n), dtype=int)
    for k, s in enumerate(sites):
        t = 0
        for ax in range(torus.n):
            for d in (-1, 1):
                u = list(s)
                u[ax] = (u[ax] + d) % torus.L
                neigh[k, t] = site_pos[tuple(u)]
                t += 1
    clamp_pos = {site_pos[tuple(s)]: v for s, v in zip(torus.clamp_sites, torus.clamp_values)}
    state = rng.choice((-1, 1), size=nsite).astype(float)
    for k, v in clamp_pos.items():
        state[k] = v
    kept = []
    beta = 1.0 / torus.T
    for sweep in range(burn + sweeps):
        order = rng.permutation(nsite)
        us = rng.uniform(size=nsite)
        for t, k in enumerate(order):
            if k in clamp_pos:
                continue
            h = state[neigh[k]].sum()
            p_up = 1.0 / (1.0 + math.exp(-2.0 * beta * h))
            state[k] = 1.0 if us[t] < p_up else -1.0
        if sweep >= burn and (sweep - burn) % thin == 0:
            kept.append(state.copy())
    return np.array(kept)


def ising_transfer_correlation(T: float, L: int, d: int) -> float:
    """E[w_0 w_d] on the 1-d cycle: (th^d + th^{L-d}) / (1 + th^L), th = tanh(1/T)."""
    th = math.tanh(1.0 / T)
    return (th**d + th ** (L - d)) / (1.0 + th**L)


def sample_ising_ring(L: int, T: float, size: int, seed: int = 0) -> np.ndarray:
    """Exact samples of the 1-d cycle by conditional transfer sampling."""
    rng = np.random.default_rng(seed)
    th = math.tanh(1.0 / T)
    powers = th ** np.arange(L + 1)
    spins = np.empty((size, L))
    s0 = rng.choice((-1.0, 1.0), size=size)
    spins[:, 0] = s0
    cur = s0.copy()
    for i in range(L - 1):
        k = L - i - 1  # bonds remaining back to the anchor spin
        # P(next = s | cur, s0) ~ (1 + th * cur * s)(1 + th^k * s * s0)
        up = (1 + th * cur) * (1 + powers[k] * s0)
        dn = (1 - th * cur) * (1 - powers[k] * s0)
        p_up = up / (up + dn)
        cur = np.where(rng.uniform(size=size) < p_up, 1.0, -1.0)
        spins[:, i + 1] = cur
    return spins


# ---------------------------------------------------------------------------
# central limit experiment


@dataclass(frozen=True)
class CLTReport:
    block_sizes: tuple
    cf_distances: tuple
    sigma_hat2: float          # at the largest block size
    sigma_hat2_by_block: tuple
    sigma2_limit: float

    def __post_init__(self):
        if self.sigma_hat2 < 0:
            raise ValidationError("CLTReport: sigma_hat2 must be >= 0")


def _disk_offsets(n: int, ell: int) -> np.ndarray:
    rng = np.arange(-ell, ell + 1)
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = (pts**2).sum(axis=1) <= (ell / 2) ** 2
    return pts[keep]


def _cf_distance(values: np.ndarray, sigma2: float, lam_grid: np.ndarray) -> float:
    phi = np.exp(1j * np.outer(lam_grid, values)).mean(axis=1)
    target = np.exp(-sigma2 * lam_grid**2 / 2.0)
    return float(np.abs(phi - target).max())


def clt_experiment(model, ells, replicas: int, seed: int = 0, f=None,
                   shape: str = "cube", dim: int = 1) -> CLTReport:
    """Block sums F(l) = sum f(X_i) / sqrt(#block) against their Gaussian limit.

    model: IsingTorus with n = 1 (exact ring sampling), QuadraticModel with
    n = 1 (exact circulant Gaussian sampling), or the string "independent"
    (i.i.d. +-1 spins; ``dim`` and ``shape`` pick the block geometry — for
    the 1-d chain models cube and disk blocks coincide with consecutive
    runs).  The empirical characteristic function is compared to
    exp(-sigma_hat^2 lam^2 / 2) on lam in [-3, 3].
    """
    if shape not in ("cube", "disk"):
        raise ValidationError("clt_experiment: shape must be 'cube' or 'disk'")
    rng = np.random.default_rng(seed)
    lam_grid = np.linspace(-3.0, 3.0, 61)
    ells = tuple(int(l) for l in ells)
    dists = []
    sig2s = []
    if f is None:
        f = lambda x: x
    for ell in ells:
        if isinstance(model, IsingTorus):
            if model.n != 1:
                raise ValidationError("clt_experiment: only 1-d Ising tori are supported")
            Lbig = ell + 64  # buffer makes the window indistinguishable from the infinite chain
            spins = sample_ising_ring(Lbig, model.T, replicas, seed=int(rng.integers(2**63)))
            block = f(spins[:, :ell]).sum(axis=1) / math.sqrt(ell)
        elif isinstance(model, QuadraticModel):
            if model.n != 1:
                raise ValidationError("clt_experiment: only 1-d quadratic models are supported")
            Lbig = max(4 * ell, 4 * (model.gamma.R + 1))
            cov_kernel = quadratic_covariance(model).a_inv
            # periodized covariance: circulant embedding of a_inv / beta
            col = np.zeros(Lbig)
            for z in range(-cov_kernel.R, cov_kernel.R + 1):
                col[z % Lbig] += cov_kernel.value_at((z,)) / model.beta
            lam_eig = np.fft.fft(col).real
            lam_eig = np.maximum(lam_eig, 0.0)
            noise = rng.standard_normal((replicas, Lbig)) + 0j
            field = np.fft.ifft(np.fft.fft(noise, axis=1) * np.sqrt(lam_eig), axis=1).real
            block = f(field[:, :ell]).sum(axis=1) / math.sqrt(ell)
        elif model == "independent":
            count = len(_disk_offsets(dim, ell)) if shape == "disk" else ell**dim
            spins = rng.choice((-1.0, 1.0), size=(replicas, count))
            block = f(spins).sum(axis=1) / math.sqrt(count)
        else:
            raise ValidationError("clt_experiment: unsupported model")
        s2 = float(block.var())
        sig2s.append(s2)
        dists.append(_cf_distance(block, s2, lam_grid))
    if isinstance(model, IsingTorus):
        th = math.tanh(1.0 / model.T)
        sigma2_limit = (1.0 + th) / (1.0 - th)
    elif isinstance(model, QuadraticModel):
        sigma2_limit = 1.0 / model.beta  # sum_z a_inv(z) = 1
    else:
        sigma2_limit = 1.0
    return CLTReport(ells, tuple(dists), sig2s[-1], tuple(sig2s), sigma2_limit)


# ---------------------------------------------------------------------------
# product-of-phases bound


@dataclass(frozen=True)
class PhaseBoundReport:
    lhs: float
    rhs: float
    eps_bar: float
    phi: complex
    n_blocks: int


def phase_product_bound(sys: FiniteSystem, blocks, lam: float, g=None) -> PhaseBoundReport:
    """|E[prod_i e^{i lam G_i}] - phi^N| against N eps_bar (1+eps_bar) (1-|phi|^2).

    blocks: list of variable-name lists with identical marginal distributions
    (checked); G_i defaults to the sum of the block coordinates; eps_bar is
    the max row sum of the measured pairwise subjective block correlations.
    """
    blocks = [list(b) for b in blocks]
    if len(blocks) < 2:
        raise ValidationError("phase_product_bound: need at least two blocks")
    if g is None:
        g = lambda values: float(sum(values))
    margs = [sys.marginal(b) for b in blocks]
    for mm in margs[1:]:
        if mm.shape != margs[0].shape or np.abs(mm - margs[0]).max() > 1e-9:
            raise ValidationError("phase_product_bound: blocks are not identically distributed")
    # flatten each block into a single super-variable
    order = [v for b in blocks for v in b]
    marg = sys.marginal(order)
    shape = []
    for b in blocks:
        size = int(np.prod([sys.variables[sys.index(v)][1] for v in b]))
        shape.append(size)
    joint = marg.reshape(shape)
    super_sys = FiniteSystem(tuple((f"B{k}", s) for k, s in enumerate(shape)), joint)
    nb = len(blocks)
    eps = np.zeros((nb, nb))
    for i in range(nb):
        for j in range(i + 1, nb):
            eps[i, j] = eps[j, i] = discrete.subjective_maxcorr(super_sys, i, j)
    eps_bar = float(eps.sum(axis=1).max())
    # block phase values
    states = [list(itertools.product(*[range(sys.variables[sys.index(v)][1]) for v in b])) for b in blocks]
    phase_tables = [np.exp(1j * lam * np.array([g(s) for s in st])) for st in states]
    phi = complex(phase_tables[0] @ margs[0].ravel())
    acc = joint.astype(complex)
    for k in range(nb):
        shape_k = [1] * nb
        shape_k[k] = -1
        acc = acc * phase_tables[k].reshape(shape_k)
    lhs = abs(complex(acc.sum()) - phi**nb)
    rhs = nb * eps_bar * (1.0 + eps_bar) * (1.0 - abs(phi) ** 2)
    if lhs > rhs + 1e-9:
        raise ValidationError("phase_product_bound: bound violated beyond tolerance")
    return PhaseBoundReport(float(lhs), float(rhs), eps_bar, phi, nb)
