"""Spectral-gap lower bounds for single-site heat-bath dynamics.

The Dirichlet form is E(f,f) = sum_i E[Var(f | all other sites)] and the gap
is the smallest nonzero eigenvalue of the associated positive-semidefinite
operator on mean-zero functions in L2(Pr).  From a matrix of pairwise
subjective correlation bounds eps_ij < 1 the dynamics has gap at least
||M||^-2 with M = (unit upper triangular with -eps~ entries)^-1 diag(1~),
and the weaker forms ||(I - eps)^-1||^-2 and (1 - ||eps||)_+^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrete import FiniteSystem
from .errors import CapExceededError, ValidationError
from .tensor_bounds import LatticeKernel, _class_sums, SUBLATTICE_SEARCH_CAP

EXACT_GAP_STATE_CAP = 1 << 12


@dataclass(frozen=True)
class GapBoundReport:
    M_matrix: np.ndarray
    Mprime_matrix: np.ndarray | None
    bound_M: float
    bound_Mprime: float | None
    bound_simple: float
    eps_opnorm: float
    eps_spectral_radius: float
    mprime_defined: bool


def _check_eps_matrix(eps) -> np.ndarray:
    from .tensor_bounds import EpsilonMatrix

    if isinstance(eps, EpsilonMatrix):
        eps = eps.entries
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 2 or eps.shape[0] != eps.shape[1]:
        raise ValidationError("gap_lower_bounds: eps must be a square matrix")
    if np.abs(eps - eps.T).max() > 1e-12:
        raise ValidationError("gap_lower_bounds: eps must be symmetric")
    eps = 0.5 * (eps + eps.T)
    np.fill_diagonal(eps, 0.0)
    if eps.size and (eps.min() < 0 or eps.max() > 1):
        raise ValidationError("gap_lower_bounds: eps entries must lie in [0, 1]")
    return eps


def gap_lower_bounds(eps, symmetric: bool = True) -> GapBoundReport:
    """Three nested spectral-gap lower bounds from pairwise correlation bounds."""
    if not symmetric:
        raise ValidationError("gap_lower_bounds: only the symmetric form is defined")
    e = _check_eps_matrix(eps)
    n = e.shape[0]
    off = e[~np.eye(n, dtype=bool)]
    if off.size and off.max() >= 1.0:
        raise ValidationError("gap_lower_bounds: M is undefined when some eps_ij = 1")
    # ones~_i = 1 / prod_{j > i} (1 - eps_ij^2); eps~_ij = eps_ij / prod_{i<j'<=j} (1 - eps_ij'^2)
    ones_t = np.ones(n)
    eps_t = np.zeros((n, n))
    for i in range(n):
        prod = 1.0
        for j in range(i + 1, n):
            prod *= 1.0 - e[i, j] ** 2
            eps_t[i, j] = e[i, j] / prod
        ones_t[i] = 1.0 / prod
    U = np.eye(n) - eps_t  # unit upper triangular with -eps~ above the diagonal
    M = np.linalg.solve(U, np.diag(ones_t))
    norm_M = float(np.linalg.svd(M, compute_uv=False)[0]) if n else 0.0
    bound_M = norm_M**-2 if norm_M > 0 else 1.0
    opnorm = float(np.linalg.svd(e, compute_uv=False)[0]) if n else 0.0
    rho = float(np.max(np.abs(np.linalg.eigvals(e)))) if n else 0.0
    bound_simple = max(0.0, 1.0 - opnorm) ** 2
    if rho < 1.0:
        Mp = np.linalg.inv(np.eye(n) - e)
        norm_Mp = float(np.linalg.svd(Mp, compute_uv=False)[0])
        bound_Mp = norm_Mp**-2
        defined = True
    else:
        Mp, bound_Mp, defined = None, None, False
    return GapBoundReport(M, Mp, float(bound_M), bound_Mp, float(bound_simple), opnorm, rho, defined)


# ---------------------------------------------------------------------------
# exact gap by eigendecomposition


def _site_projections(sys: FiniteSystem):
    """Yield (site, context grouping) for the heat-bath projections."""
    sizes = [s for _, s in sys.variables]
    total = int(np.prod(sizes))
    idx = np.arange(total)
    digits = np.array(np.unravel_index(idx, sizes))
    for i in range(len(sizes)):
        other = [d for t, d in enumerate(digits) if t != i]
        if other:
            other_sizes = [s for t, s in enumerate(sizes) if t != i]
            ctx = np.ravel_multi_index(other, other_sizes)
        else:
            ctx = np.zeros(total, dtype=int)
        yield i, ctx


def exact_gap(sys: FiniteSystem, return_vector: bool = False):
    """Smallest nonzero eigenvalue of the heat-bath Dirichlet operator.

    Assembled on the support of the law; conditional laws of zero-probability
    contexts carry no stationary mass and are skipped.
    """
    sizes = [s for _, s in sys.variables]
    total = int(np.prod(sizes))
    if total > EXACT_GAP_STATE_CAP:
        raise CapExceededError(f"exact_gap: state count above cap {EXACT_GAP_STATE_CAP}")
    p = sys.joint.ravel()
    support = np.flatnonzero(p > 0)
    ns = support.size
    pos = -np.ones(total, dtype=int)
    pos[support] = np.arange(ns)
    sqrtp = np.sqrt(p[support])
    nsites = len(sizes)
    B = nsites * np.eye(ns)
    for _, ctx in _site_projections(sys):
        order = np.argsort(ctx[support], kind="stable")
        grouped = support[order]
        keys = ctx[grouped]
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        ends = np.r_[starts[1:], keys.size]
        for a, b in zip(starts, ends):
            members = grouped[a:b]
            mpos = pos[members]
            w = sqrtp[mpos]
            mass = float((w**2).sum())
            B[np.ix_(mpos, mpos)] -= np.outer(w, w) / mass
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    tol = 1e-10 * max(1.0, float(evals.max()))
    nz = np.flatnonzero(evals > tol)
    if nz.size == 0:
        raise ValidationError("exact_gap: dynamics has no nonzero mode")
    gap = float(evals[nz[0]])
    if not return_vector:
        return gap
    f_support = evecs[:, nz[0]] / sqrtp  # back to unweighted coordinates
    f = np.zeros(total)
    f[support] = f_support
    return gap, f.reshape(sizes)


def generator_matrix(sys: FiniteSystem) -> tuple:
    """(L, p): dense generator on the support states and their stationary law.

    Row x has rate P(X_i = s | rest) toward each single-site update of x;
    rows sum to zero and p^T L = 0 (reversibility of the heat bath).
    """
    sizes = [s for _, s in sys.variables]
    total = int(np.prod(sizes))
    if total > EXACT_GAP_STATE_CAP:
        raise CapExceededError(f"generator_matrix: state count above cap {EXACT_GAP_STATE_CAP}")
    p = sys.joint.ravel()
    support = np.flatnonzero(p > 0)
    ns = support.size
    pos = -np.ones(total, dtype=int)
    pos[support] = np.arange(ns)
    L = np.zeros((ns, ns))
    for _, ctx in _site_projections(sys):
        order = np.argsort(ctx[support], kind="stable")
        grouped = support[order]
        keys = ctx[grouped]
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        ends = np.r_[starts[1:], keys.size]
        for a, b in zip(starts, ends):
            members = grouped[a:b]
            mpos = pos[members]
            cond = p[members] / p[members].sum()
            L[np.ix_(mpos, mpos)] += np.tile(cond, (len(members), 1))
            L[mpos, mpos] -= 1.0
    return L, p[support]


# ---------------------------------------------------------------------------
# trajectory simulation (continuous-time heat bath)


@dataclass(frozen=True)
class SimResult:
    times: np.ndarray
    sites: np.ndarray
    new_states: np.ndarray
    rate_estimate: float
    relaxation_time: float
    lags: np.ndarray
    autocorr: np.ndarray


def _autocorrelation(samples: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation c(k), k < max_lag, via FFT."""
    x = samples - samples.mean()
    n = x.size
    var = float(x @ x) / n
    if var <= 0:
        return np.zeros(max_lag)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(f * np.conj(f), nfft)[:max_lag]
    counts = n - np.arange(max_lag)
    return acf / (counts * var)


def _fit_rate(samples: np.ndarray, dt: float) -> tuple:
    """Exponential-decay rate of the sample autocorrelation.

    Least squares on log c(tau) over the window [0.1, 3] estimated relaxation
    times, which avoids both the transient and the noise floor.
    """
    n = samples.size
    max_lag = min(n // 4, 8000)
    if max_lag < 4:
        return 0.0, math.inf
    c = _autocorrelation(samples, max_lag)
    below = np.flatnonzero(c < math.exp(-1.0))
    tau_rel = (below[0] if below.size else max_lag) * dt
    if tau_rel <= 0:
        tau_rel = dt
    lo = max(1, int(round(0.1 * tau_rel / dt)))
    hi = min(max_lag - 1, max(lo + 2, int(round(3.0 * tau_rel / dt))))
    ks = np.arange(lo, hi + 1)
    good = c[ks] > 0.02
    if good.sum() < 2:
        good = c[ks] > 0
    ks = ks[good]
    if ks.size < 2:
        return 0.0, tau_rel
    y = np.log(c[ks])
    t = ks * dt
    slope = float(np.polyfit(t, y, 1)[0])
    return -slope, tau_rel


def glauber_simulate(
    sys: FiniteSystem,
    horizon: float,
    seed: int = 0,
    observable=None,
    sample_dt: float | None = None,
    keep_events: bool = True,
) -> SimResult:
    """Exact-in-law continuous-time heat-bath trajectory of a finite system.

    Site clocks ring at total rate N; the ringing site is resampled from its
    conditional law given the rest (possibly landing on the same state).  The
    trajectory is deterministic per seed.  ``observable`` maps a state tuple
    to a float (default: value of the first coordinate, centered).
    """
    if horizon <= 0:
        raise ValidationError("glauber_simulate: horizon must be > 0")
    sizes = [s for _, s in sys.variables]
    nsites = len(sizes)
    rng = np.random.default_rng(seed)
    joint = sys.joint
    # initial state from the stationary law
    flat = joint.ravel()
    state = list(np.unravel_index(rng.choice(flat.size, p=flat / flat.sum()), sizes))
    if observable is None:
        observable = lambda s: float(s[0])
    if sample_dt is None:
        sample_dt = 0.25 / nsites
    n_samples = int(horizon / sample_dt) + 1
    samples = np.empty(n_samples)
    times, sites, news = [], [], []
    t = 0.0
    next_sample = 0
    rate_total = float(nsites)
    while next_sample < n_samples:
        obs = observable(tuple(state))
        t_next = t + rng.exponential(1.0 / rate_total)
        while next_sample < n_samples and next_sample * sample_dt < t_next:
            samples[next_sample] = obs
            next_sample += 1
        if next_sample >= n_samples:
            break
        t = t_next
        i = int(rng.integers(nsites))
        sl = tuple(state[:i]) + (slice(None),) + tuple(state[i + 1 :])
        cond = joint[sl]
        mass = cond.sum()
        if mass <= 0:
            continue  # zero-probability context: no move
        state[i] = int(rng.choice(sizes[i], p=cond / mass))
        if keep_events:
            times.append(t)
            sites.append(i)
            news.append(state[i])
    rate, tau = _fit_rate(samples, sample_dt)
    nlag = max(min(len(samples) // 4, 400), 1)
    lags = np.arange(nlag) * sample_dt
    auto = _autocorrelation(samples, nlag)
    return SimResult(
        np.array(times), np.array(sites, dtype=int), np.array(news, dtype=int),
        float(rate), float(tau), lags, auto,
    )


def glauber_simulate_ising(torus, horizon: float, seed: int = 0, observable=None,
                           sample_dt: float | None = None, burn_sweeps: int = 200) -> SimResult:
    """Continuous-time heat-bath trajectory of an Ising torus of any size.

    Site clocks ring at total rate N; the ringing spin is resampled from the
    heat-bath conditional given its neighbours.  The initial state is a
    burned-in configuration; ``observable`` maps the +-1 spin vector to a
    float (default: magnetization / sqrt(N)).
    """
    from .lattice import ising_mcmc_samples

    if horizon <= 0:
        raise ValidationError("glauber_simulate_ising: horizon must be > 0")
    rng = np.random.default_rng(seed)
    state = ising_mcmc_samples(torus, sweeps=1, thin=1, seed=seed, burn=burn_sweeps)[-1]
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
    if observable is None:
        observable = lambda spins: float(spins.sum()) / math.sqrt(nsite)
    if sample_dt is None:
        sample_dt = 0.25
    n_samples = int(horizon / sample_dt) + 1
    samples = np.empty(n_samples)
    beta = 1.0 / torus.T
    t = 0.0
    next_sample = 0
    while next_sample < n_samples:
        obs = observable(state)
        t_next = t + rng.exponential(1.0 / nsite)
        while next_sample < n_samples and next_sample * sample_dt < t_next:
            samples[next_sample] = obs
            next_sample += 1
        if next_sample >= n_samples:
            break
        t = t_next
        k = int(rng.integers(nsite))
        h = state[neigh[k]].sum()
        p_up = 1.0 / (1.0 + math.exp(-2.0 * beta * h))
        state[k] = 1.0 if rng.uniform() < p_up else -1.0
    rate, tau = _fit_rate(samples, sample_dt)
    nlag = max(min(len(samples) // 4, 400), 1)
    return SimResult(
        np.empty(0), np.empty(0, dtype=int), np.empty(0, dtype=int),
        float(rate), float(tau), np.arange(nlag) * sample_dt,
        _autocorrelation(samples, nlag),
    )


def glauber_replicas(sys: FiniteSystem, horizon: float, seed: int, replicas: int,
                     observable=None, threads: int | None = None) -> list:
    """Independent simulator replicas; per-replica seeds come from spawning
    numpy's SeedSequence(seed), so results are reproducible and order-free."""
    child_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(replicas)]

    def one(k):
        return glauber_simulate(sys, horizon, seed=child_seeds[k], observable=observable,
                                keep_events=False)

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(replicas)))
    return [one(k) for k in range(replicas)]


# ---------------------------------------------------------------------------
# sublattice route for translation-invariant kernels


@dataclass(frozen=True)
class SublatticeGap:
    value: float
    ell: int
    zeta: float
    norm_M: float


def sublattice_gap(kernel: LatticeKernel) -> SublatticeGap:
    """Positive gap bound ||M||^-2 (1 - zeta)^2 via sublattice block dynamics.

    Picks the smallest spacing ell whose congruence-class sums are all < 1;
    zeta is the class sum of the zero class (the ell Z^n tail of the kernel)
    and M is the triangular-inverse matrix of the block system.
    """
    offs = kernel.offsets()
    nonzero = ~np.all(offs == 0, axis=1)
    vals = kernel.flat_values()
    if vals[nonzero].size and vals[nonzero].max() >= 1.0:
        raise ValidationError("sublattice_gap: requires eps(z) < 1 for z != 0")
    for ell in range(1, SUBLATTICE_SEARCH_CAP + 1):
        sums = _class_sums(kernel, ell)
        if sums.max() < 1.0:
            zeta = float(sums[(0,) * kernel.n])
            n_cls = sums.size
            shape = (ell,) * kernel.n
            eps_block = np.zeros((n_cls, n_cls))
            for u in range(n_cls):
                zu = np.array(np.unravel_index(u, shape))
                for v in range(n_cls):
                    if u == v:
                        continue
                    zv = np.array(np.unravel_index(v, shape))
                    eps_block[u, v] = sums[tuple((zv - zu) % ell)]
            report = gap_lower_bounds(eps_block)
            value = report.bound_M * (1.0 - zeta) ** 2
            return SublatticeGap(float(value), ell, zeta, float(report.bound_M ** -0.5))
    raise ValidationError(f"sublattice_gap: no spacing ell <= {SUBLATTICE_SEARCH_CAP} works")
