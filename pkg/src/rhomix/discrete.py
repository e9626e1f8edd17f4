"""Exact maximal-correlation and mixing-coefficient computations on finite systems.

Everything here is brute force on explicit probability tables; these routines
are the trusted oracles against which every tensorization and event bound in
the rest of the package is checked.

The maximal correlation of a finite pair is the largest singular value of the
matrix Pi with entries (p_ab - p_a p^b) / sqrt(p_a p^b), built over the states
of positive marginal probability.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, NonErgodicChainError, ValidationError

PROB_TOL = 1e-12
STATE_CAP = 1 << 20
EVENT_SCAN_CAP = 20
POOL_CAP = 12


def _check_prob_table(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{what}: empty probability table")
    if arr.min() < -1e-15:
        raise ValidationError(f"{what}: negative entry {arr.min()!r} (entries must be >= 0)")
    arr = np.where(arr < 0, 0.0, arr)
    total = arr.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise ValidationError(f"{what}: entries sum to {total!r}, not 1 within {PROB_TOL}")
    return arr


@dataclass(frozen=True)
class FinitePair:
    """Joint probability table of a pair of finite-alphabet variables."""

    labels_x: tuple
    labels_y: tuple
    joint: np.ndarray

    def __post_init__(self):
        joint = _check_prob_table(self.joint, "FinitePair.joint")
        if joint.ndim != 2:
            raise ValidationError("FinitePair.joint must be a 2-d table")
        if joint.shape != (len(self.labels_x), len(self.labels_y)):
            raise ValidationError("FinitePair: label counts do not match the joint shape")
        object.__setattr__(self, "labels_x", tuple(self.labels_x))
        object.__setattr__(self, "labels_y", tuple(self.labels_y))
        object.__setattr__(self, "joint", joint)

    @property
    def marginal_x(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def marginal_y(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    @staticmethod
    def from_joint(joint, labels_x=None, labels_y=None) -> "FinitePair":
        joint = np.asarray(joint, dtype=float)
        lx = tuple(labels_x) if labels_x is not None else tuple(range(joint.shape[0]))
        ly = tuple(labels_y) if labels_y is not None else tuple(range(joint.shape[1]))
        return FinitePair(lx, ly, joint)


@dataclass(frozen=True)
class FiniteSystem:
    """Dense joint table over a product of named finite alphabets."""

    variables: tuple  # tuple of (name, size)
    joint: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for _, s in self.variables)
        if any(s < 1 for s in sizes):
            raise ValidationError("FiniteSystem: alphabet sizes must be >= 1")
        if int(np.prod(sizes, dtype=np.int64)) > STATE_CAP:
            raise CapExceededError(f"FiniteSystem: product space larger than cap {STATE_CAP}")
        joint = _check_prob_table(self.joint, "FiniteSystem.joint")
        if joint.shape != sizes:
            raise ValidationError("FiniteSystem: joint shape does not match variable sizes")
        object.__setattr__(self, "variables", tuple((str(n), int(s)) for n, s in self.variables))
        object.__setattr__(self, "joint", joint)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.variables)

    def index(self, var) -> int:
        if isinstance(var, (int, np.integer)):
            return int(var)
        try:
            return self.names.index(var)
        except ValueError:
            raise ValidationError(f"FiniteSystem: unknown variable {var!r}") from None

    def indices(self, vars) -> list:
        return [self.index(v) for v in vars]

    def marginal(self, vars) -> np.ndarray:
        """Marginal table with axes ordered as in ``vars``."""
        keep = self.indices(vars)
        drop = tuple(i for i in range(len(self.variables)) if i not in keep)
        marg = self.joint.sum(axis=drop) if drop else self.joint
        kept_order = [i for i in range(len(self.variables)) if i in keep]
        perm = [kept_order.index(i) for i in keep]
        return np.transpose(marg, perm)

    def pair(self, block_x, block_y) -> FinitePair:
        """Flatten two disjoint variable blocks into a FinitePair."""
        bx = self.indices(block_x if isinstance(block_x, (list, tuple)) else [block_x])
        by = self.indices(block_y if isinstance(block_y, (list, tuple)) else [block_y])
        if set(bx) & set(by):
            raise ValidationError("blocks overlap: I and J must be disjoint")
        if not bx or not by:
            raise ValidationError("blocks must be nonempty")
        marg = self.marginal(bx + by)
        nx = int(np.prod([self.variables[i][1] for i in bx]))
        ny = int(np.prod([self.variables[i][1] for i in by]))
        labels_x = list(itertools.product(*[range(self.variables[i][1]) for i in bx]))
        labels_y = list(itertools.product(*[range(self.variables[i][1]) for i in by]))
        return FinitePair(tuple(labels_x), tuple(labels_y), marg.reshape(nx, ny))


@dataclass(frozen=True)
class PairCorrelationReport:
    """Maximal correlation of a pair plus the witnesses achieving it."""

    rho: float
    pi_matrix: np.ndarray
    optimal_f: np.ndarray
    optimal_g: np.ndarray


def maxcorr_pair(pair: FinitePair) -> PairCorrelationReport:
    """Maximal correlation and optimal witness functions of a finite pair.

    States with zero marginal probability carry no L2 mass and are dropped
    before building Pi; the returned Pi and witnesses are zero there.  When
    either trimmed alphabet is a single state the supremum is empty and rho
    is 0 by convention.
    """
    joint = pair.joint
    px, py = pair.marginal_x, pair.marginal_y
    ix = np.flatnonzero(px > 0)
    iy = np.flatnonzero(py > 0)
    n, m = len(pair.labels_x), len(pair.labels_y)
    pi_full = np.zeros((n, m))
    f_full = np.zeros(n)
    g_full = np.zeros(m)
    if len(ix) < 2 or len(iy) < 2:
        return PairCorrelationReport(0.0, pi_full, f_full, g_full)
    a = px[ix]
    b = py[iy]
    core = joint[np.ix_(ix, iy)]
    outer = np.outer(a, b)
    pi = (core - outer) / np.sqrt(outer)
    u, s, vt = np.linalg.svd(pi)
    rho = float(min(s[0], 1.0))
    f = u[:, 0] / np.sqrt(a)
    g = vt[0] / np.sqrt(b)
    # deterministic witness sign: first nonzero coordinate of f positive
    nz = np.flatnonzero(np.abs(f) > 1e-14)
    if nz.size and f[nz[0]] < 0:
        f, g = -f, -g
    pi_full[np.ix_(ix, iy)] = pi
    f_full[ix] = f
    g_full[iy] = g
    return PairCorrelationReport(rho, pi_full, f_full, g_full)


def _maxcorr_of_table(table: np.ndarray) -> float:
    return maxcorr_pair(FinitePair.from_joint(table)).rho


def _batch_maxcorr(tables: np.ndarray) -> float:
    """Max of maximal correlations over a stack of (unnormalized) tables."""
    mass = tables.sum(axis=(1, 2))
    keep = mass > 0
    if not keep.any():
        return 0.0
    t = tables[keep] / mass[keep, None, None]
    px = t.sum(axis=2)
    py = t.sum(axis=1)
    if (px > 0).all() and (py > 0).all():
        outer = px[:, :, None] * py[:, None, :]
        pi = (t - outer) / np.sqrt(outer)
        s = np.linalg.svd(pi, compute_uv=False)
        return float(min(s[:, 0].max(), 1.0))
    return max(_maxcorr_of_table(tt) for tt in t)


def maxcorr_blocks(sys: FiniteSystem, block_x, block_y) -> float:
    """Maximal correlation between two disjoint blocks of variables."""
    return maxcorr_pair(sys.pair(block_x, block_y)).rho


def _conditioning_tables(sys: FiniteSystem, i: int, j: int, subset: list) -> np.ndarray:
    """Stack of joint (X_i, X_j) tables, one per assignment of ``subset``."""
    marg = sys.marginal(list(subset) + [i, j])
    ni = sys.variables[i][1]
    nj = sys.variables[j][1]
    return marg.reshape(-1, ni, nj)


def subjective_maxcorr(sys: FiniteSystem, i, j, conditioning_pool=None) -> float:
    """Supremum of conditional maximal correlations over the pool's metalgebra.

    The supremum runs over every subset K of the pool (the empty subset, i.e.
    the unconditioned correlation, included) and every assignment of values to
    K with positive probability.  Zero-probability conditionings are skipped.
    """
    i = sys.index(i)
    j = sys.index(j)
    if i == j:
        raise ValidationError("subjective_maxcorr: i and j must differ")
    pool = [k for k in range(len(sys.variables)) if k not in (i, j)] \
        if conditioning_pool is None else sys.indices(conditioning_pool)
    if i in pool or j in pool:
        raise ValidationError("subjective_maxcorr: i, j must not be in the conditioning pool")
    if len(pool) > POOL_CAP:
        raise CapExceededError(f"subjective_maxcorr: pool larger than cap {POOL_CAP}")
    best = 0.0
    for r in range(len(pool) + 1):
        for subset in itertools.combinations(pool, r):
            best = max(best, _batch_maxcorr(_conditioning_tables(sys, i, j, list(subset))))
            if best >= 1.0 - 1e-15:
                return min(best, 1.0)
    return best


def conditional_maxcorr(sys: FiniteSystem, i, j, conditioning) -> float:
    """Sup over values v of maxcorr(X_i, X_j) under P[. | X_K = v], K fixed.

    Unlike subjective_maxcorr this does NOT include the unconditioned pair,
    so it can be smaller than the plain maximal correlation.
    """
    i = sys.index(i)
    j = sys.index(j)
    subset = sys.indices(conditioning)
    if i in subset or j in subset:
        raise ValidationError("conditional_maxcorr: i, j must not be conditioned on")
    return _batch_maxcorr(_conditioning_tables(sys, i, j, subset))


# ---------------------------------------------------------------------------
# event scans


def _masks(n: int) -> np.ndarray:
    """(2^n, n) 0/1 matrix; row k is the binary expansion of k."""
    ks = np.arange(1 << n, dtype=np.uint32)
    return ((ks[:, None] >> np.arange(n)) & 1).astype(float)


@dataclass(frozen=True)
class EventExtremes:
    max_ratio: float
    witness_a: tuple
    witness_b: tuple


def event_extremes(pair: FinitePair) -> EventExtremes:
    """Exhaustive scan of |P[A∩B] - P[A]P[B]| / sqrt(P[A]P[Ā]P[B]P[B̄]).

    The maximum runs over nontrivial events A, B; the witness is the first
    maximizer in mask order (deterministic).  Alphabets are capped at
    EVENT_SCAN_CAP states per side.
    """
    n, m = pair.joint.shape
    if n > EVENT_SCAN_CAP or m > EVENT_SCAN_CAP:
        raise CapExceededError(f"event_extremes: alphabet above scan cap {EVENT_SCAN_CAP}")
    joint = pair.joint / pair.joint.sum()
    px, py = joint.sum(axis=1), joint.sum(axis=0)
    vb = _masks(m)
    qb = vb @ py
    wb = qb * (1 - qb)
    # nontrivial events only: both the event and its complement must contain
    # a state of positive probability (anything else is a roundoff artifact)
    pos_y = (py > 0).astype(float)
    hit_y = vb @ pos_y
    valid_b = (hit_y > 0) & (hit_y < pos_y.sum())
    best = -1.0
    best_ab = (0, 0)
    chunk = max(1, (1 << 22) // (1 << m))
    ua_all = _masks(n)
    pa_all = ua_all @ px
    pos_x = (px > 0).astype(float)
    hit_x_all = ua_all @ pos_x
    valid_a_all = (hit_x_all > 0) & (hit_x_all < pos_x.sum())
    inner = joint @ vb.T  # (n, 2^m)
    for lo in range(0, 1 << n, chunk):
        hi = min(lo + chunk, 1 << n)
        ua = ua_all[lo:hi]
        pa = pa_all[lo:hi]
        pab = ua @ inner
        num = np.abs(pab - np.outer(pa, qb))
        den = np.sqrt(np.maximum(np.outer(pa * (1 - pa), wb), 0.0))
        valid = np.outer(valid_a_all[lo:hi], valid_b) & (den > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(valid, num / den, -np.inf)
        k = int(np.argmax(ratio))
        v = float(ratio.flat[k])
        if v > best:
            best = v
            best_ab = (lo + k // (1 << m), k % (1 << m))
    if best < 0:
        return EventExtremes(0.0, (), ())
    wa = tuple(pair.labels_x[t] for t in range(n) if (best_ab[0] >> t) & 1)
    wbl = tuple(pair.labels_y[t] for t in range(m) if (best_ab[1] >> t) & 1)
    return EventExtremes(float(best), wa, wbl)


@dataclass(frozen=True)
class MixingReport:
    alpha: float
    beta: float
    mutual_information: float


def mixing_coefficients(pair: FinitePair) -> MixingReport:
    """alpha (exact event scan), beta = total variation / 2, and mutual information."""
    joint = pair.joint
    px, py = pair.marginal_x, pair.marginal_y
    dev = joint - np.outer(px, py)
    beta = 0.5 * float(np.abs(dev).sum())
    pos = joint > 0
    denom = np.outer(px, py)
    mi = float(np.sum(joint[pos] * np.log(joint[pos] / denom[pos])))
    # alpha: for a fixed event A the optimal B collects the atoms where the
    # signed deviation is positive, so only the A side needs enumeration.
    n = joint.shape[0]
    if n > EVENT_SCAN_CAP:
        raise CapExceededError(f"mixing_coefficients: alphabet above scan cap {EVENT_SCAN_CAP}")
    alpha = 0.0
    ua = _masks(n)[1 : max(1, 1 << (n - 1))]  # one of each complement pair, nonempty
    if len(ua):
        nu = ua @ dev  # (masks, m) signed deviation measures
        alpha = float(np.max(np.where(nu > 0, nu, 0.0).sum(axis=1)))
    return MixingReport(alpha, beta, max(mi, 0.0))


def density_bound(pair: FinitePair) -> float:
    """L2 bound sqrt(sum (h-1)^2 dP_X dP_Y) with h the joint density.

    Equals the Frobenius norm of Pi, hence always dominates the maximal
    correlation (asserted).  Requires strictly positive marginals.
    """
    px, py = pair.marginal_x, pair.marginal_y
    if px.min() <= 0 or py.min() <= 0:
        raise ValidationError("density_bound: marginals must be strictly positive")
    outer = np.outer(px, py)
    h = pair.joint / outer
    value = float(np.sqrt(np.sum((h - 1.0) ** 2 * outer)))
    rho = maxcorr_pair(pair).rho
    if rho > value + 1e-12:
        raise ValidationError("density_bound: internal check maxcorr <= bound failed")
    return value


# ---------------------------------------------------------------------------
# Markov chains


@dataclass(frozen=True)
class MarkovChainReport:
    stationary: np.ndarray
    reversible: bool
    rho_step: float
    rho_k: np.ndarray          # {X_0 : X_t} for t = 1..steps
    product_bound: np.ndarray  # rho_step ** t
    transposed_input: bool


def _stationary_power_iteration(P: np.ndarray) -> np.ndarray:
    # iterate the lazy chain (P+I)/2: same stationary law, geometric
    # convergence whenever that law is unique (periodic chains included)
    n = P.shape[0]
    x = np.full(n, 1.0 / n)
    for _ in range(500_000):
        nxt = 0.5 * (x @ P + x)
        if np.abs(nxt - x).max() < 1e-16:
            x = nxt
            break
        x = nxt
    x = np.maximum(x, 0)
    return x / x.sum()


def markov_chain_checks(P, steps: int = 10) -> MarkovChainReport:
    """Stationary-chain correlations {X_0:X_t} and the contraction bound.

    ``P`` is row-stochastic; a column-stochastic matrix is detected and
    transposed.  For reversible chains the exact power law
    {X_0:X_k} = {X_0:X_1}^k is asserted to 1e-9.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("markov_chain_checks: P must be square")
    if P.min() < -1e-15:
        raise ValidationError("markov_chain_checks: negative transition probability")
    transposed = False
    rows_ok = np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
    cols_ok = np.allclose(P.sum(axis=0), 1.0, atol=1e-9)
    if not rows_ok and cols_ok:
        P = P.T
        transposed = True
    elif not rows_ok:
        raise ValidationError("markov_chain_checks: P is not stochastic")
    # uniqueness of the stationary law: eigenvalue 1 must be simple
    ev = np.linalg.eigvals(P)
    if int(np.sum(np.abs(ev - 1.0) < 1e-9)) != 1:
        raise NonErgodicChainError("markov_chain_checks: stationary law is not unique")
    pi = _stationary_power_iteration(P)
    if np.abs(pi @ P - pi).max() > 1e-10:
        raise NonErgodicChainError("markov_chain_checks: power iteration did not converge")
    flux = pi[:, None] * P
    reversible = bool(np.abs(flux - flux.T).max() < 1e-12)
    rhos = []
    Pk = np.eye(P.shape[0])
    for _ in range(steps):
        Pk = Pk @ P
        rhos.append(_maxcorr_of_table(pi[:, None] * Pk))
    rho_k = np.array(rhos)
    rho1 = rho_k[0]
    product = rho1 ** np.arange(1, steps + 1)
    if reversible and np.abs(rho_k - product).max() > 1e-9:
        raise ValidationError("markov_chain_checks: reversible power law violated")
    return MarkovChainReport(pi, reversible, float(rho1), rho_k, product, transposed)


# ---------------------------------------------------------------------------
# helpers used across the test-suite and the acceptance harness


def coarsen_pair(pair: FinitePair, groups_x=None, groups_y=None) -> FinitePair:
    """Merge states (coarsen the alphabets); never increases maximal correlation."""
    joint = pair.joint
    if groups_x is not None:
        rows = [sum(joint[list(g), :]) for g in groups_x]
        joint = np.stack([np.asarray(r) for r in rows])
    if groups_y is not None:
        cols = [joint[:, list(g)].sum(axis=1) for g in groups_y]
        joint = np.stack(cols, axis=1)
    return FinitePair.from_joint(joint)


def random_system(rng, n_vars_x: int, n_vars_y: int, max_alpha: int = 3) -> tuple:
    """Random dense FiniteSystem split into X-variables and Y-variables."""
    sizes = [int(rng.integers(2, max_alpha + 1)) for _ in range(n_vars_x + n_vars_y)]
    names = [f"X{i}" for i in range(n_vars_x)] + [f"Y{j}" for j in range(n_vars_y)]
    joint = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    sys = FiniteSystem(tuple(zip(names, sizes)), joint)
    return sys, names[:n_vars_x], names[n_vars_x:]


def product_pair_system(rng, n_pairs: int, max_alpha: int = 3) -> tuple:
    """System of independent pairs (X_i, Y_i); used by the tensorization tests."""
    tables = []
    sizes = []
    for _ in range(n_pairs):
        nx = int(rng.integers(2, max_alpha + 1))
        ny = int(rng.integers(2, max_alpha + 1))
        tables.append(rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny))
        sizes.append((nx, ny))
    joint = tables[0]
    for t in tables[1:]:
        joint = np.multiply.outer(joint, t)
    # axes currently (x1,y1,x2,y2,...) -> reorder to (x1..xn, y1..yn)
    perm = [2 * i for i in range(n_pairs)] + [2 * i + 1 for i in range(n_pairs)]
    joint = np.transpose(joint, perm)
    names = [(f"X{i}", sizes[i][0]) for i in range(n_pairs)] + [
        (f"Y{i}", sizes[i][1]) for i in range(n_pairs)
    ]
    sys = FiniteSystem(tuple(names), joint)
    per_pair = [_maxcorr_of_table(t) for t in tables]
    return sys, per_pair
