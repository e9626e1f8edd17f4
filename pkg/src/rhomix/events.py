"""Event sufficient conditions for maximal-correlation bounds.

The strong criterion: if P[A∩B] - P[A]P[B] <= eps sqrt(P[A]P[Ā]P[B]P[B̄]) for
all events then the maximal correlation is at most
Lambda(eps) = eps (1 + |ln eps|).  The sharp constant is the operator norm of
the transfer operator of the Chogosov law, the measure on (0,1)^2 with CDF
Z(p,q) = (pq + eps sqrt(p(1-p)q(1-q))) ∧ p ∧ q; this module computes that
measure, its conditional quantile, a sampler, the discretized transfer
operator, and the near-optimal measure nu that shows Lambda cannot be improved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ValidationError

OPNORM_MIN_GRID = 256


def lambda_fn(eps: float) -> float:
    """Lambda(eps) = eps (1 + |ln eps|), the strong event-criterion constant."""
    if eps < 0 or eps > 1:
        raise ValidationError("lambda_fn: eps must lie in [0, 1]")
    if eps == 0:
        return 0.0
    return float(eps * (1.0 + abs(math.log(eps))))


# ---------------------------------------------------------------------------
# weak criterion: H^1_0 seminorms of the envelope functions


@dataclass(frozen=True)
class WeakBoundResult:
    value: float
    norm_zeta: float
    norm_theta: float
    diverged: bool


def _h10_norm_sq(f, m: int) -> float:
    x = np.linspace(0.0, 1.0, m + 1)
    v = np.asarray([f(t) for t in x], dtype=float)
    if abs(v[0]) > 1e-6 or abs(v[-1]) > 1e-6:
        raise ValidationError("weak_bound: envelope functions must vanish at 0 and 1")
    d = np.diff(v)
    return float(np.sum(d * d) * m)


def weak_bound(zeta, theta, m: int = 1024) -> WeakBoundResult:
    """Product of H^1_0 seminorms of two envelope functions on [0,1].

    Norms are discrete squared-difference sums on grids m, 2m, 4m, 8m; if the
    increments between refinements fail to shrink the norm is flagged as
    divergent and the value is +inf.
    """
    results = []
    diverged = False
    for f in (zeta, theta):
        sq = [_h10_norm_sq(f, m * (1 << k)) for k in range(4)]
        inc = [sq[k + 1] - sq[k] for k in range(3)]
        # convergent squared norms are Cauchy under refinement; a divergent one
        # keeps gaining roughly constant increments per doubling
        if inc[-1] > 1e-3 and inc[-1] > 0.5 * inc[0]:
            diverged = True
        results.append(math.sqrt(max(sq[-1], 0.0)))
    value = math.inf if diverged else results[0] * results[1]
    return WeakBoundResult(value, results[0], results[1], diverged)


# ---------------------------------------------------------------------------
# the Chogosov law


@dataclass(frozen=True)
class ChogosovModel:
    eps: float
    m: int = 1024  # default grid resolution for discretizations

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValidationError("ChogosovModel: eps must lie in (0, 1)")
        if self.m < 2:
            raise ValidationError("ChogosovModel: grid resolution must be >= 2")

    def q_lower(self, p):
        """Lower zone border q_D(p): on it q(1-p) = eps^2 p(1-q)."""
        e2 = self.eps**2
        p = np.asarray(p, dtype=float)
        return e2 * p / ((1.0 - p) + e2 * p)

    def q_upper(self, p):
        """Upper zone border q_U(p): on it p(1-q) = eps^2 q(1-p)."""
        e2 = self.eps**2
        p = np.asarray(p, dtype=float)
        return p / (p + e2 * (1.0 - p))


def chogosov_cdf(model: ChogosovModel, p, q):
    """Z(p,q) = (pq + eps sqrt(p(1-p)q(1-q))) ∧ p ∧ q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    core = p * q + model.eps * np.sqrt(np.maximum(p * (1 - p) * q * (1 - q), 0.0))
    return np.minimum(np.minimum(p, q), core)


def chogosov_zone(model: ChogosovModel, p: float, q: float) -> str:
    """Zone of (p,q): '1' (Z=p), '2' (interior), '3' (Z=q), or border 'U'/'D'."""
    if not (0 < p < 1 and 0 < q < 1):
        raise ValidationError("chogosov_zone: p, q must lie in (0, 1)")
    e2 = model.eps**2
    r = (p * (1 - q)) / (q * (1 - p))
    if abs(r - e2) < 1e-12:
        return "U"
    if abs(r - 1.0 / e2) < 1e-12:
        return "D"
    if r < e2:
        return "1"
    if r > 1.0 / e2:
        return "3"
    return "2"


def chogosov_interior_density(model: ChogosovModel, p, q):
    """Density of the law in the interior of zone 2: 1 + eps p~ q~ / sqrt(p p̄ q q̄)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 1.0 + model.eps * (p - 0.5) * (q - 0.5) / np.sqrt(p * (1 - p) * q * (1 - q))


def _quantile_scalar(model: ChogosovModel, p: float, w: float) -> tuple:
    eps = model.eps
    pb, pt = 1.0 - p, p - 0.5
    qD = float(model.q_lower(p))
    qU = float(model.q_upper(p))
    w_lo = qD / (2.0 * p)
    w_hi = 1.0 - (1.0 - qU) / (2.0 * pb)
    if w <= w_lo:
        return qD, "D"
    if w >= w_hi:
        return qU, "U"
    lo, hi = qD, qU
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        g = mid - eps * pt * math.sqrt(mid * (1 - mid) / (p * pb))
        if g < w:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi), "I"


def chogosov_quantile(model: ChogosovModel, p: float, w: float) -> float:
    """Conditional quantile Q(p, w) of the second coordinate given the first.

    Piecewise: the lower-curve atom for w below q_D/(2p), the upper-curve atom
    for w above 1 - (1-q_U)/(2(1-p)), and otherwise the unique root of
    q - eps (p-1/2) sqrt(q(1-q)/(p(1-p))) = w, found by bisection to 1e-15.
    """
    if not (0 < p < 1):
        raise ValidationError("chogosov_quantile: p must lie in (0, 1)")
    if not (0 <= w <= 1):
        raise ValidationError("chogosov_quantile: omega must lie in [0, 1]")
    return _quantile_scalar(model, p, w)[0]


def chogosov_sample(model: ChogosovModel, n: int, seed: int = 0) -> np.ndarray:
    """n exact samples of the law by inverse transform; columns (p, q, branch).

    branch is -1 on the lower curve, 0 in the interior, +1 on the upper curve;
    the cloud is deterministic per seed.
    """
    if n < 1:
        raise ValidationError("chogosov_sample: n must be >= 1")
    rng = np.random.default_rng(seed)
    ps = rng.uniform(size=n)
    ws = rng.uniform(size=n)
    out = np.empty((n, 3))
    branch_code = {"D": -1.0, "I": 0.0, "U": 1.0}
    for t in range(n):
        q, br = _quantile_scalar(model, float(ps[t]), float(ws[t]))
        out[t] = (ps[t], q, branch_code[br])
    return out


def curve_atom_fraction(model: ChogosovModel) -> float:
    """P(sample lies on the lower curve) = int_0^1 q_D(p)/(2p) dp by quadrature."""
    v, _ = quad(lambda p: float(model.q_lower(p)) / (2 * p), 0.0, 1.0, limit=200)
    return float(v)


# ---------------------------------------------------------------------------
# discretized transfer operator


def transfer_matrix(model: ChogosovModel, m: int) -> np.ndarray:
    """m x m cell transition matrix of the transfer operator.

    T[i,j] = m * mass(C_i x C_j), assembled exactly from CDF differences so
    the curve line-masses land in the cells containing them and every row
    sums to exactly 1/m * m = 1 (uniform marginals).
    """
    g = np.linspace(0.0, 1.0, m + 1)
    P, Q = np.meshgrid(g, g, indexing="ij")
    Z = chogosov_cdf(model, P, Q)
    T = np.diff(np.diff(Z, axis=0), axis=1) * m
    return 0.5 * (T + T.T)  # the law is exchangeable; symmetrize assembly noise


def truncated_quasi_eigenvector(m: int, eta: float) -> np.ndarray:
    """Cell-midpoint samples of p -> int_{1/2}^p (s(1-s))^{-3/2} ds, zeroed
    within eta of the endpoints.  Closed form: 2(2p-1)/sqrt(p(1-p))."""
    mid = (np.arange(m) + 0.5) / m
    f = 2.0 * (2.0 * mid - 1.0) / np.sqrt(mid * (1.0 - mid))
    f[(mid < eta) | (mid > 1.0 - eta)] = 0.0
    return f - f.mean()


@dataclass(frozen=True)
class OpnormReport:
    rho_hat: float
    rayleigh_quotient: float  # of the truncated quasi-eigenvector
    m: int
    eta: float
    iterations: int


def chogosov_opnorm(model: ChogosovModel, m: int | None = None, iters: int = 400) -> OpnormReport:
    """Spectral radius of the transfer operator restricted to mean-zero functions.

    Power iteration on the symmetrized grid operator, warm-started at the
    truncated quasi-eigenvector; rho_hat is the largest Rayleigh quotient
    seen, hence a certified lower bound on the grid norm, which in turn never
    exceeds the true operator norm Lambda(eps).
    """
    m = model.m if m is None else int(m)
    if m < OPNORM_MIN_GRID:
        raise ValidationError(f"chogosov_opnorm: grid must have at least {OPNORM_MIN_GRID} cells")
    T = transfer_matrix(model, m)
    eta = 4.0 / m
    f = truncated_quasi_eigenvector(m, eta)
    rq0 = float(f @ (T @ f) / (f @ f))
    v = f.copy()
    best = abs(rq0)
    it = 0
    for it in range(1, iters + 1):
        v -= v.mean()
        w = T @ v
        w -= w.mean()
        rq = float(v @ w / (v @ v))
        best = max(best, abs(rq))
        nrm = np.linalg.norm(w)
        if nrm == 0:
            break
        v = w / nrm
    return OpnormReport(best, rq0, m, eta, it)


# ---------------------------------------------------------------------------
# closed-form identities for the local operator and the lambda integral


def lstar_identity(model: ChogosovModel, ps) -> float:
    """Max residual of L* f = Lambda f for f(p) = p^{-1/2} (closed forms).

    The local operator acts by (L*f)(p) = int_{e^2 p}^{p/e^2} f(q) eps/(4 sqrt(pq)) dq
    + (eps^2/2) f(eps^2 p) + (1/2) f(p/eps^2); with f = p^{-1/2} the integral
    is eps |ln eps| / sqrt(p) and each atom contributes eps / (2 sqrt(p)).
    """
    eps = model.eps
    lam = lambda_fn(eps)
    worst = 0.0
    for p in np.atleast_1d(np.asarray(ps, dtype=float)):
        if p <= 0:
            raise ValidationError("lstar_identity: p must be > 0")
        integral = eps * abs(math.log(eps)) / math.sqrt(p)
        atom_lower = (eps**2 / 2.0) * (eps**2 * p) ** -0.5
        atom_upper = 0.5 * (p / eps**2) ** -0.5
        lhs = integral + atom_lower + atom_upper
        rhs = lam / math.sqrt(p)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


@dataclass(frozen=True)
class LambdaIntegral:
    value: float
    atom_lower: float
    atom_upper: float
    interior: float


def lambda_integral_identity(model: ChogosovModel, p: float) -> LambdaIntegral:
    """lambda(p) = int_0^1 (p p̄ / (Q Q̄))^{3/2} Q'(p, w) dw, in three pieces.

    The two curve atoms are closed-form; the interior piece is adaptive
    quadrature in w with Q evaluated by bisection.  The result is Lambda(eps)
    independently of p (asserted by the caller to 1e-8).
    """
    if not (0 < p < 1):
        raise ValidationError("lambda_integral_identity: p must lie in (0, 1)")
    eps = model.eps
    pb, pt = 1.0 - p, p - 0.5
    qD = float(model.q_lower(p))
    qU = float(model.q_upper(p))
    w_lo = qD / (2.0 * p)
    w_hi = 1.0 - (1.0 - qU) / (2.0 * pb)

    def weight(q):
        return (p * pb / (q * (1.0 - q))) ** 1.5

    # the curve atoms move with slope dq/dp = q q̄ / (p p̄)
    atom_lower = w_lo * weight(qD) * (qD * (1 - qD)) / (p * pb)
    atom_upper = (1.0 - w_hi) * weight(qU) * (qU * (1 - qU)) / (p * pb)

    def integrand(w):
        q, _ = _quantile_scalar(model, p, w)
        qb, qt = 1.0 - q, q - 0.5
        dens = 1.0 + eps * pt * qt / math.sqrt(p * pb * q * qb)
        qprime = eps * math.sqrt(q * qb) / (4.0 * math.sqrt(p * pb) ** 3 * dens)
        return weight(q) * qprime

    interior, _ = quad(integrand, w_lo, w_hi, limit=300, epsabs=1e-12, epsrel=1e-12)
    return LambdaIntegral(atom_lower + interior + atom_upper, atom_lower, atom_upper, interior)


# ---------------------------------------------------------------------------
# the near-optimal measure nu


@dataclass(frozen=True)
class NuModel:
    eps: float
    x: float
    m: int = 512

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0) or not (0.0 < self.x < 1.0):
            raise ValidationError("NuModel: eps and x must lie in (0, 1)")
        if self.m < 8:
            raise ValidationError("NuModel: grid resolution must be >= 8")

    @property
    def factor(self) -> float:
        """eps/(1-x) + (eps x - x^2)/(eps (1-x)^2), the event-ratio bound for nu."""
        e, x = self.eps, self.x
        return e / (1 - x) + (e * x - x * x) / (e * (1 - x) ** 2)


def mu_star_cdf(eps: float, p, q):
    """CDF of the scale-invariant corner measure: eps sqrt(pq) ∧ p ∧ q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.minimum(np.minimum(p, q), eps * np.sqrt(p * q))


def mu_star_rect_mass(eps: float, p1, p2, q1, q2) -> float:
    f = mu_star_cdf
    return float(f(eps, p2, q2) - f(eps, p1, q2) - f(eps, p2, q1) + f(eps, p1, q1))


def nu_cell_masses(model: NuModel) -> np.ndarray:
    """Exact cell masses of nu on the m x m grid.

    nu agrees with the corner measure on (0,x]^2, is zero on
    (0, eps^2 x] x (x,1) and its mirror, has the mixed density
    (1 - (eps/2) sqrt(x/p)) dp x dq/(1-x) on (eps^2 x, x] x (x,1), and is
    uniform with total weight 1-(2-eps)x on (x,1)^2.  The antiderivative of
    the mixed density is p - eps sqrt(x p).
    """
    e, x, m = model.eps, model.x, model.m
    g = np.linspace(0.0, 1.0, m + 1)
    M = np.zeros((m, m))
    # corner: clip each cell to (0,x]^2 and take CDF differences
    pc = np.clip(g, 0.0, x)
    P1, Q1 = np.meshgrid(pc[:-1], pc[:-1], indexing="ij")
    P2, Q2 = np.meshgrid(pc[1:], pc[1:], indexing="ij")
    Zf = lambda a, b: mu_star_cdf(e, a, b)
    M += Zf(P2, Q2) - Zf(P1, Q2) - Zf(P2, Q1) + Zf(P1, Q1)

    def strip_F(a, b):
        """integral of (1 - (eps/2) sqrt(x/p)) over (a, b) clipped to (eps^2 x, x]."""
        a = np.clip(a, e * e * x, x)
        b = np.clip(b, e * e * x, x)
        F = lambda t: t - e * np.sqrt(x * t)
        return np.maximum(F(b) - F(a), 0.0)

    len_hi = np.maximum(np.clip(g[1:], x, 1.0) - np.clip(g[:-1], x, 1.0), 0.0)
    fp = strip_F(g[:-1], g[1:])
    M += np.outer(fp, len_hi) / (1.0 - x)
    M += np.outer(len_hi, fp) / (1.0 - x)
    M += (1.0 - (2.0 - e) * x) * np.outer(len_hi, len_hi) / (1.0 - x) ** 2
    return M


@dataclass(frozen=True)
class NuEventReport:
    worst_ratio: float
    factor: float
    witness_correlation: float
    marginal_error: float


def nu_event_ratio(model: NuModel, seed: int = 0, union_samples: int = 2000) -> NuEventReport:
    """Worst normalized event deviation of nu over a scanned event family.

    The scan covers every anchored-interval pair (the extremizers), every
    single-interval pair on a stride-8 subgrid, and a seeded random sample of
    up-to-4-interval unions per side.  The worst ratio is asserted by the
    caller to stay below the model factor plus grid slack.
    """
    if model.factor >= 1.0:
        raise ValidationError("nu_event_ratio: factor >= 1, choose a smaller x")
    m = model.m
    cells = nu_cell_masses(model)
    marg_err = float(
        max(np.abs(cells.sum(axis=1) - 1.0 / m).max(), np.abs(cells.sum(axis=0) - 1.0 / m).max())
    )
    if marg_err > 1e-9:
        raise ValidationError("nu_event_ratio: assembled marginals are not uniform")
    pref = np.zeros((m + 1, m + 1))
    pref[1:, 1:] = np.cumsum(np.cumsum(cells, axis=0), axis=1)

    def ratio_of(mass, pa, qb):
        num = np.abs(mass - pa * qb)
        den = np.sqrt(pa * (1 - pa) * qb * (1 - qb))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / den, -np.inf)

    # anchored pairs
    frac = np.arange(1, m) / m
    anchored = ratio_of(pref[1:m, 1:m], frac[:, None], frac[None, :])
    worst = float(anchored.max())

    # single intervals on a stride-8 subgrid
    marks = np.arange(0, m + 1, 8)
    starts, ends = np.meshgrid(marks, marks, indexing="ij")
    keep = starts < ends
    ivs = np.stack([starts[keep], ends[keep]], axis=1)
    lens = (ivs[:, 1] - ivs[:, 0]) / m
    inner = pref[ivs[:, 1]][:, ivs[:, 1]] - pref[ivs[:, 0]][:, ivs[:, 1]] \
        - pref[ivs[:, 1]][:, ivs[:, 0]] + pref[ivs[:, 0]][:, ivs[:, 0]]
    good = (lens > 0) & (lens < 1)
    r = ratio_of(inner[np.ix_(good, good)], lens[good][:, None], lens[good][None, :])
    worst = max(worst, float(r.max()))

    # random unions of up to 4 intervals per side
    rng = np.random.default_rng(seed)

    def random_union():
        k = int(rng.integers(1, 5))
        pts = np.sort(rng.integers(0, m + 1, size=2 * k))
        return [(int(pts[2 * t]), int(pts[2 * t + 1])) for t in range(k) if pts[2 * t] < pts[2 * t + 1]]

    unions = [u for u in (random_union() for _ in range(union_samples)) if u]
    kept = []
    profiles = []
    lens_u = []
    for u in unions:
        prof = np.zeros(m + 1)
        total = 0.0
        for a, b in u:
            prof += pref[b] - pref[a]
            total += (b - a) / m
        if 0 < total < 1:
            kept.append(u)
            profiles.append(prof)
            lens_u.append(total)
    if len(kept) >= 2:
        prof_arr = np.array(profiles)
        len_arr = np.array(lens_u)
        half = len(kept) // 2
        a_prof, a_len = prof_arr[:half], len_arr[:half]
        for u, blen in zip(kept[half:], len_arr[half:]):
            mass = np.zeros(half)
            for a, b in u:
                mass += a_prof[:, b] - a_prof[:, a]
            worst = max(worst, float(np.max(ratio_of(mass, a_len, blen))))

    # correlation lower-bound witness: truncated 1/sqrt(p) test function
    mid = (np.arange(m) + 0.5) / m
    f = np.where((mid > model.eps**2 * model.x) & (mid <= model.x), 1.0 / np.sqrt(mid), 0.0)
    f = f - f.mean()
    var = float(f @ f) / m
    witness = float(f @ cells @ f) / var if var > 0 else 0.0
    return NuEventReport(worst, model.factor, witness, marg_err)
