"""Exact maximal and subjective correlations for centered Gaussian systems.

For a Gaussian vector split into blocks I and J the maximal correlation is
the largest singular value of Sigma_II^{-1/2} Sigma_IJ Sigma_JJ^{-1/2}, so
everything here reduces to dense linear algebra: Schur-complement
conditioning, whitened cross-covariances, and one matrix exponential for the
damped-chain noise covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IntegratorError, ValidationError

RANK_RTOL = 1e-10  # relative eigenvalue cutoff for dropping deterministic directions


@dataclass(frozen=True)
class GaussianSystem:
    """Labeled symmetric PSD covariance matrix."""

    labels: tuple
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValidationError("GaussianSystem: covariance must be square")
        if cov.shape[0] != len(self.labels):
            raise ValidationError("GaussianSystem: label count does not match covariance")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ValidationError("GaussianSystem: covariance must be symmetric within 1e-12")
        cov = 0.5 * (cov + cov.T)
        w = np.linalg.eigvalsh(cov)
        norm = max(float(np.abs(w).max()), 1e-300)
        if w.min() < -1e-10 * norm:
            raise ValidationError("GaussianSystem: covariance is not PSD within tolerance")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "cov", cov)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"GaussianSystem: unknown label {label!r}") from None

    def indices(self, labels) -> list:
        return [self.index(l) for l in labels]


def _whitener(S: np.ndarray) -> np.ndarray:
    """W with W^T S W = I on the non-deterministic directions of S."""
    w, U = np.linalg.eigh(S)
    cut = RANK_RTOL * max(float(w.max()), 0.0) if w.size else 0.0
    keep = w > max(cut, 0.0)
    if not keep.any():
        return np.zeros((S.shape[0], 0))
    return U[:, keep] / np.sqrt(w[keep])


def maxcorr_gaussian(sys: GaussianSystem, block_i, block_j) -> float:
    """Maximal correlation between two disjoint blocks of a Gaussian system."""
    idx_i = sys.indices(block_i)
    idx_j = sys.indices(block_j)
    if set(idx_i) & set(idx_j):
        raise ValidationError("maxcorr_gaussian: blocks overlap")
    S = sys.cov
    Wi = _whitener(S[np.ix_(idx_i, idx_i)])
    Wj = _whitener(S[np.ix_(idx_j, idx_j)])
    if Wi.shape[1] == 0 or Wj.shape[1] == 0:
        return 0.0
    C = Wi.T @ S[np.ix_(idx_i, idx_j)] @ Wj
    if C.size == 0:
        return 0.0
    s = float(np.linalg.svd(C, compute_uv=False)[0])
    return min(max(s, 0.0), 1.0)


def condition(sys: GaussianSystem, on_labels) -> GaussianSystem:
    """Conditional covariance given the listed coordinates (Schur complement).

    The result does not depend on the conditioning values, which is what makes
    Gaussian subjective correlation a single number.  Singular conditioning
    blocks are handled by a pseudo-inverse with relative rank cutoff 1e-10.
    """
    K = sys.indices(on_labels)
    A = [i for i in range(len(sys.labels)) if i not in K]
    S = sys.cov
    Skk = S[np.ix_(K, K)]
    w, U = np.linalg.eigh(Skk)
    cut = RANK_RTOL * max(float(w.max()), 0.0) if w.size else 0.0
    inv = np.where(w > max(cut, 0.0), 1.0 / np.where(w > 0, w, 1.0), 0.0)
    pinv = (U * inv) @ U.T
    Sak = S[np.ix_(A, K)]
    Sc = S[np.ix_(A, A)] - Sak @ pinv @ Sak.T
    return GaussianSystem(tuple(sys.labels[i] for i in A), Sc)


def chained_maxcorr(sys: GaussianSystem, xs, y) -> tuple:
    """Sequential conditional correlations e_i = corr(X_i; Y | X_{<i}).

    Returns (value, e_list) with value = sqrt(1 - prod(1 - e_i^2)); for
    Gaussian systems this equals the direct block correlation exactly, which
    is asserted to 1e-10.
    """
    xs = list(xs)
    current = sys
    es = []
    for k, x in enumerate(xs):
        es.append(maxcorr_gaussian(current, [x], [y]))
        if k < len(xs) - 1:
            current = condition(current, [x])
    value = float(np.sqrt(max(0.0, 1.0 - np.prod([1.0 - e**2 for e in es]))))
    direct = maxcorr_gaussian(sys, xs, [y])
    if abs(value - direct) > 1e-10:
        raise ValidationError(
            f"chained_maxcorr: chain value {value!r} disagrees with direct value {direct!r}"
        )
    return value, es


def build_optimal_simple(epsilons) -> GaussianSystem:
    """Gaussian system X_i = sqrt(1-a_i) z_i + sqrt(a_i) xi, Y = xi whose
    conditional correlations e_i equal the requested epsilons.

    Each a_i is found by monotone bisection (e_i is continuous and increasing
    in a_i once a_1..a_{i-1} are fixed); the resulting system attains the
    N-against-1 bound with equality.
    """
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))
    if eps.size and (eps.min() < 0 or eps.max() >= 1):
        raise ValidationError("build_optimal_simple: requires 0 <= eps_i < 1")
    n = eps.size

    def system_for(alphas):
        k = len(alphas)
        cov = np.empty((k + 1, k + 1))
        r = np.sqrt(np.asarray(alphas))
        cov[:k, :k] = np.outer(r, r)
        np.fill_diagonal(cov[:k, :k], 1.0)
        cov[:k, k] = r
        cov[k, :k] = r
        cov[k, k] = 1.0
        labels = tuple(f"X{t + 1}" for t in range(k)) + ("Y",)
        return GaussianSystem(labels, cov)

    alphas: list = []
    for i in range(n):
        target = float(eps[i])
        lo, hi = 0.0, 1.0 - 1e-14

        def e_i(a):
            s = system_for(alphas + [a])
            cur = s
            for t in range(i):
                cur = condition(cur, [f"X{t + 1}"])
            return maxcorr_gaussian(cur, [f"X{i + 1}"], ["Y"])

        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if e_i(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        alphas.append(0.5 * (lo + hi) if target > 0 else 0.0)
    return system_for(alphas)


@dataclass(frozen=True)
class BandedZZReport:
    system: GaussianSystem
    alpha: float
    k: int
    e_half: float
    maxcorr: float


def build_banded_zz(alpha: float, k: int) -> BandedZZReport:
    """Banded translation-invariant Gaussian pair on a truncated window.

    X_i (integer i, |i| <= k) and Y_j (half-integer j) share hidden noise with
    their two nearest opposite-type neighbours: Var = 1 + 2 alpha on both
    sides, Cov(X_i, Y_j) = alpha iff |i - j| = 1/2.  Reports the conditional
    correlation e_{1/2} measured on the window and the block correlation.
    """
    if alpha < 0:
        raise ValidationError("build_banded_zz: alpha must be >= 0")
    if k < 2:
        raise ValidationError("build_banded_zz: window k must be >= 2")
    xs = [("x", i) for i in range(-k, k + 1)]
    ys = [("y", i + 0.5) for i in range(-k, k)]
    labels = xs + ys
    npts = len(labels)
    cov = np.zeros((npts, npts))
    for a, (ta, pa) in enumerate(labels):
        cov[a, a] = 1.0 + 2.0 * alpha
        for b, (tb, pb) in enumerate(labels):
            if ta != tb and abs(pa - pb) == 0.5:
                cov[a, b] = alpha
    sys = GaussianSystem(tuple(f"{t}{p}" for t, p in labels), cov)
    if alpha == 0:
        e_half = 0.0
    else:
        past = [f"x{i}" for i in range(-k, 0)] + [f"y{j + 0.5}" for j in range(-k, 0)]
        reduced = condition(sys, past)
        e_half = maxcorr_gaussian(reduced, ["x0"], ["y0.5"])
    rho = maxcorr_gaussian(sys, [f"x{i}" for i in range(-k, k + 1)], [f"y{i + 0.5}" for i in range(-k, k)])
    return BandedZZReport(sys, float(alpha), int(k), float(e_half), float(rho))


# ---------------------------------------------------------------------------
# damped harmonic chain (kinetic Fokker-Planck toy model)


@dataclass(frozen=True)
class OUChainParams:
    m: float = 1.0       # particle mass
    omega: float = 1.0   # pinning frequency
    c: float = 1.0       # coupling frequency
    T: float = 1.0       # temperature
    lam: float = 1.0     # friction rate
    t: float = 1.0       # time horizon
    K: int = 16          # number of particles (periodic chain)

    def __post_init__(self):
        for name in ("m", "omega", "c", "T", "lam", "t"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"OUChainParams: {name} must be strictly positive")
        if self.K < 3:
            raise ValidationError("OUChainParams: K must be >= 3")


@dataclass(frozen=True)
class OUChainReport:
    system: GaussianSystem            # joint law of (eta, eta') over 4K coordinates
    maxcorr: float                    # {eta : eta'}
    corr_pp: np.ndarray               # |corr(p_i, p'_j)| matrices, etc.
    corr_pq: np.ndarray
    corr_qp: np.ndarray
    corr_qq: np.ndarray
    chat: np.ndarray                  # noise covariance over the horizon
    phi: np.ndarray                   # deterministic flow over the horizon
    ceq: np.ndarray                   # equilibrium covariance of eta
    qbar_range: tuple                 # (r, R) for the rescaled joint precision
    stationarity_residual: float


def _ou_drift(params: OUChainParams) -> np.ndarray:
    K = params.K
    eye = np.eye(K)
    lap = 2 * eye - np.roll(eye, 1, axis=0) - np.roll(eye, -1, axis=0)
    A = np.zeros((2 * K, 2 * K))
    A[:K, :K] = -params.lam * eye
    A[:K, K:] = -params.m * (params.omega**2 * eye + params.c**2 * lap)
    A[K:, :K] = eye / params.m
    return A


def ou_noise_covariance(params: OUChainParams) -> tuple:
    """(Chat, phi): the Lyapunov integral int_0^t e^{sA} B e^{sA^T} ds with
    B = 2 T lam m I_p, solved in closed form by a block matrix exponential,
    and the flow phi = e^{tA}."""
    K = params.K
    A = _ou_drift(params)
    B = np.zeros((2 * K, 2 * K))
    B[:K, :K] = 2 * params.T * params.lam * params.m * np.eye(K)
    blk = np.zeros((4 * K, 4 * K))
    blk[: 2 * K, : 2 * K] = A
    blk[: 2 * K, 2 * K :] = B
    blk[2 * K :, 2 * K :] = -A.T
    E = sla.expm(params.t * blk)
    phi = E[: 2 * K, : 2 * K]
    chat = E[: 2 * K, 2 * K :] @ phi.T
    if not np.all(np.isfinite(chat)):
        raise IntegratorError("ou_noise_covariance: matrix exponential returned non-finite values")
    return 0.5 * (chat + chat.T), phi


def ou_chain_joint(params: OUChainParams) -> OUChainReport:
    K = params.K
    eye = np.eye(K)
    lap = 2 * eye - np.roll(eye, 1, axis=0) - np.roll(eye, -1, axis=0)
    qcheck = np.zeros((2 * K, 2 * K))
    qcheck[:K, :K] = eye / params.m
    qcheck[K:, K:] = params.m * (params.omega**2 * eye + params.c**2 * lap)
    ceq = params.T * np.linalg.inv(qcheck)
    chat, phi = ou_noise_covariance(params)
    stat_res = float(np.abs(phi @ ceq @ phi.T + chat - ceq).max())
    cross = ceq @ phi.T
    cbar = np.block([[ceq, cross], [cross.T, ceq]])
    labels = (
        [f"p{i}" for i in range(K)]
        + [f"q{i}" for i in range(K)]
        + [f"p'{i}" for i in range(K)]
        + [f"q'{i}" for i in range(K)]
    )
    sys = GaussianSystem(tuple(labels), cbar)
    eta = labels[: 2 * K]
    etap = labels[2 * K :]
    rho = maxcorr_gaussian(sys, eta, etap)
    sd = np.sqrt(np.diag(cbar))
    corr = np.abs(cross) / np.outer(sd[: 2 * K], sd[2 * K :])
    # joint precision, momentum coordinates rescaled by chi = m*omega
    qhat = params.T * np.linalg.inv(chat)
    qbar = np.block(
        [[qcheck + phi.T @ qhat @ phi, -phi.T @ qhat], [-qhat @ phi, qhat]]
    )
    chi = params.m * params.omega
    scale = np.ones(4 * K)
    for blk_i in range(4):
        if blk_i % 2 == 0:
            scale[blk_i * K : (blk_i + 1) * K] = chi
    qbar_scaled = qbar * np.outer(scale, scale)
    wq = np.linalg.eigvalsh(0.5 * (qbar_scaled + qbar_scaled.T))
    return OUChainReport(
        system=sys,
        maxcorr=float(rho),
        corr_pp=corr[:K, :K],
        corr_pq=corr[:K, K:],
        corr_qp=corr[K:, :K],
        corr_qq=corr[K:, K:],
        chat=chat,
        phi=phi,
        ceq=ceq,
        qbar_range=(float(wq.min()), float(wq.max())),
        stationarity_residual=stat_res,
    )


def ou_smallt_coefficients(params: OUChainParams, t: float) -> dict:
    """Richardson-extrapolated leading coefficients of the noise covariance.

    Chat_pp ~ 2 T lam m t, Chat_pq ~ T lam t^2, Chat_qq ~ (2/3) T lam t^3 / m.
    The friction factor e^{-lam s} of the flow makes the relative correction
    linear in t, so the first-order step 2 g(t/2) - g(t) cancels it, leaving
    O(t^2).  Also returns log2 decay slopes of |Chat_{p0 pj}| in t.
    """
    K = params.K

    def chat_at(tt):
        p = OUChainParams(params.m, params.omega, params.c, params.T, params.lam, tt, K)
        return ou_noise_covariance(p)[0]

    c1 = chat_at(t)
    c2 = chat_at(t / 2)

    def rich(g1, g2):
        return 2.0 * g2 - g1

    out = {
        "pp": rich(c1[0, 0] / t, c2[0, 0] / (t / 2)),
        "pq": rich(c1[0, K] / t**2, c2[0, K] / (t / 2) ** 2),
        "qq": rich(c1[K, K] / t**3, c2[K, K] / (t / 2) ** 3),
        "pp_expected": 2 * params.T * params.lam * params.m,
        "pq_expected": params.T * params.lam,
        "qq_expected": 2.0 / 3.0 * params.T * params.lam / params.m,
    }
    for j in (1, 2):
        out[f"slope_pp_{j}"] = float(np.log2(abs(c1[0, j]) / abs(c2[0, j])))
        out[f"slope_pp_{j}_expected"] = 2 * j + 1
    return out


# ---------------------------------------------------------------------------
# three concurrent lines in R^3


@dataclass(frozen=True)
class ThreeLinesReport:
    geometric: tuple   # angles (A, B, Om) between (L2,L3), (L3,L1), (L1,L2)
    apparent: tuple    # apparent angles (A', B', Om') seen from L1, L2, L3
    sine_ratios: tuple
    order: str         # "apparent<geometric" | "equal" | "apparent>geometric"


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValidationError("three_lines: zero vector does not define a line")
    return v / n


def three_lines(u1, u2, u3) -> ThreeLinesReport:
    """Geometric vs apparent angles of three distinct lines through the origin.

    Sines are taken from cross products (stable near zero angle); the three
    ratios sin(apparent)/sin(geometric) agree to 1e-10 and therefore so do
    the relative orders, which is asserted.
    """
    us = [_unit(u1), _unit(u2), _unit(u3)]

    def sin_geometric(a, b):
        return float(np.linalg.norm(np.cross(us[a], us[b])))

    def sin_apparent(a, b, v):
        pa = us[a] - (us[a] @ us[v]) * us[v]
        pb = us[b] - (us[b] @ us[v]) * us[v]
        na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
        if na < 1e-12 or nb < 1e-12:
            raise ValidationError("three_lines: lines must be pairwise non-collinear")
        return float(np.linalg.norm(np.cross(pa, pb)) / (na * nb))

    pairs = [(1, 2, 0), (2, 0, 1), (0, 1, 2)]  # (A from L1), (B from L2), (Om from L3)
    sins_g = []
    sins_a = []
    for a, b, v in pairs:
        sg = sin_geometric(a, b)
        if sg < 1e-12:
            raise ValidationError("three_lines: lines must be pairwise non-collinear")
        sins_g.append(sg)
        sins_a.append(sin_apparent(a, b, v))
    ratios = tuple(sa / sg for sa, sg in zip(sins_a, sins_g))
    if max(ratios) - min(ratios) > 1e-10:
        raise ValidationError("three_lines: sine-ratio identity violated beyond 1e-10")
    geo = tuple(math.asin(min(s, 1.0)) for s in sins_g)
    app = tuple(math.asin(min(s, 1.0)) for s in sins_a)
    r = ratios[0]
    order = "equal" if abs(r - 1.0) <= 1e-12 else ("apparent<geometric" if r < 1 else "apparent>geometric")
    return ThreeLinesReport(geo, app, ratios, order)


# ---------------------------------------------------------------------------
# variance decomposition table for a linear functional of a mixed system


def vtable(mixing: np.ndarray, f_coeffs=None) -> np.ndarray:
    """V[j][i] table for f = sum_i c_i X_i under the mixing-matrix model.

    ``mixing`` has one row of independent-noise coefficients per X variable
    and a final row for Y.  V[j][i] is the variance of the increment of the
    projection of f onto span(Y-rows up to j, X-rows up to i).
    """
    Mx = np.asarray(mixing, dtype=float)
    n = Mx.shape[0] - 1
    a_rows = Mx[:n]
    w = Mx[n]
    c = np.ones(n) if f_coeffs is None else np.asarray(f_coeffs, dtype=float)
    f = c @ a_rows

    def proj(rows, v):
        if not rows:
            return np.zeros_like(v)
        Q, _ = np.linalg.qr(np.array(rows).T)
        return Q @ (Q.T @ v)

    out = np.zeros((2, n))
    for j in (0, 1):
        base = [w] if j == 1 else []
        for i in range(1, n + 1):
            hi = proj(base + [a_rows[t] for t in range(i)], f)
            lo = proj(base + [a_rows[t] for t in range(i - 1)], f)
            out[j, i - 1] = float((hi - lo) @ (hi - lo))
    return out


def par411_report() -> dict:
    """All quantities of the worked 3x3 mixing example in one place."""
    M = np.array([[4.0, 1, 1], [1, 4, 1], [1, 1, 4]])
    sys = GaussianSystem(("X1", "X2", "Y"), M @ M.T)
    x1y = maxcorr_gaussian(sys, ["X1"], ["Y"])
    x2y = maxcorr_gaussian(sys, ["X2"], ["Y"])
    x1y_given_x2 = maxcorr_gaussian(condition(sys, ["X2"]), ["X1"], ["Y"])
    direct = maxcorr_gaussian(sys, ["X1", "X2"], ["Y"])
    chained, es = chained_maxcorr(sys, ["X1", "X2"], "Y")
    from .tensor_bounds import l2_sum_bound, simple_bound

    return {
        "x1_y": x1y,
        "x2_y": x2y,
        "x1_y_given_x2": x1y_given_x2,
        "vec_y": direct,
        "chained": chained,
        "conditional_es": es,
        "l2_sum_bound": l2_sum_bound([x1y, x2y]),
        "product_form_bound": simple_bound([x1y, x2y]),
        # sharper variant mixing the chained conditional value into the L2 sum;
        # reported for information, never asserted against
        "minimal_hypothesis_bound": l2_sum_bound([x1y, x1y_given_x2]),
        "minimal_hypothesis_bound_verified": False,
        "vtable": vtable(M),
    }
