"""The acceptance suite: one callable per criterion, shared by pytest and the CLI.

Each check returns a CheckResult; ``run_all`` executes a selection and prints
one pass/fail line per criterion.  Random instances are parallelizable over
worker threads with a deterministic by-index reduction.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import discrete, events, gaussian, glauber, lattice, tensor_bounds
from .discrete import FinitePair, FiniteSystem

TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float


def _run_indexed(fn, count: int, threads: int | None):
    """Map fn over range(count) with a deterministic by-index reduction."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, range(count)))
    return [fn(k) for k in range(count)]


# ---------------------------------------------------------------------------
# criterion 1: the worked 3x3 mixing example


def check_01_worked_example(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rep = gaussian.par411_report()
    errs = {
        "x1_y": abs(rep["x1_y"] - 0.5),
        "x2_y": abs(rep["x2_y"] - 0.5),
        "x1_y_given_x2": abs(rep["x1_y_given_x2"] - 1.0 / 3.0),
        "vec_y": abs(rep["vec_y"] - 1.0 / math.sqrt(3.0)),
        "l2_sum_bound": abs(rep["l2_sum_bound"] - 1.0 / math.sqrt(2.0)),
        "vtable": float(np.abs(rep["vtable"] - np.array([[40.5, 13.5], [24.0, 12.0]])).max()),
    }
    for mix, expect in (
        ([[1.0, 0, 0], [-1, 1, 0], [1, 1, 1]], [[0.0, 1.0], [1.0 / 6.0, 0.5]]),
        ([[1.0, 0, 1], [0, 1, -1], [0, 0, 1]], [[0.5, 1.5], [1.0, 1.0]]),
    ):
        errs[f"vtable_{expect[0][0]}"] = float(
            np.abs(gaussian.vtable(np.array(mix)) - np.array(expect)).max()
        )
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    ok = worst <= 1e-10 and elapsed < 1.0
    return CheckResult("01 worked example", ok, f"max err {worst:.2e}, {elapsed:.2f}s", elapsed)


# ---------------------------------------------------------------------------
# criterion 2: closed forms


def _membership_pair(n: int, p: int) -> FinitePair:
    import itertools

    xs = list(itertools.combinations(range(n), p))
    joint = np.zeros((len(xs), n))
    for a, x in enumerate(xs):
        for y in x:
            joint[a, y] = 1.0
    return FinitePair.from_joint(joint / joint.sum())


def _membership_twostep_pair(n: int, p: int) -> FinitePair:
    """Joint of (Y, Y') for the resampling chain Y -> X -> Y', from counts."""
    P = np.empty((n, n))
    same = 1.0 / p
    other = (p - 1.0) / (p * (n - 1.0))
    P.fill(other)
    np.fill_diagonal(P, same)
    return FinitePair.from_joint(P / n)


def check_02_closed_forms(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    worst = 0.0
    details = []
    for n, p in ((5, 2), (10, 3), (50, 7)):
        expect = math.sqrt((n - p) / (p * (n - 1.0)))
        rho2 = discrete.maxcorr_pair(_membership_twostep_pair(n, p)).rho
        err = abs(math.sqrt(rho2) - expect)
        if n <= 10:
            err = max(err, abs(discrete.maxcorr_pair(_membership_pair(n, p)).rho - expect))
        worst = max(worst, err)
        details.append(f"({n},{p}) err {err:.1e}")
    for alpha in (-0.1, 0.0, 1.0 / 18.0):
        joint = np.array(
            [
                [2 / 9, 1 / 18, 1 / 18],
                [1 / 18, 2 / 9 + alpha, 1 / 18 - alpha],
                [1 / 18, 1 / 18 - alpha, 2 / 9 + alpha],
            ]
        )
        expect = 0.5 + 6.0 * max(alpha, 0.0)
        err = abs(discrete.maxcorr_pair(FinitePair.from_joint(joint)).rho - expect)
        worst = max(worst, err)
    ok = worst <= 1e-12
    return CheckResult("02 closed forms", ok, f"max err {worst:.2e}; " + ", ".join(details),
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# criteria 3, 4, 7: random-system sweeps


def _measured_eps_matrix(sys: FiniteSystem, xs, ys) -> np.ndarray:
    eps = np.zeros((len(xs), len(ys)))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            eps[i, j] = discrete.subjective_maxcorr(sys, x, y)
    return eps


def _sweep_one(seed: int) -> dict:
    rng = np.random.default_rng(1000 + seed)
    nx = int(rng.integers(1, 4))
    ny = int(rng.integers(1, 4))
    sys, xs, ys = discrete.random_system(rng, nx, ny, max_alpha=3)
    rho = discrete.maxcorr_blocks(sys, xs, ys)
    eps = _measured_eps_matrix(sys, xs, ys)
    out = {
        "rho": rho,
        "nm_slack": tensor_bounds.nm_bound(eps) - rho,
        "simple_slack": (tensor_bounds.simple_bound(eps[:, 0]) - rho) if ny == 1 else np.inf,
    }
    # symmetrized Z-against-Z profile dominating every measured pair
    zvals = {}
    for i in range(nx):
        for j in range(ny):
            z = j - i
            zvals[z] = max(zvals.get(z, 0.0), eps[i, j])
            zvals[-z] = max(zvals.get(-z, 0.0), eps[i, j])
    out["zz_slack"] = tensor_bounds.zz_bound(list(zvals.values())) - rho
    # event-criterion chain on every scanned pair
    worst_event = -np.inf
    pairs = [sys.pair([x], [y]) for x in xs for y in ys]
    if np.prod([2] * nx) and max(len(sys.pair(xs, ys).labels_x), len(sys.pair(xs, ys).labels_y)) <= 10:
        pairs.append(sys.pair(xs, ys))
    for pr in pairs:
        ratio = discrete.event_extremes(pr).max_ratio
        r = discrete.maxcorr_pair(pr).rho
        worst_event = max(worst_event, ratio - r, r - events.lambda_fn(min(ratio, 1.0)))
    out["event_violation"] = worst_event
    return out


def check_03_tensor_sweep(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rows = _run_indexed(_sweep_one, 500, threads)
    worst = min(min(r["nm_slack"] for r in rows),
                min(r["simple_slack"] for r in rows),
                min(r["zz_slack"] for r in rows))
    elapsed = time.perf_counter() - t0
    ok = worst >= -TOL and elapsed < 300.0
    return CheckResult("03 tensorization sweep", ok,
                       f"500 systems, worst slack {worst:.2e}, {elapsed:.1f}s", elapsed)


def check_04_independent_tensorization(threads=None) -> CheckResult:
    t0 = time.perf_counter()

    def one(seed: int) -> float:
        rng = np.random.default_rng(4000 + seed)
        sys, per_pair = discrete.product_pair_system(rng, int(rng.integers(1, 4)))
        xs = [n for n, _ in sys.variables if n.startswith("X")]
        ys = [n for n, _ in sys.variables if n.startswith("Y")]
        return abs(discrete.maxcorr_blocks(sys, xs, ys) - max(per_pair))

    worst = max(_run_indexed(one, 100, threads))
    ok = worst <= TOL
    return CheckResult("04 independent tensorization", ok, f"worst |equality gap| {worst:.2e}",
                       time.perf_counter() - t0)


def check_07_event_criteria(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rows = _run_indexed(_sweep_one, 500, threads)
    worst = max(r["event_violation"] for r in rows)
    m = 512
    nu = events.nu_event_ratio(events.NuModel(0.5, 0.02, m))
    nu_ok = nu.worst_ratio <= nu.factor + 2.0 / m
    ok = worst <= TOL and nu_ok
    return CheckResult(
        "07 event criteria", ok,
        f"worst chain violation {worst:.2e}; nu ratio {nu.worst_ratio:.4f} vs "
        f"factor {nu.factor:.4f} + {2.0 / m:.4f}",
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# criterion 5: Gaussian optimality


def check_05_gaussian_optimality(threads=None) -> CheckResult:
    t0 = time.perf_counter()

    def one(seed: int) -> float:
        rng = np.random.default_rng(5000 + seed)
        eps = rng.uniform(0.0, 0.95, size=int(rng.integers(1, 6)))
        sys = gaussian.build_optimal_simple(eps)
        xs = [l for l in sys.labels if l != "Y"]
        got = gaussian.maxcorr_gaussian(sys, xs, ["Y"])
        return abs(got - tensor_bounds.simple_bound(eps))

    worst = max(_run_indexed(one, 50, threads))
    k = 64
    rep = gaussian.build_banded_zz(1.0, k)
    banded_err = abs(rep.maxcorr - 2.0 / 3.0)
    ok = worst <= TOL and banded_err <= 2.0 / k
    return CheckResult(
        "05 gaussian optimality", ok,
        f"worst simple-bound gap {worst:.2e}; banded window error {banded_err:.2e} <= {2.0 / k:.2e}",
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# criterion 6: the Chogosov suite


def check_06_chogosov(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    n = 100_000
    model = events.ChogosovModel(0.5)
    cloud = events.chogosov_sample(model, n, seed=7)
    crit = 1.63 / math.sqrt(n)  # 1% critical value
    ks = 0.0
    for col in (0, 1):
        s = np.sort(cloud[:, col])
        grid = np.arange(1, n + 1) / n
        ks = max(ks, float(np.max(np.abs(s - grid))), float(np.max(np.abs(s - (grid - 1.0 / n)))))
    lam_dev = 0.0
    for eps in (0.2, 0.5, 0.8):
        md = events.ChogosovModel(eps)
        lam = events.lambda_fn(eps)
        for p in (0.1, 0.5, 0.9):
            lam_dev = max(lam_dev, abs(events.lambda_integral_identity(md, p).value - lam))
    lstar = max(events.lstar_identity(events.ChogosovModel(e), [0.05, 0.3, 1.0]) for e in (0.2, 0.5, 0.8))
    rep = events.chogosov_opnorm(events.ChogosovModel(0.5), m=4096)
    lam05 = events.lambda_fn(0.5)
    opnorm_ok = 0.9 * lam05 <= rep.rho_hat <= lam05 * (1 + 1e-6)
    elapsed = time.perf_counter() - t0
    ok = ks < crit and lam_dev <= 1e-8 and lstar < 1e-12 and opnorm_ok and elapsed < 120.0
    return CheckResult(
        "06 chogosov suite", ok,
        f"KS {ks:.4f} < {crit:.4f}; lambda dev {lam_dev:.1e}; L* residual {lstar:.1e}; "
        f"rho_hat {rep.rho_hat:.4f} in [{0.9 * lam05:.4f}, {lam05:.4f}]; {elapsed:.1f}s",
        elapsed,
    )


# ---------------------------------------------------------------------------
# criterion 8: Glauber gaps


def _gap_sweep_one(seed: int) -> tuple:
    rng = np.random.default_rng(8000 + seed)
    nspin = int(rng.integers(2, 6))
    joint = rng.dirichlet(np.ones(2**nspin)).reshape((2,) * nspin)
    sys = FiniteSystem(tuple((f"s{k}", 2) for k in range(nspin)), joint)
    eps = np.zeros((nspin, nspin))
    for i in range(nspin):
        for j in range(i + 1, nspin):
            eps[i, j] = eps[j, i] = discrete.subjective_maxcorr(sys, i, j)
    rep = glauber.gap_lower_bounds(eps)
    gap = glauber.exact_gap(sys)
    return gap - rep.bound_M, rep.bound_M - rep.bound_simple, gap / rep.bound_M


def check_08_glauber(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rows = _run_indexed(_gap_sweep_one, 200, threads)
    worst_gap = min(r[0] for r in rows)
    worst_nest = min(r[1] for r in rows)
    tightest = min(r[2] for r in rows)  # recorded, never asserted: bound_M is not known to be tight
    prod = FiniteSystem(
        (("a", 2), ("b", 2), ("c", 2)), np.full((2, 2, 2), 1.0 / 8.0)
    )
    gap_prod = glauber.exact_gap(prod)
    # simulator vs exact gap on a 3-spin system, observable = slow eigenmode
    rng = np.random.default_rng(88)
    joint = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    sys3 = FiniteSystem((("a", 2), ("b", 2), ("c", 2)), joint)
    gap3, mode = glauber.exact_gap(sys3, return_vector=True)
    n_events = 1_000_000
    horizon = n_events / 3.0
    sim = glauber.glauber_simulate(
        sys3, horizon, seed=11, observable=lambda s: mode[s], sample_dt=0.1,
        keep_events=False,
    )
    sim_err = abs(sim.rate_estimate - gap3) / gap3
    elapsed = time.perf_counter() - t0
    ok = (
        worst_gap >= -TOL
        and worst_nest >= -TOL
        and abs(gap_prod - 1.0) <= 1e-9
        and sim_err <= 0.10
        and elapsed < 600.0
    )
    return CheckResult(
        "08 glauber", ok,
        f"worst gap slack {worst_gap:.2e}; worst bound nesting {worst_nest:.2e}; "
        f"tightest gap/bound ratio {tightest:.2f}; product gap err {abs(gap_prod - 1):.1e}; "
        f"sim rate err {100 * sim_err:.1f}%; {elapsed:.1f}s",
        elapsed,
    )


# ---------------------------------------------------------------------------
# criterion 9 and 10: quadratic model and convolution inverses


def check_09_quadratic(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    from .convdecay import ToeplitzKernel, decay_fit

    gam = ToeplitzKernel.from_dict(1, 1, {1: 0.2, -1: 0.2})
    model = lattice.QuadraticModel(1, gam)
    cov = lattice.quadratic_covariance(model)
    sum_err = abs(cov.window_sum - 1.0) + cov.truncation_mass
    rep = lattice.quadratic_rho_report(model)
    eps_ok = rep.eps_sum_offcenter <= model.Gamma + TOL
    a0_ok = cov.a_inv_center >= 1.0 / (1.0 + model.Gamma) - 1e-12
    # decay-class preservation
    R = 46
    zs = np.arange(-R, R + 1)
    expo = ToeplitzKernel(1, R, 0.3 * np.exp(-0.7 * np.abs(zs)))
    fit_e = decay_fit(lattice.quadratic_covariance(lattice.QuadraticModel(1, _zeroed(expo))).a_inv, max_shell=R)
    poly_vals = 0.4 / (1.0 + np.abs(zs)) ** 3
    poly = ToeplitzKernel(1, R, poly_vals)
    fit_p = decay_fit(lattice.quadratic_covariance(lattice.QuadraticModel(1, _zeroed(poly))).a_inv, max_shell=R)
    decay_ok = (
        fit_e.classification == "exponential"
        and fit_e.rate <= 0.7 + 1e-6
        and fit_p.classification == "polynomial"
        and abs(fit_p.exponent - 3.0) <= 0.3
    )
    ok = sum_err <= 1e-10 and eps_ok and a0_ok and decay_ok
    return CheckResult(
        "09 quadratic model", ok,
        f"sum-to-one err {sum_err:.1e}; eps mass {rep.eps_sum_offcenter:.3f} <= {model.Gamma}; "
        f"exp rate {fit_e.rate:.3f} <= 0.7; poly exponent {fit_p.exponent:.2f}",
        time.perf_counter() - t0,
    )


def _zeroed(kernel):
    """Copy of a kernel with the origin forced to zero (a valid coupling)."""
    from .convdecay import ToeplitzKernel

    v = kernel.values.copy()
    v[(kernel.R,) * kernel.n] = 0.0
    return ToeplitzKernel(kernel.n, kernel.R, v)


def check_10_conv_exact(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    from .convdecay import ToeplitzKernel, banded_inverse_constants, conv_inverse

    a = ToeplitzKernel.from_dict(1, 1, {1: math.exp(-1.0)})
    b = conv_inverse(a)
    worst = 0.0
    for z in range(-40, 41):
        expect = math.exp(-z) if z > 0 else 0.0
        worst = max(worst, abs(b.value_at((z,)) - expect))
    rng = np.random.default_rng(10)
    bound_ok = True
    for _ in range(50):
        n = 50
        gamma = rng.uniform(0.3, 1.5)
        amp = rng.uniform(0.05, 0.5)
        idx = np.arange(n)
        H = rng.uniform(-1, 1, size=(n, n)) * amp * np.exp(-gamma * np.abs(idx[:, None] - idx[None, :]))
        H = 0.5 * (H + H.T)
        w = np.linalg.eigvalsh(H)
        scale = 0.9 / max(abs(w.min()), abs(w.max()), 1e-9)
        H *= min(1.0, scale)
        M = np.eye(n) - H
        w = np.linalg.eigvalsh(M)
        r, R = float(w.min()), float(w.max())
        A = float(np.max(np.abs(M) * np.exp(gamma * np.abs(idx[:, None] - idx[None, :]))))
        consts = banded_inverse_constants(r, R, A, gamma)
        inv = np.linalg.inv(M)
        envelope = consts.A_out * np.exp(-consts.gamma_out * np.abs(idx[:, None] - idx[None, :]))
        if (np.abs(inv) > envelope * (1 + 1e-9)).any():
            bound_ok = False
    ok = worst <= 1e-12 and bound_ok
    return CheckResult(
        "10 convolution inverses", ok,
        f"geometric-inverse max err {worst:.2e}; banded envelope held on 50 matrices: {bound_ok}",
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# criterion 11: the Ising CLT


def check_11_clt(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    model = lattice.IsingTorus(1, 8, 3.0)
    rep = lattice.clt_experiment(model, (8, 16, 32), replicas=10_000, seed=3)
    decreasing = rep.cf_distances[0] > rep.cf_distances[1] > rep.cf_distances[2]
    sig_err = abs(rep.sigma_hat2 - rep.sigma2_limit) / rep.sigma2_limit
    ok = decreasing and rep.cf_distances[-1] < 0.05 and sig_err <= 0.05
    return CheckResult(
        "11 ising clt", ok,
        f"cf distances {tuple(round(d, 4) for d in rep.cf_distances)} decreasing={decreasing}; "
        f"sigma2 rel err {100 * sig_err:.1f}%",
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# criterion 12: hypocoercive chain


def check_12_hypocoercive(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    params = gaussian.OUChainParams(K=16, t=0.05)
    co = gaussian.ou_smallt_coefficients(params, 0.05)
    rich_err = max(
        abs(co["pp"] / co["pp_expected"] - 1.0),
        abs(co["pq"] / co["pq_expected"] - 1.0),
        abs(co["qq"] / co["qq_expected"] - 1.0),
    )
    rhos = {}
    for t in (0.01, 0.1, 1.0):
        rep = gaussian.ou_chain_joint(gaussian.OUChainParams(K=16, t=t))
        rhos[t] = rep.maxcorr
    contraction_ok = all(r < 1.0 - 1e-3 for r in rhos.values())
    elapsed = time.perf_counter() - t0
    ok = rich_err <= 0.02 and contraction_ok and elapsed < 60.0
    detail = (
        f"Richardson rel err {rich_err:.2e}; maxcorr(eta;eta') = "
        + ", ".join(f"{t}: {r:.8f}" for t, r in rhos.items())
        + f"; requires all < {1 - 1e-3}; {elapsed:.1f}s"
    )
    return CheckResult("12 hypocoercive chain", ok, detail, elapsed)


# ---------------------------------------------------------------------------
# criterion 13: three lines


def check_13_three_lines(threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    worst_spread = 0.0
    consistent = True
    count = 0
    while count < 10_000:
        u = rng.standard_normal((3, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        sines = [
            np.linalg.norm(np.cross(u[a], u[b]))
            for a, b in ((0, 1), (1, 2), (2, 0))
        ]
        if min(sines) < 1e-3:
            continue
        count += 1
        rep = gaussian.three_lines(u[0], u[1], u[2])
        worst_spread = max(worst_spread, max(rep.sine_ratios) - min(rep.sine_ratios))
        r = rep.sine_ratios[0]
        for geo, app in zip(rep.geometric, rep.apparent):
            if r < 1 - 1e-12 and app > geo + 1e-12:
                consistent = False
            if r > 1 + 1e-12 and app < geo - 1e-12:
                consistent = False
    ok = worst_spread <= 1e-10 and consistent
    return CheckResult(
        "13 three lines", ok,
        f"worst sine-ratio spread {worst_spread:.2e} on 10^4 triples; orders consistent: {consistent}",
        time.perf_counter() - t0,
    )


ALL_CHECKS = [
    check_01_worked_example,
    check_02_closed_forms,
    check_03_tensor_sweep,
    check_04_independent_tensorization,
    check_05_gaussian_optimality,
    check_06_chogosov,
    check_07_event_criteria,
    check_08_glauber,
    check_09_quadratic,
    check_10_conv_exact,
    check_11_clt,
    check_12_hypocoercive,
    check_13_three_lines,
]


def run_all(only=None, threads: int | None = None, out=print):
    results = []
    for fn in ALL_CHECKS:
        name = fn.__name__.replace("check_", "")
        if only and not any(sel in name for sel in only):
            continue
        res = fn(threads=threads)
        results.append(res)
        out(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
    return results
