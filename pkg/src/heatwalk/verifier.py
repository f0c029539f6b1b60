"""Quantitative checks on u_n against the heat flow u.

Each check returns a small record (dataclass) that serializes to JSON via
``as_dict``. Inequalities that survive discretization are reported with a
pass flag; the doubling-of-variables case inequalities are reported as
residuals because grid maximizers only approximate true maximizers.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import StepDistribution, convolve_power, moment_abs
from .heatref import HeatReference
from .lattice_scheme import (
    DEFAULT_T, LatticeField, SchemeError, build_field, generator_field, mc_value, steps_for,
)
from .testfn import VANISHING, TestFunction, hermite_nodes

SIGMA_TOL = 1e-9
BOUND_SLACK = 1e-8
MC_STDERR_CUTOFF = 0.2


class HypothesisError(ValueError):
    """Inputs violate the hypotheses of the statement being checked."""


class InfiniteMoment(HypothesisError):
    pass


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Record:
    def as_dict(self) -> dict:
        return _clean(asdict(self))


def _sym_axis(L: float, delta: float) -> np.ndarray:
    J = math.ceil(L / delta - 1e-12)
    return delta * np.arange(-J, J + 1)


def _require(f: TestFunction, order: int, vanishing: bool = False) -> None:
    if f.smoothness < order:
        raise HypothesisError(f"{f.name} is only C^{f.smoothness}; C^{order} required")
    if vanishing and f.decay != VANISHING:
        raise HypothesisError(f"{f.name} does not vanish at infinity")


# ---------------------------------------------------------------------------
# Lemma: sup_x |E g(x + Y) - g(x)| <= ||g||_{C^2} tr(Cov Y) / 2


@dataclass
class Lemma21Result(_Record):
    lhs: float
    rhs: float
    passed: bool
    vacuous: bool


def lemma21_check(g: TestFunction, Y: StepDistribution, scale: float = 1.0,
                  L: Optional[float] = None, delta: float = 0.01) -> Lemma21Result:
    """Check the mean-zero Taylor bound for Y = scale * X on a grid.

    Lattice Y is summed exactly; Gaussian Y uses Gauss-Hermite nodes.
    """
    cov = scale * scale * Y.cov
    if Y.is_lattice:
        shifts, weights = scale * Y.support, Y.probs
    elif Y.name == "gaussian":
        z, weights = hermite_nodes(32, Y.dim)
        shifts = z @ np.linalg.cholesky(cov).T
    else:
        raise HypothesisError("lemma21_check needs a lattice or Gaussian Y")
    if L is None:
        reach = float(np.abs(shifts).max())
        L = reach + (g.vanish_radius(1e-12) if g.decay == VANISHING else 4.0)
    axis = _sym_axis(L, delta)
    pts = np.stack(np.meshgrid(*([axis] * g.dim), indexing="ij"), -1).reshape(-1, g.dim)
    lhs = 0.0
    for i in range(0, len(pts), 100_000):
        x = pts[i:i + 100_000]
        mixed = g(x[:, None, :] + shifts[None, :, :]) @ weights
        lhs = max(lhs, float(np.abs(mixed - g(x)).max()))
    norm = g.ck_norm(2)
    rhs = norm * float(np.trace(cov)) / 2
    vacuous = math.isinf(rhs)
    return Lemma21Result(lhs=lhs, rhs=rhs, passed=vacuous or lhs <= rhs + 1e-10, vacuous=vacuous)


# ---------------------------------------------------------------------------
# time-step bounds for u_n and modulus of continuity of u


@dataclass
class BoundAudit(_Record):
    n: int
    ratio_step: float
    ratio_trace_step: Optional[float]
    ratio_heat_time: float
    vacuous: list = field(default_factory=list)
    passed: bool = True


def cor22_audit(fld: LatticeField, ref: HeatReference,
                hs: Sequence[float] | None = None, max_times: int = 64,
                slack: float = BOUND_SLACK) -> BoundAudit:
    """Largest lhs/rhs ratio for each of the three time-regularity bounds."""
    f, n, d = fld.f, fld.n, fld.dim
    trS = fld.dist.trace_cov
    vac = []
    c2, c4 = f.ck_norm(2), f.ck_norm(4)

    def ratio(lhs, rhs, label):
        if math.isinf(rhs):
            vac.append(label)
            return 0.0
        if rhs == 0:
            return 0.0 if lhs == 0 else math.inf
        return lhs / rhs

    step = float(np.abs(np.diff(fld.values, axis=-1)).max())
    r1 = ratio(step, c2 * trS / (2 * n), "step")

    r2 = None
    if all(tuple(2 * np.eye(d, dtype=int)[i]) in fld.derivs for i in range(d)):
        lap = fld.hessian_trace()
        r2 = ratio(float(np.abs(np.diff(lap, axis=-1)).max()), d * c4 * trS / (2 * n), "trace_step")

    if hs is None:
        hs = [0.0, 1.0 / n, 4.0 / n, 0.25, 1.0]
    pts = fld.grid_points()
    kk = np.unique(np.linspace(0, fld.kmax, min(max_times, fld.kmax + 1)).round().astype(int))
    worst = 0.0
    for k in kk:
        t = k / n
        base = ref.value(pts, t)
        for h in hs:
            if h == 0:
                continue
            lhs = float(np.abs(ref.value(pts, t + h) - base).max())
            worst = max(worst, ratio(lhs, h * c2 * trS / 2, "heat_time"))
    vac = sorted(set(vac))
    ratios = [r for r in (r1, r2, worst) if r is not None]
    return BoundAudit(n=n, ratio_step=r1, ratio_trace_step=r2, ratio_heat_time=worst,
                      vacuous=vac, passed=all(r <= 1 + slack for r in ratios))


# ---------------------------------------------------------------------------
# consistency error


@dataclass
class EpsilonReport(_Record):
    n: int
    epsilon: float
    argmax_x: list
    argmax_t: float
    normalized: float  # epsilon * sqrt(n)
    L: float
    delta: float


def epsilon_field(fld: LatticeField) -> np.ndarray:
    """|n (u_n(k+1) - u_n(k)) - tr(cov D^2 u_n(k)) / 2| on grid x k = 0..kmax-1."""
    gen = generator_field(fld)
    half = 0.5 * fld.hessian_trace(fld.dist.cov)[..., :-1]
    return np.abs(gen - half)


def epsilon_n(f: TestFunction, dist: StepDistribution, n: int, T: float = DEFAULT_T,
              L: Optional[float] = None, delta: float = 0.05,
              fld: Optional[LatticeField] = None) -> EpsilonReport:
    """Sup over the grid and t in [0, T) of the scheme's consistency error.

    The expectation n E[u_n(x + X/sqrt(n), t) - u_n(x, t)] is the discrete
    time difference of u_n, so both terms come from the exact field.
    """
    _require(f, 3)
    if fld is None:
        fld = build_field(f, dist, n, T=T, L=L, delta=delta, derivs=2)
    err = epsilon_field(fld)
    idx = np.unravel_index(int(np.argmax(err)), err.shape)
    eps = float(err[idx])
    return EpsilonReport(n=n, epsilon=eps, argmax_x=fld.point(idx[:-1]).tolist(),
                         argmax_t=idx[-1] / n, normalized=eps * math.sqrt(n),
                         L=fld.tail.L, delta=fld.delta)


# ---------------------------------------------------------------------------
# sup gap


@dataclass
class GapReport(_Record):
    n: int
    gap_sup: float
    sigma_n: float
    sigma_tilde_n: float
    argmax_x: list
    argmax_t: float
    L: float
    delta: float
    tail_bound: float
    time_correction: float
    grid_slack: float
    backend: str = "exact"
    max_stderr: float = 0.0


def _ref_grid(ref: HeatReference, fld: LatticeField, kmax: int) -> np.ndarray:
    pts = fld.grid_points()
    return np.stack([ref.value(pts, k / fld.n) for k in range(kmax + 1)], axis=-1)


def sup_gap(f: TestFunction, dist: StepDistribution, n: int, ref: HeatReference,
            T: float = DEFAULT_T, L: Optional[float] = None, delta: float = 0.05,
            fld: Optional[LatticeField] = None, mc_samples: int = 10**5, seed: int = 0,
            mc_points: Sequence[float] = (-1.0, 0.0, 1.0), mc_times: Sequence[float] = (1.0, 2.0),
            ) -> GapReport:
    """Sup over grid x {k/n <= T} of |u_n - u| with one-sided parts."""
    _require(f, 4, vanishing=True)
    c1, c2 = f.ck_norm(1), f.ck_norm(2)
    tcorr = c2 * dist.trace_cov / (2 * n)
    if not dist.is_lattice:
        return _mc_gap(f, dist, n, ref, mc_samples, seed, mc_points, mc_times, tcorr)
    if fld is None:
        fld = build_field(f, dist, n, T=T, L=L, delta=delta)
    kmax = min(fld.kmax, math.ceil(n * T - 1e-9))
    diff = fld.values[..., :kmax + 1] - _ref_grid(ref, fld, kmax)
    sig = max(0.0, float(diff.max()))
    sig_t = max(0.0, float((-diff).max()))
    idx = np.unravel_index(int(np.argmax(np.abs(diff))), diff.shape)
    return GapReport(n=n, gap_sup=max(sig, sig_t), sigma_n=sig, sigma_tilde_n=sig_t,
                     argmax_x=fld.point(idx[:-1]).tolist(), argmax_t=idx[-1] / n,
                     L=fld.tail.L, delta=fld.delta, tail_bound=fld.tail.bound,
                     time_correction=tcorr, grid_slack=fld.delta * c1)


def _mc_gap(f, dist, n, ref, N, seed, xs, ts, tcorr) -> GapReport:
    xs = np.asarray(xs, dtype=float).reshape(len(xs), -1)
    if xs.shape[1] != f.dim:
        xs = np.repeat(xs[:, :1], f.dim, axis=1)
    best = (0.0, 0.0, 0.0, xs[0], 0.0)
    max_se = 0.0
    for i, t in enumerate(ts):
        est = mc_value(f, dist, n, xs, t, N, seed + i)
        diff = est.estimate - ref.value(xs, t)
        max_se = max(max_se, float(est.stderr.max()))
        j = int(np.argmax(np.abs(diff)))
        sig = max(best[1], float(diff.max()), 0.0)
        sig_t = max(best[2], float((-diff).max()), 0.0)
        if abs(diff[j]) >= best[0]:
            best = (float(abs(diff[j])), sig, sig_t, xs[j], t)
        else:
            best = (best[0], sig, sig_t, best[3], best[4])
    return GapReport(n=n, gap_sup=max(best[1], best[2]), sigma_n=best[1], sigma_tilde_n=best[2],
                     argmax_x=list(map(float, best[3])), argmax_t=float(best[4]), L=math.nan,
                     delta=math.nan, tail_bound=math.nan, time_correction=tcorr,
                     grid_slack=math.nan, backend="monte-carlo", max_stderr=max_se)


# ---------------------------------------------------------------------------
# rate fitting


@dataclass
class RateFit(_Record):
    points: list
    slope: float
    intercept: float
    r2: float
    excluded: list = field(default_factory=list)


def fit_rate(points) -> RateFit:
    """Least squares of log(value) on log(n).

    Points are (n, value) or (n, value, stderr); Monte Carlo points whose
    stderr exceeds 20% of the value are dropped.
    """
    kept, dropped = [], []
    for p in points:
        n, v = float(p[0]), float(p[1])
        se = float(p[2]) if len(p) > 2 and p[2] is not None else 0.0
        if se > MC_STDERR_CUTOFF * abs(v):
            dropped.append([n, v, se])
            continue
        if not v > 0 or not n > 0:
            raise ValueError(f"rate fit needs positive n and values, got ({n}, {v})")
        kept.append((n, v))
    if len(kept) < 3:
        raise ValueError(f"rate fit needs at least 3 usable points, got {len(kept)}")
    x = np.log([n for n, _ in kept])
    y = np.log([v for _, v in kept])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(points=[list(p) for p in kept], slope=float(slope), intercept=float(intercept),
                   r2=r2, excluded=dropped)


# ---------------------------------------------------------------------------
# doubling of variables


@dataclass
class DoublingReport(_Record):
    n: int
    sigma_n: float
    c_n: float
    C_n: float
    degenerate: bool
    x0: list = field(default_factory=list)
    k0: int = 0
    s0: float = 0.0
    sup_phi: float = 0.0
    grid_sup_phi: float = 0.0
    time_gap: float = 0.0  # |k0/n - s0|
    time_gap_bound: float = 0.0
    case: str = ""
    claim_sup_phi: bool = True  # sup phi > sigma_n / 2
    interior_x: bool = True
    residual_s: Optional[float] = None
    residual_k: Optional[float] = None
    hessian_gap: Optional[float] = None
    residual_case: Optional[float] = None
    epsilon_n: Optional[float] = None


def _golden_max(fun, a, b, tol=1e-12, iters=80):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def doubling_explore(f: TestFunction, dist: StepDistribution, n: int, ref: HeatReference,
                     fld: Optional[LatticeField] = None, L: Optional[float] = None,
                     delta: float = 0.05, refine: bool = True,
                     sigma_tol: float = SIGMA_TOL) -> DoublingReport:
    """Maximize phi_n(x, k, s) = u_n(x, k/n) - u(x, s) - c_n (k/n + s) - C_n (k/n - s)^2.

    The window is fixed to t, s in [0, 2]; s is scanned at step 1/(4n) and
    the grid maximizer is polished by golden-section search.
    """
    _require(f, 4, vanishing=True)
    T = 2.0
    if dist.name == "gaussian":
        return _gaussian_doubling(f, dist, n, ref, L, delta, sigma_tol)
    need = _pair(f.dim, 0, 0)
    if fld is None or fld.kmax < 2 * n or need not in fld.derivs:
        fld = build_field(f, dist, n, T=T, L=L, delta=delta, derivs=2)
    kmax = 2 * n
    U = fld.values[..., :kmax + 1].reshape(-1, kmax + 1)
    pts = fld.grid_points().reshape(-1, f.dim)
    ref_k = np.stack([ref.value(pts, k / n) for k in range(kmax + 1)], axis=-1)
    sigma = max(0.0, float((U - ref_k).max()))
    fsup = f.ck_norm(0)
    c_n, C_n = sigma / 8, 2 * fsup * math.sqrt(n)
    if sigma <= sigma_tol:
        return DoublingReport(n=n, sigma_n=sigma, c_n=c_n, C_n=C_n, degenerate=True,
                              case="degenerate")

    s_grid = np.arange(4 * n * T + 1) / (4 * n)
    ref_s = np.stack([ref.value(pts, s) for s in s_grid], axis=-1)
    best = (-math.inf, 0, 0, 0)
    for k in range(kmax + 1):
        tk = k / n
        phi = U[:, k, None] - ref_s - c_n * (tk + s_grid) - C_n * (tk - s_grid) ** 2
        j = int(np.argmax(phi))
        if phi.flat[j] > best[0]:
            gi, si = np.unravel_index(j, phi.shape)
            best = (float(phi.flat[j]), k, int(gi), int(si))
    grid_phi, k0, gi, si = best
    x0, s0 = pts[gi].copy(), float(s_grid[si])

    def phi_at(x, k, s):
        un = fld.value_at(x, k) if refine else U[gi, k]
        return float(un - ref.value(x, s) - c_n * (k / n + s) - C_n * (k / n - s) ** 2)

    sup_phi = grid_phi
    if refine:
        h_s, h_x = 1 / (4 * n), fld.delta
        for _ in range(3):
            s_new, v = _golden_max(lambda s: phi_at(x0, k0, s), max(0.0, s0 - h_s), min(T, s0 + h_s))
            for s_cand in (0.0, T):  # endpoints of the window are admissible
                if abs(s_cand - s0) <= h_s and phi_at(x0, k0, s_cand) >= v:
                    s_new, v = s_cand, phi_at(x0, k0, s_cand)
            if v > sup_phi:
                s0, sup_phi = s_new, v
            x0, sup_phi = _refine_x(phi_at, x0, k0, s0, h_x, sup_phi)
            col = np.array([phi_at(x0, k, s0) for k in range(kmax + 1)])
            kb = int(np.argmax(col))
            if col[kb] > sup_phi:
                k0, sup_phi = kb, float(col[kb])
    return _audit(fld, ref, n, sigma, c_n, C_n, x0, k0, s0, sup_phi, grid_phi)


def _gaussian_doubling(f, dist, n, ref, L, delta, sigma_tol) -> DoublingReport:
    """Gaussian steps: S_k / sqrt(n) has the law of sqrt(k/n) xi, so u_n(., k/n) is a heat flow."""
    own = HeatReference(f, dist.cov)
    L = f.vanish_radius(1e-8) if L is None else L
    axis = _sym_axis(L, delta)
    pts = np.stack(np.meshgrid(*([axis] * f.dim), indexing="ij"), -1).reshape(-1, f.dim)
    sigma = max(0.0, max(float((own.value(pts, k / n) - ref.value(pts, k / n)).max())
                         for k in range(2 * n + 1)))
    c_n, C_n = sigma / 8, 2 * f.ck_norm(0) * math.sqrt(n)
    if sigma > sigma_tol:
        raise HypothesisError("Gaussian step law with a mismatched reference covariance")
    return DoublingReport(n=n, sigma_n=sigma, c_n=c_n, C_n=C_n, degenerate=True, case="degenerate")


def _refine_x(phi_at, x0, k0, s0, h, cur):
    x0 = np.array(x0, dtype=float)
    for _ in range(2):
        for i in range(len(x0)):
            def along(v, i=i):
                y = x0.copy()
                y[i] = v
                return phi_at(y, k0, s0)
            v, val = _golden_max(along, x0[i] - h, x0[i] + h)
            if val > cur:
                x0[i], cur = v, val
    return x0, cur


def _audit(fld, ref, n, sigma, c_n, C_n, x0, k0, s0, sup_phi, grid_phi) -> DoublingReport:
    f, dist = fld.f, fld.dist
    cov = dist.cov
    c2 = f.ck_norm(2)
    tgap = abs(k0 / n - s0)
    bound = (c_n + 0.5 * float(np.abs(cov).sum()) * c2) / (2 * C_n)
    interior = bool(np.all(np.abs(x0) < fld.axis[-1] - fld.delta))
    if k0 == 0:
        case = "k0=0"
    elif s0 == 0:
        case = "s0=0"
    else:
        case = "k0>0,s0>0"

    def tr_un(k):
        return float(sum(cov[i, j] * fld.value_at(x0, k, _pair(f.dim, i, j))
                         for i in range(f.dim) for j in range(f.dim) if cov[i, j] != 0))

    tr_u = float(ref.hessian_trace(x0, s0)) if s0 > 0 else float(f.hessian_trace(x0, cov))
    eps = float(epsilon_field(fld)[..., :2 * n].max())
    rep = DoublingReport(
        n=n, sigma_n=sigma, c_n=c_n, C_n=C_n, degenerate=False, x0=x0.tolist(), k0=int(k0),
        s0=float(s0), sup_phi=sup_phi, grid_sup_phi=grid_phi, time_gap=tgap,
        time_gap_bound=bound, case=case, claim_sup_phi=bool(grid_phi > sigma / 2),
        interior_x=interior, epsilon_n=eps,
    )
    if s0 > 0:
        rep.residual_s = 2 * C_n * (k0 / n - s0) - 0.5 * tr_u - c_n
    if k0 > 0:
        du = n * (float(fld.value_at(x0, k0)) - float(fld.value_at(x0, k0 - 1)))
        rep.residual_k = du - 2 * C_n * (k0 / n - s0) + C_n / n - c_n
    rep.hessian_gap = tr_u - tr_un(k0)
    trS = dist.trace_cov
    if case == "k0>0,s0>0":
        rep.residual_case = 0.5 * (tr_un(k0 - 1) - tr_u) + C_n / n + eps - sigma / 4
    elif case == "k0=0":
        rep.residual_case = s0 * c2 * trS - sigma
    else:
        rep.residual_case = k0 * c2 * trS / n - sigma
    return rep


def _pair(d, i, j):
    a = [0] * d
    a[i] += 1
    a[j] += 1
    return tuple(a)


# ---------------------------------------------------------------------------
# rate of convergence at a single point


@dataclass
class Theorem12Record(_Record):
    gamma: float
    moment: float
    ns: list
    gaps: list
    stderrs: list
    constants: list
    constant_lo: list
    constant_hi: list
    bounded: bool
    backend: str
    spread: Optional[float] = None  # max/min of the constants
    growth: Optional[float] = None  # max of the constants over the first one


def point_gap_exact(f: TestFunction, dist: StepDistribution, n: int, ref: HeatReference,
                    x=None, t: float = 1.0) -> float:
    """|u_n(x, t) - u(x, t)| from the exact law of S_floor(nt)."""
    x = np.zeros(f.dim) if x is None else np.asarray(x, dtype=float).reshape(f.dim)
    pmf = convolve_power(dist, steps_for(n, t))
    pts, w = pmf.nonzero()
    un = float(f(x + pts * dist.spacing / math.sqrt(n)) @ w.astype(float))
    return abs(un - float(np.squeeze(ref.value(x, t))))


def theorem12_check(f: TestFunction, dist: StepDistribution, ref: HeatReference,
                    ns: Sequence[int], gamma: float, N: int = 10**6, seed: int = 0,
                    ratio_limit: float = 10.0) -> Theorem12Record:
    """Gap at (0, 1) times n^(gamma/2) / E|X|^(2+gamma), with a boundedness verdict.

    Exact laws: bounded means no constant exceeds ``ratio_limit`` times the
    first one (max/min is reported too, but decay towards 0 is not growth).
    Monte Carlo: each 3-sigma interval must reach below the upper end of the
    previous one (no growth beyond noise).
    """
    if not 0 < gamma <= 1:
        raise HypothesisError("gamma must lie in (0, 1]")
    _require(f, 4, vanishing=True)
    mom = moment_abs(dist, 2 + gamma)
    if math.isinf(mom):
        raise InfiniteMoment(f"E|X|^{2 + gamma:g} is infinite for {dist.name}")
    gaps, ses, consts, lo, hi = [], [], [], [], []
    x0 = np.zeros(f.dim)
    for i, n in enumerate(ns):
        scale = n ** (gamma / 2) / mom
        if dist.is_lattice:
            g, se = point_gap_exact(f, dist, n, ref), 0.0
        else:
            est = mc_value(f, dist, n, x0, 1.0, N, seed + i)
            g = abs(float(est.estimate) - float(np.squeeze(ref.value(x0, 1.0))))
            se = float(est.stderr)
        gaps.append(g)
        ses.append(se)
        consts.append(g * scale)
        lo.append(max(0.0, g - 3 * se) * scale)
        hi.append((g + 3 * se) * scale)
    spread = growth = None
    if dist.is_lattice:
        if max(consts) <= 1e-12:
            bounded = True
        else:
            spread = max(consts) / min(consts) if min(consts) > 0 else math.inf
            growth = max(consts) / consts[0] if consts[0] > 0 else math.inf
            bounded = growth < ratio_limit
    else:
        bounded = all(lo[i + 1] <= hi[i] for i in range(len(ns) - 1))
    return Theorem12Record(gamma=gamma, moment=mom, ns=list(ns), gaps=gaps, stderrs=ses,
                           constants=consts, constant_lo=lo, constant_hi=hi, bounded=bounded,
                           backend="exact" if dist.is_lattice else "monte-carlo", spread=spread,
                           growth=growth)


__all__ = [
    "Lemma21Result", "BoundAudit", "EpsilonReport", "GapReport", "RateFit", "DoublingReport",
    "Theorem12Record", "HypothesisError", "InfiniteMoment", "lemma21_check", "cor22_audit",
    "epsilon_n", "epsilon_field", "sup_gap", "fit_rate", "doubling_explore", "theorem12_check",
    "point_gap_exact", "SchemeError",
]
