"""The random-walk scheme u_n(x, k/n) = E[f(x + S_k / sqrt(n))].

Exact mode works on lattice step laws. The spatial grid is aligned with the
scaled walk lattice (grid step = lattice step / m for an integer m), so every
x + S_k / sqrt(n) with x on the grid is again a sample point of f. All k
columns then come from one dense product W @ P, where W holds f on sliding
windows and P stacks the laws of S_0 .. S_kmax.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .distributions import (
    DEFAULT_BUDGET, BudgetExceeded, DistributionError, StepDistribution, iter_powers,
    iter_walk_blocks,
)
from .testfn import VANISHING, TestFunction, multi_indices

DEFAULT_T = 2.0
DEFAULT_DELTA = 0.05
DEFAULT_TAIL_TOL = 1e-6
NONDECAYING_BOX = 4.0
_CHUNK = 4_000_000


class SchemeError(ValueError):
    pass


def steps_for(n: int, t: float) -> int:
    """floor(n t), robust to t = k/n round-off."""
    return int(math.floor(n * t + 1e-9))


# ---------------------------------------------------------------------------
# tail certificate


def walk_tail(dist: StepDistribution, T: float, rho: float) -> float:
    """Bound on P(|S_k / sqrt(n)|_inf >= rho) uniformly in k <= nT.

    Hoeffding per coordinate for bounded steps, Chebyshev otherwise.
    """
    width = dist.coord_range()
    if width is not None:
        return float(sum(2 * math.exp(-2 * rho * rho / (T * w * w)) for w in width if w > 0))
    return float(sum(T * dist.cov[i, i] / (rho * rho) for i in range(dist.dim)))


def gauss_tail(cov: np.ndarray, T: float, rho: float) -> float:
    """Bound on P(|sqrt(t) xi|_inf >= rho) for t <= T."""
    return float(sum(2 * math.exp(-rho * rho / (2 * T * cov[i, i])) for i in range(len(cov))))


@dataclass(frozen=True)
class TailCertificate:
    """Bound on sup |u_n| + sup |u| outside the box [-L, L]^d."""

    L: float
    rho: float
    bound: float
    method: str

    def as_dict(self) -> dict:
        return {"L": self.L, "rho": self.rho, "bound": self.bound, "method": self.method}


def tail_certificate(f: TestFunction, dist: StepDistribution, T: float, L: Optional[float] = None,
                     tol: float = DEFAULT_TAIL_TOL) -> TailCertificate:
    """Choose (or assess) the box half-width L.

    Outside the box, |u_n| and |u| are each at most
    ||f||_inf * P(walk leaves a rho-box) + sup_{|y| >= L - rho} |f(y)|.
    """
    method = "hoeffding" if dist.coord_range() is not None else "chebyshev"
    if f.decay != VANISHING:
        L = NONDECAYING_BOX if L is None else float(L)
        return TailCertificate(L, 0.0, math.inf, "none (f does not vanish)")
    fsup = f.sup_abs_deriv((0,) * f.dim)

    def prob(rho):
        return max(walk_tail(dist, T, rho), gauss_tail(dist.cov, T, rho))

    if L is None:
        target = tol * fsup / 4
        rho = 1.0
        while fsup * prob(rho) > target:
            rho *= 1.1
            if rho > 1e6:
                raise SchemeError("no finite box meets the tail tolerance")
        L = rho + f.vanish_radius(target)
    else:
        L = float(L)
        # best split of L between walk excursion and decay of f
        rhos = np.linspace(0.0, L, 401)[1:]
        vals = [fsup * min(1.0, prob(r)) + f.envelope(0, L - r) for r in rhos]
        i = int(np.argmin(vals))
        return TailCertificate(L, float(rhos[i]), 2 * float(vals[i]), method)
    bound = 2 * (fsup * prob(rho) + f.envelope(0, L - rho))
    return TailCertificate(float(L), float(rho), float(bound), method)


# ---------------------------------------------------------------------------
# field


@dataclass(eq=False)
class LatticeField:
    """u_n on grid x {k/n : k = 0..kmax}; arrays have shape grid_shape + (kmax+1,)."""

    f: TestFunction
    dist: StepDistribution
    n: int
    T: float
    kmax: int
    axis: np.ndarray
    m: int
    tail: TailCertificate
    values: np.ndarray
    derivs: dict = field(default_factory=dict)
    pmf_matrix: np.ndarray = field(default=None, repr=False)
    box_origin: np.ndarray = field(default=None, repr=False)
    box_shape: tuple = ()
    backend: str = "exact"
    _increments: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def delta(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def walk_step(self) -> float:
        """Spatial size of one lattice unit after scaling by n^{-1/2}."""
        return self.dist.spacing / math.sqrt(self.n)

    @property
    def grid_shape(self) -> tuple:
        return (len(self.axis),) * self.dim

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.kmax + 1) / self.n

    def grid_points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def point(self, idx) -> np.ndarray:
        idx = np.atleast_1d(idx)
        return self.axis[idx]

    def column(self, k: int, alpha=None) -> np.ndarray:
        arr = self.values if alpha is None or sum(alpha) == 0 else self.derivs[tuple(alpha)]
        return arr[..., k]

    def hessian_trace(self, cov=None) -> np.ndarray:
        """tr(cov D^2 u_n) on grid x k; cov=None gives the plain Laplacian."""
        d = self.dim
        cov = np.eye(d) if cov is None else np.atleast_2d(cov)
        out = np.zeros_like(self.values)
        for i in range(d):
            for j in range(d):
                if cov[i, j] != 0:
                    a = [0] * d
                    a[i] += 1
                    a[j] += 1
                    if tuple(a) not in self.derivs:
                        raise SchemeError("field was built without second derivatives")
                    out += cov[i, j] * self.derivs[tuple(a)]
        return out

    def increments(self) -> np.ndarray:
        """u_n(., (k+1)/n) - u_n(., k/n), k < kmax, as f against pmf differences.

        Same quantity as np.diff(values) but without the cancellation of two
        nearly equal sums, which matters once it is multiplied by n.
        """
        if self._increments is None:
            F = _extended_sample(self.f, (0,) * self.dim, len(self.axis), self.m,
                                 self.box_shape, self.box_origin, self.walk_step / self.m)
            dP = np.diff(self.pmf_matrix, axis=1)
            self._increments = _window_product(F, dP, len(self.axis), self.m, self.box_shape).reshape(
                self.grid_shape + (self.kmax,))
        return self._increments

    # -- exact off-grid evaluation ----------------------------------------
    def pmf_column(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero lattice offsets (integer coords) and masses of S_k."""
        col = self.pmf_matrix[:, k]
        nz = np.nonzero(col)[0]
        offs = np.stack(np.unravel_index(nz, self.box_shape), axis=-1) + self.box_origin
        return offs, col[nz]

    def value_at(self, x, k: int, alpha=None) -> np.ndarray:
        """d^alpha u_n(x, k/n) at arbitrary points x of shape (..., d), via f."""
        alpha = (0,) * self.dim if alpha is None else tuple(alpha)
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        offs, w = self.pmf_column(k)
        shift = offs * self.walk_step
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        out = np.empty(len(flat))
        step = max(1, _CHUNK // max(1, len(w)))
        for i in range(0, len(flat), step):
            pts = flat[i:i + step, None, :] + shift[None, :, :]
            out[i:i + step] = self.f.deriv(alpha, pts) @ w
        return out.reshape(shape)

    def to_csv(self, path=None) -> str:
        """Rows x_1..x_d, k, t, u_n and one column per stored derivative."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dcols = sorted(self.derivs)
        w.writerow([f"x{i + 1}" for i in range(self.dim)] + ["k", "t", "u_n"]
                   + ["d" + "".join(map(str, a)) for a in dcols])
        pts = self.grid_points().reshape(-1, self.dim)
        vals = self.values.reshape(-1, self.kmax + 1)
        ders = [self.derivs[a].reshape(-1, self.kmax + 1) for a in dcols]
        for k in range(self.kmax + 1):
            for i, p in enumerate(pts):
                w.writerow([repr(float(v)) for v in p] + [k, repr(k / self.n), repr(float(vals[i, k]))]
                           + [repr(float(d[i, k])) for d in ders])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def make_axis(dist: StepDistribution, n: int, L: float, delta: float = DEFAULT_DELTA):
    """Symmetric grid through 0 with step (lattice step)/m <= delta."""
    hs = dist.spacing / math.sqrt(n)
    m = max(1, math.ceil(hs / delta - 1e-12))
    step = hs / m
    J = math.ceil(L / step - 1e-12)
    return step * np.arange(-J, J + 1), m


def build_field(f: TestFunction, dist: StepDistribution, n: int, T: float = DEFAULT_T,
                L: Optional[float] = None, delta: float = DEFAULT_DELTA, derivs: int = 0,
                tail_tol: float = DEFAULT_TAIL_TOL, budget: int = DEFAULT_BUDGET) -> LatticeField:
    """Exact u_n on the aligned grid for k = 0 .. ceil(nT)."""
    if not dist.is_lattice:
        raise SchemeError(f"{dist.name}: continuous backend; exact field unavailable, use mc_value")
    if dist.dim != f.dim:
        raise SchemeError(f"dimension mismatch: step law d={dist.dim}, f d={f.dim}")
    if n < 1:
        raise SchemeError("n must be a positive integer")
    if derivs > 2:
        raise SchemeError("field derivatives are stored up to order 2")
    d = f.dim
    kmax = math.ceil(n * T - 1e-9)
    tail = tail_certificate(f, dist, T, L, tail_tol)
    axis, m = make_axis(dist, n, tail.L, delta)

    lo = dist.points.min(axis=0)
    hi = dist.points.max(axis=0)
    box_origin = kmax * lo
    box_shape = tuple(int(v) for v in kmax * (hi - lo) + 1)
    K = int(np.prod(box_shape))
    G = len(axis) ** d
    if K * (kmax + 1) > budget or G * K > 50 * budget:
        raise BudgetExceeded(
            f"field n={n}: pmf box {K} x {kmax + 1} and grid {G} exceed budget {budget}")

    P = np.zeros((K, kmax + 1))
    for k, pmf in enumerate(iter_powers(dist, kmax, budget=budget)):
        block = np.zeros(box_shape)
        sl = tuple(slice(o - b, o - b + s) for o, b, s in zip(pmf.origin, box_origin, pmf.mass.shape))
        block[sl] = pmf.float_mass()
        P[:, k] = block.ravel()

    step = dist.spacing / math.sqrt(n) / m  # same float as make_axis
    orders = [(0,) * d]
    for order in range(1, derivs + 1):
        orders += multi_indices(d, order)
    arrays = {}
    for alpha in orders:
        F = _extended_sample(f, alpha, len(axis), m, box_shape, box_origin, step)
        arrays[alpha] = _window_product(F, P, len(axis), m, box_shape).reshape(
            (len(axis),) * d + (kmax + 1,))
    values = arrays.pop((0,) * d)
    return LatticeField(f=f, dist=dist, n=n, T=T, kmax=kmax, axis=axis, m=m, tail=tail,
                        values=values, derivs=arrays, pmf_matrix=P, box_origin=box_origin,
                        box_shape=box_shape)


def _extended_sample(f, alpha, ng, m, box_shape, box_origin, step) -> np.ndarray:
    """d^alpha f on the grid extended by the walk box; index e <-> (e - J + m*origin) * step."""
    J = (ng - 1) // 2
    coords = [step * (np.arange(ng + m * (s - 1)) - J + m * o) for s, o in zip(box_shape, box_origin)]
    mesh = np.meshgrid(*coords, indexing="ij")
    return f.deriv(alpha, np.stack(mesh, axis=-1))


def _window_product(F: np.ndarray, P: np.ndarray, ng: int, m: int, box_shape) -> np.ndarray:
    """out[g, k] = sum_r F[g + m r] P[r, k] with g over the grid, r over the box."""
    d = F.ndim
    K = P.shape[0]
    if d == 1:
        W = sliding_window_view(F, m * (box_shape[0] - 1) + 1)[:, ::m]
        rows = max(1, _CHUNK // K)
        return np.concatenate([np.ascontiguousarray(W[i:i + rows]) @ P
                               for i in range(0, ng, rows)])
    grid_idx = np.stack(np.meshgrid(*([np.arange(ng)] * d), indexing="ij"), -1).reshape(-1, d)
    off_idx = np.stack(np.meshgrid(*[m * np.arange(s) for s in box_shape], indexing="ij"), -1).reshape(-1, d)
    rows = max(1, _CHUNK // K)
    out = np.empty((len(grid_idx), P.shape[1]))
    for i in range(0, len(grid_idx), rows):
        idx = grid_idx[i:i + rows, None, :] + off_idx[None, :, :]
        out[i:i + rows] = F[tuple(idx[..., a] for a in range(d))] @ P
    return out


# ---------------------------------------------------------------------------
# recurrence, generator, Monte Carlo


def step_once(field: LatticeField, k: int) -> np.ndarray:
    """Column k+1 as the one-step mixture of exact (f-based) u_n(., k/n) values."""
    if not 0 <= k <= field.kmax:
        raise SchemeError(f"column {k} not present")
    pts = field.grid_points()
    out = np.zeros(field.grid_shape)
    hs = field.walk_step
    for r, p in zip(field.dist.points, field.dist.probs):
        out += p * field.value_at(pts + r * hs, k)
    return out


def scheme_generator(field: LatticeField, x_index, k: int) -> float:
    """n (u_n(x, (k+1)/n) - u_n(x, k/n)) at a grid index."""
    if not 0 <= k < field.kmax:
        raise SchemeError(f"columns {k}, {k + 1} not both present")
    idx = tuple(np.atleast_1d(x_index))
    return float(field.n * (field.values[idx + (k + 1,)] - field.values[idx + (k,)]))


def generator_field(field: LatticeField) -> np.ndarray:
    """n (u_n(., (k+1)/n) - u_n(., k/n)) for k = 0..kmax-1."""
    return field.n * field.increments()


@dataclass(frozen=True)
class MCEstimate:
    estimate: np.ndarray
    stderr: np.ndarray
    N: int
    k: int


def mc_value(f: TestFunction, dist: StepDistribution, n: int, x, t: float, N: int, seed: int,
             alpha=None) -> MCEstimate:
    """Monte Carlo u_n(x, t) with standard error; several x share the same walks."""
    k = steps_for(n, t)
    x = np.asarray(x, dtype=float)
    if f.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    shape = x.shape[:-1]
    flat = x.reshape(-1, f.dim)
    alpha = (0,) * f.dim if alpha is None else tuple(alpha)
    if k == 0:
        val = f.deriv(alpha, flat).reshape(shape)
        return MCEstimate(val, np.zeros(shape), N, 0)
    if N < 100:
        raise SchemeError("mc_value needs N >= 100")
    count = 0
    mean = np.zeros(len(flat))
    m2 = np.zeros(len(flat))
    for S in iter_walk_blocks(dist, k, N, seed):
        y = f.deriv(alpha, flat[:, None, :] + S[None, :, :] / math.sqrt(n))
        nb = y.shape[1]
        bm = y.mean(axis=1)
        bm2 = ((y - bm[:, None]) ** 2).sum(axis=1)
        delta = bm - mean
        tot = count + nb
        mean = mean + delta * nb / tot
        m2 = m2 + bm2 + delta * delta * count * nb / tot
        count = tot
    se = np.sqrt(m2 / (count - 1) / count)
    return MCEstimate(mean.reshape(shape), se.reshape(shape), count, k)


__all__ = [
    "LatticeField", "TailCertificate", "MCEstimate", "SchemeError", "build_field", "step_once",
    "scheme_generator", "generator_field", "mc_value", "tail_certificate", "steps_for",
    "DistributionError",
]
