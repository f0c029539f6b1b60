"""Centered step laws for the random walk S_k = X_1 + ... + X_k.

Two backends exist. Lattice laws live on ``spacing * Z^d`` and support exact
k-fold convolution. Continuous laws carry a sampler and moment information
only; exact operations reject them and callers route to Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Any, Callable, Mapping, Optional

import numpy as np
from scipy import integrate, special

CENTER_TOL = 1e-12
PROB_TOL = 1e-12
DEFAULT_BUDGET = 50_000_000
SAMPLE_BLOCK = 1 << 14


class DistributionError(ValueError):
    """Invalid step-law specification or unsupported operation."""


class BudgetExceeded(DistributionError):
    pass


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """A centered step law with known covariance.

    For lattice laws ``points`` holds integer coordinates (m, d) and the
    actual support is ``points * spacing``.
    """

    name: str
    dim: int
    kind: str  # "lattice" | "continuous"
    cov: np.ndarray
    params: Mapping[str, Any] = field(default_factory=dict)
    points: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    spacing: float = 1.0
    tail_index: float = math.inf
    _draw: Optional[Callable] = field(default=None, repr=False)
    _abs_moment: Optional[Callable] = field(default=None, repr=False)

    @property
    def is_lattice(self) -> bool:
        return self.kind == "lattice"

    @property
    def support(self) -> np.ndarray:
        self._require_lattice()
        return self.points * self.spacing

    @property
    def mean(self) -> np.ndarray:
        if self.is_lattice:
            return self.probs @ self.support
        return np.zeros(self.dim)

    @property
    def trace_cov(self) -> float:
        return float(np.trace(self.cov))

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.cov))))

    def coord_range(self) -> Optional[np.ndarray]:
        """Per-coordinate width of the step support, or None if unbounded."""
        if self.is_lattice:
            s = self.support
            return s.max(axis=0) - s.min(axis=0)
        width = self.params.get("_range")
        return None if width is None else np.full(self.dim, float(width))

    def _require_lattice(self) -> None:
        if not self.is_lattice:
            raise DistributionError(
                f"{self.name}: continuous backend has no pmf; use Monte Carlo"
            )

    def to_spec(self) -> dict:
        return {"name": self.name, "params": _jsonable(self.params)}


@dataclass(frozen=True, eq=False)
class LatticePMF:
    """Dense law of S_k on the integer box ``origin + index``.

    ``mass`` is indexed by lattice coordinates offset by ``origin``; entries
    outside the true support are zero.
    """

    origin: np.ndarray
    mass: np.ndarray
    spacing: float
    step_count: int

    @property
    def dim(self) -> int:
        return self.mass.ndim

    def nonzero(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.argwhere(self.mass > 0)
        return idx + self.origin, self.mass[tuple(idx.T)]

    @property
    def support(self) -> np.ndarray:
        return self.nonzero()[0] * self.spacing

    @property
    def masses(self) -> np.ndarray:
        return self.nonzero()[1].astype(float)

    def as_dict(self) -> dict[tuple, float]:
        pts, m = self.nonzero()
        return {tuple(float(v) for v in p * self.spacing): float(w) for p, w in zip(pts, m)}

    def mean(self) -> np.ndarray:
        pts, m = self.nonzero()
        return (m.astype(float)[:, None] * pts * self.spacing).sum(axis=0)

    def cov(self) -> np.ndarray:
        pts, m = self.nonzero()
        x = pts * self.spacing
        mu = m.astype(float) @ x
        xc = x - mu
        return (m.astype(float)[:, None] * xc).T @ xc

    def float_mass(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=float)


# ---------------------------------------------------------------------------
# catalog


def _jsonable(params: Mapping[str, Any]) -> dict:
    out = {}
    for k, v in params.items():
        if k.startswith("_"):
            continue
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def _snap(points) -> tuple[np.ndarray, float]:
    """Put rational-ish support points on a common grid spacing * Z^d."""
    fr = [[Fraction(v).limit_denominator(10**6) for v in np.atleast_1d(p)] for p in points]
    denom = reduce(math.lcm, (q.denominator for row in fr for q in row), 1)
    num = reduce(math.gcd, (int(q * denom) for row in fr for q in row), 0) or 1
    ints = np.array([[int(q * denom) // num for q in row] for row in fr], dtype=np.int64)
    return ints, num / denom


def _lattice(name, points, probs, params) -> StepDistribution:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or np.any(probs < 0):
        raise DistributionError(f"{name}: probabilities must be a non-negative vector")
    if abs(probs.sum() - 1.0) > PROB_TOL:
        raise DistributionError(f"{name}: probabilities sum to {probs.sum()!r}, not 1")
    ints, h = _snap(points)
    if len(ints) != len(probs):
        raise DistributionError(f"{name}: {len(ints)} points but {len(probs)} probabilities")
    if len({tuple(r) for r in ints}) != len(ints):
        raise DistributionError(f"{name}: support points must be distinct")
    x = ints * h
    mean = probs @ x
    if np.any(np.abs(mean) > CENTER_TOL):
        raise DistributionError(f"{name}: mean {mean.tolist()} is not zero")
    cov = (probs[:, None] * x).T @ x
    _check_cov(name, cov)
    return StepDistribution(
        name=name, dim=ints.shape[1], kind="lattice", cov=cov, params=dict(params),
        points=ints, probs=probs, spacing=h,
    )


def _check_cov(name: str, cov: np.ndarray) -> None:
    if not np.allclose(cov, cov.T, atol=1e-14):
        raise DistributionError(f"{name}: covariance is not symmetric")
    if np.linalg.eigvalsh(cov).min() <= 1e-14:
        raise DistributionError(f"{name}: degenerate covariance")


def _gaussian(params) -> StepDistribution:
    cov = np.atleast_2d(np.asarray(params.get("cov", [[1.0]]), dtype=float))
    _check_cov("gaussian", cov)
    chol = np.linalg.cholesky(cov)
    d = cov.shape[0]

    def draw_sum(rng, k, size):
        return math.sqrt(k) * rng.standard_normal((size, d)) @ chol.T

    def moment(p):
        if d == 1:
            s = math.sqrt(cov[0, 0])
            return s**p * 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)
        lam = np.linalg.eigvalsh(cov)
        if np.allclose(lam, lam[0]):
            return lam[0] ** (p / 2) * 2 ** (p / 2) * special.gamma((d + p) / 2) / special.gamma(d / 2)
        if d == 2:
            # polar integral of r^p against the rotated density
            def radial(r):
                th = np.linspace(0.0, 2 * np.pi, 257)[:-1]
                q = (np.cos(th) ** 2 / lam[0] + np.sin(th) ** 2 / lam[1])
                dens = np.exp(-0.5 * r * r * q) / (2 * np.pi * math.sqrt(lam[0] * lam[1]))
                return r ** (p + 1) * dens.mean() * 2 * np.pi
            val, err = integrate.quad(radial, 0, np.inf, limit=200)
            return val
        raise DistributionError("gaussian moment: anisotropic d > 2 not supported")

    return StepDistribution(
        name="gaussian", dim=d, kind="continuous", cov=cov,
        params={"cov": cov.tolist()}, _draw=draw_sum, _abs_moment=moment,
    )


def _iid_sum(draw_one):
    def draw_sum(rng, k, size):
        acc = np.zeros(size)
        chunk = max(1, (1 << 22) // size)
        done = 0
        while done < k:
            m = min(chunk, k - done)
            acc += draw_one(rng, (size, m)).sum(axis=1)
            done += m
        return acc[:, None]
    return draw_sum


def _density_moment(density, lo, hi, tail_index):
    def moment(p):
        if p >= tail_index:
            return math.inf
        val, err = integrate.quad(lambda x: abs(x) ** p * density(x), lo, hi, limit=400)
        if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise DistributionError(f"moment integral did not converge (p={p}, err={err:g})")
        return 2 * val
    return moment


def _uniform(params) -> StepDistribution:
    a = float(params.get("half_width", math.sqrt(3.0)))
    if a <= 0:
        raise DistributionError("uniform: half_width must be positive")
    return StepDistribution(
        name="uniform", dim=1, kind="continuous", cov=np.array([[a * a / 3]]),
        params={"half_width": a, "_range": 2 * a},
        _draw=_iid_sum(lambda rng, shape: rng.uniform(-a, a, shape)),
        _abs_moment=lambda p: a**p / (p + 1),
    )


def _laplace(params) -> StepDistribution:
    b = float(params.get("scale", 1 / math.sqrt(2.0)))
    if b <= 0:
        raise DistributionError("laplace: scale must be positive")
    return StepDistribution(
        name="laplace", dim=1, kind="continuous", cov=np.array([[2 * b * b]]),
        params={"scale": b},
        _draw=_iid_sum(lambda rng, shape: rng.laplace(0.0, b, shape)),
        _abs_moment=_density_moment(lambda x: math.exp(-x / b) / (2 * b), 0.0, np.inf, math.inf),
    )


def _pareto_sym(params) -> StepDistribution:
    alpha = float(params.get("alpha", 2.5))
    if alpha <= 2:
        raise DistributionError("pareto_sym: alpha must exceed 2 for finite covariance")
    x0 = float(params.get("x0", math.sqrt((alpha - 2) / alpha)))
    if x0 <= 0:
        raise DistributionError("pareto_sym: x0 must be positive")

    def draw(rng, shape):
        mag = x0 * (1.0 - rng.random(shape)) ** (-1.0 / alpha)
        return np.where(rng.random(shape) < 0.5, -mag, mag)

    # density of |X| restricted to x >= x0, halved for the symmetric law
    def density(x):
        return 0.5 * alpha * x0**alpha * x ** (-alpha - 1)

    return StepDistribution(
        name="pareto_sym", dim=1, kind="continuous",
        cov=np.array([[alpha * x0 * x0 / (alpha - 2)]]),
        params={"alpha": alpha, "x0": x0}, tail_index=alpha,
        _draw=_iid_sum(draw), _abs_moment=_density_moment(density, x0, np.inf, alpha),
    )


def make_step_distribution(spec: Mapping[str, Any] | str) -> StepDistribution:
    """Build a catalog step law from ``{"name": ..., "params": {...}}``."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    params = dict(spec.get("params") or {})
    if name == "rademacher":
        return _lattice(name, [[-1], [1]], [0.5, 0.5], params)
    if name == "asym_lattice":
        return _lattice(name, [[-1], [2]], [2 / 3, 1 / 3], params)
    if name == "lazy_walk":
        lazy = float(params.get("hold", 0.5))
        if not 0 <= lazy < 1:
            raise DistributionError("lazy_walk: hold probability must lie in [0, 1)")
        return _lattice(name, [[-1], [0], [1]], [(1 - lazy) / 2, lazy, (1 - lazy) / 2], params)
    if name == "lattice2d_corr":
        # (+-1, +-1) and (+-1, 0) with equal weight: Sigma = [[1, 1/2], [1/2, 1/2]]
        return _lattice(name, [[1, 1], [-1, -1], [1, 0], [-1, 0]], [0.25] * 4, params)
    if name == "lattice":
        return _lattice(name, params.get("points", []), params.get("probs", []), params)
    if name == "gaussian":
        return _gaussian(params)
    if name == "uniform":
        return _uniform(params)
    if name == "laplace":
        return _laplace(params)
    if name == "pareto_sym":
        return _pareto_sym(params)
    raise DistributionError(f"unknown step distribution {name!r}")


CATALOG_LATTICE = ("rademacher", "asym_lattice", "lazy_walk", "lattice2d_corr")


# ---------------------------------------------------------------------------
# exact convolution


def _step_pmf(dist: StepDistribution) -> LatticePMF:
    dist._require_lattice()
    lo = dist.points.min(axis=0)
    shape = tuple(dist.points.max(axis=0) - lo + 1)
    mass = np.zeros(shape, dtype=np.longdouble)
    mass[tuple((dist.points - lo).T)] = dist.probs
    return LatticePMF(origin=lo, mass=mass, spacing=dist.spacing, step_count=1)


def _identity_pmf(dist: StepDistribution) -> LatticePMF:
    mass = np.ones((1,) * dist.dim, dtype=np.longdouble)
    return LatticePMF(origin=np.zeros(dist.dim, dtype=np.int64), mass=mass,
                      spacing=dist.spacing, step_count=0)


def convolve_pmfs(a: LatticePMF, b: LatticePMF) -> LatticePMF:
    """Direct (non-FFT) convolution, accumulated in extended precision."""
    if not math.isclose(a.spacing, b.spacing, rel_tol=1e-15):
        raise DistributionError("pmfs live on different lattices")
    if np.count_nonzero(a.mass) < np.count_nonzero(b.mass):
        a, b = b, a
    shape = tuple(sa + sb - 1 for sa, sb in zip(a.mass.shape, b.mass.shape))
    out = np.zeros(shape, dtype=np.longdouble)
    big = a.mass.astype(np.longdouble, copy=False)
    for idx in np.argwhere(b.mass != 0):
        sl = tuple(slice(i, i + s) for i, s in zip(idx, big.shape))
        out[sl] += b.mass[tuple(idx)] * big
    return LatticePMF(origin=a.origin + b.origin, mass=out, spacing=a.spacing,
                      step_count=a.step_count + b.step_count)


def iter_powers(dist: StepDistribution, kmax: int, budget: int = DEFAULT_BUDGET):
    """Yield the laws of S_0, S_1, ..., S_kmax in order."""
    step = _step_pmf(dist)
    width = np.array(step.mass.shape) - 1
    if np.prod(width * kmax + 1) > budget:
        raise BudgetExceeded(f"{dist.name}: support of S_{kmax} exceeds the budget {budget}")
    cur = _identity_pmf(dist)
    yield cur
    for _ in range(kmax):
        cur = convolve_pmfs(cur, step)
        yield cur


def convolve_power(dist: StepDistribution, k: int, budget: int = DEFAULT_BUDGET) -> LatticePMF:
    """Exact law of S_k for a lattice step law."""
    dist._require_lattice()
    if k < 0:
        raise DistributionError("k must be non-negative")
    support = len(dist.probs)
    if k * support > budget:
        raise BudgetExceeded(f"k * |support| = {k * support} exceeds budget {budget}")
    cur = None
    for cur in iter_powers(dist, k, budget=budget):
        pass
    return cur


# ---------------------------------------------------------------------------
# sampling and moments


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), block])))


def _sample_block(dist: StepDistribution, k: int, size: int, rng) -> np.ndarray:
    if dist.is_lattice:
        counts = rng.multinomial(k, dist.probs, size=size)
        return (counts @ dist.points) * dist.spacing
    return dist._draw(rng, k, size)


def sample_walk(dist: StepDistribution, k: int, N: int, seed: int, block: int = SAMPLE_BLOCK) -> np.ndarray:
    """N independent endpoints S_k as an (N, d) array.

    Samples come in fixed-size blocks, each with its own Philox stream keyed by
    (seed, block index), so output depends only on (seed, N, k).
    """
    if N < 1:
        raise DistributionError("N must be at least 1")
    if k == 0:
        return np.zeros((N, dist.dim))
    out = np.empty((N, dist.dim))
    for b, start in enumerate(range(0, N, block)):
        size = min(block, N - start)
        out[start:start + size] = _sample_block(dist, k, size, _block_rng(seed, b))
    return out


def iter_walk_blocks(dist: StepDistribution, k: int, N: int, seed: int, block: int = SAMPLE_BLOCK):
    """Same samples as :func:`sample_walk`, yielded block by block."""
    if k == 0:
        yield np.zeros((N, dist.dim))
        return
    for b, start in enumerate(range(0, N, block)):
        size = min(block, N - start)
        yield _sample_block(dist, k, size, _block_rng(seed, b))


def moment_abs(dist: StepDistribution, p: float) -> float:
    """E|X_1|^p (Euclidean norm); +inf when the moment diverges."""
    if p < 0:
        raise DistributionError("p must be non-negative")
    if dist.is_lattice:
        norms = np.linalg.norm(dist.support, axis=1)
        return float(math.fsum(w * r**p for w, r in zip(dist.probs, norms)))
    return float(dist._abs_moment(p))
