"""Test functions with analytic derivatives up to order four.

The closed-form families are sums of (possibly complex-centred) Gaussian
atoms and quadratic polynomials; both stay in their family under Gaussian
convolution, so the heat flow of a catalog function is again a catalog
function. Anything else is mollified by tensor Gauss-Hermite quadrature.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import optimize

MAX_ORDER = 4
VANISHING = "vanishing"
BOUNDED = "bounded-uniformly-continuous"
NONDECAYING = "test-only-nondecaying"


class TestFunctionError(ValueError):
    __test__ = False


def as_alpha(alpha, dim: int) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != dim or any(a < 0 for a in alpha):
        raise TestFunctionError(f"multi-index {alpha} does not fit dimension {dim}")
    if sum(alpha) > MAX_ORDER:
        raise TestFunctionError(f"|alpha| = {sum(alpha)} exceeds {MAX_ORDER}")
    return alpha


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """All multi-indices with |alpha| == order."""
    return [a for a in itertools.product(range(order + 1), repeat=dim) if sum(a) == order]


def _axes(alpha: Sequence[int]) -> tuple[int, ...]:
    return tuple(i for i, a in enumerate(alpha) for _ in range(a))


@lru_cache(maxsize=None)
def _matchings(n: int) -> tuple[tuple[tuple[tuple[int, int], ...], tuple[int, ...]], ...]:
    """Partial matchings of positions 0..n-1 as (pairs, singles)."""
    if n == 0:
        return (((), ()),)
    out = []
    for pairs, singles in _matchings(n - 1):
        out.append((pairs, singles + (n - 1,)))
        for s in singles:
            rest = tuple(v for v in singles if v != s)
            out.append((pairs + ((s, n - 1),), rest))
    return tuple(out)


def _points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise TestFunctionError(f"points of shape {x.shape} do not have dimension {dim}")
    return x


class TestFunction:
    """Base class. Subclasses implement ``_deriv(axes, x)`` on (..., d) arrays."""

    __test__ = False

    name: str = "f"
    dim: int = 1
    decay: str = VANISHING
    smoothness: int = MAX_ORDER
    closed_form: bool = True

    def __init__(self):
        self._norm_cache: dict[tuple[int, ...], float] = {}

    # -- evaluation -------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        return self.deriv((0,) * self.dim, x)

    def deriv(self, alpha, x) -> np.ndarray:
        alpha = as_alpha(alpha, self.dim)
        if sum(alpha) > self.smoothness:
            raise TestFunctionError(f"{self.name} has only {self.smoothness} derivatives")
        return self._deriv(_axes(alpha), _points(x, self.dim))

    def hessian_trace(self, x, cov) -> np.ndarray:
        """tr(cov D^2 f)(x)."""
        cov = np.atleast_2d(cov)
        out = 0.0
        for i in range(self.dim):
            for j in range(self.dim):
                if cov[i, j] != 0:
                    a = [0] * self.dim
                    a[i] += 1
                    a[j] += 1
                    out = out + cov[i, j] * self.deriv(a, x)
        return np.asarray(out)

    # -- envelopes ----------------------------------------------------------
    def envelope(self, order: int, r: float) -> float:
        """Upper bound for sup_{|x| >= r} |d^alpha f(x)| over |alpha| == order."""
        return math.inf

    def vanish_radius(self, tol: float, order: int = 0) -> float:
        """Smallest tabulated radius beyond which |d^alpha f| <= tol."""
        if self.envelope(order, 0.0) <= tol:
            return 0.0
        r = 0.5
        while self.envelope(order, r) > tol:
            r *= 1.25
            if r > 1e8:
                raise TestFunctionError(f"{self.name}: no decay envelope below {tol:g}")
        lo, hi = r / 1.25, r
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if self.envelope(order, mid) <= tol else (mid, hi)
        return hi

    # -- norms --------------------------------------------------------------
    def _unbounded(self, alpha) -> bool:
        return False

    def grid_step(self) -> float:
        if self.dim == 1:
            return 1e-3
        return 2e-2 if self.closed_form else 1e-1

    def sup_abs_deriv(self, alpha) -> float:
        """Certified-by-envelope grid maximum of |d^alpha f|, locally polished."""
        alpha = as_alpha(alpha, self.dim)
        if alpha in self._norm_cache:
            return self._norm_cache[alpha]
        if sum(alpha) > self.smoothness or self._unbounded(alpha):
            val = math.inf
        else:
            val = _certified_sup(self, alpha, self.grid_step())
        self._norm_cache[alpha] = val
        return val

    def ck_norm(self, k: int) -> float:
        return ck_norm(self, k)

    def spec(self) -> dict:
        return {"name": self.name, "params": dict(getattr(self, "params", {}))}


def _certified_sup(f: TestFunction, alpha, step: float) -> float:
    order = sum(alpha)
    R = 1.0
    while True:
        axis = np.arange(-R, R + step / 2, step)
        if f.dim == 1:
            pts = axis[:, None]
        else:
            mesh = np.meshgrid(*([axis] * f.dim), indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            pts = pts[np.linalg.norm(pts, axis=1) <= R + step]
        vals = np.abs(_chunked(f, alpha, pts))
        gmax = float(vals.max())
        if f.envelope(order, R) <= gmax or gmax == 0.0 and f.envelope(order, R) == 0.0:
            break
        R *= 1.5
        if R > 1e4:
            raise TestFunctionError(f"{f.name}: envelope never drops below the grid maximum")
    best = gmax
    top = np.argsort(vals)[-5:]
    obj = lambda y: -abs(float(f.deriv(alpha, np.asarray(y)[None, :])[0]))
    for i in top:
        x0 = pts[i]
        if f.dim == 1:
            res = optimize.minimize_scalar(lambda s: obj([s]), bounds=(x0[0] - step, x0[0] + step),
                                           method="bounded", options={"xatol": 1e-12})
        else:
            res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-15})
        best = max(best, -float(res.fun))
    return best


def _chunked(f: TestFunction, alpha, pts: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    chunk = max(1, chunk // getattr(f, "quad_size", 1))
    return np.concatenate([f.deriv(alpha, pts[i:i + chunk]) for i in range(0, len(pts), chunk)])


def ck_norm(f: TestFunction, k: int) -> float:
    """sum over |alpha| <= k of sup |d^alpha f|; +inf when any term is unbounded."""
    if not 0 <= k <= MAX_ORDER:
        raise TestFunctionError(f"C^k norm requested for k={k}; only k <= {MAX_ORDER}")
    total = 0.0
    for order in range(k + 1):
        for alpha in multi_indices(f.dim, order):
            total += f.sup_abs_deriv(alpha)
            if math.isinf(total):
                return math.inf
    return total


def eval_deriv(f: TestFunction, alpha, x) -> np.ndarray:
    return f.deriv(alpha, x)


# ---------------------------------------------------------------------------
# Gaussian atoms


@dataclass(frozen=True)
class Atom:
    """w * exp(-(x - c)^T P (x - c) / 2) with P = inv(B); real part is taken."""

    weight: complex
    center: np.ndarray  # complex (d,)
    B: np.ndarray  # real SPD (d, d)

    @property
    def P(self) -> np.ndarray:
        return np.linalg.inv(self.B)


class GaussianAtoms(TestFunction):
    def __init__(self, atoms: Sequence[Atom], name: str, params: Mapping[str, Any]):
        super().__init__()
        self.atoms = tuple(atoms)
        self.dim = len(self.atoms[0].center)
        self.name = name
        self.params = dict(params)

    def _deriv(self, axes, x):
        out = np.zeros(x.shape[:-1])
        for atom in self.atoms:
            P = atom.P
            z = x - atom.center
            q = z @ P
            g = atom.weight * np.exp(-0.5 * np.einsum("...i,...i->...", q, z))
            poly = 0.0
            for pairs, singles in _matchings(len(axes)):
                term = 1.0
                for a, b in pairs:
                    term = term * -P[axes[a], axes[b]]
                for s in singles:
                    term = term * -q[..., axes[s]]
                poly = poly + term
            out = out + np.real(g * poly)
        return out

    def envelope(self, order, r):
        nmatch = len(_matchings(order))
        total = 0.0
        for atom in self.atoms:
            P = atom.P
            m, y = np.real(atom.center), np.imag(atom.center)
            pn = float(np.linalg.norm(P, 2))
            lam = float(np.linalg.eigvalsh(P).min())
            shift = float(np.linalg.norm(m))
            rr = max(r - shift, 0.0)
            qmax = pn * (r + shift + float(np.linalg.norm(y)))
            growth = math.exp(0.5 * float(y @ P @ y))
            total += (abs(atom.weight) * growth * nmatch * max(pn, 1.0) ** order
                      * max(qmax, 1.0) ** order * math.exp(-0.5 * lam * rr * rr))
        return total

    def mollified(self, t, cov):
        atoms = []
        for atom in self.atoms:
            B2 = atom.B + t * cov
            w = atom.weight * math.sqrt(np.linalg.det(atom.B) / np.linalg.det(B2))
            atoms.append(Atom(w, atom.center, B2))
        return GaussianAtoms(atoms, f"{self.name}^t", {**self.params, "t": t})


def gauss_bump(a: float = 1.0, dim: int = 1, scales=None) -> GaussianAtoms:
    """exp(-|x|^2 / (2 a^2)), or a tensor bump with per-axis scales."""
    if scales is None:
        scales = np.full(dim, float(a))
        params = {"a": float(a), "dim": dim}
    else:
        scales = np.asarray(scales, dtype=float)
        params = {"scales": scales.tolist()}
    if np.any(scales <= 0):
        raise TestFunctionError("gauss_bump: scales must be positive")
    atom = Atom(1.0 + 0j, np.zeros(len(scales), dtype=complex), np.diag(scales**2))
    return GaussianAtoms([atom], "gauss_bump", params)


def sine_bump(omega: float = 1.0, dim: int = 1, a: float = 1.0) -> GaussianAtoms:
    """sin(omega x_1) exp(-|x|^2 / (2 a^2))."""
    c = np.zeros(dim, dtype=complex)
    c[0] = 1j * omega * a * a
    w = -1j * math.exp(-0.5 * omega * omega * a * a)
    atom = Atom(w, c, np.eye(dim) * a * a)
    return GaussianAtoms([atom], "sine_bump", {"omega": omega, "dim": dim, "a": a})


# ---------------------------------------------------------------------------
# quadratic polynomials (test-only unless constant)


class Quadratic(TestFunction):
    """c + b.x + x^T Q x."""

    def __init__(self, c=0.0, b=None, Q=None, dim: int = 1, name: str = "quadratic"):
        super().__init__()
        self.dim = dim
        self.c = float(c)
        self.b = np.zeros(dim) if b is None else np.asarray(b, dtype=float)
        self.Q = np.zeros((dim, dim)) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
        self.Q = 0.5 * (self.Q + self.Q.T)
        self.name = name
        self.params = {"c": self.c, "b": self.b.tolist(), "Q": self.Q.tolist(), "dim": dim}
        self.is_constant = not (np.any(self.b) or np.any(self.Q))
        self.decay = BOUNDED if self.is_constant else NONDECAYING

    def _deriv(self, axes, x):
        shape = x.shape[:-1]
        if len(axes) == 0:
            return self.c + x @ self.b + np.einsum("...i,ij,...j->...", x, self.Q, x)
        if len(axes) == 1:
            i = axes[0]
            return np.broadcast_to(self.b[i] + 2 * x @ self.Q[i], shape).copy()
        if len(axes) == 2:
            return np.full(shape, 2 * self.Q[axes[0], axes[1]])
        return np.zeros(shape)

    def _unbounded(self, alpha):
        order = sum(alpha)
        if order == 0:
            return not self.is_constant
        if order == 1:
            return bool(np.any(self.Q[_axes(alpha)[0]]))
        return False

    def sup_abs_deriv(self, alpha):
        alpha = as_alpha(alpha, self.dim)
        if self._unbounded(alpha):
            return math.inf
        order = sum(alpha)
        if order == 0:
            return abs(self.c)
        if order == 1:
            return abs(self.b[_axes(alpha)[0]])
        if order == 2:
            ax = _axes(alpha)
            return abs(2 * self.Q[ax[0], ax[1]])
        return 0.0

    def envelope(self, order, r):
        if self.is_constant:
            return abs(self.c) if order == 0 else 0.0
        return math.inf

    def mollified(self, t, cov):
        return Quadratic(self.c + t * float(np.trace(self.Q @ cov)), self.b, self.Q,
                         self.dim, f"{self.name}^t")


def constant(c: float = 1.0, dim: int = 1) -> Quadratic:
    return Quadratic(c=c, dim=dim, name="constant")


# ---------------------------------------------------------------------------
# product of Lorentzians: smooth, polynomial decay, no Gaussian closed form

_LOR_POLY = [
    np.polynomial.Polynomial([1.0]),
    np.polynomial.Polynomial([0.0, -2.0]),
    np.polynomial.Polynomial([-2.0, 0.0, 6.0]),
    np.polynomial.Polynomial([0.0, 24.0, 0.0, -24.0]),
    np.polynomial.Polynomial([24.0, 0.0, -240.0, 0.0, 120.0]),
]
_LOR_COEF = [float(np.abs(p.coef).sum()) for p in _LOR_POLY]


class LorentzProduct(TestFunction):
    """prod_i 1 / (1 + (x_i / a)^2); d^j of 1/(1+y^2) is P_j(y) / (1+y^2)^(j+1)."""

    closed_form = False

    def __init__(self, a: float = 1.0, dim: int = 1):
        super().__init__()
        if a <= 0:
            raise TestFunctionError("lorentz: a must be positive")
        self.a = float(a)
        self.dim = dim
        self.name = "lorentz"
        self.params = {"a": self.a, "dim": dim}

    def _deriv(self, axes, x):
        y = x / self.a
        out = np.ones(x.shape[:-1])
        for i in range(self.dim):
            j = axes.count(i)
            yi = y[..., i]
            out = out * _LOR_POLY[j](yi) / (1 + yi * yi) ** (j + 1) / self.a**j
        return out

    def envelope(self, order, r):
        best = 0.0
        for alpha in multi_indices(self.dim, order):
            for i in range(self.dim):
                far = (r / math.sqrt(self.dim)) / self.a
                val = _LOR_COEF[alpha[i]] / (1 + far * far) ** (alpha[i] / 2 + 1)
                for l in range(self.dim):
                    if l != i:
                        val *= _LOR_COEF[alpha[l]]
                best = max(best, val / self.a**order)
        return best


# ---------------------------------------------------------------------------
# quadrature-backed mollification


@lru_cache(maxsize=None)
def hermite_nodes(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite rule for E[g(Z)], Z ~ N(0, I_dim)."""
    z, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / math.sqrt(2 * math.pi)
    nodes = np.array(list(itertools.product(z, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


class Mollified(TestFunction):
    """x -> E[f(x + sqrt(t) xi)], xi ~ N(0, cov), by differentiating under the rule."""

    closed_form = False

    def __init__(self, base: TestFunction, t: float, cov, order: int = 64):
        super().__init__()
        self.base = base
        self.t = float(t)
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.order = order
        self.dim = base.dim
        self.name = f"{base.name}^t"
        self.params = {**getattr(base, "params", {}), "t": self.t}
        self.decay = VANISHING if base.decay == VANISHING else BOUNDED
        self.smoothness = base.smoothness
        z, w = hermite_nodes(order, self.dim)
        self._offsets = math.sqrt(self.t) * z @ np.linalg.cholesky(self.cov).T
        self._weights = w
        self.quad_size = len(w)

    def _deriv(self, axes, x):
        alpha = tuple(axes.count(i) for i in range(self.dim))
        y = x[..., None, :] + self._offsets
        return self.base.deriv(alpha, y) @ self._weights

    def envelope(self, order, r):
        rho = r / 2
        lam = float(np.linalg.eigvalsh(self.cov).max())
        tail = min(1.0, 2 * self.dim * math.exp(-rho * rho / (2 * self.dim * self.t * lam)))
        norms = max(self.base.sup_abs_deriv(a) for a in multi_indices(self.dim, order))
        return self.base.envelope(order, r - rho) + norms * tail


def mollify(f: TestFunction, t: float, cov, order: int = 64) -> TestFunction:
    """f^t = u_f(., t): closed form for catalog families, quadrature otherwise."""
    if t <= 0:
        raise TestFunctionError("mollify needs t > 0")
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if f.decay == NONDECAYING and not isinstance(f, Quadratic):
        raise TestFunctionError("mollify needs a bounded f")
    if hasattr(f, "mollified"):
        return f.mollified(t, cov)
    return Mollified(f, t, cov, order)


# ---------------------------------------------------------------------------
# catalog


def make_test_function(spec: Mapping[str, Any] | str, dim: int | None = None) -> TestFunction:
    """Build from ``{"name": ..., "params": {...}}``; ``dim`` fills a missing dimension."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    p = dict(spec.get("params") or {})
    d = int(p.get("dim", dim or 1))
    if name == "gauss_bump":
        if "scales" in p:
            return gauss_bump(scales=p["scales"])
        return gauss_bump(float(p.get("a", 1.0)), d)
    if name == "tensor_bump":
        return gauss_bump(scales=p.get("scales", [1.0] * d))
    if name == "sine_bump":
        return sine_bump(float(p.get("omega", 1.0)), d, float(p.get("a", 1.0)))
    if name == "lorentz":
        return LorentzProduct(float(p.get("a", 1.0)), d)
    if name == "constant":
        return constant(float(p.get("c", 1.0)), d)
    if name in ("quadratic", "square"):
        if name == "square":
            return Quadratic(Q=np.eye(d), dim=d, name="square")
        return Quadratic(p.get("c", 0.0), p.get("b"), p.get("Q"), d)
    raise TestFunctionError(f"unknown test function {name!r}")
