"""Reference heat flow u(x, t) = E[f(x + sqrt(t) xi)], xi ~ N(0, cov)."""
from __future__ import annotations

import math

import numpy as np

from .testfn import (MAX_ORDER, TestFunction, TestFunctionError, _points, as_alpha,
                     hermite_nodes, mollify)

DEFAULT_QUAD_ORDER = 64
DEFAULT_TOL = 1e-10


class QuadratureError(RuntimeError):
    pass


class HeatReference:
    """Solution of d_t u = tr(cov D^2 u) / 2 with u(., 0) = f.

    Catalog families (Gaussian atoms, quadratics) are closed under the heat
    flow and are evaluated exactly; anything else goes through a tensor
    Gauss-Hermite rule after Cholesky whitening of ``cov``.
    """

    def __init__(self, f: TestFunction, cov, quad_order: int = DEFAULT_QUAD_ORDER,
                 tol: float = DEFAULT_TOL, backend: str | None = None):
        self.f = f
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if self.cov.shape != (f.dim, f.dim):
            raise ValueError(f"covariance shape {self.cov.shape} does not match dimension {f.dim}")
        self.chol = np.linalg.cholesky(self.cov)
        self.quad_order = int(quad_order)
        self.tol = float(tol)
        if backend is None:
            backend = "closed-form" if hasattr(f, "mollified") else "quadrature"
        if backend == "closed-form" and not hasattr(f, "mollified"):
            raise ValueError(f"{f.name} has no closed-form heat flow")
        if backend == "quadrature" and f.dim > 3:
            raise ValueError("quadrature backend supports d <= 3")
        self.backend = backend
        self._flows: dict[float, TestFunction] = {}

    @property
    def dim(self) -> int:
        return self.f.dim

    def flow(self, t: float) -> TestFunction:
        """u(., t) as a test function (closed form only)."""
        if t == 0:
            return self.f
        g = self._flows.get(t)
        if g is None:
            g = mollify(self.f, t, self.cov)
            if len(self._flows) > 4096:
                self._flows.clear()
            self._flows[t] = g
        return g

    def deriv(self, alpha, x, t: float) -> np.ndarray:
        """d^alpha u(x, t) in the space variables."""
        if t < 0:
            raise ValueError("t must be non-negative")
        alpha = as_alpha(alpha, self.dim)
        if t == 0:
            return self.f.deriv(alpha, x)
        if self.backend == "closed-form":
            return self.flow(t).deriv(alpha, x)
        val, err = self._quad(alpha, x, t)
        if np.max(err, initial=0.0) > self.tol:
            raise QuadratureError(
                f"Gauss-Hermite order {self.quad_order} misses tol {self.tol:g} "
                f"(estimated error {np.max(err):.3g}); raise heat.quad_order"
            )
        return val

    def quad_error(self, alpha, x, t: float) -> np.ndarray:
        """Difference between the order-q and order-3q/4 rules (error estimate)."""
        return self._quad(as_alpha(alpha, self.dim), x, t)[1]

    def _quad(self, alpha, x, t):
        x = _points(x, self.dim)
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        vals = []
        for q in (self.quad_order, self.quad_order - self.quad_order // 4):
            z, w = hermite_nodes(q, self.dim)
            off = math.sqrt(t) * z @ self.chol.T
            out = np.empty(len(flat))
            step = max(1, 200_000 // len(w))
            for i in range(0, len(flat), step):
                out[i:i + step] = self.f.deriv(alpha, flat[i:i + step, None, :] + off) @ w
            vals.append(out)
        return vals[0].reshape(shape), np.abs(vals[0] - vals[1]).reshape(shape)

    def value(self, x, t: float) -> np.ndarray:
        return self.deriv((0,) * self.dim, x, t)

    def hessian_trace(self, x, t: float) -> np.ndarray:
        """tr(cov D^2 u(x, t))."""
        if self.f.smoothness < 2:
            raise TestFunctionError(f"{self.f.name} is not C^2")
        out = 0.0
        for i in range(self.dim):
            for j in range(self.dim):
                if self.cov[i, j] != 0:
                    a = [0] * self.dim
                    a[i] += 1
                    a[j] += 1
                    out = out + self.cov[i, j] * self.deriv(a, x, t)
        return np.asarray(out)

    def pde_residual(self, x, t: float, h: float) -> np.ndarray:
        """Central time difference of u minus the half-trace generator."""
        if t - h <= 0:
            raise ValueError("pde_residual needs t - h > 0")
        dt = (self.value(x, t + h) - self.value(x, t - h)) / (2 * h)
        return dt - 0.5 * self.hessian_trace(x, t)

    def semigroup_check(self, x, t: float, h: float) -> float:
        """|E[u(x + sqrt(h) xi', t)] - u(x, t + h)| with xi' integrated by quadrature."""
        if h == 0:
            return 0.0
        x = np.asarray(x, dtype=float).reshape(self.dim)
        z, w = hermite_nodes(self.quad_order, self.dim)
        pts = x + math.sqrt(h) * z @ self.chol.T
        lhs = float(self.value(pts, t) @ w)
        return abs(lhs - float(np.squeeze(self.value(x, t + h))))


def heat_value(ref: HeatReference, x, t: float):
    return ref.value(x, t)


def heat_hessian_trace(ref: HeatReference, x, t: float):
    return ref.hessian_trace(x, t)


def pde_residual(ref: HeatReference, x, t: float, h: float):
    return ref.pde_residual(x, t, h)


def semigroup_check(ref: HeatReference, x, t: float, h: float) -> float:
    return ref.semigroup_check(x, t, h)


__all__ = [
    "HeatReference", "QuadratureError", "heat_value", "heat_hessian_trace",
    "pde_residual", "semigroup_check", "MAX_ORDER",
]
