"""Linear connections given by per-chart Christoffel fields.

Convention: ``gamma(y, u, v)`` is the vector ``Gamma(y)(u)(v)`` whose k-th
component is ``sum_ij G[k, i, j] u_i v_j``.  With this convention geodesics
satisfy ``c'' + Gamma(c)(c')(c') = 0`` and the classical Levi-Civita symbols
are compatible across overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import SmoothMap2, as_vector, eval_map2
from .errors import ChartMismatchError, DomainError, SingularDifferentialError

Action = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _everywhere(y) -> bool:
    return True


@dataclass(frozen=True)
class ChristoffelField:
    """Christoffel symbols of one chart, stored as a bilinear action."""

    chart_id: str
    dim: int
    action: Action = field(repr=False)
    domain: Callable[[np.ndarray], bool] = field(default=_everywhere, repr=False)
    name: str = "gamma"

    def __call__(self, y, u, v) -> np.ndarray:
        n = self.dim
        y = as_vector(y, n, "point")
        if not self.domain(y):
            raise DomainError(f"point {y.tolist()} is outside the chart image of {self.chart_id!r}")
        return as_vector(self.action(y, as_vector(u, n, "u"), as_vector(v, n, "v")), n, f"{self.name} value")

    def tensor(self, y) -> np.ndarray:
        """Components ``G[k, i, j]`` at ``y`` from basis evaluations."""
        eye = np.eye(self.dim)
        G = np.empty((self.dim, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                G[:, i, j] = self(y, eye[i], eye[j])
        return G

    def symmetrized(self) -> ChristoffelField:
        act = self.action
        return ChristoffelField(
            self.chart_id, self.dim, lambda y, u, v: 0.5 * (act(y, u, v) + act(y, v, u)), self.domain, f"sym({self.name})"
        )

    def perturbed(self, k: int, i: int, j: int, delta: float) -> ChristoffelField:
        """Copy with ``G[k, i, j]`` shifted by ``delta`` everywhere."""
        act = self.action

        def shifted(y, u, v):
            out = np.array(act(y, u, v), dtype=float)
            out[k] += delta * u[i] * v[j]
            return out

        return ChristoffelField(self.chart_id, self.dim, shifted, self.domain, f"{self.name}+{delta}e[{k},{i},{j}]")

    @classmethod
    def from_tensor(cls, chart_id: str, dim: int, tensor: Callable[[np.ndarray], np.ndarray], domain=_everywhere, name="gamma"):
        return cls(chart_id, dim, lambda y, u, v: np.einsum("kij,i,j->k", tensor(y), u, v), domain, name)

    @classmethod
    def zero(cls, chart_id: str, dim: int, domain=_everywhere):
        return cls(chart_id, dim, lambda y, u, v: np.zeros(dim), domain, "flat")


@dataclass(frozen=True)
class LocalConnectionMap:
    """The local form ``D(y, u, v, w) = (y, w + Gamma(y)(u)(v))``."""

    christoffel: ChristoffelField

    @property
    def chart_id(self) -> str:
        return self.christoffel.chart_id

    def __call__(self, y, u, v, w):
        return vilms_local(self.christoffel, y, u, v, w)


def vilms_local(gamma: ChristoffelField, y, u, v, w) -> tuple[np.ndarray, np.ndarray]:
    y = as_vector(y, gamma.dim, "point")
    w = as_vector(w, gamma.dim, "w")
    return y, w + gamma(y, u, v)


def compat_residual(gamma_alpha: ChristoffelField, gamma_beta: ChristoffelField, sigma: SmoothMap2, y, u, v) -> np.ndarray:
    """Defect of the compatibility condition at ``(y, u, v)``, ``y`` in beta coordinates.

    ``Gamma_a(s(y))(ds u)(ds v) + d2s(y)(v, u) - ds(y)(Gamma_b(y)(u)(v))``
    """
    if sigma.source is not None and sigma.source != gamma_beta.chart_id:
        raise ChartMismatchError(f"{sigma.name} starts at {sigma.source!r}, field lives in {gamma_beta.chart_id!r}")
    if sigma.target is not None and sigma.target != gamma_alpha.chart_id:
        raise ChartMismatchError(f"{sigma.name} ends at {sigma.target!r}, field lives in {gamma_alpha.chart_id!r}")
    z, dv, d2vu = eval_map2(sigma, y, v, u)
    du = sigma.differential(y, u)
    gb = gamma_beta(y, u, v)
    return gamma_alpha(z, du, dv) + d2vu - sigma.differential(y, gb)


def worst_compat_residual(gamma_alpha, gamma_beta, sigma, points, rng: np.random.Generator, directions: int = 4):
    """Largest compatibility defect over ``points`` with basis and random directions.

    Returns ``(residual, point)``; the residual is normalised by ``1 + |Gamma_b(y)(u)(v)|``.
    """
    n = sigma.domain_dim
    eye = np.eye(n)
    worst, where = 0.0, None
    for y in points:
        pairs = [(eye[i], eye[j]) for i in range(n) for j in range(n)]
        pairs += [tuple(rng.standard_normal((2, n))) for _ in range(directions)]
        for u, v in pairs:
            r = compat_residual(gamma_alpha, gamma_beta, sigma, y, u, v)
            scale = 1.0 + float(np.linalg.norm(gamma_beta(y, u, v)))
            res = float(np.linalg.norm(r)) / scale
            if res > worst or where is None:
                worst, where = max(res, worst), tuple(np.asarray(y).tolist())
    return worst, where


def _checked_inverse(J: np.ndarray, y) -> np.ndarray:
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
        raise SingularDifferentialError(f"differential is singular at {np.asarray(y).tolist()}", point=tuple(np.asarray(y).tolist()))
    return np.linalg.inv(J)


def pushforward_christoffel(
    gamma_beta: ChristoffelField, sigma: SmoothMap2, inverse: SmoothMap2, chart_id: str | None = None
) -> ChristoffelField:
    """Christoffel field in the target chart of ``sigma`` compatible with ``gamma_beta``.

    ``inverse`` is the opposite transition, used to locate the beta point of
    an alpha point.  The compatibility condition solved for the alpha field:
    ``Gamma_a(s(y))(U)(V) = ds(Gamma_b(y)(u)(v)) - d2s(y)(v, u)`` with
    ``u = ds^{-1} U`` and ``v = ds^{-1} V``.
    """
    target = chart_id or sigma.target or f"{gamma_beta.chart_id}*"

    def action(z, U, V):
        y = inverse(z)
        Jinv = _checked_inverse(sigma.jacobian(y), y)
        u, v = Jinv @ U, Jinv @ V
        return sigma.differential(y, gamma_beta(y, u, v)) - sigma.second(y, v, u)

    return ChristoffelField(target, sigma.codomain_dim, action, inverse.domain, f"push({gamma_beta.name})")


def metric_to_christoffel(metric: Callable[[np.ndarray], np.ndarray], y, step: float = 1e-5) -> np.ndarray:
    """Levi-Civita symbols ``G[k, i, j]`` of ``metric`` at ``y``.

    Metric derivatives come from central differences with ``step``.
    """
    y = as_vector(y)
    n = y.shape[0]
    g = np.asarray(metric(y), dtype=float)
    if g.shape != (n, n):
        raise ValueError(f"metric at a point of dim {n} has shape {g.shape}")
    eig = np.linalg.eigvalsh(0.5 * (g + g.T))
    if eig[0] <= 0 or eig[-1] / eig[0] > 1e12:
        raise SingularDifferentialError(f"metric is not positive definite at {y.tolist()}", point=tuple(y.tolist()))
    ginv = np.linalg.inv(g)
    # dg[l, i, j] = d g_ij / d y_l
    dg = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = step
        dg[l] = (np.asarray(metric(y + e)) - np.asarray(metric(y - e))) / (2.0 * step)
    # lowered[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    lowered = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, lowered)


def levi_civita_field(chart_id: str, dim: int, metric, domain=_everywhere, step: float = 1e-5) -> ChristoffelField:
    def tensor(y):
        return metric_to_christoffel(metric, y, step)

    return ChristoffelField.from_tensor(chart_id, dim, tensor, domain, f"levi-civita[{chart_id}]")


def bilinearity_defect(gamma: ChristoffelField, y, rng: np.random.Generator, trials: int = 4) -> float:
    """Worst violation of additivity/homogeneity in each slot, relative to 1 + |terms|."""
    n = gamma.dim
    worst = 0.0
    for _ in range(trials):
        u, u2, v, v2 = rng.standard_normal((4, n))
        a, b = rng.standard_normal(2)
        terms = [
            (gamma(y, a * u + b * u2, v), a * gamma(y, u, v) + b * gamma(y, u2, v)),
            (gamma(y, u, a * v + b * v2), a * gamma(y, u, v) + b * gamma(y, u, v2)),
        ]
        for lhs, rhs in terms:
            worst = max(worst, float(np.linalg.norm(lhs - rhs)) / (1.0 + float(np.linalg.norm(rhs))))
    return worst
