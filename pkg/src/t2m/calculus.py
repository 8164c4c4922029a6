"""Smooth maps known to second order, the order-2 chain rule and an FD oracle.

A :class:`SmoothMap2` never stores Jacobian or Hessian tensors.  It wraps an
evaluator ``(y, u, v) -> (value, first, second)`` returning ``sigma(y)``,
``d sigma(y) u`` and ``d2 sigma(y)(u, v)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .hyperdual import HyperDual, parts

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]
Predicate = Callable[[np.ndarray], bool]


def _everywhere(y: np.ndarray) -> bool:
    return True


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Return ``x`` as a read-only 1-d float array, checking its length."""
    arr = np.array(x, dtype=float).reshape(-1) if np.ndim(x) <= 1 else None
    if arr is None:
        raise ShapeError(f"{name} must be one-dimensional, got shape {np.shape(x)}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"{name} has {arr.shape[0]} entries, expected {dim}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"model space dimension must be a positive integer, got {self.dim}")


@dataclass(frozen=True)
class SmoothMap2:
    """A map between open subsets of model spaces, evaluable to order two.

    ``source`` and ``target`` optionally name the charts the map relates;
    transitions built by :mod:`t2m.atlas` always set them.
    """

    domain_dim: int
    codomain_dim: int
    evaluator: Evaluator = field(repr=False)
    domain: Predicate = field(default=_everywhere, repr=False)
    name: str = "map"
    source: str | None = None
    target: str | None = None

    def __post_init__(self):
        ModelSpace(self.domain_dim)
        ModelSpace(self.codomain_dim)

    def contains(self, y) -> bool:
        return bool(self.domain(np.asarray(y, dtype=float)))

    def eval(self, y, u, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return eval_map2(self, y, u, v)

    def __call__(self, y) -> np.ndarray:
        zero = np.zeros(self.domain_dim)
        return eval_map2(self, y, zero, zero)[0]

    def differential(self, y, u) -> np.ndarray:
        return eval_map2(self, y, u, np.zeros(self.domain_dim))[1]

    def second(self, y, u, v) -> np.ndarray:
        return eval_map2(self, y, u, v)[2]

    def jacobian(self, y) -> np.ndarray:
        """Matrix of ``d sigma(y)``, assembled column by column from basis actions."""
        eye = np.eye(self.domain_dim)
        cols = [self.differential(y, e) for e in eye]
        return np.column_stack(cols)

    def with_labels(self, source: str | None, target: str | None, name: str | None = None) -> SmoothMap2:
        return SmoothMap2(
            self.domain_dim,
            self.codomain_dim,
            self.evaluator,
            self.domain,
            name or self.name,
            source,
            target,
        )


def eval_map2(map: SmoothMap2, y, u, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate ``(sigma(y), d sigma(y) u, d2 sigma(y)(u, v))``.

    Raises :class:`DomainError` if ``y`` is outside the map's domain and
    :class:`ShapeError` on dimension mismatch.
    """
    n = map.domain_dim
    y = as_vector(y, n, "point")
    u = as_vector(u, n, "u")
    v = as_vector(v, n, "v")
    if not map.contains(y):
        raise DomainError(f"point {y.tolist()} is outside the domain of {map.name}")
    value, first, second = map.evaluator(y, u, v)
    m = map.codomain_dim
    return (
        as_vector(value, m, f"{map.name} value"),
        as_vector(first, m, f"{map.name} first differential"),
        as_vector(second, m, f"{map.name} second differential"),
    )


def from_scalar_function(
    func: Callable[[Sequence], Sequence],
    domain_dim: int,
    codomain_dim: int,
    domain: Predicate = _everywhere,
    name: str = "map",
) -> SmoothMap2:
    """Build a map by forward hyper-dual propagation through ``func``.

    ``func`` takes a sequence of scalars and returns a sequence of scalars,
    using only arithmetic and the functions in :mod:`t2m.hyperdual`.
    """

    def evaluator(y, u, v):
        seeds = [HyperDual(y[k], u[k], v[k], 0.0) for k in range(domain_dim)]
        out = [parts(o) for o in func(seeds)]
        if len(out) != codomain_dim:
            raise ShapeError(f"{name} returned {len(out)} components, expected {codomain_dim}")
        value = [o[0] for o in out]
        first = [o[1] for o in out]
        second = [o[3] for o in out]
        return value, first, second

    return SmoothMap2(domain_dim, codomain_dim, evaluator, domain, name)


def closed_form(
    value: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    hessian: Callable[[np.ndarray], np.ndarray],
    domain_dim: int,
    codomain_dim: int,
    domain: Predicate = _everywhere,
    name: str = "map",
) -> SmoothMap2:
    """Build a map from explicit value, Jacobian ``(m, n)`` and Hessian ``(m, n, n)``."""

    def evaluator(y, u, v):
        H = np.asarray(hessian(y), dtype=float)
        return value(y), np.asarray(jacobian(y), dtype=float) @ u, np.einsum("kij,i,j->k", H, u, v)

    return SmoothMap2(domain_dim, codomain_dim, evaluator, domain, name)


def affine_map(A, b=None, domain: Predicate = _everywhere, name: str = "affine") -> SmoothMap2:
    A = np.array(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError("affine map needs a matrix")
    m, n = A.shape
    b = np.zeros(m) if b is None else as_vector(b, m, "offset")
    A.setflags(write=False)

    def evaluator(y, u, v):
        return A @ y + b, A @ u, np.zeros(m)

    return SmoothMap2(n, m, evaluator, domain, name)


def identity_map(dim: int, domain: Predicate = _everywhere, name: str = "identity") -> SmoothMap2:
    def evaluator(y, u, v):
        return y, u, np.zeros(dim)

    return SmoothMap2(dim, dim, evaluator, domain, name)


def compose_map2(outer: SmoothMap2, inner: SmoothMap2) -> SmoothMap2:
    """Return ``outer o inner`` with the order-2 chain rule.

    ``d2(t o s)(y)(u, v) = d2t(s(y))(ds u, ds v) + dt(s(y))(d2s(y)(u, v))``.
    """
    if inner.codomain_dim != outer.domain_dim:
        raise ShapeError(
            f"cannot compose {outer.name} (domain dim {outer.domain_dim}) "
            f"after {inner.name} (codomain dim {inner.codomain_dim})"
        )

    def domain(y):
        if not inner.contains(y):
            return False
        return outer.contains(inner(y))

    def evaluator(y, u, v):
        s, su, suv = eval_map2(inner, y, u, v)
        sv = eval_map2(inner, y, v, u)[1]
        t, t_su, t2 = eval_map2(outer, s, su, sv)
        t_suv = eval_map2(outer, s, suv, su)[1]
        return t, t_su, t2 + t_suv

    return SmoothMap2(
        inner.domain_dim,
        outer.codomain_dim,
        evaluator,
        domain,
        f"{outer.name}o{inner.name}",
        inner.source,
        outer.target,
    )


@dataclass(frozen=True)
class DerivativeCheckReport:
    max_rel_error_first: float
    max_rel_error_second: float
    samples: int
    step: float
    seed: int

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_rel_error_first < tol and self.max_rel_error_second < tol


def central_difference_first(map: SmoothMap2, y, u, step: float) -> np.ndarray:
    return (map(y + step * u) - map(y - step * u)) / (2.0 * step)


def central_difference_second(map: SmoothMap2, y, u, v, step: float) -> np.ndarray:
    h = step
    return (
        map(y + h * u + h * v) - map(y + h * u - h * v) - map(y - h * u + h * v) + map(y - h * u - h * v)
    ) / (4.0 * h * h)


def _rel_error(claimed: np.ndarray, reference: np.ndarray) -> float:
    scale = max(1.0, float(np.linalg.norm(reference)))
    return float(np.linalg.norm(claimed - reference)) / scale


def fd_check(map: SmoothMap2, y, step: float = 1e-4, samples: int = 8, seed: int = 0) -> DerivativeCheckReport:
    """Compare claimed first/second actions with central differences of values only.

    Directions are random unit vectors drawn from ``numpy.random.default_rng(seed)``.
    Relative errors are normalised by ``max(1, |fd|)``.
    """
    if not step > 0:
        raise ParameterError(f"finite-difference step must be positive, got {step}")
    if samples < 1:
        raise ParameterError("need at least one sample direction")
    y = as_vector(y, map.domain_dim, "point")
    if not map.contains(y):
        raise DomainError(f"point {y.tolist()} is outside the domain of {map.name}")
    rng = np.random.default_rng(seed)
    err1 = err2 = 0.0
    for _ in range(samples):
        u = rng.standard_normal(map.domain_dim)
        v = rng.standard_normal(map.domain_dim)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        _, du, d2uv = eval_map2(map, y, u, v)
        err1 = max(err1, _rel_error(du, central_difference_first(map, y, u, step)))
        err2 = max(err2, _rel_error(d2uv, central_difference_second(map, y, u, v, step)))
    return DerivativeCheckReport(err1, err2, samples, step, seed)


def symmetry_defect(map: SmoothMap2, y, u, v) -> float:
    """``|d2 sigma(y)(u, v) - d2 sigma(y)(v, u)|``."""
    return float(np.linalg.norm(map.second(y, u, v) - map.second(y, v, u)))
