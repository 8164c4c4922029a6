"""Vector-bundle charts of the second-order tangent bundle.

A connection turns the chart-dependent jet coordinates ``(y, u, w)`` into
fiber coordinates ``(y, u, v)`` with ``v = w + Gamma(y)(u)(u)``.  Between two
charts the fiber coordinates then change by the linear map ``ds x ds``,
which is what makes the jets of order two a vector bundle isomorphic to
``TM x TM``.  The converse direction recovers a connection from fiber charts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .atlas import Atlas, Curve2, Jet2, change_jet_chart, curve_to_jet, random_points, transition_map
from .calculus import SmoothMap2, as_vector
from .connection import ChristoffelField, worst_compat_residual
from .errors import ChartMismatchError, DomainError, EmptyOverlapError, ExtractionError, IncompatibleConnectionError
from .report import CheckRecord, format_point


@dataclass(frozen=True)
class FiberPoint:
    chart_id: str
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        y = as_vector(self.y, name="base point")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", as_vector(self.u, y.shape[0], "u"))
        object.__setattr__(self, "v", as_vector(self.v, y.shape[0], "v"))

    @property
    def fiber(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])


@dataclass(frozen=True)
class Trivialization:
    """The fiber chart induced by a Christoffel field over one base chart."""

    christoffel: ChristoffelField

    @property
    def chart_id(self) -> str:
        return self.christoffel.chart_id

    @property
    def dim(self) -> int:
        return self.christoffel.dim

    def forward(self, y, u, w) -> tuple[np.ndarray, np.ndarray]:
        return u, w + self.christoffel(y, u, u)

    def backward(self, y, u, v) -> tuple[np.ndarray, np.ndarray]:
        return u, v - self.christoffel(y, u, u)

    def inverse_curve(self, p: FiberPoint) -> Curve2:
        """The quadratic curve ``t -> y + t u + t^2/2 (v - Gamma(y)(u)(u))`` with class ``p``."""
        _check_chart(self, p.chart_id)
        accel = p.v - self.christoffel(p.y, p.u, p.u)
        y, u = p.y, p.u
        return Curve2(self.chart_id, lambda t: [y[k] + t * u[k] + (t * t) * (0.5 * accel[k]) for k in range(y.shape[0])])


@dataclass(frozen=True)
class FiberChart:
    """A fiber chart given directly by its coordinate formulas.

    ``forward(y, u, w) -> (phi1, phi2)`` and ``backward(y, phi1, phi2) -> (u, w)``.
    Used for hand-built charts and as the input of :func:`extract_christoffel`.
    """

    chart_id: str
    dim: int
    forward: Callable = field(repr=False)
    backward: Callable = field(repr=False)
    name: str = "fiber-chart"


def _check_chart(triv, chart_id: str) -> None:
    if triv.chart_id != chart_id:
        raise ChartMismatchError(f"object in chart {chart_id!r} given to fiber chart over {triv.chart_id!r}")


def trivialize(triv, jet: Jet2) -> FiberPoint:
    """``(y, u, w) -> (y, u, w + Gamma(y)(u)(u))`` for connection-induced charts."""
    _check_chart(triv, jet.chart_id)
    u, v = triv.forward(jet.y, jet.u, jet.w)
    return FiberPoint(jet.chart_id, jet.y, u, v)


def untrivialize(triv, p: FiberPoint) -> Jet2:
    _check_chart(triv, p.chart_id)
    if isinstance(triv, Trivialization):
        return curve_to_jet(triv.inverse_curve(p))
    u, w = triv.backward(p.y, p.u, p.v)
    return Jet2(p.chart_id, p.y, u, w)


def fiber_transition(triv_a, triv_b, sigma: SmoothMap2, y, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``Phi_a o Phi_b^{-1}`` on the fiber over the beta point ``y``."""
    jet = untrivialize(triv_b, FiberPoint(triv_b.chart_id, y, u, v))
    p = trivialize(triv_a, change_jet_chart(jet, sigma, triv_a.chart_id))
    return p.u, p.v


@dataclass(frozen=True)
class TransitionOperator:
    """The fiber map between two trivializations over one base point.

    ``matrix`` is read off ``Phi_a o Phi_b^{-1}`` on basis vectors of
    ``E x E``; ``jacobian`` is ``d sigma(y)``, whose square block-diagonal
    form the matrix must equal.
    """

    source: str
    target: str
    y: np.ndarray
    matrix: np.ndarray
    jacobian: np.ndarray

    @property
    def dim(self) -> int:
        return self.jacobian.shape[0]

    def block_form(self) -> np.ndarray:
        n = self.dim
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = self.jacobian
        out[n:, n:] = self.jacobian
        return out

    @property
    def discrepancy(self) -> float:
        """Max-abs gap between the two computations, relative to ``max(1, |ds|)``."""
        scale = max(1.0, float(np.max(np.abs(self.jacobian))))
        return float(np.max(np.abs(self.matrix - self.block_form()))) / scale

    def blocks(self):
        n = self.dim
        M = self.matrix
        return M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:]

    def __call__(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        out = self.matrix @ np.concatenate([u, v])
        return out[: self.dim], out[self.dim :]


def transition_function(
    triv_a, triv_b, sigma: SmoothMap2, y, tol: float = 1e-10, strict: bool = True
) -> TransitionOperator:
    """Transition operator ``T_ab`` at the beta point ``y``.

    With ``strict`` the compatibility of the two Christoffel fields is checked
    first and :class:`IncompatibleConnectionError` is raised when it fails, as
    is any disagreement between the basis-vector and block computations.
    """
    y = as_vector(y, sigma.domain_dim, "point")
    if not sigma.contains(y):
        raise DomainError(f"point {y.tolist()} is outside the overlap {sigma.name}")
    n = sigma.domain_dim
    if strict and isinstance(triv_a, Trivialization) and isinstance(triv_b, Trivialization):
        worst, _ = worst_compat_residual(triv_a.christoffel, triv_b.christoffel, sigma, [y], np.random.default_rng(0), 0)
        if worst > tol:
            raise IncompatibleConnectionError(
                f"Christoffel fields of {triv_a.chart_id!r} and {triv_b.chart_id!r} violate the "
                f"connection compatibility condition at {y.tolist()}: residual {worst:.3e}",
                residual=worst,
                point=tuple(y.tolist()),
            )
    cols = []
    for e in np.eye(2 * n):
        u2, v2 = fiber_transition(triv_a, triv_b, sigma, y, e[:n], e[n:])
        cols.append(np.concatenate([u2, v2]))
    op = TransitionOperator(triv_b.chart_id, triv_a.chart_id, y, np.column_stack(cols), sigma.jacobian(y))
    if strict and op.discrepancy > tol:
        raise IncompatibleConnectionError(
            f"fiber map {triv_b.chart_id!r}->{triv_a.chart_id!r} is not ds x ds at {y.tolist()}: "
            f"discrepancy {op.discrepancy:.3e}",
            residual=op.discrepancy,
            point=tuple(y.tolist()),
        )
    return op


def linearity_defect(fiber_map: Callable, n: int, rng: np.random.Generator, trials: int = 4) -> float:
    """Worst additivity/homogeneity violation of ``(u, v) -> (u', v')``.

    Relative to ``1 + |a F(p1) + b F(p2)|``.
    """

    def F(p):
        return np.concatenate(fiber_map(p[:n], p[n:]))

    worst = 0.0
    for _ in range(trials):
        p1, p2 = rng.standard_normal((2, 2 * n))
        a, b = rng.standard_normal(2)
        rhs = a * F(p1) + b * F(p2)
        worst = max(worst, float(np.linalg.norm(F(a * p1 + b * p2) - rhs)) / (1.0 + float(np.linalg.norm(rhs))))
    return worst


def raw_jet_transition(sigma: SmoothMap2, y) -> Callable:
    """The chart change ``(u, w) -> (ds u, d2s(u, u) + ds w)`` with no connection."""

    def apply(u, w):
        jet = change_jet_chart(Jet2(sigma.source or "_", y, u, w), sigma)
        return jet.u, jet.w

    return apply


def _operator_gap(T: np.ndarray, S: np.ndarray) -> float:
    return float(np.linalg.norm(T - S, 2)) / max(1.0, float(np.linalg.norm(S, 2)))


def cocycle_residual(trivs: Mapping[str, object], atlas: Atlas, a: str, b: str, c: str, y) -> float:
    """Relative spectral-norm defect of ``T_ac - T_ab T_bc`` at ``y`` in chart ``c``.

    Operators are read off the fiber maps without the compatibility gate, so
    corrupted Christoffel fields show up here as a nonzero residual.
    """
    s_ac = transition_map(atlas, a, c)
    s_bc = transition_map(atlas, b, c)
    s_ab = transition_map(atlas, a, b)
    y = as_vector(y, atlas.dim)
    if not (s_ac.contains(y) and s_bc.contains(y) and s_ab.contains(s_bc(y))):
        raise EmptyOverlapError(f"{format_point(y)} is not in the triple overlap of {a}, {b}, {c}")
    T_ac = transition_function(trivs[a], trivs[c], s_ac, y, strict=False).matrix
    T_bc = transition_function(trivs[b], trivs[c], s_bc, y, strict=False).matrix
    T_ab = transition_function(trivs[a], trivs[b], s_ab, s_bc(y), strict=False).matrix
    return _operator_gap(T_ab @ T_bc, T_ac)


def tm_tm_isomorphism_check(trivs: Mapping[str, object], atlas: Atlas, points: Mapping[tuple[str, str], Sequence] | None = None, tol: float = 1e-10) -> list[CheckRecord]:
    """Check every transition operator is ``ds x ds``: zero off-diagonal blocks,
    equal diagonal blocks, both equal to the tangent-bundle transition."""
    records = []
    for a, b in atlas.overlaps():
        pts = points[(a, b)] if points is not None else atlas.overlap_points(a, b)
        sigma = transition_map(atlas, a, b)
        for y in pts:
            op = transition_function(trivs[a], trivs[b], sigma, y, strict=False)
            A, B, C, D = op.blocks()
            scale = max(1.0, float(np.max(np.abs(op.jacobian))))
            loc = f"{a}<-{b} @ {format_point(y)}"
            off = max(float(np.max(np.abs(B))), float(np.max(np.abs(C)))) / scale
            eq = float(np.max(np.abs(A - D))) / scale
            tm = float(np.max(np.abs(A - op.jacobian))) / scale
            records += [
                CheckRecord("bundle.tmtm.offdiagonal", loc, off, tol),
                CheckRecord("bundle.tmtm.equal-blocks", loc, eq, tol),
                CheckRecord("bundle.tmtm.tangent-block", loc, tm, tol),
            ]
    return records


def extract_christoffel(
    fiber_chart,
    points: Sequence | None = None,
    rng: np.random.Generator | None = None,
    tol: float = 1e-10,
    domain=None,
) -> ChristoffelField:
    """Recover Christoffel symbols from a fiber chart split as ``Phi1 x Phi2``.

    The base chart must be adapted (``Phi1`` reads the velocity unchanged).
    On the diagonal ``Gamma(y)(u, u) = Phi2(y, u, 0)``; off-diagonal values
    come from polarization, so only the symmetric part of a connection is
    recovered.  At each of ``points`` the chart is probed for being of this
    form and :class:`ExtractionError` is raised otherwise.
    """
    n = fiber_chart.dim
    rng = rng if rng is not None else np.random.default_rng(0)
    zero = np.zeros(n)

    def q(y, u):
        return np.asarray(fiber_chart.forward(y, u, zero)[1], dtype=float)

    for y in points or ():
        y = as_vector(y, n, "point")
        for _ in range(3):
            u, w, v = rng.standard_normal((3, n))
            t = float(rng.uniform(0.5, 2.0))
            phi1, phi2 = fiber_chart.forward(y, u, w)
            qu, qv = q(y, u), q(y, v)
            scale = 1.0 + float(np.linalg.norm(qu)) + float(np.linalg.norm(qv))
            defects = {
                "first factor is not the velocity in an adapted chart": np.linalg.norm(np.asarray(phi1) - u) / scale,
                "second factor is not affine in the acceleration": np.linalg.norm(np.asarray(phi2) - qu - w) / scale,
                "second factor is not quadratic in the velocity": np.linalg.norm(q(y, t * u) - t * t * qu) / scale,
                "second factor fails the parallelogram law": np.linalg.norm(q(y, u + v) + q(y, u - v) - 2 * qu - 2 * qv) / scale,
            }
            for what, defect in defects.items():
                if defect > tol:
                    raise ExtractionError(f"fiber chart over {fiber_chart.chart_id!r} at {y.tolist()}: {what} (defect {defect:.3e})")

    def action(y, u, v):
        return 0.5 * (q(y, u + v) - q(y, u) - q(y, v))

    dom = domain if domain is not None else (lambda y: True)
    return ChristoffelField(fiber_chart.chart_id, n, action, dom, f"extracted[{fiber_chart.chart_id}]")


def chart_sample_points(atlas: Atlas, chart_id: str, rng: np.random.Generator | None = None, n: int = 0) -> list[np.ndarray]:
    """Declared overlap points lying in ``chart_id`` plus ``n`` random chart points."""
    pts = [p for (a, b), ps in sorted(atlas.samples.items()) if b == chart_id for p in ps]
    pts = [as_vector(p, atlas.dim) for p in pts]
    if n and rng is not None:
        pts += random_points(atlas.chart(chart_id), rng, n)
    return pts
