"""Charts, atlases, curves and second-order jets with their chart-change law."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from .calculus import SmoothMap2, as_vector, compose_map2, eval_map2, identity_map
from .errors import ChartMismatchError, DomainError, EmptyOverlapError, ShapeError, UnknownChartError
from .hyperdual import HyperDual, parts


@dataclass(frozen=True)
class Chart:
    """A chart ``(U, psi)`` known only by its id and the open image ``psi(U)``.

    ``box`` is an optional ``(low, high)`` pair bounding the image, used to
    draw random sample points by rejection.
    """

    id: str
    dim: int
    contains: Callable[[np.ndarray], bool] = field(default=lambda y: True, repr=False)
    box: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __contains__(self, y) -> bool:
        return bool(self.contains(np.asarray(y, dtype=float)))


@dataclass(frozen=True)
class Atlas:
    """Charts plus transition maps ``sigma[(a, b)] = psi_a o psi_b^{-1}``.

    ``samples[(a, b)]`` lists explicit points of the overlap expressed in
    chart ``b`` coordinates.
    """

    charts: Mapping[str, Chart]
    transitions: Mapping[tuple[str, str], SmoothMap2]
    samples: Mapping[tuple[str, str], Sequence[np.ndarray]] = field(default_factory=dict)
    name: str = "atlas"

    @property
    def dim(self) -> int:
        return next(iter(self.charts.values())).dim

    def chart(self, chart_id: str) -> Chart:
        try:
            return self.charts[chart_id]
        except KeyError:
            raise UnknownChartError(f"atlas {self.name!r} has no chart {chart_id!r}") from None

    def overlaps(self) -> list[tuple[str, str]]:
        """Ordered pairs of distinct charts with a registered transition."""
        return sorted(k for k in self.transitions if k[0] != k[1])

    def overlap_points(self, a: str, b: str, rng: np.random.Generator | None = None, n: int = 0) -> list[np.ndarray]:
        """Declared sample points of ``U_a & U_b`` in ``b`` coordinates, plus ``n`` random ones."""
        sigma = transition_map(self, a, b)
        pts = [as_vector(p, self.dim) for p in self.samples.get((a, b), ())]
        if not pts and a == b:
            pts = [as_vector(p, self.dim) for (x, y), ps in sorted(self.samples.items()) if y == b for p in ps]
        if n and rng is not None:
            pts += random_points(self.chart(b), rng, n, extra=sigma.contains)
        return [p for p in pts if sigma.contains(p)]

    def triple_points(self, a: str, b: str, c: str, rng=None, n: int = 0) -> list[np.ndarray]:
        """Points of ``U_a & U_b & U_c`` in ``c`` coordinates."""
        s_ac = transition_map(self, a, c)
        s_bc = transition_map(self, b, c)
        candidates = self.overlap_points(b, c, rng, n) + self.overlap_points(a, c)
        out = []
        for p in candidates:
            if s_ac.contains(p) and s_bc.contains(p) and transition_map(self, a, b).contains(s_bc(p)):
                out.append(p)
        return out


def random_points(chart: Chart, rng: np.random.Generator, n: int, extra=None, max_tries: int = 10000) -> list[np.ndarray]:
    """Draw ``n`` points uniformly from ``chart.box`` that lie in the chart image."""
    if chart.box is None:
        raise ShapeError(f"chart {chart.id!r} declares no sampling box")
    lo, hi = (np.asarray(b, dtype=float) for b in chart.box)
    out: list[np.ndarray] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise EmptyOverlapError(f"could not sample {n} points in chart {chart.id!r}")
        p = lo + (hi - lo) * rng.random(lo.shape[0])
        if chart.contains(p) and (extra is None or extra(p)):
            out.append(as_vector(p))
    return out


def transition_map(atlas: Atlas, alpha: str, beta: str) -> SmoothMap2:
    """Return ``sigma_{alpha beta}``, defined on ``psi_beta(U_alpha & U_beta)``."""
    cb = atlas.chart(beta)
    atlas.chart(alpha)
    if alpha == beta:
        return identity_map(cb.dim, domain=cb.contains).with_labels(beta, alpha, f"id[{alpha}]")
    try:
        sigma = atlas.transitions[(alpha, beta)]
    except KeyError:
        raise EmptyOverlapError(f"charts {alpha!r} and {beta!r} do not overlap") from None
    return sigma.with_labels(beta, alpha, sigma.name if sigma.name != "map" else f"sigma[{alpha},{beta}]")


def check_atlas(atlas: Atlas) -> list[tuple[str, tuple, float]]:
    """Residuals of the transition identities at every declared sample point.

    Returns ``(check, location, residual)`` triples; the caller compares them
    with its tolerance.
    """
    rng = np.random.default_rng(0)
    n = atlas.dim
    out = []
    for cid in sorted(atlas.charts):
        sig = transition_map(atlas, cid, cid)
        for p in atlas.overlap_points(cid, cid):
            out.append(("atlas.identity", (cid, cid, tuple(p)), _order2_distance(sig, identity_map(n), p, rng)))
    for a, b in atlas.overlaps():
        if (b, a) not in atlas.transitions:
            continue
        roundtrip = compose_map2(transition_map(atlas, b, a), transition_map(atlas, a, b))
        for p in filter(roundtrip.contains, atlas.overlap_points(a, b)):
            out.append(("atlas.inverse", (b, a, tuple(p)), _order2_distance(roundtrip, identity_map(n), p, rng)))
    for a, b, c in product(sorted(atlas.charts), repeat=3):
        if len({a, b, c}) < 3 or not {(a, b), (b, c), (a, c)} <= set(atlas.transitions):
            continue
        lhs = compose_map2(transition_map(atlas, a, b), transition_map(atlas, b, c))
        rhs = transition_map(atlas, a, c)
        for p in filter(lhs.contains, atlas.triple_points(a, b, c)):
            out.append(("atlas.cocycle", (a, b, c, tuple(p)), _order2_distance(lhs, rhs, p, rng)))
    return out


def _order2_distance(f: SmoothMap2, g: SmoothMap2, y, rng, trials: int = 3) -> float:
    worst = 0.0
    for _ in range(trials):
        u, v = rng.standard_normal((2, f.domain_dim))
        a = eval_map2(f, y, u, v)
        b = eval_map2(g, y, u, v)
        for x, z in zip(a, b):
            worst = max(worst, float(np.linalg.norm(x - z)) / max(1.0, float(np.linalg.norm(z))))
    return worst


@dataclass(frozen=True)
class Jet2:
    """A second-order tangent vector in chart coordinates.

    ``y`` is the base point ``psi(x)``, ``u`` and ``w`` the first and second
    derivatives at 0 of any representing curve read in the chart.
    """

    chart_id: str
    y: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        y = as_vector(self.y, name="base point")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", as_vector(self.u, y.shape[0], "velocity"))
        object.__setattr__(self, "w", as_vector(self.w, y.shape[0], "acceleration"))

    @property
    def dim(self) -> int:
        return self.y.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.y, self.u, self.w])


@dataclass(frozen=True)
class Curve2:
    """A curve in chart coordinates, ``t -> c(t)``.

    ``func`` is called with a scalar that may be a hyper-dual number and must
    return a sequence of scalars; derivatives at ``t = 0`` are exact.
    """

    chart_id: str
    func: Callable[[object], Sequence] = field(repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return np.array([float(x) for x in self.func(t)])

    def derivatives_at_zero(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # t = 0 + e1 + e2: the e1 part is c'(0), the e1e2 part is c''(0).
        out = [parts(c) for c in self.func(HyperDual(0.0, 1.0, 1.0, 0.0))]
        return tuple(np.array([o[k] for o in out]) for k in (0, 1, 3))


def polynomial_curve(chart_id: str, y0, u0, w0=None) -> Curve2:
    """``t -> y0 + t u0 + t^2/2 w0``."""
    y0 = as_vector(y0)
    u0 = as_vector(u0, y0.shape[0])
    w0 = np.zeros_like(y0) if w0 is None else as_vector(w0, y0.shape[0])
    return Curve2(chart_id, lambda t: [y0[k] + t * u0[k] + (t * t) * (0.5 * w0[k]) for k in range(y0.shape[0])])


def curve_to_jet(curve: Curve2, chart: Chart | None = None) -> Jet2:
    """The jet ``(c(0), c'(0), c''(0))`` of ``curve`` in its chart."""
    y, u, w = curve.derivatives_at_zero()
    if chart is not None:
        if chart.id != curve.chart_id:
            raise ChartMismatchError(f"curve lives in {curve.chart_id!r}, not {chart.id!r}")
        if y not in chart:
            raise DomainError(f"curve base point {y.tolist()} is outside chart {chart.id!r}")
    return Jet2(curve.chart_id, y, u, w)


def change_jet_chart(jet: Jet2, sigma: SmoothMap2, target: str | None = None) -> Jet2:
    """Push a jet through a transition: ``(s(y), ds u, d2s(u, u) + ds w)``."""
    if sigma.source is not None and sigma.source != jet.chart_id:
        raise ChartMismatchError(f"jet lives in {jet.chart_id!r} but {sigma.name} starts at {sigma.source!r}")
    value, du, d2uu = eval_map2(sigma, jet.y, jet.u, jet.u)
    dw = eval_map2(sigma, jet.y, jet.w, jet.u)[1]
    target = target or sigma.target or jet.chart_id
    return Jet2(target, value, du, d2uu + dw)


def jets_equal(a: Jet2, b: Jet2, tol: float = 1e-10, transition: SmoothMap2 | None = None) -> bool:
    """Whether two jets represent the same class, componentwise within ``tol``.

    Jets in different charts are compared after moving ``b`` with ``transition``.
    """
    if a.chart_id != b.chart_id:
        if transition is None:
            raise ChartMismatchError(f"cannot compare jets in charts {a.chart_id!r} and {b.chart_id!r}")
        b = change_jet_chart(b, transition, a.chart_id)
    return all(
        float(np.max(np.abs(x - z), initial=0.0)) <= tol for x, z in ((a.y, b.y), (a.u, b.u), (a.w, b.w))
    )
