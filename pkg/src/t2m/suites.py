"""Verification suites run over a fixture, producing check records."""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import atlas as at
from .bundle import (
    FiberPoint,
    Trivialization,
    chart_sample_points,
    cocycle_residual,
    extract_christoffel,
    fiber_transition,
    linearity_defect,
    raw_jet_transition,
    tm_tm_isomorphism_check,
    transition_function,
    trivialize,
    untrivialize,
)
from .calculus import fd_check, symmetry_defect
from .config import Fixture
from .connection import bilinearity_defect, levi_civita_field, pushforward_christoffel, vilms_local, worst_compat_residual
from .errors import ExtractionError, IncompatibleConnectionError, ParameterError
from .prolim import (
    TowerChristoffel,
    TowerLinearMap,
    check_tower,
    compose,
    invert,
    level_chart,
    limit_connection_check,
    limit_square_residual,
    limit_to_family,
    random_compatible_family,
    random_tower_map,
    reconstruct_limit_jet,
    tower_membership,
    tower_transition,
)
from .report import CheckRecord, SuiteReport, format_point

SUITES = ("calculus", "atlas", "connection", "bundle", "tower")


@dataclass(frozen=True)
class Tolerances:
    struct: float = 1e-10
    fd: float = 1e-6
    metric: float = 1e-8
    exact: float = 1e-12

    def __post_init__(self):
        for name in ("struct", "fd", "metric", "exact"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"tolerance {name} must be positive, got {getattr(self, name)}")


def _rel(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / max(1.0, float(np.linalg.norm(b)))


def _overlap_points(atlas, a, b, rng, extra=3):
    return atlas.overlap_points(a, b, rng, extra)


# -- calculus ----------------------------------------------------------------


def calculus_suite(fx: Fixture, rng: np.random.Generator, tol: Tolerances) -> list[CheckRecord]:
    records = []
    maps = []
    if fx.atlas is not None:
        for a, b in fx.atlas.overlaps():
            maps.append((f"{a}<-{b}", at.transition_map(fx.atlas, a, b), _overlap_points(fx.atlas, a, b, rng)))
    if fx.tower is not None:
        tw = fx.tower
        for i in range(1, tw.tower.depth + 1):
            pts = list(rng.standard_normal((3, tw.tower.dim(i))))
            for f in tw.forward[i - 1 : i] + tw.inverse[i - 1 : i]:
                maps.append((f.name, f, pts))
            for k in range(1, i):
                maps.append((f"rho[{i},{k}]", tw.tower.chart_map(i, k), pts))
    for label, sigma, pts in maps:
        for p in pts:
            loc = f"{label} @ {format_point(p)}"
            rep = fd_check(sigma, p, step=1e-4, samples=4, seed=int(rng.integers(2**31)))
            records.append(CheckRecord("calculus.fd.first", loc, rep.max_rel_error_first, tol.fd))
            records.append(CheckRecord("calculus.fd.second", loc, rep.max_rel_error_second, tol.fd))
            u, v = rng.standard_normal((2, sigma.domain_dim))
            sym = symmetry_defect(sigma, p, u, v) / (1.0 + float(np.linalg.norm(sigma.second(p, u, v))))
            records.append(CheckRecord("calculus.symmetry", loc, sym, tol.exact))
    return records


# -- atlas -------------------------------------------------------------------


def _random_jet(chart_id: str, y, rng) -> at.Jet2:
    u, w = rng.standard_normal((2, len(y)))
    return at.Jet2(chart_id, y, u, w)


def _fd_curve_jet(sigma, curve: at.Curve2, step: float = 1e-3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Derivatives at 0 of t -> sigma(c(t)) from values only.
    h = step
    f = lambda t: sigma(curve(t))
    f0, fp, fm, fp2, fm2 = f(0.0), f(h), f(-h), f(2 * h), f(-2 * h)
    d1 = (8 * (fp - fm) - (fp2 - fm2)) / (12 * h)
    d2 = (16 * (fp + fm) - (fp2 + fm2) - 30 * f0) / (12 * h * h)
    return f0, d1, d2


def atlas_suite(fx: Fixture, rng: np.random.Generator, tol: Tolerances) -> list[CheckRecord]:
    if fx.atlas is None:
        return []
    A = fx.atlas
    records = [CheckRecord(check, f"{'/'.join(loc[:-1])} @ {format_point(loc[-1])}", res, tol.struct) for check, loc, res in at.check_atlas(A)]
    for a, b in A.overlaps():
        sab = at.transition_map(A, a, b)
        back = at.transition_map(A, b, a) if (b, a) in A.transitions else None
        for p in _overlap_points(A, a, b, rng):
            loc = f"{a}<-{b} @ {format_point(p)}"
            jet = _random_jet(b, p, rng)
            moved = at.change_jet_chart(jet, sab)
            if back is not None and back.contains(moved.y):
                again = at.change_jet_chart(moved, back)
                res = max(_rel(again.y, jet.y), _rel(again.u, jet.u), _rel(again.w, jet.w))
                records.append(CheckRecord("atlas.jet.roundtrip", loc, res, tol.struct))
            # two curves with the same 2-jet but different cubic terms
            for cubic in (np.zeros(A.dim), rng.standard_normal(A.dim)):
                y0, u0, w0 = jet.y, jet.u, jet.w
                curve = at.Curve2(b, lambda t, c=cubic: [y0[k] + t * u0[k] + t * t * 0.5 * w0[k] + t * t * t * c[k] for k in range(len(y0))])
                if not all(sab.contains(curve(t)) for t in (-2e-3, 2e-3)):
                    continue
                f0, d1, d2 = _fd_curve_jet(sab, curve)
                res = max(_rel(moved.y, f0), _rel(moved.u, d1), _rel(moved.w, d2))
                records.append(CheckRecord("atlas.jet.curve-oracle", loc, res, tol.fd))
    for a, b, c in permutations(sorted(A.charts), 3):
        if not {(a, b), (b, c), (a, c)} <= set(A.transitions):
            continue
        sab, sbc, sac = (at.transition_map(A, *k) for k in ((a, b), (b, c), (a, c)))
        for p in A.triple_points(a, b, c, rng, 2):
            jet = _random_jet(c, p, rng)
            two = at.change_jet_chart(at.change_jet_chart(jet, sbc), sab)
            one = at.change_jet_chart(jet, sac)
            res = max(_rel(two.y, one.y), _rel(two.u, one.u), _rel(two.w, one.w))
            records.append(CheckRecord("atlas.jet.functoriality", f"{a}<-{b}<-{c} @ {format_point(p)}", res, tol.struct))
    return records


# -- connection --------------------------------------------------------------


def connection_suite(fx: Fixture, rng: np.random.Generator, tol: Tolerances) -> list[CheckRecord]:
    if fx.atlas is None:
        return []
    A, G = fx.atlas, fx.christoffels
    records = []
    for cid in sorted(G):
        for p in chart_sample_points(A, cid, rng, 3):
            records.append(CheckRecord("connection.bilinear", f"{cid} @ {format_point(p)}", bilinearity_defect(G[cid], p, rng), tol.exact))
            u, v, w = rng.standard_normal((3, A.dim))
            _, a1 = vilms_local(G[cid], p, u, 2.0 * v, w)
            _, a0 = vilms_local(G[cid], p, u, v, w)
            records.append(CheckRecord("connection.local-map.linear", f"{cid} @ {format_point(p)}", _rel(a1 - w, 2.0 * (a0 - w)), tol.exact))
    for a, b in A.overlaps():
        if a not in G or b not in G:
            continue
        sigma = at.transition_map(A, a, b)
        for p in _overlap_points(A, a, b, rng):
            res, _ = worst_compat_residual(G[a], G[b], sigma, [p], rng, 4)
            records.append(CheckRecord("connection.compatibility", f"{a}<-{b} @ {format_point(p)}", res, tol.struct,
                                       note="compatibility condition between Christoffel fields across the overlap"))
        if (b, a) in A.transitions:
            pushed = pushforward_christoffel(G[b], sigma, at.transition_map(A, b, a), chart_id=a)
            back = pushforward_christoffel(pushed, at.transition_map(A, b, a), sigma, chart_id=b)
            for p in _overlap_points(A, a, b, rng, 1):
                u, v = rng.standard_normal((2, A.dim))
                records.append(CheckRecord("connection.pushforward.roundtrip", f"{a}<-{b} @ {format_point(p)}", _rel(back(p, u, v), G[b](p, u, v)), tol.struct))
    if fx.metrics:
        lc = {cid: levi_civita_field(cid, A.dim, g, A.chart(cid).contains) for cid, g in fx.metrics.items()}
        for cid in sorted(lc):
            if cid in G:
                for p in chart_sample_points(A, cid, rng, 2):
                    res = _rel(lc[cid].tensor(p), G[cid].symmetrized().tensor(p))
                    records.append(CheckRecord("connection.metric.agreement", f"{cid} @ {format_point(p)}", res, tol.metric))
        for a, b in A.overlaps():
            if a in lc and b in lc:
                sigma = at.transition_map(A, a, b)
                for p in _overlap_points(A, a, b, rng, 1):
                    res, _ = worst_compat_residual(lc[a], lc[b], sigma, [p], rng, 2)
                    records.append(CheckRecord("connection.metric.compatibility", f"{a}<-{b} @ {format_point(p)}", res, tol.metric))
    return records


# -- bundle ------------------------------------------------------------------


def bundle_suite(fx: Fixture, rng: np.random.Generator, tol: Tolerances, random_jets: int = 100) -> list[CheckRecord]:
    if fx.atlas is None:
        return []
    A = fx.atlas
    trivs = {cid: Trivialization(g) for cid, g in fx.christoffels.items()}
    n = A.dim
    records = []
    for cid in sorted(trivs):
        T = trivs[cid]
        worst_p = worst_j = 0.0
        for y in at.random_points(A.chart(cid), rng, random_jets):
            u, v, w = rng.standard_normal((3, n))
            p = FiberPoint(cid, y, u, v)
            q = trivialize(T, untrivialize(T, p))
            worst_p = max(worst_p, _rel(q.fiber, p.fiber))
            jet = at.Jet2(cid, y, u, w)
            back = untrivialize(T, trivialize(T, jet))
            worst_j = max(worst_j, _rel(back.as_array(), jet.as_array()))
        records.append(CheckRecord("bundle.roundtrip.fiber", f"{cid} x{random_jets}", worst_p, tol.struct))
        records.append(CheckRecord("bundle.roundtrip.jet", f"{cid} x{random_jets}", worst_j, tol.struct))

    for a, b in A.overlaps():
        if a not in trivs or b not in trivs:
            continue
        sigma = at.transition_map(A, a, b)
        for y in _overlap_points(A, a, b, rng):
            loc = f"{a}<-{b} @ {format_point(y)}"
            try:
                op = transition_function(trivs[a], trivs[b], sigma, y, tol=tol.struct)
                records.append(CheckRecord("bundle.transition.blocks", loc, op.discrepancy, tol.struct))
            except IncompatibleConnectionError as exc:
                records.append(CheckRecord("bundle.transition.compatibility", loc, exc.residual, tol.struct,
                                           note="connection compatibility condition violated; fiber map is not linear"))
                op = transition_function(trivs[a], trivs[b], sigma, y, strict=False)
            fmap = lambda u, v, y=y: fiber_transition(trivs[a], trivs[b], sigma, y, u, v)
            records.append(CheckRecord("bundle.fiber.linear", loc, linearity_defect(fmap, n, rng), tol.struct))
            jet = _random_jet(b, y, rng)
            via_T = op(*(lambda p: (p.u, p.v))(trivialize(trivs[b], jet)))
            direct = trivialize(trivs[a], at.change_jet_chart(jet, sigma, a))
            records.append(CheckRecord("bundle.well-defined", loc, _rel(np.concatenate(via_T), direct.fiber), tol.struct))
            if (b, a) in A.transitions:
                inv = transition_function(trivs[b], trivs[a], at.transition_map(A, b, a), sigma(y), strict=False)
                records.append(CheckRecord("bundle.fiber.invertible", loc, _rel(inv.matrix @ op.matrix, np.eye(2 * n)), tol.struct))
            if float(np.max(np.abs([sigma.second(y, e, f) for e in np.eye(n) for f in np.eye(n)]))) > 1e-3:
                raw = raw_jet_transition(sigma, y)
                records.append(CheckRecord("bundle.necessity-witness", loc, linearity_defect(raw, n, rng), 1e-2, expect_fail=True,
                                           note="without a connection the jet chart change is not fiberwise linear"))
    records += tm_tm_isomorphism_check(trivs, A, tol=tol.struct)

    for a, b, c in permutations(sorted(trivs), 3):
        if not {(a, b), (b, c), (a, c)} <= set(A.transitions):
            continue
        for y in A.triple_points(a, b, c, rng, 2):
            res = cocycle_residual(trivs, A, a, b, c, y)
            records.append(CheckRecord("bundle.cocycle", f"{a}<-{b}<-{c} @ {format_point(y)}", res, tol.struct))

    extracted = {}
    for cid in sorted(trivs):
        pts = chart_sample_points(A, cid, rng, 2)
        loc = f"{cid}"
        try:
            extracted[cid] = extract_christoffel(trivs[cid], pts, rng, tol.struct, A.chart(cid).contains)
        except ExtractionError as exc:
            records.append(CheckRecord("bundle.extract.form", loc, float("inf"), tol.struct, note=str(exc)))
            continue
        sym = trivs[cid].christoffel.symmetrized()
        worst = 0.0
        for y in pts:
            u, v = rng.standard_normal((2, n))
            worst = max(worst, _rel(extracted[cid](y, u, v), sym(y, u, v)))
        records.append(CheckRecord("bundle.extract.roundtrip", loc, worst, tol.struct))
    for a, b in A.overlaps():
        if a in extracted and b in extracted:
            sigma = at.transition_map(A, a, b)
            for y in A.overlap_points(a, b):
                res, _ = worst_compat_residual(extracted[a], extracted[b], sigma, [y], rng, 2)
                records.append(CheckRecord("bundle.extract.compatibility", f"{a}<-{b} @ {format_point(y)}", res, tol.struct))
    return records


# -- tower -------------------------------------------------------------------


def tower_suite(fx: Fixture, rng: np.random.Generator, tol: Tolerances, samples: int = 50, families: int = 100) -> list[CheckRecord]:
    if fx.tower is None:
        return []
    tw = fx.tower
    tower = tw.tower
    N = tower.depth
    records = check_tower(tower, rng, tol=tol.exact)

    # compatible group: membership, closure under composition and inversion
    try:
        maps = [random_tower_map(tower, rng) for _ in range(5)]
    except ParameterError:
        maps = []
    maps.append(TowerLinearMap.identity(tower))
    for k, m in enumerate(maps):
        res = tower_membership(m, tower, tol.exact)
        records.append(CheckRecord("tower.h0.membership", f"sample {k}", res.residual, tol.exact))
        inv = tower_membership(invert(m), tower, tol.exact)
        records.append(CheckRecord("tower.h0.closure.invert", f"sample {k}", inv.residual, tol.exact))
        other = maps[(k + 1) % len(maps)]
        comp = tower_membership(compose(m, other), tower, tol.exact)
        records.append(CheckRecord("tower.h0.closure.compose", f"sample {k}", comp.residual, tol.exact))

    # the bijection between limit jets and compatible families
    worst_f = worst_r = 0.0
    for _ in range(families):
        family = random_compatible_family(tower, rng)
        rebuilt = reconstruct_limit_jet(family, tower, tol.exact)
        worst_f = max(worst_f, max(_rel(a.as_array(), b.as_array()) for a, b in zip(rebuilt.levels, family)))
        again = limit_to_family(rebuilt.limit, tower)
        worst_r = max(worst_r, max(_rel(a.as_array(), b.as_array()) for a, b in zip(again.levels, rebuilt.levels)))
    records.append(CheckRecord("tower.bijection.reconstruct", f"x{families}", worst_f, tol.exact))
    records.append(CheckRecord("tower.bijection.project", f"x{families}", worst_r, tol.exact))

    # level compatibility of the connection and the commuting squares
    records += limit_connection_check(tw.gammas, tower, rng, 10, tol.struct)
    trivs = tw.gammas.trivializations()
    for j in range(2, N + 1):
        jets = [_random_jet(level_chart(j), rng.standard_normal(tower.dim(j)), rng) for _ in range(samples)]
        for i in range(1, j):
            res = limit_square_residual(trivs, tower, j, i, jets)
            records.append(CheckRecord("tower.square", f"{j}->{i}", res, tol.struct))

    # connections recovered levelwise from the trivializations
    pts = lambda i: list(rng.standard_normal((2, tower.dim(i))))
    try:
        recovered = TowerChristoffel(tuple(extract_christoffel(t, pts(i), rng, tol.struct) for i, t in enumerate(trivs, start=1)))
        for r in limit_connection_check(recovered, tower, rng, 5, tol.struct):
            records.append(CheckRecord(r.check.replace("tower.", "tower.extracted."), r.location, r.residual, r.tolerance))
    except ExtractionError as exc:
        records.append(CheckRecord("tower.extracted.form", "levels", float("inf"), tol.struct, note=str(exc)))

    # transition functions between the two limit charts take values in the group
    second = tw.second_gammas()
    if second is not None:
        trivs_b = second.trivializations()
        for k in range(5):
            y = rng.standard_normal(tower.dim(N))
            ys = [tw.forward[i - 1](tower.connecting(N, i) @ y) for i in range(1, N + 1)]
            try:
                T = tower_transition(trivs, trivs_b, tw.inverse, tower, ys[-1], strict=True)
                res = tower_membership(T, tower, tol.struct)
                records.append(CheckRecord("tower.h0.transition", f"sample {k}", res.residual, tol.struct))
            except IncompatibleConnectionError as exc:
                records.append(CheckRecord("tower.h0.transition", f"sample {k}", exc.residual, tol.struct, note=str(exc)))
    return records


_RUNNERS = {
    "calculus": calculus_suite,
    "atlas": atlas_suite,
    "connection": connection_suite,
    "bundle": bundle_suite,
    "tower": tower_suite,
}


def run_suite(fixture: Fixture, suite: str = "all", seed: int = 0, tol: Tolerances | None = None) -> SuiteReport:
    """Run one suite (or ``all``) on ``fixture``.

    Each suite draws from its own generator seeded by ``(seed, suite index)``,
    so a suite produces the same records whether run alone or within ``all``.
    """
    tol = tol or Tolerances()
    if suite != "all" and suite not in _RUNNERS:
        raise ParameterError(f"unknown suite {suite!r}; choose from all, {', '.join(SUITES)}")
    names = SUITES if suite == "all" else (suite,)
    if suite == "tower" and fixture.tower is None:
        raise ParameterError(f"fixture {fixture.name!r} has no tower section")
    if suite in ("atlas", "connection", "bundle") and fixture.atlas is None:
        raise ParameterError(f"fixture {fixture.name!r} has no charts")
    report = SuiteReport(fixture.name, suite, seed)
    start = time.perf_counter()
    for name in names:
        rng = np.random.default_rng([seed, SUITES.index(name)])
        report.extend(_RUNNERS[name](fixture, rng, tol))
    report.wall_time = time.perf_counter() - start
    return report
