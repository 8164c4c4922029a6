import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t2m.atlas import Curve2, Jet2, change_jet_chart, curve_to_jet, jets_equal, polynomial_curve, transition_map
from t2m.bundle import (
    FiberChart,
    FiberPoint,
    Trivialization,
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
from t2m.calculus import identity_map
from t2m.connection import ChristoffelField, worst_compat_residual
from t2m.errors import ChartMismatchError, EmptyOverlapError, ExtractionError, IncompatibleConnectionError

from t2m.config import resolve_fixture

from helpers import rel

SPHERE = resolve_fixture("sphere-stereographic-3chart")


def trivs_of(fx):
    return {c: Trivialization(g) for c, g in fx.christoffels.items()}


def test_trivialize_examples():
    gamma = ChristoffelField("a", 2, lambda y, u, v: np.array([u[0] * v[0], 0.0]))
    T = Trivialization(gamma)
    p = trivialize(T, Jet2("a", [0.1, 0.2], [1, 2], [0, 0]))
    np.testing.assert_array_equal(p.v, [1, 0])
    p = trivialize(T, Jet2("a", [0.1, 0.2], [0, 0], [3, 4]))
    np.testing.assert_array_equal(p.v, [3, 4])
    flat = Trivialization(ChristoffelField.zero("a", 2))
    np.testing.assert_array_equal(trivialize(flat, Jet2("a", [0, 0], [1, 2], [5, 6])).v, [5, 6])
    np.testing.assert_array_equal(untrivialize(flat, FiberPoint("a", [0, 0], [1, 2], [5, 6])).w, [5, 6])
    with pytest.raises(ChartMismatchError):
        trivialize(T, Jet2("b", [0, 0], [1, 2], [0, 0]))


def test_geodesic_fiber_point_has_zero_acceleration(sphere):
    T = Trivialization(sphere.christoffels["N"])
    y, u = np.array([0.3, 0.5]), np.array([1.0, -2.0])
    jet = untrivialize(T, FiberPoint("N", y, u, sphere.christoffels["N"](y, u, u)))
    np.testing.assert_allclose(jet.w, 0.0, atol=1e-15)


def test_roundtrips_on_sphere(sphere):
    rng = np.random.default_rng(21)
    for cid, T in trivs_of(sphere).items():
        worst = 0.0
        for _ in range(100):
            y = rng.uniform(-1.5, 1.5, 2)
            u, v = rng.standard_normal((2, 2))
            p = FiberPoint(cid, y, u, v)
            jet = untrivialize(T, p)
            worst = max(worst, rel(trivialize(T, jet).v, v), rel(untrivialize(T, trivialize(T, jet)).w, jet.w))
        assert worst < 1e-10


def test_inverse_curve_has_the_fiber_point(sphere):
    T = Trivialization(sphere.christoffels["S"])
    p = FiberPoint("S", [0.2, -0.4], [1.0, 0.5], [0.3, 0.7])
    jet = curve_to_jet(T.inverse_curve(p))
    q = trivialize(T, jet)
    np.testing.assert_allclose(q.fiber, p.fiber, atol=1e-14)


def test_equal_jets_give_equal_fiber_points(sphere):
    T = Trivialization(sphere.christoffels["N"])
    c1 = polynomial_curve("N", [0.5, 0.1], [1.0, 2.0], [0.2, 0.0])
    c2 = Curve2("N", lambda t: [0.5 + t + 0.1 * t * t + t**3, 0.1 + 2 * t - 7 * t**3])
    j1, j2 = curve_to_jet(c1), curve_to_jet(c2)
    assert jets_equal(j1, j2, 1e-14)
    np.testing.assert_allclose(trivialize(T, j1).fiber, trivialize(T, j2).fiber, atol=1e-14)


def test_transition_operator_is_ds_times_ds(flat):
    tv = trivs_of(flat)
    sigma = transition_map(flat.atlas, "cart", "polar")
    for y in flat.atlas.overlap_points("cart", "polar"):
        op = transition_function(tv["cart"], tv["polar"], sigma, y)
        assert op.discrepancy < 1e-10
        np.testing.assert_allclose(op.matrix, op.block_form(), atol=1e-10)
    T = Trivialization(flat.christoffels["cart"])
    op = transition_function(T, T, identity_map(2).with_labels("cart", "cart"), [0.5, 0.5])
    np.testing.assert_allclose(op.matrix, np.eye(4), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_transition_well_defined_and_linear(seed):
    fx = SPHERE
    rng = np.random.default_rng(seed)
    tv = trivs_of(fx)
    a, b = [("N", "S"), ("S", "E"), ("E", "N")][seed % 3]
    sigma = transition_map(fx.atlas, a, b)
    y = fx.atlas.overlap_points(a, b, rng, 1)[-1]
    op = transition_function(tv[a], tv[b], sigma, y)
    jet = Jet2(b, y, *rng.standard_normal((2, 2)))
    p = trivialize(tv[b], jet)
    direct = trivialize(tv[a], change_jet_chart(jet, sigma, a))
    assert rel(np.concatenate(op(p.u, p.v)), direct.fiber) < 1e-10
    fmap = lambda u, v: fiber_transition(tv[a], tv[b], sigma, y, u, v)
    assert linearity_defect(fmap, 2, rng) < 1e-12
    back = transition_function(tv[b], tv[a], transition_map(fx.atlas, b, a), sigma(y))
    assert rel(back.matrix @ op.matrix, np.eye(4)) < 1e-10


def test_incompatible_fields_are_refused(flat_fault):
    tv = trivs_of(flat_fault)
    sigma = transition_map(flat_fault.atlas, "cart", "polar")
    with pytest.raises(IncompatibleConnectionError) as info:
        transition_function(tv["cart"], tv["polar"], sigma, [1.3, 0.4])
    assert info.value.residual > 1e-3
    loose = transition_function(tv["cart"], tv["polar"], sigma, [1.3, 0.4], strict=False)
    assert loose.discrepancy > 1e-3


def test_cocycle(sphere, sphere_fault):
    rng = np.random.default_rng(22)
    A = sphere.atlas
    tv = trivs_of(sphere)
    for a, b, c in (("N", "S", "E"), ("E", "S", "N"), ("S", "N", "E")):
        for y in A.triple_points(a, b, c, rng, 5):
            assert cocycle_residual(tv, A, a, b, c, y) < 1e-10
    y = A.triple_points("N", "S", "E", rng, 1)[-1]
    assert cocycle_residual(tv, A, "E", "E", "E", y) < 1e-15
    bad = trivs_of(sphere_fault)
    worst = max(cocycle_residual(bad, A, "N", "E", "S", y) for y in A.triple_points("N", "E", "S", rng, 5))
    assert worst > 1e-3
    with pytest.raises(EmptyOverlapError):
        cocycle_residual(tv, A, "N", "S", "E", [0.0, 1.0])


def test_tm_tm_check(flat, sphere):
    for fx in (flat, sphere):
        records = tm_tm_isomorphism_check(trivs_of(fx), fx.atlas)
        assert records and all(r.passed for r in records)


def test_non_product_chart_fails_tm_tm(flat):
    # mix the acceleration slot into the velocity coordinate
    mixed = FiberChart(
        "polar", 2,
        forward=lambda y, u, w: (u + 0.3 * w, w + flat.christoffels["polar"](y, u, u)),
        backward=None,
    )

    class Mixed:
        chart_id = "polar"
        dim = 2

        def forward(self, y, u, w):
            return mixed.forward(y, u, w)

        def backward(self, y, a, b):
            # solve a = u + 0.3 w, b = w + G(u, u) by fixed point
            u = np.array(a, dtype=float)
            for _ in range(200):
                w = b - flat.christoffels["polar"](y, u, u)
                u = a - 0.3 * w
            return u, w

    tv = trivs_of(flat)
    tv["polar"] = Mixed()
    records = tm_tm_isomorphism_check(tv, flat.atlas)
    assert any(not r.passed for r in records)


def test_raw_jet_change_is_not_linear(flat):
    sigma = transition_map(flat.atlas, "cart", "polar")
    raw = raw_jet_transition(sigma, np.array([1.0, 0.0]))
    rng = np.random.default_rng(23)
    assert linearity_defect(raw, 2, rng) > 1e-2
    # at the documented sample: p1 = (e_theta, 0), p2 = (e_r, 0)
    e_r, e_t, z = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2)
    combo = np.concatenate(raw(e_t + e_r, z))
    parts = np.concatenate(raw(e_t, z)) + np.concatenate(raw(e_r, z))
    assert np.linalg.norm(combo - parts) > 1e-2


def test_extraction_roundtrips(sphere):
    rng = np.random.default_rng(24)
    sym = ChristoffelField("a", 3, lambda y, u, v: np.array([y[0] * u[1] * v[1], u[0] * v[2] + u[2] * v[0], y[2] ** 2 * u[0] * v[0]]))
    asym = ChristoffelField("a", 3, lambda y, u, v: np.array([u[0] * v[1], y[1] * u[2] * v[0], 0.0]))
    pts = list(rng.standard_normal((20, 3)))
    for gamma in (sym, asym):
        got = extract_christoffel(Trivialization(gamma), pts, rng)
        target = gamma.symmetrized()
        for y in pts:
            u, v = rng.standard_normal((2, 3))
            assert rel(got(y, u, v), target(y, u, v)) < 1e-10
    flat = extract_christoffel(Trivialization(ChristoffelField.zero("a", 3)), pts, rng)
    assert np.abs(flat.tensor(pts[0])).max() == 0
    # recovered sphere fields satisfy the compatibility condition
    got = {c: extract_christoffel(Trivialization(g), [], rng, domain=g.domain) for c, g in sphere.christoffels.items()}
    for a, b in sphere.atlas.overlaps():
        res, _ = worst_compat_residual(got[a], got[b], transition_map(sphere.atlas, a, b), sphere.atlas.overlap_points(a, b), rng)
        assert res < 1e-10


def test_extraction_rejects_non_split_charts():
    rng = np.random.default_rng(25)
    not_adapted = FiberChart("a", 2, lambda y, u, w: (2 * u, w), None)
    cubic = FiberChart("a", 2, lambda y, u, w: (u, w + u**3), None)
    nonaffine = FiberChart("a", 2, lambda y, u, w: (u, w + w**2), None)
    for chart in (not_adapted, cubic, nonaffine):
        with pytest.raises(ExtractionError):
            extract_christoffel(chart, [np.array([0.1, 0.2])], rng)
