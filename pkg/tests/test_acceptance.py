"""Acceptance gate: one test per acceptance criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from t2m.atlas import Jet2, transition_map
from t2m.bundle import Trivialization, extract_christoffel, linearity_defect, raw_jet_transition
from t2m.calculus import compose_map2, eval_map2, fd_check, from_scalar_function
from t2m.config import resolve_fixture
from t2m.connection import ChristoffelField, compat_residual, pushforward_christoffel
from t2m.suites import run_suite

from helpers import poly_map, rel

RESULTS: list[str] = []
FAULTS = ("flat-cartesian-polar-fault", "sphere-stereographic-3chart-fault", "truncation-tower-d4-fault")


def _record(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_chain_rule():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_chain = worst_fd = 0.0
    for _ in range(50):
        n, m, k = rng.integers(2, 5, 3)
        inner, f = poly_map(rng, n, m)
        outer, g = poly_map(rng, m, k)
        direct = from_scalar_function(lambda y, f=f, g=g: g(f(y)), n, k)
        comp = compose_map2(outer, inner)
        y, u, v = 0.5 * rng.standard_normal((3, n))
        for a, b in zip(eval_map2(comp, y, u, v), eval_map2(direct, y, u, v)):
            worst_chain = max(worst_chain, rel(a, b))
        rep = fd_check(comp, y, step=1e-4, samples=4, seed=int(rng.integers(1000)))
        worst_fd = max(worst_fd, rep.max_rel_error_first, rep.max_rel_error_second)
    elapsed = time.perf_counter() - start
    ok = worst_chain < 1e-10 and worst_fd < 1e-6 and elapsed < 5
    _record("chain rule", ok, f"compose vs direct {worst_chain:.2e} (<1e-10), fd {worst_fd:.2e} (<1e-6), {elapsed:.2f}s (<5s)")


def test_pushforward_flat_plane():
    fx = resolve_fixture("flat-cartesian-polar")
    A = fx.atlas
    pushed = pushforward_christoffel(fx.christoffels["cart"], transition_map(A, "polar", "cart"), transition_map(A, "cart", "polar"))
    sigma = transition_map(A, "cart", "polar")
    rng = np.random.default_rng(7)
    worst_res = worst_sym = 0.0
    for _ in range(20):
        y = np.array([rng.uniform(0.3, 2.5), rng.uniform(-3.0, 3.0)])
        u, v = rng.standard_normal((2, 2))
        worst_res = max(worst_res, float(np.linalg.norm(compat_residual(fx.christoffels["cart"], pushed, sigma, y, u, v))))
        G = pushed.tensor(y)
        r = y[0]
        worst_sym = max(worst_sym, abs(G[0, 1, 1] + r), abs(G[1, 0, 1] - 1 / r), abs(G[1, 1, 0] - 1 / r))
    ok = worst_res < 1e-10 and worst_sym < 1e-10
    _record("pushforward on flat plane", ok, f"compatibility residual {worst_res:.2e}, polar symbols vs oracle {worst_sym:.2e} (both <1e-10)")


def test_trivialization_suite():
    start = time.perf_counter()
    lines, ok = [], True
    for name in ("flat-cartesian-polar", "sphere-stereographic-3chart"):
        report = run_suite(resolve_fixture(name), "bundle", seed=0)
        checks = {r.check for r in report.records}
        needed = {"bundle.roundtrip.fiber", "bundle.roundtrip.jet", "bundle.transition.blocks", "bundle.fiber.linear", "bundle.well-defined"}
        if name.startswith("sphere"):
            needed.add("bundle.cocycle")
        ok &= report.passed and needed <= checks
        cocycle = max((r.residual for r in report.records if r.check == "bundle.cocycle"), default=0.0)
        lines.append(f"{name} {len(report.records)} checks {'pass' if report.passed else 'FAIL'} (cocycle {cocycle:.1e})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10
    _record("trivialization suite", ok, "; ".join(lines) + f"; {elapsed:.2f}s (<10s)")


def test_necessity_witness():
    fx = resolve_fixture("flat-cartesian-polar")
    sigma = transition_map(fx.atlas, "cart", "polar")
    raw = raw_jet_transition(sigma, np.array([1.0, 0.0]))
    e_r, e_t, z = np.eye(2)[0], np.eye(2)[1], np.zeros(2)
    documented = float(np.linalg.norm(np.concatenate(raw(e_t + e_r, z)) - np.concatenate(raw(e_t, z)) - np.concatenate(raw(e_r, z))))
    probe = linearity_defect(raw, 2, np.random.default_rng(0))
    in_suite = [r for r in run_suite(fx, "bundle").records if r.check == "bundle.necessity-witness"]
    ok = documented > 1e-2 and probe > 1e-2 and bool(in_suite) and all(r.passed for r in in_suite)
    _record("necessity witness", ok, f"raw chart change additivity gap {documented:.2e} at polar (1,0), probe {probe:.2e} (>1e-2), {len(in_suite)} suite records")


def test_extraction_roundtrip():
    rng = np.random.default_rng(5)
    sym = ChristoffelField("a", 3, lambda y, u, v: np.array([y[0] * u[1] * v[1], u[0] * v[2] + u[2] * v[0], np.sin(y[2]) * u[0] * v[0]]))
    asym = ChristoffelField("a", 3, lambda y, u, v: np.array([u[0] * v[1], y[1] * u[2] * v[0], y[0] * u[1] * v[2]]))
    pts = list(rng.standard_normal((20, 3)))
    errs = []
    for gamma in (sym, asym):
        got = extract_christoffel(Trivialization(gamma), pts, rng)
        target = gamma.symmetrized()
        errs.append(max(rel(got(y, u, v), target(y, u, v)) for y in pts for u, v in [rng.standard_normal((2, 3))]))
    ok = max(errs) < 1e-10
    _record("extraction roundtrip", ok, f"symmetric {errs[0]:.2e}, asymmetric vs symmetrization {errs[1]:.2e} (<1e-10)")


def test_tower_suite():
    start = time.perf_counter()
    report = run_suite(resolve_fixture("truncation-tower-d4"), "tower", seed=0)
    by = lambda c: [r for r in report.records if r.check == c]
    squares = max(r.residual for r in by("tower.square"))
    bij = max(r.residual for r in by("tower.bijection.reconstruct") + by("tower.bijection.project"))
    faults = {name: run_suite(resolve_fixture(name), "all", seed=0) for name in FAULTS}
    loud = all(not r.passed and r.failures() for r in faults.values())
    elapsed = time.perf_counter() - start
    ok = report.passed and squares < 1e-10 and bij <= 1e-12 and loud and elapsed < 10
    fault_text = ", ".join(f"{n} {len(r.failures())} failing" for n, r in faults.items())
    _record("tower suite", ok, f"{len(report.records)} checks {'pass' if report.passed else 'FAIL'}, squares {squares:.1e}, bijection {bij:.1e}; {fault_text}; {elapsed:.2f}s (<10s)")


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "t2m", *args], capture_output=True, text=True)


def test_cli_determinism_and_exit_status():
    bodies = []
    for _ in range(2):
        proc = _cli("verify", "--config", "sphere-stereographic-3chart", "--suite", "all", "--seed", "17")
        doc = json.loads(proc.stdout)
        doc.pop("wall_time")
        bodies.append(json.dumps(doc, indent=2).encode())
    identical = bodies[0] == bodies[1] and proc.returncode == 0
    codes = {name: _cli("verify", "--config", name, "--suite", "all").returncode for name in FAULTS}
    ok = identical and all(c != 0 for c in codes.values())
    _record("CLI determinism and exit status", ok, f"report bodies identical: {identical}; fault exit codes {codes}")


if __name__ == "__main__":
    failed = 0
    for fn in [v for k, v in list(globals().items()) if k.startswith("test_")]:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
