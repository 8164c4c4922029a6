"""Finite towers of model spaces and the projective-limit constructions on them.

Levels are numbered ``1..depth``.  ``rho[(j, i)]`` for ``j >= i`` is the
connecting linear map ``E^j -> E^i`` and every level carries a single
projective-limit chart, so the chart expression of the manifold connecting
map is ``rho`` itself unless a nonlinear one is stored.  A finite tower has
the deepest level as its limit; "the limit exists" means every finite-level
compatibility condition holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .atlas import Jet2, change_jet_chart, curve_to_jet, polynomial_curve
from .bundle import Trivialization, transition_function, trivialize
from .calculus import SmoothMap2, affine_map, as_vector, eval_map2
from .connection import ChristoffelField, vilms_local
from .errors import ChartMismatchError, ParameterError, ReconstructionError, ShapeError
from .report import CheckRecord


def level_chart(i: int) -> str:
    return f"level{i}"


@dataclass(frozen=True)
class Tower:
    level_dims: tuple[int, ...]
    rho: Mapping[tuple[int, int], np.ndarray] = field(repr=False)
    phi: Mapping[tuple[int, int], SmoothMap2] = field(default_factory=dict, repr=False)
    name: str = "tower"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.level_dims)
        if not dims or min(dims) < 1:
            raise ParameterError("a tower needs at least one level of positive dimension")
        if any(b < a for a, b in zip(dims, dims[1:])):
            raise ParameterError(f"level dimensions must be non-decreasing, got {dims}")
        object.__setattr__(self, "level_dims", dims)
        for (j, i), R in self.rho.items():
            if np.shape(R) != (dims[i - 1], dims[j - 1]):
                raise ShapeError(f"rho[{j},{i}] has shape {np.shape(R)}, expected {(dims[i - 1], dims[j - 1])}")

    @property
    def depth(self) -> int:
        return len(self.level_dims)

    def dim(self, i: int) -> int:
        self._check_level(i)
        return self.level_dims[i - 1]

    def _check_level(self, i: int) -> None:
        if not 1 <= i <= self.depth:
            raise ParameterError(f"level {i} outside 1..{self.depth}")

    def connecting(self, j: int, i: int) -> np.ndarray:
        """The matrix ``rho^{ji}``; ``rho^{ii}`` defaults to the identity."""
        self._check_level(j)
        self._check_level(i)
        if i > j:
            raise ParameterError(f"connecting maps go downwards, got {j} -> {i}")
        if (j, i) in self.rho:
            return np.asarray(self.rho[(j, i)], dtype=float)
        if i == j:
            return np.eye(self.dim(i))
        raise ParameterError(f"tower {self.name!r} stores no rho[{j},{i}]")

    def chart_map(self, j: int, i: int) -> SmoothMap2:
        """Chart expression of ``phi^{ji}`` between the level charts."""
        sigma = self.phi.get((j, i)) or affine_map(self.connecting(j, i), name=f"rho[{j},{i}]")
        return sigma.with_labels(level_chart(j), level_chart(i))

    @classmethod
    def truncation(cls, dims: Sequence[int], name: str = "truncation") -> Tower:
        """``E^i = R^{d_i}`` with connecting maps dropping trailing coordinates."""
        dims = tuple(int(d) for d in dims)
        rho = {}
        for j in range(1, len(dims) + 1):
            for i in range(1, j + 1):
                R = np.zeros((dims[i - 1], dims[j - 1]))
                R[:, : dims[i - 1]] = np.eye(dims[i - 1])
                R.setflags(write=False)
                rho[(j, i)] = R
        return cls(dims, rho, name=name)

    @classmethod
    def from_adjacent(cls, dims: Sequence[int], adjacent: Sequence, name: str = "tower") -> Tower:
        """Build all ``rho^{ji}`` by composing ``adjacent[i-1] = rho^{i+1, i}``."""
        dims = tuple(int(d) for d in dims)
        if len(adjacent) != len(dims) - 1:
            raise ShapeError(f"need {len(dims) - 1} adjacent maps, got {len(adjacent)}")
        rho = {}
        for j in range(1, len(dims) + 1):
            R = np.eye(dims[j - 1])
            rho[(j, j)] = R
            for i in range(j - 1, 0, -1):
                R = np.asarray(adjacent[i - 1], dtype=float) @ R
                rho[(j, i)] = R
        return cls(dims, rho, name=name)

    def with_rho(self, j: int, i: int, matrix) -> Tower:
        rho = dict(self.rho)
        rho[(j, i)] = np.asarray(matrix, dtype=float)
        return Tower(self.level_dims, rho, self.phi, self.name)


def _pairs(depth: int):
    for j in range(1, depth + 1):
        for i in range(1, j + 1):
            yield j, i


def _rel(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0)) / max(1.0, float(np.max(np.abs(b), initial=0.0)))


def project_jet(jet: Jet2, tower: Tower, j: int, i: int) -> Jet2:
    """``g^{ji}``: push a level-``j`` jet down to level ``i``."""
    if i > j:
        raise ParameterError(f"cannot project from level {j} up to level {i}")
    if jet.chart_id != level_chart(j):
        raise ChartMismatchError(f"jet lives in {jet.chart_id!r}, expected {level_chart(j)!r}")
    if i == j:
        return jet
    return change_jet_chart(jet, tower.chart_map(j, i))


def check_tower(tower: Tower, rng: np.random.Generator | None = None, jets: int = 5, tol: float = 1e-12) -> list[CheckRecord]:
    """Residuals of the projective-system identities.

    Covers ``rho^{ii} = id``, ``rho^{jk} = rho^{ik} rho^{ji}``, surjectivity
    of every ``rho^{ji}``, chart compatibility of stored ``phi^{ji}`` and
    ``g^{jk} = g^{ik} g^{ji}`` on random jets.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    records = []
    N = tower.depth
    for i in range(1, N + 1):
        records.append(CheckRecord("tower.rho.identity", f"level {i}", _rel(tower.connecting(i, i), np.eye(tower.dim(i))), tol))
    for j, i in _pairs(N):
        R = tower.connecting(j, i)
        deficiency = tower.dim(i) - np.linalg.matrix_rank(R)
        records.append(CheckRecord("tower.rho.surjective", f"{j}->{i}", float(deficiency), 0.0))
        for k in range(1, i + 1):
            if k == i or i == j:
                continue
            lhs = tower.connecting(j, k)
            rhs = tower.connecting(i, k) @ R
            records.append(CheckRecord("tower.rho.composition", f"{j}->{i}->{k}", _rel(lhs, rhs), tol))
    for (j, i), phi in sorted(tower.phi.items()):
        R = tower.connecting(j, i)
        worst = 0.0
        for _ in range(jets):
            y, u, v = rng.standard_normal((3, tower.dim(j)))
            val, du, d2 = eval_map2(phi, y, u, v)
            worst = max(worst, _rel(val, R @ y), _rel(du, R @ u), _rel(d2, np.zeros_like(d2)))
        records.append(CheckRecord("tower.phi.chart", f"{j}->{i}", worst, tol))
    for j in range(3, N + 1):
        for _ in range(jets):
            y, u, w = rng.standard_normal((3, tower.dim(j)))
            jet = Jet2(level_chart(j), y, u, w)
            for i in range(2, j):
                for k in range(1, i):
                    direct = project_jet(jet, tower, j, k)
                    via = project_jet(project_jet(jet, tower, j, i), tower, i, k)
                    res = max(_rel(via.y, direct.y), _rel(via.u, direct.u), _rel(via.w, direct.w))
                    records.append(CheckRecord("tower.g.composition", f"{j}->{i}->{k}", res, tol))
    return _worst_per_location(records)


def _worst_per_location(records: list[CheckRecord]) -> list[CheckRecord]:
    worst: dict[tuple[str, str], CheckRecord] = {}
    for r in records:
        key = (r.check, r.location)
        if key not in worst or r.residual > worst[key].residual:
            worst[key] = r
    return list(worst.values())


@dataclass(frozen=True)
class TowerJet:
    """A compatible family of level jets; ``levels[i - 1]`` lives at level ``i``."""

    levels: tuple[Jet2, ...]

    @property
    def limit(self) -> Jet2:
        return self.levels[-1]

    def __len__(self) -> int:
        return len(self.levels)


def limit_to_family(jet: Jet2, tower: Tower) -> TowerJet:
    """The bijection ``F``: a jet of the limit, read at every level."""
    N = tower.depth
    return TowerJet(tuple(project_jet(jet, tower, N, i) for i in range(1, N + 1)))


def family_violation(family: Sequence[Jet2], tower: Tower, tol: float = 1e-12):
    """First pair ``(j, i)`` with ``g^{ji}(jet_j) != jet_i`` beyond ``tol``, or ``None``."""
    for j in range(2, tower.depth + 1):
        for i in range(1, j):
            p = project_jet(family[j - 1], tower, j, i)
            q = family[i - 1]
            res = max(_rel(p.y, q.y), _rel(p.u, q.u), _rel(p.w, q.w))
            if res > tol:
                return (j, i), res
    return None


def reconstruct_limit_jet(family: Sequence[Jet2], tower: Tower, tol: float = 1e-12) -> TowerJet:
    """Assemble the limit jet of a compatible level family.

    The limit coordinates ``(y, u, w)`` are the compatible families of level
    coordinates; the quadratic curve ``h(t) = y + t u + t^2/2 w`` in the limit
    chart represents the class, and its projections reproduce the family.
    """
    family = tuple(family)
    if len(family) != tower.depth:
        raise ShapeError(f"family has {len(family)} levels, tower has {tower.depth}")
    for i, jet in enumerate(family, start=1):
        if jet.chart_id != level_chart(i) or jet.dim != tower.dim(i):
            raise ShapeError(f"family entry {i} is not a level-{i} jet")
    bad = family_violation(family, tower, tol)
    if bad is not None:
        (j, i), res = bad
        raise ReconstructionError(f"levels {j} and {i} are not compatible (residual {res:.3e})", (j, i), res)
    top = family[-1]
    limit = curve_to_jet(polynomial_curve(level_chart(tower.depth), top.y, top.u, top.w))
    return limit_to_family(limit, tower)


def random_compatible_family(tower: Tower, rng: np.random.Generator) -> tuple[Jet2, ...]:
    y, u, w = rng.standard_normal((3, tower.dim(tower.depth)))
    return limit_to_family(Jet2(level_chart(tower.depth), y, u, w), tower).levels


# -- the group of compatible level-wise linear maps -------------------------


@dataclass(frozen=True)
class TowerLinearMap:
    """Level-indexed linear maps ``l^i`` on ``E^i x E^i`` (matrices ``2d_i x 2d_i``)."""

    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = []
        for M in self.levels:
            M = np.array(M, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
                raise ShapeError(f"level map of shape {M.shape} is not a square even-sized matrix")
            M.setflags(write=False)
            mats.append(M)
        object.__setattr__(self, "levels", tuple(mats))

    @classmethod
    def identity(cls, tower: Tower) -> TowerLinearMap:
        return cls(tuple(np.eye(2 * d) for d in tower.level_dims))

    @classmethod
    def diagonal(cls, tower: Tower, entries) -> TowerLinearMap:
        """Levels ``diag(e[:d], e[:d])`` cut from one sequence of entries."""
        entries = np.asarray(entries, dtype=float)
        return cls(tuple(np.diag(np.concatenate([entries[:d], entries[:d]])) for d in tower.level_dims))

    @classmethod
    def product(cls, blocks: Sequence[np.ndarray]) -> TowerLinearMap:
        """Levels ``A^i x A^i`` from level matrices ``A^i``."""
        out = []
        for A in blocks:
            n = A.shape[0]
            M = np.zeros((2 * n, 2 * n))
            M[:n, :n] = A
            M[n:, n:] = A
            out.append(M)
        return cls(tuple(out))


class Membership(NamedTuple):
    member: bool
    residual: float
    reason: str = ""


def _doubled(R: np.ndarray) -> np.ndarray:
    m, n = R.shape
    out = np.zeros((2 * m, 2 * n))
    out[:m, :n] = R
    out[m:, n:] = R
    return out


def tower_membership(l: TowerLinearMap, tower: Tower, tol: float = 1e-12) -> Membership:
    """Whether ``l`` is invertible levelwise and ``(rho x rho) l^j = l^k (rho x rho)``."""
    if len(l.levels) != tower.depth:
        return Membership(False, float("inf"), f"{len(l.levels)} levels for a depth-{tower.depth} tower")
    for i, M in enumerate(l.levels, start=1):
        if M.shape != (2 * tower.dim(i), 2 * tower.dim(i)):
            return Membership(False, float("inf"), f"level {i} has shape {M.shape}")
        if not np.all(np.isfinite(M)) or np.linalg.cond(M) > 1e12:
            return Membership(False, float("inf"), f"level {i} is not invertible")
    worst, where = 0.0, ""
    for j, k in _pairs(tower.depth):
        if j == k:
            continue
        R = _doubled(tower.connecting(j, k))
        res = _rel(R @ l.levels[j - 1], l.levels[k - 1] @ R)
        if res > worst:
            worst, where = res, f"levels {j}->{k}"
    if worst > tol:
        return Membership(False, worst, f"does not commute with connecting maps at {where}")
    return Membership(True, worst)


def compose(a: TowerLinearMap, b: TowerLinearMap) -> TowerLinearMap:
    if len(a.levels) != len(b.levels):
        raise ShapeError("tower maps of different depth")
    return TowerLinearMap(tuple(x @ y for x, y in zip(a.levels, b.levels)))


def invert(a: TowerLinearMap) -> TowerLinearMap:
    out = []
    for i, M in enumerate(a.levels, start=1):
        if np.linalg.cond(M) > 1e12:
            raise ParameterError(f"level {i} map is singular")
        out.append(np.linalg.inv(M))
    return TowerLinearMap(tuple(out))


def tower_group_op(a: TowerLinearMap, b: TowerLinearMap | None = None, op: str = "compose") -> TowerLinearMap:
    if op == "compose":
        if b is None:
            raise ParameterError("compose needs two tower maps")
        return compose(a, b)
    if op == "invert":
        return invert(a)
    raise ParameterError(f"unknown group operation {op!r}")


# -- connections on towers ---------------------------------------------------


@dataclass(frozen=True)
class TowerChristoffel:
    levels: tuple[ChristoffelField, ...]

    def trivializations(self) -> tuple[Trivialization, ...]:
        return tuple(Trivialization(g) for g in self.levels)


def limit_square_residual(
    trivs: Sequence, tower: Tower, j: int, i: int, jets: Sequence[Jet2]
) -> float:
    """Largest defect of the two squares relating level ``j`` and level ``i``.

    Base: ``phi^{ji}(pi(jet)) = pi(g^{ji} jet)``.  Fibers:
    ``(phi x rho x rho)(Phi^j(jet)) = Phi^i(g^{ji} jet)``.
    """
    if i > j:
        raise ParameterError(f"need j >= i, got {j}, {i}")
    if len(trivs) < tower.depth or trivs[j - 1] is None or trivs[i - 1] is None:
        raise ParameterError(f"missing level trivializations for levels {j} and {i}")
    R = tower.connecting(j, i)
    phi = tower.chart_map(j, i)
    worst = 0.0
    for jet in jets:
        down = project_jet(jet, tower, j, i)
        worst = max(worst, _rel(phi(jet.y), down.y))
        top = trivialize(trivs[j - 1], jet)
        low = trivialize(trivs[i - 1], down)
        worst = max(worst, _rel(R @ top.u, low.u), _rel(R @ top.v, low.v))
    return worst


def limit_connection_check(
    gammas: TowerChristoffel, tower: Tower, rng: np.random.Generator, samples: int = 10, tol: float = 1e-10
) -> list[CheckRecord]:
    """Level compatibility ``rho Gamma^j(y)(u)(v) = Gamma^i(rho y)(rho u)(rho v)`` and
    commutation of the local connection maps with ``rho``."""
    records = []
    for j, i in _pairs(tower.depth):
        if i == j:
            continue
        R = tower.connecting(j, i)
        gj, gi = gammas.levels[j - 1], gammas.levels[i - 1]
        eq = vil = 0.0
        for _ in range(samples):
            y, u, v, w = rng.standard_normal((4, tower.dim(j)))
            eq = max(eq, _rel(R @ gj(y, u, v), gi(R @ y, R @ u, R @ v)))
            _, top = vilms_local(gj, y, u, v, w)
            _, low = vilms_local(gi, R @ y, R @ u, R @ v, R @ w)
            vil = max(vil, _rel(R @ top, low))
        records.append(CheckRecord("tower.gamma.equivariance", f"{j}->{i}", eq, tol))
        records.append(CheckRecord("tower.connection.commutes", f"{j}->{i}", vil, tol))
    return records


def tower_transition(trivs_a: Sequence, trivs_b: Sequence, sigmas: Sequence[SmoothMap2], tower: Tower, y, strict: bool = True) -> TowerLinearMap:
    """Levelwise transition operators at the limit point ``y`` (chart ``b``).

    ``sigmas[i - 1]`` is the level-``i`` transition from chart ``b`` to ``a``.
    """
    y = as_vector(y, tower.dim(tower.depth))
    mats = []
    for i in range(1, tower.depth + 1):
        yi = tower.connecting(tower.depth, i) @ y
        mats.append(transition_function(trivs_a[i - 1], trivs_b[i - 1], sigmas[i - 1], yi, strict=strict).matrix)
    return TowerLinearMap(tuple(mats))


def _coordinate_levels(tower: Tower) -> np.ndarray:
    """Level at which each coordinate of the deepest space first appears.

    Only defined for towers whose connecting maps keep leading coordinates.
    """
    N = tower.depth
    for j, i in _pairs(N):
        R = tower.connecting(j, i)
        expected = np.zeros_like(R)
        expected[:, : tower.dim(i)] = np.eye(tower.dim(i))
        if not np.array_equal(R, expected):
            raise ParameterError("random members are only generated for truncation towers")
    levels = np.empty(tower.dim(N), dtype=int)
    start = 0
    for i, d in enumerate(tower.level_dims, start=1):
        levels[start:d] = i
        start = d
    return levels


def random_tower_map(tower: Tower, rng: np.random.Generator, scale: float = 0.3) -> TowerLinearMap:
    """A random element of the compatible group for a truncation tower.

    An output coordinate may only depend on input coordinates appearing at
    the same or an earlier level, in either factor; the identity is added to
    keep every level well conditioned.
    """
    lev = _coordinate_levels(tower)
    n = tower.dim(tower.depth)
    both = np.concatenate([lev, lev])
    mask = both[None, :] <= both[:, None]
    M = np.eye(2 * n) + scale * rng.standard_normal((2 * n, 2 * n)) * mask
    mats = []
    for d in tower.level_dims:
        idx = np.r_[0:d, n : n + d]
        mats.append(M[np.ix_(idx, idx)])
    return TowerLinearMap(tuple(mats))
