"""Discrete causal structure and the net of localized algebras.

A lattice point carries an integer time-slice index ``tau`` and a spatial
index ``x``; a point lies in another's future when it can be reached
without exceeding the lattice signal speed, with the light-cone boundary
counting as causal.  The net assigns to each point the full matrix algebra
of the tensor cells inside its closed future cone, represented structurally
by the cell subset (dense matrices only materialize on request, since a
handful of cells already exhausts any reasonable memory budget).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import linalg, opalg
from .errors import CapExceededError, DimensionMismatchError
from .opalg import Operator, OperatorAlgebra, State
from .policy import DEFAULT_POLICY, NumericPolicy

__all__ = [
    "Point",
    "Relation",
    "CausalLattice",
    "Foliation",
    "AlgebraNet",
    "NestingReport",
    "CausalOrderReport",
    "causal_relate",
    "future_cone",
    "foliate",
    "build_tensor_net",
    "build_full_net",
    "verify_nesting",
    "derive_causal_order",
]


class Point(NamedTuple):
    tau: int
    x: int


class Relation(enum.Enum):
    EQUAL = "equal"
    FUTURE = "future"
    PAST = "past"
    SPACELIKE = "spacelike"


@dataclass(frozen=True)
class CausalLattice:
    """A finite 1+1 lattice with a fixed signal speed.

    ``extent_tau`` time slices by ``extent_x`` spatial sites; a signal may
    move at most ``speed`` sites per slice.
    """

    extent_tau: int
    extent_x: int
    speed: int = 1

    def __post_init__(self):
        if self.extent_tau < 1 or self.extent_x < 1:
            raise ValueError("lattice extents must be at least 1")
        if self.speed < 1:
            raise ValueError("signal speed must be at least 1")

    def points(self) -> list[Point]:
        """All points in canonical (tau, x) order."""
        return [Point(t, x) for t in range(self.extent_tau) for x in range(self.extent_x)]

    def contains(self, p: Point) -> bool:
        return 0 <= p.tau < self.extent_tau and 0 <= p.x < self.extent_x


def causal_relate(lattice: CausalLattice, p: Point, q: Point) -> Relation:
    """How ``q`` stands relative to ``p``; the cone boundary is causal."""
    for pt in (p, q):
        if not lattice.contains(pt):
            raise ValueError(f"point {pt} is outside the lattice")
    dt = q.tau - p.tau
    dx = abs(q.x - p.x)
    if dt == 0:
        return Relation.EQUAL if dx == 0 else Relation.SPACELIKE
    if dx <= lattice.speed * abs(dt):
        return Relation.FUTURE if dt > 0 else Relation.PAST
    return Relation.SPACELIKE


def future_cone(lattice: CausalLattice, p: Point) -> tuple[Point, ...]:
    """The closed future cone of ``p``, in canonical order."""
    cone = [q for q in lattice.points()
            if causal_relate(lattice, p, q) in (Relation.EQUAL, Relation.FUTURE)]
    return tuple(cone)


@dataclass(frozen=True)
class Foliation:
    """Constant-time slices, each a list of points with ascending ``x``."""

    leaves: tuple[tuple[Point, ...], ...]

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self):
        return iter(self.leaves)


def foliate(lattice: CausalLattice) -> Foliation:
    leaves = tuple(tuple(Point(t, x) for x in range(lattice.extent_x))
                   for t in range(lattice.extent_tau))
    return Foliation(leaves=leaves)


class AlgebraNet:
    """Point-indexed localized algebras over a shared tensor product.

    ``cells`` is an ordered tuple of abstract tensor slots (each of
    dimension ``cell_dim``); ``supports`` maps every lattice point to the
    sorted tuple of cell indices its algebra acts on.  The algebra at a
    point is all matrices on its support cells tensor the identity on the
    rest — stored as the support set, not as a dense basis.
    """

    def __init__(self, lattice: CausalLattice, cell_dim: int,
                 cells: Sequence[Point] | None = None,
                 supports: Mapping[Point, Sequence[int]] | None = None,
                 *, policy: NumericPolicy = DEFAULT_POLICY):
        if cell_dim < 2:
            raise ValueError("cell dimension must be at least 2")
        self.lattice = lattice
        self.cell_dim = int(cell_dim)
        self.cells = tuple(cells) if cells is not None else tuple(lattice.points())
        if len(set(self.cells)) != len(self.cells):
            raise ValueError("tensor cells must be distinct")
        dim = self.cell_dim ** len(self.cells)
        if dim > policy.dimension_cap:
            raise CapExceededError(
                f"ambient dimension {dim} exceeds the cap {policy.dimension_cap}")
        self.dim = dim
        self._cell_index = {c: i for i, c in enumerate(self.cells)}
        if supports is None:
            supports = {p: self._cone_cells(p) for p in lattice.points()}
        self.supports: dict[Point, tuple[int, ...]] = {}
        for p, idxs in supports.items():
            idxs = tuple(sorted(int(i) for i in idxs))
            if any(i < 0 or i >= len(self.cells) for i in idxs):
                raise ValueError(f"support of {p} names a cell outside the net")
            if len(set(idxs)) != len(idxs):
                raise ValueError(f"support of {p} repeats a cell")
            self.supports[p] = idxs
        for p in lattice.points():
            if p not in self.supports:
                raise ValueError(f"no support assigned to lattice point {p}")

    def _cone_cells(self, p: Point) -> tuple[int, ...]:
        cone = future_cone(self.lattice, p)
        return tuple(self._cell_index[q] for q in cone if q in self._cell_index)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def support(self, p: Point) -> tuple[int, ...]:
        try:
            return self.supports[p]
        except KeyError:
            raise ValueError(f"point {p} is outside the net") from None

    def factor_dim(self, p: Point) -> int:
        return self.cell_dim ** len(self.support(p))

    def algebra_dim(self, p: Point) -> int:
        """Linear dimension of the localized algebra at ``p``."""
        return (self.cell_dim ** 2) ** len(self.support(p))

    def embed(self, op, support: Sequence[int]) -> np.ndarray:
        """Operator on the given support cells, as a full-space matrix."""
        mat = op.entries if isinstance(op, Operator) else np.asarray(op, dtype=complex)
        return linalg.embed_factor(mat, tuple(support), self.n_cells, self.cell_dim)

    def reduce_state(self, omega, support: Sequence[int]) -> np.ndarray:
        """Partial trace of a state down to the support cells."""
        rho = omega.rho if isinstance(omega, State) else np.asarray(omega, dtype=complex)
        if rho.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"state dim {rho.shape[0]} does not match net dim {self.dim}")
        return linalg.partial_trace(rho, tuple(support), self.n_cells, self.cell_dim)

    def reduce_operator(self, op, support: Sequence[int]) -> tuple[np.ndarray, float]:
        """Factor part of an operator localized on ``support``, plus the residual.

        The residual is the Hilbert-Schmidt distance between ``op`` and the
        embedding of the returned factor; it vanishes iff ``op`` acts as the
        identity outside the support.
        """
        mat = op.entries if isinstance(op, Operator) else np.asarray(op, dtype=complex)
        rest = self.dim // (self.cell_dim ** len(support))
        factor = linalg.partial_trace(mat, tuple(support), self.n_cells, self.cell_dim) / rest
        residual = float(np.linalg.norm((mat - self.embed(factor, support)).ravel()))
        return factor, residual

    def membership_residual(self, op, p: Point) -> float:
        _, residual = self.reduce_operator(op, self.support(p))
        return residual

    def dense_algebra_at(self, p: Point, *, policy: NumericPolicy = DEFAULT_POLICY,
                         max_elements: int = 1 << 22) -> OperatorAlgebra:
        """Materialize the localized algebra as an explicit basis.

        Basis elements are the embedded matrix units of the support factor,
        normalized to Hilbert-Schmidt length 1.  Refuses when the basis
        would not fit in a sane amount of memory.
        """
        support = self.support(p)
        k = self.algebra_dim(p)
        if k * self.dim * self.dim > max_elements:
            raise CapExceededError(
                f"dense basis at {p} needs {k} x {self.dim}^2 entries; raise max_elements to force")
        fdim = self.cell_dim ** len(support)
        rest = self.dim // fdim
        norm = np.sqrt(float(rest))
        ops = []
        for a in range(fdim):
            for b in range(fdim):
                unit = np.zeros((fdim, fdim), dtype=complex)
                unit[a, b] = 1.0
                ops.append(self.embed(unit, support) / norm)
        return OperatorAlgebra(ops, policy=policy, validate=False)

    def cell_generators(self, p: Point) -> list[np.ndarray]:
        """Embedded single-cell matrix units generating the algebra at ``p``."""
        gens = []
        for cell in self.support(p):
            for a in range(self.cell_dim):
                for b in range(self.cell_dim):
                    unit = np.zeros((self.cell_dim, self.cell_dim), dtype=complex)
                    unit[a, b] = 1.0
                    gens.append(self.embed(unit, (cell,)))
        return gens

    def __repr__(self) -> str:
        return (f"AlgebraNet(cells={self.n_cells}, cell_dim={self.cell_dim}, "
                f"dim={self.dim})")


def build_tensor_net(lattice: CausalLattice, cell_dim: int = 2,
                     *, policy: NumericPolicy = DEFAULT_POLICY) -> AlgebraNet:
    """One tensor cell per lattice point; algebras live on closed future cones."""
    return AlgebraNet(lattice, cell_dim, policy=policy)


def build_full_net(lattice: CausalLattice, cell_dim: int = 2, n_cells: int = 1,
                   *, policy: NumericPolicy = DEFAULT_POLICY) -> AlgebraNet:
    """Every point carries the full algebra of a fixed set of cells.

    This is the structureless control: localized algebras never shrink
    toward the future, so no causal order can be recovered from them.
    """
    cells = lattice.points()[:n_cells]
    if len(cells) < n_cells:
        raise ValueError("lattice has fewer points than requested cells")
    all_cells = tuple(range(n_cells))
    supports = {p: all_cells for p in lattice.points()}
    return AlgebraNet(lattice, cell_dim, cells=cells, supports=supports, policy=policy)


@dataclass
class NestingReport:
    """Whether one point's algebra sits strictly inside another's, non-trivially."""

    p: Point
    q: Point
    strict_inclusion: bool
    rel_commutant_dim: int
    rel_commutant_abelian: bool
    holds: bool
    method: str = "structural"


def verify_nesting(net: AlgebraNet, p: Point, q: Point,
                   *, policy: NumericPolicy = DEFAULT_POLICY,
                   dense: bool = False) -> NestingReport:
    """Check the algebraic signature of ``q`` lying in ``p``'s causal future.

    The signature: the algebra at ``q`` is strictly contained in the
    algebra at ``p``, and its relative commutant inside the latter is
    non-abelian (dimension at least 4).  Non-causal pairs simply yield a
    report with ``holds`` false — that asymmetry is the point.

    The structural route reads everything off the support sets; the dense
    route materializes bases and recomputes the relative commutant with
    generic linear algebra (only sensible on small nets).
    """
    sp, sq = set(net.support(p)), set(net.support(q))
    if dense:
        return _verify_nesting_dense(net, p, q, policy=policy)
    strict = sq < sp
    diff = sp - sq
    rel_dim = (net.cell_dim ** 2) ** len(diff)
    abelian = len(diff) == 0
    holds = strict and not abelian and rel_dim >= 4
    return NestingReport(p=p, q=q, strict_inclusion=strict,
                         rel_commutant_dim=rel_dim, rel_commutant_abelian=abelian,
                         holds=holds)


def _verify_nesting_dense(net: AlgebraNet, p: Point, q: Point,
                          *, policy: NumericPolicy) -> NestingReport:
    alg_p = net.dense_algebra_at(p, policy=policy)
    alg_q = net.dense_algebra_at(q, policy=policy)
    included = all(alg_p.membership_residual(b) <= policy.tol_closure
                   for b in alg_q.basis)
    strict = included and alg_q.dim < alg_p.dim
    comm_q = opalg.commutant_of_operators(net.cell_generators(q), net.dim,
                                          policy=policy, include_adjoints=False)
    rows = linalg.subspace_intersection(comm_q.flat_basis, alg_p.flat_basis,
                                        policy.tol_closure)
    rel = OperatorAlgebra(list(rows.reshape(-1, net.dim, net.dim)),
                          policy=policy, validate=False)
    abelian = rel.is_abelian(policy=policy)
    holds = strict and not abelian and rel.dim >= 4
    return NestingReport(p=p, q=q, strict_inclusion=strict,
                         rel_commutant_dim=rel.dim, rel_commutant_abelian=abelian,
                         holds=holds, method="dense")


@dataclass
class CausalOrderReport:
    """Causal order reconstructed from algebra inclusions alone."""

    future_pairs: list[tuple[Point, Point]]
    geometric_pairs: list[tuple[Point, Point]]
    matches_geometric: bool
    mismatches: list[tuple[Point, Point, str, str]] = field(default_factory=list)


def derive_causal_order(net: AlgebraNet,
                        *, policy: NumericPolicy = DEFAULT_POLICY) -> CausalOrderReport:
    """Recover the lattice order from nesting reports over all ordered pairs."""
    pts = net.lattice.points()
    derived, geometric, mismatches = [], [], []
    for p in pts:
        for q in pts:
            if p == q:
                continue
            alg_says = verify_nesting(net, p, q, policy=policy).holds
            geom_says = causal_relate(net.lattice, p, q) is Relation.FUTURE
            if alg_says:
                derived.append((p, q))
            if geom_says:
                geometric.append((p, q))
            if alg_says != geom_says:
                mismatches.append((p, q,
                                   "future" if alg_says else "unrelated",
                                   "future" if geom_says else "unrelated"))
    return CausalOrderReport(future_pairs=derived, geometric_pairs=geometric,
                             matches_geometric=not mismatches, mismatches=mismatches)
