"""History operators, branching trees, and Monte-Carlo history sampling.

A history is a causally ordered sequence of realized events; its operator
is the product of the event projections with the earliest factor acting
first (rightmost).  Trees are built leaf by leaf along a foliation: each
branch detects events at every point of the current leaf from its own
entry state, then forks over outcomes point by point in canonical spatial
order, conditioning as it goes.  Chain-rule consistency (path probability
= product of conditional probabilities = history-operator normalization)
is exact by construction and re-verified in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BranchOverflowError, CommutationError, NullBranchError
from .events import ActualEvent, _spectral_family
from .linalg import operator_norm
from .opalg import Operator, PotentialEvent, State
from .policy import DEFAULT_POLICY, NumericPolicy
from .spacetime import AlgebraNet, CausalLattice, Foliation, Point, Relation, causal_relate

__all__ = [
    "HistoryOperator",
    "BranchNode",
    "HistoryTree",
    "SampledHistory",
    "SampleSummary",
    "history_operator",
    "history_probability",
    "propagate_state",
    "apply_propagator",
    "enumerate_tree",
    "sample_history",
    "sample_paths",
]


@dataclass
class HistoryOperator:
    """Product of event projections in causal order (earliest rightmost)."""

    events: tuple[ActualEvent, ...]
    matrix: np.ndarray
    spacelike_norms: list[tuple[Point, Point, float]]
    flagged: bool

    def as_operator(self) -> Operator:
        return Operator(self.matrix)


def history_operator(events: Sequence[ActualEvent], lattice: CausalLattice | None = None,
                     *, policy: NumericPolicy = DEFAULT_POLICY) -> HistoryOperator:
    """Assemble the ordered product for a sequence of realized events.

    Events at spacelike points commute up to numerics, so any causal
    extension of the partial order gives the same operator; the canonical
    (tau, x) order is used.  Spacelike commutator norms are recorded, and
    the history is flagged when one exceeds ``tol_commutation``.
    """
    events = list(events)
    points = [e.point for e in events]
    if any(p is None for p in points):
        raise ValueError("history events must carry lattice points")
    if len(set(points)) != len(points):
        raise ValueError("history contains two events at the same point")
    ordered = sorted(events, key=lambda e: (e.point.tau, e.point.x))
    dim = ordered[0].projection.dim if ordered else 1
    mat = np.eye(dim, dtype=complex)
    for ev in ordered:
        mat = ev.projection.entries @ mat
    norms = []
    if lattice is not None:
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                if causal_relate(lattice, a.point, b.point) is Relation.SPACELIKE:
                    comm = (a.projection.entries @ b.projection.entries
                            - b.projection.entries @ a.projection.entries)
                    norms.append((a.point, b.point, operator_norm(comm)))
    flagged = any(n > policy.tol_commutation for *_, n in norms)
    return HistoryOperator(events=tuple(ordered), matrix=mat,
                           spacelike_norms=norms, flagged=flagged)


def history_probability(initial: State, history: HistoryOperator) -> float:
    """Normalization of the propagated state: trace(rho H* H)."""
    h = history.matrix
    return float(np.einsum("ij,ji->", initial.rho, h.conj().T @ h).real)


def propagate_state(initial: State, history: HistoryOperator,
                    *, policy: NumericPolicy = DEFAULT_POLICY) -> State:
    """State after the history: H rho H* renormalized."""
    h = history.matrix
    out = h @ initial.rho @ h.conj().T
    norm = float(np.trace(out).real)
    if norm < policy.prob_floor:
        raise NullBranchError(f"history has probability {norm:.3e}, below prob_floor")
    out = out / norm
    return State((out + out.conj().T) / 2.0, policy=policy)


def apply_propagator(u, state: State, *, policy: NumericPolicy = DEFAULT_POLICY) -> State:
    """Conjugate the state by a unitary, verifying unitarity first."""
    mat = u.entries if isinstance(u, Operator) else np.asarray(u, dtype=complex)
    defect = operator_norm(mat.conj().T @ mat - np.eye(mat.shape[0]))
    if defect > policy.tol_proj:
        raise ValueError(f"propagator is not unitary (defect {defect:.3e})")
    return State(mat @ state.rho @ mat.conj().T, policy=policy)


@dataclass
class BranchNode:
    """One realized outcome in the branching tree.

    ``cond_prob`` is the Born weight given the parent branch, ``cum_prob``
    the product along the path from the root.  ``event_dim`` is the
    dimension of the event algebra that fired here (the spectrum snapshot).
    """

    leaf_index: int
    point: Point | None
    actual: ActualEvent | None
    state_after: State
    cond_prob: float
    cum_prob: float
    event_dim: int | None
    children: list["BranchNode"] = field(default_factory=list)
    children_prob_sum: float | None = None


@dataclass
class HistoryTree:
    """Full enumeration of histories along a foliation."""

    root: BranchNode
    foliation: Foliation
    pruned_mass: float
    spectrum_dims: list[int]
    commutation_norms: list[tuple[int, Point, Point, float]]
    max_commutator: float

    def leaves(self) -> list[BranchNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.children:
                stack.extend(reversed(node.children))
            else:
                out.append(node)
        return out

    def leaf_paths(self) -> list[tuple[tuple[ActualEvent, ...], float]]:
        """Each leaf's event sequence (causal order) and its path probability."""
        paths = []

        def walk(node, acc):
            nxt = acc + ([node.actual] if node.actual is not None else [])
            if not node.children:
                paths.append((tuple(nxt), node.cum_prob))
                return
            for child in node.children:
                walk(child, nxt)

        walk(self.root, [])
        return paths


def _leaf_families(net: AlgebraNet, leaf: Sequence[Point], rho: np.ndarray,
                   imposed: Mapping[Point, PotentialEvent] | None,
                   policy: NumericPolicy):
    """Outcome families to apply on one leaf, from the branch entry state.

    Returns (families, dims_seen): families are (point, [(label, ambient
    projection)...], dim) for imposed points and detections that happened;
    dims_seen records every detection's algebra dimension for diagnostics.
    """
    families, dims_seen = [], []
    for pt in leaf:
        if imposed is not None and pt in imposed:
            fam = imposed[pt]
            pairs = [(lbl, p.entries) for lbl, p in fam.items()]
            families.append((pt, pairs, len(fam)))
            dims_seen.append(len(fam))
            continue
        support = net.support(pt)
        rho_f = net.reduce_state(rho, support)
        projs_f, weights = _spectral_family(rho_f, policy)
        dims_seen.append(len(projs_f))
        if sum(w >= policy.prob_floor for w in weights) < 2:
            continue
        pairs = [(lbl, net.embed(p, support)) for lbl, p in enumerate(projs_f)]
        families.append((pt, pairs, len(projs_f)))
    return families, dims_seen


def _family_commutators(families) -> list[tuple[Point, Point, float]]:
    out = []
    for i, (pa, pairs_a, _) in enumerate(families):
        for pb, pairs_b, _ in families[i + 1:]:
            worst = 0.0
            for _, ma in pairs_a:
                for _, mb in pairs_b:
                    worst = max(worst, operator_norm(ma @ mb - mb @ ma))
            out.append((pa, pb, worst))
    return out


def _outcome_probs(rho: np.ndarray, pairs) -> np.ndarray:
    probs = np.array([np.einsum("ij,ji->", rho, m).real for _, m in pairs])
    return np.clip(probs, 0.0, None)


def enumerate_tree(net: AlgebraNet, foliation: Foliation, initial: State,
                   max_branches: int | None = None,
                   *, policy: NumericPolicy = DEFAULT_POLICY,
                   imposed: Mapping[Point, PotentialEvent] | None = None,
                   propagators: Mapping[int, object] | None = None,
                   commutation: str = "warn") -> HistoryTree:
    """Enumerate every branch of the event tree along the foliation.

    Per leaf and per branch: detect families from the branch entry state,
    then fork over outcomes point by point in spatial order, conditioning
    the state as outcomes accumulate.  Branches whose cumulative
    probability falls below ``prob_floor`` are pruned and their mass
    reported.  ``propagators`` optionally maps a leaf index to a unitary
    applied to every branch before that leaf is processed.

    ``commutation`` controls the response to non-commuting spacelike
    families: "warn" records them, "abort" raises.
    """
    if commutation not in ("warn", "abort"):
        raise ValueError("commutation policy must be 'warn' or 'abort'")
    cap = policy.branch_cap if max_branches is None else int(max_branches)
    root = BranchNode(leaf_index=-1, point=None, actual=None, state_after=initial,
                      cond_prob=1.0, cum_prob=1.0, event_dim=None)
    frontier: list[tuple[BranchNode, np.ndarray]] = [(root, initial.rho)]
    pruned = 0.0
    dims: set[int] = set()
    comm_worst: dict[tuple[int, Point, Point], float] = {}

    for li, leaf in enumerate(foliation.leaves):
        if propagators is not None and li in propagators:
            u = propagators[li]
            mat = u.entries if isinstance(u, Operator) else np.asarray(u, dtype=complex)
            defect = operator_norm(mat.conj().T @ mat - np.eye(mat.shape[0]))
            if defect > policy.tol_proj:
                raise ValueError(f"propagator before leaf {li} is not unitary")
            frontier = [(node, mat @ rho @ mat.conj().T) for node, rho in frontier]
        next_frontier: list[tuple[BranchNode, np.ndarray]] = []
        for node, rho in frontier:
            families, dims_seen = _leaf_families(net, leaf, rho, imposed, policy)
            dims.update(dims_seen)
            for pa, pb, norm in _family_commutators(families):
                key = (li, pa, pb)
                comm_worst[key] = max(comm_worst.get(key, 0.0), norm)
                if commutation == "abort" and norm > policy.tol_commutation:
                    raise CommutationError(
                        f"spacelike families at {pa} and {pb} fail to commute "
                        f"(norm {norm:.3e})")
            current = [(node, rho)]
            for pt, pairs, dim in families:
                expanded = []
                for parent, prho in current:
                    probs = _outcome_probs(prho, pairs)
                    parent.children_prob_sum = float(probs.sum())
                    for (label, proj), w in zip(pairs, probs):
                        cum = parent.cum_prob * float(w)
                        if cum < policy.prob_floor:
                            pruned += cum
                            continue
                        child_rho = proj @ prho @ proj / w
                        child_rho = (child_rho + child_rho.conj().T) / 2.0
                        actual = ActualEvent(point=pt, label=label,
                                             projection=Operator(proj),
                                             born_prob=float(w))
                        child = BranchNode(leaf_index=li, point=pt, actual=actual,
                                           state_after=State(child_rho, policy=policy),
                                           cond_prob=float(w), cum_prob=cum,
                                           event_dim=dim)
                        parent.children.append(child)
                        expanded.append((child, child_rho))
                current = expanded
                if len(current) + len(next_frontier) > cap:
                    raise BranchOverflowError(
                        f"enumeration exceeded the branch cap of {cap}")
            next_frontier.extend(current)
        frontier = next_frontier
    comm_list = sorted((li, pa, pb, n) for (li, pa, pb), n in comm_worst.items())
    return HistoryTree(root=root, foliation=foliation, pruned_mass=pruned,
                       spectrum_dims=sorted(dims),
                       commutation_norms=comm_list,
                       max_commutator=max((n for *_, n in comm_list), default=0.0))


@dataclass
class SampledHistory:
    """One Monte-Carlo trajectory through the event tree."""

    events: tuple[ActualEvent, ...]
    final_state: State
    probability: float
    max_commutator: float
    spectrum_dims: list[int]


def sample_history(net: AlgebraNet, foliation: Foliation, initial: State,
                   seed=None, *, policy: NumericPolicy = DEFAULT_POLICY,
                   imposed: Mapping[Point, PotentialEvent] | None = None,
                   propagators: Mapping[int, object] | None = None,
                   rng: np.random.Generator | None = None,
                   commutation: str = "warn") -> SampledHistory:
    """Draw a single history by iterated Born sampling along the foliation."""
    gen = rng if rng is not None else np.random.default_rng(seed)
    rho = initial.rho
    events: list[ActualEvent] = []
    prob = 1.0
    worst = 0.0
    dims: set[int] = set()
    for li, leaf in enumerate(foliation.leaves):
        if propagators is not None and li in propagators:
            u = propagators[li]
            mat = u.entries if isinstance(u, Operator) else np.asarray(u, dtype=complex)
            rho = mat @ rho @ mat.conj().T
        families, dims_seen = _leaf_families(net, leaf, rho, imposed, policy)
        dims.update(dims_seen)
        for _, _, norm in _family_commutators(families):
            worst = max(worst, norm)
            if commutation == "abort" and norm > policy.tol_commutation:
                raise CommutationError("spacelike families fail to commute")
        for pt, pairs, dim in families:
            probs = _outcome_probs(rho, pairs)
            total = probs.sum()
            u_draw = gen.random() * total
            acc = 0.0
            idx = len(pairs) - 1
            for i, w in enumerate(probs):
                acc += w
                if u_draw < acc:
                    idx = i
                    break
            label, proj = pairs[idx]
            w = float(probs[idx])
            if w < policy.prob_floor:
                raise NullBranchError("sampled an outcome below prob_floor")
            rho = proj @ rho @ proj / w
            rho = (rho + rho.conj().T) / 2.0
            events.append(ActualEvent(point=pt, label=label,
                                      projection=Operator(proj), born_prob=w))
            prob *= w
    return SampledHistory(events=tuple(events), final_state=State(rho, policy=policy),
                          probability=prob, max_commutator=worst,
                          spectrum_dims=sorted(dims))


@dataclass
class SampleSummary:
    """Aggregate of repeated history sampling under one run seed."""

    n_samples: int
    seed: object
    counts: dict[tuple, int]
    max_commutator: float
    spectrum_dims: list[int]

    def frequencies(self) -> dict[tuple, float]:
        return {k: v / self.n_samples for k, v in self.counts.items()}


def sample_paths(net: AlgebraNet, foliation: Foliation, initial: State,
                 n_samples: int, seed=None,
                 *, policy: NumericPolicy = DEFAULT_POLICY,
                 imposed: Mapping[Point, PotentialEvent] | None = None,
                 propagators: Mapping[int, object] | None = None,
                 commutation: str = "warn") -> SampleSummary:
    """Sample many histories, with per-sample generators spawned from one seed.

    The branch structure depends only on the outcome path, so the tree is
    enumerated once and each sample walks it root to leaf, drawing one
    uniform per event against the conditional Born weights.  Path keys are
    tuples of (tau, x, label), so identical seeds give identical summaries.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    tree = enumerate_tree(net, foliation, initial, policy=policy,
                          imposed=imposed, propagators=propagators,
                          commutation=commutation)
    ss = np.random.SeedSequence(seed)
    counts: dict[tuple, int] = {}
    for child in ss.spawn(n_samples):
        gen = np.random.default_rng(child)
        node = tree.root
        key: list[tuple[int, int, int]] = []
        while node.children:
            u_draw = gen.random() * node.children_prob_sum
            acc = 0.0
            chosen = None
            for candidate in node.children:
                acc += candidate.cond_prob
                if u_draw < acc:
                    chosen = candidate
                    break
            if chosen is None:
                # the draw landed in mass pruned below prob_floor
                raise NullBranchError("sampled an outcome below prob_floor")
            ev = chosen.actual
            key.append((ev.point.tau, ev.point.x, ev.label))
            node = chosen
        path = tuple(key)
        counts[path] = counts.get(path, 0) + 1
    return SampleSummary(n_samples=n_samples, seed=seed, counts=counts,
                         max_commutator=tree.max_commutator,
                         spectrum_dims=tree.spectrum_dims)
