"""Event detection, Born-rule sampling and state collapse.

An event at a point is read off the state restricted to the localized
algebra there: the center of the state's centralizer is abelian, its
minimal projections are the candidate outcomes, and the event "happens"
when at least two outcomes carry strictly positive probability.  For a
net algebra (a full matrix factor) this reduces to spectral analysis of
the reduced density matrix, which is the fast path; the generic path via
centralizer/center works for any explicit algebra and is used to
cross-check the fast one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg, opalg
from .errors import NullBranchError
from .opalg import Operator, OperatorAlgebra, PotentialEvent, State
from .policy import DEFAULT_POLICY, NumericPolicy
from .spacetime import AlgebraNet, CausalLattice, Point, Relation, causal_relate

__all__ = [
    "EventDetection",
    "ActualEvent",
    "detect_event",
    "detect_event_on",
    "collapse",
    "sample_actual",
    "mixture_check",
    "mixture_defect",
    "spacelike_commutator_norm",
]


@dataclass
class EventDetection:
    """Outcome family the state singles out at a point.

    ``probabilities`` aligns with the event's labels and is sorted in
    decreasing order; ``happened`` records whether at least two outcomes
    clear ``prob_floor``.  For net-based detection, ``factor_projections``
    hold the projections on the support factor (the ambient ones in
    ``event`` are their embeddings).
    """

    point: Point | None
    event_algebra: OperatorAlgebra
    event: PotentialEvent
    probabilities: tuple[float, ...]
    happened: bool
    support: tuple[int, ...] | None = None
    factor_projections: tuple[np.ndarray, ...] | None = None


@dataclass
class ActualEvent:
    """One realized outcome: which projection fired, and its Born weight."""

    point: Point | None
    label: object
    projection: Operator
    born_prob: float


def _spectral_family(rho_f: np.ndarray, policy: NumericPolicy):
    """Cluster the spectrum of a density matrix into an outcome family.

    Returns (projections, weights) with weights in decreasing order;
    eigenvalues closer than ``gap_min`` share a projection.
    """
    vals, vecs = np.linalg.eigh(rho_f)
    clusters = linalg.cluster_indices(vals, policy.gap_min)
    projs, weights = [], []
    for c in clusters:
        block = vecs[:, c]
        projs.append(block @ block.conj().T)
        weights.append(float(np.sum(vals[c])))
    order = np.argsort(-np.asarray(weights), kind="stable")
    return [projs[i] for i in order], [weights[i] for i in order]


def detect_event(net: AlgebraNet, point: Point, omega: State,
                 *, policy: NumericPolicy = DEFAULT_POLICY) -> EventDetection:
    """Detect the potential event at a net point for the given global state.

    For a full matrix factor the centralizer of the restricted state is its
    commutant within the factor, so the center of the centralizer is spanned
    by the spectral projections of the reduced density matrix; probabilities
    are the clustered eigenvalue sums.
    """
    support = net.support(point)
    rho_f = net.reduce_state(omega, support)
    projs_f, weights = _spectral_family(rho_f, policy)
    ambient = [Operator(net.embed(p, support)) for p in projs_f]
    event = PotentialEvent(ambient, policy=policy)
    rest = net.dim // (net.cell_dim ** len(support))
    basis = [a.entries / np.sqrt(np.trace(p).real * rest)
             for a, p in zip(ambient, projs_f)]
    algebra = OperatorAlgebra(basis, policy=policy, validate=False)
    happened = sum(w >= policy.prob_floor for w in weights) >= 2
    return EventDetection(point=point, event_algebra=algebra, event=event,
                          probabilities=tuple(weights), happened=happened,
                          support=support,
                          factor_projections=tuple(projs_f))


def detect_event_on(alg: OperatorAlgebra, omega: State,
                    *, policy: NumericPolicy = DEFAULT_POLICY,
                    point: Point | None = None, seed: int = 0) -> EventDetection:
    """Generic detection against an explicit algebra.

    Computes the center of the state's centralizer and extracts its minimal
    projections; works for any *-algebra, at the cost of a few SVDs.
    """
    zent = opalg.center_of_centralizer(alg, omega, policy=policy)
    family = opalg.minimal_projections(zent, policy=policy, seed=seed)
    weights = [omega.prob(p) for p in family.projections]
    order = np.argsort(-np.asarray(weights), kind="stable")
    event = PotentialEvent([family.projections[i] for i in order], policy=policy)
    weights = [weights[i] for i in order]
    happened = sum(w >= policy.prob_floor for w in weights) >= 2
    return EventDetection(point=point, event_algebra=zent, event=event,
                          probabilities=tuple(weights), happened=happened)


def collapse(omega: State, actual: ActualEvent,
             *, policy: NumericPolicy = DEFAULT_POLICY) -> State:
    """Condition the state on the realized outcome: p rho p / trace."""
    proj = actual.projection.entries
    rho = _collapse_raw(omega.rho, proj, policy)
    return State(rho, policy=policy)


def _collapse_raw(rho: np.ndarray, proj: np.ndarray, policy: NumericPolicy) -> np.ndarray:
    out = proj @ rho @ proj
    w = float(np.trace(out).real)
    if w < policy.prob_floor:
        raise NullBranchError(f"outcome probability {w:.3e} below prob_floor")
    out = out / w
    return (out + out.conj().T) / 2.0


def sample_actual(detection: EventDetection, rng=None,
                  *, policy: NumericPolicy = DEFAULT_POLICY) -> ActualEvent:
    """Draw one outcome of the detection by its Born weights.

    ``rng`` may be a Generator, a seed, or None for OS entropy.  Identical
    seeds give identical draws.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    weights = np.clip(np.asarray(detection.probabilities, dtype=float), 0.0, None)
    total = float(weights.sum())
    if abs(total - 1.0) > policy.tol_proj:
        raise ValueError(f"outcome weights sum to {total!r}, not 1")
    u = gen.random() * total
    acc = 0.0
    idx = len(weights) - 1
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            idx = i
            break
    return ActualEvent(point=detection.point, label=detection.event.labels[idx],
                       projection=detection.event.projections[idx],
                       born_prob=float(weights[idx]))


def mixture_defect(omega: State, projections: Sequence, test_ops: Sequence) -> float:
    """max over ``test_ops`` of |omega(A) - sum_j omega(p_j A p_j)|.

    The block-diagonal mixture identity: exact when the projections are
    central for the state, and violated by a generically chosen
    non-central family.
    """
    rho = omega.rho
    mix = np.zeros_like(rho)
    for p in projections:
        pm = p.entries if isinstance(p, Operator) else np.asarray(p, dtype=complex)
        mix += pm @ rho @ pm
    diff = rho - mix
    worst = 0.0
    for a in test_ops:
        am = a.entries if isinstance(a, Operator) else np.asarray(a, dtype=complex)
        worst = max(worst, abs(complex(np.einsum("ij,ji->", diff, am))))
    return worst


def mixture_check(net: AlgebraNet, point: Point, omega: State,
                  detection: EventDetection | None = None,
                  *, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Mixture-identity residual of a detection over its whole local algebra.

    Evaluated on the support factor: the residual matrix
    ``rho_f - sum p rho_f p`` is tested entrywise, which covers every
    matrix unit of the localized algebra at once.
    """
    if detection is None:
        detection = detect_event(net, point, omega, policy=policy)
    if detection.factor_projections is None:
        raise ValueError("mixture_check needs a net-based detection")
    rho_f = net.reduce_state(omega, detection.support)
    mix = np.zeros_like(rho_f)
    for p in detection.factor_projections:
        mix += p @ rho_f @ p
    return float(np.max(np.abs(rho_f - mix)))


def spacelike_commutator_norm(det_a: EventDetection, det_b: EventDetection,
                              *, lattice: CausalLattice | None = None) -> float:
    """Largest operator-norm commutator between two detections' projections.

    For detections at spacelike points this must vanish; passing the
    lattice makes the spacelike precondition explicit and enforced.
    """
    if lattice is not None and det_a.point is not None and det_b.point is not None:
        rel = causal_relate(lattice, det_a.point, det_b.point)
        if rel is not Relation.SPACELIKE:
            raise ValueError(f"points {det_a.point} and {det_b.point} are {rel.value}, "
                             "not spacelike")
    worst = 0.0
    for p in det_a.event.projections:
        for q in det_b.event.projections:
            comm = p.entries @ q.entries - q.entries @ p.entries
            worst = max(worst, linalg.operator_norm(comm))
    return worst
