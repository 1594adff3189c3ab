"""Physical quantities and the approximate-recording criterion.

A quantity is recorded by an event family when each of its leading
spectral projections stays close (in operator norm) to its average over
the family.  When that holds, replacing the state by its block-diagonal
mixture over the family changes the quantity's statistics only at order
(number of retained projections) x (tolerance), which is what makes the
event family a faithful record of the measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import linalg
from .errors import ResolutionError
from .events import EventDetection, detect_event
from .opalg import Operator, State, _as_matrix
from .policy import DEFAULT_POLICY, NumericPolicy
from .spacetime import AlgebraNet, Point

__all__ = [
    "PhysicalQuantity",
    "SpectralDecomposition",
    "EventBasis",
    "RecordingReport",
    "validate_quantity",
    "spectral_decompose",
    "event_basis",
    "recording_check",
]


@dataclass
class PhysicalQuantity:
    """A named self-adjoint observable with one representative per point."""

    name: str
    representatives: dict[Point, Operator]

    def at(self, point: Point) -> Operator:
        try:
            return self.representatives[point]
        except KeyError:
            raise ValueError(f"quantity {self.name!r} has no representative at {point}") from None


def validate_quantity(quantity: PhysicalQuantity, net: AlgebraNet,
                      *, policy: NumericPolicy = DEFAULT_POLICY) -> None:
    """Check self-adjointness and localization of every representative."""
    for point, op in quantity.representatives.items():
        mat = _as_matrix(op)
        if np.max(np.abs(mat - mat.conj().T)) > policy.tol_proj:
            raise ValueError(f"{quantity.name!r} at {point} is not self-adjoint")
        if mat.shape[0] == net.dim:
            resid = net.membership_residual(mat, point)
            if resid > policy.tol_closure * max(1.0, linalg.hs_norm(mat)):
                raise ValueError(
                    f"{quantity.name!r} at {point} is not localized there "
                    f"(residual {resid:.3e})")
        elif mat.shape[0] != net.factor_dim(point):
            raise ValueError(
                f"{quantity.name!r} at {point} has dimension {mat.shape[0]}, "
                f"expected {net.dim} or {net.factor_dim(point)}")


@dataclass
class SpectralDecomposition:
    """Spectral projections of a quantity, ordered by decreasing state weight.

    ``retained`` is the smallest count whose weights leave less than the
    requested epsilon uncovered.
    """

    eigenvalues: list[float]
    projections: list[Operator]
    weights: list[float]
    retained: int
    residual: float


def spectral_decompose(x, omega: State, epsilon: float,
                       *, policy: NumericPolicy = DEFAULT_POLICY) -> SpectralDecomposition:
    """Cluster the spectrum of a self-adjoint operator and rank by weight."""
    mat = _as_matrix(x)
    if np.max(np.abs(mat - mat.conj().T)) > policy.tol_proj:
        raise ValueError("spectral decomposition needs a self-adjoint operator")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    clusters = linalg.cluster_indices(vals, policy.gap_min)
    eigs, projs, weights = [], [], []
    for c in clusters:
        block = vecs[:, c]
        p = block @ block.conj().T
        eigs.append(float(np.mean(vals[c])))
        projs.append(p)
        weights.append(max(0.0, omega.prob(p)))
    order = np.argsort(-np.asarray(weights), kind="stable")
    eigs = [eigs[i] for i in order]
    projs = [Operator(projs[i]) for i in order]
    weights = [weights[i] for i in order]
    covered = 0.0
    retained = len(weights)
    for k, w in enumerate(weights):
        covered += w
        if 1.0 - covered < epsilon:
            retained = k + 1
            break
    return SpectralDecomposition(eigenvalues=eigs, projections=projs, weights=weights,
                                 retained=retained, residual=1.0 - covered)


@dataclass
class EventBasis:
    """The outcomes of a detection that resolve the state at precision epsilon."""

    projections: list[Operator]
    labels: list
    weights: list[float]
    residual: float
    factor_projections: list[np.ndarray] | None = None


def event_basis(detection: EventDetection, epsilon: float,
                *, policy: NumericPolicy = DEFAULT_POLICY) -> EventBasis:
    """Keep outcomes with weight at least epsilon; fail if too much is dropped.

    The kept weights must leave a residual below epsilon, otherwise no
    basis at this resolution exists and the caller should coarsen.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    if epsilon < policy.eps_floor:
        raise ValueError(f"epsilon below the resolution floor {policy.eps_floor:.1e}")
    kept = [i for i, w in enumerate(detection.probabilities) if w >= epsilon]
    residual = 1.0 - sum(detection.probabilities[i] for i in kept)
    if residual >= epsilon:
        raise ResolutionError(
            f"dropped weight {residual:.3e} is not below epsilon={epsilon}")
    factor = None
    if detection.factor_projections is not None:
        factor = [detection.factor_projections[i] for i in kept]
    return EventBasis(projections=[detection.event.projections[i] for i in kept],
                      labels=[detection.event.labels[i] for i in kept],
                      weights=[detection.probabilities[i] for i in kept],
                      residual=residual,
                      factor_projections=factor)


@dataclass
class RecordingReport:
    """Whether an event family records a quantity at resolution epsilon.

    ``alignment_norms[k]`` is the operator-norm distance between the k-th
    retained spectral projection and its average over the event basis;
    ``passes`` requires all of them below epsilon.  ``mixture_residual``
    is the statistics shift caused by block-diagonalizing the state over
    the retained spectral projections, and ``mixture_constant`` expresses
    it in units of (retained x epsilon).
    """

    point: Point
    quantity: str
    epsilon: float
    retained: int
    eigenvalues: list[float]
    weights: list[float]
    alignment_norms: list[float]
    passes: bool
    mixture_residual: float
    mixture_constant: float
    matches: list[tuple[int, object | None, float]] = field(default_factory=list)
    event_weights: list[float] = field(default_factory=list)


def recording_check(net: AlgebraNet, point: Point, omega: State,
                    quantity: PhysicalQuantity, epsilon: float,
                    *, policy: NumericPolicy = DEFAULT_POLICY,
                    detection: EventDetection | None = None) -> RecordingReport:
    """Test whether the event at ``point`` records ``quantity`` there.

    Works on the support factor throughout: operator norms and weights are
    unchanged by tensoring with an identity, and every matrix unit of the
    localized algebra is covered by testing the factor entrywise.
    A failed recording is reported, not raised.
    """
    validate_quantity(quantity, net, policy=policy)
    x = quantity.at(point)
    mat = _as_matrix(x)
    support = net.support(point)
    if mat.shape[0] == net.dim:
        x_f, _ = net.reduce_operator(mat, support)
    else:
        x_f = mat
    if detection is None:
        detection = detect_event(net, point, omega, policy=policy)
    if not detection.happened:
        raise ResolutionError(f"no event happened at {point}; nothing can record")
    basis = event_basis(detection, epsilon, policy=policy)
    if basis.factor_projections is None:
        raise ValueError("recording_check needs a net-based detection")
    rho_f = net.reduce_state(omega, support)
    omega_f = State(rho_f, policy=policy)
    dec = spectral_decompose(x_f, omega_f, epsilon, policy=policy)

    norms = []
    for k in range(dec.retained):
        pk = dec.projections[k].entries
        avg = np.zeros_like(pk)
        for pj, wj in zip(basis.factor_projections, basis.weights):
            avg += (float(np.einsum("ij,ji->", rho_f, pj @ pk @ pj).real) / wj) * pj
        norms.append(linalg.operator_norm(pk - avg))
    passes = all(n < epsilon for n in norms)

    mix = np.zeros_like(rho_f)
    for k in range(dec.retained):
        pk = dec.projections[k].entries
        mix += pk @ rho_f @ pk
    mixture_residual = float(np.max(np.abs(rho_f - mix)))
    denom = dec.retained * epsilon
    mixture_constant = mixture_residual / denom if denom > 0 else float("inf")

    matches: list[tuple[int, object | None, float]] = []
    for k in range(dec.retained):
        pk = dec.projections[k].entries
        best_label, best_dist = None, float("inf")
        for lbl, pj in zip(basis.labels, basis.factor_projections):
            dist = linalg.operator_norm(pk - pj)
            if dist < best_dist:
                best_label, best_dist = lbl, dist
        if best_dist >= policy.match_threshold:
            matches.append((k, None, best_dist))
        else:
            matches.append((k, best_label, best_dist))

    return RecordingReport(point=point, quantity=quantity.name, epsilon=epsilon,
                           retained=dec.retained, eigenvalues=dec.eigenvalues,
                           weights=dec.weights, alignment_norms=norms, passes=passes,
                           mixture_residual=mixture_residual,
                           mixture_constant=mixture_constant, matches=matches,
                           event_weights=basis.weights)
