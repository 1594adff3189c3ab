"""Shipped demonstration scenarios with closed-form expectations.

Each scenario bundles a net, an initial state, optionally a set of
externally designated ("imposed") outcome families, named quantities,
and a list of expected values with the arithmetic identity they come
from.  ``evaluate_expected`` re-derives every expectation through the
event machinery, so the closed forms act as end-to-end oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import linalg
from .errors import ConfigError
from .events import mixture_defect
from .histories import enumerate_tree
from .measurement import PhysicalQuantity, recording_check
from .opalg import Operator, PotentialEvent, State
from .policy import DEFAULT_POLICY, NumericPolicy
from .spacetime import (AlgebraNet, CausalLattice, Foliation, Point,
                        build_full_net, build_tensor_net, derive_causal_order,
                        foliate)

__all__ = [
    "Expected",
    "Scenario",
    "EvaluatedExpectation",
    "NonlocalityReport",
    "epr_scenario",
    "epr_overlap_scenario",
    "massive_control",
    "two_leaf_chain",
    "recording_demo",
    "order_independence_check",
    "nonlocality_demo",
    "evaluate_expected",
    "SCENARIO_BUILDERS",
    "build_scenario",
]


@dataclass
class Expected:
    name: str
    value: float
    tol: float
    derivation: str


@dataclass
class Scenario:
    name: str
    net: AlgebraNet
    initial: State
    foliation: Foliation
    imposed: dict[Point, PotentialEvent] | None = None
    quantities: dict[str, PhysicalQuantity] = field(default_factory=dict)
    expected: list[Expected] = field(default_factory=list)
    params: dict = field(default_factory=dict)


@dataclass
class EvaluatedExpectation:
    name: str
    expected: float
    actual: float
    tol: float
    ok: bool
    derivation: str


def _singlet_state(policy: NumericPolicy) -> State:
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0 / np.sqrt(2.0)
    psi[2] = -1.0 / np.sqrt(2.0)
    return State.from_vector(psi, policy=policy)


def epr_scenario(n_dir=(0.0, 0.0, 1.0), n_prime_dir=(1.0, 0.0, 0.0),
                 *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    """Two spacelike spin measurements on a shared singlet.

    The left (x=0) and right (x=1) points carry disjoint tensor factors, so
    the imposed spin families commute identically; joint outcome statistics
    follow the singlet correlation law 1/4 (1 - ss' n.n').
    """
    lattice = CausalLattice(1, 2)
    net = build_tensor_net(lattice, 2, policy=policy)
    left, right = Point(0, 0), Point(0, 1)
    n = np.asarray(n_dir, dtype=float)
    npr = np.asarray(n_prime_dir, dtype=float)
    n = n / np.linalg.norm(n)
    npr = npr / np.linalg.norm(npr)
    pl_plus, pl_minus = linalg.spin_projections(n)
    pr_plus, pr_minus = linalg.spin_projections(npr)
    imposed = {
        left: PotentialEvent([net.embed(pl_plus, (0,)), net.embed(pl_minus, (0,))],
                             labels=("+", "-"), policy=policy),
        right: PotentialEvent([net.embed(pr_plus, (1,)), net.embed(pr_minus, (1,))],
                              labels=("+", "-"), policy=policy),
    }
    sigma_n = n[0] * linalg.PAULI_X + n[1] * linalg.PAULI_Y + n[2] * linalg.PAULI_Z
    sigma_np = npr[0] * linalg.PAULI_X + npr[1] * linalg.PAULI_Y + npr[2] * linalg.PAULI_Z
    quantities = {
        "left-spin": PhysicalQuantity("left-spin", {left: Operator(net.embed(sigma_n, (0,)))}),
        "right-spin": PhysicalQuantity("right-spin", {right: Operator(net.embed(sigma_np, (1,)))}),
    }
    dot = float(n @ npr)
    expected = []
    for s_l, sign_l in (("+", 1.0), ("-", -1.0)):
        for s_r, sign_r in (("+", 1.0), ("-", -1.0)):
            expected.append(Expected(
                name=f"joint_prob[{s_l}{s_r}]",
                value=0.25 * (1.0 - sign_l * sign_r * dot),
                tol=1e-12,
                derivation="singlet correlation closed form"))
    expected.append(Expected("commutator_max", 0.0, 0.0,
                             "disjoint tensor factors commute identically"))
    expected.append(Expected("order_dependence", 0.0, 1e-12,
                             "commuting families condition identically"))
    expected.append(Expected("unconditioned_prob", 0.5, 1e-12,
                             "reduced singlet state is maximally mixed"))
    expected.append(Expected("conditioned_prob", 0.5 * (1.0 - dot), 1e-12,
                             "opposite-spin conditioning on the singlet"))
    return Scenario(name="epr", net=net, initial=_singlet_state(policy),
                    foliation=foliate(lattice), imposed=imposed,
                    quantities=quantities, expected=expected,
                    params={"n": n.tolist(), "n_prime": npr.tolist()})


def epr_overlap_scenario(n_dir=(0.0, 0.0, 1.0), n_prime_dir=(1.0, 0.0, 0.0),
                         *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    """Deliberately broken variant: both families act on the same factor.

    With both spin families embedded on the left cell they no longer
    commute, and conditioning becomes order dependent — the negative
    control for the locality checks.
    """
    base = epr_scenario(n_dir, n_prime_dir, policy=policy)
    net = base.net
    npr = np.asarray(base.params["n_prime"], dtype=float)
    pr_plus, pr_minus = linalg.spin_projections(npr)
    imposed = dict(base.imposed)
    imposed[Point(0, 1)] = PotentialEvent(
        [net.embed(pr_plus, (0,)), net.embed(pr_minus, (0,))],
        labels=("+", "-"), policy=policy)
    dot = float(np.asarray(base.params["n"]) @ npr)
    cross = float(np.sqrt(max(0.0, 1.0 - dot * dot)))
    expected = [
        Expected("commutator_max", 0.5 * cross, 1e-12,
                 "same-factor spin projections fail to commute"),
        Expected("order_dependence", 0.5 * cross, 1e-9,
                 "conditioning order changes the final state"),
    ]
    return Scenario(name="epr-overlap", net=net, initial=base.initial,
                    foliation=base.foliation, imposed=imposed,
                    quantities={}, expected=expected, params=base.params)


def massive_control(extent_tau: int = 2, spectrum: Sequence[float] = (0.75, 0.25),
                    *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    """Structureless control: every point carries the full algebra.

    Nothing shrinks toward the future, so no causal order is derivable and
    an event can only fire once — after the first collapse the state is
    pure on the (single) factor and all later detections are trivial.
    """
    lattice = CausalLattice(extent_tau, 1)
    spectrum = tuple(float(s) for s in spectrum)
    if len(spectrum) < 2:
        raise ConfigError("control spectrum needs at least two levels")
    if any(s <= 0 for s in spectrum):
        raise ConfigError("control spectrum must be strictly positive (faithful)")
    net = build_full_net(lattice, len(spectrum), 1, policy=policy)
    initial = State.diagonal(spectrum, policy=policy)
    expected = [
        Expected("n_leaves", float(len(spectrum)), 0.0,
                 "one collapse resolves the full algebra"),
        Expected("first_leaf_outcomes", float(len(spectrum)), 0.0,
                 "faithful mixed state branches over its spectrum"),
        Expected("later_branchings", 0.0, 0.0,
                 "collapsed state is pure; no further events"),
        Expected("derived_future_pairs", 0.0, 0.0,
                 "equal algebras admit no strict nesting"),
    ]
    return Scenario(name="massive-control", net=net, initial=initial,
                    foliation=foliate(lattice), expected=expected,
                    params={"spectrum": list(spectrum)})


def two_leaf_chain(seed: int = 7, spectrum: Sequence[float] = (0.4, 0.3, 0.2, 0.1),
                   *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    """A 2-step chain whose branch probabilities are known in closed form.

    The initial state is a fixed-seed unitary rotation of a nondegenerate
    diagonal state on the two-cell product.  The first detection branches
    over the spectrum; each branch then branches again over the reduced
    state of its eigenvector on the later cell.  All leaf probabilities
    are computed here by direct eigendecomposition arithmetic, independent
    of the event machinery that reproduces them.
    """
    spectrum = tuple(float(s) for s in spectrum)
    if list(spectrum) != sorted(spectrum, reverse=True):
        raise ConfigError("spectrum must be given in decreasing order")
    if min(np.diff(sorted(spectrum))) <= policy.gap_min:
        raise ConfigError("spectrum gaps must exceed the clustering threshold")
    lattice = CausalLattice(2, 1)
    net = build_tensor_net(lattice, 2, policy=policy)
    rng = np.random.default_rng(seed)
    v = linalg.random_unitary(4, rng)
    rho = (v * np.asarray(spectrum)) @ v.conj().T
    initial = State(rho, policy=policy)

    expected = [Expected("total_prob", 1.0, 1e-12, "leaf probabilities are exhaustive")]
    n_leaves = 0
    for i, s_i in enumerate(spectrum):
        psi = v[:, i]
        pure = np.outer(psi, psi.conj())
        reduced = linalg.partial_trace(pure, (1,), 2, 2)
        vals = np.sort(np.linalg.eigvalsh(reduced))[::-1]
        if vals[0] - vals[1] <= policy.gap_min or vals[1] < 10 * policy.prob_floor:
            raise ConfigError(
                f"seed {seed} gives a degenerate second-step spectrum; pick another")
        for j, w in enumerate(vals):
            expected.append(Expected(
                name=f"leaf_prob[{i},{j}]", value=float(s_i * w), tol=1e-12,
                derivation="eigendecomposition arithmetic on the initial state"))
            n_leaves += 1
    expected.append(Expected("n_leaves", float(n_leaves), 0.0,
                             "nondegenerate spectra at both steps"))
    return Scenario(name="two-leaf-chain", net=net, initial=initial,
                    foliation=foliate(lattice), expected=expected,
                    params={"seed": seed, "spectrum": list(spectrum)})


def recording_demo(spectrum: Sequence[float] = (0.75, 0.25), tilt: float = 0.01,
                   *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    """Single-cell recording testbed with three quantities.

    "aligned" shares its eigenprojections with the event family and is
    recorded exactly; "transverse" is maximally misaligned and fails with
    alignment norms of exactly 1/2; "tilted" is the aligned quantity
    rotated by a small angle and passes at moderate resolution.
    """
    lattice = CausalLattice(1, 1)
    net = build_tensor_net(lattice, 2, policy=policy)
    p = Point(0, 0)
    spectrum = tuple(float(s) for s in spectrum)
    initial = State.diagonal(spectrum, policy=policy)
    aligned = np.diag([2.0, -3.0]).astype(complex)
    half = tilt / 2.0
    rot = np.array([[np.cos(half), -np.sin(half)],
                    [np.sin(half), np.cos(half)]], dtype=complex)
    tilted = rot @ linalg.PAULI_Z @ rot.conj().T
    quantities = {
        "aligned": PhysicalQuantity("aligned", {p: Operator(aligned)}),
        "transverse": PhysicalQuantity("transverse", {p: Operator(linalg.PAULI_X)}),
        "tilted": PhysicalQuantity("tilted", {p: Operator(tilted)}),
    }
    expected = [
        Expected("aligned_max_norm", 0.0, 1e-10,
                 "shared eigenprojections average to themselves"),
        Expected("transverse_norm[0]", 0.5, 1e-10,
                 "averaging a transverse projection yields half the identity"),
        Expected("transverse_norm[1]", 0.5, 1e-10,
                 "averaging a transverse projection yields half the identity"),
        Expected("tilted_passes", 1.0, 0.0,
                 "small rotations stay within the resolution"),
        Expected("mixture_defect_transverse", abs(spectrum[0] - 0.5), 1e-12,
                 "block-diagonalizing in the transverse basis levels the spectrum"),
    ]
    return Scenario(name="recording-demo", net=net, initial=initial,
                    foliation=foliate(lattice), quantities=quantities,
                    expected=expected,
                    params={"spectrum": list(spectrum), "tilt": tilt,
                            "epsilon": 0.05, "default_quantity": "aligned",
                            "record_point": [0, 0]})


SCENARIO_BUILDERS: dict[str, Callable[..., Scenario]] = {
    "epr": epr_scenario,
    "epr-overlap": epr_overlap_scenario,
    "massive-control": massive_control,
    "two-leaf-chain": two_leaf_chain,
    "recording-demo": recording_demo,
}


def build_scenario(name: str, params: Mapping | None = None,
                   *, policy: NumericPolicy = DEFAULT_POLICY) -> Scenario:
    try:
        builder = SCENARIO_BUILDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; pick one of {sorted(SCENARIO_BUILDERS)}") from None
    try:
        return builder(**dict(params or {}), policy=policy)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for scenario {name!r}: {exc}") from None


def _imposed_pairs_first_leaf(scenario: Scenario) -> list[tuple[Point, PotentialEvent]]:
    if not scenario.imposed:
        raise ValueError(f"scenario {scenario.name!r} has no imposed families")
    leaf = scenario.foliation.leaves[0]
    return [(p, scenario.imposed[p]) for p in leaf if p in scenario.imposed]


def order_independence_check(scenario: Scenario,
                             *, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Largest change from swapping the conditioning order of two families.

    For every joint outcome of the first two imposed families on the first
    foliation leaf, conditions in both orders and compares joint
    probabilities and final states entrywise.  Commuting families give
    zero to rounding; overlapping ones do not.
    """
    pairs = _imposed_pairs_first_leaf(scenario)
    if len(pairs) < 2:
        raise ValueError("order independence needs two imposed families")
    (_, fam_a), (_, fam_b) = pairs[0], pairs[1]
    rho = scenario.initial.rho
    worst = 0.0
    for pa in fam_a.projections:
        for pb in fam_b.projections:
            ma, mb = pa.entries, pb.entries
            first = mb @ (ma @ rho @ ma) @ mb
            second = ma @ (mb @ rho @ mb) @ ma
            w1 = float(np.trace(first).real)
            w2 = float(np.trace(second).real)
            worst = max(worst, abs(w1 - w2))
            if min(w1, w2) < policy.prob_floor:
                continue
            worst = max(worst, float(np.max(np.abs(first / w1 - second / w2))))
    return worst


@dataclass
class NonlocalityReport:
    """Unconditioned vs conditioned probability of a distant outcome."""

    left_label: object
    right_label: object
    unconditioned: float
    conditioned: float
    difference: float


def nonlocality_demo(scenario: Scenario, outcome: tuple = ("+", "+"),
                     *, policy: NumericPolicy = DEFAULT_POLICY) -> NonlocalityReport:
    """Probability of a right-hand outcome before and after the left collapse.

    The unconditioned value never references the left family (that is the
    locality of expectations); the conditioned value does and generally
    differs — conditioning is where the nonlocal correlations live.
    """
    pairs = _imposed_pairs_first_leaf(scenario)
    if len(pairs) < 2:
        raise ValueError("nonlocality demo needs two imposed families")
    (_, fam_l), (_, fam_r) = pairs[0], pairs[1]
    proj_l = dict(fam_l.items())[outcome[0]]
    proj_r = dict(fam_r.items())[outcome[1]]
    rho = scenario.initial.rho
    unconditioned = float(np.einsum("ij,ji->", rho, proj_r.entries).real)
    ml = proj_l.entries
    collapsed = ml @ rho @ ml
    w = float(np.trace(collapsed).real)
    if w < policy.prob_floor:
        raise ValueError(f"left outcome {outcome[0]!r} has vanishing probability")
    conditioned = float(np.einsum("ij,ji->", collapsed / w, proj_r.entries).real)
    return NonlocalityReport(left_label=outcome[0], right_label=outcome[1],
                             unconditioned=unconditioned, conditioned=conditioned,
                             difference=abs(unconditioned - conditioned))


def _family_commutator_max(scenario: Scenario) -> float:
    pairs = _imposed_pairs_first_leaf(scenario)
    worst = 0.0
    for i, (_, fa) in enumerate(pairs):
        for _, fb in pairs[i + 1:]:
            for pa in fa.projections:
                for pb in fb.projections:
                    comm = pa.entries @ pb.entries - pb.entries @ pa.entries
                    worst = max(worst, linalg.operator_norm(comm))
    return worst


def evaluate_expected(scenario: Scenario,
                      *, policy: NumericPolicy = DEFAULT_POLICY) -> list[EvaluatedExpectation]:
    """Re-derive every expected value through the event machinery."""
    actuals: dict[str, float] = {}
    name = scenario.name
    if name in ("epr", "epr-overlap"):
        actuals["commutator_max"] = _family_commutator_max(scenario)
        actuals["order_dependence"] = order_independence_check(scenario, policy=policy)
    if name == "epr":
        # zero-probability branches are pruned from the tree, so seed every
        # joint outcome with 0 and let the enumerated paths overwrite it
        pairs = _imposed_pairs_first_leaf(scenario)
        for la in pairs[0][1].labels:
            for lb in pairs[1][1].labels:
                actuals[f"joint_prob[{la}{lb}]"] = 0.0
        tree = enumerate_tree(scenario.net, scenario.foliation, scenario.initial,
                              policy=policy, imposed=scenario.imposed)
        for events, prob in tree.leaf_paths():
            labels = "".join(str(e.label) for e in events)
            actuals[f"joint_prob[{labels}]"] = prob
        report = nonlocality_demo(scenario, ("+", "+"), policy=policy)
        actuals["unconditioned_prob"] = report.unconditioned
        actuals["conditioned_prob"] = report.conditioned
    elif name == "massive-control":
        tree = enumerate_tree(scenario.net, scenario.foliation, scenario.initial,
                              policy=policy)
        actuals["n_leaves"] = float(len(tree.leaves()))
        actuals["first_leaf_outcomes"] = float(len(tree.root.children))
        deep = 0
        for events, _ in tree.leaf_paths():
            deep = max(deep, sum(e.point.tau > 0 for e in events))
        actuals["later_branchings"] = float(deep)
        actuals["derived_future_pairs"] = float(
            len(derive_causal_order(scenario.net, policy=policy).future_pairs))
    elif name == "two-leaf-chain":
        tree = enumerate_tree(scenario.net, scenario.foliation, scenario.initial,
                              policy=policy)
        total = 0.0
        for events, prob in tree.leaf_paths():
            key = ",".join(str(e.label) for e in events)
            actuals[f"leaf_prob[{key}]"] = prob
            total += prob
        actuals["total_prob"] = total
        actuals["n_leaves"] = float(len(tree.leaves()))
    elif name == "recording-demo":
        p = Point(0, 0)
        eps = float(scenario.params.get("epsilon", 0.05))
        rep_aligned = recording_check(scenario.net, p, scenario.initial,
                                      scenario.quantities["aligned"], eps, policy=policy)
        actuals["aligned_max_norm"] = max(rep_aligned.alignment_norms, default=0.0)
        rep_trans = recording_check(scenario.net, p, scenario.initial,
                                    scenario.quantities["transverse"], eps, policy=policy)
        for k, n in enumerate(rep_trans.alignment_norms):
            actuals[f"transverse_norm[{k}]"] = n
        rep_tilt = recording_check(scenario.net, p, scenario.initial,
                                   scenario.quantities["tilted"], eps, policy=policy)
        actuals["tilted_passes"] = 1.0 if rep_tilt.passes else 0.0
        units = [np.eye(2, dtype=complex)[:, [i]] @ np.eye(2, dtype=complex)[[j], :]
                 for i in range(2) for j in range(2)]
        px_plus, px_minus = linalg.spin_projections((1.0, 0.0, 0.0))
        actuals["mixture_defect_transverse"] = mixture_defect(
            scenario.initial, [px_plus, px_minus], units)

    out = []
    for exp in scenario.expected:
        actual = actuals.get(exp.name, float("nan"))
        ok = bool(abs(actual - exp.value) <= exp.tol) if np.isfinite(actual) else False
        out.append(EvaluatedExpectation(name=exp.name, expected=exp.value,
                                        actual=actual, tol=exp.tol, ok=ok,
                                        derivation=exp.derivation))
    return out
