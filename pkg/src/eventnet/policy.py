"""Central numeric policy.

Every tolerance, floor and cap used anywhere in the package lives in one
frozen dataclass, so a run is reproducible from its echoed policy block
alone and no module hides its own magic numbers.
"""

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances and limits shared by all numeric routines."""

    # linear algebra on operator spans
    tol_basis: float = 1e-10        # Hilbert-Schmidt orthonormality of algebra bases
    tol_closure: float = 1e-10      # span-membership residuals and null-space cutoffs
    tol_proj: float = 1e-9          # projection-family checks (idempotent, orthogonal, complete)

    # states
    tol_psd: float = 1e-12          # allowed negative slack on state eigenvalues
    tol_trace: float = 1e-12        # allowed deviation of a state trace from 1
    tol_trace_prop: float = 1e-11   # traciality of a state on its centralizer
    trace_floor: float = 1e-9       # smallest trace surviving support clamping

    # state representations and conditioning
    tol_gns: float = 1e-10          # inner-product agreement in the representation space
    tol_gns_null: float = 1e-10     # relative cutoff for null directions of the Gram matrix
    tol_ce: float = 1e-9            # conditional-expectation agreement
    eps_floor: float = 1e-6         # smallest admissible projection weight when conditioning

    # events and branching
    gap_min: float = 1e-6           # eigenvalue clustering threshold
    prob_floor: float = 1e-9        # smallest probability counted as strictly positive
    tol_mixture: float = 1e-10      # block-diagonal mixture identity residual
    tol_tree: float = 1e-9          # branch normalization and chain-rule slack
    tol_commutation: float = 1e-9   # spacelike commutator norms treated as zero
    match_threshold: float = 0.5    # projection matching radius in operator norm

    # retries and caps
    max_retries: int = 8            # generic-element retries in minimal-projection search
    dimension_cap: int = 4096       # largest ambient Hilbert dimension a net may use
    branch_cap: int = 10_000        # largest number of branches an enumeration may produce

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_POLICY = NumericPolicy()
