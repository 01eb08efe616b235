"""Exact photon-number statistics of Gaussian optical circuits.

The package computes loop Hafnians and their blocked (grouped-detector)
generalization through a finite-difference sieve, and builds on them to
provide photon-number distributions, moments, heralded non-Gaussian density
matrices, Fock-state channels, a distinguishable-mode fast path, and a
phase-space Monte Carlo cross-check, plus a JSON-driven command line.
"""

__version__ = "0.1.0"

from .distributions import (
    CoarsePattern,
    Distribution,
    block_cumulant,
    coarse_cumulant,
    coarse_moment,
    extract_distinguishable_blocks,
    moment_mgf,
    prob_coarse,
    prob_external,
    prob_external_distinguishable,
    prob_fine,
    prob_total,
    total_distribution,
)
from .fock_channel import (
    FockInput,
    build_a_phi,
    fock_coarse_prob,
    fock_herald,
    fock_perm_oracle,
    perm_oracle,
)
from .gaussian import (
    AdjacencyRep,
    GaussianState,
    ModeLayout,
    OverlapModel,
    apply_channel,
    displace,
    from_squeezing,
    impure_source,
    lowdin_internal_model,
    marginal_state,
    reduce_modes,
    thermal_state,
    to_adjacency,
)
from .hafnian import (
    blocked_lhaf,
    blocked_lhaf_combinatorial,
    f_n,
    lhaf_oracle,
    lhaf_sieve,
)
from .heralding import (
    DensityMatrix,
    HeraldSpec,
    build_embedding,
    fidelity,
    fock_element,
    herald_fine,
    herald_grouped,
    partial_trace,
)
from .phasespace import PPRun, pp_estimate

__all__ = [
    "__version__",
    "AdjacencyRep",
    "CoarsePattern",
    "DensityMatrix",
    "Distribution",
    "FockInput",
    "GaussianState",
    "HeraldSpec",
    "ModeLayout",
    "OverlapModel",
    "PPRun",
    "apply_channel",
    "block_cumulant",
    "blocked_lhaf",
    "blocked_lhaf_combinatorial",
    "build_a_phi",
    "build_embedding",
    "coarse_cumulant",
    "coarse_moment",
    "displace",
    "extract_distinguishable_blocks",
    "f_n",
    "fidelity",
    "fock_coarse_prob",
    "fock_element",
    "fock_herald",
    "fock_perm_oracle",
    "from_squeezing",
    "herald_fine",
    "herald_grouped",
    "impure_source",
    "lhaf_oracle",
    "lhaf_sieve",
    "lowdin_internal_model",
    "marginal_state",
    "moment_mgf",
    "partial_trace",
    "perm_oracle",
    "pp_estimate",
    "prob_coarse",
    "prob_external",
    "prob_external_distinguishable",
    "prob_fine",
    "prob_total",
    "reduce_modes",
    "thermal_state",
    "to_adjacency",
    "total_distribution",
]
