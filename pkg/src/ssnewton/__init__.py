"""Semismooth Newton solver for block-structured nonsmooth systems.

Subpackages: ``blocks`` (system algebra and Schur complements),
``eigencomp`` (eigencomplementarity certificates), ``newton`` (the solver),
``fem``/``plasticity`` (the 2D elastoplastic benchmark discretization) and
``experiments`` (benchmark drivers behind the CLI).
"""

from .blocks import (
    BlockSystem,
    Dimensions,
    SemismoothBlockFamily,
    StateVector,
    SubgradientElement,
    assemble_H,
    eval_F,
    eval_affine,
    schur_E,
    schur_H,
)
from .eigencomp import (
    EigencompCertificate,
    SymmetricPair,
    certify,
    certify_either_order,
    check_pair,
    neg_semidef_product,
    singular_orthogonality_witness,
)
from .newton import (
    IterationTrace,
    SolverConfig,
    SolverFailure,
    affine_invariance_check,
    backtrack,
    regularity_report,
    solve,
)
from .plasticity import (
    ChiBlockFamily,
    DiscreteProblem,
    MaterialParams,
    assemble,
    build_problem,
    chi_eval,
    chi_subgradient,
    complementarity_residuals,
    quad_Qhp,
    recover_multiplier,
)

__all__ = [
    "BlockSystem",
    "ChiBlockFamily",
    "Dimensions",
    "DiscreteProblem",
    "EigencompCertificate",
    "IterationTrace",
    "MaterialParams",
    "SemismoothBlockFamily",
    "SolverConfig",
    "SolverFailure",
    "StateVector",
    "SubgradientElement",
    "SymmetricPair",
    "affine_invariance_check",
    "assemble",
    "assemble_H",
    "backtrack",
    "build_problem",
    "certify",
    "certify_either_order",
    "check_pair",
    "chi_eval",
    "chi_subgradient",
    "complementarity_residuals",
    "eval_F",
    "eval_affine",
    "neg_semidef_product",
    "quad_Qhp",
    "recover_multiplier",
    "regularity_report",
    "schur_E",
    "schur_H",
    "solve",
]

__version__ = "0.1.0"
