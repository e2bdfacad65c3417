"""Output-entropy quantities of quantum channels and numerical checks of
strong superadditivity for the depolarizing channel."""

from .channels import (
    Channel,
    DepolarizingParams,
    apply_channel,
    apply_product_channel,
    choi_matrix,
    depolarizing_channel,
    identity_channel,
    is_bistochastic,
    product_channel,
    random_kraus_channel,
)
from .entropy_opt import (
    Ensemble,
    OptimizerConfig,
    OptResult,
    decompositions_from_isometry,
    h_hat_dep_closed,
    h_hat_numeric,
    s_min_dep_closed,
    s_min_numeric,
)
from .qstate import (
    BipartiteDims,
    balanced_basis,
    partial_trace,
    random_density,
    random_unitary,
    tensor_product,
    von_neumann_entropy,
)
from .superadd import king_bound, smin_additivity_check, strong_superadd_check, verify_lemma_instance

__version__ = "0.1.0"
