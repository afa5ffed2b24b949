"""Byzantine-robust gradient aggregation via flag-subspace IRLS."""

from .aggregators import (
    AggregatorSpec,
    aggregate,
    bulyan,
    coordinate_median,
    mean,
    meamed,
    multi_krum,
    pca_baseline,
    phocas,
    trimmed_mean,
)
from .attacks import AttackSpec, apply_attack
from .augment import AugmentSpec, augment_batch, cat_map, lv_flow, smooth_cat_map
from .flag import (
    FlagConfig,
    IrlsTrace,
    beta_neg_loglik,
    explained_variance,
    fa_aggregate,
    fa_objective,
    irls_solve,
    kkt_residual,
    selection_matrix,
    taylor_neg_loglik,
)
from .linalg import orthonormalize, sym_eig, thin_svd_left
from .relaxation import (
    LiftedInstance,
    factored_pgd,
    gradient_fd_check,
    kron_identity_check,
    lifted_instance_from_gradients,
    lifted_objective,
    nuclear_normalize,
    socp_term_m1,
)
from .sim import Model, RunConfig, RunRecord, make_blobs, train, worker_gradient

__version__ = "0.1.0"
