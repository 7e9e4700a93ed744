"""One-shot quantum information toolkit.

Labeled multi-register states and channels, one-shot divergences with
primal/dual certificates, constructive smoothing, convex-split mixtures, and
exact finite-dimensional simulations of entanglement-assisted coding
protocols.
"""

import importlib.metadata as _ilm

try:
    __version__ = _ilm.version("qoneshot")
except _ilm.PackageNotFoundError:  # running from a checkout without install
    __version__ = "0.1.0"

from .errors import (
    BadParam,
    BadPartition,
    ComputeError,
    DimGuard,
    LabelCollision,
    MarginalMismatch,
    NoConverge,
    NotCPTP,
    NotHermitian,
    NotNormalized,
    NotPSD,
    QOneShotError,
    RegionViolation,
    ShapeMismatch,
    SupportViolation,
    TypicalityFail,
    UnknownLabel,
    ValidationError,
)
from .registers import RegisterLayout
from .states import (
    DensityOperator,
    PureState,
    basis_ket,
    classical_joint,
    classical_state,
    density_from_json,
    embed_operator,
    entropy,
    fidelity,
    maximally_entangled,
    maximally_mixed,
    mutual_information,
    partial_trace,
    pure_from_json,
    purified_distance,
    purify,
    schmidt,
    tensor,
    tensor_many,
)
from .channels import (
    KrausChannel,
    amplitude_damping,
    apply_to_pure,
    builtin_channel,
    channel_from_json,
    choi_from_kraus,
    classical_channel,
    dephasing,
    depolarizing,
    erasure,
    identity_channel,
    kraus_from_choi,
)
from .divergences import (
    HypothesisTestResult,
    InfoSpectrumResult,
    alpha_from_error,
    d_max,
    hypothesis_testing_divergence,
    hypothesis_testing_from_error,
    i_max,
    info_spectrum,
    info_spectrum_detailed,
    inverse_gaussian_cdf,
    relative_entropy,
    relative_entropy_variance,
    second_order_estimate,
    support_leak,
)
from .smoothing import (
    SmoothingCertificate,
    TypicalProjectionResult,
    restricted_smooth_pipeline,
    smooth_dmax_upper,
    typical_projection,
)
from .convexsplit import (
    ConvexSplitState,
    UhlmannIsometry,
    build_bipartite_convex_split,
    build_convex_split,
    convex_split_bound,
    uhlmann_isometry,
)
from .decoding import PositionDecoder
from .protocols import (
    BroadcastConfig,
    GPConfig,
    P2PConfig,
    PairwiseIndependentFamily,
    ProtocolReport,
    SubsetCodeConfig,
    asymptotic_rates,
    p2p_rate_bound,
    simulate_broadcast,
    simulate_gelfand_pinsker,
    simulate_iid_subset,
    simulate_p2p,
)
from .linalg import max_dim_limit, positive_part
from .serialize import RunManifest, dump_canonical, dumps_canonical
from .selftest import run_selftest

__all__ = [name for name in dir() if not name.startswith("_")]
