"""salr: sparse weight compression with low-rank residual adapters.

The package prunes dense weight matrices by magnitude, stores the survivors
in a bitmap sparse format with byte-exact round trips, repairs pruning error
with truncated-SVD residual adapters, fuses any number of low-rank adapters
into two matrix products, and multiplies encoded matrices through a two-stage
decode/compute pipeline whose output is bit-identical with overlap on or off.
"""

from .errors import (
    BoundsError,
    ConfigError,
    CorruptionError,
    DomainError,
    FormatError,
    SalrError,
    ShapeError,
    VerificationError,
)
from .linalg import (
    RngState,
    SvdResult,
    matmul,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    power_iteration_sigma_max,
    sample_gaussian_matrix,
    svd,
)
from .prune import (
    PruneConfig,
    PruneMethod,
    TheoryReport,
    apply_mask_and_measure,
    build_mask,
    e1_closed,
    e2_closed,
    e3_closed,
    kept_count,
    mask_error_ordering_holds,
    mse_closed_form,
    prune_threshold,
    q_function,
    run_theory_report,
)
from .residual import (
    AdapterPair,
    ResidualTrainConfig,
    SpectrumReport,
    StepSizeMode,
    build_residual_adapter,
    lipschitz_constant,
    optimal_step_size,
    residual_gradient,
    residual_loss,
    spectrum,
    train_residual,
    truncation_error_bound,
)
from .fusion import FusedAdapters, apply_fused, apply_sequential, forward, fuse
from .bitmap import (
    BitmapSparseMatrix,
    build_lut,
    compression_ratio,
    container_size_bytes,
    decode,
    decode_block,
    encode,
    popcount8,
    read_container,
    write_container,
)
from .pipeline import (
    BenchResult,
    PipelineConfig,
    PipelineProbe,
    bench,
    pipelined_forward,
    pipelined_matmul,
    validate_transitions,
)

__version__ = "0.1.0"
