"""Seeded sparse-coefficient compression for low-rank adapter updates.

A low-rank update ΔW = B @ A to a frozen weight matrix W is re-expressed as
two sparse coefficient vectors over pools of randomized basis matrices.  The
pools are regenerated from a 64-bit seed on the receiving side, so only the
coefficients, their index masks, and the seed ever need to be stored or sent.
Pools are built from noisy slices of W's own singular vectors, which is what
lets a small budget capture updates that align with W's dominant directions.

The pieces, bottom-up:

* :mod:`solar.rng` — pinned PRNG (splitmix64 seeding + xoshiro256** streams)
  so every basis matrix is bit-reproducible everywhere;
* :mod:`solar.linalg` — canonical-sign SVD and the regularized least-squares
  solve;
* :mod:`solar.basis` — seeded basis pools;
* :mod:`solar.core` — compress / reconstruct pipeline and artifact types;
* :mod:`solar.quant` — coefficient quantization and exact footprint
  accounting;
* :mod:`solar.format` — the ``.solar`` container and strict NPY I/O;
* :mod:`solar.analysis` — subspace similarity, error bounds, rangefinder
  checks;
* :mod:`solar.bench` — synthetic instances and the sweep harness;
* :mod:`solar.cli` — the ``solar`` command.
"""

from .analysis import (
    BoundInputs,
    RangefinderResult,
    SimilarityGrid,
    c1_training_bound,
    c2_bound,
    effective_sketch_rank,
    empirical_rangefinder_error,
    similarity_grid,
    subspace_similarity,
    tail_energy,
)
from .basis import (
    BasisMatrix,
    BasisPoolSpec,
    generate_basis,
    generate_pool,
    sample_index_set,
)
from .bench import (
    BaselineRow,
    SweepConfig,
    SweepResult,
    SweepRow,
    SyntheticSpec,
    compare_baselines,
    sweep,
    synth,
)
from .core import (
    AdapterPair,
    CompressConfig,
    FingerprintMismatch,
    ProjectedAdapter,
    SolarArtifact,
    SparseCoefficients,
    compress,
    delta,
    fit_coefficients,
    fit_residual,
    hard_threshold,
    project,
    reconstruct,
    refit_on_support,
    svd_truncate,
)
from .format import (
    FormatError,
    decode,
    encode,
    read_npy,
    read_solar,
    svd_fingerprint,
    write_npy,
    write_solar,
)
from .linalg import (
    SvdFactors,
    frobenius_norm,
    orthonormalize,
    solve_least_squares,
    svd_full,
)
from .quant import (
    PRESETS,
    FootprintReport,
    QuantizedVector,
    dequantize,
    footprint_bytes,
    footprint_bytes_lora,
    footprint_nola,
    footprint_params,
    footprint_params_lora,
    pack_codes,
    preset_report,
    quantize,
    unpack_codes,
)
from .rng import TAG_A, TAG_B, TAG_SYNTH, TAG_TRIAL, RngStream, derive_substream, splitmix64_mix

__version__ = "0.1.0"

__all__ = [
    "AdapterPair",
    "BasisMatrix",
    "BasisPoolSpec",
    "BaselineRow",
    "BoundInputs",
    "CompressConfig",
    "FingerprintMismatch",
    "FootprintReport",
    "FormatError",
    "PRESETS",
    "ProjectedAdapter",
    "QuantizedVector",
    "RangefinderResult",
    "RngStream",
    "SimilarityGrid",
    "SolarArtifact",
    "SparseCoefficients",
    "SvdFactors",
    "SweepConfig",
    "SweepResult",
    "SweepRow",
    "SyntheticSpec",
    "TAG_A",
    "TAG_B",
    "TAG_SYNTH",
    "TAG_TRIAL",
    "c1_training_bound",
    "c2_bound",
    "compare_baselines",
    "compress",
    "decode",
    "delta",
    "dequantize",
    "derive_substream",
    "effective_sketch_rank",
    "empirical_rangefinder_error",
    "encode",
    "fit_coefficients",
    "fit_residual",
    "footprint_bytes",
    "footprint_bytes_lora",
    "footprint_nola",
    "footprint_params",
    "footprint_params_lora",
    "frobenius_norm",
    "generate_basis",
    "generate_pool",
    "hard_threshold",
    "orthonormalize",
    "pack_codes",
    "preset_report",
    "project",
    "quantize",
    "read_npy",
    "read_solar",
    "reconstruct",
    "refit_on_support",
    "sample_index_set",
    "similarity_grid",
    "solve_least_squares",
    "splitmix64_mix",
    "subspace_similarity",
    "svd_fingerprint",
    "svd_full",
    "svd_truncate",
    "sweep",
    "synth",
    "tail_energy",
    "unpack_codes",
    "write_npy",
    "write_solar",
]
