"""Count, tensor, higher-order and fast count sketches for dense and CP tensors."""

from .compression import (
    ContractionSketch,
    KronSketch,
    compress_contraction,
    compress_kron,
    compression_ratio,
    decompress_contraction,
    decompress_kron,
    hash_lengths_for_cr,
    hash_memory,
    reconstruct,
    reconstruct_kron,
    sketched_regression_forward,
)
from .cpd import AlsConfig, CpdResult, RtpmConfig, als, psnr, residual_norm, rtpm, rtpm_asym
from .estimators import (
    EstimatorConfig,
    PrecomputedFcs,
    est_inner,
    est_Iuu,
    est_Iuv_generic,
    est_uuu,
    est_uvw,
    make_backend,
    median_reduce,
    precompute,
)
from .hashing import HashFamily, HashPair, compose_family, make_families, new_hash_pair
from .kernels import BACKEND as KERNEL_BACKEND
from .sketches import (
    SketchTensor,
    SketchVec,
    cs_long,
    cs_vector,
    fcs_cp,
    fcs_dense,
    hcs_cp,
    hcs_dense,
    sketch,
    ts_cp,
    ts_dense,
)
from .synthetic import gen_synthetic_asymmetric, gen_synthetic_symmetric
from .tensor import CpTensor, densify, kron, mode_unfold, refold, unvec, vec

__version__ = "0.1.0"
