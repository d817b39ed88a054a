"""The compression pipeline: fit a low-rank adapter update as sparse
coefficient vectors over seeded basis pools, and rebuild it from those
coefficients plus the seed.

Pipeline per adapter ``(A, B)`` with ``deltaW = B @ A``:

1. ``svd_full(W)`` anchors the basis pools to the foundation weight's
   singular frame.
2. Two pools are generated from the master seed (pool A shaped like A,
   pool B shaped like B).
3. Each factor is fit as an unconstrained least-squares combination of its
   pool, then hard-thresholded to the top-k coefficients by magnitude
   (optionally re-fit on the chosen support to debias the kept values).
4. Reconstruction regenerates only the supported bases from the seed and
   sums them: ``A~ = sum_i alpha_i M_A_i``, ``B~ = sum_j beta_j M_B_j``, so
   ``deltaW~ = (sum_j beta_j M_B_j)(sum_i alpha_i M_A_i)``.

The fit is expressed directly in the ambient frame.  Because the pools are
slices of W's singular vectors, rotating both target and bases into W's
frame (``A -> A V``, ``M -> M V``; V orthogonal) leaves the least-squares
objective, the coefficients, and the reconstruction unchanged — the frame
in which the bases are *aligned with the target's dominant directions* is
what makes slice pools beat unstructured Gaussian pools on aligned updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .basis import BasisMatrix, BasisPoolSpec, generate_basis, generate_pool
from .linalg import SvdFactors, as_matrix, frobenius_norm, matmul, solve_least_squares, svd_full
from .quant import QuantizedVector, dequantize, quantize

__all__ = [
    "AdapterPair",
    "ProjectedAdapter",
    "SparseCoefficients",
    "CompressConfig",
    "SolarArtifact",
    "FingerprintMismatch",
    "project",
    "fit_coefficients",
    "hard_threshold",
    "refit_on_support",
    "compress",
    "reconstruct",
    "delta",
    "svd_truncate",
    "fit_residual",
]


class FingerprintMismatch(ValueError):
    """Local SVD factors disagree with the fingerprint stored in an artifact."""

    def __init__(self, stored: int, local: int) -> None:
        super().__init__(
            f"artifact fingerprint {stored:#018x} does not match local SVD "
            f"fingerprint {local:#018x}; the foundation weights differ from "
            f"the compressor's"
        )
        self.stored = stored
        self.local = local


@dataclass(frozen=True)
class AdapterPair:
    """Low-rank update factors: A is r x n, B is m x r, deltaW = B @ A.

    Rank 0 (empty factors) is permitted and denotes the zero update.
    """

    A: NDArray[np.float64]
    B: NDArray[np.float64]

    def __post_init__(self) -> None:
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != B.shape[1]:
            raise ValueError(
                f"rank mismatch: A is {A.shape}, B is {B.shape}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class ProjectedAdapter:
    """Adapter factors expressed in the foundation weight's singular frame."""

    A_proj: NDArray[np.float64]
    B_proj: NDArray[np.float64]


@dataclass(frozen=True)
class SparseCoefficients:
    """Sparse vector of pool coefficients: ascending support indices and the
    values kept at those indices, over a pool of ``size`` bases."""

    size: int
    support: tuple[int, ...]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        sup = tuple(int(i) for i in self.support)
        if len(sup) != vals.shape[0]:
            raise ValueError(
                f"support length {len(sup)} != values length {vals.shape[0]}"
            )
        if any(not 0 <= i < self.size for i in sup):
            raise ValueError("support index out of range")
        if any(a >= b for a, b in zip(sup, sup[1:])):
            raise ValueError("support must be strictly ascending")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", vals)

    def dense(self) -> NDArray[np.float64]:
        """Full-length coefficient vector with zeros off the support."""
        out = np.zeros(self.size)
        if self.support:
            out[list(self.support)] = self.values
        return out


@dataclass(frozen=True)
class CompressConfig:
    """Knobs for one compress call; (W, adapter, config) fully determine the
    artifact bytes."""

    n_a: int
    n_b: int
    k_a: int
    k_b: int
    seed: int
    slice_width: int | None = None  # default: adapter rank
    noise_sigma: float = 1.0
    ridge: float = 0.0
    refit: bool = False
    basis_mode: str = "aligned"
    quant_bits: int | None = None
    fingerprint: bool = True


@dataclass(frozen=True)
class SolarArtifact:
    """The compressed adapter: everything needed to regenerate the pools
    (seed + pool parameters) plus the selected sparse coefficients.  No basis
    content is ever stored."""

    m: int
    n: int
    r: int
    n_a: int
    n_b: int
    slice_width: int
    noise_sigma: float
    master_seed: int
    basis_mode: str
    refit: bool
    alpha: SparseCoefficients
    beta: SparseCoefficients
    alpha_quant: QuantizedVector | None = None
    beta_quant: QuantizedVector | None = None
    svd_fingerprint: int | None = None

    def pool_spec(self, tag: str) -> BasisPoolSpec:
        """Reconstructable pool parameters for tag 'A' or 'B'."""
        return BasisPoolSpec(
            master_seed=self.master_seed,
            pool_tag=tag,
            count=self.n_a if tag == "A" else self.n_b,
            slice_width=self.slice_width,
            ambient=self.n if tag == "A" else self.m,
            noise_sigma=self.noise_sigma,
        )


def project(svd: SvdFactors, adapter: AdapterPair) -> ProjectedAdapter:
    """Express the adapter in W's singular frame: ``A_proj = A V``,
    ``B_proj = U^T B``.  Lossless for square U, V:
    ``U @ B_proj @ A_proj @ V.T == B @ A``."""
    if adapter.n != svd.n or adapter.m != svd.m:
        raise ValueError(
            f"adapter ({adapter.m} x {adapter.n}) does not match "
            f"SVD ({svd.m} x {svd.n})"
        )
    return ProjectedAdapter(A_proj=adapter.A @ svd.V, B_proj=svd.U.T @ adapter.B)


def _design_matrix(pool: list[BasisMatrix], shape: tuple[int, int]) -> NDArray[np.float64]:
    cols = []
    for b in pool:
        if b.matrix.shape != shape:
            raise ValueError(
                f"basis {b.index} has shape {b.matrix.shape}, expected {shape}"
            )
        cols.append(b.matrix.ravel())
    return np.stack(cols, axis=1)


def fit_coefficients(
    pool: list[BasisMatrix],
    target,
    ridge: float = 0.0,
    info: dict | None = None,
) -> NDArray[np.float64]:
    """Unconstrained least-squares coefficients: argmin over c of
    ``||target - sum_i c_i basis_i||_F^2 (+ ridge ||c||^2)``.

    Bases are vectorized into a (rows*cols) x N design matrix and solved
    through the Gram system.
    """
    if not pool:
        raise ValueError("pool must contain at least one basis")
    target = as_matrix(target, "target")
    design = _design_matrix(pool, target.shape)
    return solve_least_squares(design, target.ravel(), ridge=ridge, info=info)


def hard_threshold(coeffs, k: int) -> SparseCoefficients:
    """Keep the k largest-|value| coefficients, values unchanged.

    Magnitude ties break toward the lower index; the support is reported in
    ascending index order.
    """
    c = np.ascontiguousarray(coeffs, dtype=np.float64).ravel()
    if not 0 <= k <= c.shape[0]:
        raise ValueError(f"k must be in [0, {c.shape[0]}], got {k}")
    order = np.argsort(-np.abs(c), kind="stable")  # stable: ties -> lower index
    support = np.sort(order[:k])
    return SparseCoefficients(
        size=c.shape[0], support=tuple(int(i) for i in support), values=c[support]
    )


def refit_on_support(
    pool: list[BasisMatrix],
    target,
    support: tuple[int, ...],
    ridge: float = 0.0,
) -> SparseCoefficients:
    """Least-squares refit restricted to the supported bases (debiases the
    thresholded values; the residual can only improve on the same support)."""
    target = as_matrix(target, "target")
    support = tuple(int(i) for i in support)
    if not support:
        return SparseCoefficients(size=len(pool), support=(), values=np.zeros(0))
    sub = [pool[i] for i in support]
    design = _design_matrix(sub, target.shape)
    values = solve_least_squares(design, target.ravel(), ridge=ridge)
    return SparseCoefficients(size=len(pool), support=support, values=values)


def _fit_side(
    pool: list[BasisMatrix],
    target: NDArray[np.float64],
    k: int,
    ridge: float,
    refit: bool,
) -> SparseCoefficients:
    coeffs = fit_coefficients(pool, target, ridge=ridge)
    sparse = hard_threshold(coeffs, k)
    if refit:
        sparse = refit_on_support(pool, target, sparse.support, ridge=ridge)
    return sparse


def _quantize_side(
    sparse: SparseCoefficients, bits: int | None
) -> tuple[SparseCoefficients, QuantizedVector | None]:
    if bits is None:
        return sparse, None
    q = quantize(sparse.values, bits)
    # reconstruction must see exactly what a decoder will see
    return replace(sparse, values=dequantize(q)), q


def compress(W, adapter: AdapterPair, config: CompressConfig) -> SolarArtifact:
    """Run the full pipeline and assemble the artifact.

    Pure function of its inputs: identical (W, adapter, config) yield
    bitwise-identical artifacts.
    """
    W = as_matrix(W, "W")
    m, n = W.shape
    if adapter.m != m or adapter.n != n:
        raise ValueError(
            f"adapter ({adapter.m} x {adapter.n}) does not match W ({m} x {n})"
        )
    r = adapter.rank
    if r == 0:
        raise ValueError("adapter rank is 0; there is nothing to fit")
    if config.basis_mode not in ("aligned", "random"):
        raise ValueError(f"basis_mode must be 'aligned' or 'random', got {config.basis_mode!r}")
    if not 0 <= config.k_a <= config.n_a:
        raise ValueError(f"k_a must be in [0, n_a={config.n_a}], got {config.k_a}")
    if not 0 <= config.k_b <= config.n_b:
        raise ValueError(f"k_b must be in [0, n_b={config.n_b}], got {config.k_b}")
    width = config.slice_width if config.slice_width is not None else r
    if width != r:
        raise ValueError(
            f"slice_width {width} must equal the adapter rank {r} so basis "
            f"shapes match the factors"
        )

    svd = svd_full(W)
    # the artifact stores noise_sigma as float32; generate pools with that
    # rounded value so a decoder regenerates bit-identical bases
    sigma = float(np.float32(config.noise_sigma))
    spec_a = BasisPoolSpec(
        master_seed=config.seed, pool_tag="A", count=config.n_a,
        slice_width=width, ambient=n, noise_sigma=sigma,
    )
    spec_b = BasisPoolSpec(
        master_seed=config.seed, pool_tag="B", count=config.n_b,
        slice_width=width, ambient=m, noise_sigma=sigma,
    )
    pool_a = generate_pool(spec_a, svd, mode=config.basis_mode)
    pool_b = generate_pool(spec_b, svd, mode=config.basis_mode)

    alpha = _fit_side(pool_a, adapter.A, config.k_a, config.ridge, config.refit)
    beta = _fit_side(pool_b, adapter.B, config.k_b, config.ridge, config.refit)
    alpha, alpha_q = _quantize_side(alpha, config.quant_bits)
    beta, beta_q = _quantize_side(beta, config.quant_bits)

    fingerprint = None
    if config.fingerprint:
        from .format import svd_fingerprint  # format depends on core types

        fingerprint = svd_fingerprint(svd)

    return SolarArtifact(
        m=m, n=n, r=r, n_a=config.n_a, n_b=config.n_b,
        slice_width=width, noise_sigma=sigma,
        master_seed=config.seed, basis_mode=config.basis_mode,
        refit=config.refit, alpha=alpha, beta=beta,
        alpha_quant=alpha_q, beta_quant=beta_q, svd_fingerprint=fingerprint,
    )


def _sum_supported(
    spec: BasisPoolSpec,
    svd: SvdFactors,
    sparse: SparseCoefficients,
    mode: str,
    shape: tuple[int, int],
) -> NDArray[np.float64]:
    out = np.zeros(shape)
    for idx, value in zip(sparse.support, sparse.values):
        out += value * generate_basis(spec, svd, idx, mode).matrix
    return out


def reconstruct(svd: SvdFactors, artifact: SolarArtifact) -> AdapterPair:
    """Rebuild the adapter from seed + coefficients: regenerates only the
    supported bases and sums them per factor.

    If the artifact carries an SVD fingerprint it must match the local
    factors; a mismatch means the two sides hold different foundation
    weights and reconstruction would be silently wrong.
    """
    if svd.m != artifact.m or svd.n != artifact.n:
        raise ValueError(
            f"SVD is {svd.m} x {svd.n} but artifact expects "
            f"{artifact.m} x {artifact.n}"
        )
    if artifact.svd_fingerprint is not None:
        from .format import svd_fingerprint

        local = svd_fingerprint(svd)
        if local != artifact.svd_fingerprint:
            raise FingerprintMismatch(artifact.svd_fingerprint, local)

    A = _sum_supported(
        artifact.pool_spec("A"), svd, artifact.alpha, artifact.basis_mode,
        (artifact.slice_width, artifact.n),
    )
    B = _sum_supported(
        artifact.pool_spec("B"), svd, artifact.beta, artifact.basis_mode,
        (artifact.m, artifact.slice_width),
    )
    return AdapterPair(A=A, B=B)


def delta(adapter: AdapterPair) -> NDArray[np.float64]:
    """The dense update ``B @ A`` (m x n)."""
    if adapter.rank == 0:
        return np.zeros((adapter.m, adapter.n))
    return matmul(adapter.B, adapter.A)


def svd_truncate(deltaW, rank: int) -> AdapterPair:
    """Best rank-``rank`` approximation of deltaW as an adapter pair
    (``B = U_t diag(sigma_t)``, ``A = V_t^T``); the baseline every sparse
    representation is measured against.  ``rank = 0`` returns the zero
    adapter."""
    deltaW = as_matrix(deltaW, "deltaW")
    m, n = deltaW.shape
    if not 0 <= rank <= min(m, n):
        raise ValueError(f"rank must be in [0, {min(m, n)}], got {rank}")
    if rank == 0:
        return AdapterPair(A=np.zeros((0, n)), B=np.zeros((m, 0)))
    f = svd_full(deltaW)
    B = f.U[:, :rank] * f.sigma[:rank]
    A = f.V[:, :rank].T
    return AdapterPair(A=np.ascontiguousarray(A), B=np.ascontiguousarray(B))


def fit_residual(adapter: AdapterPair, rebuilt: AdapterPair) -> tuple[float, float]:
    """Relative factor-fit residuals ``(||A~ - A|| / ||A||, ||B~ - B|| / ||B||)``
    (absolute norms when a factor is zero)."""
    def rel(x, y):
        base = frobenius_norm(x)
        err = frobenius_norm(np.asarray(y) - np.asarray(x))
        return err / base if base > 0 else err

    return rel(adapter.A, rebuilt.A), rel(adapter.B, rebuilt.B)
