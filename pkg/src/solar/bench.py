"""Synthetic instances and the experiment harness.

Instances are fully seeded: a foundation weight W with a chosen spectrum and
an adapter whose energy overlaps W's top-r singular directions by a
controllable ``alignment`` fraction (1 = the adapter lives exactly in W's
dominant subspace, 0 = in its orthogonal complement).  The harness sweeps
pool sizes, budgets, and basis modes through the real compress/reconstruct
pipeline and reports reconstruction errors as CSV.

Reconstruction fidelity, not task accuracy, is the measured quantity — the
CSV metadata line states this substitution explicitly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .analysis import BoundInputs, c2_bound
from .core import (
    AdapterPair,
    CompressConfig,
    compress,
    delta,
    fit_residual,
    reconstruct,
    svd_truncate,
)
from .linalg import as_matrix, frobenius_norm, svd_full
from .quant import footprint_params, footprint_params_lora
from .rng import TAG_SYNTH, derive_substream, splitmix64_mix

__all__ = [
    "SyntheticSpec",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "BaselineRow",
    "synth",
    "sweep",
    "compare_baselines",
]

_SPECTRA = ("geometric", "polynomial", "flat")


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded recipe for one (W, adapter) instance.

    ``spectrum`` shapes W's singular values: geometric(ratio),
    polynomial(power), or flat.  Flat spectra make the SVD non-unique, which
    voids the alignment semantics; geometric is the default for that reason.
    ``alignment`` requires 2r <= min(m, n) so an exact orthogonal complement
    mix exists.
    """

    m: int
    n: int
    r: int
    alignment: float
    seed: int
    spectrum: tuple = ("geometric", 0.9)

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if 2 * self.r > min(self.m, self.n):
            raise ValueError(
                f"need 2r <= min(m, n) for the alignment mix, got r={self.r}, "
                f"min(m, n)={min(self.m, self.n)}"
            )
        if not 0.0 <= self.alignment <= 1.0:
            raise ValueError(f"alignment must be in [0, 1], got {self.alignment}")
        if self.spectrum[0] not in _SPECTRA:
            raise ValueError(f"spectrum kind must be one of {_SPECTRA}")


def _seeded_orthogonal(dim: int, seed: int, index: int) -> NDArray[np.float64]:
    """Deterministic random orthogonal matrix: QR of a seeded Gaussian with
    the R-diagonal sign fix."""
    stream = derive_substream(seed, TAG_SYNTH, index)
    G = stream.gaussian_block(dim * dim).reshape(dim, dim)
    Q, R = np.linalg.qr(G)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs


def _spectrum_values(spec: SyntheticSpec) -> NDArray[np.float64]:
    p = min(spec.m, spec.n)
    kind = spec.spectrum[0]
    if kind == "geometric":
        ratio = float(spec.spectrum[1])
        return ratio ** np.arange(p)
    if kind == "polynomial":
        power = float(spec.spectrum[1])
        return (np.arange(p) + 1.0) ** -power
    return np.ones(p)


def synth(spec: SyntheticSpec) -> tuple[NDArray[np.float64], AdapterPair]:
    """Generate (W, adapter) deterministically from the spec.

    W = Uw diag(s) Vw^T with seeded orthogonal factors.  The adapter mixes
    W's top-r directions with complement directions r..2r-1 at weights
    sqrt(alignment) / sqrt(1 - alignment) per side, giving exactly
    ``phi(W, deltaW, r, r) = alignment * r``.  Factor spectrum is geometric
    (ratio 0.7), normalized so ||deltaW||_F = 1, with distinct values so the
    adapter's own SVD is unambiguous.
    """
    Uw = _seeded_orthogonal(spec.m, spec.seed, 0)
    Vw = _seeded_orthogonal(spec.n, spec.seed, 1)
    p = min(spec.m, spec.n)
    s = _spectrum_values(spec)
    W = (Uw[:, :p] * s) @ Vw[:, :p].T

    r = spec.r
    a = spec.alignment
    U_mix = np.sqrt(a) * Uw[:, :r] + np.sqrt(1.0 - a) * Uw[:, r : 2 * r]
    V_mix = np.sqrt(a) * Vw[:, :r] + np.sqrt(1.0 - a) * Vw[:, r : 2 * r]
    d = 0.7 ** np.arange(r)
    d = d / np.linalg.norm(d)
    adapter = AdapterPair(A=np.ascontiguousarray(V_mix.T), B=U_mix * d)
    return W, adapter


@dataclass(frozen=True)
class SweepConfig:
    """Shared knobs for every grid point of a sweep."""

    noise_sigma: float = 1.0
    ridge: float = 0.0
    refit: bool = False
    quant_bits: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    n_pool: int
    k: int
    mode: str
    err_product: float
    err_a: float
    err_b: float
    c2: float
    ms: float


@dataclass(frozen=True)
class SweepResult:
    """Rows in grid order.  ``k`` is the per-factor budget (each factor keeps
    k of its pool's N coefficients)."""

    rows: tuple[SweepRow, ...]

    def to_csv(self, timings: bool = True) -> str:
        """CSV with a metadata comment line and a fixed header.

        ``timings=False`` writes 0.000 in the ms column so that re-running an
        identical sweep reproduces identical bytes; every other column is
        deterministic either way.
        """
        lines = [
            "# metric: relative reconstruction error of the rebuilt update "
            "(task accuracy is not simulated)",
            "N,k,mode,err_product,err_A,err_B,c2,ms",
        ]
        for row in self.rows:
            ms = row.ms if timings else 0.0
            lines.append(
                f"{row.n_pool},{row.k},{row.mode},{row.err_product:.12g},"
                f"{row.err_a:.12g},{row.err_b:.12g},{row.c2:.12g},{ms:.3f}"
            )
        return "\n".join(lines) + "\n"


def _point_seed(config_seed: int, n_pool: int) -> int:
    # depends on the pool size but not on (k, mode): nested budgets share one
    # pool, and aligned-vs-random comparisons are paired seed-for-seed
    return splitmix64_mix(config_seed ^ splitmix64_mix(n_pool))


def _relative_product_error(adapter: AdapterPair, rebuilt: AdapterPair) -> float:
    target = delta(adapter)
    err = frobenius_norm(delta(rebuilt) - target)
    base = frobenius_norm(target)
    return err / base if base > 0 else err


def run_point(
    W,
    adapter: AdapterPair,
    n_pool: int,
    k: int,
    mode: str,
    config: SweepConfig,
) -> SweepRow:
    """Compress + reconstruct one configuration point and measure errors."""
    start = time.perf_counter()
    artifact = compress(
        W,
        adapter,
        CompressConfig(
            n_a=n_pool, n_b=n_pool, k_a=k, k_b=k,
            seed=_point_seed(config.seed, n_pool),
            noise_sigma=config.noise_sigma, ridge=config.ridge,
            refit=config.refit, basis_mode=mode,
            quant_bits=config.quant_bits, fingerprint=False,
        ),
    )
    rebuilt = reconstruct(svd_full(W), artifact)
    ms = (time.perf_counter() - start) * 1e3

    err_a, err_b = fit_residual(adapter, rebuilt)
    sigma_delta = svd_full(delta(adapter)).sigma
    try:
        c2 = c2_bound(BoundInputs(
            sigma=sigma_delta, n_a=n_pool, n_b=n_pool,
            r_a=adapter.rank, r_b=adapter.rank, k=2 * k,
        ))
    except ValueError:  # pool too small for the bound's oversampling premise
        c2 = float("nan")
    return SweepRow(
        n_pool=n_pool, k=k, mode=mode,
        err_product=_relative_product_error(adapter, rebuilt),
        err_a=err_a, err_b=err_b, c2=c2, ms=ms,
    )


def sweep(
    spec: SyntheticSpec,
    grid: list[tuple[int, int, str]],
    config: SweepConfig = SweepConfig(),
) -> SweepResult:
    """Run compress+reconstruct over a grid of (N, k, basis_mode) points on
    one synthetic instance.  Reproducible end-to-end from (spec, grid,
    config); rows come back in grid order."""
    for n_pool, k, mode in grid:
        if k > n_pool:
            raise ValueError(f"grid point (N={n_pool}, k={k}): k exceeds N")
    W, adapter = synth(spec)
    rows = [run_point(W, adapter, n_pool, k, mode, config) for n_pool, k, mode in grid]
    return SweepResult(rows=tuple(rows))


@dataclass(frozen=True)
class BaselineRow:
    method: str
    k: int
    params: int
    rank: int  # truncation rank for the SVD row, adapter rank otherwise
    err_product: float


def compare_baselines(
    W,
    adapter: AdapterPair,
    budgets: list[int],
    pool_size: int,
    config: SweepConfig = SweepConfig(),
) -> list[BaselineRow]:
    """Sparse-coefficient compression (aligned and random pools) versus plain
    SVD truncation at matched parameter budgets.

    For each per-factor budget k the coefficient methods cost
    ``footprint_params(1, k, k, N, N)`` parameters; the truncation rank is
    the largest t whose dense factors (t * (m + n) parameters) fit within
    that same budget.  Errors are relative product errors.
    """
    W = as_matrix(W, "W")
    m, n = W.shape
    svd = svd_full(W)
    target = delta(adapter)
    base = frobenius_norm(target)
    rows: list[BaselineRow] = []
    for k in budgets:
        params = footprint_params(1, k, k, pool_size, pool_size)
        for mode in ("aligned", "random"):
            artifact = compress(
                W, adapter,
                CompressConfig(
                    n_a=pool_size, n_b=pool_size, k_a=k, k_b=k,
                    seed=_point_seed(config.seed, pool_size),
                    noise_sigma=config.noise_sigma, ridge=config.ridge,
                    refit=config.refit, basis_mode=mode, fingerprint=False,
                ),
            )
            rebuilt = reconstruct(svd, artifact)
            rows.append(BaselineRow(
                method=f"solar-{mode}", k=k, params=params, rank=adapter.rank,
                err_product=_relative_product_error(adapter, rebuilt),
            ))
        t = min(params // (m + n), min(m, n))
        truncated = svd_truncate(target, t)
        err = frobenius_norm(delta(truncated) - target)
        rows.append(BaselineRow(
            method="svd-truncate", k=k,
            params=footprint_params_lora(1, [(n, t, m)]), rank=t,
            err_product=err / base if base > 0 else err,
        ))
    return rows
