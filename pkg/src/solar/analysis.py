"""Diagnostics and error-bound calculators.

Covers the subspace-similarity measure phi (how much of one matrix's
dominant left subspace lies inside another's), spectrum tail energies, the
closed-form compression-error bound C2 with its sketching prefactors, the
formula-only training-error bound C1, and a Monte-Carlo check that the
randomized rangefinder obeys its expected-error bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .basis import BasisMatrix
from .linalg import as_matrix, frobenius_norm, orthonormalize, svd_full
from .rng import TAG_TRIAL, derive_substream

__all__ = [
    "SimilarityGrid",
    "BoundInputs",
    "RangefinderResult",
    "subspace_similarity",
    "similarity_grid",
    "tail_energy",
    "c2_bound",
    "c1_training_bound",
    "effective_sketch_rank",
    "empirical_rangefinder_error",
]


@dataclass(frozen=True)
class SimilarityGrid:
    """phi values for all prefix pairs: ``values[i-1, j-1] = phi(i, j)``."""

    max_i: int
    max_j: int
    values: NDArray[np.float64]

    def to_csv(self) -> str:
        lines = ["i,j,phi"]
        for i in range(1, self.max_i + 1):
            for j in range(1, self.max_j + 1):
                lines.append(f"{i},{j},{self.values[i - 1, j - 1]:.12g}")
        return "\n".join(lines) + "\n"


def subspace_similarity(W, deltaW, i: int, j: int, side: str = "left") -> float:
    """``phi(W, deltaW, i, j) = ||U_W[:, :i]^T @ U_dW[:, :j]||_F^2``.

    Measures how much of deltaW's top-j singular subspace lies inside W's
    top-i subspace: 0 (orthogonal) up to min(i, j) (nested).  ``side='right'``
    uses the V factors instead.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if i == 0 or j == 0:
        return 0.0
    fw = svd_full(W)
    fd = svd_full(deltaW)
    Uw = fw.U if side == "left" else fw.V
    Ud = fd.U if side == "left" else fd.V
    if i > Uw.shape[1] or j > Ud.shape[1]:
        raise ValueError(
            f"(i, j) = ({i}, {j}) exceeds available singular vectors "
            f"({Uw.shape[1]}, {Ud.shape[1]})"
        )
    C = Uw[:, :i].T @ Ud[:, :j]
    return float(np.sum(C * C))


def similarity_grid(W, deltaW, max_i: int, max_j: int, side: str = "left") -> SimilarityGrid:
    """All prefix similarities up to (max_i, max_j) from one factorization
    (cumulative sums of squared inner products, no per-cell SVDs)."""
    fw = svd_full(W)
    fd = svd_full(deltaW)
    Uw = fw.U if side == "left" else fw.V
    Ud = fd.U if side == "left" else fd.V
    if max_i > Uw.shape[1] or max_j > Ud.shape[1]:
        raise ValueError("grid size exceeds available singular vectors")
    C = Uw[:, :max_i].T @ Ud[:, :max_j]
    grid = np.cumsum(np.cumsum(C * C, axis=0), axis=1)
    return SimilarityGrid(max_i=max_i, max_j=max_j, values=grid)


def tail_energy(sigma, t: int) -> float:
    """sqrt of the spectrum energy beyond index t: ``sqrt(sum_{s>t} sigma_s^2)``
    — the best-rank-t approximation residual."""
    s = np.ascontiguousarray(sigma, dtype=np.float64).ravel()
    if np.any(s < 0):
        raise ValueError("singular values must be non-negative")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be non-increasing")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t >= s.size:
        return 0.0
    return float(np.sqrt(np.sum(s[t:] ** 2)))


@dataclass(frozen=True)
class BoundInputs:
    """Inputs to the C2 compression-error bound.

    ``r_a``/``r_b`` are the effective sketch ranks of the two pools (caller
    supplied, e.g. the known adapter rank, or measured via
    :func:`effective_sketch_rank`); oversampling ``N > r + 1`` is required
    for the expectation prefactors to be finite.
    """

    sigma: NDArray[np.float64]
    n_a: int
    n_b: int
    r_a: int
    r_b: int
    k: int

    def __post_init__(self) -> None:
        s = np.ascontiguousarray(self.sigma, dtype=np.float64).ravel()
        object.__setattr__(self, "sigma", s)
        if self.n_a <= self.r_a + 1:
            raise ValueError(
                f"bound invalid: need n_a > r_a + 1 (got n_a={self.n_a}, r_a={self.r_a})"
            )
        if self.n_b <= self.r_b + 1:
            raise ValueError(
                f"bound invalid: need n_b > r_b + 1 (got n_b={self.n_b}, r_b={self.r_b})"
            )
        if min(self.r_a, self.r_b, self.k) < 0:
            raise ValueError("r_a, r_b, k must be >= 0")


def c2_bound(inputs: BoundInputs) -> float:
    """Closed-form compression-error bound: two expected sketching residuals
    (one per pool, with oversampling prefactors) plus the thresholding tail.

        sqrt(1 + r_a/(n_a - r_a - 1)) * tail(r_a)
      + sqrt(1 + r_b/(n_b - r_b - 1)) * tail(r_b)
      + tail(k)

    Non-increasing in n_a, n_b, and k; zero when all three tails vanish.
    """
    s = inputs.sigma
    term_a = np.sqrt(1.0 + inputs.r_a / (inputs.n_a - inputs.r_a - 1)) * tail_energy(s, inputs.r_a)
    term_b = np.sqrt(1.0 + inputs.r_b / (inputs.n_b - inputs.r_b - 1)) * tail_energy(s, inputs.r_b)
    return float(term_a + term_b + tail_energy(s, inputs.k))


def c1_training_bound(
    r_star: int, kappa: float, lambda_r_star: float, eta: float, t_steps: int
) -> float:
    """Formula-only training-error bound:
    ``sqrt(2 r*) * (1 - eta * lambda_{r*} / (64 kappa))^t * lambda_{r*}``.

    No training is performed; the contraction factor must lie in (0, 1).
    """
    if r_star < 1:
        raise ValueError(f"r_star must be >= 1, got {r_star}")
    if t_steps < 0:
        raise ValueError(f"t_steps must be >= 0, got {t_steps}")
    contraction = 1.0 - eta * lambda_r_star / (64.0 * kappa)
    if not 0.0 < contraction < 1.0:
        raise ValueError(
            f"contraction factor {contraction} outside (0, 1); check eta, "
            f"lambda, kappa"
        )
    return float(np.sqrt(2.0 * r_star) * contraction**t_steps * lambda_r_star)


def effective_sketch_rank(deltaW, pool: list[BasisMatrix], tol: float | None = None) -> int:
    """Numerical rank of the sketch of deltaW through a basis pool.

    Pool-A bases (r x n) probe the column space (``Y = deltaW @ M^T``
    stacked); pool-B bases (m x r) probe the row space (``Y = deltaW^T @ M``).
    Default tolerance: ``sigma_max * max(m, n) * eps``.
    """
    D = as_matrix(deltaW, "deltaW")
    m, n = D.shape
    if not pool:
        return 0
    blocks = []
    for b in pool:
        if b.matrix.shape[1] == n:  # pool A: rows live in the input space
            blocks.append(D @ b.matrix.T)
        elif b.matrix.shape[0] == m:  # pool B: columns live in the output space
            blocks.append(D.T @ b.matrix)
        else:
            raise ValueError(
                f"basis {b.index} shape {b.matrix.shape} matches neither side "
                f"of deltaW {D.shape}"
            )
    Y = np.concatenate(blocks, axis=1)
    if tol is None:
        smax = float(np.linalg.norm(D, 2)) if D.size else 0.0
        tol = smax * max(m, n) * np.finfo(np.float64).eps
    return orthonormalize(Y, tol=tol).shape[1]


@dataclass(frozen=True)
class RangefinderResult:
    """Monte-Carlo mean rangefinder error alongside its closed-form bound."""

    mean_error: float
    bound: float
    trials: int


def empirical_rangefinder_error(
    deltaW, num_probes: int, trials: int, seed: int, *, r_a: int
) -> RangefinderResult:
    """Monte-Carlo check of the expected rangefinder error.

    Each trial draws a Gaussian probe matrix (n x num_probes), forms
    ``Y = deltaW @ Omega``, orthonormalizes to Q, and measures
    ``||deltaW - Q Q^T deltaW||_F``.  The mean over trials is compared with
    the closed-form expectation bound
    ``sqrt(1 + r_a/(num_probes - r_a - 1)) * tail(sigma, r_a)``.
    Reproducible: trial t draws from substream (seed, trial-tag, t).
    """
    D = as_matrix(deltaW, "deltaW")
    m, n = D.shape
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if num_probes <= r_a + 1:
        raise ValueError(
            f"need num_probes > r_a + 1 (got num_probes={num_probes}, r_a={r_a})"
        )
    sigma = svd_full(D).sigma
    prefactor = float(np.sqrt(1.0 + r_a / (num_probes - r_a - 1)))
    bound = prefactor * tail_energy(sigma, r_a)

    total = 0.0
    for t in range(trials):
        stream = derive_substream(seed, TAG_TRIAL, t)
        omega = stream.gaussian_block(n * num_probes).reshape(n, num_probes)
        Q = orthonormalize(D @ omega)
        total += frobenius_norm(D - Q @ (Q.T @ D))
    return RangefinderResult(mean_error=total / trials, bound=bound, trials=trials)
