"""Seed-driven generation of the randomized basis pools.

A pool is a list of matrices built by perturbing random slices of the
foundation weight's singular vectors: pool-A bases are ``(V[:, I]).T + eps``
(shape r x n, matching the A factor) and pool-B bases are ``U[:, J] + eps``
(shape m x r, matching B).  Everything is a pure function of
``(BasisPoolSpec, SvdFactors)``; the pool is regenerable anywhere from the
64-bit master seed and is never serialized.

Stream layout per basis: the index set is drawn first (one uniform per
draw), then the noise entries row-major, all from that basis's own
substream.  With ``noise_sigma = 0`` no noise is drawn (the draws would be
multiplied by zero, so skipping them is unobservable and keeps zero-noise
pools cheap).  In ``random`` mode the basis is pure N(0, 1) entries — the
unstructured baseline — drawn from the same substream with no index set, so
aligned/random comparisons stay paired seed-for-seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .linalg import SvdFactors
from .rng import TAG_A, TAG_B, RngStream, derive_substream

__all__ = [
    "BasisPoolSpec",
    "BasisMatrix",
    "derive_pool_substream",
    "sample_index_set",
    "generate_basis",
    "generate_pool",
]

_POOL_TAGS = {"A": TAG_A, "B": TAG_B}
_MODES = ("aligned", "random")


@dataclass(frozen=True)
class BasisPoolSpec:
    """Seed and shape parameters that fully determine one pool."""

    master_seed: int
    pool_tag: str  # "A" or "B"
    count: int
    slice_width: int
    ambient: int  # n for pool A, m for pool B
    noise_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.pool_tag not in _POOL_TAGS:
            raise ValueError(f"pool_tag must be 'A' or 'B', got {self.pool_tag!r}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 1 <= self.slice_width <= self.ambient:
            raise ValueError(
                f"slice_width must be in [1, ambient={self.ambient}], "
                f"got {self.slice_width}"
            )
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class BasisMatrix:
    """One generated basis: its pool index, sampled column indices (draw
    order), and the dense matrix."""

    index: int
    indices: tuple[int, ...]
    matrix: NDArray[np.float64] = field(repr=False)


def derive_pool_substream(master_seed: int, pool_tag: str, basis_index: int) -> RngStream:
    """Substream for one basis of one pool; independent across (tag, index)."""
    return derive_substream(master_seed, _POOL_TAGS[pool_tag], basis_index)


def sample_index_set(stream: RngStream, ambient: int, width: int) -> list[int]:
    """``width`` distinct indices in [0, ambient), partial Fisher-Yates.

    Each draw takes one uniform u and picks offset ``floor(u * remaining)``;
    the first ``width`` slots of the shuffled range are returned in draw
    order.
    """
    if width > ambient:
        raise ValueError(f"width {width} exceeds ambient {ambient}")
    a = list(range(ambient))
    for t in range(width):
        u = stream.uniform()
        j = t + int(u * (ambient - t))  # u < 1, so j <= ambient - 1
        a[t], a[j] = a[j], a[t]
    return a[:width]


def _basis_shape(spec: BasisPoolSpec) -> tuple[int, int]:
    # pool A matches A (r x n); pool B matches B (m x r)
    if spec.pool_tag == "A":
        return (spec.slice_width, spec.ambient)
    return (spec.ambient, spec.slice_width)


def _check_svd(spec: BasisPoolSpec, svd: SvdFactors | None) -> None:
    if svd is None:
        raise ValueError("aligned mode requires SVD factors")
    side = svd.n if spec.pool_tag == "A" else svd.m
    if side != spec.ambient:
        raise ValueError(
            f"pool {spec.pool_tag} ambient {spec.ambient} does not match "
            f"SVD dimension {side}"
        )


def generate_basis(
    spec: BasisPoolSpec,
    svd: SvdFactors | None,
    basis_index: int,
    mode: str = "aligned",
) -> BasisMatrix:
    """Deterministically generate basis ``basis_index`` of the pool.

    ``aligned``: a slice of singular vectors plus Gaussian noise of standard
    deviation ``noise_sigma``.  ``random``: pure N(0, 1) entries of the same
    shape (noise_sigma ignored), the unstructured baseline.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if not 0 <= basis_index < spec.count:
        raise ValueError(f"basis_index {basis_index} outside [0, {spec.count})")
    stream = derive_pool_substream(spec.master_seed, spec.pool_tag, basis_index)
    shape = _basis_shape(spec)

    if mode == "random":
        matrix = stream.gaussian_block(shape[0] * shape[1]).reshape(shape)
        return BasisMatrix(index=basis_index, indices=(), matrix=matrix)

    _check_svd(spec, svd)
    indices = sample_index_set(stream, spec.ambient, spec.slice_width)
    if spec.pool_tag == "A":
        matrix = np.ascontiguousarray(svd.V[:, indices].T)
    else:
        matrix = np.ascontiguousarray(svd.U[:, indices])
    if spec.noise_sigma > 0:
        noise = stream.gaussian_block(shape[0] * shape[1]).reshape(shape)
        matrix = matrix + spec.noise_sigma * noise
    return BasisMatrix(index=basis_index, indices=tuple(indices), matrix=matrix)


def generate_pool(
    spec: BasisPoolSpec,
    svd: SvdFactors | None,
    mode: str = "aligned",
) -> list[BasisMatrix]:
    """All ``spec.count`` bases, index order; independent of generation order
    because each basis owns its substream."""
    return [generate_basis(spec, svd, i, mode) for i in range(spec.count)]
