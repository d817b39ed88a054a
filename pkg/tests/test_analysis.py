"""Similarity grids, error bounds, and the rangefinder Monte-Carlo check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solar.analysis import (
    BoundInputs,
    c1_training_bound,
    c2_bound,
    effective_sketch_rank,
    empirical_rangefinder_error,
    similarity_grid,
    subspace_similarity,
    tail_energy,
)
from solar.basis import BasisPoolSpec, generate_pool
from solar.linalg import svd_full

RNG = np.random.default_rng(555)


def naive_phi(W, D, i, j, side="left"):
    fw, fd = svd_full(W), svd_full(D)
    Uw = fw.U if side == "left" else fw.V
    Ud = fd.U if side == "left" else fd.V
    C = Uw[:, :i].T @ Ud[:, :j]
    total = 0.0
    for a in range(i):
        for b in range(j):
            total += C[a, b] ** 2
    return total


# --- subspace similarity --------------------------------------------------

def test_phi_matches_naive_oracle():
    W = RNG.standard_normal((9, 8))
    D = RNG.standard_normal((9, 8))
    for i, j in ((1, 1), (2, 5), (4, 4), (8, 3)):
        for side in ("left", "right"):
            got = subspace_similarity(W, D, i, j, side=side)
            assert got == pytest.approx(naive_phi(W, D, i, j, side), abs=1e-12)


def test_phi_self_diagonal_is_identity():
    W = RNG.standard_normal((10, 10))
    for i in range(1, 9):
        assert subspace_similarity(W, W, i, i) == pytest.approx(i, abs=1e-9)


def test_phi_zero_indices():
    W = RNG.standard_normal((5, 5))
    assert subspace_similarity(W, W, 0, 3) == 0.0
    assert subspace_similarity(W, W, 3, 0) == 0.0


def test_grid_matches_pointwise_and_serializes():
    W = RNG.standard_normal((7, 6))
    D = RNG.standard_normal((7, 6))
    grid = similarity_grid(W, D, 4, 5)
    for i in range(1, 5):
        for j in range(1, 6):
            assert grid.values[i - 1, j - 1] == pytest.approx(
                subspace_similarity(W, D, i, j), abs=1e-12
            )
    lines = grid.to_csv().strip().splitlines()
    assert lines[0] == "i,j,phi"
    assert len(lines) == 1 + 4 * 5


def test_grid_bounds_and_monotonicity():
    for _ in range(4):
        W = RNG.standard_normal((8, 8))
        D = RNG.standard_normal((8, 8))
        grid = similarity_grid(W, D, 6, 6).values
        for i in range(6):
            for j in range(6):
                assert grid[i, j] <= min(i + 1, j + 1) + 1e-9
        assert np.all(np.diff(grid, axis=0) >= -1e-12)
        assert np.all(np.diff(grid, axis=1) >= -1e-12)


def test_grid_size_validation():
    W = RNG.standard_normal((4, 4))
    with pytest.raises(ValueError):
        similarity_grid(W, W, 5, 2)


# --- tail energy and bounds ----------------------------------------------

def test_tail_energy_matches_fsum_oracle():
    sigma = np.sort(RNG.uniform(0, 3, size=30))[::-1]
    for t in (0, 1, 7, 29, 30, 45):
        want = math.sqrt(math.fsum(float(s) ** 2 for s in sigma[t:]))
        assert tail_energy(sigma, t) == pytest.approx(want, abs=1e-13)


def test_tail_energy_validation():
    with pytest.raises(ValueError):
        tail_energy(np.array([1.0, 2.0]), 0)  # increasing
    with pytest.raises(ValueError):
        tail_energy(np.array([1.0, -0.5]), 0)
    with pytest.raises(ValueError):
        tail_energy(np.array([1.0]), -1)


def c2_oracle(sigma, n_a, n_b, r_a, r_b, k):
    def tail(t):
        return math.sqrt(math.fsum(float(s) ** 2 for s in sigma[t:]))

    return (
        math.sqrt(1.0 + r_a / (n_a - r_a - 1)) * tail(r_a)
        + math.sqrt(1.0 + r_b / (n_b - r_b - 1)) * tail(r_b)
        + tail(k)
    )


def test_c2_matches_direct_summation():
    for trial in range(10):
        rng = np.random.default_rng(trial)
        sigma = np.sort(rng.uniform(0, 2, size=40))[::-1]
        inputs = BoundInputs(sigma=sigma, n_a=30, n_b=25, r_a=6, r_b=4, k=12)
        want = c2_oracle(sigma, 30, 25, 6, 4, 12)
        assert c2_bound(inputs) == pytest.approx(want, abs=1e-12)


def test_c2_zero_for_rank_deficient_spectrum():
    sigma = np.array([3.0, 1.0, 0.0, 0.0])
    inputs = BoundInputs(sigma=sigma, n_a=50, n_b=50, r_a=2, r_b=2, k=2)
    assert c2_bound(inputs) == 0.0


def test_c2_oversampling_validation():
    with pytest.raises(ValueError):
        BoundInputs(sigma=np.array([1.0]), n_a=5, n_b=50, r_a=4, r_b=1, k=1)


def test_c1_formula_and_validation():
    want = math.sqrt(6.0) * (1.0 - 0.1 * 0.5 / (64.0 * 2.0)) ** 100 * 0.5
    got = c1_training_bound(3, 2.0, 0.5, 0.1, 100)
    assert got == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        c1_training_bound(3, 0.001, 100.0, 50.0, 10)  # contraction <= 0
    with pytest.raises(ValueError):
        c1_training_bound(0, 2.0, 0.5, 0.1, 1)


# --- sketch rank ----------------------------------------------------------

def test_effective_sketch_rank_caps_at_target_rank():
    # rank-3 target: no pool can sketch more than 3 directions
    U = np.linalg.qr(RNG.standard_normal((12, 3)))[0]
    V = np.linalg.qr(RNG.standard_normal((10, 3)))[0]
    D = U @ np.diag([3.0, 2.0, 1.0]) @ V.T
    spec = BasisPoolSpec(master_seed=1, pool_tag="A", count=6, slice_width=2,
                         ambient=10, noise_sigma=0.5)
    pool = generate_pool(spec, svd_full(D))
    rank = effective_sketch_rank(D, pool)
    assert rank == 3
    assert effective_sketch_rank(D, []) == 0


# --- rangefinder ----------------------------------------------------------

def test_rangefinder_is_deterministic_and_bounded():
    D = np.diag(2.0 ** (-np.arange(1, 17) / 4.0))
    r1 = empirical_rangefinder_error(D, num_probes=8, trials=30, seed=5, r_a=4)
    r2 = empirical_rangefinder_error(D, num_probes=8, trials=30, seed=5, r_a=4)
    assert r1.mean_error == r2.mean_error
    assert r1.trials == 30
    assert r1.mean_error <= r1.bound
    want_bound = math.sqrt(1.0 + 4.0 / (8 - 4 - 1)) * tail_energy(np.diag(D), 4)
    assert r1.bound == pytest.approx(want_bound, rel=1e-12)


def test_rangefinder_validation():
    D = np.eye(4)
    with pytest.raises(ValueError):
        empirical_rangefinder_error(D, num_probes=3, trials=5, seed=0, r_a=2)
    with pytest.raises(ValueError):
        empirical_rangefinder_error(D, num_probes=8, trials=0, seed=0, r_a=2)


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_c2_monotone_in_pool_sizes_and_budget(seed):
    rng = np.random.default_rng(seed)
    sigma = np.sort(rng.uniform(0, 1, size=20))[::-1]
    base = c2_bound(BoundInputs(sigma=sigma, n_a=10, n_b=10, r_a=3, r_b=3, k=5))
    assert c2_bound(BoundInputs(sigma=sigma, n_a=17, n_b=10, r_a=3, r_b=3, k=5)) <= base + 1e-15
    assert c2_bound(BoundInputs(sigma=sigma, n_a=10, n_b=17, r_a=3, r_b=3, k=5)) <= base + 1e-15
    assert c2_bound(BoundInputs(sigma=sigma, n_a=10, n_b=10, r_a=3, r_b=3, k=9)) <= base + 1e-15
