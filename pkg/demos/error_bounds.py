"""Exercise the spectral error calculators on a full-spectrum update.

The budget bound is driven entirely by the update's singular-value tails: it
says what must be lost to sketching at ranks (r_A, r_B) and truncation to k
coefficients.  This script builds an update with a slowly decaying spectrum,
shows the bound shrinking as the pools and the budget grow, checks the
truncation term against the exactly optimal low-rank residual, and finishes
with the Monte-Carlo rangefinder check behind the sketching terms.
"""

import numpy as np

from solar import (
    BoundInputs,
    c2_bound,
    delta,
    empirical_rangefinder_error,
    frobenius_norm,
    svd_truncate,
    tail_energy,
)


def run() -> None:
    rng = np.random.default_rng(3)
    deltaW = rng.standard_normal((48, 48))
    sigma = np.linalg.svd(deltaW, compute_uv=False)

    print("truncation term vs optimal low-rank residual (Eckart-Young)")
    for rank in (4, 8, 16):
        residual = frobenius_norm(deltaW - delta(svd_truncate(deltaW, rank)))
        print(f"  rank {rank:>2}: residual {residual:8.4f}   "
              f"tail {tail_energy(sigma, rank):8.4f}")

    print("\nbudget bound shrinks as pools and sparsity grow")
    print(f"{'N':>6}  {'k':>4}  {'c2':>8}")
    for n_pool, k in ((50, 8), (100, 8), (400, 8), (400, 16), (400, 32)):
        bound = c2_bound(BoundInputs(sigma=sigma, n_a=n_pool, n_b=n_pool,
                                     r_a=6, r_b=6, k=k))
        print(f"{n_pool:>6}  {k:>4}  {bound:>8.3f}")

    t = np.arange(1, 65)
    result = empirical_rangefinder_error(np.diag(2.0 ** (-t / 4)),
                                         num_probes=20, trials=200, seed=0,
                                         r_a=10)
    print(f"\nrangefinder over {result.trials} trials: "
          f"mean error {result.mean_error:.3e} <= bound {result.bound:.3e}")


if __name__ == "__main__":
    run()
