"""Why orient the basis pool along the foundation's singular vectors?

Runs the same compression twice per budget -- once with pools sliced from W's
SVD, once with pure Gaussian pools -- on instances whose update truly lives in
W's top subspace, then prints the paired errors side by side.
"""

from solar import SweepConfig, SyntheticSpec, sweep


def run() -> None:
    spec = SyntheticSpec(m=64, n=64, r=4, alignment=1.0, seed=1)
    config = SweepConfig(noise_sigma=0.05, refit=True, seed=2024)
    budgets = [10, 20, 40, 80]
    grid = [(200, k, mode) for k in budgets for mode in ("aligned", "random")]
    result = sweep(spec, grid, config)

    by_key = {(row.k, row.mode): row.err_product for row in result.rows}
    print(f"{'k':>4}  {'aligned':>10}  {'random':>10}  winner")
    for k in budgets:
        a, r = by_key[(k, "aligned")], by_key[(k, "random")]
        print(f"{k:>4}  {a:>10.4f}  {r:>10.4f}  "
              f"{'aligned' if a < r else 'random'}")


if __name__ == "__main__":
    run()
