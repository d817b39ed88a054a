"""End-to-end tour: compress an adapter, ship it as bytes, rebuild it.

Generates a synthetic foundation matrix with a perfectly aligned low-rank
update, squeezes the update into a seeded sparse-coefficient artifact, writes
the artifact to disk, then reconstructs the factors from the file plus the
foundation weights alone.
"""

from pathlib import Path
from tempfile import TemporaryDirectory

from solar import (
    CompressConfig,
    SyntheticSpec,
    compress,
    decode,
    delta,
    encode,
    footprint_params,
    frobenius_norm,
    reconstruct,
    svd_full,
    synth,
)


def run() -> None:
    spec = SyntheticSpec(m=64, n=64, r=4, alignment=1.0, seed=0)
    W, adapter = synth(spec)
    print(f"foundation W: {W.shape}, adapter rank {spec.r}, "
          f"|dW|_F = {frobenius_norm(delta(adapter)):.3f}")

    config = CompressConfig(n_a=200, n_b=200, k_a=40, k_b=40, seed=42,
                            noise_sigma=0.05, refit=True)
    art = compress(W, adapter, config)
    dense = 2 * spec.r * spec.m  # LoRA-style storage for one layer
    sparse = footprint_params(1, config.k_a, config.k_b, config.n_a,
                              config.n_b)
    print(f"kept {config.k_a}+{config.k_b} of {config.n_a}+{config.n_b} "
          f"coefficients; {dense} dense params -> {sparse} effective params")

    with TemporaryDirectory() as tmp:
        path = Path(tmp) / "adapter.solar"
        path.write_bytes(encode([("demo", art)]))
        print(f"serialized artifact: {path.stat().st_size} bytes")

        name, loaded = decode(path.read_bytes())[0]
        rebuilt = reconstruct(svd_full(W), loaded)

    err = frobenius_norm(delta(rebuilt) - delta(adapter))
    rel = err / frobenius_norm(delta(adapter))
    print(f"record {name!r}: relative product error after round trip {rel:.4f}")


if __name__ == "__main__":
    run()
