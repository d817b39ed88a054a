"""End-to-end acceptance checks, one test per shipped guarantee.

Each test exercises the public surface (CLI or package API), carries its own
tolerance, and is independent of the others; run with ``pytest -v`` to get a
pass/fail line per guarantee.
"""

import json
import math
import time

import numpy as np
import pytest

from solar.analysis import (
    BoundInputs,
    c2_bound,
    empirical_rangefinder_error,
    similarity_grid,
    subspace_similarity,
    tail_energy,
)
from solar.bench import SweepConfig, SyntheticSpec, sweep, synth
from solar.cli import main
from solar.core import (
    AdapterPair,
    CompressConfig,
    compress,
    delta,
    reconstruct,
    svd_truncate,
)
from solar.format import FormatError, decode, encode
from solar.linalg import frobenius_norm, svd_full
from solar.quant import dequantize, quantize

PARAM_PRESETS = {
    "vitb-lora-r4": 73728,
    "vitb-solar-4000-1600": 41401,
    "nola-vitb": 48001,
    "vitl-solar-1000-500": 25501,
    "vitl-lora-r4": 196608,
    "llama1b-lora-r8": 851968,
    "llama1b-solar-4000-1200": 80801,
    "llama1b-nola": 64000,
    "llama3b-lora-r1": 286720,
    "llama3b-solar-1000-150": 18551,
    "llama3b-nola": 112000,
    "llama8b-lora-r1": 425984,
    "llama8b-solar-1000-300": 40401,
    "llama8b-nola": 128000,
    "gpt2s-lora-r4": 147456,
    "gpt2s-solar-1000-300": 15150,
    "gpt2s-solar-100-90": 4396,
    "gpt2m-lora-r4": 393216,
    "gpt2m-solar-1000-300": 30301,
    "gpt2m-solar-100-90": 8791,
}

BYTE_PRESETS = {
    "vitb-lora-r1-bytes": 73728,
    "vitb-solar-500-50-8bit": 1951,
    "vitb-solar-100-10-8bit": 391,
    "vitl-lora-r4-bytes": 786432,
    "vitl-solar-4000-1600-32bit": 319201,
    "vitl-solar-4000-1600-16bit": 165601,
    "vitl-solar-4000-1600-8bit": 88801,
    "vitl-solar-4000-1600-4bit": 50401,
}


def _footprint_json(capsys, preset):
    assert main(["footprint", "--preset", preset, "--json"]) == 0
    return json.loads(capsys.readouterr().out)


def test_01_footprint_presets_exact(capsys):
    # reference accounting values, zero tolerance
    for preset, expected in PARAM_PRESETS.items():
        assert _footprint_json(capsys, preset)["param_count"] == expected, preset
    for preset, expected in BYTE_PRESETS.items():
        assert _footprint_json(capsys, preset)["byte_count"] == expected, preset


def test_02_spanning_pool_fit_is_exact():
    # N = 80 noisy bases span the 64-dimensional factor space; keeping all of
    # them must reproduce the adapter product to near machine precision
    rng = np.random.default_rng(0)
    W = rng.standard_normal((32, 32))
    adapter = AdapterPair(A=rng.standard_normal((2, 32)),
                          B=rng.standard_normal((32, 2)))
    config = CompressConfig(n_a=80, n_b=80, k_a=80, k_b=80, seed=17,
                            noise_sigma=1.0)
    start = time.perf_counter()
    art = compress(W, adapter, config)
    rebuilt = reconstruct(svd_full(W), art)
    err = frobenius_norm(delta(rebuilt) - delta(adapter))
    rel = err / frobenius_norm(delta(adapter))
    elapsed = time.perf_counter() - start
    assert rel <= 1e-7
    assert elapsed < 1.0


def test_03_rangefinder_bound_holds():
    # geometric spectrum sigma_t = 2^(-t/4); the Monte-Carlo mean of the
    # one-sided sketching error must sit under the closed-form bound
    t = np.arange(1, 65)
    deltaW = np.diag(2.0 ** (-t / 4))
    start = time.perf_counter()
    result = empirical_rangefinder_error(deltaW, num_probes=20, trials=500,
                                         seed=123, r_a=10)
    elapsed = time.perf_counter() - start
    assert result.trials == 500
    assert result.mean_error <= result.bound
    assert elapsed < 10.0


def test_04_c2_bound_matches_oracle_and_is_monotone():
    rng = np.random.default_rng(7)

    def oracle(sigma, n_a, n_b, r_a, r_b, k):
        def tail(t):
            return math.sqrt(math.fsum(float(s) ** 2 for s in sigma[t:]))

        return (math.sqrt(1 + r_a / (n_a - r_a - 1)) * tail(r_a)
                + math.sqrt(1 + r_b / (n_b - r_b - 1)) * tail(r_b)
                + tail(k))

    for _ in range(20):
        sigma = np.sort(np.abs(rng.standard_normal(30)))[::-1]
        args = dict(n_a=20, n_b=22, r_a=3, r_b=4, k=5)
        got = c2_bound(BoundInputs(sigma=sigma, **args))
        assert got == pytest.approx(oracle(sigma, **args), abs=1e-12)
        for knob, grid in (("n_a", (20, 40, 80)), ("n_b", (22, 44, 88)),
                           ("k", (2, 5, 9))):
            vals = [c2_bound(BoundInputs(sigma=sigma, **{**args, knob: v}))
                    for v in grid]
            assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:])), knob


def test_05_budget_curve_is_monotone_with_refit():
    spec = SyntheticSpec(m=32, n=32, r=2, alignment=1.0, seed=4)
    grid = [(100, k, "aligned") for k in (10, 20, 40, 80)]
    res = sweep(spec, grid, SweepConfig(noise_sigma=0.05, refit=True, seed=3))
    errs_a = [row.err_a for row in res.rows]
    errs_b = [row.err_b for row in res.rows]
    assert all(b <= a + 1e-12 for a, b in zip(errs_a, errs_a[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(errs_b, errs_b[1:]))


def test_06_aligned_pools_beat_random_pools():
    # paired comparison on 20 fully aligned instances: orienting the pool
    # along the foundation's singular vectors should win almost every seed
    wins = 0
    for s in range(20):
        W, adapter = synth(SyntheticSpec(m=64, n=64, r=4, alignment=1.0,
                                         seed=s))
        errs = {}
        for mode in ("aligned", "random"):
            config = CompressConfig(n_a=200, n_b=200, k_a=40, k_b=40,
                                    seed=1000 + s, noise_sigma=0.05,
                                    refit=True, basis_mode=mode,
                                    fingerprint=False)
            art = compress(W, adapter, config)
            rebuilt = reconstruct(svd_full(W), art)
            errs[mode] = frobenius_norm(delta(rebuilt) - delta(adapter))
        if errs["aligned"] < errs["random"]:
            wins += 1
    assert wins >= 16


def test_07_truncation_residual_equals_tail_energy():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = int(rng.integers(2, 65))
        n = int(rng.integers(2, 65))
        deltaW = rng.standard_normal((m, n))
        rank = int(rng.integers(0, min(m, n) + 1))
        truncated = svd_truncate(deltaW, rank)
        residual = frobenius_norm(deltaW - delta(truncated))
        sigma = np.linalg.svd(deltaW, compute_uv=False)
        assert residual == pytest.approx(tail_energy(sigma, rank), abs=1e-10)


def test_08_round_trip_is_bitwise_and_crc_guarded(tmp_path):
    W, adapter = synth(SyntheticSpec(m=24, n=24, r=3, alignment=0.7, seed=9))
    config = CompressConfig(n_a=40, n_b=40, k_a=10, k_b=10, seed=2,
                            noise_sigma=0.3, refit=True)

    def chain():
        art = compress(W, adapter, config)
        payload = encode([("adapter", art)])
        decoded = decode(payload)[0][1]
        rebuilt = reconstruct(svd_full(W), decoded)
        return payload, rebuilt

    payload1, rebuilt1 = chain()
    payload2, rebuilt2 = chain()
    assert payload1 == payload2
    assert np.array_equal(rebuilt1.A, rebuilt2.A)
    assert np.array_equal(rebuilt1.B, rebuilt2.B)

    header = 12  # magic + version + flags + record count
    for offset in range(header, len(payload1)):
        corrupted = bytearray(payload1)
        corrupted[offset] ^= 0x01
        with pytest.raises(FormatError):
            decode(bytes(corrupted))


def test_09_quantization_error_within_half_step():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        # length >= 2 keeps the range positive; constant input falls back to
        # the scale = 0 sentinel, which has its own unit test
        length = int(rng.integers(2, 65))
        values = rng.standard_normal(length) * rng.uniform(0.1, 10.0)
        errs = []
        for bits in (2, 4, 8, 16):
            q = quantize(values, bits)
            err = np.abs(dequantize(q) - values).max()
            assert err <= q.scale / 2 + 1e-12
            errs.append(err)
        # widening the code from one level to the next never hurts; the
        # grids nest exactly in real arithmetic, so any measured uptick is
        # bounded by the float32 rounding of the stored scale
        tol = np.ptp(values) * 2.0 ** -23
        assert all(b <= a + tol for a, b in zip(errs, errs[1:]))


def test_10_subspace_similarity_identity_and_bounds():
    rng = np.random.default_rng(13)
    W = rng.standard_normal((20, 20))
    for i in range(1, 17):
        assert subspace_similarity(W, W, i, i) == pytest.approx(i, abs=1e-9)
    for _ in range(10):
        A = rng.standard_normal((18, 15))
        B = rng.standard_normal((18, 15))
        grid = similarity_grid(A, B, 6, 6)
        for i in range(1, 7):
            for j in range(1, 7):
                phi = grid.values[i - 1, j - 1]
                assert phi <= min(i, j) + 1e-9
                if i > 1:
                    assert phi >= grid.values[i - 2, j - 1] - 1e-12
                if j > 1:
                    assert phi >= grid.values[i - 1, j - 2] - 1e-12
