"""Independent straight-line transcriptions used as test oracles.

Everything here is deliberately scalar and loop-based (no numpy, no imports
from the package) so that agreement with the vectorized implementations is
evidence, not tautology.
"""

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def ref_splitmix64_mix(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def ref_xoshiro_outputs(sub_seed: int, count: int) -> list:
    """xoshiro256** raw outputs; state = four successive splitmix64 outputs."""
    s = []
    z = sub_seed
    for _ in range(4):
        s.append(ref_splitmix64_mix(z))
        z = (z + GOLDEN) & MASK64
    out = []
    for _ in range(count):
        out.append((_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64)
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
    return out


def ref_uniforms(sub_seed: int, count: int) -> list:
    return [(raw >> 11) * 2.0 ** -53 for raw in ref_xoshiro_outputs(sub_seed, count)]


def ref_gaussians(sub_seed: int, count: int) -> list:
    """Box-Muller cosine branch, two fresh uniforms per deviate."""
    u = ref_uniforms(sub_seed, 2 * count)
    out = []
    for i in range(count):
        u1 = u[2 * i] if u[2 * i] > 0.0 else 2.0 ** -53
        u2 = u[2 * i + 1]
        out.append(math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2))
    return out


def ref_gaussians_after_uniforms(sub_seed: int, skip_uniforms: int, count: int) -> list:
    """Gaussians drawn after ``skip_uniforms`` uniforms were consumed from
    the same stream (the index-set-then-noise layout)."""
    u = ref_uniforms(sub_seed, skip_uniforms + 2 * count)[skip_uniforms:]
    out = []
    for i in range(count):
        u1 = u[2 * i] if u[2 * i] > 0.0 else 2.0 ** -53
        u2 = u[2 * i + 1]
        out.append(math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2))
    return out


def ref_sub_seed(master_seed: int, tag: int, index: int) -> int:
    return ref_splitmix64_mix((master_seed ^ ((tag + index) & MASK64)) & MASK64)


def ref_index_set(sub_seed: int, ambient: int, width: int) -> list:
    """Partial Fisher-Yates: first `width` entries of a seeded shuffle of
    range(ambient), in draw order."""
    u = ref_uniforms(sub_seed, width)
    a = list(range(ambient))
    for t in range(width):
        j = t + int(u[t] * (ambient - t))
        a[t], a[j] = a[j], a[t]
    return a[:width]


if __name__ == "__main__":
    print("splitmix64_mix:")
    for x in (0, 1, 1234567, MASK64):
        print(f"  {x} -> {ref_splitmix64_mix(x)}")
    print("xoshiro raw (sub_seed=42, first 4):", ref_xoshiro_outputs(42, 4))
    print("uniform (sub_seed=42, first 2):", [repr(v) for v in ref_uniforms(42, 2)])
    print("gaussian (sub_seed=42, first 2):", [repr(v) for v in ref_gaussians(42, 2)])
    print("sub_seed(7, 1<<32, 3):", ref_sub_seed(7, 1 << 32, 3))
    print("index_set(sub_seed=42, 10, 4):", ref_index_set(42, 10, 4))
