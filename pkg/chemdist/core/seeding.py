"""
Seeding - splitmix64 seed mixing and counter-based pair uniforms

Replicate seeds are derived from (master seed, index) only. Pair randomness is a pure
hash of (seed, smaller key, larger key), so an edge draw never depends on the order in
which pairs are visited.
"""
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """Finalizer of the splitmix64 generator; a bijection on 64-bit integers."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix_seed(master: int, *indices: int) -> int:
    """
    Derive a child seed from a master seed and a path of indices.

    Distinct indices under the same master always give distinct seeds.

    Args:
        master: Master seed (any integer, reduced mod 2^64)
        indices: Replicate index, scale index, stream tag, ...

    Returns:
        64-bit child seed
    """
    h = splitmix64(master & MASK64)
    for index in indices:
        h = splitmix64(h ^ splitmix64(index & MASK64))
    return h


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
    return z


def vertex_keys(seed: int, count: int) -> np.ndarray:
    """Distinct 64-bit keys for the vertices of one cloud."""
    base = np.arange(count, dtype=np.uint64) ^ np.uint64(mix_seed(seed, 0x6B657973))
    return splitmix64_array(base)


def pair_uniforms(seed: int, keys_a: np.ndarray, keys_b: np.ndarray) -> np.ndarray:
    """
    Uniform [0, 1) variates keyed by unordered vertex-key pairs.

    Symmetric in (keys_a, keys_b): the value for {x, y} is the same whichever endpoint
    is passed first.
    """
    a = np.asarray(keys_a, dtype=np.uint64)
    b = np.asarray(keys_b, dtype=np.uint64)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    salt = np.uint64(splitmix64(seed & MASK64))
    with np.errstate(over="ignore"):
        h = splitmix64_array(splitmix64_array(lo ^ salt) + hi)
    return (h >> np.uint64(11)).astype(np.float64) * _TWO_M53


def philox_generator(seed: Union[int, np.integer]) -> np.random.Generator:
    """Counter-based numpy generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
