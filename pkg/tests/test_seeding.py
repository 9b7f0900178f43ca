import numpy as np

from chemdist.core.seeding import (
    mix_seed,
    pair_uniforms,
    philox_generator,
    splitmix64,
    splitmix64_array,
    vertex_keys,
)


def test_mix_seed_is_deterministic():
    assert mix_seed(42, 1, 2) == mix_seed(42, 1, 2)
    assert mix_seed(42, 1, 2) != mix_seed(42, 2, 1)
    assert mix_seed(42, 1) != mix_seed(43, 1)


def test_replicate_seeds_pairwise_distinct():
    seeds = {mix_seed(7, i) for i in range(10_000)}
    assert len(seeds) == 10_000


def test_splitmix_array_matches_scalar():
    values = [0, 1, 2 ** 63, 2 ** 64 - 1, 123456789]
    vec = splitmix64_array(np.array(values, dtype=np.uint64))
    assert [int(v) for v in vec] == [splitmix64(v) for v in values]


def test_vertex_keys_distinct():
    keys = vertex_keys(3, 5000)
    assert len(np.unique(keys)) == 5000


def test_pair_uniforms_symmetric_and_in_unit_interval():
    keys = vertex_keys(1, 200)
    a, b = keys[:100], keys[100:]
    u = pair_uniforms(9, a, b)
    assert np.array_equal(u, pair_uniforms(9, b, a))
    assert np.all((u >= 0.0) & (u < 1.0))
    assert not np.array_equal(u, pair_uniforms(10, a, b))


def test_pair_uniforms_roughly_uniform():
    keys = vertex_keys(5, 20_000)
    u = pair_uniforms(1, keys[:10_000], keys[10_000:])
    assert abs(u.mean() - 0.5) < 0.02


def test_philox_generator_reproducible():
    a = philox_generator(11).random(5)
    b = philox_generator(11).random(5)
    assert np.array_equal(a, b)
