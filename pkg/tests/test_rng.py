import numpy as np

from mbsr import rng


def test_splitmix64_deterministic():
    a = rng.splitmix64(42, np.arange(100))
    b = rng.splitmix64(42, np.arange(100))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rng.splitmix64(43, np.arange(100)))


def test_splitmix64_known_values():
    # Reference values of the published splitmix64 sequence for seed 0:
    # state advances by the golden-gamma before each mix.
    expected = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    got = [int(v) for v in rng.splitmix64(0, np.arange(3))]
    assert got == expected


def test_counter_uniform_range_and_determinism():
    u = rng.counter_uniform(7, 10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02
    assert np.array_equal(u, rng.counter_uniform(7, 10_000))


def test_permutation_is_permutation():
    for n in (0, 1, 2, 17, 1000):
        p = rng.permutation(n, seed=5)
        assert sorted(p.tolist()) == list(range(n))


def test_permutation_seed_sensitivity():
    assert np.array_equal(rng.permutation(50, 1), rng.permutation(50, 1))
    assert not np.array_equal(rng.permutation(50, 1), rng.permutation(50, 2))


def test_derive_seed_distinct():
    seeds = {rng.derive_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert rng.derive_seed(3, 1, 2) != rng.derive_seed(3, 2, 1)


def test_shuffled_preserves_multiset():
    vals = [3, 1, 4, 1, 5, 9, 2, 6]
    out = rng.shuffled(vals, 11)
    assert sorted(out) == sorted(vals)
