import numpy as np
import pytest
from scipy.stats import spearmanr

from portraitguard.lsh import (
    GENERATOR_ID, HashCode, LshFamily, family_from_message, family_set_from_message,
    gaussian_stream, generate_family, generate_family_set, hamming, hash_vector, splitmix64,
)
from portraitguard.scramble import apply_scramble, scramble_code


def test_splitmix_reference_values():
    # SplitMix64 seeded with 0: first outputs of the reference generator
    ks = np.arange(1, 4, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    assert [int(v) for v in splitmix64(ks)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_gaussian_stream_moments():
    z = gaussian_stream(7, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01
    np.testing.assert_array_equal(gaussian_stream(7, 11), z[:11])


def test_family_deterministic():
    a = generate_family(128, 3, 64, seed=42)
    b = generate_family(128, 3, 64, seed=42)
    np.testing.assert_array_equal(a.projections, b.projections)
    assert a.projections.shape == (128, 64)
    assert not np.array_equal(generate_family(128, 3, 64, seed=43).projections, a.projections)
    assert generate_family(1, 3, 2, seed=42).projections.shape == (1, 2)


def test_family_message_round_trip():
    f = generate_family(128, 3, 20, seed=5)
    g = family_from_message(f.message())
    np.testing.assert_array_equal(f.projections, g.projections)
    assert f.message()["generator"] == GENERATOR_ID
    fs = generate_family_set(99)
    fs2 = family_set_from_message(fs.message())
    for k in fs.families:
        np.testing.assert_array_equal(fs[k].projections, fs2[k].projections)


def _fixed_family(a, W=3.0):
    return LshFamily(len(a), W, len(a[0]), 0, np.asarray(a, dtype=float))


def test_threshold_boundary():
    f = _fixed_family([[1.0, 0.0]])
    assert str(hash_vector(f, [3.0, 0.0])) == "1"  # a.x / W == 1
    assert str(hash_vector(f, [2.999, 0.0])) == "0"


def test_zero_vector_all_zero_bits():
    f = generate_family(128, 3, 64, seed=1)
    assert hash_vector(f, np.zeros(64)).as_int() == 0


def test_dimension_mismatch():
    f = generate_family(16, 3, 8, seed=1)
    with pytest.raises(ValueError):
        hash_vector(f, np.zeros(9))


def test_hamming_examples():
    c = HashCode.from_string("10101")
    assert hamming(c, c) == 0
    assert hamming(c, HashCode.from_string("01010")) == 5
    assert hamming(c, HashCode.from_string("10011")) == 2
    with pytest.raises(ValueError):
        hamming(c, HashCode.from_string("1010"))


def test_hamming_metric(rng):
    codes = [HashCode(rng.bytes(16), 128) for _ in range(20)]
    for a in codes:
        for b in codes:
            assert hamming(a, b) == hamming(b, a)
            for c in codes[:5]:
                assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


def test_collision_contrast(rng):
    f = generate_family(128, 3, 64, seed=11)
    x = rng.random((2000, 64))
    near = np.clip(x + rng.normal(0, 0.05, x.shape), 0, 1)
    far = rng.random((2000, 64))
    h_near = np.array([hamming(hash_vector(f, a), hash_vector(f, b)) for a, b in zip(x, near)])
    h_far = np.array([hamming(hash_vector(f, a), hash_vector(f, b)) for a, b in zip(x, far)])
    pooled = np.sqrt((h_near.var() + h_far.var()) / 2)
    assert h_far.mean() - h_near.mean() >= 3 * pooled


def test_rescrambled_codes_look_independent(rng):
    # same vector under two scramble codes vs independent random vectors
    f = generate_family(128, 3, 64, seed=3)
    x = rng.random((1000, 64))
    c1, c2 = scramble_code(2**300 + 17, 64), scramble_code(2**299 + 5, 64)
    h_same = np.mean([hamming(hash_vector(f, apply_scramble(v, c1)), hash_vector(f, apply_scramble(v, c2)))
                      for v in x])
    y = rng.random((1000, 64))
    h_indep = np.mean([hamming(hash_vector(f, a), hash_vector(f, b)) for a, b in zip(x, y)])
    assert abs(h_same - h_indep) < 0.1 * h_indep
    assert h_same > 10


def test_monotone_trend_small(rng):
    f = generate_family(128, 3, 64, seed=0)
    x = rng.random((2000, 64))
    t = rng.random((2000, 1))
    y = (1 - t) * x + t * rng.random((2000, 64))
    d = np.linalg.norm(x - y, axis=1)
    h = [hamming(hash_vector(f, a), hash_vector(f, b)) for a, b in zip(x, y)]
    assert spearmanr(d, h).statistic >= 0.8
