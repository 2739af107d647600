import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from egvfl.comm import (
    SHARED, Compressor, EncryptionScheme, ErrorState, NoiseSpec, TrafficLedger, add_noise,
    compress, decrypt_linear, encrypt, feedback_update, rng_stream,
)
from egvfl.errors import ConfigError, DimensionError, InvalidKey


def test_compress_examples():
    out, sent = compress(Compressor("topk", 0.5), np.array([3.0, 1.0]))
    assert np.array_equal(out, [3, 0]) and sent == 1
    assert np.sum((out - [3, 1]) ** 2) == 1 <= 0.5 * 10
    v = np.array([1.0, -2.0, 3.0])
    out, sent = compress(Compressor(), v)
    assert np.array_equal(out, v) and sent == 3


def test_randk_two_coordinate_example():
    c = Compressor("randk", 0.5)
    draws = np.array([compress(c, np.array([1.0, 0.0]), rng_stream(0, 0, k, "t"))[0]
                      for k in range(100_000)])
    assert set(map(tuple, draws)) == {(2.0, 0.0), (0.0, 0.0)}
    assert np.linalg.norm(draws.mean(axis=0) - [1, 0]) <= 1e-2


def test_k_rule():
    assert Compressor("randk", 0.01).k_for(10) == 1
    assert Compressor("topk", 0.25).k_for(200) == 50
    assert Compressor("randk", 0.1).omega(200) == 10
    assert Compressor("topk", 0.25).delta(200) == 4
    with pytest.raises(ConfigError):
        Compressor("randk", 0.0)
    with pytest.raises(ConfigError):
        Compressor("bogus")


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 1.0), st.integers(0, 2**31 - 1))
def test_topk_contraction_any_vector(d, frac, seed):
    x = np.random.default_rng(seed).standard_normal(d)
    c = Compressor("topk", frac)
    out, k = compress(c, x)
    assert np.sum((out - x) ** 2) <= (1 - k / d) * (x @ x) + 1e-12


def test_feedback_examples():
    payload = np.array([3.0, 1.0]) + np.zeros(2)
    comp, _ = compress(Compressor("topk", 0.5), payload)
    e = feedback_update(payload, comp)
    assert np.array_equal(e, [0, 1])
    assert np.array_equal(comp + e, payload)
    ident, _ = compress(Compressor(), payload)
    assert not np.any(feedback_update(payload, ident))
    with pytest.raises(DimensionError):
        feedback_update(np.ones(2), np.ones(3))
    st0 = ErrorState.zeros(4, 2)
    assert not np.any(st0.e) and len(st0.e_i) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.floats(0.05, 1.0), st.integers(0, 2**31 - 1))
def test_feedback_conservation(d, frac, seed):
    rng = np.random.default_rng(seed)
    payload = rng.standard_normal(d) + rng.standard_normal(d)
    comp, _ = compress(Compressor("topk", frac), payload)
    assert np.array_equal(comp + feedback_update(payload, comp), payload)


def test_noise_examples():
    v = np.arange(4.0)
    out = add_noise(NoiseSpec(0.0), v)
    assert np.array_equal(out, v) and out is not v
    spec = NoiseSpec(0.3)
    xi = np.array([add_noise(spec, np.zeros(4), rng_stream(2, 0, k, "n")) for k in range(100_000)])
    assert np.all(np.abs(xi.mean(axis=0)) <= 3 * 0.3 / np.sqrt(100_000))
    assert np.mean(np.sum(xi ** 2, axis=1)) == pytest.approx(0.09, rel=0.05)
    with pytest.raises(ConfigError):
        NoiseSpec(-1.0)


def test_encryption_examples():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    A = rng.standard_normal((4, 5))
    for scheme in (EncryptionScheme(), EncryptionScheme("scaled_mask", 3.7)):
        assert np.allclose(decrypt_linear(scheme, encrypt(scheme, x)), x, atol=0, rtol=1e-15)
        comb = decrypt_linear(scheme, 2 * encrypt(scheme, x) + 3 * encrypt(scheme, y))
        assert np.allclose(comb, 2 * x + 3 * y, atol=1e-12)
        assert np.allclose(decrypt_linear(scheme, A @ encrypt(scheme, x)), A @ x, atol=1e-10)
    with pytest.raises(InvalidKey):
        EncryptionScheme("scaled_mask", 0.0)


def test_rng_streams():
    a = rng_stream(5, 2, 7, "coin").random(10)
    assert np.array_equal(a, rng_stream(5, 2, 7, "coin").random(10))
    assert not np.array_equal(a, rng_stream(5, 3, 7, "coin").random(10))
    assert not np.array_equal(a, rng_stream(5, 2, 8, "coin").random(10))
    coins = {rng_stream(5, SHARED, 7, "coin").random() for _ in range(5)}
    assert len(coins) == 1
    u = rng_stream(1, SHARED, 0, "lane_a").standard_normal(100_000)
    v = rng_stream(1, SHARED, 0, "lane_b").standard_normal(100_000)
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.02


def test_ledger_monotone():
    led = TrafficLedger()
    led.up(3)
    led.down(2)
    led.sync()
    led.compute(10)
    assert led.snapshot() == (3, 2, 1, 10)
    with pytest.raises(ValueError):
        led.up(-1)
