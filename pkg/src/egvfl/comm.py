"""Simulated client/server message layer.

Compression operators, error-feedback accumulators, additive noise, a
mock linear encryption and keyed random streams. Everything that crosses
the simulated wire is counted in a `TrafficLedger`.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, InvalidKey

SHARED = -1


def _lane_id(lane):
    return zlib.crc32(str(lane).encode("utf-8"))


def rng_stream(master_seed, client_id, round_, lane):
    """Deterministic generator keyed by (seed, client or SHARED, round, lane).

    All clients asking for ``client_id=SHARED`` in the same round and lane
    get identical draws, which is how shared-seed coins and index sets are
    realized without communication.
    """
    key = (int(client_id) + 1, int(round_), _lane_id(lane))
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))


@dataclass(frozen=True)
class Compressor:
    """Sparsifying compressor.

    ``randk`` keeps k uniformly chosen coordinates scaled by d/k (unbiased,
    omega = d/k); ``topk`` keeps the k largest magnitudes unscaled
    (contractive, delta = d/k); ``identity`` sends everything.
    """

    kind: str = "identity"
    k_fraction: float = 1.0
    rng_mode: str = "shared_seed"

    def __post_init__(self):
        if self.kind not in ("identity", "randk", "topk"):
            raise ConfigError(f"unknown compressor {self.kind!r}")
        if not 0.0 < self.k_fraction <= 1.0:
            raise ConfigError("k_fraction must lie in (0, 1]")
        if self.rng_mode not in ("shared_seed", "independent"):
            raise ConfigError(f"unknown rng_mode {self.rng_mode!r}")

    @property
    def unbiased(self):
        return self.kind in ("identity", "randk")

    def k_for(self, dim):
        if self.kind == "identity":
            return dim
        return max(1, int(round(self.k_fraction * dim)))

    def omega(self, dim):
        return dim / self.k_for(dim) if self.kind != "topk" else None

    def delta(self, dim):
        return dim / self.k_for(dim) if self.kind != "randk" else None


def compress(c, v, rng=None):
    """Apply compressor `c` to `v`.

    Returns
    -------
    out : ndarray
    sent : int
        Number of scalars on the wire (indices are not counted).
    """
    dim = v.shape[0]
    k = c.k_for(dim)
    if c.kind == "identity" or k >= dim:
        return v.copy(), dim
    out = np.zeros_like(v)
    if c.kind == "randk":
        if rng is None:
            raise ValueError("randk needs a random stream")
        idx = rng.choice(dim, size=k, replace=False)
        out[idx] = (dim / k) * v[idx]
    else:
        # stable sort keeps ties deterministic
        idx = np.argsort(-np.abs(v), kind="stable")[:k]
        out[idx] = v[idx]
    return out, k


@dataclass
class ErrorState:
    """Error-feedback accumulators: ``e`` on the server, ``e_i`` per client."""

    e: np.ndarray
    e_i: list

    @classmethod
    def zeros(cls, s, n):
        return cls(np.zeros(s), [np.zeros(s) for _ in range(n)])

    def copy(self):
        return ErrorState(self.e.copy(), [v.copy() for v in self.e_i])


def feedback_update(payload, compressed):
    """New error after sending ``compressed`` in place of ``payload``.

    The payload already includes the previous error, so
    ``compressed + new_error == payload``.
    """
    if payload.shape != compressed.shape:
        raise DimensionError(f"payload {payload.shape} and compressed {compressed.shape} differ")
    return payload - compressed


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean Gaussian noise with ``E||xi||^2 = sigma^2``."""

    sigma: float = 0.0
    distribution: str = "gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.distribution != "gaussian":
            raise ConfigError(f"unsupported noise distribution {self.distribution!r}")


def add_noise(spec, v, rng=None):
    """Return ``v + xi`` with per-coordinate variance ``sigma^2 / len(v)``."""
    if spec.sigma == 0.0:
        return v.copy()
    dim = v.shape[0]
    return v + (spec.sigma / np.sqrt(dim)) * rng.standard_normal(dim)


@dataclass(frozen=True)
class EncryptionScheme:
    """Linear encode/decode pair with ``D(sum a_i E(x_i)) = sum a_i x_i``.

    ``plaintext`` is the identity; ``scaled_mask`` multiplies by a secret
    nonzero constant held by client 0. Neither offers any security.
    """

    kind: str = "plaintext"
    secret: float = 3.7

    def __post_init__(self):
        if self.kind not in ("plaintext", "scaled_mask"):
            raise ConfigError(f"unknown encryption scheme {self.kind!r}")
        if self.kind == "scaled_mask" and (self.secret == 0 or not np.isfinite(self.secret)):
            raise InvalidKey("scaled_mask needs a finite nonzero secret")

    def encrypt(self, x):
        if self.kind == "plaintext":
            return x
        return self.secret * x

    def decrypt(self, y):
        if self.kind == "plaintext":
            return y
        return y / self.secret


def encrypt(scheme, x):
    return scheme.encrypt(x)


def decrypt_linear(scheme, y):
    return scheme.decrypt(y)


@dataclass
class TrafficLedger:
    """Monotone counters for simulated traffic and local work.

    A broadcast from client 0 counts once in ``scalars_down``; every
    client upload counts in ``scalars_up``. ``flops`` counts multiply-adds
    against the local data blocks.
    """

    scalars_up: int = 0
    scalars_down: int = 0
    full_sync_rounds: int = 0
    flops: int = 0

    def up(self, count):
        self._add("scalars_up", count)

    def down(self, count):
        self._add("scalars_down", count)

    def sync(self):
        self._add("full_sync_rounds", 1)

    def compute(self, count):
        self._add("flops", count)

    def _add(self, name, count):
        count = int(count)
        if count < 0:
            raise ValueError("ledger counters never decrease")
        setattr(self, name, getattr(self, name) + count)

    def snapshot(self):
        return (self.scalars_up, self.scalars_down, self.full_sync_rounds, self.flops)
