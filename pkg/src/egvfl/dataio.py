"""Data ingestion: LibSVM text files, synthetic regression instances and
vertical (feature-wise) partitioning across clients."""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, ParseError, PartitionError
from .linalg import as_matrix, as_vector


@dataclass(frozen=True)
class VerticalDataset:
    """Sample matrix split column-wise into per-client blocks.

    Labels are held by client 0. ``permutation[j]`` is the original column
    index of the j-th column of ``np.hstack(blocks)``.
    """

    blocks: list
    labels: np.ndarray
    permutation: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.blocks:
            raise EmptyInput("dataset needs at least one block")
        s = self.labels.shape[0]
        for i, B in enumerate(self.blocks):
            if B.shape[0] != s:
                raise PartitionError(
                    f"block {i} has {B.shape[0]} rows, labels have {s}")
        if self.permutation is None:
            object.__setattr__(self, "permutation", np.arange(self.total_features))

    @property
    def n_clients(self):
        return len(self.blocks)

    @property
    def sample_count(self):
        return self.labels.shape[0]

    @property
    def feature_counts(self):
        return [B.shape[1] for B in self.blocks]

    @property
    def total_features(self):
        return sum(B.shape[1] for B in self.blocks)

    def full_matrix(self):
        """Blocks concatenated in client order (permuted feature order)."""
        return np.hstack(self.blocks)

    def original_matrix(self):
        """Reassemble A in its original column order."""
        A = np.empty((self.sample_count, self.total_features))
        A[:, self.permutation] = self.full_matrix()
        return A

    def split_vector(self, x):
        """Split a vector in client order into per-client pieces."""
        offsets = np.cumsum([0] + self.feature_counts)
        return [x[offsets[i]:offsets[i + 1]] for i in range(self.n_clients)]

    def to_original_order(self, x_blocks):
        """Map per-client parameter blocks back to the original feature order."""
        x = np.empty(self.total_features)
        x[self.permutation] = np.concatenate(x_blocks)
        return x


def parse_libsvm(text, n_features=None):
    """Parse LibSVM text into a dense matrix and a label vector.

    Each nonempty line reads ``<label> <index>:<value> ...`` with 1-based,
    strictly increasing indices; ``#`` starts a comment. Missing entries are
    zero. The column count is the largest index seen unless `n_features`
    overrides it.

    Parameters
    ----------
    text : str, bytes or file-like
    n_features : int, optional

    Returns
    -------
    A : ndarray, shape (s, d)
    b : ndarray, shape (s,)
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    labels = []
    rows = []
    max_index = 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", line=lineno) from None
        if not np.isfinite(label):
            raise ParseError(f"non-finite label {tokens[0]!r}", line=lineno)
        idx, vals = [], []
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed token {tok!r}", line=lineno)
            try:
                j = int(key)
                v = float(val)
            except ValueError:
                raise ParseError(f"malformed token {tok!r}", line=lineno) from None
            if j < 1:
                raise ParseError(f"index {j} is not 1-based", line=lineno)
            if j <= prev:
                raise ParseError(f"index {j} not strictly increasing", line=lineno)
            if not np.isfinite(v):
                raise ParseError(f"non-finite value in {tok!r}", line=lineno)
            prev = j
            idx.append(j - 1)
            vals.append(v)
        max_index = max(max_index, prev)
        labels.append(label)
        rows.append((idx, vals))

    if not rows:
        raise EmptyInput("no samples in LibSVM input")
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise ParseError(f"feature override {d} smaller than max index {max_index}")

    A = np.zeros((len(rows), d))
    for r, (idx, vals) in enumerate(rows):
        A[r, idx] = vals
    return A, np.asarray(labels, dtype=np.float64)


def load_libsvm(path, n_features=None):
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read(), n_features=n_features)


def dump_libsvm(A, b):
    """Serialize a dense matrix and labels to LibSVM text (zeros omitted)."""
    out = []
    for row, label in zip(A, b):
        nz = np.flatnonzero(row)
        feats = " ".join(f"{j + 1}:{float(row[j])!r}" for j in nz)
        out.append(f"{float(label)!r} {feats}".rstrip())
    return "\n".join(out) + "\n"


def partition_vertical(A, b, n, seed=0, shuffle=False):
    """Split the columns of `A` into `n` contiguous groups.

    Group widths differ by at most one; the remainder goes to the
    lowest-indexed clients. With ``shuffle=True`` columns are permuted by
    `seed` first and the permutation is stored on the dataset.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.shape[0]:
        raise PartitionError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
    d = A.shape[1]
    if n < 1:
        raise PartitionError("need at least one client")
    if n > d:
        raise PartitionError(f"cannot split {d} features across {n} clients")

    perm = np.arange(d)
    if shuffle:
        perm = np.random.default_rng(seed).permutation(d)
    base, rem = divmod(d, n)
    widths = [base + 1 if i < rem else base for i in range(n)]
    blocks = []
    start = 0
    for w in widths:
        blocks.append(np.ascontiguousarray(A[:, perm[start:start + w]]))
        start += w
    return VerticalDataset(blocks=blocks, labels=b.copy(), permutation=perm)


def synth_regression(s, d, cond=1.0, noise=0.0, seed=0, scale=None):
    """Seeded least-squares instance with a prescribed Gram spectrum.

    ``A = U diag(sv) V.T`` with Haar-random orthonormal factors. The
    eigenvalues of ``A.T A`` are spaced geometrically from ``scale`` down to
    ``scale / cond`` (for ``s >= d``), so the condition number of the Gram
    matrix is `cond`. The default ``scale = s`` mimics unnormalized data
    whose Gram matrix grows with the sample count.

    Returns
    -------
    A : ndarray, shape (s, d)
    b : ndarray, shape (s,)
        ``A @ x_true + noise * N(0, I)`` with a seeded unit vector ``x_true``.
    """
    if s < 1 or d < 1:
        raise ValueError("s and d must be positive")
    if cond < 1:
        raise ValueError("cond must be >= 1")
    if scale is None:
        scale = float(s)
    rng = np.random.default_rng(seed)
    r = min(s, d)
    U, _ = np.linalg.qr(rng.standard_normal((s, r)))
    V, _ = np.linalg.qr(rng.standard_normal((d, r)))
    if r == 1:
        eig = np.array([scale])
    else:
        eig = scale * cond ** (-np.arange(r) / (r - 1))
    A = (U * np.sqrt(eig)) @ V.T
    x_true = rng.standard_normal(d)
    x_true /= np.linalg.norm(x_true)
    b = A @ x_true + noise * rng.standard_normal(s)
    return A, b
