"""Prime-field vectors, replicated databases, and exact inner-product tables.

Everything downstream (the Markov analysis, the retrieval simulator, the
Gram-matrix pipeline) consumes the objects defined here: a ``Database`` of K
length-L files over F(q), the canonical ordering of the K(K+1)/2 unordered
file pairs, and the vector of all pairwise inner products in that order.

All values are immutable after construction and all operations are pure
functions, so instances can be shared freely across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

# int64 products a*b stay exact below this modulus; larger q falls back to
# Python integers (q above 2**61 is rejected outright).
_VEC_MODULUS_LIMIT = 2**31
_MAX_MODULUS = 2**61


def is_prime(n: int) -> bool:
    """Deterministic primality check for n < 2**61: trial division for
    small n, Miller-Rabin with a witness set proven exhaustive for 64-bit
    integers above that."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    if n < 41 * 41:
        return True
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _check_prime_modulus(q: int) -> int:
    q = int(q)
    if q >= _MAX_MODULUS:
        raise ValueError(f"modulus {q} exceeds the 2**61 limit")
    if not is_prime(q):
        raise ValueError(f"modulus {q} is not prime")
    return q


@dataclass(frozen=True)
class FieldElement:
    """An element of F(q), stored reduced to [0, q)."""

    value: int
    q: int

    def __post_init__(self):
        q = _check_prime_modulus(self.q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "value", int(self.value) % q)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ValueError(f"modulus mismatch: {self.q} vs {other.q}")
            return other
        return FieldElement(int(other), self.q)

    def __add__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value + other.value, self.q)

    def __sub__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value - other.value, self.q)

    def __mul__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value * other.value, self.q)

    def __neg__(self):
        return FieldElement(-self.value, self.q)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value} mod {self.q})"


@dataclass(frozen=True)
class FieldVector:
    """A vector over F(q); coordinates are kept reduced."""

    values: np.ndarray
    q: int

    def __post_init__(self):
        q = _check_prime_modulus(self.q)
        vals = np.asarray(self.values)
        if vals.ndim != 1:
            raise ValueError("field vector must be one-dimensional")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "values", np.mod(vals.astype(np.int64), q))
        self.values.setflags(write=False)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx) -> FieldElement:
        return FieldElement(int(self.values[idx]), self.q)

    def __eq__(self, other):
        return (
            isinstance(other, FieldVector)
            and self.q == other.q
            and np.array_equal(self.values, other.values)
        )


def inner_product(a: FieldVector, b: FieldVector) -> FieldElement:
    """Exact inner product sum_l a_l * b_l mod q of two field vectors.

    Raises ValueError on length or modulus mismatch.
    """
    if a.q != b.q:
        raise ValueError(f"modulus mismatch: {a.q} vs {b.q}")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    q = a.q
    if q < _VEC_MODULUS_LIMIT:
        total = int(np.sum((a.values * b.values) % q) % q)
    else:
        total = sum(int(x) * int(y) % q for x, y in zip(a.values, b.values)) % q
    return FieldElement(total, q)


@dataclass(frozen=True)
class Database:
    """K files of length L over F(q), the content replicated at every server.

    Row k-1 of ``entries`` is the vector form of file W_k (files are 1-based
    to match the pair indexing).
    """

    q: int
    entries: np.ndarray

    def __post_init__(self):
        q = _check_prime_modulus(self.q)
        ent = np.asarray(self.entries)
        if ent.ndim != 2 or ent.shape[0] < 1 or ent.shape[1] < 1:
            raise ValueError("entries must be a K x L array with K, L >= 1")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "entries", np.mod(ent.astype(np.int64), q))
        self.entries.setflags(write=False)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def L(self) -> int:
        return self.entries.shape[1]

    def file(self, k: int) -> FieldVector:
        """File W_k as a field vector, k in [1, K]."""
        if not 1 <= k <= self.K:
            raise ValueError(f"file index {k} out of range [1, {self.K}]")
        return FieldVector(self.entries[k - 1], self.q)

    def __eq__(self, other):
        return (
            isinstance(other, Database)
            and self.q == other.q
            and np.array_equal(self.entries, other.entries)
        )


def random_database(q: int, K: int, L: int, seed) -> Database:
    """Database with entries i.i.d. uniform over F(q), deterministic per seed."""
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    q = _check_prime_modulus(q)
    rng = np.random.default_rng(seed)
    return Database(q, rng.integers(0, q, size=(K, L), dtype=np.int64))


def append_column(db: Database, column) -> Database:
    """Database with one fresh symbol appended to every file."""
    col = np.asarray(column, dtype=np.int64).reshape(-1)
    if col.shape[0] != db.K:
        raise ValueError(f"column must have {db.K} entries")
    return Database(db.q, np.hstack([db.entries, col[:, None] % db.q]))


# --- canonical pair ordering ------------------------------------------------


@dataclass(frozen=True, order=True)
class PairIndex:
    """Unordered file pair {i, j}, stored normalized with i <= j (1-based)."""

    i: int
    j: int

    def __post_init__(self):
        i, j = int(self.i), int(self.j)
        if i > j:
            i, j = j, i
        if i < 1:
            raise ValueError(f"pair indices must be >= 1, got {{{i},{j}}}")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)

    def __repr__(self):
        return f"{{{self.i},{self.j}}}"


def pair_count(K: int) -> int:
    """Number of unordered pairs including the diagonal: K(K+1)/2."""
    return K * (K + 1) // 2


def pair_rank(K: int, p: PairIndex) -> int:
    """Position of pair {i,j} in the canonical order ({i,j} before {k,l}
    iff i < k, or i = k and j < l), 0-based.

    Raises ValueError when the pair is out of range for K files.
    """
    if p.j > K:
        raise ValueError(f"pair {p} out of range for K={K}")
    i, j = p.i, p.j
    # pairs with first index < i occupy sum_{a<i} (K - a + 1) slots
    return (i - 1) * K - (i - 1) * (i - 2) // 2 + (j - i)


def pair_unrank(K: int, r: int) -> PairIndex:
    """Inverse of pair_rank: the pair at 0-based position r."""
    if not 0 <= r < pair_count(K):
        raise ValueError(f"rank {r} out of range for K={K}")
    i = 1
    while r >= K - i + 1:
        r -= K - i + 1
        i += 1
    return PairIndex(i, i + r)


@dataclass(frozen=True)
class PairOrdering:
    """All K(K+1)/2 pairs for K files in canonical order."""

    K: int
    pairs: tuple = field(init=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        pairs = tuple(
            PairIndex(i, j)
            for i in range(1, self.K + 1)
            for j in range(i, self.K + 1)
        )
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, r: int) -> PairIndex:
        return self.pairs[r]

    def index(self, p: PairIndex) -> int:
        return pair_rank(self.K, p)


# --- inner-product tables ----------------------------------------------------


@dataclass(frozen=True)
class InnerProductVector:
    """All pairwise inner products of a database, in canonical pair order."""

    q: int
    K: int
    values: np.ndarray

    def __post_init__(self):
        q = _check_prime_modulus(self.q)
        vals = np.mod(np.asarray(self.values, dtype=np.int64), q)
        if vals.shape != (pair_count(self.K),):
            raise ValueError(
                f"expected {pair_count(self.K)} values for K={self.K}, got {vals.shape}"
            )
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "values", vals)
        self.values.setflags(write=False)

    def get(self, p: PairIndex) -> FieldElement:
        return FieldElement(int(self.values[pair_rank(self.K, p)]), self.q)


def compute_table(db: Database) -> InnerProductVector:
    """The length-K(K+1)/2 vector of all pairwise inner products <W_i, W_j>
    mod q, diagonal pairs included, in canonical pair order.
    """
    E = db.entries
    q = db.q
    if db.L * (q - 1) ** 2 < 2**62:
        gram = (E @ E.T) % q
    else:
        gram = (E.astype(object) @ E.T.astype(object)) % q
    iu, ju = np.triu_indices(db.K)
    return InnerProductVector(q, db.K, gram[iu, ju].astype(np.int64))


# --- serialization ------------------------------------------------------------


def save_csv(db: Database, path) -> None:
    """Write a database as CSV: line 1 holds ``q,K,L``, then K rows of L
    comma-separated integers."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{db.q},{db.K},{db.L}\n")
        for row in db.entries:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_csv(path) -> Database:
    """Read a database written by save_csv."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        try:
            q, K, L = (int(tok) for tok in header.split(","))
        except ValueError as exc:
            raise ValueError(f"malformed header line: {header!r}") from exc
        body = fh.read()
    entries = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
    if entries.shape != (K, L):
        raise ValueError(f"expected {K}x{L} entries, got {entries.shape}")
    return Database(q, entries)
