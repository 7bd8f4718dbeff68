"""Markov analysis of the inner-product table of growing random files.

Appending one uniform column to every file of a K-file database adds an
increment vector to the table of pairwise inner products.  The table
therefore performs a random walk on the additive group F(q)^T with
T = K(K+1)/2, driven by the increment distribution computed here.  The walk
has a doubly stochastic transition operator, the uniform distribution as
its unique stationary law, and a spectral gap that controls how fast the
table forgets its initial distribution.

Because the transition operator depends only on state differences, it is a
convolution operator on the group and its full spectrum is the multi-
dimensional discrete Fourier transform of the increment distribution: an
O(q^T log q^T) computation instead of an O(q^(3T)) eigendecomposition.  The
dense matrix path is retained purely as a brute-force oracle.

Evolution of the walk is carried out in exact integer arithmetic whenever
the state space allows: the distribution after L steps is a vector of
counts over q^(K*L), so per-step contraction ratios can be measured at the
1e-9 tolerance the verification suite demands, which double-precision
convolution cannot guarantee beyond L ~ 25.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .fields import Database, PairIndex, compute_table, pair_count, pair_rank, pair_unrank

ENUMERATION_LIMIT = 2**20   # largest q^T enumerated for distributions
DENSE_LIMIT = 2**12         # largest q^T materialized as a dense matrix
POSITIVITY_LIMIT = 2**9     # largest q^T for the matrix-power positivity check
EXACT_EVOLVE_LIMIT = 2**12  # largest q^T evolved in exact integer arithmetic
MAX_TRACE_LENGTH = 1000


def _state_count(q: int, K: int) -> tuple[int, int]:
    T = pair_count(K)
    n = q**T
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"state space q^T = {n} exceeds {ENUMERATION_LIMIT}")
    return T, n


def _index_powers(q: int, T: int) -> np.ndarray:
    # big-endian: coordinate 0 is the most significant digit
    return q ** np.arange(T - 1, -1, -1, dtype=np.int64)


def _decode_states(q: int, T: int, n: int) -> np.ndarray:
    """All n = q^T states as digit rows, in index order."""
    idx = np.arange(n, dtype=np.int64)
    digits = np.empty((n, T), dtype=np.int64)
    for t in range(T - 1, -1, -1):
        digits[:, t] = idx % q
        idx //= q
    return digits


@dataclass(frozen=True)
class DeltaDistribution:
    """Law of the table increment caused by one fresh uniform column.

    ``probs[i]`` is the probability of the increment vector whose base-q
    digits (in canonical pair order, most significant first) encode to i.
    Every probability is an exact multiple of q**-K; ``counts`` holds the
    integer numerators.
    """

    q: int
    K: int
    T: int
    counts: np.ndarray
    probs: np.ndarray

    @property
    def support_indices(self) -> np.ndarray:
        return np.nonzero(self.counts)[0]


def delta_distribution(q: int, K: int) -> DeltaDistribution:
    """Exact increment distribution by enumerating all q^K fresh columns.

    Raises ValueError when q is not prime or q^T exceeds the enumeration
    guard.
    """
    if not _is_prime(q):
        raise ValueError(f"modulus {q} is not prime")
    T, n = _state_count(q, K)
    cols = np.indices((q,) * K).reshape(K, -1).T.astype(np.int64)
    iu, ju = np.triu_indices(K)
    increments = (cols[:, iu] * cols[:, ju]) % q
    idx = increments @ _index_powers(q, T)
    counts = np.bincount(idx, minlength=n).astype(np.int64)
    return DeltaDistribution(q=q, K=K, T=T, counts=counts, probs=counts / float(q**K))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


@dataclass(frozen=True)
class TransitionOperator:
    """Transition operator of the table walk; entry (i, j) is the
    probability of the increment y_i - y_j.  The dense materialization is
    optional and exists for oracle checks."""

    delta: DeltaDistribution
    matrix: np.ndarray | None = None


def transition_dense(q: int, K: int) -> TransitionOperator:
    """Dense q^T x q^T transition matrix (brute-force oracle path).

    Raises ValueError beyond the dense size guard.
    """
    d = delta_distribution(q, K)
    n = q**d.T
    if n > DENSE_LIMIT:
        raise ValueError(f"dense materialization of {n} states exceeds {DENSE_LIMIT}")
    powers = _index_powers(q, d.T)
    states = _decode_states(q, d.T, n)
    M = np.empty((n, n), dtype=float)
    for i in range(n):
        diff = (states[i][None, :] - states) % q
        M[i] = d.probs[diff @ powers]
    return TransitionOperator(delta=d, matrix=M)


@dataclass(frozen=True)
class Spectrum:
    """All q^T eigenvalues of the transition operator and the second
    largest modulus."""

    eigenvalues: np.ndarray
    lambda2: float


def spectrum_via_characters(d: DeltaDistribution) -> Spectrum:
    """Full spectrum from the group Fourier transform of the increment law.

    The eigenvalue attached to character chi is
    sum_delta probs[delta] * exp(2*pi*i*<chi, delta>/q); the chi = 0
    eigenvalue is 1 and lambda2 is the largest remaining modulus.
    """
    nd = d.probs.reshape((d.q,) * d.T)
    # fftn uses the negative-sign kernel; conjugating a real input's
    # transform yields the positive-sign character sums
    eig = np.conj(np.fft.fftn(nd)).ravel()
    lambda2 = float(np.max(np.abs(eig[1:]))) if eig.size > 1 else 0.0
    return Spectrum(eigenvalues=eig, lambda2=lambda2)


def spectrum_dense_oracle(m: TransitionOperator) -> Spectrum:
    """Spectrum via a standard dense eigensolver on the materialized matrix.

    Exists to cross-check the character method; raises ValueError when the
    operator was built without a dense matrix.
    """
    if m.matrix is None:
        raise ValueError("dense matrix not materialized")
    eig = np.linalg.eigvals(m.matrix)
    mods = np.sort(np.abs(eig))[::-1]
    lambda2 = float(mods[1]) if len(mods) > 1 else 0.0
    return Spectrum(eigenvalues=eig, lambda2=lambda2)


# --- irreducibility -----------------------------------------------------------


@dataclass(frozen=True)
class IrreducibilityReport:
    """Outcome of the reachability checks: does the increment support
    generate the whole group, and (when cheap enough) is every entry of
    M**gamma strictly positive for the witness exponent gamma = 5T."""

    irreducible: bool
    reached: int
    group_size: int
    gamma: int
    gamma_checked: bool
    gamma_all_positive: bool | None


def is_irreducible(d: DeltaDistribution, check_power: bool = True) -> IrreducibilityReport:
    """Breadth-first closure of the increment support inside F(q)^T.

    The chain is irreducible iff the closure is the full group.  For
    q^T <= 512 (and ``check_power``), additionally verifies that every
    entry of the gamma-step transition matrix is positive with gamma = 5T.
    """
    q, T = d.q, d.T
    n = q**T
    powers = _index_powers(q, T)
    support = _decode_states(q, T, n)[d.support_indices]

    reached = np.zeros(n, dtype=bool)
    reached[0] = True
    frontier = np.zeros((1, T), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, len(support)))
    while len(frontier):
        new_rows = []
        for lo in range(0, len(frontier), chunk):
            block = frontier[lo : lo + chunk]
            cand = (block[:, None, :] + support[None, :, :]) % q
            cand_idx = cand.reshape(-1, T) @ powers
            fresh = np.unique(cand_idx[~reached[cand_idx]])
            if len(fresh):
                reached[fresh] = True
                new_rows.append(fresh)
        if not new_rows:
            break
        nxt = np.concatenate(new_rows)
        frontier = _decode_states_from(nxt, q, T)
    total = int(reached.sum())

    gamma = 5 * T
    gamma_checked = False
    all_positive = None
    if check_power and n <= POSITIVITY_LIMIT:
        M = transition_dense(q, d.K).matrix
        Mg = np.linalg.matrix_power(M, gamma)
        all_positive = bool((Mg > 0).all())
        gamma_checked = True
    return IrreducibilityReport(
        irreducible=(total == n),
        reached=total,
        group_size=n,
        gamma=gamma,
        gamma_checked=gamma_checked,
        gamma_all_positive=all_positive,
    )


def _decode_states_from(indices: np.ndarray, q: int, T: int) -> np.ndarray:
    idx = indices.astype(np.int64).copy()
    digits = np.empty((len(idx), T), dtype=np.int64)
    for t in range(T - 1, -1, -1):
        digits[:, t] = idx % q
        idx //= q
    return digits


def sum_two_squares(q: int, a: int) -> tuple[int, int]:
    """Field elements (s, t), s >= t, with s**2 + t**2 = a mod q.

    Every residue of a prime field has such a decomposition; exhaustive
    search therefore always succeeds, and failure would falsify that fact
    (hard assertion).
    """
    a = int(a) % q
    for s in range(q):
        ss = s * s % q
        for t in range(s + 1):
            if (ss + t * t) % q == a:
                return (s, t)
    raise AssertionError(f"no two-square decomposition of {a} mod {q}")


def accumulate_increment(columns: np.ndarray, q: int, K: int) -> np.ndarray:
    """Total table increment produced by a block of fresh columns.

    ``columns`` has one row per appended position and K entries per row;
    the result is the length-T increment vector in canonical pair order
    (the same computation as the inner-product table of the transposed
    block).
    """
    cols = np.asarray(columns, dtype=np.int64) % q
    if cols.ndim != 2 or cols.shape[1] != K:
        raise ValueError(f"columns must be (steps, {K})")
    return compute_table(Database(q, cols.T)).values.copy()


def reachability_witness(q: int, K: int, e: int, a: int) -> np.ndarray:
    """Five fresh columns whose accumulated increment is ``a`` at pair rank
    ``e`` and zero elsewhere.

    Diagonal pairs need two of the five steps (the two-square decomposition
    of a); off-diagonal pairs use all five (decompositions of -a**2 and -1
    cancel the two diagonal by-products).  The construction is checked by
    direct evaluation before returning.
    """
    T = pair_count(K)
    if not 0 <= e < T:
        raise ValueError(f"pair rank {e} out of range for K={K}")
    a = int(a) % q
    if a == 0:
        raise ValueError("target value a must be nonzero")
    pair = pair_unrank(K, e)
    cols = np.zeros((5, K), dtype=np.int64)
    if pair.i == pair.j:
        s, t = sum_two_squares(q, a)
        cols[0, pair.i - 1] = t
        cols[1, pair.i - 1] = s
    else:
        s1, t1 = sum_two_squares(q, -a * a % q)
        s2, t2 = sum_two_squares(q, -1 % q)
        cols[0, pair.i - 1] = a
        cols[0, pair.j - 1] = 1
        cols[1, pair.i - 1] = s1
        cols[2, pair.i - 1] = t1
        cols[3, pair.j - 1] = s2
        cols[4, pair.j - 1] = t2
    achieved = accumulate_increment(cols, q, K)
    expected = np.zeros(T, dtype=np.int64)
    expected[e] = a
    if not np.array_equal(achieved, expected):
        raise AssertionError(
            f"witness construction failed for q={q} K={K} e={e} a={a}: {achieved}"
        )
    return cols


# --- evolution ----------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTrace:
    """Distances to uniform along the walk, plus a geometric fit.

    ``sup_dists[L-1]`` and ``l2_dists[L-1]`` are the distances of the
    length-L table distribution from uniform.  The fit models
    l2_dist(L) ~ c * rate**(L-1) by least squares on the log distances
    over the last half of the trace.
    """

    q: int
    K: int
    L_max: int
    sup_dists: np.ndarray
    l2_dists: np.ndarray
    fitted_rate: float
    fitted_constant: float
    distributions: list[np.ndarray] | None
    exact: bool


def evolve(
    d: DeltaDistribution, L_max: int, store_distributions: bool = True
) -> ConvergenceTrace:
    """Distribution of the table after L = 1 .. L_max columns.

    The length-1 table has exactly the increment law; each further column
    convolves the current law with the increment law over the group.  Small
    state spaces use exact integer numerators over q**(K*L); larger ones
    fall back to Fourier-domain convolution in doubles.
    """
    if not 1 <= L_max <= MAX_TRACE_LENGTH:
        raise ValueError(f"L_max must lie in [1, {MAX_TRACE_LENGTH}]")
    n = d.q**d.T
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"state space {n} exceeds {ENUMERATION_LIMIT}")
    if n <= EXACT_EVOLVE_LIMIT and L_max <= 200:
        sup, l2, dists = _evolve_exact(d, L_max, store_distributions)
        exact = True
    else:
        sup, l2, dists = _evolve_float(d, L_max, store_distributions)
        exact = False
    rate, const = _fit_geometric(l2)
    return ConvergenceTrace(
        q=d.q,
        K=d.K,
        L_max=L_max,
        sup_dists=sup,
        l2_dists=l2,
        fitted_rate=rate,
        fitted_constant=const,
        distributions=dists,
        exact=exact,
    )


def _evolve_exact(d: DeltaDistribution, L_max: int, store: bool):
    q, T = d.q, d.T
    n = q**T
    powers = _index_powers(q, T)
    states = _decode_states(q, T, n)
    support_idx = d.support_indices
    support = states[support_idx]
    shift_perms = [
        ((states + s[None, :]) % q) @ powers for s in support
    ]
    weights = [int(d.counts[i]) for i in support_idx]

    step = int(q**d.K)
    num = np.array([int(c) for c in d.counts], dtype=object)
    denom = step
    sup_dists, l2_dists, dists = [], [], [] if store else None
    for L in range(1, L_max + 1):
        if L > 1:
            new = np.zeros(n, dtype=object)
            for perm, w in zip(shift_perms, weights):
                new[perm] = new[perm] + num * w
            num = new
            denom *= step
        dev = np.abs(num * n - denom)
        scale = denom * n
        sup_dists.append(float(Fraction(int(dev.max()), scale)))
        sumsq = int(np.sum(dev * dev))
        l2_dists.append(math.sqrt(float(Fraction(sumsq, scale * scale))))
        if store:
            dists.append(np.array([v / denom for v in num.tolist()], dtype=float))
    return np.array(sup_dists), np.array(l2_dists), dists


def _evolve_float(d: DeltaDistribution, L_max: int, store: bool):
    q, T = d.q, d.T
    n = q**T
    shape = (q,) * T
    delta_hat = np.fft.fftn(d.probs.reshape(shape))
    p_hat = delta_hat.copy()
    pi = 1.0 / n
    sup_dists, l2_dists, dists = [], [], [] if store else None
    for L in range(1, L_max + 1):
        if L > 1:
            p_hat = p_hat * delta_hat
        p = np.fft.ifftn(p_hat).real.ravel()
        dev = p - pi
        sup_dists.append(float(np.max(np.abs(dev))))
        l2_dists.append(float(np.linalg.norm(dev)))
        if store:
            dists.append(np.clip(p, 0.0, None))
    return np.array(sup_dists), np.array(l2_dists), dists


def _fit_geometric(l2_dists: np.ndarray) -> tuple[float, float]:
    L_max = len(l2_dists)
    xs = np.arange(1, L_max + 1)
    mask = (xs >= (L_max + 1) // 2) & (l2_dists > 0)
    if mask.sum() < 2:
        # fully mixed within the window: a one-step chain
        return 0.0, float(l2_dists[0])
    slope, intercept = np.polyfit(xs[mask] - 1, np.log(l2_dists[mask]), 1)
    return float(np.exp(slope)), float(np.exp(intercept))


def envelope_constant(values, rate: float, fit_window: int | None = None) -> float:
    """Smallest c with values[L-1] <= c * rate**(L-1) over L in the window.

    ``values`` is indexed from L = 1; with ``fit_window`` only the first
    that many points are used.  A rate of zero leaves only the L = 1 point.
    """
    vals = np.asarray(values, dtype=float)
    if fit_window is not None:
        vals = vals[:fit_window]
    best = 0.0
    for L, v in enumerate(vals, start=1):
        denom = rate ** (L - 1)
        if denom <= 0.0:
            continue
        best = max(best, v / denom)
    return best


# --- subset entropies ---------------------------------------------------------


class EntropyResult(NamedTuple):
    bits: float
    logq_units: float


def subset_entropy(p: np.ndarray, q: int, K: int, pairs) -> EntropyResult:
    """Shannon entropy of the table coordinates selected by ``pairs``.

    ``p`` is a distribution over F(q)^T in index order; ``pairs`` is a
    nonempty collection of PairIndex values (or integer pair ranks).  The
    marginal entropy is computed as P*log(q) minus the KL divergence of the
    marginal from uniform, which keeps the value at or below P*log(q) even
    when the marginal is within rounding distance of uniform.
    """
    T = pair_count(K)
    ranks = sorted(
        {pr if isinstance(pr, (int, np.integer)) else pair_rank(K, pr) for pr in pairs}
    )
    if not ranks:
        raise ValueError("pair set must be nonempty")
    if ranks[0] < 0 or ranks[-1] >= T:
        raise ValueError(f"pair rank out of range for K={K}")
    P = len(ranks)
    nd = np.asarray(p, dtype=float).reshape((q,) * T)
    other_axes = tuple(t for t in range(T) if t not in ranks)
    marg = nd.sum(axis=other_axes).ravel() if other_axes else nd.ravel()

    u = float(q) ** -P
    pos = marg > 0
    kl_nats = float(np.sum(marg[pos] * np.log1p((marg[pos] - u) / u)))
    if kl_nats < -1e-9:
        raise AssertionError(f"negative divergence {kl_nats} from uniform")
    kl_bits = max(kl_nats, 0.0) / math.log(2)
    bits = P * math.log2(q) - kl_bits
    return EntropyResult(bits=bits, logq_units=bits / math.log2(q))


def entropy_deficit_bits(p: np.ndarray, q: int, K: int, pairs) -> float:
    """P*log2(q) - H(selected coordinates), always >= 0."""
    T = pair_count(K)
    ranks = [pr if isinstance(pr, (int, np.integer)) else pair_rank(K, pr) for pr in pairs]
    P = len(set(ranks))
    return P * math.log2(q) - subset_entropy(p, q, K, pairs).bits


__all__ = [
    "ENUMERATION_LIMIT",
    "DENSE_LIMIT",
    "POSITIVITY_LIMIT",
    "DeltaDistribution",
    "delta_distribution",
    "TransitionOperator",
    "transition_dense",
    "Spectrum",
    "spectrum_via_characters",
    "spectrum_dense_oracle",
    "IrreducibilityReport",
    "is_irreducible",
    "sum_two_squares",
    "accumulate_increment",
    "reachability_witness",
    "ConvergenceTrace",
    "evolve",
    "envelope_constant",
    "EntropyResult",
    "subset_entropy",
    "entropy_deficit_bits",
]
