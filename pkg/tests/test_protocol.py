import itertools
from math import comb

import numpy as np
import pytest

from pipret.bounds import BoundQuery, inverse_rate_converse, single_message_inverse_rate
from pipret.fields import PairIndex, compute_table, pair_count, random_database
from pipret.protocol import (
    DecodeMismatchError,
    PairSet,
    RetrievalScheme,
    UnsupportedParameters,
    VirtualFileSpace,
    audit_privacy,
    make_scheme,
    measure_rate,
    per_server_download,
    rate_summary,
    retrieve_pairs,
    run_retrieval,
    scheme_full_download,
    scheme_leaky_index,
    scheme_repeated_pir,
    virtual_data_from_databases,
)


def _random_data(space, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, space.q, size=(space.T, space.nu))


# --- full download ---------------------------------------------------------------


def test_full_download_rate_example():
    space = VirtualFileSpace(T=3, q=5, nu=1)
    tr = run_retrieval(scheme_full_download(), space, 2, (0, 2), _random_data(space), 0)
    assert tr.downloaded == 3
    assert tr.inverse_rate == pytest.approx(1.5)


def test_full_download_constant_query():
    space = VirtualFileSpace(T=4, q=5, nu=2)
    sch = scheme_full_download()
    plans = [
        sch.query(space, 3, req, np.random.default_rng(0)).server_queries
        for req in itertools.combinations(range(4), 2)
    ]
    assert all(p == plans[0] for p in plans)


def test_full_download_n1_matches_converse():
    for T, P in [(3, 1), (3, 2), (4, 2), (6, 5)]:
        space = VirtualFileSpace(T=T, q=5, nu=2)
        tr = run_retrieval(
            scheme_full_download(), space, 1, tuple(range(P)), _random_data(space), 1
        )
        assert tr.inverse_rate == pytest.approx(T / P, abs=1e-12)
        assert tr.inverse_rate == pytest.approx(
            inverse_rate_converse(BoundQuery(T, P, 1)), abs=1e-9
        )


# --- repeated PIR ------------------------------------------------------------------


def test_per_server_download_counts():
    assert per_server_download(3, 2) == 7
    assert per_server_download(2, 2) == 3
    assert per_server_download(1, 2) == 1
    assert per_server_download(3, 3) == 3 + 6 + 4


def test_repeated_pir_rate_t3_n2():
    space = VirtualFileSpace(T=3, q=5, nu=8)
    tr = run_retrieval(scheme_repeated_pir(), space, 2, (1,), _random_data(space), 0)
    assert tr.per_server_counts == (7, 7)
    assert tr.downloaded == 14
    assert tr.inverse_rate == pytest.approx(1.75)
    assert tr.inverse_rate == pytest.approx(1 + 1 / 2 + 1 / 4)


def test_repeated_pir_rate_t2_n2():
    space = VirtualFileSpace(T=2, q=5, nu=4)
    tr = run_retrieval(scheme_repeated_pir(), space, 2, (0,), _random_data(space), 0)
    assert tr.per_server_counts == (3, 3)
    assert tr.inverse_rate == pytest.approx(1.5)


def test_repeated_pir_rate_independent_of_p():
    space = VirtualFileSpace(T=3, q=5, nu=8)
    rates = []
    for P in (1, 2, 3):
        tr = run_retrieval(
            scheme_repeated_pir(), space, 2, tuple(range(P)), _random_data(space), 0
        )
        rates.append(tr.inverse_rate)
    assert rates[0] == rates[1] == rates[2] == pytest.approx(1.75)


def test_repeated_pir_geometric_sum_grid():
    for T, N in [(2, 2), (3, 2), (2, 3), (3, 3), (4, 2)]:
        space = VirtualFileSpace(T=T, q=5, nu=N**T)
        tr = run_retrieval(
            scheme_repeated_pir(), space, N, (0,), _random_data(space, T * N), 5
        )
        assert tr.inverse_rate == pytest.approx(
            single_message_inverse_rate(T, N), abs=1e-9
        )


def test_repeated_pir_correctness_100_seeds():
    cases = [
        (VirtualFileSpace(T=3, q=5, nu=8), 2, (1,)),
        (VirtualFileSpace(T=3, q=2, nu=8), 2, (0, 2)),
    ]
    for space, N, request in cases:
        data = _random_data(space, seed=99)
        for s in range(100):
            tr = run_retrieval(scheme_repeated_pir(), space, N, request, data, seed=s)
            assert np.array_equal(tr.decoded, data[list(request)])


def test_repeated_pir_unsupported_params():
    sch = scheme_repeated_pir()
    with pytest.raises(UnsupportedParameters):
        run_retrieval(sch, VirtualFileSpace(T=3, q=5, nu=4), 2, (0,), np.zeros((3, 4)), 0)
    with pytest.raises(UnsupportedParameters):
        run_retrieval(sch, VirtualFileSpace(T=3, q=5, nu=1), 1, (0,), np.zeros((3, 1)), 0)


def test_repeated_pir_structure_counts():
    sch = scheme_repeated_pir()
    for T, N in [(2, 2), (3, 2), (3, 3), (4, 2)]:
        st = sch.run_structure(T, N)
        # desired pool exactly exhausted, undesired pools at N^(T-1)
        assert st.used[0] == N**T
        for k in range(1, T):
            assert st.used[k] == N ** (T - 1)
        for n in range(N):
            assert len(st.sums[n]) == per_server_download(T, N)
            # round t: C(T-1,t) (N-1)^(t-1) undesired sums produced
            for t in range(1, T + 1):
                assert st.produced[n][t] == comb(T - 1, t) * (N - 1) ** (t - 1)
        # every undesired (t-1)-sum is consumed once by each other server
        for n in range(N):
            for t in range(1, T):
                assert st.consumed[n][t] == st.produced[n][t] * (N - 1)


def test_repeated_pir_download_count_symmetry():
    space = VirtualFileSpace(T=3, q=5, nu=8)
    sch = scheme_repeated_pir()
    counts = set()
    for req in itertools.combinations(range(3), 2):
        plan = sch.query(space, 2, req, np.random.default_rng(0))
        counts.add(tuple(sum(len(b) for b in sq) for sq in plan.server_queries))
    assert len(counts) == 1


def test_decode_mismatch_is_hard_failure():
    class CorruptingScheme(type(scheme_repeated_pir())):
        def answer(self, space, server_query, data):
            out = super().answer(space, server_query, data)
            if out and out[0]:
                out[0][0] = (out[0][0] + 1) % space.q
            return out

    space = VirtualFileSpace(T=3, q=5, nu=8)
    with pytest.raises(DecodeMismatchError):
        run_retrieval(CorruptingScheme(), space, 2, (0,), _random_data(space), 0)


def test_run_retrieval_validation():
    space = VirtualFileSpace(T=3, q=5, nu=1)
    data = _random_data(space)
    with pytest.raises(ValueError, match="repeat"):
        run_retrieval(scheme_full_download(), space, 2, (0, 0), data, 0)
    with pytest.raises(ValueError, match="out of range"):
        run_retrieval(scheme_full_download(), space, 2, (3,), data, 0)
    with pytest.raises(ValueError, match="shaped"):
        run_retrieval(scheme_full_download(), space, 2, (0,), np.zeros((2, 2)), 0)


# --- database-derived runs ----------------------------------------------------------


def test_retrieve_pairs_matches_table():
    dbs = [random_database(5, 3, 4, seed=s) for s in range(3)]
    pairs = PairSet({PairIndex(1, 2), PairIndex(3, 3)})
    tr = retrieve_pairs(scheme_full_download(), pairs, dbs, 2, seed=1)
    tables = [compute_table(db).values for db in dbs]
    for col, table in enumerate(tables):
        for row, rank in enumerate(pairs.ranks(3)):
            assert tr.decoded[row, col] == table[rank]


def test_retrieve_pairs_with_repeated_pir():
    dbs = [random_database(2, 2, 3, seed=s) for s in range(8)]  # nu = 8 = 2^T
    pairs = PairSet({PairIndex(1, 2)})
    tr = retrieve_pairs(scheme_repeated_pir(), pairs, dbs, 2, seed=4)
    assert tr.inverse_rate == pytest.approx(1.75)


def test_virtual_data_requires_consistent_instances():
    with pytest.raises(ValueError, match="share"):
        virtual_data_from_databases(
            [random_database(5, 2, 3, seed=0), random_database(7, 2, 3, seed=0)]
        )
    with pytest.raises(ValueError, match="at least one"):
        virtual_data_from_databases([])


def test_pair_set_validation():
    with pytest.raises(ValueError, match="nonempty"):
        PairSet(set())
    with pytest.raises(TypeError, match="PairIndex"):
        PairSet({(1, 2)})
    ps = PairSet({PairIndex(2, 1), PairIndex(1, 2)})
    assert ps.P == 1  # identical normalized pairs collapse


# --- rate accounting -----------------------------------------------------------------


def test_measure_rate_and_summary():
    space = VirtualFileSpace(T=3, q=5, nu=1)
    data = _random_data(space)
    transcripts = [
        run_retrieval(scheme_full_download(), space, 2, (0, 1), data, seed=s)
        for s in range(4)
    ]
    assert measure_rate(transcripts) == pytest.approx(1.5)
    summary = rate_summary(transcripts, 2)
    assert summary["measured_inverse_rate"] == pytest.approx(1.5)
    assert summary["inv_rate_converse"] == pytest.approx(1.25)
    assert not summary["beats_converse"]
    with pytest.raises(ValueError):
        measure_rate([])


def test_no_scheme_beats_converse():
    for scheme_name, T, P, N, nu in [
        ("full_download", 3, 2, 2, 1),
        ("full_download", 4, 1, 3, 2),
        ("repeated_pir", 3, 2, 2, 8),
        ("repeated_pir", 2, 2, 3, 9),
    ]:
        scheme = make_scheme(scheme_name)
        space = VirtualFileSpace(T=T, q=5, nu=nu)
        tr = run_retrieval(scheme, space, N, tuple(range(P)), _random_data(space, 7), 3)
        converse = inverse_rate_converse(BoundQuery(T, P, N))
        assert tr.inverse_rate >= converse - 1e-9


# --- privacy audits ------------------------------------------------------------------


def test_exact_audit_full_download_tv_zero():
    space = VirtualFileSpace(T=3, q=5, nu=1)
    rep = audit_privacy(scheme_full_download(), space, 2, 2, mode="exact")
    assert rep.passed
    assert rep.max_tv_distance == 0.0
    assert rep.count_symmetric


def test_exact_audit_flags_leaky_scheme():
    space = VirtualFileSpace(T=3, q=5, nu=1)
    rep = audit_privacy(scheme_leaky_index(), space, 2, 1, mode="exact")
    assert not rep.passed
    assert rep.max_tv_distance == 1.0


def test_exact_audit_rejects_randomized_scheme():
    space = VirtualFileSpace(T=2, q=5, nu=4)
    with pytest.raises(ValueError, match="randomized"):
        audit_privacy(scheme_repeated_pir(), space, 2, 1, mode="exact")


def test_sampled_audit_passes_repeated_pir():
    space = VirtualFileSpace(T=2, q=5, nu=4)
    rep = audit_privacy(
        scheme_repeated_pir(), space, 2, 1, mode="sampled", samples=10_000, seed=11
    )
    assert rep.passed
    assert rep.count_symmetric
    assert rep.min_pvalue >= rep.threshold
    assert rep.n_tests == len(rep.tests) > 0


def test_sampled_audit_flags_leaky_scheme():
    space = VirtualFileSpace(T=3, q=5, nu=2)
    rep = audit_privacy(
        scheme_leaky_index(), space, 2, 1, mode="sampled", samples=10_000, seed=11
    )
    assert not rep.passed


def test_sampled_audit_requires_enough_samples():
    space = VirtualFileSpace(T=2, q=5, nu=4)
    with pytest.raises(ValueError, match="samples"):
        audit_privacy(scheme_repeated_pir(), space, 2, 1, mode="sampled", samples=100)


def test_audit_mode_validation():
    space = VirtualFileSpace(T=2, q=5, nu=4)
    with pytest.raises(ValueError, match="unknown audit mode"):
        audit_privacy(scheme_full_download(), space, 2, 1, mode="bogus")
    with pytest.raises(ValueError, match="P must"):
        audit_privacy(scheme_full_download(), space, 2, 5, mode="exact")


def test_query_statistics_fast_path_matches_generic():
    sch = scheme_repeated_pir()
    cases = [
        (VirtualFileSpace(T=3, q=2, nu=8), 2, (1,)),
        (VirtualFileSpace(T=3, q=2, nu=8), 2, (0, 2)),
        (VirtualFileSpace(T=2, q=5, nu=9), 3, (1,)),
    ]
    for space, N, request in cases:
        for s in range(25):
            r1 = np.random.default_rng(np.random.SeedSequence([s]))
            r2 = np.random.default_rng(np.random.SeedSequence([s]))
            fast = sch.query_statistics(space, N, request, r1)
            generic = RetrievalScheme.query_statistics(sch, space, N, request, r2)
            assert fast == generic


def test_make_scheme_lookup():
    assert make_scheme("full_download").name == "full_download"
    with pytest.raises(ValueError, match="unknown scheme"):
        make_scheme("carrier_pigeon")
