import numpy as np
import pytest

from pipret.fields import (
    Database,
    FieldElement,
    FieldVector,
    InnerProductVector,
    PairIndex,
    PairOrdering,
    append_column,
    compute_table,
    inner_product,
    is_prime,
    load_csv,
    pair_count,
    pair_rank,
    pair_unrank,
    random_database,
    save_csv,
)


def test_inner_product_examples():
    assert int(inner_product(FieldVector([1, 2, 3], 5), FieldVector([2, 0, 1], 5))) == 0
    assert int(inner_product(FieldVector([0, 0], 3), FieldVector([1, 2], 3))) == 0
    assert int(inner_product(FieldVector([1, 1], 2), FieldVector([1, 1], 2))) == 0


def test_inner_product_errors():
    with pytest.raises(ValueError, match="length"):
        inner_product(FieldVector([1, 2], 5), FieldVector([1, 2, 3], 5))
    with pytest.raises(ValueError, match="modulus"):
        inner_product(FieldVector([1, 2], 5), FieldVector([1, 2], 7))


def test_inner_product_large_modulus_path():
    q = 2305843009213693951  # 2**61 - 1
    a = FieldVector([q - 1, q - 2], q)
    b = FieldVector([q - 1, 2], q)
    expected = ((q - 1) * (q - 1) + (q - 2) * 2) % q
    assert int(inner_product(a, b)) == expected


def test_field_element_arithmetic():
    a = FieldElement(3, 5)
    b = FieldElement(4, 5)
    assert int(a + b) == 2
    assert int(a - b) == 4
    assert int(a * b) == 2
    assert int(-a) == 2
    with pytest.raises(ValueError, match="modulus"):
        a + FieldElement(1, 7)


def test_non_prime_modulus_rejected():
    for bad in (0, 1, 4, 6, 9, 100):
        with pytest.raises(ValueError, match="not prime"):
            FieldElement(1, bad)
    with pytest.raises(ValueError, match="exceeds"):
        FieldElement(1, 2**62)


def test_is_prime_agrees_with_sieve():
    sieve = np.ones(2000, dtype=bool)
    sieve[:2] = False
    for i in range(2, 2000):
        if sieve[i]:
            sieve[2 * i :: i] = False
    for n in range(2000):
        assert is_prime(n) == bool(sieve[n])
    assert is_prime(2305843009213693951)  # 2**61 - 1
    assert not is_prime(2305843009213693953)


def test_compute_table_examples():
    assert compute_table(Database(2, [[1], [1]])).values.tolist() == [1, 1, 1]
    assert compute_table(Database(5, [[0, 0]])).values.tolist() == [0]
    assert compute_table(Database(5, [[1, 2], [3, 4]])).values.tolist() == [0, 1, 0]


def test_pair_rank_examples():
    assert pair_rank(3, PairIndex(1, 1)) == 0
    assert pair_rank(3, PairIndex(2, 3)) == 4
    assert pair_unrank(3, 5) == PairIndex(3, 3)


def test_pair_rank_bijection_and_order():
    for K in range(1, 9):
        ordering = PairOrdering(K)
        assert len(ordering) == pair_count(K)
        for r, pair in enumerate(ordering):
            assert pair_rank(K, pair) == r
            assert pair_unrank(K, r) == pair
        # canonical order is lexicographic on (i, j)
        keys = [(p.i, p.j) for p in ordering]
        assert keys == sorted(keys)


def test_pair_rank_errors():
    with pytest.raises(ValueError):
        pair_rank(3, PairIndex(2, 4))
    with pytest.raises(ValueError):
        pair_unrank(3, 6)
    with pytest.raises(ValueError):
        PairIndex(0, 1)


def test_pair_index_normalizes():
    assert PairIndex(3, 1) == PairIndex(1, 3)
    assert repr(PairIndex(2, 1)) == "{1,2}"


def test_random_database_determinism_and_range():
    db1 = random_database(5, 3, 4, seed=7)
    db2 = random_database(5, 3, 4, seed=7)
    assert db1 == db2
    assert db1.entries.shape == (3, 4)
    assert db1.entries.min() >= 0 and db1.entries.max() < 5
    assert random_database(5, 3, 4, seed=8) != db1


def test_random_database_uniform_bit():
    bits = [random_database(2, 1, 1, seed=s).entries[0, 0] for s in range(10_000)]
    assert abs(np.mean(bits) - 0.5) < 0.02


def test_random_database_rejects_bad_params():
    with pytest.raises(ValueError):
        random_database(4, 2, 2, seed=0)
    with pytest.raises(ValueError):
        random_database(5, 0, 2, seed=0)


def test_table_permutation_symmetry():
    rng = np.random.default_rng(3)
    for K in (2, 3, 4):
        db = random_database(7, K, 5, seed=11)
        perm = rng.permutation(K)
        permuted = Database(7, db.entries[perm])
        table = compute_table(db)
        table_perm = compute_table(permuted)
        ordering = PairOrdering(K)
        for r, pair in enumerate(ordering):
            # file k of the permuted database is file perm[k]+1 of the original
            orig_pair = PairIndex(int(perm[pair.i - 1]) + 1, int(perm[pair.j - 1]) + 1)
            assert table_perm.values[r] == int(table.get(orig_pair))


def test_append_column_delta_relation():
    db = random_database(5, 3, 4, seed=2)
    col = [1, 4, 2]
    grown = append_column(db, col)
    before = compute_table(db).values
    after = compute_table(grown).values
    for r, pair in enumerate(PairOrdering(3)):
        delta = col[pair.i - 1] * col[pair.j - 1] % 5
        assert after[r] == (before[r] + delta) % 5


def test_database_file_access():
    db = Database(5, [[1, 2], [3, 4]])
    assert db.file(1) == FieldVector([1, 2], 5)
    with pytest.raises(ValueError):
        db.file(3)


def test_csv_round_trip(tmp_path):
    db = random_database(13, 4, 6, seed=5)
    path = tmp_path / "db.csv"
    save_csv(db, path)
    header = path.read_text().splitlines()[0]
    assert header == "13,4,6"
    assert load_csv(path) == db


def test_csv_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not,a,header,line\n")
    with pytest.raises(ValueError):
        load_csv(path)
    path.write_text("5,2,2\n1,2\n")
    with pytest.raises(ValueError, match="expected"):
        load_csv(path)


def test_inner_product_vector_validation():
    ipv = InnerProductVector(5, 2, [1, 2, 3])
    assert int(ipv.get(PairIndex(1, 2))) == 2
    with pytest.raises(ValueError):
        InnerProductVector(5, 2, [1, 2])
