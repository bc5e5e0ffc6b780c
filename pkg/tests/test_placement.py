import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fogcache.core import FragmentKey, SystemConfig, enumerate_fragment_keys
from fogcache.placement import (
    MIN_EXPECTED_BITS,
    empirical_fragment_stats,
    exact_fragment_moments,
    partition_files,
    place_caches,
    write_stats_csv,
)


def test_cache_sizes_are_exact():
    cfg = SystemConfig(kt=2, kr=3, mu_t=0.37, mu_r=0.61, file_bits=1001, seed=3)
    state = place_caches(cfg)
    assert (state.en_caches.sum(axis=2) == math.floor(0.37 * 1001)).all()
    assert (state.user_caches.sum(axis=2) == math.floor(0.61 * 1001)).all()
    assert set(np.unique(state.library)) <= {0, 1}


def test_full_en_cache_no_user_cache():
    cfg = SystemConfig(kt=2, kr=2, mu_t=1.0, mu_r=0.0, file_bits=500)
    part = partition_files(place_caches(cfg))
    full = FragmentKey(0b11, 0)
    for j in range(cfg.n_files):
        assert part.size(j, full) == 500
        assert sum(part.size(j, k) for k in enumerate_fragment_keys(2, 2) if k != full) == 0


def test_full_user_cache_keys():
    cfg = SystemConfig(kt=2, kr=3, mu_t=0.5, mu_r=1.0, file_bits=2000)
    part = partition_files(place_caches(cfg))
    for j in range(cfg.n_files):
        for key, idx in part.fragments[j].items():
            if key.user_set != 0b111:
                assert len(idx) == 0


def test_same_seed_same_caches():
    cfg = SystemConfig(kt=2, kr=3, mu_t=0.3, mu_r=0.4, file_bits=3000, seed=11)
    a, b = place_caches(cfg), place_caches(cfg)
    assert np.array_equal(a.en_caches, b.en_caches)
    assert np.array_equal(a.user_caches, b.user_caches)
    assert np.array_equal(a.library, b.library)
    c = place_caches(cfg.replace(seed=12))
    assert not np.array_equal(a.user_caches, c.user_caches)


def test_substreams_independent_of_other_nodes():
    # adding a user leaves existing caches untouched
    small = place_caches(SystemConfig(kt=2, kr=2, n_files=2, mu_t=0.3, mu_r=0.4, file_bits=800))
    big = place_caches(SystemConfig(kt=2, kr=3, n_files=2, mu_t=0.3, mu_r=0.4, file_bits=800))
    assert np.array_equal(small.user_caches, big.user_caches[:2])
    assert np.array_equal(small.en_caches, big.en_caches)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 3), st.integers(1, 4),
    st.floats(0, 1), st.floats(0, 1), st.integers(1, 400), st.integers(0, 2**31),
)
def test_partition_disjoint_and_exhaustive(kt, kr, mt, mr, F, seed):
    cfg = SystemConfig(kt=kt, kr=kr, mu_t=mt, mu_r=mr, file_bits=F, seed=seed)
    state = place_caches(cfg)
    part = partition_files(state)
    for j in range(cfg.n_files):
        assert len(part.fragments[j]) == 2 ** (kt + kr)
        allidx = np.concatenate(list(part.fragments[j].values()))
        assert np.array_equal(np.sort(allidx), np.arange(F))
        for key, idx in part.fragments[j].items():
            for i in range(kt):
                assert (state.en_caches[i, j, idx] == bool(key.en_set >> i & 1)).all()
            for k in range(kr):
                assert (state.user_caches[k, j, idx] == bool(key.user_set >> k & 1)).all()


def test_two_by_two_sizes_near_expectation():
    cfg = SystemConfig(kt=2, kr=2, mu_t=0.5, mu_r=0.5, file_bits=10**6, seed=0)
    part = partition_files(place_caches(cfg))
    for j in range(2):
        for key in enumerate_fragment_keys(2, 2):
            assert abs(part.size(j, key) / 10**6 - 1 / 16) <= 0.02 / 16


def test_stats_rows_and_threshold():
    cfg = SystemConfig(kt=2, kr=2, mu_t=0.9, mu_r=0.5, file_bits=20000, seed=1)
    rows = empirical_fragment_stats(partition_files(place_caches(cfg)), cfg)
    assert len(rows) == 2 * 16
    for row in rows:
        assert (row.rel_error is None) == (row.expected_bits < MIN_EXPECTED_BITS)
        assert row.observed_fraction == row.observed_bits / 20000


def test_exact_moments_match_brute_force():
    # tiny case, all placements enumerable: one EN, one user, F=4, m=2 each
    import itertools

    cfg = SystemConfig(kt=1, kr=1, mu_t=0.5, mu_r=0.5, file_bits=4)
    key = FragmentKey(1, 1)
    subsets = list(itertools.combinations(range(4), 2))
    counts = [len(set(a) & set(b)) for a in subsets for b in subsets]
    mean, sd = exact_fragment_moments(cfg, key)
    assert mean == pytest.approx(np.mean(counts), rel=1e-12)
    assert sd == pytest.approx(np.std(counts), rel=1e-12)


def test_fragment_sizes_statistically_calibrated():
    """z-scores under the exact-size model: unit variance and few 3-sigma exceedances."""
    zs = []
    for seed in range(20):
        cfg = SystemConfig(kt=2, kr=4, mu_t=0.5, mu_r=0.5, file_bits=10**5, seed=seed)
        for row in empirical_fragment_stats(partition_files(place_caches(cfg)), cfg):
            if row.rel_error is None:
                continue
            mean, sd = exact_fragment_moments(cfg, row.key)
            zs.append((row.observed_bits - mean) / sd)
    z = np.asarray(zs)
    n = len(z)
    assert n == 20 * 4 * 64
    assert abs(z.mean()) < 4 / math.sqrt(n)
    assert 0.85 < np.mean(z**2) < 1.15
    # P(|z|>3) = 0.0027; allow up to the ~99.99% binomial quantile
    p = 0.0027
    assert np.sum(np.abs(z) > 3) <= n * p + 4 * math.sqrt(n * p * (1 - p))


def test_write_stats_csv(tmp_path):
    cfg = SystemConfig(kt=2, kr=2, mu_t=0.5, mu_r=0.5, file_bits=50000)
    rows = empirical_fragment_stats(partition_files(place_caches(cfg)), cfg)
    out = tmp_path / "stats.csv"
    write_stats_csv(rows, out)
    with open(out, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["key_en_mask", "key_user_mask", "observed_bits", "expected_bits", "rel_error"]
    assert len(table) == 1 + len(rows)
