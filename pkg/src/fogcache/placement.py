"""Bit-level decentralized placement and the induced fragment partition."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FragmentKey, SystemConfig, enumerate_fragment_keys, validate_config
from .formulas import expected_fragment_fraction

# RNG substream tags: SeedSequence(entropy=seed, spawn_key=(tag, node, file))
EN_STREAM, USER_STREAM, LIBRARY_STREAM = 0, 1, 2


def _rng(seed: int, tag: int, node: int, file: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, node, file)))


def _exact_subset(rng: np.random.Generator, n_bits: int, n_cached: int) -> np.ndarray:
    mask = np.zeros(n_bits, dtype=bool)
    if n_cached:
        mask[rng.choice(n_bits, size=n_cached, replace=False)] = True
    return mask


@dataclass(frozen=True)
class CacheState:
    """Cache contents of every node.

    ``en_caches[i, j]`` / ``user_caches[k, j]`` are boolean masks over the
    bits of file ``j``; ``library[j]`` holds the file's bit values (0/1).
    """

    en_caches: np.ndarray
    user_caches: np.ndarray
    library: np.ndarray
    file_bits: int

    @property
    def kt(self) -> int:
        return self.en_caches.shape[0]

    @property
    def kr(self) -> int:
        return self.user_caches.shape[0]

    @property
    def n_files(self) -> int:
        return self.library.shape[0]

    def en_indices(self, en: int, file: int) -> np.ndarray:
        return np.flatnonzero(self.en_caches[en, file])

    def user_indices(self, user: int, file: int) -> np.ndarray:
        return np.flatnonzero(self.user_caches[user, file])


def library_bits(cfg: SystemConfig) -> np.ndarray:
    lib = np.empty((cfg.n_files, cfg.file_bits), dtype=np.uint8)
    for j in range(cfg.n_files):
        lib[j] = _rng(cfg.seed, LIBRARY_STREAM, 0, j).integers(0, 2, cfg.file_bits, dtype=np.uint8)
    return lib


def place_caches(cfg: SystemConfig) -> CacheState:
    """Every node independently caches exactly ``floor(mu*F)`` bits of each file."""
    validate_config(cfg)
    F = cfg.file_bits
    m_en = math.floor(cfg.mu_t * F)
    m_user = math.floor(cfg.mu_r * F)
    en = np.zeros((cfg.kt, cfg.n_files, F), dtype=bool)
    users = np.zeros((cfg.kr, cfg.n_files, F), dtype=bool)
    for j in range(cfg.n_files):
        for i in range(cfg.kt):
            en[i, j] = _exact_subset(_rng(cfg.seed, EN_STREAM, i, j), F, m_en)
        for k in range(cfg.kr):
            users[k, j] = _exact_subset(_rng(cfg.seed, USER_STREAM, k, j), F, m_user)
    return CacheState(en, users, library_bits(cfg), F)


@dataclass(frozen=True)
class FragmentPartition:
    """Per file, the sorted bit indices of every fragment ``W_{j,St,Sr}``."""

    kt: int
    kr: int
    file_bits: int
    fragments: tuple[dict[FragmentKey, np.ndarray], ...]

    def get(self, file: int, key: FragmentKey) -> np.ndarray:
        return self.fragments[file][key]

    def size(self, file: int, key: FragmentKey) -> int:
        return len(self.fragments[file][key])


def _membership_code(masks: np.ndarray) -> np.ndarray:
    """Bitmask of nodes holding each bit; ``masks`` is (n_nodes, F)."""
    code = np.zeros(masks.shape[1], dtype=np.int64)
    for i in range(masks.shape[0]):
        code |= masks[i].astype(np.int64) << i
    return code


def partition_files(state: CacheState) -> FragmentPartition:
    keys = enumerate_fragment_keys(state.kt, state.kr)
    n_keys = len(keys)
    per_file = []
    for j in range(state.n_files):
        code = (_membership_code(state.en_caches[:, j]) << state.kr) | _membership_code(
            state.user_caches[:, j]
        )
        order = np.argsort(code, kind="stable")
        counts = np.bincount(code, minlength=n_keys)
        chunks = np.split(order, np.cumsum(counts)[:-1])
        # code == (en_set << kr) | user_set matches the canonical key order
        per_file.append({key: chunk for key, chunk in zip(keys, chunks)})
    return FragmentPartition(state.kt, state.kr, state.file_bits, tuple(per_file))


@dataclass(frozen=True)
class FragmentStat:
    file: int
    key: FragmentKey
    observed_bits: int
    expected_bits: float
    observed_fraction: float
    expected_fraction: float
    rel_error: float | None  # None when expected size < MIN_EXPECTED_BITS


MIN_EXPECTED_BITS = 1000


def empirical_fragment_stats(partition: FragmentPartition, cfg: SystemConfig) -> list[FragmentStat]:
    """Observed vs expected fragment sizes, one row per (file, key)."""
    F = partition.file_bits
    rows = []
    for j, frags in enumerate(partition.fragments):
        for key, idx in frags.items():
            frac = expected_fragment_fraction(
                cfg, bin(key.en_set).count("1"), bin(key.user_set).count("1")
            )
            expected = F * frac
            rel = abs(len(idx) - expected) / expected if expected >= MIN_EXPECTED_BITS else None
            rows.append(FragmentStat(j, key, len(idx), expected, len(idx) / F, frac, rel))
    return rows


def exact_fragment_moments(cfg: SystemConfig, key: FragmentKey) -> tuple[float, float]:
    """Mean and standard deviation of a fragment's size under exact-size sampling.

    Each node caches a uniform subset of exactly ``m = floor(mu*F)`` bits, so
    bit-membership indicators are exchangeable across bits; the variance of
    the count is ``F p (1-p) + F (F-1) (q - p^2)`` with ``q`` the probability
    that two given bits both carry the key's membership pattern.
    """
    F = cfg.file_bits
    p = q = 1.0
    for n_nodes, mask, mu in ((cfg.kt, key.en_set, cfg.mu_t), (cfg.kr, key.user_set, cfg.mu_r)):
        m = math.floor(mu * F)
        for i in range(n_nodes):
            if mask >> i & 1:
                p *= m / F
                q *= m * (m - 1) / (F * (F - 1))
            else:
                p *= (F - m) / F
                q *= (F - m) * (F - m - 1) / (F * (F - 1))
    var = F * p * (1 - p) + F * (F - 1) * (q - p * p)
    return F * p, math.sqrt(max(var, 0.0))


def write_stats_csv(rows, destination) -> None:
    """Columns: key_en_mask,key_user_mask,observed_bits,expected_bits,rel_error."""
    path = Path(destination)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key_en_mask", "key_user_mask", "observed_bits", "expected_bits", "rel_error"])
        for row in rows:
            rel = "" if row.rel_error is None else format(row.rel_error, ".12g")
            w.writerow([row.key.en_set, row.key.user_set, row.observed_bits,
                        format(row.expected_bits, ".12g"), rel])
