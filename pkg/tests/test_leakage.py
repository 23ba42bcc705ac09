import json
import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from sselab.corpus import InvertedIndex
from sselab.leakage import (
    AccessPattern,
    DefenseConfig,
    ObservationSequence,
    baseline_documents,
    ceil_log,
    obfuscate_index_clrz,
    observations_from_jsonl,
    observations_to_jsonl,
    overhead_percent,
    ppyy_pad_constant,
    returned_documents,
    sample_ppyy_pads,
    seal_pattern,
    setup_ppyy_volumes,
    simulate,
    tag_observations,
    tag_table_to_jsonl,
)
from sselab.trends import QueryLog


def index_from_rows(rows):
    m = np.asarray(rows, dtype=np.uint8)
    return InvertedIndex(m, m.shape[0])


def log_of(pairs, n_intervals):
    return QueryLog(np.asarray(pairs, dtype=np.int64), n_intervals)


class TestDefenseConfig:
    def test_factories(self):
        assert DefenseConfig.none().kind == "none"
        assert DefenseConfig.clrz(0.999, 0.1).fpr == 0.1
        assert DefenseConfig.ppyy(0.2).epsilon == 0.2
        assert DefenseConfig.seal(4, 2).oram_exponent == 4

    def test_validation(self):
        with pytest.raises(ValueError):
            DefenseConfig.clrz(0.5, 0.6)  # fpr >= tpr
        with pytest.raises(ValueError):
            DefenseConfig.ppyy(0.0)
        with pytest.raises(ValueError):
            DefenseConfig.seal(0, 1)
        with pytest.raises(ValueError):
            DefenseConfig("bogus")


class TestClrzObfuscation:
    def test_identity_at_perfect_rates(self, rng):
        index = index_from_rows(np.eye(6, 4, dtype=np.uint8))
        out = obfuscate_index_clrz(index, tpr=1.0, fpr=0.0, rng=rng)
        assert np.array_equal(out.matrix, index.matrix)

    def test_zero_column_flip_count_within_three_sigma(self):
        n_docs, fpr = 20_000, 0.05
        index = InvertedIndex(np.zeros((n_docs, 1), dtype=np.uint8), n_docs)
        out = obfuscate_index_clrz(index, 0.999, fpr, np.random.default_rng(4))
        weight = int(out.matrix.sum())
        sigma = math.sqrt(n_docs * fpr * (1 - fpr))
        assert abs(weight - n_docs * fpr) <= 3 * sigma

    def test_ones_kept_at_tpr(self):
        n_docs, tpr = 20_000, 0.9
        index = InvertedIndex(np.ones((n_docs, 1), dtype=np.uint8), n_docs)
        out = obfuscate_index_clrz(index, tpr, 0.0, np.random.default_rng(5))
        kept = int(out.matrix.sum())
        sigma = math.sqrt(n_docs * tpr * (1 - tpr))
        assert abs(kept - n_docs * tpr) <= 3 * sigma

    def test_deterministic_under_seed(self):
        index = index_from_rows(np.random.default_rng(0).integers(0, 2, size=(50, 600)))
        a = obfuscate_index_clrz(index, 0.95, 0.05, np.random.default_rng(1))
        b = obfuscate_index_clrz(index, 0.95, 0.05, np.random.default_rng(1))
        assert np.array_equal(a.matrix, b.matrix)


class TestPpyyVolumes:
    def test_pad_constant_high_precision(self):
        # ceil(1e-30-accurate value of 2(log 1000 + 64 log 2)) == 103
        getcontext().prec = 40
        exact = 2 * (Decimal(1000).ln() + 64 * Decimal(2).ln())
        assert math.ceil(ppyy_pad_constant(1.0, 1000)) == math.ceil(exact) == 103
        assert ppyy_pad_constant(1.0, 1000) == pytest.approx(float(exact), rel=1e-12)

    def test_zero_noise_pad_equals_ceiled_constant(self):
        pads = np.ceil(0.0 + ppyy_pad_constant(1.0, 1000))
        assert pads == 103.0

    def test_halving_epsilon_dominates(self):
        # same seed: underlying Laplace draws scale linearly, shift doubles
        a, _ = sample_ppyy_pads(5000, 1.0, 3000, np.random.default_rng(6))
        b, _ = sample_ppyy_pads(5000, 0.5, 3000, np.random.default_rng(6))
        assert np.all(b >= a)

    def test_padded_never_below_true_volume(self, rng):
        index = index_from_rows(np.random.default_rng(2).integers(0, 2, size=(30, 40)))
        padded, losses = setup_ppyy_volumes(index, 1.0, 40, rng)
        assert losses == 0
        assert np.all(padded >= index.column_counts())

    def test_rejects_bad_epsilon(self, rng):
        with pytest.raises(ValueError):
            setup_ppyy_volumes(index_from_rows([[1]]), 0.0, 1, rng)


class TestSealPattern:
    def test_padded_volume_examples(self):
        assert seal_pattern(set(range(5)), 100, 0, 2).volume == 8
        assert seal_pattern(set(range(17)), 100, 0, 4).volume == 64
        assert seal_pattern(set(range(16)), 100, 0, 4).volume == 16
        assert seal_pattern(set(), 100, 0, 2).volume == 1

    def test_block_quantization(self):
        # 100 docs in 2^3 = 8 blocks: block size ceil(100/8) = 13
        p = seal_pattern({0, 12, 13, 99}, 100, 3, 2)
        assert p.blocks == (0, 1, 7)
        assert max(p.blocks) < 2**3

    def test_volume_bounds_invariant(self):
        for x in (2, 3, 4):
            for v in range(0, 300):
                padded = seal_pattern(set(range(v)), 1000, 0, x).volume
                assert padded >= v
                assert padded < x * max(v, 1)

    def test_ceil_log_exact_powers(self):
        assert ceil_log(16, 4) == 2
        assert ceil_log(17, 4) == 3
        assert ceil_log(1, 2) == 0

    def test_rejects_large_exponent(self):
        with pytest.raises(ValueError):
            seal_pattern({0}, 100, 20, 2)


class TestSimulate:
    def test_repeated_keyword_identical_patterns(self, rng):
        index = index_from_rows([[1, 0], [1, 1], [0, 1]])
        queries = log_of([[0, 0], [0, 1], [1, 0]], 2)
        obs = simulate(queries, index, DefenseConfig.none(), rng)
        assert obs.records[0][1] == obs.records[2][1]
        assert obs.records[0][1] is obs.records[2][1]

    def test_identical_document_sets_collide(self, rng):
        index = index_from_rows([[1, 1], [1, 1]])
        queries = log_of([[0, 0], [0, 1]], 1)
        obs = simulate(queries, index, DefenseConfig.none(), rng)
        assert obs.records[0][1] == obs.records[1][1]

    def test_ppyy_distinct_keywords_never_collide(self):
        index = index_from_rows([[1, 1], [1, 1], [0, 0]])  # equal true volumes
        queries = log_of([[0, 0], [0, 1]], 1)
        obs = simulate(queries, index, DefenseConfig.ppyy(1.0), np.random.default_rng(3))
        assert obs.records[0][1] != obs.records[1][1]

    def test_patterns_match_defense_kind(self, rng):
        index = index_from_rows([[1, 0], [0, 1]])
        queries = log_of([[0, 0]], 1)
        assert simulate(queries, index, DefenseConfig.none(), rng).records[0][1].kind == "docs"
        assert (
            simulate(queries, index, DefenseConfig.ppyy(1.0), np.random.default_rng(0))
            .records[0][1]
            .kind
            == "ppyy"
        )
        assert (
            simulate(queries, index, DefenseConfig.seal(1, 2), rng).records[0][1].kind == "seal"
        )

    def test_rejects_out_of_range_keyword(self, rng):
        index = index_from_rows([[1]])
        with pytest.raises(ValueError):
            simulate(log_of([[0, 3]], 1), index, DefenseConfig.none(), rng)

    @pytest.mark.parametrize(
        "defense",
        [
            DefenseConfig.none(),
            DefenseConfig.clrz(0.9, 0.2),
            DefenseConfig.ppyy(1.0),
            DefenseConfig.seal(2, 2),
        ],
        ids=["none", "clrz", "ppyy", "seal"],
    )
    def test_search_pattern_leaks_under_every_defense(self, defense):
        # repeated queries for one keyword always produce the same pattern
        index = index_from_rows(np.random.default_rng(0).integers(0, 2, size=(16, 3)))
        queries = log_of([[0, 1], [0, 2], [1, 1], [1, 1]], 2)
        obs = simulate(queries, index, defense, np.random.default_rng(1))
        assert obs.records[0][1] == obs.records[2][1] == obs.records[3][1]


class TestTagObservations:
    def test_tags_by_first_appearance(self, rng):
        index = index_from_rows([[1, 0], [0, 1]])
        queries = log_of([[0, 0], [0, 1], [0, 0]], 1)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        assert table.m == 2
        assert table.tag_counts.tolist() == [2, 1]
        assert table.truth.tolist() == [0, 1]

    def test_frequency_column(self, rng):
        index = index_from_rows([[1, 0], [0, 1]])
        queries = log_of([[0, 0], [0, 0], [0, 0], [0, 1]], 1)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        assert table.freq[:, 0].tolist() == [0.75, 0.25]
        assert table.counts.tolist() == [4]

    def test_empty_interval_frequencies_are_zero(self, rng):
        index = index_from_rows([[1]])
        queries = log_of([[1, 0]], 3)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        assert table.freq[:, 0].tolist() == [0.0]
        assert table.freq[:, 2].tolist() == [0.0]
        assert table.freq[0, 1] == 1.0

    def test_cooccurrence_example(self):
        a = AccessPattern(kind="docs", volume=2, doc_ids=(1, 2))
        b = AccessPattern(kind="docs", volume=2, doc_ids=(2, 3))
        obs = ObservationSequence([(0, a), (0, b)], n_docs=4, n_intervals=1)
        table = tag_observations(obs)
        assert table.cooccurrence[0, 1] == 0.25
        assert np.allclose(np.diag(table.cooccurrence), table.volumes)

    def test_cooccurrence_unavailable_for_volume_only_kinds(self, rng):
        index = index_from_rows([[1, 0], [0, 1]])
        queries = log_of([[0, 0], [0, 1]], 1)
        ppyy = tag_observations(simulate(queries, index, DefenseConfig.ppyy(1.0), rng))
        assert ppyy.cooccurrence is None
        seal = tag_observations(simulate(queries, index, DefenseConfig.seal(0, 2), rng))
        assert seal.cooccurrence is None

    def test_collision_truth_keeps_first_keyword(self, rng):
        index = index_from_rows([[1, 1], [1, 1]])
        queries = log_of([[0, 1], [0, 0]], 1)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        assert table.m == 1
        assert table.truth.tolist() == [1]
        assert table.tag_counts.tolist() == [2]

    def test_frequency_columns_sum_to_one_when_queried(self, rng):
        index = index_from_rows(np.random.default_rng(1).integers(0, 2, size=(20, 8)))
        queries = log_of([[k % 5, k % 8] for k in range(40)], 5)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        sums = table.freq.sum(axis=0)
        assert np.allclose(sums[table.counts > 0], 1.0, atol=1e-9)

    def test_rejects_empty_observations(self):
        with pytest.raises(ValueError):
            tag_observations(ObservationSequence([], 4, 1))

    def test_truth_injective_when_document_sets_distinct(self, rng):
        index = index_from_rows(np.eye(8, 6, dtype=np.uint8))
        queries = log_of([[k % 3, k % 6] for k in range(30)], 3)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        assert table.m == 6
        assert len(set(table.truth.tolist())) == table.m

    def test_raw_volume_equals_clean_column_sum(self, rng):
        matrix = np.random.default_rng(6).integers(0, 2, size=(30, 5)).astype(np.uint8)
        index = index_from_rows(matrix)
        queries = log_of([[0, j] for j in range(5)], 1)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        for tag in range(table.m):
            kw = table.truth[tag]
            assert table.raw_volumes[tag] == matrix[:, kw].sum()


class TestOverhead:
    def test_no_defense_is_zero(self):
        assert overhead_percent(100, 100) == 0.0

    def test_five_times_is_400(self):
        assert overhead_percent(500, 100) == 400.0

    def test_rejects_zero_baseline(self):
        with pytest.raises(ValueError):
            overhead_percent(10, 0)

    def test_document_totals(self, rng):
        index = index_from_rows([[1, 0], [1, 1], [0, 1]])
        queries = log_of([[0, 0], [0, 1], [0, 1]], 1)
        assert baseline_documents(queries, index) == 2 + 2 + 2
        obs = simulate(queries, index, DefenseConfig.none(), rng)
        assert returned_documents(obs) == 6

    def test_padded_volumes_counted_for_seal(self, rng):
        index = index_from_rows([[1], [1], [1]])  # true volume 3
        queries = log_of([[0, 0]], 1)
        obs = simulate(queries, index, DefenseConfig.seal(0, 2), rng)
        assert returned_documents(obs) == 4  # padded to next power of two


class TestObservationSerialization:
    def test_jsonl_round_trip(self, rng, tmp_path):
        index = index_from_rows([[1, 0], [0, 1]])
        queries = log_of([[0, 0], [1, 1], [1, 0]], 2)
        obs = simulate(queries, index, DefenseConfig.none(), rng)
        path = tmp_path / "obs.jsonl"
        observations_to_jsonl(obs, path)
        loaded = observations_from_jsonl(path)
        assert loaded.records == obs.records
        assert np.array_equal(loaded.truth_keywords, obs.truth_keywords)
        assert loaded.n_docs == obs.n_docs

    def test_replay_reproduces_tag_table(self, rng, tmp_path):
        index = index_from_rows(np.random.default_rng(3).integers(0, 2, size=(12, 4)))
        queries = log_of([[k % 2, k % 4] for k in range(10)], 2)
        obs = simulate(queries, index, DefenseConfig.none(), rng)
        path = tmp_path / "obs.jsonl"
        observations_to_jsonl(obs, path)
        a = tag_observations(obs)
        b = tag_observations(observations_from_jsonl(path))
        assert np.array_equal(a.freq, b.freq)
        assert np.array_equal(a.truth, b.truth)

    def test_tag_table_dump(self, rng, tmp_path):
        index = index_from_rows([[1, 0], [0, 1], [1, 1]])
        queries = log_of([[0, 0], [0, 1], [1, 0]], 2)
        table = tag_observations(simulate(queries, index, DefenseConfig.none(), rng))
        path = tmp_path / "tags.jsonl"
        tag_table_to_jsonl(table, path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert lines[0]["m"] == table.m
        assert len(lines) == 1 + table.m
        assert lines[1]["count"] == int(table.tag_counts[0])
