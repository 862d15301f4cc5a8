import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from trustnet.errors import DataError, ParseError, SamplingError
from trustnet.graph import (
    HIGH,
    LOW,
    build_graph,
    degree_class,
    graph_from_dense,
    load_graph,
    parse_edge_list,
    sample_negative_pair,
    sample_negative_pairs,
    split_edges,
    write_edge_list,
)
from trustnet.numerics import make_rng

edge_lists = st.lists(
    st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda p: p[0] != p[1]),
    min_size=1,
    max_size=120,
)


class TestParseEdgeList:
    def test_two_lines_with_comment(self):
        result = parse_edge_list("3 7\n# c\n7 3\n")
        assert result.pairs == [(3, 7), (7, 3)]
        assert result.self_loops_skipped == 0

    def test_self_loop_skipped_and_counted(self):
        result = parse_edge_list("5,5\n")
        assert result.pairs == []
        assert result.self_loops_skipped == 1

    def test_non_integer_token(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_edge_list("a b\n")

    def test_wrong_token_count(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_edge_list("1 2\n1 2 3\n")
        with pytest.raises(ParseError):
            parse_edge_list("7\n")

    def test_comma_separator(self):
        assert parse_edge_list("1,2\n3 , 4\n").pairs == [(1, 2), (3, 4)]

    def test_blank_lines_ignored(self):
        assert parse_edge_list("\n1 2\n\n  \n2 3\n").pairs == [(1, 2), (2, 3)]

    def test_error_line_number_counts_all_lines(self):
        with pytest.raises(ParseError, match="line 4"):
            parse_edge_list("# header\n1 2\n\nbad line here\n")

    def test_accepts_file_object(self):
        assert parse_edge_list(io.StringIO("4 5\n")).pairs == [(4, 5)]


class TestBuildGraph:
    def test_dedup_and_bijective_remap(self):
        g = build_graph([(10, 20), (20, 10), (10, 20)])
        assert g.n == 2
        assert g.num_edges == 2
        assert g.duplicates_dropped == 1
        np.testing.assert_array_equal(g.out_degree, [1, 1])
        assert sorted(int(r) for r in g.raw_ids) == [10, 20]
        assert g.raw_to_dense[10] == 0 and g.raw_to_dense[20] == 1

    def test_star_graph(self):
        g = build_graph([(1, 2), (1, 3), (1, 4)])
        center = g.raw_to_dense[1]
        assert g.out_degree[center] == 3
        assert g.in_degree[center] == 0

    def test_empty_input(self):
        with pytest.raises(DataError):
            build_graph([])

    def test_negative_raw_id_rejected(self):
        with pytest.raises(DataError):
            build_graph([(-1, 2)])

    def test_first_appearance_order(self):
        g = build_graph([(100, 7), (7, 3)])
        assert [int(r) for r in g.raw_ids] == [100, 7, 3]

    def test_has_edge_consistent_with_edges(self):
        g = build_graph([(0, 1), (1, 2), (2, 0)])
        assert g.has_edge(0, 1) and g.has_edge(1, 2) and g.has_edge(2, 0)
        assert not g.has_edge(1, 0) and not g.has_edge(0, 2)

    def test_adjacency_matches_edges(self):
        g = build_graph([(0, 1), (0, 2), (2, 1)])
        assert sorted(g.out_adj[0].tolist()) == [1, 2]
        assert sorted(g.in_adj[g.raw_to_dense[1]].tolist()) == [0, g.raw_to_dense[2]]

    @given(edge_lists)
    @settings(max_examples=100, deadline=None)
    def test_degree_sums_equal_edge_count(self, pairs):
        g = build_graph(pairs)
        assert int(g.in_degree.sum()) == g.num_edges
        assert int(g.out_degree.sum()) == g.num_edges
        assert len(g.edge_set()) == g.num_edges  # no duplicates survive

    @given(edge_lists)
    @settings(max_examples=50, deadline=None)
    def test_membership_matches_edge_set(self, pairs):
        g = build_graph(pairs)
        edge_set = g.edge_set()
        for r in range(g.n):
            for s in range(g.n):
                assert g.has_edge(r, s) == ((r, s) in edge_set)


class TestRoundTrip:
    def test_parse_build_serialize_parse(self, tmp_path):
        g = build_graph([(10, 20), (20, 30), (30, 10), (10, 30)])
        path = tmp_path / "edges.txt"
        write_edge_list(path, g)
        g2 = load_graph(path)
        assert g2.edge_set() == g.edge_set()
        np.testing.assert_array_equal(g2.raw_ids, g.raw_ids)
        np.testing.assert_array_equal(g2.edges, g.edges)


class TestSplitEdges:
    @pytest.fixture
    def ten_edge_graph(self):
        return build_graph([(i, i + 1) for i in range(10)])

    def test_sizes_and_disjointness(self, ten_edge_graph):
        split = split_edges(ten_edge_graph, 0.8, seed=0)
        assert split.train.shape[0] == 8
        assert split.test.shape[0] == 2
        assert split.train_set().isdisjoint(split.test_set())
        assert split.train_set() | split.test_set() == ten_edge_graph.edge_set()

    def test_deterministic(self, ten_edge_graph):
        a = split_edges(ten_edge_graph, 0.8, seed=42)
        b = split_edges(ten_edge_graph, 0.8, seed=42)
        np.testing.assert_array_equal(a.train, b.train)
        np.testing.assert_array_equal(a.test, b.test)

    def test_different_seeds_differ(self, ten_edge_graph):
        a = split_edges(ten_edge_graph, 0.5, seed=1)
        b = split_edges(ten_edge_graph, 0.5, seed=2)
        assert a.train_set() != b.train_set()

    def test_invalid_ratio(self, ten_edge_graph):
        for ratio in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(DataError):
                split_edges(ten_edge_graph, ratio, seed=0)

    @given(edge_lists, st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, pairs, seed):
        g = build_graph(pairs)
        if g.num_edges < 2:
            return
        split = split_edges(g, 0.8, seed)
        assert split.train.shape[0] == round(0.8 * g.num_edges)
        assert split.train_set().isdisjoint(split.test_set())
        assert split.train_set() | split.test_set() == g.edge_set()


class TestNegativeSampling:
    def test_complete_graph_infeasible(self):
        g = build_graph([(0, 1), (1, 0)])
        with pytest.raises(SamplingError):
            sample_negative_pair(g, make_rng(0))

    def test_three_user_single_edge_support(self):
        # one edge (0,1) on three users: exactly five admissible non-edges
        g = graph_from_dense(3, [(0, 1)])
        allowed = {(1, 0), (0, 2), (2, 0), (1, 2), (2, 1)}
        seen = set()
        rng = make_rng(5)
        for _ in range(300):
            pair = sample_negative_pair(g, rng)
            assert pair in allowed
            seen.add(pair)
        assert seen == allowed  # 300 draws over 5 cells miss nothing, seeded

    def test_uniformity_chi_square(self):
        # exact enumeration of non-edges is the oracle distribution
        g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
        non_edges = sorted(
            (r, s)
            for r in range(g.n)
            for s in range(g.n)
            if r != s and not g.has_edge(r, s)
        )
        index = {pair: i for i, pair in enumerate(non_edges)}
        draws = 100_000
        sampled = sample_negative_pairs(g, make_rng(99), draws)
        counts = np.zeros(len(non_edges), dtype=np.int64)
        for r, s in sampled:
            counts[index[(int(r), int(s))]] += 1
        assert counts.sum() == draws
        _, p_value = stats.chisquare(counts)
        assert p_value > 1e-3

    def test_vectorized_never_returns_edges_or_self_pairs(self):
        g = build_graph([(0, 1), (1, 2), (2, 0), (3, 1)])
        sampled = sample_negative_pairs(g, make_rng(1), 50_000)
        assert not np.any(sampled[:, 0] == sampled[:, 1])
        assert not np.any(g.has_edges(sampled[:, 0], sampled[:, 1]))

    def test_vectorized_pools_respected(self):
        g = build_graph([(0, 1), (1, 2), (2, 3), (3, 4)])
        trustor_pool = np.array([0, 1], dtype=np.int32)
        trustee_pool = np.array([3, 4], dtype=np.int32)
        sampled = sample_negative_pairs(g, make_rng(2), 1000, trustor_pool, trustee_pool)
        assert set(np.unique(sampled[:, 0])) <= {0, 1}
        assert set(np.unique(sampled[:, 1])) <= {3, 4}

    def test_vectorized_infeasible(self):
        g = build_graph([(0, 1), (1, 0)])
        with pytest.raises(SamplingError):
            sample_negative_pairs(g, make_rng(0), 10)

    def test_scalar_deterministic(self):
        g = build_graph([(0, 1), (1, 2), (2, 0)])
        assert sample_negative_pair(g, make_rng(3)) == sample_negative_pair(g, make_rng(3))


class TestDegreeClass:
    def test_paper_threshold(self):
        assert degree_class(4, 5) == LOW

    def test_boundary_is_high(self):
        assert degree_class(5, 5) == HIGH

    def test_zero_degree(self):
        assert degree_class(0) == LOW

    def test_default_threshold_is_five(self):
        assert degree_class(4) == LOW
        assert degree_class(5) == HIGH

    def test_validation(self):
        with pytest.raises(ValueError):
            degree_class(-1)
        with pytest.raises(ValueError):
            degree_class(3, threshold=0)
