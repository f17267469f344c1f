"""Referral forest construction, branching growth, and the pair-distance
spectrum behind the variance generating function."""

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from netsample import (
    NumericError,
    OffspringSpec,
    ParseError,
    ReferralForest,
    ValidationError,
    bfs_prefix,
    distance_spectrum,
    g_eval,
    g_lower_bounds,
    gen_gw_tree,
    gen_m_tree,
    load_tree,
    save_tree,
    threshold_params,
    tree_stats,
)


def oracle_spectrum(forest):
    """Distance counts straight from all-pairs BFS on the tree graph."""
    n = forest.n
    ps, cs = forest.edges()
    if len(cs):
        adj = csr_matrix(
            (np.ones(2 * len(cs)), (np.r_[ps, cs], np.r_[cs, ps])), shape=(n, n)
        )
    else:
        adj = csr_matrix((n, n))
    d = shortest_path(adj, method="D", unweighted=True)
    finite = d[np.isfinite(d)].astype(np.int64)
    counts = np.bincount(finite)
    infinite = n * n - len(finite)
    return counts, infinite


def assert_same_spectrum(forest):
    ds = distance_spectrum(forest)
    counts, infinite = oracle_spectrum(forest)
    assert ds.infinite_pairs == infinite
    a, b = ds.counts, counts
    width = max(len(a), len(b))
    assert np.array_equal(
        np.pad(a, (0, width - len(a))), np.pad(b, (0, width - len(b)))
    )
    assert ds.counts.sum() + ds.infinite_pairs == forest.n**2


class TestForestBasics:
    def test_m_tree_size_and_generations(self):
        t = gen_m_tree(2, 4)
        assert t.n == 31
        assert np.array_equal(t.generation_sizes(), [1, 2, 4, 8, 16])
        assert t.height == 4

    def test_m_one_is_a_chain(self):
        t = gen_m_tree(1, 5)
        assert t.n == 6
        assert np.array_equal(t.parent, [-1, 0, 1, 2, 3, 4])

    def test_m_tree_validation(self):
        with pytest.raises(ValidationError):
            gen_m_tree(0, 3)
        with pytest.raises(ValidationError):
            gen_m_tree(2, -1)
        with pytest.raises(ValidationError):
            gen_m_tree(2, 40)  # over the node cap

    def test_bfs_order_parents_first(self):
        t = gen_gw_tree(OffspringSpec.shifted_binomial(1, 2, 0.5), min_size=60, seed=5)
        order = t.bfs_order
        pos = np.empty(t.n, dtype=int)
        pos[order] = np.arange(t.n)
        for v in range(t.n):
            if t.parent[v] >= 0:
                assert pos[t.parent[v]] < pos[v]
        assert np.all(np.diff(t.depth[order]) >= 0)

    def test_cycle_detection(self):
        with pytest.raises(ValidationError, match="cycle"):
            ReferralForest(parent=np.array([1, 2, 0, -1]))

    def test_parent_out_of_range(self):
        with pytest.raises(ValidationError):
            ReferralForest(parent=np.array([-1, 7]))

    def test_forest_needs_a_root(self):
        with pytest.raises(ValidationError):
            ReferralForest(parent=np.array([], dtype=np.int64))


class TestTreeIO:
    def test_round_trip_keeps_labels(self, tmp_path):
        t = ReferralForest(
            parent=np.array([-1, 0, 0, 1, -1]),
            labels=np.array([10, 20, 30, 40, 99]),
        )
        path = tmp_path / "t.csv"
        save_tree(t, path)
        back = load_tree(path)
        assert np.array_equal(back.labels, [10, 20, 30, 40, 99])
        assert np.array_equal(back.parent, t.parent)

    def test_loads_without_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("5,-1\n6,5\n7,5\n")
        t = load_tree(path)
        assert t.n == 3 and np.array_equal(t.labels, [5, 6, 7])

    def test_orphan_parent_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("node,parent\n1,-1\n2,9\n")
        with pytest.raises(ValidationError, match="unknown parent"):
            load_tree(path)

    def test_duplicate_node_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,-1\n2,1\n2,1\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_tree(path)

    def test_cycle_in_file_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,2\n2,1\n")
        with pytest.raises(ValidationError, match="cycle"):
            load_tree(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,-1\n2,1,extra\n")
        with pytest.raises(ParseError, match="line 2"):
            load_tree(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("node,parent\n")
        with pytest.raises(ValidationError):
            load_tree(path)


class TestOffspring:
    @pytest.mark.parametrize(
        "text,mean",
        [
            ("2", 2.0),
            ("1+binomial(2,0.5)", 2.0),
            ("binomial(3,0.4)", 1.2),
            ("pmf:0.5,0.2,0.3", 0.8),
        ],
    )
    def test_parse_and_mean(self, text, mean):
        spec = OffspringSpec.parse(text)
        assert spec.mean == pytest.approx(mean)
        assert OffspringSpec.parse(str(spec)) == spec

    def test_parse_rejects_garbage(self):
        for bad in ("", "two", "binomial(2)", "pmf:0.5,0.6"):
            with pytest.raises(ValidationError):
                OffspringSpec.parse(bad)

    def test_pmf_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            OffspringSpec.from_pmf([0.5, 0.4])

    def test_sampling_matches_pmf(self):
        spec = OffspringSpec.from_pmf([0.25, 0.5, 0.25])
        rng = np.random.default_rng(0)
        draws = spec.sample(rng, 20000)
        assert abs(draws.mean() - 1.0) < 0.03
        assert set(np.unique(draws)) <= {0, 1, 2}


class TestBranchingGrowth:
    def test_deterministic_equals_m_tree(self):
        grown = gen_gw_tree(OffspringSpec.deterministic(2), height=4, seed=3)
        assert np.array_equal(grown.parent, gen_m_tree(2, 4).parent)

    def test_min_size_stops_on_whole_generation(self):
        spec = OffspringSpec.deterministic(3)
        t = gen_gw_tree(spec, min_size=10, seed=1)
        # generations 1, 3, 9 -> stops at 13 nodes, never mid-generation
        assert t.n == 13

    def test_same_seed_same_tree(self):
        spec = OffspringSpec.shifted_binomial(1, 2, 0.5)
        a = gen_gw_tree(spec, min_size=200, seed=11, replicate=4)
        b = gen_gw_tree(spec, min_size=200, seed=11, replicate=4)
        c = gen_gw_tree(spec, min_size=200, seed=11, replicate=5)
        assert np.array_equal(a.parent, b.parent)
        assert not np.array_equal(a.parent, c.parent) or a.n != c.n

    def test_extinction_is_resampled(self):
        # mean 1.0 offspring dies out often; regrowth must still hit the target
        spec = OffspringSpec.shifted_binomial(0, 2, 0.5)
        t = gen_gw_tree(spec, min_size=40, seed=7)
        assert t.n >= 40
        assert t.meta["discards"] >= 0

    def test_hopeless_growth_raises(self):
        spec = OffspringSpec.from_pmf([0.9, 0.1])  # mean 0.1
        with pytest.raises(NumericError, match="extinct"):
            gen_gw_tree(spec, min_size=50, seed=0, max_discards=20)

    def test_height_rule_permits_extinction(self):
        spec = OffspringSpec.from_pmf([1.0])  # nobody refers anyone
        t = gen_gw_tree(spec, height=5, seed=0)
        assert t.n == 1

    def test_stop_rules_are_exclusive(self):
        spec = OffspringSpec.deterministic(2)
        with pytest.raises(ValidationError):
            gen_gw_tree(spec, height=3, min_size=10)
        with pytest.raises(ValidationError):
            gen_gw_tree(spec)

    def test_node_cap(self):
        with pytest.raises(ValidationError, match="cap"):
            gen_gw_tree(OffspringSpec.deterministic(3), height=30, node_cap=1000)


class TestPrefix:
    def test_prefix_is_parent_closed(self):
        t = gen_gw_tree(OffspringSpec.shifted_binomial(1, 2, 0.5), min_size=120, seed=9)
        sub = bfs_prefix(t, 50)
        assert sub.n == 50
        assert np.all(sub.parent < np.arange(50))
        # labels point back at the original ids in canonical order
        assert np.array_equal(sub.labels, t.labels[t.bfs_order[:50]])

    def test_prefix_bounds(self):
        t = gen_m_tree(2, 2)
        with pytest.raises(ValidationError):
            bfs_prefix(t, 0)
        with pytest.raises(ValidationError):
            bfs_prefix(t, 8)
        assert bfs_prefix(t, t.n).n == t.n


class TestDistanceSpectrum:
    def test_two_node_tree_by_hand(self):
        ds = distance_spectrum(ReferralForest(parent=np.array([-1, 0])))
        assert np.array_equal(ds.counts, [2, 2])
        assert ds.infinite_pairs == 0
        assert g_eval(ds, 0.5) == pytest.approx((2 + 2 * 0.5) / 4)

    def test_chain_counts_by_hand(self):
        # path on 4 nodes: c_d = 2*(4-d) for d >= 1
        ds = distance_spectrum(gen_m_tree(1, 3))
        assert np.array_equal(ds.counts, [4, 6, 4, 2])

    def test_matches_bfs_oracle_on_random_trees(self):
        spec = OffspringSpec.shifted_binomial(1, 3, 0.35)
        for i in range(25):
            t = gen_gw_tree(spec, min_size=20 + 4 * i, seed=100, replicate=i)
            assert_same_spectrum(bfs_prefix(t, min(t.n, 120)))

    def test_matches_oracle_on_shaped_trees(self):
        for t in (gen_m_tree(1, 9), gen_m_tree(5, 1), gen_m_tree(2, 5)):
            assert_same_spectrum(t)

    def test_forest_infinite_pairs(self):
        f = ReferralForest(parent=np.array([-1, 0, -1]))
        ds = distance_spectrum(f)
        assert ds.infinite_pairs == 9 - (4 + 1)
        assert ds.mean_distance == np.inf
        # z = 1 returns the probability two uniform draws share a component
        assert g_eval(ds, 1.0) == pytest.approx(5 / 9)

    def test_single_node(self):
        ds = distance_spectrum(ReferralForest(parent=np.array([-1])))
        assert np.array_equal(ds.counts, [1])
        assert g_eval(ds, 0.3) == 1.0


class TestGFunction:
    def test_endpoint_identities(self):
        t = gen_gw_tree(OffspringSpec.shifted_binomial(1, 2, 0.5), min_size=80, seed=2)
        ds = distance_spectrum(t)
        assert g_eval(ds, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert g_eval(ds, 0.0) == pytest.approx(1.0 / t.n, abs=1e-15)

    def test_monotone_on_unit_interval(self):
        ds = distance_spectrum(gen_m_tree(3, 4))
        zs = np.linspace(0, 1, 40)
        vals = g_eval(ds, zs)
        assert np.all(np.diff(vals) >= -1e-15)

    def test_domain_guard(self):
        ds = distance_spectrum(gen_m_tree(2, 2))
        with pytest.raises(ValidationError):
            g_eval(ds, 1.0001)
        # negative arguments down to -1 are legitimate (bipartite chains)
        assert -1.0 <= g_eval(ds, -1.0) <= 1.0

    def test_vectorized_eval(self):
        ds = distance_spectrum(gen_m_tree(2, 3))
        zs = np.array([0.0, 0.25, 0.5])
        vals = g_eval(ds, zs)
        assert vals.shape == (3,)
        assert vals[0] == pytest.approx(1 / 15)


class TestThreshold:
    def test_supercritical_textbook_numbers(self):
        tp = threshold_params(3.0, 0.8)
        assert tp.beta == pytest.approx(0.8**-2)
        assert tp.regime == "super-critical"
        assert tp.predicted_exponent == pytest.approx(
            1 - np.log(0.8**-2) / np.log(3), abs=1e-12
        )
        assert 0.59 < tp.predicted_exponent < 0.60

    def test_subcritical_has_zero_exponent(self):
        tp = threshold_params(1.2, 0.8)
        assert tp.regime == "sub-critical"
        assert tp.predicted_exponent == 0.0

    def test_critical_point(self):
        tp = threshold_params(0.8**-2, 0.8)
        assert tp.regime == "critical"

    def test_validation(self):
        with pytest.raises(ValidationError):
            threshold_params(1.0, 0.5)
        with pytest.raises(ValidationError):
            threshold_params(2.0, 0.0)
        with pytest.raises(ValidationError):
            threshold_params(2.0, 1.0)


class TestStatsAndBounds:
    def test_chain_diameter(self):
        st = tree_stats(gen_m_tree(1, 9))
        assert st.diameter == 9
        assert st.height == 9

    def test_star_diameter(self):
        st = tree_stats(gen_m_tree(5, 1))
        assert st.diameter == 2

    def test_m_tree_is_perfectly_balanced(self):
        st = tree_stats(gen_m_tree(3, 4), m=3.0)
        assert np.allclose(st.growth_ratios, 1.0)
        assert np.allclose(st.c_tau, 1.0)
        assert np.allclose(st.second_moments, 1.0)

    def test_forest_stats_recurse(self):
        f = ReferralForest(parent=np.array([-1, 0, 1, -1, 3]))
        st = tree_stats(f)
        assert len(st.per_component) == 2
        assert st.diameter == 2

    def test_bound_chain_single_tree(self):
        t = gen_gw_tree(OffspringSpec.shifted_binomial(1, 2, 0.5), min_size=60, seed=4)
        ds = distance_spectrum(t)
        st = tree_stats(t)
        for z in (0.1, 0.5, 0.9):
            out = g_lower_bounds(st, ds, z)
            assert out["g"] >= out["z_pow_mean_dist"] - 1e-12
            assert out["z_pow_mean_dist"] >= out["z_pow_diameter"] - 1e-12
            assert out["z_pow_mean_dist"] >= out["z_pow_twice_mean_depth"] - 1e-12
            assert out["g"] >= out["one_over_n"] - 1e-12

    def test_forest_bounds_only_floor(self):
        f = ReferralForest(parent=np.array([-1, 0, -1]))
        out = g_lower_bounds(tree_stats(f), distance_spectrum(f), 0.5)
        assert set(out) == {"g", "one_over_n"}

    def test_bounds_domain(self):
        t = gen_m_tree(2, 2)
        with pytest.raises(ValidationError):
            g_lower_bounds(tree_stats(t), distance_spectrum(t), 1.0)
