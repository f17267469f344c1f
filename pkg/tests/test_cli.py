"""Recipe files, experiment runners, and the command line front end."""

import io
import os

import numpy as np
import pandas as pd
import pytest

from netsample import (
    NodeFeature,
    ParseError,
    ValidationError,
    load_recipe,
    run_fig3_blog_de,
    run_fig5_gcurves,
    run_recipe,
    save_edge_list,
    save_node_feature,
)
from netsample.cli_experiments import main

from conftest import complete_graph, star_graph

RECIPES = os.path.join(os.path.dirname(__file__), "..", "recipes")


def read_run_csv(path):
    """Parse one of our provenance-headed CSVs."""
    return pd.read_csv(path, comment="#")


def provenance_lines(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].partition(" = ")
            out[key] = value.strip()
    return out


def write_gcurve_recipe(tmp_path, name="curves", heights="4, 6, 10",
                        grid="0.25, 0.5, 0.75", extra=""):
    path = tmp_path / f"{name}.ini"
    path.write_text(
        "[recipe]\n"
        "kind = g_curves\n"
        f"name = {name}\n"
        "seed = 9\n\n"
        "[trees]\n"
        f"two_tree_heights = {heights}\n"
        f"{extra}\n"
        "[grid]\n"
        f"lambda2_grid = {grid}\n"
    )
    return path


class TestRecipeLoading:
    def test_valid_recipe_round_trip(self, tmp_path):
        path = write_gcurve_recipe(tmp_path)
        recipe = load_recipe(path)
        assert recipe.kind == "g_curves"
        assert recipe.name == "curves"
        assert recipe.seed == 9
        assert len(recipe.sha256) == 64
        assert recipe.require("trees", "two_tree_heights")
        assert recipe.get("missing", "key", "fallback") == "fallback"
        with pytest.raises(ValidationError, match="missing"):
            recipe.require("trees", "nope")

    def test_name_defaults_to_file_stem(self, tmp_path):
        path = tmp_path / "stem_test.ini"
        path.write_text("[recipe]\nkind = g_curves\n[trees]\ntwo_tree_heights = 3\n")
        assert load_recipe(path).name == "stem_test"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="cannot read"):
            load_recipe(tmp_path / "nope.ini")

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "r.ini"
        path.write_text("[recipe]\nkind = sorcery\n")
        with pytest.raises(ValidationError, match="kind"):
            load_recipe(path)

    def test_bad_ini_syntax(self, tmp_path):
        path = tmp_path / "r.ini"
        path.write_text("kind = g_curves\nno section header")
        with pytest.raises(ParseError):
            load_recipe(path)

    def test_non_integer_seed(self, tmp_path):
        path = tmp_path / "r.ini"
        path.write_text("[recipe]\nkind = g_curves\nseed = soon\n")
        with pytest.raises(ParseError, match="seed"):
            load_recipe(path)


class TestGCurves:
    def test_output_shape_and_monotonicity(self, tmp_path):
        recipe = load_recipe(write_gcurve_recipe(tmp_path))
        paths = run_fig5_gcurves(recipe, out_dir=tmp_path)
        assert len(paths) == 1
        df = read_run_csv(paths[0])
        assert list(df.columns) == ["tree", "n", "lambda2", "g", "n_g"]
        assert set(df.tree) == {"2tree_h4", "2tree_h6", "2tree_h10"}
        for _, sub in df.groupby("tree"):
            vals = sub.sort_values("lambda2").g.to_numpy()
            assert np.all(np.diff(vals) >= -1e-15)

    def test_deep_tree_curve_stays_within_factor_two(self, tmp_path):
        recipe = load_recipe(write_gcurve_recipe(tmp_path, heights="6, 10"))
        df = read_run_csv(run_fig5_gcurves(recipe, out_dir=tmp_path)[0])
        at_half = df[df.lambda2 == 0.5].set_index("tree").n_g
        ratio = at_half["2tree_h10"] / at_half["2tree_h6"]
        assert ratio <= 2.0

    def test_provenance_header(self, tmp_path):
        recipe = load_recipe(write_gcurve_recipe(tmp_path))
        path = run_fig5_gcurves(recipe, out_dir=tmp_path)[0]
        prov = provenance_lines(path)
        assert prov["recipe"] == "curves"
        assert prov["recipe_sha256"] == recipe.sha256
        assert prov["seed"] == "9"

    def test_rerun_is_byte_identical(self, tmp_path):
        recipe = load_recipe(write_gcurve_recipe(tmp_path))
        a = open(run_fig5_gcurves(recipe, out_dir=tmp_path / "a")[0], "rb").read()
        b = open(run_fig5_gcurves(recipe, out_dir=tmp_path / "b")[0], "rb").read()
        assert a == b

    def test_unreadable_tree_file_is_skipped(self, tmp_path, capsys):
        tree_dir = tmp_path / "trees"
        tree_dir.mkdir()
        (tree_dir / "broken.csv").write_text("1,2\n2,1\n")  # a cycle
        recipe = load_recipe(
            write_gcurve_recipe(tmp_path, extra=f"dir = {tree_dir}\n")
        )
        paths = run_fig5_gcurves(recipe, out_dir=tmp_path)
        assert "skipping unreadable tree" in capsys.readouterr().err
        df = read_run_csv(paths[0])
        assert "broken" not in set(df.tree)

    def test_no_trees_rejected(self, tmp_path):
        path = tmp_path / "r.ini"
        path.write_text("[recipe]\nkind = g_curves\nseed = 1\n")
        with pytest.raises(ValidationError, match="no trees"):
            run_fig5_gcurves(load_recipe(path), out_dir=tmp_path)

    def test_grid_domain_checked(self, tmp_path):
        recipe = load_recipe(write_gcurve_recipe(tmp_path, grid="0.5, 1.0"))
        with pytest.raises(ValidationError, match="lambda2 grid"):
            run_fig5_gcurves(recipe, out_dir=tmp_path)


class TestNetworkRunSkips:
    def test_absent_dataset_skips_with_notice(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("NETSAMPLE_BLOG_EDGES", raising=False)
        monkeypatch.delenv("NETSAMPLE_BLOG_LABELS", raising=False)
        path = tmp_path / "r.ini"
        path.write_text(
            "[recipe]\nkind = empirical_de\nname = net\nseed = 1\n"
            "[data]\nedges = /nonexistent/edges.txt\nlabels = /nonexistent/labels.csv\n"
        )
        recipe = load_recipe(path)
        paths, info = run_fig3_blog_de(recipe, out_dir=tmp_path)
        assert paths == [] and info is None
        assert "dataset not found" in capsys.readouterr().err
        # the dispatcher unwraps the (paths, info) pair
        assert run_recipe(recipe, out_dir=tmp_path) == []


class TestThresholdSmoke:
    def test_smoke_recipe_cells_and_determinism(self, tmp_path):
        recipe = load_recipe(os.path.join(RECIPES, "determinism_smoke.ini"))
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        paths_a = run_recipe(recipe, out_dir=a_dir, threads=1)
        paths_b = run_recipe(recipe, out_dir=b_dir, threads=2)
        assert len(paths_a) == 2  # one csv per (degree, lambda2) cell
        for pa, pb in zip(paths_a, paths_b):
            assert os.path.basename(pa) == os.path.basename(pb)
            assert open(pa, "rb").read() == open(pb, "rb").read()
        df = read_run_csv(paths_a[0])
        assert set(df["mode"]) == {"with_replacement", "without_replacement"}
        assert sorted(df.n.unique()) == [50, 100]
        prov = provenance_lines(paths_a[0])
        assert prov["recipe_sha256"] == recipe.sha256


@pytest.fixture
def small_graph_files(tmp_path):
    g = complete_graph(30)
    rng = np.random.default_rng(0)
    edges = tmp_path / "edges.txt"
    labels = tmp_path / "labels.csv"
    save_edge_list(g, edges)
    save_node_feature(
        NodeFeature(values=(np.arange(30) % 2).astype(float)), g, labels
    )
    return str(edges), str(labels)


class TestCommandLine:
    def test_gen_sbm_and_spectral(self, tmp_path, capsys):
        rc = main([
            "gen-sbm", "--n", "80", "--deg", "8", "--lambda2", "0.5",
            "--out", "net.txt", "--labels-out", "blocks.csv",
            "--seed", "3", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        assert (tmp_path / "net.txt").exists()
        assert (tmp_path / "blocks.csv").exists()
        rc = main([
            "spectral", "--graph", str(tmp_path / "net.txt"),
            "--y", str(tmp_path / "blocks.csv"),
            "--out", "spec.csv", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "lambda2 = " in out and "rho(y, slow eigenfunction)" in out
        df = read_run_csv(tmp_path / "spec.csv")
        assert df.eigenvalue.iloc[0] == pytest.approx(1.0)

    def test_gen_sbm_infeasible_exits_2(self, tmp_path, capsys):
        rc = main([
            "gen-sbm", "--n", "10", "--deg", "20", "--lambda2", "0.5",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_gen_tree_and_gfunc(self, tmp_path, capsys):
        rc = main([
            "gen-tree", "--m", "2", "--height", "3",
            "--out", "tree.csv", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        rc = main([
            "gfunc", "--tree", str(tmp_path / "tree.csv"),
            "--z", "0,0.5,1", "--out", "g.csv", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        df = read_run_csv(tmp_path / "g.csv")
        assert len(df) == 3
        assert df.g.iloc[2] == pytest.approx(1.0)  # G(1) = 1 on one tree
        assert df.n_g.iloc[2] == pytest.approx(15.0)

    def test_gen_tree_needs_a_stop_rule(self, tmp_path, capsys):
        rc = main(["gen-tree", "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_variance_report(self, tmp_path, capsys):
        main([
            "gen-sbm", "--n", "60", "--deg", "6", "--lambda2", "0.6",
            "--out", "net.txt", "--labels-out", "y.csv",
            "--seed", "5", "--out-dir", str(tmp_path),
        ])
        main([
            "gen-tree", "--m", "2", "--height", "4",
            "--out", "tree.csv", "--out-dir", str(tmp_path),
        ])
        capsys.readouterr()
        rc = main([
            "variance", "--graph", str(tmp_path / "net.txt"),
            "--y", str(tmp_path / "y.csv"), "--tree", str(tmp_path / "tree.csv"),
            "--m", "3",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        for col in ("design_effect", "lambda2", "beta", "predicted_exponent"):
            assert col in out

    def test_simulate_both_modes(self, tmp_path, small_graph_files):
        edges, labels = small_graph_files
        for mode in ("with_replacement", "without_replacement"):
            rc = main([
                "simulate", "--graph", edges, "--y", labels,
                "--mode", mode, "--reps", "5", "--n-grid", "10,20",
                "--budget", "20", "--target", "25",
                "--out", f"{mode}.csv", "--out-dir", str(tmp_path),
            ])
            assert rc == 0
            df = read_run_csv(tmp_path / f"{mode}.csv")
            assert (df["mode"] == mode).all()
            assert df.n.tolist() == [10, 20]

    def test_repeats_table(self, tmp_path, small_graph_files):
        edges, _ = small_graph_files
        rc = main([
            "repeats", "--graph", edges, "--reps", "6", "--n-grid", "5,10",
            "--budget", "10", "--target", "20",
            "--out", "r.csv", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        df = read_run_csv(tmp_path / "r.csv")
        assert "prop2_lower" in df.columns and len(df) == 2

    def test_exhaustion_exits_3(self, tmp_path, capsys):
        g = star_graph(4)
        edges = tmp_path / "star.txt"
        save_edge_list(g, edges)
        labels = tmp_path / "y.csv"
        save_node_feature(NodeFeature(values=np.arange(5.0)), g, labels)
        rc = main([
            "simulate", "--graph", str(edges), "--y", str(labels),
            "--mode", "without_replacement", "--offspring", "1",
            "--reps", "3", "--n-grid", "5", "--budget", "5", "--target", "10",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 3
        assert "numeric failure" in capsys.readouterr().err

    def test_recipe_command_with_seed_override(self, tmp_path, capsys):
        rc = main([
            "recipe", "--file", os.path.join(RECIPES, "g_curves.ini"),
            "--seed", "123", "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        out_path = tmp_path / "g_curves_gcurves.csv"
        assert out_path.exists()
        assert provenance_lines(out_path)["seed"] == "123"
