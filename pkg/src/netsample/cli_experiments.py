"""Experiment recipes and the `netsample` command-line front end.

Recipes are small INI files that fully determine a batch of CSV outputs
given a seed.  Three runners cover the standard studies: a two-block
threshold sweep of empirical design effects, an exact design-effect curve
on a user-supplied network, and bushiness curves n*G(lambda) for a
collection of trees.  Every CSV starts with `# key = value` provenance
lines (recipe hash, seed, cell parameters) and is byte-identical across
reruns with the same seed, whatever the thread count.

The CLI wraps the library: generators (gen-sbm, gen-tree), calculators
(gfunc, spectral, variance), simulators (simulate, repeats), and the
recipe dispatcher.  Exit codes: 0 ok, 2 validation error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import _rng
from .errors import NumericError, ParseError, ValidationError
from .graph_core import (
    Graph,
    NodeFeature,
    largest_connected_component,
    load_edge_list,
    load_node_feature,
    save_edge_list,
    save_node_feature,
)
from .markov_spectral import spectral_decompose, srw_kernel
from .referral_tree import (
    OffspringSpec,
    bfs_prefix,
    distance_spectrum,
    g_eval,
    gen_gw_tree,
    gen_m_tree,
    load_tree,
    save_tree,
    threshold_params,
)
from .sbm_gen import SbmSpec, sample_sbm, two_block_spec
from .variance_engine import variance_exact
from .walk_sim import SimConfig, mc_design_effect, repeat_rate_experiment

__all__ = [
    "ExperimentRecipe",
    "load_recipe",
    "run_fig2_threshold",
    "run_fig3_blog_de",
    "run_fig5_gcurves",
    "run_recipe",
    "main",
]


# ---------------------------------------------------------------------------
# recipes


@dataclass(frozen=True)
class ExperimentRecipe:
    """A parsed recipe: name, kind, seed, the raw sections, and provenance."""

    name: str
    kind: str
    seed: int
    sections: dict
    sha256: str
    path: str

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value is None:
            raise ValidationError(f"recipe is missing [{section}] {key}")
        return value


_RECIPE_KINDS = ("threshold_sweep", "empirical_de", "g_curves")


def load_recipe(path) -> ExperimentRecipe:
    """Parse an INI recipe file and fingerprint its bytes."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read recipe {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw.decode("utf-8"))
    except (UnicodeDecodeError, configparser.Error) as exc:
        raise ParseError(f"recipe {path} is not valid INI: {exc}") from exc
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    head = sections.get("recipe", {})
    kind = head.get("kind", "")
    if kind not in _RECIPE_KINDS:
        raise ValidationError(
            f"recipe kind must be one of {_RECIPE_KINDS}, got {kind!r}"
        )
    name = head.get("name") or os.path.splitext(os.path.basename(path))[0]
    try:
        seed = int(head.get("seed", "0"))
    except ValueError as exc:
        raise ParseError(f"recipe seed is not an integer: {head.get('seed')}") from exc
    return ExperimentRecipe(
        name=name, kind=kind, seed=seed, sections=sections,
        sha256=digest, path=str(path),
    )


def _floats(text: str) -> list:
    return [float(tok) for tok in str(text).replace(";", ",").split(",") if tok.strip()]


def _ints(text: str) -> list:
    return [int(tok) for tok in str(text).replace(";", ",").split(",") if tok.strip()]


def _write_csv(df: pd.DataFrame, path, provenance: dict) -> str:
    """CSV with `# key = value` provenance lines, stable bytes."""
    with open(path, "w", newline="") as fh:
        for key, value in provenance.items():
            fh.write(f"# {key} = {value}\n")
        df.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")
    return str(path)


def _provenance(recipe: ExperimentRecipe, **extra) -> dict:
    out = {"recipe": recipe.name, "recipe_sha256": recipe.sha256, "seed": recipe.seed}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# threshold sweep (two-block design-effect panels)


def run_fig2_threshold(recipe: ExperimentRecipe, out_dir=".", threads: int = 1):
    """Empirical design effects on two-block graphs, one CSV per panel.

    Panels are (degree, lambda2) cells; each CSV holds both sampling modes
    over the size grid in the shared simulate schema.  Cells get derived
    seeds by cell index, so the panel set is reproducible regardless of
    scheduling.
    """
    n_nodes = int(recipe.require("graph", "n_nodes"))
    degrees = _ints(recipe.require("graph", "degrees"))
    lambdas = _floats(recipe.require("graph", "lambda2_grid"))
    offspring = OffspringSpec.parse(recipe.get("tree", "offspring", "1+binomial(2,0.5)"))
    target = int(recipe.get("tree", "target_size", 2000))
    replicates = int(recipe.require("sim", "replicates"))
    budget = int(recipe.get("sim", "sample_budget", 500))
    n_grid = _ints(recipe.require("sim", "n_grid"))
    modes = [m.strip() for m in recipe.get(
        "sim", "modes", "with_replacement, without_replacement").split(",")]

    cells = [(deg, lam) for deg in degrees for lam in lambdas]

    def one_cell(ci):
        deg, lam = cells[ci]
        cell_seed = _rng.derive_seed(recipe.seed, ci)
        spec = two_block_spec(n_nodes, deg, lam)
        graph, labels = sample_sbm(spec, seed=cell_seed)
        y = NodeFeature(values=labels.astype(float), name="block")
        frames = []
        for mode in modes:
            cfg = SimConfig(
                replicates=replicates, seed=cell_seed, mode=mode,
                sample_budget=budget, gw_target_size=target, offspring=offspring,
            )
            frames.append(mc_design_effect(
                graph, y, cfg, n_grid, quarter_convention=True))
        return pd.concat(frames, ignore_index=True)

    if threads and int(threads) > 1:
        from joblib import Parallel, delayed

        tables = Parallel(n_jobs=int(threads), backend="threading")(
            delayed(one_cell)(ci) for ci in range(len(cells)))
    else:
        tables = [one_cell(ci) for ci in range(len(cells))]

    paths = []
    os.makedirs(out_dir, exist_ok=True)
    for ci, (deg, lam) in enumerate(cells):
        path = os.path.join(out_dir, f"{recipe.name}_deg{deg}_lam{lam:g}.csv")
        prov = _provenance(
            recipe, n_nodes=n_nodes, degree=deg, lambda2=f"{lam:g}",
            replicates=replicates, offspring=offspring, budget=budget,
        )
        paths.append(_write_csv(tables[ci], path, prov))
    return paths


# ---------------------------------------------------------------------------
# exact design effects on a supplied network


def _offspring_for_rate(m: float) -> OffspringSpec:
    """Offspring law with mean m: integers are deterministic, a rate in
    (1, 2) becomes 1 + Bernoulli(m - 1)."""
    if float(m).is_integer():
        return OffspringSpec.deterministic(int(m))
    if 1.0 < m < 2.0:
        return OffspringSpec.from_pmf((0.0, 2.0 - m, m - 1.0))
    raise ValidationError(f"no offspring rule for mean referral rate {m}")


def prepare_network(edges_path, labels_path) -> tuple[Graph, NodeFeature]:
    """Load, binarize, drop self-loops, and keep the giant component."""
    g = load_edge_list(edges_path)
    adj = g.adj.copy()
    adj.setdiag(0)
    adj.eliminate_zeros()
    adj.data[:] = 1.0
    g = Graph(adj=adj.tocsr(), labels=g.labels)
    g = largest_connected_component(g)
    y = load_node_feature(labels_path, g)
    return g, y


def run_fig3_blog_de(recipe: ExperimentRecipe, out_dir=".", threads: int = 1):
    """Exact conditional design effects on a supplied network.

    Needs [data] edges/labels paths (environment variables
    NETSAMPLE_BLOG_EDGES / NETSAMPLE_BLOG_LABELS override).  When the
    dataset is absent the run is skipped with a notice, since the data is
    not shipped with the package.  Returns (paths, info) where info
    carries lambda2, the feature correlation with the slow eigenfunction,
    and the critical referral rate.
    """
    edges = os.environ.get("NETSAMPLE_BLOG_EDGES") or recipe.get("data", "edges")
    labels = os.environ.get("NETSAMPLE_BLOG_LABELS") or recipe.get("data", "labels")
    if not edges or not labels or not (os.path.exists(edges) and os.path.exists(labels)):
        print(
            "dataset not found (set [data] paths or NETSAMPLE_BLOG_EDGES / "
            "NETSAMPLE_BLOG_LABELS); skipping network design-effect run",
            file=sys.stderr,
        )
        return [], None

    g, y = prepare_network(edges, labels)
    kernel = srw_kernel(g)
    spec = spectral_decompose(kernel)
    lam2 = spec.lambda2
    coeffs = spec.feature_coefficients(y.values)
    sigma2 = float(np.sum(coeffs[1:] ** 2))
    rho = float(coeffs[1] / np.sqrt(sigma2))
    beta = 1.0 / lam2**2

    m_grid = _floats(recipe.get("tree", "m_grid", "1, 1.2, 3"))
    n_grid = sorted(_ints(recipe.get("tree", "n_grid", "50, 100, 200, 400")))
    replicates = int(recipe.get("tree", "replicates", 20))
    nmax = max(n_grid)

    rows = []
    for mi, m in enumerate(m_grid):
        offspring = _offspring_for_rate(m)
        m_seed = _rng.derive_seed(recipe.seed, mi + 1)
        des = np.empty((replicates, len(n_grid)))
        for r in range(replicates):
            tree = gen_gw_tree(offspring, min_size=nmax, seed=m_seed, replicate=r)
            for j, n in enumerate(n_grid):
                ds = distance_spectrum(bfs_prefix(tree, n))
                report = variance_exact(spec, y, ds)
                if report.design_effect is None:
                    raise NumericError("feature is constant; design effect undefined")
                des[r, j] = report.design_effect
        for j, n in enumerate(n_grid):
            col = des[:, j]
            rows.append({
                "m": m, "n": n, "de": col.mean(),
                "de_se": col.std(ddof=1) / np.sqrt(replicates) if replicates > 1 else 0.0,
                "beta": beta,
            })

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{recipe.name}_network_de.csv")
    prov = _provenance(
        recipe, n_nodes=g.n, lambda2=f"{lam2:.6f}", rho=f"{rho:.6f}",
        beta=f"{beta:.6f}", replicates=replicates,
    )
    _write_csv(pd.DataFrame(rows), path, prov)
    info = {"lambda2": lam2, "rho": rho, "beta": beta, "n_nodes": g.n}
    return [path], info


# ---------------------------------------------------------------------------
# bushiness curves


def run_fig5_gcurves(recipe: ExperimentRecipe, out_dir=".", threads: int = 1):
    """n*G(lambda2) curves for a family of trees, one CSV for the lot.

    Trees come from [trees] two_tree_heights (binary trees of those
    heights) and, optionally, a directory of tree CSV files.  Files that
    fail to parse produce a warning and are skipped.
    """
    lambdas = _floats(recipe.get(
        "grid", "lambda2_grid",
        "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95",
    ))
    if any(not 0 <= z < 1 for z in lambdas):
        raise ValidationError("lambda2 grid must lie in [0, 1)")

    trees = []
    heights = recipe.get("trees", "two_tree_heights")
    if heights:
        for h in _ints(heights):
            trees.append((f"2tree_h{h}", gen_m_tree(2, h)))
    tree_dir = recipe.get("trees", "dir")
    if tree_dir:
        for fname in sorted(os.listdir(tree_dir)):
            if not fname.endswith(".csv"):
                continue
            full = os.path.join(tree_dir, fname)
            try:
                trees.append((os.path.splitext(fname)[0], load_tree(full)))
            except (ValidationError, OSError) as exc:
                print(f"skipping unreadable tree {full}: {exc}", file=sys.stderr)
    if not trees:
        raise ValidationError("recipe defines no trees")

    rows = []
    for label, tree in trees:
        ds = distance_spectrum(tree)
        gvals = g_eval(ds, np.asarray(lambdas))
        for z, gz in zip(lambdas, gvals):
            rows.append({"tree": label, "n": tree.n, "lambda2": z,
                         "g": gz, "n_g": tree.n * gz})

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{recipe.name}_gcurves.csv")
    _write_csv(pd.DataFrame(rows), path, _provenance(recipe))
    return [path]


_RUNNERS = {
    "threshold_sweep": run_fig2_threshold,
    "empirical_de": run_fig3_blog_de,
    "g_curves": run_fig5_gcurves,
}


def run_recipe(recipe: ExperimentRecipe, out_dir=".", threads: int = 1):
    """Dispatch a recipe to its runner; returns the list of files written."""
    result = _RUNNERS[recipe.kind](recipe, out_dir=out_dir, threads=threads)
    if recipe.kind == "empirical_de":
        return result[0]
    return result


# ---------------------------------------------------------------------------
# command line


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="master RNG seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads")
    sub.add_argument("--out-dir", default=".", help="output directory")


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _cmd_gen_sbm(args):
    if args.deg is not None or args.lambda2 is not None:
        if args.deg is None or args.lambda2 is None:
            raise ValidationError("two-block form needs both --deg and --lambda2")
        spec = two_block_spec(args.n, args.deg, args.lambda2)
    else:
        if not args.block_probs or not args.psi:
            raise ValidationError(
                "give either --deg/--lambda2 or --block-probs/--psi")
        probs = _floats(args.block_probs)
        k = len(probs)
        flat = _floats(args.psi)
        if len(flat) != k * k:
            raise ValidationError("--psi must be a K*K matrix, ';' between rows")
        spec = SbmSpec(n=args.n, block_probs=tuple(probs),
                       psi=tuple(tuple(flat[i * k:(i + 1) * k]) for i in range(k)))
    graph, labels = sample_sbm(spec, seed=args.seed)
    out = _out_path(args, args.out)
    save_edge_list(graph, out)
    if args.labels_out:
        feature = NodeFeature(values=labels.astype(float), name="block")
        save_node_feature(feature, graph, _out_path(args, args.labels_out))
    print(f"wrote {out} ({graph.n} nodes, {graph.num_edges} edges)")
    return 0


def _cmd_gen_tree(args):
    if args.m is not None:
        if args.height is None:
            raise ValidationError("--m needs --height")
        tree = gen_m_tree(args.m, args.height)
    else:
        offspring = OffspringSpec.parse(args.offspring)
        kwargs = {}
        if args.min_size is not None:
            kwargs["min_size"] = args.min_size
        elif args.height is not None:
            kwargs["height"] = args.height
        else:
            raise ValidationError("give --height or --min-size")
        tree = gen_gw_tree(offspring, seed=args.seed, **kwargs)
    out = _out_path(args, args.out)
    save_tree(tree, out)
    print(f"wrote {out} ({tree.n} nodes, height {tree.height})")
    return 0


def _cmd_gfunc(args):
    tree = load_tree(args.tree)
    ds = distance_spectrum(tree)
    zs = np.asarray(_floats(args.z))
    gvals = g_eval(ds, zs)
    df = pd.DataFrame({"z": zs, "g": gvals, "n_g": tree.n * gvals})
    if args.out:
        _write_csv(df, _out_path(args, args.out),
                   {"command": "gfunc", "tree": args.tree, "n": tree.n})
        print(f"wrote {_out_path(args, args.out)}")
    else:
        print(df.to_string(index=False))
    return 0


def _cmd_spectral(args):
    g = load_edge_list(args.graph)
    spec = spectral_decompose(srw_kernel(g))
    df = pd.DataFrame({
        "ell": np.arange(1, spec.n + 1),
        "eigenvalue": spec.eigenvalues,
    })
    print(f"n = {spec.n}, lambda2 = {spec.lambda2:.6f}")
    if args.y:
        y = load_node_feature(args.y, g)
        coeffs = spec.feature_coefficients(y.values)
        df["coefficient"] = coeffs
        sigma2 = float(np.sum(coeffs[1:] ** 2))
        if sigma2 > 0:
            print(f"rho(y, slow eigenfunction) = {coeffs[1] / np.sqrt(sigma2):.6f}")
    if args.out:
        _write_csv(df, _out_path(args, args.out),
                   {"command": "spectral", "graph": args.graph})
        print(f"wrote {_out_path(args, args.out)}")
    return 0


def _cmd_variance(args):
    g = load_edge_list(args.graph)
    y = load_node_feature(args.y, g)
    tree = load_tree(args.tree)
    spec = spectral_decompose(srw_kernel(g))
    ds = distance_spectrum(tree)
    report = variance_exact(spec, y, ds)
    thr = None
    if args.m is not None and spec.lambda2 > 0:
        thr = threshold_params(args.m, spec.lambda2)
    df = pd.DataFrame([{
        "n": report.n,
        "sigma2": report.sigma2,
        "var_rds": report.var_rds,
        "var_iid": report.var_iid,
        "design_effect": report.design_effect,
        "de_lower": report.de_lower,
        "de_upper": report.de_upper,
        "rho2": report.rho2,
        "lambda2": spec.lambda2,
        "beta": thr.beta if thr else np.nan,
        "predicted_exponent": thr.predicted_exponent if thr else np.nan,
    }])
    if args.out:
        _write_csv(df, _out_path(args, args.out), {
            "command": "variance", "graph": args.graph,
            "y": args.y, "tree": args.tree,
        })
        print(f"wrote {_out_path(args, args.out)}")
    else:
        print(df.to_string(index=False))
    return 0


def _sim_config_from(args) -> SimConfig:
    return SimConfig(
        replicates=args.reps,
        seed=args.seed,
        init="stationary",
        mode=args.mode,
        sample_budget=args.budget,
        gw_target_size=args.target,
        offspring=OffspringSpec.parse(args.offspring),
    )


def _cmd_simulate(args):
    g = load_edge_list(args.graph)
    y = load_node_feature(args.y, g)
    cfg = _sim_config_from(args)
    table = mc_design_effect(
        g, y, cfg, _ints(args.n_grid),
        threads=args.threads, quarter_convention=args.quarter,
    )
    out = _out_path(args, args.out)
    _write_csv(table, out, {
        "command": "simulate", "graph": args.graph, "y": args.y,
        "mode": args.mode, "replicates": args.reps, "seed": args.seed,
        "offspring": cfg.offspring,
    })
    print(f"wrote {out}")
    return 0


def _cmd_repeats(args):
    g = load_edge_list(args.graph)
    cfg = _sim_config_from(args)
    table = repeat_rate_experiment(g, cfg, _ints(args.n_grid), threads=args.threads)
    out = _out_path(args, args.out)
    _write_csv(table, out, {
        "command": "repeats", "graph": args.graph,
        "replicates": args.reps, "seed": args.seed, "offspring": cfg.offspring,
    })
    print(f"wrote {out}")
    return 0


def _cmd_recipe(args):
    recipe = load_recipe(args.file)
    if args.seed is not None and args.seed != 0:
        recipe = ExperimentRecipe(
            name=recipe.name, kind=recipe.kind, seed=args.seed,
            sections=recipe.sections, sha256=recipe.sha256, path=recipe.path,
        )
    paths = run_recipe(recipe, out_dir=args.out_dir, threads=args.threads)
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netsample",
        description="Referral-driven network sampling: generators, exact "
                    "variance calculators, and Monte-Carlo experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-sbm", help="sample a block-model graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--deg", type=float, help="expected degree (two-block form)")
    p.add_argument("--lambda2", type=float, help="target mixing eigenvalue")
    p.add_argument("--block-probs", help="comma list, general form")
    p.add_argument("--psi", help="K*K edge probabilities, ';' between rows")
    p.add_argument("--out", default="edges.txt")
    p.add_argument("--labels-out")
    _add_common(p)
    p.set_defaults(func=_cmd_gen_sbm)

    p = subs.add_parser("gen-tree", help="grow a referral tree")
    p.add_argument("--m", type=int, help="regular branching factor")
    p.add_argument("--height", type=int)
    p.add_argument("--offspring", default="1+binomial(2,0.5)")
    p.add_argument("--min-size", type=int)
    p.add_argument("--out", default="tree.csv")
    _add_common(p)
    p.set_defaults(func=_cmd_gen_tree)

    p = subs.add_parser("gfunc", help="distance generating function of a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--z", required=True, help="comma list of evaluation points")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_gfunc)

    p = subs.add_parser("spectral", help="walk-kernel spectrum of a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", help="node feature for projection coefficients")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_spectral)

    p = subs.add_parser("variance", help="exact estimator variance on a tree")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--m", type=float, help="referral rate for threshold report")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_variance)

    for cmd, help_text in (
        ("simulate", "Monte-Carlo design effects"),
        ("repeats", "repeat-pair rates of the with-replacement walk"),
    ):
        p = subs.add_parser(cmd, help=help_text)
        p.add_argument("--graph", required=True)
        if cmd == "simulate":
            p.add_argument("--y", required=True)
            p.add_argument("--mode", default="with_replacement",
                           choices=["with_replacement", "without_replacement"])
            p.add_argument("--quarter", action="store_true",
                           help="use the 1/(4n) balanced-binary reference")
        p.add_argument("--reps", type=int, default=200)
        p.add_argument("--n-grid", required=True)
        p.add_argument("--budget", type=int, default=500)
        p.add_argument("--target", type=int, default=2000)
        p.add_argument("--offspring", default="1+binomial(2,0.5)")
        p.add_argument("--out", default=f"{cmd}.csv")
        _add_common(p)
        p.set_defaults(func=_cmd_simulate if cmd == "simulate" else _cmd_repeats,
                       mode="with_replacement")

    p = subs.add_parser("recipe", help="run a recipe file")
    p.add_argument("--file", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the recipe seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_recipe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
