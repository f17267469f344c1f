"""Tree-indexed walk simulators and Monte-Carlo design effects.

Two samplers live here.  The with-replacement walker drives a Markov
kernel down a referral tree: roots from the initial law, every child from
the kernel row of its parent's state.  The without-replacement walker is
the field protocol: a branching tree is planned in advance, the walk fills
it breadth-first from a stationary seed, each referral goes to a uniformly
chosen neighbor that has not appeared anywhere in the realization yet, and
branches are pruned when a recruiter runs out of fresh contacts or the
sample budget is hit.

On top of the samplers sit the Monte-Carlo routines: empirical design
effects over a grid of sample sizes (nested breadth-first prefixes of one
tree per replicate) and repeat-pair rates for the with-replacement walk.
Every replicate owns a counter-based RNG stream keyed by its index, so
results never depend on worker count or scheduling.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.sparse import issparse

from . import _rng
from .errors import NumericError, ValidationError
from .estimators import WalkSample
from .graph_core import Graph, NodeFeature
from .markov_spectral import Kernel, srw_kernel
from .referral_tree import OffspringSpec, ReferralForest, bfs_prefix, gen_gw_tree

__all__ = [
    "SimConfig",
    "walk_with_replacement",
    "walk_without_replacement",
    "count_repeats",
    "mc_design_effect",
    "repeat_rate_experiment",
]


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulation campaign.

    init is either the string "stationary" or a fixed node id.  The
    planned tree is grown to gw_target_size nodes and the walk keeps at
    most sample_budget of them, so the budget may not exceed the target.
    """

    replicates: int
    seed: int
    init: object = "stationary"
    mode: str = "with_replacement"
    sample_budget: int = 500
    gw_target_size: int = 2000
    offspring: OffspringSpec = field(
        default_factory=lambda: OffspringSpec.shifted_binomial(1, 2, 0.5)
    )

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ValidationError("replicates must be at least 1")
        if self.mode not in ("with_replacement", "without_replacement"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.init != "stationary" and (
            not isinstance(self.init, (int, np.integer)) or int(self.init) < 0
        ):
            raise ValidationError("init must be 'stationary' or a node id")
        if int(self.sample_budget) < 1:
            raise ValidationError("sample budget must be positive")
        if int(self.sample_budget) > int(self.gw_target_size):
            raise ValidationError("sample budget exceeds the planned tree size")
        if not isinstance(self.offspring, OffspringSpec):
            raise ValidationError("offspring must be an OffspringSpec")


def _draw_init(rng, init, n: int, size: int) -> np.ndarray:
    """Root states: iid from pi, or a fixed node id repeated."""
    if isinstance(init, np.ndarray):
        cum = init
        u = rng.random(size)
        return np.searchsorted(cum, u, side="right").astype(np.int64)
    node = int(init)
    if not 0 <= node < n:
        raise ValidationError(f"fixed init node {node} out of range for n={n}")
    return np.full(size, node, dtype=np.int64)


def _kernel_sampler(k: Kernel):
    """Cached flat-cumulative sampler over the kernel rows.

    Builds one sorted array holding, for each row r, r plus the running
    sum of that row's probabilities (last entry pinned to r + 1).  Drawing
    from row r then costs a single searchsorted of r + uniform.
    """
    cached = k._cache.get("row_sampler")
    if cached is not None:
        return cached
    if issparse(k.p):
        csr = k.p.tocsr()
    else:
        from scipy.sparse import csr_matrix

        csr = csr_matrix(k.p)
    indptr, indices, data = csr.indptr, csr.indices, np.asarray(csr.data, float)
    keys = np.empty(len(data))
    for r in range(csr.shape[0]):
        s, e = indptr[r], indptr[r + 1]
        if e == s:
            raise NumericError(f"kernel row {r} has no support")
        np.cumsum(data[s:e], out=keys[s:e])
        keys[s:e] += r
        keys[e - 1] = r + 1.0
    cached = (keys, indices.astype(np.int64))
    k._cache["row_sampler"] = cached
    return cached


def _srw_fast_path(k: Kernel):
    """(indptr, indices, degrees) when the kernel is an unweighted SRW."""
    cached = k._cache.get("srw_sampler")
    if cached is not None:
        return cached
    g = k.graph
    if g is None:
        k._cache["srw_sampler"] = False
        return False
    adj = g.adj
    if adj.nnz and not np.all(adj.data == 1.0):
        k._cache["srw_sampler"] = False
        return False
    cached = (adj.indptr, adj.indices.astype(np.int64), g.unweighted_degrees)
    k._cache["srw_sampler"] = cached
    return cached


def walk_with_replacement(
    k: Kernel,
    f: ReferralForest,
    init="stationary",
    seed: int = 0,
    *,
    replicate: int = 0,
    y: NodeFeature | None = None,
) -> WalkSample:
    """Run the kernel down the tree, one generation at a time.

    Roots are drawn from ``init`` ("stationary" for pi, or a fixed node
    id); each child's state is drawn from the kernel row of its parent's
    state.  Nodes are visited in breadth-first order with one vectorized
    draw per generation, so the output is a deterministic function of
    (seed, replicate) alone.
    """
    if f.n == 0:
        raise ValidationError("forest is empty")
    n_states = len(k.pi)
    rng = _rng.stream(seed, replicate, _rng.WALK)
    if init == "stationary":
        cum = np.cumsum(k.pi)
        cum[-1] = 1.0
        init_draw = cum
    else:
        init_draw = init
    fast = _srw_fast_path(k)
    if fast is False:
        keys, flat_cols = _kernel_sampler(k)

    depth = f.depth
    order = f.bfs_order
    counts = np.bincount(depth)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    assignment = np.empty(f.n, dtype=np.int64)
    parent = f.parent
    for d in range(len(counts)):
        nodes = order[offsets[d] : offsets[d + 1]]
        if d == 0:
            assignment[nodes] = _draw_init(rng, init_draw, n_states, len(nodes))
            continue
        ps = assignment[parent[nodes]]
        if fast is not False:
            indptr, indices, degs = fast
            picks = rng.integers(0, degs[ps])
            assignment[nodes] = indices[indptr[ps] + picks]
        else:
            q = ps + rng.random(len(nodes))
            assignment[nodes] = flat_cols[np.searchsorted(keys, q, side="right")]

    g = k.graph
    return WalkSample(
        assignment=assignment,
        tree=f,
        y_values=None if y is None else y.values[assignment],
        degrees=None if g is None else g.unweighted_degrees[assignment],
        weighted_degrees=None if g is None else g.degrees[assignment],
    )


def walk_without_replacement(
    g: Graph,
    cfg: SimConfig,
    seed: int | None = None,
    *,
    replicate: int = 0,
    y: NodeFeature | None = None,
) -> tuple[WalkSample, ReferralForest]:
    """Fill a planned branching tree without ever repeating a graph node.

    The planned tree is grown to cfg.gw_target_size nodes (extinct
    realizations are discarded and regrown on fresh substreams).  The seed
    participant comes from the degree-proportional stationary law unless
    cfg.init fixes a node.  Filling proceeds breadth-first: a recruiter
    with c planned referrals passes the sample to min(c, viable) uniformly
    chosen neighbors that have not appeared anywhere yet; unfilled planned
    referrals and their subtrees are pruned.  The walk stops at
    cfg.sample_budget kept nodes, or earlier with budget_met=False if
    every branch dies first.

    Returns the realized sample together with the pruned tree it lives on.
    """
    seed = cfg.seed if seed is None else seed
    if g.n < cfg.sample_budget:
        raise ValidationError("graph has fewer nodes than the sample budget")
    planned = gen_gw_tree(
        cfg.offspring, min_size=cfg.gw_target_size, seed=seed, replicate=replicate
    )
    rng = _rng.stream(seed, replicate, _rng.WALK)

    wdeg = g.degrees
    total = wdeg.sum()
    if cfg.init == "stationary":
        if total <= 0:
            raise ValidationError("graph has no edges; cannot draw a seed node")
        cum = np.cumsum(wdeg / total)
        cum[-1] = 1.0
        root_state = int(np.searchsorted(cum, rng.random(), side="right"))
    else:
        root_state = int(cfg.init)
        if not 0 <= root_state < g.n:
            raise ValidationError(f"fixed init node {root_state} out of range")
    udeg = g.unweighted_degrees
    if udeg[root_state] == 0:
        raise ValidationError(f"seed node {root_state} is isolated")

    children = planned.children_lists()
    plan_parent = planned.parent
    used = np.zeros(g.n, dtype=bool)
    used[root_state] = True
    assign_planned = {0: root_state}
    kept = [0]
    queue = deque([0])
    budget = int(cfg.sample_budget)
    while queue and len(kept) < budget:
        t = queue.popleft()
        kids = children[t]
        if len(kids) == 0:
            continue
        state = assign_planned[t]
        nb = g.neighbors(state)
        viable = nb[~used[nb]]
        take = min(len(kids), len(viable), budget - len(kept))
        if take == 0:
            continue
        chosen = rng.choice(viable, size=take, replace=False)
        for planned_id, st in zip(kids[:take], chosen):
            st = int(st)
            assign_planned[int(planned_id)] = st
            used[st] = True
            kept.append(int(planned_id))
            queue.append(int(planned_id))

    kept_arr = np.asarray(kept, dtype=np.int64)
    new_id = {pid: i for i, pid in enumerate(kept)}
    new_parent = np.empty(len(kept), dtype=np.int64)
    for i, pid in enumerate(kept):
        p = plan_parent[pid]
        new_parent[i] = -1 if p < 0 else new_id[int(p)]
    meta = dict(planned.meta)
    meta.update(planned_size=planned.n, pruned_away=planned.n - len(kept))
    pruned = ReferralForest(parent=new_parent, labels=kept_arr, meta=meta)

    assignment = np.fromiter(
        (assign_planned[pid] for pid in kept), dtype=np.int64, count=len(kept)
    )
    ws = WalkSample(
        assignment=assignment,
        tree=pruned,
        y_values=None if y is None else y.values[assignment],
        degrees=udeg[assignment],
        weighted_degrees=wdeg[assignment],
        budget_met=len(kept) >= budget,
    )
    return ws, pruned


def count_repeats(ws: WalkSample) -> int:
    """Ordered pairs of distinct tree nodes landing on the same graph node."""
    counts = np.bincount(ws.assignment)
    return int(np.sum(counts * (counts - 1)))


def _prefix_repeats(assignment: np.ndarray, n_grid) -> np.ndarray:
    out = np.empty(len(n_grid), dtype=np.int64)
    for j, n in enumerate(n_grid):
        counts = np.bincount(assignment[:n])
        out[j] = np.sum(counts * (counts - 1))
    return out


def _run_ordered(fn, count: int, threads: int):
    """Map fn over replicate indices, results ordered by index."""
    if threads and int(threads) > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=int(threads), backend="threading")(
            delayed(fn)(r) for r in range(count)
        )
    return [fn(r) for r in range(count)]


def _replicate_sample(g, kernel, cfg: SimConfig, r: int) -> np.ndarray:
    """One replicate's assignment vector, in breadth-first sample order."""
    if cfg.mode == "with_replacement":
        tree = gen_gw_tree(
            cfg.offspring, min_size=cfg.gw_target_size, seed=cfg.seed, replicate=r
        )
        prefix = bfs_prefix(tree, cfg.sample_budget)
        ws = walk_with_replacement(
            kernel, prefix, init=cfg.init, seed=cfg.seed, replicate=r
        )
        return ws.assignment
    ws, _ = walk_without_replacement(g, cfg, replicate=r)
    return ws.assignment


def _jackknife_de(means: np.ndarray, base: float) -> tuple[float, float]:
    """Design effect with a delete-one jackknife standard error."""
    reps = len(means)
    var = means.var(ddof=1)
    de = var / base
    s1 = means.sum()
    s2 = (means**2).sum()
    loo_mean = (s1 - means) / (reps - 1)
    loo_var = (s2 - means**2 - (reps - 1) * loo_mean**2) / (reps - 2)
    loo_de = loo_var / base
    se = np.sqrt((reps - 1) / reps * np.sum((loo_de - loo_de.mean()) ** 2))
    return float(de), float(se)


def mc_design_effect(
    g: Graph | None,
    y: NodeFeature,
    cfg: SimConfig,
    n_grid,
    *,
    kernel: Kernel | None = None,
    threads: int = 1,
    quarter_convention: bool = False,
) -> pd.DataFrame:
    """Empirical design effect over nested sample-size prefixes.

    For each replicate one tree is planned and walked once; the estimator
    at size n is the mean over the first n sampled nodes in breadth-first
    order.  The variance of that mean across replicates is divided by the
    independent-sampling reference sigma^2/n computed exactly from pi and
    y (or by 1/(4n) under the balanced-binary convention when
    quarter_convention is set).  Standard errors come from a delete-one
    jackknife over replicates.

    Passing ``kernel`` overrides the simple-random-walk kernel; that is
    only meaningful with replacement.
    """
    n_grid = [int(n) for n in n_grid]
    if any(n < 1 for n in n_grid):
        raise ValidationError("sample sizes must be positive")
    if any(n > cfg.sample_budget for n in n_grid):
        raise ValidationError("sample size exceeds the walk budget")
    if cfg.replicates < 3:
        raise ValidationError("need at least 3 replicates for a jackknife")
    if kernel is None:
        if g is None:
            raise ValidationError("need a graph or an explicit kernel")
        kernel = srw_kernel(g)
    elif cfg.mode == "without_replacement":
        raise ValidationError(
            "custom kernels are supported with replacement only"
        )
    y_all = y.values
    if len(y_all) != len(kernel.pi):
        raise ValidationError("feature length does not match the state space")
    pi = kernel.pi
    mu = float(pi @ y_all)
    sigma2 = float(pi @ (y_all - mu) ** 2)
    scale = float(pi @ y_all**2)
    if sigma2 <= 1e-20 * max(scale, 1e-300) and not quarter_convention:
        raise ValidationError("feature is constant under pi; design effect undefined")

    nmax = max(n_grid)
    idx = np.asarray(n_grid, dtype=np.int64)

    def one(r):
        assignment = _replicate_sample(g, kernel, cfg, r)
        if len(assignment) < nmax:
            raise NumericError(
                f"replicate {r} exhausted at {len(assignment)} samples, "
                f"below the requested size {nmax}"
            )
        vals = y_all[assignment]
        means = np.cumsum(vals)[idx - 1] / idx
        return means, _prefix_repeats(assignment, n_grid)

    results = _run_ordered(one, cfg.replicates, threads)
    means_mat = np.vstack([m for m, _ in results])
    reps_mat = np.vstack([c for _, c in results]).astype(float)

    rows = []
    for j, n in enumerate(n_grid):
        base = 1.0 / (4.0 * n) if quarter_convention else sigma2 / n
        de, de_se = _jackknife_de(means_mat[:, j], base)
        rn = reps_mat[:, j]
        rows.append(
            {
                "n": n,
                "mode": cfg.mode,
                "de": de,
                "de_se": de_se,
                "mean_rn": rn.mean(),
                "rn_se": rn.std(ddof=1) / np.sqrt(len(rn)),
            }
        )
    return pd.DataFrame(rows)


def repeat_rate_experiment(
    g: Graph, cfg: SimConfig, n_grid, *, threads: int = 1
) -> pd.DataFrame:
    """Monte-Carlo repeat-pair counts against their theoretical envelopes.

    Shares the simulate table schema (the design-effect columns are NaN
    here) and adds the diagnostic columns: the degree lower bound
    n/maxdeg, the trend ratio E R_n / (n log n), and n/sqrt(N) for the
    sparse-regime check.
    """
    if cfg.mode != "with_replacement":
        raise ValidationError("repeat counting applies to with-replacement walks")
    n_grid = [int(n) for n in n_grid]
    if any(n < 1 for n in n_grid):
        raise ValidationError("sample sizes must be positive")
    if any(n > cfg.sample_budget for n in n_grid):
        raise ValidationError("sample size exceeds the walk budget")
    kernel = srw_kernel(g)
    maxdeg = int(g.unweighted_degrees.max())

    def one(r):
        assignment = _replicate_sample(g, kernel, cfg, r)
        return _prefix_repeats(assignment, n_grid)

    results = _run_ordered(one, cfg.replicates, threads)
    reps_mat = np.vstack(results).astype(float)

    rows = []
    for j, n in enumerate(n_grid):
        rn = reps_mat[:, j]
        mean_rn = rn.mean()
        rows.append(
            {
                "n": n,
                "mode": cfg.mode,
                "de": np.nan,
                "de_se": np.nan,
                "mean_rn": mean_rn,
                "rn_se": rn.std(ddof=1) / np.sqrt(len(rn)) if len(rn) > 1 else np.nan,
                "prop2_lower": n / maxdeg,
                "rn_per_nlogn": mean_rn / (n * np.log(n)) if n > 1 else np.nan,
                "n_over_sqrt_n": n / np.sqrt(g.n),
            }
        )
    return pd.DataFrame(rows)
