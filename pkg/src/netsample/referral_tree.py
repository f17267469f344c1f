"""Referral trees and forests: generation, distance spectra, diagnostics.

The central object is the exact distribution of the tree distance D between
two uniformly chosen nodes (ordered pairs, drawn with replacement, so
P(D=0) = 1/n).  Its probability generating function G(z) = E z^D is the
bushiness functional that converts a kernel's eigenvalues into sampling
variance.  Pairs in different components of a forest sit at infinite
distance and contribute z^inf = 0 for |z| < 1.

Distances are aggregated without touching all O(n^2) pairs: every unordered
pair is counted exactly once at its lowest common ancestor by convolving
subtree depth histograms bottom-up.  A brute-force BFS oracle lives in the
test suite to pin the algorithm down.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import NumericError, ParseError, ValidationError

__all__ = [
    "ReferralForest",
    "DistanceSpectrum",
    "ThresholdParams",
    "BalanceDiagnostics",
    "OffspringSpec",
    "load_tree",
    "save_tree",
    "gen_m_tree",
    "gen_gw_tree",
    "bfs_prefix",
    "distance_spectrum",
    "g_eval",
    "tree_stats",
    "g_lower_bounds",
    "threshold_params",
]

NODE_CAP = 2_000_000


@dataclass(frozen=True, eq=False)
class ReferralForest:
    """Rooted tree(s) in parent-array form.

    ``parent[v]`` is the referring node, or -1 for a root.  ``labels`` maps
    internal ids back to source labels (generated trees use 0..n-1).
    Derived arrays (depth, children adjacency, canonical breadth-first
    order) are computed once at construction; instances are immutable.
    """

    parent: np.ndarray
    labels: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)
    depth: np.ndarray = field(init=False, compare=False)
    roots: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        n = len(parent)
        if n < 1:
            raise ValidationError("a forest needs at least one node")
        labels = self.labels
        if labels is None:
            labels = np.arange(n, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if len(labels) != n:
            raise ValidationError("label map length does not match node count")
        object.__setattr__(self, "labels", labels)
        if np.any((parent < -1) | (parent >= n)):
            raise ValidationError("parent reference out of range")
        depth = self._resolve_depths(parent)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "roots", np.flatnonzero(parent == -1))
        if len(self.roots) == 0:
            raise ValidationError("no roots found")

    @staticmethod
    def _resolve_depths(parent: np.ndarray) -> np.ndarray:
        n = len(parent)
        depth = np.full(n, -1, dtype=np.int64)
        for start in range(n):
            if depth[start] >= 0:
                continue
            chain = []
            v = start
            while v != -1 and depth[v] == -1:
                chain.append(v)
                depth[v] = -2  # in progress
                v = parent[v]
            if v != -1 and depth[v] == -2:
                # walked into our own unfinished chain: a cycle
                cycle_start = chain.index(v)
                cycle = chain[cycle_start:]
                raise ValidationError(
                    "cycle detected through nodes " + ",".join(map(str, cycle))
                )
            base = -1 if v == -1 else depth[v]
            for node in reversed(chain):
                base += 1
                depth[node] = base
        return depth

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def height(self) -> int:
        return int(self.depth.max())

    @property
    def bfs_order(self) -> np.ndarray:
        """Canonical breadth-first order: by (depth, internal id).

        Every node's parent precedes it, so any prefix of this order is
        itself a valid forest.  Walks consume randomness in this order.
        """
        return np.lexsort((np.arange(self.n), self.depth))

    def children_lists(self) -> list:
        kids = [[] for _ in range(self.n)]
        for v in range(self.n):
            p = self.parent[v]
            if p >= 0:
                kids[p].append(v)
        return kids

    def generation_sizes(self) -> np.ndarray:
        return np.bincount(self.depth, minlength=self.height + 1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(parent, child) arrays over all referral edges."""
        child = np.flatnonzero(self.parent >= 0)
        return self.parent[child], child


def load_tree(path) -> ReferralForest:
    """Read ``node,parent`` CSV rows; empty or -1 parent marks a root.

    Labels are arbitrary integers, reindexed densely in sorted order with
    the map retained.  Cycles and orphan parent references are rejected.
    """
    nodes, parents = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'node,parent'")
            if lineno == 1:
                try:
                    int(parts[0])
                except ValueError:
                    continue  # header
            try:
                node = int(parts[0])
                par = int(parts[1]) if parts[1] not in ("", "-1") else -1
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer id") from None
            nodes.append(node)
            parents.append(par)
    if not nodes:
        raise ValidationError(f"{path}: no tree rows found")
    labels = np.array(sorted(set(nodes)), dtype=np.int64)
    if len(labels) != len(nodes):
        dupes = sorted(set(x for x in nodes if nodes.count(x) > 1))
        raise ValidationError(f"duplicate node id {dupes[0]}")
    remap = {int(lab): i for i, lab in enumerate(labels)}
    parent = np.full(len(nodes), -1, dtype=np.int64)
    for node, par in zip(nodes, parents):
        if par == -1:
            continue
        if par not in remap:
            raise ValidationError(f"node {node} refers to unknown parent {par}")
        parent[remap[node]] = remap[par]
    return ReferralForest(parent=parent, labels=labels)


def save_tree(forest: ReferralForest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,parent\n")
        for v in range(forest.n):
            p = forest.parent[v]
            lab_p = -1 if p < 0 else forest.labels[p]
            fh.write(f"{forest.labels[v]},{lab_p}\n")


def gen_m_tree(m: int, height: int, node_cap: int = NODE_CAP) -> ReferralForest:
    """Complete m-ary tree with generations 0..height."""
    if m < 1 or int(m) != m:
        raise ValidationError("m must be an integer >= 1")
    if height < 0:
        raise ValidationError("height must be >= 0")
    size = height + 1 if m == 1 else (m ** (height + 1) - 1) // (m - 1)
    if size > node_cap:
        raise ValidationError(f"m-tree would have {size} nodes, over cap {node_cap}")
    parents = [np.array([-1], dtype=np.int64)]
    gen_start, gen_size = 0, 1
    for _ in range(height):
        ids = np.arange(gen_start, gen_start + gen_size, dtype=np.int64)
        parents.append(np.repeat(ids, m))
        gen_start += gen_size
        gen_size *= m
    return ReferralForest(parent=np.concatenate(parents))


@dataclass(frozen=True)
class OffspringSpec:
    """Offspring distribution for branching growth.

    Three forms: a deterministic count, a shifted binomial
    shift + Binomial(k, p), or an explicit pmf over {0..K}.
    """

    kind: str
    params: tuple

    @classmethod
    def deterministic(cls, m: int) -> "OffspringSpec":
        if m < 0 or int(m) != m:
            raise ValidationError("deterministic offspring count must be >= 0")
        return cls(kind="deterministic", params=(int(m),))

    @classmethod
    def shifted_binomial(cls, shift: int, k: int, p: float) -> "OffspringSpec":
        if shift < 0 or k < 0 or not 0 <= p <= 1:
            raise ValidationError("invalid shifted-binomial parameters")
        return cls(kind="shifted_binomial", params=(int(shift), int(k), float(p)))

    @classmethod
    def from_pmf(cls, probs) -> "OffspringSpec":
        probs = tuple(float(q) for q in probs)
        if not probs or any(q < 0 for q in probs) or abs(sum(probs) - 1) > 1e-12:
            raise ValidationError("pmf must be nonnegative and sum to 1")
        return cls(kind="pmf", params=probs)

    @classmethod
    def parse(cls, text: str) -> "OffspringSpec":
        """Parse '2', '1+binomial(2,0.5)', 'binomial(3,0.4)', or 'pmf:q0,q1,...'."""
        text = text.strip().lower()
        if text.startswith("pmf:"):
            return cls.from_pmf(float(q) for q in text[4:].split(","))
        m = re.fullmatch(r"(?:(\d+)\s*\+\s*)?binomial\(\s*(\d+)\s*,\s*([0-9.eE+-]+)\s*\)", text)
        if m:
            shift = int(m.group(1)) if m.group(1) else 0
            return cls.shifted_binomial(shift, int(m.group(2)), float(m.group(3)))
        if re.fullmatch(r"\d+", text):
            return cls.deterministic(int(text))
        raise ValidationError(f"cannot parse offspring spec {text!r}")

    @property
    def mean(self) -> float:
        if self.kind == "deterministic":
            return float(self.params[0])
        if self.kind == "shifted_binomial":
            shift, k, p = self.params
            return shift + k * p
        return float(sum(i * q for i, q in enumerate(self.params)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(size, self.params[0], dtype=np.int64)
        if self.kind == "shifted_binomial":
            shift, k, p = self.params
            return shift + rng.binomial(k, p, size=size).astype(np.int64)
        return rng.choice(len(self.params), size=size, p=np.array(self.params))

    def __str__(self) -> str:
        if self.kind == "deterministic":
            return str(self.params[0])
        if self.kind == "shifted_binomial":
            shift, k, p = self.params
            return f"{shift}+binomial({k},{p:g})" if shift else f"binomial({k},{p:g})"
        return "pmf:" + ",".join(f"{q:g}" for q in self.params)


def gen_gw_tree(
    offspring: OffspringSpec,
    *,
    height: int | None = None,
    min_size: int | None = None,
    seed: int = 0,
    replicate: int = 0,
    node_cap: int = NODE_CAP,
    max_discards: int = 1_000_000,
) -> ReferralForest:
    """Grow a branching tree generation by generation.

    Exactly one stop rule applies: ``height`` runs that many generations
    (extinction permitted), ``min_size`` grows whole generations until the
    node count reaches the target, discarding and regenerating extinct
    attempts on a deterministic sub-seed sequence.  The discard count is
    reported in ``meta['discards']``.
    """
    if (height is None) == (min_size is None):
        raise ValidationError("specify exactly one of height or min_size")
    if min_size is not None and min_size < 1:
        raise ValidationError("min_size must be >= 1")
    for attempt in range(max_discards + 1):
        rng = _rng.stream(seed, replicate, _rng.TREE, attempt)
        parents = [np.array([-1], dtype=np.int64)]
        total = 1
        gen_start, gen_size = 0, 1
        generation = 0
        while True:
            if min_size is not None and total >= min_size:
                break
            if height is not None and generation >= height:
                break
            if gen_size == 0:
                break
            counts = offspring.sample(rng, gen_size)
            ids = np.arange(gen_start, gen_start + gen_size, dtype=np.int64)
            new = np.repeat(ids, counts)
            total += len(new)
            if total > node_cap:
                raise ValidationError(f"tree exceeded the node cap {node_cap}")
            if len(new):
                parents.append(new)
            gen_start += gen_size
            gen_size = len(new)
            generation += 1
        if min_size is not None and total < min_size:
            continue  # extinct attempt, regenerate on the next sub-seed
        forest = ReferralForest(
            parent=np.concatenate(parents),
            meta={"discards": attempt, "seed": seed, "replicate": replicate},
        )
        return forest
    raise NumericError(
        f"gave up after {max_discards} extinct trees; offspring mean "
        f"{offspring.mean:g} is too small for min_size = {min_size}"
    )


def bfs_prefix(forest: ReferralForest, n_keep: int) -> ReferralForest:
    """The sub-forest on the first ``n_keep`` nodes in canonical BFS order.

    Parents always precede children in that order, so the prefix is closed
    under the parent map and is itself a valid forest.
    """
    if not 1 <= n_keep <= forest.n:
        raise ValidationError("prefix size out of range")
    order = forest.bfs_order[:n_keep]
    new_id = np.full(forest.n, -1, dtype=np.int64)
    new_id[order] = np.arange(n_keep)
    old_parent = forest.parent[order]
    parent = np.where(old_parent < 0, -1, new_id[np.maximum(old_parent, 0)])
    return ReferralForest(parent=parent, labels=forest.labels[order])


@dataclass(frozen=True, eq=False)
class DistanceSpectrum:
    """Exact ordered-pair distance counts c_0..c_{2h} plus infinite pairs."""

    counts: np.ndarray
    infinite_pairs: int
    n: int

    def __post_init__(self):
        object.__setattr__(
            self, "counts", np.asarray(self.counts, dtype=np.int64)
        )

    @property
    def mean_distance(self) -> float:
        """E D; infinity when the forest has more than one component."""
        if self.infinite_pairs > 0:
            return np.inf
        k = np.arange(len(self.counts))
        return float((k * self.counts).sum() / self.n**2)


def distance_spectrum(forest: ReferralForest) -> DistanceSpectrum:
    """Count ordered node pairs at every tree distance.

    Bottom-up over the reverse breadth-first order, each node v keeps the
    depth histogram of its processed subtree.  When a child subtree merges
    into v's running histogram, the cross-convolution counts every
    unordered pair whose lowest common ancestor is v exactly once (v itself
    is in the running histogram, so ancestor-descendant pairs through v are
    included).  Ordered counts are twice that; c_0 = n is added directly.
    """
    n = forest.n
    h = forest.height
    counts = np.zeros(2 * h + 1, dtype=np.int64)
    counts[0] = n
    kids = forest.children_lists()
    parent = forest.parent
    # hist[v][i] = number of processed subtree nodes at depth depth[v] + i
    hists: dict = {}
    component_sq = 0
    for v in reversed(forest.bfs_order):
        acc = np.zeros(1, dtype=np.int64)
        acc[0] = 1
        for c in kids[v]:
            hc = hists.pop(c)
            # pairs split between the child subtree and everything already
            # merged at v: distance = (i + 1) + j for acc index j, child
            # index i, since the child histogram starts one level down
            cross = np.convolve(acc, hc)
            counts[1 : 1 + len(cross)] += 2 * cross
            # shift the child histogram down one level and merge
            if len(hc) + 1 > len(acc):
                grown = np.zeros(len(hc) + 1, dtype=np.int64)
                grown[: len(acc)] = acc
                acc = grown
            acc[1 : 1 + len(hc)] += hc
        if parent[v] == -1:
            component_sq += int(acc.sum()) ** 2
        else:
            hists[v] = acc
    infinite = n * n - component_sq
    last = np.max(np.flatnonzero(counts)) if counts.any() else 0
    return DistanceSpectrum(counts=counts[: last + 1], infinite_pairs=int(infinite), n=n)


def g_eval(ds: DistanceSpectrum, z):
    """Evaluate G(z) = E z^D for scalar or array z in [-1, 1].

    Cross-component pairs contribute 0 (the z^inf convention); at z = 1 the
    finite sum therefore returns the same-component fraction, which is 1
    for a single tree.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(np.abs(z) > 1):
        raise ValidationError("G(z) is defined on |z| <= 1")
    coef = ds.counts.astype(np.float64) / float(ds.n) ** 2
    vals = np.polynomial.polynomial.polyval(z, coef)
    return float(vals) if vals.ndim == 0 else vals


@dataclass(frozen=True)
class ThresholdParams:
    """Critical-threshold classification for growth rate m and lambda2."""

    m: float
    lambda2: float
    beta: float
    alpha: float
    regime: str
    predicted_exponent: float


def threshold_params(m: float, lambda2: float) -> ThresholdParams:
    """Classify (m, lambda2) against the critical referral rate.

    beta = lambda2^-2 is the growth rate at which the design effect stops
    being bounded; above it the predicted rate exponent is 1 - alpha with
    alpha = log_m(lambda2^-2).
    """
    if m <= 1:
        raise ValidationError("growth rate m must exceed 1")
    if not 0 < lambda2 < 1:
        raise ValidationError("lambda2 must lie strictly in (0, 1)")
    beta = lambda2 ** -2
    alpha = np.log(beta) / np.log(m)
    if abs(m - beta) <= 1e-9 * max(1.0, beta):
        regime = "critical"
    elif m < beta:
        regime = "sub-critical"
    else:
        regime = "super-critical"
    exponent = 0.0 if m <= beta else 1.0 - alpha
    return ThresholdParams(
        m=float(m),
        lambda2=float(lambda2),
        beta=float(beta),
        alpha=float(alpha),
        regime=regime,
        predicted_exponent=float(exponent),
    )


@dataclass(frozen=True, eq=False)
class BalanceDiagnostics:
    """Shape diagnostics: growth ratios, subtree constants, size moments.

    For a single tree with a supplied reference rate m, ``growth_ratios[k]``
    is (generation k size) / m^k, ``c_tau[v]`` is the largest observed
    (descendants of v at depth k) / m^(k - depth v), and
    ``second_moments[k]`` averages c_tau^2 over generation k.  Forests get
    per-component diagnostics in ``per_component`` and only the global
    height / mean depth / diameter / generation sizes at the top level.
    """

    height: int
    mean_depth: float
    diameter: int
    generation_sizes: np.ndarray
    m: float | None = None
    growth_ratios: np.ndarray | None = None
    c_tau: np.ndarray | None = None
    second_moments: np.ndarray | None = None
    per_component: tuple = ()


def _tree_diameter(forest: ReferralForest, root: int, members: np.ndarray) -> int:
    """Double BFS within one component given its member nodes."""
    kids = forest.children_lists()

    def farthest(start: int) -> tuple[int, int]:
        dist = {start: 0}
        frontier = [start]
        far_node, far_d = start, 0
        while frontier:
            nxt = []
            for u in frontier:
                neigh = list(kids[u])
                if forest.parent[u] >= 0:
                    neigh.append(int(forest.parent[u]))
                for w in neigh:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        if dist[w] > far_d:
                            far_node, far_d = w, dist[w]
                        nxt.append(w)
            frontier = nxt
        return far_node, far_d

    u, _ = farthest(root)
    _, diam = farthest(u)
    return diam


def _component_members(forest: ReferralForest) -> dict:
    """Root id -> array of nodes in that root's tree."""
    comp_root = np.full(forest.n, -1, dtype=np.int64)
    for v in forest.bfs_order:
        p = forest.parent[v]
        comp_root[v] = v if p < 0 else comp_root[p]
    return {
        int(r): np.flatnonzero(comp_root == r) for r in forest.roots
    }


def _subtree_constants(forest: ReferralForest, m: float) -> np.ndarray:
    """c_tau for every node: bottom-up max of descendant counts over m^k."""
    kids = forest.children_lists()
    c_tau = np.zeros(forest.n)
    hists: dict = {}
    for v in reversed(forest.bfs_order):
        acc = np.zeros(1, dtype=np.int64)
        acc[0] = 1
        for c in kids[v]:
            hc = hists.pop(c)
            if len(hc) + 1 > len(acc):
                grown = np.zeros(len(hc) + 1, dtype=np.int64)
                grown[: len(acc)] = acc
                acc = grown
            acc[1 : 1 + len(hc)] += hc
        c_tau[v] = np.max(acc / m ** np.arange(len(acc), dtype=np.float64))
        hists[v] = acc
    return c_tau


def tree_stats(forest: ReferralForest, m: float | None = None) -> BalanceDiagnostics:
    """Height, mean depth, diameter, generation sizes, balance diagnostics.

    The growth-rate diagnostics (growth ratios, c_tau, per-generation
    second moments) need a reference rate m and a single tree; pass m to
    get them.  A forest returns per-component diagnostics instead.
    """
    if m is not None and m <= 0:
        raise ValidationError("reference rate m must be positive")
    single = len(forest.roots) == 1
    if not single:
        members = _component_members(forest)
        comps = []
        for r, nodes in members.items():
            sub = _extract_component(forest, nodes)
            comps.append(tree_stats(sub, m=m))
        return BalanceDiagnostics(
            height=forest.height,
            mean_depth=float(forest.depth.mean()),
            diameter=max(c.diameter for c in comps),
            generation_sizes=forest.generation_sizes(),
            m=m,
            per_component=tuple(comps),
        )
    gen_sizes = forest.generation_sizes()
    diam = _tree_diameter(forest, int(forest.roots[0]), np.arange(forest.n))
    growth = c_tau = moments = None
    if m is not None:
        growth = gen_sizes / m ** np.arange(len(gen_sizes), dtype=np.float64)
        c_tau = _subtree_constants(forest, m)
        moments = np.array(
            [
                float(np.mean(c_tau[forest.depth == k] ** 2))
                for k in range(forest.height + 1)
            ]
        )
    return BalanceDiagnostics(
        height=forest.height,
        mean_depth=float(forest.depth.mean()),
        diameter=diam,
        generation_sizes=gen_sizes,
        m=m,
        growth_ratios=growth,
        c_tau=c_tau,
        second_moments=moments,
    )


def _extract_component(forest: ReferralForest, nodes: np.ndarray) -> ReferralForest:
    new_id = np.full(forest.n, -1, dtype=np.int64)
    new_id[nodes] = np.arange(len(nodes))
    old_parent = forest.parent[nodes]
    parent = np.where(old_parent < 0, -1, new_id[np.maximum(old_parent, 0)])
    return ReferralForest(parent=parent, labels=forest.labels[nodes])


def g_lower_bounds(
    stats: BalanceDiagnostics, ds: DistanceSpectrum, z: float
) -> dict:
    """Evaluate the standard lower bounds on G(z) for 0 < z < 1.

    Returns a dict with the exact value and the bounds z^(E D),
    z^(diameter), z^(2 * mean depth), z^(2 * height), and 1/n, verifying
    the chain

        G(z) >= z^(E D) >= max(z^diam, z^(2 E depth)) >= z^(2h) and
        G(z) >= 1/n.

    The depth-based chain assumes a single tree; a forest reports only the
    exact value and the 1/n floor (cross-component distance is infinite,
    so the other bounds degenerate to zero).
    """
    if not 0 < z < 1:
        raise ValidationError("bounds are defined for 0 < z < 1")
    g = g_eval(ds, z)
    out = {"g": g, "one_over_n": 1.0 / ds.n}
    single = ds.infinite_pairs == 0
    if single:
        ed = ds.mean_distance
        out["z_pow_mean_dist"] = z**ed
        out["z_pow_diameter"] = float(z**stats.diameter)
        out["z_pow_twice_mean_depth"] = float(z ** (2 * stats.mean_depth))
        out["z_pow_twice_height"] = float(z ** (2 * stats.height))
        slack = 1e-12
        chain_ok = (
            g + slack >= out["z_pow_mean_dist"]
            and out["z_pow_mean_dist"] + slack
            >= max(out["z_pow_diameter"], out["z_pow_twice_mean_depth"])
            and min(out["z_pow_diameter"], out["z_pow_twice_mean_depth"]) + slack
            >= out["z_pow_twice_height"]
        )
        if not chain_ok:
            raise NumericError(f"lower-bound chain violated at z={z}: {out}")
    if g + 1e-12 < out["one_over_n"]:
        raise NumericError(f"G(z) fell below 1/n at z={z}")
    return out
