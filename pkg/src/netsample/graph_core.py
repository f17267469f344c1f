"""Undirected weighted graphs: loading, validation, preprocessing.

Graphs are stored in CSR form via scipy.sparse with dense internal node ids
0..N-1.  Original labels survive only in a lookup array; all math downstream
indexes plain arrays.  Preprocessing (k-core, largest component) composes the
label maps so a node in a derived graph can always be traced to its source
label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ParseError, ValidationError

__all__ = [
    "Graph",
    "NodeFeature",
    "load_edge_list",
    "save_edge_list",
    "k_core",
    "largest_connected_component",
    "load_node_feature",
    "save_node_feature",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric weighted adjacency plus the original-label map.

    ``adj`` is an N x N CSR matrix with strictly positive weights and
    bit-identical symmetry.  ``labels[i]`` is the source label of internal
    node i.  Instances are immutable and safe to share across workers.
    """

    adj: sparse.csr_matrix
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Weighted degrees: sum of incident edge weights (row sums)."""
        return np.asarray(self.adj.sum(axis=1)).ravel()

    @property
    def unweighted_degrees(self) -> np.ndarray:
        """Distinct-neighbor counts, self-loops excluded."""
        deg = np.diff(self.adj.indptr).astype(np.int64)
        diagonal = self.adj.diagonal()
        return deg - (diagonal != 0)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (self-loops count once)."""
        off_diag = self.adj.nnz - np.count_nonzero(self.adj.diagonal())
        return off_diag // 2 + np.count_nonzero(self.adj.diagonal())

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[i] : self.adj.indptr[i + 1]]

    def validate(self) -> None:
        """Check the structural invariants; raise ValidationError on failure."""
        if self.n == 0:
            return
        if (self.adj != self.adj.T).nnz != 0:
            raise ValidationError("adjacency is not bit-identically symmetric")
        if self.adj.nnz and self.adj.data.min() <= 0:
            raise ValidationError("edge weights must be strictly positive")
        if len(self.labels) != self.n:
            raise ValidationError("label map length does not match node count")


def _build_graph(rows, cols, weights, labels) -> Graph:
    """Assemble a symmetric Graph from directed declarations.

    Same-direction duplicates sum; when both directions of a pair appear,
    their (summed) weights must agree exactly, and only one copy is kept.
    """
    n = len(labels)
    directed = sparse.coo_matrix(
        (weights, (rows, cols)), shape=(n, n), dtype=np.float64
    ).tocsr()
    directed.sum_duplicates()
    transposed = directed.T.tocsr()
    both = (directed != 0).multiply(transposed != 0)
    if (directed.multiply(both) != transposed.multiply(both)).nnz != 0:
        raise ValidationError(
            "an edge is declared in both directions with mismatched weights"
        )
    adj = directed.maximum(transposed).tocsr()
    adj.sort_indices()
    g = Graph(adj=adj, labels=np.asarray(labels, dtype=np.int64))
    g.validate()
    return g


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list ``u v [w]`` into a Graph.

    Lines starting with ``#`` and blank lines are skipped.  Labels are
    nonnegative integers, remapped to dense internal ids in sorted label
    order.  The default weight is 1.  Repeated same-direction lines sum;
    both-direction declarations must agree in weight.
    """
    rows, cols, weights = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"line {lineno}: expected 'u v [w]', got {text!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if u < 0 or v < 0:
                raise ParseError(f"line {lineno}: labels must be nonnegative")
            if not np.isfinite(w) or w <= 0:
                raise ValidationError(
                    f"line {lineno}: weight must be positive and finite, got {w}"
                )
            rows.append(u)
            cols.append(v)
            weights.append(w)
    if not rows:
        raise ValidationError(f"{path}: no edges found")
    unique = np.unique(np.concatenate([rows, cols]))
    remap = {int(lab): i for i, lab in enumerate(unique)}
    r = np.array([remap[u] for u in rows], dtype=np.int64)
    c = np.array([remap[v] for v in cols], dtype=np.int64)
    return _build_graph(r, c, np.array(weights), unique)


def save_edge_list(g: Graph, path) -> None:
    """Write one line per undirected edge, using original labels."""
    coo = sparse.triu(g.adj).tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, w in zip(coo.row, coo.col, coo.data):
            fh.write(f"{g.labels[i]} {g.labels[j]} {w:.17g}\n")


def _induced_subgraph(g: Graph, keep: np.ndarray) -> Graph:
    adj = g.adj[keep][:, keep].tocsr()
    adj.sort_indices()
    return Graph(adj=adj, labels=g.labels[keep])


def k_core(g: Graph, k: int) -> Graph:
    """Iteratively remove nodes of unweighted degree < k until a fixpoint.

    Returns the induced subgraph, which may be empty.  Idempotent.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    current = g
    while current.n > 0:
        deg = current.unweighted_degrees
        keep = deg >= k
        if keep.all():
            break
        current = _induced_subgraph(current, np.flatnonzero(keep))
    return current


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component.

    Ties between equal-size components go to the one containing the
    smallest internal node id.  The label map is composed through.
    """
    if g.n == 0:
        raise ValidationError("empty graph has no components")
    n_comp, comp = csgraph.connected_components(g.adj, directed=False)
    sizes = np.bincount(comp, minlength=n_comp)
    best = np.flatnonzero(sizes == sizes.max())
    if len(best) > 1:
        # smallest minimum internal id among the tied components
        first_seen = np.full(n_comp, g.n, dtype=np.int64)
        for i, c in enumerate(comp):
            if first_seen[c] == g.n:
                first_seen[c] = i
        best = best[np.argmin(first_seen[best])]
    else:
        best = best[0]
    return _induced_subgraph(g, np.flatnonzero(comp == best))


@dataclass(frozen=True, eq=False)
class NodeFeature:
    """A real-valued node attribute aligned to internal ids."""

    values: np.ndarray
    name: str = "y"

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64)
        )
        if self.values.ndim != 1:
            raise ValidationError("feature values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature values must be finite")


def load_node_feature(path, g: Graph, name: str | None = None) -> NodeFeature:
    """Read ``label,value`` CSV rows covering every graph node exactly once.

    An optional header line is detected by a non-numeric first field.
    Errors name the offending label.
    """
    values = np.full(g.n, np.nan)
    seen = np.zeros(g.n, dtype=bool)
    remap = {int(lab): i for i, lab in enumerate(g.labels)}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'label,value'")
            if lineno == 1:
                try:
                    int(parts[0])
                except ValueError:
                    continue  # header row
            try:
                lab = int(parts[0])
                val = float(parts[1])
            except ValueError:
                raise ValidationError(
                    f"line {lineno}: non-numeric entry for label {parts[0]!r}"
                ) from None
            if lab not in remap:
                raise ValidationError(f"label {lab} is not a node of the graph")
            i = remap[lab]
            if seen[i]:
                raise ValidationError(f"duplicate value for label {lab}")
            seen[i] = True
            values[i] = val
    if not seen.all():
        missing = g.labels[~seen][0]
        raise ValidationError(f"missing value for label {missing}")
    feature_name = name if name is not None else "y"
    return NodeFeature(values=values, name=feature_name)


def save_node_feature(feature: NodeFeature, g: Graph, path) -> None:
    """Write ``label,value`` rows in internal-id order."""
    if len(feature.values) != g.n:
        raise ValidationError("feature length does not match graph")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,value\n")
        for lab, val in zip(g.labels, feature.values):
            fh.write(f"{lab},{val:.17g}\n")
