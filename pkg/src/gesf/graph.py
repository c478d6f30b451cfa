"""Typed graph container, file ingestion, neighbor queries and label splits.

Nodes are integers ``0..n-1``. Each node carries a type index; labels are
partial and either a class index (``multiclass``) or a frozenset of label
indices (``multilabel``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError, ValidationError

MODES = ("multiclass", "multilabel")


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    node_type: np.ndarray
    edges: np.ndarray
    labels: dict = field(default_factory=dict)
    mode: str = "multiclass"

    def __post_init__(self):
        n = int(self.n)
        if n <= 0:
            raise ValidationError("node count must be positive")
        object.__setattr__(self, "n", n)
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")

        node_type = np.asarray(self.node_type, dtype=np.int64).reshape(-1)
        if node_type.shape != (n,):
            raise ValidationError(f"node_type has length {node_type.size}, expected {n}")
        if node_type.min() < 0:
            raise ValidationError("negative type index")
        k = int(node_type.max()) + 1
        missing = set(range(k)) - set(np.unique(node_type).tolist())
        if missing:
            raise ValidationError(f"type indices {sorted(missing)} have no nodes")
        object.__setattr__(self, "node_type", _readonly(node_type))

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValidationError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValidationError("self-loop in edge list")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0) if edges.size else edges
        object.__setattr__(self, "edges", _readonly(edges))

        labels = {}
        for v, y in self.labels.items():
            v = int(v)
            if not 0 <= v < n:
                raise ValidationError(f"label references unknown node {v}")
            if self.mode == "multiclass":
                y = int(y)
                if y < 0:
                    raise ValidationError(f"negative class index at node {v}")
            else:
                y = frozenset(int(i) for i in y)
                if any(i < 0 for i in y):
                    raise ValidationError(f"negative label index at node {v}")
            labels[v] = y
        object.__setattr__(self, "labels", dict(sorted(labels.items())))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.mode == other.mode
            and np.array_equal(self.node_type, other.node_type)
            and np.array_equal(self.edges, other.edges)
            and self.labels == other.labels
        )

    __hash__ = None

    @property
    def num_types(self) -> int:
        return int(self.node_type.max()) + 1

    @cached_property
    def type_partition(self) -> tuple[np.ndarray, ...]:
        """Per-type ascending node-id arrays (V_k)."""
        return tuple(_readonly(np.flatnonzero(self.node_type == k)) for k in range(self.num_types))

    @cached_property
    def local_index(self) -> np.ndarray:
        """Position of each node inside its own type block."""
        idx = np.empty(self.n, dtype=np.int64)
        for part in self.type_partition:
            idx[part] = np.arange(part.size)
        return _readonly(idx)

    @property
    def num_classes(self) -> int:
        """C in multiclass mode, L in multilabel mode (max index + 1)."""
        if not self.labels:
            return 0
        if self.mode == "multiclass":
            return max(self.labels.values()) + 1
        return max((max(s) for s in self.labels.values() if s), default=-1) + 1

    @cached_property
    def adjacency_lists(self) -> tuple[np.ndarray, ...]:
        nbrs = [[] for _ in range(self.n)]
        for u, v in self.edges.tolist():
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(_readonly(np.array(sorted(x), dtype=np.int64)) for x in nbrs)

    @property
    def labeled_nodes(self) -> list[int]:
        return list(self.labels)

    def to_dict(self) -> dict:
        if self.mode == "multiclass":
            labels = {str(v): y for v, y in self.labels.items()}
        else:
            labels = {str(v): sorted(y) for v, y in self.labels.items()}
        return {
            "n": self.n,
            "types": self.node_type.tolist(),
            "edges": self.edges.tolist(),
            "labels": labels,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Graph:
        return cls(n=d["n"], node_type=d["types"], edges=d["edges"],
                   labels={int(k): v for k, v in d["labels"].items()}, mode=d["mode"])


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict()))


def read_graph(path) -> Graph:
    return Graph.from_dict(json.loads(Path(path).read_text()))


def _int_pairs(path):
    """Yield (lineno, a, b) for every data line of a two-column integer file."""
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {s!r}") from None
            if a < 0 or b < 0:
                raise ParseError(path, lineno, "negative integer")
            yield lineno, a, b


def load_graph(edge_path, label_path, type_path=None, mode: str = "multiclass") -> Graph:
    """Read edge, label and optional type files into a :class:`Graph`.

    Arcs are symmetrized, self-loops dropped and duplicates collapsed. The
    node count is one more than the largest id in the edge or type file.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    for p in (edge_path, label_path, type_path):
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")

    pairs = [(a, b) for _, a, b in _int_pairs(edge_path)]
    n = 1 + max((max(a, b) for a, b in pairs), default=-1)

    if type_path is not None:
        types = {}
        for lineno, v, k in _int_pairs(type_path):
            if types.get(v, k) != k:
                raise ParseError(type_path, lineno, f"node {v} given two types")
            types[v] = k
        n = max(n, 1 + max(types, default=-1))
        untyped = [v for v in range(n) if v not in types]
        if untyped:
            raise ValidationError(f"{len(untyped)} nodes have no type (first: {untyped[0]})")
        node_type = [types[v] for v in range(n)]
    else:
        node_type = [0] * n

    labels: dict = {}
    for lineno, v, y in _int_pairs(label_path):
        if v >= n:
            raise ValidationError(f"{label_path}:{lineno}: label references unknown node {v}")
        if mode == "multiclass":
            if labels.get(v, y) != y:
                raise ParseError(label_path, lineno, f"node {v} given two classes")
            labels[v] = y
        else:
            labels.setdefault(v, set()).add(y)

    edges = [(a, b) for a, b in pairs if a != b]
    return Graph(n=n, node_type=node_type, edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                 labels=labels, mode=mode)


def adjacency(g: Graph) -> np.ndarray:
    """Dense symmetric 0/1 adjacency matrix."""
    a = np.zeros((g.n, g.n))
    if g.edges.size:
        a[g.edges[:, 0], g.edges[:, 1]] = 1.0
        a[g.edges[:, 1], g.edges[:, 0]] = 1.0
    return a


def neighbors(g: Graph, v: int, n: int, k: int) -> list[int]:
    """Nodes of type ``k`` joined to ``v`` by at least one walk of length ``n``."""
    if not 0 <= v < g.n:
        raise ValueError(f"node {v} out of range [0, {g.n})")
    if not 0 <= k < g.num_types:
        raise ValueError(f"type {k} out of range [0, {g.num_types})")
    if n < 1:
        raise ValueError("step must be >= 1")
    frontier = np.zeros(g.n, dtype=bool)
    frontier[v] = True
    for _ in range(n):
        nxt = np.zeros(g.n, dtype=bool)
        for u in np.flatnonzero(frontier):
            nxt[g.adjacency_lists[u]] = True
        frontier = nxt
    return [int(u) for u in np.flatnonzero(frontier & (g.node_type == k))]


@dataclass(frozen=True)
class Split:
    train_nodes: tuple
    test_nodes: tuple
    fraction: float
    seed: int


def make_split(g: Graph, fraction: float, seed: int) -> Split:
    """Uniform (unstratified) train/test partition of the labeled nodes."""
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1), got {fraction}")
    labeled = np.array(g.labeled_nodes, dtype=np.int64)
    if labeled.size < 2:
        raise ConfigurationError("need at least two labeled nodes")
    # tolerance guards against products like 0.29 * 100 = 28.999999999999996
    n_train = math.floor(fraction * labeled.size + 1e-9)
    if n_train == 0 or n_train == labeled.size:
        raise ConfigurationError(
            f"fraction {fraction} of {labeled.size} labeled nodes leaves an empty side")
    perm = np.random.default_rng(seed).permutation(labeled.size)
    train = sorted(labeled[perm[:n_train]].tolist())
    test = sorted(labeled[perm[n_train:]].tolist())
    return Split(tuple(train), tuple(test), float(fraction), int(seed))
