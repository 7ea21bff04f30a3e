"""Directed follower networks, synthetic generators and CSV ingestion.

Edges are oriented the way content flows: ``source`` posts, ``target``
follows ``source`` and sees the posts.  An edge therefore carries influence
from the source's opinion onto the target's opinion.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

EDGE_HEADER = ("source", "target", "rate")
NODE_HEADER = ("node", "opinion")
IDMAP_HEADER = ("external_id", "internal_id")

# Above this many candidate pairs in a block, edges are drawn by
# binomial count + sampling without replacement instead of a dense mask.
_DENSE_BLOCK_LIMIT = 4_000_000


class NetworkFormatError(ValueError):
    """Malformed or inconsistent network file."""


class Edge(NamedTuple):
    source: int
    target: int
    rate: float


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=indptr[1:])
    return indptr, order


@dataclass(frozen=True, eq=False)
class DirectedNetwork:
    """Immutable directed graph with per-edge posting rates (posts/day).

    Edge ``e`` is ``(source[e], target[e], rate[e])``.  ``out_index`` and
    ``in_index`` are CSR-style ``(indptr, edge_positions)`` pairs.
    """

    vertex_count: int
    source: np.ndarray
    target: np.ndarray
    rate: np.ndarray
    node_ids: tuple[str, ...] | None = None
    out_index: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)
    in_index: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.vertex_count)
        src = np.ascontiguousarray(self.source, dtype=np.int64)
        tgt = np.ascontiguousarray(self.target, dtype=np.int64)
        rate = np.ascontiguousarray(self.rate, dtype=np.float64)
        if n < 0:
            raise ValueError("vertex_count must be non-negative")
        if not (src.shape == tgt.shape == rate.shape) or src.ndim != 1:
            raise ValueError("source, target and rate must be 1-d arrays of equal length")
        if src.size:
            lo = min(src.min(), tgt.min())
            hi = max(src.max(), tgt.max())
            if lo < 0 or hi >= n:
                raise ValueError(f"edge endpoint out of range [0, {n})")
            if np.any(src == tgt):
                raise ValueError(f"self-loop at vertex {int(src[src == tgt][0])}")
            if not np.all(np.isfinite(rate)) or np.any(rate < 0):
                raise ValueError("edge rates must be finite and non-negative")
            keys = src * n + tgt
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate (source, target) edge")
        if self.node_ids is not None and len(self.node_ids) != n:
            raise ValueError("node_ids length must equal vertex_count")
        for arr in (src, tgt, rate):
            arr.setflags(write=False)
        object.__setattr__(self, "vertex_count", n)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "out_index", _csr(src, n))
        object.__setattr__(self, "in_index", _csr(tgt, n))

    @classmethod
    def from_edges(cls, vertex_count: int, edges, node_ids=None) -> "DirectedNetwork":
        edges = list(edges)
        if not edges:
            return cls(vertex_count, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        s, t, r = zip(*((e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges))
        return cls(vertex_count, np.array(s), np.array(t), np.array(r, dtype=float), node_ids)

    @property
    def edge_count(self) -> int:
        return int(self.source.size)

    def edges(self) -> Iterator[Edge]:
        for s, t, r in zip(self.source.tolist(), self.target.tolist(), self.rate.tolist()):
            yield Edge(s, t, r)

    def out_edges(self, v: int) -> np.ndarray:
        indptr, order = self.out_index
        return order[indptr[v]:indptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        indptr, order = self.in_index
        return order[indptr[v]:indptr[v + 1]]

    def in_rate_sum(self) -> np.ndarray:
        return np.bincount(self.target, weights=self.rate, minlength=self.vertex_count)

    def edge_set(self) -> set[tuple[int, int, float]]:
        return set(self.edges())

    def __eq__(self, other):
        if not isinstance(other, DirectedNetwork):
            return NotImplemented
        return (
            self.vertex_count == other.vertex_count
            and np.array_equal(self.source, other.source)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.rate, other.rate)
        )

    __hash__ = None


def as_opinions(values, vertex_count: int | None = None) -> np.ndarray:
    """Validate an opinion vector and return it as a float64 array."""
    theta = np.asarray(values, dtype=np.float64)
    if theta.ndim != 1:
        raise ValueError("opinions must be one-dimensional")
    if vertex_count is not None and theta.size != vertex_count:
        raise ValueError(f"expected {vertex_count} opinions, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("opinions must be finite")
    return theta


# -- generators ---------------------------------------------------------------

def generate_path(n: int) -> tuple[DirectedNetwork, np.ndarray]:
    """Bidirectional path with unit rates and opinions spaced evenly on [0, 1]."""
    if n < 2:
        raise ValueError(f"path needs n >= 2, got {n}")
    left = np.arange(n - 1)
    # forward edge i -> i+1 then backward i+1 -> i for each neighbour pair
    src = np.column_stack([left, left + 1]).ravel()
    tgt = np.column_stack([left + 1, left]).ravel()
    net = DirectedNetwork(n, src, tgt, np.ones(src.size))
    return net, np.linspace(0.0, 1.0, n)


def _sample_block(rng: np.random.Generator, rows: np.ndarray, cols: np.ndarray,
                  p: float, diagonal: bool) -> tuple[np.ndarray, np.ndarray]:
    nr, nc = rows.size, cols.size
    if p <= 0.0 or nr == 0 or nc == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if nr * nc <= _DENSE_BLOCK_LIMIT:
        mask = rng.random((nr, nc)) < p
        if diagonal:
            np.fill_diagonal(mask, False)
        r, c = np.nonzero(mask)
        return rows[r], cols[c]
    # Same law as independent Bernoulli trials on each admissible pair.
    if diagonal:
        pairs = nr * (nr - 1)
        k = rng.binomial(pairs, p)
        flat = np.sort(rng.choice(pairs, size=k, replace=False))
        r = flat // (nr - 1)
        c = flat % (nr - 1)
        c = c + (c >= r)
    else:
        k = rng.binomial(nr * nc, p)
        flat = np.sort(rng.choice(nr * nc, size=k, replace=False))
        r, c = flat // nc, flat % nc
    return rows[r], cols[c]


def generate_sbm(cluster_sizes: Sequence[int], p, cluster_opinions: Sequence[float],
                 seed: int) -> tuple[DirectedNetwork, np.ndarray]:
    """Directed stochastic block model with unit rates.

    Every ordered pair ``(a, b)``, ``a != b``, gets the edge ``a -> b``
    independently with probability ``p[cluster(a)][cluster(b)]``.
    """
    sizes = [int(s) for s in cluster_sizes]
    k = len(sizes)
    p = np.asarray(p, dtype=float)
    if p.shape != (k, k):
        raise ValueError(f"p must be {k}x{k} for {k} clusters, got shape {p.shape}")
    if len(cluster_opinions) != k:
        raise ValueError(f"need {k} cluster opinions, got {len(cluster_opinions)}")
    if any(s <= 0 for s in sizes):
        raise ValueError("cluster sizes must be positive")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    members = [np.arange(bounds[a], bounds[a + 1]) for a in range(k)]
    srcs, tgts = [], []
    for a in range(k):
        for b in range(k):
            s, t = _sample_block(rng, members[a], members[b], float(p[a, b]), a == b)
            srcs.append(s)
            tgts.append(t)
    src = np.concatenate(srcs).astype(np.int64)
    tgt = np.concatenate(tgts).astype(np.int64)
    order = np.lexsort((tgt, src))
    n = int(bounds[-1])
    net = DirectedNetwork(n, src[order], tgt[order], np.ones(src.size))
    opinions = np.repeat(np.asarray(cluster_opinions, dtype=float), sizes)
    return net, opinions


def generate_er(n: int, p: float, seed: int) -> DirectedNetwork:
    """Directed Erdos-Renyi graph: a one-cluster SBM."""
    if n < 1:
        raise ValueError("n must be positive")
    net, _ = generate_sbm([n], [[p]], [0.0], seed)
    return net


def generate_standin(n: int = 30_000, target_edges: int = 1_000_000, seed: int = 0,
                     inter_fraction: float = 0.1) -> tuple[DirectedNetwork, np.ndarray]:
    """Two-cluster SBM with bimodal Beta opinions, a large-network proxy.

    Roughly ``inter_fraction`` of the expected edges cross between clusters.
    Opinions are Beta(3, 7) in the first cluster and Beta(7, 3) in the second.
    """
    half = n // 2
    sizes = [half, n - half]
    intra_pairs = sum(s * (s - 1) for s in sizes)
    inter_pairs = 2 * sizes[0] * sizes[1]
    p_in = target_edges * (1 - inter_fraction) / intra_pairs
    p_out = target_edges * inter_fraction / inter_pairs
    net, _ = generate_sbm(sizes, [[p_in, p_out], [p_out, p_in]], [0.0, 0.0], seed)
    rng = np.random.default_rng([seed, 1])
    opinions = np.concatenate([rng.beta(3, 7, sizes[0]), rng.beta(7, 3, sizes[1])])
    return net, opinions


# -- file I/O -----------------------------------------------------------------

def _rows(path: Path, header: tuple[str, ...]):
    """Yield ``(line_no, fields)``; skip a leading header matching ``header``."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or fields == [""]:
                continue
            if line_no == 1 and tuple(f.lower() for f in fields) == header:
                continue
            if len(fields) != len(header):
                raise NetworkFormatError(
                    f"{path}:{line_no}: expected {len(header)} fields "
                    f"({','.join(header)}), got {len(fields)}")
            yield line_no, fields


def _parse_float(text: str, path: Path, line_no: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NetworkFormatError(f"{path}:{line_no}: {what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise NetworkFormatError(f"{path}:{line_no}: {what} must be finite")
    return value


def load_network(edges_path, nodes_path, id_map_path=None) -> tuple[DirectedNetwork, np.ndarray]:
    """Read edge and node CSVs.

    Node ids are arbitrary strings, remapped to ``0..n-1`` in node-file order.
    The mapping is kept in ``network.node_ids`` and, when it is not the
    identity and ``id_map_path`` is given, written there as a sidecar CSV.
    """
    edges_path, nodes_path = Path(edges_path), Path(nodes_path)
    index: dict[str, int] = {}
    opinions = []
    for line_no, (node, op) in _rows(nodes_path, NODE_HEADER):
        if node in index:
            raise NetworkFormatError(f"{nodes_path}:{line_no}: duplicate node id {node!r}")
        value = _parse_float(op, nodes_path, line_no, "opinion")
        if not 0.0 <= value <= 1.0:
            raise NetworkFormatError(
                f"{nodes_path}:{line_no}: opinion {value} for node {node} outside [0, 1]")
        index[node] = len(opinions)
        opinions.append(value)

    src, tgt, rates = [], [], []
    seen = set()
    for line_no, (s, t, r) in _rows(edges_path, EDGE_HEADER):
        for endpoint in (s, t):
            if endpoint not in index:
                raise NetworkFormatError(
                    f"{edges_path}:{line_no}: edge references unknown node id {endpoint}")
        rate = _parse_float(r, edges_path, line_no, "rate")
        if rate < 0:
            raise NetworkFormatError(f"{edges_path}:{line_no}: negative rate {rate}")
        a, b = index[s], index[t]
        if a == b:
            raise NetworkFormatError(f"{edges_path}:{line_no}: self-loop on node {s}")
        if (a, b) in seen:
            raise NetworkFormatError(f"{edges_path}:{line_no}: duplicate edge {s}->{t}")
        seen.add((a, b))
        src.append(a)
        tgt.append(b)
        rates.append(rate)

    ids = tuple(index)
    dense = all(ext == str(i) for i, ext in enumerate(ids))
    net = DirectedNetwork(len(ids), np.array(src, dtype=np.int64), np.array(tgt, dtype=np.int64),
                          np.array(rates, dtype=float), None if dense else ids)
    if id_map_path is not None and not dense:
        write_id_map(net, id_map_path)
    return net, np.array(opinions, dtype=float)


def _open_for_write(path: Path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_id_map(network: DirectedNetwork, path) -> None:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(IDMAP_HEADER)
        for i, ext in enumerate(network.node_ids or range(network.vertex_count)):
            w.writerow([ext, i])


def save_network(network: DirectedNetwork, opinions, edges_path, nodes_path,
                 id_map_path=None) -> None:
    """Write edge and node CSVs; floats use ``repr`` so loading is bit-exact."""
    opinions = as_opinions(opinions, network.vertex_count)
    edges_path, nodes_path = Path(edges_path), Path(nodes_path)
    ids = network.node_ids or tuple(str(i) for i in range(network.vertex_count))
    with _open_for_write(nodes_path) as fh:
        w = csv.writer(fh)
        w.writerow(NODE_HEADER)
        for ext, op in zip(ids, opinions.tolist()):
            w.writerow([ext, repr(op)])
    with _open_for_write(edges_path) as fh:
        w = csv.writer(fh)
        w.writerow(EDGE_HEADER)
        for s, t, r in network.edges():
            w.writerow([ids[s], ids[t], repr(r)])
    if id_map_path is not None and network.node_ids is not None:
        write_id_map(network, id_map_path)
