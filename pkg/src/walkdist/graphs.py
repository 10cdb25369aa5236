"""Graph container, graph6 codec, named generators and an isomorphism oracle.

Vertices are always 0..n-1 and adjacency is a dense symmetric 0-1 matrix
with zero diagonal.  Generator vertex numbering is lexicographic in the
construction coordinates, so outputs are reproducible run to run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import Graph6ParseError, SizeCapError

GRAPH6_MAX_N = 1 << 18
ISO_DEFAULT_LIMIT = 24


@dataclass
class Graph:
    n: int
    adj: np.ndarray
    label: str | None = None

    def __post_init__(self):
        adj = np.ascontiguousarray(np.asarray(self.adj, dtype=np.uint8))
        if adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency shape {adj.shape} does not match n={self.n}")
        if self.n < 1:
            raise ValueError("graphs need at least one vertex")
        if adj.max(initial=0) > 1:
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency diagonal must be zero")
        self.adj = adj

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.adj, other.adj)
        )

    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1, dtype=np.int64)

    def edge_count(self) -> int:
        return int(self.adj.sum(dtype=np.int64)) // 2

    def edges(self) -> list[tuple[int, int]]:
        iu = np.triu_indices(self.n, 1)
        mask = self.adj[iu] == 1
        return list(zip(iu[0][mask].tolist(), iu[1][mask].tolist()))

    def permuted(self, perm: np.ndarray, label: str | None = None) -> "Graph":
        """Relabel vertices: vertex v of self becomes perm[v] of the result."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        return Graph(self.n, self.adj[np.ix_(inv, inv)], label=label)

    def is_connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = np.flatnonzero(self.adj[frontier].any(axis=0) & ~seen)
            seen[nxt] = True
            frontier = nxt.tolist()
        return bool(seen.all())


@dataclass(frozen=True)
class SrgParams:
    n: int
    k: int
    lam: int
    mu: int

    def __post_init__(self):
        if min(self.n, self.k, self.lam, self.mu) < 0 or self.k >= self.n:
            raise ValueError(f"invalid strongly regular parameters {self}")
        if self.k * (self.k - self.lam - 1) != (self.n - self.k - 1) * self.mu:
            raise ValueError(f"infeasible strongly regular parameters {self}")


# ---------------------------------------------------------------------------
# graph6 codec
# ---------------------------------------------------------------------------

def _g6_decode_header(data: bytes) -> tuple[int, int]:
    """Return (n, payload_start) from a graph6 byte string."""
    if not data:
        raise Graph6ParseError("empty graph6 line")
    if data[0] != 126:  # short form: one byte
        b = data[0]
        if not 63 <= b <= 126:
            raise Graph6ParseError(f"header byte {b} out of range 63..126", offset=0)
        return b - 63, 1
    if len(data) >= 2 and data[1] == 126:  # long form: '~~' + 6 bytes
        raw = data[2:8]
        if len(raw) < 6:
            raise Graph6ParseError("truncated long-form header", offset=len(data))
        start = 2
    else:  # medium form: '~' + 3 bytes
        raw = data[1:4]
        if len(raw) < 3:
            raise Graph6ParseError("truncated medium-form header", offset=len(data))
        start = 1
    n = 0
    for i, b in enumerate(raw):
        if not 63 <= b <= 126:
            raise Graph6ParseError(f"header byte {b} out of range 63..126", offset=start + i)
        n = (n << 6) | (b - 63)
    return n, start + len(raw)


def parse_graph6(text: str | bytes, label: str | None = None) -> Graph:
    """Decode one graph6 line (McKay format) into a Graph.

    Raises Graph6ParseError, naming the byte offset, for malformed headers,
    truncated payloads, trailing bytes, or out-of-range characters.
    """
    if isinstance(text, str):
        data = text.strip().encode("ascii", errors="strict")
    else:
        data = bytes(text).strip()
    if data.startswith(b">>graph6<<"):
        data = data[len(b">>graph6<<"):]
    n, start = _g6_decode_header(data)
    if n < 1:
        raise Graph6ParseError("graphs need at least one vertex (n=0 header)", offset=0)
    if n > GRAPH6_MAX_N:
        raise Graph6ParseError(f"vertex count {n} exceeds supported maximum {GRAPH6_MAX_N}", offset=0)
    nbits = n * (n - 1) // 2
    nbytes = (nbits + 5) // 6
    payload = data[start:]
    if len(payload) < nbytes:
        raise Graph6ParseError(
            f"truncated bit payload: need {nbytes} bytes, found {len(payload)}",
            offset=start + len(payload),
        )
    if len(payload) > nbytes:
        raise Graph6ParseError(
            f"payload length mismatch: expected {nbytes} bytes, found {len(payload)}",
            offset=start + nbytes,
        )
    vals = np.frombuffer(payload, dtype=np.uint8)
    bad = np.flatnonzero((vals < 63) | (vals > 126))
    if bad.size:
        raise Graph6ParseError(f"byte {int(vals[bad[0]])} out of range 63..126",
                               offset=start + int(bad[0]))
    bits = np.unpackbits((vals - 63).reshape(-1, 1), axis=1)[:, 2:].ravel()[:nbits]
    adj = np.zeros((n, n), dtype=np.uint8)
    # graph6 stores the upper triangle column by column, equivalently the
    # strict lower triangle in row-major order
    rows, cols = np.tril_indices(n, -1)
    adj[rows, cols] = bits
    adj[cols, rows] = bits
    return Graph(n, adj, label=label)


def write_graph6(g: Graph) -> str:
    """Encode a Graph as a graph6 line; parse_graph6 round-trips it exactly."""
    n = g.n
    if n > GRAPH6_MAX_N:
        raise ValueError(f"vertex count {n} exceeds supported maximum {GRAPH6_MAX_N}")
    if n <= 62:
        header = chr(n + 63)
    elif n <= 258047:
        header = "~" + "".join(chr(((n >> s) & 63) + 63) for s in (12, 6, 0))
    else:
        header = "~~" + "".join(chr(((n >> s) & 63) + 63) for s in (30, 24, 18, 12, 6, 0))
    rows, cols = np.tril_indices(n, -1)
    bits = g.adj[rows, cols]
    pad = (-len(bits)) % 6
    bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    groups = bits.reshape(-1, 6)
    vals = np.packbits(np.concatenate([np.zeros((groups.shape[0], 2), dtype=np.uint8), groups], axis=1), axis=1)
    return header + "".join(chr(int(v) + 63) for v in vals[:, 0])


def read_graph6_file(path: str) -> list[Graph]:
    """Read graph6 lines (one graph per line); a '>>graph6<<' header is skipped."""
    graphs = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith(b">>graph6<<"):
                line = line[len(b">>graph6<<"):]
            if not line:
                continue
            try:
                graphs.append(parse_graph6(line, label=f"{path}:{lineno}"))
            except Graph6ParseError as exc:
                raise Graph6ParseError(f"{path}:{lineno}: {exc}", offset=exc.offset) from exc
    return graphs


# ---------------------------------------------------------------------------
# Strong regularity
# ---------------------------------------------------------------------------

def srg_parameters(g: Graph) -> SrgParams | None:
    """Return (n,k,lambda,mu) iff A*A = k*I + lambda*A + mu*(J-I-A) exactly.

    Non-strongly-regular input is a normal outcome and returns None.
    """
    if g.n < 2:
        raise ValueError("strong regularity needs at least two vertices")
    a = g.adj.astype(np.int64)
    deg = a.sum(axis=1)
    k = int(deg[0])
    if not np.all(deg == k):
        return None
    a2 = a @ a
    off = ~np.eye(g.n, dtype=bool)
    edge_vals = a2[(a == 1) & off]
    non_vals = a2[(a == 0) & off]
    lam = int(edge_vals[0]) if edge_vals.size else 0
    mu = int(non_vals[0]) if non_vals.size else 0
    expected = k * np.eye(g.n, dtype=np.int64) + lam * a + mu * (1 - np.eye(g.n, dtype=np.int64) - a)
    if not np.array_equal(a2, expected):
        return None
    return SrgParams(g.n, k, lam, mu)


# ---------------------------------------------------------------------------
# Named generators
# ---------------------------------------------------------------------------

def rook_graph(m: int) -> Graph:
    """Rook's graph on an m x m board: (i,j) ~ (i',j') iff same row xor column."""
    if m < 2:
        raise ValueError("rook graph needs board side m >= 2")
    i, j = np.divmod(np.arange(m * m), m)
    same_row = i[:, None] == i[None, :]
    same_col = j[:, None] == j[None, :]
    adj = (same_row ^ same_col).astype(np.uint8)
    return Graph(m * m, adj, label=f"rook:{m}")


def shrikhande() -> Graph:
    """Cayley graph on Z4 x Z4 with connection set {+-(1,0), +-(0,1), +-(1,1)}."""
    conn = {(1, 0), (3, 0), (0, 1), (0, 3), (1, 1), (3, 3)}
    a, b = np.divmod(np.arange(16), 4)
    da = (a[:, None] - a[None, :]) % 4
    db = (b[:, None] - b[None, :]) % 4
    adj = np.zeros((16, 16), dtype=np.uint8)
    for (x, y) in conn:
        adj |= ((da == x) & (db == y)).astype(np.uint8)
    return Graph(16, adj, label="shrikhande")


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    for p in range(2, int(q**0.5) + 1):
        if q % p == 0:
            return False
    return True


def paley(q: int) -> Graph:
    """Paley graph: x ~ y iff x - y is a nonzero quadratic residue mod q."""
    if not _is_prime(q) or q % 4 != 1:
        raise ValueError(f"paley graph needs a prime q = 1 (mod 4), got {q}")
    residues = {(x * x) % q for x in range(1, q)}
    diff = (np.arange(q)[:, None] - np.arange(q)[None, :]) % q
    adj = np.isin(diff, sorted(residues)).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    return Graph(q, adj, label=f"paley:{q}")


def cfi_pair(base: Graph) -> tuple[Graph, Graph]:
    """Untwisted and once-twisted gadget graphs over a base graph.

    Per base vertex of degree d the gadget has 2^(d-1) middle nodes (one per
    even-size subset of incident edges) and a 0/1 port pair per incident
    edge; a middle node attaches to the 1-port of edges in its subset and to
    the 0-port otherwise.  Base edges link ports of equal side; the twisted
    graph crosses the sides of the lexicographically first base edge.  The
    two outputs are non-isomorphic whenever the base is connected.
    """
    if not base.is_connected():
        raise ValueError("cfi base must be connected")
    degs = base.degrees()
    if degs.min() < 2:
        raise ValueError("cfi base must have minimum degree 2")
    edges = base.edges()
    incident = {v: [idx for idx, (a, b) in enumerate(edges) if v in (a, b)] for v in range(base.n)}

    keys = []
    for v in range(base.n):
        inc = incident[v]
        for size in range(0, len(inc) + 1, 2):
            for subset in itertools.combinations(inc, size):
                keys.append((v, 0, subset))
        for e in inc:
            for side in (0, 1):
                keys.append((v, 1, e, side))
    keys.sort()
    index = {key: i for i, key in enumerate(keys)}
    nn = len(keys)

    gadget_edges = []
    for v in range(base.n):
        inc = incident[v]
        for size in range(0, len(inc) + 1, 2):
            for subset in itertools.combinations(inc, size):
                mid = index[(v, 0, subset)]
                chosen = set(subset)
                for e in inc:
                    side = 1 if e in chosen else 0
                    gadget_edges.append((mid, index[(v, 1, e, side)]))

    def build(twist_edge: int | None, tag: str) -> Graph:
        adj = np.zeros((nn, nn), dtype=np.uint8)
        for (x, y) in gadget_edges:
            adj[x, y] = adj[y, x] = 1
        for e, (u, v) in enumerate(edges):
            if e == twist_edge:
                links = [((u, 1, e, 0), (v, 1, e, 1)), ((u, 1, e, 1), (v, 1, e, 0))]
            else:
                links = [((u, 1, e, 0), (v, 1, e, 0)), ((u, 1, e, 1), (v, 1, e, 1))]
            for ka, kb in links:
                adj[index[ka], index[kb]] = adj[index[kb], index[ka]] = 1
        stem = base.label or f"base{base.n}"
        return Graph(nn, adj, label=f"cfi{tag}({stem})")

    return build(None, "0"), build(0, "1")


# ---------------------------------------------------------------------------
# Vertex color refinement and the brute-force isomorphism oracle
# ---------------------------------------------------------------------------

def color_refinement(adj: np.ndarray, colors: np.ndarray | None = None) -> np.ndarray:
    """Stable vertex coloring; color ids are canonical (sorted-signature) ints."""
    n = adj.shape[0]
    nbrs = [np.flatnonzero(adj[v]) for v in range(n)]
    if colors is None:
        cur = [0] * n
    else:
        cur = [int(c) for c in colors]
    while True:
        sigs = [(cur[v], tuple(sorted(cur[w] for w in nbrs[v]))) for v in range(n)]
        lookup = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
        new = [lookup[s] for s in sigs]
        if len(set(new)) == len(set(cur)):
            return np.array(new, dtype=np.int64)
        cur = new


def _joint_refine(adjs, colorings):
    """Refine colorings of several graphs in a shared color language.

    Returns the refined colorings, or None as soon as the per-graph color
    histograms diverge (no isomorphism can exist).
    """
    nbrs_all = [[np.flatnonzero(a[v]) for v in range(a.shape[0])] for a in adjs]
    current = [list(c) for c in colorings]
    while True:
        sigs_all = [
            [(cur[v], tuple(sorted(cur[w] for w in nbrs[v]))) for v in range(len(cur))]
            for cur, nbrs in zip(current, nbrs_all)
        ]
        union = sorted(set().union(*[set(s) for s in sigs_all]))
        lookup = {sig: i for i, sig in enumerate(union)}
        new = [[lookup[s] for s in sigs] for sigs in sigs_all]
        first = np.unique(new[0], return_counts=True)
        for c in new[1:]:
            other = np.unique(c, return_counts=True)
            if not (np.array_equal(first[0], other[0]) and np.array_equal(first[1], other[1])):
                return None
        if all(len(set(c)) == len(set(o)) for c, o in zip(new, current)):
            return new
        current = new


def are_isomorphic_bruteforce(g: Graph, h: Graph, limit: int = ISO_DEFAULT_LIMIT) -> np.ndarray | None:
    """Exhaustive isomorphism test via individualization and refinement.

    Returns a permutation psi (as an array p with p[u] = image of u) with
    A_h[p[u], p[v]] = A_g[u, v] for all u, v, or None if no isomorphism
    exists.  Graphs larger than `limit` vertices are refused.
    """
    if g.n != h.n:
        return None
    if g.n > limit:
        raise SizeCapError(g.n, limit, what="isomorphism search")
    if g.edge_count() != h.edge_count():
        return None
    if sorted(g.degrees().tolist()) != sorted(h.degrees().tolist()):
        return None

    adj_g, adj_h = g.adj, h.adj
    n = g.n

    def search(cg, ch):
        refined = _joint_refine([adj_g, adj_h], [cg, ch])
        if refined is None:
            return None
        cg, ch = refined
        counts = {}
        for c in cg:
            counts[c] = counts.get(c, 0) + 1
        split = sorted((cnt, c) for c, cnt in counts.items() if cnt > 1)
        if not split:
            perm = np.empty(n, dtype=np.int64)
            pos_h = {c: v for v, c in enumerate(ch)}
            for v, c in enumerate(cg):
                perm[v] = pos_h[c]
            if np.array_equal(adj_h[np.ix_(perm, perm)], adj_g):
                return perm
            return None
        _, color = split[0]
        fresh = max(counts) + 1
        v = min(u for u in range(n) if cg[u] == color)
        for w in range(n):
            if ch[w] != color:
                continue
            cg2 = list(cg)
            ch2 = list(ch)
            cg2[v] = fresh
            ch2[w] = fresh
            found = search(cg2, ch2)
            if found is not None:
                return found
        return None

    return search([0] * n, [0] * n)
