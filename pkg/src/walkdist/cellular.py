"""Cellular algebras: closure by pair-coloring stabilization, structure
constants, cells, and weak-isomorphism certificates.

A basis is held as one n x n integer color matrix whose classes are the
basis relations.  All refinement keys are exact sorted multisets encoded as
integer arrays (never hashes), and final color ids are assigned by first
occurrence in row-major order, so results are deterministic and identical
across runs and thread counts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, SearchTimeout

# Soft bound on the scratch used per refinement chunk (int64 entries).
_CHUNK_BUDGET = 2_000_000
# Point sets up to this size refine with exact rounds only; larger ones are
# accelerated by sound randomized-projection rounds (see stabilize).
_EXACT_ONLY_POINTS = 512


def _check_deadline(deadline: float | None):
    if deadline is not None and time.monotonic() > deadline:
        raise SearchTimeout("refinement ran past its deadline")


def canonical_relabel(color: np.ndarray) -> np.ndarray:
    """Re-index colors by first occurrence in row-major order."""
    flat = color.ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inverse].reshape(color.shape)


def _combine(color: np.ndarray, extra: np.ndarray) -> np.ndarray:
    """Refine an integer coloring by the value classes of `extra`."""
    _, inv_a = np.unique(color.ravel(), return_inverse=True)
    _, inv_b = np.unique(extra.ravel(), return_inverse=True)
    width = int(inv_b.max()) + 1
    _, merged = np.unique(inv_a * width + inv_b, return_inverse=True)
    return merged.reshape(color.shape)


def initial_pair_coloring(seeds: list[np.ndarray], n: int) -> np.ndarray:
    """Starting coloring: diagonal flag joined with each seed's entries.

    Entries of the transposed seeds are folded in as well so the stable
    partition is closed under transposition even for asymmetric seeds.
    """
    color = np.eye(n, dtype=np.int64)
    for seed in seeds:
        seed = np.asarray(seed)
        if seed.shape != (n, n):
            raise ValueError(f"seed shape {seed.shape} does not match {n} points")
        color = _combine(color, seed)
        color = _combine(color, seed.T)
    return canonical_relabel(color)


def _split_classes(color: np.ndarray, touched_rows=None, touched_cols=None,
                   deadline: float | None = None) -> tuple[np.ndarray, int, np.ndarray, np.ndarray]:
    """One refinement pass over every splittable class.

    The new color of a pair (u,v) is its old color joined with the sorted
    multiset over w of (color(u,w), color(w,v)).  Classes of size one can
    never split and are skipped; if touched masks are given, classes with no
    pair in a touched row or column are known stable and skipped too.

    Returns (color, number_of_splits, newly_touched_rows, newly_touched_cols).
    """
    n = color.shape[0]
    flat = color.ravel()
    m = int(flat.max()) + 1
    order = np.argsort(flat, kind="stable")
    sorted_colors = flat[order]
    bounds = np.searchsorted(sorted_colors, np.arange(m + 1))
    color = color.copy()
    color_t = np.ascontiguousarray(color.T)
    next_id = m
    splits = 0
    new_rows = np.zeros(n, dtype=bool)
    new_cols = np.zeros(n, dtype=bool)
    chunk = max(16, _CHUNK_BUDGET // max(n, 1))

    for c in range(m):
        lo, hi = bounds[c], bounds[c + 1]
        size = hi - lo
        if size <= 1:
            continue
        idx = order[lo:hi]            # flat pair indices, row-major ascending
        us, vs = np.divmod(idx, n)
        if touched_rows is not None:
            if not (touched_rows[us].any() or touched_cols[vs].any()):
                continue
        _check_deadline(deadline)

        pack = next_id  # in-round splits may exceed m; pack with the running bound
        narrow = pack * (pack + 1) < 2**31  # int32 halves the sort cost
        groups = np.empty(size, dtype=np.int64)
        rep_lookup: dict[bytes, int] = {}
        for s in range(0, size, chunk):
            part_u = us[s:s + chunk]
            part_v = vs[s:s + chunk]
            codes = color[part_u] * pack + color_t[part_v]
            if narrow:
                codes = codes.astype(np.int32)
            codes.sort(axis=1)
            for i in range(codes.shape[0]):
                key = codes[i].tobytes()
                gid = rep_lookup.setdefault(key, len(rep_lookup))
                groups[s + i] = gid
        ngroups = len(rep_lookup)
        if ngroups <= 1:
            continue

        # The group first seen (in row-major pair order) keeps the old color;
        # dict insertion order is first-occurrence order already.
        relabel = np.empty(ngroups, dtype=np.int64)
        relabel[0] = c
        relabel[1:] = next_id + np.arange(ngroups - 1)
        next_id += ngroups - 1
        splits += ngroups - 1

        new_colors = relabel[groups]
        moved = new_colors != c
        color[us[moved], vs[moved]] = new_colors[moved]
        color_t[vs[moved], us[moved]] = new_colors[moved]
        new_rows[us[moved]] = True
        new_cols[vs[moved]] = True
    return color, splits, new_rows, new_cols


def _projection_round(color: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """One sound refinement pass via a random linear projection.

    S(u,v) = sum_w w1[color(u,w)] * w2[color(w,v)] is one dense product;
    pairs with equal signature multisets always get equal S, so splitting
    classes by S never separates pairs an exact round would keep together.
    Distinct multisets may collide (missed split), which the exact
    confirmation round in `stabilize` catches.
    """
    n = color.shape[0]
    m = int(color.max()) + 1
    # products of two 20-bit weights summed over n <= 4096 points stay exact
    # in float64 (< 2^53)
    w1 = rng.integers(1, 1 << 20, size=m, dtype=np.int64)
    w2 = rng.integers(1, 1 << 20, size=m, dtype=np.int64)
    sig = w1[color].astype(np.float64) @ w2[color].astype(np.float64)

    flat_color = color.ravel()
    flat_sig = sig.ravel()
    order = np.lexsort((flat_sig, flat_color))
    sc = flat_color[order]
    ss = flat_sig[order]
    boundary = np.empty(order.size, dtype=bool)
    boundary[0] = True
    boundary[1:] = (sc[1:] != sc[:-1]) | (ss[1:] != ss[:-1])
    group_sorted = np.cumsum(boundary) - 1
    ngroups = int(group_sorted[-1]) + 1
    if ngroups == m:
        return color, 0
    groups = np.empty(order.size, dtype=np.int64)
    groups[order] = group_sorted
    # keep ids deterministic: relabel groups by first occurrence row-major
    new_color = canonical_relabel(groups.reshape(n, n))
    return new_color, ngroups - m


def stabilize(color: np.ndarray, deadline: float | None = None) -> np.ndarray:
    """Iterate refinement passes to the coarsest stable pair coloring.

    Small point sets use exact rounds throughout.  Larger ones interleave
    sound randomized-projection rounds (fast, may only under-split) with
    exact confirmation rounds, so the fixpoint is exactly the partition the
    all-exact iteration would produce; the seed is fixed, so runs are
    deterministic.
    """
    n = color.shape[0]
    if n <= _EXACT_ONLY_POINTS:
        touched_rows = None
        touched_cols = None
        while True:
            color, splits, rows, cols = _split_classes(color, touched_rows, touched_cols, deadline)
            if splits == 0:
                if touched_rows is None:
                    break
                # the incremental pass was clean; confirm with one full pass
                touched_rows = None
                touched_cols = None
                continue
            touched_rows, touched_cols = rows, cols
        return canonical_relabel(color)

    rng = np.random.default_rng(0x5EED)
    while True:
        while True:
            _check_deadline(deadline)
            color, splits = _projection_round(color, rng)
            if splits == 0:
                break
        color, splits, _, _ = _split_classes(color, deadline=deadline)
        if splits == 0:
            return canonical_relabel(color)


def refine_step(coloring: np.ndarray) -> np.ndarray:
    """One synchronous refinement round on a pair coloring.

    The input must separate diagonal from off-diagonal pairs.  Color ids of
    the result are assigned by first occurrence in row-major order; the
    color count never decreases, and equality of counts means a fixpoint.
    """
    coloring = np.asarray(coloring)
    n = coloring.shape[0]
    if coloring.shape != (n, n):
        raise ValueError("coloring must be a square integer matrix")
    diag = set(np.diag(coloring).tolist())
    off = set(coloring[~np.eye(n, dtype=bool)].tolist())
    if diag & off:
        raise ValueError("coloring must separate diagonal from off-diagonal pairs")
    base = canonical_relabel(coloring)
    m = int(base.max()) + 1
    keys = np.empty((n * n, n + 1), dtype=np.int64)
    keys[:, 0] = base.ravel()
    for u in range(n):
        block = base[u][:, None] * m + base  # (w, v) pair codes
        keys[u * n:(u + 1) * n, 1:] = np.sort(block, axis=0).T
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    return canonical_relabel(inverse.reshape(n, n))


# ---------------------------------------------------------------------------
# Basis objects
# ---------------------------------------------------------------------------

@dataclass
class Relation:
    """One 0-1 basis relation, stored as a class of an owner color matrix."""

    id: int
    dim: int
    _owner: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return (self._owner == self.id).astype(np.uint8)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self._owner == self.id))


@dataclass
class CellularBasis:
    point_count: int
    color: np.ndarray                      # (n, n) int64 stable coloring
    size: int                              # number of basis relations
    diag_ids: tuple[int, ...]
    cells: list[np.ndarray]                # sorted vertex arrays, one per diag id
    cell_of_point: np.ndarray
    adjoint: np.ndarray                    # involution on relation ids
    traces: np.ndarray
    sizes: np.ndarray                      # support sizes m_r = tr(R R^T)
    structure: np.ndarray                  # (K, 4) rows (t, r, s, p), lex sorted
    canon: list[tuple]                     # invariant fingerprint per relation
    seed_values: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def from_color_matrix(cls, color: np.ndarray, seeds: list[np.ndarray] | None = None,
                          verify: bool = True) -> "CellularBasis":
        color = canonical_relabel(np.asarray(color, dtype=np.int64))
        n = color.shape[0]
        flat = color.ravel()
        m = int(flat.max()) + 1
        uniq, first = np.unique(flat, return_index=True)
        if not np.array_equal(uniq, np.arange(m)):
            raise ConsistencyError("color matrix is not canonically labeled")
        sizes = np.bincount(flat, minlength=m).astype(np.int64)
        rep_u, rep_v = np.divmod(first, n)

        diag_colors = np.unique(np.diag(color))
        traces = np.bincount(np.diag(color), minlength=m).astype(np.int64)
        if int(sizes[diag_colors].sum()) != n:
            raise ConsistencyError("some diagonal relation leaks off the diagonal")

        adjoint = color[rep_v, rep_u]
        if not np.array_equal(adjoint[color], color.T):
            raise ConsistencyError("partition is not closed under transposition")
        if not np.array_equal(adjoint[adjoint], np.arange(m)):
            raise ConsistencyError("transposition map is not an involution")

        cell_of_point = np.searchsorted(diag_colors, np.diag(color))
        cells = [np.flatnonzero(np.diag(color) == c) for c in diag_colors]

        quads = structure_from_color(color, verify=verify)

        out_deg = np.array([np.count_nonzero(color[rep_u[r]] == r) for r in range(m)], dtype=np.int64)
        in_deg = np.array([np.count_nonzero(color[:, rep_v[r]] == r) for r in range(m)], dtype=np.int64)
        src_cell = cell_of_point[rep_u]
        dst_cell = cell_of_point[rep_v]
        cell_sizes = np.array([len(c) for c in cells], dtype=np.int64)
        canon = [
            (
                int(traces[r] > 0),
                int(traces[r]),
                int(sizes[r]),
                int(out_deg[r]),
                int(in_deg[r]),
                int(cell_sizes[src_cell[r]]),
                int(cell_sizes[dst_cell[r]]),
                int(adjoint[r] == r),
            )
            for r in range(m)
        ]

        seed_values = []
        if seeds:
            for seed in seeds:
                seed = np.asarray(seed)
                vals = seed.ravel()[first]
                seed_values.append(vals)

        return cls(
            point_count=n,
            color=color,
            size=m,
            diag_ids=tuple(int(c) for c in diag_colors),
            cells=cells,
            cell_of_point=cell_of_point,
            adjoint=adjoint,
            traces=traces,
            sizes=sizes,
            structure=quads,
            canon=canon,
            seed_values=seed_values,
        )

    # -- access helpers ----------------------------------------------------

    def relations(self) -> list[Relation]:
        return [Relation(r, self.point_count, self.color) for r in range(self.size)]

    def relation_matrix(self, r: int) -> np.ndarray:
        self._check_relation(r)
        return (self.color == r).astype(np.uint8)

    def sum_of(self, ids) -> np.ndarray:
        return np.isin(self.color, np.asarray(sorted(ids))).astype(np.uint8)

    def p(self, t: int, r: int, s: int) -> int:
        """Structure constant p[t][r][s] in R_r R_s = sum_t p[t][r][s] R_t."""
        q = self.structure.astype(np.int64)
        keys = (q[:, 0] * self.size + q[:, 1]) * self.size + q[:, 2]
        code = (t * self.size + r) * self.size + s
        lo = int(np.searchsorted(keys, code))
        if lo < len(keys) and keys[lo] == code:
            return int(q[lo, 3])
        return 0

    def member_ids(self, matrix: np.ndarray) -> np.ndarray | None:
        """Relation ids T with matrix = sum of R_t over T, or None."""
        matrix = np.asarray(matrix)
        if matrix.shape != self.color.shape:
            raise ValueError("matrix dimension does not match the basis point set")
        vals = np.unique(matrix)
        if not np.all(np.isin(vals, (0, 1))):
            return None
        ids = np.unique(self.color[matrix == 1])
        if np.array_equal(self.sum_of(ids), matrix.astype(np.uint8)):
            return ids
        return None

    def decompose_over_values(self, matrix: np.ndarray) -> np.ndarray:
        """Constant value of `matrix` on each relation (raises if not constant)."""
        matrix = np.asarray(matrix)
        flat = matrix.ravel()
        order = np.argsort(self.color.ravel(), kind="stable")
        vals = flat[order]
        bounds = np.searchsorted(self.color.ravel()[order], np.arange(self.size + 1))
        out = np.empty(self.size, dtype=matrix.dtype)
        for r in range(self.size):
            seg = vals[bounds[r]:bounds[r + 1]]
            if seg.size == 0 or np.any(seg != seg[0]):
                raise ConsistencyError(f"matrix is not constant on relation {r}")
            out[r] = seg[0]
        return out

    def _check_relation(self, r: int):
        if not 0 <= r < self.size:
            raise ValueError(f"relation index {r} out of range 0..{self.size - 1}")


def structure_from_color(color: np.ndarray, verify: bool = True) -> np.ndarray:
    """Exact structure tensor of a stable coloring as (t, r, s, p) rows.

    With verify=True a full refinement pass re-checks that every product
    count is constant on every class; a split means the partition is not a
    cellular basis and raises ConsistencyError.
    """
    n = color.shape[0]
    m = int(color.max()) + 1
    if verify:
        _, splits, _, _ = _split_classes(color)
        if splits:
            raise ConsistencyError("products do not decompose: partition is unstable")
    flat = color.ravel()
    _, first = np.unique(flat, return_index=True)
    rep_u, rep_v = np.divmod(first, n)
    rows = []
    for t in range(m):
        codes = color[rep_u[t]].astype(np.int64) * m + color[:, rep_v[t]]
        uniq, counts = np.unique(codes, return_counts=True)
        r, s = np.divmod(uniq, m)
        block = np.stack([np.full(uniq.shape, t, dtype=np.int64), r, s, counts.astype(np.int64)], axis=1)
        rows.append(block.astype(np.int32))
    quads = np.concatenate(rows, axis=0)
    order = np.lexsort((quads[:, 2], quads[:, 1], quads[:, 0]))
    return np.ascontiguousarray(quads[order])


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def cellular_closure(seeds: list[np.ndarray], n: int | None = None,
                     deadline: float | None = None) -> CellularBasis:
    """Basis of the smallest cellular algebra containing the seeds, I and J."""
    seeds = [np.asarray(s) for s in seeds]
    if n is None:
        if not seeds:
            raise ValueError("point count n is required when no seeds are given")
        n = seeds[0].shape[0]
    for s in seeds:
        if s.shape != (n, n):
            raise ValueError(f"seed shape {s.shape} does not match {n} points")
    color = initial_pair_coloring(seeds, n)
    color = stabilize(color, deadline=deadline)
    return CellularBasis.from_color_matrix(color, seeds=seeds, verify=False)


def graph_closure(g, deadline: float | None = None) -> CellularBasis:
    """Cellular closure of a graph's adjacency matrix."""
    return cellular_closure([g.adj], n=g.n, deadline=deadline)


def structure_constants(basis: CellularBasis) -> np.ndarray:
    """Recompute and exactly verify the structure tensor of a basis."""
    return structure_from_color(basis.color, verify=True)


def trace_of(basis: CellularBasis, rel: int) -> int:
    basis._check_relation(rel)
    return int(basis.traces[rel])


def cell_value(basis: CellularBasis, rel: int, cell: int) -> int:
    """q_R(X): constant of R o I_X; 1 iff rel is the diagonal relation of X."""
    basis._check_relation(rel)
    if not 0 <= cell < len(basis.cells):
        raise ValueError(f"cell index {cell} out of range 0..{len(basis.cells) - 1}")
    return int(basis.diag_ids[cell] == rel)


def is_member(basis: CellularBasis, matrix: np.ndarray) -> bool:
    """True iff matrix is a 0-1 sum of basis relations."""
    return basis.member_ids(matrix) is not None


# ---------------------------------------------------------------------------
# Weak isomorphisms
# ---------------------------------------------------------------------------

@dataclass
class RelationBijection:
    """Certificate: a basis-relation bijection preserving the full algebra."""

    source: CellularBasis
    target: CellularBasis
    map: np.ndarray

    def inverse_map(self) -> np.ndarray:
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(len(self.map))
        return inv

    def cell_map(self) -> np.ndarray:
        """Induced bijection on cells (source cell index -> target cell index)."""
        out = np.empty(len(self.source.cells), dtype=np.int64)
        for i, d in enumerate(self.source.diag_ids):
            out[i] = self.target.diag_ids.index(int(self.map[d]))
        return out

    def verify(self) -> bool:
        a, b = self.source, self.target
        if a.size != b.size or len(self.map) != a.size:
            return False
        if not np.array_equal(np.sort(self.map), np.arange(a.size)):
            return False
        if sorted(self.map[list(a.diag_ids)].tolist()) != sorted(b.diag_ids):
            return False
        if not np.array_equal(self.map[a.adjoint], b.adjoint[self.map]):
            return False
        if not np.array_equal(a.traces, b.traces[self.map]):
            return False
        if not np.array_equal(a.sizes, b.sizes[self.map]):
            return False
        cmap = self.cell_map()
        for i, cell in enumerate(a.cells):
            if len(cell) != len(b.cells[cmap[i]]):
                return False
        mapped = self.map[self.source.structure[:, :3]]
        quads = np.concatenate([mapped, self.source.structure[:, 3:4]], axis=1)
        order = np.lexsort((quads[:, 2], quads[:, 1], quads[:, 0]))
        return np.array_equal(quads[order], self.target.structure)


def _involvement_rows(basis: CellularBasis) -> np.ndarray:
    """Rows (rel, slot, p, t, r, s) listing every structure entry a relation
    participates in, one row per occupied slot."""
    q = basis.structure
    k = q.shape[0]
    out = np.empty((3 * k, 6), dtype=np.int64)
    for slot in range(3):
        block = out[slot * k:(slot + 1) * k]
        block[:, 0] = q[:, slot]
        block[:, 1] = slot
        block[:, 2] = q[:, 3]
        block[:, 3:6] = q[:, :3]
    return out


def _fingerprint_colors(ba: CellularBasis, bb: CellularBasis,
                        anchors_a: list, anchors_b: list) -> tuple[np.ndarray, np.ndarray] | None:
    """Joint invariant refinement over the relations of two bases.

    The refinement key of a relation joins its color, its adjoint's color,
    and the exact sorted multiset of (slot, p, colors of the structure
    triple) over every structure entry it appears in.  Returns stable
    per-relation colors in a shared language, or None as soon as the two
    sides' color histograms diverge (no bijection can exist).
    """
    m = ba.size
    init_a = [ba.canon[r] + tuple(anchors_a[r]) for r in range(m)]
    init_b = [bb.canon[r] + tuple(anchors_b[r]) for r in range(m)]
    lookup = {key: i for i, key in enumerate(sorted(set(init_a) | set(init_b)))}
    ca = np.array([lookup[k] for k in init_a], dtype=np.int64)
    cb = np.array([lookup[k] for k in init_b], dtype=np.int64)

    rows_a = _involvement_rows(ba)
    rows_b = _involvement_rows(bb)
    na_rows, nb_rows = rows_a.shape[0], rows_b.shape[0]

    while True:
        # exact row content: (slot, p, color t, color r, color s)
        content = np.empty((na_rows + nb_rows, 5), dtype=np.int64)
        content[:na_rows, 0] = rows_a[:, 1]
        content[:na_rows, 1] = rows_a[:, 2]
        content[:na_rows, 2:5] = ca[rows_a[:, 3:6]]
        content[na_rows:, 0] = rows_b[:, 1]
        content[na_rows:, 1] = rows_b[:, 2]
        content[na_rows:, 2:5] = cb[rows_b[:, 3:6]]
        _, rank = np.unique(content, axis=0, return_inverse=True)
        rank = rank.ravel()

        def relation_keys(colors, rows, ranks, basis):
            order = np.lexsort((ranks, rows[:, 0]))
            rel_sorted = rows[order, 0]
            rank_sorted = ranks[order]
            bounds = np.searchsorted(rel_sorted, np.arange(m + 1))
            return [
                (
                    int(colors[r]),
                    int(colors[basis.adjoint[r]]),
                    rank_sorted[bounds[r]:bounds[r + 1]].tobytes(),
                )
                for r in range(m)
            ]

        ka = relation_keys(ca, rows_a, rank[:na_rows], ba)
        kb = relation_keys(cb, rows_b, rank[na_rows:], bb)
        lookup = {key: i for i, key in enumerate(sorted(set(ka) | set(kb)))}
        na = np.array([lookup[k] for k in ka], dtype=np.int64)
        nb = np.array([lookup[k] for k in kb], dtype=np.int64)
        ha = np.unique(na, return_counts=True)
        hb = np.unique(nb, return_counts=True)
        if not (np.array_equal(ha[0], hb[0]) and np.array_equal(ha[1], hb[1])):
            return None
        if len(ha[0]) == len(np.unique(ca)):
            return na, nb
        ca, cb = na, nb


# Refinement state above this many involvement rows would not fit in memory;
# the search reports a timeout (inconclusive) instead of attempting it.
_SEARCH_ROW_LIMIT = 120_000_000


def _bijection_search(ba: CellularBasis, bb: CellularBasis,
                      anchors_a: list, anchors_b: list,
                      deadline: float | None = None) -> RelationBijection | None:
    """Exhaustive backtracking over color-compatible relation bijections."""
    if ba.size != bb.size:
        return None
    # cheap rejection on exact invariant histograms before any heavy lifting
    init_a = sorted(ba.canon[r] + tuple(anchors_a[r]) for r in range(ba.size))
    init_b = sorted(bb.canon[r] + tuple(anchors_b[r]) for r in range(bb.size))
    if init_a != init_b:
        return None
    if 3 * (ba.structure.shape[0] + bb.structure.shape[0]) > _SEARCH_ROW_LIMIT:
        raise SearchTimeout("relation bijection search state would exceed memory budget")
    fingerprints = _fingerprint_colors(ba, bb, anchors_a, anchors_b)
    if fingerprints is None:
        return None
    ca, cb = fingerprints
    m = ba.size

    targets_by_color: dict[int, list[int]] = {}
    for r in range(m):
        targets_by_color.setdefault(int(cb[r]), []).append(r)
    candidates = [targets_by_color.get(int(ca[r]), []) for r in range(m)]
    if any(not c for c in candidates):
        return None

    # quads touching each relation, for incremental consistency checks
    quads = ba.structure
    touching: list[list[int]] = [[] for _ in range(m)]
    for i in range(quads.shape[0]):
        for slot in range(3):
            touching[int(quads[i, slot])].append(i)
    bq = bb.structure.astype(np.int64)
    b_keys = (bq[:, 0] * m + bq[:, 1]) * m + bq[:, 2]
    b_vals = bq[:, 3]

    def target_p(t, r, s):
        code = (t * m + r) * m + s
        lo = int(np.searchsorted(b_keys, code))
        if lo < len(b_keys) and b_keys[lo] == code:
            return int(b_vals[lo])
        return 0

    assign = np.full(m, -1, dtype=np.int64)
    used = np.zeros(m, dtype=bool)
    order = sorted(range(m), key=lambda r: (len(candidates[r]), r))
    nodes = 0

    def consistent(r: int) -> bool:
        for qi in touching[r]:
            t, rr, ss, p = quads[qi]
            at, ar, as_ = assign[t], assign[rr], assign[ss]
            if at < 0 or ar < 0 or as_ < 0:
                continue
            if target_p(at, ar, as_) != p:
                return False
        return True

    # iterative backtracking (relation counts can exceed the recursion limit)
    cursor = [0] * (m + 1)
    pos = 0
    while pos < m:
        r = order[pos]
        ra = int(ba.adjoint[r])
        cands = candidates[r]
        i = cursor[pos]
        advanced = False
        while i < len(cands):
            cand = cands[i]
            i += 1
            if used[cand]:
                continue
            if assign[ra] >= 0 and int(bb.adjoint[assign[ra]]) != cand:
                continue
            nodes += 1
            if nodes % 1024 == 0:
                _check_deadline(deadline)
            assign[r] = cand
            used[cand] = True
            if consistent(r):
                cursor[pos] = i
                pos += 1
                cursor[pos] = 0
                advanced = True
                break
            assign[r] = -1
            used[cand] = False
        if advanced:
            continue
        if pos == 0:
            return None
        pos -= 1
        prev = order[pos]
        used[assign[prev]] = False
        assign[prev] = -1
    cert = RelationBijection(ba, bb, assign.copy())
    if not cert.verify():
        raise ConsistencyError("search produced a bijection that fails verification")
    return cert


def matrix_similarity(ma: np.ndarray, mb: np.ndarray,
                      timeout_ms: int | None = None) -> RelationBijection | None:
    """Weak isomorphism [M] -> [M'] carrying M's value decomposition to M''s,
    or None (the search is exhaustive over compatible bijections)."""
    deadline = None if timeout_ms is None else time.monotonic() + timeout_ms / 1000.0
    ma = np.asarray(ma)
    mb = np.asarray(mb)
    if ma.shape != mb.shape:
        return None
    ba = cellular_closure([ma], deadline=deadline)
    bb = cellular_closure([mb], deadline=deadline)
    anchors_a = [(float(v),) for v in ba.seed_values[0]]
    anchors_b = [(float(v),) for v in bb.seed_values[0]]
    cert = _bijection_search(ba, bb, anchors_a, anchors_b, deadline=deadline)
    if cert is not None:
        for value in np.unique(ma):
            ids = [r for r in range(ba.size) if anchors_a[r][0] == float(value)]
            image = cert.map[ids].tolist()
            if not np.array_equal(bb.sum_of(image), (mb == value).astype(np.uint8)):
                raise ConsistencyError("certificate does not carry the seed decomposition")
    return cert


def weak_equivalence(g, h, timeout_ms: int | None = None):
    """Certificate of 1-equivalence: a weak isomorphism [G] -> [H] with
    the adjacency relation-sum mapped across.  None if no such bijection
    exists (the search is exhaustive)."""
    if g.n != h.n:
        return None
    return matrix_similarity(g.adj, h.adj, timeout_ms=timeout_ms)
