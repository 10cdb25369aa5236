"""Higher-order machinery on k-tuples of vertices: the Sym(V)-centralizer
algebra, k-extensions of graph closures, cylindric relations, joint k-tuple
WL comparison, and k-equivalence evidence certificates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cellular import (
    CellularBasis,
    Relation,
    RelationBijection,
    _bijection_search,
    cellular_closure,
    graph_closure,
    initial_pair_coloring,
    stabilize,
    weak_equivalence,
)
from .errors import ConsistencyError, SearchTimeout, SizeCapError
from .graphs import Graph, _joint_refine

DEFAULT_POINT_CAP = 4096


def _require_within_cap(points: int, cap: int, what: str):
    if points > cap:
        raise SizeCapError(points, cap, what=what)


def tuple_digits(n: int, k: int) -> np.ndarray:
    """Coordinates of all n^k tuples, index = sum d_i * n^(k-1-i)."""
    idx = np.arange(n**k)
    digits = np.empty((n**k, k), dtype=np.int64)
    for i in range(k - 1, -1, -1):
        idx, digits[:, i] = np.divmod(idx, n)
    return digits


# ---------------------------------------------------------------------------
# Centralizer algebra of Sym(V) acting entrywise on V^k
# ---------------------------------------------------------------------------

def equality_patterns(slots: int, max_blocks: int) -> list[tuple[int, ...]]:
    """All set partitions of `slots` positions with at most max_blocks blocks,
    as restricted growth strings in lexicographic order."""
    out: list[tuple[int, ...]] = []

    def grow(prefix: list[int], used: int):
        if len(prefix) == slots:
            out.append(tuple(prefix))
            return
        for b in range(min(used + 1, max_blocks)):
            prefix.append(b)
            grow(prefix, max(used, b + 1))
            prefix.pop()

    grow([], 0)
    return out


def _pattern_matrix(n: int, k: int) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Matrix of equality-pattern ids over V^k x V^k plus the pattern list.

    The pattern of a pair (x, y) is the restricted growth string of the
    combined tuple (x_1..x_k, y_1..y_k).
    """
    patterns = equality_patterns(2 * k, n)
    code_of = {}
    for pid, pat in enumerate(patterns):
        code = 0
        for label in pat:
            code = code * (2 * k) + label
        code_of[code] = pid
    npoints = n**k
    digits = tuple_digits(n, k)
    lut_codes = np.array(sorted(code_of), dtype=np.int64)
    lut_ids = np.array([code_of[c] for c in lut_codes], dtype=np.int64)

    out = np.empty((npoints, npoints), dtype=np.int64)
    rows_per_chunk = max(1, 2_000_000 // npoints)
    for start in range(0, npoints, rows_per_chunk):
        stop = min(npoints, start + rows_per_chunk)
        cr = stop - start
        combined = np.concatenate([
            np.repeat(digits[start:stop], npoints, axis=0),
            np.tile(digits, (cr, 1)),
        ], axis=1)  # (cr * npoints, 2k)
        labels = np.zeros_like(combined)
        fresh = np.zeros(combined.shape[0], dtype=np.int64)
        for j in range(2 * k):
            assigned = np.full(combined.shape[0], -1, dtype=np.int64)
            for i in range(j):
                hit = (assigned < 0) & (combined[:, i] == combined[:, j])
                assigned[hit] = labels[hit, i]
            new = assigned < 0
            assigned[new] = fresh[new]
            fresh[new] += 1
            labels[:, j] = assigned
        codes = np.zeros(combined.shape[0], dtype=np.int64)
        for j in range(2 * k):
            codes = codes * (2 * k) + labels[:, j]
        out[start:stop] = lut_ids[np.searchsorted(lut_codes, codes)].reshape(cr, npoints)
    return out, patterns


def centralizer_basis(n: int, k: int, cap: int = DEFAULT_POINT_CAP) -> list[Relation]:
    """Basis of Z(Sym(V), V^k): one 0-1 relation per equality pattern of a
    pair of k-tuples (set partitions of the 2k coordinates into <= n blocks)."""
    if n < 1 or k < 1:
        raise ValueError("centralizer basis needs n >= 1 and k >= 1")
    _require_within_cap(n**k, cap, what="tuple space")
    matrix, patterns = _pattern_matrix(n, k)
    return [Relation(pid, n**k, matrix) for pid in range(len(patterns))]


# ---------------------------------------------------------------------------
# k-extension
# ---------------------------------------------------------------------------

def _tensor_code(base_color: np.ndarray, digits: np.ndarray) -> np.ndarray:
    """Code matrix of the k-fold tensor partition of the base closure:
    entry (x, y) encodes the tuple of base colors (c(x_i, y_i))_i."""
    m0 = int(base_color.max()) + 1
    npoints = digits.shape[0]
    code = np.zeros((npoints, npoints), dtype=np.int64)
    for i in range(digits.shape[1]):
        code = code * m0 + base_color[np.ix_(digits[:, i], digits[:, i])]
    return code


def k_extension(g: Graph, k: int, cap: int = DEFAULT_POINT_CAP,
                deadline: float | None = None,
                base: CellularBasis | None = None) -> CellularBasis:
    """Cellular closure, on k-tuples, of the tensor power of [G] together
    with the Sym(V) centralizer algebra.

    The returned basis carries two seed values per relation: the tensor-cell
    code and the centralizer pattern id of its support.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    npoints = g.n**k
    _require_within_cap(npoints, cap, what="tuple space")
    if base is None:
        base = graph_closure(g, deadline=deadline)
    digits = tuple_digits(g.n, k)
    tensor = _tensor_code(base.color, digits)
    pattern, _ = _pattern_matrix(g.n, k)
    color = initial_pair_coloring([tensor, pattern], npoints)
    color = stabilize(color, deadline=deadline)
    ext = CellularBasis.from_color_matrix(color, seeds=[tensor, pattern], verify=False)
    ext.base = base          # type: ignore[attr-defined]
    ext.order = k            # type: ignore[attr-defined]
    return ext


def extension_tensor_cells(ext: CellularBasis, k: int) -> np.ndarray:
    """Per-relation tuple of base relation ids (decoded tensor-cell code)."""
    base: CellularBasis = ext.base  # type: ignore[attr-defined]
    codes = ext.seed_values[0].astype(np.int64)
    m0 = base.size
    out = np.empty((ext.size, k), dtype=np.int64)
    for i in range(k - 1, -1, -1):
        codes, out[:, i] = np.divmod(codes, m0)
    return out


def cylindric(rels: list[list[np.ndarray]], n: int | None = None,
              cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """Entrywise product Cyl(x, y) = prod_{i,j} R[i][j](x_i, y_j) on V^k."""
    k = len(rels)
    if k < 1 or any(len(row) != k for row in rels):
        raise ValueError("cylindric needs a k x k array of relation matrices")
    mats = [[np.asarray(rels[i][j]) for j in range(k)] for i in range(k)]
    if n is None:
        n = mats[0][0].shape[0]
    for row in mats:
        for mat in row:
            if mat.shape != (n, n):
                raise ValueError("all cylindric entries must be n x n matrices")
            if not np.all(np.isin(np.unique(mat), (0, 1))):
                raise ValueError("cylindric entries must be 0-1 relation sums")
    npoints = n**k
    _require_within_cap(npoints, cap, what="tuple space")
    digits = tuple_digits(n, k)
    out = np.ones((npoints, npoints), dtype=np.uint8)
    for i in range(k):
        for j in range(k):
            out &= mats[i][j][np.ix_(digits[:, i], digits[:, j])].astype(np.uint8)
    return out


def permutation_relation(n: int, k: int, sigma: tuple[int, ...],
                         cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """Matrix of the particle permutation sigma on V^k: 1 at (x, y) iff
    x_i = y_sigma(i) for all coordinates i."""
    eye = np.eye(n, dtype=np.uint8)
    ones = np.ones((n, n), dtype=np.uint8)
    rels = [[eye if sigma[i] == j else ones for j in range(k)] for i in range(k)]
    return cylindric(rels, n=n, cap=cap)


# ---------------------------------------------------------------------------
# Joint k-tuple WL comparison
# ---------------------------------------------------------------------------

def k_wl_compare(g: Graph, h: Graph, k: int, cap: int = DEFAULT_POINT_CAP) -> bool:
    """True iff joint k-tuple WL refinement on the disjoint union ends with
    different stable color histograms over G-tuples and H-tuples.

    For k = 1 this is classic color refinement by neighbor multisets.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if g.n != h.n:
        return True
    _require_within_cap(g.n**k, cap, what="tuple space")
    if k == 1:
        return _joint_refine([g.adj, h.adj], [[0] * g.n, [0] * h.n]) is None

    nu = g.n + h.n
    union = np.zeros((nu, nu), dtype=np.uint8)
    union[:g.n, :g.n] = g.adj
    union[g.n:, g.n:] = h.adj
    total = nu**k
    digits = tuple_digits(nu, k)

    atoms = np.zeros(total, dtype=np.int64)
    for i in range(k):
        for j in range(k):
            val = np.where(digits[:, i] == digits[:, j], 2,
                           union[digits[:, i], digits[:, j]].astype(np.int64))
            atoms = atoms * 3 + val
    _, colors = np.unique(atoms, return_inverse=True)

    strides = np.array([nu**(k - 1 - i) for i in range(k)], dtype=np.int64)
    base_idx = np.arange(total, dtype=np.int64)
    pure_g = np.all(digits < g.n, axis=1)
    pure_h = np.all(digits >= g.n, axis=1)

    def hist(colors, mask):
        vals, counts = np.unique(colors[mask], return_counts=True)
        return vals.tolist(), counts.tolist()

    while True:
        # signature of a tuple: its color plus the sorted multiset over w of
        # the k-tuple of colors obtained by writing w into each position
        replaced = np.empty((total, nu, k), dtype=np.int64)
        for j in range(k):
            start = base_idx - digits[:, j] * strides[j]
            replaced[:, :, j] = colors[start[:, None] + np.arange(nu)[None, :] * strides[j]]
        _, codes = np.unique(replaced.reshape(total * nu, k), axis=0, return_inverse=True)
        codes = codes.reshape(total, nu)
        codes.sort(axis=1)
        keys = np.concatenate([colors[:, None], codes], axis=1)
        _, new_colors = np.unique(keys, axis=0, return_inverse=True)
        new_colors = new_colors.ravel()
        if len(np.unique(new_colors)) == len(np.unique(colors)):
            colors = new_colors
            break
        colors = new_colors

    return hist(colors, pure_g) != hist(colors, pure_h)


# ---------------------------------------------------------------------------
# k-equivalence evidence
# ---------------------------------------------------------------------------

@dataclass
class EvidenceResult:
    """Outcome of the k-equivalence search: a certificate, a proven absence,
    or an explicit inconclusive verdict when the search hit its deadline."""

    status: str                                  # "certificate" | "none" | "inconclusive"
    k: int
    certificate: RelationBijection | None = None
    base_similarity: RelationBijection | None = None
    message: str = ""

    @property
    def found(self) -> bool:
        return self.status == "certificate"


def k_equivalence_evidence(g: Graph, h: Graph, k: int,
                           cap: int = DEFAULT_POINT_CAP,
                           timeout_ms: int | None = None) -> EvidenceResult:
    """Search for a weak isomorphism between the k-extensions of [G] and [H]
    that restricts to the k-th tensor power of a base similarity mapping A
    to A', and fixes every centralizer relation.

    The base similarity is unique when it exists (the closure is generated
    by A), so only that one candidate is extended.
    """
    deadline = None if timeout_ms is None else time.monotonic() + timeout_ms / 1000.0

    def remaining_ms():
        if deadline is None:
            return None
        return max(1, int((deadline - time.monotonic()) * 1000))

    _require_within_cap(g.n**k, cap, what="tuple space")
    try:
        phi = weak_equivalence(g, h, timeout_ms=remaining_ms())
    except SearchTimeout:
        return EvidenceResult("inconclusive", k, message="base similarity search timed out")
    if phi is None:
        return EvidenceResult("none", k, message="no base similarity exists")

    try:
        ext_a = k_extension(g, k, cap=cap, deadline=deadline, base=phi.source)
        ext_b = k_extension(h, k, cap=cap, deadline=deadline, base=phi.target)
    except SearchTimeout:
        return EvidenceResult("inconclusive", k, base_similarity=phi,
                              message="extension stabilization timed out")

    cells_a = extension_tensor_cells(ext_a, k)
    cells_b = extension_tensor_cells(ext_b, k)
    patterns_a = ext_a.seed_values[1].astype(np.int64)
    patterns_b = ext_b.seed_values[1].astype(np.int64)

    anchors_a = [tuple(int(x) for x in phi.map[cells_a[r]]) + (int(patterns_a[r]),)
                 for r in range(ext_a.size)]
    anchors_b = [tuple(int(x) for x in cells_b[r]) + (int(patterns_b[r]),)
                 for r in range(ext_b.size)]

    try:
        cert = _bijection_search(ext_a, ext_b, anchors_a, anchors_b, deadline=deadline)
    except SearchTimeout:
        return EvidenceResult("inconclusive", k, base_similarity=phi,
                              message="extension bijection search timed out")
    if cert is None:
        return EvidenceResult("none", k, base_similarity=phi,
                              message="extensions admit no compatible weak isomorphism")

    # the certificate must restrict to phi^k on tensor cells and fix the
    # centralizer relations
    for r in range(ext_a.size):
        image = int(cert.map[r])
        if patterns_a[r] != patterns_b[image]:
            raise ConsistencyError("certificate moves a centralizer relation")
        if anchors_a[r][:-1] != tuple(int(x) for x in cells_b[image]):
            raise ConsistencyError("certificate does not restrict to the tensor power")
    return EvidenceResult("certificate", k, certificate=cert, base_similarity=phi)
