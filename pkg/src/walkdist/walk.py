"""Multi-particle walk Hamiltonians, unitary evolution, Green's-function
signatures, and the distinguishability comparison.

The k-particle Hamiltonian on the full tuple space V^k is

    H = -(1/k!) (sum over particle permutations S) A_oplus_k  +  sum_i U_i R_i

where A_oplus_k places the adjacency matrix in each tensor slot and R_i
projects onto an occupation class (tuples sharing a multiset of per-vertex
particle counts).  The bosonic symmetric-space build is the compression of
the same operator onto the orthonormal symmetrized basis and is validated
against the full-space build in the tests.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, SizeCapError
from .extensions import DEFAULT_POINT_CAP, tuple_digits
from .graphs import Graph

DEFAULT_TIMES = (0.5, 1.0, 2.0, math.pi)
DEFAULT_TOL = 1e-8
UNITARITY_BOUND = 1e-12  # per matrix dimension


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Walk model: particle count, statistics, interaction, and state space."""

    particles: int = 2
    statistics: str = "boson"            # "boson" | "fermion" | "single"
    interaction: tuple = ("none",)        # ("none",) | ("hubbard", U) | ("onsite", (U1, ...))
    space: str = "full"                   # "full" | "symmetric"

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particle count must be at least 1")
        if self.statistics not in ("boson", "fermion", "single"):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        if self.statistics == "fermion":
            if self.particles != 2:
                raise ValueError("the fermionic walk is implemented for 2 particles")
            if self.interaction[0] != "none":
                raise ValueError("the fermionic walk is non-interacting")
        if self.statistics == "single" and self.particles != 1:
            raise ValueError("the single-particle model has one particle")
        if self.interaction[0] not in ("none", "hubbard", "onsite"):
            raise ValueError(f"unknown interaction {self.interaction[0]!r}")
        if self.space not in ("full", "symmetric"):
            raise ValueError(f"unknown space {self.space!r}")

    def describe(self) -> dict:
        kind = self.interaction[0]
        if kind == "none":
            inter = {"kind": "none"}
        elif kind == "hubbard":
            inter = {"kind": "hubbard", "u": float(self.interaction[1])}
        else:
            inter = {"kind": "onsite", "u": [float(x) for x in self.interaction[1]]}
        return {
            "particles": self.particles,
            "statistics": self.statistics,
            "interaction": inter,
            "space": self.space,
        }


def parse_interaction(text: str) -> tuple:
    """Parse 'none', 'hubbard:U' or 'onsite:U1,U2,...'."""
    if text == "none":
        return ("none",)
    if text.startswith("hubbard:"):
        return ("hubbard", float(text.split(":", 1)[1]))
    if text.startswith("onsite:"):
        parts = text.split(":", 1)[1]
        return ("onsite", tuple(float(x) for x in parts.split(",") if x))
    raise ValueError(f"cannot parse interaction {text!r}")


# ---------------------------------------------------------------------------
# Occupation classes
# ---------------------------------------------------------------------------

@dataclass
class OccupationClasses:
    """Partition of V^k by the multiset of per-vertex particle counts."""

    n: int
    k: int
    histograms: list[tuple[int, ...]]     # canonical order: reverse-lex partitions
    members: list[np.ndarray]
    assignments: np.ndarray               # tuple index -> class id


def _partitions(k: int, max_parts: int) -> list[tuple[int, ...]]:
    """Partitions of k into at most max_parts parts, reverse-lex order."""
    out = []

    def grow(remaining, cap, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        if len(prefix) == max_parts:
            return
        for part in range(min(cap, remaining), 0, -1):
            prefix.append(part)
            grow(remaining - part, part, prefix)
            prefix.pop()

    grow(k, k, [])
    return sorted(out, reverse=True)


def occupation_classes(n: int, k: int, cap: int = DEFAULT_POINT_CAP) -> OccupationClasses:
    if n < 1 or k < 1:
        raise ValueError("occupation classes need n >= 1 and k >= 1")
    if n**k > cap:
        raise SizeCapError(n**k, cap, what="tuple space")
    histograms = _partitions(k, n)
    index = {h: i for i, h in enumerate(histograms)}
    digits = tuple_digits(n, k)
    assignments = np.empty(n**k, dtype=np.int64)
    for idx in range(n**k):
        counts = tuple(sorted(Counter(digits[idx].tolist()).values(), reverse=True))
        assignments[idx] = index[counts]
    members = [np.flatnonzero(assignments == i) for i in range(len(histograms))]
    return OccupationClasses(n, k, histograms, members, assignments)


def interaction_energies(classes: OccupationClasses, interaction: tuple) -> np.ndarray:
    """Energy U_i per occupation class.

    hubbard(U) charges (U/2) * sum_v c_v (c_v - 1); an onsite list assigns
    the given energies in canonical class order.
    """
    ell = len(classes.histograms)
    kind = interaction[0]
    if kind == "none":
        return np.zeros(ell)
    if kind == "hubbard":
        u = float(interaction[1])
        return np.array([u / 2.0 * sum(c * (c - 1) for c in h) for h in classes.histograms])
    if kind == "onsite":
        us = tuple(interaction[1])
        if len(us) != ell:
            raise ValueError(f"onsite list has {len(us)} energies, need {ell} (one per class)")
        return np.array([float(u) for u in us])
    raise ValueError(f"unknown interaction {kind!r}")


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

@dataclass
class Hamiltonian:
    space: str
    dim: int
    matrix: np.ndarray
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError("matrix shape does not match dim")
        if not np.array_equal(self.matrix, self.matrix.T):
            raise NumericsError("Hamiltonian must be exactly symmetric")


def hamiltonian_single(g: Graph) -> Hamiltonian:
    """Single-particle convention: H = A on the n-dimensional vertex space."""
    return Hamiltonian("full", g.n, g.adj.astype(np.float64),
                       model={"particles": 1, "statistics": "single"})


def _a_oplus_k(adj: np.ndarray, k: int) -> np.ndarray:
    """(A (x) I (x) ... (x) I) + ... + (I (x) ... (x) A), dense float."""
    n = adj.shape[0]
    total = np.zeros((n**k, n**k))
    a = adj.astype(np.float64)
    for slot in range(k):
        term = np.kron(np.eye(n**slot), np.kron(a, np.eye(n**(k - 1 - slot))))
        total += term
    return total


def _symmetrizer_sum(n: int, k: int) -> np.ndarray:
    """Sum over all particle permutations of their tuple-space matrices."""
    npoints = n**k
    digits = tuple_digits(n, k)
    powers = np.array([n**(k - 1 - i) for i in range(k)], dtype=np.int64)
    total = np.zeros((npoints, npoints))
    rows = np.arange(npoints)
    for sigma in itertools.permutations(range(k)):
        cols = digits[:, list(sigma)] @ powers
        total[rows, cols] += 1.0
    return total


def hamiltonian_2boson(g: Graph, u: float, cap: int = DEFAULT_POINT_CAP) -> Hamiltonian:
    """H = -(1/2)(I + S) A_oplus_2 + U R on the full n^2 tensor space."""
    n = g.n
    if n * n > cap:
        raise SizeCapError(n * n, cap, what="two-particle space")
    a2 = _a_oplus_k(g.adj, 2)
    swap = _symmetrizer_sum(n, 2) - np.eye(n * n)
    coincident = np.zeros(n * n)
    coincident[np.arange(n) * n + np.arange(n)] = 1.0
    h = -0.5 * (np.eye(n * n) + swap) @ a2 + u * np.diag(coincident)
    return Hamiltonian("full", n * n, h,
                       model={"particles": 2, "statistics": "boson",
                              "interaction": {"kind": "hubbard", "u": float(u)}})


def hamiltonian_kboson(g: Graph, k: int, interaction: tuple = ("none",),
                       space: str = "full", cap: int = DEFAULT_POINT_CAP) -> Hamiltonian:
    """k-boson Hamiltonian, on the full tuple space (the defining formula)
    or compressed onto the bosonic symmetric subspace."""
    n = g.n
    model = {"particles": k, "statistics": "boson",
             "interaction": ModelSpec(k if k > 0 else 1, "boson", interaction).describe()["interaction"]}
    if space == "full":
        npoints = n**k
        if npoints > cap:
            raise SizeCapError(npoints, cap, what="tuple space")
        classes = occupation_classes(n, k, cap=cap)
        energies = interaction_energies(classes, interaction)
        hop = -(_symmetrizer_sum(n, k) @ _a_oplus_k(g.adj, k)) / math.factorial(k)
        h = hop + np.diag(energies[classes.assignments])
        return Hamiltonian("full", npoints, h, model=model)
    if space != "symmetric":
        raise ValueError(f"unknown space {space!r}")

    basis = list(itertools.combinations_with_replacement(range(n), k))
    dim = len(basis)
    if dim > cap:
        raise SizeCapError(dim, cap, what="symmetric space")
    index = {b: i for i, b in enumerate(basis)}
    partitions = _partitions(k, n)
    part_index = {h: i for i, h in enumerate(partitions)}
    energies = interaction_energies(
        OccupationClasses(n, k, partitions, [], np.empty(0, dtype=np.int64)), interaction)

    h = np.zeros((dim, dim))
    for col, occ in enumerate(basis):
        counts = Counter(occ)
        hist = tuple(sorted(counts.values(), reverse=True))
        h[col, col] += energies[part_index[hist]]
        for v in counts:
            for u_ in range(n):
                if g.adj[u_, v] == 0:
                    continue
                # move one particle v -> u_: amplitude -sqrt(n_v (n_u + 1))
                moved = Counter(counts)
                moved[v] -= 1
                moved[u_] += 1
                target = tuple(sorted(moved.elements()))
                row = index[target]
                amp = -math.sqrt(counts[v] * (counts[u_] + 1))
                h[row, col] += amp
    if not np.array_equal(h, h.T):
        raise NumericsError("symmetric-space build lost exact symmetry")
    return Hamiltonian("symmetric", dim, h, model=model)


def hamiltonian_2fermion(g: Graph, cap: int = DEFAULT_POINT_CAP) -> Hamiltonian:
    """-A_oplus_2 compressed onto the antisymmetric C(n,2)-dimensional space."""
    n = g.n
    if n < 2:
        raise ValueError("the two-fermion walk needs at least two vertices")
    pairs = list(itertools.combinations(range(n), 2))
    dim = len(pairs)
    if dim > cap:
        raise SizeCapError(dim, cap, what="antisymmetric space")
    a = g.adj.astype(np.float64)
    h = np.zeros((dim, dim))
    for col, (i, j) in enumerate(pairs):
        for row, (k_, l_) in enumerate(pairs):
            # <kl|_anti (-A_oplus_2) |ij>_anti = -(A_oplus_2[kl,ij] - A_oplus_2[lk,ij])
            val = 0.0
            val += a[k_, i] * (1.0 if l_ == j else 0.0) + (1.0 if k_ == i else 0.0) * a[l_, j]
            val -= a[l_, i] * (1.0 if k_ == j else 0.0) + (1.0 if l_ == i else 0.0) * a[k_, j]
            h[row, col] = -val
    if not np.array_equal(h, h.T):
        raise NumericsError("antisymmetric build lost exact symmetry")
    return Hamiltonian("antisymmetric", dim, h,
                       model={"particles": 2, "statistics": "fermion",
                              "interaction": {"kind": "none"}})


def symmetrizer_isometry(n: int, k: int) -> np.ndarray:
    """Orthonormal isometry from the symmetric subspace into V^k (columns are
    normalized sums over the distinct arrangements of each multiset)."""
    basis = list(itertools.combinations_with_replacement(range(n), k))
    digits = tuple_digits(n, k)
    sorted_tuples = np.sort(digits, axis=1)
    index = {b: i for i, b in enumerate(basis)}
    cols = np.array([index[tuple(row)] for row in sorted_tuples.tolist()], dtype=np.int64)
    b = np.zeros((n**k, len(basis)))
    b[np.arange(n**k), cols] = 1.0
    b /= np.sqrt(b.sum(axis=0, keepdims=True))
    return b


def antisymmetrizer_isometry(n: int) -> np.ndarray:
    """Orthonormal isometry from the 2-fermion space into V^2."""
    pairs = list(itertools.combinations(range(n), 2))
    b = np.zeros((n * n, len(pairs)))
    for col, (i, j) in enumerate(pairs):
        b[i * n + j, col] = 1.0 / math.sqrt(2.0)
        b[j * n + i, col] = -1.0 / math.sqrt(2.0)
    return b


def build_hamiltonian(g: Graph, model: ModelSpec, cap: int = DEFAULT_POINT_CAP) -> Hamiltonian:
    """Dispatch a ModelSpec to the matching Hamiltonian builder."""
    if model.statistics == "single":
        return hamiltonian_single(g)
    if model.statistics == "fermion":
        return hamiltonian_2fermion(g, cap=cap)
    return hamiltonian_kboson(g, model.particles, model.interaction,
                              space=model.space, cap=cap)


# ---------------------------------------------------------------------------
# Unitary evolution and signatures
# ---------------------------------------------------------------------------

def _eigh_of(h) -> tuple[np.ndarray, np.ndarray]:
    matrix = h.matrix if isinstance(h, Hamiltonian) else np.asarray(h, dtype=np.float64)
    try:
        vals, vecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        scale = float(np.abs(matrix).max(initial=0.0))
        raise NumericsError(f"eigensolver failed on dim {matrix.shape[0]}, max |entry| {scale}: {exc}") from exc
    return vals, vecs


def _unitary_from_eigh(vals: np.ndarray, vecs: np.ndarray, t: float) -> np.ndarray:
    u = (vecs * np.exp(-1j * t * vals)) @ vecs.T
    dim = u.shape[0]
    defect = np.abs(u.conj().T @ u - np.eye(dim)).max()
    if defect > UNITARITY_BOUND * dim:
        raise NumericsError(f"unitarity defect {defect:.3e} exceeds bound at dim {dim}")
    return u


def unitary(h, t: float) -> np.ndarray:
    """U = exp(-i t H) via real-symmetric eigendecomposition."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    vals, vecs = _eigh_of(h)
    return _unitary_from_eigh(vals, vecs, float(t))


@dataclass
class GreensSignature:
    """Multiset of Green's-function values at one time, with multiplicities."""

    time: float
    tol: float
    source_dim: int
    values: list[tuple[complex, int]]     # sorted by (re, im) of cluster centroid
    relation_decomposition: list | None = None

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.values)


def _cluster_labels(values: np.ndarray, radius: float) -> tuple[np.ndarray, int]:
    """Single-linkage cluster labels on a grid of cell size `radius`; any two
    entries within `radius` of each other always share a cluster."""
    if radius <= 0:
        raise ValueError("clustering radius must be positive")
    cx = np.floor(values.real / radius).astype(np.int64)
    cy = np.floor(values.imag / radius).astype(np.int64)
    cells = np.stack([cx, cy], axis=1)
    uniq_cells, entry_cell = np.unique(cells, axis=0, return_inverse=True)
    entry_cell = entry_cell.ravel()
    ncells = uniq_cells.shape[0]

    parent = np.arange(ncells)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    keys = uniq_cells[:, 0] * (1 << 32) + uniq_cells[:, 1]
    order = np.argsort(keys)
    sorted_keys = keys[order]
    for dx, dy in ((0, 1), (1, -1), (1, 0), (1, 1)):
        neighbor = (uniq_cells[:, 0] + dx) * (1 << 32) + (uniq_cells[:, 1] + dy)
        pos = np.searchsorted(sorted_keys, neighbor)
        hit = (pos < ncells)
        hit[hit] &= sorted_keys[pos[hit]] == neighbor[hit]
        for a in np.flatnonzero(hit):
            union(a, int(order[pos[a]]))

    roots = np.array([find(c) for c in range(ncells)])
    _, comp = np.unique(roots, return_inverse=True)
    return comp[entry_cell], int(comp.max()) + 1


def _cluster_complex(values: np.ndarray, radius: float) -> list[tuple[complex, int]]:
    """Clusters as (centroid, multiplicity), sorted by (re, im) of centroid."""
    entry_comp, ncomp = _cluster_labels(values, radius)
    sums = np.zeros(ncomp, dtype=np.complex128)
    counts = np.zeros(ncomp, dtype=np.int64)
    np.add.at(sums, entry_comp, values)
    np.add.at(counts, entry_comp, 1)
    centroids = sums / counts
    out = sorted(
        ((complex(centroids[i]), int(counts[i])) for i in range(ncomp)),
        key=lambda pair: (pair[0].real, pair[0].imag),
    )
    return out


def greens_signature(u: np.ndarray, t: float, tol: float = DEFAULT_TOL) -> GreensSignature:
    """Collect all dim^2 transition amplitudes <j|U|i>, clustered at tol/2
    and sorted by (re, im) of the cluster centroids."""
    u = np.asarray(u)
    dim = u.shape[0]
    values = _cluster_complex(u.ravel(), tol / 2.0)
    return GreensSignature(time=float(t), tol=float(tol), source_dim=dim, values=values)


@dataclass
class DecompositionRow:
    relation: int
    x: complex          # constant value of U on the relation support
    m: int              # support size tr(R R^T)
    residual: float     # max deviation of U from x on the support


def relation_decomposition(u: np.ndarray, basis) -> list[DecompositionRow]:
    """Mean value, multiplicity, and constancy residual of U per relation."""
    u = np.asarray(u)
    if u.shape != basis.color.shape:
        raise ValueError("matrix dimension does not match the basis point set")
    flat = u.ravel()
    color_flat = basis.color.ravel()
    order = np.argsort(color_flat, kind="stable")
    vals = flat[order]
    bounds = np.searchsorted(color_flat[order], np.arange(basis.size + 1))
    rows = []
    for r in range(basis.size):
        seg = vals[bounds[r]:bounds[r + 1]]
        x = complex(seg.mean())
        residual = float(np.abs(seg - x).max())
        rows.append(DecompositionRow(relation=r, x=x, m=int(seg.size), residual=residual))
    return rows


# ---------------------------------------------------------------------------
# Distinguishability
# ---------------------------------------------------------------------------

@dataclass
class WalkVerdict:
    distinguished: bool
    witness_time: float | None
    max_deviation: float
    per_time: list[tuple[float, float]]    # (time, matched-position deviation)
    reason: str = ""

    @property
    def indistinguishable(self) -> bool:
        return not self.distinguished


def sign_canonical(values: np.ndarray) -> np.ndarray:
    """Map each value to the lexicographically larger of {v, -v}.

    Antisymmetrized basis states are defined only up to sign, so fermionic
    Green values carry a per-entry sign ambiguity under vertex relabeling;
    comparing sign-canonical values is the relabeling-invariant notion.
    """
    flip = (values.real < 0) | ((values.real == 0) & (values.imag < 0))
    out = values.copy()
    out[flip] = -out[flip]
    return out


def _sorted_values(u: np.ndarray) -> np.ndarray:
    flat = u.ravel()
    order = np.lexsort((flat.imag, flat.real))
    return flat[order]


def _clusters_match(a: np.ndarray, b: np.ndarray, radius: float) -> bool:
    """Cluster the pooled values jointly and require every cluster to draw
    equally from both sides.  A single grid and merge pass makes the check
    immune to the boundary-alignment noise that per-side clustering or
    sorted position matching can suffer."""
    pool = np.concatenate([a, b])
    labels, ncomp = _cluster_labels(pool, radius)
    from_a = np.bincount(labels[:a.size], minlength=ncomp)
    from_b = np.bincount(labels[a.size:], minlength=ncomp)
    return bool(np.array_equal(from_a, from_b))


def compare_walks(g: Graph, h: Graph, model: ModelSpec,
                  times=DEFAULT_TIMES, tol: float = DEFAULT_TOL,
                  cap: int = DEFAULT_POINT_CAP,
                  set_semantics: bool = False) -> WalkVerdict:
    """Compare Green's-function multisets of the two walks at each time.

    Distinguished iff some time yields a matched-position deviation above
    tol or a multiplicity mismatch; near-boundary sort instabilities are
    re-checked by cluster comparison at 10x tol before declaring a
    difference.  With set_semantics=True multiplicities are ignored and
    only the clustered value sets are compared.
    """
    times = [float(t) for t in times]
    if not times or not all(np.isfinite(times)):
        raise ValueError("times must be a non-empty list of finite reals")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if g.n != h.n:
        return WalkVerdict(True, None, float("inf"), [], reason="vertex counts differ")

    hg = build_hamiltonian(g, model, cap=cap)
    hh = build_hamiltonian(h, model, cap=cap)
    vals_g, vecs_g = _eigh_of(hg)
    vals_h, vecs_h = _eigh_of(hh)

    per_time = []
    worst = 0.0
    for t in times:
        ug = _unitary_from_eigh(vals_g, vecs_g, t)
        uh = _unitary_from_eigh(vals_h, vecs_h, t)
        if model.statistics == "fermion":
            # antisymmetrized basis states fix signs only up to convention;
            # squaring embeds the {v, -v} classes continuously and exactly
            ug = ug.ravel()**2
            uh = uh.ravel()**2
        if set_semantics:
            same = _clusters_match(ug.ravel(), uh.ravel(), tol)
            dev = 0.0 if same else float("inf")
            per_time.append((t, dev))
            if not same:
                return WalkVerdict(True, t, dev, per_time, reason="clustered value sets differ")
            continue
        a = _sorted_values(ug)
        b = _sorted_values(uh)
        dev = float(np.abs(a - b).max())
        per_time.append((t, dev))
        worst = max(worst, dev)
        if dev > tol:
            # boundary-tie fallback: accept if multisets agree at 10x tol
            if not _clusters_match(a, b, 10.0 * tol):
                return WalkVerdict(True, t, dev, per_time, reason="matched deviation above tol")
    return WalkVerdict(False, None, worst, per_time)
