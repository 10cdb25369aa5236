"""Centralizer algebras, k-extensions, cylindric relations, k-WL, evidence."""

import itertools

import numpy as np
import pytest

from walkdist import Graph, SizeCapError, graph_closure, is_member, rook_graph, shrikhande
from walkdist.extensions import (
    EvidenceResult,
    centralizer_basis,
    cylindric,
    equality_patterns,
    k_equivalence_evidence,
    k_extension,
    k_wl_compare,
    permutation_relation,
    tuple_digits,
)

from test_graphs import complete_graph, cycle_graph, path_graph, random_graph


# ---------------------------------------------------------------------------
# Centralizer basis
# ---------------------------------------------------------------------------

def brute_orbit_count(n, k):
    """Independent oracle: orbits of Sym(n) on V^k x V^k by union-find."""
    npoints = n**k
    tuples = list(itertools.product(range(n), repeat=k))
    index = {t: i for i, t in enumerate(tuples)}
    parent = list(range(npoints * npoints))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for perm in itertools.permutations(range(n)):
        for xi, x in enumerate(tuples):
            px = index[tuple(perm[c] for c in x)]
            for yi, y in enumerate(tuples):
                py = index[tuple(perm[c] for c in y)]
                union(xi * npoints + yi, px * npoints + py)
    return len({find(x) for x in range(npoints * npoints)})


def test_centralizer_counts():
    assert len(centralizer_basis(4, 1)) == 2   # equal / unequal
    assert len(centralizer_basis(4, 2)) == 15  # Bell number B(4)
    assert len(centralizer_basis(2, 2)) == 8   # partitions with <= 2 blocks


def test_centralizer_matches_orbit_oracle():
    for n, k in [(2, 2), (3, 2), (4, 2), (3, 1)]:
        rels = centralizer_basis(n, k)
        assert len(rels) == brute_orbit_count(n, k)
        total = np.zeros((n**k, n**k), dtype=np.int64)
        for rel in rels:
            total += rel.matrix
        assert np.array_equal(total, np.ones_like(total))


def test_centralizer_k1():
    rels = centralizer_basis(5, 1)
    mats = [r.matrix for r in rels]
    eye = np.eye(5, dtype=np.uint8)
    assert any(np.array_equal(m, eye) for m in mats)
    assert any(np.array_equal(m, 1 - eye) for m in mats)


def test_centralizer_invariance_spot_check():
    rng = np.random.default_rng(17)
    n, k = 4, 2
    rels = centralizer_basis(n, k)
    digits = tuple_digits(n, k)
    for _ in range(100):
        perm = rng.permutation(n)
        tuple_perm = np.zeros(n**k, dtype=np.int64)
        for i in range(k):
            tuple_perm = tuple_perm * n + perm[digits[:, i]]
        for rel in rels[:4]:
            m = rel.matrix
            assert np.array_equal(m[np.ix_(tuple_perm, tuple_perm)], m)


def test_centralizer_cap_refusal():
    with pytest.raises(SizeCapError):
        centralizer_basis(100, 2, cap=4096)


# ---------------------------------------------------------------------------
# k-extension
# ---------------------------------------------------------------------------

def test_k1_extension_equals_closure():
    g = path_graph(4)
    ext = k_extension(g, 1)
    basis = graph_closure(g)
    assert ext.size == basis.size
    assert np.array_equal(ext.color, basis.color)


def test_k2_extension_of_k2_contains_centralizer():
    g = complete_graph(2)
    ext = k_extension(g, 2)
    for rel in centralizer_basis(2, 2):
        assert is_member(ext, rel.matrix)


def test_k2_extension_of_c5_contains_swap():
    g = cycle_graph(5)
    ext = k_extension(g, 2)
    swap = permutation_relation(5, 2, (1, 0))
    assert is_member(ext, swap)
    # the swap built from first principles agrees with the cylindric build
    digits = tuple_digits(5, 2)
    direct = np.zeros((25, 25), dtype=np.uint8)
    for x in range(25):
        for y in range(25):
            direct[x, y] = int(digits[x, 0] == digits[y, 1] and digits[x, 1] == digits[y, 0])
    assert np.array_equal(swap, direct)


def test_extension_contains_tensor_generators():
    g = path_graph(3)
    basis = graph_closure(g)
    ext = k_extension(g, 2)
    digits = tuple_digits(3, 2)
    for r in range(basis.size):
        for s in range(basis.size):
            mr = basis.relation_matrix(r)
            ms = basis.relation_matrix(s)
            tensor = mr[np.ix_(digits[:, 0], digits[:, 0])] & ms[np.ix_(digits[:, 1], digits[:, 1])]
            assert is_member(ext, tensor)


def test_extension_cap_refusal():
    with pytest.raises(SizeCapError):
        k_extension(rook_graph(4), 4, cap=4096)


# ---------------------------------------------------------------------------
# Cylindric relations
# ---------------------------------------------------------------------------

def test_cylindric_all_ones():
    n, k = 3, 2
    ones = np.ones((n, n), dtype=np.uint8)
    out = cylindric([[ones, ones], [ones, ones]])
    assert np.array_equal(out, np.ones((9, 9), dtype=np.uint8))


def test_cylindric_identity():
    n = 3
    eye = np.eye(n, dtype=np.uint8)
    ones = np.ones((n, n), dtype=np.uint8)
    out = cylindric([[eye, ones], [ones, eye]])
    assert np.array_equal(out, np.eye(9, dtype=np.uint8))


def test_cylindric_swap_matches_definition():
    n = 4
    eye = np.eye(n, dtype=np.uint8)
    ones = np.ones((n, n), dtype=np.uint8)
    swap = cylindric([[ones, eye], [eye, ones]])
    assert np.array_equal(swap, permutation_relation(n, 2, (1, 0)))
    digits = tuple_digits(n, 2)
    for x in range(n * n):
        for y in range(n * n):
            expect = int(digits[x, 0] == digits[y, 1] and digits[x, 1] == digits[y, 0])
            assert swap[x, y] == expect


def test_cylindric_members_of_extension():
    rng = np.random.default_rng(29)
    for _ in range(5):
        n = int(rng.integers(2, 5))
        g = random_graph(n, rng)
        basis = graph_closure(g)
        ext = k_extension(g, 2)
        for _ in range(5):
            rels = [[basis.sum_of(
                        np.flatnonzero(rng.random(basis.size) < 0.5).tolist())
                     for _ in range(2)] for _ in range(2)]
            out = cylindric(rels, n=n)
            assert is_member(ext, out)


def test_cylindric_validation():
    eye = np.eye(3, dtype=np.uint8)
    with pytest.raises(ValueError):
        cylindric([[eye], [eye, eye]])
    with pytest.raises(ValueError):
        cylindric([[eye, 2 * eye], [eye, eye]])


# ---------------------------------------------------------------------------
# k-WL comparison
# ---------------------------------------------------------------------------

def test_k_wl_self():
    g = shrikhande()
    assert k_wl_compare(g, g, 1) is False
    assert k_wl_compare(g, g, 2) is False


def test_k_wl_examples():
    assert k_wl_compare(shrikhande(), rook_graph(4), 1) is False
    assert k_wl_compare(complete_graph(3), path_graph(3), 1) is True


def test_k_wl_distinguishes_c6_from_2k3():
    two_k3 = np.zeros((6, 6), dtype=np.uint8)
    for a, b in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        two_k3[a, b] = two_k3[b, a] = 1
    g = Graph(6, two_k3)
    assert k_wl_compare(cycle_graph(6), g, 1) is False  # both 2-regular
    assert k_wl_compare(cycle_graph(6), g, 2) is True


def test_k_wl_order_mismatch_and_cap():
    assert k_wl_compare(path_graph(3), path_graph(4), 1) is True
    with pytest.raises(SizeCapError):
        k_wl_compare(rook_graph(4), shrikhande(), 4, cap=4096)


# ---------------------------------------------------------------------------
# k-equivalence evidence
# ---------------------------------------------------------------------------

def test_evidence_self_identity():
    g = path_graph(4)
    for k in (1, 2):
        res = k_equivalence_evidence(g, g, k)
        assert res.found
        assert np.array_equal(res.certificate.map,
                              np.arange(res.certificate.source.size))


def test_evidence_k3_p3_none():
    res = k_equivalence_evidence(complete_graph(3), path_graph(3), 1)
    assert res.status == "none"


def test_evidence_srg_pair_k1():
    res = k_equivalence_evidence(shrikhande(), rook_graph(4), 1)
    assert res.found
    assert res.certificate.verify()


def test_evidence_isomorphic_pair_k2():
    rng = np.random.default_rng(37)
    g = random_graph(5, rng)
    h = g.permuted(rng.permutation(5))
    res = k_equivalence_evidence(g, h, 2)
    assert res.found
    assert res.certificate.verify()


def test_evidence_timeout_reports_inconclusive():
    res = k_equivalence_evidence(shrikhande(), rook_graph(4), 2, timeout_ms=1)
    assert res.status == "inconclusive"


def test_wl_distinguished_implies_no_evidence():
    rng = np.random.default_rng(41)
    checked = 0
    for _ in range(20):
        n = int(rng.integers(3, 7))
        g = random_graph(n, rng)
        h = random_graph(n, rng)
        for k in (1, 2):
            if k_wl_compare(g, h, k):
                res = k_equivalence_evidence(g, h, k)
                assert res.status == "none"
                checked += 1
    assert checked > 0
