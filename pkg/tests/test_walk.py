"""Walk Hamiltonians, unitary evolution, signatures, distinguishability."""

import math

import numpy as np
import pytest

from walkdist import Graph, graph_closure, rook_graph, shrikhande, weak_equivalence
from walkdist.errors import NumericsError, SizeCapError
from walkdist.extensions import tuple_digits
from walkdist.walk import (
    DEFAULT_TIMES,
    ModelSpec,
    antisymmetrizer_isometry,
    build_hamiltonian,
    compare_walks,
    greens_signature,
    hamiltonian_2boson,
    hamiltonian_2fermion,
    hamiltonian_kboson,
    hamiltonian_single,
    interaction_energies,
    occupation_classes,
    parse_interaction,
    relation_decomposition,
    symmetrizer_isometry,
    unitary,
)

from test_graphs import complete_graph, cycle_graph, path_graph, random_graph


def taylor_expm(h, t, terms=60):
    """Independent oracle: truncated series for exp(-i t H)."""
    dim = h.shape[0]
    acc = np.eye(dim, dtype=np.complex128)
    term = np.eye(dim, dtype=np.complex128)
    m = -1j * t * h.astype(np.complex128)
    for j in range(1, terms):
        term = term @ m / j
        acc = acc + term
    return acc


# ---------------------------------------------------------------------------
# Occupation classes
# ---------------------------------------------------------------------------

def test_occupation_classes_n2_k2():
    oc = occupation_classes(2, 2)
    assert len(oc.histograms) == 2
    # canonical order: (2,) before (1,1)
    assert oc.histograms == [(2,), (1, 1)]
    assert sorted(oc.members[0].tolist()) == [0, 3]   # (0,0) and (1,1)
    assert sorted(oc.members[1].tolist()) == [1, 2]


def test_occupation_classes_k1():
    oc = occupation_classes(5, 1)
    assert len(oc.histograms) == 1
    assert oc.members[0].size == 5


def test_coincident_class_has_n_members():
    for n in (2, 3, 4):
        oc = occupation_classes(n, 2)
        assert oc.members[0].size == n  # R = sum_i |ii><ii| has trace n


def test_interaction_energies():
    oc = occupation_classes(3, 2)
    assert np.allclose(interaction_energies(oc, ("hubbard", 1.0)), [1.0, 0.0])
    assert np.allclose(interaction_energies(oc, ("none",)), [0.0, 0.0])
    assert np.allclose(interaction_energies(oc, ("onsite", (2.5, 0.5))), [2.5, 0.5])
    with pytest.raises(ValueError):
        interaction_energies(oc, ("onsite", (1.0,)))


def test_parse_interaction():
    assert parse_interaction("none") == ("none",)
    assert parse_interaction("hubbard:1.5") == ("hubbard", 1.5)
    assert parse_interaction("onsite:1,2") == ("onsite", (1.0, 2.0))
    with pytest.raises(ValueError):
        parse_interaction("bogus")


# ---------------------------------------------------------------------------
# Hamiltonian builders
# ---------------------------------------------------------------------------

def test_hamiltonian_single():
    g = cycle_graph(4)
    h = hamiltonian_single(g)
    assert np.array_equal(h.matrix, g.adj.astype(float))
    assert np.array_equal(h.matrix[0], [0, 1, 0, 1])


def test_hamiltonian_2boson_k2_row():
    h = hamiltonian_2boson(complete_graph(2), u=0.0)
    expected = np.array([
        [0, -1, -1, 0],
        [-1, 0, 0, -1],
        [-1, 0, 0, -1],
        [0, -1, -1, 0],
    ], dtype=float)
    assert np.array_equal(h.matrix, expected)


def test_hamiltonian_2boson_diagonal_is_u():
    g = path_graph(3)
    h = hamiltonian_2boson(g, u=2.5)
    coincident = [i * 3 + i for i in range(3)]
    for idx in range(9):
        expected = 2.5 if idx in coincident else 0.0
        assert h.matrix[idx, idx] == expected


def test_hamiltonian_2boson_empty_graph():
    g = Graph(3, np.zeros((3, 3), dtype=np.uint8))
    h = hamiltonian_2boson(g, u=3.0)
    r = np.zeros((9, 9))
    for i in range(3):
        r[i * 3 + i, i * 3 + i] = 3.0
    assert np.array_equal(h.matrix, r)


def test_kboson_k2_hubbard_matches_2boson():
    g = path_graph(4)
    for u in (0.0, 1.0, 2.5):
        a = hamiltonian_2boson(g, u)
        b = hamiltonian_kboson(g, 2, ("hubbard", u))
        assert np.array_equal(a.matrix, b.matrix)


def test_kboson_k1_is_minus_a_plus_shift():
    g = cycle_graph(5)
    h = hamiltonian_kboson(g, 1, ("none",))
    assert np.array_equal(h.matrix, -g.adj.astype(float))
    h2 = hamiltonian_kboson(g, 1, ("onsite", (2.0,)))
    assert np.array_equal(h2.matrix, -g.adj.astype(float) + 2.0 * np.eye(5))


def test_kboson_empty_noninteracting_is_zero():
    g = Graph(2, np.zeros((2, 2), dtype=np.uint8))
    h = hamiltonian_kboson(g, 3, ("none",))
    assert np.array_equal(h.matrix, np.zeros((8, 8)))


def test_kboson_cap_refusal():
    with pytest.raises(SizeCapError):
        hamiltonian_kboson(rook_graph(4), 4, ("none",))


def test_hamiltonian_builders_exactly_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(5):
        g = random_graph(int(rng.integers(2, 5)), rng)
        for k in (1, 2, 3):
            h = hamiltonian_kboson(g, k, ("hubbard", 1.0))
            assert np.array_equal(h.matrix, h.matrix.T)
            hs = hamiltonian_kboson(g, k, ("hubbard", 1.0), space="symmetric")
            assert np.array_equal(hs.matrix, hs.matrix.T)
        hf = hamiltonian_2fermion(g)
        assert np.array_equal(hf.matrix, hf.matrix.T)


def test_fermion_k2_zero():
    h = hamiltonian_2fermion(complete_graph(2))
    assert h.dim == 1
    assert np.array_equal(h.matrix, np.zeros((1, 1)))


def test_fermion_empty_graph_zero():
    g = Graph(3, np.zeros((3, 3), dtype=np.uint8))
    h = hamiltonian_2fermion(g)
    assert h.dim == 3
    assert np.array_equal(h.matrix, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        hamiltonian_2fermion(Graph(1, np.zeros((1, 1))))


def test_fermion_matches_isometry_compression():
    rng = np.random.default_rng(5)
    for _ in range(5):
        n = int(rng.integers(2, 6))
        g = random_graph(n, rng)
        h = hamiltonian_2fermion(g)
        b = antisymmetrizer_isometry(n)
        a2 = np.kron(g.adj, np.eye(n)) + np.kron(np.eye(n), g.adj)
        compressed = b.T @ (-a2) @ b
        assert np.allclose(h.matrix, compressed, atol=1e-12)


def test_symmetric_space_matches_full_compression():
    rng = np.random.default_rng(7)
    for _ in range(4):
        n = int(rng.integers(2, 5))
        g = random_graph(n, rng)
        for k in (1, 2, 3):
            full = hamiltonian_kboson(g, k, ("hubbard", 1.5))
            sym = hamiltonian_kboson(g, k, ("hubbard", 1.5), space="symmetric")
            b = symmetrizer_isometry(n, k)
            assert np.allclose(sym.matrix, b.T @ full.matrix @ b, atol=1e-12)


# ---------------------------------------------------------------------------
# Unitary evolution
# ---------------------------------------------------------------------------

def test_unitary_identity_at_t0():
    h = hamiltonian_single(cycle_graph(4))
    assert np.allclose(unitary(h, 0.0), np.eye(4), atol=1e-14)


def test_unitary_k2_closed_form():
    g = complete_graph(2)
    h = hamiltonian_single(g)
    for t in (0.3, 1.0, math.pi / 2):
        expected = math.cos(t) * np.eye(2) - 1j * math.sin(t) * g.adj
        assert np.allclose(unitary(h, t), expected, atol=1e-13)


def test_unitary_zero_hamiltonian():
    h = np.zeros((5, 5))
    for t in (0.5, 2.0):
        assert np.allclose(unitary(h, t), np.eye(5), atol=1e-14)


def test_unitary_matches_taylor_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        dim = int(rng.integers(2, 33))
        raw = rng.normal(size=(dim, dim)) / math.sqrt(dim)
        h = (raw + raw.T) / 2.0
        t = float(rng.uniform(-2.0, 2.0))
        u = unitary(h, t)
        assert np.abs(u - taylor_expm(h, t)).max() < 1e-10
        assert np.abs(u.conj().T @ u - np.eye(dim)).max() < 1e-12 * dim


def test_unitary_rejects_nonfinite_time():
    with pytest.raises(ValueError):
        unitary(np.zeros((2, 2)), float("nan"))


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

def test_signature_identity():
    sig = greens_signature(np.eye(4, dtype=complex), t=0.0, tol=1e-8)
    assert sig.values == [(0j, 12), ((1 + 0j), 4)]
    assert sig.total_multiplicity() == 16


def test_signature_k2_quarter_period():
    g = complete_graph(2)
    u = unitary(hamiltonian_single(g), math.pi / 2)
    sig = greens_signature(u, math.pi / 2, tol=1e-8)
    assert len(sig.values) == 2
    (v0, m0), (v1, m1) = sig.values
    assert m0 == 2 and m1 == 2
    assert abs(v0 - (-1j)) < 1e-12   # off-diagonal
    assert abs(v1 - 0.0) < 1e-12     # diagonal
    assert sig.total_multiplicity() == 4


def test_signature_clusters_close_values():
    vals = np.array([[0.0, 1e-10], [1.0, 1.0 + 1e-10]], dtype=complex)
    sig = greens_signature(vals, 0.0, tol=1e-8)
    assert [m for _, m in sig.values] == [2, 2]


def test_relation_decomposition_srg():
    g = rook_graph(4)
    basis = graph_closure(g)
    u = unitary(hamiltonian_single(g), 1.0)
    rows = relation_decomposition(u, basis)
    assert sorted(r.m for r in rows) == [16, 96, 144]
    assert sum(r.m for r in rows) == 256
    for r in rows:
        assert r.residual < 1e-10  # U lies in the 3-dimensional algebra


def test_relation_decomposition_identity():
    basis = graph_closure(shrikhande())
    rows = relation_decomposition(np.eye(16, dtype=complex), basis)
    by_m = {r.m: r for r in rows}
    assert abs(by_m[16].x - 1.0) < 1e-14
    assert abs(by_m[96].x) < 1e-14
    assert abs(by_m[144].x) < 1e-14


def test_theorem_matched_values_across_certified_pair():
    g, h = shrikhande(), rook_graph(4)
    cert = weak_equivalence(g, h)
    assert cert is not None
    ug = unitary(hamiltonian_single(g), 1.3)
    uh = unitary(hamiltonian_single(h), 1.3)
    rows_g = relation_decomposition(ug, cert.source)
    rows_h = relation_decomposition(uh, cert.target)
    for r in range(cert.source.size):
        image = int(cert.map[r])
        assert rows_g[r].m == rows_h[image].m
        assert abs(rows_g[r].x - rows_h[image].x) < 1e-9


# ---------------------------------------------------------------------------
# compare_walks
# ---------------------------------------------------------------------------

def test_compare_walks_self():
    g = path_graph(4)
    for model in (ModelSpec(1, "single", ("none",)),
                  ModelSpec(2, "boson", ("hubbard", 1.0)),
                  ModelSpec(2, "fermion", ("none",))):
        verdict = compare_walks(g, g, model)
        assert verdict.indistinguishable
        assert verdict.max_deviation < 1e-12


def test_compare_walks_different_orders():
    verdict = compare_walks(path_graph(3), path_graph(4), ModelSpec(1, "single"))
    assert verdict.distinguished


def test_compare_walks_permutation_invariance():
    rng = np.random.default_rng(13)
    g = random_graph(5, rng)
    h = g.permuted(rng.permutation(5))
    for model in (ModelSpec(2, "boson", ("hubbard", 1.0)),
                  ModelSpec(2, "fermion", ("none",))):
        verdict = compare_walks(g, h, model)
        assert verdict.indistinguishable


def test_hamiltonian_permutation_equivariance():
    rng = np.random.default_rng(17)
    g = random_graph(4, rng)
    perm = rng.permutation(4)
    h = g.permuted(perm)
    k = 2
    hg = hamiltonian_kboson(g, k, ("hubbard", 1.0)).matrix
    hh = hamiltonian_kboson(h, k, ("hubbard", 1.0)).matrix
    digits = tuple_digits(4, k)
    tuple_perm = np.zeros(16, dtype=np.int64)
    for i in range(k):
        tuple_perm = tuple_perm * 4 + perm[digits[:, i]]
    conjugated = np.zeros_like(hg)
    conjugated[np.ix_(tuple_perm, tuple_perm)] = hg
    assert np.array_equal(conjugated, hh)


def test_k1_phase_invariance():
    g, h = shrikhande(), rook_graph(4)
    base = compare_walks(g, h, ModelSpec(1, "boson", ("none",)))
    shifted = compare_walks(g, h, ModelSpec(1, "boson", ("onsite", (2.0,))))
    assert base.distinguished == shifted.distinguished
    # a constant shift multiplies all Green values by a unit phase
    t = 0.7
    u0 = unitary(hamiltonian_kboson(g, 1, ("none",)), t)
    u1 = unitary(hamiltonian_kboson(g, 1, ("onsite", (2.0,))), t)
    assert np.allclose(u1, np.exp(-1j * t * 2.0) * u0, atol=1e-12)


def test_srg_pair_noninteracting_indistinguishable():
    g, h = shrikhande(), rook_graph(4)
    times = (0.5, 1.0, 2.0)
    for model in (ModelSpec(2, "boson", ("none",)),
                  ModelSpec(2, "fermion", ("none",)),
                  ModelSpec(1, "single", ("none",))):
        verdict = compare_walks(g, h, model, times=times, tol=1e-8)
        assert verdict.indistinguishable, (model, verdict)


def test_srg_pair_hubbard_distinguished():
    g, h = shrikhande(), rook_graph(4)
    verdict = compare_walks(g, h, ModelSpec(2, "boson", ("hubbard", 1.0)),
                            times=(0.5, 1.0, 2.0), tol=1e-8)
    assert verdict.distinguished
    assert verdict.max_deviation > 1e-6


def test_compare_walks_validates_config():
    g = path_graph(3)
    with pytest.raises(ValueError):
        compare_walks(g, g, ModelSpec(1, "single"), times=())
    with pytest.raises(ValueError):
        compare_walks(g, g, ModelSpec(1, "single"), tol=0.0)


def test_full_vs_symmetric_green_values():
    rng = np.random.default_rng(19)
    for _ in range(3):
        n = int(rng.integers(2, 5))
        g = random_graph(n, rng)
        for k in (1, 2, 3):
            full = hamiltonian_kboson(g, k, ("hubbard", 1.0))
            sym = hamiltonian_kboson(g, k, ("hubbard", 1.0), space="symmetric")
            b = symmetrizer_isometry(n, k)
            for t in (0.5, 2.0):
                u_full = unitary(full, t)
                u_sym = unitary(sym, t)
                assert np.abs(u_sym - b.T @ u_full @ b).max() < 1e-10


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(3, "fermion", ("none",))
    with pytest.raises(ValueError):
        ModelSpec(2, "fermion", ("hubbard", 1.0))
    with pytest.raises(ValueError):
        ModelSpec(2, "single", ("none",))
    with pytest.raises(ValueError):
        ModelSpec(2, "boson", ("none",), space="weird")
