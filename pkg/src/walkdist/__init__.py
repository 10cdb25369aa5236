"""walkdist: multi-particle quantum-walk distinguishability for graphs,
with cellular-algebra equivalence certificates."""

from .errors import (
    ConsistencyError,
    Graph6ParseError,
    NumericsError,
    SearchTimeout,
    SizeCapError,
    WalkdistError,
)
from .graphs import (
    Graph,
    SrgParams,
    are_isomorphic_bruteforce,
    cfi_pair,
    color_refinement,
    paley,
    parse_graph6,
    read_graph6_file,
    rook_graph,
    shrikhande,
    srg_parameters,
    write_graph6,
)
from .cellular import (
    CellularBasis,
    Relation,
    RelationBijection,
    cell_value,
    cellular_closure,
    graph_closure,
    is_member,
    matrix_similarity,
    refine_step,
    structure_constants,
    trace_of,
    weak_equivalence,
)
from .extensions import (
    DEFAULT_POINT_CAP,
    EvidenceResult,
    centralizer_basis,
    cylindric,
    k_equivalence_evidence,
    k_extension,
    k_wl_compare,
    permutation_relation,
)
from .walk import (
    DEFAULT_TIMES,
    DEFAULT_TOL,
    GreensSignature,
    Hamiltonian,
    ModelSpec,
    OccupationClasses,
    WalkVerdict,
    build_hamiltonian,
    compare_walks,
    greens_signature,
    hamiltonian_2boson,
    hamiltonian_2fermion,
    hamiltonian_kboson,
    hamiltonian_single,
    occupation_classes,
    relation_decomposition,
    unitary,
)

__version__ = "0.1.0"
