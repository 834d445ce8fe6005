"""Quantum models: one state per source, one POVM per measurement.

Every (source, measurement) connection carries its own Hilbert space factor.
A source's state lives on the tensor product of its connections' factors; a
measurement's POVM acts on the tensor product of the factors it receives.
Evaluation contracts states against POVMs connection by connection, which
implements the reordering between the source-major and measurement-major
tensor products without ever permuting amplitudes explicitly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from string import ascii_letters

import numpy as np

from .dist import JointDistribution
from .errors import (
    DecompositionMismatch,
    DimensionBudgetExceeded,
    InvalidPOVM,
    InvalidState,
    ShapeMismatch,
)
from .models import ClassicalModel
from .scenario import Scenario, c3_scenario

HERMITICITY_TOL = 1e-10


def _check_state(rho: np.ndarray, dim: int, what: str):
    if rho.shape != (dim, dim):
        raise InvalidState(f"{what}: shape {rho.shape}, expected {(dim, dim)}")
    if np.abs(rho - rho.conj().T).max() > HERMITICITY_TOL:
        raise InvalidState(f"{what}: not hermitian within {HERMITICITY_TOL}")
    eigenvalues = np.linalg.eigvalsh(rho)
    if eigenvalues.min() < -HERMITICITY_TOL:
        raise InvalidState(f"{what}: negative eigenvalue {eigenvalues.min()}")
    if abs(np.trace(rho).real - 1.0) > HERMITICITY_TOL:
        raise InvalidState(f"{what}: trace {np.trace(rho)} != 1")


def _check_povm(elements, dim: int, what: str):
    total = np.zeros((dim, dim), dtype=complex)
    for i, el in enumerate(elements):
        if el.shape != (dim, dim):
            raise InvalidPOVM(f"{what}[{i}]: shape {el.shape}, expected {(dim, dim)}")
        if np.abs(el - el.conj().T).max() > HERMITICITY_TOL:
            raise InvalidPOVM(f"{what}[{i}]: not hermitian")
        if np.linalg.eigvalsh(el).min() < -HERMITICITY_TOL:
            raise InvalidPOVM(f"{what}[{i}]: not positive semidefinite")
        total += el
    if np.abs(total - np.eye(dim)).max() > HERMITICITY_TOL:
        raise InvalidPOVM(f"{what}: elements do not sum to the identity")


@dataclass(frozen=True)
class QuantumModel:
    """Per-source states and per-measurement POVMs over connection factors.

    connection_dims maps (source name, measurement name) to the local Hilbert
    dimension. states[e] is a density matrix on the product of source e's
    connections (ordered by measurement declaration index); povms[v] is a list
    of d_v operators on the product of measurement v's connections (ordered by
    source declaration index).
    """

    scenario: Scenario
    connection_dims: dict[tuple[str, str], int]
    states: tuple[np.ndarray, ...]
    povms: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        s = self.scenario
        states = tuple(np.asarray(rho, dtype=complex) for rho in self.states)
        povms = tuple(tuple(np.asarray(el, dtype=complex) for el in p) for p in self.povms)
        if len(states) != len(s.sources) or len(povms) != len(s.measurements):
            raise ShapeMismatch("model arrays do not match the scenario")
        for e, (name, _) in enumerate(s.sources):
            dim = int(np.prod([self.connection_dims[(name, s.measurement_names[v])]
                               for v in s.source_members[e]]))
            _check_state(states[e], dim, f"state of source {name!r}")
        for v, (vname, d_v) in enumerate(s.measurements):
            if len(povms[v]) != d_v:
                raise InvalidPOVM(f"measurement {vname!r} needs {d_v} POVM elements")
            dim = int(np.prod([self.connection_dims[(s.source_names[e], vname)]
                               for e in s.sources_of_measurement[v]]))
            _check_povm(povms[v], dim, f"POVM of {vname!r}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "povms", povms)


def evaluate_quantum(q: QuantumModel, dimension_budget: int = 4096) -> JointDistribution:
    """Joint outcome distribution tr[(⊗ states)(⊗ POVM elements)].

    The two tensor products order the connection factors differently
    (source-major vs measurement-major); the contraction pairs each factor's
    row index of the state with the column index of the POVM and vice versa,
    so no explicit permutation of amplitudes is needed.
    """
    s = q.scenario
    total = 1
    for dim in q.connection_dims.values():
        total *= dim
    if total > dimension_budget:
        raise DimensionBudgetExceeded(
            f"total connection dimension {total} exceeds budget {dimension_budget}")

    letters = iter(ascii_letters)
    row = {}  # connection -> letter for the state's row index
    col = {}
    for e, (ename, _) in enumerate(s.sources):
        for v in s.source_members[e]:
            key = (ename, s.measurement_names[v])
            row[key] = next(letters)
            col[key] = next(letters)
    out_letters = {}
    operands, subs = [], []
    for e, (ename, _) in enumerate(s.sources):
        conns = [(ename, s.measurement_names[v]) for v in s.source_members[e]]
        dims = [q.connection_dims[c] for c in conns]
        tensor = q.states[e].reshape(dims + dims)
        subs.append("".join(row[c] for c in conns) + "".join(col[c] for c in conns))
        operands.append(tensor)
    for v, (vname, d_v) in enumerate(s.measurements):
        conns = [(s.source_names[e], vname) for e in s.sources_of_measurement[v]]
        dims = [q.connection_dims[c] for c in conns]
        stacked = np.stack([el.reshape(dims + dims) for el in q.povms[v]])
        o = next(letters)
        out_letters[v] = o
        # POVM contributes [cols; rows] against the state's [rows; cols]
        subs.append(o + "".join(col[c] for c in conns) + "".join(row[c] for c in conns))
        operands.append(stacked)
    spec = ",".join(subs) + "->" + "".join(out_letters[v] for v in range(len(s.measurements)))
    table = np.einsum(spec, *operands, optimize=True)
    if np.abs(table.imag).max() > 1e-10:
        raise InvalidState(f"evaluation produced imaginary part {np.abs(table.imag).max()}")
    return JointDistribution(s.measurement_names, s.outcome_counts, table.real)


# ---------------------------------------------------------------------------
# standard states and bases

def maximally_entangled_state() -> np.ndarray:
    """|Phi+><Phi+| with |Phi+> = (|00> + |11>)/sqrt(2)."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1.0 / np.sqrt(2.0)
    return np.outer(psi, psi.conj())


def classically_correlated_state() -> np.ndarray:
    """(|00><00| + |11><11|)/2: a uniformly shared classical bit."""
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    return rho


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def shared_chsh_observables() -> tuple[np.ndarray, np.ndarray]:
    """One pair of +/-1 observables used by both parties.

    On the maximally entangled state, measuring (A0, A1) = (Z, Z/2 - sqrt(3)/2 Y)
    on both sides yields correlators 1, 1/2, 1/2, -1/2, i.e. a CHSH value of
    5/2: above the classical bound 2, below the Tsirelson bound 2*sqrt(2).
    """
    a0 = PAULI_Z
    a1 = 0.5 * PAULI_Z - (np.sqrt(3.0) / 2.0) * PAULI_Y
    return a0, a1


def observable_basis(observable: np.ndarray) -> list[np.ndarray]:
    """Rank-1 projectors onto the eigenvectors, outcome 0 = eigenvalue +1."""
    eigenvalues, vectors = np.linalg.eigh(observable)
    order = np.argsort(-eigenvalues)
    return [np.outer(vectors[:, i], vectors[:, i].conj()) for i in order]


def build_c3_quantum() -> QuantumModel:
    """Quantum triangle model whose correlation is provably non-classical.

    The a-b source carries a maximally entangled qubit pair; the other two
    sources distribute a shared classical bit. Parties a and b read their
    shared bit as a measurement choice between two fixed bases (the
    eigenbases of the shared CHSH observables) and announce (choice, result)
    as one of 4 outcomes; party c reads both bits, so c knows both choices.
    The choice bits are perfectly correlated with c, which in any classical
    model forces them to be independent of the a-b source's hidden variable;
    the conditional box then violates the CHSH bound (value 5/2), which no
    such model can do.

    Outcome encodings: a and b announce 2*choice + result; c announces
    2*(bit shared with a) + (bit shared with b).
    """
    s = c3_scenario(4)
    a0, a1 = shared_chsh_observables()
    bases = [observable_basis(a0), observable_basis(a1)]
    ket = [np.zeros((2, 2), dtype=complex) for _ in range(2)]
    ket[0][0, 0] = 1.0
    ket[1][1, 1] = 1.0

    # factor order per measurement follows source declaration order (AB, BC, CA):
    # a: (AB, CA), b: (AB, BC), c: (BC, CA)
    povm_a = tuple(np.kron(bases[choice][result], ket[choice])
                   for choice in range(2) for result in range(2))
    povm_b = tuple(np.kron(bases[choice][result], ket[choice])
                   for choice in range(2) for result in range(2))
    povm_c = tuple(np.kron(ket[bc_bit], ket[ca_bit])
                   for ca_bit in range(2) for bc_bit in range(2))

    dims = {("AB", "a"): 2, ("AB", "b"): 2,
            ("BC", "b"): 2, ("BC", "c"): 2,
            ("CA", "a"): 2, ("CA", "c"): 2}
    return QuantumModel(
        s, dims,
        (maximally_entangled_state(), classically_correlated_state(),
         classically_correlated_state()),
        (povm_a, povm_b, povm_c),
    )


# ---------------------------------------------------------------------------
# CHSH evaluation

def chsh_value(box) -> float:
    """S = E(0,0) + E(0,1) + E(1,0) - E(1,1) with E from (-1)^(a+b) weights.

    Classical bound 2, quantum bound 2*sqrt(2), algebraic bound 4.
    """
    from .bell import ConditionalBox  # local to avoid cycles at import time

    if not isinstance(box, ConditionalBox):
        raise ShapeMismatch("chsh_value expects a conditional box")
    if box.parties != ((2, 2), (2, 2)):
        raise ShapeMismatch(f"CHSH needs a 2x2-setting, 2x2-outcome box, got {box.parties}")
    signs = np.array([[1.0, -1.0], [-1.0, 1.0]])
    correlators = np.einsum("xyab,ab->xy", box.table, signs)
    return float(correlators[0, 0] + correlators[0, 1]
                 + correlators[1, 0] - correlators[1, 1])


def chsh_from_state_and_observables(rho, a_observables, b_observables) -> float:
    """Direct correlator computation tr[rho (A_x ⊗ B_y)]; an independent
    cross-check for box extractions."""
    values = np.zeros((2, 2))
    for x, y in np.ndindex(2, 2):
        values[x, y] = np.real(np.trace(rho @ np.kron(a_observables[x], b_observables[y])))
    return float(values[0, 0] + values[0, 1] + values[1, 0] - values[1, 1])


# ---------------------------------------------------------------------------
# random ingredients (demos and test suites)

def random_unitary(dim: int, rng) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(dim: int, rng, pure: bool = False) -> np.ndarray:
    if pure:
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_projective_basis(dim: int, rng) -> list[np.ndarray]:
    u = random_unitary(dim, rng)
    return [np.outer(u[:, i], u[:, i].conj()) for i in range(dim)]


def random_povm(dim: int, outcomes: int, rng) -> list[np.ndarray]:
    raw = []
    for _ in range(outcomes):
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        raw.append(x @ x.conj().T)
    total = sum(raw)
    vals, vecs = np.linalg.eigh(total)
    inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    return [inv_sqrt @ m @ inv_sqrt for m in raw]


def _setting_reader_state(dist: np.ndarray) -> np.ndarray:
    """sum_x p(x) |xx><xx|: a classically shared copy of the setting value."""
    n = len(dist)
    rho = np.zeros((n * n, n * n), dtype=complex)
    for x in range(n):
        rho[x * n + x, x * n + x] = dist[x]
    return rho


def bell_quantum_p4_model(psi_state: np.ndarray, a_povms, b_povms,
                          x_dist, y_dist) -> QuantumModel:
    """Path-scenario model reproducing p(x)p(y) <psi| A^x_a ⊗ B^y_b |psi>.

    The end sources distribute classical copies of the settings; the end
    measurements simply announce their copy, while the middle measurements
    read their copy and apply the corresponding POVM to their half of the
    shared state. a_povms[x][a] acts on the left factor of psi_state,
    b_povms[y][b] on the right.
    """
    from .scenario import validate_scenario

    x_dist = np.asarray(x_dist, dtype=float)
    y_dist = np.asarray(y_dist, dtype=float)
    n_x, n_y = len(x_dist), len(y_dist)
    d_a = len(a_povms[0])
    d_b = len(b_povms[0])
    dim_a = a_povms[0][0].shape[0]
    dim_b = b_povms[0][0].shape[0]
    scenario = validate_scenario({
        "measurements": [{"name": "x", "outcomes": n_x},
                         {"name": "a", "outcomes": d_a},
                         {"name": "b", "outcomes": d_b},
                         {"name": "y", "outcomes": n_y}],
        "sources": [{"name": "XA", "connects": ["x", "a"]},
                    {"name": "AB", "connects": ["a", "b"]},
                    {"name": "BY", "connects": ["b", "y"]}],
    })
    dims = {("XA", "x"): n_x, ("XA", "a"): n_x,
            ("AB", "a"): dim_a, ("AB", "b"): dim_b,
            ("BY", "b"): n_y, ("BY", "y"): n_y}

    def proj(n, v):
        m = np.zeros((n, n), dtype=complex)
        m[v, v] = 1.0
        return m

    povm_x = tuple(proj(n_x, v) for v in range(n_x))
    povm_y = tuple(proj(n_y, v) for v in range(n_y))
    # a's factors: (XA copy, AB half); b's: (AB half, BY copy)
    povm_a = tuple(sum(np.kron(proj(n_x, x), np.asarray(a_povms[x][a], dtype=complex))
                       for x in range(n_x)) for a in range(d_a))
    povm_b = tuple(sum(np.kron(np.asarray(b_povms[y][b], dtype=complex), proj(n_y, y))
                       for y in range(n_y)) for b in range(d_b))
    return QuantumModel(
        scenario, dims,
        (_setting_reader_state(x_dist), np.asarray(psi_state, dtype=complex),
         _setting_reader_state(y_dist)),
        (povm_x, povm_a, povm_b, povm_y),
    )


def random_two_qubit_p4_model(rng):
    """Random pure 2-qubit state with projective qubit bases per setting.

    Returns (model, state, a_observables, b_observables); the observables are
    the +/-1 combinations of the projective bases, for CHSH cross-checks.
    """
    rho = random_density_matrix(4, rng, pure=True)
    a_bases = [random_projective_basis(2, rng) for _ in range(2)]
    b_bases = [random_projective_basis(2, rng) for _ in range(2)]
    model = bell_quantum_p4_model(rho, a_bases, b_bases, [0.5, 0.5], [0.5, 0.5])
    a_obs = [basis[0] - basis[1] for basis in a_bases]
    b_obs = [basis[0] - basis[1] for basis in b_bases]
    return model, rho, a_obs, b_obs


# ---------------------------------------------------------------------------
# separable states compile to classical models

@dataclass(frozen=True)
class SeparableDecomposition:
    """Per source: weights and per-connection product factors.

    terms[e] is a list of (weight, [factor per connection of source e]);
    the weighted tensor products must reproduce the source's state.
    """

    terms: tuple[tuple[tuple[float, tuple[np.ndarray, ...]], ...], ...]


def separable_to_classical(q: QuantumModel, decomp: SeparableDecomposition,
                           tol: float = 1e-9) -> ClassicalModel:
    """Compile a quantum model with separable sources to hidden variables.

    The hidden value of a source is its mixture index; each measurement's
    kernel is the Born probability of its POVM on the corresponding product
    factors. The classical evaluation reproduces the quantum one exactly (up
    to rounding): sampling the mixture index and preparing the product state
    locally is operationally identical to sending the state.
    """
    s = q.scenario
    if len(decomp.terms) != len(s.sources):
        raise DecompositionMismatch("need one decomposition per source")
    factors = []  # factors[e][j][slot] = state on connection slot of source e
    weights = []
    for e, (ename, _) in enumerate(s.sources):
        terms = decomp.terms[e]
        if not terms:
            raise DecompositionMismatch(f"source {ename!r} has no mixture terms")
        w = np.array([t[0] for t in terms], dtype=float)
        if w.min() < 0 or abs(w.sum() - 1.0) > tol:
            raise DecompositionMismatch(f"weights of source {ename!r} are not a distribution")
        conns = [(ename, s.measurement_names[v]) for v in s.source_members[e]]
        rebuilt = np.zeros_like(q.states[e])
        term_factors = []
        for weight, fs in terms:
            fs = tuple(np.asarray(f, dtype=complex) for f in fs)
            if len(fs) != len(conns):
                raise DecompositionMismatch(
                    f"term of source {ename!r} has {len(fs)} factors, needs {len(conns)}")
            for f, c in zip(fs, conns):
                _check_state(f, q.connection_dims[c], f"factor for connection {c}")
            product = fs[0]
            for f in fs[1:]:
                product = np.kron(product, f)
            rebuilt = rebuilt + weight * product
            term_factors.append(fs)
        if np.abs(rebuilt - q.states[e]).max() > tol:
            raise DecompositionMismatch(
                f"mixture does not reproduce the state of source {ename!r} within {tol}")
        factors.append(term_factors)
        weights.append(w)

    kernels = []
    for v, (vname, d_v) in enumerate(s.measurements):
        adj = s.sources_of_measurement[v]
        shape = tuple(len(factors[e]) for e in adj)
        kernel = np.zeros(shape + (d_v,))
        for combo in itertools.product(*(range(n) for n in shape)):
            rho = None
            for e, j in zip(adj, combo):
                slot = s.source_members[e].index(s.measurement_index[vname])
                f = factors[e][j][slot]
                rho = f if rho is None else np.kron(rho, f)
            for outcome in range(d_v):
                kernel[combo + (outcome,)] = np.real(np.trace(rho @ q.povms[v][outcome]))
        kernel = np.clip(kernel, 0.0, None)
        kernel /= kernel.sum(axis=-1, keepdims=True)
        kernels.append(kernel)
    return ClassicalModel(s, tuple(weights), tuple(kernels))
