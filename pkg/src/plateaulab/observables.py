"""Cost operators of the form ``c0 * I + sum_i c_i O_i`` and their evaluation.

Three evaluation routes:

* ``exact_cost``: dense statevector expectation, the reference for everything.
* ``shot_cost``: unbiased finite-shot estimator.  Projector-onto-zero and
  Pauli-Z factors read computational-basis samples directly; X/Y factors get
  per-term pre-measurement rotations.  Multi-qubit projector factors are
  exact-only.
* ``lightcone_local_cost``: evaluates each term on the causal cone of its
  support only, so shallow-circuit local costs on ~100 qubits stay cheap.
  Requires a product-state input ensemble.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import ansatz as ansatz_mod
from . import core
from .core import ProductState, Statevector


class UnsupportedInputError(ValueError):
    """Raised when an evaluation route cannot handle the given cost structure."""


class FactorKind(enum.Enum):
    PROJ0 = "proj0"
    PAULI_X = "x"
    PAULI_Y = "y"
    PAULI_Z = "z"
    PROJECTOR = "projector"  # explicit matrix on a qubit tuple


_SINGLE_QUBIT_MATS = {
    FactorKind.PROJ0: core.PROJ0_MAT,
    FactorKind.PAULI_X: core.PAULI_X,
    FactorKind.PAULI_Y: core.PAULI_Y,
    FactorKind.PAULI_Z: core.PAULI_Z,
}

# Pre-measurement basis changes: X -> H, Y -> H S^dagger.
_BASIS_ROTATIONS = {
    FactorKind.PAULI_X: core.HADAMARD,
    FactorKind.PAULI_Y: core.HADAMARD @ core.S_DAGGER,
}


@dataclass(frozen=True)
class Factor:
    qubits: tuple[int, ...]
    kind: FactorKind
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind is FactorKind.PROJECTOR:
            if self.matrix is None:
                raise ValueError("projector factors need an explicit matrix")
            dim = 2 ** len(self.qubits)
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (dim, dim):
                raise ValueError(f"projector matrix shape {m.shape} != ({dim}, {dim})")
            if np.max(np.abs(m @ m - m)) > core.ATOL:
                raise ValueError("projector factor is not idempotent")
            object.__setattr__(self, "matrix", m)
        else:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind.value} factors act on exactly one qubit")
            if self.matrix is not None:
                raise ValueError("only projector factors carry an explicit matrix")

    def matrix_for(self) -> np.ndarray:
        return self.matrix if self.kind is FactorKind.PROJECTOR else _SINGLE_QUBIT_MATS[self.kind]


@dataclass(frozen=True)
class Term:
    coeff: float
    factors: tuple[Factor, ...]

    def support(self) -> tuple[int, ...]:
        qs: list[int] = []
        for f in self.factors:
            qs.extend(f.qubits)
        return tuple(sorted(qs))


@dataclass(frozen=True)
class Observable:
    n_qubits: int
    c0: float
    terms: tuple[Term, ...]

    def __post_init__(self):
        for t in self.terms:
            seen: set[int] = set()
            for f in t.factors:
                for q in f.qubits:
                    if not 0 <= q < self.n_qubits:
                        raise ValueError(f"factor qubit {q} out of range")
                    if q in seen:
                        raise ValueError(f"qubit {q} appears twice in one term")
                    seen.add(q)
            if not t.factors:
                raise ValueError("terms must have at least one factor")


def proj0(qubit: int) -> Factor:
    return Factor((qubit,), FactorKind.PROJ0)


def make_global_projector_cost(n: int) -> Observable:
    """C = 1 - <|0...0><0...0|>: one all-qubit projector term."""
    if n < 1:
        raise ValueError("n must be >= 1")
    term = Term(-1.0, tuple(proj0(q) for q in range(n)))
    return Observable(n, 1.0, (term,))


def make_local_cost(n: int) -> Observable:
    """C = 1 - (1/n) sum_j <|0><0|_j>: one single-qubit projector term per qubit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    terms = tuple(Term(-1.0 / n, (proj0(j),)) for j in range(n))
    return Observable(n, 1.0, terms)


def make_single_term_local_cost(n: int, qubit: int) -> Observable:
    """C = 1 - <|0><0|_qubit>: a fixed local term with unit-size coefficient.

    Used for scaling scans where the 1/n normalization of the averaged local
    cost would itself impose an n-dependence.
    """
    return Observable(n, 1.0, (Term(-1.0, (proj0(qubit),)),))


def make_block_projector_cost(n: int, m: int, ranks, c0: float = 1.0, c1: float = -1.0) -> Observable:
    """The tensor-product-of-projectors global family with per-block ranks.

    Block k carries the projector onto the first ``ranks[k]`` basis states of
    its m-qubit subsystem; rank 1 everywhere reduces to the plain
    all-zeros projector cost.
    """
    if n % m != 0:
        raise ValueError("n must be a multiple of m")
    xi = n // m
    ranks = list(ranks)
    if len(ranks) != xi:
        raise ValueError(f"need {xi} ranks, got {len(ranks)}")
    factors = []
    for k in range(xi):
        r = int(ranks[k])
        if not 1 <= r < 2**m:
            raise ValueError("block projector ranks must be in [1, 2^m - 1] (non-trivial)")
        qubits = tuple(range(k * m, (k + 1) * m))
        if r == 1:
            factors.extend(proj0(q) for q in qubits)
        else:
            mat = np.zeros((2**m, 2**m), dtype=complex)
            mat[:r, :r] = np.eye(r)
            factors.append(Factor(qubits, FactorKind.PROJECTOR, mat))
    return Observable(n, c0, (Term(c1, tuple(factors)),))


def make_autoencoder_costs(n_a: int, n_b: int) -> tuple[Observable, Observable]:
    """Global and local trash-register costs on an (A, B) split.

    Both act on n_a + n_b qubits with projectors supported on the B register
    only; the global one compares the whole trash register to zeros, the local
    one averages single-qubit comparisons.
    """
    if n_a < 1 or n_b < 1:
        raise ValueError("n_a and n_b must be >= 1")
    n = n_a + n_b
    b_qubits = range(n_a, n)
    global_obs = Observable(n, 1.0, (Term(-1.0, tuple(proj0(q) for q in b_qubits)),))
    local_terms = tuple(Term(-1.0 / n_b, (proj0(q),)) for q in b_qubits)
    return global_obs, Observable(n, 1.0, local_terms)


@dataclass(frozen=True)
class CostSpec:
    layout: ansatz_mod.AnsatzLayout
    observable: Observable
    ensemble: tuple[tuple[float, Statevector | ProductState], ...]

    def __post_init__(self):
        if self.observable.n_qubits != self.layout.n_qubits:
            raise ValueError("observable and layout qubit counts differ")
        probs = np.array([p for p, _ in self.ensemble], dtype=float)
        if np.any(probs < 0):
            raise ValueError("ensemble probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"ensemble probabilities sum to {probs.sum()}, not 1")
        for _, st in self.ensemble:
            if st.n_qubits != self.layout.n_qubits:
                raise ValueError("ensemble member qubit count differs from layout")

    @classmethod
    def pure(cls, layout, observable, state) -> "CostSpec":
        return cls(layout, observable, ((1.0, state),))


def term_expectation(term: Term, psi: Statevector) -> float:
    """<psi| (tensor of factors) |psi>, real for the Hermitian factors used here."""
    amps = psi.amplitudes.reshape([2] * psi.n_qubits)
    out = amps
    for f in term.factors:
        out = core._apply_matrix_nd(out, f.matrix_for(), list(f.qubits), psi.n_qubits)
    return float(np.vdot(amps, out).real)


def observable_expectation(obs: Observable, psi: Statevector) -> float:
    return obs.c0 + sum(t.coeff * term_expectation(t, psi) for t in obs.terms)


def exact_cost(spec: CostSpec, params, block_seeds=None) -> float:
    """Ensemble-weighted exact expectation of the cost operator."""
    total = 0.0
    for p, st in spec.ensemble:
        if p == 0.0:
            continue
        psi = ansatz_mod.build_state(spec.layout, params, st, block_seeds)
        total += p * observable_expectation(spec.observable, psi)
    return total


def _term_basis_key(term: Term) -> tuple:
    rots = []
    for f in term.factors:
        if f.kind is FactorKind.PROJECTOR:
            raise UnsupportedInputError(
                "multi-qubit projector factors are exact-only; shot estimation unsupported"
            )
        if f.kind in _BASIS_ROTATIONS:
            rots.append((f.qubits[0], f.kind.value))
    return tuple(sorted(rots))


def _bits_for(indices: np.ndarray, qubit: int, n: int) -> np.ndarray:
    return (indices >> (n - 1 - qubit)) & 1


def shot_cost(spec: CostSpec, params, shots: int, rng, block_seeds=None) -> float:
    """Unbiased finite-shot estimate of ``exact_cost``.

    Each shot samples an ensemble member with its weight, runs the circuit
    (plus per-term basis rotations where a term measures X or Y), samples one
    bitstring per basis group, and scores every term on it.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = spec.layout.n_qubits
    groups: dict[tuple, list[Term]] = {}
    for t in spec.observable.terms:
        groups.setdefault(_term_basis_key(t), []).append(t)

    member_probs = np.array([p for p, _ in spec.ensemble])
    member_draws = rng.choice(len(spec.ensemble), size=shots, p=member_probs / member_probs.sum())
    counts = np.bincount(member_draws, minlength=len(spec.ensemble))

    acc = 0.0
    for mu, n_mu in enumerate(counts):
        if n_mu == 0:
            continue
        psi = ansatz_mod.build_state(spec.layout, params, spec.ensemble[mu][1], block_seeds)
        for key, terms in groups.items():
            rotated = psi
            for qubit, kindval in key:
                rot = _BASIS_ROTATIONS[FactorKind(kindval)]
                rotated = core.apply_gate(rotated, core.GateMatrix(rot, validate=False), [qubit])
            idx = core.sample_basis_indices(rotated.probabilities(), int(n_mu), rng)
            for t in terms:
                vals = np.ones(int(n_mu))
                for f in t.factors:
                    bits = _bits_for(idx, f.qubits[0], n)
                    if f.kind is FactorKind.PROJ0:
                        vals = vals * (1 - bits)
                    else:  # Z, or X/Y already rotated into the Z basis
                        vals = vals * (1 - 2 * bits)
                acc += t.coeff * float(vals.sum())
    return spec.observable.c0 + acc / shots


def _batched_apply_plan(targets: tuple[int, ...], width: int):
    """Precomputed axis bookkeeping for applying a gate on a batched tensor.

    The state has shape (batch, 2, ..., 2); ``perm`` brings the target axes
    right after the batch axis, ``inv`` undoes it.
    """
    rest = [a for a in range(1, width + 1) if a - 1 not in targets]
    perm = [0] + [t + 1 for t in targets] + rest
    inv = list(np.argsort(perm))
    return perm, inv, 2 ** len(targets)


def _batched_apply(vec: np.ndarray, matrix: np.ndarray, plan) -> np.ndarray:
    perm, inv, dim = plan
    batch = vec.shape[0]
    shape = vec.shape
    v = vec.transpose(perm).reshape(batch, dim, -1)
    v = np.matmul(matrix, v)
    return v.reshape([shape[p] for p in perm]).transpose(inv)


class LightconeEvaluator:
    """Per-term causal-cone evaluation plans for a fixed (layout, observable).

    Built once, reused across parameter values: the cone geometry depends only
    on the circuit structure.  Input ensemble members must be product states.
    """

    def __init__(self, spec: CostSpec):
        for _, st in spec.ensemble:
            if not isinstance(st, ProductState):
                raise UnsupportedInputError(
                    "light-cone evaluation needs a product-state input ensemble"
                )
        self.spec = spec
        layout = spec.layout
        structure = ansatz_mod.circuit_gates(
            layout,
            ansatz_mod.ParameterVector.zeros(layout)
            if layout.block_kind is not ansatz_mod.BlockKind.HAAR_BLOCK
            else None,
            block_seeds=(
                [0] * len(layout.block_slots())
                if layout.block_kind is ansatz_mod.BlockKind.HAAR_BLOCK
                else None
            ),
        )
        # Everything theta-independent is precomputed here: per-term kept-gate
        # steps with axis permutations for a lean transpose/matmul apply, the
        # term's factor matrices on local indices, and the members'
        # cone-restricted input tensors stacked into one batch.
        self._plans = []
        n_members = len(spec.ensemble)
        for t in spec.observable.terms:
            kept, cone = ansatz_mod.causal_gate_plan(structure, set(t.support()))
            width = len(cone)
            local_index = {q: i for i, q in enumerate(cone)}
            steps = [
                (gi, _batched_apply_plan(tuple(local_index[q] for q in structure[gi].targets), width))
                for gi in kept
            ]
            factor_steps = [
                (f.matrix_for(), _batched_apply_plan(tuple(local_index[q] for q in f.qubits), width))
                for f in t.factors
            ]
            inputs = np.stack(
                [st.subset_vector(cone) for _, st in spec.ensemble]
            ).reshape([n_members] + [2] * width)
            self._plans.append((steps, factor_steps, width, inputs))
        self.max_cone_width = max((p[2] for p in self._plans), default=0)

    def _term_values(self, params, block_seeds=None) -> np.ndarray:
        """(n_members, n_terms) matrix of per-term expectations."""
        gates = ansatz_mod.circuit_gates(self.spec.layout, params, block_seeds)
        out = np.zeros((len(self.spec.ensemble), len(self._plans)))
        for ti, (steps, factor_steps, width, inputs) in enumerate(self._plans):
            vec = inputs
            for gi, plan in steps:
                vec = _batched_apply(vec, gates[gi].matrix, plan)
            acted = vec
            for mat, plan in factor_steps:
                acted = _batched_apply(acted, mat, plan)
            batch = vec.shape[0]
            out[:, ti] = np.einsum(
                "bi,bi->b", vec.conj().reshape(batch, -1), acted.reshape(batch, -1)
            ).real
        return out

    def exact(self, params, block_seeds=None) -> float:
        values = self._term_values(params, block_seeds)
        probs = np.array([p for p, _ in self.spec.ensemble])
        coeffs = np.array([t.coeff for t in self.spec.observable.terms])
        return self.spec.observable.c0 + float(probs @ values @ coeffs)

    def term_probabilities(self, params, block_seeds=None) -> np.ndarray:
        """Per-member per-term projector probabilities (all factors PROJ0)."""
        for t in self.spec.observable.terms:
            if any(f.kind is not FactorKind.PROJ0 for f in t.factors):
                raise UnsupportedInputError("term probabilities need all-PROJ0 terms")
        return self._term_values(params, block_seeds)


def lightcone_local_cost(spec: CostSpec, params, block_seeds=None) -> float:
    """Exact local cost via per-term causal-cone simulation.

    Matches ``exact_cost`` to well below 1e-9 on product inputs while only
    ever simulating the cone of each term's support.
    """
    return LightconeEvaluator(spec).exact(params, block_seeds)


def epsilon(matrix) -> float:
    """Hilbert-Schmidt distance of M from Tr(M) * I / d: Tr[M^2] - Tr[M]^2 / d.

    Non-negative for Hermitian M; zero exactly when M is proportional to the
    identity.
    """
    m = matrix.matrix if isinstance(matrix, core.DensityMatrix) else np.asarray(matrix)
    d = m.shape[0]
    tr_m2 = float(np.einsum("ij,ji->", m, m).real)
    tr_m = float(np.trace(m).real)
    return tr_m2 - tr_m * tr_m / d


def term_window_matrix(term: Term, window: tuple[int, ...]) -> np.ndarray:
    """Dense matrix of a term's factor product embedded in a qubit window."""
    mats = {q: np.eye(2, dtype=complex) for q in window}
    for f in term.factors:
        if f.kind is FactorKind.PROJECTOR:
            raise ValueError("window embedding supports single-qubit factors only")
        mats[f.qubits[0]] = f.matrix_for()
    out = np.array([[1.0]], dtype=complex)
    for q in window:
        out = np.kron(out, mats[q])
    return out
