"""Dense statevector and density-matrix primitives.

Qubit convention: qubit 0 is the leftmost / most-significant bit, so the basis
state ``|b0 b1 ... b_{n-1}>`` sits at flat index ``int("".join(bits), 2)``.
Amplitude arrays reshape to ``[2] * n`` with axis ``j`` belonging to qubit ``j``.

Gate application works in place over strided amplitude slices (tensordot on the
target axes) rather than through full ``2^n x 2^n`` matrices, which keeps
circuits with ~20 qubits workable on a desktop.
"""

from __future__ import annotations

import math

import numpy as np

ATOL = 1e-10  # tolerance for algebraic identities (norms, unitarity, hermiticity)

_DENSE_DM_MAX_QUBITS = 14  # dense density matrices beyond this are a usage error

# Fixed single-qubit matrices.
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S_DAGGER = np.array([[1, 0], [0, -1j]], dtype=complex)
PROJ0_MAT = np.array([[1, 0], [0, 0]], dtype=complex)
CZ_MAT = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex)


class Statevector:
    """Normalized complex amplitude vector over ``n_qubits`` qubits."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, amplitudes, *, copy: bool = True, validate: bool = True):
        amps = np.array(amplitudes, dtype=complex, copy=copy).reshape(-1)
        n = int(round(math.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError(f"amplitude vector length {amps.size} is not a power of two")
        if n < 1:
            raise ValueError("need at least one qubit")
        if validate:
            norm2 = float(np.vdot(amps, amps).real)
            if abs(norm2 - 1.0) > 1e-8:
                raise ValueError(f"state not normalized: |psi|^2 = {norm2}")
        self.n_qubits = n
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        """The all-zeros computational basis state."""
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, copy=False, validate=False)

    @classmethod
    def from_bits(cls, bits) -> "Statevector":
        bits = [int(b) for b in bits]
        idx = int("".join(str(b) for b in bits), 2)
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[idx] = 1.0
        return cls(amps, copy=False, validate=False)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes, copy=True, validate=False)


class ProductState:
    """Pure product state given as one normalized 2-vector per qubit.

    The light-cone cost evaluator needs inputs in this form so that the state
    on any qubit subset is constructible without touching the full register.
    """

    __slots__ = ("n_qubits", "factors")

    def __init__(self, factors):
        factors = np.array(factors, dtype=complex)
        if factors.ndim != 2 or factors.shape[1] != 2:
            raise ValueError("factors must have shape (n_qubits, 2)")
        norms = np.linalg.norm(factors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-8):
            raise ValueError("every per-qubit factor must be normalized")
        self.n_qubits = factors.shape[0]
        self.factors = factors

    @classmethod
    def from_bits(cls, bits) -> "ProductState":
        basis = np.eye(2, dtype=complex)
        return cls(np.array([basis[int(b)] for b in bits]))

    def subset_vector(self, qubits) -> np.ndarray:
        """Dense amplitude vector of the product state restricted to ``qubits``."""
        vec = np.array([1.0], dtype=complex)
        for q in qubits:
            vec = np.kron(vec, self.factors[q])
        return vec

    def to_statevector(self) -> Statevector:
        return Statevector(self.subset_vector(range(self.n_qubits)), copy=False, validate=False)


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix on ``n_qubits``."""

    __slots__ = ("n_qubits", "matrix")

    def __init__(self, matrix, *, validate: bool = True):
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        n = int(round(math.log2(mat.shape[0])))
        if 2**n != mat.shape[0]:
            raise ValueError("density matrix dimension must be a power of two")
        if n > _DENSE_DM_MAX_QUBITS:
            raise ValueError(f"dense density matrices are limited to {_DENSE_DM_MAX_QUBITS} qubits")
        if validate:
            if np.max(np.abs(mat - mat.conj().T)) > ATOL:
                raise ValueError("density matrix not Hermitian")
            if abs(np.trace(mat).real - 1.0) > ATOL:
                raise ValueError("density matrix trace != 1")
            if np.linalg.eigvalsh(mat).min() < -1e-9:
                raise ValueError("density matrix has negative eigenvalues")
        self.n_qubits = n
        self.matrix = mat

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


class GateMatrix:
    """Unitary acting on ``arity`` qubits."""

    __slots__ = ("arity", "matrix")

    def __init__(self, matrix, *, validate: bool = True):
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("gate matrix must be square")
        arity = int(round(math.log2(mat.shape[0])))
        if 2**arity != mat.shape[0]:
            raise ValueError("gate dimension must be a power of two")
        if validate and np.max(np.abs(mat @ mat.conj().T - np.eye(mat.shape[0]))) > ATOL:
            raise ValueError("matrix is not unitary")
        self.arity = arity
        self.matrix = mat


def _apply_matrix_nd(amps: np.ndarray, matrix: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Apply ``matrix`` on the ``targets`` axes of an ``[2]*n`` amplitude tensor.

    Also handles a leading batch axis: ``amps`` may have shape
    ``(batch, 2, ..., 2)`` with qubit axis ``j`` at position ``j + 1``.
    """
    arity = len(targets)
    batched = amps.ndim == n_qubits + 1
    offset = 1 if batched else 0
    axes = [t + offset for t in targets]
    mat = matrix.reshape([2] * (2 * arity))
    moved = np.tensordot(mat, amps, axes=(list(range(arity, 2 * arity)), axes))
    # tensordot puts the gate's output axes first; move them back home.
    return np.moveaxis(moved, list(range(arity)), axes)


def apply_contiguous(amps: np.ndarray, matrix: np.ndarray, start: int, n_qubits: int) -> np.ndarray:
    """Apply a gate on the adjacent qubit run starting at ``start``.

    ``amps`` is a flat ``(2^n,)`` or batched ``(B, 2^n)`` array.  Because the
    targets are consecutive in the row-major layout, the reshape below is a
    view and the whole application is a single broadcast matmul; this is the
    hot path for layered nearest-neighbour circuits.
    """
    dim = matrix.shape[0]
    arity = dim.bit_length() - 1
    suffix = 2 ** (n_qubits - start - arity)
    lead = amps.size // (dim * suffix)
    out = np.matmul(matrix, amps.reshape(lead, dim, suffix))
    return out.reshape(amps.shape)


def apply_gate(state: Statevector, gate: GateMatrix, targets) -> Statevector:
    """Return the state with ``gate`` applied to the ordered ``targets``.

    Norm is preserved to within 1e-10 (unitarity of the gate).
    """
    targets = list(targets)
    n = state.n_qubits
    if len(targets) != gate.arity:
        raise ValueError(f"gate arity {gate.arity} != number of targets {len(targets)}")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits: {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target qubit {t} out of range for {n} qubits")
    amps = state.amplitudes.reshape([2] * n)
    out = _apply_matrix_nd(amps, gate.matrix, targets, n)
    return Statevector(out.reshape(-1), copy=False, validate=False)


def reduced_density_matrix(state: Statevector, keep) -> DensityMatrix:
    """Reduced state on ``keep`` (ascending qubit order) from a pure state.

    Avoids materializing the full density matrix: reshapes the amplitude
    tensor into (kept, traced) blocks and contracts.
    """
    keep = sorted(set(int(q) for q in keep))
    n = state.n_qubits
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep qubits {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    amps = state.amplitudes.reshape([2] * n)
    perm = keep + traced
    block = np.transpose(amps, perm).reshape(2 ** len(keep), 2 ** len(traced))
    rho = block @ block.conj().T
    return DensityMatrix(rho, validate=False)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out all qubits not in ``keep``; kept qubits stay in ascending order."""
    keep = sorted(set(int(q) for q in keep))
    n = rho.n_qubits
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep qubits {keep} out of range for {n} qubits")
    if len(keep) == n:
        return DensityMatrix(rho.matrix.copy(), validate=False)
    mat = rho.matrix.reshape([2] * (2 * n))
    # einsum labels: row axis of qubit q gets label q; col axis gets q for traced
    # qubits (contracting them) and n+q for kept ones.
    row = list(range(n))
    col = [q + n if q in keep else q for q in range(n)]
    out = keep + [q + n for q in keep]
    reduced = np.einsum(mat, row + col, out)
    dim = 2 ** len(keep)
    return DensityMatrix(reduced.reshape(dim, dim), validate=False)


def sample_bitstrings(state: Statevector, shots: int, rng) -> list[str]:
    """Draw i.i.d. computational-basis samples from the Born distribution.

    ``rng`` is an integer seed or a ``numpy.random.Generator``; a fixed seed
    gives identical sample lists.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    probs = state.probabilities()
    probs = probs / probs.sum()
    idx = rng.choice(probs.size, size=shots, p=probs)
    n = state.n_qubits
    return [format(i, f"0{n}b") for i in idx]


def sample_basis_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Basis-index samples from a probability vector (internal fast path)."""
    return rng.choice(probs.size, size=shots, p=probs / probs.sum())


def haar_random_unitary(dim: int, rng) -> GateMatrix:
    """Haar-distributed unitary via Ginibre + QR with diagonal-phase correction.

    Plain QR of a Gaussian matrix is *not* Haar (the R factor's phases bias the
    distribution); dividing out the phases of diag(R) fixes it exactly, which
    the second-moment checks downstream rely on.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    ginibre = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(ginibre)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return GateMatrix(q, validate=False)
