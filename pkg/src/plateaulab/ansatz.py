"""Layered 1D circuit layouts, their parameters, and light-cone geometry.

Three block kinds are supported:

* ``HAAR_BLOCK``: every block is an independent Haar-random unitary on ``m``
  qubits.  This is the reference ansatz for all variance-bound checks, since
  Haar blocks are exact 2-designs.
* ``HARDWARE_RY_CZ``: the real-amplitude circuit used for autoencoder
  training.  One initial column of Ry rotations, then per layer a CZ on every
  odd pair followed by Ry on both qubits, and the same on the shifted (even)
  pairs.  For n qubits and L layers this gives ``n + 2L(n-1)`` parameters and
  ``n + 3L(n-1)`` gates (n=11, L=2: 51 parameters, 71 gates).
* ``TENSOR_RX``: the warm-up tensor product of single-qubit x-rotations, one
  parameter per qubit, no entanglement.

Alternation convention: the block grid of the *last* layer is aligned with the
chain (offsets 0, m, 2m, ...), and earlier layers alternate from there.
Shifted layers start at offset m/2 and leave an idle m/2-qubit pad at both
chain ends (open boundaries, no periodic wrap).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import core
from .core import ProductState, Statevector


class BlockKind(enum.Enum):
    HARDWARE_RY_CZ = "hardware-ry-cz"
    HAAR_BLOCK = "haar-block"
    TENSOR_RX = "tensor-rx"


@dataclass(frozen=True)
class AnsatzLayout:
    n_qubits: int
    block_width: int  # m
    layers: int  # L
    block_kind: BlockKind

    def __post_init__(self):
        n, m, L = self.n_qubits, self.block_width, self.layers
        if n < 1 or L < 1:
            raise ValueError("need n_qubits >= 1 and layers >= 1")
        if self.block_kind in (BlockKind.HAAR_BLOCK, BlockKind.TENSOR_RX):
            if m < 2 or m % 2 != 0:
                raise ValueError("block width must be even and >= 2")
            if n % m != 0:
                raise ValueError(f"n_qubits={n} must be a multiple of block width m={m}")
        else:
            # The Ry/CZ circuit pairs neighbours directly; odd n just leaves a
            # boundary qubit unpaired in each half-layer (the 11-qubit
            # autoencoder instance needs this).
            if m != 2:
                raise ValueError("hardware Ry/CZ layout is defined for block width 2")

    @property
    def n_block_columns(self) -> int:
        """xi = n/m, the number of aligned block columns."""
        return self.n_qubits // self.block_width

    def layer_is_aligned(self, layer: int) -> bool:
        """Layers alternate; the last layer sits on the aligned grid."""
        return (self.layers - layer) % 2 == 0

    def parameter_count(self) -> int:
        n, L = self.n_qubits, self.layers
        if self.block_kind is BlockKind.HAAR_BLOCK:
            return 0
        if self.block_kind is BlockKind.TENSOR_RX:
            return n
        return n + 2 * L * (n - 1)

    def gate_count(self) -> int:
        n, L = self.n_qubits, self.layers
        if self.block_kind is BlockKind.HARDWARE_RY_CZ:
            return n + 3 * L * (n - 1)
        return len(self.block_slots())

    def block_slots(self) -> list["BlockSlot"]:
        """All (k, l) block positions in layer order, then column order."""
        if self.block_kind is BlockKind.HARDWARE_RY_CZ:
            raise ValueError("the Ry/CZ layout is gate-structured, not block-structured")
        n, m = self.n_qubits, self.block_width
        slots = []
        for l in range(1, self.layers + 1):
            if self.layer_is_aligned(l):
                offsets = range(0, n, m)
            else:
                offsets = range(m // 2, n - m + 1, m)
            for k, off in enumerate(offsets, start=1):
                slots.append(BlockSlot(k=k, layer=l, qubits=tuple(range(off, off + m))))
        return slots

    def aligned_subsystems(self) -> list[tuple[int, ...]]:
        """The m-qubit subsystems of the aligned (last-layer) grid, k = 1..xi."""
        m = self.block_width
        return [tuple(range(off, off + m)) for off in range(0, self.n_qubits, m)]


@dataclass(frozen=True)
class BlockSlot:
    k: int
    layer: int
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class BlockAddress:
    k: int
    layer: int
    nu: int = 0


@dataclass(frozen=True)
class LightCone:
    forward_qubits: frozenset[int]
    backward_qubits: frozenset[int]
    backward_blocks: tuple[BlockSlot, ...]
    term_indices: tuple[int, ...] | None = None  # i_L, when an observable was given
    subsystem_indices: tuple[int, ...] | None = None  # k_LB


@dataclass(frozen=True)
class ParameterVector:
    values: np.ndarray
    block_index_map: tuple[BlockAddress, ...]

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def zeros(cls, layout: AnsatzLayout) -> "ParameterVector":
        return cls(np.zeros(layout.parameter_count()), _index_map(layout))

    @classmethod
    def from_values(cls, layout: AnsatzLayout, values) -> "ParameterVector":
        values = np.asarray(values, dtype=float)
        if values.size != layout.parameter_count():
            raise ValueError(
                f"layout expects {layout.parameter_count()} parameters, got {values.size}"
            )
        return cls(values.copy(), _index_map(layout))

    @classmethod
    def uniform(cls, layout: AnsatzLayout, rng: np.random.Generator) -> "ParameterVector":
        """Angles drawn uniformly from [-pi, pi], the random-initialization model."""
        vals = rng.uniform(-np.pi, np.pi, layout.parameter_count())
        return cls(vals, _index_map(layout))

    def shifted(self, index: int, delta: float) -> "ParameterVector":
        if not 0 <= index < self.values.size:
            raise IndexError(f"parameter index {index} out of range")
        vals = self.values.copy()
        vals[index] += delta
        return replace(self, values=vals)


def parameter_shift_points(params: ParameterVector, index: int, shift: float):
    """The two evaluation points theta +- shift * e_index."""
    return params.shifted(index, +shift), params.shifted(index, -shift)


def _index_map(layout: AnsatzLayout) -> tuple[BlockAddress, ...]:
    kind = layout.block_kind
    if kind is BlockKind.HAAR_BLOCK:
        return ()
    if kind is BlockKind.TENSOR_RX:
        m = layout.block_width
        return tuple(
            BlockAddress(k=q // m + 1, layer=1, nu=q % m) for q in range(layout.n_qubits)
        )
    # Ry/CZ: the initial rotation column is addressed as layer 0; each CZ pair
    # in a layer is one block with its two trailing rotations as nu = 0, 1.
    addresses = [BlockAddress(k=q + 1, layer=0, nu=0) for q in range(layout.n_qubits)]
    for l in range(1, layout.layers + 1):
        for k, (_a, _b) in enumerate(_rycz_pairs(layout.n_qubits), start=1):
            addresses.append(BlockAddress(k=k, layer=l, nu=0))
            addresses.append(BlockAddress(k=k, layer=l, nu=1))
    return tuple(addresses)


def _rycz_pairs(n: int) -> list[tuple[int, int]]:
    odd = [(q, q + 1) for q in range(0, n - 1, 2)]
    even = [(q, q + 1) for q in range(1, n - 1, 2)]
    return odd + even


@dataclass(frozen=True)
class GateOp:
    matrix: np.ndarray
    targets: tuple[int, ...]


def circuit_gates(
    layout: AnsatzLayout,
    params: ParameterVector | None = None,
    block_seeds=None,
) -> list[GateOp]:
    """Concrete gate list realizing V(theta) for the layout.

    For ``HAAR_BLOCK``, ``block_seeds`` must provide one seed per block slot
    (so the circuit is reproducible); parametrized kinds need ``params``.
    """
    kind = layout.block_kind
    if kind is BlockKind.HAAR_BLOCK:
        slots = layout.block_slots()
        if block_seeds is None:
            raise ValueError("HAAR_BLOCK circuits need per-block seeds")
        if len(block_seeds) != len(slots):
            raise ValueError(f"need {len(slots)} block seeds, got {len(block_seeds)}")
        dim = 2**layout.block_width
        return [
            GateOp(core.haar_random_unitary(dim, seed).matrix, slot.qubits)
            for slot, seed in zip(slots, block_seeds)
        ]

    if params is None:
        raise ValueError(f"{kind.value} circuits need parameter values")
    if params.values.size != layout.parameter_count():
        raise ValueError(
            f"layout expects {layout.parameter_count()} parameters, got {params.values.size}"
        )
    theta = params.values

    if kind is BlockKind.TENSOR_RX:
        return [GateOp(core.rx_matrix(theta[q]), (q,)) for q in range(layout.n_qubits)]

    gates = []
    idx = 0
    for q in range(layout.n_qubits):
        gates.append(GateOp(core.ry_matrix(theta[idx]), (q,)))
        idx += 1
    for _l in range(layout.layers):
        for a, b in _rycz_pairs(layout.n_qubits):
            gates.append(GateOp(core.CZ_MAT, (a, b)))
            gates.append(GateOp(core.ry_matrix(theta[idx]), (a,)))
            gates.append(GateOp(core.ry_matrix(theta[idx + 1]), (b,)))
            idx += 2
    return gates


def apply_gates(state: Statevector, gates: list[GateOp]) -> Statevector:
    amps = state.amplitudes.reshape([2] * state.n_qubits)
    for g in gates:
        amps = core._apply_matrix_nd(amps, g.matrix, list(g.targets), state.n_qubits)
    return Statevector(amps.reshape(-1), copy=False, validate=False)


def apply_gates_batch(amps: np.ndarray, gates: list[GateOp], n_qubits: int) -> np.ndarray:
    """Evolve a (batch, 2, ..., 2) amplitude tensor through the gate list."""
    for g in gates:
        amps = core._apply_matrix_nd(amps, g.matrix, list(g.targets), n_qubits)
    return amps


def build_state(
    layout: AnsatzLayout,
    params: ParameterVector | None,
    input_state: Statevector | ProductState,
    block_seeds=None,
) -> Statevector:
    """Apply V(theta) (layers 1..L in order) to the input state."""
    if isinstance(input_state, ProductState):
        input_state = input_state.to_statevector()
    if input_state.n_qubits != layout.n_qubits:
        raise ValueError(
            f"input has {input_state.n_qubits} qubits, layout has {layout.n_qubits}"
        )
    return apply_gates(input_state, circuit_gates(layout, params, block_seeds))


def _expand_through_layers(layout: AnsatzLayout, start: set[int], layer_range) -> tuple[set[int], list[BlockSlot]]:
    slots_by_layer: dict[int, list[BlockSlot]] = {}
    for slot in layout.block_slots():
        slots_by_layer.setdefault(slot.layer, []).append(slot)
    cone = set(start)
    touched: list[BlockSlot] = []
    for l in layer_range:
        snapshot = set(cone)
        for slot in slots_by_layer.get(l, []):
            if snapshot & set(slot.qubits):
                cone.update(slot.qubits)
                touched.append(slot)
    return cone, touched


def forward_light_cone(layout: AnsatzLayout, addr: BlockAddress, observable=None) -> LightCone:
    """Forward and backward causal cones of block (k, l) in the 1D layout.

    With an observable attached, also computes the index sets the variance
    lower bound needs: ``term_indices`` (terms whose support lies inside the
    forward cone) and ``subsystem_indices`` (aligned subsystems S_k fully
    inside the backward cone; partially covered boundary subsystems are
    excluded so the bound stays conservative).
    """
    slot = _find_slot(layout, addr)
    fwd, _ = _expand_through_layers(
        layout, set(slot.qubits), range(addr.layer + 1, layout.layers + 1)
    )
    bwd, bwd_slots = _expand_through_layers(
        layout, set(slot.qubits), range(addr.layer - 1, 0, -1)
    )
    blocks = (slot, *bwd_slots)

    term_idx = None
    subsys_idx = None
    if observable is not None:
        term_idx = tuple(
            i for i, t in enumerate(observable.terms) if set(t.support()) <= fwd
        )
        subsys_idx = tuple(
            k
            for k, qubits in enumerate(layout.aligned_subsystems(), start=1)
            if set(qubits) <= bwd
        )
    return LightCone(
        forward_qubits=frozenset(fwd),
        backward_qubits=frozenset(bwd),
        backward_blocks=blocks,
        term_indices=term_idx,
        subsystem_indices=subsys_idx,
    )


def _find_slot(layout: AnsatzLayout, addr: BlockAddress) -> BlockSlot:
    for slot in layout.block_slots():
        if slot.k == addr.k and slot.layer == addr.layer:
            return slot
    raise ValueError(f"no block at column k={addr.k}, layer {addr.layer}")


def causal_gate_plan(gates: list[GateOp], support: set[int]) -> tuple[list[int], tuple[int, ...]]:
    """Indices of gates causally upstream of ``support``, plus the cone qubits.

    Walks the gate list backwards keeping every gate that touches the growing
    cone.  Works for any circuit, including the Ry/CZ layout whose per-layer
    double pairing widens cones faster than the plain block grid.
    """
    cone = set(support)
    kept = []
    for idx in range(len(gates) - 1, -1, -1):
        g = gates[idx]
        if cone & set(g.targets):
            cone.update(g.targets)
            kept.append(idx)
    kept.reverse()
    return kept, tuple(sorted(cone))
