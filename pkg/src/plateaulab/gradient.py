"""Partial derivatives of circuit costs.

The workhorse is the parameter-shift identity: every trainable gate here is of
the form ``exp(-i * theta * sigma / 2)`` with ``sigma^2 = I``, for which

    dC/dtheta = (C(theta + pi/2) - C(theta - pi/2)) / 2

holds exactly.  A central finite difference serves as the independent oracle
(default step 1e-5, a reasonable compromise between truncation and rounding
error for costs of order one); the tensor-product warm-up circuit additionally
has closed-form derivatives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ansatz import BlockKind, ParameterVector, parameter_shift_points
from .observables import CostSpec, FactorKind, exact_cost

SHIFT = math.pi / 2
DEFAULT_FD_STEP = 1e-5


class GradientMethod(enum.Enum):
    PARAMETER_SHIFT = "parameter-shift"
    FINITE_DIFFERENCE = "finite-difference"
    WARMUP_ANALYTIC = "warmup-analytic"


@dataclass(frozen=True)
class GradientRequest:
    spec: CostSpec
    params: ParameterVector
    param_index: int
    method: GradientMethod = GradientMethod.PARAMETER_SHIFT
    fd_step: float = DEFAULT_FD_STEP

    def __post_init__(self):
        if not 0 <= self.param_index < len(self.params):
            raise IndexError(f"parameter index {self.param_index} out of range")
        if self.method is GradientMethod.FINITE_DIFFERENCE and self.fd_step <= 0:
            raise ValueError("finite-difference step must be positive")


def partial_derivative(req: GradientRequest, block_seeds=None) -> float:
    if req.method is GradientMethod.PARAMETER_SHIFT:
        plus, minus = parameter_shift_points(req.params, req.param_index, SHIFT)
        return 0.5 * (
            exact_cost(req.spec, plus, block_seeds) - exact_cost(req.spec, minus, block_seeds)
        )
    if req.method is GradientMethod.FINITE_DIFFERENCE:
        plus, minus = parameter_shift_points(req.params, req.param_index, req.fd_step)
        return (
            exact_cost(req.spec, plus, block_seeds) - exact_cost(req.spec, minus, block_seeds)
        ) / (2 * req.fd_step)
    return _warmup_analytic(req.spec, req.params.values, req.param_index)


def full_gradient(
    spec: CostSpec,
    params: ParameterVector,
    method: GradientMethod = GradientMethod.PARAMETER_SHIFT,
    block_seeds=None,
    fd_step: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    return np.array(
        [
            partial_derivative(
                GradientRequest(spec, params, nu, method, fd_step), block_seeds
            )
            for nu in range(len(params))
        ]
    )


def _warmup_analytic(spec: CostSpec, theta: np.ndarray, j: int) -> float:
    """Closed-form derivative for the tensor-product x-rotation circuit.

    Global cost:  dC/dtheta_j = (1/2) sin(theta_j) prod_{k != j} cos^2(theta_k / 2)
    Local cost:   dC/dtheta_j = sin(theta_j) / (2n)
    """
    if spec.layout.block_kind is not BlockKind.TENSOR_RX:
        raise ValueError("analytic derivatives exist only for the tensor-Rx warm-up circuit")
    kind = warmup_cost_kind(spec)
    n = spec.layout.n_qubits
    if kind == "local":
        return math.sin(theta[j]) / (2 * n)
    cos2 = np.cos(theta / 2) ** 2
    prod_others = float(np.prod(np.delete(cos2, j)))
    return 0.5 * math.sin(theta[j]) * prod_others


def warmup_cost_kind(spec: CostSpec) -> str:
    """Classify a warm-up cost spec as 'global' or 'local' (raises otherwise)."""
    obs = spec.observable
    n = obs.n_qubits
    if len(spec.ensemble) != 1:
        raise ValueError("warm-up costs use the single all-zeros input")
    state = spec.ensemble[0][1]
    amps = state.to_statevector().amplitudes if hasattr(state, "to_statevector") else state.amplitudes
    if abs(amps[0] - 1.0) > 1e-12:
        raise ValueError("warm-up costs use the all-zeros input state")
    all_proj0 = all(
        f.kind is FactorKind.PROJ0 for t in obs.terms for f in t.factors
    )
    if not all_proj0 or obs.c0 != 1.0:
        raise ValueError("not a warm-up cost operator")
    if len(obs.terms) == 1 and len(obs.terms[0].factors) == n and obs.terms[0].coeff == -1.0:
        return "global"
    if (
        len(obs.terms) == n
        and all(len(t.factors) == 1 for t in obs.terms)
        and all(abs(t.coeff + 1.0 / n) < 1e-15 for t in obs.terms)
    ):
        return "local"
    raise ValueError("not a warm-up cost operator")
