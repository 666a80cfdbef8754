"""Monte-Carlo gradient statistics over random initializations, the two
closed-form variance bounds, valley-volume probabilities, and scaling fits.

Cost families understood by the scan driver:

* ``warmup-global`` / ``warmup-local``: the tensor-Rx circuit with its
  closed-form costs; gradients are sampled from the analytic derivative, which
  the gradient module separately pins against the simulator.
* ``global``: the all-blocks projector cost on the Haar-block circuit
  (rank-1 blocks, unit coefficient), the regime of the variance upper bound.
* ``local``: the 1/n-averaged single-qubit projector cost, the regime of the
  variance lower bound.
* ``local-one``: a single unit-coefficient projector term placed inside the
  probed block's cone.  Used for scaling scans: the averaged family's 1/n^2
  coefficient decay would mask the n-independence the bound predicts.

For Haar-block scans the probed "parameter" is a single-qubit z-rotation
inserted between two independent Haar blocks inside the target slot, with its
angle drawn uniformly.  Both half-blocks are then exact 2-designs, which is
what the bound theorems assume; a bare Haar block has nothing to
differentiate against.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import core
from .ansatz import AnsatzLayout, BlockAddress, BlockKind, forward_light_cone
from .observables import (
    CostSpec,
    Observable,
    epsilon,
    make_local_cost,
    make_single_term_local_cost,
    term_window_matrix,
)
from .rng import spawn_rng

_CHUNK = 512  # atomic work unit; fixed so worker count cannot change results

WARMUP_FAMILIES = ("warmup-global", "warmup-local")
HAAR_FAMILIES = ("global", "local", "local-one")


@dataclass(frozen=True)
class ScanConfig:
    n: int
    m: int
    layers: int
    cost_family: str
    samples: int
    seed: int
    target_layer: int | None = None  # Haar-block scans; default: layer 1
    target_k: int | None = None  # default: middle block of the layer
    workers: int = 1

    def __post_init__(self):
        if self.cost_family not in WARMUP_FAMILIES + HAAR_FAMILIES:
            raise ValueError(f"unknown cost family {self.cost_family!r}")
        if self.samples < 100:
            raise ValueError("need at least 100 samples for meaningful moments")


@dataclass(frozen=True)
class GradStatsReport:
    config: ScanConfig
    mean: float
    mean_se: float
    variance: float
    var_se: float
    n_samples: int
    f_upper: float | None = None
    g_lower: float | None = None
    closed_form_var: float | None = None
    target: BlockAddress | None = None
    sandwich_pass: bool | None = None

    def zero_mean_pass(self) -> bool:
        return abs(self.mean) <= 3 * self.mean_se


@dataclass(frozen=True)
class GorgeReport:
    cost_family: str
    n: int
    delta: float
    samples: int
    empirical: float
    empirical_se: float
    bound: float
    side: str  # "upper" (empirical must stay below) or "lower" (above)
    passed: bool


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_se: float
    residual: float
    model: str


def f_upper_projector(n: int, m: int, layers: int, l: int, c1: float, ranks) -> float:
    """Variance upper bound, tensor-of-projectors case (one term, ranks r_k)."""
    _check_bound_args(n, m, layers, l)
    big_r = float(np.prod(np.array(list(ranks), dtype=float) ** 2))
    num = 2.0 ** (2 * m + (2 * m - 1) * (layers - l))
    den = (2.0 ** (2 * m) - 1) * 3.0 ** (n / m) * 2.0 ** ((2 - 3 / m) * n)
    return num / den * c1**2 * big_r


def f_upper_traceless(n: int, m: int, layers: int, l: int, coeffs) -> float:
    """Variance upper bound, traceless-factors case (sum_ij c_i c_j)."""
    _check_bound_args(n, m, layers, l)
    s = float(sum(coeffs)) ** 2
    num = 2.0 ** (2 * m * (layers - l + 1) + 1)
    den = 3.0 ** (2 * n / m) * 2.0 ** ((3 - 4 / m) * n)
    return num / den * s


def _check_bound_args(n, m, layers, l):
    if n % m != 0:
        raise ValueError("n must be a multiple of m")
    if not 1 <= l <= layers:
        raise ValueError(f"layer index l={l} outside 1..{layers}")


def g_lower(layout: AnsatzLayout, observable: Observable, ensemble, addr: BlockAddress) -> float:
    """Variance lower bound for local costs on the Haar-block circuit.

    Enumerates the light-cone index sets exactly: term indices whose support
    lies inside the forward cone, and the contiguous pairs (k, k') of aligned
    subsystems fully inside the backward cone.  Partially covered boundary
    subsystems are excluded, which can only lower the bound (every summand is
    non-negative), so the result stays a valid lower bound.
    """
    m = layout.block_width
    cone = forward_light_cone(layout, addr, observable)
    k_lb = cone.subsystem_indices
    prefactor = 2.0 ** (m * (addr.layer + 1) - 1) / (
        (2.0 ** (2 * m) - 1) ** 2 * (2.0**m + 1) ** (layout.layers + addr.layer)
    )
    subsystems = layout.aligned_subsystems()

    total = 0.0
    pair_eps: dict[tuple[int, int], float] = {}
    for i in cone.term_indices:
        term = observable.terms[i]
        eps_oi = epsilon(term_window_matrix(term, _host_window(layout, term)))
        for k in k_lb:
            for kp in k_lb:
                if kp < k or any(x not in k_lb for x in range(k, kp + 1)):
                    continue
                if (k, kp) not in pair_eps:
                    qubits = [q for x in range(k, kp + 1) for q in subsystems[x - 1]]
                    pair_eps[(k, kp)] = epsilon(_reduced_input(ensemble, qubits))
                total += term.coeff**2 * pair_eps[(k, kp)] * eps_oi
    return prefactor * total


def _host_window(layout: AnsatzLayout, term) -> tuple[int, ...]:
    """The m-qubit window hosting a local term: an aligned subsystem or the
    half-shifted straddle between two neighbours (the two allowed alignments).
    Wrap-around supports are rejected."""
    m = layout.block_width
    support = set(term.support())
    for off in range(0, layout.n_qubits - m + 1, m // 2):
        window = tuple(range(off, off + m))
        if support <= set(window):
            return window
    raise ValueError(f"term support {sorted(support)} does not fit an m-local window")


def _reduced_input(ensemble, qubits) -> np.ndarray:
    rho = None
    for p, st in ensemble:
        sv = st.to_statevector() if isinstance(st, core.ProductState) else st
        part = core.reduced_density_matrix(sv, qubits).matrix
        rho = p * part if rho is None else rho + p * part
    return rho


# ---------------------------------------------------------------------------
# Gradient-statistics scans


def estimate_grad_stats(cfg: ScanConfig) -> GradStatsReport:
    if cfg.cost_family in WARMUP_FAMILIES:
        grads = _warmup_gradient_samples(cfg)
        closed = _warmup_closed_variance(cfg)
        report = _moments_report(cfg, grads, target=None)
        return replace(report, closed_form_var=closed)

    layout = AnsatzLayout(cfg.n, cfg.m, cfg.layers, BlockKind.HAAR_BLOCK)
    addr = _resolve_target(layout, cfg)
    if cfg.workers > 1:
        starts = list(range(0, cfg.samples, _CHUNK))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(
                pool.map(
                    _haar_chunk_worker,
                    [(cfg, addr, s, min(s + _CHUNK, cfg.samples)) for s in starts],
                )
            )
        grads = np.concatenate(parts)
    else:
        grads = np.concatenate(
            [
                _haar_gradient_chunk(cfg, addr, s, min(s + _CHUNK, cfg.samples))
                for s in range(0, cfg.samples, _CHUNK)
            ]
        )

    report = _moments_report(cfg, grads, target=addr)
    f_val = g_val = None
    if cfg.cost_family == "global":
        f_val = f_upper_projector(
            cfg.n, cfg.m, cfg.layers, addr.layer, c1=1.0, ranks=[1] * (cfg.n // cfg.m)
        )
        ok = report.variance <= f_val + 3 * report.var_se
    else:
        obs_ = _haar_scan_observable(cfg, addr, layout)
        ensemble = ((1.0, core.Statevector.zero(cfg.n)),)
        g_val = g_lower(layout, obs_, ensemble, addr)
        ok = report.variance >= g_val - 3 * report.var_se
    return replace(report, f_upper=f_val, g_lower=g_val, sandwich_pass=bool(ok))


def _resolve_target(layout: AnsatzLayout, cfg: ScanConfig) -> BlockAddress:
    layer = cfg.target_layer if cfg.target_layer is not None else 1
    slots = [s for s in layout.block_slots() if s.layer == layer]
    if not slots:
        raise ValueError(f"no blocks in layer {layer}")
    if cfg.target_k is not None:
        if cfg.target_k not in [s.k for s in slots]:
            raise ValueError(f"no block k={cfg.target_k} in layer {layer}")
        k = cfg.target_k
    else:
        k = slots[len(slots) // 2].k
    return BlockAddress(k=k, layer=layer)


def _haar_scan_observable(cfg: ScanConfig, addr: BlockAddress, layout: AnsatzLayout) -> Observable:
    if cfg.cost_family == "local":
        return make_local_cost(cfg.n)
    if cfg.cost_family == "local-one":
        slot = [s for s in layout.block_slots() if (s.k, s.layer) == (addr.k, addr.layer)][0]
        return make_single_term_local_cost(cfg.n, slot.qubits[0])
    raise ValueError(cfg.cost_family)


def _haar_chunk_worker(args):
    cfg, addr, start, stop = args
    return _haar_gradient_chunk(cfg, addr, start, stop)


def _haar_gradient_chunk(cfg: ScanConfig, addr: BlockAddress, start: int, stop: int) -> np.ndarray:
    """Exact parameter-shift gradients for samples [start, stop).

    Per sample: fresh Haar blocks everywhere, fresh (W_A, W_B, theta) in the
    probed slot, cost evaluated at theta +- pi/2 with no shot noise.
    """
    layout = AnsatzLayout(cfg.n, cfg.m, cfg.layers, BlockKind.HAAR_BLOCK)
    slots = layout.block_slots()
    target_idx = next(
        i for i, s in enumerate(slots) if (s.k, s.layer) == (addr.k, addr.layer)
    )
    target_slot = slots[target_idx]
    probe_qubit = target_slot.qubits[0]
    n, dim = cfg.n, 2**cfg.m
    n_mats = len(slots) + 1  # +1: the probed slot uses two halves

    # One batched QR per chunk: chunk boundaries are fixed, so the draw for
    # sample i is independent of how chunks are distributed over workers.
    rng = spawn_rng(cfg.seed, start)
    count = stop - start
    mats = np.ascontiguousarray(
        _batched_haar(dim, count * n_mats, rng).reshape(count, n_mats, dim, dim)
    )
    thetas = rng.uniform(-math.pi, math.pi, count)

    value_fn = _fast_cost_fn(cfg, layout, addr)
    grads = np.empty(count)
    for s in range(count):
        # prefix: everything before the probe rotation (same-layer blocks commute)
        amps = np.zeros([2] * n, dtype=complex)
        amps[(0,) * n] = 1.0
        for i in range(target_idx):
            amps = core._apply_matrix_nd(amps, mats[s, i], list(slots[i].qubits), n)
        amps = core._apply_matrix_nd(amps, mats[s, -1], list(target_slot.qubits), n)  # W_B
        costs = []
        for shift in (math.pi / 2, -math.pi / 2):
            rz = core.rz_matrix(thetas[s] + shift)
            out = core._apply_matrix_nd(amps, rz, [probe_qubit], n)
            out = core._apply_matrix_nd(out, mats[s, target_idx], list(target_slot.qubits), n)  # W_A
            for i in range(target_idx + 1, len(slots)):
                out = core._apply_matrix_nd(out, mats[s, i], list(slots[i].qubits), n)
            costs.append(value_fn(out))
        grads[s] = 0.5 * (costs[0] - costs[1])
    return grads


def _batched_haar(dim: int, size: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((size, dim, dim)) + 1j * rng.standard_normal((size, dim, dim))
    q, r = np.linalg.qr(g)
    diag = np.einsum("bii->bi", r)
    return q * (diag / np.abs(diag))[:, None, :]


def _fast_cost_fn(cfg: ScanConfig, layout: AnsatzLayout, addr: BlockAddress):
    """Closed evaluation of the scan cost on a [2]*n amplitude tensor.

    These shortcuts (all-zeros amplitude for the projector product, marginals
    for the local projectors) are cross-checked against the generic observable
    expectation in the test suite.
    """
    n = cfg.n
    if cfg.cost_family == "global":

        def value(amps):
            return 1.0 - abs(amps[(0,) * n]) ** 2

    elif cfg.cost_family == "local":

        def value(amps):
            probs = np.abs(amps.reshape(-1)) ** 2
            total = 0.0
            for j in range(n):
                total += probs.reshape(2**j, 2, -1)[:, 0, :].sum()
            return 1.0 - total / n

    else:  # local-one
        slot = [s for s in layout.block_slots() if (s.k, s.layer) == (addr.k, addr.layer)][0]
        j = slot.qubits[0]

        def value(amps):
            probs = np.abs(amps.reshape(-1)) ** 2
            return 1.0 - float(probs.reshape(2**j, 2, -1)[:, 0, :].sum())

    return value


def _warmup_gradient_samples(cfg: ScanConfig) -> np.ndarray:
    """Vectorized draws of the warm-up analytic derivative at j = 0."""
    rng = spawn_rng(cfg.seed, 0)
    thetas = rng.uniform(-math.pi, math.pi, (cfg.samples, cfg.n))
    if cfg.cost_family == "warmup-local":
        return np.sin(thetas[:, 0]) / (2 * cfg.n)
    cos2 = np.cos(thetas[:, 1:] / 2) ** 2
    return 0.5 * np.sin(thetas[:, 0]) * np.prod(cos2, axis=1)


def _warmup_closed_variance(cfg: ScanConfig) -> float:
    return warmup_closed_variance(cfg.cost_family, cfg.n)


def warmup_closed_variance(family: str, n: int) -> float:
    """Gradient variance of the warm-up circuit under uniform angles."""
    if family == "warmup-global":
        return 0.125 * (3 / 8) ** (n - 1)
    if family == "warmup-local":
        return 1 / (8 * n**2)
    raise ValueError(f"not a warm-up family: {family!r}")


def warmup_variance_null_se(family: str, n: int, samples: int) -> float:
    """Exact standard error of the sample variance under the closed-form law.

    The warm-up gradient factorizes over independent angles, so its fourth
    moment is a product of one-angle integrals: E[sin^4] = 3/8 and
    E[cos^8(t/2)] = 35/128.  Using the exact null moments makes the
    variance-matching acceptance check a proper z-test; the empirical
    fourth-moment estimate is badly biased low for the heavy-tailed global
    family at larger n.
    """
    var = warmup_closed_variance(family, n)
    if family == "warmup-global":
        mu4 = (3 / 128) * (35 / 128) ** (n - 1)
    else:
        mu4 = 3 / (128 * n**4)
    return math.sqrt((mu4 - var**2) / samples)


def _moments_report(cfg: ScanConfig, grads: np.ndarray, target) -> GradStatsReport:
    n = grads.size
    mean = float(grads.mean())
    mean_se = float(grads.std(ddof=1) / math.sqrt(n))
    var = float(grads.var(ddof=1))
    m4 = float(((grads - mean) ** 4).mean())
    var_se = math.sqrt(max(m4 - var**2, 0.0) / n)
    return GradStatsReport(
        config=cfg,
        mean=mean,
        mean_se=mean_se,
        variance=var,
        var_se=var_se,
        n_samples=n,
        target=target,
    )


# ---------------------------------------------------------------------------
# Valley-volume probabilities


def gorge_probability(
    cost_family: str, n: int, delta: float, samples: int, seed: int
) -> GorgeReport:
    """Empirical Pr{C <= delta} under uniform angles vs. the closed-form bound.

    The global cost obeys an upper bound (1-delta)^-1 (1/2)^n on that
    probability (for delta in (0,1)); the local cost obeys a lower bound
    (2 delta - 1)^2 / (1/(2n) + (2 delta - 1)^2) for delta in [1/2, 1].
    """
    rng = spawn_rng(seed, 0)
    thetas = rng.uniform(-math.pi, math.pi, (samples, n))
    cos2 = np.cos(thetas / 2) ** 2
    if cost_family == "global":
        if not 0 < delta < 1:
            raise ValueError("global bound needs delta in (0, 1)")
        costs = 1.0 - np.prod(cos2, axis=1)
        bound = (1 / (1 - delta)) * 0.5**n
        side = "upper"
    elif cost_family == "local":
        if not 0.5 <= delta <= 1:
            raise ValueError("local bound needs delta in [1/2, 1]")
        costs = 1.0 - cos2.mean(axis=1)
        bound = (2 * delta - 1) ** 2 / (1 / (2 * n) + (2 * delta - 1) ** 2)
        side = "lower"
    else:
        raise ValueError(f"unknown cost family {cost_family!r}")
    hits = float(np.mean(costs <= delta))
    se = math.sqrt(max(hits * (1 - hits), 1e-12) / samples)
    passed = hits <= bound + 3 * se if side == "upper" else hits >= bound - 3 * se
    return GorgeReport(
        cost_family=cost_family,
        n=n,
        delta=delta,
        samples=samples,
        empirical=hits,
        empirical_se=se,
        bound=bound,
        side=side,
        passed=bool(passed),
    )


def gorge_cost_samples(cost_family: str, n: int, samples: int, seed: int):
    """(theta_0, cost) pairs for landscape scatter output."""
    rng = spawn_rng(seed, 0)
    thetas = rng.uniform(-math.pi, math.pi, (samples, n))
    cos2 = np.cos(thetas / 2) ** 2
    if cost_family == "global":
        costs = 1.0 - np.prod(cos2, axis=1)
    elif cost_family == "local":
        costs = 1.0 - cos2.mean(axis=1)
    else:
        raise ValueError(f"unknown cost family {cost_family!r}")
    return thetas[:, 0], costs


# ---------------------------------------------------------------------------
# Scaling regression


def scaling_fit(series, model: str) -> ScalingFit:
    """Least-squares slope of the variance series.

    ``model='exponential'`` fits log2(var) against n; ``model='polynomial'``
    fits ln(var) against ln(n).
    """
    series = list(series)
    if len(series) < 4:
        raise ValueError("need at least 4 points for a scaling fit")
    ns = np.array([p[0] for p in series], dtype=float)
    vs = np.array([p[1] for p in series], dtype=float)
    if np.any(vs <= 0):
        raise ValueError("variances must be positive for log fits")
    if model == "exponential":
        x, y = ns, np.log2(vs)
    elif model == "polynomial":
        x, y = np.log(ns), np.log(vs)
    else:
        raise ValueError(f"unknown model {model!r}")
    coeffs, cov = np.polyfit(x, y, 1, cov=True)
    resid = float(np.sqrt(np.mean((np.polyval(coeffs, x) - y) ** 2)))
    return ScalingFit(
        slope=float(coeffs[0]),
        intercept=float(coeffs[1]),
        slope_se=float(np.sqrt(cov[0, 0])),
        residual=resid,
        model=model,
    )


def default_workers() -> int:
    env = os.environ.get("PLATEAULAB_WORKERS")
    return max(1, int(env)) if env else 1
