"""Cost-operator construction and the three evaluation routes."""

import time

import numpy as np
import pytest

from plateaulab import core
from plateaulab.ansatz import AnsatzLayout, BlockKind, ParameterVector
from plateaulab.observables import (
    CostSpec,
    Factor,
    FactorKind,
    LightconeEvaluator,
    Observable,
    Term,
    UnsupportedInputError,
    epsilon,
    exact_cost,
    lightcone_local_cost,
    make_autoencoder_costs,
    make_block_projector_cost,
    make_global_projector_cost,
    make_local_cost,
    observable_expectation,
    shot_cost,
    term_window_matrix,
)


def random_state(n, rng):
    amps = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return core.Statevector(amps / np.linalg.norm(amps))


class TestBuilders:
    def test_global_cost_on_target_and_orthogonal(self):
        obs = make_global_projector_cost(3)
        assert observable_expectation(obs, core.Statevector.zero(3)) == pytest.approx(0.0)
        flipped = core.Statevector.from_bits([1, 0, 0])
        assert observable_expectation(obs, flipped) == pytest.approx(1.0)

    def test_local_cost_endpoints(self):
        obs = make_local_cost(3)
        assert observable_expectation(obs, core.Statevector.zero(3)) == pytest.approx(0.0)
        assert observable_expectation(obs, core.Statevector.from_bits([1, 1, 1])) == pytest.approx(1.0)

    def test_warmup_global_closed_form(self):
        rng = np.random.default_rng(0)
        n = 4
        lay = AnsatzLayout(n, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_global_projector_cost(n), core.Statevector.zero(n))
        for _ in range(5):
            pv = ParameterVector.uniform(lay, rng)
            expected = 1 - np.prod(np.cos(pv.values / 2) ** 2)
            assert exact_cost(spec, pv) == pytest.approx(expected, abs=1e-12)

    def test_warmup_local_closed_form(self):
        rng = np.random.default_rng(1)
        n = 4
        lay = AnsatzLayout(n, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_local_cost(n), core.Statevector.zero(n))
        for _ in range(5):
            pv = ParameterVector.uniform(lay, rng)
            expected = 1 - np.mean(np.cos(pv.values / 2) ** 2)
            assert exact_cost(spec, pv) == pytest.approx(expected, abs=1e-12)

    def test_exact_cost_spot_value(self):
        lay = AnsatzLayout(2, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_global_projector_cost(2), core.Statevector.zero(2))
        pv = ParameterVector.from_values(lay, [np.pi / 2, np.pi / 2])
        assert exact_cost(spec, pv) == pytest.approx(0.75, abs=1e-12)

    def test_autoencoder_costs_on_trash_states(self):
        n_a, n_b = 1, 3
        obs_g, obs_l = make_autoencoder_costs(n_a, n_b)
        clean = core.Statevector.from_bits([1, 0, 0, 0])
        assert observable_expectation(obs_g, clean) == pytest.approx(0.0)
        assert observable_expectation(obs_l, clean) == pytest.approx(0.0)
        one_hot = core.Statevector.from_bits([0, 1, 0, 0])
        assert observable_expectation(obs_g, one_hot) == pytest.approx(1.0)
        assert observable_expectation(obs_l, one_hot) == pytest.approx(1.0 / n_b)

    def test_faithfulness_sandwich_random_states(self):
        # module invariant: C_local <= C_global <= n_b * C_local on 1e3 states
        n_a, n_b = 1, 3
        obs_g, obs_l = make_autoencoder_costs(n_a, n_b)
        rng = np.random.default_rng(2)
        for _ in range(1000):
            psi = random_state(n_a + n_b, rng)
            cg = observable_expectation(obs_g, psi)
            cl = observable_expectation(obs_l, psi)
            assert cl <= cg + 1e-12
            assert cg <= n_b * cl + 1e-12

    def test_block_projector_rank_structure(self):
        obs = make_block_projector_cost(6, 2, [1, 2, 1])
        (term,) = obs.terms
        kinds = [f.kind for f in term.factors]
        assert FactorKind.PROJECTOR in kinds
        mat = [f for f in term.factors if f.kind is FactorKind.PROJECTOR][0].matrix
        assert np.trace(mat).real == pytest.approx(2.0)

    def test_block_projector_rejects_trivial_rank(self):
        with pytest.raises(ValueError):
            make_block_projector_cost(4, 2, [4, 1])

    def test_observable_validation(self):
        with pytest.raises(ValueError):
            Observable(2, 0.0, (Term(1.0, (Factor((5,), FactorKind.PROJ0),)),))
        with pytest.raises(ValueError):
            Observable(
                2,
                0.0,
                (Term(1.0, (Factor((0,), FactorKind.PROJ0), Factor((0,), FactorKind.PAULI_Z))),),
            )

    def test_ensemble_probabilities_checked(self):
        lay = AnsatzLayout(2, 2, 1, BlockKind.TENSOR_RX)
        obs = make_local_cost(2)
        with pytest.raises(ValueError):
            CostSpec(lay, obs, ((0.7, core.Statevector.zero(2)),))


class TestShotCost:
    def test_point_mass_equals_exact(self):
        lay = AnsatzLayout(4, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_local_cost(4), core.Statevector.zero(4))
        pv = ParameterVector.zeros(lay)
        for shots in (1, 7, 100):
            assert shot_cost(spec, pv, shots, 0) == pytest.approx(exact_cost(spec, pv))

    @pytest.mark.parametrize("family", ["global", "local"])
    def test_unbiasedness_over_seeds(self, family):
        # 200 independent seeds at 100 shots: mean within 3 standard errors
        rng = np.random.default_rng(3)
        lay = AnsatzLayout(4, 2, 1, BlockKind.TENSOR_RX)
        obs = make_global_projector_cost(4) if family == "global" else make_local_cost(4)
        spec = CostSpec.pure(lay, obs, core.Statevector.zero(4))
        pv = ParameterVector.uniform(lay, rng)
        exact = exact_cost(spec, pv)
        estimates = np.array([shot_cost(spec, pv, 100, seed) for seed in range(200)])
        se = estimates.std(ddof=1) / np.sqrt(len(estimates))
        assert abs(estimates.mean() - exact) <= 3 * se

    def test_large_shot_count_concentrates(self):
        # CLT check: one 1e6-shot estimate lands within 3 sample-std / sqrt(shots)
        rng = np.random.default_rng(4)
        lay = AnsatzLayout(4, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_local_cost(4), core.Statevector.zero(4))
        pv = ParameterVector.uniform(lay, rng)
        exact = exact_cost(spec, pv)
        est = shot_cost(spec, pv, 1_000_000, 11)
        assert abs(est - exact) <= 3 * 0.5 / 1000  # per-shot std is < 1/2 for costs in [0,1]

    def test_pauli_xy_basis_rotations(self):
        # <X> and <Y> of a y-rotated qubit: exact vs sampled
        lay = AnsatzLayout(2, 2, 1, BlockKind.TENSOR_RX)
        for kind in (FactorKind.PAULI_X, FactorKind.PAULI_Y):
            obs = Observable(2, 0.0, (Term(1.0, (Factor((0,), kind),)),))
            spec = CostSpec.pure(lay, obs, core.Statevector.zero(2))
            pv = ParameterVector.from_values(lay, [1.1, 0.0])
            exact = exact_cost(spec, pv)
            est = np.mean([shot_cost(spec, pv, 400, s) for s in range(60)])
            assert abs(est - exact) < 0.02

    def test_ensemble_membership_sampling(self):
        lay = AnsatzLayout(2, 2, 1, BlockKind.TENSOR_RX)
        obs = make_local_cost(2)
        ens = ((0.5, core.Statevector.zero(2)), (0.5, core.Statevector.from_bits([1, 1])))
        spec = CostSpec(lay, obs, ens)
        pv = ParameterVector.zeros(lay)
        est = np.mean([shot_cost(spec, pv, 200, s) for s in range(50)])
        assert abs(est - exact_cost(spec, pv)) < 0.02

    def test_zero_shots_rejected(self):
        lay = AnsatzLayout(2, 2, 1, BlockKind.TENSOR_RX)
        spec = CostSpec.pure(lay, make_local_cost(2), core.Statevector.zero(2))
        with pytest.raises(ValueError):
            shot_cost(spec, ParameterVector.zeros(lay), 0, 0)

    def test_block_projector_terms_are_exact_only(self):
        lay = AnsatzLayout(4, 2, 1, BlockKind.TENSOR_RX)
        obs = make_block_projector_cost(4, 2, [1, 2])
        spec = CostSpec.pure(lay, obs, core.Statevector.zero(4))
        with pytest.raises(UnsupportedInputError):
            shot_cost(spec, ParameterVector.zeros(lay), 10, 0)


class TestLightcone:
    def test_matches_exact_on_product_inputs(self):
        rng = np.random.default_rng(5)
        for n in range(4, 17, 3):
            lay = AnsatzLayout(n, 2, 2, BlockKind.HARDWARE_RY_CZ)
            st = core.ProductState.from_bits(rng.integers(0, 2, n))
            spec = CostSpec(lay, make_local_cost(n), ((1.0, st),))
            pv = ParameterVector.uniform(lay, rng)
            assert abs(lightcone_local_cost(spec, pv) - exact_cost(spec, pv)) < 1e-9

    def test_haar_block_route(self):
        lay = AnsatzLayout(8, 2, 2, BlockKind.HAAR_BLOCK)
        seeds = list(range(len(lay.block_slots())))
        spec = CostSpec(
            lay, make_local_cost(8), ((1.0, core.ProductState.from_bits([0] * 8)),)
        )
        assert abs(
            lightcone_local_cost(spec, None, seeds) - exact_cost(spec, None, seeds)
        ) < 1e-9

    def test_single_layer_cone_is_one_block(self):
        lay = AnsatzLayout(8, 2, 1, BlockKind.HARDWARE_RY_CZ)
        spec = CostSpec(
            lay, make_local_cost(8), ((1.0, core.ProductState.from_bits([0] * 8)),)
        )
        ev = LightconeEvaluator(spec)
        assert ev.max_cone_width <= 4

    def test_wide_register_is_fast(self):
        lay = AnsatzLayout(101, 2, 2, BlockKind.HARDWARE_RY_CZ)
        _, obs_l = make_autoencoder_costs(1, 100)
        spec = CostSpec(
            lay, obs_l, ((1.0, core.ProductState.from_bits([0] * 101)),)
        )
        pv = ParameterVector.uniform(lay, np.random.default_rng(6))
        start = time.perf_counter()
        lightcone_local_cost(spec, pv)
        assert time.perf_counter() - start < 1.0

    def test_dense_input_rejected(self):
        lay = AnsatzLayout(4, 2, 1, BlockKind.HARDWARE_RY_CZ)
        spec = CostSpec(lay, make_local_cost(4), ((1.0, core.Statevector.zero(4)),))
        with pytest.raises(UnsupportedInputError):
            lightcone_local_cost(spec, ParameterVector.zeros(lay))


class TestEpsilon:
    def test_maximally_mixed_is_zero(self):
        assert epsilon(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-14)

    def test_pure_state_value(self):
        for d in (2, 4, 8):
            rho = np.zeros((d, d))
            rho[0, 0] = 1.0
            assert epsilon(rho) == pytest.approx(1 - 1 / d)

    def test_projector_tensor_identity(self):
        assert epsilon(np.diag([1.0, 1.0, 0.0, 0.0])) == pytest.approx(1.0)

    def test_nonnegative_and_conjugation_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            herm = (g + g.conj().T) / 2
            val = epsilon(herm)
            assert val >= -1e-12
            u = core.haar_random_unitary(4, rng).matrix
            assert abs(epsilon(u @ herm @ u.conj().T) - val) < 1e-10

    def test_term_window_matrix_embedding(self):
        term = Term(-1.0, (Factor((2,), FactorKind.PROJ0),))
        mat = term_window_matrix(term, (2, 3))
        np.testing.assert_allclose(mat, np.diag([1.0, 1.0, 0.0, 0.0]))
        assert epsilon(mat) == pytest.approx(1.0)
