"""Trash-compression instance construction and the variable-shot optimizer."""

import numpy as np
import pytest

from plateaulab import autoencoder as ae
from plateaulab import observables as obs
from plateaulab.ansatz import ParameterVector
from tests.conftest import median_final


class TestInstance:
    def test_reference_size_counts(self):
        inst = ae.build_instance(1, 10, 2)
        assert inst.parameter_count == 51
        assert inst.gate_count == 71

    def test_ensemble_is_fixed(self):
        inst = ae.build_instance(1, 4, 2)
        (p1, psi1), (p2, psi2) = inst.ensemble
        assert (p1, p2) == (2 / 3, 1 / 3)
        assert np.argmax(np.abs(psi1.to_statevector().amplitudes)) == 0
        assert np.argmax(np.abs(psi2.to_statevector().amplitudes)) == 0b11100

    def test_identity_circuit_costs(self):
        inst = ae.build_instance(1, 10, 2)
        theta = np.zeros(inst.parameter_count)
        assert ae._DenseCostEvaluator(inst, "global").exact(theta) == pytest.approx(1 / 3)
        assert ae._DenseCostEvaluator(inst, "local").exact(theta) == pytest.approx((1 / 3) * (2 / 10))

    def test_needs_two_trash_qubits(self):
        with pytest.raises(ValueError):
            ae.build_instance(1, 1, 2)

    def test_cost_zero_iff_trash_empties(self):
        # both costs vanish together exactly when the trash maps to zeros for
        # both members; here: at theta = 0 after flipping the inputs's trash
        inst = ae.build_instance(1, 4, 1)
        rng = np.random.default_rng(0)
        ev_g = ae._DenseCostEvaluator(inst, "global")
        ev_l = ae._DenseCostEvaluator(inst, "local")
        for _ in range(50):
            theta = rng.uniform(-np.pi, np.pi, inst.parameter_count)
            cg, cl = ev_g.exact(theta), ev_l.exact(theta)
            assert (cg < 1e-12) == (cl < 1e-12)


class TestEvaluators:
    def test_dense_matches_generic_exact(self):
        rng = np.random.default_rng(1)
        for n_b, layers in ((4, 1), (5, 2), (10, 2)):
            inst = ae.build_instance(1, n_b, layers)
            theta = rng.uniform(-np.pi, np.pi, inst.parameter_count)
            pv = ParameterVector.from_values(inst.layout, theta)
            for kind in ("global", "local"):
                dense = ae._DenseCostEvaluator(inst, kind).exact(theta)
                ref = obs.exact_cost(inst.spec(kind), pv)
                assert dense == pytest.approx(ref, abs=1e-12)

    def test_lightcone_matches_dense(self):
        inst = ae.build_instance(1, 12, 2)
        rng = np.random.default_rng(2)
        theta = rng.uniform(-np.pi, np.pi, inst.parameter_count)
        lc = ae._LightconeCostEvaluator(inst)
        dense = ae._DenseCostEvaluator(inst, "local")
        assert lc.exact(theta) == pytest.approx(dense.exact(theta), abs=1e-12)

    @pytest.mark.parametrize("kind", ["global", "local"])
    def test_dense_shot_estimator_unbiased(self, kind):
        inst = ae.build_instance(1, 6, 2)
        rng = np.random.default_rng(3)
        theta = rng.uniform(-np.pi, np.pi, inst.parameter_count)
        ev = ae._DenseCostEvaluator(inst, kind)
        exact = ev.exact(theta)
        ests = np.array([ev.shots(theta, 50, np.random.default_rng(s)) for s in range(300)])
        se = ests.std(ddof=1) / np.sqrt(len(ests))
        assert abs(ests.mean() - exact) <= 3 * se

    def test_lightcone_shot_estimator_unbiased(self):
        inst = ae.build_instance(1, 8, 2)
        rng = np.random.default_rng(4)
        theta = rng.uniform(-np.pi, np.pi, inst.parameter_count)
        ev = ae._LightconeCostEvaluator(inst)
        exact = ev.exact(theta)
        ests = np.array([ev.shots(theta, 50, np.random.default_rng(s)) for s in range(300)])
        se = ests.std(ddof=1) / np.sqrt(len(ests))
        assert abs(ests.mean() - exact) <= 3 * se

    def test_lightcone_restricted_to_local(self):
        inst = ae.build_instance(1, 18, 2)
        with pytest.raises(ValueError):
            ae._make_evaluator(inst, ae.TrainConfig(cost_kind="global", seed=0, use_lightcone=True))


class TestShotSchedule:
    def test_growth_and_cap(self):
        cfg = ae.TrainConfig(cost_kind="local", seed=0)
        values = [ae.shot_schedule(cfg, k) for k in range(40)]
        for k, v in enumerate(values):
            assert v == min(round(10 * 1.5**k), 100_000)
        assert values[-1] == 100_000

    def test_growth_factor_validated(self):
        with pytest.raises(ValueError):
            ae.TrainConfig(cost_kind="local", seed=0, shot_growth=1.0)


class TestTraining:
    def test_target_met_at_initialization(self):
        inst = ae.build_instance(1, 4, 1)
        cfg = ae.TrainConfig(cost_kind="local", seed=5, target_cost=1.0)
        trace = ae.train(inst, cfg)
        assert trace.outcome is ae.Outcome.CONVERGED
        assert trace.iterations() == 0

    def test_seed_determinism(self):
        inst = ae.build_instance(1, 5, 2)
        cfg = ae.TrainConfig(cost_kind="local", seed=6, max_iterations=12)
        t1, t2 = ae.train(inst, cfg), ae.train(inst, cfg)
        assert [r.est_cost for r in t1.rows] == [r.est_cost for r in t2.rows]
        assert [r.param_hash for r in t1.rows] == [r.param_hash for r in t2.rows]

    def test_recorded_shots_follow_schedule(self):
        inst = ae.build_instance(1, 5, 2)
        cfg = ae.TrainConfig(cost_kind="local", seed=7, max_iterations=60, plateau_window=5)
        trace = ae.train(inst, cfg)
        allowed = {ae.shot_schedule(cfg, k) for k in range(40)}
        shots = [r.shots for r in trace.rows]
        assert set(shots) <= allowed
        assert shots == sorted(shots)  # never decreases

    def test_eval_budget_respected(self):
        inst = ae.build_instance(1, 5, 2)
        cfg = ae.TrainConfig(
            cost_kind="local", seed=8, max_iterations=500, max_cost_evals=400, inner_evals=40
        )
        trace = ae.train(inst, cfg)
        assert trace.outcome is ae.Outcome.MAX_ITERS
        assert trace.total_evals <= 400 + cfg.inner_evals + 2

    def test_exact_logged_at_same_theta(self):
        inst = ae.build_instance(1, 5, 2)
        cfg = ae.TrainConfig(cost_kind="local", seed=9, max_iterations=8)
        trace = ae.train(inst, cfg)
        ev = ae._DenseCostEvaluator(inst, "local")
        for row, theta in zip(trace.rows, trace.thetas):
            assert row.exact_cost == pytest.approx(ev.exact(theta), abs=1e-12)
            assert row.param_hash == ae._param_hash(theta)

    def test_faithfulness_on_short_trace(self):
        inst = ae.build_instance(1, 6, 2)
        cfg = ae.TrainConfig(cost_kind="global", seed=10, max_iterations=15)
        trace = ae.train(inst, cfg)
        report = ae.compare_costs_trace(trace)
        assert report.ok
        assert len(report.local_costs) == len(trace.rows)


class TestReferenceSweep:
    def test_local_n10_sweep_median(self, sweep10_traces):
        # nine seeds at the reference size: median final exact cost <= 0.05
        # within 300 iterations
        _, traces = sweep10_traces
        assert all(t.iterations() <= 300 for t in traces)
        med = median_final(traces)
        assert med <= 0.05, f"median final local cost {med}"

    def test_separation_seedwise(self, separation_traces):
        # directional check: local beats global by 5x on at least 7 of 9 seeds
        _, traces = separation_traces
        wins = sum(
            1
            for lt, gt in zip(traces["local"], traces["global"])
            if gt.final_exact() >= 5 * lt.final_exact()
        )
        assert wins >= 7, f"local won only {wins}/9 seeds"
