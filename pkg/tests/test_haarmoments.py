"""Closed-form Haar moment oracles and their Monte-Carlo verification."""

import numpy as np
import pytest

from plateaulab.haarmoments import (
    FIRST_MOMENT_PATTERNS,
    SECOND_MOMENT_PATTERNS,
    first_moment_value,
    lemma1_value,
    lemma2_value,
    lemma3_value,
    lemma5_reduction,
    moment_check,
    random_matrix,
    second_moment_value,
    standard_battery,
)

RNG = np.random.default_rng(100)


class TestClosedForms:
    def test_lemma1_identities(self):
        for d in (2, 4):
            assert lemma1_value(np.eye(d), np.eye(d), d) == pytest.approx(d)

    def test_lemma1_projectors(self):
        proj = np.diag([1.0, 0.0])
        assert lemma1_value(proj, proj, 2) == pytest.approx(0.5)

    def test_lemma1_traceless_vanishes(self):
        z = np.diag([1.0, -1.0])
        b = random_matrix(2, RNG)
        assert lemma1_value(z, b, 2) == pytest.approx(0.0)

    def test_lemma2_identity_inputs_reduce_to_constant(self):
        # with all identities the integrand is Tr[I] = d for every unitary
        for d in (2, 4):
            val = lemma2_value(np.eye(d), np.eye(d), np.eye(d), np.eye(d), d)
            assert val == pytest.approx(d)

    def test_lemma2_bd_identity_reduces_to_trace_product(self):
        # with B = D = I the integrand collapses to the constant Tr[A C]
        for d in (2, 4):
            a, c = random_matrix(d, RNG), random_matrix(d, RNG)
            val = lemma2_value(a, np.eye(d), c, np.eye(d), d)
            assert val == pytest.approx(complex(np.trace(a @ c)))

    def test_lemma3_identity_inputs(self):
        for d in (2, 4):
            val = lemma3_value(np.eye(d), np.eye(d), np.eye(d), np.eye(d), d)
            assert val == pytest.approx(d**2)

    def test_lemma3_bd_identity_reduces_to_trace_product(self):
        # with B = D = I each trace is Tr[A] (resp. Tr[C]) for every unitary
        for d in (2, 4):
            a, c = random_matrix(d, RNG), random_matrix(d, RNG)
            val = lemma3_value(a, np.eye(d), c, np.eye(d), d)
            assert val == pytest.approx(complex(np.trace(a) * np.trace(c)))

    def test_lemma3_traceless_bd_identity_vanishes(self):
        # traceless A, C with B = D = I: the integrand is Tr[A] Tr[C] = 0
        for d in (2, 4):
            a = random_matrix(d, RNG)
            a -= np.trace(a) / d * np.eye(d)
            c = random_matrix(d, RNG)
            c -= np.trace(c) / d * np.eye(d)
            assert lemma3_value(a, np.eye(d), c, np.eye(d), d) == pytest.approx(0.0, abs=1e-12)
            rep = moment_check("lemma3", 10_000, 3, A=a, B=np.eye(d), C=c, D=np.eye(d), d=d)
            assert rep.passed

    def test_conjugation_symmetric_slots(self):
        d = 4
        a, b, c, e = (random_matrix(d, RNG) for _ in range(4))
        assert lemma1_value(a, b, d) == pytest.approx(lemma1_value(b, a, d))
        assert lemma3_value(a, b, c, e, d) == pytest.approx(lemma3_value(c, e, a, b, d))
        # lemma2's trace structure is invariant under the cyclic (A,B)<->(C,D) swap
        assert lemma2_value(a, b, c, e, d) == pytest.approx(lemma2_value(c, e, a, b, d))

    def test_lemma5_product_input(self):
        rho = np.array([[0.7, 0.1], [0.1, 0.3]])
        a = np.kron(np.eye(2), rho)
        out = lemma5_reduction(a, 2)
        np.testing.assert_allclose(out, np.eye(4) / 2, atol=1e-12)

    def test_lemma5_bell_projector(self):
        bell = np.zeros(4)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        out = lemma5_reduction(np.outer(bell, bell), 2)
        np.testing.assert_allclose(out, np.eye(4) / 4, atol=1e-12)

    def test_second_moment_diagonal_values(self):
        for d in (2, 4):
            assert second_moment_value(d, (0, 0, 0, 0, 0, 0, 0, 0)) == pytest.approx(
                2 / (d * (d + 1))
            )
            assert second_moment_value(d, (0, 0, 0, 1, 0, 0, 0, 1)) == pytest.approx(
                1 / (d * (d + 1))
            )

    def test_first_moment_patterns(self):
        assert first_moment_value(4, 0, 1, 0, 1) == pytest.approx(0.25)
        assert first_moment_value(4, 0, 1, 1, 1) == 0
        assert first_moment_value(4, 0, 1, 0, 0) == 0


class TestMonteCarlo:
    def test_minimum_sample_count_enforced(self):
        with pytest.raises(ValueError):
            moment_check("lemma1", 5000, 0, A=np.eye(2), B=np.eye(2), d=2)

    def test_identity_inputs_pass_trivially(self):
        for which in ("lemma1", "lemma2", "lemma3"):
            rep = moment_check(
                which, 10_000, 1, A=np.eye(2), B=np.eye(2), C=np.eye(2), D=np.eye(2), d=2
            ) if which != "lemma1" else moment_check("lemma1", 10_000, 1, A=np.eye(2), B=np.eye(2), d=2)
            assert rep.passed
            assert rep.std_error < 1e-12  # constant integrand

    @pytest.mark.parametrize("which", ["lemma1", "lemma2", "lemma3"])
    def test_random_inputs_within_three_sigma(self, which):
        rng = np.random.default_rng(200)
        ops = {k: random_matrix(2, rng) for k in "ABCD"}
        kwargs = {"A": ops["A"], "B": ops["B"], "d": 2}
        if which != "lemma1":
            kwargs.update({"C": ops["C"], "D": ops["D"]})
        rep = moment_check(which, 20_000, 7, **kwargs)
        assert rep.passed, rep

    def test_lemma5_elementwise(self):
        rng = np.random.default_rng(201)
        rep = moment_check("lemma5", 20_000, 8, A=random_matrix(4, rng), d_w=2)
        assert rep.passed, rep
        assert rep.which == "lemma5"

    def test_moment_patterns_cover_all_delta_classes(self):
        values = {second_moment_value(2, idx) for idx in SECOND_MOMENT_PATTERNS}
        assert complex(0) in values  # vanishing class included
        assert len(values) >= 4  # direct, crossed, diagonal, mixed all distinct
        assert len(FIRST_MOMENT_PATTERNS) == 4

    def test_unknown_check_rejected(self):
        with pytest.raises(ValueError):
            moment_check("lemma9", 10_000, 0, d=2)

    def test_standard_battery_small(self):
        reports = standard_battery(10_000, seed=31, dims=(2,))
        assert all(r.passed for r in reports)
        names = {r.which for r in reports}
        assert names == {"lemma1", "lemma2", "lemma3", "lemma5", "first-moment", "second-moment"}
