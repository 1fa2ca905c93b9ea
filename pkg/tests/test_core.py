"""
Tests for quantum/core.py: state construction, Born rule, Kraus application
and projective measurement.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantum.core import (
    BB84_PROJECTORS,
    Basis,
    BasisState,
    DensityMatrix,
    apply_kraus,
    born_probability,
    dm_from_amplitudes,
    dm_from_state,
    maximally_mixed,
    projective_measure,
    projector,
    random_density_matrix,
    trace_distance,
)
from static.errors import DegenerateOutcome, InvalidDensityMatrix, KrausNotTracePreserving


class _FixedDraw:
    """Stand-in stream whose uniform draws are fixed"""

    def __init__(self, value: float):
        self.value = value

    def random(self):
        return self.value


class TestBasisStates:
    def test_encoding_convention(self):
        assert BasisState.for_bit(Basis.Z, 0) is BasisState.EARLY
        assert BasisState.for_bit(Basis.Z, 1) is BasisState.LATE
        assert BasisState.for_bit(Basis.X, 0) is BasisState.PLUS
        assert BasisState.for_bit(Basis.X, 1) is BasisState.MINUS

    def test_early_is_projector_on_first_bin(self):
        rho = dm_from_state(BasisState.EARLY)
        assert np.allclose(rho.elems, [[1, 0], [0, 0]])

    def test_plus_has_all_entries_half(self):
        rho = dm_from_state(BasisState.PLUS)
        assert np.allclose(rho.elems, 0.5)

    def test_minus_off_diagonal_negative(self):
        rho = dm_from_state(BasisState.MINUS)
        assert rho.off_diagonal == pytest.approx(-0.5)

    def test_conjugate_basis(self):
        assert Basis.Z.conjugate is Basis.X
        assert Basis.X.conjugate is Basis.Z


class TestDensityMatrixInvariants:
    def test_rejects_trace_two(self):
        with pytest.raises(InvalidDensityMatrix):
            DensityMatrix(np.eye(2))

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidDensityMatrix):
            DensityMatrix(np.array([[0.5, 0.3], [0.0, 0.5]]))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidDensityMatrix):
            DensityMatrix(np.array([[1.2, 0.0], [0.0, -0.2]]))

    def test_rejects_nan(self):
        with pytest.raises(InvalidDensityMatrix):
            DensityMatrix(np.array([[np.nan, 0.0], [0.0, 0.5]]))

    def test_elements_are_read_only(self):
        rho = maximally_mixed()
        with pytest.raises(ValueError):
            rho.elems[0, 0] = 1.0

    def test_amplitudes_are_normalized(self):
        rho = dm_from_amplitudes(3.0, 4.0j)
        assert rho.elems[0, 0].real == pytest.approx(9 / 25)
        assert rho.elems[1, 1].real == pytest.approx(16 / 25)

    def test_zero_amplitudes_rejected(self):
        with pytest.raises(InvalidDensityMatrix):
            dm_from_amplitudes(0.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_random_density_matrices_are_valid(self, seed):
        rho = random_density_matrix(np.random.default_rng(seed))
        assert rho.is_valid()
        assert np.all(rho.eigenvalues() >= -1e-12)


class TestBornRule:
    @pytest.mark.parametrize(
        "state, basis, bit, expected",
        [
            (BasisState.EARLY, Basis.Z, 0, 1.0),
            (BasisState.EARLY, Basis.X, 0, 0.5),
            (BasisState.PLUS, Basis.X, 0, 1.0),
            (BasisState.PLUS, Basis.Z, 1, 0.5),
            (BasisState.MINUS, Basis.X, 1, 1.0),
        ],
    )
    def test_probabilities(self, state, basis, bit, expected):
        assert born_probability(dm_from_state(state), basis, bit) == pytest.approx(expected)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_normalized_in_both_bases(self, seed):
        rho = random_density_matrix(np.random.default_rng(seed))
        for basis in (Basis.Z, Basis.X):
            assert born_probability(rho, basis, 0) + born_probability(rho, basis, 1) == pytest.approx(1.0, abs=1e-12)

    def test_matches_projector_trace(self):
        rho = random_density_matrix(np.random.default_rng(7))
        for p in BB84_PROJECTORS:
            expected = float(np.trace(p.matrix @ rho.elems).real)
            assert born_probability(rho, p.basis, p.bit) == pytest.approx(expected, abs=1e-12)


class TestProjectors:
    @pytest.mark.parametrize("p", BB84_PROJECTORS, ids=lambda p: f"{p.basis.value}{p.bit}")
    def test_idempotent(self, p):
        assert np.allclose(p.matrix @ p.matrix, p.matrix, atol=1e-12)

    @pytest.mark.parametrize("basis", [Basis.Z, Basis.X])
    def test_complementary_outcomes_are_orthogonal(self, basis):
        product = projector(basis, 0).matrix @ projector(basis, 1).matrix
        assert np.allclose(product, 0.0, atol=1e-12)

    def test_four_projectors_sum_to_twice_identity(self):
        total = sum(p.matrix for p in BB84_PROJECTORS)
        assert np.allclose(total, 2.0 * np.eye(2), atol=1e-12)


class TestApplyKraus:
    def test_identity_leaves_state(self, plus):
        out = apply_kraus(plus, [np.eye(2)])
        assert out.allclose(plus)

    def test_incomplete_set_rejected(self, plus):
        with pytest.raises(KrausNotTracePreserving):
            apply_kraus(plus, [0.5 * np.eye(2)])

    def test_full_dephasing(self, plus):
        z0 = np.diag([1.0, 0.0])
        z1 = np.diag([0.0, 1.0])
        out = apply_kraus(plus, [z0, z1])
        assert out.allclose(maximally_mixed())


class TestProjectiveMeasure:
    def test_eigenstate_is_deterministic(self, early, rng):
        for _ in range(100):
            bit, post = projective_measure(early, Basis.Z, rng)
            assert bit == 0
            assert post.allclose(early)

    def test_conjugate_basis_is_fair(self, early, rng):
        n = 10_000
        ones = sum(projective_measure(early, Basis.X, rng)[0] for _ in range(n))
        assert abs(ones / n - 0.5) < 4 * math.sqrt(0.25 / n)

    def test_collapse_to_eigenstate(self, plus, rng):
        bit, post = projective_measure(plus, Basis.Z, rng)
        assert post.allclose(dm_from_state(BasisState.for_bit(Basis.Z, bit)))

    def test_near_impossible_outcome_is_degenerate(self):
        rho = DensityMatrix(np.diag([1.0 - 1e-15, 1e-15]))
        with pytest.raises(DegenerateOutcome):
            projective_measure(rho, Basis.Z, _FixedDraw(np.nextafter(1.0, 0.0)))


class TestTraceDistance:
    def test_orthogonal_states(self):
        assert trace_distance(dm_from_state(BasisState.EARLY), dm_from_state(BasisState.LATE)) == pytest.approx(1.0)

    def test_unbiased_states(self):
        d = trace_distance(dm_from_state(BasisState.EARLY), dm_from_state(BasisState.PLUS))
        assert d == pytest.approx(math.sqrt(0.5))

    def test_identical_states(self, plus):
        assert trace_distance(plus, plus) == pytest.approx(0.0, abs=1e-15)
