import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fewmode.optical_elements import (
    Circuit,
    PhaseSetting,
    beam_splitter,
    compose,
    mach_zehnder,
    phase_shifter,
)
from fewmode.quantum_core import BasisError, ModeBasis, apply_unitary, basis_state, unitarity_error

phases = st.floats(0, 2 * math.pi, allow_nan=False)


def test_phase_setting_reduced_mod_two_pi():
    assert PhaseSetting(2 * math.pi).radians == 0.0
    assert PhaseSetting(-math.pi / 2).radians == pytest.approx(3 * math.pi / 2)
    assert PhaseSetting(5 * math.pi).radians == pytest.approx(math.pi)


class TestBeamSplitter:
    def test_halves_the_light(self):
        out = apply_unitary(basis_state(["in1", "in2"], "in1"), beam_splitter())
        np.testing.assert_allclose(np.abs(out.amplitudes), [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_two_in_a_row_swap_ports(self):
        bs = beam_splitter().matrix
        # by hand: (1/2)[[1, i],[i, 1]]² = (1/2)[[0, 2i],[2i, 0]]
        np.testing.assert_allclose(bs @ bs, 1j * np.array([[0, 1], [1, 0]]), atol=1e-15)
        out = apply_unitary(apply_unitary(basis_state(["in1", "in2"], "in1"), beam_splitter()), beam_splitter())
        np.testing.assert_allclose(np.abs(out.amplitudes) ** 2, [0, 1], atol=1e-15)

    def test_unitary(self):
        assert unitarity_error(beam_splitter().matrix) < 1e-15


class TestPhaseShifter:
    def test_zero_is_identity(self):
        np.testing.assert_array_equal(phase_shifter(0.0, "a", ["a", "b"]).matrix, np.eye(2))

    def test_pi_flips_one_component(self):
        u = phase_shifter(math.pi, "1", ["1", "2"])
        v = u.matrix @ np.array([1, 1]) / math.sqrt(2)
        np.testing.assert_allclose(v, np.array([-1, 1]) / math.sqrt(2), atol=1e-15)

    def test_unknown_mode(self):
        with pytest.raises(BasisError):
            phase_shifter(1.0, "z", ["a", "b"])

    @settings(max_examples=50, deadline=None)
    @given(phases, phases)
    def test_shifters_on_distinct_modes_commute(self, p1, p2):
        basis = ModeBasis(("a", "b"))
        c1 = Circuit(basis).then(phase_shifter(p1, "a"), ["a"]).then(phase_shifter(p2, "b"), ["b"])
        c2 = Circuit(basis).then(phase_shifter(p2, "b"), ["b"]).then(phase_shifter(p1, "a"), ["a"])
        np.testing.assert_allclose(compose(c1).matrix, compose(c2).matrix, atol=1e-15)


class TestCompose:
    def test_empty_is_identity(self):
        np.testing.assert_array_equal(compose(Circuit(ModeBasis(("a", "b")))).matrix, np.eye(2))

    def test_splitter_then_inverse(self):
        bs = beam_splitter(["a", "b"])
        c = Circuit(bs.basis).then(bs).then(bs.dagger())
        np.testing.assert_allclose(compose(c).matrix, np.eye(2), atol=1e-12)

    def test_first_element_acts_first(self):
        bs = beam_splitter(["a", "b"])
        ps = phase_shifter(0.7, "a", ["a", "b"])
        m = compose(Circuit(bs.basis).then(bs).then(ps)).matrix
        np.testing.assert_allclose(m, ps.matrix @ bs.matrix, atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(phases, phases)
    def test_mach_zehnder_transfer(self, p1, p2):
        m = compose(mach_zehnder(p1, p2, ("a", "b"))).matrix
        assert unitarity_error(m) < 1e-12
        # D1 is the second output row; input enters on the first mode
        assert abs(m[1, 0]) ** 2 == pytest.approx(math.cos((p1 - p2) / 2) ** 2, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(phases, phases, st.floats(-10, 10, allow_nan=False))
    def test_mach_zehnder_depends_on_difference_only(self, p1, p2, delta):
        m = compose(mach_zehnder(p1, p2, ("a", "b"))).matrix
        n = compose(mach_zehnder(p1 + delta, p2 + delta, ("a", "b"))).matrix
        np.testing.assert_allclose(np.abs(m[:, 0]) ** 2, np.abs(n[:, 0]) ** 2, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(phases, phases, phases)
    def test_associative(self, x, y, z):
        basis = ModeBasis(("a", "b"))
        A = phase_shifter(x, "a", basis.labels)
        B = beam_splitter(basis.labels)
        C = phase_shifter(y + z, "b", basis.labels)

        def comp(*elements):
            c = Circuit(basis)
            for e in elements:
                c = c.then(e)
            return compose(c)

        left = comp(A, comp(B, C))
        right = comp(comp(A, B), C)
        np.testing.assert_allclose(left.matrix, right.matrix, atol=1e-12)

    def test_target_outside_basis(self):
        with pytest.raises(BasisError):
            Circuit(ModeBasis(("a", "b"))).then(beam_splitter(["a", "c"]))
