import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from fewmode.experiments import (
    CAT_ALIASES,
    DetectorModel,
    MeasurementRecord,
    MZConfig,
    RTOConfig,
    SlitConfig,
    correlation_table,
    default_detector,
    double_slit_intensity,
    double_slit_sample,
    fifty_fifty,
    insertion_fractions,
    mz_delayed,
    mz_run,
    mz_sample,
    ready_product,
    rto_joint,
    rto_output_state,
    rto_sample,
    von_neumann_measure,
)
from fewmode.quantum_core import (
    BasisError,
    ModeBasis,
    basis_state,
    density_of,
    is_entangled,
    make_rng,
    make_state,
    partial_trace,
    tensor,
)

phases = st.floats(0, 2 * math.pi, allow_nan=False)
R2 = 1 / math.sqrt(2)


def chi_square_pvalue(counts, probs, min_expected=5.0):
    """Pearson goodness of fit, pooling adjacent low-expectation bins."""
    expected = probs * counts.sum()
    obs_groups, exp_groups = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
            o_acc = e_acc = 0.0
    obs_groups[-1] += o_acc
    exp_groups[-1] += e_acc
    return sps.chisquare(obs_groups, exp_groups).pvalue


def local_maxima(y):
    return [i for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] >= y[i + 1]]


def refined_peak(x, y, i):
    """Vertex of the parabola through the three samples around index ``i``."""
    a, b, c = y[i - 1], y[i], y[i + 1]
    h = x[i + 1] - x[i]
    return x[i] + 0.5 * h * (a - c) / (a - 2 * b + c)


class TestMachZehnder:
    @pytest.mark.parametrize(
        "delta, expected",
        [(0.0, (1.0, 0.0)), (math.pi, (0.0, 1.0)), (math.pi / 2, (0.5, 0.5))],
    )
    def test_closed(self, delta, expected):
        s = mz_run(MZConfig(delta, 0.0, "closed"))
        assert (s.p_d1, s.p_d2) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(phases, phases)
    def test_open_ignores_phases(self, p1, p2):
        s = mz_run(MZConfig(p1, p2, "open"))
        assert (s.p_d1, s.p_d2) == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_closed_matches_fringe_formula(self):
        rng = np.random.default_rng(0)
        for p1, p2 in rng.uniform(0, 2 * math.pi, size=(100, 2)):
            s = mz_run(MZConfig(p1, p2, "closed"))
            assert s.p_d1 == pytest.approx(math.cos((p1 - p2) / 2) ** 2, abs=1e-12)
            shifted = mz_run(MZConfig(p1 + 0.37, p2 + 0.37, "closed"))
            assert shifted.p_d1 == pytest.approx(s.p_d1, abs=1e-12)


class TestDelayed:
    def test_limits(self):
        for p1 in (0.0, 1.0, math.pi):
            assert mz_delayed(MZConfig(p1, 0, "delayed", 1.0)).p_d1 == pytest.approx(0.5, abs=1e-12)
            closed = mz_run(MZConfig(p1, 0, "closed")).p_d1
            assert mz_delayed(MZConfig(p1, 0, "delayed", 0.0)).p_d1 == pytest.approx(closed, abs=1e-12)

    def test_half_front_zero_phase(self):
        s = mz_delayed(MZConfig(0, 0, "delayed", 0.5))
        assert (s.p_d1, s.p_d2) == pytest.approx((0.75, 0.25), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(phases, phases)
    def test_affine_in_front_fraction(self, p1, p2):
        r = np.array(insertion_fractions(16))
        p = np.array([mz_delayed(MZConfig(p1, p2, "delayed", x)).p_d1 for x in r])
        chord = p[0] + (p[-1] - p[0]) * r
        assert np.max(np.abs(p - chord)) < 1e-12

    def test_sixteen_insertion_times(self):
        r = insertion_fractions()
        assert len(r) == 16 and r[0] == 0 and r[-1] == 1

    def test_rejects_out_of_range_fraction(self):
        with pytest.raises(ValueError):
            MZConfig(0, 0, "delayed", 1.5)


def rto_formula(delta):
    return 0.5 * (1 + math.cos(delta)), 0.5 * (1 - math.cos(delta))


class TestRTO:
    @pytest.mark.parametrize(
        "delta, corr",
        [(0.0, 1.0), (math.pi, 0.0), (math.pi / 2, 0.5), (math.pi / 4, 0.5 * (1 + math.cos(math.pi / 4)))],
    )
    def test_table_points(self, delta, corr):
        j = rto_joint(RTOConfig(0.0, delta))
        assert j.p_corr == pytest.approx(corr, abs=1e-12)
        assert j.degree_of_correlation == pytest.approx(math.cos(delta), abs=1e-12)

    def test_quarter_turn_value(self):
        assert rto_joint(RTOConfig(0, math.pi / 4)).p_corr == pytest.approx(0.853553390593, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(phases, phases)
    def test_matches_formula_and_no_signaling(self, pa, pb):
        j = rto_joint(RTOConfig(pa, pb))
        corr, anti = rto_formula(pb - pa)
        assert j.p_corr == pytest.approx(corr, abs=1e-12)
        assert j.p_anti == pytest.approx(anti, abs=1e-12)
        for m in (j.marginal_a, j.marginal_b):
            assert list(m.values()) == pytest.approx([0.5, 0.5], abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(phases, phases, st.floats(-7, 7, allow_nan=False))
    def test_depends_on_difference_only(self, pa, pb, d):
        e1 = rto_joint(RTOConfig(pa, pb)).degree_of_correlation
        e2 = rto_joint(RTOConfig(pa + d, pb + d)).degree_of_correlation
        assert e1 == pytest.approx(e2, abs=1e-12)

    def test_output_state_is_normalized_and_entangled(self):
        s = rto_output_state(RTOConfig(0.3, 1.1))
        assert abs(s.norm - 1) < 1e-12
        assert is_entangled(s)


class TestRTOSample:
    def test_zero_phase_never_anticorrelated(self):
        rec, stats = rto_sample(RTOConfig(0, 0), 100_000, make_rng(1))
        counts = rec.counts()
        assert counts.get("A1⊗B2", 0) + counts.get("A2⊗B1", 0) == 0
        assert stats.p_anti == 0

    def test_quarter_turn_correlation_near_zero(self):
        n = 100_000
        _, stats = rto_sample(RTOConfig(0, math.pi / 2), n, make_rng(2))
        assert abs(stats.degree_of_correlation) < 5 * math.sqrt(1 / n)

    def test_fixed_seed_identical_record(self):
        r1, _ = rto_sample(RTOConfig(0.2, 1.0), 1000, make_rng(9), seed=9)
        r2, _ = rto_sample(RTOConfig(0.2, 1.0), 1000, make_rng(9), seed=9)
        assert r1.entries == r2.entries


class TestMeasurementRecord:
    def test_append_only_growth(self):
        rec = MeasurementRecord()
        sizes = []
        for i in range(5):
            rec.append("D1" if i % 2 else "D2", 3)
            sizes.append(len(rec))
        assert sizes == [1, 2, 3, 4, 5]
        assert [e[0] for e in rec] == list(range(5))
        assert not hasattr(rec, "__setitem__") and not hasattr(rec, "__delitem__")

    def test_round_trip_is_bit_identical(self, tmp_path):
        rec, _ = mz_sample(MZConfig(0.4, 0, "closed"), 500, make_rng(4), seed=4)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        rec.write(p1)
        back = MeasurementRecord.read(p1)
        back.write(p2)
        assert back.entries == rec.entries
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_non_monotone_file(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("trial,outcome,seed\n0,D1,1\n2,D2,1\n")
        with pytest.raises(ValueError):
            MeasurementRecord.read(p)


class TestVonNeumann:
    def test_eigenstate_input(self):
        det = default_detector()
        out = von_neumann_measure(basis_state(["A1", "A2"], "A1"), det)
        assert out.amplitude("A1⊗D1") == pytest.approx(1.0)
        assert not is_entangled(out)

    def test_fifty_fifty_gives_entangled_pointer_state(self):
        out = von_neumann_measure(fifty_fifty(), default_detector())
        expected = {lab: 0.0 for lab in out.basis.labels}
        expected["A1⊗D1"] = expected["A2⊗D2"] = R2
        for lab, a in out.as_dict().items():
            assert abs(a - expected[lab]) < 1e-12
        assert is_entangled(out)

    def test_reduced_operators_are_even_mixtures(self):
        out = von_neumann_measure(fifty_fifty(), default_detector())
        rho = density_of(out)
        np.testing.assert_allclose(partial_trace(rho, "A").matrix, np.eye(2) / 2, atol=1e-12)
        rho_d = partial_trace(rho, "B").matrix
        # pointer basis is (ready, D1, D2); ready is never populated
        np.testing.assert_allclose(rho_d, np.diag([0, 0.5, 0.5]), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
    def test_linearity(self, a, b):
        if abs(a) ** 2 + abs(b) ** 2 < 1e-6:
            return
        det = default_detector()
        s = make_state({"A1": a, "A2": b})
        out = von_neumann_measure(s, det)
        m1 = von_neumann_measure(basis_state(["A1", "A2"], "A1"), det)
        m2 = von_neumann_measure(basis_state(["A1", "A2"], "A2"), det)
        combo = s.amplitudes[0] * m1.amplitudes + s.amplitudes[1] * m2.amplitudes
        np.testing.assert_allclose(out.amplitudes, combo, atol=1e-12)

    def test_disturbance_map(self):
        flip = {"A1": basis_state(["A1", "A2"], "A2"), "A2": basis_state(["A1", "A2"], "A1")}
        det = DetectorModel(ModeBasis(("A1", "A2")), ("D1", "D2"), disturbance=flip)
        out = von_neumann_measure(fifty_fifty(), det)
        assert out.amplitude("A2⊗D1") == pytest.approx(R2)
        assert out.amplitude("A1⊗D2") == pytest.approx(R2)

    def test_output_preserves_norm_of_ready_product(self):
        det = default_detector()
        before = ready_product(fifty_fifty(), det)
        after = von_neumann_measure(fifty_fifty(), det)
        assert before.basis == after.basis
        assert abs(after.norm - before.norm) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(BasisError):
            von_neumann_measure(make_state({"A1": 1, "A2": 1, "A3": 1}), default_detector())


class TestCorrelationTable:
    def test_pointer_state(self):
        ct = correlation_table(von_neumann_measure(fifty_fifty(), default_detector()), aliases=CAT_ALIASES)
        assert ct.conditional[("A1", "D1")] == pytest.approx(1.0, abs=1e-12)
        assert ct.conditional[("A2", "D2")] == pytest.approx(1.0, abs=1e-12)
        assert ct.conditional[("A1", "D2")] == 0 and ct.conditional[("A2", "D1")] == 0
        assert ct.correlations() == [("A1", "D1"), ("A2", "D2")]
        assert "undecayed iff alive AND decayed iff dead" in ct.render()

    def test_product_state_single_cell(self):
        s = tensor(basis_state(["A1", "A2"], "A1"), basis_state(["B1", "B2"], "B1"))
        ct = correlation_table(s)
        nonzero = {k: v for k, v in ct.joint.items() if v > 0}
        assert nonzero == {("A1", "B1"): 1.0}
        assert ct.conditional[("A2", "B1")] is None

    def test_rto_half_turn_anticorrelated(self):
        ct = correlation_table(rto_output_state(RTOConfig(0, math.pi)))
        assert ct.conditional[("A1", "B2")] == pytest.approx(1.0, abs=1e-12)
        assert ct.conditional[("A2", "B1")] == pytest.approx(1.0, abs=1e-12)

    def test_needs_bipartite_state(self):
        with pytest.raises(BasisError):
            correlation_table(fifty_fifty())


class TestDoubleSlit:
    cfg = SlitConfig()

    def test_symmetric(self):
        m = double_slit_intensity(self.cfg).mass
        np.testing.assert_allclose(m, m[::-1], atol=1e-12, rtol=0)
        assert m.sum() == pytest.approx(1.0, abs=1e-12)

    def test_fringe_spacing(self):
        prof = double_slit_intensity(self.cfg)
        x, m = prof.centers, prof.mass
        peaks = local_maxima(m)
        center = min(peaks, key=lambda i: abs(x[i]))
        right = [i for i in peaks if x[i] > x[center]][0]
        spacing = refined_peak(x, m, right) - refined_peak(x, m, center)
        assert abs(spacing - self.cfg.fringe_spacing) <= prof.bin_width

    def test_single_slit_has_no_zeros_in_central_envelope(self):
        for which in ("slit1", "slit2"):
            prof = double_slit_intensity(SlitConfig(slits=which))
            inside = np.abs(prof.edges[1:]) < self.cfg.envelope_half_width
            inside &= np.abs(prof.edges[:-1]) < self.cfg.envelope_half_width
            assert np.all(prof.mass[inside] > 0)

    def test_both_slits_have_dark_fringes(self):
        both = double_slit_intensity(self.cfg).mass
        single = double_slit_intensity(SlitConfig(slits="slit1")).mass
        assert both.min() < 1e-3 * both.max()
        assert single[len(single) // 2 - 25 : len(single) // 2 + 25].min() > 0.5 * single.max()

    def test_sample_matches_profile(self):
        prof = double_slit_intensity(self.cfg)
        x, _ = double_slit_sample(self.cfg, 100_000, make_rng(123))
        counts, _ = np.histogram(x, bins=prof.edges)
        assert chi_square_pvalue(counts, prof.mass) > 0.001

    def test_single_impact_on_screen(self):
        x, rec = double_slit_sample(self.cfg, 1, make_rng(0))
        assert len(x) == 1 and len(rec) == 1
        assert -self.cfg.half_width <= x[0] <= self.cfg.half_width

    def test_fixed_seed(self):
        a, _ = double_slit_sample(self.cfg, 1000, make_rng(5))
        b, _ = double_slit_sample(self.cfg, 1000, make_rng(5))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(distance=0.0), dict(wavelength=-1.0), dict(width=200e-6), dict(bins=8)],
    )
    def test_degenerate_geometry(self, kwargs):
        with pytest.raises(ValueError):
            SlitConfig(**kwargs)
