import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwalk.bulk import (
    bloch_coefficients,
    bulk_gap_status,
    dispersion,
    phase_diagram,
    quasienergy,
    winding_number,
    write_dispersion_csv,
    write_phase_diagram_csv,
)
from ptwalk.errors import GapClosedError, ResolutionError

PI = math.pi

# reference points used throughout: (theta1/pi, theta2/pi) -> (nu', nu_shifted)
WINDING_POINTS = {
    (0.4, 0.1): (-3, 0),
    (0.7, 0.05): (-3, 0),
    (0.9, 0.2): (-1, 1),
    (-0.2, 0.3): (1, 2),
    (-0.6, 0.2): (3, 3),
    (-0.6, 0.15): (3, 3),
}

angles = st.floats(-PI, PI, allow_nan=False)
gammas = st.floats(-0.3, 0.3, allow_nan=False)


class TestBlochCoefficients:
    @given(angles, angles, gammas)
    @settings(max_examples=100, deadline=None)
    def test_identity(self, t1, t2, g):
        k = np.linspace(-PI, PI, 257)
        co = bloch_coefficients(t1, t2, g, k)
        assert co.identity_residual() < 1e-12

    def test_gamma_enters_through_d1(self):
        k = np.linspace(-PI, PI, 64)
        a = bloch_coefficients(0.3, 0.2, 0.0, k)
        assert not a.d1.any()
        b = bloch_coefficients(0.3, 0.2, 0.1, k)
        assert np.max(np.abs(b.d1)) > 0
        # d3 never depends on gamma
        assert np.array_equal(a.d3, b.d3)


class TestQuasienergy:
    def test_branch_convention(self):
        eps = quasienergy(np.array([1.0, -1.0, 1j, 0.5]))
        assert eps[0] == 0
        assert eps[1].real == PI  # not -pi
        assert eps[2].real == pytest.approx(-PI / 2)
        assert eps[3].imag == pytest.approx(math.log(0.5))

    def test_inverts_exponential(self):
        lam = np.exp(1j * np.linspace(-3, 3, 11)) * 1.1
        eps = quasienergy(lam)
        assert np.allclose(np.exp(-1j * eps), lam)


class TestDispersion:
    def test_real_bands_where_pt_unbroken(self):
        disp = dispersion(0.4 * PI, 0.1 * PI, 0.1, k_res=256)
        assert not disp.pt_broken.any()
        assert np.max(np.abs(disp.eps_plus.imag)) < 1e-12
        assert np.allclose(np.abs(disp.lam_plus), 1.0)

    def test_broken_segment_has_reciprocal_moduli(self):
        disp = dispersion(0.25 * PI, 0.25 * PI, 0.1, k_res=512)
        assert disp.pt_broken.any() and not disp.pt_broken.all()
        sel = disp.pt_broken
        prod = np.abs(disp.lam_plus[sel]) * np.abs(disp.lam_minus[sel])
        assert np.allclose(prod, 1.0)
        assert np.max(np.abs(disp.eps_plus[sel].imag)) > 0

    def test_spectrum_closes_under_negation(self):
        # d0(k + pi) = -d0(k), so the two-band spectrum as a whole
        # maps onto its own negative
        disp = dispersion(-0.6 * PI, 0.2 * PI, 0.1, k_res=128)
        lams = np.concatenate([disp.lam_plus[:-1], disp.lam_minus[:-1]])
        for lam in lams[::7]:
            assert np.min(np.abs(lams + lam)) < 1e-12


class TestGapStatus:
    def test_open_point(self):
        s = bulk_gap_status(0.4 * PI, 0.1 * PI, 0.1)
        assert s.gap_open and not s.marginal
        assert s.max_abs_d0 == pytest.approx(0.6278857373731173, rel=1e-12)
        assert s.gap_zero == pytest.approx(s.gap_pi)

    def test_broken_point(self):
        s = bulk_gap_status(0.25 * PI, 0.25 * PI, 0.1)
        assert not s.gap_open
        assert s.max_abs_d0 == pytest.approx(1.0100500229317402, rel=1e-12)
        assert s.gap_zero == 0 and s.gap_pi == 0

    def test_marginal_touch_warns(self):
        # at theta1 = theta2 = 0 the bands touch |d0| = 1 exactly
        with pytest.warns(UserWarning, match="marginal"):
            s = bulk_gap_status(0.0, 0.0, 0.0)
        assert not s.gap_open


class TestWindingNumber:
    @pytest.mark.parametrize("point,expected", WINDING_POINTS.items())
    @pytest.mark.parametrize("gamma", [0.0, 0.1])
    def test_reference_points(self, point, expected, gamma):
        t1, t2 = point
        res = winding_number(t1 * PI, t2 * PI, gamma)
        assert (res.nu_prime, res.nu_shifted) == expected
        assert res.nu_zero == res.nu_prime / 2
        assert res.nu_pi == res.nu_prime / 2

    def test_grid_refinement_stable(self):
        for k_res in (2048, 4096, 16384):
            res = winding_number(-0.6 * PI, 0.2 * PI, 0.1, k_res=k_res)
            assert res.nu_prime == 3

    def test_gap_closed_raises(self):
        with pytest.raises(GapClosedError):
            winding_number(0.25 * PI, 0.25 * PI, 0.1)

    def test_coarse_grid_raises_resolution(self):
        with pytest.raises(ResolutionError):
            winding_number(-0.6 * PI, 0.2 * PI, 0.1, k_res=8)

    @given(st.sampled_from(sorted(WINDING_POINTS)), gammas)
    @settings(max_examples=25, deadline=None)
    def test_gamma_invariance(self, point, gamma):
        t1, t2 = point
        try:
            res = winding_number(t1 * PI, t2 * PI, gamma, k_res=2048)
        except GapClosedError:
            return  # strong gain can close the gap; no claim then
        assert res.nu_prime == WINDING_POINTS[point][0]


class TestPhaseDiagram:
    def test_small_grid(self):
        t1s = np.array([0.4, 0.25, -0.6]) * PI
        t2s = np.array([0.1, 0.25]) * PI
        pd = phase_diagram(t1s, t2s, 0.1, k_res=2048)
        assert pd.nu_shifted[0, 0] == 0
        assert pd.nu_shifted[2, 0] == 3
        # (pi/4, pi/4) is PT broken at gamma = 0.1
        assert not pd.gap_open[1, 1]
        assert np.isnan(pd.nu_shifted[1, 1])

    def test_thread_count_does_not_change_results(self):
        grid = np.linspace(-PI, PI, 7)
        a = phase_diagram(grid, grid, 0.1, k_res=1024, threads=1)
        b = phase_diagram(grid, grid, 0.1, k_res=1024, threads=4)
        assert np.array_equal(a.gap_open, b.gap_open)
        assert np.array_equal(a.nu_shifted, b.nu_shifted, equal_nan=True)


class TestCsv:
    def test_dispersion_rows(self, tmp_path):
        disp = dispersion(0.4 * PI, 0.1 * PI, 0.1, k_res=16)
        path = tmp_path / "disp.csv"
        write_dispersion_csv(disp, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("k,re_eps_plus,im_eps_plus,re_eps_minus,"
                            "im_eps_minus,pt_broken")
        assert len(lines) == 18
        assert lines[1].endswith(",false")

    def test_phase_diagram_empty_cell(self, tmp_path):
        pd = phase_diagram(np.array([0.25 * PI]), np.array([0.1, 0.25]) * PI,
                           0.1, k_res=2048)
        path = tmp_path / "pd.csv"
        write_phase_diagram_csv(pd, path)
        lines = path.read_text().splitlines()
        assert lines[1].split(",")[3] == "0"
        assert lines[2].split(",")[3] == ""  # gapless: no number

    def test_byte_determinism(self, tmp_path):
        disp = dispersion(0.9 * PI, 0.2 * PI, 0.1, k_res=64)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_dispersion_csv(disp, a)
        write_dispersion_csv(dispersion(0.9 * PI, 0.2 * PI, 0.1, k_res=64), b)
        assert a.read_bytes() == b.read_bytes()
