import math

import numpy as np
import pytest

from ptwalk.dynamics import (
    EvolutionTrace,
    FourierSpectrum,
    detect_modes,
    dft,
    evolve,
    infer_edge_count,
    persistence_parity,
    predict_mode_families,
    write_fourier_csv,
    write_snapshot_csv,
    write_trace_csv,
)
from ptwalk.operators import CoinProfile, Lattice, WalkSpec

PI = math.pi
INNER = (0.4 * PI, 0.1 * PI)


def homogeneous_spec(kind="three_step", theta=INNER, gamma=0.0):
    return WalkSpec(kind=kind, lattice=Lattice(11),
                    profile=CoinProfile.homogeneous(*theta), gamma=gamma)


def split_spec(left, right, delta, gamma=0.0):
    profile = CoinProfile.left_right(left, right, delta=delta)
    return WalkSpec(kind="three_step_perturbed", lattice=Lattice(801),
                    profile=profile, gamma=gamma)


class TestEvolve:
    def test_three_shifts_forbid_odd_returns(self):
        trace = evolve(homogeneous_spec(), steps=20)
        assert np.all(trace.p0_raw[1::2] == 0.0)
        assert trace.p0_raw[0] == pytest.approx(1.0)

    def test_two_step_walk_returns_at_every_even_shift(self):
        trace = evolve(homogeneous_spec(kind="two_step"), steps=20)
        # two shifts per step: odd times leave the walker off origin
        # only by one shift, which the second shift can undo
        assert np.any(trace.p0_raw[1:] > 0.0)

    def test_normalized_probability_bounded(self):
        trace = evolve(homogeneous_spec(gamma=0.3), steps=40)
        assert np.all(trace.p0_normalized >= 0.0)
        assert np.all(trace.p0_normalized <= 1.0)

    def test_unitary_norm_preserved(self):
        trace = evolve(homogeneous_spec(), steps=40)
        assert trace.p0_raw == pytest.approx(trace.p0_normalized, abs=1e-12)
        assert trace.leaked_probability == 0.0

    def test_origin_is_measured_not_source(self):
        trace = evolve(homogeneous_spec(), steps=6, x0=2)
        assert trace.p0_raw[0] == 0.0

    def test_snapshots(self):
        trace = evolve(homogeneous_spec(), steps=12, snapshot_times=(0, 8))
        assert sorted(trace.snapshots) == [0, 8]
        x, prob = trace.snapshots[8]
        assert x.shape == prob.shape
        assert np.sum(prob) == pytest.approx(1.0, abs=1e-12)
        x0_grid, prob0 = trace.snapshots[0]
        assert prob0[list(x0_grid).index(0)] == pytest.approx(1.0)

    def test_snapshot_time_out_of_range(self):
        with pytest.raises(ValueError):
            evolve(homogeneous_spec(), steps=4, snapshot_times=(5,))

    def test_needs_a_step(self):
        with pytest.raises(ValueError):
            evolve(homogeneous_spec(), steps=0)

    def test_deterministic(self):
        a = evolve(homogeneous_spec(gamma=0.1), steps=30)
        b = evolve(homogeneous_spec(gamma=0.1), steps=30)
        assert np.array_equal(a.p0_raw, b.p0_raw)
        assert np.array_equal(a.p0_normalized, b.p0_normalized)

    def test_window_cap_leaks_with_warning(self):
        with pytest.warns(UserWarning, match="leaking"):
            trace = evolve(homogeneous_spec(), steps=30, window_cap=21)
        assert trace.leaked_probability > 0.0

    def test_rescale_survives_float_range(self):
        # broken-phase gain amplifies the state past 1e120 well before
        # the raw return probability leaves the float64 range
        spec = homogeneous_spec(theta=(0.25 * PI, 0.25 * PI), gamma=1.0)
        trace = evolve(spec, steps=400)
        assert trace.log_scale > 0.0
        assert math.isinf(trace.p0_raw[-1])
        assert np.all(np.isfinite(trace.p0_normalized))
        assert trace.p0_normalized.max() <= 1.0 + 1e-12


@pytest.fixture(scope="module")
def trace64():
    return evolve(homogeneous_spec(), steps=64)


@pytest.fixture(scope="module")
def trace16():
    return evolve(homogeneous_spec(), steps=16, snapshot_times=(8,))


class TestDft:
    def test_grid(self, trace64):
        fspec = dft(trace64)
        assert fspec.omega.size == 65
        assert fspec.bin_width == pytest.approx(2.0 * PI / 65)
        assert fspec.omega[1] == pytest.approx(fspec.bin_width)

    def test_real_input_mirror(self, trace64):
        c = np.abs(dft(trace64).c)
        assert c[1:] == pytest.approx(c[1:][::-1])

    def test_zero_bin_is_time_sum(self, trace64):
        fspec = dft(trace64)
        assert fspec.c[0].imag == 0.0
        assert fspec.c[0].real == pytest.approx(trace64.p0_normalized.sum())

    def test_sources(self, trace64):
        raw = dft(trace64, source="raw")
        assert raw.source == "raw"
        assert raw.c[0].real == pytest.approx(trace64.p0_raw.sum())
        with pytest.raises(ValueError):
            dft(trace64, source="rescaled")


def synthetic_fspec(signal):
    m = signal.size
    return FourierSpectrum(omega=2.0 * PI * np.arange(m) / m,
                           c=np.fft.fft(signal), bin_width=2.0 * PI / m,
                           steps=m - 1, source="normalized")


class TestDetectModes:
    M = 1000

    def carrier(self):
        rng = np.random.default_rng(0)
        t = np.arange(self.M)
        return t, 0.3 + 0.001 * rng.standard_normal(self.M)

    def test_full_family_naming(self):
        t, p0 = self.carrier()
        w1 = 2.0 * PI * 32 / self.M
        p0 = (p0 + 0.20 * np.cos(w1 * t) + 0.15 * np.cos(2 * w1 * t)
              + 0.12 * np.cos((PI - 2 * w1) * t)
              + 0.10 * np.cos((PI - w1) * t) + 0.08 * np.cos(PI * t))
        modes = detect_modes(synthetic_fspec(p0), omega_delta_hint=w1)
        named = {m.family: m.index for m in modes}
        assert named == {"omega_delta": 32, "2omega_delta": 64,
                         "pi-2omega_delta": 436, "pi-omega_delta": 468,
                         "pi": 500}

    def test_without_hint_only_pi_is_named(self):
        t, p0 = self.carrier()
        w1 = 2.0 * PI * 32 / self.M
        p0 = p0 + 0.2 * np.cos(w1 * t) + 0.1 * np.cos(PI * t)
        families = {m.family for m in detect_modes(synthetic_fspec(p0))}
        assert families == {"other", "pi"}

    def test_off_target_peak_is_other(self):
        t, p0 = self.carrier()
        w1 = 2.0 * PI * 32 / self.M
        p0 = p0 + 0.2 * np.cos(2.0 * PI * 200 / self.M * t)
        modes = detect_modes(synthetic_fspec(p0), omega_delta_hint=w1)
        assert [m.family for m in modes] == ["other"]

    def test_adjacent_peaks_merge_to_strongest(self):
        t, p0 = self.carrier()
        p0 = (p0 + 0.20 * np.cos(2.0 * PI * 200 / self.M * t)
              + 0.10 * np.cos(2.0 * PI * 202 / self.M * t))
        modes = detect_modes(synthetic_fspec(p0))
        nearby = [m for m in modes if 195 <= m.index <= 205]
        assert len(nearby) == 1
        assert nearby[0].index == 200

    def test_pi_outranks_family_targets(self):
        t, p0 = self.carrier()
        p0 = p0 + 0.2 * np.cos(PI * t)
        bins2 = 2.0 * (2.0 * PI / self.M)
        modes = detect_modes(synthetic_fspec(p0),
                             omega_delta_hint=(PI - bins2) / 2.0)
        assert [m.family for m in modes] == ["pi"]


class TestPredictModeFamilies:
    def test_table(self):
        assert predict_mode_families(1, "large") == {"pi"}
        assert predict_mode_families(1, "small") == {"pi"}
        assert predict_mode_families(2, "large") == {
            "2omega_delta", "pi-2omega_delta", "pi"}
        assert predict_mode_families(3, "large") == {
            "omega_delta", "2omega_delta", "pi-2omega_delta",
            "pi-omega_delta", "pi"}
        assert predict_mode_families(3, "small") == {
            "omega_delta", "pi-omega_delta", "pi"}

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            predict_mode_families(0, "large")
        with pytest.raises(ValueError):
            predict_mode_families(2, "medium")


def fake_trace(p0):
    p0 = np.asarray(p0, dtype=float)
    return EvolutionTrace(spec=None, steps=p0.size - 1, x0=0, p0_raw=p0,
                          p0_normalized=p0, leaked_probability=0.0)


class TestPersistenceParity:
    def test_persistent_reads_odd(self):
        parity, mean = persistence_parity(fake_trace(np.full(31, 0.1)))
        assert parity == "odd"
        assert mean == pytest.approx(0.1)

    def test_decayed_reads_even(self):
        parity, mean = persistence_parity(fake_trace(np.full(31, 0.001)))
        assert parity == "even"

    def test_window_average_only(self):
        p0 = np.zeros(31)
        p0[12:25] = 0.2
        parity, mean = persistence_parity(fake_trace(p0))
        assert parity == "odd"
        assert mean == pytest.approx(0.2)

    def test_short_trace_rejected(self):
        with pytest.raises(ValueError):
            persistence_parity(fake_trace(np.zeros(20)))


class TestInference:
    LEFT_LG = (0.75 * PI, 0.05 * PI)
    LEFT_SG = (0.125 * PI, 0.1 * PI)

    def infer(self, left, right):
        spec = split_spec(left, right, delta=0.05)
        return infer_edge_count(spec, steps=2000, spectrum_sites=301,
                                spectrum_window=50)

    def test_three_pairs_large_gap(self):
        inf = self.infer(self.LEFT_LG, (-PI / 3, 0.0))
        assert inf.delta_nu == 3
        assert not inf.ambiguous
        assert inf.parity == "odd"
        assert inf.gap_regime == "large"
        assert set(inf.families) == {"omega_delta", "2omega_delta",
                                     "pi-2omega_delta", "pi-omega_delta",
                                     "pi"}
        assert abs(inf.omega_delta_measured - inf.omega_delta_hint) \
            <= inf.fourier.bin_width
        assert inf.trace.steps == 2000

    def test_one_pair_large_gap(self):
        inf = self.infer(self.LEFT_LG, (-PI / 15, 2 * PI / 3))
        assert inf.delta_nu == 1
        assert inf.parity == "odd"
        # the unprotected impurity beat stays a nameless extra peak
        assert set(inf.families) <= {"other", "pi"}

    def test_two_pairs_small_gap(self):
        inf = self.infer(self.LEFT_SG, (-PI / 10, 2 * PI / 5))
        assert inf.delta_nu == 2
        assert inf.parity == "even"
        assert inf.persistence < 0.005
        assert inf.gap_regime == "small"
        assert set(inf.families) == {"2omega_delta", "pi-2omega_delta", "pi"}

    def test_two_pairs_large_gap_is_ambiguous(self):
        # the doubled-splitting beat has not decayed by t = 24, so the
        # parity and family signals disagree; the conflict is reported
        # rather than resolved by fiat
        inf = self.infer(self.LEFT_LG, (-PI / 10, 2 * PI / 5))
        assert inf.ambiguous
        assert inf.delta_nu is None
        assert inf.candidates == (1, 3)
        assert inf.notes


class TestCsv:
    def test_trace_rows(self, trace16, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(trace16, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,p0_raw,p0_normalized"
        assert len(lines) == 18
        assert lines[1].split(",")[0] == "0"

    def test_fourier_rows(self, trace16, tmp_path):
        path = tmp_path / "fourier.csv"
        write_fourier_csv(dft(trace16), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "omega_over_pi,abs_c"
        assert len(lines) == 2 + 17 // 2
        assert lines[1].split(",")[0] == "0"
        assert float(lines[-1].split(",")[0]) <= 1.0

    def test_snapshot_rows(self, trace16, tmp_path):
        path = tmp_path / "snap.csv"
        write_snapshot_csv(trace16, 8, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,prob"
        total = sum(float(line.split(",")[1]) for line in lines[1:])
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_snapshot_must_exist(self, trace16, tmp_path):
        with pytest.raises(KeyError):
            write_snapshot_csv(trace16, 3, tmp_path / "missing.csv")
