import math

import numpy as np
import pytest

from ptwalk.errors import BracketError, TrackingError
from ptwalk.operators import CoinProfile, Lattice, WalkSpec
from ptwalk.perturbation import (
    DisorderEnsemble,
    DisorderRecord,
    delta_sweep,
    disorder_ensemble,
    find_exceptional_point,
    write_delta_sweep_csv,
    write_disorder_csv,
)

PI = math.pi
INNER = (0.4 * PI, 0.1 * PI)
OUTER_C = (-0.2 * PI, 0.3 * PI)  # two protected pairs per interface


def interface_spec(gamma=0.1, num_sites=301):
    profile = CoinProfile.inner_outer(INNER, OUTER_C, 50)
    return WalkSpec(kind="three_step", lattice=Lattice(num_sites),
                    profile=profile, gamma=gamma)


@pytest.fixture(scope="module")
def sweep():
    return delta_sweep(interface_spec(), np.linspace(0.05, 0.08, 7))


@pytest.fixture(scope="module")
def ep():
    return find_exceptional_point(interface_spec(), 0.05, 0.08)


@pytest.fixture(scope="module")
def base_spec():
    profile = CoinProfile.inner_outer(INNER, OUTER_C, 50, delta=0.05)
    return WalkSpec(kind="three_step_perturbed", lattice=Lattice(301),
                    profile=profile, gamma=0.1)


@pytest.fixture(scope="module")
def base_ensemble():
    profile = CoinProfile.inner_outer(INNER, OUTER_C, 50, delta=0.05)
    spec = WalkSpec(kind="three_step_perturbed", lattice=Lattice(201),
                    profile=profile, gamma=0.1)
    return disorder_ensemble(spec, 0.05, n_seeds=2)


class TestDeltaSweep:
    def test_branch_count(self, sweep):
        assert sweep.n_branches == 8
        assert all(p.lams.size == 8 for p in sweep.points)

    def test_regime_transition(self, sweep):
        regimes = [p.regime for p in sweep.points]
        assert regimes[0] == "all_real"
        assert regimes[-1] == "conjugate_pairs"
        flips = sum(1 for a, b in zip(regimes, regimes[1:]) if a != b)
        assert flips == 1

    def test_ep_bracket(self, sweep):
        lo, hi = sweep.ep_bracket
        assert 0.05 <= lo < hi <= 0.08
        assert hi - lo <= 0.0051

    def test_requested_points_kept(self, sweep):
        requested = [p.delta for p in sweep.points if not p.inserted]
        assert requested == pytest.approx(np.linspace(0.05, 0.08, 7))

    def test_conjugation_closure_past_transition(self, sweep):
        lams = sweep.points[-1].lams
        cost = np.abs(lams[:, None] - np.conj(lams)[None, :])
        assert cost.min(axis=1).max() < 1e-10

    def test_branches_real_before_transition(self, sweep):
        for branch_id in range(sweep.n_branches):
            values = sweep.branch(branch_id)
            assert np.all(np.abs(values[:2].imag) < 1e-10)

    def test_unitary_degeneracy_not_exceptional(self):
        # at gamma = 0 the delta = 0 interface modes are exactly
        # degenerate across the two interfaces, but their vectors are
        # orthogonal, so the collision must not be read as an EP
        result = delta_sweep(interface_spec(gamma=0.0), [0.0, 0.01])
        assert result.points[0].regime == "all_real"
        assert result.points[1].regime == "conjugate_pairs"

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            delta_sweep(interface_spec(), [0.05])

    def test_no_interface_modes(self):
        spec = WalkSpec(kind="three_step", lattice=Lattice(301),
                        profile=CoinProfile.homogeneous(*INNER), gamma=0.1)
        with pytest.raises(TrackingError):
            delta_sweep(spec, [0.01, 0.02])

    def test_two_step_refused(self):
        spec = WalkSpec(kind="two_step", lattice=Lattice(301),
                        profile=CoinProfile.inner_outer(INNER, OUTER_C, 50),
                        gamma=0.1)
        with pytest.raises(ValueError):
            delta_sweep(spec, [0.0, 0.01])


class TestExceptionalPoint:
    def test_location(self, ep):
        assert 0.068 < ep.delta < 0.071

    def test_bracket_shrunk_to_tolerance(self, ep):
        assert ep.lower < ep.delta < ep.upper
        assert ep.upper - ep.lower <= 5e-4
        assert ep.n_solves > 4

    def test_coalescence_certified(self, ep):
        assert ep.coalescence_overlap > 0.9

    def test_rejects_bracket_still_real(self):
        with pytest.raises(BracketError, match="still real"):
            find_exceptional_point(interface_spec(), 0.01, 0.05)

    def test_rejects_bracket_already_complex(self):
        with pytest.raises(BracketError, match="already complex"):
            find_exceptional_point(interface_spec(), 0.08, 0.09)

    def test_no_gain_means_no_bracket(self):
        # without amplification the modes pair at any nonzero delta
        with pytest.raises(BracketError, match="already complex"):
            find_exceptional_point(interface_spec(gamma=0.0), 0.01, 0.05)

    def test_rejects_reversed_bracket(self):
        with pytest.raises(ValueError):
            find_exceptional_point(interface_spec(), 0.08, 0.05)


class TestDisorderEnsemble:
    def test_seed_keyed_reproducibility(self, base_spec):
        a = disorder_ensemble(base_spec, 0.1, n_seeds=4)
        b = disorder_ensemble(base_spec, 0.1, seeds=[0, 1, 2, 3])
        assert [r.seed for r in a.records] == [0, 1, 2, 3]
        for ra, rb in zip(a.records, b.records):
            assert ra.max_im_lambda_edge == rb.max_im_lambda_edge
            assert ra.regime == rb.regime

    def test_thread_invariance(self, base_spec):
        a = disorder_ensemble(base_spec, 0.1, n_seeds=6, threads=1)
        b = disorder_ensemble(base_spec, 0.1, n_seeds=6, threads=4)
        assert [r.max_im_lambda_edge for r in a.records] == \
               [r.max_im_lambda_edge for r in b.records]

    def test_seed0_offsets_range(self, base_spec):
        ens = disorder_ensemble(base_spec, 0.01, n_seeds=3, seed0=7)
        assert [r.seed for r in ens.records] == [7, 8, 9]
        assert all(r.theta_r == 0.01 for r in ens.records)

    def test_weak_disorder_keeps_modes_real(self, base_spec):
        ens = disorder_ensemble(base_spec, 0.001, n_seeds=4)
        assert ens.fraction_all_real == 1.0
        assert ens.majority_regime == "all_real"

    def test_fraction_arithmetic(self, base_spec):
        def rec(seed, regime):
            return DisorderRecord(seed=seed, theta_r=0.1,
                                  max_im_lambda_edge=0.0, regime=regime)

        ens = DisorderEnsemble(spec=base_spec, theta_r=0.1, records=[
            rec(0, "all_real"), rec(1, "conjugate_pairs"),
            rec(2, "conjugate_pairs"), rec(3, "conjugate_pairs")])
        assert ens.fraction_all_real == 0.25
        assert ens.majority_regime == "conjugate_pairs"


class TestCsv:
    def test_delta_sweep_rows(self, sweep, tmp_path):
        path = tmp_path / "sweep.csv"
        write_delta_sweep_csv(sweep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "delta,re_lambda,im_lambda,branch_id,regime"
        assert len(lines) == 1 + len(sweep.points) * sweep.n_branches
        assert float(lines[1].split(",")[0]) == pytest.approx(0.05)
        assert lines[1].endswith(",all_real")
        assert lines[-1].endswith(",conjugate_pairs")

    def test_disorder_rows(self, base_ensemble, tmp_path):
        path = tmp_path / "dis.csv"
        write_disorder_csv(base_ensemble, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "seed,theta_r,max_im_lambda_edge,regime"
        assert len(lines) == 1 + len(base_ensemble.records)
        assert lines[1].split(",")[0] == "0"
