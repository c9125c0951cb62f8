import math
import struct

import numpy as np
import pandas as pd
import pytest

from clifford_structures import HTypeStructure, build_generators
from hgap_errors import (DomainError, IndexOutOfRange, InsufficientSamples, InvalidStructure, NonpositiveScale,
                         StepBudgetExceeded)
from hypo_sde import (PATH_FILE_HEADER, TimeChangeSamples, empirical_quadratic_covariation, ks_critical_value,
                      lemma_diagnostics, path_rng, read_full_paths, run_ensemble, simulate_path, simulate_terminal,
                      step_count, time_change_samples, write_full_paths, write_terminal_csv)


def _three_se(values):
    return 3.0 * np.std(values, ddof=1) / math.sqrt(len(values))


class TestStepping:
    def test_path_streams_are_reproducible_and_distinct(self):
        a = path_rng(7, 3).standard_normal(5)
        np.testing.assert_array_equal(a, path_rng(7, 3).standard_normal(5))
        assert not np.array_equal(a, path_rng(7, 4).standard_normal(5))
        assert not np.array_equal(a, path_rng(7, 3, stream=1).standard_normal(5))

    def test_step_count(self):
        assert step_count(1.0, 1e-3) == 1000
        assert step_count(1.0, 0.3) == 4

    @pytest.mark.parametrize("T,dt,error", [(1.0, 0.0, NonpositiveScale), (0.0, 0.1, NonpositiveScale),
                                            (1.0, -1e-3, NonpositiveScale), (0.1, 0.5, DomainError)])
    def test_step_count_errors(self, T, dt, error):
        with pytest.raises(error):
            step_count(T, dt)

    def test_step_budget(self):
        with pytest.raises(StepBudgetExceeded):
            step_count(1.0, 1e-4, max_steps=1000)

    def test_rejects_invalid_structure(self):
        bad = HTypeStructure(m=2, n=1, U=np.eye(2, dtype=np.int64)[None])
        with pytest.raises(InvalidStructure):
            simulate_path(bad, 1.0, 0.1, seed=1)

    def test_rejects_unknown_scheme(self, heis):
        with pytest.raises(DomainError):
            run_ensemble(heis, 1.0, 0.1, seed=1, count=2, scheme='milstein')


class TestSimulatePath:
    def test_shapes_and_start(self, quaternionic):
        p = simulate_path(quaternionic, 1.0, 0.01, seed=3)
        assert p.B.shape == (101, 4)
        assert p.A.shape == (101, 3)
        assert p.tau.shape == (101,)
        assert np.all(p.B[0] == 0) and np.all(p.A[0] == 0) and p.tau[0] == 0
        assert np.all(np.diff(p.tau) >= 0)
        assert p.times[-1] == pytest.approx(1.0)

    def test_reproducible(self, heis):
        a = simulate_path(heis, 1.0, 0.01, seed=11, path_index=2)
        b = simulate_path(heis, 1.0, 0.01, seed=11, path_index=2)
        np.testing.assert_array_equal(a.A, b.A)
        c = simulate_path(heis, 1.0, 0.01, seed=12, path_index=2)
        assert not np.array_equal(a.B, c.B)

    def test_norms_dominate_horizontal(self, heis):
        p = simulate_path(heis, 1.0, 0.01, seed=5)
        assert np.all(p.norms() >= np.linalg.norm(p.B, axis=1) - 1e-15)

    def test_matches_ensemble_terminal_values(self, heis):
        batch = run_ensemble(heis, 1.0, 0.01, seed=9, count=5)
        for k in range(5):
            terminal = simulate_path(heis, 1.0, 0.01, seed=9, path_index=k).terminal()
            np.testing.assert_allclose(terminal['A'], batch.A[k], rtol=1e-12, atol=1e-14)
            assert terminal['tau'] == pytest.approx(batch.tau[k], rel=1e-12)

    def test_stratonovich_matches_ito_for_area(self, heis):
        # <U dB, dB> = 0 for skew U, so both schemes produce the same area
        ito = simulate_path(heis, 1.0, 1e-3, seed=21, scheme='ito')
        strat = simulate_path(heis, 1.0, 1e-3, seed=21, scheme='stratonovich')
        np.testing.assert_allclose(ito.B, strat.B)
        np.testing.assert_allclose(ito.A, strat.A, atol=1e-12)


class TestEnsemble:
    def test_independent_of_worker_count(self, heis):
        one = run_ensemble(heis, 0.5, 0.01, seed=4, count=40, workers=1, block_size=8)
        two = run_ensemble(heis, 0.5, 0.01, seed=4, count=40, workers=3, block_size=8)
        assert one.A.tobytes() == two.A.tobytes()
        assert one.tau.tobytes() == two.tau.tobytes()
        assert one.max_norm.tobytes() == two.max_norm.tobytes()

    def test_independent_of_block_split(self, heis):
        whole = run_ensemble(heis, 0.5, 0.01, seed=4, count=12, block_size=12)
        split = run_ensemble(heis, 0.5, 0.01, seed=4, count=12, block_size=5)
        np.testing.assert_allclose(whole.A, split.A, rtol=1e-12, atol=1e-15)

    def test_offset_start(self, heis):
        full = run_ensemble(heis, 0.5, 0.01, seed=4, count=10)
        tail = simulate_terminal(heis, 0.5, 0.01, seed=4, start=6, count=4)
        np.testing.assert_array_equal(tail.path_ids, [6, 7, 8, 9])
        np.testing.assert_allclose(tail.A, full.A[6:], rtol=1e-12, atol=1e-15)

    def test_moments(self, heis):
        dt = 0.01
        batch = run_ensemble(heis, 1.0, dt, seed=2024, count=4000)
        A1, tau = batch.A[:, 0], batch.tau
        expected = heis.m / 8.0 * (1.0 - dt)  # left-point sums of |B|^2 dt
        assert abs(np.mean(A1)) < _three_se(A1)
        assert abs(np.mean(A1 ** 2) - expected) < _three_se(A1 ** 2)
        assert abs(np.mean(tau) - expected) < _three_se(tau)

    @pytest.mark.parametrize("fixture,T", [('heis', 1.0), ('quaternionic', 0.5)])
    def test_horizontal_square_norm_grows_like_m_t(self, request, fixture, T):
        S = request.getfixturevalue(fixture)
        batch = run_ensemble(S, T, 0.01, seed=2025, count=4000)
        phi = np.sum(batch.B ** 2, axis=1)
        assert abs(np.mean(phi) - S.m * T) < _three_se(phi)

    @pytest.mark.slow
    def test_second_moment_bias_halves_with_the_step(self, heis):
        biases, errors = [], []
        for dt in (0.25, 0.125, 0.0625):
            A1 = run_ensemble(heis, 1.0, dt, seed=2026, count=200_000, workers=4).A[:, 0]
            biases.append(heis.m / 8.0 - np.mean(A1 ** 2))
            errors.append(_three_se(A1 ** 2))
        for dt, bias, error in zip((0.25, 0.125, 0.0625), biases, errors):
            assert abs(bias - heis.m * dt / 8.0) < error
        assert 1.4 < biases[0] / biases[1] < 2.8
        assert 1.4 < biases[1] / biases[2] < 2.8

    def test_exit_times_on_grid(self):
        S = HTypeStructure.euclidean(1)
        batch = run_ensemble(S, 2.0, 0.01, seed=8, count=200, exit_radius=1.0, stop_on_exit=True)
        finite = np.isfinite(batch.exit_time)
        assert finite.sum() > 150
        steps = batch.exit_time[finite] / 0.01
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)
        assert np.all(batch.max_norm[finite] >= 1.0)
        assert np.all(batch.max_norm[~finite] < 1.0)

    def test_terminal_frame_and_csv(self, tmp_path, quaternionic):
        batch = run_ensemble(quaternionic, 0.1, 0.01, seed=1, count=6)
        frame = batch.to_frame()
        assert list(frame.columns) == ['path_id', 'A_1', 'A_2', 'A_3', 'tau_T', 'max_norm']
        path = write_terminal_csv(batch, tmp_path / 'out' / 'data.csv')
        loaded = pd.read_csv(path)
        np.testing.assert_allclose(loaded['A_2'].to_numpy(), batch.A[:, 1], rtol=1e-15, atol=0)

    def test_rejects_empty_ensemble(self, heis):
        with pytest.raises(DomainError):
            run_ensemble(heis, 1.0, 0.1, seed=1, count=0)


class TestQuadraticCovariation:
    def test_diagonal_tracks_time_change(self):
        S = build_generators(2, 1)
        batch = run_ensemble(S, 1.0, 1e-4, seed=31, count=200)
        rel = np.abs(batch.covariation[:, 0, 0] - batch.tau) / batch.tau
        assert np.median(rel) < 0.05

    def test_cross_terms_vanish(self, quaternionic):
        batch = run_ensemble(quaternionic, 1.0, 5e-4, seed=32, count=200)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert np.median(np.abs(batch.covariation[:, i, j]) / batch.tau) < 0.05

    def test_path_function_matches_running_sums(self, quaternionic):
        p = simulate_path(quaternionic, 0.5, 1e-3, seed=33)
        batch = run_ensemble(quaternionic, 0.5, 1e-3, seed=33, count=1)
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                assert empirical_quadratic_covariation(p, i, j) == pytest.approx(
                    batch.covariation[0, i - 1, j - 1], rel=1e-9, abs=1e-15)

    def test_index_range(self, heis):
        p = simulate_path(heis, 0.1, 0.01, seed=1)
        with pytest.raises(IndexOutOfRange):
            empirical_quadratic_covariation(p, 1, 2)
        with pytest.raises(IndexOutOfRange):
            empirical_quadratic_covariation(p, 0, 1)


class TestTimeChange:
    def test_samples(self, heis):
        samples = time_change_samples(heis, 1.0, 0.01, seed=5, count=50)
        assert isinstance(samples, TimeChangeSamples)
        assert samples.count == 50
        A, tau = samples.pairs()[0]
        assert A.shape == (1,) and tau > 0

    def test_standardised_variance(self, heis):
        samples = time_change_samples(heis, 1.0, 0.01, seed=6, count=4000)
        Z = samples.A[:, 0] / np.sqrt(samples.tau)
        assert abs(np.var(Z, ddof=1) - 1.0) < _three_se((Z - Z.mean()) ** 2)

    def test_ks_critical_value(self):
        assert ks_critical_value(0.05, 10_000) == pytest.approx(0.01358, abs=1e-4)
        with pytest.raises(DomainError):
            ks_critical_value(1.5, 100)

    def test_diagnostics_report(self, heis):
        samples = time_change_samples(heis, 1.0, 0.01, seed=7, count=2000)
        diag = lemma_diagnostics(samples)
        assert diag.sample_count == 2000
        assert set(diag.verdicts) == {'normality', 'independence', 'covariation', 'second_moment'}
        assert diag.ks_statistics[0] < 2 * diag.ks_critical
        assert abs(diag.independence_corr[0]) < 0.15
        assert diag.expected_A_squared == pytest.approx(0.25)
        assert diag.cross_covariations.shape == (1, 1)
        doc = diag.to_dict()
        assert doc['passed'] == diag.passed

    def test_diagnostics_cross_terms(self, quaternionic):
        samples = time_change_samples(quaternionic, 1.0, 5e-4, seed=8, count=1000)
        diag = lemma_diagnostics(samples)
        assert diag.verdicts['covariation']
        np.testing.assert_array_equal(np.diag(diag.cross_covariations), np.ones(3))

    def test_too_few_samples(self, heis):
        samples = time_change_samples(heis, 1.0, 0.1, seed=1, count=100)
        with pytest.raises(InsufficientSamples):
            lemma_diagnostics(samples)

    @pytest.mark.slow
    @pytest.mark.parametrize("fixture", ['heis', 'quaternionic'])
    def test_acceptance_scale_diagnostics_pass(self, request, fixture):
        S = request.getfixturevalue(fixture)
        samples = time_change_samples(S, 1.0, 1e-4, seed=20240101, count=10_000, workers=4)
        assert lemma_diagnostics(samples).passed


class TestFullPathFile:
    def test_round_trip(self, tmp_path, quaternionic):
        paths = [simulate_path(quaternionic, 0.2, 0.01, seed=2, path_index=k) for k in range(3)]
        target = write_full_paths(paths, tmp_path / 'paths.bin')
        stored = read_full_paths(target)
        assert (stored.m, stored.n, stored.steps) == (4, 3, 20)
        assert stored.dt == 0.01
        np.testing.assert_array_equal(stored.A[2], paths[2].A)
        np.testing.assert_array_equal(stored.tau[1], paths[1].tau)

    def test_header_layout(self, tmp_path, heis):
        target = write_full_paths([simulate_path(heis, 0.1, 0.01, seed=2)], tmp_path / 'p.bin')
        magic, version, m, n, steps, dt = struct.unpack_from('<4sIIIId', target.read_bytes())
        assert (magic, version, m, n, steps, dt) == (b'HGAP', 1, 2, 1, 10, 0.01)

    def test_bad_magic(self, tmp_path):
        target = tmp_path / 'junk.bin'
        target.write_bytes(PATH_FILE_HEADER.pack(b'NOPE', 1, 2, 1, 10, 0.01))
        with pytest.raises(InvalidStructure):
            read_full_paths(target)

    def test_truncated(self, tmp_path, heis):
        target = write_full_paths([simulate_path(heis, 0.1, 0.01, seed=2)], tmp_path / 'p.bin')
        target.write_bytes(target.read_bytes()[:-8])
        with pytest.raises(InvalidStructure):
            read_full_paths(target)

    def test_mixed_grids_rejected(self, tmp_path, heis):
        paths = [simulate_path(heis, 0.1, 0.01, seed=2), simulate_path(heis, 0.2, 0.01, seed=2)]
        with pytest.raises(DomainError):
            write_full_paths(paths, tmp_path / 'p.bin')
