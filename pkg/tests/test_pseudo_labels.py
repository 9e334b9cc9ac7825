import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pujoint import pseudo_labels as pl
from pujoint.errors import StateError


class TestInitLabels:
    def test_class_prior_constant(self):
        y = pl.init_labels("class-prior", 100, 0.49)
        assert np.all(y == 0.49)
        # mean is exact up to summation rounding
        assert y.mean() == pytest.approx(0.49, abs=1e-15)

    def test_all_negative(self):
        assert np.all(pl.init_labels("all-negative", 50, 0.3) == 0.0)

    def test_all_negative_noise_rate_equals_prior(self):
        # against a stratified truth vector, zeros disagree on every positive
        n, pi = 1000, 0.37
        truth = np.zeros(n)
        truth[:int(n * pi)] = 1.0
        y = pl.init_labels("all-negative", n, pi)
        assert np.mean(y != truth) == pytest.approx(pi)

    def test_randomized_hard_values_and_rate(self):
        n = 10_000
        y = pl.init_labels("randomized-hard", n, 0.49, seed=3)
        assert set(np.unique(y)) <= {0.0, 1.0}
        # binomial 3-sigma bound on the positive fraction
        bound = 3.0 * math.sqrt(0.49 * 0.51 / n)
        assert abs(y.mean() - 0.49) < bound

    def test_randomized_hard_noise_rate(self):
        # against an independent truth at pi=0.5 the expected disagreement
        # is 1 - pi^2 - pi_n^2 = 0.5
        n, pi = 10_000, 0.5
        rng = np.random.default_rng(11)
        truth = (rng.random(n) < pi).astype(float)
        y = pl.init_labels("randomized-hard", n, pi, seed=7)
        rate = np.mean(y != truth)
        assert abs(rate - 0.5) < 3.0 * math.sqrt(0.25 / n)

    def test_seeded(self):
        a = pl.init_labels("randomized-hard", 200, 0.4, seed=1)
        b = pl.init_labels("randomized-hard", 200, 0.4, seed=1)
        c = pl.init_labels("randomized-hard", 200, 0.4, seed=2)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            pl.init_labels("class-prior", 10, 0.0)
        with pytest.raises(ValueError):
            pl.init_labels("class-prior", 0, 0.5)
        with pytest.raises(ValueError):
            pl.init_labels("spy", 10, 0.5)

    def test_class_prior_minimizes_cross_entropy_to_hard_vectors(self, rng):
        # constant pi beats every other constant against any hard labeling
        # with positive fraction pi
        n = 200
        grid = np.arange(0.01, 1.0, 0.01)
        for pi in (0.3, 0.49):
            k = int(round(n * pi))
            for _ in range(5):
                truth = np.zeros(n)
                truth[rng.choice(n, size=k, replace=False)] = 1.0
                ce = np.array([
                    -np.mean(truth * np.log(y) + (1 - truth) * np.log(1 - y))
                    for y in grid
                ])
                best = grid[np.argmin(ce)]
                assert best == pytest.approx(pi, abs=0.005)


class TestLambdaSchedule:
    def test_endpoints_exact(self):
        sched = pl.make_lambda_schedule(10.0, 500, 6000, 100)
        assert pl.lambda_at(sched, 1) == 10.0
        assert pl.lambda_at(sched, 100) == 500 / 6000

    def test_hand_value_mid_schedule(self):
        sched = pl.LambdaSchedule(10.0, 1.0 / 12.0, 100)
        assert pl.lambda_at(sched, 50) == pytest.approx(5.091750841750842, rel=1e-12)

    def test_strictly_decreasing(self):
        sched = pl.make_lambda_schedule(10.0, 100, 1000, 60)
        values = [pl.lambda_at(sched, i) for i in range(1, 61)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_flat_when_init_equals_floor(self):
        sched = pl.make_lambda_schedule(0.25, 250, 1000, 10)
        assert all(pl.lambda_at(sched, i) == 0.25 for i in range(1, 11))

    def test_epoch_bounds(self):
        sched = pl.make_lambda_schedule(1.0, 10, 100, 20)
        with pytest.raises(ValueError):
            pl.lambda_at(sched, 0)
        with pytest.raises(ValueError):
            pl.lambda_at(sched, 21)

    def test_needs_two_epochs(self):
        with pytest.raises(ValueError):
            pl.make_lambda_schedule(1.0, 10, 100, 1)


def fresh_state(n_u=6, epochs=30, window=10, update_start=20, init=0.49):
    return pl.make_label_state(np.full(n_u, init), epochs, window, update_start)


class TestLabelState:
    def test_window_must_fit_before_updates(self):
        with pytest.raises(ValueError):
            pl.make_label_state(np.full(4, 0.5), 30, window=10, update_start=5)

    def test_record_and_read_back(self):
        state = fresh_state()
        pl.record_prediction(state, 2, 1, 0.73)
        assert state.predictions[2, 0] == 0.73
        assert state.recorded[2] == 1

    def test_last_writer_wins(self):
        state = fresh_state()
        pl.record_prediction(state, 0, 1, 0.2)
        pl.record_prediction(state, 0, 1, 0.9)
        assert state.predictions[0, 0] == 0.9
        assert state.recorded[0] == 1

    def test_column_full_after_partitioned_epoch(self):
        state = fresh_state(n_u=10)
        for chunk in np.array_split(np.random.default_rng(0).permutation(10), 3):
            pl.record_predictions(state, chunk, 1, np.full(chunk.size, 0.5))
        assert not np.any(np.isnan(state.predictions[:, 0]))

    def test_out_of_range_rejected(self):
        state = fresh_state()
        with pytest.raises(ValueError):
            pl.record_prediction(state, 99, 1, 0.5)
        with pytest.raises(ValueError):
            pl.record_prediction(state, 0, 31, 0.5)
        with pytest.raises(ValueError):
            pl.record_prediction(state, 0, 1, 1.5)

    def test_update_is_window_mean(self):
        state = fresh_state(update_start=20, window=10)
        for epoch, value in zip(range(11, 21), np.arange(0.0, 1.0, 0.1)):
            pl.record_prediction(state, 3, epoch, value)
        got = pl.update_label(state, 3, 20)
        assert got == pytest.approx(0.45, rel=1e-12)
        assert state.y[3] == pytest.approx(0.45, rel=1e-12)

    def test_update_uses_only_last_window(self):
        state = fresh_state(window=10, update_start=20, epochs=40)
        for epoch in range(1, 31):
            pl.record_prediction(state, 1, epoch, 0.9 if epoch <= 20 else 0.1)
        # epochs 21..30 are all 0.1; the early 0.9s fall outside the window
        assert pl.update_label(state, 1, 30) == pytest.approx(0.1, rel=1e-12)

    def test_constant_history_gives_constant(self):
        state = fresh_state()
        for epoch in range(11, 21):
            pl.record_prediction(state, 0, epoch, 0.7)
        assert pl.update_label(state, 0, 20) == pytest.approx(0.7, rel=1e-12)

    def test_before_update_start_is_noop(self):
        state = fresh_state(update_start=20)
        pl.record_prediction(state, 0, 1, 0.9)
        before = state.y.copy()
        pl.update_label(state, 0, 1)
        assert np.array_equal(state.y, before)

    def test_missing_history_is_state_error(self):
        state = fresh_state(update_start=20, window=10)
        pl.record_prediction(state, 0, 20, 0.5)  # only one of ten cells
        with pytest.raises(StateError):
            pl.update_label(state, 0, 20)

    @given(st.lists(st.floats(0.001, 0.999), min_size=10, max_size=10))
    @settings(max_examples=50, derandomize=True)
    def test_updated_label_stays_in_hull(self, history):
        state = fresh_state()
        for epoch, value in zip(range(11, 21), history):
            pl.record_prediction(state, 0, epoch, value)
        got = pl.update_label(state, 0, 20)
        assert min(history) - 1e-12 <= got <= max(history) + 1e-12
        assert 0.0 <= got <= 1.0


class TestExport:
    def test_without_truth(self, tmp_path):
        state = fresh_state(n_u=3)
        path = tmp_path / "labels.csv"
        pl.export_label_state(state, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,y"
        assert lines[1] == "0,0.49"

    def test_with_truth_round_trip(self, tmp_path):
        state = fresh_state(n_u=3)
        state.y[:] = [0.1, 0.6, 0.9]
        path = tmp_path / "labels.csv"
        pl.export_label_state(state, path, truth=np.array([0, 1, 1]))
        lines = path.read_text().splitlines()
        assert lines[0] == "index,y,truth"
        parsed = [line.split(",") for line in lines[1:]]
        assert [float(p[1]) for p in parsed] == [0.1, 0.6, 0.9]
        assert [int(p[2]) for p in parsed] == [0, 1, 1]
