import numpy as np
import pandas as pd

from gap_bounds import ratio_asymptotics
from gap_plots import bounds_sweep_figure, ratio_figure, small_dev_figure, survival_figure
from small_dev_mc import SmallDevCurve, SurvivalCurve


def _survival_frame():
    exit_times = np.random.default_rng(0).exponential(1 / 3.0, size=2000)
    grid = np.linspace(0.0, 3.0, 61)
    return SurvivalCurve.from_exit_times(exit_times, grid, dt=0.05, seed=0, t_max=3.0).to_frame()


def test_bounds_sweep_has_one_line_per_bound():
    fig = bounds_sweep_figure(ratio_asymptotics([2, 4, 8], 1))
    assert sorted(trace.name for trace in fig.data) == ['lower', 'upper']
    assert fig.layout.xaxis.type == 'log'


def test_ratio_figure():
    fig = ratio_figure(ratio_asymptotics([2, 4, 8, 16], 1))
    assert len(fig.data) == 1
    np.testing.assert_array_equal(fig.data[0].x, [2, 4, 8, 16])


def test_survival_figure_drops_empty_points_and_adds_guide():
    frame = _survival_frame()
    plain = survival_figure(frame)
    assert len(plain.data) == 3
    assert len(plain.data[2].x) == int((frame['estimate'] > 0).sum())
    guided = survival_figure(frame, lambda_hat=3.0)
    assert len(guided.data) == 4
    assert guided.layout.yaxis.type == 'log'


def test_small_dev_figure():
    eps = np.array([0.5, 1.0, 2.0])
    frame = SmallDevCurve.from_probabilities(eps, [0.01, 0.3, 0.9], n_paths=1000).to_frame()
    fig = small_dev_figure(frame)
    assert len(fig.data) == 3
    assert fig.data[1].fill == 'tonexty'
    assert isinstance(frame, pd.DataFrame)
