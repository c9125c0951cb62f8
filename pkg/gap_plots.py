# gap_plots.py - Plotly figures for bounds sweeps and Monte Carlo curves
"""
Figure builders shared by the dashboard. Each takes the pandas frames produced elsewhere
(ratio_asymptotics, SurvivalCurve.to_frame, SmallDevCurve.to_frame) and returns a plotly
figure without rendering it.
"""

from typing import Optional

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go


def bounds_sweep_figure(frame: pd.DataFrame) -> go.Figure:
    """Lower and upper bound against m on a log axis, with the upper/lower ratio on hover"""
    long = frame.melt(id_vars=['m', 'ratio'], value_vars=['lower', 'upper'],
                      var_name='bound', value_name='lambda')
    fig = px.line(
        long,
        x='m',
        y='lambda',
        color='bound',
        markers=True,
        log_x=True,
        hover_data=['ratio'],
        title='Spectral gap sandwich',
    )
    fig.update_layout(xaxis_title='horizontal dimension m', yaxis_title='eigenvalue')
    return fig


def ratio_figure(frame: pd.DataFrame) -> go.Figure:
    fig = px.line(frame, x='m', y='ratio', markers=True, log_x=True, title='upper / lower')
    fig.add_hline(y=1.0, line_dash='dot')
    return fig


def _band_figure(curve_frame: pd.DataFrame, title: str, x_title: str, log_y: bool) -> go.Figure:
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=curve_frame['abscissa'], y=curve_frame['ci_high'], mode='lines',
                             line=dict(width=0), showlegend=False, hoverinfo='skip'))
    fig.add_trace(go.Scatter(x=curve_frame['abscissa'], y=curve_frame['ci_low'], mode='lines',
                             line=dict(width=0), fill='tonexty', name='95% Wilson band'))
    fig.add_trace(go.Scatter(x=curve_frame['abscissa'], y=curve_frame['estimate'], mode='lines+markers',
                             name='estimate'))
    fig.update_layout(title=title, xaxis_title=x_title, yaxis_title='probability')
    if log_y:
        fig.update_yaxes(type='log')
    return fig


def survival_figure(curve_frame: pd.DataFrame, lambda_hat: Optional[float] = None) -> go.Figure:
    """Survival curve on a log scale; an optional fitted rate adds the exp(-lambda t) guide"""
    frame = curve_frame[curve_frame['estimate'] > 0]
    fig = _band_figure(frame, 'Exit-time survival', 't', log_y=True)
    if lambda_hat is not None and len(frame):
        t = frame['abscissa']
        fig.add_trace(go.Scatter(x=t, y=np.exp(-lambda_hat * t),
                                 mode='lines', line=dict(dash='dash'), name=f'exp(-{lambda_hat:.3f} t)'))
    return fig


def small_dev_figure(curve_frame: pd.DataFrame) -> go.Figure:
    return _band_figure(curve_frame, 'Small-deviation probability', 'eps', log_y=True)
