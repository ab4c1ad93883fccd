import logging
import os
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from fbm_gen import SamplePath
from outputs import atomic_write
from solver import ConvergenceReport

logger = logging.getLogger(__name__)

EXACT_COLOR = "black"
DRIVER_COLOR = "grey"


def export_figure(fig: go.Figure, path: str) -> str:
    """
    Write a figure as static SVG, falling back to standalone HTML when no
    static image engine is available.

    Returns:
        The path actually written
    """
    try:
        return atomic_write(path, lambda tmp: fig.write_image(tmp, format="svg"))
    except (ValueError, ImportError, RuntimeError) as e:
        html_path = os.path.splitext(path)[0] + ".html"
        logger.warning("SVG export failed (%s); writing %s instead", e, html_path)
        return atomic_write(html_path, lambda tmp: fig.write_html(tmp, include_plotlyjs="cdn"))


class PathPlotter:
    def __init__(self, width: int = 900, height: int = 500):
        """
        Build the static figures written next to each CSV output

        Args:
            width: Figure width in pixels
            height: Figure height in pixels
        """
        self.width = width
        self.height = height

    def _layout(self, fig: go.Figure, title: str, xaxis_title: str, yaxis_title: str) -> go.Figure:
        fig.update_layout(
            title=title,
            xaxis_title=xaxis_title,
            yaxis_title=yaxis_title,
            width=self.width,
            height=self.height,
            template="plotly_white",
        )
        return fig

    def create_path_plot(self, path: SamplePath, title: str) -> go.Figure:
        """Single sampled path against time"""
        fig = go.Figure()
        fig.add_trace(go.Scatter(
            x=path.times,
            y=path.values,
            mode="lines",
            name=path.label.value,
            line=dict(color=EXACT_COLOR, width=1),
        ))
        return self._layout(fig, title, "t", "value")

    def create_solution_plot(self, frame: pd.DataFrame, title: str, show_driver: bool = True) -> go.Figure:
        """Exact solution overlaid with every x_mollified_n<k> column of a solution frame"""
        if frame.empty:
            return self.create_empty_plot("No solution data")
        fig = go.Figure()
        if show_driver:
            fig.add_trace(go.Scatter(x=frame["t"], y=frame["B"], mode="lines", name="driver B",
                                     line=dict(color=DRIVER_COLOR, width=1, dash="dot")))
        fig.add_trace(go.Scatter(x=frame["t"], y=frame["x_exact"], mode="lines", name="exact",
                                 line=dict(color=EXACT_COLOR, width=1.5)))
        for column in [c for c in frame.columns if c.startswith("x_mollified_n")]:
            fig.add_trace(go.Scatter(x=frame["t"], y=frame[column], mode="lines",
                                     name=column.replace("x_mollified_", ""), line=dict(width=1)))
        return self._layout(fig, title, "t", "x")

    def create_convergence_plot(self, report: ConvergenceReport, title: str) -> go.Figure:
        """Log-log sup error against n with the fitted slope and the exact gap bound"""
        ns = np.array([n for n, _ in report.entries], dtype=float)
        errors = np.array([e for _, e in report.entries])
        if report.degenerate or np.all(errors <= 0):
            return self.create_empty_plot("degenerate: zero error")
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=ns, y=errors, mode="lines+markers", name="sup error",
                                 line=dict(color=EXACT_COLOR)))
        if report.gap_bounds:
            fig.add_trace(go.Scatter(x=ns, y=report.gap_bounds, mode="lines", name="inverse gap bound",
                                     line=dict(color="red", dash="dash")))
        fig.update_xaxes(type="log")
        fig.update_yaxes(type="log")
        fig.add_annotation(text=f"slope {report.slope:.3f}", xref="paper", yref="paper",
                           x=0.95, y=0.95, showarrow=False)
        return self._layout(fig, title, "n", "max |x_n - x|")

    def create_transform_plots(self, table: pd.DataFrame, title: str) -> Tuple[go.Figure, go.Figure]:
        """sigma with sigma_n, and Lambda with Lambda_n, from a transform table"""
        coefficient = go.Figure()
        coefficient.add_trace(go.Scatter(x=table["x"], y=table["sigma"], mode="lines", name="sigma",
                                         line=dict(color=EXACT_COLOR, shape="hv")))
        coefficient.add_trace(go.Scatter(x=table["x"], y=table["sigma_n"], mode="lines", name="sigma_n",
                                         line=dict(color="red", dash="dash")))
        transform = go.Figure()
        transform.add_trace(go.Scatter(x=table["x"], y=table["lambda"], mode="lines", name="Lambda",
                                       line=dict(color=EXACT_COLOR)))
        transform.add_trace(go.Scatter(x=table["x"], y=table["lambda_n"], mode="lines", name="Lambda_n",
                                       line=dict(color="red", dash="dash")))
        return (self._layout(coefficient, f"{title}: coefficient", "x", "sigma"),
                self._layout(transform, f"{title}: transform", "x", "Lambda"))

    def create_figure_grid(self, panels: Sequence[Tuple[str, pd.DataFrame]], cols: int = 3) -> go.Figure:
        """One solution panel per (title, frame), laid out row by row"""
        if not panels:
            return self.create_empty_plot("No panels")
        rows = -(-len(panels) // cols)
        fig = make_subplots(rows=rows, cols=cols, subplot_titles=[title for title, _ in panels])
        for k, (_, frame) in enumerate(panels):
            row, col = divmod(k, cols)
            fig.add_trace(go.Scatter(x=frame["t"], y=frame["x_exact"], mode="lines", showlegend=False,
                                     line=dict(color=EXACT_COLOR, width=1)), row=row + 1, col=col + 1)
            for column in [c for c in frame.columns if c.startswith("x_mollified_n")]:
                fig.add_trace(go.Scatter(x=frame["t"], y=frame[column], mode="lines", showlegend=False,
                                         line=dict(width=0.8)), row=row + 1, col=col + 1)
        fig.update_layout(width=self.width * cols // 2, height=self.height * rows // 2,
                          template="plotly_white", title="Solution samples over (H, alpha)")
        return fig

    def create_empty_plot(self, message: str) -> go.Figure:
        """Create an empty plot with a message"""
        fig = go.Figure()
        fig.add_annotation(
            text=message,
            xref="paper",
            yref="paper",
            x=0.5,
            y=0.5,
            showarrow=False
        )
        return fig
