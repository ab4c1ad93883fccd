import os
from unittest.mock import patch

import numpy as np
import pandas as pd
import plotly.graph_objects as go
import pytest

from fbm_gen import TimeGrid, generate_fbm
from plotting import PathPlotter, export_figure
from skew_transform import SkewParams, transform_table
from solver import ConvergenceReport, solution_frame, solve_exact, solve_mollified


@pytest.fixture
def plotter():
    return PathPlotter()


@pytest.fixture
def frame():
    B = generate_fbm(0.75, TimeGrid(1.0, 64), 3)
    exact = solve_exact(SkewParams(0.4), 0.0, B)
    mollified = [solve_mollified(SkewParams(0.4, n=n), 0.0, B) for n in (8, 16)]
    return solution_frame(B, exact, mollified)


def test_path_plot(plotter):
    B = generate_fbm(0.75, TimeGrid(1.0, 32), 0)
    fig = plotter.create_path_plot(B, "fBm")
    assert len(fig.data) == 1
    assert fig.layout.title.text == "fBm"


def test_solution_plot(plotter, frame):
    assert len(plotter.create_solution_plot(frame, "panel").data) == 4
    assert len(plotter.create_solution_plot(frame, "panel", show_driver=False).data) == 3
    empty = plotter.create_solution_plot(pd.DataFrame(), "panel")
    assert len(empty.data) == 0


def test_convergence_plot(plotter):
    report = ConvergenceReport([(8, 0.01), (16, 0.005), (32, 0.0025), (64, 0.00125)], -1.0, 0.08,
                               gap_bounds=[0.01, 0.005, 0.0025, 0.00125])
    fig = plotter.create_convergence_plot(report, "rate")
    assert len(fig.data) == 2
    assert fig.layout.xaxis.type == "log"
    assert "slope -1.000" in fig.layout.annotations[0].text


def test_degenerate_convergence_plot(plotter):
    report = ConvergenceReport([(8, 0.0), (16, 0.0), (32, 0.0), (64, 0.0)], float("nan"), 0.0, degenerate=True)
    fig = plotter.create_convergence_plot(report, "rate")
    assert len(fig.data) == 0
    assert fig.layout.annotations[0].text == "degenerate: zero error"


def test_transform_plots(plotter):
    table = transform_table(SkewParams(0.3, 0.0, 4), np.linspace(-1, 1, 21))
    coefficient, transform = plotter.create_transform_plots(table, "alpha = 0.3")
    assert [t.name for t in coefficient.data] == ["sigma", "sigma_n"]
    assert [t.name for t in transform.data] == ["Lambda", "Lambda_n"]


def test_figure_grid(plotter, frame):
    panels = [(f"panel {k}", frame) for k in range(4)]
    fig = plotter.create_figure_grid(panels, cols=3)
    # one exact plus two mollified traces per panel
    assert len(fig.data) == 12
    assert len(plotter.create_figure_grid([]).data) == 0


def test_export_writes_svg(tmp_path):
    target = tmp_path / "fig.svg"

    def fake_write_image(self, path, format=None):
        with open(path, "w") as f:
            f.write("<svg/>")

    with patch.object(go.Figure, "write_image", fake_write_image):
        written = export_figure(go.Figure(), str(target))
    assert written == str(target)
    assert target.read_text() == "<svg/>"
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]


def test_export_falls_back_to_html(tmp_path):
    target = tmp_path / "fig.svg"
    with patch.object(go.Figure, "write_image", side_effect=ValueError("no engine")):
        written = export_figure(go.Figure(), str(target))
    assert written == str(tmp_path / "fig.html")
    assert os.path.exists(written)
    assert not target.exists()
