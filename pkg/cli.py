"""
Command implementations and run configuration.

Every command takes a RunConfig, writes its files atomically under
config.output_dir and returns the written paths (verify returns an exit code).
"""

import argparse
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from errors import ConfigError, DomainError, VerificationError
from fbm_gen import GENERATORS, HurstParameter, TimeGrid, generate_fbm
from outputs import write_frame
from plotting import PathPlotter, export_figure
from run_monitor import DEFAULT_LOG_DIR, RunMonitor
from skew_transform import SkewParams, transform_table
from solver import (
    convergence_study,
    solution_frame,
    solve_exact,
    solve_mollified,
    transform_identity_residual,
)
from verification import IDENTITY_TOLERANCE, format_table, run_verification

logger = logging.getLogger(__name__)

# SBm limit row first, then the two fractional rows
FIGURE_GRID: List[Tuple[float, float]] = [
    (0.5, 0.01), (0.5, 0.5), (0.5, 0.99),
    (0.75, 0.1), (0.75, 0.5), (0.75, 0.99),
    (0.95, 0.1), (0.95, 0.5), (0.95, 0.99),
]


@dataclass(frozen=True)
class RunConfig:
    H: float = 0.75
    alpha: float = 0.4
    x0: float = 0.0
    T: float = 1.0
    N: int = 4096
    seed: int = 2024
    n_list: Tuple[int, ...] = (8, 16, 32, 64, 128)
    generator: str = "circulant"
    output_dir: str = "output"
    gamma: float = 0.65
    order_tilde: float = 0.45
    mc_paths: int = 10_000
    probe_count: int = 10_000
    bound_pairs: int = 1000
    identity_seeds: int = 100
    log_dir: str = DEFAULT_LOG_DIR
    monitoring: bool = True

    def __post_init__(self) -> None:
        HurstParameter(self.H)
        SkewParams(self.alpha)
        TimeGrid(self.T, self.N)
        if self.generator not in GENERATORS:
            raise DomainError(f"Unknown generator {self.generator!r}; choose from {sorted(GENERATORS)}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise DomainError(f"n_list needs positive integers: got {self.n_list}")
        for name in ("mc_paths", "probe_count", "bound_pairs", "identity_seeds"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive: got {getattr(self, name)}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.N)


def parse_n_list(text: str) -> Tuple[int, ...]:
    """Comma-separated mollification indices, e.g. '8,16,32'"""
    return tuple(int(part) for part in text.split(",") if part.strip())


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


FIELD_PARSERS = {
    "H": float, "alpha": float, "x0": float, "T": float, "N": int, "seed": int,
    "n_list": parse_n_list, "generator": str, "output_dir": str, "gamma": float,
    "order_tilde": float, "mc_paths": int, "probe_count": int, "bound_pairs": int,
    "identity_seeds": int, "log_dir": str, "monitoring": _parse_bool,
}

# flag spellings accepted as config keys
KEY_ALIASES = {
    "h": "H", "hurst": "H", "t": "T", "horizon": "T", "steps": "N",
    "out": "output_dir",
}


def parse_config_file(path: str) -> Dict[str, Any]:
    """
    Read 'key = value' lines; '#' starts a comment, blank lines are skipped.

    Raises:
        ConfigError: naming the line and field of the first bad entry
    """
    values: Dict[str, Any] = {}
    try:
        with open(path, "r") as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' in {path}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        name = key.replace("-", "_")
        name = KEY_ALIASES.get(name.lower(), name)
        if name == "disable_monitoring":
            name, value = "monitoring", str(not _parse_bool(value))
        if name not in FIELD_PARSERS:
            raise ConfigError(f"unknown key in {path}", line=lineno, field=key)
        try:
            values[name] = FIELD_PARSERS[name](value)
        except ValueError:
            raise ConfigError(f"cannot parse value {value!r} in {path}", line=lineno, field=key)
    return values


# argparse dest -> RunConfig field
FLAG_FIELDS = {
    "hurst": "H", "alpha": "alpha", "x0": "x0", "horizon": "T", "steps": "N", "seed": "seed",
    "n_list": "n_list", "generator": "generator", "out": "output_dir", "gamma": "gamma",
    "order_tilde": "order_tilde", "mc_paths": "mc_paths", "probe_count": "probe_count",
    "bound_pairs": "bound_pairs", "identity_seeds": "identity_seeds", "log_dir": "log_dir",
}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags"""
    values: Dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        values.update(parse_config_file(config_path))
    for dest, name in FLAG_FIELDS.items():
        flag_value = getattr(args, dest, None)
        if flag_value is not None:
            values[name] = flag_value
    if getattr(args, "disable_monitoring", False):
        values["monitoring"] = False
    valid = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in valid})


def config_dict(config: RunConfig) -> Dict[str, Any]:
    data = asdict(config)
    data["n_list"] = list(config.n_list)
    return data


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def cmd_fbm(config: RunConfig, plotter: Optional[PathPlotter] = None) -> List[str]:
    """Write one driver path as CSV and a line plot"""
    plotter = plotter or PathPlotter()
    B = generate_fbm(config.H, config.grid, config.seed, config.generator)
    if config.H == 0.5:
        title = "Brownian motion (H = 0.5 limit case)"
        print("H = 0.5: limit case, the driver is standard Brownian motion")
    else:
        title = f"Fractional Brownian motion, H = {config.H:g}"
    stem = f"fbm_H{config.H:g}_seed{config.seed}"
    files = [B.write_csv(_out(config, f"{stem}.csv")),
             export_figure(plotter.create_path_plot(B, title), _out(config, f"{stem}.svg"))]
    for path in files:
        print(f"Wrote {path}")
    return files


def _simulate_panel(config: RunConfig, H: float, alpha: float,
                    plotter: PathPlotter) -> Tuple[List[str], pd.DataFrame, float]:
    B = generate_fbm(H, config.grid, config.seed, config.generator)
    params = SkewParams(alpha)
    exact = solve_exact(params, config.x0, B)
    residual = transform_identity_residual(exact, B)
    if residual > IDENTITY_TOLERANCE:
        raise VerificationError(
            f"Exact solution for H={H:g}, alpha={alpha:g} violates the transform identity: {residual:.3e}"
        )
    mollified = [solve_mollified(params.with_n(n), config.x0, B) for n in config.n_list]
    frame = solution_frame(B, exact, mollified)
    max_gap = max((float(np.max(np.abs(m.values - exact.values))) for m in mollified), default=0.0)
    stem = f"solution_H{H:g}_alpha{alpha:g}_seed{config.seed}"
    title = f"H = {H:g}, alpha = {alpha:g}"
    files = [write_frame(_out(config, f"{stem}.csv"), frame),
             export_figure(plotter.create_solution_plot(frame, title), _out(config, f"{stem}.svg"))]
    return files, frame, max_gap


def cmd_simulate(config: RunConfig, figure_grid: bool = False,
                 plotter: Optional[PathPlotter] = None) -> List[str]:
    """
    Exact and mollified solutions on one driver, or the whole (H, alpha)
    figure grid with an index CSV and a combined panel figure.
    """
    plotter = plotter or PathPlotter()
    if not figure_grid:
        files, _, max_gap = _simulate_panel(config, config.H, config.alpha, plotter)
        for path in files:
            print(f"Wrote {path}")
        print(f"Max |mollified - exact| over n in {list(config.n_list)}: {max_gap:.6g}")
        return files

    files: List[str] = []
    rows = []
    panels = []
    for H, alpha in FIGURE_GRID:
        panel_files, frame, max_gap = _simulate_panel(config, H, alpha, plotter)
        files.extend(panel_files)
        rows.append({"H": H, "alpha": alpha, "csv": os.path.basename(panel_files[0]),
                     "figure": os.path.basename(panel_files[1]), "max_mollified_gap": max_gap})
        panels.append((f"H={H:g}, alpha={alpha:g}", frame))
        logger.info("Panel H=%s alpha=%s done, max gap %.3g", H, alpha, max_gap)
    files.append(write_frame(_out(config, "figure_grid.csv"), pd.DataFrame(rows)))
    files.append(export_figure(plotter.create_figure_grid(panels), _out(config, "figure_grid.svg")))
    print(f"Wrote {len(files)} files for {len(FIGURE_GRID)} panels under {config.output_dir}")
    return files


def cmd_converge(config: RunConfig, plotter: Optional[PathPlotter] = None) -> List[str]:
    """Convergence of mollified solutions to the exact one, as CSV and a log-log plot"""
    plotter = plotter or PathPlotter()
    params = SkewParams(config.alpha)
    B = generate_fbm(config.H, config.grid, config.seed, config.generator)
    report = convergence_study(params, config.x0, B, config.n_list)
    stem = f"converge_H{config.H:g}_alpha{config.alpha:g}_seed{config.seed}"
    title = f"Mollified scheme, H = {config.H:g}, alpha = {config.alpha:g}"
    files = [write_frame(_out(config, f"{stem}.csv"), report.to_frame()),
             export_figure(plotter.create_convergence_plot(report, title), _out(config, f"{stem}.svg"))]
    for path in files:
        print(f"Wrote {path}")
    if report.degenerate:
        print("degenerate: zero error")
    else:
        print(f"slope: {report.slope:.4f}")
        print(f"max n * sup_error: {report.constant:.6g}")
        print(f"dominated by inverse gap: {report.dominated}")
    return files


def cmd_verify(config: RunConfig) -> int:
    """Run the property checks; 0 iff none failed"""
    results = run_verification(config)
    print(format_table(results))
    failed = [r.name for r in results if r.failed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print("All checks passed")
    return 0


def cmd_transform(config: RunConfig, plotter: Optional[PathPlotter] = None) -> List[str]:
    """Tabulate and plot sigma, sigma_n, Lambda and Lambda_n for the smallest n"""
    plotter = plotter or PathPlotter()
    n = min(config.n_list)
    params = SkewParams(config.alpha, 0.0, n)
    xs = np.unique(np.concatenate([np.linspace(-1.0, 1.0, 2001), [-1.0 / n, 0.0]]))
    table = transform_table(params, xs)
    stem = f"transform_alpha{config.alpha:g}_n{n}"
    coefficient, transform = plotter.create_transform_plots(table, f"alpha = {config.alpha:g}, n = {n}")
    files = [write_frame(_out(config, f"{stem}.csv"), table),
             export_figure(coefficient, _out(config, f"{stem}_sigma.svg")),
             export_figure(transform, _out(config, f"{stem}_lambda.svg"))]
    for path in files:
        print(f"Wrote {path}")
    return files


def cmd_history(config: RunConfig, days: float = 7, command: Optional[str] = None) -> Dict[str, Any]:
    """Print the run ledger summary"""
    summary = RunMonitor(config.log_dir).get_run_summary(command=command, days=days)
    if "error" in summary:
        print(summary["error"])
        return summary
    print(f"Runs in the last {summary['days']:g} days: {summary['total_runs']}")
    print(f"Total duration: {summary['total_duration_seconds']:.2f}s")
    for name, stats in sorted(summary["by_command"].items()):
        print(f"  {name:10} {stats['count']:4d} runs  mean {stats['mean_duration_seconds']:.2f}s  "
              f"peak RSS {stats['peak_rss_mb']:.1f} MB")
    return summary
