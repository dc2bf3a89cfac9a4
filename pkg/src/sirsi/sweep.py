"""Steady states and stability over a (social distancing, vaccination) grid."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .equilibria import classify, omega_threshold
from .model import Params, check_state3
from .odeint import IntegrationError, IntegratorConfig, steady_state

DEFAULT_AXIS = np.linspace(0.0, 0.7, 71)
DEFAULT_HORIZON = 3650.0


@dataclass
class SweepGrid:
    theta_axis: np.ndarray
    omega_axis: np.ndarray
    steady_sick: np.ndarray          # [theta, omega]
    df_stable: np.ndarray
    endemic_exists: np.ndarray
    settled: np.ndarray
    failures: dict = field(default_factory=dict)   # (i, j) -> message

    def rows(self):
        for a, theta in enumerate(self.theta_axis):
            for b, omega in enumerate(self.omega_axis):
                yield (theta, omega, self.steady_sick[a, b], bool(self.df_stable[a, b]),
                       bool(self.endemic_exists[a, b]), bool(self.settled[a, b]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "omega", "steady_sick", "df_stable", "endemic_exists", "settled"])
        for theta, omega, sick, df, en, st in self.rows():
            w.writerow([format(theta, ".17g"), format(omega, ".17g"), format(sick, ".17g"),
                        int(df), int(en), int(st)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None, population: float | None = None) -> str:
        doc = {
            "theta_axis": self.theta_axis.tolist(),
            "omega_axis": self.omega_axis.tolist(),
            "steady_sick": [[None if np.isnan(v) else float(v) for v in row] for row in self.steady_sick],
            "df_stable": self.df_stable.astype(bool).tolist(),
            "endemic_exists": self.endemic_exists.astype(bool).tolist(),
            "settled": self.settled.astype(bool).tolist(),
            "failures": [{"theta_index": i, "omega_index": j, "message": m}
                         for (i, j), m in sorted(self.failures.items())],
        }
        if population is not None:
            doc["population"] = population
            doc["steady_cases"] = [[None if np.isnan(v) else float(v) * population for v in row]
                                   for row in self.steady_sick]
        text = json.dumps(doc, indent=1) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _check_axes(theta_axis, omega_axis):
    theta_axis = np.asarray(theta_axis, dtype=float)
    omega_axis = np.asarray(omega_axis, dtype=float)
    if theta_axis.ndim != 1 or omega_axis.ndim != 1 or not theta_axis.size or not omega_axis.size:
        raise ValueError("axes must be non-empty one-dimensional sequences")
    if np.any(np.diff(theta_axis) <= 0) or np.any(np.diff(omega_axis) <= 0):
        raise ValueError("axes must be strictly ascending")
    if theta_axis[0] < 0 or theta_axis[-1] > 1 or omega_axis[0] < 0:
        raise ValueError("theta values must lie in [0, 1] and omega values be >= 0")
    return theta_axis, omega_axis


def classify_grid(base: Params, theta_axis, omega_axis) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (df_stable, endemic_exists) matrices indexed [theta, omega]."""
    theta_axis, omega_axis = _check_axes(theta_axis, omega_axis)
    thresholds = np.array([omega_threshold(replace(base, theta=float(t))) for t in theta_axis])
    df_stable = omega_axis[None, :] > thresholds[:, None]
    return df_stable, ~df_stable


def threshold_curve(base: Params, theta_axis) -> np.ndarray:
    """Critical vaccination rate (R0(theta) - 1)(mu + gamma) along ``theta_axis``."""
    return np.array([omega_threshold(replace(base, theta=float(t))) for t in theta_axis])


def _cell(args):
    base, x0, theta, omega, horizon, settle_tol, cfg = args
    p = replace(base, theta=float(theta), omega=float(omega))
    df, en = classify(p)
    try:
        res = steady_state(p, x0, horizon=horizon, settle_tol=settle_tol, cfg=cfg)
    except IntegrationError as exc:
        return np.nan, False, df.stable, en.exists, str(exc)
    return min(1.0, max(0.0, res.state.sick)), res.settled, df.stable, en.exists, None


def run_sweep(base: Params, x0, theta_axis=DEFAULT_AXIS, omega_axis=DEFAULT_AXIS,
              horizon: float = DEFAULT_HORIZON, settle_tol: float = 1e-9,
              cfg: IntegratorConfig | None = None, workers: int = 1,
              order: str = "row") -> SweepGrid:
    """Integrate every grid cell to steady state and classify it.

    Cells are independent; ``order`` ("row" or "column") only changes the
    evaluation sequence, and results are written back by position.  Steady
    sick fractions are clipped to [0, 1] (round-off can leave -1e-15).
    """
    theta_axis, omega_axis = _check_axes(theta_axis, omega_axis)
    x0 = check_state3(x0)
    if order == "row":
        cells = [(a, b) for a in range(theta_axis.size) for b in range(omega_axis.size)]
    elif order == "column":
        cells = [(a, b) for b in range(omega_axis.size) for a in range(theta_axis.size)]
    else:
        raise ValueError("order must be 'row' or 'column'")
    tasks = [(base, x0, theta_axis[a], omega_axis[b], horizon, settle_tol, cfg) for a, b in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_cell(t) for t in tasks]

    shape = (theta_axis.size, omega_axis.size)
    steady = np.full(shape, np.nan)
    settled = np.zeros(shape, dtype=bool)
    df_stable = np.zeros(shape, dtype=bool)
    endemic = np.zeros(shape, dtype=bool)
    failures = {}
    for (a, b), (sick, ok, df, en, err) in zip(cells, results):
        steady[a, b] = sick
        settled[a, b] = ok
        df_stable[a, b] = df
        endemic[a, b] = en
        if err is not None:
            failures[(a, b)] = err
    return SweepGrid(theta_axis, omega_axis, steady, df_stable, endemic, settled, failures)


def agreement(grid: SweepGrid, extinct_tol: float = 1e-6) -> float:
    """Fraction of settled cells where (steady sick < tol) matches disease-free stability."""
    mask = grid.settled & np.isfinite(grid.steady_sick)
    if not mask.any():
        return float("nan")
    dynamic = grid.steady_sick < extinct_tol
    return float(np.mean(dynamic[mask] == grid.df_stable[mask]))
