"""Case-data preprocessing and bounded least-squares parameter estimation.

Confirmed cases are the sick compartment: the fitted curve is
``N * sick(t)`` with ``sick(0) = 0`` and ``i(0) = 1 - s(0)``.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .lsq import trust_region_lsq
from .model import Params
from .model import vector_field_3d
from .odeint import IntegrationError, ThetaSchedule, TimeSeries, solve

FITTABLE = ("gamma", "alpha", "beta1", "beta2", "beta3", "s0")

# Defaults drawn from reported Covid-19 clinical ranges: unreported
# infections clearing in 5 to 20 days, incubation of 5 to 14 days, sick
# recovery in 10 to 30 days, immunity lasting from about 5 days to years.
DEFAULT_BOUNDS = {
    "gamma": (0.001, 0.2),
    "alpha": (0.1, 2.0),
    "beta1": (0.05, 0.25),
    "beta2": (1 / 14, 0.25),
    "beta3": (1 / 30, 0.1),
    "s0": (0.999, 1.0),
}


class FitError(RuntimeError):
    """Residual evaluation failed; ``params`` is the offending point."""

    def __init__(self, message: str, params: dict):
        super().__init__(f"{message} at {params}")
        self.params = params


def _as_dates(values) -> np.ndarray:
    dates = np.array(values, dtype="datetime64[D]")
    if dates.ndim != 1:
        raise ValueError("dates must be one-dimensional")
    if dates.size > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
        raise ValueError("dates must be strictly increasing")
    return dates


@dataclass(frozen=True)
class CaseSeries:
    dates: np.ndarray
    confirmed: np.ndarray
    population: float

    def __post_init__(self):
        dates = _as_dates(self.dates)
        confirmed = np.asarray(self.confirmed, dtype=float)
        if confirmed.shape != dates.shape:
            raise ValueError("dates and confirmed must have equal length")
        if np.any(confirmed < 0) or not np.all(np.isfinite(confirmed)):
            raise ValueError("confirmed counts must be finite and non-negative")
        if not self.population > 0:
            raise ValueError("population must be positive")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "confirmed", confirmed)

    @property
    def days(self) -> np.ndarray:
        """Days since the first date."""
        return (self.dates - self.dates[0]).astype(float)


@dataclass(frozen=True)
class IsolationSeries:
    dates: np.ndarray
    index: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        index = np.asarray(self.index, dtype=float)
        if index.shape != dates.shape:
            raise ValueError("dates and index must have equal length")
        if np.any(index < 0) or np.any(index > 1) or not np.all(np.isfinite(index)):
            raise ValueError("isolation index values must lie in [0, 1]")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "index", index)

    @property
    def days(self) -> np.ndarray:
        return (self.dates - self.dates[0]).astype(float)


def read_cases_csv(path, population: float) -> CaseSeries:
    """Read a ``date,confirmed`` CSV with ISO dates."""
    dates, counts = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "confirmed"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'date,confirmed'")
        for row in reader:
            dates.append(dt.date.fromisoformat(row["date"].strip()))
            counts.append(float(row["confirmed"]))
    return CaseSeries(np.array(dates, dtype="datetime64[D]"), np.array(counts), population)


def read_isolation_csv(path, percent: bool = False) -> IsolationSeries:
    """Read a ``date,index`` CSV; ``percent`` divides the index by 100."""
    dates, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "index"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'date,index'")
        for row in reader:
            dates.append(dt.date.fromisoformat(row["date"].strip()))
            values.append(float(row["index"]))
    values = np.array(values)
    if percent:
        values = values / 100.0
    return IsolationSeries(np.array(dates, dtype="datetime64[D]"), values)


def moving_average_values(x, window: int) -> np.ndarray:
    """Centred moving mean that shrinks symmetrically near the edges.

    An even window takes its extra sample on the left; where the full window
    does not fit it falls back to the largest symmetric one.
    """
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > x.size:
        raise ValueError(f"window ({window}) longer than series ({x.size})")
    n = x.size
    left = window // 2
    right = window - 1 - left
    idx = np.arange(n)
    full = (idx >= left) & (idx + right <= n - 1)
    half = np.minimum(np.minimum(idx, n - 1 - idx), right)
    start = np.where(full, idx - left, idx - half)
    stop = np.where(full, idx + right, idx + half) + 1
    cumsum = np.concatenate(([0.0], np.cumsum(x)))
    return (cumsum[stop] - cumsum[start]) / (stop - start)


def moving_average(series: IsolationSeries, window: int = 21) -> IsolationSeries:
    return IsolationSeries(series.dates, moving_average_values(series.index, window))


def fit_isolation_polynomial(series: IsolationSeries, degree: int = 6, origin=None) -> ThetaSchedule:
    """Least-squares polynomial for the isolation index.

    The fit runs on time rescaled to [-1, 1]; coefficients are returned in
    days since ``origin`` (default: the first date of the series), so the
    schedule can be aligned with a case series that starts elsewhere.
    ``fit_residual`` is the RMS residual.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    origin = series.dates[0] if origin is None else np.datetime64(origin, "D")
    t = (series.dates - origin).astype(float)
    if np.unique(t).size < degree + 1:
        raise ValueError(f"need at least {degree + 1} distinct times for degree {degree}")
    with warnings.catch_warnings():
        warnings.simplefilter("error", np.exceptions.RankWarning)
        try:
            poly = np.polynomial.Polynomial.fit(t, series.index, degree)
        except np.exceptions.RankWarning as exc:
            raise ValueError(f"rank-deficient polynomial fit: {exc}") from exc
    resid = series.index - poly(t)
    coeffs = poly.convert().coef
    coeffs = np.pad(coeffs, (0, degree + 1 - coeffs.size))
    return ThetaSchedule.polynomial(coeffs, fit_residual=float(np.sqrt(np.mean(resid ** 2))))


def transform_cases(cases: CaseSeries, mode: str = "none", window: int = 14) -> CaseSeries:
    """Optional preprocessing of the observed series.

    ``none`` passes through; ``diff`` turns cumulative counts into daily new
    cases; ``active`` subtracts the count ``window`` days earlier, i.e. cases
    confirmed within the last ``window`` days.
    """
    y = cases.confirmed
    if mode == "none":
        return cases
    if mode == "diff":
        new = np.diff(y, prepend=y[0])
        return replace(cases, confirmed=np.maximum(new, 0.0))
    if mode == "active":
        lagged = np.concatenate((np.zeros(min(window, y.size)), y[:-window] if window < y.size else []))
        return replace(cases, confirmed=np.maximum(y - lagged, 0.0))
    raise ValueError(f"unknown case transform {mode!r}")


@dataclass
class FitConfig:
    """What to estimate and how.

    ``base`` supplies every parameter that is not free (mu, theta, the
    starting guesses are not used); ``s0`` is used when it is not free.
    """

    base: Params
    s0: float = 1.0
    free_params: tuple = FITTABLE
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    max_iterations: int = 200
    gtol: float = 1e-10
    xtol: float = 1e-10
    ftol: float = 1e-12
    fd_step: float = 1e-6
    rel_tol: float = 1e-11
    abs_tol: float = 1e-14

    def __post_init__(self):
        unknown = set(self.free_params) - set(FITTABLE)
        if unknown:
            raise ValueError(f"cannot fit {sorted(unknown)}; choose from {FITTABLE}")
        if len(set(self.free_params)) != len(self.free_params) or not self.free_params:
            raise ValueError("free_params must be a non-empty list without duplicates")
        for name in self.free_params:
            if name not in self.bounds:
                raise ValueError(f"missing bounds for {name}")
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite with lower < upper")
        if "s0" in self.free_params:
            lo, hi = self.bounds["s0"]
            if lo <= 0 or hi > 1:
                raise ValueError("s0 bounds must lie in (0, 1]")
        elif not 0 < self.s0 <= 1:
            raise ValueError("s0 must lie in (0, 1]")
        if self.base.omega != 0.0:
            raise ValueError("fitting assumes no vaccination: base.omega must be 0")

    def lower(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in self.free_params])

    def upper(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in self.free_params])

    def unpack(self, x) -> tuple[Params, float]:
        values = dict(zip(self.free_params, map(float, x)))
        s0 = values.pop("s0", self.s0)
        return replace(self.base, **values), s0


@dataclass
class FitResult:
    params: Params
    s0: float
    i0: float
    residual_norm: float
    iterations: int
    converged: bool
    fitted_series: TimeSeries          # model-implied confirmed cases, N * sick
    dates: np.ndarray
    observed: np.ndarray
    status: str = ""
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "s0": self.s0,
            "i0": self.i0,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
        }

    def curve_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", "observed", "fitted"])
        for d, obs, fit in zip(self.dates, self.observed, self.fitted_series["cases"]):
            writer.writerow([str(d), format(float(obs), ".17g"), format(float(fit), ".17g")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def simulate_cases(params: Params, s0: float, days, population: float,
                   theta: ThetaSchedule | None = None, rel_tol: float = 1e-11,
                   abs_tol: float = 1e-14, max_steps: int = 200_000) -> np.ndarray:
    """Model-implied confirmed cases ``N * sick`` at ``days`` (first entry is t = 0)."""
    f = vector_field_3d(params, theta)
    x0 = (s0, 1.0 - s0, 0.0)
    days = np.asarray(days, dtype=float)
    if days[0] != 0.0:
        days = np.concatenate(([0.0], days))
        return population * solve(f, x0, days, rtol=rel_tol, abs_tol=abs_tol, max_steps=max_steps)[1:, 2]
    return population * solve(f, x0, days, rtol=rel_tol, abs_tol=abs_tol, max_steps=max_steps)[:, 2]


def residual_norm(cases: CaseSeries, params: Params, s0: float,
                  theta: ThetaSchedule | None = None, rel_tol: float = 1e-11,
                  abs_tol: float = 1e-14) -> float:
    """Euclidean norm of model minus observed cases for a given parameter point."""
    model = simulate_cases(params, s0, cases.days, cases.population, theta, rel_tol, abs_tol)
    return float(np.linalg.norm(model - cases.confirmed))


def fit_model(cases: CaseSeries, theta: ThetaSchedule | None, cfg: FitConfig) -> FitResult:
    """Bounded least-squares fit of ``N * sick(t)`` to the confirmed series.

    ``theta=None`` keeps ``cfg.base.theta`` constant; otherwise the schedule
    drives the social distancing index.  The search starts at the midpoint
    of the bounds.
    """
    days = cases.days

    def residuals(x):
        params, s0 = cfg.unpack(x)
        try:
            model = simulate_cases(params, s0, days, cases.population, theta, cfg.rel_tol, cfg.abs_tol)
        except (IntegrationError, ValueError) as exc:
            raise FitError(str(exc), {**params.to_dict(), "s0": s0}) from exc
        return model - cases.confirmed

    lower, upper = cfg.lower(), cfg.upper()
    x0 = 0.5 * (lower + upper)
    res = trust_region_lsq(residuals, x0, lower, upper, max_iterations=cfg.max_iterations,
                           gtol=cfg.gtol, xtol=cfg.xtol, ftol=cfg.ftol, fd_step=cfg.fd_step)
    params, s0 = cfg.unpack(res.x)
    fitted = res.fun + cases.confirmed
    return FitResult(
        params=params, s0=s0, i0=1.0 - s0, residual_norm=res.residual_norm,
        iterations=res.iterations, converged=res.converged,
        fitted_series=TimeSeries(days, fitted, columns=("cases",)),
        dates=cases.dates, observed=cases.confirmed, status=res.status,
        history=[(cfg.unpack(x), c) for x, c in res.history],
    )
