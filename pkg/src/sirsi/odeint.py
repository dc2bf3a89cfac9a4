"""Adaptive Dormand-Prince 5(4) integration of the model systems.

The stepper works on plain tuples of floats; the model states are three or
four numbers, which makes per-component Python arithmetic faster than small
numpy arrays.  Samples between steps come from the standard fourth-order
continuous extension, so the sampling grid does not constrain step sizes.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .model import Params, State3, State4, check_state3, check_state4, vector_field_3d, vector_field_4d

# Butcher tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# continuous extension: y(t + x h) = y + h * sum_l K_l * sum_m P[l][m] x^(m+1)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# slack on the admissible simplex for sampled states
OMEGA_SLACK = 1e-9


class IntegrationError(RuntimeError):
    """Integration could not be completed; ``t`` is the time of failure."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t0: float = 0.0
    t1: float = 365.0
    sample_step: float = 1.0
    max_steps: int = 100_000

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError("t1 must be greater than t0")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.sample_step > 0:
            raise ValueError("sample_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def sample_times(self) -> np.ndarray:
        n = int(math.floor((self.t1 - self.t0) / self.sample_step + 1e-9))
        times = self.t0 + self.sample_step * np.arange(n + 1)
        if self.t1 - times[-1] > 1e-9 * self.sample_step:
            times = np.append(times, self.t1)
        return times


@dataclass(frozen=True)
class ThetaSchedule:
    """Social distancing index over time, clamped to [0, 1].

    ``coefficients`` are polynomial coefficients in days since simulation
    start, lowest degree first.
    """

    mode: str = "constant"
    constant_value: float = 0.0
    coefficients: tuple = ()
    fit_residual: float | None = None

    def __post_init__(self):
        if self.mode not in ("constant", "polynomial"):
            raise ValueError(f"unknown theta schedule mode {self.mode!r}")
        if self.mode == "constant" and not 0.0 <= self.constant_value <= 1.0:
            raise ValueError("constant theta must lie in [0, 1]")
        if self.mode == "polynomial" and len(self.coefficients) == 0:
            raise ValueError("polynomial schedule needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @classmethod
    def constant(cls, value: float) -> "ThetaSchedule":
        return cls("constant", float(value))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], fit_residual: float | None = None) -> "ThetaSchedule":
        return cls("polynomial", 0.0, tuple(coefficients), fit_residual)

    def __call__(self, t: float) -> float:
        if self.mode == "constant":
            return self.constant_value
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return min(1.0, max(0.0, acc))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "constant_value": self.constant_value,
                "coefficients": list(self.coefficients), "fit_residual": self.fit_residual}


@dataclass(frozen=True)
class TimeSeries:
    """Sampled trajectory; ``values`` has one row per time and one column per channel."""

    times: np.ndarray
    values: np.ndarray
    columns: tuple = ("s", "i", "sick")
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (times.size, len(self.columns)):
            raise ValueError(f"values shape {values.shape} does not match times/columns")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def to_csv(self, path=None) -> str:
        """Write ``t,<columns>`` rows at 17 significant digits.

        State trajectories (s, i, sick) also get the derived ``r`` column.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        states = self.columns == ("s", "i", "sick")
        writer.writerow(["t", *self.columns, *(["r"] if states else [])])
        for t, row in zip(self.times, self.values):
            cells = list(row)
            if states:
                cells.append(1.0 - row[0] - row[1] - row[2])
            writer.writerow([_g17(t), *(_g17(v) for v in cells)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _g17(x: float) -> str:
    return format(float(x), ".17g")


class _Step(NamedTuple):
    t: float
    y: tuple
    t_new: float
    y_new: tuple
    h: float
    k: tuple      # seven stage derivatives; k[6] = f(t_new, y_new)


def _rms_norm(e, y, y_new, rtol, atol):
    acc = 0.0
    for ej, a, b in zip(e, y, y_new):
        sc = atol + rtol * max(abs(a), abs(b))
        acc += (ej / sc) ** 2
    return math.sqrt(acc / len(e))


def _initial_step(f, t0, y0, f0, rtol, atol, span):
    # Hairer, Norsett & Wanner, II.4 starting step heuristic
    scale = [atol + rtol * abs(v) for v in y0]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y0, scale)) / len(y0))
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(f0, scale)) / len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = tuple(v + h0 * dv for v, dv in zip(y0, f0))
    f1 = f(t0 + h0, y1)
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(f1, f0, scale)) / len(y0)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def dopri5_steps(f: Callable, t0: float, y0: Sequence[float], t_end: float, *,
                 rtol: float, atol: float, max_steps: int,
                 first_step: float | None = None) -> Iterator[_Step]:
    """Yield accepted Dormand-Prince steps from ``t0`` up to ``t_end``.

    ``first_step`` replaces the automatic starting step size.
    """
    t = float(t0)
    y = tuple(float(v) for v in y0)
    n = len(y)
    k1 = tuple(f(t, y))
    if first_step is None:
        h = _initial_step(f, t, y, k1, rtol, atol, t_end - t)
    else:
        h = min(float(first_step), t_end - t)
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise IntegrationError(f"step limit {max_steps} exhausted", t)
        h_min = 16 * math.ulp(t) if t else 1e-300
        if h < h_min:
            raise IntegrationError("step size underflow", t)
        last = t + h >= t_end
        if last:
            h = t_end - t
        ks = [k1]
        y_stage = y
        for stage in range(1, 7):
            a = _A[stage]
            y_stage = tuple(
                y[j] + h * sum(a[l] * ks[l][j] for l in range(stage) if a[l])
                for j in range(n)
            )
            ks.append(tuple(f(t + _C[stage] * h, y_stage)))
        # the seventh stage is evaluated at the fifth-order solution
        y_new = y_stage
        err_vec = [h * sum(_E[l] * ks[l][j] for l in range(7) if _E[l]) for j in range(n)]
        err = _rms_norm(err_vec, y, y_new, rtol, atol)
        if not math.isfinite(err) or not all(math.isfinite(v) for v in y_new):
            if h > h_min:
                h *= _MIN_FACTOR
                continue
            raise IntegrationError("non-finite state", t)
        if err <= 1.0:
            t_new = t_end if last else t + h
            steps += 1
            yield _Step(t, y, t_new, y_new, h, tuple(ks))
            t, y, k1 = t_new, y_new, ks[6]
            factor = _MAX_FACTOR if err == 0 else min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)


def dense_eval(step: _Step, t: float) -> tuple:
    """Evaluate the continuous extension of ``step`` at ``t``."""
    x = (t - step.t) / step.h
    powers = (x, x * x, x ** 3, x ** 4)
    weights = [sum(p * q for p, q in zip(row, powers)) for row in _P]
    return tuple(
        yj + step.h * sum(w * kl[j] for w, kl in zip(weights, step.k) if w)
        for j, yj in enumerate(step.y)
    )


def solve(f: Callable, y0: Sequence[float], t_eval: Sequence[float], *,
          rtol: float = 1e-8, abs_tol: float = 1e-10, max_steps: int = 100_000) -> np.ndarray:
    """Integrate ``y' = f(t, y)`` and return states at ``t_eval`` (first entry is the start)."""
    t_eval = np.asarray(t_eval, dtype=float)
    out = np.empty((t_eval.size, len(y0)))
    out[0] = y0
    if t_eval.size == 1:
        return out
    idx = 1
    for step in dopri5_steps(f, t_eval[0], y0, t_eval[-1], rtol=rtol, atol=abs_tol, max_steps=max_steps):
        while idx < t_eval.size and t_eval[idx] <= step.t_new:
            out[idx] = step.y_new if t_eval[idx] == step.t_new else dense_eval(step, t_eval[idx])
            idx += 1
    return out


def _check_samples(times, values, full: bool):
    for t, row in zip(times, values):
        if not np.all(np.isfinite(row)):
            raise IntegrationError("non-finite state", float(t))
        total = row.sum()
        if np.any(row < -OMEGA_SLACK) or (not full and total > 1.0 + OMEGA_SLACK) or \
                (full and abs(total - 1.0) > OMEGA_SLACK):
            raise IntegrationError(f"state left the admissible set: {row.tolist()}", float(t))


def integrate(p: Params, x0: Sequence[float], sched: ThetaSchedule | None = None,
              cfg: IntegratorConfig | None = None, t_eval: Sequence[float] | None = None) -> TimeSeries:
    """Integrate the reduced SIRSi-Vaccine system.

    ``sched`` overrides ``p.theta`` when given; it is evaluated in days since
    ``cfg.t0``.  Samples are taken on the config grid unless ``t_eval`` is
    supplied.
    """
    cfg = cfg or IntegratorConfig()
    x0 = check_state3(x0)
    theta = None if sched is None else (lambda t, s=sched, t0=cfg.t0: s(t - t0))
    times = cfg.sample_times() if t_eval is None else np.asarray(t_eval, dtype=float)
    values = solve(vector_field_3d(p, theta), x0, times,
                   rtol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_steps=cfg.max_steps)
    _check_samples(times, values, full=False)
    return TimeSeries(times, values)


def integrate_full(p: Params, x0: Sequence[float], sched: ThetaSchedule | None = None,
                   cfg: IntegratorConfig | None = None) -> TimeSeries:
    """Integrate the four-compartment system; columns are s, i, sick, r."""
    cfg = cfg or IntegratorConfig()
    x0 = check_state4(x0)
    theta = None if sched is None else (lambda t, s=sched, t0=cfg.t0: s(t - t0))
    times = cfg.sample_times()
    values = solve(vector_field_4d(p, theta), x0, times,
                   rtol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_steps=cfg.max_steps)
    _check_samples(times, values, full=True)
    return TimeSeries(times, values, columns=("s", "i", "sick", "r"))


class SteadyState(NamedTuple):
    state: State3
    settled: bool
    t: float            # time at which the state was taken
    max_rate: float     # max |dx/dt| there


def steady_state(p: Params, x0: Sequence[float], horizon: float = 365.0, settle_tol: float = 1e-9,
                 cfg: IntegratorConfig | None = None) -> SteadyState:
    """Integrate until every derivative component is below ``settle_tol``.

    Returns the state at ``horizon`` with ``settled=False`` if that never
    happens.  The check uses the derivative at each accepted step, which the
    scheme already provides.
    """
    cfg = cfg or IntegratorConfig()
    x0 = check_state3(x0)
    f = vector_field_3d(p)
    rate = max(abs(v) for v in f(cfg.t0, x0))
    if rate < settle_tol:
        return SteadyState(x0, True, cfg.t0, rate)
    state, t = x0, cfg.t0
    for step in dopri5_steps(f, cfg.t0, x0, cfg.t0 + horizon,
                             rtol=cfg.rel_tol, atol=cfg.abs_tol, max_steps=cfg.max_steps):
        state, t = step.y_new, step.t_new
        if not all(math.isfinite(v) for v in state):
            raise IntegrationError("non-finite state", t)
        rate = max(abs(v) for v in step.k[6])
        if rate < settle_tol:
            return SteadyState(State3(*state), True, t, rate)
    return SteadyState(State3(*state), False, t, rate)
