"""SIRSi and SIRSi-Vaccine dynamics in normalized (fraction) form.

State variables are population fractions: susceptible ``s``, infected
(pre-symptomatic / unreported) ``i``, sick (confirmed symptomatic) ``sick``
and recovered ``r``.  All rates are per day.

Full system::

    ds/dt    = mu - c*s*i - mu*s + gamma*r - omega*s
    di/dt    = c*s*i - (beta1 + beta2 + mu)*i
    dsick/dt = beta2*i - (beta3 + mu)*sick
    dr/dt    = beta1*i + beta3*sick - gamma*r + omega*s - mu*r

with ``c = alpha*(1 - theta)``.  Eliminating ``r = 1 - s - i - sick`` gives the
reduced three-dimensional system used for equilibrium analysis.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, NamedTuple, Sequence

PARAM_NAMES = ("mu", "gamma", "alpha", "theta", "beta1", "beta2", "beta3", "omega")
RATE_NAMES = ("mu", "gamma", "alpha", "beta1", "beta2", "beta3", "omega")


class ParameterError(ValueError):
    """Raised for an invalid parameter vector."""


@dataclass(frozen=True)
class Params:
    mu: float       # birth = death rate
    gamma: float    # loss of immunity, r -> s
    alpha: float    # transmission rate
    theta: float    # social distancing index, 0 none .. 1 full lockdown
    beta1: float    # unreported recovery, i -> r
    beta2: float    # symptomatic progression, i -> sick
    beta3: float    # sick recovery, sick -> r
    omega: float = 0.0  # vaccination, s -> r

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
        for name in RATE_NAMES:
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.theta <= 1.0:
            raise ParameterError(f"theta must lie in [0, 1], got {self.theta}")

    @property
    def contact(self) -> float:
        """Effective transmission rate alpha*(1 - theta)."""
        return self.alpha * (1.0 - self.theta)

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


class State4(NamedTuple):
    s: float
    i: float
    sick: float
    r: float


class State3(NamedTuple):
    s: float
    i: float
    sick: float

    def lift(self) -> State4:
        """Recover the full state using r = 1 - s - i - sick."""
        return State4(self.s, self.i, self.sick, 1.0 - self.s - self.i - self.sick)


def check_state4(x: Sequence[float], tol: float = 1e-9) -> State4:
    x = State4(*map(float, x))
    if any(not math.isfinite(v) for v in x):
        raise ValueError(f"state has non-finite entries: {x}")
    if any(v < -tol or v > 1.0 + tol for v in x):
        raise ValueError(f"state components must lie in [0, 1]: {x}")
    if abs(sum(x) - 1.0) > tol:
        raise ValueError(f"state fractions must sum to 1, got {sum(x)!r}")
    return x


def check_state3(x: Sequence[float], tol: float = 1e-9) -> State3:
    """Validate membership of the solution set {s, i, sick >= 0, s + i + sick <= 1}."""
    x = State3(*map(float, x))
    if any(not math.isfinite(v) for v in x):
        raise ValueError(f"state has non-finite entries: {x}")
    if any(v < -tol for v in x) or sum(x) > 1.0 + tol:
        raise ValueError(f"state lies outside the admissible simplex: {x}")
    return x


def rhs_sirsi_vaccine_4d(p: Params, x: Sequence[float]) -> State4:
    s, i, sick, r = x
    c = p.alpha * (1.0 - p.theta)
    infection = c * s * i
    ds = p.mu - infection - p.mu * s + p.gamma * r - p.omega * s
    di = infection - (p.beta1 + p.beta2) * i - p.mu * i
    dsick = p.beta2 * i - p.beta3 * sick - p.mu * sick
    dr = p.beta1 * i + p.beta3 * sick - p.gamma * r + p.omega * s - p.mu * r
    return State4(ds, di, dsick, dr)


def rhs_sirsi_vaccine_3d(p: Params, x: Sequence[float]) -> State3:
    s, i, sick = x
    c = p.alpha * (1.0 - p.theta)
    infection = c * s * i
    ds = p.mu + p.gamma - infection - (p.mu + p.gamma + p.omega) * s - p.gamma * i - p.gamma * sick
    di = infection - (p.beta1 + p.beta2 + p.mu) * i
    dsick = p.beta2 * i - (p.beta3 + p.mu) * sick
    return State3(ds, di, dsick)


def r0(p: Params) -> float:
    """Basic reproduction number alpha*(1 - theta) / (beta1 + beta2 + mu).

    Vaccination does not enter; its effect shows up in the omega threshold.
    """
    outflow = p.beta1 + p.beta2 + p.mu
    if outflow <= 0.0:
        raise ParameterError("R0 undefined: beta1 + beta2 + mu must be > 0")
    return p.contact / outflow


def vector_field_3d(p: Params, theta: Callable[[float], float] | None = None):
    """Return ``f(t, y)`` for the reduced system as plain floats.

    With ``theta`` given, the social distancing index is taken from
    ``theta(t)`` instead of ``p.theta``.
    """
    mu, gamma, alpha = p.mu, p.gamma, p.alpha
    outflow_i = p.beta1 + p.beta2 + mu
    outflow_sick = p.beta3 + mu
    outflow_s = mu + gamma + p.omega
    beta2 = p.beta2
    influx = mu + gamma

    if theta is None:
        c = p.contact

        def f(t, y):
            s, i, sick = y
            infection = c * s * i
            return (influx - infection - outflow_s * s - gamma * i - gamma * sick,
                    infection - outflow_i * i,
                    beta2 * i - outflow_sick * sick)
    else:
        def f(t, y):
            s, i, sick = y
            infection = alpha * (1.0 - theta(t)) * s * i
            return (influx - infection - outflow_s * s - gamma * i - gamma * sick,
                    infection - outflow_i * i,
                    beta2 * i - outflow_sick * sick)
    return f


def vector_field_4d(p: Params, theta: Callable[[float], float] | None = None):
    """Return ``f(t, y)`` for the full four-compartment system."""
    if theta is None:
        return lambda t, y: rhs_sirsi_vaccine_4d(p, y)

    def f(t, y):
        return rhs_sirsi_vaccine_4d(replace(p, theta=theta(t)), y)
    return f
