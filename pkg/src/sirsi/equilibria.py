"""Closed-form equilibria and local stability of the reduced model.

Disease-free point ``((mu+gamma)/(mu+gamma+omega), 0, 0)`` and endemic point
``(1/R0, (beta3+mu)*psi, beta2*psi)``.  The disease-free point is stable iff
``omega > (R0 - 1)(mu + gamma)``; the endemic point exists iff
``omega <= (R0 - 1)(mu + gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Params, State3, r0, rhs_sirsi_vaccine_3d

# discriminant magnitude treated as a repeated root, relative to coefficient scale
DISCRIMINANT_TOL = 1e-12


class UndefinedEquilibrium(ValueError):
    """Raised when the endemic point is undefined (alpha*(1 - theta) == 0)."""


def disease_free_point(p: Params) -> State3:
    total = p.mu + p.gamma + p.omega
    if total <= 0.0:
        raise ValueError("disease-free point undefined: mu + gamma + omega must be > 0")
    return State3((p.mu + p.gamma) / total, 0.0, 0.0)


def psi(p: Params) -> float:
    c = p.contact
    if c <= 0.0:
        raise UndefinedEquilibrium("endemic point undefined when alpha*(1 - theta) == 0")
    m = p.beta1 + p.beta2 + p.mu
    num = c * (p.gamma + p.mu) - m * (p.gamma + p.mu + p.omega)
    den = c * ((p.beta1 + p.beta2 + p.gamma + p.mu) * (p.beta3 + p.mu) + p.beta2 * p.gamma)
    return num / den


def phi(p: Params) -> float:
    """Endemic amplitude of the unvaccinated model; ``omega`` is ignored."""
    c = p.contact
    if c <= 0.0:
        raise UndefinedEquilibrium("endemic point undefined when alpha*(1 - theta) == 0")
    m = p.beta1 + p.beta2 + p.mu
    num = (p.gamma + p.mu) * (c - m)
    den = c * (m * (p.beta3 + p.mu) + (p.beta2 + p.beta3 + p.mu) * p.gamma)
    return num / den


def endemic_point(p: Params) -> tuple[State3, float]:
    """Return the endemic point and its amplitude ``psi``.

    The coordinates are returned even when ``psi < 0`` (non-physical point).
    """
    amp = psi(p)
    s = (p.beta1 + p.beta2 + p.mu) / p.contact
    return State3(s, (p.beta3 + p.mu) * amp, p.beta2 * amp), amp


def jacobian(p: Params, x) -> np.ndarray:
    s, i, _ = x
    c = p.contact
    return np.array([
        [-c * i - (p.mu + p.gamma + p.omega), -c * s - p.gamma, -p.gamma],
        [c * i, c * s - (p.beta1 + p.beta2 + p.mu), 0.0],
        [0.0, p.beta2, -(p.beta3 + p.mu)],
    ])


def df_eigenvalues(p: Params) -> tuple[float, float, float]:
    total = p.mu + p.gamma + p.omega
    if total <= 0.0:
        raise ValueError("mu + gamma + omega must be > 0")
    lam1 = -(p.gamma + p.mu + p.omega)
    if p.omega == 0.0:
        # the (mu + gamma) ratio is exactly 1; skip it so the unvaccinated form is reproduced bit for bit
        lam2 = p.contact - (p.beta1 + p.beta2 + p.mu)
    else:
        lam2 = -(p.beta1 + p.beta2 + p.mu) + p.contact * (p.mu + p.gamma) / total
    lam3 = -(p.beta3 + p.mu)
    return lam1, lam2, lam3


def omega_threshold(p: Params) -> float:
    """Vaccination rate above which the disease-free point is stable."""
    return (r0(p) - 1.0) * (p.mu + p.gamma)


def char_poly(J: np.ndarray) -> tuple[float, float, float]:
    """Coefficients (a1, a2, a3) of det(lambda*I - J) = lambda^3 + a1 lambda^2 + a2 lambda + a3."""
    J = np.asarray(J, dtype=float)
    a1 = -(J[0, 0] + J[1, 1] + J[2, 2])
    a2 = (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
          + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
          + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
    a3 = -(J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
           - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
           + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0]))
    return a1, a2, a3


def char_poly_endemic(p: Params) -> tuple[float, float, float]:
    """Closed-form characteristic coefficients at the unvaccinated endemic point."""
    amp = phi(p)
    if amp <= 0.0:
        raise UndefinedEquilibrium(f"endemic point does not exist (phi = {amp:.6g} <= 0)")
    mu, gamma, b1, b2, b3 = p.mu, p.gamma, p.beta1, p.beta2, p.beta3
    k = amp * p.contact
    a1 = k * (b3 + mu) + b3 + gamma + 2 * mu
    a2 = (b3 + mu) * (gamma + mu + k * (b1 + b2 + b3 + gamma + 2 * mu))
    a3 = k * (b3 + mu) * (b1 * b3 + b1 * mu + b2 * b3 + b2 * gamma + b2 * mu
                         + b3 * gamma + b3 * mu + gamma * mu + mu * mu)
    return a1, a2, a3


def routh_hurwitz_b1(a1: float, a2: float, a3: float) -> float:
    if a1 == 0.0:
        raise ZeroDivisionError("Routh-Hurwitz b1 undefined for a1 == 0")
    return a2 - a3 / a1


def routh_b1_factored(p: Params, amp: float | None = None) -> float:
    """b1 via the factored polynomial in phi; must equal a2 - a3/a1."""
    amp = phi(p) if amp is None else amp
    mu, gamma, b1, b2, b3 = p.mu, p.gamma, p.beta1, p.beta2, p.beta3
    c1 = p.contact
    c2 = (b1 + b2) * (b3 + mu) + b3 ** 2 + b3 * gamma + 3 * b3 * mu + gamma * mu + 2 * mu ** 2
    c3 = (b1 * gamma + b1 * mu + b2 * mu + b3 ** 2 + 2 * b3 * gamma + 4 * b3 * mu
          + gamma ** 2 + 4 * gamma * mu + 4 * mu ** 2)
    c4 = b3 * gamma + b3 * mu + gamma ** 2 + 3 * gamma * mu + 2 * mu ** 2
    a1 = amp * c1 * (b3 + mu) + b3 + gamma + 2 * mu
    return (b3 + mu) * (amp ** 2 * c1 ** 2 * c2 + amp * c1 * c3 + c4) / a1


def hurwitz_stable(a1: float, a2: float, a3: float) -> bool:
    """All roots of the monic cubic in the open left half-plane."""
    return a1 > 0.0 and a3 > 0.0 and a1 * a2 - a3 > 0.0


def cubic_roots(a1: float, a2: float, a3: float) -> list[complex]:
    """Roots of lambda^3 + a1 lambda^2 + a2 lambda + a3, sorted by (real, imag).

    Cardano on the depressed cubic, with the trigonometric form when all
    three roots are real.  Real roots get a few Newton refinements.
    """
    shift = a1 / 3.0
    p = a2 - a1 * a1 / 3.0
    q = 2.0 * a1 ** 3 / 27.0 - a1 * a2 / 3.0 + a3
    half_q, third_p = q / 2.0, p / 3.0
    disc = half_q ** 2 + third_p ** 3
    tol = DISCRIMINANT_TOL * max(half_q ** 2, abs(third_p) ** 3, 1e-300)

    if abs(disc) <= tol:
        if p == 0.0:
            real = [-shift] * 3
        else:
            real = [3.0 * q / p - shift, -1.5 * q / p - shift, -1.5 * q / p - shift]
        return sorted((complex(_newton_polish(x, a1, a2, a3)) for x in real),
                      key=lambda z: (z.real, z.imag))
    if disc < 0.0:
        r = 2.0 * math.sqrt(-third_p)
        arg = min(1.0, max(-1.0, 3.0 * q / (p * r)))
        ang = math.acos(arg) / 3.0
        real = [r * math.cos(ang - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
        return sorted((complex(_newton_polish(x, a1, a2, a3)) for x in real),
                      key=lambda z: (z.real, z.imag))

    sq = math.sqrt(disc)
    x = _cbrt(-half_q + sq) + _cbrt(-half_q - sq) - shift
    x = _newton_polish(x, a1, a2, a3)
    # remaining quadratic factor lambda^2 + b lambda + c
    b = a1 + x
    c = -a3 / x if abs(x) > 1e-3 * max(1.0, abs(a1)) else a2 + b * x
    im = math.sqrt(max(4.0 * c - b * b, 0.0)) / 2.0
    roots = [complex(x), complex(-b / 2.0, im), complex(-b / 2.0, -im)]
    return sorted(roots, key=lambda z: (z.real, z.imag))


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _newton_polish(x: float, a1: float, a2: float, a3: float, iters: int = 3) -> float:
    # only small corrections: near a double root a full step can jump to another root
    max_step = 1e-4 * (1.0 + abs(x) + abs(a1))
    for _ in range(iters):
        f = ((x + a1) * x + a2) * x + a3
        df = (3 * x + 2 * a1) * x + a2
        if df == 0.0:
            break
        step = f / df
        if not math.isfinite(step) or abs(step) > max_step:
            break
        x_new = x - step
        f_new = ((x_new + a1) * x_new + a2) * x_new + a3
        if abs(f_new) >= abs(f):
            break
        x = x_new
    return x


def eigenvalues(J: np.ndarray) -> list[complex]:
    return cubic_roots(*char_poly(J))


@dataclass
class EquilibriumReport:
    kind: str                 # "disease_free" or "endemic"
    point: State3
    exists: bool
    eigenvalues: list
    stable: bool
    r0: float
    psi: float
    omega_threshold: float
    routh_b1: float
    notes: list = field(default_factory=list)

    @property
    def physical(self) -> bool:
        return self.exists and all(v >= 0.0 for v in self.point)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "point": {"s": _num(self.point.s), "i": _num(self.point.i), "sick": _num(self.point.sick)},
            "exists": bool(self.exists),
            "eigenvalues": [{"re": _num(z.real), "im": _num(z.imag)} for z in self.eigenvalues],
            "stable": bool(self.stable),
            "r0": _num(self.r0),
            "psi": _num(self.psi),
            "omega_threshold": _num(self.omega_threshold),
            "routh_b1": _num(self.routh_b1),
            "notes": list(self.notes),
        }


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def _b1_or_nan(coeffs) -> float:
    a1, a2, a3 = coeffs
    return routh_hurwitz_b1(a1, a2, a3) if a1 != 0.0 else math.nan


def classify(p: Params) -> tuple[EquilibriumReport, EquilibriumReport]:
    """Reports for the disease-free and endemic points.

    Disease-free stability uses the strict inequality omega > threshold and
    endemic existence the non-strict omega <= threshold, so on the boundary
    the endemic point exists (coinciding with the disease-free point) and
    neither is asymptotically stable.
    """
    rep_r0 = r0(p)
    thr = omega_threshold(p)
    try:
        amp = psi(p)
    except UndefinedEquilibrium:
        amp = math.nan

    df_point = disease_free_point(p)
    J_df = jacobian(p, df_point)
    df_coeffs = char_poly(J_df)
    df = EquilibriumReport(
        kind="disease_free", point=df_point, exists=True,
        eigenvalues=[complex(v) for v in sorted(df_eigenvalues(p))],
        stable=p.omega > thr, r0=rep_r0, psi=amp, omega_threshold=thr,
        routh_b1=_b1_or_nan(df_coeffs),
    )

    if math.isnan(amp):
        en = EquilibriumReport(
            kind="endemic", point=State3(math.nan, math.nan, math.nan), exists=False,
            eigenvalues=[complex(math.nan)] * 3, stable=False, r0=rep_r0, psi=amp,
            omega_threshold=thr, routh_b1=math.nan, notes=["alpha*(1 - theta) == 0"],
        )
        return df, en

    point, _ = endemic_point(p)
    exists = p.omega <= thr
    J_en = jacobian(p, point)
    if p.omega == 0.0 and exists and phi(p) > 0.0:
        coeffs = char_poly_endemic(p)
    else:
        coeffs = char_poly(J_en)
    notes = []
    if exists and p.omega == thr:
        notes.append("on the bifurcation boundary: coincides with the disease-free point")
    en = EquilibriumReport(
        kind="endemic", point=point, exists=exists,
        eigenvalues=cubic_roots(*coeffs),
        stable=exists and hurwitz_stable(*coeffs),
        r0=rep_r0, psi=amp, omega_threshold=thr, routh_b1=_b1_or_nan(coeffs), notes=notes,
    )
    return df, en


def fixed_point_residual(p: Params, x) -> float:
    return max(abs(v) for v in rhs_sirsi_vaccine_3d(p, x))
