import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import endemic_params, random_params, rhs3
from sirsi import presets
from sirsi.equilibria import (UndefinedEquilibrium, char_poly, char_poly_endemic, classify, cubic_roots,
                              df_eigenvalues, disease_free_point, eigenvalues, endemic_point,
                              fixed_point_residual, hurwitz_stable, jacobian, omega_threshold, phi, psi,
                              routh_b1_factored, routh_hurwitz_b1)
from sirsi.model import Params


def _numeric_jacobian(p, x, h=1e-7):
    d = p.to_dict()
    J = np.empty((3, 3))
    for k in range(3):
        xp, xm = np.array(x, float), np.array(x, float)
        xp[k] += h
        xm[k] -= h
        J[:, k] = (rhs3(d, xp) - rhs3(d, xm)) / (2 * h)
    return J


def test_equilibria_are_fixed_points_of_oracle_field():
    rng = np.random.default_rng(20)
    for _ in range(300):
        p = endemic_params(rng)
        P = Params(**p)
        assert np.max(np.abs(rhs3(p, disease_free_point(P)))) < 1e-14
        point, amp = endemic_point(P)
        assert amp > 0
        assert np.max(np.abs(rhs3(p, point))) < 1e-12


def test_endemic_point_in_simplex_when_it_exists():
    rng = np.random.default_rng(21)
    for _ in range(300):
        point, _ = endemic_point(Params(**endemic_params(rng)))
        assert min(point) > 0 and sum(point) < 1


def test_psi_reduces_to_phi_without_vaccination():
    rng = np.random.default_rng(22)
    for _ in range(300):
        p = Params(**random_params(rng, vaccine=False))
        assert psi(p) == pytest.approx(phi(p), rel=1e-12, abs=1e-15)


def test_phi_ignores_omega():
    p = presets.get("santos").params
    assert phi(p.with_(omega=0.3)) == phi(p)


def test_zero_contact_is_undefined():
    p = presets.get("santos").params.with_(theta=1.0)
    with pytest.raises(UndefinedEquilibrium):
        psi(p)
    df, en = classify(p)
    assert df.stable and not en.exists and math.isnan(en.point.s)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(23)
    for _ in range(50):
        p = Params(**random_params(rng))
        x = rng.dirichlet(np.ones(4))[:3]
        np.testing.assert_allclose(jacobian(p, x), _numeric_jacobian(p, x), atol=1e-7)


def test_df_eigenvalues_match_numerical():
    rng = np.random.default_rng(24)
    for _ in range(300):
        p = Params(**random_params(rng))
        ours = np.sort(df_eigenvalues(p))
        ref = np.sort(np.linalg.eigvals(jacobian(p, disease_free_point(p))).real)
        assert np.max(np.abs(ours - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_df_eigenvalues_unvaccinated_form_is_exact():
    rng = np.random.default_rng(25)
    for _ in range(200):
        p = Params(**random_params(rng, vaccine=False))
        lam = df_eigenvalues(p)
        assert lam == (-(p.mu + p.gamma), p.alpha * (1 - p.theta) - (p.beta1 + p.beta2 + p.mu),
                       -(p.beta3 + p.mu))


def test_threshold_arithmetic_santos():
    p = presets.get("santos").params
    r0 = 0.775985 * (1 - 0.415355) / (0.2 + 0.2 + 0.000027)
    assert omega_threshold(p) == pytest.approx((r0 - 1) * (0.1 + 0.000027), rel=1e-14)
    assert omega_threshold(p) == pytest.approx(0.0134, abs=5e-5)


def test_closed_form_char_poly_matches_jacobian():
    rng = np.random.default_rng(26)
    for _ in range(300):
        p = Params(**endemic_params(rng, vaccine=False))
        J = jacobian(p, endemic_point(p)[0])
        np.testing.assert_allclose(char_poly_endemic(p), char_poly(J), rtol=1e-10)
        np.testing.assert_allclose(char_poly(J), np.poly(J)[1:], rtol=1e-9)


def test_char_poly_endemic_requires_positive_phi():
    p = presets.get("santos").params.with_(theta=0.9)
    with pytest.raises(UndefinedEquilibrium):
        char_poly_endemic(p)


def test_factored_b1_identity():
    rng = np.random.default_rng(27)
    for _ in range(300):
        p = Params(**endemic_params(rng, vaccine=False))
        direct = routh_hurwitz_b1(*char_poly_endemic(p))
        assert routh_b1_factored(p) == pytest.approx(direct, rel=1e-9)
        assert direct > 0


def test_b1_needs_nonzero_a1():
    with pytest.raises(ZeroDivisionError):
        routh_hurwitz_b1(0.0, 1.0, 1.0)


def test_hurwitz():
    assert hurwitz_stable(*np.poly([-1, -2, -3])[1:])
    assert not hurwitz_stable(*np.poly([1, -2, -3])[1:])
    assert not hurwitz_stable(*np.poly([1j, -1j, -3])[1:])


def _match(ours, ref):
    ref = sorted(ref, key=lambda z: (z.real, z.imag))
    scale = max(1.0, max(abs(z) for z in ref))
    return max(abs(a - b) for a, b in zip(ours, ref)) / scale


def test_cubic_roots_against_numpy():
    rng = np.random.default_rng(28)
    worst = 0.0
    for _ in range(3000):
        roots = rng.normal(size=3) * 10 ** rng.uniform(-3, 1)
        if rng.random() < 0.5:
            roots = [roots[0], complex(roots[1], abs(roots[2])), complex(roots[1], -abs(roots[2]))]
        coeffs = np.real(np.poly(roots))
        worst = max(worst, _match(cubic_roots(*coeffs[1:]), np.roots(coeffs)))
    assert worst < 1e-7


def test_cubic_roots_special_cases():
    assert cubic_roots(0.0, 0.0, 0.0) == [0j, 0j, 0j]
    r = cubic_roots(*np.poly([-1.0, -1.0, -1.0])[1:])
    assert all(abs(z + 1) < 1e-5 for z in r)
    r = cubic_roots(*np.poly([-2.0, 1.0, 1.0])[1:])
    assert r[0] == pytest.approx(-2.0) and r[2] == pytest.approx(1.0, abs=1e-6)
    r = cubic_roots(0.0, 1.0, 0.0)          # lambda (lambda^2 + 1)
    assert _match(r, [-1j, 0j, 1j]) < 1e-14


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=9, max_size=9))
def test_eigenvalues_of_random_matrices(entries):
    J = np.array(entries).reshape(3, 3)
    ref = np.linalg.eigvals(J)
    # near-double roots are only determined to about sqrt(machine eps)
    assert _match(eigenvalues(J), ref) < 1e-5


def test_classify_santos_split():
    p = presets.get("santos").params
    df, en = classify(p.with_(omega=0.1))
    assert df.stable and not en.exists and en.psi < 0
    df, en = classify(p.with_(omega=0.01))
    assert not df.stable and en.exists and en.stable
    assert math.isclose(df.r0, 1.1341, abs_tol=5e-5)


def test_classify_campinas_threshold():
    p = presets.get("campinas").params
    thr = omega_threshold(p)
    assert thr == pytest.approx(0.00523, abs=1e-5)
    assert classify(p.with_(omega=0.005))[1].exists
    assert not classify(p.with_(omega=0.01))[1].exists


def test_classify_subcritical_r0():
    p = Params(1e-4, 0.05, 0.3, 0.2, 0.2, 0.2, 0.05)
    df, en = classify(p)
    assert df.r0 < 1 and df.stable and not en.exists


def test_classify_stability_agrees_with_numerical_eigenvalues():
    rng = np.random.default_rng(29)
    for _ in range(300):
        p = Params(**random_params(rng))
        df, en = classify(p)
        num_df = np.linalg.eigvals(jacobian(p, df.point)).real.max() < 0
        assert df.stable == num_df
        if en.exists:
            num_en = np.linalg.eigvals(jacobian(p, en.point)).real.max() < 0
            assert en.stable == num_en
            assert fixed_point_residual(p, en.point) < 1e-12
        assert df.stable != en.exists


def test_boundary_case():
    p = presets.get("santos").params
    p = p.with_(omega=omega_threshold(p))
    df, en = classify(p)
    assert not df.stable and en.exists and en.notes
    np.testing.assert_allclose(en.point, df.point, atol=1e-12)


def test_report_json_fields():
    df, en = classify(presets.get("santos").params.with_(omega=0.01))
    for rep in (df, en):
        doc = json.loads(json.dumps(rep.to_dict()))
        assert set(doc) >= {"kind", "point", "exists", "eigenvalues", "stable", "r0", "psi",
                            "omega_threshold", "routh_b1"}
    doc = classify(presets.get("santos").params.with_(theta=1.0))[1].to_dict()
    assert doc["point"]["s"] is None
