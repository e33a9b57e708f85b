import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import det6_root, eq4_residual, matching_det6
from ptbox.continuum import (
    ContinuumPotential,
    GridTooCoarse,
    Wavevector,
    alpha_for_energy,
    char_residual,
    constraint_beta,
    eigenfunction,
    find_real_spectrum,
    residual_on_constraint,
    secular,
    verify_eigenfunction,
)
from ptbox.errors import DomainError, SingularMatching

EMPTY_ENERGIES = [2.4674, 9.8696, 22.2066, 39.4784, 61.6850, 88.8264]


# --- constraint and residual --------------------------------------------------------------------


def test_constraint_beta_examples():
    assert constraint_beta(1, 0) == 0
    assert constraint_beta(1, -2 * math.pi) == pytest.approx(1.0)
    assert constraint_beta(0.5, 4.48) == pytest.approx(-4.48 / math.pi, abs=1e-14)
    assert constraint_beta(0.5, 4.48) == pytest.approx(-1.42603, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_constraint_beta_domain(alpha):
    with pytest.raises(DomainError):
        constraint_beta(alpha, 1.0)
    with pytest.raises(DomainError):
        residual_on_constraint(alpha, ContinuumPotential())


def test_wavevector_energy():
    w = Wavevector(0.7, -0.3)
    assert w.energy() == pytest.approx((0.7 * math.pi) ** 2 - 0.09)
    assert w.k == complex(0.7 * math.pi, -0.3)


def test_potential_validation():
    with pytest.raises(DomainError):
        ContinuumPotential(math.nan, 0, 0.5)
    with pytest.raises(DomainError):
        ContinuumPotential(0, 0, 1.5)
    with pytest.raises(DomainError):
        find_real_spectrum(ContinuumPotential(0, 1, 0.995), 2.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_char_residual_empty_box_zeros(alpha):
    g = char_residual(Wavevector(alpha, 0.0), ContinuumPotential(0, 0, 0.5))
    assert abs(g) < 1e-14


def test_char_residual_matches_mpmath_at_quarter_wave():
    pot = ContinuumPotential(0, 2, 0.3)
    g = char_residual(Wavevector(0.5, 0.0), pot)
    assert g.imag == 0.0
    ref = eq4_residual(0.5, 0.0, 2, 0.3)
    assert g.real == pytest.approx(ref.real, abs=1e-14)


def test_residual_nonzero_away_from_roots():
    g = residual_on_constraint(0.5, ContinuumPotential(0, 5.06, 0.5))
    assert abs(g) > 1e-3


def test_residual_on_constraint_high_precision():
    pot = ContinuumPotential(1, 1, 0.5)
    g = residual_on_constraint(0.7, pot)
    ref = eq4_residual(0.7, constraint_beta(0.7, 1.0), 1, 0.5)
    assert abs(g - ref) <= 1e-12


@given(st.floats(0.05, 10), st.floats(-3, 3), st.floats(-10, 10), st.floats(0.0, 1.0))
def test_char_residual_agrees_with_mpmath(alpha, beta, xi, p):
    g = char_residual(Wavevector(alpha, beta), ContinuumPotential(0, xi, p))
    ref = eq4_residual(alpha, beta, xi, p)
    assert abs(g - ref) <= 1e-11 * max(1.0, abs(ref)) * math.exp(2 * abs(beta))


def test_scaled_residual_survives_large_beta():
    pot = ContinuumPotential(0, 1, 0.5)
    with pytest.raises(DomainError):
        char_residual(complex(1.0, 400.0), pot)
    g = char_residual(complex(1.0, 400.0), pot, scaled=True)
    assert math.isfinite(g.real) and math.isfinite(g.imag)


@given(st.floats(1e-3, 10), st.floats(-10, 10), st.floats(0.0, 1.0))
def test_property_i_imaginary_part_vanishes_at_zero_step(alpha, xi, p):
    g = char_residual(Wavevector(alpha, 0.0), ContinuumPotential(0, xi, p))
    assert abs(g.imag) <= 1e-14


@given(
    st.floats(0.1, 10), st.floats(-2, 2), st.floats(-10, 10), st.floats(-10, 10), st.sampled_from([0.0, 1.0])
)
def test_property_ii_xi_drops_out_at_endpoints(kr, ki, xi1, xi2, p):
    k = complex(kr, ki)
    g1 = char_residual(k, ContinuumPotential(0, xi1, p), normalize=False)
    g2 = char_residual(k, ContinuumPotential(0, xi2, p), normalize=False)
    assert abs(g1 - g2) <= 1e-12 * max(1.0, abs(g1))


@settings(max_examples=15)
@given(st.floats(0.1, 5.0), st.floats(0.02, 0.98))
def test_property_iii_spectrum_even_in_Z(Z, p):
    e1 = find_real_spectrum(ContinuumPotential(Z, 0, p), 4.0, warn=False).energies
    e2 = find_real_spectrum(ContinuumPotential(-Z, 0, p), 4.0, warn=False).energies
    assert len(e1) == len(e2)
    assert np.abs(e1 - e2).max() <= 1e-8


def test_secular_is_real_combination():
    a = np.linspace(0.1, 3, 50)
    pot = ContinuumPotential(1.5, 2.0, 0.3)
    v = secular(a, pot)
    g = np.array([residual_on_constraint(x, pot, scaled=True) for x in a])
    assert np.allclose(v, g.real - g.imag, atol=1e-14)


# --- real spectrum ------------------------------------------------------------------------------


def test_empty_box_spectrum():
    spec = find_real_spectrum(ContinuumPotential(0, 0, 0.5), 3.0)
    assert np.allclose(spec.alphas, [0.5, 1.0, 1.5, 2.0, 2.5, 3.0], atol=1e-12)
    assert np.allclose(spec.energies, EMPTY_ENERGIES, atol=1e-4)
    assert np.all(spec.residuals <= 1e-8)


@settings(max_examples=20)
@given(st.floats(0.6, 12.0), st.floats(0.01, 0.99))
def test_zero_potential_completeness(alpha_max, p):
    spec = find_real_spectrum(ContinuumPotential(0, 0, p), alpha_max)
    n = int(math.floor(2 * alpha_max + 1e-12))
    assert len(spec) == n
    assert np.allclose(spec.alphas, np.arange(1, n + 1) / 2, atol=1e-10)


def test_broken_impurity_loses_lowest_pair():
    spec = find_real_spectrum(ContinuumPotential(0, 6, 0.5), 2.0)
    full = find_real_spectrum(ContinuumPotential(0, 0, 0.5), 2.0)
    assert len(spec) == len(full) - 2
    # levels 1 and 3 merge across the xi-independent level at alpha = 1
    assert spec.energies[0] == pytest.approx(math.pi**2, abs=1e-9)


def test_roots_match_independent_six_by_six_determinant():
    pot = ContinuumPotential(2, 1, 0.5)
    spec = find_real_spectrum(pot, 3.0)
    assert len(spec) == 6
    for a in spec.alphas:
        assert det6_root(a, 2, 1, 0.5) == pytest.approx(a, abs=1e-11)


@settings(max_examples=10)
@given(st.floats(-4, 4), st.floats(-3, 3), st.floats(0.1, 0.9))
def test_secular_sign_tracks_determinant(Z, xi, p):
    # the 6x6 determinant on the constraint curve is real and proportional to the secular function
    a = np.array([0.37, 0.81, 1.33, 2.07])
    v = secular(a, ContinuumPotential(Z, xi, p))
    d = [complex(matching_det6(x, Z, xi, p)) for x in a]
    ratios = [dd.real / vv for dd, vv in zip(d, v) if abs(vv) > 1e-6]
    for dd in d:
        assert abs(dd.imag) <= 1e-20 + 1e-12 * abs(dd)
    signs = {np.sign(r * math.exp(-2 * abs(Z) / (2 * math.pi * x))) for r, x in zip(ratios, a)}
    assert len(signs) <= 1


def test_grid_too_coarse_warning_near_merge():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        spec = find_real_spectrum(ContinuumPotential(0, 2.6846, 0.25), 2.0)
    assert any(issubclass(w.category, GridTooCoarse) for w in rec)
    assert len(spec) == 4


def test_alpha_for_energy_inverts_energy():
    for Z in (0.0, 3.0, -7.0):
        for E in (-3.0, 1.0, 50.0):
            if Z == 0 and E < 0:
                with pytest.raises(DomainError):
                    alpha_for_energy(E, Z)
                continue
            a = alpha_for_energy(E, Z)
            assert Wavevector(a, constraint_beta(a, Z)).energy() == pytest.approx(E, abs=1e-10)


# --- eigenfunctions -----------------------------------------------------------------------------


def test_ground_state_is_cosine():
    ef = eigenfunction(Wavevector(0.5, 0.0), ContinuumPotential(0, 0, 0.5))
    x = np.linspace(-1, 1, 101)
    assert np.allclose(ef.psi(x), np.cos(np.pi * x / 2), atol=1e-12)
    assert ef.A == pytest.approx(ef.F, abs=1e-12)
    assert verify_eigenfunction(ef).max() <= 1e-12


def test_first_excited_state_is_sine():
    ef = eigenfunction(Wavevector(1.0, 0.0), ContinuumPotential(0, 0, 0.5))
    x = np.linspace(-1, 1, 101)
    psi = ef.psi(x)
    assert np.allclose(psi / psi[75] * np.sin(np.pi * x[75]), np.sin(np.pi * x), atol=1e-12)
    assert verify_eigenfunction(ef).max() <= 1e-12


def test_impurity_ground_state_verifies():
    pot = ContinuumPotential(0, 2, 0.5)
    w = find_real_spectrum(pot, 2.0).levels[0]
    rep = verify_eigenfunction(eigenfunction(w, pot))
    assert rep.max() <= 1e-8
    assert set(rep.as_dict()) == {"max_ode_residual", "bc_residual", "jump_residual", "continuity_residual"}


def test_perturbed_wavevector_fails_verification():
    pot = ContinuumPotential(0, 2, 0.5)
    w = find_real_spectrum(pot, 2.0).levels[0]
    bad = Wavevector(w.alpha + 0.01, 0.0)
    try:
        rep = verify_eigenfunction(eigenfunction(bad, pot))
    except SingularMatching:
        return
    assert rep.jump_residual > 1e-3 or rep.bc_residual > 1e-3


def test_non_root_is_singular_matching():
    with pytest.raises(SingularMatching):
        eigenfunction(Wavevector(0.77, 0.0), ContinuumPotential(0, 0, 0.5))


def test_verify_needs_enough_samples():
    ef = eigenfunction(Wavevector(0.5, 0.0), ContinuumPotential(0, 0, 0.5))
    with pytest.raises(ValueError):
        verify_eigenfunction(ef, n_samples=8)


@settings(max_examples=12)
@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0.05, 0.95))
def test_every_accepted_root_reconstructs(Z, xi, p):
    pot = ContinuumPotential(Z, xi, p)
    spec = find_real_spectrum(pot, 3.0, warn=False)
    for w in spec.levels:
        ef = eigenfunction(w, pot)
        assert verify_eigenfunction(ef).max() <= 1e-6
