import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptbox.continuum import ContinuumPotential, find_real_spectrum
from ptbox.correspondence import (
    CorrespondenceMap,
    continuum_to_lattice_pair,
    continuum_to_lattice_step,
    correspondence_report,
    discretization_oracle,
    impurity_site_for_p,
    lattice_to_continuum_pair,
    lattice_to_continuum_step,
    oracle_verdict,
    richardson,
)
from ptbox.errors import InvalidModel
from ptbox.numerics import fit_power_law

EMPTY = (np.pi * np.arange(1, 7) / 2) ** 2


# --- literal conversions -------------------------------------------------------------------------


def test_step_conversion_examples():
    assert lattice_to_continuum_step(4.48e-4, 100) == pytest.approx(4.48)
    assert lattice_to_continuum_step(0.0, 40) == 0.0
    assert lattice_to_continuum_step(1e-2, 10) == pytest.approx(1.0)


def test_pair_conversion_examples():
    assert lattice_to_continuum_pair(0.0506, 100) == pytest.approx(5.06)
    assert lattice_to_continuum_pair(0.0, 7) == 0.0
    assert lattice_to_continuum_pair(1.0, 3) == 3.0


def test_conversion_errors():
    with pytest.raises(InvalidModel):
        lattice_to_continuum_step(1e-3, 11)
    with pytest.raises(InvalidModel):
        continuum_to_lattice_step(1.0, 1)
    with pytest.raises(InvalidModel):
        lattice_to_continuum_pair(1.0, 1)


@given(st.floats(-50, 50).filter(lambda x: x == 0 or abs(x) > 1e-250), st.integers(1, 5000))
def test_round_trips(x, half):
    N = 2 * half
    assert lattice_to_continuum_step(continuum_to_lattice_step(x, N), N) == pytest.approx(x, rel=1e-15, abs=0)
    assert lattice_to_continuum_pair(continuum_to_lattice_pair(x, N), N) == pytest.approx(x, rel=1e-15, abs=0)


# --- impurity placement -------------------------------------------------------------------------


def test_impurity_site_examples():
    assert impurity_site_for_p(0.5, 100) == (25, False)
    assert impurity_site_for_p(1 - 1e-9, 100) == (1, True)
    assert impurity_site_for_p(1e-9, 100) == (50, False)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2])
def test_impurity_site_domain(p):
    with pytest.raises(ValueError):
        impurity_site_for_p(p, 100)


@given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 2000))
def test_impurity_site_in_range(p, half):
    N = 2 * half
    j0, _ = impurity_site_for_p(p, N)
    assert 1 <= j0 <= N // 2


# --- map ----------------------------------------------------------------------------------------


def test_map_units():
    m = CorrespondenceMap(99)
    assert m.a_L == pytest.approx(0.02)
    assert m.t0 * m.a_L**2 == pytest.approx(1.0)
    assert m.site_position(0) == pytest.approx(-1.0)
    assert m.site_position(100) == pytest.approx(1.0)


def test_map_rejects_small_and_odd():
    with pytest.raises(InvalidModel):
        CorrespondenceMap(1)
    with pytest.raises(InvalidModel):
        CorrespondenceMap(11).model(ContinuumPotential(1.0, 0.0, 0.5))


def test_map_model_terms():
    m = CorrespondenceMap(100)
    model = m.model(ContinuumPotential(2.0, 3.0, 0.5))
    assert model.t0 == pytest.approx(m.t0)
    step, pair = model.potential
    assert step.Gamma == 2.0
    assert pair.gamma == pytest.approx(3.0 / m.a_L)
    assert pair.j0 == 25


# --- oracle -------------------------------------------------------------------------------------


def test_empty_box_oracle():
    E = discretization_oracle(ContinuumPotential(0, 0, 0.5), 2000, 6)
    assert np.allclose(E.imag, 0, atol=1e-8)
    assert np.all(np.abs(E.real - EMPTY) / EMPTY <= 2e-3)


def test_dense_and_sparse_paths_agree():
    from ptbox.lattice import build_hamiltonian

    pot = ContinuumPotential(1.0, 1.0, 0.4)
    # above 400 sites the oracle switches to shift-invert
    m = CorrespondenceMap(402)
    lam = np.linalg.eigvals(build_hamiltonian(m.model(pot)))
    dense = np.sort_complex(m.to_continuum_energy(lam))[:6]
    assert np.allclose(discretization_oracle(pot, 402, 6), dense, rtol=1e-10)


def test_oracle_convergence_order():
    pts = []
    for N in (250, 500, 1000, 2000):
        E = discretization_oracle(ContinuumPotential(0, 0, 0.5), N, 6).real
        pts.append((N, float(np.abs(E - EMPTY).max())))
    assert fit_power_law(pts).exponent == pytest.approx(-2.0, abs=0.1)


def test_oracle_verdicts():
    assert oracle_verdict(ContinuumPotential(4.0, 0.0, 0.5), 2000)
    assert not oracle_verdict(ContinuumPotential(5.0, 0.0, 0.5), 2000)
    assert not oracle_verdict(ContinuumPotential(0.0, 6.0, 0.5), 2000)


def test_richardson_removes_quadratic_error():
    E = 3.0
    f = lambda N: E + 7.0 / (N + 1) ** 2  # noqa: E731
    assert richardson(100, f(100), 200, f(200)) == pytest.approx(E, abs=1e-12)


def test_report_matches_continuum():
    pot = ContinuumPotential(2.0, 1.0, 0.5)
    rep = correspondence_report(pot)
    assert rep["N_list"] == [2000, 4000]
    assert len(rep["rel_errors"]) == 6
    assert rep["max_rel_error"] <= 1e-3
    assert all(rep["verdicts"].values())
    ref = find_real_spectrum(pot, 4.0).energies[:6]
    assert np.allclose(rep["continuum_levels"], ref)


def test_report_needs_two_sizes():
    with pytest.raises(ValueError):
        correspondence_report(ContinuumPotential(), (1000, 2000, 4000))


def test_relation_factor_between_conventions():
    # the box-unit site count (N+1)/2 per half-width reproduces the continuum threshold; N alone overshoots by 4
    from ptbox.lattice import gamma_threshold

    N = 200
    g = gamma_threshold(N, "step", 1e-6)
    assert ((N + 1) / 2) ** 2 * g == pytest.approx(4.475, rel=3e-3)
    assert lattice_to_continuum_step(g, N) / 4.475 == pytest.approx(4 * N**2 / (N + 1) ** 2, rel=3e-3)
    assert not math.isclose(lattice_to_continuum_step(g, N), 4.48, rel_tol=0.05)


@pytest.mark.parametrize(
    "Z, xi, p",
    [(2.0, 1.0, 0.5), (0.0, 6.0, 0.5), (5.0, 0.0, 0.3), (-3.0, 1.5, 0.75), (-1.0, 2.0, 0.25), (0.0, 4.0, 0.25)],
)
def test_verdicts_agree_away_from_boundaries(Z, xi, p):
    from ptbox.phase import is_unbroken

    pot = ContinuumPotential(Z, xi, p)
    verdict = is_unbroken(pot)
    # both neighbours 0.2 away in each strength carry the same verdict
    for dz, dx in ((0.2, 0), (-0.2, 0), (0, 0.2), (0, -0.2)):
        assert is_unbroken(pot.with_(Z=Z + dz, xi=xi + dx)) == verdict
    assert oracle_verdict(pot, 2000) == verdict
