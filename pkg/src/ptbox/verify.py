"""Invariant suite behind ``ptbox verify``: each check returns (passed, detail)."""

from __future__ import annotations

import math
import time
from contextlib import contextmanager

import numpy as np

from . import continuum
from .continuum import (
    ContinuumPotential,
    Wavevector,
    char_residual,
    eigenfunction,
    find_real_spectrum,
    verify_eigenfunction,
)
from .errors import PTBoxError
from .lattice import (
    DEFAULT_EPS,
    Kind,
    LatticeModel,
    Pair,
    Step,
    brute_force_eigenvalues,
    build_hamiltonian,
    eigenvalues,
    gamma_threshold,
    is_pt_unbroken_lattice,
)

SEED = 20240607


@contextmanager
def sign_flip(active: bool):
    """Temporarily flip the sign of the second bracket of the characteristic function."""
    old = continuum._SECOND_BRACKET_SIGN
    continuum._SECOND_BRACKET_SIGN = -1.0 if active else old
    try:
        yield
    finally:
        continuum._SECOND_BRACKET_SIGN = old


def check_property_i(rng):
    worst = 0.0
    for _ in range(300):
        a = rng.uniform(1e-3, 10.0)
        pot = ContinuumPotential(0.0, rng.uniform(-10, 10), rng.uniform(0.0, 1.0))
        worst = max(worst, abs(char_residual(Wavevector(a, 0.0), pot).imag))
    return worst <= 1e-14, f"max |Im G| at Z=0: {worst:.3g}"


def check_property_ii(rng):
    worst = 0.0
    for _ in range(200):
        k = complex(rng.uniform(0.1, 10.0), rng.uniform(-2.0, 2.0))
        p = float(rng.integers(0, 2))
        x1, x2 = rng.uniform(-10, 10, size=2)
        g1 = char_residual(k, ContinuumPotential(0.0, x1, p), normalize=False)
        g2 = char_residual(k, ContinuumPotential(0.0, x2, p), normalize=False)
        worst = max(worst, abs(g1 - g2) / max(1.0, abs(g1)))
    return worst <= 1e-12, f"max xi-variation of the unnormalised residual at p in {{0,1}}: {worst:.3g}"


def check_property_iii(rng):
    worst = 0.0
    for Z in (0.7, 2.5, 4.0):
        p = float(rng.uniform(0.05, 0.95))
        e1 = find_real_spectrum(ContinuumPotential(Z, 0.0, p), 4.0, warn=False).energies
        e2 = find_real_spectrum(ContinuumPotential(-Z, 0.0, p), 4.0, warn=False).energies
        if len(e1) != len(e2):
            return False, f"level counts differ at Z={Z}: {len(e1)} vs {len(e2)}"
        worst = max(worst, float(np.abs(e1 - e2).max()))
    return worst <= 1e-8, f"max |E(Z) - E(-Z)| at xi=0: {worst:.3g}"


def check_property_iv(rng):
    from .phase import z_boundaries

    tol = 1e-3
    worst = 0.0
    for xi, p in ((1.0, 0.75), (2.0, 0.3)):
        zm, zp, _, _ = z_boundaries(xi, p, tol, label=False)
        zm2, zp2, _, _ = z_boundaries(-xi, p, tol, label=False)
        worst = max(worst, abs(zp + zm2), abs(zm + zp2))
    return worst <= 2 * tol, f"max |Zc+(xi) + Zc-(-xi)|: {worst:.3g}"


def check_empty_box(rng):
    for amax in (3.0, 5.2, 10.0):
        spec = find_real_spectrum(ContinuumPotential(0.0, 0.0, 0.5), amax, warn=False)
        n = int(math.floor(2 * amax))
        want = np.arange(1, n + 1) / 2
        if len(spec) != n or np.abs(spec.alphas - want).max() > 1e-10:
            return False, f"alpha_max={amax}: {len(spec)} levels, expected {n}"
    return True, "levels at alpha = n/2, none missing or spurious"


def check_eigenfunctions(rng):
    worst = 0.0
    count = 0
    for pot in (ContinuumPotential(0.0, 2.0, 0.5), ContinuumPotential(2.0, 1.0, 0.5),
                ContinuumPotential(1.0, 3.0, 0.3), ContinuumPotential(-3.0, 1.5, 0.8)):
        spec = find_real_spectrum(pot, 3.0, warn=False)
        if len(spec) == 0:
            return False, f"no real levels at {pot}"
        for w in spec.levels:
            try:
                rep = verify_eigenfunction(eigenfunction(w, pot))
            except PTBoxError as exc:
                return False, f"{type(exc).__name__} at alpha={w.alpha:.6g} for {pot}"
            worst = max(worst, rep.max())
            count += 1
    return worst <= 1e-6, f"max residual over {count} eigenfunctions: {worst:.3g}"


def _models(rng):
    out = []
    for N in (6, 21, 50):
        out.append(LatticeModel(N, 1.0, Pair(float(rng.uniform(0, 1.5)), int(rng.integers(1, N // 2 + 1)))))
    for N in (6, 50):
        out.append(LatticeModel(N, 1.0, Step(float(rng.uniform(0, 0.01)))))
    out.append(LatticeModel(40, 1.0, (Step(0.004), Pair(0.3, 7))))
    return out


def check_lattice_symmetry(rng):
    worst = 0.0
    for m in _models(rng):
        lam = eigenvalues(build_hamiltonian(m)).eigenvalues
        d_conj = np.abs(lam[:, None] - np.conj(lam)[None, :]).min(axis=1).max()
        d_chiral = np.abs(lam[:, None] + np.conj(lam)[None, :]).min(axis=1).max()
        d_trace = abs(lam.sum()) / m.N
        worst = max(worst, d_conj, d_chiral, d_trace / 1e-2)
    return worst <= 1e-8, f"max closure defect (conjugate, chiral, trace): {worst:.3g}"


def check_hermitian_limit(rng):
    N = 50
    lam = eigenvalues(build_hamiltonian(LatticeModel(N, 1.0, Pair(0.0, 3)))).eigenvalues
    ref = -2 * np.cos(np.pi * np.arange(1, N + 1) / (N + 1))
    err = float(np.abs(lam - np.sort(ref)).max())
    return err <= 1e-10, f"max deviation from -2 t0 cos(pi k/(N+1)): {err:.3g}"


def check_brute_force(rng):
    worst = 0.0
    for N in range(2, 7):
        terms = [Pair(float(rng.uniform(0, 2)), int(rng.integers(1, N // 2 + 1)))]
        if N % 2 == 0:
            terms.append(Step(float(rng.uniform(0, 1))))
        m = LatticeModel(N, 1.0, tuple(terms))
        a = eigenvalues(build_hamiltonian(m)).eigenvalues
        b = brute_force_eigenvalues(m)
        worst = max(worst, float(np.abs(a[:, None] - b[None, :]).min(axis=1).max()))
    return worst <= 1e-8, f"max deviation from recurrence roots, N <= 6: {worst:.3g}"


def check_exact_thresholds(rng):
    g2 = gamma_threshold(2, Kind("pair", j0=1), 1e-9)
    g3 = gamma_threshold(3, Kind("pair", j0=1), 1e-9)
    err = max(abs(g2 - 1.0), abs(g3 - math.sqrt(2)))
    return err <= 1e-6, f"gamma_c(N=2)={g2:.9f}, gamma_c(N=3)={g3:.9f}"


def check_oracle(rng):
    from .correspondence import correspondence_report

    rep = correspondence_report(ContinuumPotential(2.0, 1.0, 0.5), (2000, 4000), 6)
    err = rep["max_rel_error"]
    ok = err <= 1e-3 and len(rep["rel_errors"]) == 6
    return ok, f"max relative deviation after Richardson extrapolation: {err:.3g}"


def check_threshold_brackets(rng, eps=DEFAULT_EPS):
    from .phase import is_unbroken, xi_threshold

    tol = 1e-3
    r = xi_threshold(0.5, tol, label=False)
    if not (is_unbroken(ContinuumPotential(0.0, r.strength_c - tol, 0.5))
            and not is_unbroken(ContinuumPotential(0.0, r.strength_c + tol, 0.5))):
        return False, f"continuum bracket around xi_c={r.strength_c:.6g} not verified"
    kind = Kind("step")
    rtol = 1e-4
    g = gamma_threshold(40, kind, rtol, eps=eps)
    lo_ok = is_pt_unbroken_lattice(kind.model(40, g * (1 - rtol)), eps)
    hi_ok = not is_pt_unbroken_lattice(kind.model(40, g * (1 + rtol)), eps)
    if not (lo_ok and hi_ok):
        return False, f"lattice bracket around Gamma_c={g:.6g} not verified"
    return True, f"xi_c(0.5)={r.strength_c:.6g}, Gamma_c(N=40)={g:.6g}"


CHECKS = [
    ("property (i)", check_property_i),
    ("property (ii)", check_property_ii),
    ("property (iii)", check_property_iii),
    ("property (iv)", check_property_iv),
    ("empty-box completeness", check_empty_box),
    ("eigenfunction residuals", check_eigenfunctions),
    ("lattice spectral symmetry", check_lattice_symmetry),
    ("hermitian limit", check_hermitian_limit),
    ("small-N brute force", check_brute_force),
    ("exact small-N thresholds", check_exact_thresholds),
    ("oracle agreement", check_oracle),
    ("threshold bracket", check_threshold_brackets),
]


def run_suite(eps: float = DEFAULT_EPS, inject_sign_flip: bool = False) -> dict:
    """Run every check in order; the report names the first failure."""
    rng = np.random.default_rng(SEED)
    results = []
    with sign_flip(inject_sign_flip):
        for name, fn in CHECKS:
            t = time.perf_counter()
            try:
                ok, detail = fn(rng, eps) if fn is check_threshold_brackets else fn(rng)
            except (PTBoxError, ValueError, ArithmeticError) as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            results.append({"name": name, "passed": bool(ok), "detail": detail,
                            "seconds": round(time.perf_counter() - t, 3)})
    first = next((r["name"] for r in results if not r["passed"]), None)
    return {"checks": results, "first_failure": first, "eps": eps, "inject_sign_flip": inject_sign_flip}
