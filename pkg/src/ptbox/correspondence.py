"""Lattice/continuum unit conversion and the finite-difference oracle for continuum spectra.

The box |x| <= 1 is discretised with walls on virtual sites 0 and N + 1, so
a_L = 2 / (N + 1), t0 = 1 / a_L**2 and the step potential keeps its strength:
Gamma = Z. The delta impurity of strength xi becomes a single-site potential
gamma = xi / a_L. Continuum energies are lattice energies shifted by 2 t0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .continuum import ContinuumPotential, find_real_spectrum
from .errors import InvalidModel
from .lattice import DEFAULT_EPS, LatticeModel, Pair, Step, build_hamiltonian, eigenvalues

DENSE_MAX_N = 400
DEFAULT_LEVELS = 12


def lattice_to_continuum_step(Gamma_over_t0: float, N: int) -> float:
    """Z = N**2 * Gamma / t0, the N**2 continuum-limit relation for the step; the box-unit map is CorrespondenceMap."""
    if N < 2 or N % 2:
        raise InvalidModel(f"step potential needs even N >= 2, got {N}")
    return N * N * Gamma_over_t0


def continuum_to_lattice_step(Z: float, N: int) -> float:
    if N < 2 or N % 2:
        raise InvalidModel(f"step potential needs even N >= 2, got {N}")
    return Z / (N * N)


def lattice_to_continuum_pair(gamma_over_t0: float, N: int) -> float:
    """xi = N * gamma / t0, the N continuum-limit relation for the impurity pair."""
    if N < 2:
        raise InvalidModel(f"N must be >= 2, got {N}")
    return N * gamma_over_t0


def continuum_to_lattice_pair(xi: float, N: int) -> float:
    if N < 2:
        raise InvalidModel(f"N must be >= 2, got {N}")
    return xi / N


def impurity_site_for_p(p: float, N: int) -> tuple[int, bool]:
    """Loss site j0 = round((1 - p) N / 2), clamped to [1, N // 2]; also reports whether it was clamped."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    j = int(math.floor((1 - p) * N / 2 + 0.5))
    j_c = min(max(j, 1), N // 2)
    return j_c, j_c != j


@dataclass(frozen=True)
class CorrespondenceMap:
    """Discretisation of the unit box on N interior sites."""

    N: int
    L: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise InvalidModel(f"N must be >= 2, got {self.N}")

    @property
    def a_L(self) -> float:
        return 2 * self.L / (self.N + 1)

    @property
    def t0(self) -> float:
        return 1.0 / self.a_L**2

    def site_position(self, j) -> np.ndarray:
        return -self.L + np.asarray(j) * self.a_L

    def model(self, pot: ContinuumPotential) -> LatticeModel:
        if self.N % 2:
            raise InvalidModel(f"oracle needs even N, got {self.N}")
        terms = []
        if pot.Z != 0:
            terms.append(Step(pot.Z))
        if pot.xi != 0:
            j0, _ = impurity_site_for_p(pot.p, self.N)
            terms.append(Pair(pot.xi / self.a_L, j0))
        return LatticeModel(self.N, self.t0, tuple(terms))

    def to_continuum_energy(self, lam):
        return np.asarray(lam) + 2 * self.t0


def discretization_oracle(pot: ContinuumPotential, N: int, n_levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Lowest ``n_levels`` continuum energies (complex, ordered by real part) of the N-site chain."""
    cmap = CorrespondenceMap(N)
    model = cmap.model(pot)
    n_levels = min(n_levels, N)
    if N <= DENSE_MAX_N or n_levels >= N - 2:
        lam = eigenvalues(build_hamiltonian(model), certify=False).eigenvalues
    else:
        H = sp.diags(
            [model.onsite(), -model.t0 * np.ones(N - 1), -model.t0 * np.ones(N - 1)],
            [0, 1, -1],
            format="csc",
        )
        # shift-invert about the band bottom picks out the low-lying levels
        lam = spla.eigs(H, k=n_levels + 2, sigma=-2 * model.t0, which="LM", return_eigenvectors=False)
    E = cmap.to_continuum_energy(lam)
    E = E[np.lexsort((E.imag, E.real))]
    return E[:n_levels]


def oracle_verdict(pot: ContinuumPotential, N: int, eps: float = DEFAULT_EPS, n_levels: int = 40) -> bool:
    """Unbroken iff max |Im E| over the low-lying levels is at most eps * t0."""
    E = discretization_oracle(pot, N, n_levels)
    return float(np.abs(E.imag).max()) <= eps * CorrespondenceMap(N).t0


def richardson(N1: int, E1, N2: int, E2) -> np.ndarray:
    """Two-point extrapolation assuming an error proportional to a_L**2."""
    w1 = (N1 + 1) ** 2
    w2 = (N2 + 1) ** 2
    return (w2 * np.asarray(E2) - w1 * np.asarray(E1)) / (w2 - w1)


def correspondence_report(
    pot: ContinuumPotential,
    N_list=(2000, 4000),
    n_levels: int = 6,
    eps: float = DEFAULT_EPS,
) -> dict:
    """Continuum levels against the Richardson-extrapolated lattice levels, as a JSON-ready dict."""
    if len(N_list) != 2:
        raise ValueError("Richardson extrapolation uses exactly two lattice sizes")
    N1, N2 = sorted(int(n) for n in N_list)
    spec = find_real_spectrum(pot, alpha_max=math.sqrt(((n_levels + 1) * math.pi / 2) ** 2 + abs(pot.Z)) / math.pi,
                              warn=False)
    cont = spec.energies[:n_levels]
    o1 = discretization_oracle(pot, N1, n_levels)
    o2 = discretization_oracle(pot, N2, n_levels)
    m = min(len(cont), len(o1), len(o2))
    extr = richardson(N1, o1.real[:m], N2, o2.real[:m])
    rel = np.abs(extr - cont[:m]) / np.abs(cont[:m])
    verdicts = {str(n): bool(np.abs(o.imag).max() <= eps * CorrespondenceMap(n).t0) for n, o in ((N1, o1), (N2, o2))}
    return {
        "pot": {"Z": pot.Z, "xi": pot.xi, "p": pot.p},
        "N_list": [N1, N2],
        "continuum_levels": [float(x) for x in cont[:m]],
        "oracle_levels": {
            str(N1): [[float(z.real), float(z.imag)] for z in o1[:m]],
            str(N2): [[float(z.real), float(z.imag)] for z in o2[:m]],
            "extrapolated": [float(x) for x in extr],
        },
        "rel_errors": [float(x) for x in rel],
        "max_rel_error": float(rel.max()) if m else math.nan,
        "verdicts": verdicts,
    }
