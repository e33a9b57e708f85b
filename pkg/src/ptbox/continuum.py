"""Particle in a box |x| <= 1 with V(x) = iZ sign(x) + i xi [delta(x - p) - delta(x + p)].

Units: hbar^2/2m = 1 and half-width L = 1, so energies are in hbar^2/2mL^2,
Z in the same units and xi in hbar^2/2mL. A real eigenvalue E corresponds to
the wavevector k = pi*alpha + i*beta on the constraint curve 2*pi*alpha*beta = -Z,
with E = (pi*alpha)^2 - beta^2 and k^2 = E - iZ.

The characteristic function splits into a "real bracket" R (even in xi) and an
"imaginary bracket" xi*I (vanishes at Z = 0). `char_residual` returns the pair as
R + i*xi*I. On the constraint curve the 4x4 matching determinant equals
2*(R - xi*I) times the normalisation, so real levels are the sign changes of
the real function `secular` = R - xi*I.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, SingularMatching

DEFAULT_GRID_STEP = 0.005
DEFAULT_ACCEPT_TOL = 1e-8
ROOT_TOL = 1e-13
# accepted roots give s_min/s_max below 1e-12 for the equilibrated matching matrix
SINGULAR_RTOL = 1e-6
P_MIN, P_MAX = 0.01, 0.99

# test hook: -1 flips the sign of the second (imaginary) bracket
_SECOND_BRACKET_SIGN = 1.0


class GridTooCoarse(UserWarning):
    """Two accepted roots are closer than two grid steps."""


@dataclass(frozen=True)
class Wavevector:
    alpha: float
    beta: float

    @property
    def k(self) -> complex:
        return complex(math.pi * self.alpha, self.beta)

    def energy(self) -> float:
        return (math.pi * self.alpha) ** 2 - self.beta**2


@dataclass(frozen=True)
class ContinuumPotential:
    Z: float = 0.0
    xi: float = 0.0
    p: float = 0.5

    def __post_init__(self):
        for name in ("Z", "xi", "p"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        # p in {0, 1} is admitted only for limit evaluations of char_residual
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p!r}")

    def with_(self, **kw) -> "ContinuumPotential":
        return ContinuumPotential(**{"Z": self.Z, "xi": self.xi, "p": self.p, **kw})

    def V(self, x):
        """Smooth part of the potential, i*Z*sign(x)."""
        return 1j * self.Z * np.sign(x)


def _require_interior(pot: ContinuumPotential) -> None:
    if not P_MIN <= pot.p <= P_MAX:
        raise DomainError(f"p must lie in [{P_MIN}, {P_MAX}] for spectrum operations, got {pot.p!r}")


def constraint_beta(alpha: float, Z: float) -> float:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    return -Z / (2.0 * math.pi * alpha)


def _scaled_cos_sin(x, y):
    """cos and sin of x + iy, both multiplied by exp(-|y|)."""
    ep = np.exp(1j * x - y - np.abs(y))
    em = np.exp(-1j * x + y - np.abs(y))
    return 0.5 * (ep + em), -0.5j * (ep - em)


def _brackets(kr, ki, xi, p):
    """Scaled real and imaginary brackets.

    Returns ``(R, I, norm)`` where the true brackets are ``R * exp(2|ki|)`` and
    ``I * exp(2|ki|)``; ``norm`` is |k|^3 + xi^2 |k| + 1.
    """
    kr = np.asarray(kr, dtype=float)
    ki = np.asarray(ki, dtype=float)
    k = kr + 1j * ki
    ck, sk = _scaled_cos_sin(kr, ki)
    cp, sp = _scaled_cos_sin(p * kr, p * ki)
    cq, sq = _scaled_cos_sin((1 - p) * kr, (1 - p) * ki)
    ak2 = kr * kr + ki * ki
    # sin(u*) = conj(sin(u))
    x = ak2 * k * ck * np.conj(sk) + xi * xi * (sq * np.conj(sq)).real * k * cp * np.conj(sp)
    y = ak2 * sq * cp * np.conj(sk) - k * k * np.conj(sq) * np.conj(sp) * ck
    ak = np.sqrt(ak2)
    norm = ak2 * ak + xi * xi * ak + 1.0
    return x.real, _SECOND_BRACKET_SIGN * y.imag, norm


def char_residual(
    k: Wavevector | complex, pot: ContinuumPotential, *, scaled: bool = False, normalize: bool = True
) -> complex:
    """Normalised characteristic function ``R + i*xi*I`` at wavevector ``k``.

    With ``scaled=True`` the common factor exp(2|Im k|) is divided out, which
    keeps the value finite for large |Im k|. ``normalize=False`` skips the
    division by |k|^3 + xi^2 |k| + 1.
    """
    kk = k.k if isinstance(k, Wavevector) else complex(k)
    if not (math.isfinite(kk.real) and math.isfinite(kk.imag)):
        raise DomainError(f"k must be finite, got {kk!r}")
    r, i, norm = _brackets(kk.real, kk.imag, pot.xi, pot.p)
    g = complex(float(r), pot.xi * float(i))
    if normalize:
        g = g / float(norm)
    if scaled:
        return g
    g = g * math.exp(2.0 * abs(kk.imag)) if 2.0 * abs(kk.imag) < 700 else complex(math.inf, math.inf)
    if not (math.isfinite(g.real) and math.isfinite(g.imag)):
        raise DomainError("characteristic function overflows at this k; use scaled=True")
    return g


def residual_on_constraint(alpha: float, pot: ContinuumPotential, *, scaled: bool = False) -> complex:
    beta = constraint_beta(alpha, pot.Z)
    return char_residual(Wavevector(alpha, beta), pot, scaled=scaled)


def secular(alpha, pot: ContinuumPotential):
    """Real secular function R - xi*I on the constraint curve, scaled and normalised.

    Vectorised over ``alpha``; its zeros are the real levels.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a <= 0):
        raise DomainError("alpha must be positive")
    beta = -pot.Z / (2.0 * np.pi * a)
    r, i, norm = _brackets(np.pi * a, beta, pot.xi, pot.p)
    return (r - pot.xi * i) / norm


@dataclass
class RealSpectrum:
    pot: ContinuumPotential
    levels: list[Wavevector]
    energies: np.ndarray
    residuals: np.ndarray
    alpha_max: float = math.nan
    grid_step: float = DEFAULT_GRID_STEP
    rejected: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([w.alpha for w in self.levels])


def _bisect_many(f, lo, hi, flo, tol=ROOT_TOL, max_iter=80):
    """Vectorised bisection over many brackets at once."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = np.array(flo, dtype=float)
    for _ in range(max_iter):
        if lo.size == 0 or np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _hump_roots(f, a0, a1, sign, refine=10):
    """Roots hidden inside [a0, a1] where f approaches zero without a sign change on the coarse grid."""
    xs = np.linspace(a0, a1, 2 * refine + 1)
    vs = f(xs)
    ch = np.nonzero(np.sign(vs[1:]) != np.sign(vs[:-1]))[0]
    if ch.size:
        return [(xs[i], xs[i + 1], vs[i]) for i in ch]
    # golden-section on sign*f locates a tangency the fine grid still misses
    j = int(np.argmin(np.abs(vs)))
    lo = xs[max(j - 1, 0)]
    hi = xs[min(j + 1, xs.size - 1)]
    res = minimize_scalar(lambda x: sign * float(f(np.array([x]))[0]), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-13})
    xm = float(res.x)
    fm = float(f(np.array([xm]))[0])
    if np.sign(fm) == -sign:
        return [(a0, xm, float(f(np.array([a0]))[0])), (xm, a1, fm)]
    return []


def find_real_spectrum(
    pot: ContinuumPotential,
    alpha_max: float,
    grid_step: float = DEFAULT_GRID_STEP,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    *,
    warn: bool = True,
) -> RealSpectrum:
    """Real levels with alpha in [grid_step, alpha_max].

    Scans the secular function on a uniform alpha grid, brackets sign changes,
    searches local minima of |secular| on a x10 finer grid for nearly tangent
    root pairs, and refines every bracket by bisection. A refined root is
    accepted when its normalised residual is at most ``accept_tol``.
    """
    _require_interior(pot)
    if not alpha_max > grid_step > 0:
        raise DomainError("need alpha_max > grid_step > 0")
    f = lambda a: secular(a, pot)  # noqa: E731

    n = int(math.floor(alpha_max / grid_step + 1e-9)) + 1
    a = grid_step * np.arange(1, n + 1)  # one step beyond alpha_max catches roots at the edge
    v = f(a)
    s = np.sign(v)

    exact = list(a[s == 0])
    los, his, flos = [], [], []
    ch = np.nonzero(s[1:] * s[:-1] < 0)[0]
    los.extend(a[ch])
    his.extend(a[ch + 1])
    flos.extend(v[ch])

    av = np.abs(v)
    hump = np.nonzero(
        (av[1:-1] < av[:-2]) & (av[1:-1] < av[2:]) & (s[:-2] == s[1:-1]) & (s[1:-1] == s[2:]) & (s[1:-1] != 0)
    )[0] + 1
    for i in hump:
        for lo, hi, flo in _hump_roots(f, a[i - 1], a[i + 1], s[i]):
            los.append(lo)
            his.append(hi)
            flos.append(flo)

    roots = list(_bisect_many(f, los, his, flos)) + exact
    roots.sort()
    accepted, resid, rejected = [], [], []
    for r in roots:
        if r > alpha_max * (1 + 1e-12) + 10 * ROOT_TOL:
            continue
        res = abs(float(f(np.array([r]))[0]))
        if res > accept_tol:
            rejected.append(r)
            continue
        # genuine near-tangent pairs can sit far closer than a grid step; only exact repeats merge
        if accepted and r - accepted[-1] <= 4 * ROOT_TOL:
            continue
        accepted.append(r)
        resid.append(res)

    if warn and len(accepted) > 1:
        gaps = np.diff(accepted)
        if np.any(gaps < 2 * grid_step):
            warnings.warn(
                f"roots separated by {gaps.min():.3g} < 2 grid steps; merge structure may be unresolved",
                GridTooCoarse,
                stacklevel=2,
            )

    levels = [Wavevector(float(r), constraint_beta(float(r), pot.Z)) for r in accepted]
    energies = np.array([w.energy() for w in levels])
    order = np.argsort(energies, kind="stable")
    return RealSpectrum(
        pot=pot,
        levels=[levels[i] for i in order],
        energies=energies[order],
        residuals=np.array(resid)[order] if resid else np.zeros(0),
        alpha_max=alpha_max,
        grid_step=grid_step,
        rejected=rejected,
    )


def alpha_for_energy(E: float, Z: float) -> float:
    """Positive alpha on the constraint curve with (pi alpha)^2 - beta^2 = E."""
    # pi^2 a^2 - Z^2 / (4 pi^2 a^2) = E  ->  quadratic in u = pi^2 a^2
    u = 0.5 * (E + math.sqrt(E * E + Z * Z))
    if not u > 0:
        raise DomainError(f"no positive alpha has energy {E!r} at Z = 0")
    return math.sqrt(u) / math.pi


# --- eigenfunctions ---------------------------------------------------------------------------


@dataclass
class Eigenfunction:
    k: Wavevector
    A: complex
    B: complex
    C: complex
    F: complex
    pot: ContinuumPotential

    @property
    def energy(self) -> float:
        return self.k.energy()

    def _pieces(self, x):
        x = np.asarray(x, dtype=float)
        k = self.k.k
        kc = k.conjugate()
        p = self.pot.p
        return x, k, kc, p

    def psi(self, x, side: int = 0):
        """Wavefunction; ``side`` = -1/+1 picks the left/right limit at x = +-p."""
        return self._eval(x, 0, side)

    def dpsi(self, x, side: int = 0):
        return self._eval(x, 1, side)

    def d2psi(self, x, side: int = 0):
        return self._eval(x, 2, side)

    def _eval(self, x, order, side):
        x, k, kc, p = self._pieces(x)
        out = np.zeros(x.shape, dtype=complex)
        right = x > p if side < 0 else x >= p
        left = x < -p if side > 0 else x <= -p
        neg = x < 0 if side >= 0 else x <= 0
        mid_r = ~right & ~left & ~neg
        mid_l = ~right & ~left & neg
        A, B, C, F = self.A, self.B, self.C, self.F

        u = k * (1 - x[right])
        out[right] = A * _dsin(u, order) * (-k) ** order

        xm = x[mid_r]
        out[mid_r] = B * _dcos(k * xm, order) * k**order + C * kc * _dsin(k * xm, order) * k**order

        xm = x[mid_l]
        out[mid_l] = B * _dcos(kc * xm, order) * kc**order + C * k * _dsin(kc * xm, order) * kc**order

        u = kc * (1 + x[left])
        out[left] = F * _dsin(u, order) * kc**order
        return out


def _dsin(u, order):
    return (np.sin(u), np.cos(u), -np.sin(u))[order]


def _dcos(u, order):
    return (np.cos(u), -np.sin(u), -np.cos(u))[order]


def matching_matrix(k: Wavevector | complex, pot: ContinuumPotential) -> np.ndarray:
    """Continuity and derivative-jump conditions at x = +p and x = -p acting on (A, B, C, F).

    The jumps are psi'(+p+) - psi'(+p-) = +i xi psi(+p) and
    psi'(-p+) - psi'(-p-) = -i xi psi(-p), i.e. gain i*xi at x = +p.
    """
    k = k.k if isinstance(k, Wavevector) else complex(k)
    kc = k.conjugate()
    p, xi = pot.p, pot.xi
    sq, cq = np.sin(k * (1 - p)), np.cos(k * (1 - p))
    sp, cp = np.sin(k * p), np.cos(k * p)
    sqc, cqc = np.sin(kc * (1 - p)), np.cos(kc * (1 - p))
    spc, cpc = np.sin(kc * p), np.cos(kc * p)
    return np.array(
        [
            [sq, -cp, -kc * sp, 0],
            [-k * cq - 1j * xi * sq, k * sp, -kc * k * cp, 0],
            [0, -cpc, k * spc, sqc],
            [0, kc * spc, k * kc * cpc, -kc * cqc + 1j * xi * sqc],
        ],
        dtype=complex,
    )


def eigenfunction(k: Wavevector, pot: ContinuumPotential, n_norm: int = 2001) -> Eigenfunction:
    """Coefficients (A, B, C, F) spanning the null space of the matching conditions.

    Normalised so that max |psi| over the box is 1 and psi is real and positive
    where |psi| peaks.
    """
    m = matching_matrix(k, pot)
    col = np.linalg.norm(m, axis=0)
    col[col == 0] = 1.0
    ms = m / col
    _, sv, vh = np.linalg.svd(ms)
    if sv[0] == 0 or sv[-1] / sv[0] > SINGULAR_RTOL:
        raise SingularMatching(f"matching conditions are far from singular (s_min/s_max={sv[-1] / sv[0]:.3g})")
    if sv[-2] / sv[0] < 1e-10:
        raise SingularMatching("matching conditions have a null space of dimension > 1")
    coef = vh[-1].conj() / col
    ef = Eigenfunction(k, *[complex(c) for c in coef], pot=pot)
    x = np.linspace(-1, 1, n_norm)
    vals = ef.psi(x)
    j = int(np.argmax(np.abs(vals)))
    scale = vals[j]
    return Eigenfunction(k, *[complex(c / scale) for c in coef], pot=pot)


@dataclass(frozen=True)
class VerificationReport:
    max_ode_residual: float
    bc_residual: float
    jump_residual: float
    continuity_residual: float

    def max(self) -> float:
        return max(self.max_ode_residual, self.bc_residual, self.jump_residual, self.continuity_residual)

    def as_dict(self) -> dict:
        return {
            "max_ode_residual": self.max_ode_residual,
            "bc_residual": self.bc_residual,
            "jump_residual": self.jump_residual,
            "continuity_residual": self.continuity_residual,
        }


def verify_eigenfunction(ef: Eigenfunction, n_samples: int = 64) -> VerificationReport:
    """Check the ODE, Dirichlet walls, continuity and derivative jumps of ``ef``."""
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16 per region")
    p = ef.pot.p
    E = ef.energy
    edges = [(-1.0, -p), (-p, 0.0), (0.0, p), (p, 1.0)]
    ode = 0.0
    for lo, hi in edges:
        t = (np.arange(n_samples) + 0.5) / n_samples
        x = lo + (hi - lo) * t
        r = -ef.d2psi(x) + ef.pot.V(x) * ef.psi(x) - E * ef.psi(x)
        ode = max(ode, float(np.max(np.abs(r))))

    bc = float(max(abs(ef.psi(np.array([1.0]))[0]), abs(ef.psi(np.array([-1.0]))[0])))

    pts = np.array([-p, 0.0, p])
    cont = float(np.max(np.abs(ef.psi(pts, side=1) - ef.psi(pts, side=-1))))
    d0 = abs(ef.dpsi(np.array([0.0]), side=1)[0] - ef.dpsi(np.array([0.0]), side=-1)[0])
    cont = max(cont, float(d0))

    xi = ef.pot.xi
    jumps = []
    for x0, sgn in ((p, 1.0), (-p, -1.0)):
        xx = np.array([x0])
        dj = ef.dpsi(xx, side=1)[0] - ef.dpsi(xx, side=-1)[0]
        jumps.append(abs(dj - sgn * 1j * xi * ef.psi(xx, side=1)[0]))
    return VerificationReport(ode, bc, float(max(jumps)), cont)
