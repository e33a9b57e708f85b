"""Open tight-binding chain with PT-symmetric imaginary on-site potentials.

H = -t0 sum_j (|j><j+1| + h.c.) + sum_j i V_j |j><j|, sites j = 1..N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, InvalidModel
from .numerics import PowerLawFit, fit_power_law

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class Step:
    """V_j = -Gamma for j <= N/2 and +Gamma for j > N/2 (loss on the left half)."""

    Gamma: float


@dataclass(frozen=True)
class Pair:
    """-i*gamma at site j0 and +i*gamma at its mirror site N + 1 - j0."""

    gamma: float
    j0: int


Potential = Union[Step, Pair]


@dataclass(frozen=True)
class LatticeModel:
    N: int
    t0: float = 1.0
    potential: Potential | tuple[Potential, ...] = ()

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidModel(f"N must be an integer >= 2, got {self.N!r}")
        if not (self.t0 > 0 and math.isfinite(self.t0)):
            raise InvalidModel(f"t0 must be positive, got {self.t0!r}")
        for term in self.terms:
            if isinstance(term, Step):
                if self.N % 2:
                    raise InvalidModel("Step potential needs even N")
            elif isinstance(term, Pair):
                if not 1 <= term.j0 <= self.N // 2:
                    raise InvalidModel(f"j0 must lie in [1, {self.N // 2}], got {term.j0}")
            else:
                raise InvalidModel(f"unknown potential term {term!r}")

    @property
    def terms(self) -> tuple[Potential, ...]:
        if isinstance(self.potential, tuple):
            return self.potential
        return (self.potential,)

    def onsite(self) -> np.ndarray:
        """Diagonal of H, i.e. i*V_j for j = 1..N."""
        N = self.N
        d = np.zeros(N, dtype=complex)
        for term in self.terms:
            if isinstance(term, Step):
                d[: N // 2] += -1j * term.Gamma
                d[N // 2 :] += 1j * term.Gamma
            else:
                d[term.j0 - 1] += -1j * term.gamma
                d[N - term.j0] += 1j * term.gamma
        return d


def build_hamiltonian(model: LatticeModel) -> np.ndarray:
    """Dense complex-symmetric tridiagonal Hamiltonian with open boundaries."""
    N = model.N
    H = np.diag(model.onsite())
    off = -model.t0 * np.ones(N - 1)
    H[np.arange(N - 1), np.arange(1, N)] = off
    H[np.arange(1, N), np.arange(N - 1)] = off
    return H


@dataclass
class ComplexSpectrum:
    eigenvalues: np.ndarray
    max_abs_im: float
    residual_bound: float = math.nan

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _tridiagonal_parts(H: np.ndarray):
    N = H.shape[0]
    d = np.diag(H).copy()
    up = np.diag(H, 1).copy()
    lo = np.diag(H, -1).copy()
    mask = np.ones_like(H, dtype=bool)
    idx = np.arange(N)
    for o in (-1, 0, 1):
        rows = idx[max(0, -o) : N - max(0, o)]
        mask[rows, rows + o] = False
    if np.any(H[mask] != 0):
        return None
    return d, up, lo


def _backward_error(H: np.ndarray, lam: np.ndarray, parts) -> float:
    """max_j ||(H - lam_j) v_j|| / ||v_j|| after two inverse-iteration sweeps, relative to ||H||."""
    N = H.shape[0]
    hnorm = float(np.linalg.norm(H, 2)) if N <= 64 else float(np.abs(H).sum(axis=0).max())
    if hnorm == 0:
        return 0.0
    d, up, lo = parts
    rng = np.random.default_rng(12345)
    b0 = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    worst = 0.0
    ab = np.zeros((3, N), dtype=complex)
    ab[0, 1:] = up
    ab[2, :-1] = lo
    for idx, lmb in enumerate(lam):
        best = math.inf
        # an exactly singular shift (e.g. at an exceptional point) is nudged off the spectrum
        for shift in (0.0, 1e-14, 1e-11, 1e-8):
            ab[1] = d - lmb - shift * hnorm * (1 + 1j)
            try:
                v = b0
                # overflow at a near-singular shift shows up as a non-finite v, handled below
                with np.errstate(invalid="ignore", over="ignore"):
                    for _ in range(3):
                        v = sla.solve_banded((1, 1), ab, v, check_finite=False)
                        v = v / np.linalg.norm(v)
            except (np.linalg.LinAlgError, ValueError):
                continue
            if not np.all(np.isfinite(v)):
                continue
            hv = d * v
            hv[:-1] += up * v[1:]
            hv[1:] += lo * v[:-1]
            best = min(best, float(np.linalg.norm(hv - lmb * v)))
            if best <= 1e-13 * hnorm:
                break
        if not math.isfinite(best):
            raise ConvergenceFailure("inverse iteration failed", index=idx)
        worst = max(worst, best)
    return worst / hnorm


def eigenvalues(H: np.ndarray, tol: float = 1e-10, *, certify: bool = True) -> ComplexSpectrum:
    """All eigenvalues of ``H`` ordered by (Re, Im).

    With ``certify`` the backward error of every eigenvalue is bounded by inverse
    iteration and reported as ``residual_bound`` (relative to ||H||).
    """
    H = np.asarray(H, dtype=complex)
    try:
        lam = sla.eigvals(H, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        bad = int(np.nonzero(~np.isfinite(lam))[0][0])
        raise ConvergenceFailure("non-finite eigenvalue", index=bad)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    bound = math.nan
    if certify:
        parts = _tridiagonal_parts(H)
        if parts is not None:
            bound = _backward_error(H, lam, parts)
        else:
            w, v = sla.eig(H)
            r = np.linalg.norm(H @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
            bound = float(r.max() / max(np.linalg.norm(H, 2), 1e-300))
        if bound > tol:
            raise ConvergenceFailure(f"backward error {bound:.3g} exceeds tol={tol:g}")
    return ComplexSpectrum(eigenvalues=lam, max_abs_im=float(np.abs(lam.imag).max()), residual_bound=bound)


DENSE_MAX_N = 400


def is_pt_unbroken_lattice(model: LatticeModel, eps: float = DEFAULT_EPS, method: str = "auto") -> bool:
    """True iff every eigenvalue is real: max |Im lambda| <= eps * t0.

    ``method="count"`` instead counts the real roots of det(H - lambda), which is
    real on the real axis for these PT-symmetric chains; "auto" uses it above
    ``DENSE_MAX_N`` sites.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if method == "auto":
        method = "dense" if model.N <= DENSE_MAX_N else "count"
    if method == "count":
        return count_real_eigenvalues(model) == model.N
    spec = eigenvalues(build_hamiltonian(model), certify=False)
    return spec.max_abs_im <= eps * model.t0


def charpoly_on_axis(model: LatticeModel, lam) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log-magnitude of det(H - lambda) for real ``lam``, via the three-term recurrence."""
    lam = np.asarray(lam, dtype=float)
    d = model.onsite()
    t2 = model.t0**2
    prev = np.ones(lam.shape, dtype=complex)
    cur = d[0] - lam + 0j
    logs = np.zeros(lam.shape)
    for j in range(1, model.N):
        nxt = (d[j] - lam) * cur - t2 * prev
        sc = np.maximum(np.abs(nxt), np.abs(cur))
        sc[sc == 0] = 1.0
        prev = cur / sc
        cur = nxt / sc
        logs += np.log(sc)
    val = cur.real
    with np.errstate(divide="ignore"):
        return np.sign(val), logs + np.log(np.abs(val))


def count_real_eigenvalues(model: LatticeModel, points_per_gap: int = 4) -> int:
    """Number of real roots of det(H - lambda), nearly tangent pairs included."""
    N, t0 = model.N, model.t0
    vmax = float(np.abs(model.onsite()).max()) if N else 0.0
    mu = -2 * t0 * np.cos(np.pi * np.arange(1, N + 1) / (N + 1))
    edge = 2 * t0 + vmax + 1e-9 * t0
    knots = np.concatenate([[-edge], 0.5 * (mu[1:] + mu[:-1]), [edge]])
    frac = np.arange(points_per_gap) / points_per_gap
    grid = np.concatenate([(knots[:-1, None] + np.diff(knots)[:, None] * frac).ravel(), [edge]])
    sg, la = charpoly_on_axis(model, grid)
    nz = sg != 0
    g, s, l = grid[nz], sg[nz], la[nz]
    count = int(np.sum(s[1:] != s[:-1]))
    # a sample landing exactly on a root of even multiplicity leaves no sign change behind
    pos = np.cumsum(nz) - 1
    for i in np.nonzero(~nz)[0]:
        j = pos[i]
        if 0 <= j < len(s) - 1 and s[j] == s[j + 1]:
            count += 2
    hump = np.nonzero((l[1:-1] < l[:-2]) & (l[1:-1] < l[2:]) & (s[:-2] == s[1:-1]) & (s[1:-1] == s[2:]))[0] + 1
    for i in hump:
        count += _hidden_pair(model, g[i - 1], g[i + 1], s[i])
    return count


def _hidden_pair(model, a, b, sign) -> int:
    xs = np.linspace(a, b, 65)
    sg, la = charpoly_on_axis(model, xs)
    if np.any(sg != sign):
        return int(np.sum(sg[1:] != sg[:-1]))
    j = int(np.argmin(la))
    lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, 64)]
    ref = la[j]

    def f(x):
        s, l = charpoly_on_axis(model, np.array([x]))
        return float(sign * s[0] * np.exp(l[0] - ref))

    from scipy.optimize import minimize_scalar

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-15 * model.t0})
    return 2 if res.fun < 0 else 0


def brute_force_eigenvalues(model: LatticeModel, dps: int = 60) -> np.ndarray:
    """Roots of det(H - lambda) built by the three-term recurrence in high precision.

    Intended for small N; ordered by (Re, Im).
    """
    import mpmath as mp

    with mp.workdps(dps):
        d = [mp.mpc(float(z.real), float(z.imag)) for z in model.onsite()]
        t2 = mp.mpf(model.t0) ** 2
        # polynomials in lambda as coefficient lists, lowest degree first
        prev = [mp.mpc(1)]
        cur = [d[0], mp.mpc(-1)]
        for j in range(1, model.N):
            nxt = [mp.mpc(0)] * (len(cur) + 1)
            for i, c in enumerate(cur):
                nxt[i] += d[j] * c
                nxt[i + 1] += -c
            for i, c in enumerate(prev):
                nxt[i] += -t2 * c
            prev, cur = cur, nxt
        roots = mp.polyroots(list(reversed(cur)), maxsteps=400, extraprec=4 * dps)
        lam = np.array([complex(r) for r in roots])
    return lam[np.lexsort((lam.imag, lam.real))]


# --- thresholds ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Kind:
    """Family of lattice models swept in strength.

    ``name`` is "step" or "pair"; a pair uses either a fixed loss site ``j0`` or
    ``fraction`` with j0 = round(fraction * N).
    """

    name: str
    j0: int | None = None
    fraction: float | None = None

    @classmethod
    def parse(cls, kind: str, j0_rule: str | None = None) -> "Kind":
        if kind == "step":
            return cls("step")
        if kind != "pair":
            raise InvalidModel(f"unknown kind {kind!r}")
        rule = j0_rule or "fixed:1"
        how, _, val = rule.partition(":")
        if how == "fixed":
            return cls("pair", j0=int(val))
        if how == "fraction":
            return cls("pair", fraction=float(val))
        raise InvalidModel(f"bad j0 rule {rule!r}")

    def site(self, N: int) -> int:
        if self.j0 is not None:
            return self.j0
        return max(1, int(math.floor(self.fraction * N + 0.5)))

    def model(self, N: int, strength: float, t0: float = 1.0) -> LatticeModel:
        if self.name == "step":
            return LatticeModel(N, t0, Step(strength))
        return LatticeModel(N, t0, Pair(strength, self.site(N)))

    def label(self) -> str:
        if self.name == "step":
            return "step"
        if self.j0 is not None:
            return f"pair(j0={self.j0})"
        return f"pair(j0/N={self.fraction:g})"


def _as_kind(kind) -> Kind:
    if isinstance(kind, Kind):
        return kind
    if isinstance(kind, str):
        return Kind.parse(*kind.split(";")) if ";" in kind else Kind.parse(kind)
    raise InvalidModel(f"bad kind {kind!r}")


def threshold_bracket(
    N: int, kind, rtol: float = 1e-6, *, t0: float = 1.0, eps: float = DEFAULT_EPS, start: float | None = None
) -> tuple[float, float]:
    """``(lo, hi)`` strengths (units of t0) with lo unbroken, hi broken and hi - lo <= rtol*hi."""
    kind = _as_kind(kind)
    unbroken = lambda g: is_pt_unbroken_lattice(kind.model(N, g * t0, t0), eps)  # noqa: E731
    lo = 0.0
    hi = start if start is not None else (20.0 / N**2 if kind.name == "step" else 1.0 / N)
    for _ in range(80):
        if not unbroken(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceFailure("no broken strength found while doubling")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if unbroken(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def gamma_threshold(N: int, kind, tol: float = 1e-6, *, t0: float = 1.0, eps: float = DEFAULT_EPS) -> float:
    """Critical strength over t0; ``tol`` is relative to the threshold."""
    lo, hi = threshold_bracket(N, kind, tol, t0=t0, eps=eps)
    return 0.5 * (lo + hi)


@dataclass
class ScalingResult:
    kind: str
    N: list[int]
    strength_c: list[float]
    bracket: list[float]
    full_fit: PowerLawFit
    trimmed_fit: PowerLawFit | None = None

    @property
    def fit(self) -> PowerLawFit:
        return self.trimmed_fit or self.full_fit

    @property
    def exponent(self) -> float:
        return self.fit.exponent


def _bracket_job(N, kind, rtol, eps):
    return threshold_bracket(N, kind, rtol, eps=eps)


def threshold_scaling(
    kind, N_list: Sequence[int], rtol: float = 1e-6, *, eps: float = DEFAULT_EPS, workers: int = 1
) -> ScalingResult:
    """Critical strength against N with a log-log fit; refits without the smallest N when r^2 < 0.999."""
    kind = _as_kind(kind)
    Ns = [int(n) for n in N_list]
    if len(Ns) < 4 or Ns != sorted(Ns):
        raise ValueError("N_list must be ascending with at least 4 entries")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            brackets = list(ex.map(_bracket_job, Ns, [kind] * len(Ns), [rtol] * len(Ns), [eps] * len(Ns)))
    else:
        brackets = [_bracket_job(N, kind, rtol, eps) for N in Ns]
    vals = [0.5 * (lo + hi) for lo, hi in brackets]
    widths = [hi - lo for lo, hi in brackets]
    full = fit_power_law(list(zip(Ns, vals)))
    trimmed = None
    # finite-size corrections are largest at the smallest N
    if full.r_squared < 0.999:
        trimmed = fit_power_law(list(zip(Ns[1:], vals[1:])))
    return ScalingResult(kind.label(), Ns, vals, widths, full, trimmed)
