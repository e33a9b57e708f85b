"""PT-breaking thresholds, (Z, xi) phase boundaries and threshold divergences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .continuum import (
    DEFAULT_ACCEPT_TOL,
    DEFAULT_GRID_STEP,
    ContinuumPotential,
    _require_interior,
    alpha_for_energy,
    find_real_spectrum,
)
from .errors import NoBreakingFound, StartBroken, WindowTooSmall
from .numerics import PowerLawFit, bisect_predicate, fit_power_law

DEFAULT_N_MAX = 40
DEFAULT_TOL = 1e-3
XI_CAP = 500.0
Z_CAP = 100.0
Z_SCAN_STEP = 0.5
MAX_WINDOW_DOUBLINGS = 6
LABEL_STEPS = 48

ADJACENT = "adjacent"
NEXT_NEAREST = "next-nearest"


@dataclass
class ThresholdResult:
    strength_c: float
    breaking_index: int | None
    pattern: str | None
    bracket_width: float
    unbroken: float = math.nan
    broken: float = math.nan


@dataclass
class BoundarySample:
    xi: float
    Zc_minus: float
    Zc_plus: float
    n_minus: int | None
    n_plus: int | None
    anchor: float = 0.0


@dataclass
class PhaseBoundary:
    p: float
    samples: list[BoundarySample] = field(default_factory=list)
    truncated: bool = False
    truncated_at: float | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=float)


# --- real-level counting ------------------------------------------------------------------------


def window_energy(n_max: int) -> float:
    """Energy halfway between the n_max-th and (n_max+1)-th empty-box levels."""
    return (math.pi * (n_max + 0.5) / 2) ** 2


def effective_window(pot: ContinuumPotential, n_max: int) -> int:
    """Enlarge n_max until the window edge sits where both potentials are perturbative."""
    k_needed = 4 * abs(pot.xi) + abs(pot.Z) + 10
    n_needed = int(math.ceil(2 * k_needed / math.pi - 0.5))
    return max(n_max, n_needed)


def window_levels(
    pot: ContinuumPotential,
    n_max: int,
    grid_step: float = DEFAULT_GRID_STEP,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
) -> np.ndarray:
    """Sorted real energies below ``window_energy(n_max)``."""
    E_w = window_energy(n_max)
    a_w = alpha_for_energy(E_w, pot.Z)
    spec = find_real_spectrum(pot, max(a_w, 2 * grid_step), grid_step, accept_tol, warn=False)
    return spec.energies[spec.energies <= E_w]


def is_unbroken(
    pot: ContinuumPotential,
    n_max: int = DEFAULT_N_MAX,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    *,
    grid_step: float = DEFAULT_GRID_STEP,
    auto_window: bool = True,
    cross_check_N: int | None = None,
) -> bool:
    """True iff the energy window holds exactly as many real levels as the empty box.

    Real levels disappear in pairs, so an even deficit means broken. An odd
    deficit or a surplus means a level crossed the window edge and raises
    WindowTooSmall.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    _require_interior(pot)
    n = effective_window(pot, n_max) if auto_window else n_max
    count = len(window_levels(pot, n, grid_step, accept_tol))
    deficit = n - count
    if deficit < 0 or deficit % 2:
        raise WindowTooSmall(f"{count} real levels in a window of {n}; raise n_max")
    verdict = deficit == 0
    if cross_check_N is not None:
        from .correspondence import oracle_verdict

        lat = oracle_verdict(pot, cross_check_N)
        if lat != verdict:
            raise RuntimeError(f"continuum verdict {verdict} disagrees with lattice oracle at N={cross_check_N}")
    return verdict


def _unbroken_pred(n_max: int, accept_tol: float) -> Callable[[ContinuumPotential], bool]:
    """is_unbroken with automatic doubling of n_max on WindowTooSmall."""

    def pred(pot: ContinuumPotential) -> bool:
        n = n_max
        for _ in range(MAX_WINDOW_DOUBLINGS):
            try:
                return is_unbroken(pot, n, accept_tol)
            except WindowTooSmall:
                n *= 2
        return is_unbroken(pot, n, accept_tol)

    return pred


# --- level labelling ----------------------------------------------------------------------------


class _PathBroken(Exception):
    pass


def _track(path: Sequence[ContinuumPotential], n: int) -> np.ndarray:
    """Zero-potential labels (1-based) of the real levels at the end of ``path``.

    Levels are followed by linear prediction and optimal assignment, which keeps
    the labels correct through genuine crossings of real levels.
    """
    prev = window_levels(path[0], n)
    if len(prev) != n:
        raise _PathBroken
    labels = np.arange(1, n + 1)
    vel = np.zeros(n)
    for pot in path[1:]:
        cur = window_levels(pot, n)
        if len(cur) != n:
            raise _PathBroken
        pred = prev + vel
        rows, cols = linear_sum_assignment(np.abs(pred[:, None] - cur[None, :]))
        new = np.empty(n)
        new[rows] = cur[cols]
        vel = new - prev
        prev = new
    order = np.argsort(prev, kind="stable")
    return labels[order]


def _path(start: ContinuumPotential, end: ContinuumPotential, steps: int) -> list[ContinuumPotential]:
    # denser near the end, where levels approach the exceptional point
    t = 1 - (1 - np.linspace(0, 1, steps + 1)) ** 2
    return [start.with_(Z=start.Z + (end.Z - start.Z) * s, xi=start.xi + (end.xi - start.xi) * s) for s in t]


def breaking_pair(
    good: ContinuumPotential,
    bad: ContinuumPotential,
    n_max: int = DEFAULT_N_MAX,
    steps: int = LABEL_STEPS,
) -> tuple[int, str] | tuple[None, None]:
    """Lower zero-potential label and pattern of the pair lost between ``good`` and ``bad``.

    Labels come from continuation along the straight line from the empty box to
    ``good``; if that line is itself broken, levels are labelled by energy order.
    """
    n = max(effective_window(good, n_max), effective_window(bad, n_max))
    e_good = window_levels(good, n)
    e_bad = window_levels(bad, n)
    try:
        labels = _track(_path(ContinuumPotential(0.0, 0.0, good.p), good, steps), n)
    except _PathBroken:
        labels = np.arange(1, len(e_good) + 1)
    if len(e_bad) >= len(e_good):
        return None, None
    rows, cols = linear_sum_assignment(np.abs(e_good[:, None] - e_bad[None, :]))
    lost = np.setdiff1d(np.arange(len(e_good)), rows)
    if lost.size < 2:
        return None, None
    # the pair that merged is the closest lost pair in energy
    el = e_good[lost]
    j = int(np.argmin(np.diff(el))) if lost.size > 2 else 0
    pair = sorted((int(labels[lost[j]]), int(labels[lost[j + 1]])))
    return pair[0], NEXT_NEAREST if pair[1] - pair[0] == 2 else ADJACENT


# --- thresholds ---------------------------------------------------------------------------------


def xi_threshold(
    p: float,
    tol: float = DEFAULT_TOL,
    *,
    Z: float = 0.0,
    n_max: int = DEFAULT_N_MAX,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    cap: float = XI_CAP,
    label: bool = True,
) -> ThresholdResult:
    """Critical impurity strength at fixed Z (default 0) by doubling from xi = 1, then bisection."""
    base = ContinuumPotential(Z, 0.0, p)
    _require_interior(base)
    pred = _unbroken_pred(n_max, accept_tol)
    if not pred(base):
        raise StartBroken("the xi = 0 point is already broken", xi=0.0)
    lo, hi = 0.0, 1.0
    while pred(base.with_(xi=hi)):
        lo = hi
        if hi >= cap:
            raise NoBreakingFound(f"unbroken up to xi = {cap:g} at p = {p:g}")
        hi = min(2 * hi, cap)
    good, bad = bisect_predicate(lambda x: pred(base.with_(xi=x)), lo, hi, tol)
    n, pattern = (None, None)
    if label:
        n, pattern = breaking_pair(base.with_(xi=good), base.with_(xi=bad), n_max)
    return ThresholdResult(0.5 * (good + bad), n, pattern, abs(bad - good), good, bad)


def _find_anchor(pot: ContinuumPotential, pred, cap: float) -> float | None:
    """Unbroken Z nearest to pot.Z, scanning outward on a Z_SCAN_STEP / 2 grid."""
    h = Z_SCAN_STEP / 2
    for m in range(1, int(cap / h) + 1):
        for z in (pot.Z + m * h, pot.Z - m * h):
            if pred(pot.with_(Z=z)):
                return z
    return None


def _outward(pot: ContinuumPotential, anchor: float, direction: int, pred, tol: float, cap: float):
    lo = anchor
    hi = anchor + direction * Z_SCAN_STEP
    while pred(pot.with_(Z=hi)):
        lo = hi
        if abs(hi) >= cap:
            raise NoBreakingFound(f"unbroken up to Z = {hi:g}")
        hi += direction * Z_SCAN_STEP
    return bisect_predicate(lambda z: pred(pot.with_(Z=z)), lo, hi, tol)


def z_boundaries(
    xi: float,
    p: float,
    tol: float = DEFAULT_TOL,
    *,
    n_max: int = DEFAULT_N_MAX,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    anchor_search: bool = False,
    cap: float = Z_CAP,
    label: bool = True,
) -> tuple[float, float, int | None, int | None]:
    """(Zc_minus, Zc_plus, n_minus, n_plus) bounding the unbroken Z interval at fixed (xi, p).

    Scans outward from Z = 0 in steps of Z_SCAN_STEP, then bisects. With
    ``anchor_search`` a broken Z = 0 is replaced by the nearest unbroken Z.
    """
    return _z_bounds(xi, p, tol, n_max, accept_tol, anchor_search, cap, label)[:4]


def _z_bounds(xi, p, tol, n_max, accept_tol, anchor_search, cap, label):
    pot = ContinuumPotential(0.0, xi, p)
    _require_interior(pot)
    pred = _unbroken_pred(n_max, accept_tol)
    anchor = 0.0
    if not pred(pot):
        found = _find_anchor(pot, pred, cap) if anchor_search else None
        if found is None:
            raise StartBroken(f"(Z=0, xi={xi:g}, p={p:g}) is broken", xi=xi)
        anchor = found
    gm, bm = _outward(pot, anchor, -1, pred, tol, cap)
    gp, bp = _outward(pot, anchor, +1, pred, tol, cap)
    n_minus = n_plus = None
    if label:
        n_minus, _ = breaking_pair(pot.with_(Z=gm), pot.with_(Z=bm), n_max)
        n_plus, _ = breaking_pair(pot.with_(Z=gp), pot.with_(Z=bp), n_max)
    return 0.5 * (gm + bm), 0.5 * (gp + bp), n_minus, n_plus, anchor


def trace_boundary(
    p: float,
    xi_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    *,
    n_max: int = DEFAULT_N_MAX,
    anchor_search: bool = False,
    label: bool = True,
    workers: int = 1,
) -> PhaseBoundary:
    """Apply z_boundaries along ``xi_grid``; a StartBroken point truncates the curve."""
    xs = [float(x) for x in xi_grid]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("xi_grid must be sorted ascending")
    if any(x < 0 for x in xs):
        raise ValueError("xi_grid entries must be >= 0")
    job = lambda x: _boundary_job(x, p, tol, n_max, anchor_search, label)  # noqa: E731
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_boundary_job, xs, [p] * len(xs), [tol] * len(xs), [n_max] * len(xs),
                                  [anchor_search] * len(xs), [label] * len(xs)))
    else:
        results = []
        for x in xs:
            results.append(job(x))
            if isinstance(results[-1], StartBroken):
                break
    out = PhaseBoundary(p=p)
    for x, r in zip(xs, results):
        if isinstance(r, StartBroken):
            out.truncated, out.truncated_at = True, x
            break
        out.samples.append(r)
    return out


def _boundary_job(xi, p, tol, n_max, anchor_search, label):
    try:
        zm, zp, nm, np_, anchor = _z_bounds(xi, p, tol, n_max, DEFAULT_ACCEPT_TOL, anchor_search, Z_CAP, label)
    except StartBroken as exc:
        return exc
    return BoundarySample(xi, zm, zp, nm, np_, anchor)


# --- divergence ---------------------------------------------------------------------------------


def divergence_points(
    side: str,
    deltas: Sequence[float],
    threshold_fn: Callable[[float], float] | None = None,
    tol: float = DEFAULT_TOL,
) -> list[tuple[float, float]]:
    if side not in ("origin", "boundary"):
        raise ValueError("side must be 'origin' or 'boundary'")
    if threshold_fn is None:
        threshold_fn = lambda p: xi_threshold(p, tol, label=False).strength_c  # noqa: E731
    pts = []
    for d in deltas:
        if not 0 < d <= 0.1:
            raise ValueError(f"delta must lie in (0, 0.1], got {d!r}")
        p = d if side == "origin" else 1 - d
        pts.append((float(d), float(threshold_fn(p))))
    return pts


def divergence_exponent(
    side: str,
    deltas: Sequence[float],
    threshold_fn: Callable[[float], float] | None = None,
    tol: float = DEFAULT_TOL,
) -> PowerLawFit:
    """Power-law fit of xi_c against delta, with p = delta (origin) or 1 - delta (boundary)."""
    return fit_power_law(divergence_points(side, deltas, threshold_fn, tol))
