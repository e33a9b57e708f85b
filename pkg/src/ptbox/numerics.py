"""Scalar numerics: bracketing bisection and log-log power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInput, MaxIterExceeded, NoSignChange

DEFAULT_TOL = 1e-10


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> float:
    """Find a sign change of ``f`` inside ``[lo, hi]``.

    Returns the midpoint of the final bracket, whose width is at most
    ``tol``. The result always lies inside the initial bracket.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo!r}, hi={hi!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    flo = f(lo)
    fhi = f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if not (flo * fhi < 0):
        raise NoSignChange(f"f({lo})={flo!r} and f({hi})={fhi!r} do not bracket a root")
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket is at floating-point resolution
            return mid
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    raise MaxIterExceeded(f"bracket width {hi - lo:g} > tol={tol:g} after {max_iter} iterations")


def bisect_predicate(
    pred: Callable[[float], bool],
    good: float,
    bad: float,
    tol: float,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Shrink ``[good, bad]`` (either order) around the switch of a boolean predicate.

    ``pred(good)`` is assumed true and ``pred(bad)`` false. Returns the final
    ``(good, bad)`` pair, with ``|bad - good| <= tol``.
    """
    for _ in range(max_iter):
        if abs(bad - good) <= tol:
            return good, bad
        mid = 0.5 * (good + bad)
        if pred(mid):
            good = mid
        else:
            bad = mid
    raise MaxIterExceeded(f"predicate bracket {abs(bad - good):g} > tol={tol:g}")


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line through ``(log x, log y)``; ``y ~ exp(log_prefactor) * x**exponent``."""

    exponent: float
    log_prefactor: float
    r_squared: float
    n_points: int = 0

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)

    def predict(self, x):
        return np.exp(self.log_prefactor) * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Ordinary least-squares power-law fit with equal weights in log-log space."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise DegenerateInput("need at least 2 points")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DegenerateInput("non-finite coordinate")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DegenerateInput("all coordinates must be positive")
    if len(np.unique(xs)) < 2:
        raise DegenerateInput("need at least 2 distinct x values")

    lx = np.log(xs)
    ly = np.log(ys)
    mx = lx.mean()
    my = ly.mean()
    dx = lx - mx
    dy = ly - my
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = my - slope * mx
    resid = dy - slope * dx
    ss_res = float(resid @ resid)
    ss_tot = float(dy @ dy)
    # constant data is fit exactly by a flat line
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    r2 = min(1.0, max(0.0, r2))
    return PowerLawFit(exponent=slope, log_prefactor=float(intercept), r_squared=r2, n_points=len(pts))
