"""Independent high-precision references for the continuum characteristic function.

Nothing here imports ptbox: the characteristic function is written out term by
term in mpmath, and the matching problem is set up from scratch as a 6x6
system over four regions with general sinusoidal pieces.
"""

import mpmath as mp


def eq4_terms(alpha, beta, xi, p, dps=40):
    """(R, I, norm) of the characteristic function at k = pi*alpha + i*beta."""
    with mp.workdps(dps):
        k = mp.pi * mp.mpf(alpha) + 1j * mp.mpf(beta)
        xi = mp.mpf(xi)
        p = mp.mpf(p)

        def S_star(u):
            return mp.sin(mp.conj(u))

        ak = abs(k)
        R = mp.re(ak**2 * k * mp.cos(k) * S_star(k)
                  + xi**2 * abs(mp.sin((1 - p) * k)) ** 2 * k * mp.cos(p * k) * S_star(p * k))
        I = mp.im(ak**2 * mp.sin((1 - p) * k) * mp.cos(p * k) * S_star(k)
                  - k**2 * S_star((1 - p) * k) * S_star(p * k) * mp.cos(k))
        norm = ak**3 + xi**2 * ak + 1
        return R, I, norm


def eq4_residual(alpha, beta, xi, p, dps=40):
    """Normalised R + i*xi*I as a Python complex."""
    with mp.workdps(dps):
        R, I, norm = eq4_terms(alpha, beta, xi, p, dps)
        return complex((R + 1j * mp.mpf(xi) * I) / norm)


def matching_det6(alpha, Z, xi, p, dps=40):
    """Determinant of the 6x6 matching system on the constraint curve.

    Regions: x > p: a sin(k(1-x)); 0 < x < p: b1 cos(kx) + b2 sin(kx);
    -p < x < 0: c1 cos(k'x) + c2 sin(k'x); x < -p: f sin(k'(1+x)), with
    k^2 = E - iZ, k' = conj(k). The derivative jumps by +i xi psi at +p and by
    -i xi psi at -p.
    """
    with mp.workdps(dps):
        alpha = mp.mpf(alpha)
        beta = -mp.mpf(Z) / (2 * mp.pi * alpha)
        k = mp.pi * alpha + 1j * beta
        kc = mp.conj(k)
        xi = mp.mpf(xi)
        p = mp.mpf(p)
        s, c = mp.sin, mp.cos
        M = mp.matrix(6, 6)
        # unknown order: a, b1, b2, c1, c2, f
        # continuity at 0
        M[0, 1], M[0, 3] = 1, -1
        M[1, 2], M[1, 4] = k, -kc
        # continuity at +p
        M[2, 0] = s(k * (1 - p))
        M[2, 1], M[2, 2] = -c(k * p), -s(k * p)
        # jump at +p: psi'(p+) - psi'(p-) - i xi psi(p) = 0
        M[3, 0] = -k * c(k * (1 - p)) - 1j * xi * s(k * (1 - p))
        M[3, 1], M[3, 2] = k * s(k * p), -k * c(k * p)
        # continuity at -p
        M[4, 3], M[4, 4] = c(kc * p), -s(kc * p)
        M[4, 5] = -s(kc * (1 - p))
        # jump at -p: psi'(-p+) - psi'(-p-) + i xi psi(-p) = 0
        M[5, 3] = kc * s(kc * p) + 1j * xi * c(kc * p)
        M[5, 4] = kc * c(kc * p) - 1j * xi * s(kc * p)
        M[5, 5] = -kc * c(kc * (1 - p))
        return mp.det(M)


def det6_root(alpha0, Z, xi, p, dps=40):
    """Refine a real level of the 6x6 determinant from ``alpha0``; the determinant is real up to rounding."""
    with mp.workdps(dps):
        f = lambda a: mp.re(matching_det6(a, Z, xi, p, dps))  # noqa: E731
        return float(mp.findroot(f, mp.mpf(alpha0), tol=mp.mpf(10) ** (-dps + 10)))
