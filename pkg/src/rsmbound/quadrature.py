"""Gauss-Legendre quadrature helpers for the operator integrals.

All integrals in this package run over finite intervals (typically
[-1/2, 1/2]); nodes and weights are plain rescalings of the Legendre rule.
"""

from __future__ import annotations

import math

import numpy as np


def gauss_legendre(a, b, n):
    """Nodes and weights integrating exactly over [a, b] up to degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def beta_identity_residual(j_max=4, n=64):
    """Self-test: worst error of the rule on int_0^1 (1-x)^j x^k dx = j!k!/(j+k+1)!."""
    x, w = gauss_legendre(0.0, 1.0, n)
    worst = 0.0
    for j in range(j_max + 1):
        for k in range(j_max + 1):
            exact = math.factorial(j) * math.factorial(k) / math.factorial(j + k + 1)
            approx = float(np.sum(w * (1.0 - x) ** j * x**k))
            worst = max(worst, abs(approx - exact))
    return worst


def beta_simplex_residual(j_max=2, n=32):
    """Same check for the simplex identity int (1-l)^j (l-m)^k m^e dl dm."""
    xl, wl = gauss_legendre(0.0, 1.0, n)
    worst = 0.0
    for j in range(j_max + 1):
        for k in range(j_max + 1):
            for e in range(j_max + 1):
                exact = (math.factorial(j) * math.factorial(k) * math.factorial(e)
                         / math.factorial(j + k + e + 2))
                total = 0.0
                for lam, w in zip(xl, wl):
                    xm, wm = gauss_legendre(0.0, lam, n)
                    total += w * float(np.sum(wm * (lam - xm) ** k * xm**e)) * (1.0 - lam) ** j
                worst = max(worst, abs(total - exact))
    return worst
