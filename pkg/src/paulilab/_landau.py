"""Radial eigenfunctions of the constant-field transverse Landau problem.

Symmetric gauge, field strength b0 > 0.  The normalized function with radial
quantum number n >= 0 and angular momentum l is

    R_{n,l}(r) = N_{n,l} r^{|l|} L_n^{|l|}(b0 r^2 / 2) exp(-b0 r^2 / 4),

orthonormal for the measure 2 pi r dr at fixed l.  The spin-down component
has energy 2 b0 (n + max(0, -l)); the spin-up one sits 2 b0 higher.  Values
are computed through logarithms so large |l| stays finite.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import eval_genlaguerre, gammaln


def radial_values(b0: float, n: int, l: int, r: np.ndarray) -> np.ndarray:
    a = abs(l)
    r = np.asarray(r, dtype=float)
    t = 0.5 * b0 * r * r
    log_n = 0.5 * (
        (a + 1) * math.log(b0)
        + gammaln(n + 1)
        - math.log(2 * math.pi)
        - a * math.log(2.0)
        - gammaln(n + a + 1)
    )
    lag = eval_genlaguerre(n, a, t)
    sign = np.sign(lag)
    with np.errstate(divide="ignore"):
        log_lag = np.where(lag != 0, np.log(np.abs(np.where(lag != 0, lag, 1.0))), -np.inf)
        log_r = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), -np.inf)
    expo = log_n + a * log_r - 0.25 * b0 * r * r + log_lag
    out = sign * np.exp(expo)
    if a == 0:
        out = np.where(r > 0, out, math.exp(log_n) * eval_genlaguerre(n, 0, 0.0))
    return out


def level_energy(b0: float, n: int, l: int, spin: int) -> float:
    """Unperturbed energy: spin = 0 for the spin-down block, 1 for spin-up."""
    base = 2.0 * b0 * (n + max(0, -l))
    return base + (2.0 * b0 if spin == 1 else 0.0)


def modes_for_block(b0: float, l: int, L: int, spins=(0, 1)):
    """(spin, n, energy) triples with energy <= 2 b0 L at angular momentum l."""
    out = []
    for spin in spins:
        n = 0
        while True:
            e = level_energy(b0, n, l, spin)
            if e > 2.0 * b0 * L + 1e-12:
                break
            out.append((spin, n, e))
            n += 1
    return out
