"""Admissible magnetic fields described by a radial scalar potential.

A field b = b0 + b_tilde is specified through the perturbation potential
phi_tilde (so admissibility holds by construction); b_tilde is derived as
the radial Laplacian of phi_tilde.  The gap constant is

    zeta = 2 * b0 * exp(-2 * osc),   osc = sup phi_tilde - inf phi_tilde.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

#: number of scan points used to bound phi_tilde and compute its oscillation
PROFILE_GRID_POINTS = 4096

#: decay requirement at the largest sample radius, relative to the oscillation
DECAY_FRACTION = 1e-6


@dataclass(frozen=True)
class AdmissibleField:
    """Magnetic field b0 + Laplacian(phi_tilde) with phi_tilde radial and bounded.

    Immutable after construction; safe to share across threads.
    """

    b0: float
    phi_tilde: Callable[[np.ndarray], np.ndarray]
    r_max: float
    osc: float
    zeta: float
    is_constant: bool

    def total_phi(self, r):
        """Full scalar potential b0*r^2/4 + phi_tilde(r) for r >= 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        return 0.25 * self.b0 * r * r + self._phi(r)

    def b_tilde(self, r):
        """Radial Laplacian of phi_tilde: phi'' + phi'/r (2*phi''(0) at r=0)."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        if self.is_constant:
            return np.zeros_like(r)
        h = 1e-4 * max(self.r_max / 20.0, 1e-2)
        out = np.empty_like(r, dtype=float)
        small = r < 2 * h
        rs = r[~small]
        if rs.size:
            d2 = (self._phi(rs + h) - 2 * self._phi(rs) + self._phi(rs - h)) / h**2
            d1 = (self._phi(rs + h) - self._phi(rs - h)) / (2 * h)
            out[~small] = d2 + d1 / rs
        if np.any(small):
            # even extension around 0: Laplacian -> 2*phi''(0)
            p0 = self._phi(np.zeros(1))[0]
            d2_0 = 2.0 * (self._phi(np.full(1, h))[0] - p0) / h**2
            out[small] = 2.0 * d2_0
        return out

    def _phi(self, r):
        # constant extension beyond r_max; sampled profiles decay there anyway
        rc = np.minimum(np.asarray(r, dtype=float), self.r_max)
        return np.asarray(self.phi_tilde(rc), dtype=float)


def make_constant_field(b0: float) -> AdmissibleField:
    """Constant field of strength b0 > 0 (phi_tilde = 0, zeta = 2*b0)."""
    if not b0 > 0:
        raise ValueError("field strength b0 must be positive")
    return AdmissibleField(
        b0=float(b0),
        phi_tilde=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        r_max=20.0 / math.sqrt(b0),
        osc=0.0,
        zeta=2.0 * b0,
        is_constant=True,
    )


def make_radial_field(b0: float, phi_tilde: Callable[[np.ndarray], np.ndarray]) -> AdmissibleField:
    """Field from a radial profile phi_tilde, checked for boundedness and decay.

    The profile is scanned on [0, r_max] with r_max = 20/sqrt(b0).  A profile
    whose value at r_max has not decayed below DECAY_FRACTION * osc is
    rejected (growth detected at the largest sample radius).
    """
    if not b0 > 0:
        raise ValueError("field strength b0 must be positive")
    r_max = 20.0 / math.sqrt(b0)
    grid = np.linspace(0.0, r_max, PROFILE_GRID_POINTS)
    vals = np.asarray(phi_tilde(grid), dtype=float)
    if vals.shape != grid.shape:
        raise ValueError("profile must map a radius array to an equally shaped array")
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile takes non-finite values on the sample range")
    osc = float(vals.max() - vals.min())
    if osc == 0.0:
        # constant shift: indistinguishable from the constant field downstream
        return AdmissibleField(
            b0=float(b0),
            phi_tilde=phi_tilde,
            r_max=r_max,
            osc=0.0,
            zeta=2.0 * b0,
            is_constant=True,
        )
    if abs(vals[-1]) >= DECAY_FRACTION * osc:
        raise ValueError(
            "profile has not decayed at the largest sample radius "
            f"(|phi_tilde({r_max:.3g})| = {abs(vals[-1]):.3g} >= {DECAY_FRACTION:g} * osc)"
        )
    fld = AdmissibleField(
        b0=float(b0),
        phi_tilde=phi_tilde,
        r_max=r_max,
        osc=osc,
        zeta=2.0 * b0 * math.exp(-2.0 * osc),
        is_constant=False,
    )
    # first two derivatives must stay bounded on the sampled range
    bt = fld.b_tilde(grid[1:])
    if not np.all(np.isfinite(bt)):
        raise ValueError("profile derivatives are unbounded on the sample range")
    return fld


def total_phi(field: AdmissibleField, r) -> float:
    """Convenience wrapper for field.total_phi on a scalar radius."""
    return float(field.total_phi(np.asarray(r, dtype=float)))


def gaussian_profile(amplitude: float, sigma: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Profile amplitude * exp(-(r/sigma)^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def profile(r):
        r = np.asarray(r, dtype=float)
        return amplitude * np.exp(-((r / sigma) ** 2))

    return profile


def profile_from_samples(radii, values) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic-interpolated profile from a two-column table (r, phi_tilde(r)).

    Clamped to the sampled range; radii must be strictly increasing from 0.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.size < 4 or np.any(np.diff(radii) <= 0):
        raise ValueError("need at least 4 strictly increasing radii")
    spline = CubicSpline(radii, values)
    lo, hi = radii[0], radii[-1]

    def profile(r):
        return spline(np.clip(np.asarray(r, dtype=float), lo, hi))

    return profile


def profile_from_csv(path) -> Callable[[np.ndarray], np.ndarray]:
    """Load a sampled profile from a two-column CSV file (r, phi_tilde)."""
    data = np.loadtxt(path, delimiter=",", dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("profile CSV must have two columns: r, phi_tilde(r)")
    return profile_from_samples(data[:, 0], data[:, 1])


_PROFILE_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def profile_from_spec(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """Parse a named closed-form profile: "zero" or "gaussian(A, sigma)"."""
    m = _PROFILE_RE.match(spec)
    if not m:
        raise ValueError(f"unparsable profile spec: {spec!r}")
    name, args = m.group(1).lower(), m.group(2)
    params = [float(p) for p in args.split(",")] if args else []
    if name == "zero":
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if name == "gaussian":
        if len(params) == 1:
            params.append(1.0)
        if len(params) != 2:
            raise ValueError("gaussian profile takes (amplitude, sigma)")
        return gaussian_profile(params[0], params[1])
    raise ValueError(f"unknown profile {name!r}")
