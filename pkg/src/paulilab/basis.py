"""Normalized zero modes of the spin-down Pauli component and their quadrature.

For an admissible radial field the kernel of the spin-down component is
spanned by z^k exp(-phi(|z|)), k = 0, 1, ...  Radial symmetry makes the
angular factors exactly orthogonal, so normalization is the only numerical
step.  All inner products downstream use the Gauss-Legendre rule built here
on the substituted variable u = r^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .field import AdmissibleField


def _u_max(b0: float, K: int) -> float:
    # covers the mass of u^k exp(-b0 u/2) for all k < K with ~1e-16 tails
    return (2.0 * K + 20.0 * math.sqrt(K) + 60.0) / b0


def _log_norm2(field: AdmissibleField, K: int, order: int, u_max: float) -> np.ndarray:
    x, w = leggauss(order)
    u = 0.5 * (x + 1.0) * u_max
    wu = 0.5 * w * u_max
    r = np.sqrt(u)
    phi = field.total_phi(r)
    log_u = np.log(u)
    ks = np.arange(K)[:, None]
    # norm_k^2 = pi * int u^k exp(-2 phi(sqrt(u))) du
    expo = ks * log_u[None, :] - 2.0 * phi[None, :]
    return math.log(math.pi) + logsumexp(expo, b=wu[None, :], axis=1)


@dataclass(frozen=True)
class ZeroModeBasis:
    """K normalized zero modes with shared radial quadrature data.

    nodes_r / weights_u refer to the substitution u = r^2, so that
    2*pi * int f(r) r dr = pi * sum_i weights_u[i] * f(nodes_r[i]).
    Immutable after construction.
    """

    field: AdmissibleField
    K: int
    quad_order: int
    u_max: float
    nodes_r: np.ndarray
    weights_u: np.ndarray
    log_norms: np.ndarray  # log || z^k exp(-phi) ||, length K

    def radial_values(self, k: int, r) -> np.ndarray:
        """Normalized radial factor r^k exp(-phi(r)) / norm_k (full mode times e^{ik theta})."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        rp = r[pos]
        out[pos] = np.exp(k * np.log(rp) - self.field.total_phi(rp) - self.log_norms[k])
        if k == 0:
            out[~pos] = np.exp(-self.field.total_phi(np.zeros(1))[0] - self.log_norms[0])
        return out

    def mode(self, k: int, z) -> np.ndarray:
        """Value of mode k at complex points z (plane identified with C)."""
        z = np.asarray(z, dtype=complex)
        return self.radial_values(k, np.abs(z)) * np.exp(1j * k * np.angle(z))

    def radial_table(self, r) -> np.ndarray:
        """Matrix [k, i] of radial_values(k, r[i]) for all K modes."""
        r = np.asarray(r, dtype=float)
        table = np.zeros((self.K, r.size))
        pos = r > 0
        lr = np.log(r[pos])
        phi = self.field.total_phi(r[pos])
        ks = np.arange(self.K)[:, None]
        table[:, pos] = np.exp(ks * lr[None, :] - phi[None, :] - self.log_norms[:, None])
        if np.any(~pos):
            p0 = self.field.total_phi(np.zeros(1))[0]
            table[0, ~pos] = np.exp(-p0 - self.log_norms[0])
        return table

    def kernel_sum(self, z: complex, w: complex) -> complex:
        """Truncated projection kernel sum_k psi_k(z) * conj(psi_k(w))."""
        vz = np.array([self.mode(k, z) for k in range(self.K)])
        vw = np.array([self.mode(k, w) for k in range(self.K)])
        return complex(np.sum(vz * np.conj(vw)))


def build_zero_modes(field: AdmissibleField, K: int, quad_order: int = 256) -> ZeroModeBasis:
    """Build K zero modes; norms are validated by doubling the quadrature order.

    Raises on quadrature non-convergence (relative change above 1e-10 when
    doubling), reporting the first offending mode index.
    """
    if K < 1:
        raise ValueError("need at least one mode")
    if quad_order < 4:
        raise ValueError("quadrature order too small")
    u_max = _u_max(field.b0, K)
    log_n2 = _log_norm2(field, K, quad_order, u_max)
    log_n2_fine = _log_norm2(field, K, 2 * quad_order, u_max)
    rel = np.abs(np.expm1(log_n2_fine - log_n2))
    bad = np.nonzero(rel > 1e-10)[0]
    if bad.size:
        raise ValueError(
            f"quadrature not converged for mode k={bad[0]} "
            f"(relative norm change {rel[bad[0]]:.2e} when doubling order {quad_order})"
        )
    x, w = leggauss(quad_order)
    u = 0.5 * (x + 1.0) * u_max
    return ZeroModeBasis(
        field=field,
        K=int(K),
        quad_order=int(quad_order),
        u_max=u_max,
        nodes_r=np.sqrt(u),
        weights_u=0.5 * w * u_max,
        log_norms=0.5 * log_n2,
    )


def projection_kernel_constant(b0: float, z: complex, w: complex) -> complex:
    """Closed-form kernel of the zero-mode projection for a constant field.

    (b0/2pi) * exp(-(b0/4)(|z|^2 + |w|^2) + (b0/2) z conj(w)); equals the
    K -> infinity limit of the basis sum.  Only valid for constant fields.
    """
    if not b0 > 0:
        raise ValueError("b0 must be positive")
    z = complex(z)
    w = complex(w)
    return (b0 / (2.0 * math.pi)) * np.exp(
        -0.25 * b0 * (abs(z) ** 2 + abs(w) ** 2) + 0.5 * b0 * z * np.conj(w)
    )


def projection_kernel(field: AdmissibleField, z: complex, w: complex) -> complex:
    """Kernel of the projection; closed form exists for constant fields only."""
    if not field.is_constant:
        raise ValueError(
            "no closed-form projection kernel for nonconstant fields; "
            "use ZeroModeBasis.kernel_sum instead"
        )
    return projection_kernel_constant(field.b0, z, w)
