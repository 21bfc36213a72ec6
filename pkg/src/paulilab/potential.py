"""2x2 complex matrix potentials V = eta * W and their scalar reductions.

W is Hermitian at every point.  Two builtin families: diagonal
diag(w1(x), w2(x)), and a constant Hermitian matrix times a scalar profile
M0 * w(x).  In three dimensions the potential factorizes as
W(X) = M0 * w_perp(x, y) * g(X_par).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .toeplitz import RadialSymbol

HERM_TOL = 1e-13


def polar_decompose_point(M: np.ndarray):
    """Polar factors (|M|, Jt) of a 2x2 complex matrix, M = Jt |M|.

    |M| = (M* M)^(1/2) from the eigendecomposition of the 2x2 Hermitian
    square; Jt = M |M|^+ is the partial isometry on the range (pseudoinverse
    handles rank deficiency).
    """
    M = np.asarray(M, dtype=complex)
    if M.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    H = M.conj().T @ M
    evals, vecs = np.linalg.eigh(H)
    evals = np.clip(evals, 0.0, None)
    s = np.sqrt(evals)
    absM = (vecs * s) @ vecs.conj().T
    tol = 1e-13 * max(float(s.max()), 1.0)
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    pinv = (vecs * inv) @ vecs.conj().T
    Jt = M @ pinv
    return absM, Jt


def sign_matrix_point(W: np.ndarray) -> np.ndarray:
    """Matrix sign of a 2x2 Hermitian W, so that W = J |W|.

    Sum of +/- projectors onto the positive/negative eigenspaces; zero
    eigenvalues contribute a zero block.
    """
    W = np.asarray(W, dtype=complex)
    if W.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if np.max(np.abs(W - W.conj().T)) > 1e-10:
        raise ValueError("sign matrix defined for Hermitian input only")
    evals, vecs = np.linalg.eigh(W)
    tol = 1e-13 * max(float(np.max(np.abs(evals))), 1.0)
    signs = np.where(evals > tol, 1.0, np.where(evals < -tol, -1.0, 0.0))
    return (vecs * signs) @ vecs.conj().T


@dataclass(frozen=True)
class MatrixPotential:
    """Potential V = eta * W with W Hermitian pointwise.

    family:
      "diag"   -- W = diag(w1(r), w2(r)) on the plane (radial profiles)
      "matrix" -- W = M0 * w(r), M0 a constant Hermitian 2x2
    dim 3 requires the separable factor g(X_par):  W = M0 * w_perp * g
    (the diagonal family in 3D shares one g across both entries).
    """

    eta: complex
    family: str
    dim: int
    w1: Optional[Callable] = None
    w2: Optional[Callable] = None
    m0: Optional[np.ndarray] = None
    w_perp: Optional[Callable] = None
    g_par: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.eta == 0:
            raise ValueError("eta must be nonzero")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.dim == 3 and self.g_par is None:
            raise ValueError("3D potentials need the parallel factor g")
        if self.family == "matrix":
            m0 = np.asarray(self.m0, dtype=complex)
            if m0.shape != (2, 2) or np.max(np.abs(m0 - m0.conj().T)) > HERM_TOL:
                raise ValueError("M0 must be a 2x2 Hermitian matrix")

    # -- pointwise data ------------------------------------------------

    def w_matrix(self, r) -> np.ndarray:
        """W at transverse radius r (or radii), shape (..., 2, 2), g excluded."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape + (2, 2), dtype=complex)
        if self.family == "diag":
            out[..., 0, 0] = self.w1(r)
            out[..., 1, 1] = self.w2(r)
        else:
            out = np.multiply.outer(np.asarray(self.w_perp(r), dtype=float),
                                    np.asarray(self.m0, dtype=complex))
        return out

    def abs_w11(self, r) -> np.ndarray:
        """(1,1) entry of |W| at transverse radius r (parallel factor excluded)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        wm = self.w_matrix(r)
        out = np.empty(r.shape, dtype=float)
        for idx in np.ndindex(r.shape):
            absM, _ = polar_decompose_point(wm[idx])
            out[idx] = absM[0, 0].real
        return out

    def v11_symbol_2d(self) -> RadialSymbol:
        """|V|_11 as a radial symbol (2D potentials)."""
        if self.dim != 2:
            raise ValueError("2D reduction of a 3D potential; use v11_integrated")
        scale = abs(self.eta)
        return RadialSymbol(fn=lambda r: scale * self.abs_w11(r), name="|V|11")

    def norm_inf(self, r_samples=None) -> float:
        """Sup of the pointwise spectral norm of V over sample radii."""
        if r_samples is None:
            r_samples = np.linspace(0.0, 20.0, 2001)
        r = np.asarray(r_samples, dtype=float)
        wm = self.w_matrix(r)
        sv = np.linalg.svd(wm, compute_uv=False)
        top = float(np.max(sv))
        if self.dim == 3:
            t = np.linspace(-30.0, 30.0, 4001)
            top *= float(np.max(np.abs(self.g_par(t))))
        return abs(self.eta) * top

    def check_hermitian(self, r_samples) -> float:
        wm = self.w_matrix(np.asarray(r_samples, dtype=float))
        return float(np.max(np.abs(wm - np.conj(np.swapaxes(wm, -1, -2)))))


def diag_potential(eta, w1, w2, dim=2, g_par=None, name="diag") -> MatrixPotential:
    return MatrixPotential(eta=complex(eta), family="diag", dim=dim,
                           w1=w1, w2=w2, g_par=g_par, name=name)


def matrix_potential(eta, m0, w_perp, dim=2, g_par=None, name="matrix") -> MatrixPotential:
    return MatrixPotential(eta=complex(eta), family="matrix", dim=dim,
                           m0=np.asarray(m0, dtype=complex), w_perp=w_perp,
                           g_par=g_par, name=name)


def with_eta(pot: MatrixPotential, eta) -> MatrixPotential:
    return replace(pot, eta=complex(eta))


def eta_from_polar(modulus: float, argument: float) -> complex:
    if modulus <= 0:
        raise ValueError("eta must be nonzero")
    return modulus * cmath.exp(1j * argument)


def reduce_V11_3d(pot: MatrixPotential, x_limit: float = np.inf) -> RadialSymbol:
    """Half-integral of |V|_11 over the parallel direction, as a radial symbol.

    For separable potentials this is |eta| * |M0|_11 * w_perp(r) * (1/2) int g;
    the integral is evaluated by adaptive quadrature and must converge (the
    decay assumption makes it absolutely convergent).
    """
    if pot.dim != 3:
        raise ValueError("parallel reduction applies to 3D potentials")
    half, err = quad(lambda t: float(pot.g_par(np.asarray([t]))[0]), 0.0, x_limit, limit=400)
    g_int = 2.0 * half
    if not np.isfinite(g_int) or err > 1e-8 * max(abs(g_int), 1.0):
        raise ValueError("parallel integral of g did not converge")
    scale = 0.5 * abs(pot.eta) * g_int

    def fn(r):
        return scale * pot.abs_w11(r)

    return RadialSymbol(fn=fn, name="V11_integrated")


def reduce_W11_3d(pot: MatrixPotential) -> RadialSymbol:
    """Same reduction for |W|_11 (eta scaled out)."""
    sym = reduce_V11_3d(pot)
    scale = 1.0 / abs(pot.eta)
    return RadialSymbol(fn=lambda r: scale * sym(r), name="W11_integrated")


def check_parallel_decay(pot: MatrixPotential, m_required: float = 3.0) -> float:
    """Tail-fit exponent of g: g(t) <= C <t>^-m with m > m_required.

    Returns the fitted m; raises if the tail decays too slowly.
    """
    if pot.dim != 3:
        raise ValueError("decay check applies to 3D potentials")
    t = np.geomspace(5.0, 40.0, 24)
    g = np.asarray(pot.g_par(t), dtype=float)
    g = np.abs(g)
    if np.any(g == 0):
        return float("inf")  # compactly supported or super-polynomial decay
    A = np.vstack([np.log(np.hypot(1.0, t)), np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(g), rcond=None)
    m_fit = -float(coef[0])
    if m_fit <= m_required:
        raise ValueError(f"parallel decay exponent {m_fit:.2f} <= {m_required}")
    return m_fit


def check_transverse_decay(pot: MatrixPotential, r_hi: float = 40.0) -> float:
    """Spot check that the transverse data decays (bounded envelope F).

    Returns the ratio of the envelope at r_hi to its maximum; raises when the
    tail has not decayed by at least two orders of magnitude.
    """
    r = np.linspace(0.0, r_hi, 2001)
    wm = pot.w_matrix(r)
    env = np.max(np.abs(wm).reshape(r.size, -1), axis=1)
    peak = float(env.max())
    if peak == 0.0:
        return 0.0
    ratio = float(env[-1] / peak)
    if ratio > 1e-2:
        raise ValueError(f"transverse envelope has not decayed at r={r_hi:g}")
    return ratio
