"""Compressions p U p of decaying symbols to the zero-mode subspace.

Radial symbols take a fast path (the matrix is diagonal by angular
orthogonality, each entry a single log-scaled radial integral).  General
symbols are assembled on a tensor polar grid, radial quadrature times a
uniform angular grid with the angular integral done by FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .basis import ZeroModeBasis

HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-12
TAIL_FRACTION = 1e-10


@dataclass(frozen=True)
class RadialSymbol:
    """Nonnegative radial symbol U(r), optionally compactly supported.

    support, when set, is the radius beyond which U vanishes identically;
    the assembly quadrature is then restricted to it.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    support: Optional[float] = None
    name: str = "radial"

    def __call__(self, r):
        return np.asarray(self.fn(np.asarray(r, dtype=float)), dtype=float)


@dataclass(frozen=True)
class CartesianSymbol:
    """Symbol U(x, y) on the plane, assembled on the polar tensor grid."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "cartesian"

    def __call__(self, x, y):
        return np.asarray(self.fn(x, y), dtype=float)


def disk_symbol(radius: float) -> RadialSymbol:
    """Indicator of the disk r <= radius."""
    return RadialSymbol(
        fn=lambda r: (r <= radius).astype(float),
        support=float(radius),
        name=f"disk({radius:g})",
    )


def gaussian_symbol(rate: float = 1.0) -> RadialSymbol:
    """exp(-rate * r^2)."""
    return RadialSymbol(fn=lambda r: np.exp(-rate * r * r), name=f"gaussian({rate:g})")


def powerlaw_symbol(m: float) -> RadialSymbol:
    """(1 + r^2)^(-m/2), slow polynomial decay of order m."""
    return RadialSymbol(fn=lambda r: (1.0 + r * r) ** (-0.5 * m), name=f"powerlaw({m:g})")


@dataclass(frozen=True)
class ToeplitzOperator:
    basis: ZeroModeBasis
    symbol: object
    matrix: np.ndarray  # K x K Hermitian PSD
    eigs: np.ndarray  # descending
    radial: bool

    @property
    def truncation_floor(self) -> float:
        """Smallest trustworthy threshold: 10x the last retained eigenvalue."""
        return 10.0 * max(float(self.eigs[-1]), 0.0)


def _radial_diagonal(basis: ZeroModeBasis, symbol: RadialSymbol) -> np.ndarray:
    u_hi = basis.u_max
    if symbol.support is not None:
        u_hi = min(u_hi, float(symbol.support) ** 2)
    x, w = leggauss(basis.quad_order)
    u = 0.5 * (x + 1.0) * u_hi
    wu = 0.5 * w * u_hi
    r = np.sqrt(u)
    uvals = symbol(r)
    if np.any(uvals < -1e-12):
        raise ValueError("symbol must be nonnegative")
    uvals = np.clip(uvals, 0.0, None)
    phi = basis.field.total_phi(r)
    log_u = np.log(u)
    ks = np.arange(basis.K)[:, None]
    expo = ks * log_u[None, :] - 2.0 * phi[None, :]
    # d_k = pi * int u^k e^{-2phi} U du / norm_k^2, log-scaled per mode
    log_num = logsumexp(expo, b=(wu * uvals)[None, :], axis=1, return_sign=False)
    return np.exp(math.log(math.pi) + log_num - 2.0 * basis.log_norms)


def _check_tail(basis: ZeroModeBasis, symbol) -> None:
    # mass of U against the ground-mode measure beyond the quadrature range,
    # estimated from the boundary value; rejects growing symbols
    b0 = basis.field.b0
    r_end = math.sqrt(basis.u_max)
    if isinstance(symbol, RadialSymbol):
        if symbol.support is not None and symbol.support <= r_end:
            return
        u_end = float(symbol(np.array([r_end]))[0])
    else:
        u_end = float(np.max(np.abs(symbol(np.array([r_end, -r_end, 0.0, 0.0]), np.array([0.0, 0.0, r_end, -r_end])))))
    osc = basis.field.osc
    tail = u_end * math.exp(-0.5 * b0 * basis.u_max + 2.0 * osc) * (2.0 / b0)
    d0 = math.exp(2.0 * basis.log_norms[0])
    if tail > TAIL_FRACTION * d0:
        raise ValueError(
            "symbol mass beyond the quadrature range is non-negligible; "
            "decaying symbols only"
        )


def assemble(basis: ZeroModeBasis, symbol, n_angles: int = 256) -> ToeplitzOperator:
    """Assemble the K x K matrix of p U p in the zero-mode basis.

    symbol: RadialSymbol, CartesianSymbol, or a bare callable of r (treated
    as radial).  Eigenvalues are returned in descending order.
    """
    if callable(symbol) and not isinstance(symbol, (RadialSymbol, CartesianSymbol)):
        symbol = RadialSymbol(fn=symbol)
    _check_tail(basis, symbol)
    if isinstance(symbol, RadialSymbol):
        diag = _radial_diagonal(basis, symbol)
        matrix = np.diag(diag)
        eigs = np.sort(diag)[::-1]
        return ToeplitzOperator(basis=basis, symbol=symbol, matrix=matrix, eigs=eigs, radial=True)

    # tensor polar grid: radial nodes x uniform angles, FFT in the angle
    r = basis.nodes_r
    wu = basis.weights_u
    theta = 2.0 * math.pi * np.arange(n_angles) / n_angles
    xg = r[:, None] * np.cos(theta)[None, :]
    yg = r[:, None] * np.sin(theta)[None, :]
    uvals = symbol(xg, yg)
    if np.any(uvals < -1e-12):
        raise ValueError("symbol must be nonnegative")
    # c_m(r_i) = int U(r_i, theta) e^{i m theta} dtheta
    four = np.fft.ifft(uvals, axis=1) * (2.0 * math.pi)
    table = basis.radial_table(r)  # [k, i]
    K = basis.K
    matrix = np.empty((K, K), dtype=complex)
    for j in range(K):
        for k in range(K):
            m = (k - j) % n_angles
            matrix[j, k] = 0.5 * np.sum(wu * table[j] * table[k] * four[:, m])
    herm_err = float(np.max(np.abs(matrix - matrix.conj().T)))
    if herm_err > 1e-10:
        raise ValueError(f"assembled matrix not Hermitian (error {herm_err:.2e})")
    matrix = 0.5 * (matrix + matrix.conj().T)
    eigs = np.linalg.eigvalsh(matrix)[::-1]
    return ToeplitzOperator(basis=basis, symbol=symbol, matrix=matrix, eigs=eigs, radial=False)


def counting(op: ToeplitzOperator, r: float) -> int:
    """Number of eigenvalues of p U p above the threshold r.

    r must lie above the truncated spectrum's smallest eigenvalue, else the
    finite matrix undercounts.
    """
    if r <= 0:
        raise ValueError("threshold must be positive")
    if r <= op.eigs[-1]:
        raise ValueError(
            f"threshold {r:g} at or below the truncation floor "
            f"{float(op.eigs[-1]):g}: increase K"
        )
    return int(np.count_nonzero(op.eigs > r))


@dataclass
class CountingCurve:
    """Sampled counting function n(r) with an asymptotic regime tag."""

    thresholds: np.ndarray  # decreasing
    counts: np.ndarray
    regime: str = "none"
    fitted: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.thresholds) >= 0):
            raise ValueError("thresholds must be strictly decreasing")
        if np.any(np.diff(self.counts) < 0):
            raise ValueError("counts must be nondecreasing as r decreases")


def counting_curve(op: ToeplitzOperator, thresholds: Sequence[float]) -> CountingCurve:
    rs = np.asarray(sorted(thresholds, reverse=True), dtype=float)
    floor = op.truncation_floor
    rs = rs[rs >= floor] if floor > 0 else rs
    if rs.size == 0:
        raise ValueError("no thresholds above the truncation floor")
    counts = np.array([counting(op, r) for r in rs])
    return CountingCurve(thresholds=rs, counts=counts)


def model_h1(r, c_m: float, m: float):
    """Power-law counting model c_m * r^(-2/m)."""
    return c_m * np.asarray(r, dtype=float) ** (-2.0 / m)


def model_h2(r, beta: float, mu: float, b0: float):
    """Counting model for symbols with log U ~ -mu * |x|^(2 beta)."""
    r = np.asarray(r, dtype=float)
    lg = np.abs(np.log(r))
    if beta <= 0:
        raise ValueError("beta must be positive")
    if beta < 1:
        return 0.5 * b0 * mu ** (-1.0 / beta) * lg ** (1.0 / beta)
    if beta == 1:
        return lg / math.log1p(2.0 * mu / b0)
    return (beta / (beta - 1.0)) * lg / np.log(lg)


def model_h3(r):
    """Compact-support counting model |ln r| / ln|ln r|."""
    lg = np.abs(np.log(np.asarray(r, dtype=float)))
    return lg / np.log(lg)


@dataclass
class RegimeFit:
    regime: str
    max_rel_dev: float
    max_abs_dev: float
    details: dict


def fit_regime(curve: CountingCurve, regime: str, params: Optional[dict] = None,
               fit_range: Optional[tuple] = None) -> RegimeFit:
    """Compare n(r) against the asymptotic model of the requested regime.

    Requires at least 6 decades of thresholds overall; the comparison can be
    restricted to fit_range = (r_lo, r_hi).  For H2 with beta = 1 the model
    has no free parameters (mu and b0 must be supplied); H1 fits the
    amplitude and reports the log-log slope; H3 reports the normalized ratio.
    """
    params = dict(params or {})
    rs = curve.thresholds
    span = math.log10(rs[0] / rs[-1])
    if span < 6.0 - 1e-9:
        raise ValueError(f"insufficient decades: curve spans {span:.2f} < 6")
    mask = np.ones_like(rs, dtype=bool)
    if fit_range is not None:
        lo, hi = fit_range
        mask = (rs >= lo) & (rs <= hi)
    r = rs[mask]
    n = curve.counts[mask].astype(float)
    if r.size < 4:
        raise ValueError("insufficient thresholds in fit range")

    details: dict = {}
    if regime == "H1":
        m = float(params["m"])
        good = n > 0
        A = np.vstack([np.log(r[good]), np.ones(int(good.sum()))]).T
        coef, *_ = np.linalg.lstsq(A, np.log(n[good]), rcond=None)
        slope = float(coef[0])
        # amplitude fitted at the theoretical exponent -2/m
        c_fit = math.exp(float(np.mean(np.log(n[good]) + (2.0 / m) * np.log(r[good]))))
        model = model_h1(r, c_fit, m)
        details = {"slope": slope, "slope_expected": -2.0 / m, "c_fit": c_fit,
                   "slope_rel_dev": abs(slope - (-2.0 / m)) / (2.0 / m)}
    elif regime == "H2":
        beta = float(params.get("beta", 1.0))
        model = model_h2(r, beta, float(params["mu"]), float(params["b0"]))
        details = {"beta": beta}
    elif regime == "H3":
        model = model_h3(r)
        ratios = n / model
        details = {"ratio_min": float(ratios.min()), "ratio_max": float(ratios.max())}
    else:
        raise ValueError(f"unknown regime {regime!r}")

    rel = np.abs(n / model - 1.0)
    curve.regime = regime
    curve.fitted = details
    return RegimeFit(
        regime=regime,
        max_rel_dev=float(rel.max()),
        max_abs_dev=float(np.max(np.abs(n - model))),
        details=details,
    )
