"""Regularized determinants, winding-number indices, characteristic values.

The index of a finite matrix family A(z) along a closed contour is the
winding number of det A(z), accumulated from phase increments of the plain
(order-1) determinant.  Higher-order regularized determinants share their
zero set with the plain one on finite matrices, so the index is always
computed at order 1; det_p is kept for conditioning experiments and the
Lipschitz property.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

SMIN_FLOOR = 1e-10
PHASE_CAP = math.pi / 4
WINDING_RESIDUAL = 0.1


def det_regularized(T: np.ndarray, p: int) -> complex:
    """det_p(I - T) = prod (1 - mu) exp(sum_{k<p} mu^k / k) over eigenvalues of T.

    p = 1 reduces to det(I - T); vanishes exactly when 1 is an eigenvalue.
    """
    if p < 1:
        raise ValueError("regularization order must be >= 1")
    T = np.asarray(T, dtype=complex)
    mu = np.linalg.eigvals(T)
    out = complex(1.0)
    for m in mu:
        corr = sum(m**k / k for k in range(1, p))
        out *= (1.0 - m) * cmath.exp(corr)
    return out


def schatten_norm(T: np.ndarray, q: float) -> float:
    s = np.linalg.svd(np.asarray(T, dtype=complex), compute_uv=False)
    return float(np.sum(s**q) ** (1.0 / q))


def lipschitz_gamma_required(T1: np.ndarray, T2: np.ndarray, p: int) -> float:
    """Smallest Gamma making the det_p Lipschitz bound hold for this pair."""
    lhs = abs(det_regularized(T1, p) - det_regularized(T2, p))
    dn = schatten_norm(T1 - T2, p)
    if dn == 0 or lhs == 0:
        return 0.0
    base = (schatten_norm(T1, p) + schatten_norm(T2, p) + 1.0) ** p
    return math.log(lhs / dn) / base if lhs > dn else 0.0


@dataclass
class OperatorFamily:
    """Finite matrix-valued function of one complex parameter.

    evaluate(z) must be deterministic.  Derivatives come from 4th-order
    central differences with step 1e-6 * max(|z|, 1); families assembled by
    quadrature have no symbolic form.  evaluate_batch, when provided, maps an
    array of parameters to a stacked (n, N, N) array and is used by grid scans.
    """

    evaluate: Callable[[complex], np.ndarray]
    order: int = 1
    domain: str = ""
    name: str = ""
    evaluate_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, z: complex) -> np.ndarray:
        return np.asarray(self.evaluate(z), dtype=complex)

    def batch(self, zs: np.ndarray) -> np.ndarray:
        if self.evaluate_batch is not None:
            return np.asarray(self.evaluate_batch(np.asarray(zs, dtype=complex)), dtype=complex)
        return np.stack([self(z) for z in np.asarray(zs, dtype=complex)])

    def derivative(self, z: complex) -> np.ndarray:
        h = 1e-6 * max(abs(z), 1.0)
        d1 = (self(z + h) - self(z - h)) / (2 * h)
        d2 = (self(z + 2 * h) - self(z - 2 * h)) / (4 * h)
        # Richardson: eliminates the O(h^2) term
        return (4.0 * d1 - d2) / 3.0


@dataclass(frozen=True)
class Contour:
    """Piecewise-smooth closed loop, positively oriented.

    point(t) parametrizes the loop over t in [0, 1) with point(0) = point(1).
    """

    kind: str
    data: tuple
    n_initial: int = 128

    @staticmethod
    def circle(center: complex, radius: float, n_initial: int = 64) -> "Contour":
        if radius <= 0:
            raise ValueError("radius must be positive")
        return Contour(kind="circle", data=(complex(center), float(radius)),
                       n_initial=n_initial)

    @staticmethod
    def polygon(vertices: Sequence[complex], n_initial: int = 128) -> "Contour":
        vs = tuple(complex(v) for v in vertices)
        if len(vs) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        return Contour(kind="polygon", data=vs, n_initial=n_initial)

    @staticmethod
    def rectangle(z_lo: complex, z_hi: complex, n_initial: int = 128) -> "Contour":
        a, b = complex(z_lo), complex(z_hi)
        return Contour.polygon(
            [a, complex(b.real, a.imag), b, complex(a.real, b.imag)],
            n_initial=n_initial,
        )

    def point(self, t) -> np.ndarray:
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        if self.kind == "circle":
            c, r = self.data
            return c + r * np.exp(2j * math.pi * t)
        vs = np.asarray(self.data + (self.data[0],), dtype=complex)
        seg = np.minimum((t * (len(vs) - 1)).astype(int), len(vs) - 2)
        frac = t * (len(vs) - 1) - seg
        return vs[seg] * (1 - frac) + vs[seg + 1] * frac

    def scaled(self, factor: complex) -> "Contour":
        """Image of the contour under multiplication by a nonzero factor."""
        if factor == 0:
            raise ValueError("factor must be nonzero")
        if self.kind == "circle":
            c, r = self.data
            return Contour(kind="circle", data=(c * factor, r * abs(factor)),
                           n_initial=self.n_initial)
        vs = tuple(v * factor for v in self.data)
        # negative-determinant maps would flip orientation; a complex scalar keeps it
        return Contour(kind="polygon", data=vs, n_initial=self.n_initial)


def _log_det(mat: np.ndarray) -> Tuple[float, float]:
    sign, logabs = np.linalg.slogdet(mat)
    if not np.isfinite(logabs) or sign == 0:
        return -math.inf, 0.0
    return float(logabs), float(np.angle(sign))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def index_along_contour(fam: OperatorFamily, contour: Contour,
                        max_samples: int = 200_000,
                        check_smin: bool = True) -> int:
    """Winding number of det(fam(z)) along the contour, an integer.

    Adaptive bisection of the parameter interval until every phase increment
    of the determinant is below pi/4.  The family must be invertible on the
    contour (minimum singular value above 1e-10 at the initial samples);
    a non-integer accumulated winding reports refinement failure.

    Always uses the plain (order-1) determinant: for order >= 2 the
    regularizing correction is holomorphic and non-vanishing, so its winding
    need not equal the family index.
    """
    n0 = contour.n_initial
    ts = list(np.linspace(0.0, 1.0, n0, endpoint=False)) + [1.0]
    zs = contour.point(np.asarray(ts))
    mats = [fam(z) for z in zs]
    if check_smin:
        for z, m in zip(zs, mats):
            smin = float(np.linalg.svd(m, compute_uv=False)[-1])
            if smin < SMIN_FLOOR:
                raise ValueError(
                    f"eigenvalue on contour: |det| degenerate at z = {z:.6g} "
                    f"(smin = {smin:.2e})"
                )
    phases = [_log_det(m)[1] for m in mats]

    # stack of (t_left, t_right, phase_left, phase_right)
    total = 0.0
    n_used = len(ts)
    stack = [(ts[i], ts[i + 1], phases[i], phases[i + 1]) for i in range(len(ts) - 1)]
    while stack:
        t0, t1, p0, p1 = stack.pop()
        dp = _wrap(p1 - p0)
        if abs(dp) < PHASE_CAP:
            total += dp
            continue
        if n_used >= max_samples:
            raise ValueError("refinement failure: phase increments not resolving")
        tm = 0.5 * (t0 + t1)
        zm = complex(contour.point(np.asarray([tm]))[0])
        mm = fam(zm)
        if check_smin:
            smin = float(np.linalg.svd(mm, compute_uv=False)[-1])
            if smin < SMIN_FLOOR:
                raise ValueError(
                    f"eigenvalue on contour: |det| degenerate at z = {zm:.6g}"
                )
        pm = _log_det(mm)[1]
        n_used += 1
        stack.append((t0, tm, p0, pm))
        stack.append((tm, t1, pm, p1))

    winding = total / (2 * math.pi)
    nearest = round(winding)
    if abs(winding - nearest) > WINDING_RESIDUAL:
        raise ValueError(
            f"refinement failure: accumulated winding {winding:.4f} not an integer"
        )
    return int(nearest)


@dataclass
class CharacteristicValue:
    z: complex
    multiplicity: int
    cluster: bool = False
    residual: float = 0.0


@dataclass(frozen=True)
class AnnulusRegion:
    """Search annulus r_in < |z| < r_out, optionally restricted in argument."""

    r_in: float
    r_out: float
    arg_min: float = -math.pi
    arg_max: float = math.pi

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise ValueError("need 0 < r_in < r_out")

    def contains(self, z: complex, slack: float = 1e-9) -> bool:
        rz = abs(z)
        if not (self.r_in * (1 - slack) <= rz <= self.r_out * (1 + slack)):
            return False
        a = np.angle(z)
        lo, hi = self.arg_min, self.arg_max
        if hi - lo >= 2 * math.pi - 1e-12:
            return True
        # compare on the circle
        aa = (a - lo) % (2 * math.pi)
        return aa <= (hi - lo) + slack

    def grid(self, n_r: int, n_arg: int, pad: float = 1.0) -> np.ndarray:
        radii = np.geomspace(self.r_in / pad, self.r_out * pad, n_r)
        full = self.arg_max - self.arg_min >= 2 * math.pi - 1e-12
        if full:
            args = self.arg_min + (self.arg_max - self.arg_min) * np.arange(n_arg) / n_arg
        else:
            args = np.linspace(self.arg_min, self.arg_max, n_arg)
        return radii[:, None] * np.exp(1j * args)[None, :]


def check_analytic(fam: OperatorFamily, z: complex, tol: float = 1e-6) -> float:
    """Cauchy-Riemann residual of log det at z; raises above tol."""
    h = 1e-5 * max(abs(z), 1.0)

    def logd(w):
        la, ph = _log_det(fam(w))
        return la, ph

    lxp, pxp = logd(z + h)
    lxm, pxm = logd(z - h)
    lyp, pyp = logd(z + 1j * h)
    lym, pym = logd(z - 1j * h)
    dx = (lxp - lxm) / (2 * h) + 1j * _wrap(pxp - pxm) / (2 * h)
    dy = (lyp - lym) / (2 * h) + 1j * _wrap(pyp - pym) / (2 * h)
    res = abs(0.5 * (dx + 1j * dy)) / max(abs(0.5 * (dx - 1j * dy)), 1.0)
    if res > tol:
        raise ValueError(f"family not analytic near z = {z:.6g} (CR residual {res:.2e})")
    return res


def _newton_refine(fam: OperatorFamily, z0: complex, region: AnnulusRegion,
                   rel_tol: float = 1e-12, max_iter: int = 80) -> Optional[complex]:
    """Newton iteration z -> z - det/det' via the trace of F^{-1} F'."""
    z = complex(z0)
    for _ in range(max_iter):
        F = fam(z)
        Fp = fam.derivative(z)
        try:
            X = np.linalg.solve(F, Fp)
        except np.linalg.LinAlgError:
            return z  # exactly singular: sitting on the zero
        g = np.trace(X)
        # a zero at distance d forces |d log det| >= 1/d - background;
        # a tiny derivative means no zero within reach of the region
        if abs(g) * 10.0 * region.r_out < 1.0:
            return None
        step = -1.0 / g
        if not np.isfinite(step):
            return None
        # keep the iteration from tunnelling across the annulus
        max_step = 0.5 * abs(z)
        if abs(step) > max_step:
            step *= max_step / abs(step)
        z = z + step
        if abs(z) > 2.0 * region.r_out or abs(z) < 0.5 * region.r_in:
            return None
        if abs(step) <= rel_tol * max(abs(z), region.r_in):
            return z
    return None


def characteristic_values(fam: OperatorFamily, region: AnnulusRegion,
                          grid: Tuple[int, int] = (64, 64),
                          mult_radius: float = 1e-3,
                          analytic_check: bool = True) -> List[CharacteristicValue]:
    """Zeros of det(fam(z)) in the region, with winding multiplicities.

    Coarse log-polar scan of log|det| for local minima, Newton refinement on
    the determinant, then multiplicity by the index along a small circle
    (radius mult_radius * |z0|).  Zeros closer than twice that radius are
    merged into one record with summed multiplicity and the cluster flag set.

    The scan grid is padded by a factor 1.3 in radius so that minima sitting
    on the requested boundary are still interior to the grid; only interior
    grid minima seed the refinement (monotone determinant growth toward a
    region edge would otherwise seed the whole edge).
    """
    zs = region.grid(*grid, pad=1.3)
    mats = fam.batch(zs.ravel())
    sign, logabs = np.linalg.slogdet(mats)
    L = np.where(np.isfinite(logabs.reshape(zs.shape)),
                 logabs.reshape(zs.shape), -np.inf)

    if analytic_check:
        mid = zs[zs.shape[0] // 2, zs.shape[1] // 2]
        check_analytic(fam, complex(mid))

    full_circle = region.arg_max - region.arg_min >= 2 * math.pi - 1e-12
    n_r, n_arg = L.shape
    # interior local minima (argument wraps on a full circle)
    inner = L[1:-1, :]
    stacks = []
    for di in (-1, 0, 1):
        rows = L[1 + di:n_r - 1 + di, :]
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            if full_circle:
                stacks.append(np.roll(rows, -dj, axis=1))
            else:
                shifted = np.full_like(rows, np.inf)
                if dj == 0:
                    shifted = rows
                elif dj == 1:
                    shifted[:, :-1] = rows[:, 1:]
                else:
                    shifted[:, 1:] = rows[:, :-1]
                stacks.append(shifted)
    # require a dip visibly above floating-point noise: a genuine zero one
    # cell away contributes order-one log contrast, a noise surface ~1e-12
    contrast = np.maximum.reduce(stacks) - inner
    is_min = (inner <= np.minimum.reduce(stacks)) & (contrast > 1e-9)
    if not full_circle:
        is_min[:, 0] = False
        is_min[:, -1] = False
    seeds = [zs[1 + i, j] for i, j in zip(*np.nonzero(is_min))]

    zeros: List[complex] = []
    for s in seeds:
        z = _newton_refine(fam, complex(s), region)
        if z is None or not region.contains(z):
            continue
        if any(abs(z - w) <= 1e-8 * max(abs(z), region.r_in) for w in zeros):
            continue
        # confirm an actual singularity, not a saddle of log|det|
        smin = float(np.linalg.svd(fam(z), compute_uv=False)[-1])
        scale = float(np.linalg.norm(fam(z), ord=2))
        if smin > 1e-6 * max(scale, 1.0):
            continue
        zeros.append(z)

    zeros.sort(key=abs)
    # group zeros that cannot be separated by the multiplicity circle
    groups: List[List[complex]] = []
    for z in zeros:
        placed = False
        for grp in groups:
            if any(abs(z - w) < 2 * mult_radius * abs(w) for w in grp):
                grp.append(z)
                placed = True
                break
        if not placed:
            groups.append([z])

    out: List[CharacteristicValue] = []
    for grp in groups:
        center = complex(np.mean(grp))
        spread = max((abs(z - center) for z in grp), default=0.0)
        rho = max(mult_radius * abs(center), 2.0 * spread)
        circ = Contour.circle(center, rho, n_initial=64)
        mult = index_along_contour(fam, circ, check_smin=False)
        smin = float(np.linalg.svd(fam(center if len(grp) > 1 else grp[0]),
                                   compute_uv=False)[-1])
        if mult <= 0:
            continue
        out.append(CharacteristicValue(
            z=center if len(grp) > 1 else grp[0],
            multiplicity=int(mult),
            cluster=len(grp) > 1,
            residual=smin,
        ))
    return out


def jensen_zero_bound(boundary_values: Sequence[complex], interior_value: complex,
                      c_prime: float = 1.0) -> float:
    """Un-normalized zero-count diagnostic from boundary log-magnitudes.

    c_prime * (mean of ln|g| on the boundary - ln|g(interior point)|); used
    only for the monitored upper-bound experiments, never as a certificate.
    """
    g = np.asarray(boundary_values, dtype=complex)
    if np.any(g == 0):
        raise ValueError("zero on the boundary sample set")
    if interior_value == 0:
        raise ValueError("interior value must be nonzero")
    return float(c_prime * (np.mean(np.log(np.abs(g))) - math.log(abs(interior_value))))
