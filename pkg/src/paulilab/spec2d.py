"""2D engine: Birman-Schwinger reduction near the ground energy.

The weighted-resolvent family for the perturbed planar operator is
represented exactly on the retained unperturbed modes: with coupling matrix
C[m, n] = <e_m, W e_n> over transverse modes e_n of energy lambda_n,

    F(mu) = I + eta_eff * C * diag(1 / (lambda_n - mu)),

whose zeros in the punctured gap disk are the discrete eigenvalues of the
perturbed operator, with winding-number multiplicities.  Radial potentials
make C block-diagonal in angular momentum, so the search runs per block.
For nonconstant fields only the zero-mode (leading-order) block is available
together with the finite-difference grid oracle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _landau
from .basis import ZeroModeBasis
from .detindex import AnnulusRegion, CharacteristicValue, OperatorFamily, characteristic_values
from .field import AdmissibleField
from .potential import MatrixPotential

STRIP_TOL = 1e-8


def _profile_on(pot: MatrixPotential, which: str, r: np.ndarray) -> np.ndarray:
    if pot.family == "diag":
        fn = pot.w1 if which == "w1" else pot.w2
        return np.asarray(fn(r), dtype=float)
    return np.asarray(pot.w_perp(r), dtype=float)


@dataclass
class Pauli2DModel:
    """Constant or radial field, zero-mode basis, matrix potential, L levels.

    eps scales the potential; eta_eff = eps * pot.eta is the full coupling.
    leading_order is forced for nonconstant fields (no closed higher levels).
    """

    field: AdmissibleField
    basis: ZeroModeBasis
    pot: MatrixPotential
    L: int = 12
    eps: float = 1.0
    leading_order: bool = False
    _blocks: Dict[int, Tuple[np.ndarray, np.ndarray]] = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.pot.dim != 2:
            raise ValueError("2D model needs a 2D potential")
        if not self.field.is_constant:
            self.leading_order = True
        self.pot.check_hermitian(np.linspace(0.0, 10.0, 101))

    @property
    def eta_eff(self) -> complex:
        return self.eps * self.pot.eta

    @property
    def zeta(self) -> float:
        return self.field.zeta

    @property
    def norm_v(self) -> float:
        return self.eps * self.pot.norm_inf()

    @property
    def l_values(self) -> range:
        lo = 0 if self.leading_order else -self.L
        return range(lo, self.basis.K)

    # -- per-angular-momentum data --------------------------------------

    def _spin_active(self) -> List[int]:
        r = self.basis.nodes_r
        if self.pot.family == "diag":
            active = []
            if np.max(np.abs(_profile_on(self.pot, "w1", r))) > 0:
                active.append(0)
            if np.max(np.abs(_profile_on(self.pot, "w2", r))) > 0:
                active.append(1)
            return active or [0]
        m0 = np.asarray(self.pot.m0)
        active = [s for s in (0, 1) if np.max(np.abs(m0[s])) > 0]
        return active or [0]

    def block_data(self, l: int) -> Tuple[np.ndarray, np.ndarray]:
        """(energies, coupling matrix) for angular momentum l."""
        if l in self._blocks:
            return self._blocks[l]
        b0 = self.field.b0
        r = self.basis.nodes_r
        wu = self.basis.weights_u
        if self.leading_order:
            if l < 0:
                raise ValueError("leading-order model has no negative angular momenta")
            modes = [(0, 0, 0.0)]
            vals = [self.basis.radial_values(l, r)]
        else:
            modes = _landau.modes_for_block(b0, l, self.L, spins=tuple(self._spin_active()))
            vals = [_landau.radial_values(b0, n, l, r) for (_s, n, _e) in modes]
        energies = np.array([e for (_s, _n, e) in modes])
        nm = len(modes)
        C = np.zeros((nm, nm), dtype=complex)
        if self.pot.family == "diag":
            profs = {0: _profile_on(self.pot, "w1", r), 1: _profile_on(self.pot, "w2", r)}
            for a, (sa, _na, _ea) in enumerate(modes):
                for b, (sb, _nb, _eb) in enumerate(modes):
                    if sa != sb:
                        continue
                    C[a, b] = math.pi * np.sum(wu * vals[a] * vals[b] * profs[sa])
        else:
            m0 = np.asarray(self.pot.m0, dtype=complex)
            prof = _profile_on(self.pot, "w", r)
            for a, (sa, _na, _ea) in enumerate(modes):
                for b, (sb, _nb, _eb) in enumerate(modes):
                    C[a, b] = m0[sa, sb] * math.pi * np.sum(wu * vals[a] * vals[b] * prof)
        self._blocks[l] = (energies, C)
        return self._blocks[l]

    def _check_mu(self, mu: complex) -> complex:
        mu = complex(mu)
        if mu == 0:
            raise ValueError("the family is singular at mu = 0")
        if abs(mu) >= self.zeta:
            raise ValueError(f"|mu| = {abs(mu):.3g} outside the gap disk (zeta = {self.zeta:.3g})")
        return mu


def block_family(model: Pauli2DModel, l: int) -> OperatorFamily:
    """Birman-Schwinger family at angular momentum l, with batched evaluation."""
    energies, C = model.block_data(l)
    eta = model.eta_eff
    eye = np.eye(len(energies), dtype=complex)

    def evaluate(mu: complex) -> np.ndarray:
        mu = model._check_mu(mu)
        return eye + eta * C * (1.0 / (energies - mu))[None, :]

    def evaluate_batch(mus: np.ndarray) -> np.ndarray:
        mus = np.asarray(mus, dtype=complex)
        res = 1.0 / (energies[None, :] - mus[:, None])  # [t, n]
        return eye[None, :, :] + eta * C[None, :, :] * res[:, None, :]

    return OperatorFamily(evaluate=evaluate, evaluate_batch=evaluate_batch,
                          domain=f"0<|mu|<{model.zeta:g}", name=f"bs2d[l={l}]")


def assemble_bs_family_2d(model: Pauli2DModel) -> OperatorFamily:
    """Full family as one block-diagonal matrix over every retained l."""
    blocks = [model.block_data(l) for l in model.l_values]
    sizes = [len(e) for e, _ in blocks]
    total = sum(sizes)
    eta = model.eta_eff

    def evaluate(mu: complex) -> np.ndarray:
        mu = model._check_mu(mu)
        out = np.eye(total, dtype=complex)
        off = 0
        for (energies, C), nm in zip(blocks, sizes):
            out[off:off + nm, off:off + nm] += eta * C * (1.0 / (energies - mu))[None, :]
            off += nm
        return out

    return OperatorFamily(evaluate=evaluate, domain=f"0<|mu|<{model.zeta:g}", name="bs2d")


def a_perp_form_matrix(model: Pauli2DModel, mu: complex) -> np.ndarray:
    """Sesquilinear-form matrix of the holomorphic part on the weighted frame.

    Hermitian for real eta and mu on the negative real axis (self-adjointness
    of the unperturbed resolvent off the spectrum); used as a consistency
    check of the assembled resolvent data.  Only meaningful for potentials of
    definite sign, where the frame Gram equals the coupling matrix.
    """
    mu = complex(mu)
    mats = []
    for l in model.l_values:
        energies, C = model.block_data(l)
        zero = energies == 0.0
        denom = np.where(zero, 1.0, energies - mu)
        c = np.where(zero, 1.0, -mu / denom)
        mats.append(C @ np.diag(c) @ C)
    total = sum(m.shape[0] for m in mats)
    out = np.zeros((total, total), dtype=complex)
    off = 0
    for m in mats:
        out[off:off + m.shape[0], off:off + m.shape[0]] = m
        off += m.shape[0]
    return out


@dataclass
class EigRecord:
    mu: complex
    multiplicity: int
    cluster: bool
    block_l: Optional[int] = None

    @property
    def abs_mu(self) -> float:
        return abs(self.mu)


@dataclass
class SpectralReport2D:
    """Located eigenvalues near zero plus the run's geometry and couplings."""

    records: List[EigRecord]
    eta_eff: complex
    zeta: float
    norm_v: float
    r_in: float
    r_out: float

    def count_above(self, r: float) -> int:
        return sum(rec.multiplicity for rec in self.records if rec.abs_mu > r)

    def count_annulus(self, r_lo: float, r_hi: float) -> int:
        return sum(rec.multiplicity for rec in self.records
                   if r_lo < rec.abs_mu < r_hi)

    def strip_violations(self, tol: float = STRIP_TOL) -> List[EigRecord]:
        """Records outside the numerical-range strip |Im mu| <= ||V||."""
        return [rec for rec in self.records
                if abs(rec.mu.imag) > self.norm_v + tol]


def eigenvalues_near_zero_2d(model: Pauli2DModel, r_in: float, r_out: float,
                             grid: Tuple[int, int] = (64, 64)) -> SpectralReport2D:
    """Locate the family's characteristic values in r_in < |mu| < r_out."""
    if not 0 < r_in < r_out < model.zeta:
        raise ValueError("need 0 < r_in < r_out < zeta")
    region = AnnulusRegion(r_in=r_in, r_out=r_out)
    records: List[EigRecord] = []
    for l in model.l_values:
        fam = block_family(model, l)
        found = characteristic_values(fam, region, grid=grid, analytic_check=False)
        for cv in found:
            records.append(EigRecord(mu=cv.z, multiplicity=cv.multiplicity,
                                     cluster=cv.cluster, block_l=l))
    records.sort(key=lambda rec: -rec.abs_mu)
    return SpectralReport2D(records=records, eta_eff=model.eta_eff, zeta=model.zeta,
                            norm_v=model.norm_v, r_in=r_in, r_out=r_out)


def leading_order_predictions(model: Pauli2DModel, count: int) -> np.ndarray:
    """First-order eigenvalues eta_eff * mu_j of the zero-mode compression."""
    diag = []
    for l in range(min(count, model.basis.K)):
        energies, C = model.block_data(l)
        j = int(np.argmin(np.abs(energies)))
        if energies[j] == 0.0:
            diag.append(model.eta_eff * C[j, j])
    vals = np.array(diag, dtype=complex)
    return vals[np.argsort(-np.abs(vals))][:count]


def in_sector(mu: complex, eta: complex, delta: float, sign: int = 1,
              tol: float = 1e-9) -> bool:
    """Membership of mu in the closed wedge sign * eta * {x > 0, |y| <= delta x}."""
    w = mu / (sign * eta)
    return w.real > 0 and abs(w.imag) <= delta * w.real + tol * abs(w)


@dataclass
class LocalizationResult:
    passed: bool
    checked: int
    offenders: List[EigRecord]


def verify_localization_2d(report: SpectralReport2D, eta: complex, delta: float,
                           r: float, r0: float, sign: int = 1) -> LocalizationResult:
    """Every located eigenvalue with r < |mu| < r0 must lie in the wedge."""
    offenders = []
    checked = 0
    for rec in report.records:
        if not (r < rec.abs_mu < r0):
            continue
        checked += 1
        if not in_sector(rec.mu, eta, delta, sign=sign):
            offenders.append(rec)
    return LocalizationResult(passed=not offenders, checked=checked, offenders=offenders)


def check_condition_2_10(model: Pauli2DModel, kernel_tol: float = 1e-10) -> float:
    """Invertibility margin of I - eta * A'(0) Pi on the retained modes.

    Pi projects onto the numerical kernel of the zero-energy coupling
    (singular values below kernel_tol); the derivative at 0 uses the family's
    finite-difference rule.  A margin below 1e-8 means the experiment should
    rescale the coupling.
    """
    blocks = [model.block_data(l) for l in model.l_values]
    sizes = [len(e) for e, _ in blocks]
    total = sum(sizes)

    def a_hat(mu: complex) -> np.ndarray:
        out = np.zeros((total, total), dtype=complex)
        off = 0
        for (energies, C), nm in zip(blocks, sizes):
            zero = energies == 0.0
            denom = np.where(zero, 1.0, energies - mu)
            c = np.where(zero, 1.0, -mu / denom)
            out[off:off + nm, off:off + nm] = C * c[None, :]
            off += nm
        return out

    fam = OperatorFamily(evaluate=a_hat, name="a_hat")
    A0 = a_hat(0.0)
    u, s, vh = np.linalg.svd(A0)
    kernel = s < kernel_tol
    Pi = vh.conj().T[:, kernel] @ vh[kernel, :]
    Ap0 = fam.derivative(0.0)
    M = np.eye(total, dtype=complex) - model.eta_eff * (Ap0 @ Pi)
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def counting_vs_toeplitz_2d(report: SpectralReport2D, top, r_values: Sequence[float],
                            scale: Optional[float] = None) -> List[dict]:
    """Annulus counts against the zero-mode compression counting function.

    scale converts compression thresholds to eigenvalue magnitudes; defaults
    to |eta_eff| (first-order relation |mu| ~ |eta_eff| * mu_j).
    """
    from .toeplitz import counting as _counting

    scale = abs(report.eta_eff) if scale is None else scale
    rows = []
    for r in sorted(r_values, reverse=True):
        s = scale * r
        if s <= report.r_in or s >= report.r_out:
            continue
        ne = report.count_above(s)
        nt = _counting(top, r)
        rows.append({"r": r, "threshold": s, "eig_count": ne, "toeplitz_count": nt,
                     "ratio": ne / nt if nt else math.inf})
    return rows


def upper_bound_table(report: SpectralReport2D, top_v11, s_values: Sequence[float]) -> List[dict]:
    """Monitored local-bound ratio: count in (s, 2s) over Tr * |ln s| + 1.

    top_v11 must be the compression of the full-strength |V|_11 so thresholds
    live on the eigenvalue scale.  The theorem's constant is unknown, so only
    the trend of the ratio is meaningful.
    """
    from .toeplitz import counting as _counting

    rows = []
    for s in sorted(s_values, reverse=True):
        if s <= report.r_in or 2 * s >= report.r_out:
            continue
        cnt = report.count_annulus(s, 2 * s)
        tr = _counting(top_v11, s)
        rows.append({"s": s, "annulus_count": cnt, "trace_count": tr,
                     "ratio": cnt / (tr * abs(math.log(s)) + 1.0)})
    return rows


def ratio_trend_slope(rows: Sequence[dict], x_key: str = "s",
                      y_key: str = "ratio") -> float:
    """Least-squares slope of log(ratio) against log(threshold)."""
    xs = np.array([row[x_key] for row in rows if row[y_key] > 0], dtype=float)
    ys = np.array([row[y_key] for row in rows if row[y_key] > 0], dtype=float)
    if xs.size < 3:
        raise ValueError("not enough nonzero rows for a trend")
    A = np.vstack([np.log(xs), np.ones_like(xs)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(ys), rcond=None)
    return float(coef[0])


# -- independent finite-difference oracle -------------------------------


@dataclass
class GridPauli2D:
    """Five-point magnetic discretization of the planar operator on a box."""

    field: AdmissibleField
    box: float
    n: int
    h: float
    h_minus: sp.csr_matrix
    h_plus: sp.csr_matrix
    v_blocks: Optional[Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]]

    @property
    def coupled(self) -> bool:
        if self.v_blocks is None:
            return False
        v12 = self.v_blocks[1]
        return v12.nnz > 0

    def full_matrix(self) -> sp.csr_matrix:
        if self.v_blocks is None:
            return sp.block_diag([self.h_minus, self.h_plus]).tocsr()
        v11, v12, v21, v22 = self.v_blocks
        return sp.bmat([[self.h_minus + v11, v12],
                        [v21, self.h_plus + v22]]).tocsr()

    def eigenvalues_near(self, sigma: float, k: int = 40, spin: str = "auto") -> np.ndarray:
        """k eigenvalues nearest sigma by shift-invert (non-Hermitian solver)."""
        if spin == "auto":
            spin = "both" if self.coupled else "down"
        if spin == "down":
            mat = self.h_minus + (self.v_blocks[0] if self.v_blocks is not None else 0)
        elif spin == "up":
            mat = self.h_plus + (self.v_blocks[3] if self.v_blocks is not None else 0)
        else:
            mat = self.full_matrix()
        vals = spla.eigs(mat.tocsc(), k=k, sigma=sigma, return_eigenvectors=False)
        return vals[np.argsort(np.abs(vals - sigma))]


def _gauge_factor(field: AdmissibleField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """f(r) with A = (-y f, x f); f = b0/2 + phi_tilde'(r)/r."""
    r = np.hypot(x, y)
    out = np.full_like(r, 0.5 * field.b0)
    if field.is_constant:
        return out
    h = 1e-4 * max(field.r_max / 20.0, 1e-2)
    pos = r > 2 * h
    rp = r[pos]
    d1 = (field._phi(rp + h) - field._phi(rp - h)) / (2 * h)
    out[pos] += d1 / rp
    if np.any(~pos):
        p0 = field._phi(np.zeros(1))[0]
        d2_0 = 2.0 * (field._phi(np.full(1, h))[0] - p0) / h**2
        out[~pos] += d2_0
    return out


def assemble_grid_pauli2d(field: AdmissibleField, pot: Optional[MatrixPotential],
                          box: float, n: int, eps: float = 1.0) -> GridPauli2D:
    """Dirichlet box discretization with Peierls link phases.

    The box must be large enough that the ground modes decay at the boundary:
    exp(-phi(box/2)) < 1e-8, else the discretization is rejected.
    """
    if math.exp(-float(field.total_phi(np.asarray(box / 2.0)))) >= 1e-8:
        raise ValueError("box too small: ground modes do not decay at the boundary")
    h = box / (n + 1)
    xs = -box / 2.0 + h * (1 + np.arange(n))
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    x = X.ravel()
    y = Y.ravel()
    N = n * n

    # link phases: theta = h * A . direction at the link midpoint
    fx = _gauge_factor(field, X[:-1, :] + h / 2.0, Y[:-1, :])
    theta_x = h * (-(Y[:-1, :]) * fx)          # A_x = -y f
    fy = _gauge_factor(field, X[:, :-1], Y[:, :-1] + h / 2.0)
    theta_y = h * ((X[:, :-1]) * fy)           # A_y = +x f

    def idx(i, j):
        return i * n + j

    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(n - 1), np.arange(n), indexing="ij")
    p = idx(ii, jj).ravel()
    q = idx(ii + 1, jj).ravel()
    ph = np.exp(1j * theta_x.ravel())
    rows += [p, q]
    cols += [q, p]
    vals += [-ph / h**2, -np.conj(ph) / h**2]

    ii, jj = np.meshgrid(np.arange(n), np.arange(n - 1), indexing="ij")
    p = idx(ii, jj).ravel()
    q = idx(ii, jj + 1).ravel()
    ph = np.exp(1j * theta_y.ravel())
    rows += [p, q]
    cols += [q, p]
    vals += [-ph / h**2, -np.conj(ph) / h**2]

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    hop = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    r = np.hypot(x, y)
    b_here = np.full(N, field.b0)
    if not field.is_constant:
        b_here = b_here + field.b_tilde(r)
    diag_kin = 4.0 / h**2
    h_minus = hop + sp.diags(diag_kin - b_here)
    h_plus = hop + sp.diags(diag_kin + b_here)

    v_blocks = None
    if pot is not None:
        wm = pot.w_matrix(r) * (eps * pot.eta)
        v_blocks = tuple(sp.diags(wm[:, a, b]) for a, b in ((0, 0), (0, 1), (1, 0), (1, 1)))

    return GridPauli2D(field=field, box=box, n=n, h=h,
                       h_minus=h_minus.tocsr(), h_plus=h_plus.tocsr(), v_blocks=v_blocks)
