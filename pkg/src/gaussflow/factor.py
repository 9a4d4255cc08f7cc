"""Block factorizations of the diffusion and initial covariance matrices.

The two-block factorization writes ``a = sigma a^W sigma'`` with

    sigma = [[sigma11, 0], [sigma21, I]],   a^W = diag(I_k, alpha),

from the reduced eigen-decomposition ``a11 = u lam u'``, and solves the
range condition ``b12 = a11 gamma`` for the coupling ``gamma``.  The initial
covariance ``v`` is split the same way (``psi``, ``v^Xi``, ``phi``).  The
three-block versions (``tau``, ``a^V``, ``eta``, ``v^Theta``) refine the X2
block into (X~2, X~3).

Eigenvalues are sorted in descending order and each eigenvector is signed so
that its first non-negligible component is positive; downstream quantities do
not depend on this gauge but it makes runs reproducible.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ._linalg import PSD_TOL, check_symmetric, project_psd
from .errors import (
    H1Violation,
    H2Violation,
    H3Violation,
    H4Violation,
    H5Violation,
)
from .model import Partition3, eval_coefficients

RANK_TOL = 1e-10
H2_TOL = 1e-8
H4_TOL = 1e-8
H5_TOL = 1e-10

__all__ = [
    "ReducedEig",
    "NoiseFactorization",
    "InitialFactorization",
    "ThreeBlockFactorization",
    "H5Report",
    "reduced_eig",
    "noise_factorization",
    "initial_factorization",
    "three_block_factorization",
    "check_h5",
    "FactorizationCache",
]


@dataclass(frozen=True)
class ReducedEig:
    u: np.ndarray
    lam: np.ndarray

    @property
    def k(self):
        return self.lam.shape[0]

    def pinv(self):
        return (self.u / self.lam) @ self.u.T

    def solve(self, rhs):
        """Minimal-norm solution ``x`` of ``m x = rhs`` (range part only)."""
        return self.u @ ((self.u.T @ rhs) / self.lam[:, None])

    def inv_sqrt_basis(self):
        """``u lam^{-1/2}``: maps the matrix onto a whitened basis."""
        return self.u / np.sqrt(self.lam)


def reduced_eig(m, rank_tol=RANK_TOL):
    """Reduced eigen-decomposition ``m = u diag(lam) u'`` of a symmetric PSD matrix.

    Eigenvalues not exceeding ``rank_tol * max(largest eigenvalue, 1)`` are
    dropped.  The zero matrix gives ``k = 0`` and an empty ``u``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    check_symmetric(m, "matrix", rtol=1e-10)
    n = m.shape[0]
    if n == 0:
        return ReducedEig(np.zeros((0, 0)), np.zeros(0))
    w, u = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(w)[::-1]
    w, u = w[order], u[:, order]
    keep = w > rank_tol * max(w[0], 1.0)
    w, u = w[keep], u[:, keep]
    for j in range(u.shape[1]):
        col = u[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            u[:, j] = -col
    return ReducedEig(u, w)


def _range_residual(m, x, rhs):
    return float(np.linalg.norm(m @ x - rhs)), float(1.0 + np.linalg.norm(rhs))


@dataclass(frozen=True)
class NoiseFactorization:
    """Two-block factorization of ``a(t)`` plus the H2 coupling ``gamma``."""

    eig11: ReducedEig
    sigma11: np.ndarray
    sigma21: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    h2_residual: float

    @property
    def k(self):
        return self.eig11.k

    def sigma(self):
        n1, k = self.sigma11.shape
        n2 = self.alpha.shape[0]
        out = np.zeros((n1 + n2, k + n2))
        out[:n1, :k] = self.sigma11
        out[n1:, :k] = self.sigma21
        out[n1:, k:] = np.eye(n2)
        return out

    def a_w(self):
        k, n2 = self.k, self.alpha.shape[0]
        out = np.zeros((k + n2, k + n2))
        out[:k, :k] = np.eye(k)
        out[k:, k:] = self.alpha
        return out


def noise_factorization(model, partition, t, rank_tol=RANK_TOL, h2_tol=H2_TOL,
                        psd_tol=PSD_TOL):
    """Factor ``a(t)`` for ``partition`` and solve ``b12 = a11 gamma``.

    ``gamma`` is the minimal-norm solution built from the reduced
    eigen-decomposition of ``a11``; if ``b12`` is not in the range of ``a11``
    the residual exceeds ``h2_tol * (1 + |b12|)`` and H2Violation is raised.
    """
    b, a = eval_coefficients(model, t)
    i1, i2 = partition.idx1, partition.idx2
    a11, a21, a22 = a[i1, i1], a[i2, i1], a[i2, i2]
    b12 = b[i1, i2]

    eig = reduced_eig(a11, rank_tol)
    if eig.k == 0:
        raise H1Violation(f"a11 has rank 0 at t={t:g}", residual=0.0, time=t)
    basis = eig.inv_sqrt_basis()
    sigma11 = a11 @ basis
    sigma21 = a21 @ basis
    alpha = project_psd(a22 - sigma21 @ sigma21.T, "alpha", psd_tol)

    gamma = eig.solve(b12)
    res, scale = _range_residual(a11, gamma, b12)
    if res > h2_tol * scale:
        raise H2Violation(
            f"b12 is not in the range of a11 at t={t:g} (residual {res:.3e})",
            residual=res, time=t,
        )
    return NoiseFactorization(eig, sigma11, sigma21, alpha, gamma, res)


@dataclass(frozen=True)
class InitialFactorization:
    """Factorization ``v = psi v^Xi psi'``; ``psi11``/``psi21`` are None when l=0."""

    psi11: np.ndarray | None
    psi21: np.ndarray | None
    phi: np.ndarray
    l: int
    n1: int

    def psi(self):
        n2 = self.phi.shape[0]
        if self.l == 0:
            return _lower_block(np.zeros((self.n1, 0)), np.zeros((n2, 0)), n2)
        return _lower_block(self.psi11, self.psi21, n2)

    def v_xi(self):
        out = np.zeros((self.l + self.phi.shape[0],) * 2)
        out[: self.l, : self.l] = np.eye(self.l)
        out[self.l:, self.l:] = self.phi
        return out


def _lower_block(m11, m21, n2):
    n1, k = m11.shape
    out = np.zeros((n1 + n2, k + n2))
    out[:n1, :k] = m11
    out[n1:, :k] = m21
    out[n1:, k:] = np.eye(n2)
    return out


def initial_factorization(model, partition, rank_tol=RANK_TOL, psd_tol=PSD_TOL):
    v = model.v
    i1, i2 = partition.idx1, partition.idx2
    eig = reduced_eig(v[i1, i1], rank_tol)
    if eig.k == 0:
        phi = project_psd(v[i2, i2], "phi", psd_tol)
        return InitialFactorization(None, None, phi, 0, partition.n1)
    basis = eig.inv_sqrt_basis()
    psi11 = v[i1, i1] @ basis
    psi21 = v[i2, i1] @ basis
    phi = project_psd(v[i2, i2] - psi21 @ psi21.T, "phi", psd_tol)
    return InitialFactorization(psi11, psi21, phi, eig.k, partition.n1)


@dataclass(frozen=True)
class ThreeBlockFactorization:
    """Refinement of the two-block factorization for the split (X1, X~2, X~3).

    Void blocks (``l = 0`` or ``lt = 0``) are stored as arrays with zero
    columns, so the assembled ``tau``/``eta`` always have the documented
    shapes.
    """

    base: NoiseFactorization
    init: InitialFactorization
    tau11: np.ndarray
    tau21: np.ndarray
    tau22: np.ndarray
    tau31: np.ndarray
    tau32: np.ndarray
    beta: np.ndarray
    eta11: np.ndarray
    eta21: np.ndarray
    eta22: np.ndarray
    eta31: np.ndarray
    eta32: np.ndarray
    theta: np.ndarray
    c: np.ndarray
    gammatil: np.ndarray
    kt: int
    lt: int
    h4_residual: float
    h2_residual_joint: float

    @property
    def k(self):
        return self.base.k

    @property
    def l(self):
        return self.init.l

    def tau(self):
        return _lower3(self.tau11, self.tau21, self.tau22, self.tau31, self.tau32)

    def a_v(self):
        m = self.k + self.kt
        nt3 = self.beta.shape[0]
        out = np.zeros((m + nt3, m + nt3))
        out[:m, :m] = np.eye(m)
        out[m:, m:] = self.beta
        return out

    def eta(self):
        return _lower3(self.eta11, self.eta21, self.eta22, self.eta31, self.eta32)

    def v_theta(self):
        m = self.l + self.lt
        nt3 = self.theta.shape[0]
        out = np.zeros((m + nt3, m + nt3))
        out[:m, :m] = np.eye(m)
        out[m:, m:] = self.theta
        return out


def _lower3(m11, m21, m22, m31, m32):
    n1, k1 = m11.shape
    n2, k2 = m22.shape
    n3 = m31.shape[0]
    out = np.zeros((n1 + n2 + n3, k1 + k2 + n3))
    out[:n1, :k1] = m11
    out[n1:n1 + n2, :k1] = m21
    out[n1:n1 + n2, k1:k1 + k2] = m22
    out[n1 + n2:, :k1] = m31
    out[n1 + n2:, k1:k1 + k2] = m32
    out[n1 + n2:, k1 + k2:] = np.eye(n3)
    return out


def three_block_factorization(model, partition, t, rank_tol=RANK_TOL, h2_tol=H2_TOL,
                              h4_tol=H4_TOL, psd_tol=PSD_TOL, base=None, init=None):
    """Factor ``a(t)`` and ``v`` for a three-block partition and solve H4.

    ``c`` is the minimal-norm solution of
    ``alpha22 c = b~23 - a~21 gamma_3`` where ``gamma_3`` holds the columns of
    ``gamma`` belonging to X~3; ``gammatil`` is the coupling of X~3 into
    (X1, X~2), which must satisfy ``b~(12)3 = a~(12)(12) gammatil``.
    """
    p2 = partition.two_block
    if base is None:
        base = noise_factorization(model, p2, t, rank_tol, h2_tol, psd_tol)
    if init is None:
        init = initial_factorization(model, p2, rank_tol, psd_tol)
    b, a = eval_coefficients(model, t)
    n1, nt2 = partition.n1, partition.nt2
    j2, j3 = slice(0, nt2), slice(nt2, None)

    alpha = base.alpha
    alpha22, alpha32 = alpha[j2, j2], alpha[j3, j2]
    alpha33 = alpha[j3, j3]
    eig = reduced_eig(alpha22, rank_tol)
    if eig.k == 0:
        raise H3Violation(f"alpha22 has rank 0 at t={t:g}", residual=0.0, time=t)
    basis = eig.inv_sqrt_basis()
    tau11 = base.sigma11
    tau21 = base.sigma21[j2]
    tau31 = base.sigma21[j3]
    tau22 = alpha22 @ basis
    tau32 = alpha32 @ basis
    beta = project_psd(alpha33 - tau32 @ tau32.T, "beta", psd_tol)

    phi = init.phi
    phi22, phi32, phi33 = phi[j2, j2], phi[j3, j2], phi[j3, j3]
    eig0 = reduced_eig(phi22, rank_tol)
    l = init.l
    eta11 = init.psi11 if l else np.zeros((n1, 0))
    eta21 = init.psi21[j2] if l else np.zeros((nt2, 0))
    eta31 = init.psi21[j3] if l else np.zeros((partition.nt3, 0))
    if eig0.k:
        basis0 = eig0.inv_sqrt_basis()
        eta22, eta32 = phi22 @ basis0, phi32 @ basis0
    else:
        eta22, eta32 = np.zeros((nt2, 0)), np.zeros((partition.nt3, 0))
    theta = project_psd(phi33 - eta32 @ eta32.T, "theta", psd_tol)

    i1, i2, i3 = partition.idx1, partition.idx2, partition.idx3
    gamma3 = base.gamma[:, j3]
    rhs = b[i2, i3] - a[i2, i1] @ gamma3
    c = eig.solve(rhs)
    res, scale = _range_residual(alpha22, c, rhs)
    if res > h4_tol * scale:
        raise H4Violation(
            f"b~23 - a~21 gamma_3 is not in the range of alpha22 at t={t:g} "
            f"(residual {res:.3e})",
            residual=res, time=t,
        )

    top = gamma3 - tau11 @ np.linalg.solve(tau11.T @ tau11, tau21.T @ c)
    gammatil = np.vstack([top, c])
    i12 = slice(0, n1 + nt2)
    res12, scale12 = _range_residual(a[i12, i12], gammatil, b[i12, i3])
    if res12 > h2_tol * scale12:
        raise H4Violation(
            f"b~(12)3 != a~(12)(12) gammatil at t={t:g} (residual {res12:.3e})",
            residual=res12, time=t,
        )
    return ThreeBlockFactorization(
        base, init, tau11, tau21, tau22, tau31, tau32, beta,
        eta11, eta21, eta22, eta31, eta32, theta, c, gammatil,
        eig.k, eig0.k, res, res12,
    )


@dataclass(frozen=True)
class H5Report:
    passed: bool
    phi23_norm: float
    worst_alpha23_norm: float
    worst_time: float | None

    def worst(self):
        if self.phi23_norm >= self.worst_alpha23_norm:
            return "phi23", self.phi23_norm, None
        return "alpha23", self.worst_alpha23_norm, self.worst_time


def check_h5(model, partition, grid, h5_tol=H5_TOL, rank_tol=RANK_TOL,
             h2_tol=H2_TOL, psd_tol=PSD_TOL):
    """Check that blocks X~2 and X~3 share neither noise nor initial correlation."""
    p2 = partition.two_block
    j2, j3 = slice(0, partition.nt2), slice(partition.nt2, None)
    init = initial_factorization(model, p2, rank_tol, psd_tol)
    phi23 = float(np.linalg.norm(init.phi[j2, j3]))
    worst, worst_t = 0.0, None
    seen = {}
    for t in grid:
        key = model.interval_index(t)
        if key not in seen:
            alpha = noise_factorization(model, p2, t, rank_tol, h2_tol, psd_tol).alpha
            seen[key] = float(np.linalg.norm(alpha[j2, j3]))
        if worst_t is None or seen[key] > worst:
            worst, worst_t = seen[key], float(t)
    passed = phi23 <= h5_tol and worst <= h5_tol
    return H5Report(passed, phi23, worst, worst_t)


class FactorizationCache:
    """Per-evaluation cache of factorizations keyed by coefficient interval.

    Also enforces that the ranks ``k`` (and ``k~`` for three blocks) stay the
    same on every interval visited; models whose noise rank changes between
    intervals are rejected.
    """

    def __init__(self, model, partition, rank_tol=RANK_TOL, h2_tol=H2_TOL,
                 h4_tol=H4_TOL, psd_tol=PSD_TOL):
        self.model = model
        self.partition = partition
        self.two_block = partition.two_block if isinstance(partition, Partition3) else partition
        self.tols = dict(rank_tol=rank_tol, psd_tol=psd_tol)
        self.h2_tol, self.h4_tol = h2_tol, h4_tol
        self._noise = {}
        self._three = {}
        self._init = None
        self._lock = threading.Lock()

    def initial(self):
        with self._lock:
            if self._init is None:
                self._init = initial_factorization(self.model, self.two_block, **self.tols)
            return self._init

    def noise(self, t):
        key = self.model.interval_index(t)
        with self._lock:
            hit = self._noise.get(key)
        if hit is not None:
            return hit
        nf = noise_factorization(self.model, self.two_block, t, h2_tol=self.h2_tol,
                                 **self.tols)
        with self._lock:
            for other in self._noise.values():
                if other.k != nf.k:
                    raise H1Violation(
                        f"rank of a11 changes between intervals ({other.k} vs {nf.k})",
                        time=t,
                    )
            self._noise[key] = nf
        return nf

    def three(self, t):
        if not isinstance(self.partition, Partition3):
            raise TypeError("three-block factorization needs a Partition3")
        key = self.model.interval_index(t)
        with self._lock:
            hit = self._three.get(key)
        if hit is not None:
            return hit
        tb = three_block_factorization(
            self.model, self.partition, t, h2_tol=self.h2_tol, h4_tol=self.h4_tol,
            base=self.noise(t), init=self.initial(), **self.tols,
        )
        with self._lock:
            for other in self._three.values():
                if other.kt != tb.kt:
                    raise H3Violation(
                        f"rank of alpha22 changes between intervals ({other.kt} vs {tb.kt})",
                        time=t,
                    )
            self._three[key] = tb
        return tb

    def require_h5(self, grid, h5_tol=H5_TOL):
        report = check_h5(self.model, self.partition, grid, h5_tol, h2_tol=self.h2_tol,
                          **self.tols)
        if not report.passed:
            name, value, when = report.worst()
            where = "" if when is None else f" at t={when:g}"
            raise H5Violation(f"|{name}| = {value:.3e}{where}", residual=value, time=when)
        return report
