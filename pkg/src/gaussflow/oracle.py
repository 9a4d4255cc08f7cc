"""Independent discrete-time check of the continuous-time formulas.

The diffusion is sampled exactly on a grid of step ``dt``: a Gauss-Markov
chain ``X[j+1] = A_j X[j] + eps_j`` whose transition and noise covariance come
from matrix exponentials (Van Loan's block construction), together with the
joint law of ``eps_j`` and the Brownian increments ``dW_j`` of the directed
representation.  Information quantities of the chain are then exact Gaussian
conditional mutual informations

    I(U; V | Z) = 1/2 (logdet S_UZ + logdet S_VZ - logdet S_Z - logdet S_UVZ).

Two evaluation routes are provided and agree to round-off:

* ``block``: assemble the covariance of every sampled variable and take the
  four log-determinants (desk scale only, see ``cap``);
* ``sequential``: the chain rule over the future samples,
  ``I(U; V | Z) = sum_j I(U; V_j | Z, V_<j)``, each term obtained by exact
  Gaussian conditioning in time order.  Cost is linear in the horizon.

Coordinates with zero variance (for instance a deterministic initial state)
carry no information and are left out of the index sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._linalg import PSD_TOL, symmetrize
from .errors import DegenerateBeyondJitter, SizeCap, StepMisaligned
from .factor import initial_factorization, noise_factorization
from .model import Partition2, Partition3, eval_coefficients

__all__ = [
    "GaussChain",
    "PathCovariance",
    "PastSet",
    "discretize",
    "path_covariance",
    "gaussian_cmi",
    "block_cmi",
    "sequential_cmi",
    "discrete_transfer_entropy",
    "discrete_transfer_entropy_curve",
    "discrete_split_x_part",
    "discrete_split_w_part",
    "discrete_noise_transfer_entropy",
    "conservation_terms",
]

SIZE_CAP = 4000
JITTER_TRIGGER = 1e-10
JITTER = 1e-12
CLIP_TOL = 1e-9


@dataclass(frozen=True)
class GaussChain:
    """Exactly discretized diffusion.

    ``A[j]``, ``Q[j]`` drive step ``j -> j+1``.  When built with a partition,
    ``C[j] = Cov(eps_j, dW_j)`` and ``S[j] = Cov(dW_j)`` describe the
    increments of the driving noise ``W = (W1, W2)`` and ``xi_map`` gives
    ``Xi = xi_map (X[0] - mu)``.
    """

    dt: float
    A: np.ndarray
    Q: np.ndarray
    mu: np.ndarray
    v: np.ndarray
    C: np.ndarray | None = None
    S: np.ndarray | None = None
    xi_map: np.ndarray | None = None
    k: int = 0
    l: int = 0

    @property
    def N(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.v.shape[0]

    @property
    def dw(self):
        return 0 if self.S is None else self.S.shape[1]

    @property
    def dxi(self):
        return 0 if self.xi_map is None else self.xi_map.shape[0]

    def marginal_covariances(self):
        """``Cov(X[j])`` for ``j = 0..N``."""
        out = np.empty((self.N + 1, self.n, self.n))
        out[0] = self.v
        for j in range(self.N):
            out[j + 1] = self.A[j] @ out[j] @ self.A[j].T + self.Q[j]
        return out


def _grid_index(t, dt, what):
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise StepMisaligned(f"{what} {t:g} is not a multiple of dt={dt:g}")
    return int(k)


def _van_loan(b, a, dt):
    n = b.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = -b
    m[:n, n:] = a
    m[n:, n:] = b.T
    e = sla.expm(m * dt)
    A = e[n:, n:].T
    Q = symmetrize(A @ e[:n, n:])
    return A, Q


def _integrated_exp(b, dt):
    """``int_0^dt exp(b u) du``."""
    n = b.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = b
    m[:n, n:] = np.eye(n)
    return sla.expm(m * dt)[:n, n:]


def discretize(model, dt, horizon, partition=None):
    """Sample ``model`` exactly on the grid ``0, dt, ..., horizon``.

    Every coefficient breakpoint below the horizon and the horizon itself
    must be multiples of ``dt``.  Passing a partition also records the joint
    law of the driving-noise increments used by noise-conditioned checks.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    N = _grid_index(horizon, dt, "horizon")
    edges = [0] + [_grid_index(t, dt, "breakpoint") for t in model.breakpoints if t < horizon]
    edges.append(N)
    n = model.n
    p2 = partition.two_block if isinstance(partition, Partition3) else partition

    A = np.empty((N, n, n))
    Q = np.empty((N, n, n))
    C = S = xi_map = None
    k = l = 0
    if p2 is not None:
        k = noise_factorization(model, p2, 0.0).k
        dw = k + p2.n2
        C = np.empty((N, n, dw))
        S = np.empty((N, dw, dw))
        init = initial_factorization(model, p2)
        psi = init.psi()
        xi_map = np.linalg.solve(psi.T @ psi, psi.T)
        l = init.l
    for j0, j1 in zip(edges[:-1], edges[1:]):
        if j1 <= j0:
            continue
        t = j0 * dt
        b, a = eval_coefficients(model, t)
        Aj, Qj = _van_loan(np.asarray(b), np.asarray(a), dt)
        A[j0:j1] = Aj
        Q[j0:j1] = Qj
        if p2 is not None:
            nf = noise_factorization(model, p2, t)
            C[j0:j1] = _integrated_exp(np.asarray(b), dt) @ nf.sigma() @ nf.a_w()
            S[j0:j1] = nf.a_w() * dt
    return GaussChain(dt, A, Q, np.array(model.mu), np.array(model.v), C, S, xi_map, k, l)


# -- block route -----------------------------------------------------------------


@dataclass(frozen=True)
class PathCovariance:
    """Joint covariance of ``(X[0..N], Xi, dW[0..N-1])``.

    Noise variables are present only if requested and the chain carries them.
    """

    matrix: np.ndarray
    n: int
    N: int
    dxi: int = 0
    dw: int = 0

    def x(self, j, coords=None):
        coords = range(self.n) if coords is None else coords
        return [j * self.n + c for c in coords]

    def xi(self, coords=None):
        base = (self.N + 1) * self.n
        coords = range(self.dxi) if coords is None else coords
        return [base + c for c in coords]

    def w(self, j, coords=None):
        base = (self.N + 1) * self.n + self.dxi
        coords = range(self.dw) if coords is None else coords
        return [base + j * self.dw + c for c in coords]


def path_covariance(chain, include_noise=False, cap=SIZE_CAP):
    """Exact joint covariance of the sampled path, by forward recursion.

    ``Cov(X[j+1], Y) = A_j Cov(X[j], Y)`` for every variable ``Y`` fixed before
    step ``j``; the new diagonal block is ``A_j P_j A_j' + Q_j`` and the new
    noise block ``Cov(X[j+1], dW_j) = C_j``.
    """
    n, N = chain.n, chain.N
    noise = include_noise and chain.S is not None
    dxi = chain.dxi if noise else 0
    dw = chain.dw if noise else 0
    nx = n * (N + 1)
    D = nx + dxi + N * dw
    if D > cap:
        raise SizeCap(f"path covariance of size {D} exceeds cap {cap}")

    rows = np.zeros((nx, D))
    row = np.zeros((n, D))
    row[:, :n] = chain.v
    if noise:
        row[:, nx:nx + dxi] = chain.v @ chain.xi_map.T
    rows[:n] = row
    for j in range(N):
        Aj = chain.A[j]
        diag = Aj @ row[:, j * n:(j + 1) * n] @ Aj.T + chain.Q[j]
        row = Aj @ row
        row[:, (j + 1) * n:(j + 2) * n] = symmetrize(diag)
        if noise:
            c0 = nx + dxi + j * dw
            row[:, c0:c0 + dw] = chain.C[j]
        rows[(j + 1) * n:(j + 2) * n] = row

    cov = np.zeros((D, D))
    lower = rows[:, :nx]
    diag_blocks = np.zeros_like(lower)
    for j in range(N + 1):
        s = slice(j * n, (j + 1) * n)
        diag_blocks[s, s] = lower[s, s]
    cov[:nx, :nx] = lower + lower.T - diag_blocks
    if noise:
        cov[:nx, nx:] = rows[:, nx:]
        cov[nx:, :nx] = rows[:, nx:].T
        cov[nx:nx + dxi, nx:nx + dxi] = chain.xi_map @ chain.v @ chain.xi_map.T
        for j in range(N):
            s = slice(nx + dxi + j * dw, nx + dxi + (j + 1) * dw)
            cov[s, s] = chain.S[j]
    return PathCovariance(symmetrize(cov), n, N, dxi, dw)


def _logdet(m, scale):
    if m.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh(symmetrize(m))
    if w[0] < -PSD_TOL * scale:
        raise DegenerateBeyondJitter(f"covariance block is indefinite (min eigenvalue {w[0]:.3e})")
    if w[0] < JITTER_TRIGGER * scale:
        w = np.clip(w, 0.0, None) + JITTER * scale
    return float(np.sum(np.log(w)))


def gaussian_cmi(cov, idx_u, idx_v, idx_z=()):
    """Conditional mutual information ``I(U; V | Z)`` of a Gaussian vector (nats).

    Blocks whose smallest eigenvalue falls below ``1e-10`` of the trace scale
    get a jitter of ``1e-12`` times that scale; a result below ``-1e-9`` means
    the jitter dominated and raises :class:`DegenerateBeyondJitter`.
    """
    m = cov.matrix if isinstance(cov, PathCovariance) else np.asarray(cov, dtype=float)
    u, v, z = (np.asarray(list(i), dtype=int) for i in (idx_u, idx_v, idx_z))
    if len(set(u) & set(v)) or len(set(u) & set(z)) or len(set(v) & set(z)):
        raise ValueError("index sets must be disjoint")
    if u.size == 0 or v.size == 0:
        return 0.0
    uvz = np.concatenate([u, v, z])
    full = m[np.ix_(uvz, uvz)]
    scale = max(np.trace(full) / full.shape[0], np.finfo(float).tiny)

    def ld(idx):
        return _logdet(m[np.ix_(idx, idx)], scale)

    val = 0.5 * (ld(np.concatenate([u, z])) + ld(np.concatenate([v, z])) - ld(z) - ld(uvz))
    if val < -CLIP_TOL:
        raise DegenerateBeyondJitter(f"conditional mutual information {val:.3e} < 0")
    return max(val, 0.0)


@dataclass(frozen=True)
class PastSet:
    """Variables observed on ``[0, s]``: state coordinates ``x`` at every grid
    time, noise coordinates ``w`` for every step and initial-noise
    coordinates ``xi``."""

    x: tuple = ()
    w: tuple = ()
    xi: tuple = ()

    def __or__(self, other):
        return PastSet(self.x + other.x, self.w + other.w, self.xi + other.xi)


def _informative(pc, idx):
    m = pc.matrix
    d = m[idx, idx]
    scale = max(np.max(np.diag(m)), np.finfo(float).tiny)
    return [i for i, var in zip(idx, d) if var > 1e-14 * scale]


def _past_indices(pc, past, s_idx):
    idx = []
    for j in range(s_idx + 1):
        idx += pc.x(j, past.x)
    idx += pc.xi(past.xi)
    for j in range(s_idx):
        idx += pc.w(j, past.w)
    return idx


def block_cmi(pc, s_idx, t_idx, u, z, v_coords):
    """``I(U past; X[v_coords] on (s, t] | Z past)`` from a path covariance."""
    iu = _informative(pc, _past_indices(pc, u, s_idx))
    iz = _informative(pc, _past_indices(pc, z, s_idx))
    iv = []
    for j in range(s_idx + 1, t_idx + 1):
        iv += pc.x(j, v_coords)
    return gaussian_cmi(pc, iu, _informative(pc, iv), iz)


# -- sequential route --------------------------------------------------------------


def _pinv_psd(m):
    w, u = np.linalg.eigh(symmetrize(m))
    scale = max(np.max(np.abs(w), initial=0.0), np.finfo(float).tiny)
    keep = w > 1e-12 * scale
    return (u[:, keep] / w[keep]) @ u[:, keep].T


def _condition(joint, n_keep, obs):
    """Covariance of the first ``n_keep`` variables after observing ``obs``."""
    if len(obs) == 0:
        return joint[:n_keep, :n_keep]
    obs = np.asarray(obs)
    k_o = joint[:n_keep][:, obs]
    return symmetrize(joint[:n_keep, :n_keep] - k_o @ _pinv_psd(joint[np.ix_(obs, obs)]) @ k_o.T)


class _Filter:
    """Exact conditional covariance of ``X[j]`` given the observations so far."""

    def __init__(self, chain, past):
        self.chain = chain
        self.past = past
        n = chain.n
        if past.xi:
            m = chain.xi_map
            joint = np.block([[chain.v, chain.v @ m.T], [m @ chain.v, m @ chain.v @ m.T]])
            obs = list(past.x) + [n + c for c in past.xi]
        else:
            joint, obs = chain.v, list(past.x)
        self.P = _condition(joint, n, obs)

    def step(self, j, x_obs, w_obs=()):
        """Advance to ``X[j+1]``; observe ``X[j+1][x_obs]`` and ``dW_j[w_obs]``.

        Returns the predictive covariance of the observed block.
        """
        c = self.chain
        n = c.n
        pred = c.A[j] @ self.P @ c.A[j].T + c.Q[j]
        if w_obs:
            joint = np.block([[pred, c.C[j]], [c.C[j].T, c.S[j]]])
            obs = list(x_obs) + [n + i for i in w_obs]
        else:
            joint, obs = pred, list(x_obs)
        block = joint[np.ix_(obs, obs)]
        self.P = _condition(joint, n, obs)
        return block


def sequential_cmi(chain, s_idx, t_idx, u, z, v_coords):
    """Cumulative ``I(U past; X[v_coords] on (s, r] | Z past)`` for ``r = s..t``.

    Runs two exact filters, one observing ``Z`` and one observing ``Z`` and
    ``U`` on ``[0, s]``; after ``s`` both observe only ``X[v_coords]``, and
    each future sample contributes ``I(U; V_j | Z, V_<j)``.
    """
    if not 0 <= s_idx <= t_idx <= chain.N:
        raise ValueError(f"need 0 <= s_idx <= t_idx <= N, got {s_idx}, {t_idx}")
    zu = z | u
    fz, fzu = _Filter(chain, z), _Filter(chain, zu)
    for j in range(s_idx):
        fz.step(j, z.x, z.w)
        fzu.step(j, zu.x, zu.w)
    v_coords = list(v_coords)
    out = np.zeros(t_idx - s_idx + 1)
    for i, j in enumerate(range(s_idx, t_idx)):
        sz = fz.step(j, v_coords)
        szu = fzu.step(j, v_coords)
        joint_scale = max(np.trace(sz) / sz.shape[0], np.finfo(float).tiny)
        term = 0.5 * (_logdet(sz, joint_scale) - _logdet(szu, joint_scale))
        if term < -CLIP_TOL:
            raise DegenerateBeyondJitter(f"negative information increment {term:.3e}")
        out[i + 1] = out[i] + max(term, 0.0)
    return out


# -- transfer-entropy queries ------------------------------------------------------


def _two(partition):
    return partition.two_block if isinstance(partition, Partition3) else partition


def _run(chain, s_idx, t_idx, u, z, v_coords, method, cap):
    if method not in ("auto", "block", "sequential"):
        raise ValueError(f"unknown method {method!r}")
    noise = bool(u.w or u.xi or z.w or z.xi)
    if method == "auto":
        size = chain.n * (chain.N + 1) + (chain.dxi + chain.N * chain.dw if noise else 0)
        method = "block" if size <= cap else "sequential"
    if method == "block":
        pc = path_covariance(chain, include_noise=noise, cap=cap)
        return block_cmi(pc, s_idx, t_idx, u, z, v_coords)
    return float(sequential_cmi(chain, s_idx, t_idx, u, z, v_coords)[-1])


def _te_sets(partition):
    p = _two(partition)
    x1 = tuple(range(p.n1))
    x2 = tuple(range(p.n1, p.n))
    return PastSet(x=x2), PastSet(x=x1), x1


def discrete_transfer_entropy(chain, partition, s_idx, t_idx, method="auto", cap=SIZE_CAP):
    """``I(X2[0..s]; X1(s..t] | X1[0..s])`` on the sampled chain (nats)."""
    if s_idx == t_idx:
        return 0.0
    u, z, v = _te_sets(partition)
    return _run(chain, s_idx, t_idx, u, z, v, method, cap)


def discrete_transfer_entropy_curve(chain, partition, s_idx, t_idx):
    """Cumulative discrete transfer entropy for every grid time in ``[s, t]``."""
    u, z, v = _te_sets(partition)
    return sequential_cmi(chain, s_idx, t_idx, u, z, v)


def discrete_split_x_part(chain, partition, s_idx, t_idx, method="auto", cap=SIZE_CAP):
    """``I(X~3[0..s]; X1(s..t] | X1[0..s], X~2[0..s])``."""
    if s_idx == t_idx:
        return 0.0
    p = partition
    x1 = tuple(range(p.n1))
    x2 = tuple(range(p.n1, p.n1 + p.nt2))
    x3 = tuple(range(p.n1 + p.nt2, p.n))
    return _run(chain, s_idx, t_idx, PastSet(x=x3), PastSet(x=x1 + x2), x1, method, cap)


def _noise_coords(chain, partition):
    p = partition
    k, l = chain.k, chain.l
    w2 = tuple(range(k, k + p.nt2))
    w3 = tuple(range(k + p.nt2, k + p.nt2 + p.nt3))
    xi2 = tuple(range(l, l + p.nt2))
    xi3 = tuple(range(l + p.nt2, l + p.nt2 + p.nt3))
    return w2, w3, xi2, xi3


def _drop_degenerate_xi(chain, coords):
    if not coords:
        return coords
    cov = chain.xi_map @ chain.v @ chain.xi_map.T
    scale = max(np.max(np.diag(cov), initial=0.0), 1.0)
    return tuple(c for c in coords if cov[c, c] > 1e-14 * scale)


def discrete_split_w_part(chain, partition, s_idx, t_idx, method="auto", cap=SIZE_CAP):
    """``I((Xi~3, W~3[0..s]); X1(s..t] | X1[0..s], Xi~2, W~2[0..s])``.

    ``chain`` must have been discretized with the (two-block view of the)
    same partition so it carries the noise increments.
    """
    if chain.S is None:
        raise ValueError("chain has no noise increments; discretize with a partition")
    if s_idx == t_idx:
        return 0.0
    w2, w3, xi2, xi3 = _noise_coords(chain, partition)
    x1 = tuple(range(partition.n1))
    u = PastSet(w=w3, xi=_drop_degenerate_xi(chain, xi3))
    z = PastSet(x=x1, w=w2, xi=_drop_degenerate_xi(chain, xi2))
    return _run(chain, s_idx, t_idx, u, z, x1, method, cap)


def discrete_noise_transfer_entropy(chain, partition, s_idx, t_idx, method="auto",
                                    cap=SIZE_CAP):
    """``I((Xi2, W2[0..s]); X1(s..t] | X1[0..s])``, the noise form of the transfer entropy."""
    if chain.S is None:
        raise ValueError("chain has no noise increments; discretize with a partition")
    if s_idx == t_idx:
        return 0.0
    p = _two(partition)
    w2 = tuple(range(chain.k, chain.k + p.n2))
    xi2 = _drop_degenerate_xi(chain, tuple(range(chain.l, chain.l + p.n2)))
    x1 = tuple(range(p.n1))
    return _run(chain, s_idx, t_idx, PastSet(w=w2, xi=xi2), PastSet(x=x1), x1, method, cap)


def conservation_terms(pc, partition):
    """Terms of the conservation law for the sampled sequences ``X1[j]``, ``X2[j]``.

    Returns a dict with the path mutual information and the two directed
    informations plus the instantaneous-exchange sum, all via
    :func:`gaussian_cmi`.
    """
    p = _two(partition)
    x1 = list(range(p.n1))
    x2 = list(range(p.n1, p.n))
    T = pc.N + 1

    def path(coords, upto):
        idx = []
        for j in range(upto):
            idx += pc.x(j, coords)
        return idx

    mutual = gaussian_cmi(pc, path(x1, T), path(x2, T))
    d21 = sum(gaussian_cmi(pc, path(x2, j), pc.x(j, x1), path(x1, j)) for j in range(1, T))
    d12 = sum(gaussian_cmi(pc, path(x1, j), pc.x(j, x2), path(x2, j)) for j in range(1, T))
    inst = sum(
        gaussian_cmi(pc, pc.x(j, x1), pc.x(j, x2), path(x1, j) + path(x2, j)) for j in range(T)
    )
    return {"mutual": mutual, "d_2to1": d21, "d_1to2": d12, "instantaneous": inst}
