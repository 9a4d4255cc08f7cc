"""Transfer entropy and directed information from Riccati trajectories.

Two-block quantities (X2 -> X1):

* ``T(s, t) = 1/2 int_s^t tr(gamma' a11 gamma (q2 - q2~)) dr`` where ``q2``
  starts from ``phi`` at 0 and ``q2~`` from 0 at ``s``;
* ``R(t) = 1/2 tr(gamma' a11 gamma q2(t))`` and ``D(t) = int_0^t R``.

Three-block splits of ``T`` into a part from X~2 and a part from X~3 given
X~2 come in two flavours: the X-split conditions on observed components and
uses the Riccati solution ``q3``; the W-split conditions on driving noises
and uses ``q2^c``.  In both, the X~2 part is obtained by subtraction from the
total.

All values are in nats.  Time integrals use the composite trapezoid rule on
the Riccati grid, applied segment by segment so the weight matrix is constant
on each piece.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .factor import H5_TOL, FactorizationCache
from .model import Partition2, Partition3, eval_coefficients
from .riccati import DEFAULT_STEP, RiccatiSpec, integrate

__all__ = [
    "InformationCurve",
    "SplitResult",
    "SplitCurve",
    "transfer_entropy",
    "transfer_entropy_curve",
    "di_rate",
    "directed_information",
    "di_curves",
    "te_split_x",
    "te_split_x_curve",
    "te_split_w",
    "te_split_w_curve",
    "di_split_x",
    "di_split_x_curves",
    "di_split_w",
    "di_split_w_curves",
    "filter_riccati",
]

NEGATIVE_TOL = 1e-9


@dataclass(frozen=True)
class InformationCurve:
    grid: np.ndarray
    values: np.ndarray
    kind: str

    @property
    def final(self):
        return float(self.values[-1])


@dataclass(frozen=True)
class SplitResult:
    total: float
    part_2to1: float
    part_3to1_given2: float
    kind: str


@dataclass(frozen=True)
class SplitCurve:
    grid: np.ndarray
    total: np.ndarray
    part_2to1: np.ndarray
    part_3to1_given2: np.ndarray
    kind: str
    quantity: str

    def final(self):
        return SplitResult(float(self.total[-1]), float(self.part_2to1[-1]),
                           float(self.part_3to1_given2[-1]), self.kind)


def _check_times(s, t):
    if s < 0 or t < s:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")


def _as_partition2(partition):
    return partition.two_block if isinstance(partition, Partition3) else partition


# -- Riccati set-ups ---------------------------------------------------------


def _drift_2(cache, t):
    """``F = b22 - a21 gamma`` for the two-block filter."""
    b, a = eval_coefficients(cache.model, t)
    p = cache.two_block
    nf = cache.noise(t)
    return b[p.idx2, p.idx2] - a[p.idx2, p.idx1] @ nf.gamma


def _weight_2(cache, t):
    """``gamma' a11 gamma``, the observation weight of the two-block filter."""
    _, a = eval_coefficients(cache.model, t)
    p = cache.two_block
    g = cache.noise(t).gamma
    return g.T @ a[p.idx1, p.idx1] @ g


def _weight_3(cache, t):
    """Weight of the X~3 part: the X~3 columns of ``gamma`` through ``a11``."""
    _, a = eval_coefficients(cache.model, t)
    p = cache.partition
    g3 = cache.noise(t).gamma[:, p.nt2:]
    return g3.T @ a[p.idx1, p.idx1] @ g3


def _spec_2(cache, q0, t0, extra=(), G=None):
    return RiccatiSpec(
        F=lambda r: _drift_2(cache, r),
        G=G if G is not None else (lambda r: cache.noise(r).alpha),
        H=lambda r: _weight_2(cache, r),
        q0=q0,
        t0=t0,
        breakpoints=tuple(cache.model.breakpoints) + tuple(extra),
    )


def _spec_3(cache, q0, t0, extra=()):
    p = cache.partition
    i12 = slice(0, p.n1 + p.nt2)
    i3 = p.idx3

    def F(r):
        b, a = eval_coefficients(cache.model, r)
        return b[i3, i3] - a[i3, i12] @ cache.three(r).gammatil

    def H(r):
        _, a = eval_coefficients(cache.model, r)
        gt = cache.three(r).gammatil
        return gt.T @ a[i12, i12] @ gt

    return RiccatiSpec(
        F=F, G=lambda r: cache.three(r).beta, H=H, q0=q0, t0=t0,
        breakpoints=tuple(cache.model.breakpoints) + tuple(extra),
    )


def filter_riccati(model, partition, t, step=DEFAULT_STEP, extra_breakpoints=()):
    """Trajectory of ``q2`` (conditional covariance of X2 given the X1 path) on [0, t]."""
    cache = FactorizationCache(model, _as_partition2(partition))
    return integrate(_spec_2(cache, cache.initial().phi, 0.0, extra_breakpoints), t, step)


# -- trace functionals ---------------------------------------------------------


def _trace_curve(traj, weight, factor=0.5):
    """Right-continuous integrand and its cumulative trapezoid integral.

    ``weight(t)`` is evaluated once per segment (at its midpoint).
    """
    grid = traj.grid
    rate = np.empty(grid.shape[0])
    cum = np.zeros(grid.shape[0])
    for a, b in traj.segments:
        w = weight(0.5 * (grid[a] + grid[b]))
        f = factor * np.einsum("ij,nji->n", w, traj.values[a:b + 1])
        rate[a:b + 1] = f
        dt = np.diff(grid[a:b + 1])
        cum[a + 1:b + 1] = cum[a] + np.cumsum(0.5 * dt * (f[1:] + f[:-1]))
    return rate, cum


def _gap_integral(traj_from0, traj_from_s, weight):
    """Cumulative ``1/2 int_s^r tr(weight (q - q~))`` along the grid of ``q~``."""
    sub = traj_from0.restrict(traj_from_s.grid[0])
    if sub.grid.shape != traj_from_s.grid.shape or not np.allclose(
        sub.grid, traj_from_s.grid, rtol=0, atol=1e-9
    ):
        raise RuntimeError("Riccati grids on [s, t] do not coincide")
    diff = type(sub)(sub.grid, sub.values - traj_from_s.values, sub.segments)
    _, cum = _trace_curve(diff, weight)
    return sub.grid, cum


def _zero_curve(s, kind):
    return InformationCurve(np.array([float(s)]), np.zeros(1), kind)


def _warn_negative(name, values):
    low = float(np.min(values))
    if low < -NEGATIVE_TOL:
        warnings.warn(
            f"{name} reached {low:.3e} < 0; refine the integration step",
            RuntimeWarning, stacklevel=3,
        )


# -- two-block quantities ------------------------------------------------------


def transfer_entropy_curve(model, partition, s, t, step=DEFAULT_STEP):
    """``T(s, r)`` for ``r`` on the integration grid of ``[s, t]``."""
    _check_times(s, t)
    if s == t:
        return _zero_curve(s, "T")
    cache = FactorizationCache(model, _as_partition2(partition))
    n2 = cache.two_block.n2
    q2 = integrate(_spec_2(cache, cache.initial().phi, 0.0, (s,)), t, step)
    q2t = integrate(_spec_2(cache, np.zeros((n2, n2)), s), t, step)
    grid, cum = _gap_integral(q2, q2t, lambda r: _weight_2(cache, r))
    return InformationCurve(grid, cum, "T")


def transfer_entropy(model, partition, s, t, step=DEFAULT_STEP):
    """Transfer entropy from X2 to X1 over ``[s, t]`` in nats."""
    _check_times(s, t)
    if s == t:
        return 0.0
    return transfer_entropy_curve(model, partition, s, t, step).final


def di_curves(model, partition, t, step=DEFAULT_STEP):
    """Rate ``R`` and directed information ``D`` on the grid of ``[0, t]``."""
    _check_times(0.0, t)
    cache = FactorizationCache(model, _as_partition2(partition))
    phi = cache.initial().phi
    if t == 0:
        r0 = 0.5 * float(np.trace(_weight_2(cache, 0.0) @ phi))
        return (InformationCurve(np.zeros(1), np.array([r0]), "R"), _zero_curve(0.0, "D"))
    q2 = integrate(_spec_2(cache, phi, 0.0), t, step)
    rate, cum = _trace_curve(q2, lambda r: _weight_2(cache, r))
    return InformationCurve(q2.grid, rate, "R"), InformationCurve(q2.grid, cum, "D")


def di_rate(model, partition, t, step=DEFAULT_STEP):
    """Instantaneous transfer-entropy rate ``R(t)`` from X2 to X1 (nats per time)."""
    return di_curves(model, partition, t, step)[0].final


def directed_information(model, partition, t, step=DEFAULT_STEP):
    """Directed information ``D(t)`` from X2 to X1 on ``[0, t]`` (nats)."""
    if t == 0:
        return 0.0
    return di_curves(model, partition, t, step)[1].final


# -- three-block splits --------------------------------------------------------


def _require3(partition):
    if not isinstance(partition, Partition3):
        raise TypeError("split quantities need a Partition3")


def _split_curve(grid, total, part3, kind, quantity):
    part2 = total - part3
    _warn_negative(f"{kind}-split part_2to1", part2)
    _warn_negative(f"{kind}-split part_3to1_given2", part3)
    return SplitCurve(grid, total, part2, part3, kind, quantity)


def te_split_x_curve(model, partition, s, t, step=DEFAULT_STEP, variant="exact"):
    """X-split of ``T(s, r)``: part from X~3 given the (X1, X~2) past, and the rest.

    Parameters
    ----------
    variant : {"exact", "direct"}
        ``"exact"`` (default) measures the X~3 part as the information the
        X~3 path on ``[s, r]`` adds to the X~2 path.  The X~3 block is then
        known up to its value at ``s``, so the two-block filter is restarted
        at ``s`` from ``q3(s)`` placed in the X~3 corner and compared with
        ``q2~``::

            1/2 int_s^r tr(gamma' a11 gamma (q^x - q2~)).

        ``"direct"`` integrates ``1/2 tr(gamma3' a11 gamma3 (q3 - q3~))``,
        which only sees X~3 through its own drift term in X1.  Both have the
        same rate as ``r -> s`` but ``"direct"`` misses the X~3 information
        carried into X1 by X~2 over a window (it vanishes whenever
        ``b13 = 0``).
    """
    _require3(partition)
    _check_times(s, t)
    if variant not in ("exact", "direct"):
        raise ValueError(f"unknown variant {variant!r}")
    if s == t:
        z = np.zeros(1)
        return SplitCurve(np.array([float(s)]), z, z, z, "X", "T")
    cache = FactorizationCache(model, partition)
    p = partition
    theta = cache.three(0.0).theta
    total = transfer_entropy_curve(model, p.two_block, s, t, step)
    if variant == "exact":
        q3s = integrate(_spec_3(cache, theta, 0.0), s, step).final if s > 0 else theta
        n2 = p.nt2 + p.nt3
        qx = integrate(_spec_2(cache, _embed3(p, q3s), s), t, step)
        q2t = integrate(_spec_2(cache, np.zeros((n2, n2)), s), t, step)
        grid, part3 = _gap_integral(qx, q2t, lambda r: _weight_2(cache, r))
    else:
        q3 = integrate(_spec_3(cache, theta, 0.0, (s,)), t, step)
        q3t = integrate(_spec_3(cache, np.zeros((p.nt3, p.nt3)), s), t, step)
        grid, part3 = _gap_integral(q3, q3t, lambda r: _weight_3(cache, r))
    return _split_curve(grid, total.values, part3, "X", "T")


def te_split_x(model, partition, s, t, step=DEFAULT_STEP, variant="exact"):
    """Final value of :func:`te_split_x_curve`."""
    if s == t:
        _check_times(s, t)
        return SplitResult(0.0, 0.0, 0.0, "X")
    return te_split_x_curve(model, partition, s, t, step, variant).final()


def _embed3(partition, m33):
    n2 = partition.nt2 + partition.nt3
    out = np.zeros((n2, n2))
    out[partition.nt2:, partition.nt2:] = m33
    return out


def _h5_grid(model, t):
    return (0.0,) + model.breakpoints_between(0.0, t)


def te_split_w_curve(model, partition, s, t, step=DEFAULT_STEP, h5_tol=H5_TOL):
    """W-split of ``T(s, r)``: part from the X~3 noise given the X~2 noise, and the rest.

    Requires the X~2 and X~3 blocks to share no noise and no initial
    correlation (H5).
    """
    _require3(partition)
    _check_times(s, t)
    cache = FactorizationCache(model, partition)
    cache.require_h5(_h5_grid(model, t), h5_tol)
    if s == t:
        z = np.zeros(1)
        return SplitCurve(np.array([float(s)]), z, z, z, "W", "T")
    p = partition
    n2 = p.nt2 + p.nt3
    j3 = slice(p.nt2, None)

    def g(r):
        alpha = cache.noise(r).alpha
        return _embed3(p, alpha[j3, j3]) if r < s else alpha

    q0 = _embed3(p, cache.initial().phi[j3, j3])
    total = transfer_entropy_curve(model, p.two_block, s, t, step)
    qc = integrate(_spec_2(cache, q0, 0.0, (s,), G=g), t, step)
    qct = integrate(_spec_2(cache, np.zeros((n2, n2)), s), t, step)
    grid, part3 = _gap_integral(qc, qct, lambda r: _weight_2(cache, r))
    return _split_curve(grid, total.values, part3, "W", "T")


def te_split_w(model, partition, s, t, step=DEFAULT_STEP, h5_tol=H5_TOL):
    return te_split_w_curve(model, partition, s, t, step, h5_tol).final()


def _di_split(kind, model, partition, t, step, h5_tol=H5_TOL):
    _require3(partition)
    _check_times(0.0, t)
    cache = FactorizationCache(model, partition)
    p = partition
    if kind == "W":
        cache.require_h5(_h5_grid(model, t), h5_tol)
    rate, dinf = di_curves(model, p.two_block, t, step)
    if t == 0:
        z = np.zeros(1)
        return (SplitCurve(rate.grid, rate.values, rate.values, z, kind, "R"),
                SplitCurve(rate.grid, z, z, z, kind, "D"))
    if kind == "X":
        q = integrate(_spec_3(cache, cache.three(0.0).theta, 0.0), t, step)
        r3, d3 = _trace_curve(q, lambda r: _weight_3(cache, r))
    else:
        j3 = slice(p.nt2, None)
        q0 = _embed3(p, cache.initial().phi[j3, j3])
        spec = _spec_2(cache, q0, 0.0, G=lambda r: _embed3(p, cache.noise(r).alpha[j3, j3]))
        q = integrate(spec, t, step)
        r3, d3 = _trace_curve(q, lambda r: _weight_2(cache, r))
    rates = _split_curve(rate.grid, rate.values, r3, kind, "R")
    integrals = _split_curve(rate.grid, dinf.values, d3, kind, "D")
    return rates, integrals


def di_split_x_curves(model, partition, t, step=DEFAULT_STEP):
    """Rate and directed-information curves of the X-split on [0, t]."""
    return _di_split("X", model, partition, t, step)


def di_split_w_curves(model, partition, t, step=DEFAULT_STEP, h5_tol=H5_TOL):
    """Rate and directed-information curves of the W-split on [0, t]."""
    return _di_split("W", model, partition, t, step, h5_tol)


def di_split_x(model, partition, t, step=DEFAULT_STEP):
    """Split of the rate ``R(t)`` into X~2 and X~3-given-X~2 parts (X-split)."""
    return di_split_x_curves(model, partition, t, step)[0].final()


def di_split_w(model, partition, t, step=DEFAULT_STEP, h5_tol=H5_TOL):
    """Split of the rate ``R(t)`` into noise-based parts (W-split)."""
    return di_split_w_curves(model, partition, t, step, h5_tol)[0].final()
