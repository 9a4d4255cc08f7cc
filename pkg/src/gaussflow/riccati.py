"""Matrix Riccati equations of the filtering type.

    dq/dt = F q + q F' + G - q H q,    q(t0) = q0,

with piecewise-constant F, G (PSD) and H (PSD).  :func:`integrate` uses
classical RK4 on a uniform grid inside each constant-coefficient segment,
restarting at every switch time so no step straddles a discontinuity.
:func:`solve_are` returns the stabilizing stationary solution for constant
coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from ._linalg import PSD_TOL, symmetrize
from .errors import BlowUp, NoStabilizingSolution, PSDLost

DEFAULT_STEP = 1e-3
BLOWUP_NORM = 1e12

__all__ = [
    "RiccatiSpec",
    "RiccatiTrajectory",
    "integrate",
    "solve_are",
    "riccati_rhs",
]


def _constant(m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return lambda t: m


@dataclass(frozen=True)
class RiccatiSpec:
    """Coefficients and initial value of a Riccati equation.

    ``F``, ``G`` and ``H`` are callables ``t -> (m, m) array`` that must be
    constant between consecutive entries of ``breakpoints``.  Plain arrays are
    accepted and wrapped as constant maps.
    """

    F: Callable
    G: Callable
    H: Callable
    q0: np.ndarray
    t0: float = 0.0
    breakpoints: tuple = field(default=())

    def __post_init__(self):
        for name in ("F", "G", "H"):
            val = getattr(self, name)
            if not callable(val):
                object.__setattr__(self, name, _constant(val))
        object.__setattr__(self, "q0", np.atleast_2d(np.asarray(self.q0, dtype=float)))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "breakpoints", tuple(sorted(float(t) for t in self.breakpoints)))

    @property
    def dim(self):
        return self.q0.shape[0]


@dataclass(frozen=True)
class RiccatiTrajectory:
    """Solution values on the integration grid.

    ``segments`` lists ``(start, stop)`` index pairs (inclusive) of the
    constant-coefficient pieces; adjacent pieces share their boundary point.
    """

    grid: np.ndarray
    values: np.ndarray
    segments: tuple

    def __len__(self):
        return self.grid.shape[0]

    @property
    def final(self):
        return self.values[-1]

    def at(self, t):
        """Value at a grid time (nearest grid point; no interpolation)."""
        i = int(np.argmin(np.abs(self.grid - t)))
        return self.values[i]

    def restrict(self, t_start):
        """Sub-trajectory starting at grid time ``t_start``."""
        i0 = int(np.argmin(np.abs(self.grid - t_start)))
        segs = tuple((max(a, i0) - i0, b - i0) for a, b in self.segments if b > i0)
        return RiccatiTrajectory(self.grid[i0:], self.values[i0:], segs)


def riccati_rhs(F, G, H, q):
    Fq = F @ q
    return Fq + Fq.T + G - q @ H @ q


def _segment_times(t0, t1, step):
    nsteps = max(1, math.ceil((t1 - t0) / step - 1e-9))
    return np.linspace(t0, t1, nsteps + 1)


def _rk4_segment(F, G, H, q, times, out):
    for i in range(1, times.shape[0]):
        h = times[i] - times[i - 1]
        k1 = riccati_rhs(F, G, H, q)
        k2 = riccati_rhs(F, G, H, q + (0.5 * h) * k1)
        k3 = riccati_rhs(F, G, H, q + (0.5 * h) * k2)
        k4 = riccati_rhs(F, G, H, q + h * k3)
        q = q + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        q = 0.5 * (q + q.T)
        out[i] = q
        if not (i & 63) and not np.all(np.abs(out[i - 63:i + 1]) < BLOWUP_NORM):
            raise BlowUp(f"Riccati solution exceeded {BLOWUP_NORM:g} near t={times[i]:g}")
    if not np.all(np.abs(out) < BLOWUP_NORM):
        raise BlowUp(f"Riccati solution exceeded {BLOWUP_NORM:g} before t={times[-1]:g}")
    return q


def _rk4_segment_scalar(F, G, H, q, times, out):
    f, g, hh = float(F[0, 0]), float(G[0, 0]), float(H[0, 0])
    x = float(q[0, 0])
    col = out[:, 0, 0]
    for i in range(1, times.shape[0]):
        h = times[i] - times[i - 1]
        k1 = 2 * f * x + g - hh * x * x
        y = x + 0.5 * h * k1
        k2 = 2 * f * y + g - hh * y * y
        y = x + 0.5 * h * k2
        k3 = 2 * f * y + g - hh * y * y
        y = x + h * k3
        k4 = 2 * f * y + g - hh * y * y
        x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not abs(x) < BLOWUP_NORM:
            raise BlowUp(f"Riccati solution exceeded {BLOWUP_NORM:g} near t={times[i]:g}")
        col[i] = x
    return out[-1]


def _enforce_psd(values, psd_tol):
    """Clip round-off negative eigenvalues in place; error on real violations."""
    if values.shape[1] == 1:
        low = values[:, 0, 0]
        scale = np.maximum(np.abs(low), 1.0)
        if np.any(low < -psd_tol * scale):
            raise PSDLost(f"Riccati solution lost positivity (min {low.min():.3e})")
        np.clip(values, 0.0, None, out=values)
        return
    w = np.linalg.eigvalsh(values)
    scale = np.maximum(np.abs(w).max(axis=1), 1.0)
    bad = w[:, 0] < -psd_tol * scale
    if np.any(bad):
        raise PSDLost(f"Riccati solution lost positivity (min eigenvalue {w[:, 0].min():.3e})")
    for i in np.flatnonzero(w[:, 0] < 0.0):
        wi, ui = np.linalg.eigh(values[i])
        values[i] = symmetrize((ui * np.clip(wi, 0.0, None)) @ ui.T)


def integrate(spec, t_end, step=DEFAULT_STEP, psd_tol=PSD_TOL):
    """Integrate ``spec`` from ``spec.t0`` to ``t_end`` with fixed-step RK4.

    Each segment between breakpoints gets ``ceil(length / step)`` equal
    steps.  Every step is symmetrized; after each segment eigenvalues in
    ``[-psd_tol * scale, 0)`` are clipped to zero and anything more negative
    raises :class:`PSDLost`.
    """
    t0 = spec.t0
    if not t_end > t0:
        raise ValueError(f"t_end ({t_end}) must exceed t0 ({t0})")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    cuts = [t0] + [t for t in spec.breakpoints if t0 < t < t_end] + [float(t_end)]

    q = symmetrize(spec.q0)
    grids, blocks, segments = [], [], []
    offset = 0
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        mid = 0.5 * (a + b)
        F = np.atleast_2d(spec.F(mid))
        G = np.atleast_2d(spec.G(mid))
        H = np.atleast_2d(spec.H(mid))
        times = _segment_times(a, b, step)
        out = np.empty((times.shape[0],) + q.shape)
        out[0] = q
        stepper = _rk4_segment_scalar if q.shape == (1, 1) else _rk4_segment
        q = stepper(F, G, H, q, times, out)
        _enforce_psd(out, psd_tol)
        q = out[-1]
        segments.append((offset, offset + times.shape[0] - 1))
        offset += times.shape[0] - 1
        if i:
            times, out = times[1:], out[1:]
        grids.append(times)
        blocks.append(out)
    grid = np.concatenate(grids)
    values = np.concatenate(blocks)
    grid.setflags(write=False)
    values.setflags(write=False)
    return RiccatiTrajectory(grid, values, tuple(segments))


def _hurwitz(m):
    return m.size == 0 or np.max(np.linalg.eigvals(m).real) < 0.0


def _residual(F, G, H, q):
    r = riccati_rhs(F, G, H, q)
    scale = np.linalg.norm(G) + 2 * np.linalg.norm(F @ q) + np.linalg.norm(q @ H @ q)
    return np.linalg.norm(r) / scale if scale > 0 else 0.0


def solve_are(F, G, H, tol=1e-10, max_iter=10_000):
    """Stabilizing solution of ``F q + q F' + G - q H q = 0``.

    A Schur-based solve seeds Newton-Kleinman iterations (one Lyapunov solve
    per iteration) that polish the root.  The result must leave
    ``F - q H`` Hurwitz, otherwise :class:`NoStabilizingSolution` is raised.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = symmetrize(np.atleast_2d(np.asarray(G, dtype=float)))
    H = symmetrize(np.atleast_2d(np.asarray(H, dtype=float)))
    m = F.shape[0]

    q = None
    try:
        w, u = np.linalg.eigh(H)
        B = u * np.sqrt(np.clip(w, 0.0, None))
        q = sla.solve_continuous_are(F.T, B, G, np.eye(m))
        q = symmetrize(q)
        if not np.all(np.isfinite(q)) or not _hurwitz(F - q @ H):
            q = None
    except (np.linalg.LinAlgError, ValueError):
        q = None
    if q is None:
        if not _hurwitz(F):
            raise NoStabilizingSolution("no stabilizing seed: F is not Hurwitz")
        q = np.zeros((m, m))

    for _ in range(max_iter):
        closed = F - q @ H
        if not _hurwitz(closed):
            raise NoStabilizingSolution("Newton iterate lost stability")
        q_new = symmetrize(sla.solve_continuous_lyapunov(closed, -(G + q @ H @ q)))
        delta = np.linalg.norm(q_new - q)
        q = q_new
        if delta <= 1e-15 * max(np.linalg.norm(q), 1e-300) or _residual(F, G, H, q) <= 1e-14:
            break
    else:
        raise NoStabilizingSolution(f"no convergence in {max_iter} iterations")

    if _residual(F, G, H, q) > tol or not _hurwitz(F - q @ H):
        raise NoStabilizingSolution(f"residual {_residual(F, G, H, q):.3e} above {tol:g}")
    return q
