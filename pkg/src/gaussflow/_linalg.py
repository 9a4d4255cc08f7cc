"""Small dense linear-algebra helpers shared across modules."""

import numpy as np

from .errors import NotPSD, NotSymmetric

PSD_TOL = 1e-9


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.swapaxes(-1, -2))


def check_symmetric(m, name="matrix", rtol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"{name} must be square, got shape {m.shape}")
    scale = max(np.max(np.abs(m), initial=0.0), 1.0)
    asym = np.max(np.abs(m - m.T), initial=0.0)
    if asym > rtol * scale:
        raise NotSymmetric(f"{name} is not symmetric (max asymmetry {asym:.3e})")


def project_psd(m, name="matrix", psd_tol=PSD_TOL):
    """Symmetrize `m` and clip eigenvalues in [-psd_tol*scale, 0) to zero.

    Raises NotPSD if an eigenvalue lies below the tolerance window.
    """
    m = symmetrize(m)
    if m.size == 0:
        return m
    w, u = np.linalg.eigh(m)
    scale = max(np.max(np.abs(w)), 1.0)
    if w[0] < -psd_tol * scale:
        raise NotPSD(name, w[0])
    if w[0] >= 0.0:
        return m
    w = np.clip(w, 0.0, None)
    return symmetrize((u * w) @ u.T)


def is_psd(m, psd_tol=PSD_TOL):
    if np.asarray(m).size == 0:
        return True
    w = np.linalg.eigvalsh(symmetrize(m))
    return w[0] >= -psd_tol * max(np.max(np.abs(w)), 1.0)


def rel_err(a, b):
    """Frobenius error of `a` against `b`, relative to max(|b|, 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1.0)


def readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a
