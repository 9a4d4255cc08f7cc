"""Linear Gaussian diffusion models and their block partitions.

The process is

    dX(t) = b(t) X(t) dt + dM(t),    X(0) ~ N(mu, v),

where M is a Brownian motion with covariation rate a(t).  The coefficient
maps are constant or piecewise constant (right-continuous), which keeps the
integrability condition on b and a automatic on any finite horizon and lets
the ODE integrators restart cleanly at each switch time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import PSD_TOL, project_psd, readonly
from .errors import (
    BreakpointOrder,
    DimensionMismatch,
    ModelError,
    NegativeTime,
    NotPSD,
)

__all__ = [
    "CoefficientMap",
    "ModelSpec",
    "Partition2",
    "Partition3",
    "ValidatedModel",
    "validate_model",
    "eval_coefficients",
    "model_from_dict",
    "model_to_dict",
    "partition_from_dict",
    "load_model",
    "constant_model",
]


@dataclass(frozen=True)
class CoefficientMap:
    """A constant or piecewise-constant matrix-valued function of time.

    ``breakpoints`` holds the interior switch times; interval ``i`` covers
    ``[breakpoints[i-1], breakpoints[i])`` with the first interval starting at
    zero and the last one unbounded.
    """

    kind: str
    values: tuple
    breakpoints: tuple = ()

    @classmethod
    def constant(cls, value):
        return cls("constant", (readonly(value),), ())

    @classmethod
    def piecewise(cls, breakpoints, values):
        """Build a piecewise map.

        ``breakpoints`` may either list the interior switch times
        (``len(values) - 1`` entries) or the start time of every interval, in
        which case the first entry must be 0.
        """
        bps = [float(t) for t in breakpoints]
        vals = tuple(readonly(m) for m in values)
        if len(bps) == len(vals):
            if not bps or bps[0] != 0.0:
                raise BreakpointOrder("first interval must start at t=0")
            bps = bps[1:]
        elif len(bps) != len(vals) - 1:
            raise BreakpointOrder(
                f"{len(vals)} values need {len(vals) - 1} interior breakpoints, "
                f"got {len(bps)}"
            )
        if any(t <= 0.0 for t in bps):
            raise BreakpointOrder("interior breakpoints must be positive")
        if any(t1 <= t0 for t0, t1 in zip(bps, bps[1:])):
            raise BreakpointOrder("breakpoints must be strictly increasing")
        if len(vals) == 1:
            return cls.constant(vals[0])
        return cls("piecewise", vals, tuple(bps))

    def index(self, t):
        return int(np.searchsorted(self.breakpoints, t, side="right"))

    def __call__(self, t):
        return self.values[self.index(t)]


@dataclass(frozen=True)
class ModelSpec:
    n: int
    mu: np.ndarray
    v: np.ndarray
    b: CoefficientMap
    a: CoefficientMap


@dataclass(frozen=True)
class Partition2:
    """Split of the state into X1 (first n1 coordinates) and X2 (the rest)."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ModelError(f"partition blocks must be >= 1, got {self}")

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def idx1(self):
        return slice(0, self.n1)

    @property
    def idx2(self):
        return slice(self.n1, self.n)


@dataclass(frozen=True)
class Partition3:
    """Split into X1, X~2 and X~3, where (X~2, X~3) is the X2 block."""

    n1: int
    nt2: int
    nt3: int

    def __post_init__(self):
        if min(self.n1, self.nt2, self.nt3) < 1:
            raise ModelError(f"partition blocks must be >= 1, got {self}")

    @property
    def n(self):
        return self.n1 + self.nt2 + self.nt3

    @property
    def two_block(self):
        return Partition2(self.n1, self.nt2 + self.nt3)

    @property
    def idx1(self):
        return slice(0, self.n1)

    @property
    def idx2(self):
        return slice(self.n1, self.n1 + self.nt2)

    @property
    def idx3(self):
        return slice(self.n1 + self.nt2, self.n)


@dataclass(frozen=True, eq=False)
class ValidatedModel:
    """Immutable, checked model.  Build with :func:`validate_model`."""

    n: int
    mu: np.ndarray
    v: np.ndarray
    b: CoefficientMap
    a: CoefficientMap
    breakpoints: tuple = field(default=())

    def interval_index(self, t):
        """Index of the constant-coefficient interval containing ``t``."""
        return int(np.searchsorted(self.breakpoints, t, side="right"))

    def breakpoints_between(self, t0, t1):
        return tuple(t for t in self.breakpoints if t0 < t < t1)

    def is_constant(self):
        return not self.breakpoints


def _as_matrix(x, name, n):
    m = np.asarray(x, dtype=float)
    if m.shape != (n, n):
        raise DimensionMismatch(f"{name} has shape {m.shape}, expected ({n}, {n})")
    if not np.all(np.isfinite(m)):
        raise ModelError(f"{name} contains non-finite entries")
    return m


def validate_model(spec, psd_tol=PSD_TOL):
    """Check a :class:`ModelSpec` and return a :class:`ValidatedModel`.

    ``v`` and every value of ``a`` must be symmetric PSD; eigenvalues in
    ``[-psd_tol * scale, 0)`` are treated as round-off and projected away.
    """
    n = int(spec.n)
    if n < 2:
        raise DimensionMismatch(f"state dimension must be >= 2, got {n}")
    mu = np.asarray(spec.mu, dtype=float).reshape(-1)
    if mu.shape != (n,):
        raise DimensionMismatch(f"mu has shape {mu.shape}, expected ({n},)")

    v = _as_matrix(spec.v, "v", n)
    vscale = max(np.max(np.abs(v)), 1.0)
    if np.max(np.abs(v - v.T)) > 1e-12 * vscale:
        raise NotPSD("v (asymmetric)", -np.max(np.abs(v - v.T)))
    v = project_psd(v, "v", psd_tol)

    b_vals = tuple(readonly(_as_matrix(m, "b", n)) for m in spec.b.values)
    a_vals = []
    for i, m in enumerate(spec.a.values):
        m = _as_matrix(m, "a", n)
        if np.max(np.abs(m - m.T)) > 1e-12 * max(np.max(np.abs(m)), 1.0):
            raise NotPSD(f"a[{i}] (asymmetric)", -np.max(np.abs(m - m.T)))
        a_vals.append(readonly(project_psd(m, f"a[{i}]", psd_tol)))

    b = CoefficientMap(spec.b.kind, b_vals, tuple(spec.b.breakpoints))
    a = CoefficientMap(spec.a.kind, tuple(a_vals), tuple(spec.a.breakpoints))
    for name, cmap in (("b", b), ("a", a)):
        bps = cmap.breakpoints
        if len(cmap.values) != len(bps) + 1:
            raise BreakpointOrder(f"{name}: values/breakpoints length mismatch")
        if any(t <= 0 for t in bps) or any(y <= x for x, y in zip(bps, bps[1:])):
            raise BreakpointOrder(f"{name}: breakpoints must be positive and increasing")

    breakpoints = tuple(sorted(set(b.breakpoints) | set(a.breakpoints)))
    return ValidatedModel(n, readonly(mu), readonly(v), b, a, breakpoints)


def eval_coefficients(model, t):
    """Return ``(b(t), a(t))`` using right-continuous evaluation."""
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    return model.b(t), model.a(t)


# -- JSON model files ----------------------------------------------------------


def _cmap_from_dict(d, name):
    kind = d.get("kind")
    if kind == "constant":
        return CoefficientMap.constant(np.asarray(d["value"], dtype=float))
    if kind in ("piecewise", "piecewise-constant"):
        return CoefficientMap.piecewise(d["breakpoints"], d["values"])
    raise ModelError(f"{name}: unknown coefficient kind {kind!r}")


def _cmap_to_dict(cmap):
    if cmap.kind == "constant":
        return {"kind": "constant", "value": cmap.values[0].tolist()}
    return {
        "kind": "piecewise",
        "breakpoints": list(cmap.breakpoints),
        "values": [m.tolist() for m in cmap.values],
    }


def partition_from_dict(d):
    if d is None:
        return None
    if "nt2" in d or "nt3" in d:
        return Partition3(int(d["n1"]), int(d["nt2"]), int(d["nt3"]))
    return Partition2(int(d["n1"]), int(d["n2"]))


def model_from_dict(d, psd_tol=PSD_TOL):
    """Parse the JSON model schema; returns ``(model, partition_or_None)``."""
    try:
        n = int(d["n"])
        spec = ModelSpec(
            n=n,
            mu=np.asarray(d.get("mu", np.zeros(n)), dtype=float),
            v=np.asarray(d.get("v", np.zeros((n, n))), dtype=float),
            b=_cmap_from_dict(d["b"], "b"),
            a=_cmap_from_dict(d["a"], "a"),
        )
    except KeyError as exc:
        raise ModelError(f"model file is missing key {exc}") from None
    model = validate_model(spec, psd_tol)
    partition = partition_from_dict(d.get("partition"))
    if partition is not None and partition.n != model.n:
        raise DimensionMismatch(
            f"partition covers {partition.n} coordinates, model has {model.n}"
        )
    return model, partition


def model_to_dict(model, partition=None):
    d = {
        "n": model.n,
        "mu": model.mu.tolist(),
        "v": model.v.tolist(),
        "b": _cmap_to_dict(model.b),
        "a": _cmap_to_dict(model.a),
    }
    if isinstance(partition, Partition2):
        d["partition"] = {"n1": partition.n1, "n2": partition.n2}
    elif isinstance(partition, Partition3):
        d["partition"] = {"n1": partition.n1, "nt2": partition.nt2, "nt3": partition.nt3}
    return d


def load_model(path, psd_tol=PSD_TOL):
    with open(Path(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh), psd_tol)


def constant_model(b, a, v=None, mu=None):
    """Shortcut for the common constant-coefficient case."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n = b.shape[0]
    spec = ModelSpec(
        n=n,
        mu=np.zeros(n) if mu is None else mu,
        v=np.zeros((n, n)) if v is None else v,
        b=CoefficientMap.constant(b),
        a=CoefficientMap.constant(a),
    )
    return validate_model(spec)
