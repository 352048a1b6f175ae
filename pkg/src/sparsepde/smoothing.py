"""Smoothers and successively denoised differentiation (SDD).

All smoothers are linear 1D operators.  Multi-dimensional smoothing applies
the 1D operator along each spatial axis in turn (x then y), snapshot by
snapshot; time smoothing applies it along the time axis at each node.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .differentiation import derivative_along, forward_time_diff
from .grid import Field

WEIGHT_CUTOFF = 1e-12
KINDS = ("mls", "moving-average", "diffusion", "none")


class SmoothingWarning(UserWarning):
    """MLS fell back to a weighted mean at some node (too few effective points)."""


@dataclass(frozen=True)
class SmootherSpec:
    """Smoother choice and parameters.

    ``h`` and ``h_t`` are physical lengths in the units of the axis being
    smoothed; ``h_t=None`` reuses ``h`` along time.
    """

    kind: str = "mls"
    h: float = 0.04
    h_t: float | None = None
    window: int = 3
    steps: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown smoother kind {self.kind!r}; expected one of {KINDS}")
        if not self.h > 0 or (self.h_t is not None and not self.h_t > 0):
            raise ValueError("MLS bandwidth must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("moving-average window must be odd and >= 1")
        if self.steps < 0:
            raise ValueError("diffusion steps must be >= 0")

    @property
    def time_bandwidth(self) -> float:
        return self.h if self.h_t is None else self.h_t

    def to_dict(self) -> dict:
        return {"kind": self.kind, "h": self.h, "h_t": self.h_t,
                "window": self.window, "steps": self.steps}


@lru_cache(maxsize=64)
def _mls_operator(M: int, spacing: float, h: float) -> tuple[sp.csr_matrix, bool]:
    radius = min(M - 1, int(math.floor(h * math.sqrt(-math.log(WEIGHT_CUTOFF)) / spacing)))
    offsets = np.arange(-radius, radius + 1)
    t = offsets * spacing / h
    w = np.exp(-(t**2))
    w[w < WEIGHT_CUTOFF] = 0.0
    cols = np.arange(M)[:, None] + offsets[None, :]
    valid = (cols >= 0) & (cols < M) & (w[None, :] > 0)
    W = np.where(valid, w[None, :], 0.0)
    T = np.broadcast_to(t, W.shape)
    mom = [np.sum(W * T**p, axis=1) for p in range(5)]
    A = np.empty((M, 3, 3))
    for p in range(3):
        for q in range(3):
            A[:, p, q] = mom[p + q]
    count = valid.sum(axis=1)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(A)
    degenerate = (count < 3) | ~np.isfinite(cond) | (cond > 1e14)
    rows = np.empty_like(W)
    ok = ~degenerate
    if ok.any():
        rhs = np.zeros((int(ok.sum()), 3, 1))
        rhs[:, 0, 0] = 1.0
        y = np.linalg.solve(A[ok], rhs)[..., 0]
        rows[ok] = W[ok] * (y[:, 0:1] + y[:, 1:2] * T[ok] + y[:, 2:3] * T[ok] ** 2)
    if degenerate.any():
        rows[degenerate] = W[degenerate] / W[degenerate].sum(axis=1, keepdims=True)
    r_idx = np.broadcast_to(np.arange(M)[:, None], W.shape)
    S = sp.csr_matrix((rows[valid], (r_idx[valid], cols[valid])), shape=(M, M))
    return S, bool(degenerate.any())


def mls_operator(M: int, spacing: float, h: float) -> sp.csr_matrix:
    """Sparse ``M x M`` matrix of the degree-2 MLS smoother with Gaussian weights."""
    if M < 3:
        raise ValueError("MLS needs at least 3 samples")
    if not h > 0:
        raise ValueError("MLS bandwidth must be positive")
    S, degenerate = _mls_operator(int(M), float(spacing), float(h))
    if degenerate:
        warnings.warn(f"MLS with h={h} and spacing={spacing}: fewer than 3 effective "
                      "points at some nodes, used weighted mean there", SmoothingWarning,
                      stacklevel=3)
    return S


def mls_smooth(values: np.ndarray, spacing: float, h: float) -> np.ndarray:
    """MLS-smooth along the last axis of ``values`` (one or many lines)."""
    u = np.asarray(values, dtype=np.float64)
    S = mls_operator(u.shape[-1], spacing, h)
    flat = u.reshape(-1, u.shape[-1])
    return np.asarray(S @ flat.T).T.reshape(u.shape)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically-truncated at the ends."""
    u = np.asarray(values, dtype=np.float64)
    r = window // 2
    if r == 0:
        return u.copy()
    M = u.shape[-1]
    c = np.concatenate([np.zeros(u.shape[:-1] + (1,)), np.cumsum(u, axis=-1)], axis=-1)
    lo = np.clip(np.arange(M) - r, 0, M)
    hi = np.clip(np.arange(M) + r + 1, 0, M)
    return (c[..., hi] - c[..., lo]) / (hi - lo)


def diffusion_smooth(values: np.ndarray, steps: int) -> np.ndarray:
    """Explicit heat-equation steps of size ``dx**2/4``; end nodes held fixed."""
    u = np.array(values, dtype=np.float64)
    for _ in range(steps):
        lap = u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:]
        u[..., 1:-1] += 0.25 * lap
    return u


def smooth_1d(values: np.ndarray, spacing: float, s: SmootherSpec, h: float | None = None,
              ) -> np.ndarray:
    """Apply the 1D smoother ``s`` along the last axis."""
    if s.kind == "none":
        return np.array(values, dtype=np.float64)
    if s.kind == "mls":
        return mls_smooth(values, spacing, s.h if h is None else h)
    if s.kind == "moving-average":
        return moving_average(values, s.window)
    return diffusion_smooth(values, s.steps)


def _smooth_axis(values: np.ndarray, axis: int, spacing: float, s: SmootherSpec,
                 h: float | None = None) -> np.ndarray:
    moved = np.moveaxis(values, axis, -1)
    return np.moveaxis(smooth_1d(moved, spacing, s, h), -1, axis)


def smooth_space_values(values: np.ndarray, d: int, dx: float, s: SmootherSpec) -> np.ndarray:
    out = np.asarray(values, dtype=np.float64)
    for axis in range(1, d + 1):
        out = _smooth_axis(out, axis, dx, s)
    return out


def smooth_space(field: Field, s: SmootherSpec) -> Field:
    """Smooth every snapshot along x, then y."""
    if s.kind == "none":
        return field
    g = field.grid
    return field.with_values(smooth_space_values(field.values, g.d, g.dx, s))


def smooth_time(field: Field, s: SmootherSpec) -> Field:
    """Smooth along time at every spatial node; MLS uses ``s.time_bandwidth``."""
    if s.kind == "none":
        return field
    out = _smooth_axis(field.values, 0, field.grid.dt, s, s.time_bandwidth)
    return field.with_values(out)


@dataclass(frozen=True)
class SddDerivatives:
    """Output of :func:`sdd`.

    ``spatial`` maps a multi-index such as ``(1,)`` (u_x) or ``(1, 1)`` (u_xy)
    to the corresponding SDD derivative field on the full grid; the zero
    multi-index maps to ``denoised``.  ``dt`` lives on the truncated grid
    (times ``0..N-1``).
    """

    denoised: Field
    dt: Field
    spatial: dict
    smoother: SmootherSpec

    def base(self, index: tuple[int, ...]) -> Field:
        if index not in self.spatial:
            raise KeyError(f"derivative {index} was not computed")
        return self.spatial[index]


def _axis_sequence(index: tuple[int, ...]) -> tuple[int, ...]:
    # lower axis applied first: u_xy = S D_y (S D_x S U)
    return tuple(axis for axis, k in enumerate(index) for _ in range(k))


def sdd(data: Field, s: SmootherSpec, needed: Iterable[tuple[int, ...]]) -> SddDerivatives:
    """Successively denoised differentiation of ``data``.

    Each spatial derivative step is ``smooth_space(D(previous))`` starting from
    the denoised data, so ``u_xx = S D_x S D_x S U``.  The time derivative is
    ``smooth_time(D_t S U)``.
    """
    g = data.grid
    needed = {tuple(int(k) for k in idx) for idx in needed}
    for idx in needed:
        if len(idx) != g.d or sum(idx) > 2 or min(idx) < 0:
            raise ValueError(f"unsupported derivative multi-index {idx}")
    denoised = smooth_space(data, s)
    dt = smooth_time(forward_time_diff(denoised), s)

    cache: dict[tuple[int, ...], np.ndarray] = {(): denoised.values}
    for idx in sorted(needed, key=lambda k: (sum(k), _axis_sequence(k))):
        seq = _axis_sequence(idx)
        for n in range(1, len(seq) + 1):
            prefix = seq[:n]
            if prefix not in cache:
                deriv = derivative_along(cache[prefix[:-1]], prefix[-1] + 1, g.dx)
                cache[prefix] = smooth_space_values(deriv, g.d, g.dx, s)
    spatial = {idx: Field(g, cache[_axis_sequence(idx)]) for idx in needed}
    return SddDerivatives(denoised=denoised, dt=dt, spatial=spatial, smoother=s)
