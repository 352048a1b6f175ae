"""Benchmark data: forward Euler solves, downsampling and seeded noise.

Noise generator
---------------
Draws come from the Philox4x64-10 counter-based bit generator keyed by the
64-bit seed.  Node ``i`` (C-order over the full ``(N+1, M, ...)`` array)
consumes raw outputs ``2i`` and ``2i+1``; these become uniforms
``u1 = (a >> 11 + 1) / 2**53`` in ``(0, 1]`` and ``u2 = (b >> 11) / 2**53`` in
``[0, 1)``, and the normal deviate is the Box-Muller cosine branch
``sqrt(-2 ln u1) * cos(2 pi u2)``.  The raw Philox stream is fixed by its
definition, so the noise depends only on ``(seed, node index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dictionary import Coefficients, DictionarySpec, dictionary_for, evaluate_rhs
from .grid import Field, SpaceTimeGrid


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PdeSpec:
    """``u_t = sum_j c_j feature_j`` with zero Dirichlet data on the pinned axes.

    ``pinned_axes=None`` pins the boundary faces of every spatial axis.
    """

    coefficients: Coefficients
    pinned_axes: tuple[int, ...] | None = None

    @property
    def dictionary(self) -> DictionarySpec:
        return self.coefficients.dictionary

    def axes(self) -> tuple[int, ...]:
        d = self.dictionary.d
        return tuple(range(d)) if self.pinned_axes is None else self.pinned_axes


@dataclass(frozen=True)
class InitialCondition:
    """A named analytic initial condition, or user-supplied samples."""

    name: str
    func: Callable | None = None
    params: dict = field(default_factory=dict)
    samples: np.ndarray | None = None

    def evaluate(self, grid: SpaceTimeGrid) -> np.ndarray:
        if self.samples is not None:
            v = np.asarray(self.samples, dtype=np.float64).reshape(grid.spatial_shape)
        else:
            v = np.asarray(self.func(*grid.mesh(), **self.params), dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise SimulationError(f"initial condition {self.name!r} is not finite")
        return v


@dataclass(frozen=True)
class NoiseSpec:
    percent: float
    seed: int

    def __post_init__(self):
        if not (math.isfinite(self.percent) and self.percent >= 0):
            raise ValueError("noise percent must be finite and >= 0")


def _pin(u: np.ndarray, axes, lead: int = 0) -> None:
    for a in axes:
        idx = [slice(None)] * u.ndim
        idx[lead + a] = 0
        u[tuple(idx)] = 0.0
        idx[lead + a] = -1
        u[tuple(idx)] = 0.0


def solve_forward_euler(pde: PdeSpec, ic: InitialCondition, grid: SpaceTimeGrid) -> Field:
    """Explicit Euler in time, centered-start ENO in space, boundary pinned to 0 every step."""
    if grid.d != pde.dictionary.d:
        raise SimulationError("PDE and grid dimensions differ")
    out = np.empty(grid.shape)
    u = ic.evaluate(grid).copy()
    axes = pde.axes()
    _pin(u, axes)
    out[0] = u
    for n in range(grid.N):
        with np.errstate(over="ignore", invalid="ignore"):
            u = u + grid.dt * evaluate_rhs(pde.coefficients, u, grid.dx)
        _pin(u, axes)
        if not np.all(np.isfinite(u)):
            raise SimulationError(f"solution blew up at time step {n + 1} (t={(n + 1) * grid.dt:g})")
        out[n + 1] = u
    return Field(grid, out)


def downsample(field: Field, space_stride: int, time_stride: int) -> Field:
    g = field.grid
    if space_stride < 1 or time_stride < 1:
        raise ValueError("strides must be positive")
    if (g.M - 1) % space_stride or g.N % time_stride:
        raise ValueError(f"strides ({space_stride}, {time_stride}) do not divide "
                         f"M-1={g.M - 1}, N={g.N}")
    coarse = SpaceTimeGrid(d=g.d, M=(g.M - 1) // space_stride + 1, N=g.N // time_stride,
                           dx=g.dx * space_stride, dt=g.dt * time_stride, X=g.X, T=g.T)
    sl = (slice(None, None, time_stride),) + (slice(None, None, space_stride),) * g.d
    return Field(coarse, field.values[sl])


def gaussian_draws(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal deviates; draw ``i`` depends only on ``(seed, i)``."""
    bitgen = np.random.Philox(key=int(seed) % 2**64)
    raw = bitgen.random_raw(2 * n).reshape(n, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def noise_sigma(field: Field, percent: float) -> float:
    """``p/100`` times the root-mean-square of the field."""
    return percent / 100.0 * math.sqrt(float(np.mean(field.values**2)))


def add_noise(field: Field, noise: NoiseSpec) -> Field:
    if noise.percent == 0:
        return field
    sigma = noise_sigma(field, noise.percent)
    eps = gaussian_draws(noise.seed, field.values.size).reshape(field.values.shape)
    return field.with_values(field.values + sigma * eps)


# --- experiment catalogue -------------------------------------------------

def _transport_bump(x, T=0.05):
    L = 1.0 - T
    s = 2 * np.pi * x / L
    return np.where((x >= 0) & (x <= L), np.sin(s) ** 2 * np.cos(s), 0.0)


def transport_exact(grid: SpaceTimeGrid, speed: float = 1.0, T: float = 0.05,
                    ) -> dict[tuple[int, ...], np.ndarray]:
    """Exact ``u``, ``u_x``, ``u_xx`` of ``u_t = -speed*u_x`` from the transport bump.

    Arrays have shape ``grid.shape``; derivatives are analytic (zero off the
    support of the bump).
    """
    if grid.d != 1:
        raise ValueError("the transport solution is one-dimensional")
    L = 1.0 - T
    xi = grid.coordinates()[None, :] - speed * grid.times()[:, None]
    inside = (xi >= 0) & (xi <= L)
    k = 2 * np.pi / L
    s = k * xi
    sn, cs = np.sin(s), np.cos(s)
    u = sn**2 * cs
    ux = k * (2 * sn * cs**2 - sn**3)
    uxx = k**2 * (2 * cs**3 - 7 * sn**2 * cs)
    return {(0,): np.where(inside, u, 0.0), (1,): np.where(inside, ux, 0.0),
            (2,): np.where(inside, uxx, 0.0)}


def _burgers_sin4(x):
    return np.sin(4 * np.pi * x) * np.cos(np.pi * x)


def _burgers_diff_sin3(x):
    return np.sin(3 * np.pi * x) * np.cos(np.pi * x)


def _box(x, L=0.9):
    return (x >= 0) & (x <= L)


def _twod_bump(x, y):
    v = np.sin(3 * np.pi * x / 0.9) ** 2 * np.sin(2 * np.pi * y / 0.9) ** 2
    return np.where(_box(x) & _box(y), v, 0.0)


def _twod_xy_bump(x, y):
    v = np.sin(2 * np.pi * x / 0.9) ** 2 * np.sin(2 * np.pi * y / 0.9) ** 2
    return np.where(_box(x) & _box(y), v, 0.0)


def _twod_x_only(x, y):
    return np.where(_box(x), np.sin(2 * np.pi * x / 0.9) ** 2, 0.0 * y)


def _sin3_sin5(x, y):
    return np.sin(3 * np.pi * x) * np.sin(5 * np.pi * y)


INITIAL_CONDITIONS = {
    "transport-bump": _transport_bump,
    "burgers-sin4": _burgers_sin4,
    "burgers-diff-sin3": _burgers_diff_sin3,
    "twod-bump": _twod_bump,
    "twod-xy-bump": _twod_xy_bump,
    "twod-x-only": _twod_x_only,
    "sin3-sin5": _sin3_sin5,
}


@dataclass(frozen=True)
class Experiment:
    """A benchmark configuration plus the default ST/SC parameters used with it."""

    name: str
    pde: PdeSpec
    ic: InitialCondition
    fine_grid: SpaceTimeGrid
    space_stride: int
    time_stride: int
    w: int
    alpha: float

    @property
    def truth(self) -> Coefficients:
        return self.pde.coefficients

    @property
    def strides(self) -> tuple[int, int]:
        return (self.space_stride, self.time_stride)

    def __iter__(self):
        return iter((self.pde, self.ic, self.fine_grid, self.strides))

    def clean(self) -> Field:
        fine = solve_forward_euler(self.pde, self.ic, self.fine_grid)
        return downsample(fine, self.space_stride, self.time_stride)


def _ic(name, **params):
    return InitialCondition(name, INITIAL_CONDITIONS[name], params)


def _exp1d(name, terms, ic, dx, dt, T, strides, alpha):
    dic = dictionary_for(1)
    M = int(round(1.0 / dx)) + 1
    grid = SpaceTimeGrid.from_spacing(1, M, int(round(T / dt)), dx, dt)
    pde = PdeSpec(dic.coefficients(terms))
    return Experiment(name, pde, ic, grid, strides[0], strides[1], 20, alpha)


def _exp2d(name, terms, ic, pinned=None, dx=0.02, dt=8e-4, fine_steps=120, strides=(2, 10),
           w=10, alpha=3 / 200):
    dic = dictionary_for(2)
    grid = SpaceTimeGrid.from_spacing(2, int(round(1.0 / dx)) + 1, fine_steps, dx, dt)
    return Experiment(name, PdeSpec(dic.coefficients(terms), pinned), ic, grid,
                      strides[0], strides[1], w, alpha)


def _catalogue() -> dict:
    return {
        "transport": lambda: _exp1d("transport", {"u_x": -1.0}, _ic("transport-bump", T=0.05),
                                    1 / 256, 1e-3, 0.05, (1, 1), 1 / 200),
        "burgers": lambda: _exp1d("burgers", {"u*u_x": -1.0}, _ic("burgers-sin4"),
                                  1 / 256, 1e-3, 0.05, (1, 1), 1 / 500),
        "burgers-diffusion": lambda: _exp1d("burgers-diffusion", {"u*u_x": -1.0, "u_xx": 0.1},
                                            _ic("burgers-diff-sin3"), 1 / 256, 1e-5, 0.05,
                                            (4, 10), 1 / 10),
        # 120 fine steps of 8e-4 (T=0.096) so that the time stride 10 divides evenly
        "twod-advdiff": lambda: _exp2d("twod-advdiff", {"u_xx": 0.02, "u*u_y": -1.0},
                                       _ic("twod-bump")),
        "twod-transport-xy": lambda: _exp2d("twod-transport-xy", {"u_x": -0.5, "u_y": 0.5},
                                            _ic("twod-xy-bump")),
        # data constant in y: only the x faces carry the zero Dirichlet condition
        "twod-transport-x": lambda: _exp2d("twod-transport-x", {"u_x": -0.5, "u_y": 0.5},
                                           _ic("twod-x-only"), pinned=(0,)),
        "twod-smoother": lambda: _exp2d("twod-smoother", {"u*u_x": -0.4, "u*u_y": -0.2},
                                        _ic("sin3-sin5"), dx=0.01, dt=5e-4, fine_steps=300,
                                        strides=(1, 10)),
    }


EXPERIMENTS = tuple(_catalogue())


def builtin_experiment(name: str) -> Experiment:
    try:
        return _catalogue()[name]()
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}") from None
