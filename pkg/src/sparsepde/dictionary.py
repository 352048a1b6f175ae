"""Feature dictionaries, regression systems and PDE rendering.

A feature is a product of zero, one or two *base fields*; a base field is a
spatial derivative of ``u`` named by its multi-index, e.g. ``(1,)`` for
``u_x`` or ``(1, 1)`` for ``u_xy``.  The orders below are frozen: every
support and coefficient vector in reports indexes into them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .differentiation import derivative_along
from .grid import SpaceTimeGrid
from .smoothing import SddDerivatives

BASE_1D = ((0,), (1,), (2,))
BASE_2D = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

_AXIS_NAMES = "xy"


def base_name(index: tuple[int, ...]) -> str:
    if sum(index) == 0:
        return "u"
    return "u_" + "".join(_AXIS_NAMES[a] * k for a, k in enumerate(index))


@dataclass(frozen=True)
class DictionarySpec:
    """Ordered list of monomial features over the base fields."""

    d: int
    bases: tuple[tuple[int, ...], ...]
    features: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def K(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [feature_name(f) for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r} in the {self.d}D dictionary") from None

    def required_bases(self, columns=None) -> set[tuple[int, ...]]:
        feats = self.features if columns is None else [self.features[j] for j in columns]
        return {b for f in feats for b in f}

    def subset(self, names) -> "DictionarySpec":
        """Dictionary restricted to ``names`` (order preserved as given)."""
        return DictionarySpec(self.d, self.bases, tuple(self.features[self.index(n)] for n in names))

    def coefficients(self, values=None, **by_name) -> "Coefficients":
        """Build coefficients from a full vector or from ``{name: value}`` pairs.

        Names containing ``*`` or ``^`` cannot be keywords; pass a dict as ``values``.
        """
        c = np.zeros(self.K)
        if isinstance(values, dict):
            by_name = {**values, **by_name}
        elif values is not None:
            c[:] = values
        for name, v in by_name.items():
            c[self.index(name)] = v
        return Coefficients(self, c)


def feature_name(feature) -> str:
    if len(feature) == 0:
        return "1"
    names = [base_name(b) for b in feature]
    if len(names) == 2 and names[0] == names[1]:
        return names[0] + "^2"
    return "*".join(names)


@lru_cache(maxsize=None)
def dictionary_for(d: int) -> DictionarySpec:
    """The standard degree-2, order-2 dictionary (K=10 in 1D, K=28 in 2D)."""
    if d == 1:
        u, ux, uxx = BASE_1D
        feats = ((), (u,), (u, u), (ux,), (ux, ux), (u, ux), (uxx,), (uxx, uxx),
                 (u, uxx), (ux, uxx))
        return DictionarySpec(1, BASE_1D, feats)
    if d == 2:
        feats = [()] + [(b,) for b in BASE_2D]
        feats += [pair for pair in combinations_with_replacement(BASE_2D, 2)]
        return DictionarySpec(2, BASE_2D, tuple(feats))
    raise ValueError(f"no dictionary for d={d}")


@dataclass(frozen=True, eq=False)
class Coefficients:
    dictionary: DictionarySpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.dictionary.K:
            raise ValueError(f"expected {self.dictionary.K} coefficients, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def support(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.values))

    def support_names(self) -> list[str]:
        names = self.dictionary.names
        return [names[j] for j in self.support()]

    def as_dict(self) -> dict[str, float]:
        names = self.dictionary.names
        return {names[j]: float(self.values[j]) for j in self.support()}


def evaluate_features(dictionary: DictionarySpec, bases: dict, columns=None) -> list[np.ndarray]:
    """Elementwise feature values from a ``{multi-index: array}`` map."""
    cols = range(dictionary.K) if columns is None else columns
    out = []
    ref = next(iter(bases.values()))
    for j in cols:
        f = dictionary.features[j]
        if len(f) == 0:
            out.append(np.ones_like(ref))
        elif len(f) == 1:
            out.append(np.asarray(bases[f[0]]))
        else:
            out.append(bases[f[0]] * bases[f[1]])
    return out


def eno_bases(state: np.ndarray, d: int, dx: float, needed, start: str = "point") -> dict:
    """Base fields of ``state`` by plain (unsmoothed) ENO differentiation.

    ``state`` has the spatial axes last, with any leading batch axes.
    """
    lead = state.ndim - d
    cache: dict[tuple[int, ...], np.ndarray] = {(): state}
    out = {}
    for idx in sorted(needed, key=sum):
        seq = tuple(a for a, k in enumerate(idx) for _ in range(k))
        for n in range(1, len(seq) + 1):
            if seq[:n] not in cache:
                cache[seq[:n]] = derivative_along(cache[seq[:n - 1]], lead + seq[n - 1], dx,
                                                 start)
        out[idx] = cache[seq]
    return out


def evaluate_rhs(c: Coefficients, state: np.ndarray, dx: float, start: str = "centered",
                 ) -> np.ndarray:
    """Right-hand side ``sum_j c_j * feature_j(state)`` with ENO derivatives.

    Used by the time steppers, hence the centered ENO start by default.
    """
    dic = c.dictionary
    active = c.support()
    if not active:
        return np.zeros_like(state)
    bases = eno_bases(state, dic.d, dx, dic.required_bases(active) or {(0,) * dic.d},
                      start)
    rhs = np.zeros_like(state, dtype=np.float64)
    for j, col in zip(active, evaluate_features(dic, bases, active)):
        rhs = rhs + c.values[j] * col
    return rhs


@dataclass(frozen=True, eq=False)
class RegressionSystem:
    """``b ~ F c`` with rows ordered ``(n, i1, ..., id)`` for ``n = 0..N-1``."""

    F: np.ndarray
    b: np.ndarray
    grid: SpaceTimeGrid
    dictionary: DictionarySpec
    rows: np.ndarray = field(default=None)

    def __post_init__(self):
        F = np.asarray(self.F, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if F.ndim != 2 or F.shape[1] != self.dictionary.K or F.shape[0] != b.size:
            raise ValueError(f"inconsistent system shapes F{F.shape}, b{b.shape}")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(b))):
            raise ValueError("regression system has non-finite entries")
        rows = np.arange(b.size) if self.rows is None else np.asarray(self.rows, dtype=np.int64)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.b.size

    def row_index(self, r: int) -> tuple[int, ...]:
        """Decode the (original) row number ``r`` into ``(n, i1, ..., id)``."""
        g = self.grid
        return tuple(int(v) for v in np.unravel_index(int(r), (g.N,) + g.spatial_shape))

    def columns(self, cols) -> "RegressionSystem":
        return RegressionSystem(self.F[:, list(cols)], self.b, self.grid,
                                DictionarySpec(self.dictionary.d, self.dictionary.bases,
                                               tuple(self.dictionary.features[j] for j in cols)),
                                self.rows)

    def scaled(self, s: float) -> "RegressionSystem":
        return RegressionSystem(self.F, s * self.b, self.grid, self.dictionary, self.rows)


def build_system(derivs: SddDerivatives, dictionary: DictionarySpec,
                 margin: int = 0) -> RegressionSystem:
    """Assemble the feature matrix and response from SDD derivatives.

    Rows cover snapshots ``0..N-1``.  ``margin > 0`` drops rows within
    ``margin`` nodes of the spatial boundary.
    """
    g = derivs.denoised.grid
    needed = dictionary.required_bases()
    missing = [b for b in needed if b not in derivs.spatial]
    if missing:
        raise KeyError(f"missing derivative fields for {sorted(missing)}")
    bases = {b: derivs.spatial[b].values[: g.N] for b in needed}
    if not bases:
        bases = {(0,) * g.d: derivs.denoised.values[: g.N]}
    cols = evaluate_features(dictionary, bases)
    F = np.stack([c.reshape(-1) for c in cols], axis=1)
    b = derivs.dt.values.reshape(-1)
    rows = np.arange(b.size)
    if margin > 0:
        keep = np.ones((g.N,) + g.spatial_shape, dtype=bool)
        for axis in range(1, g.d + 1):
            sl = [slice(None)] * (g.d + 1)
            sl[axis] = slice(0, margin)
            keep[tuple(sl)] = False
            sl[axis] = slice(g.M - margin, None)
            keep[tuple(sl)] = False
        rows = np.flatnonzero(keep.reshape(-1))
        F, b = F[rows], b[rows]
    return RegressionSystem(F, b, g, dictionary, rows)


def restrict_rows(system: RegressionSystem, rows) -> RegressionSystem:
    """Rows ``rows`` (positions into the current system), order preserved."""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1)
    if rows.size and (rows.min() < 0 or rows.max() >= system.n_rows):
        raise IndexError("row index out of range")
    return RegressionSystem(system.F[rows], system.b[rows], system.grid,
                            system.dictionary, system.rows[rows])


def render_pde(c: Coefficients, precision: int = 4) -> str:
    """Render ``u_t = ...`` listing nonzero terms in dictionary order."""
    names = c.dictionary.names
    terms = []
    for j in c.support():
        v = float(c.values[j])
        mag = f"{abs(v):.{precision}f}"
        body = mag if names[j] == "1" else f"{mag}*{names[j]}"
        terms.append(("-" if v < 0 else "+", body))
    if not terms:
        return "u_t = 0"
    sign, body = terms[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return "u_t = " + out
