"""Model selection over Subspace Pursuit candidates.

ST scores each candidate PDE by its multi-shooting time evolution error
(MTEE) against the denoised data and shrinks the candidate pool until the
selected support repeats.  SC scores candidate supports by a two-fold,
row-ordered cross validation of the least-squares fit.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dictionary import (Coefficients, DictionarySpec, RegressionSystem, build_system,
                         dictionary_for, evaluate_rhs, render_pde, restrict_rows)
from .grid import Field, Snapshot
from .smoothing import SddDerivatives, SmootherSpec, sdd
from .sparse import least_squares, subspace_pursuit


class NoStableCandidate(RuntimeError):
    """Every ST candidate blew up; ``table`` holds the scores that were computed."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


class RankDeficientWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StConfig:
    w: int | None = None
    fine_substeps: int = 5
    blowup_factor: float = 1e3
    blowup_threshold: float | None = None

    def span(self, d: int) -> int:
        if self.w is not None:
            return self.w
        return 20 if d == 1 else 10

    def to_dict(self) -> dict:
        return {"w": self.w, "fine_substeps": self.fine_substeps,
                "blowup_factor": self.blowup_factor, "blowup_threshold": self.blowup_threshold}


@dataclass(frozen=True)
class ScConfig:
    alpha: float = 1 / 200

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha}


@dataclass
class IdentificationReport:
    method: str
    coefficients: Coefficients
    table: list
    config: dict
    iterations: list = field(default_factory=list)
    timing_ms: float = 0.0
    provenance: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def support(self) -> tuple[int, ...]:
        return self.coefficients.support()

    @property
    def pde(self) -> str:
        return render_pde(self.coefficients)

    def to_dict(self) -> dict:
        dic = self.coefficients.dictionary
        return {
            "method": self.method,
            "dimension": dic.d,
            "dictionary": dic.names,
            "support": list(self.support),
            "support_names": self.coefficients.support_names(),
            "coefficients": [float(v) for v in self.coefficients.values],
            "pde": self.pde,
            "config": self.config,
            "scores": self.table,
            "iterations": self.iterations,
            "timing_ms": self.timing_ms,
            "provenance": self.provenance,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_dict(cls, doc: dict) -> "IdentificationReport":
        dic = dictionary_for(int(doc["dimension"]))
        if list(doc["dictionary"]) != dic.names:
            raise ValueError("report dictionary does not match the standard dictionary")
        return cls(method=doc["method"], coefficients=Coefficients(dic, doc["coefficients"]),
                   table=doc.get("scores", []), config=doc.get("config", {}),
                   iterations=doc.get("iterations", []), timing_ms=doc.get("timing_ms", 0.0),
                   provenance=doc.get("provenance", {}), flags=doc.get("flags", []))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _score(v: float):
    # JSON has no infinity; blown-up candidates are recorded as null
    return None if not math.isfinite(v) else float(v)


# --- time evolution -------------------------------------------------------

def _boundary_mask(spatial_shape) -> np.ndarray:
    mask = np.zeros(spatial_shape, dtype=bool)
    for axis in range(len(spatial_shape)):
        idx = [slice(None)] * len(spatial_shape)
        idx[axis] = 0
        mask[tuple(idx)] = True
        idx[axis] = -1
        mask[tuple(idx)] = True
    return mask


def _threshold(cfg: StConfig, reference: np.ndarray) -> float:
    if cfg.blowup_threshold is not None:
        return cfg.blowup_threshold
    return cfg.blowup_factor * max(float(np.max(np.abs(reference))), 1e-300)


def evolve_batch(c: Coefficients, states: np.ndarray, starts: np.ndarray, w: int,
                 cfg: StConfig, boundary_source: np.ndarray, threshold: float):
    """Evolve several start snapshots at once; ``None`` signals blow-up.

    ``states`` has shape ``(shots,) + spatial``; ``starts`` the coarse time
    index of each shot.  Boundary nodes follow ``boundary_source`` at the
    nearest coarse time.
    """
    dx, dt = boundary_source.grid.dx, boundary_source.grid.dt
    u = np.array(states, dtype=np.float64)
    if not c.support():
        return u
    mask = _boundary_mask(u.shape[1:])
    fs = cfg.fine_substeps
    dt_fine = dt / fs
    starts = np.asarray(starts)
    for s in range(1, w * fs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u = u + dt_fine * evaluate_rhs(c, u, dx)
        nearest = starts + int(math.floor(s / fs + 0.5))
        u[:, mask] = boundary_source.values[nearest][:, mask]
        m = float(np.max(np.abs(u)))
        if not math.isfinite(m) or m > threshold:
            return None
    return u


def evolve_candidate(c: Coefficients, start: Snapshot, w: int, cfg: StConfig,
                     boundary_source: Field) -> Snapshot | None:
    """Forward Euler with step ``dt/fine_substeps`` for ``w`` coarse steps.

    Returns the snapshot at ``start.time_index + w``, or ``None`` if the
    solution exceeds the blow-up threshold or becomes non-finite.
    """
    n0 = start.time_index
    if n0 + w > boundary_source.grid.N:
        raise ValueError("evolution span runs past the last snapshot")
    thr = _threshold(cfg, boundary_source.values)
    out = evolve_batch(c, start.values[None], np.array([n0]), w, cfg, boundary_source, thr)
    if out is None:
        return None
    return Snapshot(boundary_source.grid, n0 + w, out[0])


def mtee(c: Coefficients, denoised: Field, cfg: StConfig) -> float:
    """Mean over shots ``n = 0..N-1-w`` of ``||U_hat^{(n+w)|n} - U^{n+w}||_2``."""
    g = denoised.grid
    w = cfg.span(g.d)
    if not 1 <= w < g.N:
        raise ValueError(f"evolution span w={w} must satisfy 1 <= w < N={g.N}")
    starts = np.arange(g.N - w)
    thr = _threshold(cfg, denoised.values)
    out = evolve_batch(c, denoised.values[starts], starts, w, cfg, denoised, thr)
    if out is None:
        return math.inf
    diff = (out - denoised.values[starts + w]).reshape(starts.size, -1)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def _support_names(dic: DictionarySpec, support) -> list[str]:
    names = dic.names
    return [names[j] for j in support]


def st(system: RegressionSystem, denoised: Field, cfg: StConfig = StConfig()
       ) -> IdentificationReport:
    """Subspace pursuit with time-evolution model selection."""
    t0 = time.perf_counter()
    dic = system.dictionary
    K = dic.K
    pool = tuple(range(K))
    cache: dict[tuple[int, ...], tuple[np.ndarray, float]] = {}
    iterations = []
    table = []
    while True:
        F_pool = system.F[:, list(pool)]
        rows = []
        for k in range(1, len(pool) + 1):
            res = subspace_pursuit(k, F_pool, system.b)
            support = tuple(sorted(pool[j] for j in res.support))
            if support not in cache:
                c = np.zeros(K)
                c[list(pool)] = res.coefficients
                cache[support] = (c, mtee(Coefficients(dic, c), denoised, cfg))
            c, score = cache[support]
            rows.append({"k": k, "support": list(support),
                         "support_names": _support_names(dic, support),
                         "coefficients": [float(c[j]) for j in support],
                         "mtee": _score(score)})
        scores = [cache[tuple(r["support"])][1] for r in rows]
        iterations.append({"pool": list(pool), "candidates": rows})
        table = rows
        if all(math.isinf(s) for s in scores):
            raise NoStableCandidate("no stable candidate: every ST candidate blew up", iterations)
        best = int(np.argmin(scores))
        new_pool = tuple(rows[best]["support"])
        iterations[-1]["selected_k"] = best + 1
        if new_pool == pool:
            break
        pool = new_pool
    final = Coefficients(dic, cache[pool][0])
    return IdentificationReport(
        method="ST", coefficients=final, table=table,
        config={"st": cfg.to_dict(), "w": cfg.span(dic.d)}, iterations=iterations,
        timing_ms=1e3 * (time.perf_counter() - t0))


# --- cross validation -----------------------------------------------------

def cee(support, system: RegressionSystem, train_rows, val_rows) -> float:
    """Validation residual ``||b_val - F_val c||_2`` of a fit on the training rows."""
    support = list(support)
    if not support:
        raise ValueError("support must be nonempty")
    train = restrict_rows(system, train_rows)
    val = restrict_rows(system, val_rows)
    coef, rank = least_squares(train.F[:, support], train.b, return_rank=True)
    if rank < len(support):
        warnings.warn(f"training block for support {support} is rank deficient "
                      f"(rank {rank}); using the minimum-norm fit", RankDeficientWarning,
                      stacklevel=2)
    return float(np.linalg.norm(val.b - val.F[:, support] @ coef))


def split_rows(n_rows: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """First ``floor(alpha * n_rows)`` rows, and the rest."""
    n1 = int(math.floor(alpha * n_rows + 1e-9))
    if n1 < 1 or n1 >= n_rows:
        raise ValueError(f"alpha={alpha} gives an empty split of {n_rows} rows")
    rows = np.arange(n_rows)
    return rows[:n1], rows[n1:]


def averaged_cee(support, system: RegressionSystem, alpha: float) -> float:
    t1, t2 = split_rows(system.n_rows, alpha)
    return 0.5 * (cee(support, system, t1, t2) + cee(support, system, t2, t1))


def sc(system: RegressionSystem, cfg: ScConfig = ScConfig()) -> IdentificationReport:
    """Subspace pursuit with averaged two-fold cross validation."""
    t0 = time.perf_counter()
    dic = system.dictionary
    t1, _ = split_rows(system.n_rows, cfg.alpha)
    cache: dict[tuple[int, ...], float] = {}
    table = []
    for k in range(1, dic.K + 1):
        support = subspace_pursuit(k, system.F, system.b).support
        if support not in cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                cache[support] = averaged_cee(support, system, cfg.alpha)
        table.append({"k": k, "support": list(support),
                      "support_names": _support_names(dic, support), "cee": cache[support]})
    best = int(np.argmin([r["cee"] for r in table]))
    support = table[best]["support"]
    c = np.zeros(dic.K)
    c[support] = least_squares(system.F[t1][:, support], system.b[t1])
    return IdentificationReport(
        method="SC", coefficients=Coefficients(dic, c), table=table,
        config={"sc": cfg.to_dict(), "k_min": best + 1, "train_rows": int(t1.size)},
        timing_ms=1e3 * (time.perf_counter() - t0))


# --- pipeline helpers -----------------------------------------------------

def prepare(data: Field, smoother: SmootherSpec = SmootherSpec(),
            dictionary: DictionarySpec | None = None, margin: int = 0,
            ) -> tuple[SddDerivatives, RegressionSystem]:
    """SDD plus system assembly for the standard dictionary of ``data``'s dimension."""
    dic = dictionary or dictionary_for(data.grid.d)
    derivs = sdd(data, smoother, dic.required_bases() | {(0,) * data.grid.d})
    return derivs, build_system(derivs, dic, margin=margin)


def empirical_theorem1_check(systems: dict, supports: dict, alpha: float,
                             normalize: bool = False) -> dict:
    """Averaged CEE of each named support at each named resolution.

    ``systems`` maps a resolution label to a regression system (ordered
    coarse to fine); ``supports`` maps a label to a list of feature names.
    Reports each CEE and the coarse/fine ratio; nothing is asserted.  With
    ``normalize`` the CEE is scaled by ``sqrt(dx^d dt)`` so that values at
    different resolutions are comparable.
    """
    labels = list(systems)
    out = {"resolutions": labels, "alpha": alpha, "normalized": normalize, "supports": {}}
    for name, feats in supports.items():
        vals = {}
        for lab in labels:
            sys_ = systems[lab]
            idx = [sys_.dictionary.index(f) for f in feats]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                vals[lab] = averaged_cee(idx, sys_, alpha)
            if normalize:
                vals[lab] *= math.sqrt(sys_.grid.cell_volume)
        first, last = vals[labels[0]], vals[labels[-1]]
        out["supports"][name] = {"features": list(feats), "cee": vals,
                                 "reduction": first / last if last > 0 else math.inf}
    return out
