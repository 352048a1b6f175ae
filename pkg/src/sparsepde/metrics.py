"""Identification errors and the error-decomposition diagnostics.

``e_c`` is the relative l1 coefficient error and ``e_r`` the grid-dependent
size of ``F(c_hat - c)``.  :func:`error_decomposition` splits the mismatch
between a candidate's evolution and the data into named pieces, each
measured with the grid-dependent norm ``sqrt(dx^d dt) * ||.||_2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dictionary import Coefficients, RegressionSystem, evaluate_features
from .grid import Field, grid_norm
from .identify import StConfig, _threshold, evolve_batch

TERMS = ("data_fidelity", "measurement", "response", "regression", "coefficient", "system")


@dataclass
class ErrorReport:
    e_c: float
    e_r: float
    support_exact: bool
    decomposition: dict | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"e_c": self.e_c, "e_r": self.e_r, "support_exact": self.support_exact}
        if self.decomposition is not None:
            out["decomposition"] = {k: (None if not math.isfinite(v) else v)
                                    for k, v in self.decomposition.items()}
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def _check_same_dictionary(a: Coefficients, b: Coefficients) -> None:
    if a.dictionary.names != b.dictionary.names:
        raise ValueError("coefficient vectors index different dictionaries")


def coefficient_error(c_hat: Coefficients, c_true: Coefficients) -> float:
    """``||c_hat - c||_1 / ||c||_1``."""
    _check_same_dictionary(c_hat, c_true)
    denom = float(np.sum(np.abs(c_true.values)))
    if denom == 0:
        raise ValueError("true coefficient vector is zero")
    return float(np.sum(np.abs(c_hat.values - c_true.values))) / denom


def residual_error(c_hat: Coefficients, c_true: Coefficients, system: RegressionSystem) -> float:
    """``sqrt(dx^d dt) * ||F (c_hat - c)||_2`` with the SDD feature matrix."""
    _check_same_dictionary(c_hat, c_true)
    return grid_norm(system.F @ (c_hat.values - c_true.values), system.grid)


def support_exact(c_hat: Coefficients, c_true: Coefficients) -> bool:
    return c_hat.support() == c_true.support()


def evaluate(c_hat: Coefficients, c_true: Coefficients, system: RegressionSystem) -> ErrorReport:
    return ErrorReport(coefficient_error(c_hat, c_true), residual_error(c_hat, c_true, system),
                       support_exact(c_hat, c_true))


def evolve_trajectory(c: Coefficients, denoised: Field, cfg: StConfig = StConfig(),
                      ) -> np.ndarray | None:
    """Single-shot evolution of ``c`` from snapshot 0 over the whole horizon.

    Uses the same stepping and boundary rule as MTEE; ``None`` on blow-up.
    """
    g = denoised.grid
    thr = _threshold(cfg, denoised.values)
    out = np.empty(g.shape)
    out[0] = denoised.values[0]
    state = denoised.values[:1]
    for n in range(g.N):
        state = evolve_batch(c, state, np.array([n]), 1, cfg, denoised, thr)
        if state is None:
            return None
        out[n + 1] = state[0]
    return out


def exact_system(bases: dict, system: RegressionSystem) -> np.ndarray:
    """``F_0``: the dictionary evaluated on exact base fields, rows as in ``system``.

    ``bases`` maps multi-indices to arrays of shape ``grid.shape``.
    """
    g = system.grid
    trimmed = {k: np.asarray(v)[: g.N] for k, v in bases.items()}
    cols = evaluate_features(system.dictionary, trimmed)
    F0 = np.stack([np.broadcast_to(c, trimmed[next(iter(trimmed))].shape).reshape(-1)
                   for c in cols], axis=1)
    return F0[system.rows]


def decomposition_vectors(c_hat: Coefficients, c_true: Coefficients, raw: Field,
                          denoised: Field, system: RegressionSystem, clean: Field | None = None,
                          F0: np.ndarray | None = None, cfg: StConfig = StConfig()) -> dict:
    """The decomposition terms as vectors (``None`` where inputs are missing).

    ``response + regression + coefficient + system`` equals
    ``D_t U_hat - F_0 c_0`` on the system's rows.
    """
    _check_same_dictionary(c_hat, c_true)
    g = denoised.grid
    out = dict.fromkeys(TERMS)
    traj = evolve_trajectory(c_hat, denoised, cfg)
    if traj is not None:
        out["data_fidelity"] = (traj - denoised.values).reshape(-1)
        dt_hat = (np.diff(traj, axis=0) / g.dt).reshape(-1)[system.rows]
        out["response"] = dt_hat - system.b
    if clean is not None:
        if clean.grid != raw.grid:
            raise ValueError("clean and raw fields live on different grids")
        out["measurement"] = (raw.values - clean.values).reshape(-1)
    out["regression"] = system.b - system.F @ c_hat.values
    out["coefficient"] = system.F @ (c_hat.values - c_true.values)
    if F0 is not None:
        out["system"] = (system.F - F0) @ c_true.values
    return out


def error_decomposition(c_hat: Coefficients, c_true: Coefficients, raw: Field, denoised: Field,
                        system: RegressionSystem, clean: Field | None = None,
                        F0: np.ndarray | None = None, cfg: StConfig = StConfig(),
                        ) -> tuple[dict, list]:
    """Grid-dependent norms of the decomposition terms, plus flags.

    Terms whose inputs are missing are omitted; a blown-up evolution reports
    ``data_fidelity`` and ``response`` as infinity.
    """
    vecs = decomposition_vectors(c_hat, c_true, raw, denoised, system, clean, F0, cfg)
    flags = []
    terms = {}
    for name, v in vecs.items():
        if v is None:
            if name in ("data_fidelity", "response"):
                terms[name] = math.inf
                if "evolution blew up" not in flags:
                    flags.append("evolution blew up")
            continue
        terms[name] = grid_norm(v, system.grid)
    return terms, flags
