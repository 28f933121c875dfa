"""Self-representation graph construction.

Solves

    min_Z  1/2 ||X - X Z||_F^2 + lam/2 ||Z||_F^2
    s.t.   diag(Z) = 0,  Z >= 0

by projected gradient descent. Step lengths start from the Barzilai-Borwein
(spectral) estimate and are accepted by a non-monotone backtracking test, so
the objective may rise between iterations but never above the recent maximum.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, as_data_matrix, validate_similarity

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The iteration produced a non-finite objective."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`solve`.

    ``lam=None`` selects ``lam_scale * max|X^T X|`` and ``epsilon_tol=None``
    selects ``1e-6 * N``; both are resolved against the data at solve time.
    The iteration stops once ``||Z_new - Z|| / min(alpha, 1) <= epsilon_tol``,
    i.e. once a unit-length projected step would be that small.
    """

    lam: float | None = None
    lam_scale: float = 0.1
    epsilon_tol: float | None = None
    max_iters: int = 2000
    step_min: float = 1e-10
    step_max: float = 1e10
    linesearch_shrink: float = 0.5
    linesearch_memory: int = 10
    sufficient_decrease: float = 1e-4
    normalize_columns: bool = True

    def __post_init__(self):
        if self.lam is not None and not self.lam >= 0:
            raise ValidationError("lam must be >= 0")
        if not self.lam_scale >= 0:
            raise ValidationError("lam_scale must be >= 0")
        if self.epsilon_tol is not None and not self.epsilon_tol > 0:
            raise ValidationError("epsilon_tol must be > 0")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be positive")
        if not (0 < self.step_min <= self.step_max < np.inf):
            raise ValidationError("need 0 < step_min <= step_max < inf")
        if not (0 < self.linesearch_shrink < 1):
            raise ValidationError("linesearch_shrink must lie in (0, 1)")
        if self.linesearch_memory < 1:
            raise ValidationError("linesearch_memory must be positive")


@dataclass
class SolverState:
    Z: np.ndarray
    gradient: np.ndarray
    rho: float
    alpha: float
    iter: int
    objective_value: float
    residual: np.ndarray
    converged: bool = False
    lam: float = 0.0
    history: list[float] = field(default_factory=list)
    # reference value (recent max + sufficient-decrease slack) each accepted step was tested against
    acceptance_bounds: list[float] = field(default_factory=list)

    @property
    def stationarity(self) -> float:
        """Projected-gradient residual ``||P(Z - grad) - Z||_F``."""
        return float(np.linalg.norm(project_feasible(self.Z - self.gradient) - self.Z))


def _check_pair(X, Z) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.ndim != 2 or Z.ndim != 2 or Z.shape != (X.shape[1], X.shape[1]):
        raise ValidationError(f"Z must be N x N for X of shape {X.shape}, got {Z.shape}")
    return X, Z


def objective(X, Z, lam: float) -> float:
    """``1/2 ||X - XZ||_F^2 + lam/2 ||Z||_F^2``."""
    X, Z = _check_pair(X, Z)
    if lam < 0:
        raise ValidationError("lam must be >= 0")
    R = X - X @ Z
    val = 0.5 * float(np.vdot(R, R)) + 0.5 * lam * float(np.vdot(Z, Z))
    if not np.isfinite(val):
        raise ValidationError("objective is not finite")
    return val


def gradient(X, Z, lam: float) -> np.ndarray:
    """``X^T (XZ - X) + lam Z``."""
    X, Z = _check_pair(X, Z)
    return X.T @ (X @ Z - X) + lam * Z


def project_feasible(Z) -> np.ndarray:
    """Euclidean projection onto ``{Z : diag(Z) = 0, Z >= 0}``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValidationError(f"Z must be square, got {Z.shape}")
    P = np.maximum(Z, 0.0)
    np.fill_diagonal(P, 0.0)
    return P


def spectral_step(dZ, dG, step_min: float = 1e-10, step_max: float = 1e10) -> float:
    """Barzilai-Borwein step ``<dZ, dZ> / <dZ, dG>`` clamped to the bounds.

    Falls back to ``step_max`` when the curvature estimate is not positive.
    """
    dZ = np.asarray(dZ, dtype=float)
    dG = np.asarray(dG, dtype=float)
    if dZ.shape != dG.shape:
        raise ValidationError(f"shape mismatch {dZ.shape} vs {dG.shape}")
    ss = float(np.vdot(dZ, dZ))
    sy = float(np.vdot(dZ, dG))
    if not np.isfinite(sy) or not np.isfinite(ss) or sy <= 0:
        return step_max
    return float(np.clip(ss / sy, step_min, step_max))


def normalize_columns(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    return X / norms


def default_lambda(X, scale: float = 0.1) -> float:
    X = np.asarray(X, dtype=float)
    return scale * float(np.max(np.abs(X.T @ X)))


def solve(X, cfg: SolverConfig | None = None, Z0=None) -> SolverState:
    """Projected spectral gradient descent for the self-representation problem.

    Parameters
    ----------
    X : array (D, N)
        Data matrix, columns are points.
    cfg : SolverConfig
    Z0 : array (N, N), optional
        Starting point, projected onto the feasible set. Defaults to zero.

    Returns
    -------
    SolverState
        ``converged`` is False when ``max_iters`` was reached first.
    """
    cfg = cfg or SolverConfig()
    X = as_data_matrix(X)
    if cfg.normalize_columns:
        X = normalize_columns(X)
    N = X.shape[1]
    lam = default_lambda(X, cfg.lam_scale) if cfg.lam is None else float(cfg.lam)
    eps = 1e-6 * N if cfg.epsilon_tol is None else float(cfg.epsilon_tol)

    G = X.T @ X
    Z = project_feasible(np.zeros((N, N)) if Z0 is None else Z0)

    # with G = X^T X: f = 1/2 tr(Z^T G Z) - tr(G Z) + 1/2 tr(G) + lam/2 |Z|^2
    half_trace = 0.5 * float(np.trace(G))

    def f_and_grad(Z):
        GZ = G @ Z
        f = 0.5 * float(np.vdot(Z, GZ)) - float(np.vdot(G, Z)) + half_trace
        f += 0.5 * lam * float(np.vdot(Z, Z))
        return max(f, 0.0), GZ - G + lam * Z

    f, g = f_and_grad(Z)
    if not np.isfinite(f):
        raise SolverError("non-finite objective", 0)
    recent = deque([f], maxlen=cfg.linesearch_memory)
    history = [f]
    bounds: list[float] = []
    rho = float(np.clip(1.0 / max(np.abs(g).max(), 1e-300), cfg.step_min, cfg.step_max))
    alpha = rho
    converged = False
    it = 0
    while it < cfg.max_iters:
        it += 1
        f_ref = max(recent)
        alpha = rho
        while True:
            Z_new = project_feasible(Z - alpha * g)
            step = Z_new - Z
            f_new, g_new = f_and_grad(Z_new)
            if not np.isfinite(f_new):
                raise SolverError("non-finite objective", it)
            bound = f_ref + cfg.sufficient_decrease * float(np.vdot(g, step))
            if f_new <= bound or alpha <= cfg.step_min:
                break
            alpha *= cfg.linesearch_shrink
        bounds.append(bound)
        step_norm = float(np.linalg.norm(step)) / min(alpha, 1.0)
        rho = spectral_step(step, g_new - g, cfg.step_min, cfg.step_max)
        Z, g, f = Z_new, g_new, f_new
        recent.append(f)
        history.append(f)
        if step_norm <= eps:
            converged = True
            break

    if not converged:
        log.warning("self-representation solver hit max_iters=%d without converging", cfg.max_iters)
    return SolverState(
        Z=Z,
        gradient=g,
        rho=rho,
        alpha=alpha,
        iter=it,
        objective_value=f,
        residual=X - X @ Z,
        converged=converged,
        lam=lam,
        history=history,
        acceptance_bounds=bounds,
    )


def similarity_from_representation(Z) -> np.ndarray:
    """Similarity graph ``(|Z| + |Z^T|) / 2`` with zero diagonal."""
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise ValidationError("representation contains non-finite entries")
    return validate_similarity(np.abs(Z))
