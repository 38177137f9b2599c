"""Grid-based sparse Bayesian learning for source-power spectra.

Per-grid-point source variances gamma are fit by maximum likelihood: the
cost ``log det(C) + tr(C^{-1} R)`` with ``C = Phi diag(gamma) Phi^H +
lam I`` is minimized by EM iterations that alternate posterior source
statistics with the variance update ``gamma_i = ||xhat_i||^2 / L + tau_i``.
The cost touches the data only through the sample covariance, so snapshot
blocks can be compressed to rank-many columns without changing trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import numerics as nx
from .geometry import ArrayGeometry
from .sigmodel import SnapshotMatrix, scm, steering_matrix


class SblError(Exception):
    pass


@dataclass(frozen=True)
class SblState:
    """Grid, hyperparameters, and the cached dictionary."""

    grid: np.ndarray
    gamma: np.ndarray
    lam: float
    dictionary: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        if grid.size != gamma.size:
            raise SblError("grid and gamma must have matching length")
        if np.any(gamma < 0):
            raise SblError("gamma must be nonnegative")
        if self.lam <= 0:
            raise SblError("lam must be positive")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def initialize(cls, g: ArrayGeometry, grid: np.ndarray, lam: float) -> "SblState":
        grid = np.asarray(grid, dtype=np.float64)
        return cls(
            grid=grid,
            gamma=np.ones(grid.size),
            lam=float(lam),
            dictionary=steering_matrix(grid, g),
        )

    def with_gamma(self, gamma: np.ndarray) -> "SblState":
        return replace(self, gamma=np.asarray(gamma, dtype=np.float64))

    def model_covariance(self) -> np.ndarray:
        phi = self.dictionary
        return (phi * self.gamma) @ phi.conj().T + self.lam * np.eye(phi.shape[0])


@dataclass(frozen=True)
class PosteriorStats:
    """Posterior source means (G x L) and per-point posterior variances."""

    means: np.ndarray
    variances: np.ndarray


def sbl_cost(state: SblState, r: np.ndarray) -> float:
    """log det(C) + tr(C^{-1} R) for the state's model covariance C."""
    c = state.model_covariance()
    low = nx.chol_factor(c)
    return nx.logdet_from_factor(low) + float(
        np.trace(nx.chol_solve_factored(low, np.asarray(r, dtype=np.complex128))).real
    )


def sbl_em_step(state: SblState, y: SnapshotMatrix) -> tuple[PosteriorStats, np.ndarray]:
    """One EM iteration: posterior statistics and the updated gamma.

    ``means = Gamma Phi^H C^{-1} Y`` and ``tau = diag(Gamma - Gamma Phi^H
    C^{-1} Phi Gamma)``; the update divides the squared row norms by the
    physical snapshot count, so compressed snapshot blocks give identical
    updates.  Zero entries of gamma are absorbing.
    """
    phi = state.dictionary
    gamma = state.gamma
    low = nx.chol_factor(state.model_covariance())
    ci_y = nx.chol_solve_factored(low, y.data)
    means = gamma[:, None] * (phi.conj().T @ ci_y)
    ci_phi = nx.chol_solve_factored(low, phi)
    s_diag = np.real(np.einsum("mg,mg->g", phi.conj(), ci_phi))
    tau = gamma - gamma**2 * s_diag
    tau = np.maximum(tau, 0.0)
    gamma_new = (np.abs(means) ** 2).sum(axis=1) / y.n_snapshots + tau
    return PosteriorStats(means=means, variances=tau), np.maximum(gamma_new, 0.0)


def _em_update_from_scm(state: SblState, r: np.ndarray) -> np.ndarray:
    """gamma update written against the SCM; algebraically equals sbl_em_step."""
    phi = state.dictionary
    gamma = state.gamma
    low = nx.chol_factor(state.model_covariance())
    ci_phi = nx.chol_solve_factored(low, phi)
    s_diag = np.real(np.einsum("mg,mg->g", phi.conj(), ci_phi))
    q_diag = np.real(np.einsum("mg,mg->g", ci_phi.conj(), np.asarray(r) @ ci_phi))
    return np.maximum(gamma**2 * q_diag + gamma - gamma**2 * s_diag, 0.0)


def sbl_run(
    g: ArrayGeometry,
    grid: np.ndarray,
    y: SnapshotMatrix,
    lam: float,
    max_iters: int = 1000,
    tol: float = 1e-6,
    gamma0: np.ndarray | None = None,
    cost_trace: list[float] | None = None,
) -> SblState:
    """Run EM-SBL to convergence or the iteration cap.

    Convergence is a relative gamma change below ``tol``.  The cost is
    non-increasing along the trajectory (EM guarantee); pass ``cost_trace``
    to record it per iteration.
    """
    if max_iters < 1:
        raise SblError("max_iters must be at least 1")
    state = SblState.initialize(g, grid, lam)
    if gamma0 is not None:
        state = state.with_gamma(gamma0)
    r = scm(y)
    if cost_trace is not None:
        cost_trace.append(sbl_cost(state, r))
    for _ in range(max_iters):
        gamma_new = _em_update_from_scm(state, r)
        change = np.max(np.abs(gamma_new - state.gamma) / np.maximum(state.gamma, 1e-12))
        state = state.with_gamma(gamma_new)
        if cost_trace is not None:
            cost_trace.append(sbl_cost(state, r))
        if change < tol:
            break
    return state


def top_peaks(grid: np.ndarray, gamma: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest local maxima of gamma over the grid.

    Boundary points count as peaks against their single neighbor.  When
    fewer than k local maxima exist, the largest remaining values fill in.
    Ties break toward the lower index.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    n = gamma.size
    is_peak = np.ones(n, dtype=bool)
    if n > 1:
        is_peak[1:] &= gamma[1:] > gamma[:-1]
        is_peak[:-1] &= gamma[:-1] >= gamma[1:]
    order = np.lexsort((np.arange(n), -gamma))
    peaks = [i for i in order if is_peak[i]][:k]
    if len(peaks) < k:
        peaks.extend([i for i in order if i not in set(peaks)][: k - len(peaks)])
    return peaks
