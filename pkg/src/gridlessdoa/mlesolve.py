"""Maximum-likelihood structured covariance recovery.

The estimator fits ``T(v) + lambda I`` to a sample covariance in the ML
sense: minimize ``log det(T(v) + lambda I) + tr((T(v) + lambda I)^{-1} R)``
subject to ``Toep(v) >= 0``.  The log-det term is concave, so the outer loop
majorizes it by its tangent plane at the current iterate and solves the
remaining convex subproblem

    minimize  Re tr(W Map(v)) + tr((Map(v) + D)^{-1} R_fit)
    s.t.      Toep(v) >= 0

exactly (the Schur-complement slack variable of the SDP form is eliminated
analytically, leaving a smooth convex program).  The subproblem is solved by
a log-barrier interior method with damped Newton steps; problem dimension is
2*aperture - 1 real variables.

The EM variant treats sensors absent from a hole-free completion of the
array as latent measurements: each major iteration conditions their second
moments on the observed data (E-step) and then runs the same majorized
subproblem on the completed covariance, which interpolates the correlation
lags the physical array never observes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import numerics as nx
from .geometry import (
    ArrayGeometry,
    adjoint_structured,
    coarray,
    nested_completion,
    structured_matrix,
    toeplitz_embed,
)
from .sigmodel import SnapshotMatrix, scm


class SolverError(Exception):
    pass


class LineSearchError(SolverError):
    """Backtracking could not find an acceptable feasible step."""


@dataclass
class MleConfig:
    """Knobs for the MM outer loop and the barrier subproblem solver.

    ``lam`` is the noise variance fed to the model (assumed known).  The EM
    variant additionally uses ``lam_m`` for the latent sensors; when unset it
    defaults to ``1e3 * lam``.  The outer loop runs a fixed ``outer_iters``
    iterations with no early stop.
    """

    lam: float = 1.0
    lam_m: float | None = None
    outer_iters: int = 20
    inner_iters: int = 1
    barrier_start: float = 1e-2
    barrier_stop: float = 1e-9
    barrier_factor: float = 0.1
    newton_tol: float = 1e-9
    max_newton: int = 80
    max_backtracks: int = 60
    estimate_lambda: bool = False
    callback: Callable[[int, np.ndarray, float], None] | None = None

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise SolverError("lam must be positive")
        if self.lam_m is not None and self.lam_m <= 0:
            raise SolverError("lam_m must be positive")
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise SolverError("iteration counts must be at least 1")

    @property
    def lam_missing(self) -> float:
        return self.lam_m if self.lam_m is not None else 1e3 * self.lam


@dataclass(frozen=True)
class CompletionPlan:
    """Partition of a hole-free completion into observed and latent sensors."""

    complete_geometry: ArrayGeometry
    observed_idx: tuple[int, ...]
    missing_idx: tuple[int, ...]

    def __post_init__(self) -> None:
        n = self.complete_geometry.m
        if sorted(self.observed_idx + self.missing_idx) != list(range(n)):
            raise SolverError("observed and missing index sets must partition the completion")

    @classmethod
    def from_geometry(cls, g: ArrayGeometry) -> "CompletionPlan":
        """Complete ``g`` with the minimal nested-array cover of its aperture."""
        missing_positions = nested_completion(g)
        complete = ArrayGeometry(tuple(sorted(set(g.grid_positions()) | set(missing_positions))))
        pos = complete.grid_positions()
        observed = tuple(i for i, p in enumerate(pos) if p in set(g.grid_positions()))
        missing = tuple(i for i, p in enumerate(pos) if p in set(missing_positions))
        return cls(complete_geometry=complete, observed_idx=observed, missing_idx=missing)

    @property
    def n_missing(self) -> int:
        return len(self.missing_idx)


@dataclass(frozen=True)
class SubproblemWeights:
    """Data of one convex subproblem instance.

    ``weight`` multiplies the structured matrix linearly, ``noise_diag`` is
    the positive diagonal added inside the trace-inverse term, and
    ``data_matrix`` is the (PSD) matrix it is fit against.  ``geometry``
    fixes the structured map realizing the lag vector.
    """

    weight: np.ndarray
    noise_diag: np.ndarray
    data_matrix: np.ndarray
    geometry: ArrayGeometry


# -- real parameterization -------------------------------------------------
#
# A lag vector v (v[0] real) is handled as the real vector
# x = [v0, Re v1, Im v1, ..., Re v_{A-1}, Im v_{A-1}] of length 2A - 1.


def pack_lags(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).ravel()
    x = np.empty(2 * v.size - 1)
    x[0] = v[0].real
    x[1::2] = v[1:].real
    x[2::2] = v[1:].imag
    return x


def unpack_lags(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    ap = (x.size + 1) // 2
    v = np.empty(ap, dtype=np.complex128)
    v[0] = x[0]
    v[1:] = x[1::2] + 1j * x[2::2]
    return v


@dataclass(frozen=True)
class _MapCache:
    """Precomputed assembly/adjoint data for one structured map."""

    aperture: int
    nparams: int
    lag_idx: np.ndarray       # |p_i - p_j| per entry
    conj_mask: np.ndarray     # True strictly below the diagonal
    basis: np.ndarray         # (nparams, n, n) images of the real unit vectors
    pair_rows: tuple[np.ndarray, ...]
    pair_cols: tuple[np.ndarray, ...]


@lru_cache(maxsize=None)
def _map_cache(positions: tuple[int, ...]) -> _MapCache:
    g = ArrayGeometry(tuple(float(p) for p in positions))
    ap = coarray(g).aperture
    p = np.asarray(positions)
    lag_idx = np.abs(p[:, None] - p[None, :])
    conj_mask = p[:, None] > p[None, :]
    nparams = 2 * ap - 1
    basis = np.empty((nparams, len(positions), len(positions)), dtype=np.complex128)
    for a in range(nparams):
        x = np.zeros(nparams)
        x[a] = 1.0
        basis[a] = structured_matrix(unpack_lags(x), g)
    # Upper-triangle representatives per positive lag (lag 0 is the trace).
    rows: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
    cols: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
    for m in range(1, ap):
        ii, jj = np.nonzero((lag_idx == m) & ~conj_mask)
        rows.append(ii)
        cols.append(jj)
    return _MapCache(
        aperture=ap,
        nparams=nparams,
        lag_idx=lag_idx,
        conj_mask=conj_mask,
        basis=basis,
        pair_rows=tuple(rows),
        pair_cols=tuple(cols),
    )


def _assemble(cache: _MapCache, v: np.ndarray) -> np.ndarray:
    out = v[cache.lag_idx]
    out[cache.conj_mask] = np.conj(out[cache.conj_mask])
    return out


def _adjoint_packed(cache: _MapCache, a: np.ndarray) -> np.ndarray:
    """pack(adjoint(A)) for Hermitian A: the gradient of x -> Re tr(A Map(x))."""
    out = np.empty(cache.nparams)
    out[0] = np.trace(a).real
    for m in range(1, cache.aperture):
        ii = cache.pair_rows[m]
        s = 2.0 * a[ii, cache.pair_cols[m]].sum() if ii.size else 0.0
        out[2 * m - 1] = np.real(s)
        out[2 * m] = np.imag(s)
    return out


@lru_cache(maxsize=None)
def _ula_positions(n: int) -> tuple[int, ...]:
    return tuple(range(n))


# -- costs and gradients -----------------------------------------------------


def _model_matrix(v: np.ndarray, lam: float, g: ArrayGeometry) -> np.ndarray:
    return structured_matrix(v, g) + lam * np.eye(g.m)


def _check_toeplitz_feasible(v: np.ndarray) -> None:
    v = np.asarray(v, dtype=np.complex128)
    shift = max(1e-10, 1e-10 * abs(v[0].real)) * 2.0
    try:
        nx.chol_factor(toeplitz_embed(v) + shift * np.eye(v.size))
    except nx.NotPositiveDefiniteError:
        raise SolverError("lag vector violates the Toeplitz PSD constraint") from None


def ml_cost(v: np.ndarray, lam: float, r: np.ndarray, g: ArrayGeometry) -> float:
    """log det(T(v) + lam I) + tr((T(v) + lam I)^{-1} R)."""
    _check_toeplitz_feasible(v)
    sigma = _model_matrix(v, lam, g)
    low = nx.chol_factor(sigma)
    return nx.logdet_from_factor(low) + float(
        np.trace(nx.chol_solve_factored(low, np.asarray(r, dtype=np.complex128))).real
    )


def ml_gradient(v: np.ndarray, lam: float, r: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """Gradient of ``ml_cost`` in the real lag parameterization (length 2A-1)."""
    sigma = _model_matrix(v, lam, g)
    p = nx.inv_pd(sigma)
    grad_matrix = nx.hermitian_part(p - p @ np.asarray(r, dtype=np.complex128) @ p)
    return pack_lags(adjoint_structured(grad_matrix, g))


def subproblem_objective(weights: SubproblemWeights, v: np.ndarray) -> float:
    """Objective of the convex subproblem at v (no barrier term)."""
    cache = _map_cache(weights.geometry.grid_positions())
    mapped = _assemble(cache, np.asarray(v, dtype=np.complex128))
    sigma = mapped + np.diag(weights.noise_diag)
    low = nx.chol_factor(sigma)
    tr_lin = float(np.trace(weights.weight @ mapped).real)
    tr_inv = float(np.trace(nx.chol_solve_factored(low, weights.data_matrix)).real)
    return tr_lin + tr_inv


# -- barrier subproblem solver ----------------------------------------------


class _BarrierProblem:
    """Barrier model of one subproblem, objective normalized to O(n) scale.

    Both objective terms are homogeneous in (W, R_fit), so dividing them by
    a common factor rescales the objective without moving the minimizer.
    Normalizing keeps the fixed barrier schedule meaningful regardless of
    the data's power level; reported objective values are un-normalized.
    """

    def __init__(self, weights: SubproblemWeights, scale: float = 1.0):
        self.cache = _map_cache(weights.geometry.grid_positions())
        self.toep_cache = _map_cache(_ula_positions(self.cache.aperture))
        self.scale = max(float(scale), 1e-300)
        self.weight = nx.hermitian_part(weights.weight) / self.scale
        self.noise = np.asarray(weights.noise_diag, dtype=np.float64)
        self.data = nx.hermitian_part(weights.data_matrix) / self.scale
        self.g_lin = _adjoint_packed(self.cache, self.weight)
        self.n = self.weight.shape[0]

    def factor(self, x: np.ndarray):
        """Cholesky factors of (Map+D, Toep) or None when infeasible."""
        v = unpack_lags(x)
        mapped = _assemble(self.cache, v)
        sigma = mapped + np.diag(self.noise)
        toep = _assemble(self.toep_cache, v)
        try:
            return nx.chol_factor(sigma), nx.chol_factor(toep), mapped
        except nx.NotPositiveDefiniteError:
            return None

    def value(self, x: np.ndarray, mu: float, factors) -> tuple[float, float]:
        low_s, low_t, _ = factors
        f = float(x @ self.g_lin) + float(
            np.trace(nx.chol_solve_factored(low_s, self.data)).real
        )
        return f, f - mu * nx.logdet_from_factor(low_t)

    def grad_hess(self, x: np.ndarray, mu: float, factors):
        low_s, low_t, _ = factors
        eye_n = np.eye(self.n, dtype=np.complex128)
        p = nx.hermitian_part(nx.chol_solve_factored(low_s, eye_n))
        g2 = nx.hermitian_part(p @ self.data @ p)
        grad = self.g_lin - _adjoint_packed(self.cache, g2)

        tinv = nx.hermitian_part(
            nx.chol_solve_factored(low_t, np.eye(self.cache.aperture, dtype=np.complex128))
        )
        grad = grad - mu * _adjoint_packed(self.toep_cache, tinv)

        nb = self.cache.nparams
        z = np.matmul(np.matmul(p[None], self.cache.basis), g2[None])
        # term[a, b] = tr(B_b Z_a) = sum_ij B_b[i, j] Z_a[j, i]
        term = z.transpose(0, 2, 1).reshape(nb, -1) @ self.cache.basis.reshape(nb, -1).T
        h_data = np.real(term + term.T)
        q = np.matmul(tinv[None], self.toep_cache.basis)
        h_barrier = np.real(
            q.reshape(nb, -1) @ q.transpose(0, 2, 1).reshape(nb, -1).T
        )
        return grad, h_data + mu * h_barrier


def _strictly_feasible_start(problem: _BarrierProblem, x0: np.ndarray) -> np.ndarray:
    x = x0.copy()
    lift = max(1e-12, 1e-12 * abs(x[0]))
    for _ in range(40):
        if problem.factor(x) is not None:
            return x
        x = x.copy()
        x[0] += lift
        lift *= 10.0
    raise SolverError("could not find a strictly feasible start")


def _center_start(x: np.ndarray, mu0: float) -> np.ndarray:
    """Push the path start into the cone interior compatible with mu0.

    Warm starts arriving from a previous solve sit essentially on the PSD
    boundary, where the barrier Hessian is numerically singular and Newton
    crawls.  Shifting the zero lag (an exact spectrum shift of the Toeplitz
    embedding) restores an interior margin; the original start stays in the
    candidate set, so the returned objective can only improve.
    """
    v = unpack_lags(x)
    eig = nx.herm_eig(toeplitz_embed(v))
    scale = max(float(eig.values[-1]), abs(v[0].real), 1e-12)
    target = np.sqrt(mu0) * scale
    gap = target - float(eig.values[0])
    if gap > 0:
        x = x.copy()
        x[0] += gap
    return x


def _newton_stage(
    problem: _BarrierProblem, x: np.ndarray, mu: float, cfg: MleConfig, tol: float
):
    """Minimize f + mu * barrier from x; returns (x, best_f_seen, best_x)."""
    factors = problem.factor(x)
    if factors is None:
        raise SolverError("infeasible start in Newton stage")
    f_plain, f_mu = problem.value(x, mu, factors)
    best_f, best_x = f_plain, x
    for _ in range(cfg.max_newton):
        grad, hess = problem.grad_hess(x, mu, factors)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol * (1.0 + abs(f_mu)):
            break
        step = _solve_direction(hess, grad)
        slope = float(grad @ step)
        if slope >= 0:  # rounding gave a non-descent direction; use steepest
            step = -grad
            slope = -gnorm * gnorm
        t = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            cand = x + t * step
            cand_factors = problem.factor(cand)
            if cand_factors is not None:
                cand_plain, cand_mu = problem.value(cand, mu, cand_factors)
                if cand_mu <= f_mu + 0.25 * t * slope:
                    x, factors = cand, cand_factors
                    f_plain, f_mu = cand_plain, cand_mu
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise LineSearchError("backtracking line search failed")
        if f_plain < best_f:
            best_f, best_x = f_plain, x
        if -slope * t < 1e-16 * (1.0 + abs(f_mu)):
            break
    return x, best_f, best_x


def _solve_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # The Hessian is PSD by construction (convex data term plus barrier), so
    # an undamped factorization normally succeeds and artificial damping
    # would only blunt the Newton step where the barrier curvature is large.
    try:
        low = nx.chol_factor(hess)
        return -np.real(nx.chol_solve_factored(low, grad.astype(np.complex128)))
    except nx.NotPositiveDefiniteError:
        pass
    # Rounding made it indefinite: solve in the eigenbasis with the noise
    # floor clipped relative to the dominant curvature.
    eig = nx.herm_eig(0.5 * (hess + hess.T).astype(np.complex128))
    floor = max(eig.values[-1], 1.0) * 1e-14
    inv = 1.0 / np.maximum(eig.values, floor)
    vec = eig.vectors.real
    return -(vec * inv) @ (vec.T @ grad)


def solve_subproblem(
    weights: SubproblemWeights,
    start: np.ndarray,
    cfg: MleConfig,
    barrier_start: float | None = None,
) -> np.ndarray:
    """Solve the Toeplitz-constrained convex subproblem from a feasible start.

    Runs log-barrier continuation with damped Newton inner iterations.  The
    returned point never has a larger objective than the start: the start and
    every accepted iterate are candidates and the best one wins.
    """
    probe = _BarrierProblem(weights)
    x0 = pack_lags(np.asarray(start, dtype=np.complex128))
    mu = cfg.barrier_start if barrier_start is None else barrier_start
    x = _center_start(_strictly_feasible_start(probe, x0), mu)
    # Renormalize so the schedule sees an O(n)-scale objective.
    f_lifted = probe.value(x, mu, probe.factor(x))[0]
    scale = max(1.0, f_lifted / (2.0 * probe.n))
    problem = probe if scale == 1.0 else _BarrierProblem(weights, scale=scale)

    candidates: list[tuple[float, np.ndarray]] = []
    start_factors = problem.factor(x0)
    if start_factors is not None:
        candidates.append((problem.value(x0, 1.0, start_factors)[0], x0))
    while True:
        final = mu <= cfg.barrier_stop * (1.0 + 1e-12)
        # Intermediate stages only need to track the central path loosely.
        tol = cfg.newton_tol if final else max(cfg.newton_tol, 1e-6)
        try:
            x, stage_best_f, stage_best_x = _newton_stage(problem, x, mu, cfg, tol)
        except LineSearchError:
            if not candidates:
                raise
            break
        candidates.append((stage_best_f, stage_best_x))
        if final:
            break
        mu = max(mu * cfg.barrier_factor, cfg.barrier_stop)

    best_f, best_x = min(candidates, key=lambda c: c[0])
    return unpack_lags(best_x)


# -- outer MM loop ------------------------------------------------------------


def _unit_lag_vector(aperture: int) -> np.ndarray:
    v = np.zeros(aperture, dtype=np.complex128)
    v[0] = 1.0
    return v


def _crude_lambda_search(v: np.ndarray, lam: float, r: np.ndarray, g: ArrayGeometry) -> float:
    grid = lam * np.logspace(-0.5, 0.5, 11)
    costs = [ml_cost(v, float(c), r, g) for c in grid]
    return float(grid[int(np.argmin(costs))])


def structcov_mle(r: np.ndarray, g: ArrayGeometry, cfg: MleConfig) -> np.ndarray:
    """MM recovery of the structured covariance lag vector from an SCM.

    Starts at the unit lag vector (identity model), majorizes the log-det
    term at each iterate, and solves the convex subproblem for a fixed
    number of outer iterations.  The ML cost is non-increasing along the
    iterate sequence.
    """
    r = nx.hermitian_part(np.asarray(r, dtype=np.complex128))
    aperture = coarray(g).aperture
    lam = cfg.lam
    v = _unit_lag_vector(aperture)
    if cfg.callback is not None:
        cfg.callback(0, v.copy(), ml_cost(v, lam, r, g))
    eye_m = np.eye(g.m)
    for k in range(1, cfg.outer_iters + 1):
        w = nx.inv_pd(structured_matrix(v, g) + lam * eye_m)
        weights = SubproblemWeights(
            weight=w, noise_diag=np.full(g.m, lam), data_matrix=r, geometry=g
        )
        try:
            v = solve_subproblem(weights, v, cfg)
        except LineSearchError:
            jitter = v.copy()
            jitter[0] += 1e-8 * abs(jitter[0]) + 1e-12
            v = solve_subproblem(weights, jitter, cfg)
        if cfg.estimate_lambda:
            lam = _crude_lambda_search(v, lam, r, g)
        if cfg.callback is not None:
            cfg.callback(k, v.copy(), ml_cost(v, lam, r, g))
    return v


# -- EM variant: interpolate missing correlation lags -------------------------


def em_estep(
    v: np.ndarray,
    y_o: SnapshotMatrix,
    plan: CompletionPlan,
    lam_o: float,
    lam_m: float,
) -> np.ndarray:
    """Conditional complete-data SCM given the observed snapshots.

    Output blocks are ordered [observed; missing].  The observed block is the
    plain SCM; cross blocks and the latent block follow from the conditional
    Gaussian moments under the current model ``T(v) + diag(lam_o, lam_m)``.
    """
    tn = structured_matrix(v, plan.complete_geometry)
    o = list(plan.observed_idx)
    m = list(plan.missing_idx)
    r_o = scm(y_o)
    if not m:
        return r_o
    sig_oo = tn[np.ix_(o, o)] + lam_o * np.eye(len(o))
    sig_mm = tn[np.ix_(m, m)] + lam_m * np.eye(len(m))
    sig_mo = tn[np.ix_(m, o)]
    gain = sig_mo @ nx.inv_pd(sig_oo)  # Sigma_mo Sigma_oo^{-1}
    top_right = r_o @ gain.conj().T
    bottom = sig_mm - gain @ sig_mo.conj().T + gain @ r_o @ gain.conj().T
    out = np.block([[r_o, top_right], [gain @ r_o, bottom]])
    return nx.hermitian_part(out)


def _complete_noise_diag(plan: CompletionPlan, lam_o: float, lam_m: float) -> np.ndarray:
    d = np.empty(plan.complete_geometry.m)
    d[list(plan.observed_idx)] = lam_o
    d[list(plan.missing_idx)] = lam_m
    return d


def _stacked_to_complete(r_stacked: np.ndarray, plan: CompletionPlan) -> np.ndarray:
    order = list(plan.observed_idx) + list(plan.missing_idx)
    n = plan.complete_geometry.m
    out = np.zeros((n, n), dtype=np.complex128)
    out[np.ix_(order, order)] = r_stacked
    return out


def em_majorized_cost(
    v: np.ndarray,
    v_ref: np.ndarray,
    r_tilde: np.ndarray,
    plan: CompletionPlan,
    lam_o: float,
    lam_m: float,
) -> float:
    """Inner majorized EM objective tr(B^{-1} T(v)) + tr(Sigma_y(v)^{-1} R~)."""
    cg = plan.complete_geometry
    d = np.diag(_complete_noise_diag(plan, lam_o, lam_m))
    b = structured_matrix(v_ref, cg) + d
    sigma = structured_matrix(v, cg) + d
    r_fit = _stacked_to_complete(r_tilde, plan)
    t1 = float(np.trace(nx.chol_solve(b, structured_matrix(v, cg))).real)
    t2 = float(np.trace(nx.chol_solve(sigma, r_fit)).real)
    return t1 + t2


def observed_majorized_cost(
    v: np.ndarray,
    v_ref: np.ndarray,
    r_observed: np.ndarray,
    g: ArrayGeometry,
    lam_o: float,
) -> float:
    """Majorized objective restricted to the physical sensors."""
    t_ref = structured_matrix(v_ref, g) + lam_o * np.eye(g.m)
    t_v = structured_matrix(v, g)
    t1 = float(np.trace(nx.chol_solve(t_ref, t_v)).real)
    t2 = float(np.trace(nx.chol_solve(t_v + lam_o * np.eye(g.m), r_observed)).real)
    return t1 + t2


def em_gridless(
    y_o: SnapshotMatrix,
    g: ArrayGeometry,
    plan: CompletionPlan,
    cfg: MleConfig,
) -> np.ndarray:
    """EM recovery with latent sensors interpolating missing correlation lags.

    Each major iteration computes the conditional complete-data SCM, then
    runs ``inner_iters`` majorized subproblem solves on the completed
    geometry.  The observed-data ML cost is non-increasing over major
    iterations; with no missing sensors the trajectory coincides with
    ``structcov_mle``.
    """
    lam_o = cfg.lam
    lam_m = cfg.lam_missing
    cg = plan.complete_geometry
    aperture = coarray(cg).aperture
    if aperture != coarray(g).aperture:
        raise SolverError("completion must preserve the array aperture")
    noise = _complete_noise_diag(plan, lam_o, lam_m)
    r_o = scm(y_o)
    v = _unit_lag_vector(aperture)
    if cfg.callback is not None:
        cfg.callback(0, v.copy(), ml_cost(v, lam_o, r_o, g))
    for k in range(1, cfg.outer_iters + 1):
        r_tilde = em_estep(v, y_o, plan, lam_o, lam_m)
        r_fit = _stacked_to_complete(r_tilde, plan) if plan.missing_idx else r_tilde
        for _ in range(cfg.inner_iters):
            b = structured_matrix(v, cg) + np.diag(noise)
            weights = SubproblemWeights(
                weight=nx.inv_pd(b), noise_diag=noise, data_matrix=r_fit, geometry=cg
            )
            try:
                v = solve_subproblem(weights, v, cfg)
            except LineSearchError:
                jitter = v.copy()
                jitter[0] += 1e-8 * abs(jitter[0]) + 1e-12
                v = solve_subproblem(weights, jitter, cfg)
        if cfg.callback is not None:
            cfg.callback(k, v.copy(), ml_cost(v, lam_o, r_o, g))
    return v
