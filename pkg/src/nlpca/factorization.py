"""Exponential-family low-rank factorization of patch matrices.

A cluster of patches Y (M x N counts) is modeled as Y_ij ~ Poisson(F_ij)
with F = exp(UV), U the M x l coefficient matrix and the rows of V the l
dictionary atoms, both living in the natural-parameter (log) domain.
Maximum likelihood reduces to minimizing

    L(U, V) = sum_ij exp(UV)_ij - Y_ij (UV)_ij

which is biconvex (convex in U for fixed V and vice versa) but not jointly
convex; biconvexity_witness() returns the classic 2x2 counterexample
Hessian.  The solver alternates exact Newton steps on the rows of U with
Newton steps on the columns of V; each subproblem Hessian is an l x l SPD
matrix (l is tiny), solved by Cholesky factorization, never by explicit
inverse.  A Tikhonov term cond * I keeps the systems well posed.

The sparse variant replaces the U row update with a SPIRAL-type proximal
step on the l1-penalized row objective f(u) + lam * ||u||_1: a gradient
step scaled by a Barzilai-Borwein alpha followed by soft thresholding,
safeguarded by doubling alpha until the penalized row objective does not
increase.  The Gaussian variant substitutes the squared loss and its
linear updates, for factorizing Anscombe-transformed patches.

Full Newton sweeps are not guaranteed monotone and no line search is used
by default; set guard=True in SolverConfig to halve any sweep that
increases the loss.
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .validation import check_conformal, make_rng

EXP_CLAMP = 700.0  # exp(700) is near the float64 overflow edge
MODES = ("nlpca", "nlspca", "gaussian")

__all__ = [
    "FactorPair", "SolverConfig", "SpiralState", "FactorizationError",
    "poisson_loss", "penalized_loss", "gaussian_loss", "grad_u", "grad_v",
    "newton_row_update", "newton_col_update", "newton_coordinate_update",
    "soft_threshold", "spiral_row_update", "gaussian_row_update",
    "gaussian_col_update", "init_factors", "factorize", "estimate",
    "default_l1_weight", "biconvexity_witness", "ExpFamilyPCA",
]


class FactorizationError(RuntimeError):
    """Non-finite intermediate in a factorization update."""

    def __init__(self, message, iteration=None, index=None):
        ctx = []
        if iteration is not None:
            ctx.append(f"iteration {iteration}")
        if index is not None:
            ctx.append(f"index {index}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.iteration = iteration
        self.index = index


class FactorPair(NamedTuple):
    U: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    """Factorization settings.

    rank: number of components l.
    n_iter: maximum outer iterations.
    stop_tol: threshold on the squared relative change of the estimate.
    cond: Tikhonov parameter added to every Newton system.
    l1_weight: l1 penalty weight for mode 'nlspca'; None selects
        70 * sqrt(log(M) / n) with n the number of observed entries.
    mode: 'nlpca' (Poisson Newton), 'nlspca' (Poisson with l1 rows),
        'gaussian' (squared loss).
    guard: when True, halve a Newton/Gaussian sweep that increased the
        loss (off by default: plain sweeps are accepted non-monotone).
    inner_max / inner_tol: per-row proximal step budget and relative
        objective tolerance for the 'nlspca' row subproblem chain.
    """

    rank: int = 4
    n_iter: int = 20
    stop_tol: float = 1e-1
    cond: float = 1e-3
    l1_weight: float = None
    mode: str = "nlpca"
    guard: bool = False
    inner_max: int = 20
    inner_tol: float = 1e-3

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be > 0")
        if self.cond < 0:
            raise ValueError("cond must be >= 0")
        if self.l1_weight is not None and self.l1_weight < 0:
            raise ValueError("l1_weight must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def _clamped_exp(T):
    """exp with arguments clamped at EXP_CLAMP; returns (values, n_clamped)."""
    over = T > EXP_CLAMP
    n = int(np.count_nonzero(over))
    if n:
        T = np.where(over, EXP_CLAMP, T)
    return np.exp(T), n


def poisson_loss(U, V, Y):
    """L(U,V) = sum exp(UV) - Y * (UV), overflow guarded."""
    U, V, Y = check_conformal(U, V, Y)
    T = U @ V
    E, _ = _clamped_exp(T)
    return float(np.sum(E) - np.sum(Y * T))


def penalized_loss(U, V, Y, l1_weight):
    """poisson_loss plus l1_weight * sum |U_ij|."""
    if l1_weight < 0:
        raise ValueError("l1_weight must be >= 0")
    return poisson_loss(U, V, Y) + float(l1_weight) * float(np.abs(U).sum())


def gaussian_loss(U, V, Y):
    """Squared loss sum ((UV) - Y)^2 for the Gaussian (PCA) variant."""
    U, V, Y = check_conformal(U, V, Y)
    return float(np.sum((U @ V - Y) ** 2))


def grad_u(U, V, Y):
    """d L / d U = (exp(UV) - Y) V^T."""
    U, V, Y = check_conformal(U, V, Y)
    E, _ = _clamped_exp(U @ V)
    return (E - Y) @ V.T


def grad_v(U, V, Y):
    """d L / d V = U^T (exp(UV) - Y)."""
    U, V, Y = check_conformal(U, V, Y)
    E, _ = _clamped_exp(U @ V)
    return U.T @ (E - Y)


def _spd_solve(H, g, what, iteration=None, index=None):
    try:
        return cho_solve(cho_factor(H, lower=True), g)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"{what}: {exc}; the system is singular, use cond > 0",
            iteration, index) from None


def newton_row_update(U, V, Y, i, cond):
    """One exact Newton step on row i of U.

    u <- u - (exp(uV) - y) V^T (V diag(exp(uV)) V^T + cond I)^(-1)
    """
    U, V, Y = check_conformal(U, V, Y)
    u = U[i]
    e, _ = _clamped_exp(u @ V)
    g = (e - Y[i]) @ V.T
    H = (V * e) @ V.T + cond * np.eye(V.shape[0])
    step = _spd_solve(H, g, "newton row update", index=i)
    new = u - step
    if not np.all(np.isfinite(new)):
        raise FactorizationError("non-finite row update", index=i)
    return new


def newton_col_update(U, V, Y, j, cond):
    """One exact Newton step on column j of V (uses the current U).

    v <- v - (U^T diag(exp(Uv)) U + cond I)^(-1) U^T (exp(Uv) - y)
    """
    U, V, Y = check_conformal(U, V, Y)
    v = V[:, j]
    e, _ = _clamped_exp(U @ v)
    g = U.T @ (e - Y[:, j])
    H = (U.T * e) @ U + cond * np.eye(U.shape[1])
    step = _spd_solve(H, g, "newton column update", index=j)
    new = v - step
    if not np.all(np.isfinite(new)):
        raise FactorizationError("non-finite column update", index=j)
    return new


def newton_coordinate_update(U, V, Y, k):
    """Diagonal-Hessian update of column k of U (coordinate variant).

    U_:,k <- U_:,k - D^(-1) (exp(UV) - Y) V_k,:^T with
    D_m = sum_j exp(UV)_mj V_kj^2.  Kept for cross-checking the row
    update; not used by the default pipeline.
    """
    U, V, Y = check_conformal(U, V, Y)
    E, _ = _clamped_exp(U @ V)
    d = E @ (V[k] ** 2)
    if np.any(d == 0):
        raise FactorizationError("zero diagonal entry", index=k)
    return U[:, k] - ((E - Y) @ V[k]) / d


def soft_threshold(x, tau):
    """Elementwise shrinkage sign(x) * max(|x| - tau, 0)."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("threshold must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


@dataclass(frozen=True)
class SpiralState:
    """Per-row proximal step state threaded through spiral_row_update.

    alpha: current step scale (1/alpha is the gradient step length).
    prev_row / prev_grad: the previous accepted iterate and its gradient,
        used for the Barzilai-Borwein ratio.
    adapt: when False, alpha is used as given (no BB, no safeguard).
    stalled: the last call exhausted its doublings and kept the row.
    n_doublings: safeguard doublings spent by the last call.
    """

    alpha: float = 1.0
    prev_row: np.ndarray = None
    prev_grad: np.ndarray = None
    adapt: bool = True
    stalled: bool = False
    n_doublings: int = 0


MAX_DOUBLINGS = 30
ALPHA_MIN, ALPHA_MAX = 1e-8, 1e8


def _row_objective(u, V, y, l1_weight):
    T = u @ V
    e, _ = _clamped_exp(T)
    return float(e.sum() - T @ y + l1_weight * np.abs(u).sum())


def spiral_row_update(U, V, Y, i, l1_weight, state=None):
    """One safeguarded proximal step on row i of the penalized objective.

    gamma = u - (1/alpha) grad f(u), u <- soft_threshold(gamma, lam/alpha),
    with f(u) = <exp(uV), 1> - <uV, y>.  alpha is the Barzilai-Borwein
    ratio (dg.dg)/(du.dg) from the previous accepted step, clamped to
    [1e-8, 1e8] (first step uses alpha = 1), then doubled (at most 30
    times) until the penalized row objective does not increase.  If every
    doubling fails the row is kept and the state is flagged stalled.

    Returns (new row, new state).
    """
    U, V, Y = check_conformal(U, V, Y)
    if l1_weight < 0:
        raise ValueError("l1_weight must be >= 0")
    if state is None:
        state = SpiralState()
    u = U[i]
    y = Y[i]
    e, _ = _clamped_exp(u @ V)
    g = (e - y) @ V.T
    alpha = state.alpha
    if state.adapt and state.prev_row is not None:
        du = u - state.prev_row
        dg = g - state.prev_grad
        den = float(du @ dg)
        if den > 0:
            alpha = min(max(float(dg @ dg) / den, ALPHA_MIN), ALPHA_MAX)
    if not state.adapt:
        cand = soft_threshold(u - g / alpha, l1_weight / alpha)
        return cand, replace(state, prev_row=u.copy(), prev_grad=g,
                             stalled=False, n_doublings=0)
    obj = _row_objective(u, V, y, l1_weight)
    for doublings in range(MAX_DOUBLINGS + 1):
        cand = soft_threshold(u - g / alpha, l1_weight / alpha)
        if _row_objective(cand, V, y, l1_weight) <= obj:
            return cand, replace(
                state, alpha=alpha, prev_row=u.copy(), prev_grad=g,
                stalled=False, n_doublings=doublings)
        alpha *= 2.0
    return u.copy(), replace(
        state, alpha=alpha, prev_row=u.copy(), prev_grad=g,
        stalled=True, n_doublings=MAX_DOUBLINGS)


def gaussian_row_update(U, V, Y, i, cond):
    """Row update for the squared loss: one step lands on the regularized
    least-squares solution; with cond = 0 it is the exact LS fit."""
    U, V, Y = check_conformal(U, V, Y)
    r = U[i] @ V - Y[i]
    H = V @ V.T + cond * np.eye(V.shape[0])
    return U[i] - _spd_solve(H, r @ V.T, "gaussian row update", index=i)


def gaussian_col_update(U, V, Y, j, cond):
    """Column update for the squared loss."""
    U, V, Y = check_conformal(U, V, Y)
    r = U @ V[:, j] - Y[:, j]
    H = U.T @ U + cond * np.eye(U.shape[1])
    return V[:, j] - _spd_solve(H, U.T @ r, "gaussian column update", index=j)


def init_factors(m, rank, n, rng):
    """Draw the starting point: U standard normal, V rows normalized.

    U is drawn first, then V; V rows are scaled to unit Euclidean norm
    and the first atom is replaced by the constant vector 1/sqrt(n).
    Neither property is re-enforced during iterations.
    """
    rng = make_rng(rng)
    U = rng.standard_normal((m, rank))
    V = rng.standard_normal((rank, n))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    V[0, :] = 1.0 / math.sqrt(n)
    return FactorPair(U, V)


def estimate(U, V):
    """Intensity estimate exp(UV), strictly positive, overflow clamped."""
    E, _ = _clamped_exp(np.asarray(U) @ np.asarray(V))
    return E


def default_l1_weight(n_rows, n_obs):
    """70 * sqrt(log(M) / n) with n the observed sample count."""
    if n_rows < 1 or n_obs < 1:
        raise ValueError("counts must be positive")
    return 70.0 * math.sqrt(math.log(n_rows) / n_obs)


def biconvexity_witness():
    """Joint Hessian of the scalar loss at U = V = 0, Y = 0.

    For M = N = l = 1 the loss is L(u, v) = e^(uv) - y uv; its joint
    Hessian is [[v^2 e^(uv), uv e^(uv) + e^(uv) - y], [sym., u^2 e^(uv)]].
    At the origin with y = 0 this is [[0, 1], [1, 0]], whose eigenvalues
    are -1 and +1: each block is convex, the pair is not jointly convex.
    """
    u = v = y = 0.0
    euv = math.exp(u * v)
    h_uu = v * v * euv
    h_uv = u * v * euv + euv - y
    h_vv = u * u * euv
    return np.array([[h_uu, h_uv], [h_uv, h_vv]])


# ------------------------------------------------------------- sweeps

def _newton_sweep_u(U, V, Y, cond, iteration=None):
    """Full Newton sweep over the rows of U (batched Cholesky solves)."""
    E, clamps = _clamped_exp(U @ V)
    G = (E - Y) @ V.T
    H = np.einsum("mn,an,bn->mab", E, V, V, optimize=True)
    H += cond * np.eye(V.shape[0])
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "singular row system, use cond > 0", iteration) from None
    z = np.linalg.solve(L, G[:, :, None])
    step = np.linalg.solve(np.transpose(L, (0, 2, 1)), z)[:, :, 0]
    new = U - step
    if not np.all(np.isfinite(new)):
        raise FactorizationError("non-finite row sweep", iteration)
    return new, clamps


def _newton_sweep_v(U, V, Y, cond, iteration=None):
    """Full Newton sweep over the columns of V (uses the updated U)."""
    E, clamps = _clamped_exp(U @ V)
    G = U.T @ (E - Y)
    H = np.einsum("mn,ma,mb->nab", E, U, U, optimize=True)
    H += cond * np.eye(U.shape[1])
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "singular column system, use cond > 0", iteration) from None
    z = np.linalg.solve(L, G.T[:, :, None])
    step = np.linalg.solve(np.transpose(L, (0, 2, 1)), z)[:, :, 0]
    new = V - step.T
    if not np.all(np.isfinite(new)):
        raise FactorizationError("non-finite column sweep", iteration)
    return new, clamps


def _gaussian_sweep_u(U, V, Y, cond, iteration=None):
    H = V @ V.T + cond * np.eye(V.shape[0])
    G = (U @ V - Y) @ V.T
    try:
        c = cho_factor(H, lower=True)
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "singular system, use cond > 0", iteration) from None
    return U - cho_solve(c, G.T).T, 0


def _gaussian_sweep_v(U, V, Y, cond, iteration=None):
    H = U.T @ U + cond * np.eye(U.shape[1])
    G = U.T @ (U @ V - Y)
    try:
        c = cho_factor(H, lower=True)
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "singular system, use cond > 0", iteration) from None
    return V - cho_solve(c, G), 0


def _spiral_sweep_u(U, V, Y, l1_weight, inner_max, inner_tol):
    """Chain of safeguarded proximal steps on every row of U.

    Each row follows exactly the spiral_row_update recurrence (alpha = 1
    on the first step, Barzilai-Borwein afterwards, doubling safeguard),
    iterated until the relative change of its penalized objective falls
    to inner_tol or inner_max steps are spent.  All rows advance together
    with masked vector arithmetic; rows are independent, so the batched
    result matches the sequential per-row recurrence.
    """
    M = U.shape[0]
    u = U.copy()
    alpha = np.ones(M)
    T = u @ V
    E, clamps = _clamped_exp(T)
    pen = E.sum(axis=1) - (T * Y).sum(axis=1) + l1_weight * np.abs(u).sum(axis=1)
    prev_u = None
    prev_g = None
    active = np.ones(M, dtype=bool)
    stalls = 0
    max_delta = 0.0
    steps = 0
    for _ in range(inner_max):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        steps += 1
        Ei, c = _clamped_exp(u[idx] @ V)
        clamps += c
        g = (Ei - Y[idx]) @ V.T
        if prev_u is not None:
            du = u[idx] - prev_u[idx]
            dg = g - prev_g[idx]
            den = np.einsum("ij,ij->i", du, dg)
            num = np.einsum("ij,ij->i", dg, dg)
            ok = den > 0
            alpha[idx[ok]] = np.clip(num[ok] / den[ok], ALPHA_MIN, ALPHA_MAX)
        else:
            prev_u = u.copy()
            prev_g = np.zeros_like(u)
        prev_u[idx] = u[idx]
        prev_g[idx] = g
        a = alpha[idx].copy()
        undecided = np.ones(idx.size, dtype=bool)
        new_u = u[idx].copy()
        new_pen = pen[idx].copy()
        for _ in range(MAX_DOUBLINGS + 1):
            rows = np.flatnonzero(undecided)
            if rows.size == 0:
                break
            ii = idx[rows]
            cand = soft_threshold(
                u[ii] - g[rows] / a[rows, None], l1_weight / a[rows, None])
            Tc = cand @ V
            Ec, c = _clamped_exp(Tc)
            clamps += c
            pc = (Ec.sum(axis=1) - (Tc * Y[ii]).sum(axis=1)
                  + l1_weight * np.abs(cand).sum(axis=1))
            acc = pc <= pen[ii]
            new_u[rows[acc]] = cand[acc]
            new_pen[rows[acc]] = pc[acc]
            undecided[rows[acc]] = False
            a[rows[~acc]] *= 2.0
        stalls += int(undecided.sum())  # stalled rows keep their value
        alpha[idx] = a
        delta = new_pen - pen[idx]
        if delta.size:
            max_delta = max(max_delta, float(delta.max()))
        rel = np.abs(delta) / np.maximum(np.abs(pen[idx]), 1.0)
        u[idx] = new_u
        pen[idx] = new_pen
        active[idx] = rel > inner_tol
    if not np.all(np.isfinite(u)):
        raise FactorizationError("non-finite spiral sweep")
    stats = {"spiral_steps": steps, "spiral_stalls": stalls,
             "spiral_max_delta": max_delta}
    return u, clamps, stats


def _mode_estimate(U, V, mode):
    if mode == "gaussian":
        return U @ V, 0
    return _clamped_exp(U @ V)


def _mode_loss(U, V, Y, mode):
    return gaussian_loss(U, V, Y) if mode == "gaussian" else poisson_loss(U, V, Y)


def _row_losses(U, V, Y):
    t, _ = _clamped_exp(U @ V)
    return np.sum(t - Y * (U @ V), axis=1)


def _backtrack_rows(old, new, V, Y):
    """Halve each row of new toward old until its loss does not increase.

    The Poisson loss is separable over rows when V is fixed, so rows are
    backtracked independently; a row that exhausts its halvings reverts.
    """
    base = _row_losses(old, V, Y)
    cur = new.copy()
    for _ in range(MAX_DOUBLINGS):
        bad = _row_losses(cur, V, Y) > base
        if not np.any(bad):
            return cur
        cur[bad] = old[bad] + 0.5 * (cur[bad] - old[bad])
    bad = _row_losses(cur, V, Y) > base
    cur[bad] = old[bad]
    return cur


def _halve_until_nonincreasing(old, new, make_loss, base_loss):
    """Backtrack new toward old until the loss does not increase."""
    cur = new
    for _ in range(MAX_DOUBLINGS):
        if make_loss(cur) <= base_loss:
            return cur
        cur = old + 0.5 * (cur - old)
    return old


def factorize(Y, config=None, rng=None, init=None):
    """Alternating minimization on one cluster's patch matrix.

    Runs full U-sweeps then full V-sweeps until the squared relative
    change of the estimate, ||est_t - est_(t+1)||^2 / ||est_t||^2, falls
    to config.stop_tol or config.n_iter outer iterations are spent.  The
    estimate is exp(UV) for the Poisson modes and UV for the Gaussian
    mode.  Returns (FactorPair, diagnostics) where diagnostics carries a
    per-iteration record (loss, penalized loss, relative change, clamp
    counts, and proximal-step stats in mode 'nlspca').

    init overrides the random starting factors (used to resume or to
    start at a known point); rng seeds the default initialization.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] < 1:
        raise ValueError("Y must be a nonempty M x N matrix")
    config = config or SolverConfig()
    m, n = Y.shape
    if config.rank > min(m, n):
        warnings.warn(
            f"rank {config.rank} exceeds min(M, N) = {min(m, n)}",
            stacklevel=2)
    if init is not None:
        U = np.array(init[0], dtype=np.float64)
        V = np.array(init[1], dtype=np.float64)
    else:
        U, V = init_factors(m, config.rank, n, rng)
    lam = config.l1_weight
    if config.mode == "nlspca" and lam is None:
        lam = default_l1_weight(m, Y.size)

    prev_est, _ = _mode_estimate(U, V, config.mode)
    records = []
    converged = False
    for t in range(1, config.n_iter + 1):
        clamps = 0
        stats = {}
        U_old, V_old = U, V
        if config.mode == "nlspca":
            U, c, stats = _spiral_sweep_u(
                U, V, Y, lam, config.inner_max, config.inner_tol)
            clamps += c
        elif config.mode == "nlpca":
            U, c = _newton_sweep_u(U, V, Y, config.cond, t)
            clamps += c
        else:
            U, c = _gaussian_sweep_u(U, V, Y, config.cond, t)
            clamps += c
        if config.guard and config.mode != "nlspca":
            U = _halve_until_nonincreasing(
                U_old, U, lambda X: _mode_loss(X, V, Y, config.mode),
                _mode_loss(U_old, V, Y, config.mode))
        if config.mode == "gaussian":
            V, c = _gaussian_sweep_v(U, V, Y, config.cond, t)
        else:
            V, c = _newton_sweep_v(U, V, Y, config.cond, t)
        clamps += c
        if config.guard:
            V = _halve_until_nonincreasing(
                V_old, V, lambda X: _mode_loss(U, X, Y, config.mode),
                _mode_loss(U, V_old, Y, config.mode))

        est, c = _mode_estimate(U, V, config.mode)
        clamps += c
        denom = float(np.sum(prev_est ** 2))
        diff = float(np.sum((prev_est - est) ** 2))
        rel = diff / denom if denom > 0 else (0.0 if diff == 0 else math.inf)
        loss_t = _mode_loss(U, V, Y, config.mode)
        rec = {
            "iteration": t,
            "loss": loss_t,
            "penalized_loss": loss_t + (lam or 0.0) * float(np.abs(U).sum()),
            "rel_change": rel,
            "clamps": clamps,
        }
        rec.update(stats)
        records.append(rec)
        prev_est = est
        if rel <= config.stop_tol:
            converged = True
            break

    diagnostics = {
        "iterations": records,
        "converged": converged,
        "n_iter": len(records),
        "mode": config.mode,
        "l1_weight": lam,
        "clamp_total": int(sum(r["clamps"] for r in records)),
    }
    return FactorPair(U, V), diagnostics


class ExpFamilyPCA(TransformerMixin, BaseEstimator):
    """Estimator facade over factorize.

    fit(Y) learns the dictionary V_ and coefficients U_ for the rows of
    Y; transform(Y) computes coefficients for new rows against the fixed
    dictionary; inverse_transform(U) maps coefficients back to intensity
    estimates (exp(U V_), or U V_ in mode 'gaussian').
    """

    def __init__(self, rank=4, mode="nlpca", n_iter=20, stop_tol=1e-1,
                 cond=1e-3, l1_weight=None, guard=False, random_state=0):
        self.rank = rank
        self.mode = mode
        self.n_iter = n_iter
        self.stop_tol = stop_tol
        self.cond = cond
        self.l1_weight = l1_weight
        self.guard = guard
        self.random_state = random_state

    def _config(self):
        return SolverConfig(
            rank=self.rank, n_iter=self.n_iter, stop_tol=self.stop_tol,
            cond=self.cond, l1_weight=self.l1_weight, mode=self.mode,
            guard=self.guard)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        (self.U_, self.V_), self.diagnostics_ = factorize(
            X, self._config(), make_rng(self.random_state))
        self.n_iter_ = self.diagnostics_["n_iter"]
        self.converged_ = self.diagnostics_["converged"]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).U_

    def transform(self, X):
        """Coefficients for new rows, dictionary held fixed.

        Each row is refit against V_ from a zero start; the row
        subproblems are convex, so a fixed tight budget (at most 100
        sweeps, relative change 1e-8) is used rather than the looser
        pipeline stopping rule.
        """
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.V_.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} columns, dictionary has {self.V_.shape[1]}")
        U = np.zeros((X.shape[0], self.V_.shape[0]))
        lam = self.l1_weight
        if self.mode == "nlspca" and lam is None:
            lam = default_l1_weight(max(X.shape[0], 2), X.size)
        for _ in range(100):
            U_prev = U
            if self.mode == "nlspca":
                U, _, _ = _spiral_sweep_u(U, self.V_, X, lam, 20, 1e-6)
            elif self.mode == "nlpca":
                U, _ = _newton_sweep_u(U, self.V_, X, self.cond)
                U = _backtrack_rows(U_prev, U, self.V_, X)
            else:
                U, _ = _gaussian_sweep_u(U, self.V_, X, self.cond)
            if np.sum((U - U_prev) ** 2) <= 1e-8 * max(
                    np.sum(U_prev ** 2), 1e-30):
                break
        return U

    def inverse_transform(self, U):
        U = check_array(U, dtype=np.float64)
        if self.mode == "gaussian":
            return U @ self.V_
        return estimate(U, self.V_)
