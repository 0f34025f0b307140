"""Beamforming block: KKT solutions and the multiplier fixed point.

At fixed channel and auxiliaries the beamforming subproblem (maximize
sum_k Psi_k + y subject to T_k >= y and the power budget) is convex and
its stationarity conditions are closed-form ridge-regularized solves.
The Lagrange multipliers are found by a fixed point: the simplex
weights lambda shift mass toward the worst common surrogate, and the
power multiplier kappa scales multiplicatively toward the budget. Each
pass updates (y, lambda, kappa) from the current W and then recomputes
W from the fresh multipliers. Because the fixed point can stall on a
tied-constraint manifold short of the optimum, unconverged and
many-user exits are polished by an exact dual solve (closed-form trust
regions minimized over the simplex), adopted only when it improves the
objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import brentq, minimize

from .fp_core import AuxiliaryState, eval_psi, eval_t


@dataclass(frozen=True)
class MultiplierState:
    lam: np.ndarray    # (K,) simplex weights of the common-rate constraints
    kappa: float       # power multiplier, > 0
    rho: float = 0.0   # damping used by the last update


def initial_multipliers(k: int) -> MultiplierState:
    return MultiplierState(lam=np.full(k, 1.0 / k), kappa=1.0, rho=0.0)


def kkt_beamformers(aux: AuxiliaryState, h_rows: np.ndarray,
                    mult: MultiplierState, include_common: bool = True) -> np.ndarray:
    """Stationary beamformers at fixed multipliers, (M, K+1).

    The K private columns share one coefficient matrix and factorization;
    the common column has its own. Without a common stream the common
    column is zero.
    """
    k, m = h_rows.shape
    h_cols = h_rows.conj().T                      # (M, K), column k is h_k
    w = np.zeros((m, k + 1), dtype=complex)

    coef_p = np.abs(aux.eps) ** 2 + mult.lam * np.abs(aux.v) ** 2
    a_p = (h_cols * coef_p[None, :]) @ h_rows
    # with M > K the Gram part is rank deficient; once kappa decays far
    # below its trace the factorization loses positive definiteness, so
    # ridge the diagonal relative to the matrix scale (the surrogate is
    # flat orthogonal to the channels, where the ridge acts)
    ridge = 1e-12 * float(np.trace(a_p).real) / m
    a_p[np.diag_indices(m)] += mult.kappa + ridge
    rhs_p = h_cols * (np.sqrt(1.0 + aux.mu) * aux.eps)[None, :]
    try:
        factor = cho_factor(a_p)
    except LinAlgError as exc:
        raise LinAlgError(f"private-stream KKT system is singular: {exc}") from exc
    w[:, :k] = cho_solve(factor, rhs_p)

    if include_common:
        coef_c = mult.lam * np.abs(aux.v) ** 2
        a_c = (h_cols * coef_c[None, :]) @ h_rows
        ridge_c = 1e-12 * float(np.trace(a_c).real) / m
        a_c[np.diag_indices(m)] += mult.kappa + ridge_c
        rhs_c = h_cols @ (mult.lam * np.sqrt(1.0 + aux.gamma) * aux.v)
        try:
            factor_c = cho_factor(a_c)
        except LinAlgError as exc:
            raise LinAlgError(f"common-stream KKT system is singular: {exc}") from exc
        w[:, k] = cho_solve(factor_c, rhs_c)
    return w


def update_y(t_values: np.ndarray) -> tuple[float, int]:
    """Optimal common surrogate level: the worst T_k (smallest index on ties)."""
    idx = int(np.argmin(t_values))
    return float(t_values[idx]), idx


def update_multipliers(mult: MultiplierState, t_values: np.ndarray | None,
                       worst: int, power: float, p_t: float,
                       gain: float = 1.0) -> MultiplierState:
    """One damped multiplicative multiplier update.

    lambda mass moves toward the worst common surrogate while summing to
    one exactly; kappa scales by the power-budget ratio. The damping
    rho = max(0, -min_k T_k) + 0.1 keeps every ratio positive, and the
    gain exponent in (0, 1] tempers both updates when the fixed point
    oscillates. With no common stream only kappa is updated (rho = 0.1).
    """
    if t_values is None:
        rho = 0.1
        kappa = mult.kappa * ((power + rho) / (p_t + rho)) ** gain
        return MultiplierState(lam=mult.lam, kappa=kappa, rho=rho)

    t_values = np.asarray(t_values, dtype=float)
    rho = max(0.0, -float(t_values.min())) + 0.1
    ratios = ((t_values[worst] + rho) / (t_values + rho)) ** gain
    lam = mult.lam * ratios
    lam[worst] = 0.0
    lam[worst] = 1.0 - float(lam.sum())
    kappa = mult.kappa * ((power + rho) / (p_t + rho)) ** gain
    return MultiplierState(lam=lam, kappa=kappa, rho=rho)


def block_objective(aux: AuxiliaryState, w: np.ndarray, h_rows: np.ndarray,
                  sigma_sq: np.ndarray, include_common: bool = True) -> float:
    """Beamforming-subproblem objective sum_k Psi_k + min_k T_k, in bits."""
    value = float(eval_psi(aux, w, h_rows, sigma_sq).sum())
    if include_common:
        value += float(eval_t(aux, w, h_rows, sigma_sq).min())
    return value


def _simplex_exact(lam: np.ndarray) -> np.ndarray:
    """Clip to the simplex with the sum exactly one (largest entry absorbs)."""
    lam = np.maximum(np.asarray(lam, dtype=float), 0.0)
    total = float(lam.sum())
    lam = lam / total if total > 0.0 else np.full(lam.size, 1.0 / lam.size)
    top = int(np.argmax(lam))
    lam[top] = 0.0
    lam[top] = 1.0 - float(lam.sum())
    if lam[top] < 0.0:     # roundoff pushed the rest above one
        lam[top] = 0.0
        lam /= float(lam.sum())
        lam[top] = 1.0 - float(lam[np.arange(lam.size) != top].sum())
    return lam


def _weighted_max(aux: AuxiliaryState, h_rows: np.ndarray, sigma_sq: np.ndarray,
                  p_t: float, lam: np.ndarray, include_common: bool
                  ) -> tuple[np.ndarray, float]:
    """Exact maximizer of sum_k Psi_k + sum_k lam_k T_k over the power ball.

    Column by column the objective is 2 Re(b^H w) - w^H A w, so in the
    eigenbasis of A the stationary beamformer at power multiplier kappa
    has coordinates beta / (eig + kappa); the total power is strictly
    decreasing in kappa, and either the kappa -> 0 solution fits the
    budget or the budget-matching root is bracketed and solved. Returns
    (W, kappa).
    """
    ln2 = math.log(2.0)
    k, m = h_rows.shape
    h_cols = h_rows.conj().T
    coef_p = np.abs(aux.eps) ** 2 + (lam * np.abs(aux.v) ** 2 if include_common else 0.0)
    a_p = (h_cols * coef_p[None, :]) @ h_rows / ln2
    ev_p, u_p = np.linalg.eigh(a_p)
    ev_p = np.maximum(ev_p, 0.0)
    b_p = h_cols * (np.sqrt(1.0 + aux.mu) * aux.eps)[None, :] / ln2
    beta_p = u_p.conj().T @ b_p                       # (M, K), column i is beta_i

    if include_common:
        coef_c = lam * np.abs(aux.v) ** 2
        a_c = (h_cols * coef_c[None, :]) @ h_rows / ln2
        ev_c, u_c = np.linalg.eigh(a_c)
        ev_c = np.maximum(ev_c, 0.0)
        b_c = h_cols @ (lam * np.sqrt(1.0 + aux.gamma) * aux.v) / ln2
        beta_c = u_c.conj().T @ b_c
    else:
        ev_c = beta_c = None

    abs_p2 = np.abs(beta_p) ** 2
    abs_c2 = np.abs(beta_c) ** 2 if include_common else None

    def power(kappa: float) -> float:
        total = float(np.sum(abs_p2 / (ev_p[:, None] + kappa) ** 2))
        if include_common:
            total += float(np.sum(abs_c2 / (ev_c + kappa) ** 2))
        return total

    kappa = 1e-14
    if power(kappa) > p_t:
        hi = 1.0
        while power(hi) > p_t:
            hi *= 2.0
        kappa = brentq(lambda ka: power(ka) - p_t, 1e-14, hi, xtol=1e-16, rtol=8.9e-16)

    w = np.zeros((m, k + 1), dtype=complex)
    w[:, :k] = u_p @ (beta_p / (ev_p[:, None] + kappa))
    if include_common:
        w[:, k] = u_c @ (beta_c / (ev_c + kappa))
    return w, kappa


def dual_polish(aux: AuxiliaryState, h_rows: np.ndarray, sigma_sq: np.ndarray,
                p_t: float, lam0: np.ndarray, include_common: bool = True
                ) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the beamforming subproblem exactly through its dual.

    The subproblem is concave in W with one ball constraint, and
    min_k T_k is the minimum of the weighted averages over the simplex,
    so strong duality gives

        max_W [sum Psi + min_k T_k] = min_lam max_W [sum Psi + sum lam_k T_k]

    with the inner maximum in closed form (_weighted_max) and the outer
    minimization convex over the simplex with Danskin gradient T(W(lam)).
    Returns (W, lam, kappa). Without a common stream there is no outer
    problem and the single trust-region solve is already exact.
    """
    k = h_rows.shape[0]
    if not include_common or k == 1:
        lam = _simplex_exact(lam0)
        w, kappa = _weighted_max(aux, h_rows, sigma_sq, p_t, lam, include_common)
        return w, lam, kappa

    cache: dict = {}

    def solve_at(lam_free: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # single-entry cache so paired objective/gradient queries solve once
        key = lam_free.tobytes()
        if key not in cache:
            lam = np.maximum(lam_free, 0.0)
            w, _ = _weighted_max(aux, h_rows, sigma_sq, p_t, lam, True)
            cache.clear()
            cache[key] = (lam, w, eval_t(aux, w, h_rows, sigma_sq))
        return cache[key]

    def g(lam_free: np.ndarray) -> float:
        lam, w, t_vals = solve_at(lam_free)
        return float(eval_psi(aux, w, h_rows, sigma_sq).sum() + lam @ t_vals)

    def jac(lam_free: np.ndarray) -> np.ndarray:
        _, _, t_vals = solve_at(lam_free)
        return np.asarray(t_vals, dtype=float)

    res = minimize(g, _simplex_exact(lam0), jac=jac, method="SLSQP",
                   bounds=[(0.0, 1.0)] * k,
                   constraints=[{"type": "eq", "fun": lambda la: la.sum() - 1.0,
                                 "jac": lambda la: np.ones(k)}],
                   options={"maxiter": 100, "ftol": 1e-12})
    lam = _simplex_exact(res.x)
    w, kappa = _weighted_max(aux, h_rows, sigma_sq, p_t, lam, True)
    return w, lam, kappa


@dataclass(frozen=True)
class BeamformingResult:
    w: np.ndarray
    multipliers: MultiplierState
    y: float
    t_values: np.ndarray | None
    objective: float
    iterations: int
    converged: bool


def _budget_clip(w: np.ndarray, p_t: float) -> np.ndarray:
    power = float(np.sum(np.abs(w) ** 2))
    if power > p_t:
        return w * math.sqrt(p_t / power)
    return w


def solve_beamforming(aux: AuxiliaryState, h_rows: np.ndarray,
                      sigma_sq: np.ndarray, p_t: float, *,
                      warm_w: np.ndarray | None = None,
                      warm_mult: MultiplierState | None = None,
                      include_common: bool = True,
                      tol: float = 1e-6, max_iter: int = 200) -> BeamformingResult:
    """Beamforming subproblem solve by the multiplier fixed point.

    Each pass computes (T, y) at the current W, updates the multipliers,
    and recomputes W from them; iteration stops when the multipliers
    move less than `tol` or after `max_iter` passes. The update gain is
    halved whenever the worst common surrogate changes user (the sign
    that the pure multiplicative map is orbiting the fixed point) and
    recovers geometrically while the worst user stays put. On exit the
    power budget is enforced by rescaling if exceeded; exits that did
    not converge, or with three or more users (where the multiplicative
    map can stall on tied constraints), are polished by the exact dual
    solve, adopted together with its multipliers only when it improves
    the objective. If a truncated run still ends below the entry
    objective the entry W is returned instead (the updated multipliers
    are kept for warm starting).
    """
    k = h_rows.shape[0]
    mult = warm_mult if warm_mult is not None else initial_multipliers(k)
    if warm_w is not None:
        w_cur = _budget_clip(np.array(warm_w, dtype=complex), p_t)
    else:
        w_cur = _budget_clip(kkt_beamformers(aux, h_rows, mult, include_common), p_t)
    entry_w = w_cur
    entry_obj = block_objective(aux, entry_w, h_rows, sigma_sq, include_common)

    converged = False
    iterations = 0
    gain = 1.0
    prev_worst = None
    for iterations in range(1, max_iter + 1):
        if include_common:
            t_values = eval_t(aux, w_cur, h_rows, sigma_sq)
            _, worst = update_y(t_values)
            if prev_worst is not None:
                gain = max(gain / 2.0, 2.0 ** -12) if worst != prev_worst \
                    else min(1.0, gain * 1.25)
            prev_worst = worst
        else:
            t_values, worst = None, 0
        power = float(np.sum(np.abs(w_cur) ** 2))
        new_mult = update_multipliers(mult, t_values, worst, power, p_t, gain)
        delta = max(float(np.max(np.abs(new_mult.lam - mult.lam))),
                    abs(new_mult.kappa - mult.kappa))
        mult = new_mult
        w_cur = kkt_beamformers(aux, h_rows, mult, include_common)
        if delta < tol:
            converged = True
            break

    w_cur = _budget_clip(w_cur, p_t)
    objective = block_objective(aux, w_cur, h_rows, sigma_sq, include_common)

    # with three or more users the multiplicative map can settle on a
    # tied-constraint manifold away from the subproblem optimum (and any
    # truncated run can exit short of it), so polish those exits with the
    # exact dual solve and keep whichever beamformers score better
    if not converged or k >= 3:
        w_pol, lam_pol, kappa_pol = dual_polish(aux, h_rows, sigma_sq, p_t,
                                                mult.lam, include_common)
        w_pol = _budget_clip(w_pol, p_t)
        obj_pol = block_objective(aux, w_pol, h_rows, sigma_sq, include_common)
        if obj_pol > objective:
            w_cur, objective = w_pol, obj_pol
            mult = MultiplierState(lam=lam_pol, kappa=kappa_pol, rho=mult.rho)

    if objective < entry_obj:
        w_cur, objective = entry_w, entry_obj
    if include_common:
        t_values = eval_t(aux, w_cur, h_rows, sigma_sq)
        y, _ = update_y(t_values)
    else:
        t_values, y = None, 0.0
    return BeamformingResult(w=w_cur, multipliers=mult, y=y, t_values=t_values,
                             objective=objective, iterations=iterations,
                             converged=converged)
