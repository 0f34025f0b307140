"""Independent reference implementations used as test oracles.

Everything here is written from the problem definitions with plain
scalar/loop arithmetic, deliberately sharing no vectorized helper with
the package: agreement between the two is then evidence, not tautology.
The beamforming oracle pairs a literal projected-supergradient ascent
(a lower bound from a feasible iterate) with an exact dual bound built
from closed-form trust-region solves (an upper bound); the sandwich
certifies the oracle value itself, not just the candidate under test.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq, minimize

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# rates, written as per-user scalar loops


def independent_rates(h_rows: np.ndarray, w: np.ndarray, sigma_sq) -> tuple[np.ndarray, np.ndarray]:
    """(private, common) rates in bits, one user at a time, scalar math."""
    k, m = h_rows.shape
    sigma_sq = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (k,))
    r_p = np.empty(k)
    r_c = np.empty(k)
    for j in range(k):
        own = 0.0 + 0.0j
        for a in range(m):
            own += h_rows[j, a] * w[a, j]
        interference = 0.0
        for i in range(k):
            if i == j:
                continue
            g = 0.0 + 0.0j
            for a in range(m):
                g += h_rows[j, a] * w[a, i]
            interference += abs(g) ** 2
        r_p[j] = math.log2(1.0 + abs(own) ** 2 / (interference + sigma_sq[j]))
        gc = 0.0 + 0.0j
        for a in range(m):
            gc += h_rows[j, a] * w[a, k]
        denom = interference + abs(own) ** 2 + sigma_sq[j]
        r_c[j] = math.log2(1.0 + abs(gc) ** 2 / denom)
    return r_p, r_c


# ---------------------------------------------------------------------------
# surrogate values, written per user from the scalar formulas


def independent_surrogates(mu, eps, gamma, v, h_rows, w, sigma_sq
                           ) -> tuple[np.ndarray, np.ndarray]:
    """(psi, t) per user in bits from the quadratic-transform expressions."""
    k = h_rows.shape[0]
    sigma_sq = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (k,))
    psi = np.empty(k)
    t = np.empty(k)
    for j in range(k):
        gains = [complex(h_rows[j] @ w[:, i]) for i in range(k + 1)]
        quad_p = sum(abs(g) ** 2 for g in gains[:k])
        psi[j] = (math.log2(1.0 + mu[j])
                  + (-mu[j]
                     + 2.0 * math.sqrt(1.0 + mu[j]) * (np.conj(eps[j]) * gains[j]).real
                     - abs(eps[j]) ** 2 * (quad_p + sigma_sq[j])) / LN2)
        t[j] = (math.log2(1.0 + gamma[j])
                + (-gamma[j]
                   + 2.0 * math.sqrt(1.0 + gamma[j]) * (np.conj(v[j]) * gains[k]).real
                   - abs(v[j]) ** 2 * (quad_p + abs(gains[k]) ** 2 + sigma_sq[j])) / LN2)
    return psi, t


def surrogate_objective(mu, eps, gamma, v, h_rows, w, sigma_sq,
                        include_common: bool = True) -> float:
    """sum_k psi_k (+ min_k t_k), the beamforming-block objective."""
    psi, t = independent_surrogates(mu, eps, gamma, v, h_rows, w, sigma_sq)
    value = float(psi.sum())
    if include_common:
        value += float(t.min())
    return value


# ---------------------------------------------------------------------------
# finite differences


def central_difference(f, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a real vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (f(hi) - f(lo)) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# beamforming-block oracle: exact dual bound + projected supergradient

def _column_quadratics(mu, eps, gamma, v, h_rows, sigma_sq, lam):
    """Per-column quadratic data of sum_k psi_k + sum_k lam_k t_k.

    The weighted objective is, column by column, 2 Re(b^H w) - w^H A w
    plus a constant; private columns share one A, the common column has
    its own. Returns (a_p, b_p, a_c, b_c, const).
    """
    k, m = h_rows.shape
    sigma_sq = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (k,))
    h_cols = h_rows.conj().T
    d_p = np.abs(eps) ** 2 + lam * np.abs(v) ** 2
    a_p = (h_cols * d_p[None, :]) @ h_rows / LN2
    b_p = h_cols * (np.sqrt(1.0 + mu) * eps)[None, :] / LN2       # column i is b_i
    d_c = lam * np.abs(v) ** 2
    a_c = (h_cols * d_c[None, :]) @ h_rows / LN2
    b_c = h_cols @ (lam * np.sqrt(1.0 + gamma) * v) / LN2
    const = float(np.sum(np.log2(1.0 + mu) - (mu + np.abs(eps) ** 2 * sigma_sq) / LN2))
    const += float(np.sum(lam * (np.log2(1.0 + gamma)
                                 - (gamma + np.abs(v) ** 2 * sigma_sq) / LN2)))
    return a_p, b_p, a_c, b_c, const


def weighted_block_max(mu, eps, gamma, v, h_rows, sigma_sq, p_t, lam
                       ) -> tuple[float, np.ndarray]:
    """Exact max of sum psi + sum lam_k t_k over the power ball.

    Column by column the objective is 2 Re(b^H w) - w^H A w, so in the
    eigenbasis of A the stationary point at power multiplier kappa has
    coordinates beta / (eig + kappa) and the total power is a strictly
    decreasing function of kappa: either the kappa -> 0 solution fits
    the budget or the root is bracketed and solved to machine accuracy.
    A floor of 1e-14 on kappa regularizes exactly rank-deficient A
    (where b lies in the range of A, so the value error is O(kappa)).

    Returns (value, t_at_max); the t values are the weighted objective's
    gradient in lam (Danskin), used to descend the dual.
    """
    k, m = h_rows.shape
    a_p, b_p, a_c, b_c, const = _column_quadratics(mu, eps, gamma, v, h_rows, sigma_sq, lam)
    ev_p, u_p = np.linalg.eigh(a_p)
    ev_c, u_c = np.linalg.eigh(a_c)
    ev_p = np.maximum(ev_p, 0.0)
    ev_c = np.maximum(ev_c, 0.0)
    betas = [u_p.conj().T @ b_p[:, i] for i in range(k)]
    beta_c = u_c.conj().T @ b_c

    def power(kappa: float) -> float:
        total = sum(float(np.sum(np.abs(beta) ** 2 / (ev_p + kappa) ** 2))
                    for beta in betas)
        return total + float(np.sum(np.abs(beta_c) ** 2 / (ev_c + kappa) ** 2))

    kappa = 1e-14
    if power(kappa) > p_t:
        hi = 1.0
        while power(hi) > p_t:
            hi *= 2.0
        kappa = brentq(lambda ka: power(ka) - p_t, 1e-14, hi, xtol=1e-16, rtol=1e-15)

    value = const
    w = np.zeros((m, k + 1), dtype=complex)
    for i in range(k):
        c = betas[i] / (ev_p + kappa)
        w[:, i] = u_p @ c
        value += float(2.0 * np.real(np.vdot(c, betas[i])) - np.sum(ev_p * np.abs(c) ** 2))
    c = beta_c / (ev_c + kappa)
    w[:, k] = u_c @ c
    value += float(2.0 * np.real(np.vdot(c, beta_c)) - np.sum(ev_c * np.abs(c) ** 2))
    _, t_vals = independent_surrogates(mu, eps, gamma, v, h_rows, w, sigma_sq)
    return value, t_vals


def dual_bound_beamforming(mu, eps, gamma, v, h_rows, sigma_sq, p_t
                           ) -> tuple[float, np.ndarray]:
    """Certified upper bound on max_W [sum psi + min_k t] over the ball.

    min over the simplex of the weighted maxima; the minimax equality
    holds because the weighted objective is concave in W and affine in
    the weights over compact sets. Solved by SLSQP with the Danskin
    gradient; any simplex point already yields a valid upper bound, so
    the returned value is safe even if the minimizer is slightly off.
    """
    k = h_rows.shape[0]
    if k == 1:
        lam = np.ones(1)
        value, _ = weighted_block_max(mu, eps, gamma, v, h_rows, sigma_sq, p_t, lam)
        return value, lam

    def g(lam):
        value, _ = weighted_block_max(mu, eps, gamma, v, h_rows, sigma_sq, p_t, lam)
        return value

    def jac(lam):
        _, t_vals = weighted_block_max(mu, eps, gamma, v, h_rows, sigma_sq, p_t, lam)
        return t_vals

    lam0 = np.full(k, 1.0 / k)
    res = minimize(g, lam0, jac=jac, method="SLSQP",
                   bounds=[(0.0, 1.0)] * k,
                   constraints=[{"type": "eq", "fun": lambda la: la.sum() - 1.0,
                                 "jac": lambda la: np.ones(k)}],
                   options={"maxiter": 300, "ftol": 1e-14})
    lam = np.clip(res.x, 0.0, None)
    lam = lam / lam.sum()
    return g(lam), lam


def pg_beamforming(mu, eps, gamma, v, h_rows, sigma_sq, p_t,
                   f_target: float, iters: int = 3000) -> tuple[float, np.ndarray]:
    """Projected supergradient ascent on sum psi + min_k t over the ball.

    Polyak steps toward f_target (a valid upper bound on the optimum)
    make the ascent converge to within the bound's slack; the best
    iterate is returned. Starts from scaled matched filters.
    """
    k, m = h_rows.shape
    sigma_vec = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (k,))
    h_cols = h_rows.conj().T
    w = np.zeros((m, k + 1), dtype=complex)
    for i in range(k):
        col = h_cols[:, i]
        w[:, i] = col / max(np.linalg.norm(col), 1e-300)
    w[:, k] = h_cols.sum(axis=1) / max(np.linalg.norm(h_cols.sum(axis=1)), 1e-300)
    w *= math.sqrt(p_t / (k + 1))

    sqrt_mu = np.sqrt(1.0 + mu)
    sqrt_ga = np.sqrt(1.0 + gamma)
    abs_eps2 = np.abs(eps) ** 2
    abs_v2 = np.abs(v) ** 2

    def value_of(wm):
        return surrogate_objective(mu, eps, gamma, v, h_rows, wm, sigma_vec, True)

    best_w = w.copy()
    best = value_of(w)
    for _ in range(iters):
        gains = h_rows @ w
        grad = np.zeros_like(w)
        # sum psi: linear parts on own columns, shared quadratic on privates
        grad[:, :k] -= (h_cols * abs_eps2[None, :]) @ gains[:, :k]
        grad[:, :k] += h_cols * (sqrt_mu * eps)[None, :]
        # worst t: linear on the common column, quadratic on everything
        _, t_vals = independent_surrogates(mu, eps, gamma, v, h_rows, w, sigma_vec)
        j = int(np.argmin(t_vals))
        hj = h_cols[:, j]
        grad[:, :k] -= abs_v2[j] * np.outer(hj, gains[j, :k])
        grad[:, k] += sqrt_ga[j] * v[j] * hj - abs_v2[j] * gains[j, k] * hj
        grad /= LN2

        cur = value_of(w)
        gnorm2 = float(np.sum(np.abs(grad) ** 2))
        if gnorm2 <= 1e-30:
            break
        alpha = max(f_target - cur, 1e-12) / gnorm2
        w = w + alpha * grad
        power = float(np.sum(np.abs(w) ** 2))
        if power > p_t:
            w *= math.sqrt(p_t / power)
        cur = value_of(w)
        if cur > best:
            best = cur
            best_w = w.copy()
    return best, best_w


# ---------------------------------------------------------------------------
# exhaustive phase grid


def phase_grid(n: int, levels: int) -> np.ndarray:
    """All levels^n uniformly quantized unit-modulus vectors, (levels^n, n)."""
    angles = 2.0 * math.pi * np.arange(levels) / levels
    alphabet = np.exp(1j * angles)
    idx = np.indices([levels] * n).reshape(n, -1).T     # (levels^n, n)
    return alphabet[idx]
