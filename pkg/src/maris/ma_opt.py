"""Antenna position block: projected gradient ascent with step halving.

At fixed beamformers, phases, and auxiliaries the composite row of user
k is a finite sum of position-phase rays, so the surrogates and their
gradient are cheap to evaluate (see maris.kernels). The block ascends

    F(x) = sum_k Psi_k(x) + max(min_k T_k(x), 0)

(just sum_k Psi_k without a common stream): the common level is a free
variable of the master problem, so its partial maximum min_k T_k moves
with x rather than acting as a frozen floor, which would pin x at its
start whenever the level is tight there. The positive part reflects
that only a non-negative level is ever committed; once the surrogate
level falls to zero the common term is flat in x and the positions
stop chasing a stream that carries nothing. Each trial point is the
Euclidean projection of a full supergradient step onto the ordered
layout polytope (box plus minimum spacing), so boundary-active
components slide along the constraints instead of vetoing the whole
move; the step is halved from the same base point until the projected
move clears the sufficient-increase level (c1 / alpha) * |x_new - x|^2
(plain backtracking accepts near-worthless overshoots, which trips the
small-change stop long before stationarity). Every accepted step
searches afresh from the initial step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import chain_projection, geometry_feasible
from .fp_core import AuxiliaryState


@dataclass(frozen=True)
class MAOptOptions:
    alpha0: float | None = None    # initial step, meters; default 0.25 wavelength
    eps: float = 1e-6              # objective-change stopping threshold, bits
    l_max: int = 200
    fd_step: float | None = None   # finite-difference verification step, meters
    min_step: float = 1e-15
    c1: float = 1e-4               # sufficient-increase fraction of alpha*|grad|^2


@dataclass(frozen=True)
class MAResult:
    x: np.ndarray
    psi_trace: list              # accepted objective values, first entry at x0
    iterations: int
    converged: bool
    stalled: bool


def surrogate_values(x: np.ndarray, rays: tuple[np.ndarray, np.ndarray],
                     w: np.ndarray, aux: AuxiliaryState,
                     sigma_sq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Psi_k(x), T_k(x)) at positions x, in bits."""
    freqs, coeffs = rays
    psi, t, _, _ = kernels.ma_eval(x, freqs, coeffs, w, aux.mu, aux.eps,
                                   aux.gamma, aux.v,
                                   np.asarray(sigma_sq, dtype=float), False)
    return psi, t


def grad_positions(x: np.ndarray, rays: tuple[np.ndarray, np.ndarray],
                   w: np.ndarray, aux: AuxiliaryState,
                   sigma_sq: np.ndarray) -> np.ndarray:
    """Gradient of sum_k Psi_k with respect to the antenna positions."""
    freqs, coeffs = rays
    _, _, grad, _ = kernels.ma_eval(x, freqs, coeffs, w, aux.mu, aux.eps,
                                    aux.gamma, aux.v,
                                    np.asarray(sigma_sq, dtype=float), True)
    return grad


def feasible(x: np.ndarray, x_min: float, x_max: float, d_min: float,
             t_values: np.ndarray | None = None,
             y: float | None = None) -> bool:
    """Closed feasibility test: box, pairwise spacing, and T_k(x) >= y."""
    if not geometry_feasible(x, x_min, x_max, d_min):
        return False
    if t_values is not None and y is not None and t_values.size:
        return bool(np.min(t_values) >= y)
    return True


def optimize_positions(x0: np.ndarray, rays: tuple[np.ndarray, np.ndarray],
                       w: np.ndarray, aux: AuxiliaryState,
                       sigma_sq: np.ndarray,
                       x_min: float, x_max: float, d_min: float,
                       wavelength: float,
                       opts: MAOptOptions = MAOptOptions(),
                       include_common: bool = True) -> MAResult:
    """Projected gradient ascent on the position surrogate.

    The start must be an ascending layout satisfying the box and
    spacing constraints; every trial point is projected back onto that
    polytope. Accepted iterates never decrease F = sum_k Psi_k (+ the
    clamped common level max(min_k T_k, 0) with a common stream); the
    run stops when an accepted step changes it by at most opts.eps,
    after opts.l_max accepted steps, or with the stalled flag when the
    step size underflows without an acceptable trial point.
    """
    freqs, coeffs = rays
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    x = np.array(x0, dtype=float)
    alpha = opts.alpha0 if opts.alpha0 is not None else 0.25 * wavelength

    def objective(psi_k: np.ndarray, t_k: np.ndarray) -> float:
        value = float(psi_k.sum())
        if include_common:
            value += max(float(t_k.min()), 0.0)
        return value

    def direction(grad_psi: np.ndarray, t_k: np.ndarray,
                  grad_t: np.ndarray) -> np.ndarray:
        if include_common and float(t_k.min()) > 0.0:
            # supergradient of F: the min picks the worst user's row
            return grad_psi + grad_t[int(np.argmin(t_k))]
        return grad_psi

    ascending = x.size < 2 or bool(np.min(np.diff(x)) >= d_min)
    if not (ascending and geometry_feasible(x, x_min, x_max, d_min)):
        raise ValueError(
            "optimize_positions requires an ascending feasible starting layout")
    psi_k, t_k, grad_psi, grad_t = kernels.ma_eval(x, freqs, coeffs, w,
                                                   aux.mu, aux.eps, aux.gamma,
                                                   aux.v, sigma_sq, True)
    grad = direction(grad_psi, t_k, grad_t)
    f_cur = objective(psi_k, t_k)
    trace = [f_cur]

    def trial(a: float) -> tuple[np.ndarray, float, bool]:
        candidate = chain_projection(x + a * grad, x_min, x_max, d_min)
        step = candidate - x
        psi_c, t_c, _, _ = kernels.ma_eval(candidate, freqs, coeffs, w,
                                           aux.mu, aux.eps, aux.gamma,
                                           aux.v, sigma_sq, False)
        value = objective(psi_c, t_c)
        return candidate, value, value >= f_cur + opts.c1 * float(step @ step) / a

    converged = False
    stalled = False
    accepted = 0
    alpha0 = alpha
    while accepted < opts.l_max:
        x_try = None
        f_try = None
        # two-way search from the carried step: halve until a step passes,
        # then expand while doubling keeps passing and improving, so a
        # tight-valley crawl does not strand later iterations at tiny steps
        alpha = min(alpha, alpha0)
        while alpha >= opts.min_step:
            candidate, value, ok = trial(alpha)
            if ok:
                x_try, f_try = candidate, value
                while alpha < alpha0:
                    a2 = min(2.0 * alpha, alpha0)
                    cand2, val2, ok2 = trial(a2)
                    if ok2 and val2 > f_try:
                        x_try, f_try, alpha = cand2, val2, a2
                    else:
                        break
                break
            alpha *= 0.5
        if x_try is None:
            stalled = True
            break
        delta = f_try - f_cur
        x, f_cur = x_try, f_try
        accepted += 1
        trace.append(f_cur)
        if abs(delta) <= opts.eps:
            converged = True
            break
        psi_k, t_k, grad_psi, grad_t = kernels.ma_eval(x, freqs, coeffs, w,
                                                       aux.mu, aux.eps,
                                                       aux.gamma, aux.v,
                                                       sigma_sq, True)
        grad = direction(grad_psi, t_k, grad_t)

    return MAResult(x=x, psi_trace=trace, iterations=accepted,
                    converged=converged, stalled=stalled)
