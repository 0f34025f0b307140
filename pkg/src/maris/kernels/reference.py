"""Pure-NumPy kernels for the position-dependent surrogate evaluations.

These are the hot inner-loop primitives of the antenna position block:
rebuilding the composite rows h_k^H(x) from the ray decomposition, the
surrogate values Psi_k(x) and T_k(x), the gradient of sum_k Psi_k, and
the Jacobian of the T_k, all with respect to the positions. The
compiled extension implements the same signatures; either backend may
be selected at import.
"""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)


def channel_rows(x: np.ndarray, freqs: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Composite rows h_k^H at positions x from the ray decomposition, (K, M)."""
    phases = np.exp(1j * (freqs[:, None, :] * x[None, :, None]))  # (K, M, P)
    return np.einsum("kp,kmp->km", coeffs, phases)


def ma_eval(x: np.ndarray, freqs: np.ndarray, coeffs: np.ndarray,
            w: np.ndarray, mu: np.ndarray, eps: np.ndarray,
            gamma: np.ndarray, v: np.ndarray, sigma_sq: np.ndarray,
            want_grad: bool = True):
    """Surrogate values and position derivatives at x.

    Returns (psi, t, grad, grad_t): per-user Psi_k(x) and T_k(x) in
    bits, the gradient of sum_k Psi_k(x), and the (K, M) Jacobian of
    the T_k(x), all at fixed (W, phases, auxiliaries). The derivatives
    are None when want_grad is False.
    """
    k = freqs.shape[0]
    phases = np.exp(1j * (freqs[:, None, :] * x[None, :, None]))  # (K, M, P)
    e = np.einsum("kp,kmp->km", coeffs, phases)                   # (K, M) rows h_k^H
    gains = e @ w                                                 # (K, K+1)
    own = np.diag(gains[:, :k]).copy()
    p_quad = (np.abs(gains[:, :k]) ** 2).sum(axis=1)
    sqrt_mu = np.sqrt(1.0 + mu)
    psi = (np.log2(1.0 + mu)
           + (-mu
              + 2.0 * sqrt_mu * np.real(np.conj(eps) * own)
              - np.abs(eps) ** 2 * (p_quad + sigma_sq)) / LN2)

    c_gain = gains[:, k]
    sqrt_ga = np.sqrt(1.0 + gamma)
    t = (np.log2(1.0 + gamma)
         + (-gamma
            + 2.0 * sqrt_ga * np.real(np.conj(v) * c_gain)
            - np.abs(v) ** 2 * (p_quad + np.abs(c_gain) ** 2 + sigma_sq)) / LN2)

    grad = None
    grad_t = None
    if want_grad:
        edot = np.einsum("kp,kmp->km", coeffs * (1j * freqs), phases)  # (K, M)
        # q[k, m] = sum_{i<K} w[m, i] conj(gains[k, i])
        q = (w[:, :k] @ np.conj(gains[:, :k]).T).T                     # (K, M)
        w_own = w[:, :k].T                                             # (K, M), row k is w_k
        lin = sqrt_mu[:, None] * np.real(np.conj(eps)[:, None] * edot * w_own)
        quad = (np.abs(eps) ** 2)[:, None] * np.real(edot * q)
        grad = (2.0 / LN2) * (lin - quad).sum(axis=0)

        w_c = w[:, k]
        lin_t = sqrt_ga[:, None] * np.real(np.conj(v)[:, None] * edot * w_c[None, :])
        q_c = q + w_c[None, :] * np.conj(c_gain)[:, None]
        quad_t = (np.abs(v) ** 2)[:, None] * np.real(edot * q_c)
        grad_t = (2.0 / LN2) * (lin_t - quad_t)
    return psi, t, grad, grad_t
