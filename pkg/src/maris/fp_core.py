"""Fractional-programming surrogates of the rate expressions.

Each private rate R_k and common rate R_ck is lower-bounded by a
quadratic surrogate (Psi_k, T_k) built from auxiliary variables
(mu_k, eps_k) and (gamma_k, v_k). With the auxiliaries refreshed by
update_aux the bounds are tight: Psi_k = R_k and T_k = R_ck. For any
auxiliaries they remain lower bounds, which is what makes the block
updates ascend the true objective.

All surrogate values are expressed in bits (the natural-log expressions
scaled by 1/ln 2) so they compare directly to the base-2 rates. The
auxiliary updates themselves are unit-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class AuxiliaryState:
    """Fractional-programming auxiliaries; y is the common-rate surrogate level."""

    mu: np.ndarray      # (K,) private SINR auxiliaries
    eps: np.ndarray     # (K,) complex private quadratic-transform auxiliaries
    gamma: np.ndarray   # (K,) common SINR auxiliaries
    v: np.ndarray       # (K,) complex common quadratic-transform auxiliaries
    y: float = 0.0

    def with_y(self, y: float) -> "AuxiliaryState":
        return replace(self, y=y)


def update_aux(w: np.ndarray, h_rows: np.ndarray, sigma_sq: np.ndarray,
               include_common: bool = True) -> AuxiliaryState:
    """Closed-form surrogate-tightening auxiliaries at the current (W, h).

    mu_k and gamma_k are the private and common SINRs; eps_k and v_k are
    the quadratic-transform ratios. With include_common False (no common
    stream) gamma and v are zero and T_k degenerates to zero.
    """
    k = h_rows.shape[0]
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    gains = h_rows @ w                       # (K, K+1)
    own_gain = np.diag(gains[:, :k]).copy()
    p_gains = np.abs(gains[:, :k]) ** 2
    own = np.abs(own_gain) ** 2
    denom_all = p_gains.sum(axis=1) + sigma_sq          # all privates + noise
    mu = own / (denom_all - own)
    eps = np.sqrt(1.0 + mu) * own_gain / denom_all
    if include_common:
        c_gain = gains[:, k]
        c_pow = np.abs(c_gain) ** 2
        gamma = c_pow / denom_all
        v = np.sqrt(1.0 + gamma) * c_gain / (denom_all + c_pow)
    else:
        gamma = np.zeros(k)
        v = np.zeros(k, dtype=complex)
    return AuxiliaryState(mu=mu, eps=eps, gamma=gamma, v=v)


def eval_psi_parts(aux: AuxiliaryState, w: np.ndarray, h_rows: np.ndarray,
                   sigma_sq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The linear and quadratic surrogate parts (Psi_{k,1}, Psi_{k,2}), in bits.

    Psi_k = log2(1 + mu_k) - mu_k / ln2 + Psi_{k,1} - Psi_{k,2}. The split is
    what the position gradient differentiates.
    """
    k = h_rows.shape[0]
    gains = h_rows @ w
    own = np.diag(gains[:, :k])
    psi1 = 2.0 * np.sqrt(1.0 + aux.mu) * np.real(np.conj(aux.eps) * own) / LN2
    quad = np.abs(gains[:, :k]) ** 2
    psi2 = np.abs(aux.eps) ** 2 * (quad.sum(axis=1) + np.asarray(sigma_sq, dtype=float)) / LN2
    return psi1, psi2


def eval_psi(aux: AuxiliaryState, w: np.ndarray, h_rows: np.ndarray,
             sigma_sq: np.ndarray) -> np.ndarray:
    """Private-rate surrogates Psi_k, in bits."""
    psi1, psi2 = eval_psi_parts(aux, w, h_rows, sigma_sq)
    return np.log2(1.0 + aux.mu) - aux.mu / LN2 + psi1 - psi2


def eval_t(aux: AuxiliaryState, w: np.ndarray, h_rows: np.ndarray,
           sigma_sq: np.ndarray) -> np.ndarray:
    """Common-rate surrogates T_k, in bits."""
    k = h_rows.shape[0]
    gains = h_rows @ w
    c_gain = gains[:, k]
    denom = (np.abs(gains) ** 2).sum(axis=1) + np.asarray(sigma_sq, dtype=float)
    lin = 2.0 * np.sqrt(1.0 + aux.gamma) * np.real(np.conj(aux.v) * c_gain)
    quad = np.abs(aux.v) ** 2 * denom
    return np.log2(1.0 + aux.gamma) + (-aux.gamma + lin - quad) / LN2
