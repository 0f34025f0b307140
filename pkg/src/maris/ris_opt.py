"""Reflection phase block: quadratic forms, MM updates, dual ascent.

At fixed beamformers and auxiliaries, the surrogate objective and the
common-rate constraints are quadratics in the phase vector:

    sum_k Psi_k(phi) = -phi^H M1 phi + Re{phi^H (M2 - 2 M3)} + c0
    T_k(phi)         = -phi^H N1_k phi + Re{phi^H (N2_k - N3_k)} + d_k

The per-user constraints sum_j r_cj <= T_k(phi) enter a Lagrangian with
multipliers xi >= 0, minimized over unit-modulus phi by
majorize-minimize steps (the quadratic is majorized at the largest
eigenvalue, leaving a linear form with an elementwise closed-form
minimizer) and maximized over xi by projected subgradient ascent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fp_core import AuxiliaryState, eval_psi, eval_t

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QuadraticForms:
    """Phase-quadratic data of the surrogates, in bits."""

    m1: np.ndarray   # (N, N) Hermitian PSD
    m2: np.ndarray   # (N,)
    m3: np.ndarray   # (N,)
    n1: np.ndarray   # (Kc, N, N) Hermitian PSD
    n2: np.ndarray   # (Kc, N)
    n3: np.ndarray   # (Kc, N)
    d: np.ndarray    # (Kc,)
    c0: float

    def psi_total(self, phi: np.ndarray) -> float:
        """sum_k Psi_k at phases phi."""
        ph = np.conj(phi)
        quad = float(np.real(ph @ self.m1 @ phi))
        lin = float(np.real(ph @ (self.m2 - 2.0 * self.m3)))
        return -quad + lin + self.c0

    def t_values(self, phi: np.ndarray) -> np.ndarray:
        """All T_k at phases phi, (Kc,)."""
        if self.n1.shape[0] == 0:
            return np.zeros(0)
        quad = np.real(np.einsum("i,kij,j->k", np.conj(phi), self.n1, phi))
        lin = np.real((self.n2 - self.n3) @ np.conj(phi))
        return -quad + lin + self.d


@dataclass(frozen=True)
class DualState:
    xi: np.ndarray   # (Kc,) non-negative constraint multipliers
    tau: float       # last step size used


def build_quadratic_forms(aux: AuxiliaryState, w: np.ndarray,
                          u_mats: np.ndarray, u_rows: np.ndarray,
                          sigma_sq: np.ndarray,
                          include_common: bool = True) -> QuadraticForms:
    """Expand the surrogates at fixed (W, aux) into phase quadratics.

    u_mats are the reflected factors U_k, u_rows the direct rows u_k^H;
    the phase-free constants c0 and d_k are the surrogates evaluated on
    the direct rows alone.
    """
    k, n, m = u_mats.shape
    w_p = w[:, :k]
    s_mat = w_p @ w_p.conj().T                       # (M, M)
    u_cols = np.conj(u_rows)                         # (K, M), columns u_k

    abs_eps2 = np.abs(aux.eps) ** 2
    us = u_mats @ s_mat                              # (K, N, M)
    m1 = np.einsum("k,knm,kjm->nj", abs_eps2, us, np.conj(u_mats)) / LN2
    m1 = 0.5 * (m1 + m1.conj().T)
    m2 = (2.0 * np.sqrt(1.0 + aux.mu) * np.conj(aux.eps))[:, None] \
        * np.einsum("knm,mk->kn", u_mats, w_p)
    m2 = m2.sum(axis=0) / LN2
    m3 = abs_eps2[:, None] * np.einsum("knm,km->kn", us, u_cols)
    m3 = m3.sum(axis=0) / LN2
    c0 = float(eval_psi(aux, w, u_rows, sigma_sq).sum())

    if include_common:
        w_c = w[:, k]
        sc_mat = s_mat + np.outer(w_c, np.conj(w_c))
        usc = u_mats @ sc_mat
        abs_v2 = np.abs(aux.v) ** 2
        n1 = abs_v2[:, None, None] * np.einsum("knm,kjm->knj", usc, np.conj(u_mats)) / LN2
        n1 = 0.5 * (n1 + np.conj(np.swapaxes(n1, 1, 2)))
        n2 = (2.0 * np.sqrt(1.0 + aux.gamma) * np.conj(aux.v))[:, None] \
            * (u_mats @ w_c) / LN2
        n3 = (2.0 * abs_v2)[:, None] * np.einsum("knm,km->kn", usc, u_cols) / LN2
        d = eval_t(aux, w, u_rows, sigma_sq)
    else:
        n1 = np.zeros((0, n, n), dtype=complex)
        n2 = np.zeros((0, n), dtype=complex)
        n3 = np.zeros((0, n), dtype=complex)
        d = np.zeros(0)
    return QuadraticForms(m1=m1, m2=m2, m3=m3, n1=n1, n2=n2, n3=n3, d=d, c0=c0)


def lagrangian(forms: QuadraticForms, phi: np.ndarray, xi: np.ndarray,
               rc_sum: float) -> float:
    """Dual function integrand: minimized over phi, ascended over xi."""
    ph = np.conj(phi)
    value = float(np.real(ph @ forms.m1 @ phi))
    value -= float(np.real(ph @ (forms.m2 - 2.0 * forms.m3)))
    if xi.size:
        t_vals = forms.t_values(phi)
        value += float(np.dot(xi, rc_sum - t_vals))
    return value


def _unit_modulus(values: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Elementwise values/|values| with exact unit modulus; zeros keep fallback."""
    mags = np.abs(values)
    zero = mags == 0.0
    out = np.where(zero, fallback, values / np.where(zero, 1.0, mags))
    for _ in range(4):
        mags = np.abs(out)
        off = mags != 1.0
        if not off.any():
            break
        out = np.where(off, out / np.where(off, mags, 1.0), out)
    return out


def mm_phase_update(forms: QuadraticForms, xi: np.ndarray,
                    phi_prev: np.ndarray) -> np.ndarray:
    """One majorize-minimize step of the Lagrangian at fixed xi.

    The quadratic phi^H Q phi is bounded by its largest eigenvalue
    (unit-modulus phi has fixed norm), leaving Re{phi^H h} with
    h = 2 (Q - lambda_max I) phi_prev - c; the minimizer is
    phi_i = -h_i / |h_i|, keeping the previous phase where h_i = 0.
    """
    q = forms.m1.copy()
    if xi.size:
        q = q + np.einsum("k,kij->ij", xi, forms.n1)
    q = 0.5 * (q + q.conj().T)
    lam_max = float(np.linalg.eigvalsh(q)[-1])
    c = forms.m2 - 2.0 * forms.m3
    if xi.size:
        c = c + xi @ (forms.n2 - forms.n3)
    h = 2.0 * (q @ phi_prev - lam_max * phi_prev) - c
    return _unit_modulus(-h, phi_prev)


@dataclass(frozen=True)
class RISResult:
    phi: np.ndarray
    dual: DualState
    iterations: int
    converged: bool
    objective: float      # sum_k Psi_k at the returned phases
    violation: float      # max common-rate constraint violation at return


def dual_ascent_ris(forms: QuadraticForms, r_c: np.ndarray,
                    phi0: np.ndarray, xi0: np.ndarray | None = None, *,
                    tau: float = 0.01, tol_phase: float = 1e-5,
                    tol_violation: float = 1e-4,
                    max_iter: int = 500) -> RISResult:
    """Alternate MM phase updates with projected dual ascent on xi.

    Stops when the phases move less than tol_phase and every constraint
    is violated by less than tol_violation. The step size diminishes
    once the violation stops improving for 20 consecutive steps. The
    returned phases are the best recorded iterate: the highest surrogate
    sum among iterates within the violation tolerance (the entry point
    included), or the least-violating iterate if none qualifies.
    """
    kc = forms.n1.shape[0]
    phi = np.asarray(phi0, dtype=complex)
    xi = np.zeros(kc) if xi0 is None else np.asarray(xi0, dtype=float).copy()
    rc_sum = float(np.sum(r_c))

    def violation_of(p: np.ndarray) -> float:
        if kc == 0:
            return 0.0
        return float(np.max(np.maximum(rc_sum - forms.t_values(p), 0.0)))

    best_phi = phi
    best_obj = forms.psi_total(phi)
    best_viol = violation_of(phi)
    min_viol = best_viol
    since_improve = 0
    trigger = None

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        step = tau if trigger is None else tau / math.sqrt(1.0 + (iterations - trigger))
        phi_new = mm_phase_update(forms, xi, phi)
        if kc:
            g = rc_sum - forms.t_values(phi_new)
            xi = np.maximum(0.0, xi + step * g)
            viol = float(np.max(np.maximum(g, 0.0)))
        else:
            viol = 0.0
        dphi = float(np.max(np.abs(phi_new - phi)))
        phi = phi_new

        obj = forms.psi_total(phi)
        if viol <= tol_violation:
            if best_viol > tol_violation or obj > best_obj:
                best_phi, best_obj, best_viol = phi, obj, viol
        elif best_viol > tol_violation and viol < best_viol:
            best_phi, best_obj, best_viol = phi, obj, viol

        if viol < min_viol - 1e-12:
            min_viol = viol
            since_improve = 0
        else:
            since_improve += 1
            if trigger is None and since_improve >= 20:
                trigger = iterations

        if dphi < tol_phase and viol < tol_violation:
            converged = True
            break

    last_step = tau if trigger is None else tau / math.sqrt(1.0 + max(0, iterations - trigger))
    return RISResult(phi=best_phi, dual=DualState(xi=xi, tau=last_step),
                     iterations=iterations, converged=converged,
                     objective=best_obj, violation=best_viol)
