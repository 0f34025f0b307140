"""Outer alternating optimization over beamformers, allocation, phases, positions.

One outer iteration, at the current geometry (x, phi):

    1. assemble the composite channel and scale each user row by
       1/sigma_k, so every block runs at unit noise (SINR-invariant),
    2. refresh the surrogate auxiliaries at the incumbent beamformers,
    3. solve the beamforming subproblem (multiplier fixed point, warm
       started from the previous outer iteration),
    4. re-allocate the common rate: even split of the worst user's
       common-stream rate,
    5. update the reflection phases by MM/dual ascent on the phase
       quadratics (dual variables carried across iterations),
    6. update the antenna positions by projected gradient ascent on the
       ray expansion of the surrogate sum plus the worst common
       surrogate (the common level is re-optimized along with x).

The loop stops when the physical sum rate changes by less than
eps_outer between iterations, or after r_max iterations. Inner blocks
that hit their iteration caps or stall are recorded in the trace, never
raised: each block only ever improves its own surrogate, so a truncated
inner solve still leaves a valid iterate.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from .beamformer import MultiplierState, initial_multipliers, solve_beamforming
from .channel import (ChannelRealization, assemble_channel,
                      equally_spaced_positions, normalize_channel,
                      ray_expansion)
from .config import SystemConfig
from .fp_core import eval_psi, eval_t, update_aux
from .ma_opt import MAOptOptions, optimize_positions
from .rates import (DecisionState, RateReport, allocate_common_rate,
                    common_rates, evaluate)
from .ris_opt import build_quadratic_forms, dual_ascent_ris

MODES = ("rsma", "sdma")
ANTENNAS = ("ma", "fpa")
SURFACES = ("optimized", "random", "absent")


@dataclasses.dataclass(frozen=True)
class SolveOptions:
    """Scheme selection and per-block tolerances of one solve."""

    mode: str = "rsma"          # "rsma" | "sdma" (no common stream)
    antenna: str = "ma"         # "ma" | "fpa" (positions frozen)
    ris: str = "optimized"      # "optimized" | "random" | "absent"
    r_max: int = 50
    eps_outer: float = 1e-3    # outer stop: |sum-rate change| in bits
    bf_tol: float = 1e-6
    bf_max_iter: int = 200
    bf_rounds: int = 200       # tighten-and-solve rounds inside the W block
    bf_round_tol: float = 1e-6  # W-block stop: |objective change| in bits
    bf_budget: int = 2000      # total multiplier iterations per W block
    ma_rounds: int = 50        # tighten-and-solve rounds inside the x block
    ma_round_tol: float = 1e-6  # x-block stop: |objective change| in bits
    ris_tau: float = 0.01
    ris_tol_phase: float = 1e-5
    ris_tol_violation: float = 1e-4
    ris_max_iter: int = 500
    ma: MAOptOptions = dataclasses.field(default_factory=MAOptOptions)
    phase_seed: int = 0        # draw seed for ris="random"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.antenna not in ANTENNAS:
            raise ValueError(f"antenna must be one of {ANTENNAS}, got {self.antenna!r}")
        if self.ris not in SURFACES:
            raise ValueError(f"ris must be one of {SURFACES}, got {self.ris!r}")
        if self.r_max < 1:
            raise ValueError("r_max must be at least 1")


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    """Physical-state snapshot after one outer iteration."""

    index: int
    sum_rate: float
    common_min: float     # worst-user common-stream rate, bits
    power: float
    max_violation: float
    bf_iterations: int
    bf_converged: bool
    ris_iterations: int
    ris_converged: bool
    ma_iterations: int
    ma_stalled: bool
    bf_ms: float
    ris_ms: float
    ma_ms: float


@dataclasses.dataclass(frozen=True)
class SolveResult:
    state: DecisionState
    report: RateReport
    trace: list
    multipliers: MultiplierState | None
    iterations: int
    converged: bool

    @property
    def sum_rate(self) -> float:
        return self.report.sum_rate


def _strip_surface(realization: ChannelRealization) -> ChannelRealization:
    """Zero the reflect links: the surface contributes nothing."""
    gone = np.zeros_like(realization.h_ris_user)
    gone.setflags(write=False)
    return dataclasses.replace(realization, h_ris_user=gone)


def initial_phases(n: int, options: SolveOptions) -> np.ndarray:
    """All-ones phases, or a frozen uniform draw for the random baseline."""
    if options.ris == "random":
        rng = np.random.default_rng(options.phase_seed)
        return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    return np.ones(n, dtype=complex)


def default_state(realization: ChannelRealization, config: SystemConfig,
                  options: SolveOptions) -> DecisionState:
    """Feasible starting point: uniform layout, regularized ZF, no allocation.

    Private beamformers take the regularized zero-forcing directions
    with MMSE loading K sigma^2 / P_T and an even power split — matched
    filters at low power, interference-nulling at high power, where a
    matched-filter start strands the fixed point in an
    interference-limited basin. With a common stream, half the budget
    goes to the common beam (pointed along the channel sum) and the
    privates split the rest: starting the shared beam strong keeps its
    auxiliaries alive long enough for the alternation to judge it on
    merit, and the detour through a briefly-dominant common beam lands
    the privates in better-separated configurations even when the
    stream itself is eventually priced out.
    """
    x = equally_spaced_positions(config)
    phi = initial_phases(realization.n, options)
    channel = assemble_channel(x, phi, realization)
    k = config.k
    private_budget = config.p_t / 2.0 if options.mode == "rsma" else config.p_t
    w = np.zeros((config.m, k + 1), dtype=complex)
    h = channel.h_rows                  # (K, M), row j is h_j^H
    loading = k * config.sigma_sq / config.p_t
    gram = h @ h.conj().T + loading * np.eye(k)
    cols = np.conj(h).T @ np.linalg.inv(gram)   # (M, K), column j serves user j
    for j in range(k):
        norm = float(np.linalg.norm(cols[:, j]))
        w[:, j] = np.sqrt(private_budget / k) * cols[:, j] / (norm if norm > 0.0 else 1.0)
    if options.mode == "rsma":
        h_sum = np.conj(h).sum(axis=0)
        norm = float(np.linalg.norm(h_sum))
        w[:, k] = np.sqrt(config.p_t / 2.0) * h_sum / (norm if norm > 0.0 else 1.0)
    return DecisionState(w=w, phi=phi, x=x, r_c=np.zeros(k))


def solve(realization: ChannelRealization, config: SystemConfig,
          options: SolveOptions = SolveOptions(),
          initial: DecisionState | None = None) -> SolveResult:
    """Run the alternating optimization to convergence on one scenario."""
    if options.ris == "absent":
        realization = _strip_surface(realization)
    include_common = options.mode == "rsma"
    k = config.k
    sigma_vec = np.full(k, config.sigma)
    unit_noise = np.ones(k)
    sigma_sq_vec = np.full(k, config.sigma_sq)

    state = initial if initial is not None else default_state(realization, config, options)
    mult: MultiplierState | None = None
    restarted = False
    xi = None
    trace: list[IterationRecord] = []
    prev_rate = None
    report = None
    converged = False
    iterations = 0

    for iterations in range(1, options.r_max + 1):
        channel = assemble_channel(state.x, state.phi, realization)
        norm = normalize_channel(channel, sigma_vec)

        t0 = time.perf_counter()

        # W block: alternate surrogate tightening with the multiplier fixed
        # point until the subproblem objective settles, so the beamformers
        # reach their own stationary point before the geometry moves. A
        # single tightening per outer pass smears transients (most visibly
        # the collapse of a useless common stream) across tens of outer
        # iterations and lets the geometry chase them.
        def settle(w0, mult0, with_common):
            w_cur, mult_cur = w0, mult0
            aux_cur = update_aux(w_cur, norm.h_rows, unit_noise, with_common)
            iters = 0
            settled = False
            obj_prev = None
            for _ in range(options.bf_rounds):
                if iters >= options.bf_budget:
                    break
                bf = solve_beamforming(aux_cur, norm.h_rows, unit_noise,
                                       config.p_t, warm_w=w_cur,
                                       warm_mult=mult_cur,
                                       include_common=with_common,
                                       tol=options.bf_tol,
                                       max_iter=min(options.bf_max_iter,
                                                    options.bf_budget - iters))
                w_cur = bf.w
                mult_cur = bf.multipliers
                iters += bf.iterations
                aux_cur = update_aux(w_cur, norm.h_rows, unit_noise, with_common)
                if obj_prev is not None and \
                        abs(bf.objective - obj_prev) < options.bf_round_tol:
                    settled = True
                    break
                obj_prev = bf.objective
            return w_cur, mult_cur, aux_cur, iters, settled

        w, mult, aux, bf_iters, bf_settled = settle(state.w, mult, include_common)
        # committed common level for the geometry blocks: at re-tightened
        # auxiliaries the common surrogate equals the common rate, so this
        # is the worst-user common rate the beamformers actually support
        if include_common:
            y_level = max(float(eval_t(aux, w, norm.h_rows, unit_noise).min()), 0.0)
        else:
            y_level = 0.0
        if include_common and not restarted and \
                float(np.vdot(w[:, k], w[:, k]).real) < 1e-8 * config.p_t:
            # once the alternation has priced the common stream out, the
            # collapse transient can leave the privates at a worse stationary
            # point than a from-scratch private-only solve, so compare against
            # one (the rate-splitting feasible set contains every private-only
            # solution) and keep the better; while the common beam is alive
            # the comparison would just cut short the trajectory that is
            # feeding it
            restarted = True
            w_alt = np.zeros_like(state.w)
            gram = norm.h_rows @ norm.h_rows.conj().T + (k / config.p_t) * np.eye(k)
            cols = norm.h_rows.conj().T @ np.linalg.inv(gram)
            scale = np.sqrt(config.p_t / k) / np.maximum(
                np.linalg.norm(cols, axis=0), 1e-300)
            w_alt[:, :k] = cols * scale[None, :]
            alt = settle(w_alt, initial_multipliers(k), False)
            bf_iters += alt[3]
            # tight surrogates: sum psi equals the private-rate sum
            if float(eval_psi(alt[2], alt[0], norm.h_rows, unit_noise).sum()) > \
                    float(eval_psi(aux, w, norm.h_rows, unit_noise).sum()) + y_level:
                w, mult, aux = alt[0], alt[1], alt[2]
                bf_settled = alt[4]
                y_level = 0.0
        rc_committed = np.full(k, y_level / k)
        bf_ms = 1e3 * (time.perf_counter() - t0)

        t0 = time.perf_counter()
        ris_iters, ris_conv = 0, True
        phi = state.phi
        if options.ris == "optimized":
            forms = build_quadratic_forms(aux, w, norm.u_mats, norm.u_rows,
                                          unit_noise, include_common)
            ris = dual_ascent_ris(forms, rc_committed, phi, xi,
                                  tau=options.ris_tau,
                                  tol_phase=options.ris_tol_phase,
                                  tol_violation=options.ris_tol_violation,
                                  max_iter=options.ris_max_iter)
            phi, xi = ris.phi, ris.dual.xi
            ris_iters, ris_conv = ris.iterations, ris.converged
        ris_ms = 1e3 * (time.perf_counter() - t0)

        t0 = time.perf_counter()
        ma_iters, ma_stalled = 0, False
        x = state.x
        if options.antenna == "ma":
            # x block: like the W block, alternate surrogate tightening with
            # the projected ascent until the block objective settles, so each
            # outer pass carries the layout to a stationary point for the
            # current beamformers instead of inching one stale-surrogate
            # step at a time
            freqs, coeffs = ray_expansion(realization, phi)
            rays = (freqs, coeffs / sigma_vec[:, None])
            f_prev = None
            for _ in range(options.ma_rounds):
                rows_x = normalize_channel(
                    assemble_channel(x, phi, realization), sigma_vec).h_rows
                aux_x = update_aux(w, rows_x, unit_noise, include_common)
                ma = optimize_positions(x, rays, w, aux_x, unit_noise,
                                        config.x_min, config.x_max,
                                        config.d_min, config.wavelength,
                                        options.ma,
                                        include_common=include_common)
                x = ma.x
                ma_iters += ma.iterations
                ma_stalled = ma.stalled
                f_cur = float(ma.psi_trace[-1])
                if f_prev is not None and abs(f_cur - f_prev) < options.ma_round_tol:
                    break
                f_prev = f_cur
        ma_ms = 1e3 * (time.perf_counter() - t0)

        channel = assemble_channel(x, phi, realization)
        if include_common:
            rc_vec = allocate_common_rate(
                common_rates(channel.h_rows, w, sigma_sq_vec))
        else:
            rc_vec = np.zeros(k)
        state = DecisionState(w=w, phi=phi, x=x, r_c=rc_vec)
        report = evaluate(state, channel, config)

        trace.append(IterationRecord(
            index=iterations, sum_rate=report.sum_rate,
            common_min=float(report.common_rates.min()) if include_common else 0.0,
            power=float(np.sum(np.abs(w) ** 2)),
            max_violation=report.residuals.max_violation(),
            bf_iterations=bf_iters, bf_converged=bf_settled,
            ris_iterations=ris_iters, ris_converged=ris_conv,
            ma_iterations=ma_iters, ma_stalled=ma_stalled,
            bf_ms=bf_ms, ris_ms=ris_ms, ma_ms=ma_ms))

        if prev_rate is not None and abs(report.sum_rate - prev_rate) < options.eps_outer:
            converged = True
            break
        prev_rate = report.sum_rate

    return SolveResult(state=state, report=report, trace=trace,
                       multipliers=mult, iterations=iterations,
                       converged=converged)


__all__ = [
    "SolveOptions", "IterationRecord", "SolveResult",
    "initial_phases", "default_state", "solve",
    "MODES", "ANTENNAS", "SURFACES",
]
