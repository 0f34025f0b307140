"""Command-line entry point.

Four subcommands: `solve` runs one instance and prints the rate report,
`sweep` runs a seeded Monte Carlo experiment to CSV, `bench` times the
position-gradient kernel across sizes and backends, and `check` runs a
quick invariant suite on random instances and sets the exit code.

Configuration resolves in layers: built-in defaults, then an INI file
given with --config ([system] and [experiment] sections), then --set
key=value overrides, then the dedicated flags. Unknown keys anywhere
are hard errors naming the offender.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .ao_driver import MODES, ANTENNAS, SURFACES, SolveOptions, solve
from .channel import assemble_channel, normalize_channel, ray_expansion, sample_scenario
from .config import SystemConfig, watts_to_dbm
from .experiments import (DEFAULT_POWERS_DBM, DEFAULT_TRACE_SEEDS,
                          DEFAULT_USER_COUNTS, ExperimentSpec, run_benchmark,
                          run_experiment)
from .fp_core import eval_psi, eval_t, update_aux
from .rates import common_rates, private_rates
from .ris_opt import build_quadratic_forms

_SYSTEM_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}
_EXPERIMENT_KEYS = ("kind", "values", "trials", "schemes", "master_seed", "timing")


def _parse_scalar(name: str, text: str, kind: type):
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return tuple(float(part) for part in text.replace(",", " ").split())
    except ValueError:
        raise ValueError(f"key {name!r}: cannot parse {text!r} as {kind.__name__}")


def _system_overrides(pairs: dict) -> dict:
    out = {}
    for name, text in pairs.items():
        if name not in _SYSTEM_FIELDS:
            raise ValueError(
                f"unknown system key {name!r} (valid: {', '.join(sorted(_SYSTEM_FIELDS))})")
        default = getattr(SystemConfig(), name)
        kind = type(default) if not isinstance(default, tuple) else tuple
        out[name] = _parse_scalar(name, text, kind)
    return out


def _parse_schemes(text: str) -> tuple:
    triples = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = tuple(b.strip() for b in part.split("/"))
        if len(bits) != 3:
            raise ValueError(f"scheme {part!r} is not mode/antenna/ris")
        triples.append(bits)
    if not triples:
        raise ValueError("schemes list is empty")
    return tuple(triples)


def parse_config(path: Path | None, sets: list, args: argparse.Namespace
                 ) -> tuple[SystemConfig, ExperimentSpec]:
    """Layered resolution: defaults < config file < --set < flags."""
    system: dict = {}
    experiment: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ValueError(f"config file {path} not found or unreadable")
        unknown_sections = set(parser.sections()) - {"system", "experiment"}
        if unknown_sections:
            raise ValueError(
                f"unknown config sections: {', '.join(sorted(unknown_sections))}")
        if parser.has_section("system"):
            system.update(_system_overrides(dict(parser.items("system"))))
        if parser.has_section("experiment"):
            for key, value in parser.items("experiment"):
                if key not in _EXPERIMENT_KEYS:
                    raise ValueError(
                        f"unknown experiment key {key!r} "
                        f"(valid: {', '.join(_EXPERIMENT_KEYS)})")
                experiment[key] = value
    for pair in sets:
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        system.update(_system_overrides({key.strip(): value.strip()}))

    config = SystemConfig(**system)

    kind = getattr(args, "sweep", None) or experiment.get("kind", "power")
    defaults = {"power": DEFAULT_POWERS_DBM, "users": DEFAULT_USER_COUNTS,
                "convergence": DEFAULT_TRACE_SEEDS}
    values: tuple = defaults.get(kind, DEFAULT_POWERS_DBM)
    if "values" in experiment:
        values = tuple(float(v) for v in
                       experiment["values"].replace(",", " ").split())
    triples = _parse_schemes(experiment["schemes"]) if "schemes" in experiment \
        else None
    if getattr(args, "mode", None) or getattr(args, "antenna", None) \
            or getattr(args, "ris", None):
        triples = ((getattr(args, "mode", None) or "rsma",
                    getattr(args, "antenna", None) or "ma",
                    getattr(args, "ris", None) or "optimized"),)
    spec = ExperimentSpec(
        kind=kind,
        values=values,
        trials=args.trials if getattr(args, "trials", None) is not None
        else int(experiment.get("trials", 50)),
        triples=triples if triples is not None else
        ExperimentSpec.__dataclass_fields__["triples"].default,
        master_seed=args.seed if getattr(args, "seed", None) is not None
        else int(experiment.get("master_seed", 0)),
        timing=getattr(args, "timing", None) or experiment.get("timing", "zero"),
        out_dir=Path(getattr(args, "out", None) or "runs"))
    return config, spec


def _cmd_solve(args: argparse.Namespace) -> int:
    config, spec = parse_config(args.config, args.set, args)
    seed = spec.master_seed
    realization = sample_scenario(config, seed)
    mode, antenna, ris = spec.triples[0]
    result = solve(realization, config, SolveOptions(mode=mode, antenna=antenna,
                                                     ris=ris))
    report = result.report
    print(f"maris {__version__}  backend={kernels.backend()}")
    print(f"scheme {mode}/{antenna}/{ris}  seed {seed}  "
          f"P_T {watts_to_dbm(config.p_t):.1f} dBm  M={config.m} K={config.k} "
          f"N={config.n}")
    print(f"iterations {result.iterations}  converged {result.converged}")
    with np.printoptions(precision=4, suppress=True):
        print(f"private rates   {report.private_rates}")
        print(f"common rates    {report.common_rates}")
        print(f"allocated r_c   {report.allocated_common}")
        print(f"positions (m)   {result.state.x}")
    print(f"max constraint violation {report.residuals.max_violation():.3e}")
    print(f"sum rate {report.sum_rate:.6f} bps/Hz")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config, spec = parse_config(args.config, args.set, args)
    out = run_experiment(config, spec)
    cells = len(spec.values) * len(spec.triples) * \
        (1 if spec.kind == "convergence" else spec.trials)
    print(f"wrote {out / 'summary.csv'} ({cells} rows)")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    report = run_benchmark(master_seed=args.seed or 0,
                           out_dir=Path(args.out) if args.out else None)
    for line in report.lines():
        print(line)
    return 0


def _check(label: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
    return ok


def _cmd_check(args: argparse.Namespace) -> int:
    """Quick invariant suite on random instances; exit 0 only if clean."""
    config, spec = parse_config(args.config, args.set, args)
    rng = np.random.default_rng(spec.master_seed)
    realization = sample_scenario(config, spec.master_seed)
    sigma = np.full(config.k, config.sigma)
    unit = np.ones(config.k)
    ok = True

    worst_psi = worst_t = 0.0
    worst_form = 0.0
    for _ in range(10):
        x = np.sort(rng.uniform(config.x_min, config.x_max, config.m))
        phi = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, config.n))
        w = rng.normal(size=(config.m, config.k + 1)) \
            + 1j * rng.normal(size=(config.m, config.k + 1))
        w *= np.sqrt(config.p_t) / np.linalg.norm(w)
        channel = assemble_channel(x, phi, realization)
        norm = normalize_channel(channel, sigma)
        aux = update_aux(w, norm.h_rows, unit)
        psi = eval_psi(aux, w, norm.h_rows, unit)
        t_k = eval_t(aux, w, norm.h_rows, unit)
        worst_psi = max(worst_psi, float(np.max(np.abs(
            psi - private_rates(channel.h_rows, w, sigma ** 2)))))
        worst_t = max(worst_t, float(np.max(np.abs(
            t_k - common_rates(channel.h_rows, w, sigma ** 2)))))
        forms = build_quadratic_forms(aux, w, norm.u_mats, norm.u_rows, unit)
        worst_form = max(worst_form,
                         abs(forms.psi_total(phi) - float(psi.sum())),
                         float(np.max(np.abs(forms.t_values(phi) - t_k))))
    ok &= _check("surrogate tightness (psi vs private rates)", worst_psi <= 1e-9,
                 f"max |err| {worst_psi:.2e}")
    ok &= _check("surrogate tightness (T vs common rates)", worst_t <= 1e-9,
                 f"max |err| {worst_t:.2e}")
    ok &= _check("phase quadratic forms match direct sum", worst_form <= 1e-9,
                 f"max |err| {worst_form:.2e}")

    worst_grad = 0.0
    step = 1e-6 * config.wavelength
    for _ in range(5):
        x = np.sort(rng.uniform(config.x_min, config.x_max, config.m))
        phi = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, config.n))
        w = rng.normal(size=(config.m, config.k + 1)) \
            + 1j * rng.normal(size=(config.m, config.k + 1))
        channel = assemble_channel(x, phi, realization)
        rows = normalize_channel(channel, sigma).h_rows
        aux = update_aux(w, rows, unit)
        freqs, coeffs = ray_expansion(realization, phi)
        coeffs = coeffs / sigma[:, None]
        _, _, grad, _ = kernels.ma_eval(x, freqs, coeffs, w, aux.mu, aux.eps,
                                        aux.gamma, aux.v, unit, True)
        for m in range(config.m):
            lo, hi = x.copy(), x.copy()
            lo[m] -= step
            hi[m] += step
            f_hi = kernels.ma_eval(hi, freqs, coeffs, w, aux.mu, aux.eps,
                                   aux.gamma, aux.v, unit, False)[0].sum()
            f_lo = kernels.ma_eval(lo, freqs, coeffs, w, aux.mu, aux.eps,
                                   aux.gamma, aux.v, unit, False)[0].sum()
            fd = (f_hi - f_lo) / (2.0 * step)
            scale = max(abs(fd), abs(grad[m]), 1e-9)
            worst_grad = max(worst_grad, abs(grad[m] - fd) / scale)
    ok &= _check("position gradient matches central differences",
                 worst_grad <= 1e-5, f"max rel err {worst_grad:.2e}")

    result = solve(realization, config, SolveOptions())
    violation = result.report.residuals.max_violation()
    ok &= _check("solve respects every constraint", violation <= 1e-6,
                 f"max violation {violation:.2e}")
    rates = [rec.sum_rate for rec in result.trace]
    drop = max(max((a - b for a, b in zip(rates, rates[1:])), default=0.0), 0.0)
    ok &= _check("trace is near-monotone", drop <= 1e-2,
                 f"max single-step decrease {drop:.2e}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maris",
        description="Sum-rate solver and experiment harness for a "
                    "movable-antenna downlink with a reflecting surface.")
    parser.add_argument("--version", action="version",
                        version=f"maris {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_scheme: bool) -> None:
        p.add_argument("--config", type=Path, default=None,
                       help="INI file with [system] and [experiment] sections")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one system key (repeatable)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output directory")
        if with_scheme:
            p.add_argument("--mode", choices=MODES, default=None)
            p.add_argument("--antenna", choices=ANTENNAS, default=None)
            p.add_argument("--ris", choices=SURFACES, default=None)

    p_solve = sub.add_parser("solve", help="run one instance, print the rates")
    common(p_solve, with_scheme=True)
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="seeded Monte Carlo sweep to CSV")
    common(p_sweep, with_scheme=True)
    p_sweep.add_argument("--sweep", choices=("power", "users", "convergence"),
                         default=None, help="sweep kind (default power)")
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--timing", choices=("zero", "real"), default=None,
                         help="wall_ms column: zeros (byte-stable) or measured")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_bench = sub.add_parser("bench", help="time the position-gradient kernel")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_check = sub.add_parser("check", help="quick invariant suite, exit code")
    common(p_check, with_scheme=True)
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
