"""Seeded Monte Carlo sweeps and the kernel timing benchmark.

A sweep runs the full solver over a grid of (sweep value, scheme
triple, trial) cells and appends one observation per row to
summary.csv, in that loop order, with fixed number formatting, so a
repeated run with the same configuration and master seed reproduces the
file byte for byte. Trial seeds come from a splitmix-style mix of the
master seed and the trial index, so raising the trial count extends the
sample without reshuffling earlier trials. Wall-clock columns are
written as zero unless real timing is requested, because measured times
can never be byte-stable; a run with real timing is therefore excluded
from the reproducibility guarantee.
"""

from __future__ import annotations

import csv
import dataclasses
import subprocess
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .ao_driver import SolveOptions, solve
from .channel import sample_scenario
from .config import SystemConfig, dbm_to_watts

KINDS = ("power", "users", "convergence", "benchmark")
TIMINGS = ("zero", "real")

DEFAULT_TRIPLES = (("rsma", "ma", "optimized"),
                   ("rsma", "fpa", "optimized"),
                   ("sdma", "ma", "optimized"),
                   ("sdma", "fpa", "optimized"))
DEFAULT_POWERS_DBM = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
DEFAULT_USER_COUNTS = (2.0, 4.0, 8.0, 12.0)
DEFAULT_TRACE_SEEDS = (0.0, 1.0, 2.0, 3.0)

BENCH_ANTENNAS = (4, 8, 16)
BENCH_USERS = (2, 4, 8)

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(master: int, index: int) -> int:
    """splitmix64 finalizer of master + (index+1)*golden; stable per index."""
    z = (master + (index + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: what to vary, how many trials, which schemes."""

    kind: str = "power"
    values: tuple = DEFAULT_POWERS_DBM   # dBm list, K list, or trace seeds
    trials: int = 50
    triples: tuple = DEFAULT_TRIPLES     # (mode, antenna, ris) per scheme
    master_seed: int = 0
    timing: str = "zero"                 # "zero" | "real"
    out_dir: Path = Path("runs")

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"sweep kind must be one of {KINDS}, got {self.kind!r}")
        if self.timing not in TIMINGS:
            raise ValueError(f"timing must be one of {TIMINGS}, got {self.timing!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", values)
        triples = tuple((str(m), str(a), str(r)) for m, a, r in self.triples)
        if not triples:
            raise ValueError("at least one (mode, antenna, ris) triple required")
        object.__setattr__(self, "triples", triples)
        object.__setattr__(self, "out_dir", Path(self.out_dir))


def _cell_config(base: SystemConfig, kind: str, value: float) -> SystemConfig:
    if kind == "power":
        return dataclasses.replace(base, p_t=dbm_to_watts(value))
    if kind == "users":
        if value != int(value):
            raise ValueError(f"user counts must be integers, got {value}")
        return dataclasses.replace(base, k=int(value))
    return base


def _format_value(value: float) -> str:
    return f"{int(value)}" if value == int(value) else f"{value:.17g}"


def _vcs_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True,
            text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "n/a"


def _write_manifest(path: Path, base: SystemConfig, spec: ExperimentSpec) -> None:
    lines = ["[version]",
             f"package = maris {__version__}",
             f"vcs = {_vcs_describe()}",
             f"kernel_backend = {kernels.backend()}",
             "",
             "[experiment]",
             f"kind = {spec.kind}",
             f"values = {', '.join(_format_value(v) for v in spec.values)}",
             f"trials = {spec.trials}",
             f"schemes = {'; '.join('/'.join(t) for t in spec.triples)}",
             f"master_seed = {spec.master_seed}",
             f"timing = {spec.timing}",
             "",
             "[system]"]
    for field in dataclasses.fields(base):
        lines.append(f"{field.name} = {getattr(base, field.name)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_trace(path: Path, trace) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "sum_rate_bpshz", "min_Tk", "power_used"])
        for rec in trace:
            writer.writerow([rec.index, f"{rec.sum_rate:.17g}",
                             f"{rec.common_min:.17g}", f"{rec.power:.17g}"])


def run_experiment(base: SystemConfig, spec: ExperimentSpec) -> Path:
    """Run the sweep and return the output directory.

    Writes summary.csv (one row per cell, loop order value > scheme >
    trial), a trace_<scheme>_s<seed>.csv per convergence cell, and
    manifest.txt echoing the resolved configuration.
    """
    if spec.kind == "benchmark":
        raise ValueError("benchmark specs go to run_benchmark")
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    with summary.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sweep_param", "mode", "antenna", "ris", "trial",
                         "seed", "sum_rate_bpshz", "iterations", "converged",
                         "wall_ms"])
        for value in spec.values:
            config = _cell_config(base, spec.kind, value)
            for mode, antenna, ris in spec.triples:
                trials = (int(value),) if spec.kind == "convergence" \
                    else range(spec.trials)
                for trial in trials:
                    seed = mix_seed(spec.master_seed, trial)
                    realization = sample_scenario(config, seed)
                    options = SolveOptions(mode=mode, antenna=antenna, ris=ris)
                    start = time.perf_counter()
                    result = solve(realization, config, options)
                    wall_ms = 1e3 * (time.perf_counter() - start)
                    if spec.timing != "real":
                        wall_ms = 0.0
                    writer.writerow([
                        _format_value(value), mode, antenna, ris, trial, seed,
                        f"{result.report.sum_rate:.17g}", result.iterations,
                        "true" if result.converged else "false",
                        f"{wall_ms:.3f}"])
                    if spec.kind == "convergence":
                        name = f"trace_{mode}_{antenna}_{ris}_s{trial}.csv"
                        _write_trace(out / name, result.trace)
    _write_manifest(out / "manifest.txt", base, spec)
    return out


@dataclasses.dataclass(frozen=True)
class BenchmarkReport:
    rows: list          # (m, k, backend, usec_per_call)
    exponents: dict     # backend -> (m_exponent, k_exponent)
    flagged: dict       # backend -> True when the M exponent exceeds 3.5

    def lines(self) -> list:
        out = [f"{'M':>4} {'K':>4} {'backend':>10} {'usec/call':>12}"]
        for m, k, backend, usec in self.rows:
            out.append(f"{m:>4} {k:>4} {backend:>10} {usec:>12.2f}")
        for backend, (em, ek) in sorted(self.exponents.items()):
            note = "  ** exceeds 3.5, check kernel **" if self.flagged[backend] else ""
            out.append(f"{backend}: time ~ M^{em:.2f} K^{ek:.2f}{note}")
        return out


def _bench_instance(rng: np.random.Generator, m: int, k: int, paths: int = 8):
    freqs = rng.uniform(-50.0, 50.0, size=(k, paths))
    coeffs = rng.normal(size=(k, paths)) + 1j * rng.normal(size=(k, paths))
    w = rng.normal(size=(m, k + 1)) + 1j * rng.normal(size=(m, k + 1))
    x = np.sort(rng.uniform(0.0, 1.0, size=m))
    mu = rng.uniform(0.5, 2.0, size=k)
    eps = rng.normal(size=k) + 1j * rng.normal(size=k)
    gamma = rng.uniform(0.5, 2.0, size=k)
    v = rng.normal(size=k) + 1j * rng.normal(size=k)
    sigma_sq = np.ones(k)
    return x, freqs, coeffs, w, mu, eps, gamma, v, sigma_sq


def run_benchmark(master_seed: int = 0, out_dir: Path | None = None,
                  reps: int = 200) -> BenchmarkReport:
    """Time the position-gradient kernel across sizes and backends.

    Informational only: reports microseconds per call for every
    (M, K, backend) cell and a log-log least-squares fit of the size
    scaling, flagging an M exponent above 3.5.
    """
    rows = []
    samples: dict = {}
    for name, impl in sorted(kernels.available_backends().items()):
        for m in BENCH_ANTENNAS:
            for k in BENCH_USERS:
                args = _bench_instance(
                    np.random.default_rng(mix_seed(master_seed, m * 100 + k)),
                    m, k)
                impl.ma_eval(*args, True)
                impl.ma_eval(*args, True)
                start = time.perf_counter()
                for _ in range(reps):
                    impl.ma_eval(*args, True)
                usec = 1e6 * (time.perf_counter() - start) / reps
                rows.append((m, k, name, usec))
                samples.setdefault(name, []).append((m, k, usec))
    exponents = {}
    flagged = {}
    for name, cells in samples.items():
        design = np.array([[np.log(m), np.log(k), 1.0] for m, k, _ in cells])
        target = np.log(np.array([usec for _, _, usec in cells]))
        fit, *_ = np.linalg.lstsq(design, target, rcond=None)
        exponents[name] = (float(fit[0]), float(fit[1]))
        flagged[name] = bool(fit[0] > 3.5)
    report = BenchmarkReport(rows=rows, exponents=exponents, flagged=flagged)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "bench.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["m", "k", "backend", "usec_per_call"])
            for m, k, backend, usec in rows:
                writer.writerow([m, k, backend, f"{usec:.3f}"])
    return report
