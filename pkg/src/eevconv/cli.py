"""Command-line front end.

Examples::

    eevconv traces --model models/mixed_field_ising.json --obs witness:auto --nmin 8 --nmax 12
    eevconv scan --model models/mixed_field_ising.json --obs h --obs X1 --nmin 8 --nmax 12 --out runs/mfi
    eevconv ff-scan --g 0.5 --obs X1 --nmin 16 --nmax 128 --samples 20000 --seed 1 --out runs/ff
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import freefermion as ff
from .cache import SpectrumCache
from .convergence import (
    MAX_DEGREE,
    ConvergenceReport,
    R_f_proxy,
    TargetFunction,
    eth_linear_predictor,
    fit_target,
    scaling_exponent,
)
from .pauli_algebra import (
    LocalOperator,
    ModelError,
    canonicalize,
    obstruction_residual,
    ham2_op_trace,
    ham_op_trace,
    trace_min_sites,
    load_model,
    witness_operator,
)
from .spectra import DEFAULT_MAX_SITES

log = logging.getLogger("eevconv")

CSV_COLUMNS = ["N", "r_f", "r_f_l1", "weak_eth", "R_f_proxy"]
FF_EXTRA_COLUMNS = ["stderr", "samples"]
N_DEPENDENCE_TOL = 1e-10


@dataclass
class RunConfig:
    model: Path | None = None
    observables: list[str] = field(default_factory=list)
    nmin: int = 8
    nmax: int = 12
    degree: int = 3
    normalize: bool = False
    g: float = 0.5
    samples: int = 10000
    seed: int = 0
    cache: Path | None = None
    out: Path | None = None
    use_cache: bool = True
    max_sites: int = DEFAULT_MAX_SITES
    max_modes: int = ff.DEFAULT_MAX_MODES
    target: str = "eth"

    def __post_init__(self):
        if self.nmin > self.nmax:
            raise ModelError(f"--nmin {self.nmin} exceeds --nmax {self.nmax}")
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ModelError(f"--degree must be between 0 and {MAX_DEGREE}")

    @property
    def sizes(self) -> list[int]:
        return list(range(self.nmin, self.nmax + 1))


def resolve_observable(spec: str, h: LocalOperator, normalize: bool = False) -> LocalOperator:
    """Turn an ``--obs`` value into an operator: ``h``, ``witness:auto`` or a Pauli sum."""
    if spec == "h":
        return h
    if spec == "witness:auto":
        return witness_operator(canonicalize(h))[0]
    op = LocalOperator.parse(spec).simplified()
    if not op.is_traceless:
        raise ModelError(f"observable {spec!r} must be traceless")
    return op.normalized() if normalize else op


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "obs"


def _real(z: complex) -> float | complex:
    return z.real if abs(z.imag) < 1e-14 else z


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in columns})


def read_csv(path: Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            {k: int(v) if k in ("N", "samples") else float(v) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(config: RunConfig) -> tuple[LocalOperator, bytes]:
    if config.model is None:
        raise ModelError("--model is required for this command")
    h = canonicalize(load_model(config.model, normalize=config.normalize))
    return h, Path(config.model).read_bytes()


def cmd_traces(config: RunConfig) -> dict:
    h, _ = _load(config)
    k = h.window
    result = {}
    rows = []
    for spec in config.observables or ["h"]:
        a = resolve_observable(spec, h, config.normalize)
        valid_from = max(trace_min_sites(k, a.window, 2), trace_min_sites(k, k, 2))
        per_n = []
        for n in config.sizes:
            if n < max(k, a.window):
                continue
            values = {
                "tr(HA)/d": ham_op_trace(h, a, n),
                "tr(H2A)/d": ham2_op_trace(h, a, n),
                "tr(Hh)/d": ham_op_trace(h, h, n),
                "tr(H2h)/d": ham2_op_trace(h, h, n),
            }
            values["obstruction_residual"] = obstruction_residual(h, a, n)
            per_n.append((n, values))
        reference = next((v for n, v in per_n if n >= valid_from), None)
        flagged = []
        print(f"observable {spec}: {a}  (N-independent for N >= {valid_from})")
        for n, values in per_n:
            drift = 0.0
            if reference is not None and n >= valid_from:
                drift = max(abs(values[q] - reference[q]) for q in values)
            flag = drift > N_DEPENDENCE_TOL
            if flag:
                flagged.append(n)
            cells = "  ".join(f"{q}={_real(v):.12g}" for q, v in values.items())
            marker = "  N-DEPENDENT" if flag else ("" if n >= valid_from else "  (below validity window)")
            print(f"  N={n:3d}  {cells}{marker}")
            rows.append({"observable": spec, "N": n, **{q: _real(v) for q, v in values.items()}})
        result[spec] = {
            "operator": str(a),
            "valid_from": valid_from,
            "values": None if reference is None else {q: _real(v) for q, v in reference.items()},
            "n_dependent_sizes": flagged,
        }
    if config.out:
        columns = ["observable", "N", "tr(HA)/d", "tr(H2A)/d", "tr(Hh)/d", "tr(H2h)/d", "obstruction_residual"]
        _write_csv(Path(config.out) / "traces.csv", rows, columns)
        _write_json(Path(config.out) / "traces.json", result)
    return result


def cmd_canonicalize(config: RunConfig) -> dict:
    h, _ = _load(config)
    out = {"h": str(h)}
    print(f"h -> {h}")
    for spec in config.observables:
        op = canonicalize(LocalOperator.parse(spec))
        out[spec] = str(op)
        print(f"{spec} -> {op}")
    return out


def cmd_witness(config: RunConfig) -> dict:
    h, _ = _load(config)
    a, overlap = witness_operator(h)
    residual = obstruction_residual(h, a)
    out = {
        "witness": str(a.terms[0][1]),
        "h2_overlap": _real(overlap),
        "tr(HA)/d": _real(ham_op_trace(h, a, trace_min_sites(h.window, a.window, 2))),
        "obstruction_residual": _real(residual),
    }
    for key, value in out.items():
        print(f"{key}: {value}")
    if config.out:
        _write_json(Path(config.out) / "witness.json", {k: str(v) if isinstance(v, complex) else v for k, v in out.items()})
    return out


def _tables(config: RunConfig, cache: SpectrumCache, h: LocalOperator, model_bytes: bytes, observables: dict):
    for n in config.sizes:
        if n > config.max_sites:
            raise ModelError(f"N={n} exceeds the exact-diagonalization cap --max-sites={config.max_sites}")
    return [
        cache.table(h, n, observables, model_bytes, config.normalize, config.max_sites) for n in config.sizes
    ]


def cmd_scan(config: RunConfig, cache: SpectrumCache | None = None) -> dict:
    h, model_bytes = _load(config)
    cache = cache or SpectrumCache(config.cache, enabled=config.use_cache)
    specs = config.observables or ["h"]
    observables = {spec: resolve_observable(spec, h, config.normalize) for spec in specs}
    tables = _tables(config, cache, h, model_bytes, observables)
    summary = {"sizes": config.sizes, "R_f_label": "running max over computed sizes (proxy)", "observables": {}}
    for spec, a in observables.items():
        targets = {
            "zero": TargetFunction.zero(),
            "eth": eth_linear_predictor(h, a),
        }
        if len(tables) >= 2:
            targets["fit"] = fit_target(tables, spec, config.degree)
        entry = {}
        for label, f in targets.items():
            report = ConvergenceReport.from_tables(tables, spec, f)
            if config.out:
                _write_csv(Path(config.out) / f"scan_{_safe_name(spec)}_{label}.csv", report.rows(), CSV_COLUMNS)
            entry[label] = report.summary()
            r = ", ".join(f"{x:.4g}" for x in report.r_values)
            exp = entry[label]["exponent"]
            exp_txt = "undefined" if exp is None else f"{exp:.3f} +- {entry[label]['exponent_stderr']:.3f}"
            print(f"{spec} [{label}] r_f = [{r}]  exponent: {exp_txt}")
        summary["observables"][spec] = entry
    summary["cache"] = {"hits": cache.hits, "misses": cache.misses}
    if config.out:
        _write_json(Path(config.out) / "summary.json", {k: v for k, v in summary.items() if k != "cache"})
    return summary


def cmd_fit(config: RunConfig, cache: SpectrumCache | None = None) -> dict:
    h, model_bytes = _load(config)
    cache = cache or SpectrumCache(config.cache, enabled=config.use_cache)
    specs = config.observables or ["h"]
    observables = {spec: resolve_observable(spec, h, config.normalize) for spec in specs}
    tables = _tables(config, cache, h, model_bytes, observables)
    out = {}
    for spec in specs:
        f = fit_target(tables, spec, config.degree)
        f.check_bounded()
        out[spec] = {"coefficients": list(f.coefficients), "degree": config.degree, "sizes": config.sizes}
        print(f"{spec}: f(x) coefficients (x^0..x^{config.degree}) = {list(f.coefficients)}")
    if config.out:
        _write_json(Path(config.out) / "fit.json", out)
    return out


def ff_ladder(nmin: int, nmax: int) -> list[int]:
    sizes = []
    n = nmin
    while n <= nmax:
        sizes.append(n)
        n *= 2
    return sizes


def cmd_ff_scan(config: RunConfig) -> dict:
    if config.samples < 100:
        raise ModelError(f"--samples must be at least 100, got {config.samples}")
    specs = config.observables or ["X1"]
    sizes = ff_ladder(config.nmin, config.nmax)
    for n in sizes:
        if n > config.max_modes:
            raise ModelError(f"N={n} exceeds the free-fermion mode cap --max-modes={config.max_modes}")
    h = ff.spin_hamiltonian_term(config.g, normalize=True)
    summary = {"g": config.g, "samples": config.samples, "seed": config.seed, "sizes": sizes, "observables": {}}
    for spec in specs:
        ff.get_bilinear(spec)
        if config.target == "zero":
            f = TargetFunction.zero()
        else:
            f = eth_linear_predictor(h, ff.spin_observable(spec, config.g))
        rows = []
        checks = {}
        for n in sizes:
            dev = ff.sample_deviations(n, config.g, spec, f, config.samples, config.seed)
            est, se = ff.sample_r_f(n, config.g, spec, f, config.samples, config.seed)
            eev = ff.sample_deviations(n, config.g, spec, TargetFunction.zero(), config.samples, config.seed)
            rows.append(
                {
                    "N": n,
                    "r_f": est,
                    "r_f_l1": float(np.mean(np.abs(dev))),
                    "weak_eth": float(np.mean(eev**2)),
                    "stderr": float(se),
                    "samples": config.samples,
                }
            )
            if n <= 12:
                exact = ff.exact_r_f(n, config.g, spec, f)
                z = abs(est - exact) / se if se > 0 else 0.0
                checks[n] = {"exact": exact, "sampled": est, "stderr": float(se), "z": z, "ok": z <= 3.0}
                if z > 3.0:
                    log.warning("N=%d: sampled r_f deviates from enumeration by %.1f sigma", n, z)
        proxy = R_f_proxy([r["r_f"] for r in rows]) if len(rows) >= 2 else [r["r_f"] for r in rows]
        for row, p in zip(rows, proxy):
            row["R_f_proxy"] = float(p)
        if config.out:
            _write_csv(
                Path(config.out) / f"ff_{_safe_name(spec)}_{config.target}.csv", rows, CSV_COLUMNS + FF_EXTRA_COLUMNS
            )
        scaled = [r["N"] * r["r_f"] for r in rows]
        band = max(scaled) / min(scaled) if rows and min(scaled) > 0 else None
        positive = [(r["N"], r["r_f"]) for r in rows if r["r_f"] > 0]
        exp = scaling_exponent(positive) if len(positive) >= 3 else None
        summary["observables"][spec] = {
            "target_coefficients": list(f.coefficients),
            "N_times_r_band": band,
            "within_factor_4_band": None if band is None else band <= 4.0,
            "exponent": None if exp is None else exp[0],
            "exponent_stderr": None if exp is None else exp[1],
            "enumeration_checks": {str(k): v for k, v in checks.items()},
        }
        for row in rows:
            print(f"{spec} N={row['N']:5d}  r_f={row['r_f']:.6g} +- {row['stderr']:.2g}  N*r_f={row['N'] * row['r_f']:.4g}")
    if config.out:
        _write_json(Path(config.out) / "ff_summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", type=Path, help="model definition (JSON)")
    common.add_argument(
        "--obs", action="append", default=[], help="observable: 'h', 'witness:auto' or a Pauli sum like '0.5*X1+Z1Z2'"
    )
    common.add_argument("--nmin", type=int, default=8)
    common.add_argument("--nmax", type=int, default=12)
    common.add_argument("--degree", type=int, default=3)
    common.add_argument("--normalize", action="store_true", help="rescale h and observables to unit operator norm")
    common.add_argument("--g", type=float, default=0.5, help="transverse field for ff-scan")
    common.add_argument("--samples", type=int, default=10000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--target", choices=["eth", "zero"], default="eth", help="target function for ff-scan")
    common.add_argument("--cache", type=Path, default=None, help="spectrum cache directory")
    common.add_argument("--no-cache", action="store_true")
    common.add_argument("--out", type=Path, default=None, help="output directory for CSV/JSON reports")
    common.add_argument("--max-sites", type=int, default=DEFAULT_MAX_SITES)
    common.add_argument("--max-modes", type=int, default=ff.DEFAULT_MAX_MODES)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eevconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("traces", "closed-form traces and the obstruction residual across N"),
        ("canonicalize", "print canonical forms of h and observables"),
        ("witness", "construct the obstruction witness for h"),
        ("scan", "exact-diagonalization sweep: r_f for zero, ETH-linear and fitted targets"),
        ("fit", "pooled polynomial target fit"),
        ("ff-scan", "Monte-Carlo r_f in the transverse-field Ising chain"),
    ]:
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        model=args.model,
        observables=list(args.obs),
        nmin=args.nmin,
        nmax=args.nmax,
        degree=args.degree,
        normalize=args.normalize,
        g=args.g,
        samples=args.samples,
        seed=args.seed,
        cache=args.cache,
        out=args.out,
        use_cache=not args.no_cache,
        max_sites=args.max_sites,
        max_modes=args.max_modes,
        target=args.target,
    )


COMMANDS = {
    "traces": cmd_traces,
    "canonicalize": cmd_canonicalize,
    "witness": cmd_witness,
    "scan": cmd_scan,
    "fit": cmd_fit,
    "ff-scan": cmd_ff_scan,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config)
    except (ModelError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
