"""Command-line front end.

Commands: ``region`` (classify a parameter point), ``purity`` (estimate
eta at one time), ``figure`` (emit figure tables + manifests),
``rerun`` (reproduce a table from its manifest), ``verify`` (run the
oracle suite) and ``convert`` (Planck -> SI display).

Exit codes are a stable scripting contract: 0 success, 2 invalid input,
3 region refusal, 4 precision shortfall, 5 I/O failure.

Scalar options accept unit suffixes: masses ``mp`` (Planck masses,
default) or ``mc`` (multiples of M_C = 1/l_c); widths ``sb`` (multiples
of sigma_B), ``lb`` (multiples of lambda_bar) or ``lp`` (Planck
lengths, default).  An optional JSON config file supplies defaults;
flags override the file, the file overrides built-ins.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__, closedform, mcpurity, oracles, sweep, units
from .closedform import NoEvolutionWindowError, RegionLabel
from .mcpurity import McConfig, RegionViolationError
from .units import InvalidParameterError, ModelParams, SigmaSpec

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_REGION = 3
EXIT_PRECISION = 4
EXIT_IO = 5

WORKERS_ENV = "GRAVPURITY_WORKERS"

_CONFIG_KEYS = ("lc_planck", "mass", "sigma", "seed", "samples", "target_se", "workers", "out")


class UsageError(ValueError):
    """Bad flag value; maps to exit code 2."""


def _parse_suffixed(text: str, suffixes: tuple[str, ...]) -> tuple[float, str]:
    text = text.strip()
    suffix = ""
    for candidate in suffixes:
        if text.lower().endswith(candidate):
            suffix = candidate
            text = text[: -len(candidate)]
            break
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"cannot parse numeric value from {text!r}")
    return value, suffix


def parse_mass(text: str, l_c: float) -> float:
    """Mass in Planck masses from e.g. '0.5mc', '1mp' or '2.1'."""
    value, suffix = _parse_suffixed(str(text), ("mc", "mp"))
    if value <= 0:
        raise UsageError(f"mass must be > 0, got {text!r}")
    if suffix == "mc":
        return value / l_c
    return value


def parse_sigma_spec(text: str) -> SigmaSpec:
    """Width spec from e.g. '30sb', '4lb' or '100lp' (default lp)."""
    value, suffix = _parse_suffixed(str(text), ("sb", "lb", "lp"))
    if value <= 0:
        raise UsageError(f"sigma must be > 0, got {text!r}")
    mode = {"sb": "multiple_of_sigma_b", "lb": "multiple_of_lambda_bar"}.get(suffix, "absolute")
    return SigmaSpec(mode=mode, value=value)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _setting(args, flag_name: str, config: dict, config_key: str, default):
    value = getattr(args, flag_name, None)
    if value is not None:
        return value
    if config_key in config and config[config_key] is not None:
        return config[config_key]
    return default


def _resolve_workers(args, config: dict) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    if config.get("workers") is not None:
        return int(config["workers"])
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1


def _resolve_params(args, config: dict) -> ModelParams:
    l_c = float(_setting(args, "lc", config, "lc_planck", 1.0))
    if l_c <= 0:
        raise UsageError(f"l_c must be > 0, got {l_c!r}")
    mass = parse_mass(_setting(args, "mass", config, "mass", "1mp"), l_c)
    spec = parse_sigma_spec(_setting(args, "sigma", config, "sigma", "30sb"))
    sigma = units.resolve_sigma(spec, l_c, mass)
    return ModelParams(l_c=l_c, mass=mass, sigma=sigma)


def _resolve_mc(args, config: dict) -> McConfig:
    seed = int(_setting(args, "seed", config, "seed", 20250810))
    samples = _setting(args, "samples", config, "samples", None)
    target_se = _setting(args, "target_se", config, "target_se", None)
    kwargs = dict(
        seed=seed,
        workers=_resolve_workers(args, config),
        chunk_size=int(getattr(args, "chunk_size", None) or 2**16),
        n_cap=int(getattr(args, "n_cap", None) or 10**8),
        antithetic=not getattr(args, "no_antithetic", False),
    )
    if samples is not None:
        return McConfig(n_samples=int(samples), **kwargs)
    return McConfig(target_se=float(target_se) if target_se is not None else 1e-3, **kwargs)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_region(args) -> int:
    config = _load_config(args.config)
    params = _resolve_params(args, config)
    scales = units.derive(params)
    label = closedform.classify_region(params)
    sb = closedform.sigma_b(params)
    print(f"region: {label.value}")
    print(f"mu = m/M_C = {scales.mu:.9g}")
    print(f"sigma = {params.sigma:.9g} [planck]  (sigma/lambda_bar = {params.sigma * params.mass:.9g})")
    print(f"sigma_B = {sb:.9g} [planck]")
    if label is RegionLabel.REGION_II:
        tf = closedform.t_f(params)
        tf_si, unit = units.to_si(tf, "time")
        print(f"t_F = {tf:.9g} [planck]  ({tf_si:.6g} {unit})")
        tf_repr = repr(tf)
    else:
        print("t_F = unavailable (evolution window exists only in region_ii)")
        tf_repr = ""
    print(
        f"label={label.value} mu={scales.mu!r} sigma_planck={params.sigma!r} "
        f"sigma_b_planck={sb!r} t_f_planck={tf_repr}"
    )
    return EXIT_OK


def cmd_purity(args) -> int:
    config = _load_config(args.config)
    params = _resolve_params(args, config)
    cfg = _resolve_mc(args, config)
    if args.t is not None:
        t = float(args.t)
    else:
        t = closedform.t_f(params)  # default: the final time
    est = mcpurity.estimate_purity(t, params, cfg, force=args.force)
    print(f"t = {t:.9g} [planck]")
    print(f"eta = {est.eta:.6f} +- {est.std_error:.6f} [dimensionless]  (n = {est.n})")
    if not cfg.antithetic:
        print(f"imag = {est.imag_part:.3e} +- {est.imag_se:.3e} [dimensionless]")
    print(f"eta={est.eta!r} eta_se={est.std_error!r} n={est.n} t_planck={t!r} seed={cfg.seed}")
    out = _setting(args, "out", config, "out", None)
    if out:
        path = Path(out)
        header = not path.exists()
        with open(path, "a", encoding="utf-8", newline="") as handle:
            if header:
                handle.write("t_planck,eta,eta_se,n_samples,seed\n")
            handle.write(f"{t!r},{est.eta!r},{est.std_error!r},{est.n},{cfg.seed}\n")
        print(f"appended row to {path}")
    if est.hit_cap:
        print(
            f"warning: sample cap n_cap={cfg.n_cap} reached before target_se={cfg.target_se}; "
            "partial result above",
            file=sys.stderr,
        )
        return EXIT_PRECISION
    return EXIT_OK


def cmd_figure(args) -> int:
    config = _load_config(args.config)
    mc = _resolve_mc(args, config)
    figure = args.name.replace("-", "_")
    if figure not in sweep.FIGURES:
        raise UsageError(f"unknown figure {args.name!r}; choose from {sweep.FIGURES}")
    out_dir = _setting(args, "out", config, "out", "figures")
    spec = sweep.default_spec(figure, out_dir, mc)
    overrides = {}
    if args.sigma:
        overrides["sigma_sb_values"] = tuple(_parse_sb_list(args.sigma))
    if args.mass:
        overrides["mass_mc_values"] = tuple(_parse_mc_list(args.mass))
    if args.lc:
        overrides["lc_values"] = tuple(sorted(float(v) for v in args.lc.split(",")))
    if args.points:
        overrides.update(n_time_points=args.points, n_sigma_points=args.points)
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    tables = sweep.run_figure(spec)
    for table in tables:
        print(f"wrote {table.csv_path}")
        print(f"wrote {table.manifest_path}")
    return EXIT_OK


def _parse_sb_list(text: str) -> list[float]:
    values = []
    for piece in text.split(","):
        spec = parse_sigma_spec(piece)
        if spec.mode != "multiple_of_sigma_b":
            raise UsageError("figure sigma values must use the sb suffix, e.g. 30sb,60sb")
        values.append(spec.value)
    return sorted(values)


def _parse_mc_list(text: str) -> list[float]:
    values = []
    for piece in text.split(","):
        piece = piece.strip().lower()
        if piece.endswith("mc"):
            piece = piece[:-2]
        try:
            values.append(float(piece))
        except ValueError:
            raise UsageError(f"cannot parse mass value {piece!r} (use e.g. 0.5mc,1mc)")
    return sorted(values)


def cmd_rerun(args) -> int:
    out = sweep.rerun(args.manifest, out_path=args.out, workers=args.workers)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    reports = oracles.run_all(only=args.only)
    if not reports:
        print(f"no oracle matches --only {args.only!r}", file=sys.stderr)
        return EXIT_INVALID
    width = max(len(r.name) for r in reports)
    failed = 0
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(
            f"{report.name:<{width}}  {status}  candidate={report.candidate_value:.10g} "
            f"reference={report.reference_value:.10g} |disc|={abs(report.discrepancy):.3e} "
            f"tol={report.tolerance:.3e}"
        )
        failed += not report.passed
    print(f"{len(reports) - failed}/{len(reports)} oracle checks passed")
    return EXIT_OK if failed == 0 else 1


def cmd_convert(args) -> int:
    chosen = [(k, v) for k, v in (("mass", args.mass), ("length", args.length), ("time", args.time)) if v is not None]
    if not chosen:
        raise UsageError("convert needs one of --mass, --length, --time")
    for kind, text in chosen:
        suffixes = {"mass": ("mp",), "length": ("lp",), "time": ("tp",)}[kind]
        value, _ = _parse_suffixed(str(text), suffixes)
        if value < 0:
            raise UsageError(f"{kind} must be >= 0, got {text!r}")
        si_value, unit = units.to_si(value, kind)
        print(f"{value!r} [planck {kind}] = {si_value:.6e} {unit}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_point_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lc", type=float, default=None, help="cutoff length l_c [Planck lengths] (default 1.0)")
    parser.add_argument("--mass", default=None, help="mass with suffix mp|mc (default 1mp)")
    parser.add_argument("--sigma", default=None, help="width with suffix sb|lb|lp (default 30sb)")
    parser.add_argument("--config", default=None, help="JSON config file (flags override file)")


def _add_mc_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default 20250810)")
    parser.add_argument("--samples", type=int, default=None, help="fixed sample count (overrides --target-se)")
    parser.add_argument("--target-se", dest="target_se", type=float, default=None,
                        help="target standard error (default 1e-3)")
    parser.add_argument("--n-cap", dest="n_cap", type=int, default=None,
                        help="sample cap in target-se mode (default 10^8)")
    parser.add_argument("--chunk-size", dest="chunk_size", type=int, default=None,
                        help="samples per RNG chunk (default 65536)")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"parallel workers (default 1; ${WORKERS_ENV} honored)")
    parser.add_argument("--no-antithetic", action="store_true",
                        help="disable antithetic pairing and sample the sine channel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravpurity",
        description="Purity loss of a self-gravitating Gaussian wavepacket (Planck units).",
    )
    parser.add_argument("--version", action="version", version=f"gravpurity {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_region = sub.add_parser("region", help="classify a parameter point")
    _add_point_options(p_region)
    p_region.set_defaults(func=cmd_region)

    p_purity = sub.add_parser("purity", help="estimate eta at one time (default t = t_F)")
    _add_point_options(p_purity)
    _add_mc_options(p_purity)
    p_purity.add_argument("--t", type=float, default=None, help="time [Planck times] (default t_F)")
    p_purity.add_argument("--force", action="store_true",
                          help="estimate even outside region II or beyond t_F")
    p_purity.add_argument("--out", default=None, help="append a CSV row to this file")
    p_purity.set_defaults(func=cmd_purity)

    p_figure = sub.add_parser("figure", help="emit a figure's CSV tables and manifests")
    p_figure.add_argument("name", choices=[f.replace("_", "-") for f in sweep.FIGURES])
    _add_mc_options(p_figure)
    p_figure.add_argument("--config", default=None, help="JSON config file")
    p_figure.add_argument("--out", default=None, help="output directory (default ./figures)")
    p_figure.add_argument("--sigma", default=None, help="comma list of widths, e.g. 30sb,60sb")
    p_figure.add_argument("--mass", default=None, help="comma list of masses, e.g. 0.5mc,1mc")
    p_figure.add_argument("--lc", default=None, help="comma list of cutoffs, e.g. 1,0.5")
    p_figure.add_argument("--points", type=int, default=None, help="grid points per curve")
    p_figure.set_defaults(func=cmd_figure)

    p_rerun = sub.add_parser("rerun", help="reproduce a table from its manifest")
    p_rerun.add_argument("manifest", help="path to a .manifest.json or .manifest.txt file")
    p_rerun.add_argument("--out", default=None, help="output CSV path")
    p_rerun.add_argument("--workers", type=int, default=None, help="override worker count")
    p_rerun.set_defaults(func=cmd_rerun)

    p_verify = sub.add_parser("verify", help="run the oracle verification suite")
    p_verify.add_argument("--only", default=None, help="run only checks whose name contains this")
    p_verify.set_defaults(func=cmd_verify)

    p_convert = sub.add_parser("convert", help="convert Planck values to SI (display only)")
    p_convert.add_argument("--mass", default=None, help="mass [Planck masses], e.g. 1mp")
    p_convert.add_argument("--length", default=None, help="length [Planck lengths], e.g. 1lp")
    p_convert.add_argument("--time", default=None, help="time [Planck times]")
    p_convert.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidParameterError, sweep.ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RegionViolationError, NoEvolutionWindowError) as exc:
        print(f"region refusal: {exc}", file=sys.stderr)
        return EXIT_REGION
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
