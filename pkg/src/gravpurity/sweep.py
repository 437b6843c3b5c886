"""Figure reproduction: CSV tables with full provenance manifests.

Four table families mirror the model's standard plots: the region map
and its boundary curves, eta against time, the final purity against
sigma/lambda_bar, and the final purity against m/M_C.  Every CSV is
accompanied by a manifest (flat ``key=value`` text plus a JSON mirror)
recording the exact resolved parameters, grids, seeds and sample
counts, sufficient to re-run the table bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, closedform, mcpurity
from .closedform import RegionLabel
from .mcpurity import McConfig
from .units import InvalidParameterError, ModelParams

__all__ = [
    "FIGURES",
    "FigureSpec",
    "FigureTable",
    "ManifestError",
    "VersionMismatchError",
    "default_spec",
    "run_figure",
    "rerun",
]

FIGURES = ("region_map", "purity_time", "purity_sigma", "purity_mass")

CSV_COLUMNS = {
    "purity_time": ("t_planck", "t_over_tF", "eta", "eta_se", "n_samples"),
    "purity_sigma": ("sigma_over_lambda", "sigma_planck", "tF_planck", "eta_F", "eta_se", "region"),
    "purity_mass": ("m_over_mc", "lc_planck", "sigma_planck", "tF_planck", "eta_F", "eta_se"),
    "region_map": ("curve", "m_over_mc", "sigma_over_lambda"),
}

_MANIFEST_REQUIRED = ("artifact_version", "figure", "table", "seed")


class ManifestError(ValueError):
    """A manifest is unreadable or missing a required field."""


class VersionMismatchError(ManifestError):
    """Manifest was produced by a different artifact version."""


@dataclass(frozen=True)
class FigureSpec:
    """What to sweep and where to write it.

    Fields not used by a given figure are ignored; lists hold the line
    variants a figure draws (masses for purity_time/purity_sigma,
    cutoffs for purity_mass).
    """

    figure: str
    output_dir: str | Path
    lc_values: tuple[float, ...] = (1.0,)
    mass_mc_values: tuple[float, ...] = (0.5,)
    sigma_sb_values: tuple[float, ...] = (30.0,)
    mu_grid: tuple[float, ...] = tuple(np.linspace(0.1, 1.0, 10))
    n_time_points: int = 24
    n_sigma_points: int = 16
    mc: McConfig = field(default_factory=McConfig)

    def __post_init__(self) -> None:
        if self.figure not in FIGURES:
            raise InvalidParameterError(f"figure must be one of {FIGURES}, got {self.figure!r}")
        for name, grid in (
            ("lc_values", self.lc_values),
            ("mass_mc_values", self.mass_mc_values),
            ("sigma_sb_values", self.sigma_sb_values),
            ("mu_grid", self.mu_grid),
        ):
            if len(grid) == 0:
                raise InvalidParameterError(f"{name} must be non-empty")
            if any(v <= 0 for v in grid):
                raise InvalidParameterError(f"{name} values must be > 0")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise InvalidParameterError(f"{name} must be strictly increasing")
        if self.n_time_points < 2 or self.n_sigma_points < 2:
            raise InvalidParameterError("grids need at least 2 points")


@dataclass(frozen=True)
class FigureTable:
    name: str
    csv_path: Path
    manifest_path: Path


def default_spec(figure: str, output_dir: str | Path, mc: McConfig | None = None) -> FigureSpec:
    """Documented default grids for each figure."""
    mc = mc if mc is not None else McConfig()
    common = dict(output_dir=output_dir, mc=mc)
    if figure == "purity_time":
        return FigureSpec(figure=figure, mass_mc_values=(0.5,), sigma_sb_values=(30.0, 60.0), **common)
    if figure == "purity_sigma":
        return FigureSpec(figure=figure, mass_mc_values=(0.5, 1.0), **common)
    if figure == "purity_mass":
        return FigureSpec(figure=figure, lc_values=(0.5, 1.0), sigma_sb_values=(30.0,), **common)
    if figure == "region_map":
        return FigureSpec(figure=figure, mu_grid=tuple(np.geomspace(0.05, 1.0, 33)), **common)
    raise InvalidParameterError(f"figure must be one of {FIGURES}, got {figure!r}")


# ---------------------------------------------------------------------------
# formatting and I/O
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    """Locale-independent cell: repr round-trips floats exactly."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path_base: Path, manifest: dict) -> Path:
    txt_path = path_base.with_suffix(".manifest.txt")
    json_path = path_base.with_suffix(".manifest.json")
    lines = []
    for key, value in manifest.items():
        encoded = json.dumps(value) if isinstance(value, (list, bool)) or value is None else _fmt(value)
        lines.append(f"{key}={encoded}")
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    json_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return json_path


def _read_manifest(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    manifest: dict = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition("=")
        try:
            manifest[key] = json.loads(raw)
        except json.JSONDecodeError:
            manifest[key] = raw
    return manifest


def _common_manifest(spec_mc: McConfig, figure: str, table: str) -> dict:
    return {
        "artifact": "gravpurity",
        "artifact_version": __version__,
        "figure": figure,
        "table": table,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": spec_mc.seed,
        "n_samples": spec_mc.n_samples,
        "target_se": spec_mc.target_se,
        "n_cap": spec_mc.n_cap,
        "chunk_size": spec_mc.chunk_size,
        "workers": spec_mc.workers,
        "antithetic": spec_mc.antithetic,
    }


def _run_points(jobs, workers: int) -> list:
    """Evaluate per-point jobs, results in grid order regardless of scheduling."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda job: job(), jobs))


# ---------------------------------------------------------------------------
# table builders (shared by run_figure and rerun)
# ---------------------------------------------------------------------------


def _point_config(mc: McConfig) -> McConfig:
    # grid points are dispatched concurrently; the per-point estimator
    # runs its chunks sequentially so pools do not nest
    return replace(mc, workers=1)


def _purity_time_rows(mass: float, l_c: float, sigma: float, t_grid: list[float], mc: McConfig):
    params = ModelParams(l_c=l_c, mass=mass, sigma=sigma)
    tf = closedform.t_f(params)
    point_cfg = _point_config(mc)

    jobs = [
        (lambda tt=t, i=i: mcpurity.estimate_purity(tt, params, point_cfg, force=True, stream=1 + i))
        for i, t in enumerate(t_grid)
    ]
    estimates = _run_points(jobs, mc.workers)
    rows = [(t, t / tf, est.eta, est.std_error, est.n) for t, est in zip(t_grid, estimates)]
    return rows, estimates, tf


def _purity_sigma_rows(mass: float, l_c: float, sigma_grid: list[float], mc: McConfig):
    lam = 1.0 / mass
    point_cfg = _point_config(mc)
    labels = [closedform.classify_region(ModelParams(l_c=l_c, mass=mass, sigma=s)) for s in sigma_grid]

    jobs = []
    for i, (sigma, label) in enumerate(zip(sigma_grid, labels)):
        if label is RegionLabel.REGION_II:
            params = ModelParams(l_c=l_c, mass=mass, sigma=sigma)
            jobs.append(
                lambda p=params, i=i: mcpurity.estimate_purity(
                    closedform.t_f(p), p, point_cfg, force=True, stream=1 + i
                )
            )
        else:
            jobs.append(lambda: None)
    estimates = _run_points(jobs, mc.workers)

    rows = []
    for sigma, label, est in zip(sigma_grid, labels, estimates):
        if est is None:
            rows.append((sigma / lam, sigma, None, None, None, label.value))
        else:
            tf = closedform.t_f(ModelParams(l_c=l_c, mass=mass, sigma=sigma))
            rows.append((sigma / lam, sigma, tf, est.eta, est.std_error, label.value))
    return rows, estimates


def _purity_mass_rows(l_c: float, masses: list[float], sigmas: list[float], mc: McConfig):
    point_cfg = _point_config(mc)
    jobs = []
    meta = []
    for i, (mass, sigma) in enumerate(zip(masses, sigmas)):
        params = ModelParams(l_c=l_c, mass=mass, sigma=sigma)
        label = closedform.classify_region(params)
        meta.append((params, label))
        if label is RegionLabel.REGION_II:
            jobs.append(
                lambda p=params, i=i: mcpurity.estimate_purity(
                    closedform.t_f(p), p, point_cfg, force=True, stream=1 + i
                )
            )
        else:
            jobs.append(lambda: None)
    estimates = _run_points(jobs, mc.workers)

    rows = []
    for (params, label), est in zip(meta, estimates):
        mu = params.mass * params.l_c
        if est is None:
            rows.append((mu, params.l_c, params.sigma, None, None, None))
        else:
            rows.append((mu, params.l_c, params.sigma, closedform.t_f(params), est.eta, est.std_error))
    return rows, estimates


def _region_map_rows(l_c: float, mu_grid: list[float], y_grid: list[float]):
    rows = []
    for mu in mu_grid:
        lam_sq_factor = 1.5 * np.sqrt(3.0) * l_c * l_c / (mu * mu)  # sigma_B / lambda_bar
        rows.append(("sigma_b", mu, float(lam_sq_factor)))
    for mu in mu_grid:
        rows.append(("quantum_minimum", mu, 0.5))
    for mu in mu_grid:
        rows.append(("cutoff_width", mu, mu))  # sigma = l_c line: sigma/lambda_bar = mu
    for y in y_grid:
        rows.append(("heisenberg_cut", 1.0, y))
    return rows


# ---------------------------------------------------------------------------
# figure runner
# ---------------------------------------------------------------------------


def _emit(
    out_dir: Path,
    figure: str,
    table: str,
    columns: tuple[str, ...],
    rows: list[tuple],
    manifest: dict,
) -> FigureTable:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{table}.csv"
    _write_csv(csv_path, columns, rows)
    manifest["csv_sha256"] = _sha256(csv_path)
    manifest_path = _write_manifest(out_dir / table, manifest)
    return FigureTable(name=table, csv_path=csv_path, manifest_path=manifest_path)


def _label_num(value: float) -> str:
    text = f"{value:g}"
    return text.replace(".", "p").replace("-", "m")


def run_figure(spec: FigureSpec) -> list[FigureTable]:
    """Produce the CSV table(s) and manifest(s) for one figure."""
    out_dir = Path(spec.output_dir)
    tables: list[FigureTable] = []
    started = time.perf_counter()

    if spec.figure == "purity_time":
        l_c = spec.lc_values[0]
        for mass_mc in spec.mass_mc_values:
            mass = mass_mc / l_c
            for s_sb in spec.sigma_sb_values:
                sigma = s_sb * closedform.sigma_b_of_mass(mass)
                params = ModelParams(l_c=l_c, mass=mass, sigma=sigma)
                if closedform.classify_region(params) is not RegionLabel.REGION_II:
                    raise InvalidParameterError(
                        f"purity_time point (mass={mass}, sigma={sigma}) is outside region II"
                    )
                tf = closedform.t_f(params)
                t_grid = [float(t) for t in np.geomspace(tf / 100.0, tf, spec.n_time_points)]
                t_grid[-1] = tf  # geomspace endpoint up to rounding; pin it
                rows, estimates, tf = _purity_time_rows(mass, l_c, sigma, t_grid, spec.mc)
                table = f"purity_time_m{_label_num(mass_mc)}mc_s{_label_num(s_sb)}sb"
                manifest = _common_manifest(spec.mc, spec.figure, table)
                manifest.update(
                    {
                        "lc_planck": l_c,
                        "mass_planck": mass,
                        "sigma_planck": sigma,
                        "tf_planck": tf,
                        "grid_kind": "t_planck",
                        "grid": t_grid,
                        "per_point_n": [e.n for e in estimates],
                        "per_point_se": [e.std_error for e in estimates],
                        "wall_time_s": time.perf_counter() - started,
                    }
                )
                tables.append(_emit(out_dir, spec.figure, table, CSV_COLUMNS[spec.figure], rows, manifest))

    elif spec.figure == "purity_sigma":
        l_c = spec.lc_values[0]
        for mass_mc in spec.mass_mc_values:
            mass = mass_mc / l_c
            lam = 1.0 / mass
            sb = closedform.sigma_b_of_mass(mass)
            sigma_grid = [float(s) for s in np.geomspace(sb, 10.0 * sb, spec.n_sigma_points)]
            rows, estimates = _purity_sigma_rows(mass, l_c, sigma_grid, spec.mc)
            table = f"purity_sigma_m{_label_num(mass_mc)}mc"
            manifest = _common_manifest(spec.mc, spec.figure, table)
            manifest.update(
                {
                    "lc_planck": l_c,
                    "mass_planck": mass,
                    "grid_kind": "sigma_planck",
                    "grid": sigma_grid,
                    "sigma_over_lambda": [s / lam for s in sigma_grid],
                    "per_point_n": [None if e is None else e.n for e in estimates],
                    "per_point_se": [None if e is None else e.std_error for e in estimates],
                    "wall_time_s": time.perf_counter() - started,
                }
            )
            tables.append(_emit(out_dir, spec.figure, table, CSV_COLUMNS[spec.figure], rows, manifest))

    elif spec.figure == "purity_mass":
        s_sb = spec.sigma_sb_values[0]
        for l_c in spec.lc_values:
            masses = [mu / l_c for mu in spec.mu_grid]
            sigmas = [s_sb * closedform.sigma_b_of_mass(m) for m in masses]
            rows, estimates = _purity_mass_rows(l_c, masses, sigmas, spec.mc)
            table = f"purity_mass_lc{_label_num(l_c)}"
            manifest = _common_manifest(spec.mc, spec.figure, table)
            manifest.update(
                {
                    "lc_planck": l_c,
                    "sigma_sb": s_sb,
                    "grid_kind": "m_over_mc",
                    "grid": list(spec.mu_grid),
                    "per_point_mass": masses,
                    "per_point_sigma": sigmas,
                    "per_point_n": [None if e is None else e.n for e in estimates],
                    "per_point_se": [None if e is None else e.std_error for e in estimates],
                    "wall_time_s": time.perf_counter() - started,
                }
            )
            tables.append(_emit(out_dir, spec.figure, table, CSV_COLUMNS[spec.figure], rows, manifest))

    elif spec.figure == "region_map":
        l_c = spec.lc_values[0]
        mu_grid = [float(m) for m in spec.mu_grid]
        y_max = 1.5 * float(np.sqrt(3.0)) * l_c * l_c / (mu_grid[0] * mu_grid[0])
        y_grid = [float(y) for y in np.geomspace(0.25, y_max, len(mu_grid))]
        rows = _region_map_rows(l_c, mu_grid, y_grid)
        table = "region_map"
        manifest = _common_manifest(spec.mc, spec.figure, table)
        manifest.update(
            {
                "lc_planck": l_c,
                "grid_kind": "m_over_mc",
                "grid": mu_grid,
                "y_grid": y_grid,
                "wall_time_s": time.perf_counter() - started,
            }
        )
        tables.append(_emit(out_dir, spec.figure, table, CSV_COLUMNS[spec.figure], rows, manifest))

    return tables


# ---------------------------------------------------------------------------
# manifest-driven rerun
# ---------------------------------------------------------------------------


def _manifest_get(manifest: dict, key: str):
    if key not in manifest:
        raise ManifestError(f"manifest missing required field {key!r}")
    return manifest[key]


def _mc_from_manifest(manifest: dict, workers: int | None) -> McConfig:
    return McConfig(
        seed=int(_manifest_get(manifest, "seed")),
        n_samples=manifest.get("n_samples"),
        target_se=_manifest_get(manifest, "target_se"),
        n_cap=int(_manifest_get(manifest, "n_cap")),
        chunk_size=int(_manifest_get(manifest, "chunk_size")),
        workers=int(workers if workers is not None else _manifest_get(manifest, "workers")),
        antithetic=bool(_manifest_get(manifest, "antithetic")),
    )


def rerun(manifest_path: str | Path, out_path: str | Path | None = None, workers: int | None = None) -> Path:
    """Re-produce a table bit-identically from its manifest.

    ``workers`` only tunes parallelism; the eta column is byte-identical
    for any value.  Refuses manifests from other artifact versions.
    """
    manifest = _read_manifest(manifest_path)
    for key in _MANIFEST_REQUIRED:
        _manifest_get(manifest, key)
    version = manifest["artifact_version"]
    if version != __version__:
        raise VersionMismatchError(
            f"manifest written by gravpurity {version}, running {__version__}; "
            "re-generate the table instead of rerunning"
        )
    figure = _manifest_get(manifest, "figure")
    table = _manifest_get(manifest, "table")
    mc = _mc_from_manifest(manifest, workers)

    if figure == "purity_time":
        rows, _, _ = _purity_time_rows(
            _manifest_get(manifest, "mass_planck"),
            _manifest_get(manifest, "lc_planck"),
            _manifest_get(manifest, "sigma_planck"),
            list(_manifest_get(manifest, "grid")),
            mc,
        )
    elif figure == "purity_sigma":
        rows, _ = _purity_sigma_rows(
            _manifest_get(manifest, "mass_planck"),
            _manifest_get(manifest, "lc_planck"),
            list(_manifest_get(manifest, "grid")),
            mc,
        )
    elif figure == "purity_mass":
        rows, _ = _purity_mass_rows(
            _manifest_get(manifest, "lc_planck"),
            list(_manifest_get(manifest, "per_point_mass")),
            list(_manifest_get(manifest, "per_point_sigma")),
            mc,
        )
    elif figure == "region_map":
        rows = _region_map_rows(
            _manifest_get(manifest, "lc_planck"),
            list(_manifest_get(manifest, "grid")),
            list(_manifest_get(manifest, "y_grid")),
        )
    else:
        raise ManifestError(f"manifest names unknown figure {figure!r}")

    if out_path is None:
        out_path = Path(manifest_path).parent / f"{table}.rerun.csv"
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out_path, CSV_COLUMNS[figure], rows)
    return out_path
