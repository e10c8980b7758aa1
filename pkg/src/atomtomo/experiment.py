"""Experiment configuration and the phantom -> project -> reconstruct -> evaluate runner."""

from __future__ import annotations

import configparser
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import io
from .adcg_recon import DEFAULT_ALPHAS, ADCGOptions, ContinuationSchedule, adcg, continuation
from .energy import LJ_TABLE, LJParams
from .forward import DetectorGeometry, add_noise, build_system_matrix, project_config
from .grid_recon import GridSpec, fista, sirt
from .metrics import PeakDetectOptions, data_discrepancy, detect_peaks, match_atoms
from .phantom import DEFAULT_LATTICES, FireOptions, make_phantom
from .sa_recon import SAOptions, anneal
from .simplex import NelderMeadOptions

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "run_sa_ensemble",
    "SUMMARY_HEADER",
    "ALGORITHMS",
    "DEFECTS",
]

log = logging.getLogger(__name__)

DEFECTS = ("interstitial", "vacancy", "edge")
ALGORITHMS = ("sirt", "fista", "sa", "adcg", "adcg_energy")
SUMMARY_HEADER = "defect,algorithm,n_atoms,mean_distance,discrepancy,runtime_s"


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# allowed keys per section, with their parsers
_SCHEMA = {
    "experiment": {"output_dir": str, "defects": _names, "algorithms": _names, "seed": int,
                   "timing": _bool, "noise_level": float},
    "geometry": {"angles": _floats, "pixel_size": float, "gaussian_width": float, "bin_count": int},
    "phantom": {"clamp_boundary": _bool},
    "sirt": {"iterations": int},
    "fista": {"iterations": int, "lambda": float},
    "peaks": {"threshold": float, "min_separation_rm": float},
    "sa": {"seeds": int, "beta_initial": float, "beta_max": float, "beta_growth": float,
           "r_min_rm": float, "max_outer_iterations": int, "moves_per_level": int},
    "adcg": {"coarse_nodes_per_side": int, "fine_nodes_per_side": int, "k_max": int, "r_min_rm": float,
             "sweeps": int, "tie_noise": float, "simplex_scale": float, "x_tolerance": float,
             "f_tolerance": float, "max_evaluations": int},
    "continuation": {"alphas": _floats, "jump_factor": float},
}
_DEFECT_KEYS = {"rows": int, "cols": int, "epsilon": float, "sigma": float, "r_cut": float, "angles": _floats}


@dataclass
class DefectSetup:
    name: str
    params: LJParams
    rows: int
    cols: int
    angles: tuple[float, ...]


@dataclass
class ExperimentConfig:
    output_dir: str = "atomtomo_out"
    defects: tuple[str, ...] = DEFECTS
    algorithms: tuple[str, ...] = ALGORITHMS
    seed: int = 0
    timing: bool = False
    noise_level: float = 0.0
    pixel_size: float = 0.01
    gaussian_width: float = 0.01
    bin_count: int = 0
    default_angles: tuple[float, ...] = (0.0, 90.0)
    clamp_boundary: bool = True
    sirt_iterations: int = 200
    fista_iterations: int = 2000
    fista_lambda: float = 0.1
    peaks: dict = field(default_factory=lambda: {"threshold": 0.2, "min_separation_rm": 0.5})
    sa: dict = field(default_factory=dict)
    adcg: dict = field(default_factory=dict)
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    jump_factor: float = 5.0
    setups: dict = field(default_factory=dict)

    def setup(self, defect: str) -> DefectSetup:
        if defect in self.setups:
            return self.setups[defect]
        rows, cols = DEFAULT_LATTICES[defect]
        angles = (0.0, 45.0, 90.0) if defect == "vacancy" else self.default_angles
        return DefectSetup(defect, LJ_TABLE[defect], rows, cols, angles)

    def geometry(self, angles) -> DetectorGeometry:
        return DetectorGeometry(tuple(angles), self.pixel_size, self.bin_count, self.gaussian_width)

    def peak_options(self, params: LJParams) -> PeakDetectOptions:
        return PeakDetectOptions(self.peaks["threshold"], self.peaks["min_separation_rm"] * params.r_m)

    def sa_options(self, params: LJParams, seed: int) -> SAOptions:
        kw = {k: v for k, v in self.sa.items() if k not in ("seeds", "r_min_rm")}
        return SAOptions(r_min=self.sa.get("r_min_rm", 0.7) * params.r_m, seed=seed, **kw)

    def adcg_options(self, params: LJParams) -> ADCGOptions:
        a = dict(self.adcg)
        nm = {}
        for src, dst in (("simplex_scale", "initial_simplex_scale"), ("x_tolerance", "x_tolerance"),
                         ("f_tolerance", "f_tolerance"), ("max_evaluations", "max_evaluations")):
            if src in a:
                nm[dst] = a.pop(src)
        r_min = a.pop("r_min_rm", 0.7) * params.r_m
        return ADCGOptions(r_min=r_min, local_opt=NelderMeadOptions(**nm), seed=self.seed, **a)


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment file; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None

    cfg = ExperimentConfig()
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section.startswith("defect."):
            schema = _DEFECT_KEYS
            if section[7:] not in DEFECTS:
                raise ConfigError(f"unknown defect section [{section}]")
        elif section in _SCHEMA:
            schema = _SCHEMA[section]
        else:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            try:
                values[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}") from None

    ex = values.get("experiment", {})
    for key in ("output_dir", "seed", "timing", "noise_level"):
        if key in ex:
            setattr(cfg, key, ex[key])
    if "defects" in ex:
        cfg.defects = ex["defects"]
    if "algorithms" in ex:
        cfg.algorithms = ex["algorithms"]
    for d in cfg.defects:
        if d not in DEFECTS:
            raise ConfigError(f"unknown defect '{d}'")
    for a in cfg.algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm '{a}'")

    geo = values.get("geometry", {})
    cfg.pixel_size = geo.get("pixel_size", cfg.pixel_size)
    cfg.gaussian_width = geo.get("gaussian_width", cfg.gaussian_width)
    cfg.bin_count = geo.get("bin_count", cfg.bin_count)
    cfg.default_angles = geo.get("angles", cfg.default_angles)
    cfg.clamp_boundary = values.get("phantom", {}).get("clamp_boundary", cfg.clamp_boundary)
    cfg.sirt_iterations = values.get("sirt", {}).get("iterations", cfg.sirt_iterations)
    fi = values.get("fista", {})
    cfg.fista_iterations = fi.get("iterations", cfg.fista_iterations)
    cfg.fista_lambda = fi.get("lambda", cfg.fista_lambda)
    cfg.peaks.update(values.get("peaks", {}))
    cfg.sa = values.get("sa", {})
    cfg.adcg = values.get("adcg", {})
    co = values.get("continuation", {})
    cfg.alphas = co.get("alphas", cfg.alphas)
    cfg.jump_factor = co.get("jump_factor", cfg.jump_factor)

    for d in cfg.defects:
        base = cfg.setup(d)
        over = values.get(f"defect.{d}", {})
        params = LJParams(over.get("epsilon", base.params.epsilon), over.get("sigma", base.params.sigma),
                          over.get("r_cut", base.params.r_cut))
        cfg.setups[d] = replace(base, params=params, rows=over.get("rows", base.rows),
                                cols=over.get("cols", base.cols), angles=over.get("angles", base.angles))
    # surface option errors now rather than deep inside a cell
    try:
        ContinuationSchedule(cfg.alphas, cfg.jump_factor)
        for d in cfg.defects:
            p = cfg.setups[d].params
            cfg.sa_options(p, 0)
            cfg.adcg_options(p)
            cfg.peak_options(p)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid option: {exc}") from None
    return cfg


def run_sa_ensemble(matrix, y, opts: SAOptions, seeds: int):
    """Best-of-``seeds`` annealing runs (seeds ``opts.seed`` onward) by data misfit."""
    best = None
    for k in range(seeds):
        res = anneal(matrix, y, replace(opts, seed=opts.seed + k))
        if best is None or res.discrepancy < best.discrepancy:
            best = res
    return best


@dataclass
class CellResult:
    defect: str
    algorithm: str
    n_atoms: int
    mean_distance: float
    discrepancy: float
    runtime_s: float


def _fmt(v: float) -> str:
    return "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.10g}"


def _run_cell(cfg: ExperimentConfig, defect: str, algorithm: str, out: Path) -> CellResult:
    setup = cfg.setup(defect)
    truth = io.read_atoms(out / defect / "truth.txt")
    y = io.read_sinogram(out / defect / "sinogram.txt")
    params = setup.params
    cell = out / defect / algorithm
    cell.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()

    if algorithm in ("sirt", "fista"):
        matrix = build_system_matrix(GridSpec(100), y.geometry)
        if algorithm == "sirt":
            image = sirt(matrix, y, cfg.sirt_iterations)
        else:
            image = fista(matrix, y, cfg.fista_lambda, cfg.fista_iterations)
        io.write_grid_image(cell / "image.txt", image)
        atoms = detect_peaks(image, cfg.peak_options(params))
        r = matrix.entries @ image.weights - y.flat
        disc = float(r @ r)
    elif algorithm == "sa":
        matrix = build_system_matrix(GridSpec(100), y.geometry)
        res = run_sa_ensemble(matrix, y, cfg.sa_options(params, cfg.seed), cfg.sa.get("seeds", 5))
        io.write_sa_log(cell / "sa_log.csv", res.log)
        atoms = res.positions()
        disc = data_discrepancy(atoms, y)
    elif algorithm == "adcg":
        atoms = adcg(y, params, 0.0, cfg.adcg_options(params))
        disc = data_discrepancy(atoms, y)
    else:
        res = continuation(y, params, ContinuationSchedule(cfg.alphas, cfg.jump_factor), cfg.adcg_options(params))
        (cell / "continuation.csv").write_text(res.to_csv())
        atoms = res.selected
        disc = data_discrepancy(atoms, y)
    elapsed = time.perf_counter() - start

    io.write_atoms(cell / "atoms.txt", atoms)
    report = match_atoms(atoms, truth)
    (cell / "match.txt").write_text(report.to_text())
    return CellResult(defect, algorithm, len(atoms), report.mean_distance, disc, elapsed)


def _cell_job(args):
    cfg, defect, algorithm, out = args
    try:
        return _run_cell(cfg, defect, algorithm, out)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise RuntimeError(f"stage reconstruct/{defect}/{algorithm} failed: {exc}") from exc


def prepare_defect(cfg: ExperimentConfig, defect: str, out: Path) -> None:
    setup = cfg.setup(defect)
    d = out / defect
    d.mkdir(parents=True, exist_ok=True)
    try:
        truth = make_phantom(defect, setup.params, setup.rows, setup.cols, fire=FireOptions(),
                             clamp_boundary=cfg.clamp_boundary)
    except Exception as exc:
        raise RuntimeError(f"stage phantom/{defect} failed: {exc}") from exc
    io.write_atoms(d / "truth.txt", truth)
    try:
        y = project_config(truth, cfg.geometry(setup.angles))
        if cfg.noise_level > 0:
            y = add_noise(y, cfg.noise_level, cfg.seed)
    except Exception as exc:
        raise RuntimeError(f"stage project/{defect} failed: {exc}") from exc
    io.write_sinogram(d / "sinogram.txt", y)


def thread_cap() -> int:
    raw = os.environ.get("ATOMTOMO_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ATOMTOMO_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> list[CellResult]:
    """Run every (defect, algorithm) cell and write ``summary.csv`` / ``summary.txt``.

    Cells run in a process pool capped by ``ATOMTOMO_THREADS`` (default 1);
    the summary is written in configuration order regardless.  Wall times
    go to ``timings.csv``; the summary's ``runtime_s`` column holds them only
    when ``timing`` is on, so that repeated runs give identical summaries.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for defect in cfg.defects:
        prepare_defect(cfg, defect, out)

    jobs = [(cfg, d, a, out) for d in cfg.defects for a in cfg.algorithms]
    workers = min(thread_cap(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]

    rows = [SUMMARY_HEADER]
    timings = ["defect,algorithm,runtime_s"]
    for r in results:
        runtime = _fmt(r.runtime_s) if cfg.timing else "NA"
        rows.append(f"{r.defect},{r.algorithm},{r.n_atoms},{_fmt(r.mean_distance)},{_fmt(r.discrepancy)},{runtime}")
        timings.append(f"{r.defect},{r.algorithm},{r.runtime_s:.3f}")
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    (out / "timings.csv").write_text("\n".join(timings) + "\n")
    (out / "summary.txt").write_text(summary_table(results))
    return results


def summary_table(results) -> str:
    lines = [f"{'defect':<14}{'algorithm':<13}{'atoms':>6}  {'mean dist':>10}  {'misfit':>10}"]
    for r in results:
        md = "--" if math.isnan(r.mean_distance) else f"{r.mean_distance:.4f}"
        lines.append(f"{r.defect:<14}{r.algorithm:<13}{r.n_atoms:>6}  {md:>10}  {r.discrepancy:>10.4g}")
    return "\n".join(lines) + "\n"
