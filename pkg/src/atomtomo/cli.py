"""Command-line entry point: phantom, project, reconstruct, evaluate, experiment."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from importlib import resources
from pathlib import Path

from . import io
from .adcg_recon import DEFAULT_ALPHAS, ADCGOptions, ContinuationSchedule, adcg, continuation
from .energy import LJ_TABLE, LJParams
from .experiment import ConfigError, load_config, run_experiment, run_sa_ensemble, summary_table
from .forward import DetectorGeometry, add_noise, project_config
from .grid_recon import GridImage, GridSpec, fista, sirt
from .metrics import PeakDetectOptions, data_discrepancy, detect_peaks, match_atoms
from .phantom import make_phantom
from .sa_recon import SAOptions

log = logging.getLogger("atomtomo")


class UsageError(Exception):
    pass


def _angles(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(a) for a in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle list {text!r}") from None


def _site(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"site must be 'row,col', got {text!r}") from None
    return r, c


def _lj(args) -> LJParams:
    base = LJ_TABLE[args.defect] if args.defect else None
    eps = args.epsilon if args.epsilon is not None else (base.epsilon if base else None)
    sig = args.sigma if args.sigma is not None else (base.sigma if base else None)
    cut = args.r_cut if args.r_cut is not None else (base.r_cut if base else None)
    if None in (eps, sig, cut):
        raise UsageError("Lennard-Jones parameters needed: give --defect or all of --epsilon/--sigma/--r-cut")
    return LJParams(eps, sig, cut)


def _add_lj_flags(p, defect_required=False):
    p.add_argument("--defect", choices=sorted(LJ_TABLE), required=defect_required,
                   help="defect type; selects the default Lennard-Jones parameters")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--r-cut", type=float)


def cmd_phantom(args) -> int:
    params = _lj(args)
    atoms = make_phantom(args.defect, params, args.rows, args.cols, site=args.site,
                         clamp_boundary=not args.free_boundary)
    out = Path(args.out)
    io.write_atoms(out, atoms)
    manifest = [
        f"defect = {args.defect}",
        f"epsilon = {params.epsilon!r}",
        f"sigma = {params.sigma!r}",
        f"r_cut = {params.r_cut!r}",
        f"rows = {args.rows or ''}",
        f"cols = {args.cols or ''}",
        f"site = {'' if args.site is None else '%d,%d' % args.site}",
        f"clamp_boundary = {not args.free_boundary}",
        f"n_atoms = {len(atoms)}",
    ]
    out.with_name(out.name + ".manifest").write_text("\n".join(manifest) + "\n")
    print(f"wrote {len(atoms)} atoms to {out}")
    return 0


def cmd_project(args) -> int:
    atoms = io.read_atoms(args.atoms)
    geometry = DetectorGeometry(args.angles, args.d, args.bins, args.sigma_width)
    y = project_config(atoms, geometry)
    if args.noise:
        y = add_noise(y, args.noise, args.seed)
    io.write_sinogram(args.out, y)
    print(f"wrote {geometry.n_angles} x {geometry.bin_count} sinogram to {args.out}")
    return 0


def _alpha_schedule(text: str) -> tuple[float, ...]:
    if text == "auto":
        return DEFAULT_ALPHAS
    return _angles(text)


def cmd_reconstruct(args) -> int:
    y = io.read_sinogram(args.sinogram)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    algo = args.algorithm
    if algo in ("sirt", "fista"):
        from .forward import build_system_matrix

        matrix = build_system_matrix(GridSpec(args.grid), y.geometry)
        if algo == "sirt":
            image = sirt(matrix, y, args.iterations or 200)
        else:
            image = fista(matrix, y, args.lam, args.iterations or 2000)
        io.write_grid_image(out / "image.txt", image)
        r = matrix.entries @ image.weights - y.flat
        (out / "run.log").write_text(f"algorithm = {algo}\ndiscrepancy = {float(r @ r)!r}\n")
        print(f"wrote {out / 'image.txt'}")
        return 0

    params = _lj(args)
    if algo == "sa":
        from .forward import build_system_matrix

        matrix = build_system_matrix(GridSpec(args.grid), y.geometry)
        opts = SAOptions(r_min=args.r_min_rm * params.r_m, seed=args.seed)
        res = run_sa_ensemble(matrix, y, opts, args.seeds)
        io.write_sa_log(out / "sa_log.csv", res.log)
        atoms = res.positions()
    else:
        opts = ADCGOptions(r_min=args.r_min_rm * params.r_m, seed=args.seed)
        if args.alpha_schedule is not None:
            res = continuation(y, params, ContinuationSchedule(args.alpha_schedule), opts)
            (out / "continuation.csv").write_text(res.to_csv())
            atoms = res.selected
        else:
            atoms = adcg(y, params, args.alpha, opts)
    io.write_atoms(out / "atoms.txt", atoms)
    print(f"wrote {len(atoms)} atoms to {out / 'atoms.txt'} (discrepancy {data_discrepancy(atoms, y):.6g})")
    return 0


def cmd_evaluate(args) -> int:
    truth = io.read_atoms(args.truth)
    recon = io.read_result(args.recon)
    if isinstance(recon, GridImage):
        r_m = _lj(args).r_m if (args.defect or args.sigma) else None
        sep = args.min_separation if args.min_separation is not None else (0.5 * r_m if r_m else None)
        if sep is None:
            raise UsageError("image input needs --min-separation or --defect/--sigma for peak picking")
        recon = detect_peaks(recon, PeakDetectOptions(args.threshold, sep))
    report = match_atoms(recon, truth)
    text = report.to_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    mean = "NA" if math.isnan(report.mean_distance) else f"{report.mean_distance:.10g}"
    row = f"{args.label},{report.count_reconstructed},{mean}"
    print(f"summary: {row}")
    return 0


def cmd_experiment(args) -> int:
    path = args.config
    if not Path(path).exists():
        bundled = resources.files("atomtomo") / "configs" / path
        if bundled.is_file():
            path = str(bundled)
    cfg = load_config(path)
    results = run_experiment(cfg, args.out_dir)
    sys.stdout.write(summary_table(results))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomtomo", description="grid-free atomic tomography toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a relaxed defect phantom")
    _add_lj_flags(p, defect_required=True)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--site", type=_site, help="defect site as 'row,col'")
    p.add_argument("--free-boundary", action="store_true", help="relax the outer ring too")
    p.add_argument("--seedless", action="store_true", help="accepted for symmetry; phantoms are deterministic")
    p.add_argument("--out", default="phantom.txt")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="project an atom list to a sinogram")
    p.add_argument("atoms")
    p.add_argument("--angles", type=_angles, default=(0.0, 90.0), help="comma-separated degrees")
    p.add_argument("--d", type=float, default=0.01, help="detector pixel size")
    p.add_argument("--sigma-width", type=float, default=0.01, help="Gaussian width on the detector")
    p.add_argument("--bins", type=int, default=0, help="bin count (0: cover the diagonal)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sinogram.txt")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("reconstruct", help="reconstruct from a sinogram")
    p.add_argument("sinogram")
    p.add_argument("--algorithm", required=True, choices=["sirt", "fista", "sa", "adcg"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--grid", type=int, default=100, help="fine grid nodes per side")
    p.add_argument("--seeds", type=int, default=5, help="annealing ensemble size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--alpha-schedule", type=_alpha_schedule,
                   help="'auto' or comma-separated alphas for continuation")
    p.add_argument("--r-min-rm", type=float, default=0.7, help="minimum distance as a multiple of r_m")
    _add_lj_flags(p)
    p.add_argument("--out-dir", default="recon")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="match a reconstruction against the truth")
    p.add_argument("recon")
    p.add_argument("truth")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--min-separation", type=float)
    p.add_argument("--label", default="recon")
    p.add_argument("--out")
    _add_lj_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a configured experiment")
    p.add_argument("config", help="INI file, or the name of a bundled one (table1.cfg, fig4.cfg)")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, io.FormatError, ValueError, RuntimeError, OSError) as exc:
        reason = " ".join(str(exc).split())
        print(f"atomtomo: error: {reason}", file=sys.stderr)
        return 2 if isinstance(exc, (UsageError, ConfigError)) else 1


if __name__ == "__main__":
    sys.exit(main())
