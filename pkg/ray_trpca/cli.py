"""Command-line front end: ``ray-trpca <command> --config PATH``.

Commands read one JSON experiment config and write their results into the
output directory: ``simulate`` the data matrices, ``separate`` the low-rank
and sparse parts, ``sweep`` the hyper-parameter tables and heatmaps,
``image`` a backprojected image and ``estimate`` a motion fit.
"""
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence
import argparse
import contextlib
import logging
import sys
import warnings

import torch

from ray_trpca import io
from ray_trpca.base import (rpca_decoupled, rpca_matrix, rpca_tensor,
                            separation_error)
from ray_trpca.config import ETA_MODES, METHODS, ExperimentConfig, load_config
from ray_trpca.exceptions import ConfigError, TRPCAError
from ray_trpca.imaging import backproject, extract_trace, fit_motion
from ray_trpca.norms import bounds, eta_report, panel_eta_stars, sweep
from ray_trpca.norms import write_sweep_heatmaps
from ray_trpca.numerics import frobenius
from ray_trpca.sar_model import DataMatrix, synthesize_parts
from ray_trpca.tensorize import plan_from_fractions, reconstruct, to_tensor
from ray_trpca.utils import ray_start_shutdown

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

DATA_FILE = "D.srt"
BACKGROUND_FILE = "D_L.srt"
MOVER_FILE = "D_S.srt"
LOW_RANK_FILE = "L.srt"
SPARSE_FILE = "S.srt"
SEPARATION_REPORT = "separation_report.json"
SWEEP_TABLE = "sweep.csv"
IMAGE_TABLE = "image.csv"
IMAGE_PGM = "image.pgm"
IMAGE_SUMMARY = "image.json"
MOTION_REPORT = "motion.json"


def _velocity(text: str):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        values = ()
    if len(values) != 3:
        raise argparse.ArgumentTypeError(
            f"expected 'vx,vy,vz' in m/s, got {text!r}")
    return values


def _output_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(message: str):
    print(message)
    sys.stdout.flush()


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    D, D_L, D_S = synthesize_parts(cfg.scene, cfg.radar)
    header = cfg.header()
    for name, matrix in ((DATA_FILE, D), (BACKGROUND_FILE, D_L),
                         (MOVER_FILE, D_S)):
        io.save_data_matrix(out / name, matrix, header)
    energy = frobenius(D.values)**2
    background = frobenius(D_L.values)**2 / energy if energy else 0.0
    movers = frobenius(D_S.values)**2 / energy if energy else 0.0
    _echo(f"simulate: {D.shape[0]}x{D.shape[1]} samples, "
          f"{len(cfg.scene.stationary)} stationary, "
          f"{len(cfg.scene.movers)} moving; energy background "
          f"{background:.4f}, movers {movers:.4f} -> {out}")
    return EXIT_OK


def _ground_truth(input_path: Path, cfg: ExperimentConfig):
    paths = (input_path.parent / BACKGROUND_FILE,
             input_path.parent / MOVER_FILE)
    if not all(p.exists() for p in paths):
        return None
    return tuple(io.load_data_matrix(p, cfg.radar) for p in paths)


def _solver_eta(cfg: ExperimentConfig, truth, plan):
    """Weight for the configured method and eta mode; a list of per-panel
    weights for decoupled separation in oracle mode."""
    if cfg.eta_mode == "explicit":
        return cfg.solver.eta
    if cfg.eta_mode == "default":
        return None
    if truth is None:
        raise ConfigError(
            f"eta_mode 'oracle' needs {BACKGROUND_FILE} and {MOVER_FILE} "
            "next to the input", "solver.eta_mode")
    D_L, D_S = truth
    if cfg.method == "matrix":
        return eta_report(D_L.values, D_S.values, "matrix").eta_star
    T_L = to_tensor(D_L, plan).tensor
    T_S = to_tensor(D_S, plan).tensor
    if cfg.method == "decoupled":
        return panel_eta_stars(T_L, T_S)
    return eta_report(T_L, T_S, "fourier").eta_star


def _separate(cfg: ExperimentConfig, D: DataMatrix, truth):
    plan = None
    if cfg.method != "matrix":
        plan = plan_from_fractions(cfg.radar, cfg.tensor.s_sub_fraction,
                                   cfg.tensor.overlap)
    eta = _solver_eta(cfg, truth, plan)
    logger.info("Separating with method=%s eta_mode=%s", cfg.method,
                cfg.eta_mode)
    with warnings.catch_warnings():
        # non-convergence is reported through the exit code
        warnings.simplefilter("ignore")
        if cfg.method == "matrix":
            result = rpca_matrix(D.values, replace(cfg.solver, eta=eta))
            return result, D.with_values(result.L), D.with_values(
                result.S), {}
        T = to_tensor(D, plan)
        if cfg.method == "decoupled":
            result = rpca_decoupled(
                T.tensor,
                eta,
                replace(cfg.solver, eta=None),
                num_workers=cfg.num_workers)
        else:
            result = rpca_tensor(T.tensor, replace(cfg.solver, eta=eta))
    norm_reports = {
        name: bounds(X)._asdict()
        for name, X in (("input", T.tensor), ("low_rank", result.L),
                        ("sparse", result.S))
    }
    norm_reports["plan"] = {
        "n3": plan.n3,
        "rows_per_panel": plan.rows_per_panel,
        "stride_rows": plan.stride_rows,
    }
    L = reconstruct(T.with_tensor(result.L))
    S = reconstruct(T.with_tensor(result.S))
    return result, L, S, norm_reports


def cmd_separate(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    input_path = Path(args.input) if args.input else out / DATA_FILE
    D = io.load_data_matrix(input_path, cfg.radar)
    truth = _ground_truth(input_path, cfg)
    result, L, S, norm_reports = _separate(cfg, D, truth)
    header = cfg.header()
    io.save_data_matrix(out / LOW_RANK_FILE, L, header, method=cfg.method)
    io.save_data_matrix(out / SPARSE_FILE, S, header, method=cfg.method)
    report = {
        "method": cfg.method,
        "eta_mode": cfg.eta_mode,
        "input": str(input_path),
        **result.summary(),
        "norms": norm_reports,
    }
    if truth is not None:
        report["low_rank_error"] = separation_error(L.values, truth[0].values)
        report["sparse_error"] = separation_error(S.values, truth[1].values)
    io.write_json(out / SEPARATION_REPORT, report, header)
    _echo(f"separate[{cfg.method}]: {result.iterations} iterations, "
          f"residual {result.final_residual:.3e}, converged "
          f"{result.converged}" + (
              f", errors L {report['low_rank_error']:.3e} S "
              f"{report['sparse_error']:.3e}" if truth is not None else ""))
    if not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    header = cfg.header()
    frame = sweep(cfg.scene, cfg.radar, cfg.sweep, cfg.num_workers)
    io.write_csv(out / SWEEP_TABLE, frame, header)
    heatmaps = write_sweep_heatmaps(frame, out, header=header)
    valid = int((frame["status"] == "ok").sum())
    _echo(f"sweep: {len(frame)} grid points ({valid} valid), "
          f"{len(heatmaps)} heatmaps -> {out}")
    return EXIT_OK


def cmd_image(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    input_path = Path(args.input) if args.input else out / SPARSE_FILE
    D = io.load_data_matrix(input_path, cfg.radar)
    velocity = args.velocity or (0.0, 0.0, 0.0)
    image = backproject(D, cfg.scene, cfg.imaging, velocity, cfg.radar)
    header = cfg.header()
    io.write_csv(out / IMAGE_TABLE, image.to_frame(), header)
    io.write_pgm(
        out / IMAGE_PGM,
        image.magnitude,
        comment=f"backprojection of {input_path.name}",
        header=header)
    position, magnitude = image.peak()
    summary = {
        "input": str(input_path),
        "velocity_m_s": velocity,
        "peak_position_m": position,
        "peak_magnitude": magnitude,
        "peak_to_background": image.peak_to_background(
            4 * cfg.imaging.spacing),
        "outside_window_samples": image.outside_count,
    }
    io.write_json(out / IMAGE_SUMMARY, summary, header)
    _echo(f"image: peak {magnitude:.4g} at "
          f"({position[0]:.2f}, {position[1]:.2f}, {position[2]:.2f}) m")
    return EXIT_OK


def cmd_estimate(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    sparse_path = Path(args.sparse) if args.sparse else out / SPARSE_FILE
    S = io.load_data_matrix(sparse_path, cfg.radar)
    trace = extract_trace(S, cfg.motion.stability_threshold,
                          cfg.motion.refine_peaks)
    seed_position = cfg.motion.seed_position
    if seed_position is None:
        seed_position, _ = backproject(S, cfg.scene, cfg.imaging,
                                       cfg=cfg.radar).peak()
        logger.info("Seeding the motion fit at the image peak %s",
                    seed_position)
    estimate = fit_motion(
        trace,
        cfg.scene,
        cfg.radar,
        seed_position,
        v_max=cfg.motion.v_max,
        n_speeds=cfg.motion.n_speeds,
        n_angles=cfg.motion.n_angles,
        max_fev=cfg.motion.max_fev,
        num_workers=cfg.num_workers)
    report = {
        "input": str(sparse_path),
        "seed_position_m": seed_position,
        **estimate.summary(),
    }
    io.write_json(out / MOTION_REPORT, report, cfg.header())
    _echo(f"estimate: speed {estimate.speed:.3f} m/s, heading "
          f"{estimate.heading:.4f} rad, loss {estimate.loss:.3e}, converged "
          f"{estimate.converged}")
    if not estimate.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "separate": cmd_separate,
    "sweep": cmd_sweep,
    "image": cmd_image,
    "estimate": cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ray-trpca",
        description="Moving target separation in SAR data with tensor "
        "robust PCA.")
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config", required=True, help="JSON experiment config.")
    parent.add_argument(
        "--out", help="Output directory (overrides output_dir).")
    parent.add_argument(
        "--seed", type=int, help="Random seed (overrides seed).")
    parent.add_argument(
        "--threads",
        type=int,
        help="Torch threads and Ray workers (overrides num_workers).")
    parent.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser(
        "simulate", parents=[parent], help="Synthesize D, D_L and D_S.")

    separate = sub.add_parser(
        "separate", parents=[parent], help="Separate D into L and S.")
    separate.add_argument("--method", choices=METHODS)
    separate.add_argument("--eta-mode", choices=ETA_MODES)
    separate.add_argument(
        "--eta", type=float, help="Weight used by --eta-mode explicit.")
    separate.add_argument(
        "--input", help=f"Data matrix (default: <out>/{DATA_FILE}).")

    sub.add_parser(
        "sweep", parents=[parent], help="Hyper-parameter sweep of the norm "
        "ratios.")

    image = sub.add_parser(
        "image", parents=[parent], help="Backproject a data matrix.")
    image.add_argument(
        "--input", help=f"Data matrix (default: <out>/{SPARSE_FILE}).")
    image.add_argument(
        "--velocity", type=_velocity, help="Velocity hypothesis 'vx,vy,vz'.")

    estimate = sub.add_parser(
        "estimate", parents=[parent], help="Fit a mover to separated data.")
    estimate.add_argument(
        "--sparse", help=f"Sparse part (default: <out>/{SPARSE_FILE}).")
    return parser


def _overrides(args) -> Dict[str, object]:
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "num_workers": args.threads,
    }
    if args.command == "separate":
        overrides.update({
            "solver.method": args.method,
            "solver.eta_mode": args.eta_mode,
            "solver.eta": args.eta,
        })
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.threads:
            torch.set_num_threads(args.threads)
        context = (ray_start_shutdown(num_cpus=cfg.num_workers)
                   if cfg.num_workers > 1 else contextlib.nullcontext())
        with context:
            return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        logger.error("Missing input: %s", e)
        return EXIT_CONFIG
    except TRPCAError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERICAL
    except MemoryError as e:
        logger.error("Out of memory: %s", e)
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error("Invalid input: %s", e)
        return EXIT_CONFIG


def _entry_point(argv: Optional[List[str]] = None):
    sys.exit(main(argv))


if __name__ == "__main__":
    _entry_point()
