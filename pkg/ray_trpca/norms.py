"""Tensor nuclear norms, their bounds, trade-off weights and sweeps."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
import pandas as pd
import torch

from ray_trpca import io
from ray_trpca.exceptions import (DegenerateInputError, NumericalError,
                                  PlanError)
from ray_trpca.numerics import (DTYPE, REAL_DTYPE, dft_axis3, l1_norm,
                                frobenius, nuclear_norms, svdvals)
from ray_trpca.sar_model import RadarConfig, Scene, synthesize_parts
from ray_trpca.tensorize import plan_from_fractions, to_tensor
from ray_trpca.utils import parallel_map

logger = logging.getLogger(__name__)

# entries of the explicit block-circulant matrix above which building it is
# refused
DEFAULT_EMBED_CAP = 2**25

ETA_VARIANTS = ("fourier", "decoupled", "matrix")

DEFAULT_S_SUB_FRACTIONS = (0.005, 0.01) + tuple(
    round(0.01 * k, 2) for k in range(2, 31))
DEFAULT_OVERLAPS = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_ALPHAS = tuple(k * math.pi / 16 for k in range(8))

SWEEP_COLUMNS = [
    "alpha", "s_sub_fraction", "s_sub", "overlap", "n3", "rows_per_panel",
    "stride_rows", "eta_ratio_fourier", "eta_ratio_decoupled",
    "eta_star_fourier", "eta_star_decoupled", "background_norm_ratio",
    "mover_norm_ratio", "l1_ratio", "status"
]
SWEEP_METRICS = [
    "eta_ratio_fourier", "eta_ratio_decoupled", "background_norm_ratio",
    "mover_norm_ratio", "l1_ratio"
]


class NormReport(NamedTuple):
    nuclear_decoupled: float
    nuclear_fourier: float
    l1: float
    frobenius: float
    lower_bound: float
    upper_bound: float


class EtaReport(NamedTuple):
    eta_min: float
    eta_max: float
    eta_star: float
    ratio: float
    variant: str


class ConcatenationBounds(NamedTuple):
    lower: float
    nuclear: float
    upper: float


def nuclear_decoupled(T: torch.Tensor) -> float:
    """Sum of the nuclear norms of the panels."""
    return float(nuclear_norms(T).sum())


def nuclear_fourier(T: torch.Tensor) -> float:
    """Sum of the nuclear norms of the panels after the unitary DFT along
    the panel index."""
    return float(nuclear_norms(dft_axis3(T)).sum())


def block_circulant_embed(T: torch.Tensor,
                          max_entries: int = DEFAULT_EMBED_CAP
                          ) -> torch.Tensor:
    """``(n1*n3, n2*n3)`` block-circulant matrix, block ``(r, c)`` being
    panel ``(c - r) mod n3``, scaled by ``1/sqrt(n3)``.

    Only meant as a reference for the DFT route; memory grows with
    ``n3**2``.
    """
    n3, n1, n2 = T.shape
    entries = n1 * n3 * n2 * n3
    if entries > max_entries:
        raise MemoryError(
            f"block-circulant embedding of a {n1}x{n2}x{n3} tensor needs "
            f"{entries} entries, above the cap of {max_entries}")
    out = torch.zeros((n1 * n3, n2 * n3), dtype=DTYPE)
    for r in range(n3):
        for c in range(n3):
            out[r * n1:(r + 1) * n1, c * n2:(c + 1) * n2] = T[(c - r) % n3]
    return out / math.sqrt(n3)


def bounds(T: torch.Tensor, rtol: float = 1e-9) -> NormReport:
    """Fourier nuclear norm with its lower and upper bounds in terms of the
    panel nuclear norms.

    Raises ``NumericalError`` if the computed norm leaves the bounds by more
    than ``rtol``.
    """
    panel_norms = nuclear_norms(T)
    n3 = T.shape[0]
    fourier = nuclear_fourier(T)
    lower = float(torch.sqrt((panel_norms**2).sum()))
    upper = math.sqrt(n3) * float(panel_norms.sum())
    slack = rtol * max(upper, 1.0)
    if not lower - slack <= fourier <= upper + slack:
        raise NumericalError(
            f"Fourier nuclear norm {fourier:.12g} outside its bounds "
            f"[{lower:.12g}, {upper:.12g}]")
    return NormReport(
        nuclear_decoupled=float(panel_norms.sum()),
        nuclear_fourier=fourier,
        l1=l1_norm(T),
        frobenius=frobenius(T),
        lower_bound=lower,
        upper_bound=upper)


def concatenation_bounds(blocks: Sequence[torch.Tensor]) -> ConcatenationBounds:
    """Nuclear norm of ``[A_1, ..., A_k]`` between
    ``sqrt(sum ||A_i||_*^2)`` and ``sum ||A_i||_*``."""
    if not blocks:
        raise ValueError("at least one block is required")
    per_block = torch.stack([svdvals(b).sum() for b in blocks])
    nuclear = float(svdvals(torch.cat(list(blocks), dim=1)).sum())
    return ConcatenationBounds(
        lower=float(torch.sqrt((per_block**2).sum())),
        nuclear=nuclear,
        upper=float(per_block.sum()))


def _nuclear(X: torch.Tensor, variant: str) -> float:
    if variant == "fourier":
        return nuclear_fourier(X)
    if variant == "decoupled":
        return nuclear_decoupled(X)
    if variant == "matrix":
        if X.dim() == 3:
            if X.shape[0] != 1:
                raise ValueError(
                    "the matrix variant needs matrices, got a tensor with "
                    f"n3={X.shape[0]}")
            X = X[0]
        return float(svdvals(X).sum())
    raise ValueError(
        f"unknown variant {variant!r}, expected one of {ETA_VARIANTS}")


def _norm_ratio(X: torch.Tensor, variant: str, what: str) -> float:
    l1 = l1_norm(X)
    if l1 == 0:
        raise DegenerateInputError(
            f"{what} part has zero l1 norm, eta ratios are undefined")
    return _nuclear(X, variant) / l1


def eta_report(T_L: torch.Tensor, T_S: torch.Tensor,
               variant: str = "fourier") -> EtaReport:
    """Admissible trade-off range from ground-truth background ``T_L`` and
    mover ``T_S`` parts."""
    if T_L.shape != T_S.shape:
        raise ValueError(
            f"shape mismatch: {tuple(T_L.shape)} vs {tuple(T_S.shape)}")
    eta_max = _norm_ratio(T_S, variant, "sparse")
    eta_min = _norm_ratio(T_L, variant, "low-rank")
    return EtaReport(
        eta_min=eta_min,
        eta_max=eta_max,
        eta_star=math.sqrt(eta_max * eta_min),
        ratio=eta_max / eta_min,
        variant=variant)


def panel_eta_stars(T_L: torch.Tensor, T_S: torch.Tensor) -> List[float]:
    """Per-panel ``sqrt(eta_max * eta_min)`` for decoupled separation."""
    if T_L.shape != T_S.shape:
        raise ValueError(
            f"shape mismatch: {tuple(T_L.shape)} vs {tuple(T_S.shape)}")
    etas = []
    for ell in range(T_L.shape[0]):
        try:
            etas.append(
                eta_report(T_L[ell], T_S[ell], variant="matrix").eta_star)
        except DegenerateInputError as e:
            raise DegenerateInputError(f"panel {ell}: {e}") from e
    return etas


def matrix_eta_optimal(cfg: RadarConfig, N_vt: float) -> float:
    """Closed-form optimal weight for matrix separation of a mover whose
    trace spans ``N_vt`` columns."""
    if N_vt < 0:
        raise ValueError(f"N_vt must be >= 0, got {N_vt}")
    ds, B, dt = cfg.pulse_interval, cfg.bandwidth, cfg.fast_dt
    S = cfg.aperture_duration
    prefactor = math.sqrt(ds * B * dt / (4 * S * math.sqrt(math.pi)))
    inner = 1 / math.sqrt(N_vt * B * dt / (2 * math.sqrt(math.pi)) + 0.5)
    inner *= (math.sqrt(2) * N_vt * B * dt / math.pi + 1) / 2
    return prefactor * math.sqrt(inner)


def recommended_eta(shape: Sequence[int], n3: int = 1) -> float:
    """``1 / sqrt(n3 * max(n1, n2))``."""
    n1, n2 = shape[-2], shape[-1]
    return 1 / math.sqrt(n3 * max(n1, n2))


def cross_term_suppression(b_l: float, b_lp: float, omega: float,
                           B: float) -> float:
    """Carrier-induced suppression of the inner product of two columns whose
    traces have slopes ``b_l`` and ``b_lp``."""
    denominator = b_l**2 + b_lp**2
    if denominator == 0:
        raise DegenerateInputError("both slopes are zero")
    return math.exp(-(omega**2 / (2 * B**2)) * (b_l - b_lp)**2 / denominator)


def cross_term_inner_product(b_l: float,
                             b_lp: float,
                             omega: float,
                             B: float,
                             slow_axis: torch.Tensor,
                             a_l: float = 0.0,
                             a_lp: float = 0.0,
                             t_j: Optional[float] = None,
                             t_k: Optional[float] = None) -> float:
    """Numerical inner product of two columns of linear Gaussian-pulse
    traces, divided by the same inner product without the carrier.

    Column ``j`` samples ``Delta tau(s) = a_l + b_l * s`` at fast time
    ``t_j``; column ``k`` samples ``a_lp + b_lp * s`` at ``t_k``.
    """
    s = torch.as_tensor(slow_axis, dtype=REAL_DTYPE)
    t_j = a_l if t_j is None else t_j
    t_k = a_lp if t_k is None else t_k
    tau_l = a_l + b_l * s
    tau_lp = a_lp + b_lp * s
    envelope = (torch.exp(-0.5 * B**2 * (t_j - tau_l)**2) *
                torch.exp(-0.5 * B**2 * (t_k - tau_lp)**2))
    carrier = torch.polar(torch.ones_like(s), omega * (tau_l - tau_lp))
    with_carrier = torch.abs((envelope * carrier).sum())
    without_carrier = torch.abs(envelope.sum())
    if without_carrier == 0:
        raise DegenerateInputError(
            "the carrier-free inner product vanishes on this slow axis")
    return float(with_carrier / without_carrier)


@dataclass(frozen=True)
class SweepGrid:
    """Hyper-parameter grid: sub-aperture sizes as fractions of ``s_tot``,
    overlaps and mover headings in rad."""

    s_sub_fractions: Tuple[float, ...] = DEFAULT_S_SUB_FRACTIONS
    overlaps: Tuple[float, ...] = DEFAULT_OVERLAPS
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self):
        for name in ("s_sub_fractions", "overlaps", "alphas"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"sweep grid {name} is empty")
            object.__setattr__(self, name, values)

    @property
    def size(self) -> int:
        return len(self.s_sub_fractions) * len(self.overlaps) * len(
            self.alphas)


def _empty_row(alpha, s_sub_fraction, cfg, overlap, status) -> dict:
    row = {key: np.nan for key in SWEEP_COLUMNS}
    row.update(
        alpha=alpha,
        s_sub_fraction=s_sub_fraction,
        s_sub=s_sub_fraction * cfg.aperture_duration,
        overlap=overlap,
        status=status)
    return row


def sweep_cell(D_L, D_S, cfg: RadarConfig, alpha: float,
               s_sub_fraction: float, overlap: float) -> dict:
    """All sweep metrics for one ``(alpha, s_sub, overlap)`` point."""
    try:
        plan = plan_from_fractions(cfg, s_sub_fraction, overlap)
    except PlanError as e:
        logger.warning("Skipping sweep cell alpha=%.4f s_sub=%g overlap=%g: %s",
                       alpha, s_sub_fraction, overlap, e)
        return _empty_row(alpha, s_sub_fraction, cfg, overlap, str(e))
    A_L = to_tensor(D_L, plan).tensor
    A_S = to_tensor(D_S, plan).tensor
    norms = {}
    for name, X in (("L", A_L), ("S", A_S)):
        l1 = l1_norm(X)
        if l1 == 0:
            raise DegenerateInputError(
                f"{'background' if name == 'L' else 'mover'} data is zero")
        norms[name] = (nuclear_fourier(X), nuclear_decoupled(X), l1)
    (fl, dl, l1l), (fs, ds, l1s) = norms["L"], norms["S"]
    eta_f = (fs / l1s, fl / l1l)
    eta_d = (ds / l1s, dl / l1l)
    row = _empty_row(alpha, s_sub_fraction, cfg, overlap, "ok")
    row.update(
        n3=plan.n3,
        rows_per_panel=plan.rows_per_panel,
        stride_rows=plan.stride_rows,
        eta_ratio_fourier=eta_f[0] / eta_f[1],
        eta_ratio_decoupled=eta_d[0] / eta_d[1],
        eta_star_fourier=math.sqrt(eta_f[0] * eta_f[1]),
        eta_star_decoupled=math.sqrt(eta_d[0] * eta_d[1]),
        background_norm_ratio=fl / dl,
        mover_norm_ratio=fs / ds,
        l1_ratio=l1l / l1s)
    return row


def sweep(scene: Scene,
          cfg: RadarConfig,
          grid: Optional[SweepGrid] = None,
          num_workers: int = 1) -> pd.DataFrame:
    """Evaluate the trade-off and norm ratios over a hyper-parameter grid.

    Every mover of ``scene`` is turned to each heading of the grid at its
    own speed. Returns one row per ``(alpha, s_sub, overlap)`` in grid order;
    cells whose plan is invalid keep NaN metrics and carry the reason in
    ``status``.
    """
    grid = grid or SweepGrid()
    if not scene.movers or not scene.stationary:
        raise DegenerateInputError(
            "sweeps need both stationary targets and movers")
    parts = []
    for alpha in grid.alphas:
        _, D_L, D_S = synthesize_parts(scene.with_mover_heading(alpha), cfg)
        parts.append((D_L, D_S))
    cells = [(i, alpha, frac, overlap)
             for i, alpha in enumerate(grid.alphas)
             for frac in grid.s_sub_fractions for overlap in grid.overlaps]
    logger.info("Sweeping %d grid points with %d worker(s)", len(cells),
                num_workers)

    def evaluate(cell):
        i, alpha, frac, overlap = cell
        D_L, D_S = parts[i]
        return sweep_cell(D_L, D_S, cfg, alpha, frac, overlap)

    rows = parallel_map(evaluate, cells, num_workers=num_workers)
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    skipped = int((frame["status"] != "ok").sum())
    if skipped:
        logger.warning("%d of %d sweep cells have no valid plan", skipped,
                       len(frame))
    return frame


def write_sweep_heatmaps(frame: pd.DataFrame,
                         out_dir: Union[str, Path],
                         metrics: Sequence[str] = tuple(SWEEP_METRICS),
                         header: Optional[Dict[str, str]] = None
                         ) -> List[Path]:
    """One greyscale PGM per ``(metric, alpha)``: rows are overlaps,
    columns sub-aperture sizes."""
    out_dir = Path(out_dir)
    written = []
    for metric in metrics:
        for k, (alpha, group) in enumerate(frame.groupby("alpha", sort=True)):
            surface = group.pivot(
                index="overlap", columns="s_sub_fraction", values=metric)
            path = out_dir / f"sweep_{metric}_alpha{k:02d}.pgm"
            io.write_pgm(
                path,
                surface.to_numpy(dtype=np.float64),
                comment=f"{metric} alpha={alpha:.6f}",
                header=header)
            written.append(path)
    return written
