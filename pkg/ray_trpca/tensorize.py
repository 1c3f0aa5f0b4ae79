"""Overlapping sub-aperture tensors.

A :class:`TensorPlan` cuts the slow-time rows of a data matrix into ``n3``
panels of ``rows_per_panel`` rows. Starts advance by ``stride_rows`` and the
final panel is anchored to the last row, so starts are strictly increasing
and every row is covered.
"""
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional
import logging

import numpy as np
import torch

from ray_trpca.exceptions import PlanError
from ray_trpca.sar_model import DataMatrix, RadarConfig

logger = logging.getLogger(__name__)

# relative slack on s_sub <= s_tot
_EPS = 1e-9


@dataclass(frozen=True)
class TensorPlan:
    """Sub-aperture layout.

    Parameters
    ----------
    sub_aperture_s : float
      Sub-aperture duration ``s_sub`` in s.

    overlap_fraction : float
      Overlap ``theta`` between consecutive sub-apertures, in ``[0, 1)``.

    rows_per_panel : int
      Rows per panel, ``n1``.

    stride_rows : int
      Row offset between consecutive panel starts.

    n3 : int
      Number of panels.

    total_rows : int
      Slow-time rows of the source matrix.

    """

    sub_aperture_s: float
    overlap_fraction: float
    rows_per_panel: int
    stride_rows: int
    n3: int
    total_rows: int

    def __post_init__(self):
        if not 0 <= self.overlap_fraction < 1:
            raise PlanError(
                f"overlap_fraction must be in [0, 1), got "
                f"{self.overlap_fraction}")
        if self.stride_rows < 1:
            raise PlanError(
                f"stride of round((1 - {self.overlap_fraction}) * "
                f"{self.rows_per_panel}) rows rounds to {self.stride_rows}; "
                f"use a larger sub-aperture or a smaller overlap")
        if not 1 <= self.rows_per_panel <= self.total_rows:
            raise PlanError(
                f"rows_per_panel={self.rows_per_panel} must be in "
                f"[1, total_rows={self.total_rows}]")
        if self.n3 < 1:
            raise PlanError(f"n3 must be >= 1, got {self.n3}")
        uncovered = np.flatnonzero(self.coverage() == 0)
        if uncovered.size:
            raise PlanError(
                f"{uncovered.size} rows are not covered by any panel "
                f"(first: row {uncovered[0]})")

    @property
    def starts(self) -> np.ndarray:
        last = self.total_rows - self.rows_per_panel
        starts = np.minimum(
            np.arange(self.n3, dtype=np.int64) * self.stride_rows, last)
        starts[-1] = last
        return starts

    def panel_start(self, ell: int) -> int:
        if not 0 <= ell < self.n3:
            raise IndexError(f"panel {ell} out of range for n3={self.n3}")
        return int(self.starts[ell])

    def panel_rows(self, ell: int) -> range:
        start = self.panel_start(ell)
        return range(start, start + self.rows_per_panel)

    def membership(self) -> np.ndarray:
        """Boolean ``(total_rows, n3)`` matrix, True where panel covers row."""
        rows = np.arange(self.total_rows)[:, None]
        starts = self.starts[None, :]
        return (rows >= starts) & (rows < starts + self.rows_per_panel)

    def coverage(self) -> np.ndarray:
        return self.membership().sum(axis=1)

    def covering_panels(self, row: int) -> List[int]:
        if not 0 <= row < self.total_rows:
            raise IndexError(
                f"row {row} out of range for {self.total_rows} rows")
        return [int(ell) for ell in np.flatnonzero(self.membership()[row])]


@dataclass(frozen=True)
class DataTensor:
    """Panel-major ``(n3, n1, n2)`` sub-aperture tensor with its plan."""

    tensor: torch.Tensor
    plan: TensorPlan
    slow_axis: torch.Tensor
    fast_axis: torch.Tensor
    config: Optional[RadarConfig] = None

    def __post_init__(self):
        expected = (self.plan.n3, self.plan.rows_per_panel,
                    self.fast_axis.numel())
        if tuple(self.tensor.shape) != expected:
            raise PlanError(
                f"tensor shape {tuple(self.tensor.shape)} does not match the "
                f"plan, expected {expected}")

    @property
    def shape(self):
        return tuple(self.tensor.shape)

    def with_tensor(self, tensor: torch.Tensor) -> "DataTensor":
        return replace(self, tensor=tensor)


def make_plan(s_tot: float, s_sub: float, overlap: float,
              ds: float) -> TensorPlan:
    """Plan panels of ``n1 = round(s_sub / ds) + 1`` rows.

    The stride is ``round((1 - overlap) * n1)`` rows and
    ``n3 = 1 + ceil((total_rows - n1) / stride)``, the row-exact form of
    ``1 + ceil((s_tot - s_sub) / ((1 - overlap) * s_sub))``.
    """
    if not ds > 0:
        raise PlanError(f"pulse interval must be positive, got {ds}")
    if not 0 < s_sub <= s_tot * (1 + _EPS):
        raise PlanError(
            f"sub-aperture {s_sub:g} s must lie in (0, s_tot={s_tot:g} s]")
    if not 0 <= overlap < 1:
        raise PlanError(f"overlap must be in [0, 1), got {overlap}")
    total_rows = int(round(s_tot / ds)) + 1
    n1 = min(int(round(s_sub / ds)) + 1, total_rows)
    stride = int(round((1 - overlap) * n1))
    if stride < 1:
        raise PlanError(
            f"stride of round((1 - {overlap}) * {n1}) rows rounds to "
            f"{stride}; use a larger sub-aperture or a smaller overlap")
    n3 = 1 + -(-(total_rows - n1) // stride)
    plan = TensorPlan(
        sub_aperture_s=s_sub,
        overlap_fraction=overlap,
        rows_per_panel=n1,
        stride_rows=stride,
        n3=n3,
        total_rows=total_rows)
    logger.debug("Plan s_sub=%g s, overlap=%g: n1=%d, stride=%d, n3=%d", s_sub,
                 overlap, n1, stride, n3)
    return plan


def plan_from_fractions(cfg: RadarConfig, s_sub_fraction: float,
                        overlap: float) -> TensorPlan:
    """Plan with the sub-aperture given as a fraction of ``s_tot``."""
    s_tot = cfg.aperture_duration
    return make_plan(s_tot, s_sub_fraction * s_tot, overlap,
                     cfg.pulse_interval)


def to_tensor(D: DataMatrix, plan: TensorPlan) -> DataTensor:
    rows = D.values.shape[0]
    if rows != plan.total_rows:
        raise PlanError(
            f"data has {rows} slow-time rows, plan expects {plan.total_rows}")
    n1 = plan.rows_per_panel
    panels = torch.stack([D.values[start:start + n1] for start in plan.starts])
    return DataTensor(panels, plan, D.slow_axis, D.fast_axis, D.config)


def innermost_panel(candidates: Iterable[int], n3: int) -> int:
    """``argmin l**2 + (l - n3 + 1)**2`` over ``candidates``, ties to the
    smaller index."""
    candidates = list(candidates)
    if not candidates:
        raise PlanError("row is covered by no panel")
    return min(candidates, key=lambda ell: (ell**2 + (ell - n3 + 1)**2, ell))


def innermost_assignment(plan: TensorPlan) -> np.ndarray:
    """Panel index chosen for every source row."""
    ell = np.arange(plan.n3, dtype=np.float64)
    cost = ell**2 + (ell - plan.n3 + 1)**2
    cost = np.where(plan.membership(), cost[None, :], np.inf)
    if np.isinf(cost).all(axis=1).any():
        raise PlanError("row is covered by no panel")
    # argmin returns the first minimum, i.e. the smaller panel index
    return np.argmin(cost, axis=1)


def reconstruct(T: DataTensor) -> DataMatrix:
    """Reassemble the full-aperture matrix, each row copied from its
    innermost covering panel."""
    plan = T.plan
    chosen = innermost_assignment(plan)
    rows = np.arange(plan.total_rows)
    offsets = rows - plan.starts[chosen]
    values = T.tensor[torch.from_numpy(chosen), torch.from_numpy(offsets)]
    return DataMatrix(values, T.slow_axis, T.fast_axis, T.config)
