"""Backprojection imaging and motion estimation from separated data.

The data are complex baseband, so backprojection multiplies each sample by
``exp(+1j * omega0 * dtau)`` to restore the carrier phase removed from it.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd
import torch
from scipy.optimize import minimize

from ray_trpca.exceptions import NoTargetDetectedError
from ray_trpca.numerics import DTYPE, REAL_DTYPE
from ray_trpca.sar_model import (DataMatrix, PointTarget, RadarConfig, Scene,
                                 delta_tau)
from ray_trpca.utils import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_STABILITY_THRESHOLD = 0.2
DEFAULT_V_MAX = 30.0
# Huber transition, in fast-time samples
HUBER_DELTA_SAMPLES = 10

TracePoint = Tuple[float, float]


@dataclass(frozen=True)
class ImageGridSpec:
    """Horizontal pixel grid ``origin + (ix, iy, 0) * spacing``."""

    origin: Tuple[float, float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v)
                                                 for v in self.origin))
        if len(self.origin) != 3:
            raise ValueError("origin must have 3 components")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(
                f"grid needs nx, ny >= 1, got {self.nx}x{self.ny}")

    @classmethod
    def centered(cls, center: Sequence[float], half_width: float,
                 spacing: float) -> "ImageGridSpec":
        n = int(round(2 * half_width / spacing)) + 1
        origin = (center[0] - half_width, center[1] - half_width, center[2])
        return cls(origin, spacing, n, n)

    @property
    def x_axis(self) -> torch.Tensor:
        return self.origin[0] + self.spacing * torch.arange(
            self.nx, dtype=REAL_DTYPE)

    @property
    def y_axis(self) -> torch.Tensor:
        return self.origin[1] + self.spacing * torch.arange(
            self.ny, dtype=REAL_DTYPE)

    def positions(self) -> torch.Tensor:
        """Pixel positions, shape ``(ny, nx, 3)``."""
        yy, xx = torch.meshgrid(self.y_axis, self.x_axis, indexing="ij")
        zz = torch.full_like(xx, self.origin[2])
        return torch.stack([xx, yy, zz], dim=-1)


@dataclass
class ImageGrid:
    spec: ImageGridSpec
    values: torch.Tensor
    velocity: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    outside_count: int = 0

    @property
    def magnitude(self) -> np.ndarray:
        return torch.abs(self.values).numpy()

    def peak(self) -> Tuple[Tuple[float, float, float], float]:
        """Position and magnitude of the brightest pixel."""
        mag = self.magnitude
        iy, ix = np.unravel_index(int(np.argmax(mag)), mag.shape)
        position = tuple(float(p) for p in self.spec.positions()[iy, ix])
        return position, float(mag[iy, ix])

    def peak_to_background(self, exclude_radius: float) -> float:
        """Peak magnitude over the mean magnitude of the pixels farther than
        ``exclude_radius`` from the peak."""
        position, peak = self.peak()
        pos = self.spec.positions()[..., :2].numpy()
        distance = np.hypot(pos[..., 0] - position[0],
                            pos[..., 1] - position[1])
        background = self.magnitude[distance > exclude_radius]
        if background.size == 0 or background.mean() == 0:
            return math.inf
        return peak / float(background.mean())

    def to_frame(self) -> pd.DataFrame:
        pos = self.spec.positions().reshape(-1, 3).numpy()
        values = self.values.reshape(-1).numpy()
        return pd.DataFrame({
            "x_m": pos[:, 0],
            "y_m": pos[:, 1],
            "magnitude": np.abs(values),
            "real": values.real,
            "imag": values.imag,
        })


class MotionEstimate(NamedTuple):
    position: Tuple[float, float, float]
    velocity: Tuple[float, float, float]
    loss: float
    trace: List[TracePoint]
    converged: bool
    speed: float
    heading: float
    max_residual: float

    def summary(self) -> dict:
        return {
            "position_m": list(self.position),
            "velocity_m_s": list(self.velocity),
            "speed_m_s": self.speed,
            "heading_rad": self.heading,
            "loss": self.loss,
            "max_residual_s": self.max_residual,
            "converged": self.converged,
            "trace_points": len(self.trace),
        }


def _dtau_grid(scene: Scene, s: float, positions: torch.Tensor,
               lightspeed: float) -> torch.Tensor:
    r = scene.trajectory(s)
    ref = torch.tensor(scene.reference_point, dtype=REAL_DTYPE)
    return 2 * (torch.linalg.norm(positions - r, dim=-1) -
                torch.linalg.norm(r - ref)) / lightspeed


def backproject(D: DataMatrix,
                scene: Scene,
                grid_spec: ImageGridSpec,
                v: Sequence[float] = (0.0, 0.0, 0.0),
                cfg: Optional[RadarConfig] = None) -> ImageGrid:
    """Coherent sum ``I(rho) = sum_j D(s_j, dtau_j) * exp(1j*omega0*dtau_j)``
    with ``dtau_j`` evaluated at ``rho + s_j * v`` and ``D`` linearly
    interpolated along fast time.

    Samples whose delay falls outside the fast window contribute zero; their
    number is reported as ``outside_count``.
    """
    cfg = cfg or D.config
    if cfg is None:
        raise ValueError("backproject needs a radar config")
    v_t = torch.tensor([float(c) for c in v], dtype=REAL_DTYPE)
    pixels = grid_spec.positions().reshape(-1, 3)
    fast = D.fast_axis
    t0 = float(fast[0])
    dt = float(fast[1] - fast[0]) if fast.numel() > 1 else cfg.fast_dt
    last = fast.numel() - 1
    image = torch.zeros(pixels.shape[0], dtype=DTYPE)
    outside = 0
    for j, s in enumerate(D.slow_axis.tolist()):
        dtau = _dtau_grid(scene, s, pixels + s * v_t, cfg.lightspeed)
        position = (dtau - t0) / dt
        inside = (position >= 0) & (position <= last)
        outside += int((~inside).sum())
        position = position.clamp(0, last)
        i0 = torch.floor(position).long().clamp(max=max(last - 1, 0))
        frac = (position - i0).to(DTYPE)
        row = D.values[j]
        i1 = (i0 + 1).clamp(max=last)
        sample = row[i0] * (1 - frac) + row[i1] * frac
        carrier = torch.polar(torch.ones_like(dtau), cfg.carrier_omega0 * dtau)
        image += torch.where(inside, sample * carrier,
                             torch.zeros_like(sample))
    if outside:
        logger.debug("%d samples fell outside the fast window", outside)
    return ImageGrid(grid_spec, image.reshape(grid_spec.ny, grid_spec.nx),
                     tuple(float(c) for c in v), outside)


def backproject_velocities(D: DataMatrix,
                           scene: Scene,
                           grid_spec: ImageGridSpec,
                           velocities: Sequence[Sequence[float]],
                           cfg: Optional[RadarConfig] = None,
                           num_workers: int = 1) -> List[ImageGrid]:
    """One image per velocity hypothesis."""
    return parallel_map(
        lambda v: backproject(D, scene, grid_spec, v, cfg),
        list(velocities),
        num_workers=num_workers)


def _refine_peaks(magnitude: torch.Tensor, argmax: torch.Tensor,
                  fast: torch.Tensor) -> torch.Tensor:
    """Vertex of the parabola through the log-magnitudes around each peak.

    Exact for a sampled Gaussian envelope. Peaks on the window edge or with
    a zero neighbour keep their sample time.
    """
    last = magnitude.shape[1] - 1
    times = fast[argmax].clone()
    if last < 2:
        return times
    inner = (argmax > 0) & (argmax < last)
    centre = argmax.clamp(1, last - 1).unsqueeze(1)
    window = torch.gather(magnitude, 1, centre + torch.arange(-1, 2))
    inner &= (window > 0).all(dim=1)
    log = torch.log(window.clamp(min=torch.finfo(window.dtype).tiny))
    curvature = log[:, 0] - 2 * log[:, 1] + log[:, 2]
    inner &= curvature < 0
    offset = 0.5 * (log[:, 0] - log[:, 2]) / torch.where(
        inner, curvature, torch.ones_like(curvature))
    dt = float(fast[1] - fast[0])
    return torch.where(inner, times + offset.clamp(-1, 1) * dt, times)


def extract_trace(S: DataMatrix,
                  stability_threshold: float = DEFAULT_STABILITY_THRESHOLD,
                  refine: bool = False) -> List[TracePoint]:
    """``(s_j, t_l)`` of the magnitude peak of every slow-time row whose peak
    reaches ``stability_threshold`` times the global maximum.

    With ``refine`` the peak time is interpolated between samples, see
    :func:`_refine_peaks`.
    """
    magnitude = torch.abs(S.values)
    row_peak, argmax = magnitude.max(dim=1)
    global_max = float(row_peak.max())
    if global_max == 0:
        raise NoTargetDetectedError("sparse data is identically zero")
    keep = row_peak >= stability_threshold * global_max
    if not bool(keep.any()):
        raise NoTargetDetectedError(
            f"no slow-time row reaches {stability_threshold} of the maximum")
    if refine:
        times = _refine_peaks(magnitude, argmax, S.fast_axis)
    else:
        times = S.fast_axis[argmax]
    trace = [(float(S.slow_axis[j]), float(times[j]))
             for j in torch.nonzero(keep).flatten().tolist()]
    logger.info("Extracted %d of %d slow-time rows", len(trace),
                S.values.shape[0])
    return trace


def huber_loss(x, delta: float):
    """``x**2 / 2`` for ``|x| <= delta``, ``delta * (|x| - delta / 2)``
    beyond."""
    ax = np.abs(x)
    out = np.where(ax <= delta, 0.5 * ax**2, delta * (ax - 0.5 * delta))
    return out if np.ndim(out) else float(out)


def analytic_trace(scene: Scene, cfg: RadarConfig, position: Sequence[float],
                   velocity: Sequence[float],
                   slow: Optional[Sequence[float]] = None) -> np.ndarray:
    """Travel-time difference of a point at ``position + s * velocity``."""
    s = cfg.slow_axis if slow is None else torch.as_tensor(
        slow, dtype=REAL_DTYPE)
    target = PointTarget(position, velocity)
    return delta_tau(scene, target, s, cfg.lightspeed).numpy()


@dataclass
class _TraceObjective:
    scene: Scene
    cfg: RadarConfig
    seed: np.ndarray
    slow: np.ndarray
    measured: np.ndarray
    delta: float
    e_r: np.ndarray = field(init=False)
    e_az: np.ndarray = field(init=False)

    def __post_init__(self):
        self.e_r = self.scene.range_direction
        self.e_az = self.scene.azimuth_direction

    def state(self, theta: np.ndarray):
        dx, v_r, v_az = theta
        position = self.seed + dx * self.e_r
        velocity = v_r * self.e_r + v_az * self.e_az
        return position, velocity

    def residuals(self, theta: np.ndarray) -> np.ndarray:
        position, velocity = self.state(theta)
        return self.measured - analytic_trace(self.scene, self.cfg, position,
                                              velocity, self.slow)

    def __call__(self, theta: np.ndarray) -> float:
        # scaled by 1/delta**2 so the optimizer sees O(1) values
        return float(
            np.sum(huber_loss(self.residuals(theta), self.delta))) / (
                self.delta**2)


def _run_start(objective: _TraceObjective, theta0: np.ndarray, xatol: float,
               max_fev: int):
    simplex = np.vstack([theta0, theta0 + np.diag([2.0, 0.5, 0.5])])
    options = {
        "initial_simplex": simplex,
        "xatol": xatol,
        "fatol": 1e-14,
        "maxfev": max_fev
    }
    first = minimize(objective, theta0, method="Nelder-Mead", options=options)
    # restart once from the best vertex with a fresh simplex
    simplex = np.vstack([first.x, first.x + np.diag([0.5, 0.1, 0.1])])
    options["initial_simplex"] = simplex
    second = minimize(objective, first.x, method="Nelder-Mead",
                      options=options)
    best = second if second.fun <= first.fun else first
    return float(best.fun), tuple(float(p) for p in best.x)


def fit_motion(trace: Sequence[TracePoint],
               scene: Scene,
               cfg: RadarConfig,
               seed_position: Sequence[float],
               v_max: float = DEFAULT_V_MAX,
               n_speeds: int = 4,
               n_angles: int = 5,
               max_fev: int = 4000,
               loss_ceiling: Optional[float] = None,
               num_workers: int = 1) -> MotionEstimate:
    """Fit a straight-line mover to a measured delay trace by minimizing the
    Huber loss with ``delta = 10 * fast_dt``.

    Nelder-Mead runs from every start of a grid over speed in ``[0, v_max]``
    and heading in ``[0, pi/2]``, with the position seeded at
    ``seed_position``. The delay history of a straight-line mover determines
    only three range-history coefficients, so the along-track coordinate of
    the position stays at the seed; the range offset and both horizontal
    velocity components are fitted. The best start is the one with the
    smallest loss, ties going to the lexicographically smallest parameters.

    ``converged`` is False when the best loss exceeds ``loss_ceiling``
    (default: every residual at ``delta``), i.e. the fit did not explain the
    trace.
    """
    trace = [(float(s), float(t)) for s, t in trace]
    if len(trace) < 8:
        raise ValueError(f"fit_motion needs >= 8 trace points, got "
                         f"{len(trace)}")
    slow = np.array([s for s, _ in trace])
    measured = np.array([t for _, t in trace])
    delta = HUBER_DELTA_SAMPLES * cfg.fast_dt
    objective = _TraceObjective(scene, cfg,
                                np.asarray(seed_position, dtype=np.float64),
                                slow, measured, delta)
    starts = []
    for speed in np.linspace(0.0, v_max, n_speeds):
        for alpha in np.linspace(0.0, math.pi / 2, n_angles):
            start = (0.0, speed * math.cos(alpha), speed * math.sin(alpha))
            if start not in starts:
                starts.append(start)
    xatol = 1e-3 * cfg.fast_dt * cfg.lightspeed
    logger.info("Fitting motion from %d starts on %d trace points",
                len(starts), len(trace))
    results = parallel_map(
        lambda theta0: _run_start(objective, np.array(theta0), xatol, max_fev),
        starts,
        num_workers=num_workers)
    scaled_loss, theta = min(results, key=lambda r: (r[0], r[1]))
    position, velocity = objective.state(np.array(theta))
    loss = scaled_loss * delta**2
    ceiling = (loss_ceiling if loss_ceiling is not None else
               0.5 * delta**2 * len(trace))
    converged = loss <= ceiling
    velocity = tuple(float(c) for c in velocity)
    max_residual = float(np.max(np.abs(objective.residuals(np.array(theta)))))
    if not converged:
        logger.warning("Motion fit loss %.3e exceeds the ceiling %.3e", loss,
                       ceiling)
    target = PointTarget(tuple(position), velocity)
    return MotionEstimate(
        position=tuple(float(c) for c in position),
        velocity=velocity,
        loss=loss,
        trace=trace,
        converged=converged,
        speed=target.speed,
        heading=scene.heading_angle(target),
        max_residual=max_residual)
