"""Scene description and synthesis of down-ramped baseband SAR data.

The data model is a superposition of Gaussian baseband pulses shifted by
the travel-time differences of every point scatterer, with the carrier phase
kept as ``exp(-1j * omega0 * dtau)``::

    D[j, l] = sum_i sigma_i * f_B(t_l - dtau_i(s_j)) * exp(-1j*omega0*dtau_i(s_j))
    f_B(t) = exp(-B**2 * t**2 / 2)
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
import torch

from ray_trpca.exceptions import WindowCoverageError
from ray_trpca.numerics import DTYPE, REAL_DTYPE

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3e8
X_BAND_OMEGA = 2 * math.pi * 9.6e9

# targets closer than this to the platform line are rejected
_ON_PATH_M = 1e-3

Vector3 = Tuple[float, float, float]
SlowTime = Union[float, torch.Tensor]


def _vec3(value, name: str) -> Vector3:
    vec = tuple(float(v) for v in value)
    if len(vec) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise ValueError(f"{name} must be finite, got {vec}")
    return vec


def _as_slow(s: SlowTime) -> torch.Tensor:
    return torch.as_tensor(s, dtype=REAL_DTYPE)


@dataclass(frozen=True)
class RadarConfig:
    """Radar and sampling parameters.

    Parameters
    ----------
    carrier_omega0 : float (default=2*pi*9.6e9)
      Carrier angular frequency in rad/s.

    bandwidth : float (default=100e6)
      Bandwidth ``B`` in Hz.

    fast_dt : float (default=5e-9)
      Fast-time sampling interval in s. Must satisfy ``fast_dt <= 1/(2B)``.

    slow_count : int (default=512)
      Even number ``n`` of slow-time intervals; the data has ``n+1`` rows at
      ``s_j = j * pulse_interval`` for ``j = -n/2, ..., n/2``.

    fast_window : tuple of float (default=(-1e-6, 1e-6))
      Fast-time window ``[t_min, t_max]`` in s around zero delay.

    platform_speed : float (default=200.0)
      Platform speed in m/s.

    aperture_duration : float (default=11.5)
      Total slow-time aperture ``s_tot`` in s.

    lightspeed : float (default=3e8)
      Propagation speed in m/s.

    """

    carrier_omega0: float = X_BAND_OMEGA
    bandwidth: float = 100e6
    fast_dt: float = 5e-9
    slow_count: int = 512
    fast_window: Tuple[float, float] = (-1e-6, 1e-6)
    platform_speed: float = 200.0
    aperture_duration: float = 11.5
    lightspeed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        object.__setattr__(self, "fast_window",
                           tuple(float(t) for t in self.fast_window))
        for name in ("carrier_omega0", "bandwidth", "fast_dt",
                     "platform_speed", "aperture_duration", "lightspeed"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if int(self.slow_count) != self.slow_count or self.slow_count < 2 \
                or self.slow_count % 2:
            raise ValueError(
                f"slow_count must be an even integer >= 2, got "
                f"{self.slow_count}")
        if self.fast_dt > 1 / (2 * self.bandwidth) * (1 + 1e-9):
            raise ValueError(
                f"fast_dt={self.fast_dt:g} s violates the baseband Nyquist "
                f"limit 1/(2B)={1 / (2 * self.bandwidth):g} s")
        t_min, t_max = self.fast_window
        if len(self.fast_window) != 2 or not t_min < t_max:
            raise ValueError(
                f"fast_window must be [t_min, t_max] with t_min < t_max, "
                f"got {self.fast_window}")

    @classmethod
    def desk_scale(cls, slow_count: int = 512, **overrides) -> "RadarConfig":
        """Desk-scale defaults with ``s_tot = 11.5 s`` at ``n = 512``, scaled
        proportionally for other ``n`` so the pulse interval is unchanged."""
        params = {"aperture_duration": 11.5 * slow_count / 512}
        params.update(overrides)
        return cls(slow_count=slow_count, **params)

    @property
    def pulse_interval(self) -> float:
        return self.aperture_duration / self.slow_count

    @property
    def fast_count(self) -> int:
        t_min, t_max = self.fast_window
        return int(round((t_max - t_min) / self.fast_dt)) + 1

    @property
    def slow_axis(self) -> torch.Tensor:
        half = self.slow_count // 2
        j = torch.arange(-half, half + 1, dtype=REAL_DTYPE)
        return j * self.pulse_interval

    @property
    def fast_axis(self) -> torch.Tensor:
        l = torch.arange(self.fast_count, dtype=REAL_DTYPE)
        return self.fast_window[0] + l * self.fast_dt


@dataclass(frozen=True)
class PointTarget:
    """Point scatterer at ``position0 + s * velocity``."""

    position0: Vector3
    velocity: Vector3 = (0.0, 0.0, 0.0)
    reflectivity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position0",
                           _vec3(self.position0, "position0"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))
        if not (math.isfinite(self.reflectivity) and self.reflectivity >= 0):
            raise ValueError(
                f"reflectivity must be >= 0, got {self.reflectivity}")

    @classmethod
    def from_heading(cls,
                     position0: Sequence[float],
                     speed: float,
                     alpha: float,
                     reflectivity: float = 1.0) -> "PointTarget":
        """Mover with velocity ``speed * [cos(alpha), sin(alpha), 0]``."""
        velocity = (speed * math.cos(alpha), speed * math.sin(alpha), 0.0)
        return cls(position0, velocity, reflectivity)

    @property
    def speed(self) -> float:
        return math.sqrt(sum(v * v for v in self.velocity))

    @property
    def is_moving(self) -> bool:
        return self.speed > 0

    def position(self, s: SlowTime) -> torch.Tensor:
        s = _as_slow(s)
        p0 = torch.tensor(self.position0, dtype=REAL_DTYPE)
        v = torch.tensor(self.velocity, dtype=REAL_DTYPE)
        return p0 + s.unsqueeze(-1) * v


@dataclass(frozen=True)
class Trajectory:
    """Straight-line, constant-speed platform path
    ``r(s) = start + s * speed * direction``."""

    start: Vector3
    speed: float = 200.0
    direction: Vector3 = (0.0, 1.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "start", _vec3(self.start, "start"))
        direction = np.asarray(_vec3(self.direction, "direction"))
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ValueError("direction must be non-zero")
        object.__setattr__(self, "direction", tuple(direction / norm))
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")

    def __call__(self, s: SlowTime) -> torch.Tensor:
        s = _as_slow(s)
        start = torch.tensor(self.start, dtype=REAL_DTYPE)
        direction = torch.tensor(self.direction, dtype=REAL_DTYPE)
        return start + s.unsqueeze(-1) * (self.speed * direction)


@dataclass(frozen=True)
class Scene:
    """Platform path, reference point and point targets.

    ``stationary`` targets must have zero velocity.
    """

    trajectory: Trajectory
    reference_point: Vector3 = (0.0, 0.0, 0.0)
    stationary: Tuple[PointTarget, ...] = field(default_factory=tuple)
    movers: Tuple[PointTarget, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "reference_point",
                           _vec3(self.reference_point, "reference_point"))
        object.__setattr__(self, "stationary", tuple(self.stationary))
        object.__setattr__(self, "movers", tuple(self.movers))
        for i, target in enumerate(self.stationary):
            if target.is_moving:
                raise ValueError(
                    f"stationary target {i} has non-zero velocity "
                    f"{target.velocity}")
        r0 = np.asarray(self.trajectory.start)
        if np.allclose(r0, self.reference_point):
            raise ValueError("reference point lies on the platform path")
        for kind, targets in (("stationary", self.stationary),
                              ("moving", self.movers)):
            for i, target in enumerate(targets):
                if self._distance_to_path(target.position0) < _ON_PATH_M:
                    raise ValueError(
                        f"{kind} target {i} at {target.position0} lies on "
                        f"the platform path")

    def _distance_to_path(self, point: Vector3) -> float:
        offset = np.asarray(point) - np.asarray(self.trajectory.start)
        direction = np.asarray(self.trajectory.direction)
        return float(
            np.linalg.norm(offset - np.dot(offset, direction) * direction))

    @property
    def targets(self) -> Tuple[PointTarget, ...]:
        return self.stationary + self.movers

    @property
    def is_empty(self) -> bool:
        return not self.targets

    def stationary_only(self) -> "Scene":
        return replace(self, movers=())

    def movers_only(self) -> "Scene":
        return replace(self, stationary=())

    @property
    def range_direction(self) -> np.ndarray:
        """Horizontal unit vector of the vertical plane through ``r(0)`` and
        the reference point."""
        horizontal = np.asarray(self.reference_point) - np.asarray(
            self.trajectory.start)
        horizontal[2] = 0.0
        norm = np.linalg.norm(horizontal)
        if norm == 0:
            # platform straight above the reference point
            flight = np.asarray(self.trajectory.direction)
            horizontal = np.cross(flight, [0.0, 0.0, 1.0])
            norm = np.linalg.norm(horizontal)
        return horizontal / norm

    @property
    def azimuth_direction(self) -> np.ndarray:
        return np.cross([0.0, 0.0, 1.0], self.range_direction)

    def heading_angle(self, target: PointTarget) -> float:
        v = np.asarray(target.velocity)
        return math.atan2(
            float(v @ self.azimuth_direction), float(v @ self.range_direction))

    def with_mover_heading(self, alpha: float) -> "Scene":
        """Copy of the scene with every mover turned to heading ``alpha`` at
        unchanged speed."""
        direction = (math.cos(alpha) * self.range_direction +
                     math.sin(alpha) * self.azimuth_direction)
        movers = tuple(
            replace(m, velocity=tuple(m.speed * direction))
            for m in self.movers)
        return replace(self, movers=movers)


@dataclass(frozen=True)
class DataMatrix:
    """Complex baseband data, rows = slow time, columns = fast time."""

    values: torch.Tensor
    slow_axis: torch.Tensor
    fast_axis: torch.Tensor
    config: Optional[RadarConfig] = None

    def __post_init__(self):
        rows, cols = self.values.shape
        if self.slow_axis.numel() != rows or self.fast_axis.numel() != cols:
            raise ValueError(
                f"Axis lengths ({self.slow_axis.numel()}, "
                f"{self.fast_axis.numel()}) do not match the data shape "
                f"{tuple(self.values.shape)}")
        for name, axis in (("slow_axis", self.slow_axis), ("fast_axis",
                                                           self.fast_axis)):
            if axis.numel() > 2:
                steps = torch.diff(axis)
                if not torch.allclose(
                        steps, steps[0].expand_as(steps), rtol=1e-9,
                        atol=0):
                    raise ValueError(f"{name} spacing is not uniform")

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.values.shape)

    def with_values(self, values: torch.Tensor) -> "DataMatrix":
        return replace(self, values=values)


def travel_time(scene: Scene,
                s: SlowTime,
                p: Union[Sequence[float], torch.Tensor],
                lightspeed: float = SPEED_OF_LIGHT) -> torch.Tensor:
    """Round-trip travel time ``2 * ||r(s) - p|| / c``."""
    p = torch.as_tensor(p, dtype=REAL_DTYPE)
    return 2 * torch.linalg.norm(scene.trajectory(s) - p, dim=-1) / lightspeed


def delta_tau(scene: Scene,
              target: PointTarget,
              s: SlowTime,
              lightspeed: float = SPEED_OF_LIGHT) -> torch.Tensor:
    """Travel-time difference between ``target`` at ``s`` and the reference
    point, under the start-stop approximation."""
    r = scene.trajectory(s)
    ref = torch.tensor(scene.reference_point, dtype=REAL_DTYPE)
    to_target = torch.linalg.norm(r - target.position(s), dim=-1)
    to_reference = torch.linalg.norm(r - ref, dim=-1)
    return 2 * (to_target - to_reference) / lightspeed


def pulse_envelope(t: torch.Tensor, bandwidth: float) -> torch.Tensor:
    """Gaussian baseband envelope ``exp(-B**2 t**2 / 2)``."""
    return torch.exp(-0.5 * (bandwidth * t)**2)


def _check_window(dtau: torch.Tensor, slow: torch.Tensor, cfg: RadarConfig,
                  kind: str, index: int):
    t_min, t_max = cfg.fast_window
    outside = (dtau < t_min) | (dtau > t_max)
    if bool(outside.any()):
        j = int(torch.nonzero(outside)[0])
        raise WindowCoverageError(
            f"{kind} target {index}: delay {float(dtau[j]):.4e} s at slow "
            f"time s={float(slow[j]):.6g} s lies outside the fast window "
            f"[{t_min:.4e}, {t_max:.4e}] s")


def _accumulate(scene: Scene, targets: Sequence[PointTarget],
                cfg: RadarConfig, kind: str) -> torch.Tensor:
    slow = cfg.slow_axis
    fast = cfg.fast_axis
    out = torch.zeros((slow.numel(), fast.numel()), dtype=DTYPE)
    for index, target in enumerate(targets):
        dtau = delta_tau(scene, target, slow, cfg.lightspeed)
        _check_window(dtau, slow, cfg, kind, index)
        envelope = pulse_envelope(fast.unsqueeze(0) - dtau.unsqueeze(1),
                                  cfg.bandwidth)
        phase = torch.polar(
            torch.ones_like(dtau), -cfg.carrier_omega0 * dtau)
        out += target.reflectivity * envelope * phase.unsqueeze(1)
    return out


def synthesize(scene: Scene, cfg: RadarConfig) -> DataMatrix:
    """Synthesize the ``(n+1) x (m+1)`` baseband data matrix of ``scene``.

    The stationary and moving contributions are summed separately and then
    added, so ``synthesize(scene)`` equals
    ``synthesize(scene.stationary_only()) + synthesize(scene.movers_only())``
    bit for bit.
    """
    values = (_accumulate(scene, scene.stationary, cfg, "stationary") +
              _accumulate(scene, scene.movers, cfg, "moving"))
    logger.debug("Synthesized %s data matrix from %d targets",
                 tuple(values.shape), len(scene.targets))
    return DataMatrix(values, cfg.slow_axis, cfg.fast_axis, cfg)


def synthesize_parts(scene: Scene, cfg: RadarConfig
                     ) -> Tuple[DataMatrix, DataMatrix, DataMatrix]:
    """Return ``(D, D_L, D_S)``: full, stationary-only and movers-only data,
    with ``D.values == D_L.values + D_S.values`` exactly."""
    d_l = synthesize(scene.stationary_only(), cfg)
    d_s = synthesize(scene.movers_only(), cfg)
    d = d_l.with_values(d_l.values + d_s.values)
    logger.info("Synthesized data %s: %d stationary, %d moving targets",
                d.shape, len(scene.stationary), len(scene.movers))
    return d, d_l, d_s


def column_support_estimate(scene: Scene, cfg: RadarConfig,
                            target: PointTarget) -> float:
    """First-order count of fast-time columns spanned by a mover's trace,
    ``N = 4 * s_tot / dt * v_t / c * cos(alpha)``."""
    if not target.is_moving:
        raise ValueError("column_support_estimate needs a moving target")
    range_rate = abs(float(np.asarray(target.velocity) @ scene.range_direction))
    return (4 * cfg.aperture_duration / cfg.fast_dt) * (range_rate /
                                                       cfg.lightspeed)


def random_stationary_targets(rng: np.random.Generator,
                              count: int,
                              extent: float,
                              reflectivity: float = 1.0,
                              center: Sequence[float] = (0.0, 0.0, 0.0)
                              ) -> Tuple[PointTarget, ...]:
    """``count`` stationary scatterers uniformly placed in a horizontal square
    of half-width ``extent`` around ``center``."""
    offsets = rng.uniform(-extent, extent, size=(count, 2))
    cx, cy, cz = _vec3(center, "center")
    return tuple(
        PointTarget((cx + dx, cy + dy, cz), reflectivity=reflectivity)
        for dx, dy in offsets)
