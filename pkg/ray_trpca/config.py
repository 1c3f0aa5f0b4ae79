"""JSON experiment configuration.

Every section is optional except ``scene``. Unknown keys are rejected and
every error names the dotted path of the offending field. The schema, with
units, is documented in the README.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union
import copy
import json
import logging
import math

import numpy as np

from ray_trpca.base import SolverConfig
from ray_trpca.exceptions import ConfigError
from ray_trpca.imaging import (DEFAULT_STABILITY_THRESHOLD, DEFAULT_V_MAX,
                               ImageGridSpec)
from ray_trpca.norms import SweepGrid
from ray_trpca.sar_model import (PointTarget, RadarConfig, Scene, Trajectory,
                                 random_stationary_targets)
from ray_trpca.utils import config_hash

logger = logging.getLogger(__name__)

METHODS = ("tensor", "matrix", "decoupled")
ETA_MODES = ("oracle", "default", "explicit")

_TOP_LEVEL = {
    "seed", "output_dir", "num_workers", "radar", "scene", "tensor",
    "solver", "sweep", "imaging", "motion"
}


@dataclass(frozen=True)
class TensorSettings:
    s_sub_fraction: float = 0.1
    overlap: float = 0.5


@dataclass(frozen=True)
class MotionSettings:
    stability_threshold: float = DEFAULT_STABILITY_THRESHOLD
    v_max: float = DEFAULT_V_MAX
    n_speeds: int = 4
    n_angles: int = 5
    max_fev: int = 4000
    seed_position: Optional[Tuple[float, float, float]] = None
    refine_peaks: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: Path
    num_workers: int
    radar: RadarConfig
    scene: Scene
    tensor: TensorSettings
    solver: SolverConfig
    method: str
    eta_mode: str
    sweep: SweepGrid
    imaging: ImageGridSpec
    motion: MotionSettings
    raw: Dict[str, Any] = field(repr=False, compare=False, default=None)

    @property
    def hash(self) -> str:
        return config_hash(self.raw or {})

    def header(self) -> Dict[str, Any]:
        """Provenance recorded in every output file."""
        return {"config_hash": self.hash, "seed": self.seed}


class _Section:
    """Typed access to one JSON object, tracking its dotted path."""

    def __init__(self, data: Any, path: str, allowed: Sequence[str]):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(
                f"expected an object, got {type(data).__name__}", path)
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise ConfigError(
                f"unknown key(s) {unknown}; allowed: {sorted(allowed)}",
                path or None)
        self.data = data
        self.path = path

    def field_path(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, default: Any = None,
            convert: Optional[Callable[[Any], Any]] = None) -> Any:
        if key not in self.data or self.data[key] is None:
            return default
        value = self.data[key]
        if convert is None:
            return value
        try:
            return convert(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), self.field_path(key)) from e

    def section(self, key: str, allowed: Sequence[str]) -> "_Section":
        return _Section(self.data.get(key), self.field_path(key), allowed)


def _number(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {value}")
    return value


def _positive(value) -> float:
    value = _number(value)
    if value <= 0:
        raise ValueError(f"must be positive, got {value}")
    return value


def _integer(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _flag(value) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _vector(length: int) -> Callable[[Any], Tuple[float, ...]]:
    def convert(value):
        if not isinstance(value, (list, tuple)) or len(value) != length:
            raise ValueError(f"expected a list of {length} numbers, got "
                             f"{value!r}")
        return tuple(_number(v) for v in value)

    return convert


def _numbers(value) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ValueError(f"expected a non-empty list of numbers, got "
                         f"{value!r}")
    return tuple(_number(v) for v in value)


def _choice(options: Sequence[str]) -> Callable[[Any], str]:
    def convert(value):
        if value not in options:
            raise ValueError(f"expected one of {list(options)}, got {value!r}")
        return value

    return convert


def _radar(section: _Section) -> RadarConfig:
    slow_count = section.get("slow_count", 512, _integer)
    overrides = {}
    for key, name, convert in (
        ("carrier_omega0_rad_s", "carrier_omega0", _positive),
        ("bandwidth_hz", "bandwidth", _positive),
        ("fast_dt_s", "fast_dt", _positive),
        ("fast_window_s", "fast_window", _vector(2)),
        ("platform_speed_m_s", "platform_speed", _positive),
        ("aperture_duration_s", "aperture_duration", _positive),
        ("lightspeed_m_s", "lightspeed", _positive),
    ):
        value = section.get(key, None, convert)
        if value is not None:
            overrides[name] = value
    try:
        return RadarConfig.desk_scale(slow_count, **overrides)
    except ValueError as e:
        raise ConfigError(str(e), section.path) from e


def _target(section: _Section, moving: bool,
            scene: Optional[Scene]) -> PointTarget:
    position = section.get("position_m", None, _vector(3))
    if position is None:
        raise ConfigError("missing required field", section.field_path(
            "position_m"))
    reflectivity = section.get("reflectivity", 1.0, _number)
    velocity = (0.0, 0.0, 0.0)
    if moving:
        if section.has("velocity_m_s"):
            if section.has("speed_m_s") or section.has("heading_rad"):
                raise ConfigError(
                    "give either velocity_m_s or speed_m_s + heading_rad",
                    section.path)
            velocity = section.get("velocity_m_s", None, _vector(3))
        else:
            speed = section.get("speed_m_s", None, _number)
            heading = section.get("heading_rad", 0.0, _number)
            if speed is None:
                raise ConfigError(
                    "a mover needs velocity_m_s or speed_m_s",
                    section.path)
            velocity = tuple(speed * (math.cos(heading) * scene.range_direction
                                      + math.sin(heading) *
                                      scene.azimuth_direction))
    try:
        return PointTarget(position, velocity, reflectivity)
    except ValueError as e:
        raise ConfigError(str(e), section.path) from e


def _list(section: _Section, key: str) -> list:
    value = section.get(key, [])
    if not isinstance(value, list):
        raise ConfigError("expected a list", section.field_path(key))
    return value


def _scene(section: _Section, radar: RadarConfig, seed: int) -> Scene:
    try:
        trajectory = Trajectory(
            start=section.get("platform_start_m", (-7000.0, 0.0, 3000.0),
                              _vector(3)),
            speed=radar.platform_speed,
            direction=section.get("platform_direction", (0.0, 1.0, 0.0),
                                  _vector(3)))
        reference = section.get("reference_point_m", (0.0, 0.0, 0.0),
                                _vector(3))
        frame = Scene(trajectory, reference)
    except ValueError as e:
        raise ConfigError(str(e), section.path) from e

    target_keys = ("position_m", "reflectivity")
    stationary = [
        _target(
            _Section(item, section.field_path(f"stationary[{i}]"),
                     target_keys), False, frame)
        for i, item in enumerate(_list(section, "stationary"))
    ]
    if section.has("random_stationary"):
        block = section.section(
            "random_stationary",
            ("count", "extent_m", "reflectivity", "center_m"))
        count = block.get("count", 10, _integer)
        if count < 0:
            raise ConfigError("must be >= 0", block.field_path("count"))
        rng = np.random.default_rng(seed)
        stationary.extend(
            random_stationary_targets(
                rng, count, block.get("extent_m", 50.0, _positive),
                block.get("reflectivity", 1.0, _number),
                block.get("center_m", reference, _vector(3))))
    mover_keys = ("position_m", "reflectivity", "velocity_m_s", "speed_m_s",
                  "heading_rad")
    movers = [
        _target(
            _Section(item, section.field_path(f"movers[{i}]"), mover_keys),
            True, frame) for i, item in enumerate(_list(section, "movers"))
    ]
    if not stationary and not movers:
        raise ConfigError("the scene has no targets", section.path)
    return Scene(trajectory, reference, tuple(stationary), tuple(movers))


def _solver(section: _Section) -> Tuple[SolverConfig, str, str]:
    mu0 = section.get("mu0", "max_panel_spectral")
    if not isinstance(mu0, str):
        mu0 = section.get("mu0", None, _positive)
    try:
        cfg = SolverConfig(
            eta=section.get("eta", None, _positive),
            mu0=mu0,
            rho=section.get("rho", 1.4, _number),
            tol=section.get("tol", 1e-7, _number),
            max_iters=section.get("max_iters", 500, _integer))
    except ValueError as e:
        raise ConfigError(str(e), section.path) from e
    method = section.get("method", "tensor", _choice(METHODS))
    eta_mode = section.get("eta_mode", "oracle", _choice(ETA_MODES))
    if eta_mode == "explicit" and cfg.eta is None:
        raise ConfigError("eta_mode 'explicit' needs a value",
                          section.field_path("eta"))
    return cfg, method, eta_mode


def _imaging(section: _Section, scene: Scene) -> ImageGridSpec:
    spacing = section.get("spacing_m", 2.0, _positive)
    try:
        if section.has("origin_m"):
            return ImageGridSpec(
                section.get("origin_m", None, _vector(3)), spacing,
                section.get("nx", 65, _integer),
                section.get("ny", 65, _integer))
        return ImageGridSpec.centered(
            section.get("center_m", scene.reference_point, _vector(3)),
            section.get("half_width_m", 64.0, _positive), spacing)
    except ValueError as e:
        raise ConfigError(str(e), section.path) from e


def from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed configuration and build the experiment objects."""
    root = _Section(raw, "", _TOP_LEVEL)
    seed = root.get("seed", 0, _integer)
    num_workers = root.get("num_workers", 1, _integer)
    if num_workers < 1:
        raise ConfigError("must be >= 1", "num_workers")
    radar = _radar(
        root.section("radar", ("slow_count", "carrier_omega0_rad_s",
                               "bandwidth_hz", "fast_dt_s", "fast_window_s",
                               "platform_speed_m_s", "aperture_duration_s",
                               "lightspeed_m_s")))
    if "scene" not in raw:
        raise ConfigError("missing required section", "scene")
    scene = _scene(
        root.section("scene",
                     ("platform_start_m", "platform_direction",
                      "reference_point_m", "stationary", "random_stationary",
                      "movers")), radar, seed)

    tensor_section = root.section("tensor", ("s_sub_fraction", "overlap"))
    tensor = TensorSettings(
        s_sub_fraction=tensor_section.get("s_sub_fraction", 0.1, _positive),
        overlap=tensor_section.get("overlap", 0.5, _number))
    if not 0 < tensor.s_sub_fraction <= 1:
        raise ConfigError("must be in (0, 1]", "tensor.s_sub_fraction")
    if not 0 <= tensor.overlap < 1:
        raise ConfigError("must be in [0, 1)", "tensor.overlap")

    solver, method, eta_mode = _solver(
        root.section("solver", ("eta", "mu0", "rho", "tol", "max_iters",
                                "method", "eta_mode")))

    sweep_section = root.section("sweep",
                                 ("s_sub_fractions", "overlaps", "alphas_rad"))
    defaults = SweepGrid()
    sweep = SweepGrid(
        s_sub_fractions=sweep_section.get("s_sub_fractions",
                                          defaults.s_sub_fractions, _numbers),
        overlaps=sweep_section.get("overlaps", defaults.overlaps, _numbers),
        alphas=sweep_section.get("alphas_rad", defaults.alphas, _numbers))

    imaging = _imaging(
        root.section("imaging", ("origin_m", "center_m", "half_width_m",
                                 "spacing_m", "nx", "ny")), scene)

    motion_section = root.section(
        "motion", ("stability_threshold", "v_max_m_s", "n_speeds", "n_angles",
                   "max_fev", "seed_position_m", "refine_peaks"))
    motion = MotionSettings(
        stability_threshold=motion_section.get(
            "stability_threshold", DEFAULT_STABILITY_THRESHOLD, _number),
        v_max=motion_section.get("v_max_m_s", DEFAULT_V_MAX, _positive),
        n_speeds=motion_section.get("n_speeds", 4, _integer),
        n_angles=motion_section.get("n_angles", 5, _integer),
        max_fev=motion_section.get("max_fev", 4000, _integer),
        seed_position=motion_section.get("seed_position_m", None,
                                         _vector(3)),
        refine_peaks=motion_section.get("refine_peaks", False, _flag))
    if not 0 <= motion.stability_threshold <= 1:
        raise ConfigError("must be in [0, 1]", "motion.stability_threshold")

    return ExperimentConfig(
        seed=seed,
        output_dir=Path(root.get("output_dir", "out", str)),
        num_workers=num_workers,
        radar=radar,
        scene=scene,
        tensor=tensor,
        solver=solver,
        method=method,
        eta_mode=eta_mode,
        sweep=sweep,
        imaging=imaging,
        motion=motion,
        raw=copy.deepcopy(raw))


def load_config(path: Union[str, Path],
                overrides: Optional[Dict[str, Any]] = None
                ) -> ExperimentConfig:
    """Read, override and validate a JSON configuration file.

    ``overrides`` maps dotted field paths (e.g. ``"seed"`` or
    ``"solver.method"``) to values and is applied before validation.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError("expected an object", key)
        node[leaf] = value
    config = from_dict(raw)
    logger.info("Loaded config %s (hash %s, seed %d)", path, config.hash,
                config.seed)
    return config
