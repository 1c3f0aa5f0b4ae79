import math

import numpy as np
import pytest
import ray
import torch

from ray_trpca.sar_model import (PointTarget, RadarConfig, Scene, Trajectory,
                                 random_stationary_targets)

PLATFORM_START = (-7000.0, 0.0, 3000.0)
DESK_WINDOW = (-4e-7, 4e-7)


def random_complex(generator: torch.Generator, *shape) -> torch.Tensor:
    real = torch.randn(*shape, generator=generator, dtype=torch.float64)
    imag = torch.randn(*shape, generator=generator, dtype=torch.float64)
    return torch.complex(real, imag) / math.sqrt(2)


def make_scene(stationary=(), movers=()) -> Scene:
    return Scene(
        Trajectory(PLATFORM_START, speed=200.0),
        reference_point=(0.0, 0.0, 0.0),
        stationary=tuple(stationary),
        movers=tuple(movers))


def mover(scene: Scene, position, speed: float, alpha: float,
          reflectivity: float = 1.0) -> PointTarget:
    """Mover at heading ``alpha`` in the scene's range/azimuth frame."""
    direction = (math.cos(alpha) * scene.range_direction +
                 math.sin(alpha) * scene.azimuth_direction)
    return PointTarget(position, tuple(speed * direction), reflectivity)


def desk_radar() -> RadarConfig:
    return RadarConfig.desk_scale(512, fast_window=DESK_WINDOW)


def desk_scene(speed: float = 1.0,
               alpha: float = math.pi / 2,
               position=(10.0, 5.0, 0.0)) -> Scene:
    """Fifteen unit scatterers within 30 m and one mover of reflectivity
    0.1."""
    rng = np.random.default_rng(0)
    stationary = random_stationary_targets(rng, 15, 30.0)
    return make_scene(stationary,
                      [mover(make_scene(), position, speed, alpha, 0.1)])


@pytest.fixture
def generator():
    return torch.Generator().manual_seed(0)


@pytest.fixture
def radar():
    return RadarConfig.desk_scale(64, fast_window=(-4e-7, 4e-7))


@pytest.fixture
def empty_scene():
    return make_scene()


@pytest.fixture
def scene(empty_scene):
    rng = np.random.default_rng(0)
    stationary = random_stationary_targets(rng, 5, 30.0)
    moving = mover(empty_scene, (10.0, 5.0, 0.0), 5.0, math.pi / 4, 0.1)
    return make_scene(stationary, [moving])


@pytest.fixture
def ray_start_2_cpus():
    address_info = ray.init(num_cpus=2)
    yield address_info
    # The code after the yield will run as teardown code.
    ray.shutdown()
