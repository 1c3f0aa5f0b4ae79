import math

import numpy as np
import pytest
import torch

from ray_trpca.exceptions import WindowCoverageError
from ray_trpca.sar_model import (PointTarget, RadarConfig, Scene, Trajectory,
                                 column_support_estimate, delta_tau,
                                 random_stationary_targets, synthesize,
                                 synthesize_parts, travel_time)
from ray_trpca.tests.conftest import PLATFORM_START, make_scene, mover


def test_radar_config_validation():
    with pytest.raises(ValueError, match="Nyquist"):
        RadarConfig(fast_dt=1e-8)
    with pytest.raises(ValueError, match="even"):
        RadarConfig(slow_count=63)
    with pytest.raises(ValueError):
        RadarConfig(fast_window=(1e-6, -1e-6))
    with pytest.raises(ValueError):
        RadarConfig(bandwidth=0.0)


def test_desk_scale_keeps_pulse_interval():
    full = RadarConfig.desk_scale(512)
    small = RadarConfig.desk_scale(64)
    assert full.aperture_duration == pytest.approx(11.5)
    assert small.pulse_interval == pytest.approx(full.pulse_interval)


def test_axes(radar):
    slow = radar.slow_axis
    assert slow.numel() == radar.slow_count + 1
    assert float(slow[0]) == pytest.approx(-radar.aperture_duration / 2)
    assert float(slow[-1]) == pytest.approx(radar.aperture_duration / 2)
    assert radar.fast_count == 161
    assert radar.fast_axis.numel() == radar.fast_count
    assert float(radar.fast_axis[-1]) == pytest.approx(4e-7)


def test_synthesis_is_linear(scene, radar):
    D, D_L, D_S = synthesize_parts(scene, radar)
    assert D.shape == (65, 161)
    assert torch.equal(D.values, D_L.values + D_S.values)
    assert torch.equal(synthesize(scene, radar).values, D.values)


def test_reference_point_target(radar):
    scene = make_scene([PointTarget((0.0, 0.0, 0.0), reflectivity=2.0)])
    D = synthesize(scene, radar)
    zero = int(torch.argmin(torch.abs(radar.fast_axis)))
    assert torch.allclose(
        torch.abs(D.values[:, zero]),
        torch.full((65, ), 2.0, dtype=torch.float64),
        rtol=1e-9)
    assert torch.all(torch.abs(D.values).argmax(dim=1) == zero)


def test_empty_scene_is_zero(empty_scene, radar):
    D = synthesize(empty_scene, radar)
    assert D.shape == (65, 161)
    assert not bool(D.values.abs().any())


def test_window_coverage_error(radar):
    scene = make_scene([PointTarget((500.0, 0.0, 0.0))])
    with pytest.raises(WindowCoverageError, match="stationary target 0"):
        synthesize(scene, radar)


def test_stationary_targets_must_not_move():
    with pytest.raises(ValueError, match="non-zero velocity"):
        make_scene([PointTarget((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))])


def test_targets_on_the_platform_path_are_rejected():
    on_path = (PLATFORM_START[0], 250.0, PLATFORM_START[2])
    with pytest.raises(ValueError, match="stationary target 0 .* platform"):
        make_scene([PointTarget(on_path)])
    with pytest.raises(ValueError, match="moving target 0 .* platform"):
        make_scene(movers=[PointTarget(on_path, (1.0, 0.0, 0.0))])
    make_scene([PointTarget((PLATFORM_START[0], 250.0, 0.0))])


def _row_change(values: torch.Tensor) -> float:
    magnitude = values.abs()
    return float(
        torch.linalg.norm(magnitude[1:] - magnitude[:-1]) /
        torch.linalg.norm(magnitude))


def test_stationary_traces_vary_slowly(empty_scene, radar):
    stationary = [PointTarget((5.0, 8.0, 0.0)), PointTarget((-6.0, -4.0, 0.0))]
    fast = mover(empty_scene, (0.0, 0.0, 0.0), 15.0, 0.0)
    background = synthesize(make_scene(stationary), radar).values
    moving = synthesize(make_scene(movers=[fast]), radar).values
    assert _row_change(background) < 0.2 * _row_change(moving)


def test_reference_point_only_shifts_traces(radar):
    target = PointTarget((5.0, 8.0, 0.0))
    shifted = Scene(Trajectory(PLATFORM_START, speed=200.0),
                    reference_point=(2.0, 1.0, 0.0),
                    stationary=(target, ))
    scene = make_scene([target])
    power = synthesize(scene, radar).values.abs()**2
    power_shifted = synthesize(shifted, radar).values.abs()**2
    assert torch.allclose(power.sum(dim=1), power_shifted.sum(dim=1),
                          rtol=1e-9, atol=0)
    t = radar.fast_axis
    centroid = (power * t).sum(dim=1) / power.sum(dim=1)
    centroid_shifted = (power_shifted * t).sum(dim=1) / power_shifted.sum(
        dim=1)
    expected = torch.stack([
        travel_time(scene, float(s), scene.reference_point) -
        travel_time(shifted, float(s), shifted.reference_point)
        for s in radar.slow_axis
    ])
    assert torch.allclose(centroid_shifted - centroid, expected, rtol=0,
                          atol=1e-12)


def test_delta_tau_is_travel_time_difference(scene, radar):
    target = scene.movers[0]
    s = radar.slow_axis
    direct = torch.stack([
        travel_time(scene, float(sj), target.position(float(sj))) -
        travel_time(scene, float(sj), scene.reference_point) for sj in s
    ])
    assert torch.allclose(delta_tau(scene, target, s), direct, atol=1e-18)


@pytest.mark.parametrize("alpha", [0.0, math.pi / 8, math.pi / 3, math.pi / 2])
def test_with_mover_heading(scene, alpha):
    turned = scene.with_mover_heading(alpha)
    assert turned.heading_angle(turned.movers[0]) == pytest.approx(
        alpha, abs=1e-12)
    assert turned.movers[0].speed == pytest.approx(scene.movers[0].speed)
    assert turned.stationary == scene.stationary


def test_column_support_estimate(empty_scene, radar):
    radial = mover(empty_scene, (0.0, 0.0, 0.0), 5.0, 0.0)
    tangential = mover(empty_scene, (0.0, 0.0, 0.0), 5.0, math.pi / 2)
    expected = 4 * radar.aperture_duration / radar.fast_dt * 5.0 / 3e8
    assert column_support_estimate(empty_scene, radar,
                                   radial) == pytest.approx(expected)
    assert column_support_estimate(empty_scene, radar,
                                   tangential) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        column_support_estimate(empty_scene, radar,
                                PointTarget((0.0, 0.0, 0.0)))


def test_random_stationary_targets_are_seeded():
    first = random_stationary_targets(np.random.default_rng(3), 4, 10.0)
    second = random_stationary_targets(np.random.default_rng(3), 4, 10.0)
    assert first == second
    for target in first:
        assert abs(target.position0[0]) <= 10.0
        assert abs(target.position0[1]) <= 10.0
        assert not target.is_moving


def test_from_heading():
    target = PointTarget.from_heading((0.0, 0.0, 0.0), 2.0, math.pi / 2)
    assert target.velocity == pytest.approx((0.0, 2.0, 0.0), abs=1e-12)
    assert target.speed == pytest.approx(2.0)
