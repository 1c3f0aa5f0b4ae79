"""Desk-scale separation of a slow azimuth mover from a stationary scene."""
import math

import numpy as np
import pytest

from ray_trpca import SolverConfig, rpca_decoupled, rpca_matrix, rpca_tensor
from ray_trpca.base import separation_error
from ray_trpca.imaging import (ImageGridSpec, analytic_trace, backproject,
                               extract_trace, fit_motion)
from ray_trpca.norms import SweepGrid, eta_report, panel_eta_stars, sweep
from ray_trpca.sar_model import synthesize_parts
from ray_trpca.tensorize import plan_from_fractions, reconstruct, to_tensor
from ray_trpca.tests.conftest import desk_radar, desk_scene

HYPER_GRID = SweepGrid(
    s_sub_fractions=(0.02, 0.05, 0.1, 0.2),
    overlaps=(0.5, 0.9),
    alphas=(math.pi / 2, ))


@pytest.fixture(scope="module")
def separated():
    radar = desk_radar()
    scene = desk_scene()
    D, D_L, D_S = synthesize_parts(scene, radar)
    frame = sweep(scene, radar, HYPER_GRID)
    best = frame.loc[frame["eta_ratio_fourier"].idxmax()]
    plan = plan_from_fractions(radar, best["s_sub_fraction"],
                               best["overlap"])
    T = to_tensor(D, plan)
    T_L = to_tensor(D_L, plan).tensor
    T_S = to_tensor(D_S, plan).tensor

    tensor = rpca_tensor(
        T.tensor, SolverConfig(eta=eta_report(T_L, T_S).eta_star))
    decoupled = rpca_decoupled(T.tensor, panel_eta_stars(T_L, T_S))
    matrix = rpca_matrix(
        D.values,
        SolverConfig(
            eta=eta_report(D_L.values, D_S.values, "matrix").eta_star))

    S = reconstruct(T.with_tensor(tensor.S))
    sparse = {
        "tensor": S.values,
        "decoupled": reconstruct(T.with_tensor(decoupled.S)).values,
        "matrix": matrix.S,
    }
    return {
        "radar": radar,
        "scene": scene,
        "S": S,
        "converged": tensor.converged,
        "errors": {
            name: separation_error(values, D_S.values)
            for name, values in sparse.items()
        },
    }


def test_tensor_separation_beats_matrix_and_decoupled(separated):
    errors = separated["errors"]
    assert separated["converged"]
    assert errors["tensor"] <= 0.5
    assert errors["tensor"] < errors["decoupled"]
    assert errors["tensor"] < errors["matrix"]


def test_separated_mover_trace_and_motion(separated):
    radar, scene = separated["radar"], separated["scene"]
    target = scene.movers[0]
    trace = extract_trace(separated["S"], refine=True)
    slow = np.array([s for s, _ in trace])
    measured = np.array([t for _, t in trace])
    expected = analytic_trace(scene, radar, target.position0,
                              target.velocity, slow)
    assert np.max(np.abs(measured - expected)) <= 10 * radar.fast_dt

    estimate = fit_motion(trace, scene, radar, target.position0, v_max=5.0)
    assert estimate.speed == pytest.approx(target.speed, rel=0.1)
    assert estimate.heading == pytest.approx(
        math.pi / 2, abs=math.radians(5))


def test_compensated_image_focuses_the_separated_mover(separated):
    radar, scene = separated["radar"], separated["scene"]
    target = scene.movers[0]
    grid = ImageGridSpec.centered(target.position0, half_width=5.0,
                                  spacing=0.5)
    matched = backproject(separated["S"], scene, grid, target.velocity, radar)
    still = backproject(separated["S"], scene, grid, cfg=radar)
    position, _ = matched.peak()
    resolution = radar.lightspeed / (2 * radar.bandwidth)
    assert math.hypot(position[0] - target.position0[0],
                      position[1] - target.position0[1]) <= resolution
    assert matched.peak_to_background(2.0) > still.peak_to_background(2.0)
