import numpy as np
import pytest
import torch

from ray_trpca.exceptions import PlanError
from ray_trpca.norms import DEFAULT_OVERLAPS, DEFAULT_S_SUB_FRACTIONS
from ray_trpca.sar_model import DataMatrix, RadarConfig
from ray_trpca.tensorize import (TensorPlan, innermost_assignment,
                                 innermost_panel, make_plan,
                                 plan_from_fractions, reconstruct, to_tensor)
from ray_trpca.tests.conftest import random_complex


def _data(generator, rows, cols=5):
    return DataMatrix(
        random_complex(generator, rows, cols),
        torch.arange(rows, dtype=torch.float64),
        torch.arange(cols, dtype=torch.float64))


def test_desk_scale_plan():
    cfg = RadarConfig.desk_scale(512)
    plan = plan_from_fractions(cfg, 0.1, 0.5)
    assert plan.total_rows == 513
    assert plan.rows_per_panel == 52
    assert plan.stride_rows == 26
    assert plan.n3 == 19
    assert plan.starts[0] == 0
    assert plan.starts[-1] == 513 - 52
    assert np.all(np.diff(plan.starts) >= 0)
    assert plan.coverage().min() >= 1


@pytest.mark.parametrize("slow_count", [128, 512])
def test_sweep_grid_plans_are_exact(slow_count):
    cfg = RadarConfig.desk_scale(slow_count)
    built = 0
    for fraction in DEFAULT_S_SUB_FRACTIONS:
        for overlap in DEFAULT_OVERLAPS:
            try:
                plan = plan_from_fractions(cfg, fraction, overlap)
            except PlanError as e:
                assert "stride" in str(e)
                continue
            built += 1
            starts = plan.starts
            assert np.all(np.diff(starts) > 0), (fraction, overlap)
            assert plan.coverage().min() >= 1, (fraction, overlap)
            assert starts[-1] == plan.total_rows - plan.rows_per_panel
            if plan.n3 > 1:
                # no spare panel: the one before the last stops short of it
                assert starts[-2] + plan.rows_per_panel < plan.total_rows
    assert built > len(DEFAULT_S_SUB_FRACTIONS) * len(DEFAULT_OVERLAPS) // 2


@pytest.mark.parametrize("slow_count, fraction, overlap",
                         [(512, 0.01, 0.6), (512, 0.02, 0.9),
                          (128, 0.1, 0.9)])
def test_fine_stride_plans_cover_every_row(slow_count, fraction, overlap):
    plan = plan_from_fractions(RadarConfig.desk_scale(slow_count), fraction,
                               overlap)
    assert plan.coverage().min() >= 1
    assert len(np.unique(plan.starts)) == plan.n3


def test_full_aperture_is_one_panel():
    plan = make_plan(11.5, 11.5, 0.0, 11.5 / 64)
    assert plan.n3 == 1
    assert plan.rows_per_panel == plan.total_rows == 65


@pytest.mark.parametrize(
    "s_tot, s_sub, overlap",
    [(1.0, 2.0, 0.5), (1.0, 0.0, 0.5), (1.0, 0.5, 1.0), (1.0, 0.5, -0.1)])
def test_invalid_plans(s_tot, s_sub, overlap):
    with pytest.raises(PlanError):
        make_plan(s_tot, s_sub, overlap, 0.01)


def test_zero_stride_is_rejected():
    cfg = RadarConfig.desk_scale(64)
    # one row per panel at 50% overlap rounds the stride to zero
    with pytest.raises(PlanError, match="stride"):
        plan_from_fractions(cfg, 0.005, 0.5)


def test_coverage_gap_is_rejected():
    with pytest.raises(PlanError, match="not covered"):
        TensorPlan(1.0, 0.0, rows_per_panel=2, stride_rows=4, n3=2,
                   total_rows=8)


def test_disjoint_partition(generator):
    plan = TensorPlan(1.0, 0.0, rows_per_panel=4, stride_rows=4, n3=2,
                      total_rows=8)
    assert np.array_equal(plan.coverage(), np.ones(8, dtype=int))
    D = _data(generator, 8)
    T = to_tensor(D, plan)
    assert T.shape == (2, 4, 5)
    assert torch.equal(T.tensor[1], D.values[4:])
    assert torch.equal(reconstruct(T).values, D.values)


@pytest.mark.parametrize("fraction, overlap", [(0.1, 0.5), (0.3, 0.9),
                                               (0.25, 0.0), (1.0, 0.5)])
def test_round_trip(generator, fraction, overlap):
    cfg = RadarConfig.desk_scale(64)
    plan = plan_from_fractions(cfg, fraction, overlap)
    D = _data(generator, plan.total_rows)
    T = to_tensor(D, plan)
    assert T.shape == (plan.n3, plan.rows_per_panel, 5)
    for ell in range(plan.n3):
        rows = plan.panel_rows(ell)
        assert torch.equal(T.tensor[ell], D.values[rows.start:rows.stop])
    assert torch.equal(reconstruct(T).values, D.values)


def test_to_tensor_shape_mismatch(generator):
    plan = TensorPlan(1.0, 0.0, 4, 4, 2, 8)
    with pytest.raises(PlanError, match="slow-time rows"):
        to_tensor(_data(generator, 9), plan)


def test_innermost_panel():
    assert innermost_panel([0, 1], 5) == 1
    assert innermost_panel([4], 5) == 4
    # 2**2 + 3**2 == 3**2 + 2**2, ties go to the smaller index
    assert innermost_panel([2, 3], 6) == 2
    with pytest.raises(PlanError):
        innermost_panel([], 3)


def test_innermost_assignment_matches_rule():
    plan = plan_from_fractions(RadarConfig.desk_scale(64), 0.2, 0.7)
    chosen = innermost_assignment(plan)
    for row in range(plan.total_rows):
        candidates = plan.covering_panels(row)
        assert chosen[row] in candidates
        assert chosen[row] == innermost_panel(candidates, plan.n3)


def test_panel_index_bounds():
    plan = TensorPlan(1.0, 0.0, 4, 4, 2, 8)
    with pytest.raises(IndexError):
        plan.panel_start(2)
    with pytest.raises(IndexError):
        plan.covering_panels(8)
