import math

import numpy as np
import pytest
import torch

from ray_trpca.exceptions import SvdConvergenceError
from ray_trpca.numerics import (DTYPE, as_complex_matrix, as_complex_tensor3,
                                dft_axis3, frobenius, matrix_norms,
                                nuclear_norms, singular_value_threshold,
                                soft_threshold, svd)
from ray_trpca.tests.conftest import random_complex


def test_svd_reconstructs(generator):
    M = random_complex(generator, 6, 4)
    U, s, Vh = svd(M)
    assert U.shape == (6, 4)
    assert Vh.shape == (4, 4)
    assert torch.all(s[:-1] >= s[1:])
    rebuilt = (U * s.to(DTYPE)) @ Vh
    assert frobenius(rebuilt - M) <= 1e-12 * frobenius(M)


def test_svd_rejects_non_finite():
    M = torch.zeros((3, 3), dtype=DTYPE)
    M[1, 1] = complex(float("nan"), 0)
    with pytest.raises(ValueError):
        svd(M)


def test_svd_error_is_numerical():
    assert issubclass(SvdConvergenceError, ArithmeticError)


def test_soft_threshold_scalar():
    assert soft_threshold(3 + 4j, 1.0) == pytest.approx(2.4 + 3.2j)
    assert soft_threshold(0.5, 1.0) == 0
    assert soft_threshold(-2.0, 0.5) == pytest.approx(-1.5)


def test_soft_threshold_tensor_keeps_phase(generator):
    a = random_complex(generator, 5, 5)
    out = soft_threshold(a, 0.3)
    expected_mag = torch.clamp(torch.abs(a) - 0.3, min=0)
    assert torch.allclose(torch.abs(out), expected_mag, atol=1e-14)
    keep = expected_mag > 0
    assert torch.allclose(
        torch.angle(out[keep]), torch.angle(a[keep]), atol=1e-12)


def test_soft_threshold_negative_threshold():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_singular_value_threshold(generator):
    M = random_complex(generator, 8, 5)
    s = torch.linalg.svdvals(M)
    tau = float(s[2])
    out = torch.linalg.svdvals(singular_value_threshold(M, tau))
    expected = torch.clamp(s - tau, min=0)
    assert torch.allclose(out, expected, atol=1e-12)


def test_dft_axis3_matches_definition(generator):
    T = random_complex(generator, 5, 3, 2)
    n3 = T.shape[0]
    expected = torch.zeros_like(T)
    for k in range(n3):
        for ell in range(n3):
            expected[k] += T[ell] * complex(
                math.cos(2 * math.pi * ell * k / n3),
                math.sin(2 * math.pi * ell * k / n3))
    expected /= math.sqrt(n3)
    assert torch.allclose(dft_axis3(T), expected, atol=1e-12)


@pytest.mark.parametrize("n3", [1, 2, 7, 8])
def test_dft_axis3_parseval_and_inverse(generator, n3):
    T = random_complex(generator, n3, 4, 3)
    T_hat = dft_axis3(T)
    assert frobenius(T_hat) == pytest.approx(frobenius(T), rel=1e-10)
    assert torch.allclose(dft_axis3(T_hat, inverse=True), T, atol=1e-12)


def test_nuclear_norms_per_panel(generator):
    T = random_complex(generator, 3, 4, 6)
    norms = nuclear_norms(T)
    for ell in range(3):
        assert float(norms[ell]) == pytest.approx(
            float(torch.linalg.svdvals(T[ell]).sum()), rel=1e-12)


def test_matrix_norms():
    M = torch.diag(torch.tensor([3.0, -4.0], dtype=torch.float64)).to(DTYPE)
    norms = matrix_norms(M)
    assert norms.nuclear == pytest.approx(7.0)
    assert norms.spectral == pytest.approx(4.0)
    assert norms.frobenius == pytest.approx(5.0)
    assert norms.l1 == pytest.approx(7.0)


def test_as_complex_validation():
    assert as_complex_matrix(np.eye(2)).dtype == DTYPE
    assert as_complex_tensor3([[[1.0]]]).shape == (1, 1, 1)
    with pytest.raises(ValueError):
        as_complex_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        as_complex_matrix(np.array([[np.inf, 0.0]]))
    with pytest.raises(ValueError):
        as_complex_tensor3(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        as_complex_tensor3(np.zeros((0, 2, 2)))
