"""Dense complex linear algebra and transforms.

Matrices are 2-D ``torch.complex128`` tensors. Third-order tensors are
stored panel-major with shape ``(n3, n1, n2)``: the panel index (the third
mathematical axis) is storage dimension 0, so batched ``torch.linalg``
routines act on every panel at once.
"""
from typing import NamedTuple, Union
import numbers

import numpy as np
import torch

from ray_trpca.exceptions import SvdConvergenceError

DTYPE = torch.complex128
REAL_DTYPE = torch.float64

ArrayLike = Union[torch.Tensor, np.ndarray, list, tuple]


class SvdResult(NamedTuple):
    U: torch.Tensor
    singular_values: torch.Tensor
    Vh: torch.Tensor


class MatrixNorms(NamedTuple):
    nuclear: float
    spectral: float
    frobenius: float
    l1: float


def _as_complex(values: ArrayLike) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        out = values.to(DTYPE)
    else:
        out = torch.as_tensor(np.asarray(values), dtype=DTYPE)
    if not bool(torch.isfinite(out).all()):
        raise ValueError("Entries must be finite (no NaN/Inf).")
    return out


def as_complex_matrix(values: ArrayLike) -> torch.Tensor:
    """Validate and convert ``values`` into a ComplexMatrix."""
    out = _as_complex(values)
    if out.dim() != 2:
        raise ValueError(f"A matrix must be 2-D, got shape {tuple(out.shape)}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(
            f"A matrix needs rows >= 1 and cols >= 1, got {tuple(out.shape)}")
    return out


def as_complex_tensor3(values: ArrayLike) -> torch.Tensor:
    """Validate and convert ``values`` into a ComplexTensor3.

    ``values`` must be panel-major, ``(n3, n1, n2)``.
    """
    out = _as_complex(values)
    if out.dim() != 3:
        raise ValueError(
            f"A tensor must be 3-D (n3, n1, n2), got shape {tuple(out.shape)}")
    if min(out.shape) < 1:
        raise ValueError(f"Empty tensor dimension in {tuple(out.shape)}")
    return out


def _shape_str(M: torch.Tensor) -> str:
    return "x".join(str(d) for d in M.shape)


def svd(M: torch.Tensor) -> SvdResult:
    """Thin SVD, ``M = U @ diag(s) @ Vh``, singular values non-increasing.

    Works on a single matrix or a stack of panels.
    """
    if not bool(torch.isfinite(M).all()):
        raise ValueError(f"Cannot take the SVD of a non-finite "
                         f"{_shape_str(M)} matrix.")
    try:
        U, s, Vh = torch.linalg.svd(M, full_matrices=False)
    except RuntimeError as e:
        raise SvdConvergenceError(
            f"SVD did not converge for a {_shape_str(M)} matrix: {e}") from e
    return SvdResult(U, s, Vh)


def svdvals(M: torch.Tensor) -> torch.Tensor:
    try:
        return torch.linalg.svdvals(M)
    except RuntimeError as e:
        raise SvdConvergenceError(
            f"SVD did not converge for a {_shape_str(M)} matrix: {e}") from e


def dft_axis3(T: torch.Tensor, inverse: bool = False) -> torch.Tensor:
    """Unitary DFT along the panel index.

    The forward transform is
    ``T_hat[k] = n3**-0.5 * sum_l T[l] * exp(+2j*pi*l*k/n3)``, which is
    ``torch.fft.ifft`` with orthonormal scaling; the inverse is the
    matching ``torch.fft.fft``.
    """
    if inverse:
        return torch.fft.fft(T, dim=0, norm="ortho")
    return torch.fft.ifft(T, dim=0, norm="ortho")


def soft_threshold(a, lam: float):
    """Complex soft threshold ``exp(i arg a) * max(|a| - lam, 0)``.

    Accepts a Python number or a tensor; returns the same kind.
    """
    if lam < 0:
        raise ValueError(f"Threshold must be non-negative, got {lam}")
    if isinstance(a, numbers.Number):
        out = soft_threshold(torch.tensor(complex(a), dtype=DTYPE), lam)
        return complex(out.item())
    magnitude = torch.clamp(torch.abs(a) - lam, min=0)
    return torch.sgn(a) * magnitude


def singular_value_threshold(X: torch.Tensor, tau: float) -> torch.Tensor:
    """Proximal operator of ``tau * ||.||_*``, applied to every panel."""
    U, s, Vh = svd(X)
    s = soft_threshold(s, tau)
    return (U * s.unsqueeze(-2).to(U.dtype)) @ Vh


def nuclear_norms(panels: torch.Tensor) -> torch.Tensor:
    """Nuclear norm of each panel (or of a single matrix)."""
    return svdvals(panels).sum(dim=-1)


def matrix_norms(M: torch.Tensor) -> MatrixNorms:
    s = svdvals(M)
    return MatrixNorms(
        nuclear=float(s.sum()),
        spectral=float(s[0]),
        frobenius=float(torch.linalg.norm(M)),
        l1=float(torch.abs(M).sum()))


def frobenius(X: torch.Tensor) -> float:
    return float(torch.linalg.norm(X.reshape(-1)))


def l1_norm(X: torch.Tensor) -> float:
    return float(torch.abs(X).sum())
