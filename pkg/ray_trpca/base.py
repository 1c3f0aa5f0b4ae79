"""Low-rank plus sparse separation by the inexact augmented Lagrangian
method.

``TensorRPCA`` minimizes ``||L||_{*,F} + eta * ||S||_1`` subject to
``L + S = A`` for a panel-major tensor ``A``; the singular value threshold
acts on the panels after the unitary DFT along the panel index and the
soft threshold acts on the original panels. ``MatrixRPCA`` runs the same
iteration without the DFT, and ``DecoupledRPCA`` separates every panel on
its own.
"""
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple, Union
import logging
import math
import numbers
import warnings

import torch
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import ConvergenceWarning
from skorch.history import History

from ray_trpca.callbacks import (IterationTimer, ResidualScoring,
                                 SolverCallback, StepTimer,
                                 TableHistoryPrintCallback)
from ray_trpca.docs import set_rpca_docs
from ray_trpca.exceptions import DegenerateInputError, TRPCAError
from ray_trpca.norms import recommended_eta
from ray_trpca.numerics import (as_complex_matrix, as_complex_tensor3,
                                dft_axis3, frobenius, soft_threshold, svd,
                                svdvals)
from ray_trpca.utils import add_callback_if_not_already_in, parallel_map

logger = logging.getLogger(__name__)

MU0_POLICIES = ("max_panel_spectral", "inverse_max_panel_spectral")

# singular values / entries at or below this are counted as zero in the
# rank and nnz diagnostics
_ZERO = 0.0

Eta = Union[float, Tuple[float, ...]]


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the inexact ALM iteration.

    ``eta=None`` selects the recommended weight for the input shape.
    """

    eta: Optional[float] = None
    mu0: Union[str, float] = "max_panel_spectral"
    rho: float = 1.4
    tol: float = 1e-7
    max_iters: int = 500

    def __post_init__(self):
        if self.eta is not None and not (math.isfinite(self.eta)
                                         and self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if isinstance(self.mu0, str):
            if self.mu0 not in MU0_POLICIES:
                raise ValueError(
                    f"mu0 must be a positive float or one of {MU0_POLICIES}, "
                    f"got {self.mu0!r}")
        elif not self.mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if not self.rho > 1:
            raise ValueError(f"rho must be > 1, got {self.rho}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(
                f"max_iters must be a positive integer, got {self.max_iters}")

    def estimator_params(self) -> dict:
        return {
            "eta": self.eta,
            "mu0": self.mu0,
            "rho": self.rho,
            "tol": self.tol,
            "max_iters": self.max_iters
        }


@dataclass
class SeparationResult:
    L: torch.Tensor
    S: torch.Tensor
    iterations: int
    final_residual: float
    eta_used: Eta
    converged: bool
    mu0_used: Optional[float] = None
    history: Any = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "eta": (list(self.eta_used) if isinstance(self.eta_used, tuple)
                    else self.eta_used),
            "mu0": self.mu0_used,
            "converged": self.converged,
        }


def separation_error(estimate: torch.Tensor, truth: torch.Tensor) -> float:
    """``||estimate - truth||_F / ||truth||_F``."""
    norm = frobenius(truth)
    if norm == 0:
        raise DegenerateInputError("reference has zero Frobenius norm")
    return frobenius(estimate - truth) / norm


def _max_panel_spectral(A: torch.Tensor) -> float:
    return float(svdvals(A)[..., 0].max())


class TensorRPCA(BaseEstimator):
    """Tensor robust PCA with the Fourier tensor nuclear norm.

    Parameters
    ----------
    .. eta-param
    .. solver-params
    """

    _transform = True

    def __init__(self,
                 eta: Optional[float] = None,
                 mu0: Union[str, float] = "max_panel_spectral",
                 rho: float = 1.4,
                 tol: float = 1e-7,
                 max_iters: int = 500,
                 callbacks: Optional[List[Tuple[str, SolverCallback]]] = None,
                 verbose: int = 0):
        self.eta = eta
        self.mu0 = mu0
        self.rho = rho
        self.tol = tol
        self.max_iters = max_iters
        self.callbacks = callbacks
        self.verbose = verbose

    @classmethod
    def from_config(cls, cfg: SolverConfig, **kwargs) -> "TensorRPCA":
        return cls(**cfg.estimator_params(), **kwargs)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            eta=self.eta,
            mu0=self.mu0,
            rho=self.rho,
            tol=self.tol,
            max_iters=self.max_iters)

    def _validate_input(self, X) -> torch.Tensor:
        return as_complex_tensor3(X)

    def _default_eta(self, A: torch.Tensor) -> float:
        return recommended_eta(A.shape, n3=A.shape[0])

    @property
    def _default_callbacks(self):
        callbacks = [
            ("iteration_timer", IterationTimer()),
            ("step_timer", StepTimer()),
            ("residual_scoring", ResidualScoring()),
        ]
        if self.verbose:
            callbacks.append(("print_log", TableHistoryPrintCallback()))
        return callbacks

    def initialize_callbacks(self):
        """Initializes all callbacks and saves the result in the
        ``callbacks_`` attribute.

        Default callbacks are added unless a user callback with the same
        name or type is present, and run before the user callbacks so those
        see complete history rows.
        """
        callbacks_ = []
        for i, item in enumerate(self.callbacks or []):
            if isinstance(item, SolverCallback):
                item = (f"{type(item).__name__}_{i}", item)
            callbacks_.append(item)
        n_user = len(callbacks_)
        for name, callback in self._default_callbacks:
            add_callback_if_not_already_in(name, callback, callbacks_)
        callbacks_ = callbacks_[n_user:] + callbacks_[:n_user]
        self.callbacks_ = [(name, callback.initialize())
                           for name, callback in callbacks_]
        return self

    def notify(self, method_name, **cb_kwargs):
        for _, callback in self.callbacks_:
            getattr(callback, method_name)(self, **cb_kwargs)

    def _initial_mu(self, A: torch.Tensor) -> float:
        """``mu_0`` for the unit-norm input ``A``."""
        if self.mu0 == "max_panel_spectral":
            return _max_panel_spectral(A)
        if self.mu0 == "inverse_max_panel_spectral":
            return 1.25 / _max_panel_spectral(A)
        return float(self.mu0)

    def _low_rank_step(self, G: torch.Tensor, tau: float):
        """Singular value threshold of every (Fourier) panel of ``G``.

        Returns the new ``L`` and the thresholded singular values, whose sum
        is the (Fourier) nuclear norm of ``L``.
        """
        if self._transform:
            G = dft_axis3(G)
        U, s, Vh = svd(G)
        s = soft_threshold(s, tau)
        L = (U * s.unsqueeze(-2).to(U.dtype)) @ Vh
        if self._transform:
            L = dft_axis3(L, inverse=True)
        return L, s

    def _solve(self, X: torch.Tensor, eta: float):
        """Run the iteration on ``X / ||X||_F``.

        The minimizer is homogeneous in the input, so ``L`` and ``S`` are
        scaled back at the end. ``mu`` and ``mu0_`` refer to the unit-norm
        problem; ``objective`` is recorded in input units.
        """
        norm_X = frobenius(X)
        if norm_X == 0:
            raise DegenerateInputError("cannot separate an all-zero input")
        A = X / norm_X
        mu0 = self._initial_mu(A)
        self.mu0_ = mu0
        self.history_ = History()

        L = torch.zeros_like(A)
        S = torch.zeros_like(A)
        Y = torch.zeros_like(A)
        residual = math.inf
        converged = False
        k = 0
        self.notify("on_solve_begin", A=X)
        for k in range(int(self.max_iters)):
            mu = mu0 * self.rho**k
            self.history_.new_epoch()
            self.notify("on_iteration_begin", iteration=k + 1)
            self.history_.record("iteration", k + 1)
            self.history_.record("mu", mu)

            self.notify("on_svt_begin")
            L, s = self._low_rank_step(A - S + Y / mu, 1 / mu)
            self.notify("on_svt_end")

            self.notify("on_shrink_begin")
            S = soft_threshold(A - L + Y / mu, eta / mu)
            self.notify("on_shrink_end")

            R = A - L - S
            Y = Y + mu * R
            residual = frobenius(R)

            abs_S = torch.abs(S)
            self.history_.record("residual", residual)
            self.history_.record("rank", int((s > _ZERO).sum()))
            self.history_.record("nnz", int((abs_S > _ZERO).sum()))
            self.history_.record(
                "objective",
                norm_X * (float(s.sum()) + eta * float(abs_S.sum())))
            self.notify("on_iteration_end", iteration=k + 1)
            if residual <= self.tol:
                converged = True
                break
        self.notify("on_solve_end", A=X)
        return L * norm_X, S * norm_X, k + 1, residual, converged

    def fit(self, X, y=None):
        """Separate ``X`` into low-rank and sparse parts.

        Parameters
        ----------
        X : array-like
          Complex input: panel-major ``(n3, n1, n2)`` for tensors,
          ``(n1, n2)`` for matrices. Entries must be finite.

        y : ignored

        Returns
        -------
        self

        """
        A = self._validate_input(X)
        self.solver_config()
        eta = self.eta if self.eta is not None else self._default_eta(A)
        self.initialize_callbacks()
        logger.info("%s: separating %s input, eta=%.6g", type(self).__name__,
                    tuple(A.shape), eta)
        L, S, n_iter, residual, converged = self._solve(
            self._as_panels(A), eta)
        self.low_rank_ = self._from_panels(L)
        self.sparse_ = self._from_panels(S)
        self.n_iter_ = n_iter
        self.residual_ = residual
        self.converged_ = converged
        self.eta_ = eta
        self.result_ = SeparationResult(
            L=self.low_rank_,
            S=self.sparse_,
            iterations=n_iter,
            final_residual=residual,
            eta_used=eta,
            converged=converged,
            mu0_used=self.mu0_,
            history=self.history_)
        if converged:
            logger.info("%s converged after %d iterations, residual %.3e",
                        type(self).__name__, n_iter, residual)
        else:
            message = (f"{type(self).__name__} did not converge within "
                       f"{n_iter} iterations: residual {residual:.3e} > "
                       f"tol {self.tol:.1e}")
            logger.warning(message)
            warnings.warn(message, ConvergenceWarning)
        return self

    def _as_panels(self, A: torch.Tensor) -> torch.Tensor:
        return A

    def _from_panels(self, X: torch.Tensor) -> torch.Tensor:
        return X

    def fit_transform(self, X, y=None) -> Tuple[torch.Tensor, torch.Tensor]:
        self.fit(X)
        return self.low_rank_, self.sparse_


class MatrixRPCA(TensorRPCA):
    """Matrix robust PCA, ``min ||L||_* + eta * ||S||_1`` s.t. ``L + S = D``.

    Parameters
    ----------
    .. eta-param
    .. solver-params
    """

    _transform = False

    def _validate_input(self, X) -> torch.Tensor:
        return as_complex_matrix(X)

    def _default_eta(self, A: torch.Tensor) -> float:
        return recommended_eta(A.shape)

    def _as_panels(self, A: torch.Tensor) -> torch.Tensor:
        return A.unsqueeze(0)

    def _from_panels(self, X: torch.Tensor) -> torch.Tensor:
        return X[0]


class DecoupledRPCA(BaseEstimator):
    """Matrix robust PCA on every panel of a tensor independently.

    Parameters
    ----------
    eta : None, float or sequence of float (default=None)
      Weight per panel. A single float is used for every panel; ``None``
      uses ``1 / sqrt(max(n1, n2))`` for every panel.

    num_workers : int (default=1)
      Panels are solved as Ray tasks when > 1.

    .. solver-params
    """

    def __init__(self,
                 eta: Union[None, float, Sequence[float]] = None,
                 mu0: Union[str, float] = "max_panel_spectral",
                 rho: float = 1.4,
                 tol: float = 1e-7,
                 max_iters: int = 500,
                 callbacks: Optional[List[Tuple[str, SolverCallback]]] = None,
                 verbose: int = 0,
                 num_workers: int = 1):
        self.eta = eta
        self.mu0 = mu0
        self.rho = rho
        self.tol = tol
        self.max_iters = max_iters
        self.callbacks = callbacks
        self.verbose = verbose
        self.num_workers = num_workers

    def _panel_etas(self, n3: int) -> Optional[List[Optional[float]]]:
        if self.eta is None or isinstance(self.eta, numbers.Real):
            return [self.eta] * n3
        etas = [float(e) for e in self.eta]
        if len(etas) != n3:
            raise ValueError(
                f"got {len(etas)} panel weights for {n3} panels")
        return etas

    def fit(self, X, y=None):
        """Separate every panel of the ``(n3, n1, n2)`` tensor ``X``."""
        A = as_complex_tensor3(X)
        etas = self._panel_etas(A.shape[0])
        template = MatrixRPCA(
            mu0=self.mu0,
            rho=self.rho,
            tol=self.tol,
            max_iters=self.max_iters,
            callbacks=self.callbacks,
            verbose=self.verbose)
        logger.info("DecoupledRPCA: separating %d panels of shape %s",
                    A.shape[0], tuple(A.shape[1:]))

        def fit_panel(item):
            ell, eta = item
            estimator = clone(template).set_params(eta=eta)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                try:
                    estimator.fit(A[ell])
                except TRPCAError as e:
                    raise type(e)(f"panel {ell}: {e}") from e
            return estimator

        self.panel_estimators_ = parallel_map(
            fit_panel, list(enumerate(etas)), num_workers=self.num_workers)
        self.low_rank_ = torch.stack(
            [est.low_rank_ for est in self.panel_estimators_])
        self.sparse_ = torch.stack(
            [est.sparse_ for est in self.panel_estimators_])
        self.n_iter_ = max(est.n_iter_ for est in self.panel_estimators_)
        self.converged_ = all(est.converged_ for est in self.panel_estimators_)
        self.residual_ = frobenius(A - self.low_rank_ -
                                   self.sparse_) / frobenius(A)
        self.eta_ = tuple(est.eta_ for est in self.panel_estimators_)
        self.result_ = SeparationResult(
            L=self.low_rank_,
            S=self.sparse_,
            iterations=self.n_iter_,
            final_residual=self.residual_,
            eta_used=self.eta_,
            converged=self.converged_,
            history=[est.history_ for est in self.panel_estimators_])
        if not self.converged_:
            failed = [
                ell for ell, est in enumerate(self.panel_estimators_)
                if not est.converged_
            ]
            message = (f"DecoupledRPCA: panels {failed} did not converge "
                       f"within {self.max_iters} iterations")
            logger.warning(message)
            warnings.warn(message, ConvergenceWarning)
        return self

    def fit_transform(self, X, y=None) -> Tuple[torch.Tensor, torch.Tensor]:
        self.fit(X)
        return self.low_rank_, self.sparse_


_eta_tensor_doc = """    eta : None or float (default=None)
      Weight of the l1 term. ``None`` uses ``1 / sqrt(n3 * max(n1, n2))``.

"""

_eta_matrix_doc = """    eta : None or float (default=None)
      Weight of the l1 term. ``None`` uses ``1 / sqrt(max(n1, n2))``.

"""

set_rpca_docs(TensorRPCA, _eta_tensor_doc)
set_rpca_docs(MatrixRPCA, _eta_matrix_doc)
set_rpca_docs(DecoupledRPCA, "")


def rpca_matrix(D, cfg: Optional[SolverConfig] = None,
                **kwargs) -> SeparationResult:
    """Matrix robust PCA of ``D``; extra keyword arguments go to
    :class:`MatrixRPCA`."""
    cfg = cfg or SolverConfig()
    return MatrixRPCA.from_config(cfg, **kwargs).fit(D).result_


def rpca_tensor(T, cfg: Optional[SolverConfig] = None,
                **kwargs) -> SeparationResult:
    """Tensor robust PCA of the panel-major tensor ``T``."""
    cfg = cfg or SolverConfig()
    return TensorRPCA.from_config(cfg, **kwargs).fit(T).result_


def rpca_decoupled(T,
                   per_panel_eta: Union[None, float, Sequence[float]],
                   cfg: Optional[SolverConfig] = None,
                   **kwargs) -> SeparationResult:
    """Independent matrix robust PCA of every panel of ``T``."""
    cfg = cfg or SolverConfig()
    params = cfg.estimator_params()
    params["eta"] = per_panel_eta
    return DecoupledRPCA(**params, **kwargs).fit(T).result_
