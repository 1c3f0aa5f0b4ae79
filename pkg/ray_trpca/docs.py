from ray_trpca.utils import insert_before_substring

_docstring_solver_params = """    mu0 : str or float (default="max_panel_spectral")
      Initial penalty ``mu_0`` of the iteration, which runs on the input
      scaled to unit Frobenius norm. ``"max_panel_spectral"`` uses
      ``max_l ||A^(l)||_2`` of that input, ``"inverse_max_panel_spectral"``
      uses ``1.25 / max_l ||A^(l)||_2``; a positive float is used as is.

    rho : float (default=1.4)
      Growth factor of the penalty, ``mu_k = mu_0 * rho**k``. Must be > 1.

    tol : float (default=1e-7)
      Stop once ``||A - L - S||_F / ||A||_F <= tol``.

    max_iters : int (default=500)
      Iteration budget. Running out of it is not an error; ``converged_`` is
      False and a ``ConvergenceWarning`` is issued.

    callbacks : None or list of (str, SolverCallback) tuples (default=None)
      Callbacks in addition to the defaults. A tuple with the same name or
      the same type as a default callback replaces it.

    verbose : int (default=0)
      If > 0, a ``TableHistoryPrintCallback`` prints every iteration.

"""

_docstring_fitted_attributes = """    Attributes
    ----------
    low_rank_ : torch.Tensor
      Low-rank part ``L``, same shape as the input.

    sparse_ : torch.Tensor
      Sparse part ``S``, same shape as the input.

    history_ : skorch.history.History
      One row per iteration with the keys ``iteration``, ``mu``,
      ``residual``, ``residual_best``, ``rank``, ``nnz``, ``objective``,
      ``svt_dur_s``, ``shrink_dur_s`` and ``dur_s``.

    n_iter_ : int
      Iterations run.

    converged_ : bool
      Whether the residual reached ``tol``.

    residual_ : float
      Final relative feasibility residual.

    eta_ : float
      Weight of the l1 term actually used.

    mu0_ : float
      Initial penalty actually used.

    result_ : SeparationResult
      All of the above in one record.

"""


def set_rpca_docs(estimator_class, eta_doc: str):
    """Complete an estimator docstring with the shared solver parameters
    and fitted attributes. The class docstring must contain a ``Parameters``
    section ending with the ``.. solver-params`` marker."""
    doc = estimator_class.__doc__
    doc = doc.replace("    .. eta-param\n", eta_doc)
    doc = insert_before_substring(doc, _docstring_solver_params,
                                  "    .. solver-params")
    doc = doc.replace("    .. solver-params\n", "")
    estimator_class.__doc__ = doc + "\n" + _docstring_fitted_attributes
