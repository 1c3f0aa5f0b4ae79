import time

from skorch.callbacks import Callback

from ray_trpca.callbacks.constants import DURATION_KEY, RESIDUAL_KEY


class SolverCallback(Callback):
    """Extension of the skorch ``Callback`` class with the notify points of
    the inexact ALM loop.

    ``net`` is the solver estimator; its ``history_`` holds one row per
    iteration."""

    def on_solve_begin(self, net, A=None, **kwargs):
        """Called before the first iteration."""

    def on_solve_end(self, net, A=None, **kwargs):
        """Called after the last iteration."""

    def on_iteration_begin(self, net, iteration=None, **kwargs):
        """Called at the beginning of every iteration."""

    def on_iteration_end(self, net, iteration=None, **kwargs):
        """Called once the iteration's row is recorded."""

    def on_svt_begin(self, net, **kwargs):
        """Called before singular value thresholding."""

    def on_svt_end(self, net, **kwargs):
        """Called after singular value thresholding."""

    def on_shrink_begin(self, net, **kwargs):
        """Called before the element-wise soft threshold."""

    def on_shrink_end(self, net, **kwargs):
        """Called after the element-wise soft threshold."""


class IterationTimer(SolverCallback):
    """Measures the duration of each iteration and writes it to the
    history with the name ``dur_s``.

    """

    def on_iteration_begin(self, net, iteration=None, **kwargs):
        self.iteration_start_time_ = time.time()

    def on_iteration_end(self, net, iteration=None, **kwargs):
        net.history_.record(DURATION_KEY,
                            time.time() - self.iteration_start_time_)


class StepTimer(SolverCallback):
    """Logs the time taken by the two proximal steps as ``svt_dur_s`` and
    ``shrink_dur_s``."""

    def on_svt_begin(self, net, **kwargs):
        self.svt_time_ = time.time()

    def on_svt_end(self, net, **kwargs):
        self.svt_time_ = time.time() - self.svt_time_

    def on_shrink_begin(self, net, **kwargs):
        self.shrink_time_ = time.time()

    def on_shrink_end(self, net, **kwargs):
        self.shrink_time_ = time.time() - self.shrink_time_

    def on_iteration_end(self, net, iteration=None, **kwargs):
        net.history_.record("svt_dur_s", self.svt_time_)
        net.history_.record("shrink_dur_s", self.shrink_time_)


class ResidualScoring(SolverCallback):
    """Flags iterations that improve on the best feasibility residual so
    far as ``residual_best``."""

    def initialize(self):
        self.best_residual_ = float("inf")
        return self

    def on_solve_begin(self, net, A=None, **kwargs):
        self.best_residual_ = float("inf")

    def on_iteration_end(self, net, iteration=None, **kwargs):
        residual = net.history_[-1, RESIDUAL_KEY]
        is_best = residual < self.best_residual_
        if is_best:
            self.best_residual_ = residual
        net.history_.record(RESIDUAL_KEY + "_best", bool(is_best))
