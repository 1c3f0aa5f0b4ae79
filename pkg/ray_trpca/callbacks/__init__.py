from ray_trpca.callbacks.solver import (SolverCallback, IterationTimer,
                                        StepTimer, ResidualScoring)
from ray_trpca.callbacks.printing import TableHistoryPrintCallback

__all__ = [
    "SolverCallback", "IterationTimer", "StepTimer", "ResidualScoring",
    "TableHistoryPrintCallback"
]
