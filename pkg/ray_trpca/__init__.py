from .base import (DecoupledRPCA, MatrixRPCA, SeparationResult, SolverConfig,
                   TensorRPCA, rpca_decoupled, rpca_matrix, rpca_tensor)

__all__ = [
    "DecoupledRPCA", "MatrixRPCA", "SeparationResult", "SolverConfig",
    "TensorRPCA", "rpca_decoupled", "rpca_matrix", "rpca_tensor"
]
