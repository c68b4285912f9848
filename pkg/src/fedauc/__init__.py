"""Privacy-preserving federated AUC with homomorphic encryption."""

from fedauc._core import COMPILED, IMPLEMENTATION
from fedauc.errors import FedAucError, VerificationFailed
from fedauc.he import HeParams, get_backend
from fedauc.metrics import (
    CountVector,
    DecisionGrid,
    LocalDataset,
    exact_auc,
    local_counts,
    make_grid,
    sum_counts,
    trapezoid_auc,
)

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "IMPLEMENTATION", "FedAucError", "VerificationFailed", "HeParams", "get_backend",
    "CountVector", "DecisionGrid", "LocalDataset", "exact_auc", "local_counts", "make_grid",
    "sum_counts", "trapezoid_auc", "__version__",
]
