"""Queue-length distributions for batch-Poisson queues with semi-Markov services."""
from .distributions import BatchDistribution, ServiceDistribution
from .epochs import Epoch, EpochLaw, epoch_coefficients, epoch_mean, epoch_pgf
from .model import ModelMoments, SemiMarkovModel, a_matrix, arrival_count_pmf, model_moments
from .spectral import RootSet, count_zeros, find_roots
from .stationary import (StationarySolution, departure_pgf, mxg1_reference, queue_moments,
                         solve_boundary, two_type_closed_form, two_type_mean)
from .transient import (TransientState, TransientTransformSolution, mean_curve, step,
                        transient_transform, two_type_transient)

__all__ = [
    "BatchDistribution", "ServiceDistribution", "SemiMarkovModel", "ModelMoments",
    "a_matrix", "model_moments", "arrival_count_pmf", "RootSet", "find_roots", "count_zeros",
    "StationarySolution", "solve_boundary", "departure_pgf", "queue_moments",
    "two_type_closed_form", "two_type_mean", "mxg1_reference", "TransientState", "step",
    "mean_curve", "TransientTransformSolution", "transient_transform", "two_type_transient",
    "Epoch", "EpochLaw", "epoch_pgf", "epoch_coefficients", "epoch_mean",
]
