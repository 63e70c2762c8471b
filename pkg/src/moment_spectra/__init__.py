"""Learning sums of ReLUs under the Gaussian from Hermite moment tensors.

The package is organised by stage:

* :mod:`.hermite` - Hermite polynomials, Hermite tensors, ReLU coefficients
* :mod:`.symtensor` - multiset-compressed symmetric tensors
* :mod:`.schur` - Schur polynomials and the moment recursion checks
* :mod:`.datagen` - ground-truth networks and labeled samples
* :mod:`.moments` - empirical and analytic moment tensors
* :mod:`.learner` - subspace extraction, regression and hypotheses
* :mod:`.evalharness` - Monte Carlo and analytic L2 error, experiment runs
"""

__version__ = "0.1.0"

from .datagen import ReluNetwork, Samples, random_network, sample
from .errors import (
    ConfigError,
    FormatError,
    MemoryBudgetError,
    MomentSpectraError,
    SampleSizeOverflow,
    ShapeError,
    SingularSystemError,
)
from .evalharness import l2_error_analytic, l2_error_mc, run_experiment
from .hermite import hermite_eval, hermite_tensor, relu_coeff
from .learner import Hypothesis, LearnConfig, learn, predict
from .moments import analytic_moment, estimate_moment, estimate_moments
from .schur import Partition, jacobi_trudi, schur_bialternant, tensor_schur
from .symtensor import SymTensor, power

__all__ = [
    "__version__",
    "ReluNetwork",
    "Samples",
    "random_network",
    "sample",
    "ConfigError",
    "FormatError",
    "MemoryBudgetError",
    "MomentSpectraError",
    "SampleSizeOverflow",
    "ShapeError",
    "SingularSystemError",
    "l2_error_analytic",
    "l2_error_mc",
    "run_experiment",
    "hermite_eval",
    "hermite_tensor",
    "relu_coeff",
    "Hypothesis",
    "LearnConfig",
    "learn",
    "predict",
    "analytic_moment",
    "estimate_moment",
    "estimate_moments",
    "Partition",
    "jacobi_trudi",
    "schur_bialternant",
    "tensor_schur",
    "SymTensor",
    "power",
]
