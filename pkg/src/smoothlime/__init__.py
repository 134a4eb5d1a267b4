"""SmoothGrad and C-LIME feature attributions over Gaussian perturbations."""

from .datasets import Dataset, TrainSplitStandardizer, generate_simulated, load_csv, split_and_normalize
from .exceptions import (DegenerateFeature, DimensionMismatch, EmptySplit, NonBinaryTarget,
                         NotSPD, ParseError, RankDeficient, TooFewSamples)
from .explainers import (AttributionVector, CLime, ExpectedExplanation, SmoothGrad,
                         SurrogateFit, clime, clime_ridge, expected_explanation_mc,
                         explanation_distance, ols_fit, smoothgrad)
from .functions import CallableFunction, LinearCombination, LinearFunction, QuadraticFunction
from .model import Mlp, MLPClassifier, TrainConfig, estimate_grad_max, train
from .sampling import PerturbationConfig, derive_seed, gaussian_perturbations

__version__ = "0.1.0"
