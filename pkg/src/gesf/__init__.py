"""Graph embeddings built from learned set functions over typed neighborhoods."""

from .errors import (ConfigurationError, GesfError, NumericError, ParseError, PreconditionError,
                     ResourceError, TrainingError, UsageError, ValidationError)
from .graph import Graph, Split, adjacency, load_graph, make_split, neighbors
from .model import (GesfModel, TrainConfig, evaluate, init_model, objective, predict, represent,
                    train)
from .setfn import (DeepSetModel, GroupedInput, appendix_example, brute_symmetrize, deepset_eval,
                    fit_invariant, monomial_sym, power_sums)
from .spectral import SpectralBasis, eigh_truncated, proximity_column, proximity_column_grad

__version__ = "0.1.0"
