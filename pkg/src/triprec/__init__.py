"""Query-driven trip recommendation: self-supervised POI/trip pretraining,
a destination-aware sequence model, and constrained decoding."""

from .config import Config, load_config
from .corpus import Corpus, Poi, PoiTable, Query, Trip, Visit, query_of
from .errors import (ConfigError, DataError, InfeasibleError, NumericError,
                     TriprecError)
from .evaluation import EvalReport, evaluate_loocv, f1_score, pairs_f1
from .selftrain import Model, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Config", "ConfigError", "Corpus", "DataError", "EvalReport",
    "InfeasibleError", "Model", "NumericError", "Poi", "PoiTable", "Query",
    "TrainConfig", "Trip", "TriprecError", "Visit", "evaluate_loocv",
    "f1_score", "load_config", "pairs_f1", "query_of", "train",
    "__version__",
]
