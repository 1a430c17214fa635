"""Concept rule sets learned through a multilayer logical perceptron."""
from .binarizer import Discretizer, FeatureDictionary, binarize, fit_discretizer, load_csv, mdlp_cuts
from .crs import CrsModel, crs_forward, edge_count, predict, render_rules
from .errors import ConfigError, DataError, DimensionError, MllpError, NumericError
from .harness import ExperimentConfig, macro_f1, run_experiment, stratified_kfold
from .simplify import simplify
from .trainer import MllpModel, TrainConfig, extract_crs, init_model, train

__version__ = "0.1.0"
