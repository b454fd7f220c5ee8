"""Predict policy-document citations of research articles from online attention.

A from-scratch binary classification toolkit: data model and ingestion,
class balancing, stratified splitting and cross-validation, three
classifiers (multinomial naive Bayes, random forest, RBF-kernel SVM),
feature ranking, a synthetic data generator, and an experiment pipeline
with deterministic reports.
"""

from .errors import (
    BalanceError,
    ConfigError,
    DataError,
    FitError,
    FoldError,
    ImportanceError,
    ParseError,
    PolicyCiteError,
    SchemaError,
    SplitError,
    UnsupportedModelError,
    ValidationError,
)
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    Metrics,
    confusion,
    kfold,
    mean_metrics,
    metrics,
    split_train_test,
)
from .experiment import ExperimentConfig, Report, run_experiment, write_report
from .features import (
    EXCLUDED_SOURCES,
    FEATURE_ORDER,
    N_FEATURES,
    ArticleRecord,
    FeatureVector,
    RecordSet,
    balance,
    binarize_label,
    load_records,
    records_to_set,
    select_features,
)
from .forest import RandomForest, Tree, TreeNode, best_split, fit_tree, gini
from .naive_bayes import MultinomialNB
from .ranking import FeatureRanking, rank_features
from .svm import Standardizer, SvmClassifier, rbf_kernel
from .synth import FeatureParams, GenSpec, generate, load_genspec

__version__ = "0.1.0"

__all__ = [
    "ArticleRecord",
    "BalanceError",
    "ConfigError",
    "ConfusionMatrix",
    "DataError",
    "EXCLUDED_SOURCES",
    "EvalReport",
    "ExperimentConfig",
    "FEATURE_ORDER",
    "FeatureParams",
    "FeatureRanking",
    "FeatureVector",
    "FitError",
    "FoldError",
    "GenSpec",
    "ImportanceError",
    "Metrics",
    "MultinomialNB",
    "N_FEATURES",
    "ParseError",
    "PolicyCiteError",
    "RandomForest",
    "RecordSet",
    "Report",
    "SchemaError",
    "SplitError",
    "Standardizer",
    "SvmClassifier",
    "Tree",
    "TreeNode",
    "UnsupportedModelError",
    "ValidationError",
    "balance",
    "best_split",
    "binarize_label",
    "confusion",
    "fit_tree",
    "generate",
    "gini",
    "kfold",
    "load_genspec",
    "load_records",
    "mean_metrics",
    "metrics",
    "rank_features",
    "rbf_kernel",
    "records_to_set",
    "run_experiment",
    "select_features",
    "split_train_test",
    "write_report",
]
