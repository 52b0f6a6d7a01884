from .data import (FeatureMatrix, CORE_COLUMNS, Standardizer, balance, balance_indices,
                   matrix_from_records, record_key, split_indices, stratified_split)
from .forest import Forest, feature_importance, forest_predict, forest_proba, train_forest
from .model import TrainedModel
from .rnn import Rnn, rnn_predict, rnn_proba, train_rnn
from .svm import LinearSvm, svm_predict, svm_scores, train_svm

__all__ = [
    "FeatureMatrix", "CORE_COLUMNS", "Standardizer", "balance", "balance_indices",
    "matrix_from_records", "record_key", "split_indices", "stratified_split",
    "Forest", "feature_importance", "forest_predict", "forest_proba", "train_forest",
    "TrainedModel", "Rnn", "rnn_predict", "rnn_proba", "train_rnn",
    "LinearSvm", "svm_predict", "svm_scores", "train_svm",
]
