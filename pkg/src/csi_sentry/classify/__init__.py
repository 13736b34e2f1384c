"""Activity recognition: dataset I/O, features, and three classifiers."""

from .dataset import LABELS, load_dataset, write_dataset
from .dwt import HaarFeatureExtractor, dwt_features, features_matrix, haar_dwt
from .gnb import GaussianNaiveBayesActivityClassifier
from .lstm import LstmActivityClassifier
from .metrics import confusion_matrix, evaluate
from .model_io import load_model, save_model
from .tree import DecisionTreeActivityClassifier

__all__ = [
    "LABELS",
    "load_dataset",
    "write_dataset",
    "haar_dwt",
    "dwt_features",
    "features_matrix",
    "HaarFeatureExtractor",
    "DecisionTreeActivityClassifier",
    "GaussianNaiveBayesActivityClassifier",
    "LstmActivityClassifier",
    "evaluate",
    "confusion_matrix",
    "save_model",
    "load_model",
]
