from .forest import Forest, Tree, default_mtry, gini_importance, predict, train
from .selection import RFParams, SelectionTrace, TraceStep, kfold_cv, select_variables, tune

__all__ = [
    "Forest", "Tree", "default_mtry", "gini_importance", "predict", "train",
    "RFParams", "SelectionTrace", "TraceStep", "kfold_cv", "select_variables", "tune",
]
