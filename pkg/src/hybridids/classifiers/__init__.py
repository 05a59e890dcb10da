from .models import (
    ALIASES,
    CONSTANT,
    KINDS,
    ClassifierSpec,
    ConstantModel,
    DecisionTreeModel,
    GaussianNBModel,
    GradientBoostingModel,
    KNNModel,
    RandomForestModel,
    TrainedClassifier,
    canonical_kind,
    logistic_loss,
    model_from_dict,
    predict,
    train,
)
from .tree import Split, Tree, best_split, impurity

__all__ = [
    "ALIASES", "CONSTANT", "KINDS", "ClassifierSpec", "ConstantModel", "DecisionTreeModel",
    "GaussianNBModel", "GradientBoostingModel", "KNNModel", "RandomForestModel", "Split",
    "TrainedClassifier", "Tree", "best_split", "canonical_kind", "impurity", "logistic_loss",
    "model_from_dict", "predict", "train",
]
