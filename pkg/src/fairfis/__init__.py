"""Fair feature importance for decision trees, tree ensembles and tree surrogates."""

from .data import DataError, Dataset, TargetVector, load_dataset, validate_dataset, write_dataset
from .ensemble import (
    Ensemble,
    aggregate_importance,
    fit_gradient_boosting,
    fit_random_forest,
    predict_ensemble,
)
from .fairness import (
    BiasMetric,
    ImportanceScores,
    MetricError,
    fairfis_raw,
    fis_raw,
    model_bias,
    normalize,
    tree_importance,
)
from .simulate import SimulationSpec, run_replicates, simulate
from .surrogate import SurrogateReport, fidelity, fit_surrogate
from .tree import Tree, TreeConfig, collect_levels, fit_tree, predict, predict_proba

__version__ = "0.1.0"
