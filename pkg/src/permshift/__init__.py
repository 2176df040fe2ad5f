"""Cross-domain evaluation of tree-ensemble classifiers on binary feature data."""

from .attribution import (
    BackgroundSet,
    GlobalImportance,
    ImportanceShift,
    ShapAttribution,
    coalition_value,
    global_importance,
    importance_shift,
    shap_exact,
    shap_tree,
    waterfall,
)
from .data import (
    BinaryDataset,
    FeatureCatalog,
    align_to_catalog,
    catalog_intersection,
    load_csv,
    merge_common,
    project,
    stratified_kfold,
    stratified_split,
    write_csv,
)
from .learners import LearnerConfig, TreeEnsembleModel, predict_label, predict_proba, train
from .metrics import EvalReport, aggregate, classification_report, confusion, roc_auc
from .selection import pearson_r, rank_features, select_minimal_topk
from .synth import FeatureGroup, ShiftSpec, default_spec, generate_domain_pair

__version__ = "0.1.0"
