"""Few-shot adaptation of text classifiers to sudden concept shift.

The package turns a K-class post-shift classification problem into K binary
entailment decisions over label-transition prompts, trains a hashed linear
model on the reformulated samples, and benchmarks the approach against
fine-tuning baselines across few-shot budgets with seeded experiment grids.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .corpus import (
    Dataset,
    DatasetError,
    Example,
    LabelSet,
    ShiftCoverageError,
    ShiftSpec,
    apply_shift,
    fewshot_sample,
    load_dataset,
    rebalance,
    save_dataset,
    split,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    emit_report,
    load_result,
    run_experiment,
    save_result,
)
from .methods import (
    METHOD_KINDS,
    MethodSpec,
    load_predictions,
    resolve_catalog,
    run_method,
    save_predictions,
)
from .model import (
    FeaturizerConfig,
    FeatureVector,
    Model,
    TrainConfig,
    featurize,
    grad_check,
    load_model,
    make_binary_scorer,
    save_model,
    score_text,
    train,
    train_joint,
)
from .prompts import (
    DEFAULT_DECOYS,
    CatalogError,
    PromptCatalog,
    builtin_catalog,
    load_catalog,
    randomize_labels,
    save_catalog,
)
from .reformulate import (
    AugmentedDataset,
    EntailSample,
    ScoreCoverageError,
    augment_dataset,
    export_augmented,
    export_scores,
    import_augmented,
    import_scores,
    predict_dataset,
    predict_from_scores,
    predict_label,
)
from .seeding import derive_seed
from .stats import (
    Aggregate,
    ConfusionMatrix,
    MannWhitneyResult,
    RunScore,
    aggregate,
    confusion_from_predictions,
    macro_f1,
    mann_whitney_u,
    per_class_f1,
)
from .synth import SynthConfig, preset_config, synth_generate

__all__ = [
    "Aggregate",
    "AugmentedDataset",
    "CatalogError",
    "ConfigError",
    "ConfusionMatrix",
    "DEFAULT_DECOYS",
    "Dataset",
    "DatasetError",
    "EntailSample",
    "Example",
    "ExperimentConfig",
    "ExperimentResult",
    "FeatureVector",
    "FeaturizerConfig",
    "LabelSet",
    "METHOD_KINDS",
    "MannWhitneyResult",
    "MethodSpec",
    "Model",
    "PromptCatalog",
    "RunScore",
    "ScoreCoverageError",
    "ShiftCoverageError",
    "ShiftSpec",
    "SynthConfig",
    "TrainConfig",
    "aggregate",
    "apply_shift",
    "augment_dataset",
    "builtin_catalog",
    "confusion_from_predictions",
    "derive_seed",
    "emit_report",
    "export_augmented",
    "export_scores",
    "featurize",
    "fewshot_sample",
    "grad_check",
    "import_augmented",
    "import_scores",
    "load_catalog",
    "load_dataset",
    "load_model",
    "load_predictions",
    "load_result",
    "macro_f1",
    "make_binary_scorer",
    "mann_whitney_u",
    "per_class_f1",
    "predict_dataset",
    "predict_from_scores",
    "predict_label",
    "preset_config",
    "randomize_labels",
    "rebalance",
    "resolve_catalog",
    "run_experiment",
    "run_method",
    "save_catalog",
    "save_dataset",
    "save_model",
    "save_predictions",
    "save_result",
    "score_text",
    "split",
    "synth_generate",
    "train",
    "train_joint",
]
