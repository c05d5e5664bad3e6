"""Stability measurement and noise calibration for linear-model ensembles."""

from ._pacstab import (
    Dataset,
    DeviationReport,
    DimensionMismatch,
    Divergence,
    Error,
    FormatError,
    InvalidArgument,
    Model,
    Tree,
    deviation_report,
    fnv1a64,
    hash64,
    least_squares_closed_form,
    load_dataset,
    load_model,
    load_tree,
    member_seed,
    perturb_inputs,
    privatize,
    random_subset,
    remove_points,
    run_experiment,
    save_dataset,
    save_model,
    synthesize_dataset,
    train,
    train_ensemble,
    train_tree,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
