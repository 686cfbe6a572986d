"""Selective prediction for in-context learning driven by prompt sensitivity."""

from ._core import (
    ConfigError,
    InsufficientDataError,
    ParseError,
    ProtocolError,
    RunConfig,
    SelectionRecord,
    SenselError,
    TransportError,
    ValidationError,
    apply_contextual,
    apply_threshold,
    assemble_prompt,
    auc_f1_coverage,
    contextual_prior,
    coverage_at_f1,
    coverage_curve,
    f1_macro,
    make_record,
    max_weight_assignment,
    pearson,
    perturb,
    prototypical_calibrate,
    report,
    run,
    score,
    sensitivity,
    word_dropout,
)

__version__ = "0.1.0"
