"""rulelens: model-agnostic local-to-global rule explanations for black-box
tabular classifiers.

Local step: audit the black box around one instance with a synthetic
neighborhood, fit a surrogate decision tree, and read off a factual rule
plus minimal-change counterfactuals. Global step: merge all local rules
bottom-up into a dendrogram and keep the BIC-optimal horizontal cut as a
compact global proxy of the black box.
"""

from .algebra import (
    BackgroundRule,
    SubsumptionResult,
    affine_generalize,
    compose_background,
    merge,
    param_instantiate,
    subsumes,
)
from .blackbox import (
    CallableOracle,
    ConstantOracle,
    ExternalEndpoint,
    ForestOracle,
    Oracle,
    ProtocolError,
    ThresholdOracle,
    connect_external,
    load_forest_dump,
    relabel,
    train_forest,
)
from .dataset import (
    Feature,
    FeatureSchema,
    LabeledDataset,
    Record,
    SchemaMismatchError,
    categorical,
    continuous,
    infer_schema,
)
from .local2global import (
    Dendrogram,
    GlobalExplanation,
    build_dendrogram,
    collect_local,
    cpar_predict,
    dendrogram_dot,
    explain_dataset,
    fidelity,
    format_global,
    jaccard_distance,
    majority_class,
    q_bic,
    select_cut,
)
from .neighborhood import (
    Neighborhood,
    NeighborhoodConfig,
    gen_genetic,
    gen_uniform,
    generate,
    mixed_distance,
)
from .rules import (
    CategoricalEq,
    CounterfactualRule,
    LinearConstraint,
    NumericInterval,
    ParamRule,
    Premise,
    Rule,
    RuleMeasures,
    covers,
    laplace_accuracy,
    measure,
    premise_mask,
    significance_test,
)
from .ruletext import (
    RuleParseError,
    format_param_rule,
    format_premise,
    format_rule,
    parse_rule,
)
from .surrogate import (
    Explanation,
    explain,
    extract_counterfactuals,
    extract_rule,
    fit_tree,
    format_explanation,
)

__version__ = "0.1.0"

__all__ = [
    "BackgroundRule",
    "CallableOracle",
    "CategoricalEq",
    "ConstantOracle",
    "CounterfactualRule",
    "Dendrogram",
    "Explanation",
    "ExternalEndpoint",
    "Feature",
    "FeatureSchema",
    "ForestOracle",
    "GlobalExplanation",
    "LabeledDataset",
    "LinearConstraint",
    "Neighborhood",
    "NeighborhoodConfig",
    "NumericInterval",
    "Oracle",
    "ParamRule",
    "Premise",
    "ProtocolError",
    "Record",
    "Rule",
    "RuleMeasures",
    "RuleParseError",
    "SchemaMismatchError",
    "SubsumptionResult",
    "ThresholdOracle",
    "affine_generalize",
    "build_dendrogram",
    "categorical",
    "collect_local",
    "compose_background",
    "connect_external",
    "continuous",
    "covers",
    "cpar_predict",
    "dendrogram_dot",
    "explain",
    "explain_dataset",
    "extract_counterfactuals",
    "extract_rule",
    "fidelity",
    "fit_tree",
    "format_explanation",
    "format_global",
    "format_param_rule",
    "format_premise",
    "format_rule",
    "gen_genetic",
    "gen_uniform",
    "generate",
    "infer_schema",
    "jaccard_distance",
    "laplace_accuracy",
    "load_forest_dump",
    "majority_class",
    "measure",
    "merge",
    "param_instantiate",
    "parse_rule",
    "premise_mask",
    "q_bic",
    "relabel",
    "select_cut",
    "significance_test",
    "subsumes",
    "train_forest",
]
