"""Two-step permutation test for predictive, zero-inflated biomarkers."""

from .dataset import TrialDataset
from .diagnostics import diagnose, effect_curve, select_cutpoint
from .inference import (
    TestOutcome,
    TwoStepResult,
    aksa_test,
    brown_combine,
    estimate_component_correlation,
    fisher_combine,
    main_effect_test,
    spike_test,
    tail_test,
    two_step,
)
from .perm_engine import PermTrace, SeedSpec, derive_stream, permutation_pvalue
from .simgen import ScenarioSpec, TailDist, generate_pvalue_pairs, generate_trial

__all__ = [
    "PermTrace",
    "ScenarioSpec",
    "SeedSpec",
    "TailDist",
    "TestOutcome",
    "TrialDataset",
    "TwoStepResult",
    "aksa_test",
    "brown_combine",
    "derive_stream",
    "diagnose",
    "effect_curve",
    "estimate_component_correlation",
    "fisher_combine",
    "generate_pvalue_pairs",
    "generate_trial",
    "main_effect_test",
    "permutation_pvalue",
    "select_cutpoint",
    "spike_test",
    "tail_test",
    "two_step",
]

__version__ = "0.1.0"
