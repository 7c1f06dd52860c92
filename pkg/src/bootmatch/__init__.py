"""Bootstrap Matching: treatment effects from A/B tests with broken randomization.

Replicates subsample the subjects, match treated to control subjects on
an estimated propensity score, estimate the effect on the matched
sample, and the replicate p-values are combined through multiple-testing
corrections (final p = mean local FDR).
"""

from .data_model import PanelDataset, subset, validate
from .engine import AggregateResult, BootstrapConfig, run, run_replicate
from .multiplicity import MultiplicitySummary, summarize
from .propensity import DesignSpec
from .simgen import SimulationConfig, generate, true_att

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "BootstrapConfig",
    "DesignSpec",
    "MultiplicitySummary",
    "PanelDataset",
    "SimulationConfig",
    "generate",
    "run",
    "run_replicate",
    "subset",
    "summarize",
    "true_att",
    "validate",
]
