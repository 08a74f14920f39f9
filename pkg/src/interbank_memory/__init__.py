"""Interbank trading model with memory and statistically validated networks."""

__version__ = "0.1.0"

from .core import (
    BA,
    LA,
    BankId,
    DirectedWeightedNetwork,
    MemoryLedger,
    ModelParams,
    QuotaProfile,
    Side,
    TransactionRecord,
    build_network,
)
from .ingest import SyntheticSpec, extract_profiles, gen_synthetic_profiles, parse_transactions
from .motifs import census, classify_expression, motif_significance
from .netstats import bidirectional_stats, jaccard, jaccard_matrix, weighted_jaccard
from .simulate import run_simulation, run_window
from .svn import validate_records, validate_window

__all__ = [
    "BA",
    "LA",
    "BankId",
    "DirectedWeightedNetwork",
    "MemoryLedger",
    "ModelParams",
    "QuotaProfile",
    "Side",
    "SyntheticSpec",
    "TransactionRecord",
    "bidirectional_stats",
    "build_network",
    "census",
    "classify_expression",
    "extract_profiles",
    "gen_synthetic_profiles",
    "jaccard",
    "jaccard_matrix",
    "motif_significance",
    "parse_transactions",
    "run_simulation",
    "run_window",
    "validate_records",
    "validate_window",
    "weighted_jaccard",
]
